use crate::error::{Error, Result};

/// Autonomous ODE system on a flat state vector.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Projects the state back onto its admissible set after a step and
    /// returns how many components were moved.
    fn clamp(&self, _y: &mut [f64]) -> usize {
        0
    }
}

/// Any closure `f(y, dy)` is a system of the given dimension.
pub struct FnSystem<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> OdeSystem for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        (self.f)(y, dy);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub clamp_events: usize,
}

struct Work {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Self { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] }
    }
}

fn eval<S: OdeSystem>(sys: &S, y: &[f64], dy: &mut [f64], t: f64) -> Result<()> {
    sys.rhs(y, dy)?;
    if dy.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { t });
    }
    Ok(())
}

fn rk4_step<S: OdeSystem>(sys: &S, t: f64, y: &mut [f64], h: f64, w: &mut Work) -> Result<()> {
    let n = y.len();
    eval(sys, y, &mut w.k1, t)?;
    for i in 0..n {
        w.tmp[i] = y[i] + 0.5 * h * w.k1[i];
    }
    eval(sys, &w.tmp, &mut w.k2, t + 0.5 * h)?;
    for i in 0..n {
        w.tmp[i] = y[i] + 0.5 * h * w.k2[i];
    }
    eval(sys, &w.tmp, &mut w.k3, t + 0.5 * h)?;
    for i in 0..n {
        w.tmp[i] = y[i] + h * w.k3[i];
    }
    eval(sys, &w.tmp, &mut w.k4, t + h)?;
    for i in 0..n {
        y[i] += h / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
    }
    Ok(())
}

/// Advances `y` from `t0` to `t1` with fixed steps no longer than `step`
/// (the step is shortened uniformly so the grid lands on `t1`). Returns the
/// number of clamp events.
pub fn advance<S: OdeSystem>(sys: &S, y: &mut [f64], t0: f64, t1: f64, step: f64) -> Result<usize> {
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!("step {step} must be positive")));
    }
    if y.len() != sys.dim() {
        return Err(Error::Dimension(format!("state has {} entries, system {}", y.len(), sys.dim())));
    }
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(0);
    }
    let steps = ((span / step) - 1e-9).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let mut w = Work::new(y.len());
    let mut clamps = 0;
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        rk4_step(sys, t, y, h, &mut w)?;
        let c = sys.clamp(y);
        if c > 0 {
            log::debug!("clamped {c} components at t = {:.4}", t + h);
        }
        clamps += c;
    }
    Ok(clamps)
}

/// Classical fourth-order integration recording every step.
pub fn integrate<S: OdeSystem>(sys: &S, y0: &[f64], t_span: (f64, f64), step: f64) -> Result<Solution> {
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!("step {step} must be positive")));
    }
    let (t0, t1) = t_span;
    let steps = (((t1 - t0) / step) - 1e-9).ceil().max(0.0) as usize;
    let mut y = y0.to_vec();
    let mut times = vec![t0];
    let mut states = vec![y.clone()];
    let mut clamp_events = 0;
    for k in 0..steps {
        let a = t0 + k as f64 * step;
        let b = (a + step).min(t1);
        clamp_events += advance(sys, &mut y, a, b, step)?;
        times.push(b);
        states.push(y.clone());
    }
    Ok(Solution { times, states, clamp_events })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let sys = FnSystem { dim: 1, f: |y: &[f64], dy: &mut [f64]| dy[0] = -y[0] };
        let sol = integrate(&sys, &[1.0], (0.0, 5.0), 0.01).unwrap();
        assert_eq!(sol.states.len(), 501);
        assert!((sol.states[500][0] - (-5.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn zero_rhs_is_constant() {
        let sys = FnSystem { dim: 2, f: |_: &[f64], dy: &mut [f64]| dy.fill(0.0) };
        let sol = integrate(&sys, &[0.3, 0.7], (0.0, 1.0), 0.1).unwrap();
        assert!(sol.states.iter().all(|s| s == &vec![0.3, 0.7]));
    }

    #[test]
    fn non_finite_derivative_is_an_error() {
        let sys = FnSystem { dim: 1, f: |_: &[f64], dy: &mut [f64]| dy[0] = f64::NAN };
        assert!(matches!(integrate(&sys, &[1.0], (0.0, 1.0), 0.5), Err(Error::NonFinite { .. })));
        assert!(integrate(&sys, &[1.0], (0.0, 1.0), 0.0).is_err());
    }
}

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::instance::{Coupling, CovidInstance};
use super::params::{compute_b1, CellRates, DiseaseParams};
use crate::error::{dim, invalid, Error, Result};
use crate::linalg;

pub const CERT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub alpha: f64,
    pub lambda_max: f64,
    /// Spectral radius of `diag(b1) diag(s - psi v) A`; infinite when `alpha`
    /// is beyond the rate limit.
    pub discrete_radius: f64,
    pub satisfied: bool,
}

/// Infected block of the linearization after vaccinating `v`:
/// `[[diag(beta_a) S K - (eps + r_a) I, diag(beta_s) S K], [eps I, -diag(r_s + kappa)]]`
/// with `S = diag(s - psi v)`.
pub fn infected_jacobian(rates: &CellRates, k: &DMatrix<f64>, s_eff: &DVector<f64>) -> DMatrix<f64> {
    let n = s_eff.len();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let sk = s_eff[i] * k[(i, j)];
            m[(i, j)] = rates.beta_a[i] * sk;
            m[(i, n + j)] = rates.beta_s[i] * sk;
        }
        m[(i, i)] -= rates.epsilon + rates.r_a;
        m[(n + i, i)] = rates.epsilon;
        m[(n + i, n + i)] = -(rates.r_s[i] + rates.kappa[i]);
    }
    m
}

/// `lambda_max(L D^-1)` for the next-generation split of the infected block.
pub fn next_generation_radius(rates: &CellRates, k: &DMatrix<f64>, s: &DVector<f64>) -> Result<f64> {
    let n = s.len();
    let mut l = DMatrix::zeros(2 * n, 2 * n);
    let mut d = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let sk = s[i] * k[(i, j)];
            l[(i, j)] = rates.beta_a[i] * sk;
            l[(i, n + j)] = rates.beta_s[i] * sk;
        }
        d[(i, i)] = rates.epsilon + rates.r_a;
        d[(n + i, i)] = -rates.epsilon;
        d[(n + i, n + i)] = rates.r_s[i] + rates.kappa[i];
    }
    let d_inv = d.try_inverse().ok_or_else(|| Error::Solver("singular D in next-generation split".into()))?;
    Ok(linalg::max_real_eigenvalue(&(l * d_inv))?.max(0.0))
}

pub fn effective_reproduction_number(inst: &CovidInstance) -> Result<f64> {
    inst.validate()?;
    let rates = inst.rates()?;
    let cp = inst.coupling()?;
    next_generation_radius(&rates, &cp.k, &DVector::from_vec(inst.state.s.clone()))
}

/// Rescales the transmission scalar so that Rt hits `target`. Rt is linear in
/// the scalar, so one rescale normally lands within tolerance; bisection on
/// the scalar is the fallback.
pub fn calibrate_transmission(inst: &CovidInstance, target: f64) -> Result<DiseaseParams> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(invalid(format!("target reproduction number {target} is unreachable")));
    }
    let base = effective_reproduction_number(inst)?;
    if target == 0.0 {
        return Ok(inst.params.scaled_transmission(0.0));
    }
    if !(base > 0.0) {
        return Err(invalid("template transmission is zero; cannot rescale to a positive target"));
    }
    let rt_at = |f: f64| effective_reproduction_number(&inst.with_params(inst.params.scaled_transmission(f)));
    let factor = target / base;
    if (rt_at(factor)? - target).abs() <= 1e-6 {
        return Ok(inst.params.scaled_transmission(factor));
    }
    let (mut lo, mut hi) = (0.0, factor * 2.0);
    while rt_at(hi)? < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let rt = rt_at(mid)?;
        if (rt - target).abs() <= 1e-6 {
            return Ok(inst.params.scaled_transmission(mid));
        }
        if rt < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Solver("transmission calibration did not converge".into()))
}

/// Susceptible fractions after vaccinating `v`; errors outside `0 <= v <= s`.
pub fn vaccinated_susceptible(s: &[f64], v: &[f64], psi: f64) -> Result<DVector<f64>> {
    if v.len() != s.len() {
        return Err(dim(format!("allocation has {} cells, state {}", v.len(), s.len())));
    }
    for (i, (&vi, &si)) in v.iter().zip(s).enumerate() {
        if !(vi >= -1e-12 && vi <= si + 1e-12) {
            return Err(Error::AllocationOutOfBox { cell: i, value: vi, cap: si });
        }
    }
    Ok(DVector::from_iterator(s.len(), s.iter().zip(v).map(|(si, vi)| (si - psi * vi.clamp(0.0, *si)).max(0.0))))
}

pub fn certificate_from_parts(rates: &CellRates, cp: &Coupling, s_eff: &DVector<f64>, alpha: f64) -> Result<StabilityCertificate> {
    let m = infected_jacobian(rates, &cp.k, s_eff);
    let lambda_max = linalg::max_real_eigenvalue(&m)?;
    let satisfied = lambda_max <= -alpha + CERT_TOL;
    let discrete_radius = match compute_b1(rates, alpha) {
        Ok(b1) => {
            let n = s_eff.len();
            let dm = DMatrix::from_fn(n, n, |i, j| b1[i] * s_eff[i] * cp.k[(i, j)]);
            linalg::spectral_radius(&dm)?
        }
        Err(Error::InfeasibleRate { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let margin = 1e-6;
    if (lambda_max + alpha).abs() > margin && (discrete_radius - 1.0).abs() > margin {
        let discrete_ok = discrete_radius <= 1.0;
        if discrete_ok != satisfied {
            log::warn!(
                "continuous and discrete certificates disagree: lambda_max = {lambda_max}, radius = {discrete_radius}"
            );
        }
    }
    Ok(StabilityCertificate { alpha, lambda_max, discrete_radius, satisfied })
}

pub fn check_decay_certificate(inst: &CovidInstance, v: &[f64], alpha: f64) -> Result<StabilityCertificate> {
    inst.validate()?;
    let rates = inst.rates()?;
    let cp = inst.coupling()?;
    let s_eff = vaccinated_susceptible(&inst.state.s, v, inst.params.psi)?;
    certificate_from_parts(&rates, &cp, &s_eff, alpha)
}

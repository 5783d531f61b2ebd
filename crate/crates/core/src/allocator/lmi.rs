//! Diagonal LMI `diag(u) <= k_bar^-1` by eigenvector cutting planes.
//!
//! The variables are rescaled to `y = u / ceiling` so the problem reads
//! `diag(y) <= Q`, `Q = (G^1/2 k_bar G^1/2)^-1`, `y_lo <= y <= 1`. Each round
//! solves an LP over the box and the cuts collected so far (an upper bound),
//! cuts off every negative eigendirection of `Q - diag(y_lp)`, then walks from
//! an interior point towards `y_lp` to the PSD boundary (a feasible lower
//! bound) and adds the supporting cut there.

use nalgebra::{DMatrix, DVector};

use super::problem::{AllocationProblem, AllocationResult, SolverPath, SolverStats};
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::lp::{Cmp, LinearProgram, LpOutcome};

#[derive(Debug, Clone, Copy)]
pub struct LmiOptions {
    pub rel_gap: f64,
    pub max_iter: usize,
}

impl Default for LmiOptions {
    fn default() -> Self {
        Self { rel_gap: 1e-6, max_iter: 3000 }
    }
}

pub(crate) struct Scaled {
    pub active: Vec<usize>,
    pub g: DVector<f64>,
    pub kt: DMatrix<f64>,
}

pub(crate) fn scaled_coupling(prob: &AllocationProblem) -> Scaled {
    let active: Vec<usize> = (0..prob.len()).filter(|&i| prob.ceiling[i] > 0.0).collect();
    let m = active.len();
    let g = DVector::from_iterator(m, active.iter().map(|&i| prob.ceiling[i]));
    let kt = DMatrix::from_fn(m, m, |a, b| {
        let (i, j) = (active[a], active[b]);
        (g[a] * g[b]).sqrt() * prob.k_bar[(i, j)]
    });
    Scaled { active, g, kt }
}

/// Positive definiteness of the coupling, judged on the scaled matrix so the
/// test does not depend on population units.
pub fn coupling_is_pd(prob: &AllocationProblem) -> bool {
    let sc = scaled_coupling(prob);
    if sc.active.is_empty() {
        return true;
    }
    if !linalg::is_symmetric(&sc.kt, 1e-9) {
        return false;
    }
    let eig = linalg::sym_eigenvalues(&sc.kt);
    let top = eig.last().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
    eig[0] > 1e-10 * top.max(1.0)
}

fn min_eig(q: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let mut m = q.clone();
    for i in 0..y.len() {
        m[(i, i)] -= y[i];
    }
    linalg::sym_min_eigenvalue(&m)
}

/// Largest `t` in `[0, 1]` with `Q - diag(from + t (to - from))` PSD, given it holds at 0.
fn boundary_step(q: &DMatrix<f64>, from: &DVector<f64>, to: &DVector<f64>) -> f64 {
    if min_eig(q, to) >= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if min_eig(q, &(from + (to - from) * mid)) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    lo
}

struct Cut {
    coeffs: Vec<f64>,
    rhs: f64,
    idle: usize,
}

fn eigen_cut(q: &DMatrix<f64>, w: &DVector<f64>) -> Cut {
    let rhs = (w.transpose() * q * w)[(0, 0)];
    Cut { coeffs: w.iter().map(|x| x * x).collect(), rhs, idle: 0 }
}

pub fn solve_diagonal_lmi(prob: &AllocationProblem) -> Result<AllocationResult> {
    solve_diagonal_lmi_with(prob, LmiOptions::default())
}

pub fn solve_diagonal_lmi_with(prob: &AllocationProblem, opts: LmiOptions) -> Result<AllocationResult> {
    prob.validate()?;
    let n = prob.len();
    let sc = scaled_coupling(prob);
    let m = sc.active.len();
    let mut u_full = prob.ceiling.clone();
    let trivial = SolverStats { path: SolverPath::Trivial, iterations: 0, gap: 0.0, radius: 0.0 };
    if m == 0 {
        return prob.result_from_u(&u_full, trivial);
    }
    if !coupling_is_pd(prob) {
        return Err(invalid("coupling matrix is not positive definite; use the bilinear path"));
    }
    let eig = linalg::sym_eigenpairs(&sc.kt);
    if eig.last().map_or(0.0, |p| p.0) <= 1.0 {
        return prob.result_from_u(&u_full, trivial);
    }
    let mut q = DMatrix::zeros(m, m);
    for (lam, vec) in &eig {
        q += vec * vec.transpose() / *lam;
    }
    let q = linalg::symmetrize(&q);
    let qscale = q.amax().max(1.0);

    let ylo = DVector::from_iterator(
        m,
        sc.active.iter().map(|&i| ((prob.ceiling[i] - prob.slope[i] * prob.cap[i]) / prob.ceiling[i]).clamp(0.0, 1.0)),
    );
    if min_eig(&q, &ylo) < -1e-10 * qscale {
        return Err(Error::Infeasible { alpha: prob.alpha });
    }
    let weights = prob.u_weights();
    let c: Vec<f64> = sc.active.iter().enumerate().map(|(a, &i)| weights[i] * sc.g[a]).collect();
    let cmax = c.iter().copied().fold(0.0, f64::max);
    let c: Vec<f64> = if cmax > 0.0 { c.iter().map(|x| x / cmax).collect() } else { c };
    let obj = |y: &DVector<f64>| -> f64 { y.iter().zip(&c).map(|(a, b)| a * b).sum() };

    // Interior point halfway to the boundary along the box diagonal.
    let ones = DVector::from_element(m, 1.0);
    let t0 = boundary_step(&q, &ylo, &ones);
    let center = &ylo + (&ones - &ylo) * (0.5 * t0);

    let mut cuts: Vec<Cut> = Vec::new();
    let mut best_y = ylo.clone();
    let mut lower = obj(&ylo);
    let mut upper = f64::INFINITY;
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut lp = LinearProgram::maximize(c.clone());
        for a in 0..m {
            lp.bounds(a, ylo[a], 1.0);
        }
        for cut in &cuts {
            lp.constraint(cut.coeffs.clone(), Cmp::Le, cut.rhs);
        }
        let y_lp = match lp.solve()? {
            LpOutcome::Optimal { x, .. } => DVector::from_vec(x),
            LpOutcome::Infeasible => {
                // Numerical trouble with near-duplicate cuts; restart from the boundary cuts only.
                cuts.retain(|c| c.idle == 0);
                continue;
            }
            LpOutcome::Unbounded => return Err(Error::Solver("bounded LP reported unbounded".into())),
        };
        upper = upper.min(obj(&y_lp));
        for cut in cuts.iter_mut() {
            let lhs: f64 = cut.coeffs.iter().zip(y_lp.iter()).map(|(a, b)| a * b).sum();
            if lhs < cut.rhs - 1e-9 * cut.rhs.abs().max(1.0) {
                cut.idle += 1;
            } else {
                cut.idle = 0;
            }
        }
        let mut slack = q.clone();
        for i in 0..m {
            slack[(i, i)] -= y_lp[i];
        }
        let pairs = linalg::sym_eigenpairs(&slack);
        if pairs[0].0 >= 0.0 {
            best_y = y_lp.clone();
            gap = 0.0;
            break;
        }
        for (lam, w) in &pairs {
            if *lam < 0.0 {
                cuts.push(eigen_cut(&q, w));
            }
        }
        let t = boundary_step(&q, &center, &y_lp);
        let y_b = &center + (&y_lp - &center) * t;
        if obj(&y_b) > lower {
            lower = obj(&y_b);
            best_y = y_b.clone();
        }
        let mut at_b = q.clone();
        for i in 0..m {
            at_b[(i, i)] -= y_b[i];
        }
        let (_, w) = linalg::sym_eigenpairs(&at_b).swap_remove(0);
        cuts.push(eigen_cut(&q, &w));
        gap = (upper - lower) / upper.abs().max(1e-300);
        if gap <= opts.rel_gap {
            break;
        }
        if cuts.len() > 6 * m + 20 {
            cuts.retain(|c| c.idle < 5);
        }
    }
    if gap > opts.rel_gap {
        log::warn!("LMI cutting planes stopped at relative gap {gap:.3e} after {iterations} rounds");
    }
    for (a, &i) in sc.active.iter().enumerate() {
        u_full[i] = best_y[a].clamp(ylo[a], 1.0) * sc.g[a];
    }
    debug_assert_eq!(u_full.len(), n);
    prob.result_from_u(&u_full, SolverStats { path: SolverPath::Lmi, iterations, gap, radius: 0.0 })
}

use serde::{Deserialize, Serialize};

use super::bilinear::solve_bilinear;
use super::lmi::{coupling_is_pd, solve_diagonal_lmi};
use super::problem::{build_problem, covid_certificate, AllocationProblem, AllocationResult};
use crate::error::{invalid, Error, Result};
use crate::model::certificate::infected_jacobian;
use crate::model::CovidInstance;
use crate::linalg;
use nalgebra::DVector;

/// Minimum doses at the problem's decay rate, routed on positive definiteness.
pub fn solve_min_doses(prob: &AllocationProblem) -> Result<AllocationResult> {
    if coupling_is_pd(prob) {
        solve_diagonal_lmi(prob)
    } else {
        solve_bilinear(prob)
    }
}

pub fn solve_allocation(inst: &CovidInstance, alpha: f64) -> Result<AllocationResult> {
    let prob = build_problem(inst, alpha)?;
    let mut res = solve_min_doses(&prob)?;
    res.certificate = Some(covid_certificate(inst, &res.v, alpha)?);
    Ok(res)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub alpha: f64,
    pub bracket: (f64, f64),
    pub probes: usize,
    pub result: AllocationResult,
}

/// Bisection on the decay rate: the largest `alpha` in `[lo, hi]` whose
/// minimum-dose allocation fits in `budget`. `build` must produce the
/// problem at a given rate; `lo` must be feasible at zero doses.
pub fn bisect_decay<F>(budget: f64, lo: f64, hi: f64, width: f64, mut build: F) -> Result<SearchOutcome>
where
    F: FnMut(f64) -> Result<AllocationProblem>,
{
    if !(budget >= 0.0) {
        return Err(invalid(format!("budget {budget} must be nonnegative")));
    }
    let slack = 1e-9 * budget.max(1.0);
    let mut probes = 0;
    let mut probe = |alpha: f64| -> Result<Option<AllocationResult>> {
        probes += 1;
        match solve_min_doses(&build(alpha)?) {
            Ok(r) if r.total_doses <= budget + slack => Ok(Some(r)),
            Ok(_) | Err(Error::Infeasible { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let mut best = probe(lo)?.ok_or_else(|| Error::Solver(format!("lower bracket alpha = {lo} is not feasible")))?;
    let (mut a, mut b) = (lo, hi);
    if let Some(r) = probe(hi)? {
        return Ok(SearchOutcome { alpha: hi, bracket: (lo, hi), probes: 2, result: r });
    }
    while b - a >= width {
        let mid = 0.5 * (a + b);
        match probe(mid)? {
            Some(r) => {
                a = mid;
                best = r;
            }
            None => b = mid,
        }
    }
    drop(probe);
    Ok(SearchOutcome { alpha: a, bracket: (lo, hi), probes, result: best })
}

/// Decay rate certified with no vaccination: `-lambda_max(M(t0))`.
pub fn unvaccinated_decay(inst: &CovidInstance) -> Result<f64> {
    let rates = inst.rates()?;
    let cp = inst.coupling()?;
    let m = infected_jacobian(&rates, &cp.k, &DVector::from_vec(inst.state.s.clone()));
    Ok(-linalg::max_real_eigenvalue(&m)?)
}

pub const BRACKET_WIDTH: f64 = 1e-5;

/// Maximizes the certified decay rate under a dose budget (persons).
pub fn max_decay_binary_search(inst: &CovidInstance, budget: f64, alpha_range: Option<(f64, f64)>) -> Result<SearchOutcome> {
    inst.validate()?;
    if !(budget >= 0.0) {
        return Err(invalid(format!("budget {budget} must be nonnegative")));
    }
    let alpha0 = unvaccinated_decay(inst)?;
    let limit = inst.rates()?.rate_limit();
    let (lo, hi) = alpha_range.unwrap_or(((-2.0f64).min(alpha0 - 1e-3), limit - 1e-4));
    let lo = lo.min(alpha0 - 1e-3);
    let hi = hi.min(limit - 1e-4);
    let mut out = bisect_decay(budget, lo, hi, BRACKET_WIDTH, |a| build_problem(inst, a))?;
    if out.alpha < alpha0 && alpha0 < hi {
        // Zero doses already certify alpha0; report the raw eigenvalue rate.
        out.alpha = alpha0;
        out.result = solve_allocation(inst, alpha0)?;
    }
    let cert = covid_certificate(inst, &out.result.v, out.alpha)?;
    out.result.alpha = out.alpha;
    out.result.certificate = Some(cert);
    Ok(out)
}

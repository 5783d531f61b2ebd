use nalgebra::DMatrix;

use super::problem::{AllocationProblem, AllocationResult};
use super::search::{bisect_decay, solve_min_doses, SearchOutcome, BRACKET_WIDTH};
use crate::dynamics::bubar::{bubar_jacobian, BubarModel, BubarState};
use crate::error::{invalid, Result};
use crate::linalg;
use crate::model::certificate::CERT_TOL;
use crate::model::StabilityCertificate;

/// Problem in the shared form with `k_bar = C diag(1 / (N - D))` and
/// `z_i = b1 u_i (S_i + Sx_i - psi v_i S_i)`, dosing `S + I + R` per unit `v`.
pub fn build_bubar_problem(model: &BubarModel, st: &BubarState, alpha: f64) -> Result<AllocationProblem> {
    model.validate()?;
    st.validate(model)?;
    let b1 = model.b1(alpha)?;
    let g = model.groups();
    let k_bar = DMatrix::from_fn(g, g, |i, j| model.contact[(i, j)] / (model.population[j] - st.d[j]).max(1e-300));
    Ok(AllocationProblem {
        k_bar,
        b1: vec![b1; g],
        s: st.s.clone(),
        population: model.population.clone(),
        psi: model.psi,
        alpha,
        ceiling: (0..g).map(|i| b1 * model.u[i] * (st.s[i] + st.sx[i])).collect(),
        slope: (0..g).map(|i| b1 * model.u[i] * model.psi * st.s[i]).collect(),
        cap: vec![1.0; g],
        cost: (0..g).map(|i| st.eligible(i)).collect(),
    })
}

pub fn bubar_certificate(model: &BubarModel, st: &BubarState, v: &[f64], alpha: f64) -> Result<StabilityCertificate> {
    let lambda_max = linalg::max_real_eigenvalue(&bubar_jacobian(model, st, v))?;
    let discrete_radius = match build_bubar_problem(model, st, alpha) {
        Ok(p) => p.radius(&p.u_from_v(v))?,
        Err(_) => f64::INFINITY,
    };
    Ok(StabilityCertificate { alpha, lambda_max, discrete_radius, satisfied: lambda_max <= -alpha + CERT_TOL })
}

/// Minimum doses certifying decay rate `alpha`; `supply` (persons) only bounds the answer.
pub fn solve_bubar_allocation(model: &BubarModel, st: &BubarState, alpha: f64, supply: Option<f64>) -> Result<AllocationResult> {
    let prob = build_bubar_problem(model, st, alpha)?;
    let mut res = solve_min_doses(&prob)?;
    if let Some(s) = supply {
        if res.total_doses > s * (1.0 + 1e-9) + 1e-9 {
            return Err(invalid(format!("allocation needs {} doses, supply is {s}", res.total_doses)));
        }
    }
    res.certificate = Some(bubar_certificate(model, st, &res.v, alpha)?);
    Ok(res)
}

/// Largest certified decay rate reachable with `budget` doses.
pub fn bubar_max_decay(model: &BubarModel, st: &BubarState, budget: f64) -> Result<SearchOutcome> {
    model.validate()?;
    let g = model.groups();
    let alpha0 = -linalg::max_real_eigenvalue(&bubar_jacobian(model, st, &vec![0.0; g]))?;
    let hi = model.rate_limit() - 1e-4;
    let lo = (-2.0f64).min(alpha0 - 1e-3);
    let mut out = bisect_decay(budget, lo, hi, BRACKET_WIDTH, |a| build_bubar_problem(model, st, a))?;
    if out.alpha < alpha0 && alpha0 < hi {
        out.alpha = alpha0;
        out.result = solve_min_doses(&build_bubar_problem(model, st, alpha0)?)?;
    }
    out.result.alpha = out.alpha;
    out.result.certificate = Some(bubar_certificate(model, st, &out.result.v, out.alpha)?);
    Ok(out)
}

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Result};
use crate::linalg;
use crate::model::certificate::{certificate_from_parts, vaccinated_susceptible};
use crate::model::{compute_b1, CovidInstance, StabilityCertificate};

/// Minimum-dose problem at a fixed decay rate, in the shared form
///
/// `rho(diag(z) k_bar) <= 1`, `z_i = ceiling_i - slope_i v_i`, `0 <= v_i <= cap_i`,
/// minimizing `sum cost_i v_i`.
///
/// For the network model `z = u = b1 N* (s - psi v)`, `cap = s` and `cost = N*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    #[serde(with = "linalg::rows")]
    pub k_bar: DMatrix<f64>,
    pub b1: Vec<f64>,
    pub s: Vec<f64>,
    pub population: Vec<f64>,
    pub psi: f64,
    pub alpha: f64,
    pub ceiling: Vec<f64>,
    pub slope: Vec<f64>,
    pub cap: Vec<f64>,
    pub cost: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverPath {
    Trivial,
    Lmi,
    Bilinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub path: SolverPath,
    pub iterations: usize,
    /// Relative optimality gap (LMI path) or last relative improvement (bilinear path).
    pub gap: f64,
    /// `rho(diag(u) k_bar)` at the returned point.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub doses: Vec<f64>,
    pub total_doses: f64,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<StabilityCertificate>,
    pub stats: SolverStats,
}

impl AllocationProblem {
    pub fn len(&self) -> usize {
        self.ceiling.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ceiling.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.k_bar.shape() != (n, n) {
            return Err(dim(format!("coupling is {:?}, problem has {n} cells", self.k_bar.shape())));
        }
        for v in [&self.slope, &self.cap, &self.cost] {
            if v.len() != n {
                return Err(dim("problem vectors differ in length"));
            }
        }
        if self.k_bar.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(invalid("coupling must be finite and nonnegative"));
        }
        for i in 0..n {
            let vals = [self.ceiling[i], self.slope[i], self.cap[i], self.cost[i]];
            if vals.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(invalid(format!("problem data at cell {i} must be finite and nonnegative")));
            }
            if self.slope[i] * self.cap[i] > self.ceiling[i] * (1.0 + 1e-12) + 1e-300 {
                return Err(invalid(format!("box lower bound exceeds upper bound at cell {i}")));
            }
        }
        Ok(())
    }

    /// Lower end of the `u` box (everything vaccinated).
    pub fn u_lower(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| (self.ceiling[i] - self.slope[i] * self.cap[i]).max(0.0))
            .collect()
    }

    pub fn u_upper(&self) -> Vec<f64> {
        self.ceiling.clone()
    }

    /// Dose weight of each `u_i`: lowering `u_i` by one costs `cost_i / slope_i` doses.
    pub fn u_weights(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| if self.slope[i] > 0.0 { self.cost[i] / self.slope[i] } else { 0.0 })
            .collect()
    }

    pub fn v_from_u(&self, u: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                if self.slope[i] > 0.0 {
                    ((self.ceiling[i] - u[i]) / self.slope[i]).clamp(0.0, self.cap[i])
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn u_from_v(&self, v: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| (self.ceiling[i] - self.slope[i] * v[i]).max(0.0)).collect()
    }

    pub fn radius(&self, u: &[f64]) -> Result<f64> {
        let n = self.len();
        let m = DMatrix::from_fn(n, n, |i, j| u[i] * self.k_bar[(i, j)]);
        linalg::spectral_radius(&m)
    }

    /// Assembles the result from a `u` vector, re-deriving `u` from the
    /// clamped `v` so the two stay consistent.
    pub fn result_from_u(&self, u: &[f64], mut stats: SolverStats) -> Result<AllocationResult> {
        let v = self.v_from_u(u);
        let u = self.u_from_v(&v);
        let doses: Vec<f64> = v.iter().zip(&self.cost).map(|(a, b)| a * b).collect();
        stats.radius = self.radius(&u)?;
        Ok(AllocationResult {
            total_doses: doses.iter().sum(),
            v,
            u,
            doses,
            alpha: self.alpha,
            certificate: None,
            stats,
        })
    }

    /// Same problem with every population scaled; used by tests of scale invariance.
    pub fn scaled_population(&self, factor: f64) -> Self {
        let mut p = self.clone();
        p.k_bar /= factor;
        p.population.iter_mut().for_each(|x| *x *= factor);
        p.ceiling.iter_mut().for_each(|x| *x *= factor);
        p.slope.iter_mut().for_each(|x| *x *= factor);
        p.cost.iter_mut().for_each(|x| *x *= factor);
        p
    }
}

/// Builds the network-model problem at decay rate `alpha` from the current state.
pub fn build_problem(inst: &CovidInstance, alpha: f64) -> Result<AllocationProblem> {
    inst.validate()?;
    let rates = inst.rates()?;
    let cp = inst.coupling()?;
    let b1 = compute_b1(&rates, alpha)?;
    let n = inst.cells();
    let psi = inst.params.psi;
    let s = &inst.state.s;
    let pop = &cp.pop;
    Ok(AllocationProblem {
        k_bar: cp.k_bar.clone(),
        b1: b1.iter().copied().collect(),
        s: s.clone(),
        population: pop.iter().copied().collect(),
        psi,
        alpha,
        ceiling: (0..n).map(|i| b1[i] * pop[i] * s[i]).collect(),
        slope: (0..n).map(|i| b1[i] * pop[i] * psi).collect(),
        cap: s.clone(),
        cost: pop.iter().copied().collect(),
    })
}

/// Full certificate of a network-model allocation.
pub fn covid_certificate(inst: &CovidInstance, v: &[f64], alpha: f64) -> Result<StabilityCertificate> {
    let rates = inst.rates()?;
    let cp = inst.coupling()?;
    let s_eff: DVector<f64> = vaccinated_susceptible(&inst.state.s, v, inst.params.psi)?;
    certificate_from_parts(&rates, &cp, &s_eff, alpha)
}

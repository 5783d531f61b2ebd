use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Error, Result};

/// A rate that is either shared by every age group or given per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupRate {
    Scalar(f64),
    PerGroup(Vec<f64>),
}

impl GroupRate {
    pub fn at(&self, group: usize) -> f64 {
        match self {
            GroupRate::Scalar(x) => *x,
            GroupRate::PerGroup(v) => v[group],
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            GroupRate::Scalar(x) => vec![*x],
            GroupRate::PerGroup(v) => v.clone(),
        }
    }

    fn check(&self, name: &str, groups: usize) -> Result<()> {
        if let GroupRate::PerGroup(v) = self {
            if v.len() != groups {
                return Err(dim(format!("{name} has {} entries, model has {groups} groups", v.len())));
            }
        }
        if self.values().iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(invalid(format!("{name} must be finite and nonnegative")));
        }
        Ok(())
    }
}

impl From<f64> for GroupRate {
    fn from(x: f64) -> Self {
        GroupRate::Scalar(x)
    }
}

impl From<Vec<f64>> for GroupRate {
    fn from(v: Vec<f64>) -> Self {
        GroupRate::PerGroup(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Transmission {
    /// Per-day infection probabilities from asymptomatic / symptomatic contacts.
    Homogeneous { beta_a: f64, beta_s: f64 },
    /// `beta_s' = beta * beta0[group]`, `beta_a' = discount * beta_s'`.
    Demographic { beta: f64, beta0: Vec<f64>, discount: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseParams {
    pub transmission: Transmission,
    pub epsilon: f64,
    pub r_a: f64,
    pub r_s: GroupRate,
    pub kappa: GroupRate,
    pub psi: f64,
}

/// Parameters expanded to one entry per model cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRates {
    pub beta_a: DVector<f64>,
    pub beta_s: DVector<f64>,
    pub epsilon: f64,
    pub r_a: f64,
    pub r_s: DVector<f64>,
    pub kappa: DVector<f64>,
}

impl CellRates {
    /// Symptomatic outflow `r_s + kappa` per cell.
    pub fn outflow_s(&self) -> DVector<f64> {
        &self.r_s + &self.kappa
    }

    /// Largest decay rate for which the next-generation split is defined.
    pub fn rate_limit(&self) -> f64 {
        let min_s = self.outflow_s().iter().copied().fold(f64::INFINITY, f64::min);
        (self.epsilon + self.r_a).min(min_s)
    }
}

impl DiseaseParams {
    pub fn homogeneous(beta_a: f64, beta_s: f64, epsilon: f64, r_a: f64, r_s: f64, kappa: f64, psi: f64) -> Self {
        Self {
            transmission: Transmission::Homogeneous { beta_a, beta_s },
            epsilon,
            r_a,
            r_s: r_s.into(),
            kappa: kappa.into(),
            psi,
        }
    }

    pub fn is_demographic(&self) -> bool {
        matches!(self.transmission, Transmission::Demographic { .. })
    }

    pub fn validate(&self, groups: usize) -> Result<()> {
        let rates = [self.epsilon, self.r_a];
        if rates.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(invalid("epsilon and r_a must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.psi) {
            return Err(invalid(format!("efficacy psi = {} outside [0, 1]", self.psi)));
        }
        self.r_s.check("r_s", groups)?;
        self.kappa.check("kappa", groups)?;
        match &self.transmission {
            Transmission::Homogeneous { beta_a, beta_s } => {
                if !(*beta_a >= 0.0 && *beta_s >= 0.0) {
                    return Err(invalid("transmission rates must be nonnegative"));
                }
            }
            Transmission::Demographic { beta, beta0, discount } => {
                if beta0.len() != groups {
                    return Err(dim(format!("beta0 has {} entries, model has {groups} groups", beta0.len())));
                }
                if !(*beta >= 0.0) || beta0.iter().any(|b| !(*b >= 0.0)) {
                    return Err(invalid("transmission risks must be nonnegative"));
                }
                if !(*discount > 0.0 && *discount <= 1.0) {
                    return Err(invalid(format!("asymptomatic discount {discount} outside (0, 1]")));
                }
            }
        }
        Ok(())
    }

    /// Scalar that calibration rescales (`beta_s` or `beta`).
    pub fn transmission_scale(&self) -> f64 {
        match &self.transmission {
            Transmission::Homogeneous { beta_s, beta_a } => {
                if *beta_s > 0.0 {
                    *beta_s
                } else {
                    *beta_a
                }
            }
            Transmission::Demographic { beta, .. } => *beta,
        }
    }

    /// Multiplies every transmission rate by `factor`, keeping their ratios.
    pub fn scaled_transmission(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.transmission = match &self.transmission {
            Transmission::Homogeneous { beta_a, beta_s } => {
                Transmission::Homogeneous { beta_a: beta_a * factor, beta_s: beta_s * factor }
            }
            Transmission::Demographic { beta, beta0, discount } => {
                Transmission::Demographic { beta: beta * factor, beta0: beta0.clone(), discount: *discount }
            }
        };
        out
    }

    /// Expands to `locations * groups` cells, location-major.
    pub fn cell_rates(&self, locations: usize, groups: usize) -> Result<CellRates> {
        self.validate(groups)?;
        let cells = locations * groups;
        let per = |f: &dyn Fn(usize) -> f64| DVector::from_fn(cells, |k, _| f(k % groups));
        let (beta_a, beta_s) = match &self.transmission {
            Transmission::Homogeneous { beta_a, beta_s } => {
                (DVector::from_element(cells, *beta_a), DVector::from_element(cells, *beta_s))
            }
            Transmission::Demographic { beta, beta0, discount } => (
                per(&|g| discount * beta * beta0[g]),
                per(&|g| beta * beta0[g]),
            ),
        };
        Ok(CellRates {
            beta_a,
            beta_s,
            epsilon: self.epsilon,
            r_a: self.r_a,
            r_s: per(&|g| self.r_s.at(g)),
            kappa: per(&|g| self.kappa.at(g)),
        })
    }
}

/// Collapses the two-stage transmission chain at decay rate `alpha`:
/// `b1 = (beta_s eps + beta_a (r_s + kappa - alpha)) / ((eps + r_a - alpha)(r_s + kappa - alpha))`.
pub fn compute_b1(rates: &CellRates, alpha: f64) -> Result<DVector<f64>> {
    let limit = rates.rate_limit();
    if !(alpha < limit) {
        return Err(Error::InfeasibleRate { alpha, limit });
    }
    let da = rates.epsilon + rates.r_a - alpha;
    Ok(DVector::from_fn(rates.beta_s.len(), |i, _| {
        let ds = rates.r_s[i] + rates.kappa[i] - alpha;
        (rates.beta_s[i] * rates.epsilon + rates.beta_a[i] * ds) / (da * ds)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ny() -> DiseaseParams {
        DiseaseParams::homogeneous(0.0, 0.3, 0.0469, 0.153, 0.1436, 0.0165, 0.95)
    }

    #[test]
    fn b1_single_path_forms() {
        let r = ny().cell_rates(1, 1).unwrap();
        let b = compute_b1(&r, 0.0).unwrap()[0];
        assert!((b - 0.3 * 0.0469 / ((0.0469 + 0.153) * (0.1436 + 0.0165))).abs() < 1e-15);

        let p = DiseaseParams::homogeneous(0.2, 0.0, 0.0469, 0.153, 0.1436, 0.0165, 0.95);
        let r = p.cell_rates(1, 1).unwrap();
        let b = compute_b1(&r, 0.05).unwrap()[0];
        assert!((b - 0.2 / (0.0469 + 0.153 - 0.05)).abs() < 1e-14);
    }

    #[test]
    fn b1_rejects_large_alpha() {
        let r = ny().cell_rates(1, 1).unwrap();
        assert!(matches!(compute_b1(&r, 0.17), Err(Error::InfeasibleRate { .. })));
    }

    #[test]
    fn demographic_expansion_is_location_major() {
        let p = DiseaseParams {
            transmission: Transmission::Demographic { beta: 2.0, beta0: vec![1.0, 3.0], discount: 0.5 },
            epsilon: 0.1,
            r_a: 0.1,
            r_s: GroupRate::PerGroup(vec![0.1, 0.2]),
            kappa: 0.0.into(),
            psi: 1.0,
        };
        let r = p.cell_rates(2, 2).unwrap();
        assert_eq!(r.beta_s.as_slice(), &[2.0, 6.0, 2.0, 6.0]);
        assert_eq!(r.beta_a.as_slice(), &[1.0, 3.0, 1.0, 3.0]);
        assert_eq!(r.r_s.as_slice(), &[0.1, 0.2, 0.1, 0.2]);
    }

    #[test]
    fn params_round_trip_json() {
        let p = ny();
        let s = serde_json::to_string(&p).unwrap();
        let back: DiseaseParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
    }
}

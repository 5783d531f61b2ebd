use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Error, Result};
use crate::linalg;

/// Locations, residents and travel rates.
///
/// `tau[(i, l)]` is the fraction of a day a resident of `i` spends at `l`.
/// With `group_pop` present the instance is age-structured and every
/// per-cell vector uses the index `groups * location + group`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkInstance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    #[serde(with = "linalg::rows")]
    pub tau: DMatrix<f64>,
    pub population: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell_minutes: Option<Vec<f64>>,
    #[serde(default, with = "linalg::opt_rows", skip_serializing_if = "Option::is_none")]
    pub group_pop: Option<DMatrix<f64>>,
}

/// `a_bar = tau diag(m)^-1 tau^T` and `a = a_bar diag(N*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMatrices {
    pub a: DMatrix<f64>,
    pub a_bar: DMatrix<f64>,
}

impl NetworkInstance {
    pub fn new(tau: DMatrix<f64>, population: Vec<f64>) -> Self {
        Self { names: None, tau, population, dwell_minutes: None, group_pop: None }
    }

    /// Builds an age-structured instance; resident totals are the row sums.
    pub fn with_groups(tau: DMatrix<f64>, group_pop: DMatrix<f64>) -> Self {
        let population = group_pop.row_iter().map(|r| r.sum()).collect();
        Self { names: None, tau, population, dwell_minutes: None, group_pop: Some(group_pop) }
    }

    pub fn len(&self) -> usize {
        self.population.len()
    }

    pub fn is_empty(&self) -> bool {
        self.population.is_empty()
    }

    pub fn groups(&self) -> usize {
        self.group_pop.as_ref().map_or(1, |g| g.ncols())
    }

    pub fn total_population(&self) -> f64 {
        self.population.iter().sum()
    }

    /// Per-cell populations, flattened location-major.
    pub fn cell_population(&self) -> Vec<f64> {
        match &self.group_pop {
            None => self.population.clone(),
            Some(g) => g.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect(),
        }
    }

    pub fn location_name(&self, i: usize) -> String {
        self.names
            .as_ref()
            .and_then(|n| n.get(i).cloned())
            .unwrap_or_else(|| format!("{i}"))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(invalid("network has no locations"));
        }
        if self.tau.shape() != (n, n) {
            return Err(dim(format!("tau is {:?}, expected {n}x{n}", self.tau.shape())));
        }
        for (i, row) in self.tau.row_iter().enumerate() {
            if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(invalid(format!("negative or non-finite travel rate in row {i}")));
            }
            if row.sum() > 1.0 + 1e-9 {
                return Err(invalid(format!("travel rates of location {i} sum to {} > 1", row.sum())));
            }
        }
        for (i, &p) in self.population.iter().enumerate() {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::ZeroPopulation(format!("location {i}")));
            }
        }
        if let Some(w) = &self.dwell_minutes {
            if w.len() != n {
                return Err(dim("dwell_minutes length"));
            }
        }
        if let Some(names) = &self.names {
            if names.len() != n {
                return Err(dim("names length"));
            }
        }
        if let Some(g) = &self.group_pop {
            if g.nrows() != n || g.ncols() == 0 {
                return Err(dim(format!("group_pop is {:?}, expected {n} rows", g.shape())));
            }
            for i in 0..n {
                if g.row(i).iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(invalid(format!("negative group population at location {i}")));
                }
                let total = g.row(i).sum();
                if (total - self.population[i]).abs() > 1e-9 * self.population[i].max(1.0) {
                    return Err(invalid(format!(
                        "group populations at location {i} sum to {total}, resident total is {}",
                        self.population[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Column masses `m(l) = sum_k N*_k tau_kl`.
pub fn column_mass(net: &NetworkInstance) -> Vec<f64> {
    let n = net.len();
    (0..n)
        .map(|l| (0..n).map(|k| net.population[k] * net.tau[(k, l)]).sum())
        .collect()
}

pub fn build_flow_matrix(net: &NetworkInstance) -> Result<FlowMatrices> {
    net.validate()?;
    let n = net.len();
    let m = column_mass(net);
    let inv_m = DVector::from_iterator(n, m.iter().map(|&x| if x > 0.0 { 1.0 / x } else { 0.0 }));
    let scaled = DMatrix::from_fn(n, n, |i, l| net.tau[(i, l)] * inv_m[l]);
    let a_bar = linalg::symmetrize(&(&scaled * net.tau.transpose()));
    let a = &a_bar * DMatrix::from_diagonal(&DVector::from_vec(net.population.clone()));
    Ok(FlowMatrices { a, a_bar })
}

/// `(a_bar ⊗ gamma) diag(N* flattened)`.
pub fn build_demographic_coupling(net: &NetworkInstance, gamma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let g = net
        .group_pop
        .as_ref()
        .ok_or_else(|| invalid("demographic coupling needs group populations"))?;
    if gamma.shape() != (g.ncols(), g.ncols()) {
        return Err(dim(format!("gamma is {:?}, groups = {}", gamma.shape(), g.ncols())));
    }
    let flow = build_flow_matrix(net)?;
    let k = linalg::kron(&flow.a_bar, gamma);
    let pop = DVector::from_vec(net.cell_population());
    Ok(k * DMatrix::from_diagonal(&pop))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_closed_location() {
        let net = NetworkInstance::new(DMatrix::from_element(1, 1, 1.0), vec![250.0]);
        let f = build_flow_matrix(&net).unwrap();
        assert!((f.a_bar[(0, 0)] - 1.0 / 250.0).abs() < 1e-15);
        assert!((f.a[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let tau = DMatrix::from_row_slice(2, 2, &[0.7, 0.4, 0.1, 0.1]);
        assert!(NetworkInstance::new(tau, vec![1.0, 1.0]).validate().is_err());
        let tau = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.5]);
        assert!(matches!(
            NetworkInstance::new(tau.clone(), vec![1.0, 0.0]).validate(),
            Err(Error::ZeroPopulation(_))
        ));
        assert!(NetworkInstance::new(tau, vec![1.0]).validate().is_err());
    }

    #[test]
    fn empty_column_contributes_nothing() {
        let tau = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.2, 0.0]);
        let f = build_flow_matrix(&NetworkInstance::new(tau, vec![10.0, 10.0])).unwrap();
        assert!(f.a_bar.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn cell_population_is_location_major() {
        let g = DMatrix::from_row_slice(2, 2, &[80.0, 20.0, 100.0, 100.0]);
        let net = NetworkInstance::with_groups(DMatrix::identity(2, 2) * 0.5, g);
        assert_eq!(net.cell_population(), vec![80.0, 20.0, 100.0, 100.0]);
        assert_eq!(net.population, vec![100.0, 200.0]);
    }
}

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Result};
use crate::linalg;

/// Age-contact data: the measured matrix `c`, the demography it was measured
/// on, and the intrinsic connectivity `gamma` derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactStructure {
    #[serde(with = "linalg::rows")]
    pub c: DMatrix<f64>,
    #[serde(with = "linalg::rows")]
    pub gamma: DMatrix<f64>,
    pub reference_pop: Vec<f64>,
}

impl ContactStructure {
    pub fn from_contacts(c: DMatrix<f64>, reference_pop: Vec<f64>) -> Result<Self> {
        let gamma = intrinsic_connectivity(&c, &reference_pop)?;
        Ok(Self { c, gamma, reference_pop })
    }

    /// Recovers the contact matrix from a published intrinsic connectivity.
    pub fn from_gamma(gamma: DMatrix<f64>, reference_pop: Vec<f64>) -> Result<Self> {
        check_pop(&reference_pop, gamma.ncols())?;
        let total: f64 = reference_pop.iter().sum();
        let c = DMatrix::from_fn(gamma.nrows(), gamma.ncols(), |i, j| gamma[(i, j)] * reference_pop[j] / total);
        Ok(Self { c, gamma, reference_pop })
    }

    pub fn groups(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.reference_pop.len();
        if self.c.shape() != (g, g) || self.gamma.shape() != (g, g) {
            return Err(dim("contact matrices must be square with one row per reference group"));
        }
        if self.c.iter().chain(self.gamma.iter()).any(|x| !x.is_finite() || *x < 0.0) {
            return Err(invalid("contact entries must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Smallest eigenvalue of the symmetric part of `gamma` exceeds `1e-10`.
    pub fn gamma_is_pd(&self) -> bool {
        is_positive_definite(&self.gamma, 1e-10)
    }
}

pub fn is_positive_definite(m: &DMatrix<f64>, tol: f64) -> bool {
    linalg::is_symmetric(m, 1e-9) && linalg::sym_min_eigenvalue(m) > tol
}

fn check_pop(pop: &[f64], n: usize) -> Result<()> {
    if pop.len() != n {
        return Err(dim(format!("population has {} groups, matrix has {n}", pop.len())));
    }
    if let Some(j) = pop.iter().position(|&p| !(p.is_finite() && p > 0.0)) {
        return Err(invalid(format!("group {j} has zero population")));
    }
    Ok(())
}

/// `gamma = c diag(N / N_j)`.
pub fn intrinsic_connectivity(c: &DMatrix<f64>, pop: &[f64]) -> Result<DMatrix<f64>> {
    if !c.is_square() {
        return Err(dim("contact matrix must be square"));
    }
    check_pop(pop, c.ncols())?;
    let total: f64 = pop.iter().sum();
    Ok(DMatrix::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] * total / pop[j]))
}

/// Re-expresses `c` for a different demography: `c'_ij = c_ij N N'_j / (N_j N')`.
pub fn project_contact_matrix(c: &DMatrix<f64>, from_pop: &[f64], to_pop: &[f64]) -> Result<DMatrix<f64>> {
    if !c.is_square() {
        return Err(dim("contact matrix must be square"));
    }
    check_pop(from_pop, c.ncols())?;
    check_pop(to_pop, c.ncols())?;
    let n_from: f64 = from_pop.iter().sum();
    let n_to: f64 = to_pop.iter().sum();
    Ok(DMatrix::from_fn(c.nrows(), c.ncols(), |i, j| {
        c[(i, j)] * n_from * to_pop[j] / (from_pop[j] * n_to)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_hand_case() {
        let c = DMatrix::from_element(2, 2, 1.0);
        let p = project_contact_matrix(&c, &[50.0, 50.0], &[75.0, 25.0]).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.5, 0.5, 1.5, 0.5]);
        assert!((p - want).amax() < 1e-14);
    }

    #[test]
    fn projection_identity_and_zero_pop() {
        let c = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 2.0, 5.0]);
        let p = project_contact_matrix(&c, &[10.0, 30.0], &[10.0, 30.0]).unwrap();
        assert!((p - &c).amax() < 1e-14);
        assert!(project_contact_matrix(&c, &[10.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn uniform_demography_scales_by_group_count() {
        let c = DMatrix::from_fn(6, 6, |i, j| (i + 2 * j) as f64 * 0.1);
        let g = intrinsic_connectivity(&c, &[5.0; 6]).unwrap();
        assert!((g - c * 6.0).amax() < 1e-12);
    }

    #[test]
    fn gamma_round_trip() {
        let gamma = DMatrix::from_row_slice(2, 2, &[20.0, 2.0, 2.0, 4.0]);
        let cs = ContactStructure::from_gamma(gamma.clone(), vec![180.0, 120.0]).unwrap();
        let back = intrinsic_connectivity(&cs.c, &cs.reference_pop).unwrap();
        assert!((back - gamma).amax() < 1e-12);
        assert!(cs.gamma_is_pd());
    }
}

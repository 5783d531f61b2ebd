use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Result};

/// Compartment fractions per cell. `immune` tracks the part of `h` that was
/// moved there by vaccination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicState {
    pub t: f64,
    pub s: Vec<f64>,
    pub xa: Vec<f64>,
    pub xs: Vec<f64>,
    pub e: Vec<f64>,
    pub h: Vec<f64>,
    #[serde(default)]
    pub immune: Vec<f64>,
}

impl EpidemicState {
    pub fn susceptible(s: Vec<f64>) -> Self {
        let n = s.len();
        Self {
            t: 0.0,
            h: s.iter().map(|x| 1.0 - x).collect(),
            s,
            xa: vec![0.0; n],
            xs: vec![0.0; n],
            e: vec![0.0; n],
            immune: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn total(&self, i: usize) -> f64 {
        self.s[i] + self.xa[i] + self.xs[i] + self.e[i] + self.h[i]
    }

    pub fn validate(&self, cells: usize, tol: f64) -> Result<()> {
        for v in [&self.s, &self.xa, &self.xs, &self.e, &self.h] {
            if v.len() != cells {
                return Err(dim(format!("state block has {} cells, expected {cells}", v.len())));
            }
        }
        if !self.immune.is_empty() && self.immune.len() != cells {
            return Err(dim("immune pool length"));
        }
        for i in 0..cells {
            for x in [self.s[i], self.xa[i], self.xs[i], self.e[i], self.h[i]] {
                if !(x >= -tol && x <= 1.0 + tol) {
                    return Err(invalid(format!("compartment fraction {x} outside [0, 1] at cell {i}")));
                }
            }
            let total = self.total(i);
            if (total - 1.0).abs() > tol {
                return Err(invalid(format!("compartments at cell {i} sum to {total}")));
            }
        }
        Ok(())
    }

    pub fn immune_pool(&self) -> Vec<f64> {
        if self.immune.is_empty() {
            vec![0.0; self.len()]
        } else {
            self.immune.clone()
        }
    }
}

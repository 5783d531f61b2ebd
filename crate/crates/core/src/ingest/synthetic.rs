//! Seeded random instances standing in for proprietary mobility data.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fixtures::{ny_contact, ny_demographic_params, reference_params, NY_GROUP_POP};
use crate::error::{invalid, Result};
use crate::model::{calibrate_transmission, CovidInstance, EpidemicState, NetworkInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOptions {
    pub seed: u64,
    pub locations: usize,
    /// Use the six-group contact fixture.
    #[serde(default)]
    pub demographic: bool,
    pub target_rt: f64,
    /// Asymptomatic-to-symptomatic transmission ratio.
    pub discount: f64,
}

impl SyntheticOptions {
    pub fn new(seed: u64, locations: usize, target_rt: f64, discount: f64) -> Self {
        Self { seed, locations, demographic: false, target_rt, discount }
    }
}

/// Row-substochastic travel rates with row sums in `[0.3, 0.7]`, most of each
/// row on the diagonal, populations log-uniform in `[1e3, 1e6]`, a few
/// tenths of a percent currently infected, calibrated to `target_rt`.
pub fn synthetic_instance(opts: &SyntheticOptions) -> Result<CovidInstance> {
    let n = opts.locations;
    if n == 0 {
        return Err(invalid("synthetic instance needs at least one location"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut tau = DMatrix::zeros(n, n);
    for i in 0..n {
        let total = rng.random_range(0.3..=0.7);
        let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0f64).powi(3)).collect();
        w[i] += 2.0;
        let sum: f64 = w.iter().sum();
        for j in 0..n {
            tau[(i, j)] = total * w[j] / sum;
        }
    }
    let population: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(3.0..6.0)).round()).collect();
    let names: Vec<String> = (0..n).map(|i| format!("L{i}")).collect();

    let mut loc_state = Vec::with_capacity(n);
    for _ in 0..n {
        let past = rng.random_range(0.03..0.15);
        let active = rng.random_range(0.001..0.005);
        let dead = past * 0.005;
        loc_state.push((past, active, dead));
    }

    let (network, params, contact, groups) = if opts.demographic {
        let shares: f64 = NY_GROUP_POP.iter().sum();
        let group_pop = DMatrix::from_fn(n, 6, |i, a| (population[i] * NY_GROUP_POP[a] / shares).max(1.0));
        let mut net = NetworkInstance::with_groups(tau, group_pop);
        net.names = Some(names);
        (net, ny_demographic_params(1.0, opts.discount), Some(ny_contact()?), 6)
    } else {
        let mut net = NetworkInstance::new(tau, population);
        net.names = Some(names);
        (net, reference_params(1.0, opts.discount), None, 1)
    };

    let cells = n * groups;
    let mut st = EpidemicState::susceptible(vec![1.0; cells]);
    for c in 0..cells {
        let (past, active, dead) = loc_state[c / groups];
        st.xa[c] = 0.81 * active;
        st.xs[c] = 0.19 * active;
        st.e[c] = dead;
        st.h[c] = past - dead;
        st.s[c] = 1.0 - past - active;
    }
    let inst = CovidInstance { network, params, contact, state: st };
    inst.validate()?;
    let params = calibrate_transmission(&inst, opts.target_rt)?;
    Ok(inst.with_params(params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::effective_reproduction_number;

    #[test]
    fn deterministic_and_calibrated() {
        let o = SyntheticOptions::new(7, 5, 1.3, 0.5);
        let a = synthetic_instance(&o).unwrap();
        let b = synthetic_instance(&o).unwrap();
        assert_eq!(a, b);
        assert!((effective_reproduction_number(&a).unwrap() - 1.3).abs() < 1e-6);
        for i in 0..5 {
            let r = a.network.tau.row(i).sum();
            assert!((0.3 - 1e-12..=0.7 + 1e-12).contains(&r));
            assert!((1e3..=1e6).contains(&a.network.population[i]));
        }
    }

    #[test]
    fn demographic_variant() {
        let o = SyntheticOptions { demographic: true, ..SyntheticOptions::new(3, 3, 1.1, 0.5) };
        let a = synthetic_instance(&o).unwrap();
        assert_eq!(a.cells(), 18);
        assert!((effective_reproduction_number(&a).unwrap() - 1.1).abs() < 1e-6);
    }
}

//! Published inputs and hand-built test instances.

use nalgebra::DMatrix;

use super::derive::{group_ifr, mean_ifr};
use crate::dynamics::bubar::BubarModel;
use crate::error::{invalid, Result};
use crate::model::{calibrate_transmission, ContactStructure, CovidInstance, DiseaseParams, EpidemicState, NetworkInstance, Transmission};
use crate::policies::PolicySpec;

pub const NY_GROUP_LABELS: [&str; 6] = ["0-4", "5-19", "20-29", "30-44", "45-64", "65+"];
pub const NY_AGE_RANGES: [(u32, u32); 6] = [(0, 4), (5, 19), (20, 29), (30, 44), (45, 64), (65, 89)];

#[rustfmt::skip]
const NY_GAMMA: [f64; 36] = [
    22.9768, 15.3439,  9.1141, 11.3077,  4.5509,  3.2704,
    15.3439, 54.2639,  9.7226, 11.5955,  8.6947,  3.9597,
     9.1141,  9.7226, 28.8528, 14.7380, 13.7316,  5.1510,
    11.3077, 11.5955, 14.7380, 18.0776, 12.9846,  5.4702,
     4.5509,  8.6947, 13.7316, 12.9846, 15.6485,  6.3227,
     3.2704,  3.9597,  5.1510,  5.4702,  6.3227, 15.2828,
];

/// Relative transmission risk per age group.
pub const NY_BETA0: [f64; 6] = [0.400, 0.387, 0.790, 0.840, 0.830, 0.768];
pub const NY_KAPPA: [f64; 6] = [0.0000047, 0.000018, 0.000075, 0.00036, 0.0033, 0.0565];
pub const NY_R_S: [f64; 6] = [0.1601, 0.1600, 0.1600, 0.1597, 0.1568, 0.1035];
/// Alternative mortality-rate table shipped as a named preset.
pub const NY_KAPPA_TABLE: [f64; 6] = [0.0002, 0.00018, 0.00036, 0.0018, 0.0094, 0.0945];
/// Approximate state age structure (persons); only shares matter.
pub const NY_GROUP_POP: [f64; 6] = [1.16e6, 3.5e6, 2.7e6, 3.7e6, 5.1e6, 3.2e6];

/// `(d_A, d_S)` estimates from six modelling studies.
pub const INFECTIOUS_PERIOD_TABLE: [(f64, f64); 6] = [
    (1.0 / 0.29, 1.0 / 0.29),
    (1.0 / 0.0034, 1.0 / 0.017),
    (5.0, 5.0),
    (3.0, 5.0),
    (5.1, 7.4),
    (10.0, 15.0),
];

pub const REFERENCE_D_A: f64 = 5.0025;
pub const REFERENCE_D_S: f64 = 6.2475;
pub const REFERENCE_IFR: f64 = 0.0242;
pub const REFERENCE_EPSILON: f64 = 0.0469;
pub const REFERENCE_R_A: f64 = 0.153;
pub const REFERENCE_R_S: f64 = 0.1436;
pub const REFERENCE_KAPPA: f64 = 0.0165;
pub const REFERENCE_PSI: f64 = 0.95;

pub fn ny_gamma() -> DMatrix<f64> {
    DMatrix::from_row_slice(6, 6, &NY_GAMMA)
}

pub fn ny_contact() -> Result<ContactStructure> {
    ContactStructure::from_gamma(ny_gamma(), NY_GROUP_POP.to_vec())
}

pub fn ny_group_ifr() -> Vec<f64> {
    group_ifr(&NY_AGE_RANGES)
}

/// Scalar-rate parameters with `beta_a = discount * beta_s`.
pub fn reference_params(beta_s: f64, discount: f64) -> DiseaseParams {
    DiseaseParams::homogeneous(
        discount * beta_s,
        beta_s,
        REFERENCE_EPSILON,
        REFERENCE_R_A,
        REFERENCE_R_S,
        REFERENCE_KAPPA,
        REFERENCE_PSI,
    )
}

/// Six-group parameters with the published per-group mortality and recovery.
pub fn ny_demographic_params(beta: f64, discount: f64) -> DiseaseParams {
    DiseaseParams {
        transmission: Transmission::Demographic { beta, beta0: NY_BETA0.to_vec(), discount },
        epsilon: REFERENCE_EPSILON,
        r_a: REFERENCE_R_A,
        r_s: NY_R_S.to_vec().into(),
        kappa: NY_KAPPA.to_vec().into(),
        psi: REFERENCE_PSI,
    }
}

/// One location holding the whole six-group population at susceptible
/// fraction `s`, calibrated to `rt`.
pub fn ny_single_location(s: f64, rt: f64, discount: f64) -> Result<CovidInstance> {
    let group_pop = DMatrix::from_row_slice(1, 6, &NY_GROUP_POP);
    let mut network = NetworkInstance::with_groups(DMatrix::from_element(1, 1, 0.5), group_pop);
    network.names = Some(vec!["NY".into()]);
    let inst = CovidInstance {
        network,
        params: ny_demographic_params(1.0, discount),
        contact: Some(ny_contact()?),
        state: EpidemicState::susceptible(vec![s; 6]),
    };
    let params = calibrate_transmission(&inst, rt)?;
    Ok(inst.with_params(params))
}

/// Two locations, two age groups, used to illustrate the coupling build.
pub fn worked_example() -> (NetworkInstance, DMatrix<f64>) {
    let tau = DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 0.4]);
    let group_pop = DMatrix::from_row_slice(2, 2, &[80.0, 20.0, 100.0, 100.0]);
    let gamma = DMatrix::from_row_slice(2, 2, &[20.0, 2.0, 2.0, 4.0]);
    (NetworkInstance::with_groups(tau, group_pop), gamma)
}

pub const TWO_NODE_RT: f64 = 1.0697;
pub const TWO_NODE_BUDGET: f64 = 0.1;
pub const TWO_NODE_TRIPS: [f64; 4] = [8000.0, 200.0, 200.0, 8000.0];

#[derive(Debug, Clone, PartialEq)]
pub struct TwoNodeCase {
    pub population: [f64; 2],
    pub dwell: [f64; 2],
    pub s: [f64; 2],
    /// Published optimal allocation at a 10% budget.
    pub expected_v: [f64; 2],
}

pub fn two_node_cases() -> [TwoNodeCase; 4] {
    [
        TwoNodeCase { population: [200_000.0, 2_000.0], dwell: [800.0, 800.0], s: [0.9, 0.9], expected_v: [0.1, 0.0998] },
        TwoNodeCase { population: [2_000.0, 2_000.0], dwell: [800.0, 800.0], s: [0.7, 0.9], expected_v: [0.0, 0.2] },
        TwoNodeCase { population: [2_000.0, 2_000.0], dwell: [1_000.0, 800.0], s: [0.9, 0.9], expected_v: [0.0, 0.2] },
        TwoNodeCase { population: [200_000.0, 2_000.0], dwell: [1_000.0, 800.0], s: [0.7, 0.9], expected_v: [0.0923, 0.8744] },
    ]
}

impl TwoNodeCase {
    /// Instance calibrated to the two-node reproduction number.
    pub fn instance(&self, discount: f64) -> Result<CovidInstance> {
        let raw = super::derive::RawMobility {
            trips: DMatrix::from_row_slice(2, 2, &TWO_NODE_TRIPS),
            dwell_minutes: self.dwell.to_vec(),
        };
        let tau = super::derive::build_travel_rates(&raw)?;
        let mut network = NetworkInstance::new(tau, self.population.to_vec());
        network.dwell_minutes = Some(self.dwell.to_vec());
        let inst = CovidInstance {
            network,
            params: reference_params(1.0, discount),
            contact: None,
            state: EpidemicState::susceptible(self.s.to_vec()),
        };
        let params = calibrate_transmission(&inst, TWO_NODE_RT)?;
        Ok(inst.with_params(params))
    }
}

pub const BUBAR_GROUP_LABELS: [&str; 9] = ["0-9", "10-19", "20-29", "30-39", "40-49", "50-59", "60-69", "70-79", "80+"];

#[rustfmt::skip]
const BUBAR_CONTACT: [f64; 81] = [
    4.5, 1.2, 0.9, 1.8, 1.2, 0.5, 0.4, 0.2, 0.1,
    1.1, 7.5, 1.0, 1.1, 1.5, 0.9, 0.3, 0.2, 0.1,
    0.8, 1.1, 4.4, 2.0, 1.5, 1.3, 0.6, 0.2, 0.1,
    1.6, 1.2, 2.0, 3.7, 2.2, 1.4, 0.6, 0.3, 0.1,
    1.1, 1.8, 1.5, 2.3, 3.3, 2.0, 0.8, 0.3, 0.1,
    0.6, 1.0, 1.4, 1.6, 2.1, 2.7, 1.2, 0.4, 0.2,
    0.5, 0.5, 0.8, 0.9, 1.1, 1.5, 1.9, 0.7, 0.3,
    0.4, 0.4, 0.4, 0.6, 0.7, 0.7, 1.0, 1.3, 0.4,
    0.3, 0.3, 0.3, 0.4, 0.5, 0.5, 0.6, 0.6, 0.8,
];

/// Synthetic national-scale age model in ten-year bands (persons).
pub fn bubar_us_model() -> BubarModel {
    let population = [39.7, 42.0, 45.2, 43.2, 40.3, 42.4, 37.3, 22.6, 12.8].iter().map(|m| m * 1e6).collect();
    let ifr = (0..9).map(|k| if k < 8 { mean_ifr(10 * k, 10 * k + 9) } else { mean_ifr(80, 89) }).collect();
    BubarModel {
        group_names: Some(BUBAR_GROUP_LABELS.iter().map(|s| s.to_string()).collect()),
        population,
        contact: DMatrix::from_row_slice(9, 9, &BUBAR_CONTACT),
        u: vec![0.4, 0.38, 0.79, 0.86, 0.8, 0.82, 0.88, 0.74, 0.74],
        d_e: 3.0,
        d_i: 5.0,
        ifr,
        psi: 0.9,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgePreset {
    pub name: &'static str,
    pub tiers: Vec<Vec<usize>>,
    /// Whether the first tier is confirmed by the source of the strategy list.
    pub verified: bool,
}

impl AgePreset {
    pub fn policy(&self) -> PolicySpec {
        PolicySpec::age_priority(self.name, self.tiers.clone())
    }
}

fn with_rest(first: Vec<usize>, groups: usize) -> Vec<Vec<usize>> {
    let rest: Vec<usize> = (0..groups).filter(|g| !first.contains(g)).collect();
    if rest.is_empty() {
        vec![first]
    } else {
        vec![first, rest]
    }
}

/// Static age-priority strategies for the ten-year-band model; groups outside
/// the priority tier are served afterwards.
pub fn bubar_presets() -> Vec<AgePreset> {
    vec![
        AgePreset { name: "under-20", tiers: with_rest(vec![0, 1], 9), verified: false },
        AgePreset { name: "adults-20-49", tiers: with_rest(vec![2, 3, 4], 9), verified: false },
        AgePreset { name: "adults-20-plus", tiers: with_rest((2..9).collect(), 9), verified: false },
        AgePreset { name: "seniors-60-plus", tiers: with_rest(vec![6, 7, 8], 9), verified: true },
        AgePreset { name: "all-ages", tiers: with_rest((0..9).collect(), 9), verified: false },
    ]
}

pub fn bubar_preset(name: &str) -> Result<AgePreset> {
    bubar_presets()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| invalid(format!("unknown age preset {name}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::effective_reproduction_number;

    #[test]
    fn gamma_is_symmetric_and_pd() {
        let cs = ny_contact().unwrap();
        assert!(cs.gamma_is_pd());
        assert_eq!(ny_gamma()[(0, 1)], 15.3439);
    }

    #[test]
    fn two_node_cases_calibrate() {
        for case in two_node_cases() {
            let inst = case.instance(0.5).unwrap();
            assert!((effective_reproduction_number(&inst).unwrap() - TWO_NODE_RT).abs() < 1e-6);
        }
    }

    #[test]
    fn bubar_model_is_valid() {
        let m = bubar_us_model();
        m.validate().unwrap();
        assert!(m.ifr[8] > m.ifr[0]);
        assert_eq!(bubar_presets().len(), 5);
        assert!(bubar_presets().iter().all(|p| p.policy().validate().is_ok()));
        assert!(bubar_preset("seniors-60-plus").unwrap().verified);
        assert!(bubar_preset("nope").is_err());
    }
}

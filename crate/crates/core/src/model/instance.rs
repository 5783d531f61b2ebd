use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::contact::ContactStructure;
use super::network::{build_demographic_coupling, build_flow_matrix, NetworkInstance};
use super::params::{CellRates, DiseaseParams};
use super::state::EpidemicState;
use crate::error::{dim, invalid, Result};
use crate::linalg;

/// Everything needed to run the network model from `state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovidInstance {
    pub network: NetworkInstance,
    pub params: DiseaseParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<ContactStructure>,
    pub state: EpidemicState,
}

/// Coupling in cell space: `k = k_bar diag(pop)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub k: DMatrix<f64>,
    pub k_bar: DMatrix<f64>,
    pub pop: DVector<f64>,
}

impl CovidInstance {
    pub fn groups(&self) -> usize {
        self.network.groups()
    }

    pub fn cells(&self) -> usize {
        self.network.len() * self.groups()
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        let groups = self.groups();
        self.params.validate(groups)?;
        match (self.params.is_demographic(), &self.contact, &self.network.group_pop) {
            (true, Some(cs), Some(_)) => {
                cs.validate()?;
                if cs.groups() != groups {
                    return Err(dim(format!("contact structure has {} groups, network {groups}", cs.groups())));
                }
            }
            (true, _, _) => return Err(invalid("demographic parameters need a contact structure and group populations")),
            (false, None, None) => {}
            (false, _, _) => {
                return Err(invalid("homogeneous parameters cannot be combined with age structure"));
            }
        }
        self.state.validate(self.cells(), 1e-9)
    }

    pub fn rates(&self) -> Result<CellRates> {
        self.params.cell_rates(self.network.len(), self.groups())
    }

    pub fn coupling(&self) -> Result<Coupling> {
        let pop = DVector::from_vec(self.network.cell_population());
        match &self.contact {
            Some(cs) if self.params.is_demographic() => {
                let flow = build_flow_matrix(&self.network)?;
                let k_bar = linalg::kron(&flow.a_bar, &cs.gamma);
                let k = build_demographic_coupling(&self.network, &cs.gamma)?;
                Ok(Coupling { k, k_bar, pop })
            }
            _ => {
                let flow = build_flow_matrix(&self.network)?;
                Ok(Coupling { k: flow.a, k_bar: flow.a_bar, pop })
            }
        }
    }

    pub fn with_params(&self, params: DiseaseParams) -> Self {
        Self { params, ..self.clone() }
    }
}

use nalgebra::DMatrix;

use super::integrate::OdeSystem;
use crate::error::{dim, Error, Result};
use crate::model::{CellRates, ContactStructure, CovidInstance, DiseaseParams, EpidemicState, NetworkInstance};

/// Network model on the flat layout `[s, xa, xs, e, h, cum_inflow]`, one
/// block of `cells` entries each. The last block integrates the inflow into
/// `xa` and is what new-case counts are read from.
#[derive(Debug, Clone)]
pub struct CovidSystem {
    pub rates: CellRates,
    pub k: DMatrix<f64>,
}

pub const BLOCKS: usize = 6;

impl CovidSystem {
    pub fn new(inst: &CovidInstance) -> Result<Self> {
        inst.validate()?;
        Ok(Self { rates: inst.rates()?, k: inst.coupling()?.k })
    }

    pub fn cells(&self) -> usize {
        self.k.nrows()
    }

    pub fn pack(&self, st: &EpidemicState, cum_inflow: &[f64]) -> Vec<f64> {
        let mut y = Vec::with_capacity(BLOCKS * self.cells());
        for b in [&st.s, &st.xa, &st.xs, &st.e, &st.h] {
            y.extend_from_slice(b);
        }
        y.extend_from_slice(cum_inflow);
        y
    }

    /// Writes the compartments of `y` into `st` (time and immune pool untouched).
    pub fn unpack(&self, y: &[f64], st: &mut EpidemicState) {
        let c = self.cells();
        st.s.copy_from_slice(&y[0..c]);
        st.xa.copy_from_slice(&y[c..2 * c]);
        st.xs.copy_from_slice(&y[2 * c..3 * c]);
        st.e.copy_from_slice(&y[3 * c..4 * c]);
        st.h.copy_from_slice(&y[4 * c..5 * c]);
    }

    /// Infection inflow `s_i sum_j k_ij (beta_a_i xa_j + beta_s_i xs_j)`.
    pub fn inflow(&self, s: &[f64], xa: &[f64], xs: &[f64]) -> Vec<f64> {
        let c = self.cells();
        (0..c)
            .map(|i| {
                let (mut pa, mut ps) = (0.0, 0.0);
                for j in 0..c {
                    let kij = self.k[(i, j)];
                    pa += kij * xa[j];
                    ps += kij * xs[j];
                }
                s[i] * (self.rates.beta_a[i] * pa + self.rates.beta_s[i] * ps)
            })
            .collect()
    }
}

impl OdeSystem for CovidSystem {
    fn dim(&self) -> usize {
        BLOCKS * self.cells()
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let c = self.cells();
        let (s, xa, xs) = (&y[0..c], &y[c..2 * c], &y[2 * c..3 * c]);
        let inflow = self.inflow(s, xa, xs);
        let r = &self.rates;
        for i in 0..c {
            let rs = r.r_s[i];
            let kap = r.kappa[i];
            dy[i] = -inflow[i];
            dy[c + i] = inflow[i] - (r.epsilon + r.r_a) * xa[i];
            dy[2 * c + i] = r.epsilon * xa[i] - (rs + kap) * xs[i];
            dy[3 * c + i] = kap * xs[i];
            dy[4 * c + i] = r.r_a * xa[i] + rs * xs[i];
            dy[5 * c + i] = inflow[i];
        }
        Ok(())
    }

    fn clamp(&self, y: &mut [f64]) -> usize {
        let mut n = 0;
        for x in y[..5 * self.cells()].iter_mut() {
            if *x < 0.0 || *x > 1.0 {
                *x = x.clamp(0.0, 1.0);
                n += 1;
            }
        }
        n
    }
}

fn derivative(inst: &CovidInstance) -> Result<EpidemicState> {
    let sys = CovidSystem::new(inst)?;
    let y = sys.pack(&inst.state, &vec![0.0; sys.cells()]);
    let mut dy = vec![0.0; y.len()];
    sys.rhs(&y, &mut dy)?;
    let mut out = inst.state.clone();
    sys.unpack(&dy, &mut out);
    out.t = 1.0;
    out.immune = vec![0.0; sys.cells()];
    Ok(out)
}

/// Time derivative of the homogeneous network model at `state`.
pub fn rhs_covid(state: &EpidemicState, net: &NetworkInstance, params: &DiseaseParams) -> Result<EpidemicState> {
    derivative(&CovidInstance { network: net.clone(), params: params.clone(), contact: None, state: state.clone() })
}

/// Time derivative of the age-structured network model at `state`.
pub fn rhs_covid_demographic(
    state: &EpidemicState,
    net: &NetworkInstance,
    params: &DiseaseParams,
    cs: &ContactStructure,
) -> Result<EpidemicState> {
    derivative(&CovidInstance {
        network: net.clone(),
        params: params.clone(),
        contact: Some(cs.clone()),
        state: state.clone(),
    })
}

/// Instantaneous vaccination `s <- s - psi v`; the protected mass moves to
/// `h` and is tracked in the immune pool.
pub fn apply_vaccination_event(state: &EpidemicState, v: &[f64], psi: f64) -> Result<EpidemicState> {
    if v.len() != state.len() {
        return Err(dim(format!("allocation has {} cells, state {}", v.len(), state.len())));
    }
    let mut out = state.clone();
    out.immune = state.immune_pool();
    for (i, &vi) in v.iter().enumerate() {
        if !(vi >= -1e-12 && vi <= state.s[i] + 1e-12) {
            return Err(Error::AllocationOutOfBox { cell: i, value: vi, cap: state.s[i] });
        }
        let moved = (psi * vi.clamp(0.0, state.s[i])).min(state.s[i]);
        out.s[i] -= moved;
        out.h[i] += moved;
        out.immune[i] += moved;
    }
    Ok(out)
}

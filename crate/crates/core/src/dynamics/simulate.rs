//! Policy simulations: dose at each supply epoch, then integrate to the next.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::bubar::{vaccinate_bubar, BubarModel, BubarState, BubarSystem, BUBAR_BLOCKS};
use super::covid::{apply_vaccination_event, CovidSystem};
use super::integrate::advance;
use crate::allocator::bubar::bubar_max_decay;
use crate::allocator::max_decay_binary_search;
use crate::error::{invalid, Error, Result};
use crate::model::{CovidInstance, EpidemicState};
use crate::policies::{emit_doses, leftover_redistribute, DoseContext, LeftoverRule, OptimalPlan, PolicyKind, PolicySpec, ResolveMode};

pub const DEFAULT_STEP: f64 = 0.05;

/// Active infected persons below which the epidemic counts as extinct.
pub const EXTINCTION_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaccinationSchedule {
    /// Fraction of the total population supplied per day.
    pub daily_rate: f64,
    #[serde(default = "one")]
    pub interval_days: u32,
    /// Fraction of the total population.
    pub total_budget: f64,
    #[serde(default)]
    pub leftover_rule: LeftoverRule,
}

fn one() -> u32 {
    1
}

impl VaccinationSchedule {
    pub fn new(daily_rate: f64, total_budget: f64) -> Self {
        Self { daily_rate, interval_days: 1, total_budget, leftover_rule: LeftoverRule::EvenSplit }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.daily_rate >= 0.0 && self.daily_rate.is_finite()) {
            return Err(invalid(format!("daily rate {} must be nonnegative", self.daily_rate)));
        }
        if self.interval_days == 0 {
            return Err(invalid("supply interval must be at least one day"));
        }
        if !(0.0..=1.0).contains(&self.total_budget) {
            return Err(invalid(format!("budget {} must lie in [0, 1]", self.total_budget)));
        }
        Ok(())
    }
}

/// Daily snapshots. Counters in row `k` refer to the day ending at `times[k]`
/// (row 0 is the initial state with zero counters); all counts are persons.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub labels: Vec<String>,
    pub population: Vec<f64>,
    pub times: Vec<f64>,
    pub states: Vec<EpidemicState>,
    pub new_cases: Vec<Vec<f64>>,
    pub cum_cases: Vec<Vec<f64>>,
    pub cum_deaths: Vec<Vec<f64>>,
    pub doses: Vec<Vec<f64>>,
    pub clamp_events: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    t: f64,
    location: String,
    s: f64,
    xa: f64,
    xs: f64,
    e: f64,
    h: f64,
    new_cases: f64,
    cum_cases: f64,
    cum_deaths: f64,
    doses: f64,
}

impl Trajectory {
    fn last_sum(series: &[Vec<f64>]) -> f64 {
        series.last().map_or(0.0, |r| r.iter().sum())
    }

    pub fn final_cases(&self) -> f64 {
        Self::last_sum(&self.cum_cases)
    }

    pub fn final_deaths(&self) -> f64 {
        Self::last_sum(&self.cum_deaths)
    }

    pub fn total_doses(&self) -> f64 {
        self.doses.iter().flatten().sum()
    }

    pub fn final_state(&self) -> &EpidemicState {
        self.states.last().expect("trajectory has an initial state")
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for (k, st) in self.states.iter().enumerate() {
            for (i, label) in self.labels.iter().enumerate() {
                wr.serialize(TrajectoryRow {
                    t: self.times[k],
                    location: label.clone(),
                    s: st.s[i],
                    xa: st.xa[i],
                    xs: st.xs[i],
                    e: st.e[i],
                    h: st.h[i],
                    new_cases: self.new_cases[k][i],
                    cum_cases: self.cum_cases[k][i],
                    cum_deaths: self.cum_deaths[k][i],
                    doses: self.doses[k][i],
                })?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a trajectory written by [`Trajectory::write_csv`]; populations
    /// and the immune pool are not part of the format and come back empty.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut out = Trajectory {
            labels: Vec::new(),
            population: Vec::new(),
            times: Vec::new(),
            states: Vec::new(),
            new_cases: Vec::new(),
            cum_cases: Vec::new(),
            cum_deaths: Vec::new(),
            doses: Vec::new(),
            clamp_events: 0,
        };
        for row in rd.deserialize() {
            let row: TrajectoryRow = row?;
            if out.times.last() != Some(&row.t) {
                out.times.push(row.t);
                out.states.push(EpidemicState { t: row.t, s: vec![], xa: vec![], xs: vec![], e: vec![], h: vec![], immune: vec![] });
                for v in [&mut out.new_cases, &mut out.cum_cases, &mut out.cum_deaths, &mut out.doses] {
                    v.push(Vec::new());
                }
            }
            // Labels are fixed by the first time slice.
            if out.times.len() == 1 {
                out.labels.push(row.location.clone());
            }
            let st = out.states.last_mut().expect("pushed above");
            st.s.push(row.s);
            st.xa.push(row.xa);
            st.xs.push(row.xs);
            st.e.push(row.e);
            st.h.push(row.h);
            out.new_cases.last_mut().unwrap().push(row.new_cases);
            out.cum_cases.last_mut().unwrap().push(row.cum_cases);
            out.cum_deaths.last_mut().unwrap().push(row.cum_deaths);
            out.doses.last_mut().unwrap().push(row.doses);
        }
        if out.states.iter().any(|s| s.len() != out.labels.len()) {
            return Err(invalid("ragged trajectory csv"));
        }
        Ok(out)
    }
}

fn cell_labels(inst: &CovidInstance) -> Vec<String> {
    let g = inst.groups();
    (0..inst.cells())
        .map(|c| {
            let name = inst.network.location_name(c / g);
            if g == 1 {
                name
            } else {
                format!("{name}/{}", c % g)
            }
        })
        .collect()
}

fn check_supply(doses: &[f64], supplied: f64) -> Result<f64> {
    let emitted: f64 = doses.iter().sum();
    if doses.iter().any(|d| *d < -1e-9) || emitted > supplied + 1e-6 * supplied.max(1.0) {
        return Err(Error::OverSupply { emitted, supplied });
    }
    Ok(emitted)
}

/// Which allocation the optimal policy is currently following.
struct PlanState {
    plan: Option<OptimalPlan>,
}

impl PlanState {
    fn consume(&mut self, doses: &[f64]) {
        if let Some(p) = &mut self.plan {
            for (t, d) in p.target.iter_mut().zip(doses) {
                *t = (*t - d).max(0.0);
            }
        }
    }

    fn remaining(&self) -> f64 {
        self.plan.as_ref().map_or(0.0, |p| p.target.iter().sum())
    }
}

/// Shared epoch logic for both models: the policy's doses, followed by the
/// leftover rule for any supply the optimal plan no longer wants.
fn epoch_doses(
    policy: &PolicySpec,
    ctx: DoseContext,
    extinct: bool,
    leftover: LeftoverRule,
    plan: &mut PlanState,
) -> Result<Vec<f64>> {
    let supply = ctx.available();
    if policy.kind == PolicyKind::NoVaccine || supply <= 0.0 {
        return Ok(vec![0.0; ctx.headroom.len()]);
    }
    if extinct {
        return Ok(leftover_redistribute(ctx.headroom, supply, leftover));
    }
    let headroom = ctx.headroom;
    let mut doses = emit_doses(policy, &DoseContext { plan: plan.plan.as_ref(), ..ctx })?;
    if policy.kind == PolicyKind::OptimalStabilizing {
        plan.consume(&doses);
        let given: f64 = doses.iter().sum();
        let surplus = supply - given;
        if surplus > 1e-9 * supply.max(1.0) && plan.remaining() <= 1e-9 * supply.max(1.0) {
            let room: Vec<f64> = headroom.iter().zip(&doses).map(|(h, d)| (h - d).max(0.0)).collect();
            for (d, x) in doses.iter_mut().zip(leftover_redistribute(&room, surplus, leftover)) {
                *d += x;
            }
        }
    }
    Ok(doses)
}

/// Runs `policy` on the network model for `horizon` days.
pub fn simulate_policy(
    inst: &CovidInstance,
    policy: &PolicySpec,
    schedule: &VaccinationSchedule,
    horizon: u32,
    step: f64,
) -> Result<Trajectory> {
    inst.validate()?;
    policy.validate()?;
    schedule.validate()?;
    let sys = CovidSystem::new(inst)?;
    let cells = sys.cells();
    let pop = inst.network.cell_population();
    let ntot: f64 = pop.iter().sum();
    let budget = schedule.total_budget * ntot;

    let mut plan = PlanState { plan: None };
    if policy.kind == PolicyKind::OptimalStabilizing && policy.resolve_mode == ResolveMode::Static && budget > 0.0 {
        let out = max_decay_binary_search(inst, budget, None)?;
        log::info!("static plan: alpha = {:.5}, {:.1} doses", out.alpha, out.result.total_doses);
        plan.plan = Some(OptimalPlan { target: out.result.doses.clone(), priority: None });
    }

    let mut state = inst.state.clone();
    state.immune = state.immune_pool();
    let e0 = state.e.clone();
    let mut cum_inflow = vec![0.0; cells];
    let mut remaining = budget;
    let zero = vec![0.0; cells];
    let mut traj = Trajectory {
        labels: cell_labels(inst),
        population: pop.clone(),
        times: vec![state.t],
        states: vec![state.clone()],
        new_cases: vec![zero.clone()],
        cum_cases: vec![zero.clone()],
        cum_deaths: vec![zero.clone()],
        doses: vec![zero.clone()],
        clamp_events: 0,
    };

    let t0 = state.t;
    for day in 0..horizon {
        let mut given = zero.clone();
        if day % schedule.interval_days == 0 && remaining > 0.0 {
            let supply = (schedule.daily_rate * schedule.interval_days as f64 * ntot).min(remaining);
            let headroom: Vec<f64> = (0..cells).map(|i| state.s[i] * pop[i]).collect();
            let cases: Vec<f64> = (0..cells).map(|i| pop[i] * (1.0 - state.s[i] - state.immune[i]).max(0.0)).collect();
            let active: f64 = (0..cells).map(|i| (state.xa[i] + state.xs[i]) * pop[i]).sum();
            let extinct = active < EXTINCTION_THRESHOLD;
            if policy.kind == PolicyKind::OptimalStabilizing && policy.resolve_mode == ResolveMode::DailyResolve && !extinct {
                let now = CovidInstance { state: state.clone(), ..inst.clone() };
                let out = max_decay_binary_search(&now, remaining, None)?;
                let priority = (0..cells).map(|i| if state.s[i] > 0.0 { out.result.v[i] / state.s[i] } else { 0.0 }).collect();
                plan.plan = Some(OptimalPlan { target: out.result.doses.clone(), priority: Some(priority) });
            }
            let ctx = DoseContext {
                headroom: &headroom,
                population: &pop,
                cumulative_cases: &cases,
                groups: inst.groups(),
                epoch_supply: supply,
                remaining_budget: remaining,
                plan: None,
            };
            let doses = epoch_doses(policy, ctx, extinct, schedule.leftover_rule, &mut plan)?;
            let emitted = check_supply(&doses, supply)?;
            let v: Vec<f64> = (0..cells).map(|i| (doses[i].max(0.0) / pop[i]).min(state.s[i])).collect();
            let psi = inst.params.psi;
            state = apply_vaccination_event(&state, &v, psi)?;
            remaining = (remaining - emitted).max(0.0);
            given = doses;
        }

        let before = cum_inflow.clone();
        let mut y = sys.pack(&state, &cum_inflow);
        let (ta, tb) = (t0 + day as f64, t0 + day as f64 + 1.0);
        traj.clamp_events += advance(&sys, &mut y, ta, tb, step)?;
        sys.unpack(&y, &mut state);
        state.t = tb;
        cum_inflow.copy_from_slice(&y[5 * cells..]);

        traj.times.push(tb);
        traj.states.push(state.clone());
        traj.new_cases.push((0..cells).map(|i| (cum_inflow[i] - before[i]) * pop[i]).collect());
        traj.cum_cases.push((0..cells).map(|i| cum_inflow[i] * pop[i]).collect());
        traj.cum_deaths.push((0..cells).map(|i| (state.e[i] - e0[i]).max(0.0) * pop[i]).collect());
        traj.doses.push(given);
    }
    Ok(traj)
}

/// Daily snapshots of the age-structured model; counts are persons.
#[derive(Debug, Clone, PartialEq)]
pub struct BubarTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<BubarState>,
    /// Cumulative infections per group since the start.
    pub cum_infections: Vec<Vec<f64>>,
    pub doses: Vec<Vec<f64>>,
    pub clamp_events: usize,
}

impl BubarTrajectory {
    pub fn final_infections(&self) -> f64 {
        self.cum_infections.last().map_or(0.0, |r| r.iter().sum())
    }

    pub fn final_deaths(&self) -> f64 {
        let first: f64 = self.states[0].d.iter().sum();
        let last: f64 = self.states.last().map_or(first, |s| s.d.iter().sum());
        last - first
    }

    pub fn total_doses(&self) -> f64 {
        self.doses.iter().flatten().sum()
    }
}

/// Runs `policy` on the age-structured model; doses are spread over each
/// group's eligible people and only protect the susceptible share.
pub fn simulate_bubar(
    model: &BubarModel,
    st0: &BubarState,
    policy: &PolicySpec,
    schedule: &VaccinationSchedule,
    horizon: u32,
    step: f64,
) -> Result<BubarTrajectory> {
    model.validate()?;
    st0.validate(model)?;
    policy.validate()?;
    schedule.validate()?;
    let g = model.groups();
    let ntot: f64 = model.population.iter().sum();
    let budget = schedule.total_budget * ntot;
    let sys = BubarSystem { model: model.clone() };

    let mut plan = PlanState { plan: None };
    if policy.kind == PolicyKind::OptimalStabilizing && policy.resolve_mode == ResolveMode::Static && budget > 0.0 {
        let out = bubar_max_decay(model, st0, budget)?;
        log::info!("static plan: alpha = {:.5}, {:.1} doses", out.alpha, out.result.total_doses);
        plan.plan = Some(OptimalPlan { target: out.result.doses.clone(), priority: None });
    }

    let mut state = st0.clone();
    if state.dosed_other.len() != g {
        state.dosed_other = vec![0.0; g];
    }
    let mut cum = vec![0.0; g];
    let mut remaining = budget;
    let zero = vec![0.0; g];
    let mut traj = BubarTrajectory {
        times: vec![state.t],
        states: vec![state.clone()],
        cum_infections: vec![zero.clone()],
        doses: vec![zero.clone()],
        clamp_events: 0,
    };
    let t0 = state.t;
    for day in 0..horizon {
        let mut given = zero.clone();
        if day % schedule.interval_days == 0 && remaining > 0.0 {
            let supply = (schedule.daily_rate * schedule.interval_days as f64 * ntot).min(remaining);
            let headroom: Vec<f64> = (0..g).map(|k| state.eligible(k)).collect();
            let cases: Vec<f64> = (0..g).map(|k| cum[k] + state.r[k] + state.rx[k] + state.rv[k]).collect();
            let extinct = state.active() < EXTINCTION_THRESHOLD;
            if policy.kind == PolicyKind::OptimalStabilizing && policy.resolve_mode == ResolveMode::DailyResolve && !extinct {
                let out = bubar_max_decay(model, &state, remaining)?;
                plan.plan = Some(OptimalPlan { target: out.result.doses.clone(), priority: Some(out.result.v.clone()) });
            }
            let ctx = DoseContext {
                headroom: &headroom,
                population: &model.population,
                cumulative_cases: &cases,
                groups: g,
                epoch_supply: supply,
                remaining_budget: remaining,
                plan: None,
            };
            let doses = epoch_doses(policy, ctx, extinct, schedule.leftover_rule, &mut plan)?;
            let emitted = check_supply(&doses, supply)?;
            let v: Vec<f64> =
                (0..g).map(|k| if headroom[k] > 0.0 { (doses[k].max(0.0) / headroom[k]).min(1.0) } else { 0.0 }).collect();
            state = vaccinate_bubar(&state, &v, model.psi)?;
            remaining = (remaining - emitted).max(0.0);
            given = doses;
        }
        let mut y = sys.pack(&state, &cum);
        let (ta, tb) = (t0 + day as f64, t0 + day as f64 + 1.0);
        traj.clamp_events += advance(&sys, &mut y, ta, tb, step)?;
        state.unpack(&y[..BUBAR_BLOCKS * g]);
        state.t = tb;
        cum.copy_from_slice(&y[BUBAR_BLOCKS * g..]);
        traj.times.push(tb);
        traj.states.push(state.clone());
        traj.cum_infections.push(cum.clone());
        traj.doses.push(given);
    }
    Ok(traj)
}

//! Dosing policies: turn an epoch's supply into a per-cell dose vector.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    OptimalStabilizing,
    PopulationWeighted,
    InfectionWeighted,
    NoVaccine,
    AgePriority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResolveMode {
    #[default]
    Static,
    DailyResolve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeftoverRule {
    #[default]
    EvenSplit,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    #[serde(default)]
    pub resolve_mode: ResolveMode,
    /// Age-group tiers served in order; groups within a tier share by headroom.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub priority_groups: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        Self { kind, resolve_mode: ResolveMode::Static, priority_groups: Vec::new(), name: None }
    }

    pub fn daily(kind: PolicyKind) -> Self {
        Self { resolve_mode: ResolveMode::DailyResolve, ..Self::new(kind) }
    }

    pub fn age_priority(name: &str, tiers: Vec<Vec<usize>>) -> Self {
        Self { priority_groups: tiers, name: Some(name.to_string()), ..Self::new(PolicyKind::AgePriority) }
    }

    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let base = match self.kind {
            PolicyKind::OptimalStabilizing => "optimal",
            PolicyKind::PopulationWeighted => "population-weighted",
            PolicyKind::InfectionWeighted => "infection-weighted",
            PolicyKind::NoVaccine => "no-vaccine",
            PolicyKind::AgePriority => "age-priority",
        };
        match (self.kind, self.resolve_mode) {
            (PolicyKind::OptimalStabilizing, ResolveMode::DailyResolve) => format!("{base}-daily"),
            _ => base.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == PolicyKind::AgePriority
            && (self.priority_groups.is_empty() || self.priority_groups.iter().all(Vec::is_empty))
        {
            return Err(invalid("age-priority policy needs a nonempty priority list"));
        }
        Ok(())
    }
}

/// Allocation target handed to the optimal policy by the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPlan {
    /// Doses (persons) per cell still wanted by the plan.
    pub target: Vec<f64>,
    /// Fill order score; higher first. `None` pro-rates the target.
    pub priority: Option<Vec<f64>>,
}

/// What a policy sees at a dosing epoch.
#[derive(Debug, Clone)]
pub struct DoseContext<'a> {
    /// Doses each cell can still absorb (persons).
    pub headroom: &'a [f64],
    pub population: &'a [f64],
    pub cumulative_cases: &'a [f64],
    /// Cells per location; age-priority tiers refer to `cell % groups`.
    pub groups: usize,
    pub epoch_supply: f64,
    pub remaining_budget: f64,
    pub plan: Option<&'a OptimalPlan>,
}

impl DoseContext<'_> {
    pub fn available(&self) -> f64 {
        let room: f64 = self.headroom.iter().map(|h| h.max(0.0)).sum();
        self.epoch_supply.min(self.remaining_budget).min(room).max(0.0)
    }
}

/// Caps `request` at `headroom`, handing the excess to unsaturated cells in
/// proportion to their remaining headroom.
pub fn cap_to_headroom(request: &[f64], headroom: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = request.iter().zip(headroom).map(|(r, h)| r.max(0.0).min(h.max(0.0))).collect();
    let mut excess: f64 = request.iter().map(|r| r.max(0.0)).sum::<f64>() - out.iter().sum::<f64>();
    for _ in 0..request.len() + 1 {
        if excess <= 1e-12 {
            break;
        }
        let room: Vec<f64> = out.iter().zip(headroom).map(|(o, h)| (h.max(0.0) - o).max(0.0)).collect();
        let total: f64 = room.iter().sum();
        if total <= 0.0 {
            break;
        }
        let give = excess.min(total);
        for (o, r) in out.iter_mut().zip(&room) {
            *o += give * r / total;
        }
        excess -= give;
    }
    out
}

/// Splits `amount` as evenly as possible subject to per-cell caps.
pub fn water_fill(headroom: &[f64], amount: f64) -> Vec<f64> {
    let mut out = vec![0.0; headroom.len()];
    let mut left = amount.max(0.0);
    let mut open: Vec<usize> = (0..headroom.len()).filter(|&i| headroom[i] > 0.0).collect();
    while left > 1e-12 && !open.is_empty() {
        let share = left / open.len() as f64;
        let mut next = Vec::with_capacity(open.len());
        for &i in &open {
            let room = headroom[i] - out[i];
            if room <= share {
                out[i] = headroom[i];
                left -= room;
            } else {
                next.push(i);
            }
        }
        if next.len() == open.len() {
            for &i in &next {
                out[i] += share;
            }
            left = 0.0;
        }
        open = next;
    }
    out
}

fn proportional(weights: &[f64], amount: f64, headroom: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    if total <= 0.0 || amount <= 0.0 {
        return vec![0.0; weights.len()];
    }
    let req: Vec<f64> = weights.iter().map(|w| amount * w.max(0.0) / total).collect();
    cap_to_headroom(&req, headroom)
}

/// Even split of leftover supply once the epidemic is extinct.
pub fn leftover_redistribute(headroom: &[f64], supply: f64, rule: LeftoverRule) -> Vec<f64> {
    match rule {
        LeftoverRule::None => vec![0.0; headroom.len()],
        LeftoverRule::EvenSplit => water_fill(headroom, supply),
    }
}

pub fn emit_doses(policy: &PolicySpec, ctx: &DoseContext) -> Result<Vec<f64>> {
    if !(ctx.epoch_supply >= 0.0) {
        return Err(invalid(format!("negative epoch supply {}", ctx.epoch_supply)));
    }
    policy.validate()?;
    let n = ctx.headroom.len();
    let amount = ctx.available();
    let doses = match policy.kind {
        PolicyKind::NoVaccine => vec![0.0; n],
        PolicyKind::PopulationWeighted => proportional(ctx.population, amount, ctx.headroom),
        PolicyKind::InfectionWeighted => {
            if ctx.cumulative_cases.iter().any(|&c| c > 0.0) {
                proportional(ctx.cumulative_cases, amount, ctx.headroom)
            } else {
                proportional(ctx.population, amount, ctx.headroom)
            }
        }
        PolicyKind::AgePriority => {
            let mut out = vec![0.0; n];
            let mut left = amount;
            let g = ctx.groups.max(1);
            for tier in &policy.priority_groups {
                if left <= 1e-12 {
                    break;
                }
                let room: Vec<f64> =
                    (0..n).map(|i| if tier.contains(&(i % g)) { ctx.headroom[i].max(0.0) } else { 0.0 }).collect();
                let total: f64 = room.iter().sum();
                if total <= 0.0 {
                    continue;
                }
                let give = left.min(total);
                for i in 0..n {
                    out[i] += give * room[i] / total;
                }
                left -= give;
            }
            out
        }
        PolicyKind::OptimalStabilizing => match ctx.plan {
            None => vec![0.0; n],
            Some(plan) => {
                let target: Vec<f64> = plan.target.iter().zip(ctx.headroom).map(|(t, h)| t.max(0.0).min(h.max(0.0))).collect();
                let want: f64 = target.iter().sum();
                let give = amount.min(want);
                match &plan.priority {
                    None => {
                        if want > 0.0 {
                            target.iter().map(|t| give * t / want).collect()
                        } else {
                            vec![0.0; n]
                        }
                    }
                    Some(score) => {
                        let mut order: Vec<usize> = (0..n).collect();
                        order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
                        let mut out = vec![0.0; n];
                        let mut left = give;
                        for i in order {
                            let x = target[i].min(left);
                            out[i] = x;
                            left -= x;
                            if left <= 0.0 {
                                break;
                            }
                        }
                        out
                    }
                }
            }
        },
    };
    Ok(doses)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx<'a>(headroom: &'a [f64], pop: &'a [f64], cases: &'a [f64], supply: f64) -> DoseContext<'a> {
        DoseContext {
            headroom,
            population: pop,
            cumulative_cases: cases,
            groups: 1,
            epoch_supply: supply,
            remaining_budget: f64::INFINITY,
            plan: None,
        }
    }

    #[test]
    fn population_weighted_symmetry() {
        let d = emit_doses(&PolicySpec::new(PolicyKind::PopulationWeighted), &ctx(&[1e4, 1e4], &[1e4, 1e4], &[0.0; 2], 100.0))
            .unwrap();
        assert_eq!(d, vec![50.0, 50.0]);
    }

    #[test]
    fn no_vaccine_is_zero() {
        let d = emit_doses(&PolicySpec::new(PolicyKind::NoVaccine), &ctx(&[1e4], &[1e4], &[5.0], 100.0)).unwrap();
        assert_eq!(d, vec![0.0]);
    }

    #[test]
    fn even_split_and_water_filling() {
        let d = leftover_redistribute(&[1000.0; 6], 600.0, LeftoverRule::EvenSplit);
        assert!(d.iter().all(|x| (x - 100.0).abs() < 1e-12));
        let d = leftover_redistribute(&[10.0, 1000.0, 1000.0], 310.0, LeftoverRule::EvenSplit);
        assert!((d[0] - 10.0).abs() < 1e-12 && (d[1] - 150.0).abs() < 1e-12 && (d[2] - 150.0).abs() < 1e-12);
        assert_eq!(leftover_redistribute(&[5.0], 3.0, LeftoverRule::None), vec![0.0]);
    }

    #[test]
    fn excess_goes_to_headroom() {
        let d = cap_to_headroom(&[80.0, 20.0], &[50.0, 100.0]);
        assert_eq!(d, vec![50.0, 50.0]);
    }

    #[test]
    fn age_priority_fills_tiers() {
        let p = PolicySpec::age_priority("test", vec![vec![1], vec![0, 2]]);
        let mut c = ctx(&[30.0, 20.0, 10.0], &[1.0; 3], &[0.0; 3], 35.0);
        c.groups = 3;
        let d = emit_doses(&p, &c).unwrap();
        assert!((d[1] - 20.0).abs() < 1e-12 && (d[0] - 11.25).abs() < 1e-12 && (d[2] - 3.75).abs() < 1e-12);
        assert!(PolicySpec::new(PolicyKind::AgePriority).validate().is_err());
    }

    #[test]
    fn negative_supply_rejected() {
        assert!(emit_doses(&PolicySpec::new(PolicyKind::NoVaccine), &ctx(&[1.0], &[1.0], &[0.0], -1.0)).is_err());
    }
}

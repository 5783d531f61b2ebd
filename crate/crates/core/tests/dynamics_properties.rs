use proptest::prelude::*;

use vaxstab::dynamics::{simulate_bubar, simulate_policy, Trajectory, VaccinationSchedule, DEFAULT_STEP};
use vaxstab::ingest::fixtures::{bubar_presets, bubar_us_model};
use vaxstab::ingest::{synthetic_instance, SyntheticOptions};
use vaxstab::policies::{
    emit_doses, water_fill, DoseContext, LeftoverRule, OptimalPlan, PolicyKind, PolicySpec,
};

fn policy(k: usize) -> PolicySpec {
    match k {
        0 => PolicySpec::new(PolicyKind::OptimalStabilizing),
        1 => PolicySpec::daily(PolicyKind::OptimalStabilizing),
        2 => PolicySpec::new(PolicyKind::PopulationWeighted),
        3 => PolicySpec::new(PolicyKind::InfectionWeighted),
        _ => PolicySpec::new(PolicyKind::NoVaccine),
    }
}

fn check_accounting(t: &Trajectory) -> Result<(), TestCaseError> {
    for st in &t.states {
        for c in 0..st.len() {
            let total = st.s[c] + st.xa[c] + st.xs[c] + st.e[c] + st.h[c];
            prop_assert!((total - 1.0).abs() <= 1e-8, "cell {c} total {total} at t = {}", st.t);
            prop_assert!(st.immune[c] <= st.h[c] + 1e-12);
        }
    }
    for series in [&t.cum_cases, &t.cum_deaths] {
        for w in series.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                prop_assert!(b >= a, "cumulative series decreased: {a} -> {b}");
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn network_runs_conserve_mass_and_accumulate(
        seed in 0u64..1000,
        rt in 0.8..1.8f64,
        budget in 0.0..0.3f64,
        k in 0usize..5,
        interval in 1u32..5,
    ) {
        let inst = synthetic_instance(&SyntheticOptions::new(seed, 3, rt, 0.5)).unwrap();
        let sched = VaccinationSchedule { interval_days: interval, ..VaccinationSchedule::new(0.005, budget) };
        let t = simulate_policy(&inst, &policy(k), &sched, 120, DEFAULT_STEP).unwrap();
        check_accounting(&t)?;
        prop_assert_eq!(t.clamp_events, 0);
    }

    #[test]
    fn doses_total_min_of_budget_and_supply(seed in 0u64..1000, budget in 0.0..0.3f64, k in 0usize..4) {
        let inst = synthetic_instance(&SyntheticOptions::new(seed, 3, 1.4, 0.5)).unwrap();
        let ntot = inst.network.total_population();
        let (rate, horizon) = (0.002, 100u32);
        let t = simulate_policy(&inst, &policy(k), &VaccinationSchedule::new(rate, budget), horizon, DEFAULT_STEP).unwrap();
        let want = (budget * ntot).min(rate * ntot * horizon as f64);
        prop_assert!((t.total_doses() - want).abs() <= 1.0, "{} vs {want}", t.total_doses());
    }

    #[test]
    fn static_and_daily_modes_spend_the_same(seed in 0u64..1000, budget in 0.01..0.1f64) {
        let inst = synthetic_instance(&SyntheticOptions::new(seed, 3, 1.5, 0.5)).unwrap();
        let sched = VaccinationSchedule::new(0.004, budget);
        let a = simulate_policy(&inst, &policy(0), &sched, 60, DEFAULT_STEP).unwrap();
        let b = simulate_policy(&inst, &policy(1), &sched, 60, DEFAULT_STEP).unwrap();
        prop_assert!((a.total_doses() - b.total_doses()).abs() <= 1.0);
    }

    #[test]
    fn emitted_doses_respect_supply_and_headroom(
        headroom in prop::collection::vec(0.0..1e4f64, 1..12),
        supply in 0.0..5e4f64,
        remaining in 0.0..5e4f64,
        k in 0usize..6,
        weights in prop::collection::vec(0.0..1.0f64, 12),
    ) {
        let n = headroom.len();
        let population: Vec<f64> = (0..n).map(|i| 1e4 * (1.0 + weights[i])).collect();
        let cases: Vec<f64> = weights[..n].iter().map(|w| 100.0 * w).collect();
        let plan = OptimalPlan { target: weights[..n].iter().map(|w| 1e4 * w).collect(), priority: None };
        let groups = if n % 3 == 0 { 3 } else { 1 };
        let p = match k {
            5 => PolicySpec::age_priority("p", vec![vec![groups - 1], (0..groups - 1).collect()]),
            k => policy(k),
        };
        let ctx = DoseContext {
            headroom: &headroom,
            population: &population,
            cumulative_cases: &cases,
            groups,
            epoch_supply: supply,
            remaining_budget: remaining,
            plan: Some(&plan),
        };
        let d = emit_doses(&p, &ctx).unwrap();
        let total: f64 = d.iter().sum();
        prop_assert!(total <= supply.min(remaining) * (1.0 + 1e-12) + 1e-9);
        for (x, h) in d.iter().zip(&headroom) {
            prop_assert!(*x >= 0.0 && *x <= h * (1.0 + 1e-12) + 1e-9);
        }
        if p.kind != PolicyKind::NoVaccine && p.kind != PolicyKind::OptimalStabilizing {
            prop_assert!((total - ctx.available()).abs() <= 1e-6 * ctx.available().max(1.0));
        }
    }

    #[test]
    fn even_split_is_the_capped_water_level(headroom in prop::collection::vec(0.0..100.0f64, 1..10), amount in 0.0..800.0f64) {
        let d = water_fill(&headroom, amount);
        let room: f64 = headroom.iter().sum();
        let total: f64 = d.iter().sum();
        prop_assert!((total - amount.min(room)).abs() <= 1e-9 * room.max(1.0));
        // Oracle: every unsaturated cell sits at a common level no lower than any saturated cell's cap.
        let level = d.iter().zip(&headroom).filter(|(x, h)| **x < **h - 1e-9).map(|(x, _)| *x).fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
        if let Some(level) = level {
            for (x, h) in d.iter().zip(&headroom) {
                if *x < *h - 1e-9 {
                    prop_assert!((x - level).abs() <= 1e-9 * level.max(1.0));
                } else {
                    prop_assert!(*h <= level + 1e-9);
                }
            }
        }
        prop_assert_eq!(vaxstab::policies::leftover_redistribute(&headroom, amount, LeftoverRule::None), vec![0.0; headroom.len()]);
    }
}

#[test]
fn age_structured_groups_conserve_people() {
    let model = bubar_us_model().calibrated(1.25).unwrap();
    let st0 = model.initial_state(0.001);
    let sched = VaccinationSchedule::new(0.002, 0.3);
    let mut policies = vec![PolicySpec::new(PolicyKind::OptimalStabilizing), PolicySpec::new(PolicyKind::NoVaccine)];
    policies.extend(bubar_presets().iter().map(|p| p.policy()));
    for p in policies {
        let t = simulate_bubar(&model, &st0, &p, &sched, 300, DEFAULT_STEP).unwrap();
        for st in &t.states {
            for g in 0..st.groups() {
                let drift = (st.group_total(g) - model.population[g]).abs();
                assert!(drift <= 1e-6, "{}: group {g} drifted by {drift}", p.label());
            }
        }
        let want = if p.kind == PolicyKind::NoVaccine { 0.0 } else { 0.3 * model.population.iter().sum::<f64>() };
        assert!((t.total_doses() - want).abs() <= 1.0, "{}: {} doses", p.label(), t.total_doses());
        for w in t.cum_infections.windows(2) {
            assert!(w[0].iter().zip(&w[1]).all(|(a, b)| b >= a));
        }
    }
}

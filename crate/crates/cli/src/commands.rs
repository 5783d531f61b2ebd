use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use vaxstab::allocator::bubar::{bubar_certificate, bubar_max_decay, solve_bubar_allocation};
use vaxstab::allocator::{covid_certificate, max_decay_binary_search, solve_allocation, AllocationResult, SolverPath};
use vaxstab::dynamics::{simulate_bubar, simulate_policy, VaccinationSchedule};
use vaxstab::ingest::{bubar_rows, write_bubar_model, write_instance, write_rows, AllocationRow, SummaryRow, SweepRow};
use vaxstab::model::{effective_reproduction_number, StabilityCertificate};
use vaxstab::policies::PolicySpec;
use vaxstab::{Error, Result};

use crate::config::{load_instance, Loaded, RunConfig};

/// Writes through a temporary sibling and renames, so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn rows_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_rows(rows, &mut buf)?;
    Ok(buf)
}

fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

pub fn calibrate(cfg: &RunConfig) -> Result<PathBuf> {
    let out = cfg.out_dir();
    fs::create_dir_all(&out)?;
    match load_instance(cfg)? {
        Loaded::Network(inst) => {
            let rt = effective_reproduction_number(&inst)?;
            let path = out.join("instance.json");
            write_instance(&inst, &path)?;
            println!("calibrated Rt = {rt:.8}");
            println!("wrote {}", path.display());
            Ok(path)
        }
        Loaded::Bubar { model, .. } => {
            let r0 = model.basic_reproduction_number()?;
            let path = out.join("model.json");
            write_bubar_model(&model, &path)?;
            println!("calibrated R0 = {r0:.8}");
            println!("wrote {}", path.display());
            Ok(path)
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AllocationReport {
    /// `budget` (largest certified decay rate under a dose budget) or `alpha` (fixed rate).
    pub mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_fraction: Option<f64>,
    pub alpha: f64,
    pub lambda_max: f64,
    pub discrete_radius: f64,
    pub certified: bool,
    pub total_doses: f64,
    pub solver: SolverPath,
    pub labels: Vec<String>,
    pub v: Vec<f64>,
    pub doses: Vec<f64>,
}

pub enum AllocateMode {
    Budget(f64),
    Alpha(f64),
}

pub fn allocate(cfg: &RunConfig, mode: AllocateMode) -> Result<AllocationReport> {
    let out = cfg.out_dir();
    fs::create_dir_all(&out)?;
    let (res, cert, labels, pop, s): (AllocationResult, StabilityCertificate, Vec<String>, Vec<f64>, Vec<f64>) =
        match load_instance(cfg)? {
            Loaded::Network(inst) => {
                let (res, cert) = match mode {
                    AllocateMode::Budget(b) => {
                        let o = max_decay_binary_search(&inst, b * inst.network.total_population(), None)?;
                        let cert = covid_certificate(&inst, &o.result.v, o.alpha)?;
                        (o.result, cert)
                    }
                    AllocateMode::Alpha(a) => {
                        let r = solve_allocation(&inst, a)?;
                        let cert = covid_certificate(&inst, &r.v, a)?;
                        (r, cert)
                    }
                };
                let g = inst.groups();
                let labels = (0..inst.cells())
                    .map(|c| {
                        let loc = inst.network.location_name(c / g);
                        if g > 1 { format!("{loc}/{}", c % g) } else { loc }
                    })
                    .collect();
                (res, cert, labels, inst.network.cell_population(), inst.state.s.clone())
            }
            Loaded::Bubar { model, state } => {
                let (res, cert) = match mode {
                    AllocateMode::Budget(b) => {
                        let total: f64 = model.population.iter().sum();
                        let o = bubar_max_decay(&model, &state, b * total)?;
                        let cert = bubar_certificate(&model, &state, &o.result.v, o.alpha)?;
                        (o.result, cert)
                    }
                    AllocateMode::Alpha(a) => {
                        let r = solve_bubar_allocation(&model, &state, a, None)?;
                        let cert = bubar_certificate(&model, &state, &r.v, a)?;
                        (r, cert)
                    }
                };
                let g = model.groups();
                let labels = model.group_names.clone().unwrap_or_else(|| (0..g).map(|k| k.to_string()).collect());
                let s = (0..g).map(|k| state.s[k] / model.population[k]).collect();
                (res, cert, labels, model.population.clone(), s)
            }
        };
    let report = AllocationReport {
        mode: if matches!(mode, AllocateMode::Budget(_)) { "budget" } else { "alpha" },
        budget_fraction: if let AllocateMode::Budget(b) = mode { Some(b) } else { None },
        alpha: cert.alpha,
        lambda_max: cert.lambda_max,
        discrete_radius: cert.discrete_radius,
        certified: cert.satisfied,
        total_doses: res.total_doses,
        solver: res.stats.path,
        labels: labels.clone(),
        v: res.v.clone(),
        doses: res.doses.clone(),
    };
    let rows: Vec<AllocationRow> = (0..res.v.len())
        .map(|c| AllocationRow { cell: c, label: labels[c].clone(), population: pop[c], s: s[c], v: res.v[c], doses: res.doses[c] })
        .collect();
    write_atomic(&out.join("allocation.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
    write_atomic(&out.join("allocation.csv"), &rows_bytes(&rows)?)?;
    println!(
        "alpha = {:.6}, lambda_max = {:.6e}, doses = {:.1} ({}), certified = {}",
        report.alpha,
        report.lambda_max,
        report.total_doses,
        serde_json::to_string(&report.solver)?.trim_matches('"'),
        report.certified
    );
    Ok(report)
}

/// Runs every policy on one loaded instance; `traj_dir` receives one CSV per policy.
fn run_policies(loaded: &Loaded, cfg: &RunConfig, sched: &VaccinationSchedule, traj_dir: Option<&Path>) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for p in cfg.policies() {
        rows.push(run_one(loaded, &p, cfg, sched, traj_dir)?);
    }
    Ok(rows)
}

fn run_one(loaded: &Loaded, p: &PolicySpec, cfg: &RunConfig, sched: &VaccinationSchedule, traj_dir: Option<&Path>) -> Result<SummaryRow> {
    let label = p.label();
    match loaded {
        Loaded::Network(inst) => {
            let t = simulate_policy(inst, p, sched, cfg.horizon, cfg.step)?;
            if let Some(dir) = traj_dir {
                let mut buf = Vec::new();
                t.write_csv(&mut buf)?;
                write_atomic(&dir.join(format!("trajectory-{}.csv", file_stem(&label))), &buf)?;
            }
            Ok(SummaryRow { policy: label, final_cases: t.final_cases(), final_deaths: t.final_deaths(), total_doses: t.total_doses() })
        }
        Loaded::Bubar { model, state } => {
            let t = simulate_bubar(model, state, p, sched, cfg.horizon, cfg.step)?;
            if let Some(dir) = traj_dir {
                write_atomic(&dir.join(format!("trajectory-{}.csv", file_stem(&label))), &rows_bytes(&bubar_rows(&t))?)?;
            }
            Ok(SummaryRow { policy: label, final_cases: t.final_infections(), final_deaths: t.final_deaths(), total_doses: t.total_doses() })
        }
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<Vec<SummaryRow>> {
    let out = cfg.out_dir();
    fs::create_dir_all(&out)?;
    let loaded = load_instance(cfg)?;
    let rows = run_policies(&loaded, cfg, &cfg.schedule, Some(&out))?;
    write_atomic(&out.join("summary.csv"), &rows_bytes(&rows)?)?;
    Ok(rows)
}

pub fn print_summary(rows: &[SummaryRow]) {
    let best = rows.iter().map(|r| r.final_cases).fold(f64::INFINITY, f64::min);
    println!("{:<28} {:>16} {:>14} {:>14}", "policy", "final_cases", "final_deaths", "doses");
    for r in rows {
        let mark = if r.final_cases == best { " *" } else { "" };
        println!("{:<28} {:>16.1} {:>14.1} {:>14.1}{mark}", r.policy, r.final_cases, r.final_deaths, r.total_doses);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Axis {
    Budget,
    /// Target Rt, or R0 for the age-structured model.
    Rt,
    Interval,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Budget => "budget",
            Axis::Rt => "rt",
            Axis::Interval => "interval",
        }
    }
}

/// `start:stop:count` (inclusive, evenly spaced) or a comma-separated list.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidInput(format!("bad range '{text}'; use start:stop:count or a,b,c"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            match n {
                0 => return Err(bad()),
                1 => vec![a],
                _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
            }
        }
        [_] => text.split(',').map(num).collect::<Result<Vec<f64>>>()?,
        _ => return Err(bad()),
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(values)
}

fn point_config(cfg: &RunConfig, axis: Axis, value: f64) -> Result<(RunConfig, VaccinationSchedule)> {
    let mut c = cfg.clone();
    let mut sched = cfg.schedule;
    match axis {
        Axis::Budget => sched.total_budget = value,
        Axis::Rt => c.set_target(value),
        Axis::Interval => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::InvalidInput(format!("interval {value} must be a whole number of days")));
            }
            sched.interval_days = value as u32;
        }
    }
    sched.validate()?;
    c.schedule = sched;
    Ok((c, sched))
}

/// Grid points run in parallel; each writes its own file before the merged table.
pub fn sweep(cfg: &RunConfig, axis: Axis, values: &[f64]) -> Result<Vec<SweepRow>> {
    let out = cfg.out_dir();
    let points_dir = out.join("sweep-points");
    fs::create_dir_all(&points_dir)?;
    // Fail on a bad base config before spawning work.
    cfg.validate()?;
    let results: Vec<Result<Vec<SweepRow>>> = values
        .par_iter()
        .enumerate()
        .map(|(k, &value)| {
            let (c, sched) = point_config(cfg, axis, value)?;
            let loaded = load_instance(&c)?;
            let rows: Vec<SweepRow> = run_policies(&loaded, &c, &sched, None)?
                .into_iter()
                .map(|r| SweepRow {
                    axis: axis.name().into(),
                    value,
                    policy: r.policy,
                    final_cases: r.final_cases,
                    final_deaths: r.final_deaths,
                    total_doses: r.total_doses,
                })
                .collect();
            write_atomic(&points_dir.join(format!("point-{k:04}.csv")), &rows_bytes(&rows)?)?;
            log::info!("sweep point {k} ({}={value}) done", axis.name());
            Ok(rows)
        })
        .collect();
    let mut all = Vec::new();
    for r in results {
        all.extend(r?);
    }
    write_atomic(&out.join("sweep.csv"), &rows_bytes(&all)?)?;
    Ok(all)
}

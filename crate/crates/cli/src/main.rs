mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vaxstab::Error;

use commands::{AllocateMode, Axis};
use config::{parse_policy, ModelKind, RunConfig, Source};

#[derive(Parser)]
#[command(name = "vaxstab", version, about = "Stabilizing vaccine allocation on networked epidemic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use a synthetic instance with this seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    model: Option<ModelKind>,
    /// Dose budget as a fraction of the total population.
    #[arg(long, global = true)]
    budget: Option<f64>,
    /// Target Rt (network models) or R0 (age-structured model).
    #[arg(long, global = true)]
    target: Option<f64>,
    /// Policy: optimal, optimal-daily, population-weighted, infection-weighted,
    /// no-vaccine, preset:<name>, age-priority:<g,g;g>. Repeatable.
    #[arg(long = "policy", global = true)]
    policies: Vec<String>,
    #[arg(long, global = true)]
    horizon: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate transmission and write the instance JSON.
    Calibrate(Common),
    /// Optimal allocation, by budget (default) or at a fixed decay rate.
    Allocate {
        #[command(flatten)]
        common: Common,
        /// Fixed decay rate; overrides budget search.
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
    },
    /// Simulate each policy; writes trajectories and a summary table.
    Simulate(Common),
    /// Like simulate, and prints the comparison table.
    Compare(Common),
    /// Final totals per policy over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Axis,
        /// start:stop:count or a,b,c
        #[arg(long)]
        range: String,
    },
}

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_SOLVER: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible { .. } | Error::InfeasibleRate { .. } => EXIT_INFEASIBLE,
        Error::Solver(_)
        | Error::NonFinite { .. }
        | Error::OverSupply { .. }
        | Error::DepletedGroup(_)
        | Error::AllocationOutOfBox { .. } => EXIT_SOLVER,
        _ => EXIT_INPUT,
    }
}

fn build_config(c: &Common) -> vaxstab::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = c.model {
        cfg.model = m;
        if m == ModelKind::Bubar && c.config.is_none() {
            cfg.source = Source::Fixture { name: "bubar-us".into() };
        }
    }
    if let Some(seed) = c.seed {
        let locations = match cfg.source {
            Source::Synthetic { locations, .. } => locations,
            _ => 5,
        };
        cfg.source = Source::Synthetic { seed, locations };
    }
    if let Some(t) = c.target {
        cfg.set_target(t);
    }
    if let Some(b) = c.budget {
        cfg.schedule.total_budget = b;
    }
    if let Some(h) = c.horizon {
        cfg.horizon = h;
    }
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    if !c.policies.is_empty() {
        cfg.policies = c.policies.iter().map(|p| parse_policy(p)).collect::<vaxstab::Result<_>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> vaxstab::Result<()> {
    match cli.command {
        Command::Calibrate(c) => {
            commands::calibrate(&build_config(&c)?)?;
        }
        Command::Allocate { common, alpha } => {
            let cfg = build_config(&common)?;
            let mode = match alpha {
                Some(a) => AllocateMode::Alpha(a),
                None => AllocateMode::Budget(cfg.schedule.total_budget),
            };
            commands::allocate(&cfg, mode)?;
        }
        Command::Simulate(c) => {
            let cfg = build_config(&c)?;
            let rows = commands::simulate(&cfg)?;
            for r in &rows {
                println!("{}: cases {:.1}, deaths {:.1}, doses {:.1}", r.policy, r.final_cases, r.final_deaths, r.total_doses);
            }
        }
        Command::Compare(c) => {
            let rows = commands::simulate(&build_config(&c)?)?;
            commands::print_summary(&rows);
        }
        Command::Sweep { common, axis, range } => {
            let cfg = build_config(&common)?;
            let values = commands::parse_range(&range)?;
            let rows = commands::sweep(&cfg, axis, &values)?;
            println!("wrote {} rows to {}", rows.len(), cfg.out_dir().join("sweep.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

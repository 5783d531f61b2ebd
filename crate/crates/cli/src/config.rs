use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vaxstab::dynamics::{BubarModel, BubarState, VaccinationSchedule, DEFAULT_STEP};
use vaxstab::ingest::fixtures::{bubar_preset, bubar_presets, bubar_us_model, ny_single_location, reference_params, two_node_cases};
use vaxstab::ingest::{load_inputs, read_bubar_model, read_instance, synthetic_instance, SyntheticOptions};
use vaxstab::model::{calibrate_transmission, CovidInstance};
use vaxstab::policies::{PolicyKind, PolicySpec};
use vaxstab::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    Covid,
    CovidDemographic,
    Bubar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Source {
    Synthetic {
        seed: u64,
        #[serde(default = "default_locations")]
        locations: usize,
    },
    Files {
        trips: PathBuf,
        dwell: PathBuf,
        cases: PathBuf,
    },
    /// A JSON instance (or age-structured model) written by `calibrate`.
    Instance { path: PathBuf },
    /// `two-node-1` .. `two-node-4`, `ny-single`, `bubar-us`.
    Fixture { name: String },
}

fn default_locations() -> usize {
    5
}

impl Default for Source {
    fn default() -> Self {
        Source::Synthetic { seed: 0, locations: 5 }
    }
}

fn default_discount() -> f64 {
    0.5
}

fn default_horizon() -> u32 {
    500
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

fn default_infected() -> f64 {
    0.001
}

fn default_schedule() -> VaccinationSchedule {
    VaccinationSchedule::new(0.0033, 0.05)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default)]
    pub source: Source,
    #[serde(default)]
    pub target_rt: Option<f64>,
    /// Age-structured model only.
    #[serde(default)]
    pub target_r0: Option<f64>,
    /// Asymptomatic-to-symptomatic transmission ratio.
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default = "default_schedule")]
    pub schedule: VaccinationSchedule,
    #[serde(default)]
    pub policies: Vec<PolicySpec>,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    #[serde(default = "default_step")]
    pub step: f64,
    /// Initially infected fraction of each group (age-structured model).
    #[serde(default = "default_infected")]
    pub initial_infected: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config deserializes")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be positive".into()));
        }
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::InvalidInput(format!("step {} must lie in (0, 1]", self.step)));
        }
        self.schedule.validate()?;
        match self.model {
            ModelKind::Bubar if self.target_rt.is_some() => {
                return Err(Error::InvalidInput("the age-structured model takes target_r0, not target_rt".into()))
            }
            ModelKind::Covid | ModelKind::CovidDemographic if self.target_r0.is_some() => {
                return Err(Error::InvalidInput("network models take target_rt, not target_r0".into()))
            }
            _ => {}
        }
        for p in &self.policies {
            p.validate()?;
        }
        Ok(())
    }

    pub fn set_target(&mut self, value: f64) {
        match self.model {
            ModelKind::Bubar => self.target_r0 = Some(value),
            _ => self.target_rt = Some(value),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn policies(&self) -> Vec<PolicySpec> {
        if !self.policies.is_empty() {
            return self.policies.clone();
        }
        match self.model {
            ModelKind::Bubar => {
                let mut v = vec![PolicySpec::daily(PolicyKind::OptimalStabilizing)];
                v.extend(bubar_presets().iter().map(|p| p.policy()));
                v
            }
            _ => [
                PolicyKind::OptimalStabilizing,
                PolicyKind::PopulationWeighted,
                PolicyKind::InfectionWeighted,
                PolicyKind::NoVaccine,
            ]
            .into_iter()
            .map(PolicySpec::new)
            .collect(),
        }
    }
}

/// Policy from its command-line spelling: a kind name, `optimal-daily`,
/// `preset:<name>` or `age-priority:<tier>;<tier>` with comma-separated groups.
pub fn parse_policy(text: &str) -> Result<PolicySpec> {
    let bad = || Error::InvalidInput(format!("unknown policy '{text}'"));
    let spec = match text {
        "optimal" | "optimal-stabilizing" => PolicySpec::new(PolicyKind::OptimalStabilizing),
        "optimal-daily" | "optimal-stabilizing:daily" => PolicySpec::daily(PolicyKind::OptimalStabilizing),
        "population-weighted" => PolicySpec::new(PolicyKind::PopulationWeighted),
        "infection-weighted" => PolicySpec::new(PolicyKind::InfectionWeighted),
        "no-vaccine" => PolicySpec::new(PolicyKind::NoVaccine),
        _ => {
            if let Some(name) = text.strip_prefix("preset:") {
                bubar_preset(name)?.policy()
            } else if let Some(list) = text.strip_prefix("age-priority:") {
                let tiers = list
                    .split(';')
                    .map(|tier| tier.split(',').map(|g| g.trim().parse::<usize>().map_err(|_| bad())).collect())
                    .collect::<Result<Vec<Vec<usize>>>>()?;
                PolicySpec::age_priority(text, tiers)
            } else {
                return Err(bad());
            }
        }
    };
    spec.validate()?;
    Ok(spec)
}

pub enum Loaded {
    Network(CovidInstance),
    Bubar { model: BubarModel, state: BubarState },
}

/// Builds and calibrates the instance named by the config.
pub fn load_instance(cfg: &RunConfig) -> Result<Loaded> {
    cfg.validate()?;
    if cfg.model == ModelKind::Bubar {
        let model = match &cfg.source {
            Source::Fixture { name } if name == "bubar-us" => bubar_us_model(),
            Source::Instance { path } => read_bubar_model(path)?,
            _ => {
                return Err(Error::InvalidInput(
                    "the age-structured model needs the bubar-us fixture or an instance file".into(),
                ))
            }
        };
        let model = match cfg.target_r0 {
            Some(r0) => model.calibrated(r0)?,
            None => model,
        };
        let state = model.initial_state(cfg.initial_infected);
        return Ok(Loaded::Bubar { model, state });
    }
    let demographic = cfg.model == ModelKind::CovidDemographic;
    let inst = match &cfg.source {
        Source::Synthetic { seed, locations } => {
            let opts = SyntheticOptions {
                demographic,
                ..SyntheticOptions::new(*seed, *locations, cfg.target_rt.unwrap_or(1.3), cfg.discount)
            };
            return Ok(Loaded::Network(synthetic_instance(&opts)?));
        }
        Source::Files { trips, dwell, cases } => {
            if demographic {
                return Err(Error::InvalidInput("file inputs carry no age structure".into()));
            }
            let d = load_inputs(trips, dwell, cases)?;
            let inst = CovidInstance { network: d.network, params: reference_params(1.0, cfg.discount), contact: None, state: d.state };
            inst.validate()?;
            if cfg.target_rt.is_none() {
                return Err(Error::InvalidInput("file inputs need target_rt".into()));
            }
            inst
        }
        Source::Instance { path } => read_instance(path)?,
        Source::Fixture { name } => fixture(name, cfg)?,
    };
    if inst.params.is_demographic() != demographic {
        return Err(Error::InvalidInput(format!("instance does not match model {:?}", cfg.model)));
    }
    Ok(Loaded::Network(match cfg.target_rt {
        Some(rt) => {
            let p = calibrate_transmission(&inst, rt)?;
            inst.with_params(p)
        }
        None => inst,
    }))
}

fn fixture(name: &str, cfg: &RunConfig) -> Result<CovidInstance> {
    if name == "ny-single" {
        return ny_single_location(0.93, 1.0697, cfg.discount);
    }
    if let Some(k) = name.strip_prefix("two-node-").and_then(|k| k.parse::<usize>().ok()) {
        if (1..=4).contains(&k) {
            return two_node_cases()[k - 1].instance(cfg.discount);
        }
    }
    Err(Error::InvalidInput(format!("unknown fixture '{name}'")))
}

use std::path::Path;

use noma_aoi_core::agents::TrainConfig;
use noma_aoi_core::env::{DemandSpec, EnvConfig, NetworkParams};
use noma_aoi_core::geometry::{RoadConfig, VehicleState};
use noma_aoi_core::meta::MetaConfig;
use noma_aoi_core::pareto::{zeta_grid, MAX_POWER_LEVELS};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Everything one experiment needs. Missing fields take the reference
/// simulation defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkParams,
    pub road: RoadConfig,
    pub demand: DemandSpec,
    /// Penalty constant κ for Σα > 1.
    pub penalty: f64,
    pub fixed_vehicles: Option<Vec<VehicleState>>,
    pub train: TrainConfig,
    pub meta: MetaConfig,
    pub run: RunConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let env = EnvConfig::default();
        Self {
            network: env.network,
            road: env.road,
            demand: env.demand,
            penalty: env.penalty,
            fixed_vehicles: env.fixed_vehicles,
            train: TrainConfig::default(),
            meta: MetaConfig::default(),
            run: RunConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; `--seed` overrides it.
    pub seed: u64,
    /// Preference weight for single-policy commands.
    pub zeta: f64,
    /// Explicit ζ grid. When absent, `zeta_points` evenly spaced values on [0, 1].
    pub zetas: Option<Vec<f64>>,
    pub zeta_points: usize,
    pub eval_episodes: usize,
    pub hypervolume_samples: usize,
    /// K, the number of power levels per process for exhaustive search.
    pub power_levels: usize,
    pub exhaustive_episodes: usize,
    /// Output root; `--out` and `NOMA_AOI_OUT` take precedence.
    pub out_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            zeta: 0.5,
            zetas: None,
            zeta_points: 11,
            eval_episodes: 20,
            hypervolume_samples: 100_000,
            power_levels: 10,
            exhaustive_episodes: 2,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// ζ used by every sweep except `zeta`.
    pub zeta: f64,
    pub vehicles: Vec<usize>,
    pub processes: Vec<usize>,
    pub demand: Vec<usize>,
    /// Evaluation speed ranges (m/s) for the speed generalization sweep.
    pub speeds: Vec<(f64, f64)>,
    /// Evaluation lane counts for the environment generalization sweep.
    pub lanes: Vec<usize>,
    pub finetune_steps: Vec<usize>,
    /// Adds the exhaustive-search baseline to sweeps where F ≤ 4.
    pub include_exhaustive: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            zeta: 0.5,
            vehicles: vec![4, 6, 8, 10, 12, 14, 16],
            processes: vec![2, 3, 4, 5, 6],
            demand: vec![1, 2, 3, 4],
            speeds: vec![(0.0, 5.0), (10.0, 15.0), (20.0, 25.0), (30.0, 35.0)],
            lanes: vec![2, 4],
            finetune_steps: vec![0, 10, 20, 30, 40, 50],
            include_exhaustive: false,
        }
    }
}

/// |R_i| used when sweeping the number of processes.
pub fn demand_for_processes(processes: usize) -> usize {
    processes.div_ceil(2)
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    noma_aoi_core::Error::InvalidConfig { field, reason: reason.into() }.into()
}

fn check_zeta(field: &'static str, z: f64) -> Result<()> {
    if (0.0..=1.0).contains(&z) {
        Ok(())
    } else {
        Err(invalid(field, format!("must lie in [0, 1], got {z}")))
    }
}

impl ExperimentConfig {
    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            network: self.network.clone(),
            road: self.road.clone(),
            demand: self.demand.clone(),
            penalty: self.penalty,
            fixed_vehicles: self.fixed_vehicles.clone(),
        }
    }

    pub fn set_env(&mut self, env: EnvConfig) {
        self.network = env.network;
        self.road = env.road;
        self.demand = env.demand;
        self.penalty = env.penalty;
        self.fixed_vehicles = env.fixed_vehicles;
    }

    pub fn zetas(&self) -> Vec<f64> {
        self.run.zetas.clone().unwrap_or_else(|| zeta_grid(self.run.zeta_points))
    }

    pub fn validate(&self) -> Result<()> {
        self.env_config().validate()?;
        self.train.validate()?;
        self.meta.validate()?;
        check_zeta("run.zeta", self.run.zeta)?;
        check_zeta("sweep.zeta", self.sweep.zeta)?;
        let zetas = self.zetas();
        if zetas.is_empty() {
            return Err(invalid("run.zeta_points", "the ζ grid is empty"));
        }
        for z in zetas {
            check_zeta("run.zetas", z)?;
        }
        if self.run.eval_episodes == 0 {
            return Err(invalid("run.eval_episodes", "must be at least 1"));
        }
        if self.run.hypervolume_samples == 0 {
            return Err(invalid("run.hypervolume_samples", "must be at least 1"));
        }
        if !(2..=MAX_POWER_LEVELS).contains(&self.run.power_levels) {
            return Err(invalid("run.power_levels", format!("must lie in 2..={MAX_POWER_LEVELS}")));
        }
        if self.run.exhaustive_episodes == 0 {
            return Err(invalid("run.exhaustive_episodes", "must be at least 1"));
        }
        if self.sweep.vehicles.contains(&0) {
            return Err(invalid("sweep.vehicles", "vehicle counts must be positive"));
        }
        if self.sweep.processes.contains(&0) {
            return Err(invalid("sweep.processes", "process counts must be positive"));
        }
        if self.sweep.demand.contains(&0) {
            return Err(invalid("sweep.demand", "each |R_i| must be at least 1"));
        }
        if self.sweep.speeds.iter().any(|&(lo, hi)| !(0.0 <= lo && lo <= hi)) {
            return Err(invalid("sweep.speeds", "ranges need 0 ≤ min ≤ max"));
        }
        if self.sweep.lanes.contains(&0) {
            return Err(invalid("sweep.lanes", "lane counts must be positive"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }
}

/// Parses and validates a config. The keyword `default` yields the defaults.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    if path.as_os_str() == "default" {
        return Ok(ExperimentConfig::default());
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

pub fn parse_config(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        let before = &text[..offset.min(text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.len() - before.rfind('\n').map_or(0, |k| k + 1) + 1;
        Error::Parse { path: path.to_path_buf(), line, column, message: e.message().trim().to_string() }
    })?;
    config.validate()?;
    Ok(config)
}

//! TOML experiment files.

use std::path::{Path, PathBuf};

use collabsgd::simulator::SweepAxis;
use collabsgd::Config;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: Config,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Keep every `trace_stride`-th step in trace files.
    #[serde(default = "default_stride")]
    pub trace_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: String,
    pub values: Vec<f64>,
    /// For the N axis: also set `alpha = N/(N+1)`.
    #[serde(default)]
    pub couple_alpha: bool,
}

impl SweepSpec {
    pub fn axis(&self) -> Result<SweepAxis, CliError> {
        let axis: SweepAxis = self.axis.parse()?;
        Ok(match axis {
            SweepAxis::N { .. } => SweepAxis::N {
                couple_alpha: self.couple_alpha,
            },
            other => other,
        })
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Experiment(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.run.validate()?;
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds must not be empty".into()));
        }
        if self.trace_stride == 0 {
            return Err(CliError::Config("trace_stride must be >= 1".into()));
        }
        if let Some(s) = &self.sweep {
            let axis = s.axis()?;
            if s.values.is_empty() {
                return Err(CliError::Config("sweep values must not be empty".into()));
            }
            for &v in &s.values {
                collabsgd::simulator::apply_axis(&self.run, axis, v)?;
            }
        }
        Ok(())
    }
}

pub const TEMPLATE: &str = r#"# Bias correction on the default noisy quadratic: the main objective
# 1/2 (x - 0)^2 and one collaborator 2/2 (x - 2)^2 averaging 10 agents.
seeds = [0, 1, 2, 3, 4]
trace_stride = 100

[run]
aggregator = "bc"
horizon = 20000
x0 = [1.0]
c0_policy = "zero"
step_size = { constant = 1e-4 }

[run.main_task]
curvature = [1.0]
optimum = [0.0]
noise_std = 10.0

[[run.collaborators]]
curvature = [2.0]
optimum = [2.0]
noise_std = 3.1622776601683795

[run.weights]
alpha = 0.9090909090909091
tau = [1.0]
beta = 1e-4

# [sweep]
# axis = "zeta"
# values = [1.0, 4.0, 16.0]
"#;

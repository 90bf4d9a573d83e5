//! TOML experiment configuration. Every field is optional; CLI flags
//! override config-file values, which override the built-in defaults.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::actor_critic::TrainConfig;
use crate::environments::{EnvKind, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::skvi::SkviParams;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub tensor: TensorConfig,
    #[serde(default)]
    pub skvi: SkviConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub harness: HarnessConfig,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub kind: Option<String>,
    pub dt: Option<f64>,
    pub episode_len: Option<usize>,
    pub action_low: Option<f64>,
    pub action_high: Option<f64>,
    #[serde(alias = "Q_scale")]
    pub q_scale: Option<f64>,
    #[serde(alias = "R_scale")]
    pub r_scale: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorConfig {
    pub state_degree: usize,
    pub action_degree: usize,
    pub ridge: f64,
    pub steps: usize,
}

impl Default for TensorConfig {
    fn default() -> Self {
        TensorConfig {
            state_degree: 2,
            action_degree: 2,
            ridge: 1e-6,
            steps: 30_000,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkviConfig {
    pub actions: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub epochs: usize,
    pub batch: usize,
    pub epsilon: f64,
    pub w_bound: f64,
    pub ridge: f64,
}

impl Default for SkviConfig {
    fn default() -> Self {
        let p = SkviParams::default();
        SkviConfig {
            actions: 101,
            alpha: p.alpha,
            gamma: p.gamma,
            epochs: p.max_iters,
            batch: p.batch_size,
            epsilon: p.epsilon,
            w_bound: p.w_bound,
            ridge: p.ridge,
        }
    }
}

impl SkviConfig {
    pub fn params(&self) -> SkviParams {
        SkviParams {
            alpha: self.alpha,
            gamma: self.gamma,
            epsilon: self.epsilon,
            w_bound: self.w_bound,
            max_iters: self.epochs,
            batch_size: self.batch,
            ridge: self.ridge,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub steps: usize,
    pub warmup: usize,
    pub batch: usize,
    pub gamma: f64,
    pub tau: f64,
    pub alpha: f64,
    pub hidden: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let c = TrainConfig::default();
        TrainSection {
            steps: c.total_steps,
            warmup: c.warmup_steps,
            batch: c.batch_size,
            gamma: c.gamma,
            tau: c.tau,
            alpha: c.alpha,
            hidden: c.hidden,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            total_steps: self.steps,
            warmup_steps: self.warmup,
            batch_size: self.batch,
            gamma: self.gamma,
            tau: self.tau,
            alpha: self.alpha,
            hidden: self.hidden,
            ..TrainConfig::default()
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub jobs: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            seeds: vec![0, 1, 2, 3, 4],
            episodes: 100,
            jobs: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if cfg.harness.seeds.is_empty() {
            return Err(Error::Config("harness.seeds must not be empty".into()));
        }
        let mut sorted = cfg.harness.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != cfg.harness.seeds.len() {
            return Err(Error::Config("harness.seeds must be distinct".into()));
        }
        Ok(cfg)
    }

    /// Builds the environment with this config's overrides applied.
    pub fn environment(&self, kind_flag: Option<&str>) -> Result<EnvironmentSpec> {
        let name = kind_flag
            .map(str::to_string)
            .or_else(|| self.env.kind.clone())
            .ok_or_else(|| Error::Config("no environment given (env.kind or --env)".into()))?;
        let mut spec = EnvironmentSpec::new(EnvKind::parse(&name)?);
        if let Some(dt) = self.env.dt {
            if dt <= 0.0 {
                return Err(Error::Config("env.dt must be positive".into()));
            }
            spec.dt = dt;
        }
        if let Some(len) = self.env.episode_len {
            if len == 0 {
                return Err(Error::Config("env.episode_len must be >= 1".into()));
            }
            spec.episode_len = len;
        }
        if let Some(lo) = self.env.action_low {
            spec.action_low = vec![lo; spec.action_dim];
        }
        if let Some(hi) = self.env.action_high {
            spec.action_high = vec![hi; spec.action_dim];
        }
        for i in 0..spec.action_dim {
            if spec.action_low[i] >= spec.action_high[i] {
                return Err(Error::Config("action_low must be below action_high".into()));
            }
        }
        if let Some(qs) = self.env.q_scale {
            spec.q = spec.q.scale(qs);
        }
        if let Some(rs) = self.env.r_scale {
            spec.r = spec.r.scale(rs);
        }
        Ok(spec)
    }
}

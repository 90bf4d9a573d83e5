//! Model persistence: structured JSON documents with a format-version field.
//! Three kinds exist — fitted Koopman tensors, trained SKVI policies (which
//! reference their tensor file), and actor-critic agents with layer-tagged
//! parameter arrays.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::actor_critic::{Agent, Algo, TrainConfig, ValueModel};
use crate::dictionaries::MonomialBasis;
use crate::environments::{EnvKind, EnvironmentSpec, Policy};
use crate::error::{Error, Result};
use crate::koopman::KoopmanTensor;
use crate::neural::{Mlp, PolicyHead};
use crate::numerics::{Matrix, Vector};
use crate::skvi::{ActionGrid, SkviPolicy, ValueWeights};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
pub struct TensorModel {
    pub format_version: u32,
    pub kind: String,
    pub env: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub d_x: usize,
    pub d_u: usize,
    pub phi_exponents: Vec<Vec<usize>>,
    pub psi_exponents: Vec<Vec<usize>>,
    /// Flattened tensor, row-major `d_x x (d_x * d_u)`.
    pub m: Vec<f64>,
    pub ridge: f64,
    pub sample_count: usize,
}

impl TensorModel {
    pub fn from_tensor(tensor: &KoopmanTensor, env: &str) -> Self {
        TensorModel {
            format_version: FORMAT_VERSION,
            kind: "koopman-tensor".into(),
            env: env.to_string(),
            state_dim: tensor.phi_basis().input_dim(),
            action_dim: tensor.psi_basis().input_dim(),
            d_x: tensor.d_x(),
            d_u: tensor.d_u(),
            phi_exponents: tensor.phi_basis().exponents().to_vec(),
            psi_exponents: tensor.psi_basis().exponents().to_vec(),
            m: tensor.matrix().as_slice().to_vec(),
            ridge: tensor.ridge(),
            sample_count: tensor.sample_count(),
        }
    }

    pub fn to_tensor(&self) -> Result<KoopmanTensor> {
        let phi = MonomialBasis::from_exponents(self.state_dim, self.phi_exponents.clone())?;
        let psi = MonomialBasis::from_exponents(self.action_dim, self.psi_exponents.clone())?;
        if phi.dim() != self.d_x || psi.dim() != self.d_u {
            return Err(Error::ModelFormat(
                "dictionary dims disagree with d_x/d_u".into(),
            ));
        }
        if self.m.len() != self.d_x * self.d_x * self.d_u {
            return Err(Error::ModelFormat("tensor entry count mismatch".into()));
        }
        let m = Matrix::new(self.d_x, self.d_x * self.d_u, self.m.clone());
        if !m.is_finite() {
            return Err(Error::ModelFormat("tensor entries must be finite".into()));
        }
        KoopmanTensor::from_matrix(m, phi, psi, self.ridge, self.sample_count)
    }
}

#[derive(Serialize, Deserialize)]
pub struct SkviModel {
    pub format_version: u32,
    pub kind: String,
    pub env: String,
    pub w: Vec<f64>,
    pub w_bound: f64,
    pub grid_low: Vec<f64>,
    pub grid_high: Vec<f64>,
    pub grid_count: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub phi_exponents: Vec<Vec<usize>>,
    pub psi_exponents: Vec<Vec<usize>>,
    /// Path of the tensor model this policy scores through.
    pub tensor_path: String,
}

/// One dense layer as a tagged flat array.
#[derive(Serialize, Deserialize)]
pub struct LayerJson {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub struct MlpJson {
    pub layers: Vec<LayerJson>,
}

impl MlpJson {
    pub fn from_mlp(net: &Mlp) -> Self {
        let (weights, biases) = net.layers();
        MlpJson {
            layers: weights
                .iter()
                .zip(biases)
                .map(|(w, b)| LayerJson {
                    rows: w.rows(),
                    cols: w.cols(),
                    w: w.as_slice().to_vec(),
                    b: b.as_slice().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_mlp(&self) -> Result<Mlp> {
        if self.layers.is_empty() {
            return Err(Error::ModelFormat("network with no layers".into()));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in &self.layers {
            if l.w.len() != l.rows * l.cols || l.b.len() != l.rows {
                return Err(Error::ModelFormat("layer shape mismatch".into()));
            }
            weights.push(Matrix::new(l.rows, l.cols, l.w.clone()));
            biases.push(Vector::new(l.b.clone()));
        }
        Ok(Mlp::from_layers(weights, biases))
    }
}

#[derive(Serialize, Deserialize)]
pub struct PolicyJson {
    pub trunk: MlpJson,
    pub action_dim: usize,
    pub action_scale: Vec<f64>,
    pub action_bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "repr")]
pub enum ValueJson {
    #[serde(rename = "koopman-linear")]
    Koopman {
        w: Vec<f64>,
        w_bar: Vec<f64>,
        tensor_path: String,
    },
    #[serde(rename = "neural-v")]
    NeuralV { v: MlpJson, v_target: MlpJson },
    #[serde(rename = "target-q")]
    TargetQ {
        q1_target: MlpJson,
        q2_target: MlpJson,
        log_alpha: f64,
    },
}

#[derive(Serialize, Deserialize)]
pub struct AgentModel {
    pub format_version: u32,
    pub kind: String,
    pub env: String,
    pub gamma: f64,
    pub alpha: f64,
    pub tau: f64,
    pub policy: PolicyJson,
    pub q1: MlpJson,
    pub q2: MlpJson,
    pub value: ValueJson,
}

impl AgentModel {
    pub fn from_agent(agent: &Agent, env: &str, tensor_path: &str) -> Self {
        let value = match &agent.value {
            ValueModel::Koopman { w, w_bar, .. } => ValueJson::Koopman {
                w: w.as_slice().to_vec(),
                w_bar: w_bar.as_slice().to_vec(),
                tensor_path: tensor_path.to_string(),
            },
            ValueModel::NeuralV { v, v_target, .. } => ValueJson::NeuralV {
                v: MlpJson::from_mlp(v),
                v_target: MlpJson::from_mlp(v_target),
            },
            ValueModel::TargetQ {
                q1_target,
                q2_target,
                log_alpha,
                ..
            } => ValueJson::TargetQ {
                q1_target: MlpJson::from_mlp(q1_target),
                q2_target: MlpJson::from_mlp(q2_target),
                log_alpha: *log_alpha,
            },
        };
        AgentModel {
            format_version: FORMAT_VERSION,
            kind: agent.algo.name().to_string(),
            env: env.to_string(),
            gamma: agent.gamma,
            alpha: agent.alpha,
            tau: agent.tau,
            policy: PolicyJson {
                trunk: MlpJson::from_mlp(&agent.policy.trunk),
                action_dim: agent.policy.action_dim,
                action_scale: agent.policy.action_scale.as_slice().to_vec(),
                action_bias: agent.policy.action_bias.as_slice().to_vec(),
            },
            q1: MlpJson::from_mlp(&agent.q1),
            q2: MlpJson::from_mlp(&agent.q2),
            value,
        }
    }

    pub fn policy_head(&self) -> Result<PolicyHead> {
        Ok(PolicyHead {
            trunk: self.policy.trunk.to_mlp()?,
            action_dim: self.policy.action_dim,
            action_scale: Vector::new(self.policy.action_scale.clone()),
            action_bias: Vector::new(self.policy.action_bias.clone()),
        })
    }

    /// Rebuilds a full agent (resuming evaluation-side state; optimizer
    /// moments are not persisted).
    pub fn to_agent(&self, env: &EnvironmentSpec, base_dir: Option<&Path>) -> Result<Agent> {
        let algo = Algo::parse(&self.kind)?;
        let cfg = TrainConfig {
            gamma: self.gamma,
            alpha: self.alpha,
            tau: self.tau,
            ..TrainConfig::default()
        };
        let tensor = match &self.value {
            ValueJson::Koopman { tensor_path, .. } => {
                Some(load_tensor(&resolve(tensor_path, base_dir))?.1)
            }
            _ => None,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        use rand::SeedableRng;
        let mut agent = Agent::new(algo, env, &cfg, tensor, &mut rng)?;
        agent.policy = self.policy_head()?;
        agent.q1 = self.q1.to_mlp()?;
        agent.q2 = self.q2.to_mlp()?;
        match (&mut agent.value, &self.value) {
            (
                ValueModel::Koopman { w, w_bar, .. },
                ValueJson::Koopman {
                    w: wj, w_bar: wbj, ..
                },
            ) => {
                *w = Vector::new(wj.clone());
                *w_bar = Vector::new(wbj.clone());
            }
            (
                ValueModel::NeuralV { v, v_target, .. },
                ValueJson::NeuralV {
                    v: vj,
                    v_target: vtj,
                },
            ) => {
                *v = vj.to_mlp()?;
                *v_target = vtj.to_mlp()?;
            }
            (
                ValueModel::TargetQ {
                    q1_target,
                    q2_target,
                    log_alpha,
                    ..
                },
                ValueJson::TargetQ {
                    q1_target: q1j,
                    q2_target: q2j,
                    log_alpha: laj,
                },
            ) => {
                *q1_target = q1j.to_mlp()?;
                *q2_target = q2j.to_mlp()?;
                *log_alpha = *laj;
            }
            _ => return Err(Error::ModelFormat("value representation mismatch".into())),
        }
        Ok(agent)
    }
}

/// Any loadable model file.
pub enum Model {
    Tensor(TensorModel),
    Skvi(SkviModel),
    Agent(AgentModel),
}

fn resolve(path: &str, base_dir: Option<&Path>) -> PathBuf {
    let p = PathBuf::from(path);
    if p.exists() {
        return p;
    }
    if let Some(base) = base_dir {
        let joined = base.join(path);
        if joined.exists() {
            return joined;
        }
    }
    p
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::ModelFormat(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn save_tensor(path: &Path, tensor: &KoopmanTensor, env: &str) -> Result<()> {
    write_json(path, &TensorModel::from_tensor(tensor, env))
}

pub fn load_tensor(path: &Path) -> Result<(TensorModel, KoopmanTensor)> {
    let model: TensorModel = read_json(path)?;
    if model.kind != "koopman-tensor" {
        return Err(Error::ModelFormat(format!(
            "{}: not a tensor model (kind '{}')",
            path.display(),
            model.kind
        )));
    }
    if model.format_version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {}",
            model.format_version
        )));
    }
    let tensor = model.to_tensor()?;
    Ok((model, tensor))
}

pub fn save_skvi(path: &Path, model: &SkviModel) -> Result<()> {
    write_json(path, model)
}

pub fn save_agent(path: &Path, model: &AgentModel) -> Result<()> {
    write_json(path, model)
}

/// Loads any model file, dispatching on its `kind` field.
pub fn load_model(path: &Path) -> Result<Model> {
    #[derive(Deserialize)]
    struct Probe {
        format_version: u32,
        kind: String,
    }
    let probe: Probe = read_json(path)?;
    if probe.format_version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {}",
            probe.format_version
        )));
    }
    match probe.kind.as_str() {
        "koopman-tensor" => Ok(Model::Tensor(read_json(path)?)),
        "skvi" => Ok(Model::Skvi(read_json(path)?)),
        "sakc" | "sac-v" | "sac-q" => Ok(Model::Agent(read_json(path)?)),
        other => Err(Error::ModelFormat(format!("unknown model kind '{other}'"))),
    }
}

impl Model {
    pub fn kind(&self) -> &str {
        match self {
            Model::Tensor(m) => &m.kind,
            Model::Skvi(m) => &m.kind,
            Model::Agent(m) => &m.kind,
        }
    }

    pub fn env_name(&self) -> &str {
        match self {
            Model::Tensor(m) => &m.env,
            Model::Skvi(m) => &m.env,
            Model::Agent(m) => &m.env,
        }
    }

    pub fn env_kind(&self) -> Result<EnvKind> {
        EnvKind::parse(self.env_name())
    }

    /// Builds the evaluation policy: SKVI acts greedily, actor-critic agents
    /// act by their squashed policy mean.
    pub fn evaluation_policy(
        &self,
        env: &EnvironmentSpec,
        base_dir: Option<&Path>,
    ) -> Result<Box<dyn Policy + Send + Sync>> {
        match self {
            Model::Tensor(_) => Err(Error::ModelFormat(
                "a tensor is a dynamics model, not a policy".into(),
            )),
            Model::Skvi(m) => {
                let (_, tensor) = load_tensor(&resolve(&m.tensor_path, base_dir))?;
                let grid = ActionGrid::new(m.grid_low.clone(), m.grid_high.clone(), m.grid_count);
                let policy = SkviPolicy::new(
                    &Vector::new(m.w.clone()),
                    &tensor,
                    grid,
                    m.alpha,
                    m.gamma,
                    env,
                    true,
                )?;
                Ok(Box::new(policy))
            }
            Model::Agent(m) => {
                let head = m.policy_head()?;
                Ok(Box::new(MeanPolicy { head }))
            }
        }
    }

    /// Linear-in-dictionary value weights for interpretability reporting,
    /// with their state dictionary.
    pub fn value_weights(&self) -> Result<(ValueWeights, MonomialBasis)> {
        match self {
            Model::Skvi(m) => {
                let basis = MonomialBasis::from_exponents(
                    EnvironmentSpec::new(EnvKind::parse(&m.env)?).state_dim,
                    m.phi_exponents.clone(),
                )?;
                Ok((
                    ValueWeights {
                        w: Vector::new(m.w.clone()),
                        bound: m.w_bound,
                    },
                    basis,
                ))
            }
            Model::Agent(a) => match &a.value {
                ValueJson::Koopman { w, .. } => {
                    let env = EnvironmentSpec::new(EnvKind::parse(&a.env)?);
                    // dictionary travels with the referenced tensor file; the
                    // weight length pins the degree
                    let mut degree = 0;
                    loop {
                        let basis = MonomialBasis::new(env.state_dim, degree);
                        if basis.dim() == w.len() {
                            return Ok((
                                ValueWeights {
                                    w: Vector::new(w.clone()),
                                    bound: f64::INFINITY,
                                },
                                basis,
                            ));
                        }
                        if basis.dim() > w.len() {
                            return Err(Error::ModelFormat(
                                "value weight length matches no monomial dictionary".into(),
                            ));
                        }
                        degree += 1;
                    }
                }
                _ => Err(Error::ModelFormat(
                    "this model's value function is a neural network, not a dictionary expansion"
                        .into(),
                )),
            },
            Model::Tensor(_) => Err(Error::ModelFormat(
                "tensor models carry no value function".into(),
            )),
        }
    }
}

struct MeanPolicy {
    head: PolicyHead,
}

impl Policy for MeanPolicy {
    fn act(&self, x: &Vector, _rng: &mut dyn rand::Rng) -> Vector {
        self.head.mean_action(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{EnvKind, RandomPolicy, rollout};
    use crate::koopman::fit_tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    fn fitted_tensor() -> (EnvironmentSpec, KoopmanTensor) {
        let env = EnvironmentSpec::new(EnvKind::LinearSystem);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let policy = RandomPolicy::for_env(&env);
        let mut data = Vec::new();
        for (_, ts) in rollout(&env, &policy, &mut rng, 5) {
            for t in ts {
                data.push((t.x, t.u, t.x_next));
            }
        }
        let tensor = fit_tensor(
            &data,
            &MonomialBasis::new(2, 2),
            &MonomialBasis::new(1, 2),
            1e-6,
        )
        .unwrap();
        (env, tensor)
    }

    #[test]
    fn tensor_model_roundtrip() {
        let dir = tempdir().unwrap();
        let (_, tensor) = fitted_tensor();
        let path = dir.path().join("tensor.json");
        save_tensor(&path, &tensor, "linear").unwrap();
        let (model, loaded) = load_tensor(&path).unwrap();
        assert_eq!(model.kind, "koopman-tensor");
        assert_eq!(loaded.matrix(), tensor.matrix());
        assert_eq!(loaded.phi_basis(), tensor.phi_basis());
        match load_model(&path).unwrap() {
            Model::Tensor(_) => {}
            _ => panic!("kind dispatch failed"),
        }
    }

    #[test]
    fn corrupt_model_reports_format_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("junk.json");
        std::fs::write(&path, "{\"format_version\": 1, \"kind\": \"nonsense\"}").unwrap();
        match load_model(&path) {
            Err(Error::ModelFormat(_)) => {}
            Err(other) => panic!("expected ModelFormat, got {other:?}"),
            Ok(_) => panic!("expected ModelFormat, got a model"),
        }
        std::fs::write(&path, "not json at all").unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn skvi_model_restores_an_evaluation_policy() {
        let dir = tempdir().unwrap();
        let (env, tensor) = fitted_tensor();
        let tensor_path = dir.path().join("tensor.json");
        save_tensor(&tensor_path, &tensor, "linear").unwrap();
        let skvi = SkviModel {
            format_version: FORMAT_VERSION,
            kind: "skvi".into(),
            env: "linear".into(),
            w: vec![0.5, 0.0, 0.0, 1.0, 0.2, 0.9],
            w_bound: 1e6,
            grid_low: env.action_low.clone(),
            grid_high: env.action_high.clone(),
            grid_count: 11,
            alpha: 1.0,
            gamma: 0.99,
            phi_exponents: tensor.phi_basis().exponents().to_vec(),
            psi_exponents: tensor.psi_basis().exponents().to_vec(),
            tensor_path: "tensor.json".into(),
        };
        let path = dir.path().join("skvi.json");
        save_skvi(&path, &skvi).unwrap();
        let model = load_model(&path).unwrap();
        let policy = model
            .evaluation_policy(&env, Some(dir.path()))
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = policy.act(&Vector::new(vec![0.2, -0.1]), &mut rng);
        assert_eq!(u.dim(), 1);
        // greedy policy is deterministic
        let u2 = policy.act(&Vector::new(vec![0.2, -0.1]), &mut rng);
        assert_eq!(u.as_slice(), u2.as_slice());
    }

    #[test]
    fn agent_model_roundtrips_parameters() {
        use crate::actor_critic::{Agent, Algo, TrainConfig};
        let (env, tensor) = fitted_tensor();
        let cfg = TrainConfig {
            hidden: 8,
            ..TrainConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let agent = Agent::new(Algo::Sakc, &env, &cfg, Some(tensor.clone()), &mut rng).unwrap();
        let dir = tempdir().unwrap();
        let tensor_path = dir.path().join("tensor.json");
        save_tensor(&tensor_path, &tensor, "linear").unwrap();
        let model = AgentModel::from_agent(&agent, "linear", tensor_path.to_str().unwrap());
        let path = dir.path().join("agent.json");
        save_agent(&path, &model).unwrap();
        match load_model(&path).unwrap() {
            Model::Agent(loaded) => {
                let restored = loaded.to_agent(&env, Some(dir.path())).unwrap();
                let x = Vector::new(vec![0.3, -0.4]);
                assert_eq!(
                    restored.act_mean(&x).as_slice(),
                    agent.act_mean(&x).as_slice()
                );
            }
            _ => panic!("wrong model kind"),
        }
    }
}

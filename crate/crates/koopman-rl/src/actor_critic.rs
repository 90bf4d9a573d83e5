//! Soft actor-critic training: the soft actor Koopman-critic (value function
//! linear in the state dictionary, critic target advanced through `K^u`) and
//! the two neural baselines (value-network SAC and twin-target-Q SAC with
//! learned temperature). All three share the replay buffer, the twin Q
//! critics, and the squashed-Gaussian actor.

use rand::{Rng, RngExt};

use crate::dictionaries::MonomialBasis;
use crate::environments::{EnvironmentSpec, Transition, cost, reset, step};
use crate::error::{Error, Result};
use crate::koopman::{KoopmanTensor, projected_value};
use crate::neural::{AdamState, Mlp, MlpGrads, PolicyHead, PolicySample, adam_step};
use crate::numerics::{Matrix, Vector};

/// Uniform-sampling ring buffer with FIFO replacement at capacity.
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            capacity,
            data: Vec::new(),
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.data[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Transition> {
        self.data.iter()
    }

    /// Uniform sample with replacement.
    pub fn sample_indices(&self, batch: usize, rng: &mut dyn Rng) -> Result<Vec<usize>> {
        if self.data.len() < batch {
            return Err(Error::InsufficientData {
                have: self.data.len(),
                need: batch,
            });
        }
        Ok((0..batch)
            .map(|_| rng.random_range(0..self.data.len()))
            .collect())
    }
}

/// Elementwise Polyak average `tau * w + (1 - tau) * w_bar`.
pub fn polyak(w: &Vector, w_bar: &Vector, tau: f64) -> Vector {
    debug_assert!((0.0..=1.0).contains(&tau));
    let mut out = w_bar.scale(1.0 - tau);
    out.axpy(tau, w);
    out
}

/// Which training algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    Sakc,
    SacV,
    SacQ,
}

impl Algo {
    pub fn name(&self) -> &'static str {
        match self {
            Algo::Sakc => "sakc",
            Algo::SacV => "sac-v",
            Algo::SacQ => "sac-q",
        }
    }

    pub fn parse(s: &str) -> Result<Algo> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "sakc" => Ok(Algo::Sakc),
            "sac-v" | "sacv" => Ok(Algo::SacV),
            "sac-q" | "sacq" => Ok(Algo::SacQ),
            other => Err(Error::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Hyperparameters shared by the actor-critic algorithms.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub total_steps: usize,
    pub warmup_steps: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub tau: f64,
    pub alpha: f64,
    pub q_lr: f64,
    pub value_lr: f64,
    pub policy_lr: f64,
    pub hidden: usize,
    pub buffer_capacity: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_steps: 50_000,
            warmup_steps: 5_000,
            batch_size: 256,
            gamma: 0.99,
            tau: 0.005,
            alpha: 0.2,
            q_lr: 1e-3,
            value_lr: 1e-3,
            policy_lr: 3e-4,
            hidden: 256,
            buffer_capacity: 1_000_000,
        }
    }
}

/// Value-function representation distinguishing the three algorithms.
pub enum ValueModel {
    /// Linear-in-dictionary weights advanced through the Koopman tensor.
    Koopman {
        w: Vector,
        w_bar: Vector,
        tensor: KoopmanTensor,
        phi: MonomialBasis,
    },
    /// Neural state-value function with a Polyak target copy.
    NeuralV { v: Mlp, v_target: Mlp, v_adam: AdamState },
    /// No value function: twin target Q networks plus learned temperature.
    TargetQ {
        q1_target: Mlp,
        q2_target: Mlp,
        log_alpha: f64,
        target_entropy: f64,
        alpha_lr: f64,
    },
}

/// One soft actor-critic agent (any of the three variants).
pub struct Agent {
    pub algo: Algo,
    pub policy: PolicyHead,
    pub q1: Mlp,
    pub q2: Mlp,
    pub value: ValueModel,
    pub alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    pub value_lr: f64,
    policy_adam: AdamState,
    q1_adam: AdamState,
    q2_adam: AdamState,
    state_dim: usize,
    action_dim: usize,
}

/// Per-episode training log entry.
#[derive(Clone, Debug)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub end_step: usize,
    pub episodic_return: f64,
}

impl Agent {
    /// Builds an agent for `algo`. SAKC requires a fitted tensor whose state
    /// dictionary matches the environment's state dimension.
    pub fn new(
        algo: Algo,
        env: &EnvironmentSpec,
        cfg: &TrainConfig,
        tensor: Option<KoopmanTensor>,
        rng: &mut dyn Rng,
    ) -> Result<Agent> {
        let sd = env.state_dim;
        let ad = env.action_dim;
        let policy = PolicyHead::new(sd, ad, cfg.hidden, &env.action_low, &env.action_high, rng);
        let q_dims = [sd + ad, cfg.hidden, 1];
        let q1 = Mlp::new(&q_dims, rng);
        let q2 = Mlp::new(&q_dims, rng);
        let policy_adam = AdamState::new(&policy.trunk, cfg.policy_lr);
        let q1_adam = AdamState::new(&q1, cfg.q_lr);
        let q2_adam = AdamState::new(&q2, cfg.q_lr);
        let value = match algo {
            Algo::Sakc => {
                let tensor = tensor.ok_or_else(|| {
                    Error::Config("SAKC needs a fitted Koopman tensor".into())
                })?;
                if tensor.phi_basis().input_dim() != sd
                    || tensor.psi_basis().input_dim() != ad
                {
                    return Err(Error::DimensionMismatch(
                        "tensor dictionaries do not match the environment".into(),
                    ));
                }
                let phi = tensor.phi_basis().clone();
                let d_x = tensor.d_x();
                ValueModel::Koopman {
                    w: Vector::zeros(d_x),
                    w_bar: Vector::zeros(d_x),
                    tensor,
                    phi,
                }
            }
            Algo::SacV => {
                let v = Mlp::new(&[sd, cfg.hidden, 1], rng);
                let v_target = v.clone();
                let v_adam = AdamState::new(&v, cfg.value_lr);
                ValueModel::NeuralV { v, v_target, v_adam }
            }
            Algo::SacQ => ValueModel::TargetQ {
                q1_target: q1.clone(),
                q2_target: q2.clone(),
                log_alpha: cfg.alpha.ln(),
                target_entropy: -(ad as f64),
                alpha_lr: cfg.q_lr,
            },
        };
        Ok(Agent {
            algo,
            policy,
            q1,
            q2,
            value,
            alpha: cfg.alpha,
            gamma: cfg.gamma,
            tau: cfg.tau,
            value_lr: cfg.value_lr,
            policy_adam,
            q1_adam,
            q2_adam,
            state_dim: sd,
            action_dim: ad,
        })
    }

    /// Koopman critic target `r(x,u) + gamma * w_bar^T K^u phi(x)`.
    /// Only meaningful for SAKC.
    pub fn target_q(&self, x: &Vector, u: &Vector, reward: f64) -> Result<f64> {
        match &self.value {
            ValueModel::Koopman { w_bar, tensor, .. } => {
                let phi_next = tensor.predict_phi(x, u)?;
                Ok(reward + self.gamma * w_bar.dot(&phi_next))
            }
            _ => Err(Error::Config(
                "target_q through the tensor requires the Koopman value model".into(),
            )),
        }
    }

    pub fn value_weights(&self) -> Option<&Vector> {
        match &self.value {
            ValueModel::Koopman { w, .. } => Some(w),
            _ => None,
        }
    }

    fn q_input(&self, xs: &[&Transition], actions: Option<&Matrix>) -> Matrix {
        let b = xs.len();
        let mut m = Matrix::zeros(b, self.state_dim + self.action_dim);
        for (r, t) in xs.iter().enumerate() {
            let row = m.row_mut(r);
            row[..self.state_dim].copy_from_slice(t.x.as_slice());
            match actions {
                Some(a) => row[self.state_dim..].copy_from_slice(a.row(r)),
                None => row[self.state_dim..].copy_from_slice(t.u.as_slice()),
            }
        }
        m
    }

    fn states_matrix(&self, xs: &[&Transition], next: bool) -> Matrix {
        let b = xs.len();
        let mut m = Matrix::zeros(b, self.state_dim);
        for (r, t) in xs.iter().enumerate() {
            let src = if next { &t.x_next } else { &t.x };
            m.row_mut(r).copy_from_slice(src.as_slice());
        }
        m
    }

    /// Minimum of the twin critics per sample, plus which critic won.
    fn q_min(&self, input: &Matrix) -> (Vector, Vec<bool>) {
        let (q1v, _) = self.q1.forward_batch(input);
        let (q2v, _) = self.q2.forward_batch(input);
        let b = input.rows();
        let mut out = Vector::zeros(b);
        let mut first = vec![false; b];
        for r in 0..b {
            if q1v[(r, 0)] <= q2v[(r, 0)] {
                out[r] = q1v[(r, 0)];
                first[r] = true;
            } else {
                out[r] = q2v[(r, 0)];
            }
        }
        (out, first)
    }

    /// One gradient step on the value representation (SAKC's linear weights
    /// or SAC (V)'s value network) with targets
    /// `min(q1,q2)(x, u~) - alpha * log pi(u~|x)` on freshly sampled actions.
    pub fn update_value(&mut self, batch: &[&Transition], rng: &mut dyn Rng) -> Result<()> {
        let states = self.states_matrix(batch, false);
        let sample = self.policy.sample_batch(&states, rng);
        let q_in = self.q_input(batch, Some(&sample.actions));
        let (qmin, _) = self.q_min(&q_in);
        let b = batch.len();
        match &mut self.value {
            ValueModel::Koopman { w, phi, .. } => {
                let mut grad = Vector::zeros(w.dim());
                let mut feat = Vector::zeros(phi.dim());
                for r in 0..b {
                    phi.eval_into(&batch[r].x, &mut feat);
                    let target = qmin[r] - self.alpha * sample.log_probs[r];
                    let residual = w.dot(&feat) - target;
                    grad.axpy(residual / b as f64, &feat);
                }
                w.axpy(-self.value_lr, &grad);
            }
            ValueModel::NeuralV { v, v_adam, .. } => {
                let (pred, cache) = v.forward_batch(&states);
                let mut dy = Matrix::zeros(b, 1);
                for r in 0..b {
                    let target = qmin[r] - self.alpha * sample.log_probs[r];
                    dy[(r, 0)] = (pred[(r, 0)] - target) / b as f64;
                }
                let (grads, _) = v.backward_batch(&cache, &dy);
                adam_step(v, &grads, v_adam);
            }
            ValueModel::TargetQ { .. } => {}
        }
        Ok(())
    }

    /// Per-sample critic regression targets.
    fn q_targets(&self, batch: &[&Transition], rng: &mut dyn Rng) -> Result<Vector> {
        let b = batch.len();
        let mut targets = Vector::zeros(b);
        match &self.value {
            ValueModel::Koopman { w_bar, tensor, phi, .. } => {
                // r + gamma * w_bar^T K^u phi(x), assembled through the
                // projected weights so each sample is O(d_x * d_u)
                let g = tensor.project_weights(w_bar);
                let psi_basis = tensor.psi_basis();
                let mut feat = Vector::zeros(phi.dim());
                let mut psi = Vector::zeros(psi_basis.dim());
                for r in 0..b {
                    phi.eval_into(&batch[r].x, &mut feat);
                    psi_basis.eval_into(&batch[r].u, &mut psi);
                    targets[r] =
                        batch[r].reward + self.gamma * projected_value(&g, &psi, &feat);
                }
            }
            ValueModel::NeuralV { v_target, .. } => {
                let next_states = self.states_matrix(batch, true);
                let (vt, _) = v_target.forward_batch(&next_states);
                for r in 0..b {
                    targets[r] = batch[r].reward + self.gamma * vt[(r, 0)];
                }
            }
            ValueModel::TargetQ {
                q1_target,
                q2_target,
                log_alpha,
                ..
            } => {
                let next_states = self.states_matrix(batch, true);
                let next_sample = self.policy.sample_batch(&next_states, rng);
                let mut q_in = Matrix::zeros(b, self.state_dim + self.action_dim);
                for r in 0..b {
                    let row = q_in.row_mut(r);
                    row[..self.state_dim].copy_from_slice(batch[r].x_next.as_slice());
                    row[self.state_dim..].copy_from_slice(next_sample.actions.row(r));
                }
                let (t1, _) = q1_target.forward_batch(&q_in);
                let (t2, _) = q2_target.forward_batch(&q_in);
                let alpha = log_alpha.exp();
                for r in 0..b {
                    let tmin = t1[(r, 0)].min(t2[(r, 0)]);
                    targets[r] = batch[r].reward
                        + self.gamma * (tmin - alpha * next_sample.log_probs[r]);
                }
            }
        }
        Ok(targets)
    }

    /// One Adam step per critic on the squared Bellman residual.
    pub fn update_q(&mut self, batch: &[&Transition], rng: &mut dyn Rng) -> Result<()> {
        let targets = self.q_targets(batch, rng)?;
        let q_in = self.q_input(batch, None);
        let b = batch.len();
        for which in 0..2 {
            let (net, adam) = if which == 0 {
                (&mut self.q1, &mut self.q1_adam)
            } else {
                (&mut self.q2, &mut self.q2_adam)
            };
            let (pred, cache) = net.forward_batch(&q_in);
            let mut dy = Matrix::zeros(b, 1);
            for r in 0..b {
                dy[(r, 0)] = (pred[(r, 0)] - targets[r]) / b as f64;
            }
            let (grads, _) = net.backward_batch(&cache, &dy);
            adam_step(net, &grads, adam);
        }
        Ok(())
    }

    /// One Adam step on the reparameterized policy objective
    /// `E[alpha * log pi(u~|x) - min(q1,q2)(x, u~)]`, then (for SAC (Q)) the
    /// temperature update toward the target entropy.
    pub fn update_policy(&mut self, batch: &[&Transition], rng: &mut dyn Rng) -> Result<()> {
        let states = self.states_matrix(batch, false);
        let sample = self.policy.sample_batch(&states, rng);
        let grads = self.policy_gradient(batch, &states, &sample)?;
        adam_step(&mut self.policy.trunk, &grads, &mut self.policy_adam);
        if let ValueModel::TargetQ {
            log_alpha,
            target_entropy,
            alpha_lr,
            ..
        } = &mut self.value
        {
            // d/d(log_alpha) E[-exp(log_alpha) (log pi + target_entropy)]
            let b = batch.len() as f64;
            let mean_excess: f64 = sample
                .log_probs
                .iter()
                .map(|lp| lp + *target_entropy)
                .sum::<f64>()
                / b;
            let grad = -log_alpha.exp() * mean_excess;
            *log_alpha -= *alpha_lr * grad;
            self.alpha = log_alpha.exp();
        }
        Ok(())
    }

    /// Gradient of the policy loss for a drawn sample (noise frozen inside
    /// `sample`). Exposed separately so tests can check it against finite
    /// differences and drive bandit-style objectives.
    pub fn policy_gradient(
        &self,
        batch: &[&Transition],
        _states: &Matrix,
        sample: &PolicySample,
    ) -> Result<MlpGrads> {
        let b = batch.len();
        let q_in = self.q_input(batch, Some(&sample.actions));
        let (q1v, c1) = self.q1.forward_batch(&q_in);
        let (q2v, c2) = self.q2.forward_batch(&q_in);
        // route -dL/dq through whichever critic is the minimum per sample
        let mut d1 = Matrix::zeros(b, 1);
        let mut d2 = Matrix::zeros(b, 1);
        for r in 0..b {
            if q1v[(r, 0)] <= q2v[(r, 0)] {
                d1[(r, 0)] = -1.0 / b as f64;
            } else {
                d2[(r, 0)] = -1.0 / b as f64;
            }
        }
        let (_, dx1) = self.q1.backward_batch(&c1, &d1);
        let (_, dx2) = self.q2.backward_batch(&c2, &d2);
        let mut d_actions = Matrix::zeros(b, self.action_dim);
        for r in 0..b {
            for j in 0..self.action_dim {
                d_actions[(r, j)] =
                    dx1[(r, self.state_dim + j)] + dx2[(r, self.state_dim + j)];
            }
        }
        let d_log_probs = Vector::new(vec![self.alpha / b as f64; b]);
        Ok(self.policy.backward_sample(sample, &d_actions, &d_log_probs))
    }

    /// Polyak step on whichever target representation the variant carries.
    pub fn update_targets(&mut self) {
        match &mut self.value {
            ValueModel::Koopman { w, w_bar, .. } => {
                *w_bar = polyak(w, w_bar, self.tau);
            }
            ValueModel::NeuralV { v, v_target, .. } => {
                v.polyak_into(v_target, self.tau);
            }
            ValueModel::TargetQ {
                q1_target,
                q2_target,
                ..
            } => {
                self.q1.polyak_into(q1_target, self.tau);
                self.q2.polyak_into(q2_target, self.tau);
            }
        }
    }

    /// Full gradient step: value, critics, policy, targets.
    pub fn gradient_step(&mut self, buffer: &ReplayBuffer, batch: usize, rng: &mut dyn Rng) -> Result<()> {
        let idx = buffer.sample_indices(batch, rng)?;
        let batch_refs: Vec<&Transition> = idx.iter().map(|&i| buffer.get(i)).collect();
        self.update_value(&batch_refs, rng)?;
        self.update_q(&batch_refs, rng)?;
        self.update_policy(&batch_refs, rng)?;
        self.update_targets();
        Ok(())
    }

    /// Stochastic action for environment interaction.
    pub fn act_stochastic(&self, x: &Vector, rng: &mut dyn Rng) -> Vector {
        self.policy.sample_one(x, rng).0
    }

    /// Deterministic (mean) action for evaluation.
    pub fn act_mean(&self, x: &Vector) -> Vector {
        self.policy.mean_action(x)
    }
}

/// Runs the environment-step / gradient-step interleaving: uniform-random
/// actions for the warmup, then one gradient step per environment step.
/// Episodic returns of the training episodes are logged per episode.
pub fn train(
    algo: Algo,
    env: &EnvironmentSpec,
    cfg: &TrainConfig,
    tensor: Option<KoopmanTensor>,
    rng: &mut dyn Rng,
) -> Result<(Agent, Vec<EpisodeRecord>)> {
    let mut agent = Agent::new(algo, env, cfg, tensor, rng)?;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut records = Vec::new();
    let mut x = reset(env, rng);
    let mut episode = 0usize;
    let mut episode_return = 0.0;
    let mut step_in_episode = 0usize;
    for global_step in 0..cfg.total_steps {
        let u_raw = if global_step < cfg.warmup_steps {
            Vector::new(
                env.action_low
                    .iter()
                    .zip(&env.action_high)
                    .map(|(&lo, &hi)| if lo == hi { lo } else { rng.random_range(lo..hi) })
                    .collect(),
            )
        } else {
            agent.act_stochastic(&x, rng)
        };
        let u = env.clip_action(&u_raw);
        let reward = -cost(env, &x, &u);
        let x_next = step(env, &x, &u, rng)?;
        step_in_episode += 1;
        let done = step_in_episode == env.episode_len;
        episode_return += reward;
        buffer.push(Transition {
            x: x.clone(),
            u,
            reward,
            x_next: x_next.clone(),
            done,
        });
        if done {
            records.push(EpisodeRecord {
                episode,
                end_step: global_step + 1,
                episodic_return: episode_return,
            });
            episode += 1;
            episode_return = 0.0;
            step_in_episode = 0;
            x = reset(env, rng);
        } else {
            x = x_next;
        }
        if global_step + 1 > cfg.warmup_steps && buffer.len() >= cfg.batch_size {
            agent.gradient_step(&buffer, cfg.batch_size, rng)?;
        }
    }
    Ok((agent, records))
}

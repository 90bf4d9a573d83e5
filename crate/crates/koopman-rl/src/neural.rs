//! Feed-forward network machinery for the actor-critic algorithms: MLPs
//! with manual backpropagation, Adam, and the tanh-squashed Gaussian policy
//! head. Everything is batch-oriented (rows = samples) so the training hot
//! loop runs on matrix products.

use rand::{Rng, RngExt};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::numerics::{Matrix, Vector};

/// Emitted log standard deviations are squashed into this range.
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Numerical floor inside the tanh-correction logarithm of the squashed
/// Gaussian log-density.
const LOG_PROB_FLOOR: f64 = 1e-6;

/// Fully connected network: ReLU on hidden layers, identity output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mlp {
    dims: Vec<usize>,
    weights: Vec<Matrix>, // weights[l] is dims[l+1] x dims[l]
    biases: Vec<Vector>,
}

/// Activations recorded by a forward pass, consumed by `backward`.
pub struct MlpCache {
    input: Matrix,
    hidden: Vec<Matrix>, // post-ReLU activations per hidden layer
}

/// Parameter-shaped gradient accumulator.
#[derive(Clone, Debug)]
pub struct MlpGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vector>,
}

impl Mlp {
    /// Random init: every weight and bias uniform in +-1/sqrt(fan_in).
    pub fn new(dims: &[usize], rng: &mut dyn Rng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..dims.len() - 1 {
            let bound = 1.0 / (dims[l] as f64).sqrt();
            weights.push(Matrix::new(
                dims[l + 1],
                dims[l],
                (0..dims[l + 1] * dims[l])
                    .map(|_| rng.random_range(-bound..bound))
                    .collect(),
            ));
            biases.push(Vector::new(
                (0..dims[l + 1])
                    .map(|_| rng.random_range(-bound..bound))
                    .collect(),
            ));
        }
        Mlp {
            dims: dims.to_vec(),
            weights,
            biases,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn layers(&self) -> (&[Matrix], &[Vector]) {
        (&self.weights, &self.biases)
    }

    /// Rebuilds a network from explicit layers (model deserialization).
    pub fn from_layers(weights: Vec<Matrix>, biases: Vec<Vector>) -> Self {
        assert!(!weights.is_empty());
        let mut dims = vec![weights[0].cols()];
        for (w, b) in weights.iter().zip(&biases) {
            assert_eq!(w.rows(), b.dim(), "weight/bias shape mismatch");
            dims.push(w.rows());
        }
        Mlp {
            dims,
            weights,
            biases,
        }
    }

    /// Batch forward pass; rows of `x` are samples.
    pub fn forward_batch(&self, x: &Matrix) -> (Matrix, MlpCache) {
        assert_eq!(x.cols(), self.input_dim(), "input width mismatch");
        let mut hidden = Vec::with_capacity(self.weights.len() - 1);
        let mut h = x.clone();
        for l in 0..self.weights.len() {
            let mut z = h.matmul_transpose_b(&self.weights[l]);
            let bias = &self.biases[l];
            for r in 0..z.rows() {
                let row = z.row_mut(r);
                for (v, b) in row.iter_mut().zip(bias.as_slice()) {
                    *v += b;
                }
            }
            if l + 1 < self.weights.len() {
                for v in z.as_mut_slice() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                hidden.push(z.clone());
                h = z;
            } else {
                return (
                    z,
                    MlpCache {
                        input: x.clone(),
                        hidden,
                    },
                );
            }
        }
        unreachable!()
    }

    /// Single-sample forward.
    pub fn forward(&self, x: &Vector) -> Vector {
        let m = Matrix::new(1, x.dim(), x.as_slice().to_vec());
        let (y, _) = self.forward_batch(&m);
        Vector::new(y.as_slice().to_vec())
    }

    /// Backpropagates `out_grad` (same shape as the forward output; rows =
    /// samples) through the cached activations. Returns gradients summed
    /// over the batch plus the gradient with respect to the input.
    pub fn backward_batch(&self, cache: &MlpCache, out_grad: &Matrix) -> (MlpGrads, Matrix) {
        let layer_count = self.weights.len();
        let mut grads = MlpGrads {
            weights: Vec::with_capacity(layer_count),
            biases: Vec::with_capacity(layer_count),
        };
        // walk backwards, building gradient lists in reverse
        let mut dz = out_grad.clone();
        for l in (0..layer_count).rev() {
            let upstream: &Matrix = if l == 0 { &cache.input } else { &cache.hidden[l - 1] };
            let dw = dz.matmul_transpose_a(upstream); // (out x in) summed over batch
            let mut db = Vector::zeros(dz.cols());
            for r in 0..dz.rows() {
                for (acc, v) in db.as_mut_slice().iter_mut().zip(dz.row(r)) {
                    *acc += v;
                }
            }
            grads.weights.push(dw);
            grads.biases.push(db);
            let mut dh = dz.matmul(&self.weights[l]); // batch x in

            if l > 0 {
                // gate by the ReLU mask of the activation that fed layer l
                let act = &cache.hidden[l - 1];
                for r in 0..dh.rows() {
                    let arow = act.row(r);
                    for (g, a) in dh.row_mut(r).iter_mut().zip(arow) {
                        if *a <= 0.0 {
                            *g = 0.0;
                        }
                    }
                }
            }
            dz = dh;
        }
        grads.weights.reverse();
        grads.biases.reverse();
        (grads, dz)
    }

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .map(|w| w.rows() * w.cols())
            .sum::<usize>()
            + self.biases.iter().map(|b| b.dim()).sum::<usize>()
    }

    /// Flat parameter vector (weights then bias per layer); used by the
    /// finite-difference checks and serialization.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut at = 0;
        for l in 0..self.weights.len() {
            let wlen = self.weights[l].rows() * self.weights[l].cols();
            let shape = (self.weights[l].rows(), self.weights[l].cols());
            self.weights[l] = Matrix::new(shape.0, shape.1, flat[at..at + wlen].to_vec());
            at += wlen;
            let blen = self.biases[l].dim();
            self.biases[l] = Vector::new(flat[at..at + blen].to_vec());
            at += blen;
        }
    }

    /// In-place `param += alpha * grad` for every parameter.
    pub fn add_scaled_grads(&mut self, alpha: f64, grads: &MlpGrads) {
        for l in 0..self.weights.len() {
            self.weights[l].add_assign_scaled(alpha, &grads.weights[l]);
            self.biases[l].axpy(alpha, &grads.biases[l]);
        }
    }

    /// Polyak target update: `target = tau * self + (1 - tau) * target`.
    pub fn polyak_into(&self, target: &mut Mlp, tau: f64) {
        for l in 0..self.weights.len() {
            let t = &mut target.weights[l];
            let s = &self.weights[l];
            for (tv, sv) in t.as_mut_slice().iter_mut().zip(s.as_slice()) {
                *tv = tau * sv + (1.0 - tau) * *tv;
            }
            let tb = &mut target.biases[l];
            for (tv, sv) in tb.as_mut_slice().iter_mut().zip(self.biases[l].as_slice()) {
                *tv = tau * sv + (1.0 - tau) * *tv;
            }
        }
    }
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            weights: net
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: net.biases.iter().map(|b| Vector::zeros(b.dim())).collect(),
        }
    }

    pub fn scale_in_place(&mut self, alpha: f64) {
        for w in &mut self.weights {
            for v in w.as_mut_slice() {
                *v *= alpha;
            }
        }
        for b in &mut self.biases {
            for v in b.as_mut_slice() {
                *v *= alpha;
            }
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        let w = self
            .weights
            .iter()
            .fold(0.0f64, |m, w| m.max(w.max_abs()));
        self.biases.iter().fold(w, |m, b| m.max(b.max_abs()))
    }
}

/// Bias-corrected Adam state for one network.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: MlpGrads,
    v: MlpGrads,
    step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        AdamState {
            m: MlpGrads::zeros_like(net),
            v: MlpGrads::zeros_like(net),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of `net` along `grads`.
pub fn adam_step(net: &mut Mlp, grads: &MlpGrads, state: &mut AdamState) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let lr = state.lr;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let update = |param: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..param.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };
    for l in 0..net.weights.len() {
        let g = grads.weights[l].as_slice().to_vec();
        update(
            net.weights[l].as_mut_slice(),
            &g,
            state.m.weights[l].as_mut_slice(),
            state.v.weights[l].as_mut_slice(),
        );
        let gb = grads.biases[l].as_slice().to_vec();
        update(
            net.biases[l].as_mut_slice(),
            &gb,
            state.m.biases[l].as_mut_slice(),
            state.v.biases[l].as_mut_slice(),
        );
    }
}

/// Tanh-squashed Gaussian policy. The trunk emits `[mean | raw_log_std]`;
/// the log-std is kept inside `[LOG_STD_MIN, LOG_STD_MAX]` by a tanh convex
/// combination, and actions are `scale * tanh(a) + bias` for a drawn
/// pre-squash Gaussian sample `a`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolicyHead {
    pub trunk: Mlp,
    pub action_dim: usize,
    pub action_scale: Vector,
    pub action_bias: Vector,
}

/// Everything a reparameterized batch sample carries for backprop.
pub struct PolicySample {
    pub actions: Matrix,
    pub log_probs: Vector,
    pub mean: Matrix,
    pub log_std: Matrix,
    pub std: Matrix,
    pub raw: Matrix,
    pub tanh_pre: Matrix,
    pub noise: Matrix,
    pub cache: MlpCache,
}

impl PolicyHead {
    pub fn new(state_dim: usize, action_dim: usize, hidden: usize, low: &[f64], high: &[f64], rng: &mut dyn Rng) -> Self {
        let trunk = Mlp::new(&[state_dim, hidden, 2 * action_dim], rng);
        let scale: Vec<f64> = low
            .iter()
            .zip(high)
            .map(|(&l, &h)| 0.5 * (h - l))
            .collect();
        let bias: Vec<f64> = low.iter().zip(high).map(|(&l, &h)| 0.5 * (h + l)).collect();
        PolicyHead {
            trunk,
            action_dim,
            action_scale: Vector::new(scale),
            action_bias: Vector::new(bias),
        }
    }

    fn squash_log_std(raw: f64) -> f64 {
        LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (raw.tanh() + 1.0)
    }

    /// Reparameterized batch sample with frozen noise recorded for backprop.
    pub fn sample_batch(&self, states: &Matrix, rng: &mut dyn Rng) -> PolicySample {
        let batch = states.rows();
        let a = self.action_dim;
        let (out, cache) = self.trunk.forward_batch(states);
        let mut mean = Matrix::zeros(batch, a);
        let mut raw = Matrix::zeros(batch, a);
        let mut log_std = Matrix::zeros(batch, a);
        let mut std = Matrix::zeros(batch, a);
        let mut noise = Matrix::zeros(batch, a);
        for r in 0..batch {
            for j in 0..a {
                mean[(r, j)] = out[(r, j)];
                raw[(r, j)] = out[(r, a + j)];
                let ls = Self::squash_log_std(raw[(r, j)]);
                log_std[(r, j)] = ls;
                std[(r, j)] = ls.exp();
                noise[(r, j)] = rng.sample(StandardNormal);
            }
        }
        self.assemble(states, cache, mean, raw, log_std, std, noise)
    }

    /// Same reparameterization with caller-provided noise; the
    /// finite-difference gradient checks freeze noise this way.
    pub fn sample_batch_with_noise(&self, states: &Matrix, noise: Matrix) -> PolicySample {
        let batch = states.rows();
        let a = self.action_dim;
        let (out, cache) = self.trunk.forward_batch(states);
        let mut mean = Matrix::zeros(batch, a);
        let mut raw = Matrix::zeros(batch, a);
        let mut log_std = Matrix::zeros(batch, a);
        let mut std = Matrix::zeros(batch, a);
        for r in 0..batch {
            for j in 0..a {
                mean[(r, j)] = out[(r, j)];
                raw[(r, j)] = out[(r, a + j)];
                let ls = Self::squash_log_std(raw[(r, j)]);
                log_std[(r, j)] = ls;
                std[(r, j)] = ls.exp();
            }
        }
        self.assemble(states, cache, mean, raw, log_std, std, noise)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        &self,
        states: &Matrix,
        cache: MlpCache,
        mean: Matrix,
        raw: Matrix,
        log_std: Matrix,
        std: Matrix,
        noise: Matrix,
    ) -> PolicySample {
        let batch = states.rows();
        let a = self.action_dim;
        let mut actions = Matrix::zeros(batch, a);
        let mut tanh_pre = Matrix::zeros(batch, a);
        let mut log_probs = Vector::zeros(batch);
        let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        for r in 0..batch {
            let mut lp = 0.0;
            for j in 0..a {
                let pre = mean[(r, j)] + std[(r, j)] * noise[(r, j)];
                let t = pre.tanh();
                tanh_pre[(r, j)] = t;
                let scale = self.action_scale[j];
                let action =
                    (scale * t + self.action_bias[j]).clamp(self.low(j), self.high(j));
                actions[(r, j)] = action;
                lp += -0.5 * noise[(r, j)] * noise[(r, j)]
                    - half_ln_2pi
                    - log_std[(r, j)]
                    - (scale * (1.0 - t * t) + LOG_PROB_FLOOR).ln();
            }
            log_probs[r] = lp;
        }
        PolicySample {
            actions,
            log_probs,
            mean,
            log_std,
            std,
            raw,
            tanh_pre,
            noise,
            cache,
        }
    }

    fn low(&self, j: usize) -> f64 {
        self.action_bias[j] - self.action_scale[j]
    }

    fn high(&self, j: usize) -> f64 {
        self.action_bias[j] + self.action_scale[j]
    }

    /// Chains loss gradients w.r.t. actions and log-probs (with the sample's
    /// noise frozen) back to trunk parameter gradients.
    pub fn backward_sample(
        &self,
        sample: &PolicySample,
        d_actions: &Matrix,
        d_log_probs: &Vector,
    ) -> MlpGrads {
        let batch = sample.actions.rows();
        let a = self.action_dim;
        let mut d_out = Matrix::zeros(batch, 2 * a);
        for r in 0..batch {
            for j in 0..a {
                let t = sample.tanh_pre[(r, j)];
                let scale = self.action_scale[j];
                let one_m_t2 = 1.0 - t * t;
                let denom = scale * one_m_t2 + LOG_PROB_FLOOR;
                // d logp / d pre (noise frozen)
                let kappa = 2.0 * t * scale * one_m_t2 / denom;
                let da_dpre = scale * one_m_t2;
                let dpre_dlogstd = sample.std[(r, j)] * sample.noise[(r, j)];
                let ga = d_actions[(r, j)];
                let gl = d_log_probs[r];
                let d_pre = ga * da_dpre + gl * kappa;
                let d_mean = d_pre;
                let d_log_std = d_pre * dpre_dlogstd - gl;
                let raw = sample.raw[(r, j)];
                let dls_draw =
                    0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (1.0 - raw.tanh() * raw.tanh());
                d_out[(r, j)] = d_mean;
                d_out[(r, a + j)] = d_log_std * dls_draw;
            }
        }
        let (grads, _) = self.trunk.backward_batch(&sample.cache, &d_out);
        grads
    }

    /// Draws one action with its log-probability.
    pub fn sample_one(&self, x: &Vector, rng: &mut dyn Rng) -> (Vector, f64) {
        let states = Matrix::new(1, x.dim(), x.as_slice().to_vec());
        let s = self.sample_batch(&states, rng);
        (Vector::new(s.actions.row(0).to_vec()), s.log_probs[0])
    }

    /// Deterministic action: the squashed mean. Used for evaluation.
    pub fn mean_action(&self, x: &Vector) -> Vector {
        let out = self.trunk.forward(x);
        let mut u = Vector::zeros(self.action_dim);
        for j in 0..self.action_dim {
            u[j] = (self.action_scale[j] * out[j].tanh() + self.action_bias[j])
                .clamp(self.low(j), self.high(j));
        }
        u
    }
}

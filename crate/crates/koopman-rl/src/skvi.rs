//! Soft Koopman value iteration: entropy-regularized Bellman backups over a
//! discrete action grid with a value function linear in the state
//! dictionary.
//!
//! Action scores are `c(x, u) + gamma * w^T K^u phi(x)`; the policy is the
//! softmax of negated scores and the backup is the corresponding soft
//! minimum relative to the uniform measure on the grid. Each iteration
//! regresses fresh weights onto backed-up targets over a sampled batch of
//! states (the average Bellman error is the residual of that regression).

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::environments::{EnvironmentSpec, Policy, cost};
use crate::error::{Error, Result};
use crate::koopman::KoopmanTensor;
use crate::numerics::{Matrix, Vector, lstsq};

/// Linear value-function weights with their projection bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValueWeights {
    pub w: Vector,
    pub bound: f64,
}

impl ValueWeights {
    pub fn zeros(dim: usize, bound: f64) -> Self {
        ValueWeights {
            w: Vector::zeros(dim),
            bound,
        }
    }

    /// Projects onto the norm ball `||w||_2 <= bound` in place.
    pub fn project(&mut self) {
        let norm = self.w.norm();
        if norm > self.bound {
            self.w = self.w.scale(self.bound / norm);
        }
    }

    pub fn value(&self, phi_x: &Vector) -> f64 {
        self.w.dot(phi_x)
    }
}

/// Evenly spaced action grid including both endpoints; multi-dimensional
/// actions take the cross product with `count` points per coordinate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ActionGrid {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub count: usize,
    points: Vec<Vector>,
}

impl ActionGrid {
    pub fn new(low: Vec<f64>, high: Vec<f64>, count: usize) -> Self {
        assert!(count >= 2, "grid needs at least the two endpoints");
        assert_eq!(low.len(), high.len());
        let dims = low.len();
        let axis = |d: usize| -> Vec<f64> {
            (0..count)
                .map(|i| low[d] + (high[d] - low[d]) * i as f64 / (count - 1) as f64)
                .collect()
        };
        let axes: Vec<Vec<f64>> = (0..dims).map(axis).collect();
        let mut points = Vec::new();
        let mut idx = vec![0usize; dims];
        loop {
            points.push(Vector::new(
                (0..dims).map(|d| axes[d][idx[d]]).collect(),
            ));
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < count {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == dims {
                    return ActionGrid {
                        low,
                        high,
                        count,
                        points,
                    };
                }
            }
        }
    }

    pub fn for_env(env: &EnvironmentSpec, count: usize) -> Self {
        ActionGrid::new(env.action_low.clone(), env.action_high.clone(), count)
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Reference scorer: `score[a] = c(x, u_a) + gamma * w^T K^{u_a} phi(x)`.
pub fn q_scores(
    w: &Vector,
    tensor: &KoopmanTensor,
    x: &Vector,
    grid: &ActionGrid,
    gamma: f64,
    cost_fn: &dyn Fn(&Vector, &Vector) -> f64,
) -> Result<Vector> {
    let phi_x = tensor.phi_basis().eval(x)?;
    let mut scores = Vector::zeros(grid.len());
    for (a, u) in grid.points().iter().enumerate() {
        let continuation = w.dot(&tensor.k_u(u)?.matvec(&phi_x));
        scores[a] = cost_fn(x, u) + gamma * continuation;
    }
    Ok(scores)
}

/// Softmax of negated scores: `pi[a] = exp(-score[a]/alpha) / Z`, computed
/// with a min-score shift.
pub fn softmax_policy(scores: &Vector, alpha: f64) -> Vector {
    assert!(alpha > 0.0);
    let m = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out = Vector::zeros(scores.dim());
    let mut z = 0.0;
    for a in 0..scores.dim() {
        let e = (-(scores[a] - m) / alpha).exp();
        out[a] = e;
        z += e;
    }
    for a in 0..scores.dim() {
        out[a] /= z;
    }
    out
}

/// Entropy-regularized soft minimum relative to the uniform measure on the
/// grid: `-alpha * ln( mean_a exp(-score[a]/alpha) )`. Equal scores return
/// that score exactly; the uniform base measure keeps the value invariant
/// under grid refinement of constant regions.
pub fn soft_backup(scores: &Vector, alpha: f64) -> f64 {
    assert!(alpha > 0.0);
    let n = scores.dim();
    debug_assert!(n > 0);
    let m = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = scores.iter().map(|s| (-(s - m) / alpha).exp()).sum();
    m - alpha * ((sum.ln()) - (n as f64).ln())
}

/// Precomputed fast scorer over a fixed grid: control features and control
/// costs are evaluated once per grid, the weight-tensor projection once per
/// weight update, leaving O(d_x*d_u + |grid|*d_u) work per state.
pub struct QScorer {
    projected: Matrix,   // d_u x d_x, from project_weights(w)
    psi_grid: Matrix,    // |grid| x d_u
    cost_u: Vec<f64>,    // u^T R u per grid point
    gamma: f64,
    q: Matrix,
    x_e: Vector,
    d_x: usize,
}

impl QScorer {
    pub fn new(
        w: &Vector,
        tensor: &KoopmanTensor,
        grid: &ActionGrid,
        gamma: f64,
        env: &EnvironmentSpec,
    ) -> Result<QScorer> {
        let d_u = tensor.d_u();
        let mut psi_grid = Matrix::zeros(grid.len(), d_u);
        let mut cost_u = Vec::with_capacity(grid.len());
        let mut psi = Vector::zeros(d_u);
        for (a, u) in grid.points().iter().enumerate() {
            tensor.psi_basis().eval_into(u, &mut psi);
            psi_grid.row_mut(a).copy_from_slice(psi.as_slice());
            cost_u.push(u.dot(&env.r.matvec(u)));
        }
        Ok(QScorer {
            projected: tensor.project_weights(w),
            psi_grid,
            cost_u,
            gamma,
            q: env.q.clone(),
            x_e: env.x_e.clone(),
            d_x: tensor.d_x(),
        })
    }

    /// Refreshes the weight projection after a weight update.
    pub fn set_weights(&mut self, w: &Vector, tensor: &KoopmanTensor) {
        self.projected = tensor.project_weights(w);
    }

    /// Scores all grid actions for a state with pre-evaluated `phi(x)`.
    pub fn scores_into(&self, x: &Vector, phi_x: &Vector, out: &mut Vector) {
        debug_assert_eq!(phi_x.dim(), self.d_x);
        debug_assert_eq!(out.dim(), self.psi_grid.rows());
        let dx = x.sub(&self.x_e);
        let cost_x = dx.dot(&self.q.matvec(&dx));
        // h[z] = dot(projected[z], phi)
        let h = self.projected.matvec(phi_x);
        for a in 0..self.psi_grid.rows() {
            let mut acc = 0.0;
            for (pz, hz) in self.psi_grid.row(a).iter().zip(h.as_slice()) {
                acc += pz * hz;
            }
            out[a] = cost_x + self.cost_u[a] + self.gamma * acc;
        }
    }
}

/// Hyperparameters for soft Koopman value iteration.
#[derive(Clone, Debug)]
pub struct SkviParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub w_bound: f64,
    pub max_iters: usize,
    pub batch_size: usize,
    pub ridge: f64,
}

impl Default for SkviParams {
    fn default() -> Self {
        SkviParams {
            alpha: 1.0,
            gamma: 0.99,
            epsilon: 1e-2,
            w_bound: 1e6,
            max_iters: 150,
            batch_size: 16_384,
            ridge: 1e-8,
        }
    }
}

/// Converged weights plus the average-Bellman-error trace.
#[derive(Clone, Debug)]
pub struct SkviTraining {
    pub weights: ValueWeights,
    pub abe_history: Vec<f64>,
}

/// Iterated soft backups: sample a batch of states, compute soft-minimum
/// targets under the current weights, solve the ridge regression for the
/// next weights, project onto the norm ball, stop once the average Bellman
/// error (the regression's mean squared residual) drops to `epsilon`.
pub fn value_iteration(
    tensor: &KoopmanTensor,
    env: &EnvironmentSpec,
    dataset_states: &[Vector],
    grid: &ActionGrid,
    params: &SkviParams,
    rng: &mut dyn Rng,
) -> Result<SkviTraining> {
    if dataset_states.is_empty() {
        return Err(Error::InsufficientData { have: 0, need: 1 });
    }
    let d_x = tensor.d_x();
    let n = dataset_states.len();
    // dictionary features of every dataset state, evaluated once
    let mut phi_all = Matrix::zeros(n, d_x);
    let mut feat = Vector::zeros(d_x);
    for (i, x) in dataset_states.iter().enumerate() {
        if x.dim() != env.state_dim {
            return Err(Error::DimensionMismatch(
                "dataset state width does not match environment".into(),
            ));
        }
        tensor.phi_basis().eval_into(x, &mut feat);
        phi_all.row_mut(i).copy_from_slice(feat.as_slice());
    }
    let mut weights = ValueWeights::zeros(d_x, params.w_bound);
    let mut scorer = QScorer::new(&weights.w, tensor, grid, params.gamma, env)?;
    let mut abe_history = Vec::new();
    let batch = params.batch_size.min(n).max(1);
    let mut scores = Vector::zeros(grid.len());
    for _ in 0..params.max_iters {
        scorer.set_weights(&weights.w, tensor);
        let mut x_mat = Matrix::zeros(batch, d_x);
        let mut targets = Matrix::zeros(batch, 1);
        let mut picked = Vec::with_capacity(batch);
        for row in 0..batch {
            let i = rng.random_range(0..n);
            picked.push(i);
            let phi_x = Vector::new(phi_all.row(i).to_vec());
            scorer.scores_into(&dataset_states[i], &phi_x, &mut scores);
            targets[(row, 0)] = soft_backup(&scores, params.alpha);
            x_mat.row_mut(row).copy_from_slice(phi_all.row(i));
        }
        let solution = lstsq(&x_mat, &targets, params.ridge)?;
        let mut w_next = Vector::zeros(d_x);
        for i in 0..d_x {
            w_next[i] = solution[(i, 0)];
        }
        weights.w = w_next;
        weights.project();
        // ABE at the new weights and their induced policy: average squared
        // gap between the value and its own soft backup over the batch
        scorer.set_weights(&weights.w, tensor);
        let mut abe = 0.0;
        for (row, &i) in picked.iter().enumerate() {
            let phi_x = Vector::new(phi_all.row(i).to_vec());
            scorer.scores_into(&dataset_states[i], &phi_x, &mut scores);
            let backup = soft_backup(&scores, params.alpha);
            let mut v = 0.0;
            for (wi, pi) in weights.w.as_slice().iter().zip(x_mat.row(row)) {
                v += wi * pi;
            }
            let d = v - backup;
            abe += d * d;
        }
        abe /= batch as f64;
        abe_history.push(abe);
        if abe <= params.epsilon {
            break;
        }
    }
    Ok(SkviTraining {
        weights,
        abe_history,
    })
}

/// Single-action selection: greedy takes the lowest-index minimizing grid
/// action; stochastic samples from the softmax policy.
#[allow(clippy::too_many_arguments)]
pub fn skvi_act(
    w: &Vector,
    tensor: &KoopmanTensor,
    x: &Vector,
    grid: &ActionGrid,
    alpha: f64,
    gamma: f64,
    env: &EnvironmentSpec,
    rng: &mut dyn Rng,
    greedy: bool,
) -> Result<Vector> {
    let cost_fn = |x: &Vector, u: &Vector| cost(env, x, u);
    let scores = q_scores(w, tensor, x, grid, gamma, &cost_fn)?;
    Ok(select_action(&scores, grid, alpha, rng, greedy))
}

fn select_action(
    scores: &Vector,
    grid: &ActionGrid,
    alpha: f64,
    rng: &mut dyn Rng,
    greedy: bool,
) -> Vector {
    if greedy {
        let mut best = 0;
        for a in 1..scores.dim() {
            if scores[a] < scores[best] {
                best = a;
            }
        }
        grid.points()[best].clone()
    } else {
        let probs = softmax_policy(scores, alpha);
        let draw: f64 = rng.random_range(0.0..1.0);
        let mut acc = 0.0;
        for a in 0..probs.dim() {
            acc += probs[a];
            if draw <= acc {
                return grid.points()[a].clone();
            }
        }
        grid.points()[probs.dim() - 1].clone()
    }
}

/// Trained SKVI agent packaged as a [`Policy`] using the fast scorer.
pub struct SkviPolicy {
    scorer: QScorer,
    grid: ActionGrid,
    phi_basis: crate::dictionaries::MonomialBasis,
    alpha: f64,
    greedy: bool,
}

impl SkviPolicy {
    pub fn new(
        w: &Vector,
        tensor: &KoopmanTensor,
        grid: ActionGrid,
        alpha: f64,
        gamma: f64,
        env: &EnvironmentSpec,
        greedy: bool,
    ) -> Result<Self> {
        Ok(SkviPolicy {
            scorer: QScorer::new(w, tensor, &grid, gamma, env)?,
            phi_basis: tensor.phi_basis().clone(),
            grid,
            alpha,
            greedy,
        })
    }
}

impl Policy for SkviPolicy {
    fn act(&self, x: &Vector, rng: &mut dyn Rng) -> Vector {
        let phi_x = self.phi_basis.eval(x).expect("state width fixed by env");
        let mut scores = Vector::zeros(self.grid.len());
        self.scorer.scores_into(x, &phi_x, &mut scores);
        select_action(&scores, &self.grid, self.alpha, rng, self.greedy)
    }
}

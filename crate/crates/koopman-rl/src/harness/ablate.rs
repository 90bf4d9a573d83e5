//! Hyperparameter sweeps: SKVI batch size, SKVI compute budget (actions x
//! epochs), SAKC dictionary monomial orders, and SAKC tensor data volume.
//! Cells run independently over the seed list; a cell failure is recorded
//! without aborting the sweep, and results reduce to a mean-return grid plus
//! a percent-difference-from-best grid (zero at the best cell).

use rayon::prelude::*;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::actor_critic::{Algo, TrainConfig};
use crate::dictionaries::MonomialBasis;
use crate::environments::{EnvironmentSpec, RandomPolicy, rollout};
use crate::error::Result;
use crate::harness::run::{DeterministicPolicy, mean_return};
use crate::koopman::{KoopmanTensor, Sample, fit_tensor};
use crate::numerics::Vector;
use crate::skvi::{ActionGrid, SkviParams, SkviPolicy, value_iteration};

/// Sweep settings shared by the four ablations.
#[derive(Clone, Debug)]
pub struct AblateSettings {
    pub seeds: Vec<u64>,
    pub eval_episodes: usize,
    /// Random-agent interactions for tensor construction.
    pub tensor_steps: usize,
    pub tensor_ridge: f64,
    pub state_degree: usize,
    pub action_degree: usize,
    pub skvi: SkviParams,
    pub skvi_actions: usize,
    /// Actor-critic budget per cell (reduced at desk scale).
    pub train: TrainConfig,
}

impl Default for AblateSettings {
    fn default() -> Self {
        AblateSettings {
            seeds: vec![0, 1, 2, 3, 4],
            eval_episodes: 100,
            tensor_steps: 30_000,
            tensor_ridge: 1e-6,
            state_degree: 2,
            action_degree: 2,
            skvi: SkviParams::default(),
            skvi_actions: 101,
            train: TrainConfig {
                total_steps: 15_000,
                ..TrainConfig::default()
            },
        }
    }
}

/// A finished sweep: a labeled grid of cross-seed mean returns.
#[derive(Clone, Debug)]
pub struct AblateOutcome {
    pub name: String,
    pub row_label: String,
    pub col_label: String,
    pub row_values: Vec<String>,
    pub col_values: Vec<String>,
    pub mean_returns: Vec<Vec<Option<f64>>>,
    pub failures: Vec<(usize, usize, String)>,
}

impl AblateOutcome {
    pub fn best(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (r, row) in self.mean_returns.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    if best.is_none_or(|(_, _, b)| *v > b) {
                        best = Some((r, c, *v));
                    }
                }
            }
        }
        best
    }

    pub fn cell(&self, r: usize, c: usize) -> Option<f64> {
        self.mean_returns[r][c]
    }

    fn grid_csv(&self, value: impl Fn(usize, usize) -> Option<f64>) -> String {
        let mut out = format!("{}\\{}", self.row_label, self.col_label);
        for c in &self.col_values {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for r in 0..self.row_values.len() {
            out.push_str(&self.row_values[r]);
            for c in 0..self.col_values.len() {
                out.push(',');
                if let Some(v) = value(r, c) {
                    out.push_str(&format!("{v}"));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Raw cross-seed mean returns (empty cells mark failures).
    pub fn returns_csv(&self) -> String {
        self.grid_csv(|r, c| self.cell(r, c))
    }

    /// Percent difference from the best cell: `100 * (best - cell) / |best|`,
    /// zero at the best-performing point.
    pub fn pct_from_best_csv(&self) -> String {
        let best = self.best().map(|(_, _, v)| v);
        self.grid_csv(|r, c| match (self.cell(r, c), best) {
            (Some(v), Some(b)) => Some(100.0 * (b - v) / b.abs().max(f64::MIN_POSITIVE)),
            _ => None,
        })
    }
}

/// Collects a random-agent dataset of `steps` transitions.
fn collect_samples(env: &EnvironmentSpec, steps: usize, seed: u64) -> (Vec<Sample>, Vec<Vector>) {
    let policy = RandomPolicy::for_env(env);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let episodes = steps.div_ceil(env.episode_len);
    let mut samples = Vec::with_capacity(steps);
    let mut states = Vec::with_capacity(steps);
    'outer: for (_, transitions) in rollout(env, &policy, &mut rng, episodes) {
        for t in transitions {
            states.push(t.x.clone());
            samples.push((t.x, t.u, t.x_next));
            if samples.len() == steps {
                break 'outer;
            }
        }
    }
    (samples, states)
}

fn fit_cell_tensor(
    env: &EnvironmentSpec,
    settings: &AblateSettings,
    state_degree: usize,
    action_degree: usize,
    data_steps: usize,
    collect_env: &EnvironmentSpec,
    seed: u64,
) -> Result<(KoopmanTensor, Vec<Vector>)> {
    let (samples, states) = collect_samples(collect_env, data_steps, seed.wrapping_add(101));
    let phi = MonomialBasis::new(env.state_dim, state_degree);
    let psi = MonomialBasis::new(env.action_dim, action_degree);
    let tensor = fit_tensor(&samples, &phi, &psi, settings.tensor_ridge)?;
    Ok((tensor, states))
}

/// One SKVI run: tensor, value iteration, greedy evaluation.
fn skvi_cell(
    env: &EnvironmentSpec,
    settings: &AblateSettings,
    actions: usize,
    params: &SkviParams,
    seed: u64,
) -> Result<f64> {
    let (tensor, states) = fit_cell_tensor(
        env,
        settings,
        settings.state_degree,
        settings.action_degree,
        settings.tensor_steps,
        env,
        seed,
    )?;
    let grid = ActionGrid::for_env(env, actions);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(202));
    let trained = value_iteration(&tensor, env, &states, &grid, params, &mut rng)?;
    let policy = SkviPolicy::new(
        &trained.weights.w,
        &tensor,
        grid,
        params.alpha,
        params.gamma,
        env,
        true,
    )?;
    Ok(mean_return(env, &policy, seed, settings.eval_episodes))
}

/// One SAKC run on a tensor with the given dictionary orders and data volume.
fn sakc_cell(
    env: &EnvironmentSpec,
    settings: &AblateSettings,
    state_degree: usize,
    action_degree: usize,
    data_steps: usize,
    collect_env: &EnvironmentSpec,
    seed: u64,
) -> Result<f64> {
    let (tensor, _) = fit_cell_tensor(
        env,
        settings,
        state_degree,
        action_degree,
        data_steps,
        collect_env,
        seed,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (agent, _) =
        crate::actor_critic::train(Algo::Sakc, env, &settings.train, Some(tensor), &mut rng)?;
    let policy = DeterministicPolicy(move |x: &Vector| agent.act_mean(x));
    Ok(mean_return(env, &policy, seed, settings.eval_episodes))
}

/// Runs a labeled grid of cell closures over the seed list, in parallel,
/// gathering results in deterministic cell order.
fn run_grid<F>(
    name: &str,
    row_label: &str,
    col_label: &str,
    row_values: Vec<String>,
    col_values: Vec<String>,
    seeds: &[u64],
    cell_fn: F,
) -> AblateOutcome
where
    F: Fn(usize, usize, u64) -> Result<f64> + Sync,
{
    let jobs: Vec<(usize, usize, u64)> = (0..row_values.len())
        .flat_map(|r| {
            let seeds = seeds.to_vec();
            (0..col_values.len())
                .flat_map(move |c| seeds.clone().into_iter().map(move |s| (r, c, s)))
                .collect::<Vec<_>>()
        })
        .collect();
    let results: Vec<((usize, usize), std::result::Result<f64, String>)> = jobs
        .par_iter()
        .map(|&(r, c, s)| ((r, c), cell_fn(r, c, s).map_err(|e| e.to_string())))
        .collect();
    let mut sums = vec![vec![0.0f64; col_values.len()]; row_values.len()];
    let mut counts = vec![vec![0usize; col_values.len()]; row_values.len()];
    let mut failures: Vec<(usize, usize, String)> = Vec::new();
    for ((r, c), res) in results {
        match res {
            Ok(v) => {
                sums[r][c] += v;
                counts[r][c] += 1;
            }
            Err(e) => {
                if !failures.iter().any(|(fr, fc, _)| (*fr, *fc) == (r, c)) {
                    failures.push((r, c, e));
                }
            }
        }
    }
    let mean_returns = (0..row_values.len())
        .map(|r| {
            (0..col_values.len())
                .map(|c| {
                    if counts[r][c] == seeds.len() && !seeds.is_empty() {
                        Some(sums[r][c] / counts[r][c] as f64)
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect();
    AblateOutcome {
        name: name.to_string(),
        row_label: row_label.to_string(),
        col_label: col_label.to_string(),
        row_values,
        col_values,
        mean_returns,
        failures,
    }
}

/// SKVI batch-size sweep (8192 to 24576 in 4096 steps).
pub fn ablate_skvi_batch(env: &EnvironmentSpec, settings: &AblateSettings) -> AblateOutcome {
    let batches = [8192usize, 12288, 16384, 20480, 24576];
    run_grid(
        "skvi-batch",
        "env",
        "batch_size",
        vec![env.kind.name().to_string()],
        batches.iter().map(|b| b.to_string()).collect(),
        &settings.seeds,
        |_r, c, seed| {
            let params = SkviParams {
                batch_size: batches[c],
                ..settings.skvi.clone()
            };
            skvi_cell(env, settings, settings.skvi_actions, &params, seed)
        },
    )
}

/// SKVI compute sweep: action-grid size 61..141 by epochs 90..190.
pub fn ablate_skvi_compute(env: &EnvironmentSpec, settings: &AblateSettings) -> AblateOutcome {
    let actions = [61usize, 81, 101, 121, 141];
    let epochs = [90usize, 110, 130, 150, 170, 190];
    run_grid(
        "skvi-compute",
        "actions",
        "epochs",
        actions.iter().map(|a| a.to_string()).collect(),
        epochs.iter().map(|e| e.to_string()).collect(),
        &settings.seeds,
        |r, c, seed| {
            let params = SkviParams {
                max_iters: epochs[c],
                epsilon: 0.0, // fixed budget; run all epochs
                ..settings.skvi.clone()
            };
            skvi_cell(env, settings, actions[r], &params, seed)
        },
    )
}

/// SAKC dictionary sweep: state and action monomial orders 1..=4.
pub fn ablate_sakc_monomials(env: &EnvironmentSpec, settings: &AblateSettings) -> AblateOutcome {
    let orders = [1usize, 2, 3, 4];
    run_grid(
        "sakc-monomials",
        "state_order",
        "action_order",
        orders.iter().map(|o| o.to_string()).collect(),
        orders.iter().map(|o| o.to_string()).collect(),
        &settings.seeds,
        |r, c, seed| {
            sakc_cell(
                env,
                settings,
                orders[r],
                orders[c],
                settings.tensor_steps,
                env,
                seed,
            )
        },
    )
}

/// SAKC tensor data-volume sweep: sampled paths 60..140 by steps per path
/// 100..500.
pub fn ablate_sakc_data(env: &EnvironmentSpec, settings: &AblateSettings) -> AblateOutcome {
    let paths = [60usize, 80, 100, 120, 140];
    let steps_per_path = [100usize, 200, 300, 400, 500];
    run_grid(
        "sakc-data",
        "paths",
        "steps_per_path",
        paths.iter().map(|p| p.to_string()).collect(),
        steps_per_path.iter().map(|s| s.to_string()).collect(),
        &settings.seeds,
        |r, c, seed| {
            let mut collect_env = env.clone();
            collect_env.episode_len = steps_per_path[c];
            sakc_cell(
                env,
                settings,
                settings.state_degree,
                settings.action_degree,
                paths[r] * steps_per_path[c],
                &collect_env,
                seed,
            )
        },
    )
}

/// Dispatch by sweep name.
pub fn run_ablation(
    which: &str,
    env: &EnvironmentSpec,
    settings: &AblateSettings,
) -> Result<AblateOutcome> {
    match which {
        "skvi-batch" => Ok(ablate_skvi_batch(env, settings)),
        "skvi-compute" => Ok(ablate_skvi_compute(env, settings)),
        "sakc-monomials" => Ok(ablate_sakc_monomials(env, settings)),
        "sakc-data" => Ok(ablate_sakc_data(env, settings)),
        other => Err(crate::error::Error::Config(format!(
            "unknown ablation '{other}' (skvi-batch, skvi-compute, sakc-monomials, sakc-data)"
        ))),
    }
}

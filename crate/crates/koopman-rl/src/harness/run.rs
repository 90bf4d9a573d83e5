//! Training drivers, evaluation, and run-record reporting.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::actor_critic::{Algo, EpisodeRecord, TrainConfig, train};
use crate::environments::{EnvironmentSpec, Policy, rollout};
use crate::error::{Error, Result};
use crate::harness::dataset::Dataset;
use crate::harness::model::{AgentModel, FORMAT_VERSION, Model, SkviModel, save_agent, save_skvi};
use crate::koopman::KoopmanTensor;
use crate::numerics::Vector;
use crate::skvi::{ActionGrid, SkviParams, SkviTraining, value_iteration};

/// One row of a training or evaluation log.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub algo: String,
    pub env: String,
    pub seed: u64,
    pub episode: usize,
    pub step: usize,
    pub episodic_return: f64,
    pub wall_ms: u64,
}

pub const RUN_RECORD_HEADER: &str = "algo,env,seed,episode,step,return,wall_ms";

impl RunRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.algo, self.env, self.seed, self.episode, self.step, self.episodic_return,
            self.wall_ms
        )
    }
}

pub fn write_run_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut text = String::from(RUN_RECORD_HEADER);
    text.push('\n');
    for r in records {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_run_records(path: &Path) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RUN_RECORD_HEADER => {}
        _ => {
            return Err(Error::ModelFormat(format!(
                "{}: not a run-record file",
                path.display()
            )));
        }
    }
    let mut out = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::ModelFormat(format!(
                "{}:{}: malformed row",
                path.display(),
                ln + 2
            )));
        }
        let bad = |what: &str| Error::ModelFormat(format!("{}: bad {what}", path.display()));
        out.push(RunRecord {
            algo: f[0].to_string(),
            env: f[1].to_string(),
            seed: f[2].parse().map_err(|_| bad("seed"))?,
            episode: f[3].parse().map_err(|_| bad("episode"))?,
            step: f[4].parse().map_err(|_| bad("step"))?,
            episodic_return: f[5].parse().map_err(|_| bad("return"))?,
            wall_ms: f[6].parse().map_err(|_| bad("wall_ms"))?,
        });
    }
    Ok(out)
}

/// Trains an actor-critic agent, returning the agent plus run records.
/// `on_episode` fires as each training episode completes.
pub fn train_agent(
    algo: Algo,
    env: &EnvironmentSpec,
    cfg: &TrainConfig,
    tensor: Option<KoopmanTensor>,
    seed: u64,
    mut on_episode: impl FnMut(&RunRecord),
) -> Result<(crate::actor_critic::Agent, Vec<RunRecord>)> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (agent, episodes) = train(algo, env, cfg, tensor, &mut rng)?;
    let records: Vec<RunRecord> = episodes
        .iter()
        .map(|e: &EpisodeRecord| RunRecord {
            algo: algo.name().to_string(),
            env: env.kind.name().to_string(),
            seed,
            episode: e.episode,
            step: e.end_step,
            episodic_return: e.episodic_return,
            wall_ms: started.elapsed().as_millis() as u64,
        })
        .collect();
    for r in &records {
        on_episode(r);
    }
    Ok((agent, records))
}

/// Fits SKVI on a dataset and packages the saved model.
pub fn train_skvi(
    env: &EnvironmentSpec,
    tensor: &KoopmanTensor,
    tensor_path: &str,
    dataset: &Dataset,
    actions: usize,
    params: &SkviParams,
    seed: u64,
) -> Result<(SkviModel, SkviTraining)> {
    let grid = ActionGrid::for_env(env, actions);
    let states = dataset.states();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = value_iteration(tensor, env, &states, &grid, params, &mut rng)?;
    let model = SkviModel {
        format_version: FORMAT_VERSION,
        kind: "skvi".into(),
        env: env.kind.name().into(),
        w: out.weights.w.as_slice().to_vec(),
        w_bound: out.weights.bound,
        grid_low: grid.low.clone(),
        grid_high: grid.high.clone(),
        grid_count: grid.count,
        alpha: params.alpha,
        gamma: params.gamma,
        phi_exponents: tensor.phi_basis().exponents().to_vec(),
        psi_exponents: tensor.psi_basis().exponents().to_vec(),
        tensor_path: tensor_path.to_string(),
    };
    Ok((model, out))
}

/// Saves a trained agent next to its tensor reference.
pub fn save_trained_agent(
    path: &Path,
    agent: &crate::actor_critic::Agent,
    env: &EnvironmentSpec,
    tensor_path: &str,
) -> Result<()> {
    save_agent(
        path,
        &AgentModel::from_agent(agent, env.kind.name(), tensor_path),
    )
}

pub fn save_trained_skvi(path: &Path, model: &SkviModel) -> Result<()> {
    save_skvi(path, model)
}

/// Mean episodic return of `policy` over `episodes` episodes under one seed.
pub fn mean_return(
    env: &EnvironmentSpec,
    policy: &(dyn Policy + Send + Sync),
    seed: u64,
    episodes: usize,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = rollout(env, policy, &mut rng, episodes);
    eps.iter().map(|(r, _)| r).sum::<f64>() / episodes.max(1) as f64
}

/// Per-seed evaluation summary.
#[derive(Clone, Debug)]
pub struct EvalRow {
    pub algo: String,
    pub env: String,
    pub seed: u64,
    pub episodes: usize,
    pub mean_return: f64,
}

pub const EVAL_HEADER: &str = "algo,env,seed,episodes,mean_return";

/// Evaluates a saved model across seeds in parallel: per-seed means plus the
/// cross-seed mean (seed column `all`).
pub fn evaluate_model(
    model: &Model,
    env: &EnvironmentSpec,
    base_dir: Option<&Path>,
    episodes: usize,
    seeds: &[u64],
) -> Result<(Vec<EvalRow>, f64)> {
    let algo = model.kind().to_string();
    let policy = model.evaluation_policy(env, base_dir)?;
    let policy_ref: &(dyn Policy + Send + Sync) = policy.as_ref();
    let rows: Vec<EvalRow> = seeds
        .par_iter()
        .map(|&seed| EvalRow {
            algo: algo.clone(),
            env: env.kind.name().into(),
            seed,
            episodes,
            mean_return: mean_return(env, policy_ref, seed, episodes),
        })
        .collect();
    let cross = rows.iter().map(|r| r.mean_return).sum::<f64>() / rows.len().max(1) as f64;
    Ok((rows, cross))
}

pub fn eval_rows_csv(rows: &[EvalRow], cross_mean: f64) -> String {
    let mut text = String::from(EVAL_HEADER);
    text.push('\n');
    for r in rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            r.algo, r.env, r.seed, r.episodes, r.mean_return
        );
    }
    if let Some(first) = rows.first() {
        let _ = writeln!(
            text,
            "{},{},all,{},{}",
            first.algo,
            first.env,
            rows.iter().map(|r| r.episodes).sum::<usize>(),
            cross_mean
        );
    }
    text
}

/// Aggregates run records into per-(algo, env) return curves binned by step.
pub fn report(records: &[RunRecord], bin_width: usize) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Config("report needs at least one record".into()));
    }
    if bin_width == 0 {
        return Err(Error::Config("bin width must be positive".into()));
    }
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(String, String, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        let bin = r.step / bin_width;
        groups
            .entry((r.algo.clone(), r.env.clone(), bin))
            .or_default()
            .push(r.episodic_return);
    }
    let mut out = String::from("algo,env,bin_start,bin_end,count,mean_return,std_return\n");
    for ((algo, env, bin), returns) in groups {
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        let _ = writeln!(
            out,
            "{algo},{env},{},{},{},{mean},{}",
            bin * bin_width,
            (bin + 1) * bin_width,
            returns.len(),
            var.sqrt()
        );
    }
    Ok(out)
}

/// Wraps a closure as a thread-safe evaluation policy.
pub struct DeterministicPolicy<F: Fn(&Vector) -> Vector + Send + Sync>(pub F);

impl<F: Fn(&Vector) -> Vector + Send + Sync> Policy for DeterministicPolicy<F> {
    fn act(&self, x: &Vector, _rng: &mut dyn rand::Rng) -> Vector {
        (self.0)(x)
    }
}

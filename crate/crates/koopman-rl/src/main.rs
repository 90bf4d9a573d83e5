//! Thin command-line wrapper over the experiment harness. Each subcommand
//! delegates to library calls; see the crate examples for the library-level
//! equivalents.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use koopman_rl::actor_critic::Algo;
use koopman_rl::environments::EnvironmentSpec;
use koopman_rl::error::{Error, Result};
use koopman_rl::harness::{
    self, AblateSettings, ExperimentConfig, Model, RunRecord, interpret, run,
};
use koopman_rl::lqr::LqrPolicy;
use koopman_rl::numerics::Vector;
use koopman_rl::skvi::SkviPolicy;

#[derive(Parser)]
#[command(
    name = "koopman-rl",
    about = "Koopman tensor estimation and Koopman-assisted reinforcement learning",
    version
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Default seed for single-seed commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory that relative output paths resolve against (top-level flag:
    /// subcommands use --out for their own artifact paths).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads for parallel evaluation and sweeps (0 = automatic).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TrainArgs {
    /// Environment name (linear, fluidflow, lorenz, doublewell).
    #[arg(long)]
    env: Option<String>,
    /// Fitted tensor model (required for sakc).
    #[arg(long)]
    tensor: Option<PathBuf>,
    /// Total environment steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Entropy temperature.
    #[arg(long)]
    alpha: Option<f64>,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    /// Also write the per-episode return log to this CSV file.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Collect a random-agent transition dataset.
    Collect {
        #[arg(long)]
        env: Option<String>,
        #[arg(long, default_value_t = 30_000)]
        steps: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a Koopman tensor from a dataset.
    FitTensor {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        state_degree: Option<usize>,
        #[arg(long)]
        action_degree: Option<usize>,
        #[arg(long)]
        ridge: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train soft Koopman value iteration on a dataset + tensor.
    Skvi {
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        actions: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the soft actor Koopman-critic.
    Sakc(TrainArgs),
    /// Train the value-network soft actor-critic baseline.
    SacV(TrainArgs),
    /// Train the twin-target-Q soft actor-critic baseline.
    SacQ(TrainArgs),
    /// Evaluate the LQR baseline.
    Lqr {
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Comma-separated seed list (defaults to the config seeds).
        #[arg(long)]
        seeds: Option<String>,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a saved model across seeds.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a hyperparameter sweep.
    Ablate {
        /// skvi-batch | skvi-compute | sakc-monomials | sakc-data
        #[arg(long)]
        which: String,
        #[arg(long)]
        env: Option<String>,
        /// Actor-critic steps per cell (reduced desk-scale budget).
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seeds: Option<String>,
        /// Prefix for `<prefix>_returns.csv` and `<prefix>_pct_from_best.csv`.
        #[arg(long)]
        out_prefix: Option<String>,
    },
    /// Print a value function symbolically; optionally sparsify and re-evaluate.
    Interpret {
        #[arg(long)]
        model: PathBuf,
        /// Keep only these terms (comma separated, e.g. "1,y^2,z^2").
        #[arg(long)]
        keep: Option<String>,
        /// Zero these terms instead.
        #[arg(long)]
        zero: Option<String>,
        /// Re-evaluate the sparsified policy against the full one.
        #[arg(long)]
        eval: bool,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Summarize run-record CSVs into binned return curves.
    Report {
        /// Run-record files.
        #[arg(long, num_args = 1..)]
        records: Vec<PathBuf>,
        /// Step-bin width.
        #[arg(long, default_value_t = 1_000)]
        bin: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn parse_seeds(flag: Option<&str>, cfg: &ExperimentConfig) -> Result<Vec<u64>> {
    match flag {
        Some(list) => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Config(format!("bad seed '{s}'")))
            })
            .collect(),
        None => Ok(cfg.harness.seeds.clone()),
    }
}

fn out_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn write_or_print(path: Option<PathBuf>, base: &Path, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(out_path(base, &p), text)?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        }
    }
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let seed = cli.seed.unwrap_or(0);
    let base = cli.out.clone();
    if !base.as_os_str().is_empty() && !base.exists() {
        std::fs::create_dir_all(&base)?;
    }

    match cli.command {
        Command::Collect { env, steps, out } => {
            let spec = cfg.environment(env.as_deref())?;
            let mut rng = seeded(seed);
            let path = out_path(&base, &out);
            let written = harness::collect(&spec, steps, &mut rng, &path)?;
            eprintln!("wrote {written} transitions to {}", path.display());
            Ok(())
        }
        Command::FitTensor {
            data,
            env,
            state_degree,
            action_degree,
            ridge,
            out,
        } => {
            let spec = cfg.environment(env.as_deref())?;
            let dataset = harness::read_transitions(&data)?;
            if dataset.state_dim != spec.state_dim || dataset.action_dim != spec.action_dim {
                return Err(Error::Config(format!(
                    "dataset dims ({}, {}) do not match environment '{}'",
                    dataset.state_dim,
                    dataset.action_dim,
                    spec.kind.name()
                )));
            }
            let phi = koopman_rl::dictionaries::MonomialBasis::new(
                spec.state_dim,
                state_degree.unwrap_or(cfg.tensor.state_degree),
            );
            let psi = koopman_rl::dictionaries::MonomialBasis::new(
                spec.action_dim,
                action_degree.unwrap_or(cfg.tensor.action_degree),
            );
            let tensor = koopman_rl::koopman::fit_tensor(
                &dataset.samples(),
                &phi,
                &psi,
                ridge.unwrap_or(cfg.tensor.ridge),
            )?;
            let path = out_path(&base, &out);
            harness::save_tensor(&path, &tensor, spec.kind.name())?;
            eprintln!(
                "fitted {}x{} tensor from {} samples -> {}",
                tensor.d_x(),
                tensor.d_x() * tensor.d_u(),
                dataset.len(),
                path.display()
            );
            Ok(())
        }
        Command::Skvi {
            env,
            tensor,
            data,
            actions,
            alpha,
            gamma,
            epochs,
            batch,
            out,
        } => {
            let spec = cfg.environment(env.as_deref())?;
            let (_, fitted) = harness::load_tensor(&tensor)?;
            let dataset = harness::read_transitions(&data)?;
            let mut params = cfg.skvi.params();
            if let Some(a) = alpha {
                params.alpha = a;
            }
            if let Some(g) = gamma {
                params.gamma = g;
            }
            if let Some(e) = epochs {
                params.max_iters = e;
            }
            if let Some(b) = batch {
                params.batch_size = b;
            }
            let n_actions = actions.unwrap_or(cfg.skvi.actions);
            let (model, training) = run::train_skvi(
                &spec,
                &fitted,
                tensor.to_str().unwrap_or_default(),
                &dataset,
                n_actions,
                &params,
                seed,
            )?;
            let path = out_path(&base, &out);
            run::save_trained_skvi(&path, &model)?;
            eprintln!(
                "skvi: {} epochs, final ABE {:.4e} -> {}",
                training.abe_history.len(),
                training.abe_history.last().copied().unwrap_or(f64::NAN),
                path.display()
            );
            Ok(())
        }
        Command::Sakc(args) => train_cmd(Algo::Sakc, args, &cfg, seed, &base),
        Command::SacV(args) => train_cmd(Algo::SacV, args, &cfg, seed, &base),
        Command::SacQ(args) => train_cmd(Algo::SacQ, args, &cfg, seed, &base),
        Command::Lqr {
            env,
            episodes,
            seeds,
            out,
        } => {
            let spec = cfg.environment(env.as_deref())?;
            let seeds = parse_seeds(seeds.as_deref(), &cfg)?;
            let episodes = episodes.unwrap_or(cfg.harness.episodes);
            let policy = LqrPolicy::for_env(&spec)?;
            let rows: Vec<run::EvalRow> = seeds
                .iter()
                .map(|&s| run::EvalRow {
                    algo: "lqr".into(),
                    env: spec.kind.name().into(),
                    seed: s,
                    episodes,
                    mean_return: run::mean_return(&spec, &policy, s, episodes),
                })
                .collect();
            let cross = rows.iter().map(|r| r.mean_return).sum::<f64>() / rows.len() as f64;
            write_or_print(out, &base, &run::eval_rows_csv(&rows, cross))
        }
        Command::Evaluate {
            model,
            env,
            episodes,
            seeds,
            out,
        } => {
            let loaded = harness::load_model(&model)?;
            let env_name = env.unwrap_or_else(|| loaded.env_name().to_string());
            let spec = cfg.environment(Some(&env_name))?;
            let seeds = parse_seeds(seeds.as_deref(), &cfg)?;
            let episodes = episodes.unwrap_or(cfg.harness.episodes);
            let (rows, cross) = run::evaluate_model(
                &loaded,
                &spec,
                model.parent(),
                episodes,
                &seeds,
            )?;
            write_or_print(out, &base, &run::eval_rows_csv(&rows, cross))
        }
        Command::Ablate {
            which,
            env,
            steps,
            seeds,
            out_prefix,
        } => {
            let spec = cfg.environment(env.as_deref())?;
            let mut settings = AblateSettings {
                seeds: parse_seeds(seeds.as_deref(), &cfg)?,
                eval_episodes: cfg.harness.episodes,
                tensor_steps: cfg.tensor.steps,
                tensor_ridge: cfg.tensor.ridge,
                state_degree: cfg.tensor.state_degree,
                action_degree: cfg.tensor.action_degree,
                skvi: cfg.skvi.params(),
                skvi_actions: cfg.skvi.actions,
                train: cfg.train.train_config(),
            };
            settings.train.total_steps = steps.unwrap_or(15_000);
            let outcome = harness::run_ablation(&which, &spec, &settings)?;
            let prefix = out_prefix.unwrap_or_else(|| format!("{}_{}", which, spec.kind.name()));
            let returns_path = out_path(&base, Path::new(&format!("{prefix}_returns.csv")));
            let pct_path = out_path(&base, Path::new(&format!("{prefix}_pct_from_best.csv")));
            std::fs::write(&returns_path, outcome.returns_csv())?;
            std::fs::write(&pct_path, outcome.pct_from_best_csv())?;
            for (r, c, err) in &outcome.failures {
                eprintln!(
                    "cell ({}, {}) failed: {err}",
                    outcome.row_values[*r], outcome.col_values[*c]
                );
            }
            eprintln!(
                "wrote {} and {}",
                returns_path.display(),
                pct_path.display()
            );
            Ok(())
        }
        Command::Interpret {
            model,
            keep,
            zero,
            eval,
            episodes,
            seeds,
        } => {
            let loaded = harness::load_model(&model)?;
            let (weights, basis) = loaded.value_weights()?;
            println!("{}", interpret::symbolic_value(&weights.w, &basis));
            let split = |s: &str| -> Vec<String> {
                s.split(',').map(|t| t.trim().to_string()).collect()
            };
            let sparse = match (&keep, &zero) {
                (Some(k), None) => Some(interpret::sparsify_keep(&weights.w, &basis, &split(k))?),
                (None, Some(z)) => Some(interpret::sparsify_zero(&weights.w, &basis, &split(z))?),
                (None, None) => None,
                (Some(_), Some(_)) => {
                    return Err(Error::Config("--keep and --zero are exclusive".into()));
                }
            };
            if let Some(w) = &sparse {
                println!("sparsified: {}", interpret::symbolic_value(w, &basis));
            }
            if eval {
                let skvi = match &loaded {
                    Model::Skvi(m) => m,
                    _ => {
                        return Err(Error::ModelFormat(
                            "policy re-evaluation needs an skvi model".into(),
                        ));
                    }
                };
                let spec = cfg.environment(Some(&skvi.env))?;
                let seeds = parse_seeds(seeds.as_deref(), &cfg)?;
                let episodes = episodes.unwrap_or(cfg.harness.episodes);
                let full = sparsified_mean(skvi, &model, &spec, &weights.w, episodes, &seeds)?;
                println!("full-weight mean return: {full:.4}");
                if let Some(w) = &sparse {
                    let sparse_mean =
                        sparsified_mean(skvi, &model, &spec, w, episodes, &seeds)?;
                    let pct = 100.0 * (full - sparse_mean) / full.abs();
                    println!("sparsified mean return: {sparse_mean:.4} ({pct:.2}% from full)");
                }
            }
            Ok(())
        }
        Command::Report { records, bin, out } => {
            let mut all: Vec<RunRecord> = Vec::new();
            for path in &records {
                all.extend(run::read_run_records(path)?);
            }
            let text = run::report(&all, bin)?;
            write_or_print(out, &base, &text)
        }
    }
}

fn seeded(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

fn train_cmd(
    algo: Algo,
    args: TrainArgs,
    cfg: &ExperimentConfig,
    seed: u64,
    base: &Path,
) -> Result<()> {
    let spec = cfg.environment(args.env.as_deref())?;
    let mut train_cfg = cfg.train.train_config();
    if let Some(steps) = args.steps {
        train_cfg.total_steps = steps;
    }
    if let Some(alpha) = args.alpha {
        train_cfg.alpha = alpha;
    }
    let tensor = match (&args.tensor, algo) {
        (Some(path), _) => Some(harness::load_tensor(path)?.1),
        (None, Algo::Sakc) => {
            return Err(Error::Config("sakc requires --tensor".into()));
        }
        (None, _) => None,
    };
    println!("algo,env,seed,episode,step,return");
    let (agent, records) = run::train_agent(
        algo,
        &spec,
        &train_cfg,
        tensor,
        seed,
        |r: &RunRecord| {
            println!(
                "{},{},{},{},{},{}",
                r.algo, r.env, r.seed, r.episode, r.step, r.episodic_return
            );
        },
    )?;
    let model_path = out_path(base, &args.out);
    run::save_trained_agent(
        &model_path,
        &agent,
        &spec,
        args.tensor
            .as_deref()
            .and_then(Path::to_str)
            .unwrap_or_default(),
    )?;
    if let Some(log) = &args.log {
        run::write_run_records(&out_path(base, log), &records)?;
    }
    eprintln!("saved {} model to {}", algo.name(), model_path.display());
    Ok(())
}

/// Mean return of an SKVI policy with substituted weights.
fn sparsified_mean(
    skvi: &harness::SkviModel,
    model_path: &Path,
    env: &EnvironmentSpec,
    w: &Vector,
    episodes: usize,
    seeds: &[u64],
) -> Result<f64> {
    let tensor_path = {
        let p = PathBuf::from(&skvi.tensor_path);
        if p.exists() {
            p
        } else {
            model_path
                .parent()
                .map(|d| d.join(&skvi.tensor_path))
                .unwrap_or(p)
        }
    };
    let (_, tensor) = harness::load_tensor(&tensor_path)?;
    let grid = koopman_rl::skvi::ActionGrid::new(
        skvi.grid_low.clone(),
        skvi.grid_high.clone(),
        skvi.grid_count,
    );
    let policy = SkviPolicy::new(w, &tensor, grid, skvi.alpha, skvi.gamma, env, true)?;
    let total: f64 = seeds
        .iter()
        .map(|&s| run::mean_return(env, &policy, s, episodes))
        .sum();
    Ok(total / seeds.len() as f64)
}

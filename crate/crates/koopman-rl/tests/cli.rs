//! End-to-end exercise of the command-line surface: dataset collection,
//! tensor fitting, SKVI training, agent training, evaluation, symbolic
//! interpretation, and reporting, plus exit-code conventions.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_koopman-rl"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn koopman-rl");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn full_pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let data = base.join("linear.csv");
    let tensor = base.join("tensor.json");
    let skvi = base.join("skvi.json");
    let sakc = base.join("sakc.json");
    let log = base.join("sakc_log.csv");

    // collect a small dataset
    run_ok(bin()
        .args(["collect", "--env", "linear", "--steps", "900", "--seed", "3"])
        .arg("--out")
        .arg(&data)
        .current_dir(base));
    let text = std::fs::read_to_string(&data).unwrap();
    assert!(text.starts_with("episode,step,x_0,x_1,u_0,reward,next_x_0,next_x_1"));
    assert_eq!(text.lines().count(), 901);

    // fit a tensor from it
    run_ok(bin()
        .args(["fit-tensor", "--env", "linear"])
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&tensor)
        .current_dir(base));
    assert!(tensor.exists());

    // a few epochs of value iteration
    run_ok(bin()
        .args([
            "skvi", "--env", "linear", "--actions", "11", "--epochs", "4", "--batch", "512",
            "--seed", "1",
        ])
        .arg("--tensor")
        .arg(&tensor)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&skvi)
        .current_dir(base));
    assert!(skvi.exists());

    // evaluate the SKVI policy across two seeds
    let eval = run_ok(bin()
        .args(["evaluate", "--episodes", "2", "--seeds", "0,1"])
        .arg("--model")
        .arg(&skvi)
        .current_dir(base));
    assert!(eval.starts_with("algo,env,seed,episodes,mean_return"));
    assert!(eval.contains("skvi,linear,0,2,"));
    assert!(eval.contains(",all,"));
    let again = run_ok(bin()
        .args(["evaluate", "--episodes", "2", "--seeds", "0,1"])
        .arg("--model")
        .arg(&skvi)
        .current_dir(base));
    assert_eq!(eval, again, "evaluation must be reproducible");

    // short warmup-only SAKC training with a streamed return log
    let stdout = run_ok(bin()
        .args(["sakc", "--env", "linear", "--steps", "700", "--seed", "2"])
        .arg("--tensor")
        .arg(&tensor)
        .arg("--out")
        .arg(&sakc)
        .arg("--log")
        .arg(&log)
        .current_dir(base));
    assert!(stdout.starts_with("algo,env,seed,episode,step,return"));
    assert!(stdout.lines().count() >= 3, "2 episodes expected in 700 steps");
    assert!(sakc.exists() && log.exists());

    // evaluate the agent by its policy mean
    let eval = run_ok(bin()
        .args(["evaluate", "--episodes", "2", "--seeds", "0"])
        .arg("--model")
        .arg(&sakc)
        .current_dir(base));
    assert!(eval.contains("sakc,linear,0,2,"));

    // LQR baseline CSV
    let lqr = run_ok(bin()
        .args(["lqr", "--env", "linear", "--episodes", "2", "--seeds", "0,1"])
        .current_dir(base));
    assert!(lqr.contains("lqr,linear,0,2,"));

    // symbolic interpretation with sparsification
    let interp = run_ok(bin()
        .args(["interpret", "--keep", "1,x^2"])
        .arg("--model")
        .arg(&skvi)
        .current_dir(base));
    assert!(interp.contains("V(x) ="));
    assert!(interp.contains("sparsified:"));

    // report over the training log
    let report = run_ok(bin()
        .args(["report", "--bin", "300"])
        .arg("--records")
        .arg(&log)
        .current_dir(base));
    assert!(report.starts_with("algo,env,bin_start,bin_end,count,mean_return,std_return"));
}

#[test]
fn exit_codes_distinguish_config_and_numerical_failures() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();

    // unknown environment: configuration error -> exit 2
    let out = bin()
        .args(["collect", "--env", "nope", "--steps", "10", "--out", "d.csv"])
        .current_dir(base)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // missing model file: file problem -> exit 2
    let out = bin()
        .args(["evaluate", "--model", "missing.json"])
        .current_dir(base)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // dimension mismatch between tensor and environment: numerical failure -> exit 3
    let data = base.join("linear.csv");
    let tensor = base.join("tensor.json");
    run_ok(bin()
        .args(["collect", "--env", "linear", "--steps", "600", "--seed", "0"])
        .arg("--out")
        .arg(&data)
        .current_dir(base));
    run_ok(bin()
        .args(["fit-tensor", "--env", "linear"])
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&tensor)
        .current_dir(base));
    let out = bin()
        .args(["skvi", "--env", "lorenz", "--epochs", "1", "--batch", "64"])
        .arg("--tensor")
        .arg(&tensor)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(base.join("skvi.json"))
        .current_dir(base)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_file_drives_environment_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let cfg = base.join("cfg.toml");
    std::fs::write(
        &cfg,
        "[env]\nkind = \"doublewell\"\nepisode_len = 25\n\n[harness]\nseeds = [0]\nepisodes = 2\njobs = 1\n",
    )
    .unwrap();
    let data = base.join("dw.csv");
    run_ok(bin()
        .arg("--config")
        .arg(&cfg)
        .args(["collect", "--steps", "50", "--seed", "4"])
        .arg("--out")
        .arg(&data)
        .current_dir(base));
    let text = std::fs::read_to_string(&data).unwrap();
    // 50 steps at episode length 25: episodes 0 and 1
    assert!(text.lines().any(|l| l.starts_with("1,24,")));
    assert!(!text.lines().any(|l| l.starts_with("2,")));
}

/// Re-running an identical command yields byte-identical artifacts
/// (wall-time columns excluded; dataset and model files carry none).
#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    for name in ["a", "b"] {
        let data = base.join(format!("{name}.csv"));
        let tensor = base.join(format!("{name}.json"));
        run_ok(bin()
            .args(["collect", "--env", "fluidflow", "--steps", "400", "--seed", "9"])
            .arg("--out")
            .arg(&data)
            .current_dir(base));
        run_ok(bin()
            .args(["fit-tensor", "--env", "fluidflow"])
            .arg("--data")
            .arg(&data)
            .arg("--out")
            .arg(&tensor)
            .current_dir(base));
    }
    assert_eq!(
        std::fs::read(base.join("a.csv")).unwrap(),
        std::fs::read(base.join("b.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(base.join("a.json")).unwrap(),
        std::fs::read(base.join("b.json")).unwrap()
    );
}

#[test]
fn ablate_writes_grid_files() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let cfg = base.join("cfg.toml");
    // tiny budgets so the sweep finishes quickly
    std::fs::write(
        &cfg,
        r#"
[env]
kind = "doublewell"
episode_len = 30

[tensor]
state_degree = 2
action_degree = 1
ridge = 1e-6
steps = 300

[skvi]
actions = 5
alpha = 1.0
gamma = 0.9
epochs = 2
batch = 128
epsilon = 0.0
w_bound = 1e6
ridge = 1e-8

[harness]
seeds = [0]
episodes = 2
jobs = 2
"#,
    )
    .unwrap();
    run_ok(bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(base)
        .args(["ablate", "--which", "skvi-batch", "--out-prefix", "t"])
        .current_dir(base));
    let returns = std::fs::read_to_string(base.join("t_returns.csv")).unwrap();
    assert!(returns.starts_with("env\\batch_size,8192,12288,16384,20480,24576"));
    let pct = std::fs::read_to_string(base.join("t_pct_from_best.csv")).unwrap();
    assert!(pct.lines().count() == 2);
    // best cell is zero; all cells filled
    let cells: Vec<&str> = pct.lines().nth(1).unwrap().split(',').skip(1).collect();
    assert_eq!(cells.len(), 5);
    assert!(cells.iter().all(|c| !c.is_empty()));
    assert!(cells.iter().any(|c| c.parse::<f64>().unwrap() == 0.0));
}

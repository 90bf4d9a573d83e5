//! Fits a Koopman tensor to random-agent data from the fluid-flow system,
//! reports one-step prediction quality on held-out transitions, and
//! round-trips the model through its JSON file format.

use koopman_rl::dictionaries::MonomialBasis;
use koopman_rl::environments::{EnvKind, EnvironmentSpec, RandomPolicy, rollout};
use koopman_rl::harness::{load_tensor, save_tensor};
use koopman_rl::koopman::{Sample, fit_tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> koopman_rl::Result<()> {
    let env = EnvironmentSpec::new(EnvKind::FluidFlow);
    let policy = RandomPolicy::for_env(&env);
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let mut samples: Vec<Sample> = Vec::new();
    for (_, transitions) in rollout(&env, &policy, &mut rng, 30_000 / env.episode_len) {
        for t in transitions {
            samples.push((t.x, t.u, t.x_next));
        }
    }
    let split = samples.len() * 9 / 10;
    let (train, holdout) = samples.split_at(split);

    let phi = MonomialBasis::new(env.state_dim, 2);
    let psi = MonomialBasis::new(env.action_dim, 2);
    println!(
        "fitting tensor: {} samples, d_x = {}, d_u = {}",
        train.len(),
        phi.dim(),
        psi.dim()
    );
    let tensor = fit_tensor(train, &phi, &psi, 1e-6)?;

    let mut err_sq = 0.0;
    let mut ref_sq = 0.0;
    for (x, u, x_next) in holdout {
        let predicted = tensor.predict_state(x, u)?;
        let diff = predicted.sub(x_next);
        err_sq += diff.dot(&diff);
        ref_sq += x_next.dot(x_next);
    }
    println!(
        "holdout one-step state error: {:.3}% relative",
        100.0 * (err_sq / ref_sq).sqrt()
    );

    let dir = std::env::temp_dir().join("koopman_rl_fit_tensor_example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("fluidflow_tensor.json");
    save_tensor(&path, &tensor, env.kind.name())?;
    let (_, reloaded) = load_tensor(&path)?;
    assert_eq!(reloaded.matrix(), tensor.matrix());
    println!("model round-trips through {}", path.display());
    Ok(())
}

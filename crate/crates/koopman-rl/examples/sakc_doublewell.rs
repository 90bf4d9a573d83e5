//! Trains the soft actor Koopman-critic on the stochastic double well (a
//! shortened run for demonstration) and compares the learned policy's
//! evaluation returns against the LQR baseline.

use koopman_rl::actor_critic::{Algo, TrainConfig, train};
use koopman_rl::dictionaries::MonomialBasis;
use koopman_rl::environments::{EnvKind, EnvironmentSpec, RandomPolicy, rollout};
use koopman_rl::harness::run::DeterministicPolicy;
use koopman_rl::koopman::fit_tensor;
use koopman_rl::lqr::LqrPolicy;
use koopman_rl::numerics::Vector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> koopman_rl::Result<()> {
    let env = EnvironmentSpec::new(EnvKind::DoubleWell);

    // Koopman tensor from a random agent
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let policy = RandomPolicy::for_env(&env);
    let mut data = Vec::new();
    for (_, ts) in rollout(&env, &policy, &mut rng, 30_000 / env.episode_len) {
        for t in ts {
            data.push((t.x, t.u, t.x_next));
        }
    }
    let tensor = fit_tensor(
        &data,
        &MonomialBasis::new(env.state_dim, 2),
        &MonomialBasis::new(env.action_dim, 2),
        1e-6,
    )?;
    println!("tensor fitted from {} transitions", tensor.sample_count());

    // shortened training run (the full desk-scale budget is 50k steps)
    let cfg = TrainConfig {
        total_steps: 15_000,
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let started = std::time::Instant::now();
    let (agent, records) = train(Algo::Sakc, &env, &cfg, Some(tensor), &mut rng)?;
    println!(
        "trained {} episodes in {:?}; last returns: {:?}",
        records.len(),
        started.elapsed(),
        records
            .iter()
            .rev()
            .take(3)
            .map(|r| (r.episodic_return * 10.0).round() / 10.0)
            .collect::<Vec<_>>()
    );

    let eval_policy = DeterministicPolicy(move |x: &Vector| agent.act_mean(x));
    let mut eval_rng = ChaCha8Rng::seed_from_u64(7);
    let eps = rollout(&env, &eval_policy, &mut eval_rng, 50);
    let sakc_mean = eps.iter().map(|(r, _)| r).sum::<f64>() / eps.len() as f64;

    let lqr = LqrPolicy::for_env(&env)?;
    let mut eval_rng = ChaCha8Rng::seed_from_u64(7);
    let eps = rollout(&env, &lqr, &mut eval_rng, 50);
    let lqr_mean = eps.iter().map(|(r, _)| r).sum::<f64>() / eps.len() as f64;

    println!("evaluation over 50 episodes: SAKC {sakc_mean:.1}, LQR {lqr_mean:.1}");
    println!("(the double well rewards letting the particle rest in a well --");
    println!(" a nonlinear decision the linear-quadratic baseline cannot make)");
    Ok(())
}

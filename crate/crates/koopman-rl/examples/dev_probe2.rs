//! Scratch probe: desk-scale actor-critic feasibility (removed before release).

use koopman_rl::actor_critic::{Algo, TrainConfig, train};
use koopman_rl::dictionaries::MonomialBasis;
use koopman_rl::environments::{EnvKind, EnvironmentSpec, FnPolicy, Policy, RandomPolicy, rollout};
use koopman_rl::koopman::fit_tensor;
use koopman_rl::lqr::LqrPolicy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mean_return(env: &EnvironmentSpec, p: &dyn Policy, seed: u64, episodes: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = rollout(env, p, &mut rng, episodes);
    eps.iter().map(|(r, _)| r).sum::<f64>() / episodes as f64
}

fn main() -> koopman_rl::Result<()> {
    let mut args = std::env::args().skip(1);
    let env_name = args.next().unwrap_or_else(|| "fluidflow".into());
    let algo = Algo::parse(&args.next().unwrap_or_else(|| "sakc".into()))?;
    let seed: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(0);
    let alpha: f64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(0.2);
    let env = EnvironmentSpec::new(EnvKind::parse(&env_name)?);
    let cfg = TrainConfig { alpha, ..TrainConfig::default() };

    let tensor = if algo == Algo::Sakc {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000));
        let policy = RandomPolicy::for_env(&env);
        let mut data = Vec::new();
        for (_, ts) in rollout(&env, &policy, &mut rng, 30_000 / env.episode_len) {
            for t in ts {
                data.push((t.x, t.u, t.x_next));
            }
        }
        Some(fit_tensor(
            &data,
            &MonomialBasis::new(env.state_dim, 2),
            &MonomialBasis::new(env.action_dim, 2),
            1e-6,
        )?)
    } else {
        None
    };

    let t0 = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (agent, records) = train(algo, &env, &cfg, tensor, &mut rng)?;
    let train_time = t0.elapsed();
    let tail: Vec<f64> = records
        .iter()
        .rev()
        .take(5)
        .map(|r| r.episodic_return)
        .collect();
    let policy = FnPolicy(|x: &koopman_rl::numerics::Vector, _r: &mut dyn rand::Rng| {
        agent.act_mean(x)
    });
    let mean = mean_return(&env, &policy, 7, 100);
    let lqr = LqrPolicy::for_env(&env)?;
    let lqr_mean = mean_return(&env, &lqr, 7, 100);
    println!(
        "{} {} seed {seed} alpha {alpha}: eval mean {mean:.1} | LQR {lqr_mean:.1} | last-episodes {tail:?} | train {train_time:?}",
        env_name,
        algo.name()
    );
    Ok(())
}

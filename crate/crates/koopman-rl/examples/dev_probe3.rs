//! Scratch probe: FluidFlow regime sensitivity (removed before release).

use koopman_rl::environments::{EnvKind, EnvironmentSpec, Policy, ZeroPolicy, rollout};
use koopman_rl::lqr::LqrPolicy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mean_return(env: &EnvironmentSpec, p: &dyn Policy, seed: u64, episodes: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = rollout(env, p, &mut rng, episodes);
    eps.iter().map(|(r, _)| r).sum::<f64>() / episodes as f64
}

fn main() -> koopman_rl::Result<()> {
    for (s, x2_hi, len) in [
        (1.0, 1.0, 300usize),
        (1.5, 2.0, 300),
        (2.0, 3.0, 300),
        (1.0, 1.0, 1000),
        (1.5, 2.0, 1000),
        (2.0, 3.0, 1000),
    ] {
        let mut env = EnvironmentSpec::new(EnvKind::FluidFlow);
        env.init_box = vec![(-s, s), (-s, s), (0.0, x2_hi)];
        env.episode_len = len;
        let lqr = LqrPolicy::for_env(&env)?;
        let lqr_mean = mean_return(&env, &lqr, 7, 100);
        let zero_mean = mean_return(&env, &ZeroPolicy(1), 7, 100);
        println!(
            "init +-{s} x2<={x2_hi} len {len}: LQR {lqr_mean:.1} | zero {zero_mean:.1} | ratio {:.2}",
            zero_mean / lqr_mean
        );
    }
    Ok(())
}

//! Walks through the four benchmark environments: dimensions, reference
//! points, action bounds, and rollout statistics under the zero and random
//! policies.

use koopman_rl::environments::{
    EnvKind, EnvironmentSpec, Policy, RandomPolicy, ZeroPolicy, rollout,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn summarize(env: &EnvironmentSpec, policy: &dyn Policy, label: &str) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let episodes = rollout(env, policy, &mut rng, 20);
    let returns: Vec<f64> = episodes.iter().map(|(r, _)| *r).collect();
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    let max_state = episodes
        .iter()
        .flat_map(|(_, ts)| ts.iter())
        .map(|t| t.x_next.max_abs())
        .fold(0.0f64, f64::max);
    println!("  {label:>6}: mean return {mean:>12.2}, max |state| {max_state:>8.2}");
}

fn main() {
    for kind in EnvKind::all() {
        let env = EnvironmentSpec::new(kind);
        println!(
            "{} — {} states, {} actions, dt {}, {:?}, episode length {}",
            kind.name(),
            env.state_dim,
            env.action_dim,
            env.dt,
            env.integrator,
            env.episode_len
        );
        println!(
            "  reference point {:?}, action bounds [{}, {}]",
            env.x_e.as_slice(),
            env.action_low[0],
            env.action_high[0]
        );
        summarize(&env, &ZeroPolicy(env.action_dim), "zero");
        summarize(&env, &RandomPolicy::for_env(&env), "random");
    }
}

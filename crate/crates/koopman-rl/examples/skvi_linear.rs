//! End-to-end soft Koopman value iteration on the linear system: collect
//! random-agent data, fit the tensor, run 150 epochs of soft backups, and
//! compare the greedy policy's returns with LQR on the same seeds.

use koopman_rl::dictionaries::MonomialBasis;
use koopman_rl::environments::{EnvKind, EnvironmentSpec, Policy, RandomPolicy, rollout};
use koopman_rl::harness::symbolic_value;
use koopman_rl::koopman::fit_tensor;
use koopman_rl::lqr::LqrPolicy;
use koopman_rl::skvi::{ActionGrid, SkviParams, SkviPolicy, value_iteration};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mean_return(env: &EnvironmentSpec, p: &dyn Policy, seed: u64, episodes: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = rollout(env, p, &mut rng, episodes);
    eps.iter().map(|(r, _)| r).sum::<f64>() / episodes as f64
}

fn main() -> koopman_rl::Result<()> {
    let env = EnvironmentSpec::new(EnvKind::LinearSystem);
    let policy = RandomPolicy::for_env(&env);
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut samples = Vec::new();
    let mut states = Vec::new();
    for (_, ts) in rollout(&env, &policy, &mut rng, 30_000 / env.episode_len) {
        for t in ts {
            states.push(t.x.clone());
            samples.push((t.x, t.u, t.x_next));
        }
    }
    let tensor = fit_tensor(
        &samples,
        &MonomialBasis::new(env.state_dim, 2),
        &MonomialBasis::new(env.action_dim, 2),
        1e-6,
    )?;

    let grid = ActionGrid::for_env(&env, 101);
    let params = SkviParams::default();
    let mut vi_rng = ChaCha8Rng::seed_from_u64(101);
    let trained = value_iteration(&tensor, &env, &states, &grid, &params, &mut vi_rng)?;
    println!(
        "value iteration: {} epochs, final average Bellman error {:.3e}",
        trained.abe_history.len(),
        trained.abe_history.last().unwrap()
    );
    println!("{}", symbolic_value(&trained.weights.w, tensor.phi_basis()));

    let skvi_policy = SkviPolicy::new(
        &trained.weights.w,
        &tensor,
        grid,
        params.alpha,
        params.gamma,
        &env,
        true,
    )?;
    let lqr_policy = LqrPolicy::for_env(&env)?;
    let skvi_mean = mean_return(&env, &skvi_policy, 7, 10);
    let lqr_mean = mean_return(&env, &lqr_policy, 7, 10);
    println!(
        "10-episode mean return (same seeds): SKVI {skvi_mean:.2}, LQR {lqr_mean:.2} ({:+.1}% from LQR)",
        100.0 * (lqr_mean - skvi_mean) / lqr_mean.abs()
    );
    Ok(())
}

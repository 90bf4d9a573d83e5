//! Interpretability workflow: train SKVI on the fluid flow, print the value
//! function as a monomial expansion, sparsify it to a handful of dominant
//! terms, and measure how much policy performance the small form retains.

use koopman_rl::dictionaries::MonomialBasis;
use koopman_rl::environments::{EnvKind, EnvironmentSpec, Policy, RandomPolicy, rollout};
use koopman_rl::harness::{sparsify_keep, symbolic_value};
use koopman_rl::koopman::fit_tensor;
use koopman_rl::numerics::Vector;
use koopman_rl::skvi::{ActionGrid, SkviParams, SkviPolicy, value_iteration};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mean_return(env: &EnvironmentSpec, p: &dyn Policy, episodes: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let eps = rollout(env, p, &mut rng, episodes);
    eps.iter().map(|(r, _)| r).sum::<f64>() / episodes as f64
}

fn main() -> koopman_rl::Result<()> {
    let env = EnvironmentSpec::new(EnvKind::FluidFlow);
    let policy = RandomPolicy::for_env(&env);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut samples = Vec::new();
    let mut states = Vec::new();
    for (_, ts) in rollout(&env, &policy, &mut rng, 30_000 / env.episode_len) {
        for t in ts {
            states.push(t.x.clone());
            samples.push((t.x, t.u, t.x_next));
        }
    }
    let phi = MonomialBasis::new(env.state_dim, 2);
    let tensor = fit_tensor(
        &samples,
        &phi,
        &MonomialBasis::new(env.action_dim, 2),
        1e-6,
    )?;
    let grid = ActionGrid::for_env(&env, 101);
    let params = SkviParams::default();
    let mut vi_rng = ChaCha8Rng::seed_from_u64(43);
    let trained = value_iteration(&tensor, &env, &states, &grid, &params, &mut vi_rng)?;
    let w = &trained.weights.w;
    println!("{}", symbolic_value(w, &phi));

    let full_policy =
        SkviPolicy::new(w, &tensor, grid.clone(), params.alpha, params.gamma, &env, true)?;
    let full = mean_return(&env, &full_policy, 50);
    println!("full-weight policy mean return: {full:.1}");

    for pattern in [
        vec!["1", "y^2", "z^2"],
        vec!["1", "x^2", "y^2"],
        vec!["y^2"],
    ] {
        let keep: Vec<String> = pattern.iter().map(|s| s.to_string()).collect();
        let sparse_w: Vector = sparsify_keep(w, &phi, &keep)?;
        let sparse_policy = SkviPolicy::new(
            &sparse_w,
            &tensor,
            grid.clone(),
            params.alpha,
            params.gamma,
            &env,
            true,
        )?;
        let sparse = mean_return(&env, &sparse_policy, 50);
        println!(
            "keep {:<18}: {}  -> mean return {sparse:.1} ({:+.2}% from full)",
            format!("{{{}}}", pattern.join(", ")),
            symbolic_value(&sparse_w, &phi),
            100.0 * (full - sparse) / full.abs()
        );
    }
    Ok(())
}

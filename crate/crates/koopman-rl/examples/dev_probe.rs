//! Scratch probe for desk-scale feasibility (removed before release).

use koopman_rl::dictionaries::MonomialBasis;
use koopman_rl::environments::{EnvKind, EnvironmentSpec, Policy, RandomPolicy, ZeroPolicy, rollout};
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
    // --- criterion 5 probe: SKVI vs LQR on the linear system
    let env = EnvironmentSpec::new(EnvKind::LinearSystem);
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let random = RandomPolicy::for_env(&env);
    let mut data = Vec::new();
    let mut states = Vec::new();
    for (_, ts) in rollout(&env, &random, &mut rng, 30_000 / env.episode_len) {
        for t in ts {
            states.push(t.x.clone());
            data.push((t.x, t.u, t.x_next));
        }
    }
    let phi = MonomialBasis::new(2, 2);
    let psi = MonomialBasis::new(1, 2);
    let tensor = fit_tensor(&data, &phi, &psi, 1e-6)?;
    let lqr_policy = LqrPolicy::for_env(&env)?;
    let lqr_mean = mean_return(&env, &lqr_policy, 7, 10);
    // dataset state spread
    let mut max0: f64 = 0.0; let mut max1: f64 = 0.0;
    for x in &states { max0 = max0.max(x[0].abs()); max1 = max1.max(x[1].abs()); }
    println!("dataset extremes: |x0| max {max0:.2}, |x1| max {max1:.2}, n {}", states.len());
    for (iters, alpha) in [(50usize, 1.0f64), (100, 1.0), (150, 1.0), (300, 1.0), (600, 1.0)] {
        let grid = ActionGrid::for_env(&env, 101);
        let params = SkviParams { max_iters: iters, alpha, epsilon: 0.0, ..SkviParams::default() };
        let t0 = std::time::Instant::now();
        let mut vi_rng = ChaCha8Rng::seed_from_u64(101);
        let out = value_iteration(&tensor, &env, &states, &grid, &params, &mut vi_rng)?;
        let skvi_policy = SkviPolicy::new(&out.weights.w, &tensor, grid, params.alpha, params.gamma, &env, true)?;
        let skvi_mean = mean_return(&env, &skvi_policy, 7, 10);
        println!("iters {iters} alpha {alpha}: SKVI {skvi_mean:.2} vs LQR {lqr_mean:.2} (gap {:.1}%), last ABE {:.3e}, w {:?}  [{:?}]",
            100.0 * (lqr_mean - skvi_mean) / lqr_mean.abs(),
            out.abe_history.last().unwrap(),
            out.weights.w.as_slice().iter().map(|v| (v*100.0).round()/100.0).collect::<Vec<_>>(),
            t0.elapsed());
    }

    // --- criterion 6b probe: DoubleWell LQR vs zero policy
    let dw = EnvironmentSpec::new(EnvKind::DoubleWell);
    let dw_lqr = LqrPolicy::for_env(&dw)?;
    let lqr_dw = mean_return(&dw, &dw_lqr, 7, 100);
    let zero_dw = mean_return(&dw, &ZeroPolicy(1), 7, 100);
    println!("doublewell: LQR {lqr_dw:.1} vs zero-policy {zero_dw:.1} (ratio {:.2})",
        lqr_dw / zero_dw);

    // --- criterion 6a probe: FluidFlow LQR vs zero policy
    let ff = EnvironmentSpec::new(EnvKind::FluidFlow);
    let ff_lqr = LqrPolicy::for_env(&ff)?;
    let lqr_ff = mean_return(&ff, &ff_lqr, 7, 100);
    let zero_ff = mean_return(&ff, &ZeroPolicy(1), 7, 100);
    println!("fluidflow: LQR {lqr_ff:.1} vs zero-policy {zero_ff:.1}");
    Ok(())
}

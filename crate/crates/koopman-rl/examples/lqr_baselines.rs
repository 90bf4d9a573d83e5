//! Solves the LQR baseline for each benchmark environment, reports the
//! Riccati residual and feedback gain, measures the unclipped action range
//! over 10 evaluation episodes (the procedure that fixed the crate's default
//! action bounds), and prints mean episodic returns.

use koopman_rl::environments::{EnvKind, EnvironmentSpec, Policy, rollout};
use koopman_rl::lqr::{LqrPolicy, RiccatiMode, care_residual, dare_residual, linearize};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> koopman_rl::Result<()> {
    for kind in EnvKind::all() {
        let env = EnvironmentSpec::new(kind);
        let policy = LqrPolicy::for_env(&env)?;
        let sol = policy.solution();
        let (a, b) = linearize(&env)?;
        let residual = match sol.mode {
            RiccatiMode::Discrete => dare_residual(&a, &b, &env.q, &env.r, &sol.p)?,
            RiccatiMode::Continuous => care_residual(&a, &b, &env.q, &env.r, &sol.p)?,
        };
        println!("== {} ({:?})", kind.name(), sol.mode);
        println!("   gain K = {:?}", sol.k.as_slice());
        println!("   Riccati residual max|.| = {:.3e}", residual.max_abs());

        // action range of the unclipped LQR policy over 10 episodes
        let mut unbounded = env.clone();
        unbounded.action_low = vec![f64::NEG_INFINITY; env.action_dim];
        unbounded.action_high = vec![f64::INFINITY; env.action_dim];
        let free_policy = LqrPolicy::for_env(&unbounded)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (_, transitions) in rollout(&unbounded, &free_policy, &mut rng, 10) {
            for t in &transitions {
                lo = lo.min(t.u[0]);
                hi = hi.max(t.u[0]);
            }
        }
        println!("   unclipped action range over 10 episodes: [{lo:.4}, {hi:.4}]");
        println!(
            "   frozen bounds in spec: [{:.4}, {:.4}]",
            env.action_low[0], env.action_high[0]
        );

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let eps = rollout(&env, &policy as &dyn Policy, &mut rng, 10);
        let mean = eps.iter().map(|(r, _)| r).sum::<f64>() / eps.len() as f64;
        println!("   mean return over 10 episodes: {mean:.2}");
    }
    Ok(())
}

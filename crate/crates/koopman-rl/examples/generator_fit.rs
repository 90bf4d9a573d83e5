//! Estimates the Koopman generator tensor from continuous-time data:
//! first on a scalar exponential decay (recovering the decay rate as a
//! generator eigenvalue), then on the stochastic double well where the
//! diffusion contributes through the dictionary Hessians.

use koopman_rl::dictionaries::MonomialBasis;
use koopman_rl::environments::{EnvKind, EnvironmentSpec, RandomPolicy, rollout};
use koopman_rl::koopman::{GeneratorSample, fit_generator};
use koopman_rl::numerics::Vector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> koopman_rl::Result<()> {
    // dx/dt = -x sampled from its exact flow
    let dt: f64 = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let decay: Vec<GeneratorSample> = (0..500)
        .map(|_| {
            let x = rng.random_range(-2.0..2.0);
            (
                Vector::new(vec![x]),
                Vector::new(vec![0.0]),
                Vector::new(vec![x * (-dt).exp()]),
                dt,
            )
        })
        .collect();
    let phi = MonomialBasis::new(1, 1);
    let psi = MonomialBasis::new(1, 0);
    let generator = fit_generator(&decay, &phi, &psi, 1e-10)?;
    let l = generator.k_from_psi(&Vector::new(vec![1.0]));
    println!("scalar decay: L row for x = [{:.4}, {:.4}] (expect [0, -1])", l[(1, 0)], l[(1, 1)]);

    // stochastic double well under a random agent
    let env = EnvironmentSpec::new(EnvKind::DoubleWell);
    let policy = RandomPolicy::for_env(&env);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut data: Vec<GeneratorSample> = Vec::new();
    for (_, transitions) in rollout(&env, &policy, &mut rng, 60) {
        for t in transitions {
            data.push((t.x, t.u, t.x_next, env.dt));
        }
    }
    let phi = MonomialBasis::new(2, 2);
    let psi = MonomialBasis::new(1, 1);
    let generator = fit_generator(&data, &phi, &psi, 1e-6)?;
    let l0 = generator.k_from_psi(&psi.eval(&Vector::new(vec![0.0]))?);
    // generator action on x1 at u = 0 should look like -2 x1: row for the
    // linear monomial x1 has coefficient ~ -2 on itself
    let names = ["1", "x0", "x1", "x0^2", "x0*x1", "x1^2"];
    println!("double well, L^0 rows (dictionary {names:?}):");
    for i in 0..generator.d_x() {
        let row: Vec<String> = (0..generator.d_x())
            .map(|j| format!("{:+.2}", l0[(i, j)]))
            .collect();
        println!("  L[{}] ({:>5}): {}", i, names[i], row.join(" "));
    }
    println!(
        "x1 drift read-out: d/dt x1 ~ {:+.2} * x1 (expect -2)",
        l0[(2, 2)]
    );
    Ok(())
}

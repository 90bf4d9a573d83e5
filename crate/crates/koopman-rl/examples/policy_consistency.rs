//! Checks the fixed-action/closed-loop operator identity: at any state the
//! policy visits, `K^{pi(x)} phi(x)` from the control-parameterized tensor
//! must match `K^pi phi(x)` from an autonomous fit on the same trajectory
//! data — exactly when both models are exact, approximately otherwise.

use koopman_rl::dictionaries::MonomialBasis;
use koopman_rl::environments::{EnvKind, EnvironmentSpec, FnPolicy, rollout};
use koopman_rl::koopman::{fit_tensor, policy_consistency_on};
use koopman_rl::numerics::Vector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> koopman_rl::Result<()> {
    let env = EnvironmentSpec::new(EnvKind::LinearSystem);
    let feedback = FnPolicy(|x: &Vector, _: &mut dyn rand::Rng| {
        Vector::new(vec![-0.4 * x[0] - 0.9 * x[1]])
    });
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut dataset = Vec::new();
    for (_, ts) in rollout(&env, &feedback, &mut rng, 10) {
        for t in ts {
            dataset.push((t.x, t.u, t.x_next));
        }
    }

    // exactly representable: degree-1 dictionaries on the linear system
    let tensor = fit_tensor(
        &dataset,
        &MonomialBasis::new(2, 1),
        &MonomialBasis::new(1, 1),
        1e-7,
    )?;
    let gap = policy_consistency_on(&tensor, &dataset, 1e-7, 500)?;
    println!("linear system, linear feedback, degree-1 dictionaries: max gap {gap:.3e}");

    // misspecified dictionaries on a nonlinear system: the gap is a model
    // diagnostic, not an error
    let env = EnvironmentSpec::new(EnvKind::DoubleWell);
    let feedback = FnPolicy(|x: &Vector, _: &mut dyn rand::Rng| Vector::new(vec![-2.0 * x[0]]));
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut dataset = Vec::new();
    for (_, ts) in rollout(&env, &feedback, &mut rng, 10) {
        for t in ts {
            dataset.push((t.x, t.u, t.x_next));
        }
    }
    let tensor = fit_tensor(
        &dataset,
        &MonomialBasis::new(2, 1),
        &MonomialBasis::new(1, 1),
        1e-6,
    )?;
    let gap = policy_consistency_on(&tensor, &dataset, 1e-6, 500)?;
    println!("double well, degree-1 dictionaries (misspecified): max gap {gap:.3e}");
    Ok(())
}

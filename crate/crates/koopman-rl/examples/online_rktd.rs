//! Streams transitions one at a time through the recursive tensor estimator
//! and checks it tracks the batch ridge regression exactly.

use koopman_rl::dictionaries::MonomialBasis;
use koopman_rl::environments::{EnvKind, EnvironmentSpec, RandomPolicy, rollout};
use koopman_rl::koopman::{RktdState, Sample, fit_tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> koopman_rl::Result<()> {
    let env = EnvironmentSpec::new(EnvKind::DoubleWell);
    let policy = RandomPolicy::for_env(&env);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut stream: Vec<Sample> = Vec::new();
    for (_, transitions) in rollout(&env, &policy, &mut rng, 2) {
        for t in transitions {
            stream.push((t.x, t.u, t.x_next));
        }
    }

    let phi = MonomialBasis::new(env.state_dim, 2);
    let psi = MonomialBasis::new(env.action_dim, 1);
    let delta = 1e-3;
    let mut online = RktdState::new(phi.clone(), psi.clone(), delta);

    for (i, (x, u, x_next)) in stream.iter().enumerate() {
        online.update(x, u, x_next)?;
        if [0, 9, 99, stream.len() - 1].contains(&i) {
            let batch = fit_tensor(&stream[..=i], &phi, &psi, delta)?;
            let gap = online
                .tensor_matrix()
                .sub(batch.matrix())
                .frobenius_norm();
            println!(
                "after {:>3} samples: ||M_online - M_batch||_F = {gap:.3e}",
                i + 1
            );
        }
    }
    let tensor = online.tensor()?;
    println!(
        "final streaming tensor: {} samples, d_x {}, d_u {}",
        tensor.sample_count(),
        tensor.d_x(),
        tensor.d_u()
    );
    Ok(())
}

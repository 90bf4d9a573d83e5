//! Koopman tensor estimation for controlled systems.
//!
//! The tensor `T(i, j, z)` maps state features `phi(x)` and control features
//! `psi(u)` to next-step state features: slicing against `psi(u)` along the
//! third index yields the action-conditioned operator
//! `K^u[i,j] = sum_z T(i,j,z) psi(u)[z]` with `K^u phi(x) ~ phi(x')`.
//! Estimation is a single linear regression: with `M` the flattening of the
//! tensor (`T(i,j,z) = M[i, z*d_x + j]`, Fortran-style over each slice),
//! `K^u phi(x) = M (psi(u) ⊗ phi(x))` and `M` minimizes the averaged
//! feature-prediction error over the data.
//!
//! Also provided: a recursive (online) estimator equivalent to batch ridge
//! regression, a generator-tensor estimator for continuous-time data, and a
//! diagnostic comparing fixed-action operators against the operator of the
//! closed policy loop.

use serde::{Deserialize, Serialize};

use crate::dictionaries::MonomialBasis;
use crate::environments::{EnvironmentSpec, Policy, rollout};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector, kron_into, lstsq, sherman_morrison_update};

/// One interaction record `(x, u, x_next)`.
pub type Sample = (Vector, Vector, Vector);

/// Finite-dimensional approximation of the control-parameterized Koopman
/// operator family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KoopmanTensor {
    d_x: usize,
    d_u: usize,
    m: Matrix,
    phi_basis: MonomialBasis,
    psi_basis: MonomialBasis,
    ridge: f64,
    sample_count: usize,
}

impl KoopmanTensor {
    /// Assembles a tensor from a flattened matrix; used by the fitting
    /// routines and by model deserialization.
    pub fn from_matrix(
        m: Matrix,
        phi_basis: MonomialBasis,
        psi_basis: MonomialBasis,
        ridge: f64,
        sample_count: usize,
    ) -> Result<Self> {
        let d_x = phi_basis.dim();
        let d_u = psi_basis.dim();
        if m.rows() != d_x || m.cols() != d_x * d_u {
            return Err(Error::DimensionMismatch(format!(
                "tensor matrix is {}x{}, expected {}x{}",
                m.rows(),
                m.cols(),
                d_x,
                d_x * d_u
            )));
        }
        Ok(KoopmanTensor {
            d_x,
            d_u,
            m,
            phi_basis,
            psi_basis,
            ridge,
            sample_count,
        })
    }

    pub fn d_x(&self) -> usize {
        self.d_x
    }

    pub fn d_u(&self) -> usize {
        self.d_u
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn phi_basis(&self) -> &MonomialBasis {
        &self.phi_basis
    }

    pub fn psi_basis(&self) -> &MonomialBasis {
        &self.psi_basis
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    /// Tensor entry `T(i, j, z) = M[i, z*d_x + j]`.
    pub fn entry(&self, i: usize, j: usize, z: usize) -> f64 {
        self.m[(i, z * self.d_x + j)]
    }

    /// The action-conditioned operator `K^u`: the tensor-vector product of
    /// `T` with `psi(u)` along the third index.
    pub fn k_u(&self, u: &Vector) -> Result<Matrix> {
        let psi = self.psi_basis.eval(u)?;
        Ok(self.k_from_psi(&psi))
    }

    /// `K` built from already-evaluated control features.
    pub fn k_from_psi(&self, psi: &Vector) -> Matrix {
        debug_assert_eq!(psi.dim(), self.d_u);
        let mut k = Matrix::zeros(self.d_x, self.d_x);
        for i in 0..self.d_x {
            let mrow = self.m.row(i);
            let krow = k.row_mut(i);
            for z in 0..self.d_u {
                let pz = psi[z];
                if pz == 0.0 {
                    continue;
                }
                let block = &mrow[z * self.d_x..(z + 1) * self.d_x];
                for (kj, bj) in krow.iter_mut().zip(block) {
                    *kj += pz * bj;
                }
            }
        }
        k
    }

    /// Predicted next-step state features `K^u phi(x) = M (psi(u) ⊗ phi(x))`.
    pub fn predict_phi(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        let phi = self.phi_basis.eval(x)?;
        let psi = self.psi_basis.eval(u)?;
        let mut joint = vec![0.0; self.d_x * self.d_u];
        kron_into(&psi, &phi, &mut joint);
        Ok(self.m.matvec(&Vector::new(joint)))
    }

    /// Predicted next raw state, read out of the degree-1 feature entries.
    /// Requires `phi` to have degree >= 1.
    pub fn predict_state(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        let n = self.phi_basis.input_dim();
        assert!(
            self.phi_basis.max_degree() >= 1,
            "state read-out needs linear dictionary terms"
        );
        let phi_next = self.predict_phi(x, u)?;
        // canonical order puts the linear monomials at indices 1..=n
        Ok(Vector::new((0..n).map(|j| phi_next[1 + j]).collect()))
    }

    /// Projects value weights through the tensor: returns `G` (`d_u` rows,
    /// `d_x` columns) such that `w^T K^u phi(x) = sum_z psi(u)[z] *
    /// dot(G[z], phi(x))`. Lets callers score many `(x, u)` pairs without
    /// rebuilding `K^u`.
    pub fn project_weights(&self, w: &Vector) -> Matrix {
        debug_assert_eq!(w.dim(), self.d_x);
        let mut g = Matrix::zeros(self.d_u, self.d_x);
        for i in 0..self.d_x {
            let wi = w[i];
            if wi == 0.0 {
                continue;
            }
            let mrow = self.m.row(i);
            for z in 0..self.d_u {
                let block = &mrow[z * self.d_x..(z + 1) * self.d_x];
                let grow = g.row_mut(z);
                for (gj, bj) in grow.iter_mut().zip(block) {
                    *gj += wi * bj;
                }
            }
        }
        g
    }
}

/// Evaluates the projected form produced by [`KoopmanTensor::project_weights`].
pub fn projected_value(g: &Matrix, psi: &Vector, phi: &Vector) -> f64 {
    debug_assert_eq!(g.rows(), psi.dim());
    let mut total = 0.0;
    for z in 0..g.rows() {
        let pz = psi[z];
        if pz == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for (gj, pj) in g.row(z).iter().zip(phi.as_slice()) {
            acc += gj * pj;
        }
        total += pz * acc;
    }
    total
}

/// Fits the Koopman tensor by ridge regression of `phi(x')` on
/// `psi(u) ⊗ phi(x)` over the dataset.
pub fn fit_tensor(
    dataset: &[Sample],
    phi_basis: &MonomialBasis,
    psi_basis: &MonomialBasis,
    ridge: f64,
) -> Result<KoopmanTensor> {
    if dataset.is_empty() {
        return Err(Error::InsufficientData { have: 0, need: 1 });
    }
    let d_x = phi_basis.dim();
    let d_u = psi_basis.dim();
    let n = dataset.len();
    let mut features = Matrix::zeros(n, d_x * d_u);
    let mut targets = Matrix::zeros(n, d_x);
    let mut phi = Vector::zeros(d_x);
    let mut psi = Vector::zeros(d_u);
    for (row, (x, u, x_next)) in dataset.iter().enumerate() {
        check_sample_dims(phi_basis, psi_basis, x, u)?;
        self_eval(phi_basis, x, &mut phi)?;
        self_eval(psi_basis, u, &mut psi)?;
        kron_into(&psi, &phi, features.row_mut(row));
        self_eval(phi_basis, x_next, &mut phi)?;
        targets.row_mut(row).copy_from_slice(phi.as_slice());
    }
    let w = lstsq(&features, &targets, ridge)?;
    KoopmanTensor::from_matrix(w.transpose(), phi_basis.clone(), psi_basis.clone(), ridge, n)
}

fn self_eval(basis: &MonomialBasis, z: &Vector, out: &mut Vector) -> Result<()> {
    if z.dim() != basis.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "sample has {} entries, basis expects {}",
            z.dim(),
            basis.input_dim()
        )));
    }
    basis.eval_into(z, out);
    Ok(())
}

fn check_sample_dims(
    phi_basis: &MonomialBasis,
    psi_basis: &MonomialBasis,
    x: &Vector,
    u: &Vector,
) -> Result<()> {
    if x.dim() != phi_basis.input_dim() || u.dim() != psi_basis.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "sample dims ({}, {}) do not match basis dims ({}, {})",
            x.dim(),
            u.dim(),
            phi_basis.input_dim(),
            psi_basis.input_dim()
        )));
    }
    Ok(())
}

/// Streaming tensor estimator: per-sample rank-one recursive least squares.
///
/// After `n` updates with prior weight `delta`, the reconstructed matrix
/// equals the batch ridge fit with `ridge = delta` on the same samples.
#[derive(Clone, Debug)]
pub struct RktdState {
    z: Matrix,
    inv_v: Matrix,
    delta: f64,
    samples_seen: usize,
    phi_basis: MonomialBasis,
    psi_basis: MonomialBasis,
}

impl RktdState {
    pub fn new(phi_basis: MonomialBasis, psi_basis: MonomialBasis, delta: f64) -> Self {
        assert!(delta > 0.0, "rKTD prior weight must be positive");
        let d_x = phi_basis.dim();
        let k = d_x * psi_basis.dim();
        RktdState {
            z: Matrix::zeros(d_x, k),
            inv_v: Matrix::diagonal(k, 1.0 / delta),
            delta,
            samples_seen: 0,
            phi_basis,
            psi_basis,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn samples_seen(&self) -> usize {
        self.samples_seen
    }

    /// Core rank-one update on pre-evaluated features: `v = psi(u) ⊗ phi(x)`
    /// and `phi_next = phi(x')`.
    pub fn update_features(&mut self, v: &Vector, phi_next: &Vector) {
        debug_assert_eq!(v.dim(), self.inv_v.rows());
        debug_assert_eq!(phi_next.dim(), self.z.rows());
        for i in 0..self.z.rows() {
            let pi = phi_next[i];
            if pi == 0.0 {
                continue;
            }
            let row = self.z.row_mut(i);
            for (zj, vj) in row.iter_mut().zip(v.as_slice()) {
                *zj += pi * vj;
            }
        }
        self.inv_v = sherman_morrison_update(&self.inv_v, v);
        self.samples_seen += 1;
    }

    /// Applies one incoming `(x, u, x_next)` tuple.
    pub fn update(&mut self, x: &Vector, u: &Vector, x_next: &Vector) -> Result<()> {
        check_sample_dims(&self.phi_basis, &self.psi_basis, x, u)?;
        let phi = self.phi_basis.eval(x)?;
        let psi = self.psi_basis.eval(u)?;
        let mut v = vec![0.0; phi.dim() * psi.dim()];
        kron_into(&psi, &phi, &mut v);
        let phi_next = self.phi_basis.eval(x_next)?;
        self.update_features(&Vector::new(v), &phi_next);
        Ok(())
    }

    /// Current estimate `M_n = z_n * inv_v_n` (zero before any samples).
    pub fn tensor_matrix(&self) -> Matrix {
        self.z.matmul(&self.inv_v)
    }

    /// Packages the running estimate as a [`KoopmanTensor`].
    pub fn tensor(&self) -> Result<KoopmanTensor> {
        KoopmanTensor::from_matrix(
            self.tensor_matrix(),
            self.phi_basis.clone(),
            self.psi_basis.clone(),
            self.delta,
            self.samples_seen,
        )
    }
}

/// One continuous-time interaction record `(x, u, x_next, dt)`.
pub type GeneratorSample = (Vector, Vector, Vector, f64);

/// Fits the generator tensor `L` for continuous-time (possibly stochastic)
/// data: regression of the estimated generator action
/// `mu_hat . grad(phi_k) + 0.5 a_hat : hess(phi_k)` on `psi(u) ⊗ phi(x)`,
/// with `mu_hat = dx/dt` and `a_hat = dx dx^T / dt` per sample, using
/// analytic monomial gradients and Hessians.
pub fn fit_generator(
    dataset: &[GeneratorSample],
    phi_basis: &MonomialBasis,
    psi_basis: &MonomialBasis,
    ridge: f64,
) -> Result<KoopmanTensor> {
    if dataset.is_empty() {
        return Err(Error::InsufficientData { have: 0, need: 1 });
    }
    let d_x = phi_basis.dim();
    let d_u = psi_basis.dim();
    let n = dataset.len();
    let state_dim = phi_basis.input_dim();
    let mut features = Matrix::zeros(n, d_x * d_u);
    let mut targets = Matrix::zeros(n, d_x);
    let mut phi = Vector::zeros(d_x);
    let mut psi = Vector::zeros(d_u);
    for (row, (x, u, x_next, dt)) in dataset.iter().enumerate() {
        check_sample_dims(phi_basis, psi_basis, x, u)?;
        if *dt <= 0.0 {
            return Err(Error::Config("generator samples need dt > 0".into()));
        }
        self_eval(phi_basis, x, &mut phi)?;
        self_eval(psi_basis, u, &mut psi)?;
        kron_into(&psi, &phi, features.row_mut(row));
        let dx = x_next.sub(x);
        let mu_hat = dx.scale(1.0 / dt);
        // a_hat = dx dx^T / dt
        let trow = targets.row_mut(row);
        for k in 0..d_x {
            let grad = phi_basis.gradient(k, x);
            let mut value = mu_hat.dot(&grad);
            let hess = phi_basis.hessian(k, x);
            let mut quad = 0.0;
            for a in 0..state_dim {
                for b in 0..state_dim {
                    quad += dx[a] * dx[b] * hess[(a, b)];
                }
            }
            value += 0.5 * quad / dt;
            trow[k] = value;
        }
    }
    let w = lstsq(&features, &targets, ridge)?;
    KoopmanTensor::from_matrix(w.transpose(), phi_basis.clone(), psi_basis.clone(), ridge, n)
}

/// Maximum gap `max_x ||K^{pi(x)} phi(x) - K^pi phi(x)||_inf` between the
/// fixed-action operators of `tensor` and an autonomous operator fitted to
/// the same policy-generated transitions. The two agree at each sampled
/// point when both models are exact there.
pub fn policy_consistency_on(
    tensor: &KoopmanTensor,
    dataset: &[Sample],
    ridge: f64,
    n_points: usize,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::InsufficientData { have: 0, need: 1 });
    }
    // autonomous fit: a degree-0 control dictionary makes psi(u) == [1]
    let psi_const = MonomialBasis::new(tensor.psi_basis().input_dim(), 0);
    let pi_tensor = fit_tensor(dataset, tensor.phi_basis(), &psi_const, ridge)?;
    let k_pi = pi_tensor.k_from_psi(&Vector::new(vec![1.0]));
    let mut max_gap = 0.0f64;
    for (x, u, _) in dataset.iter().take(n_points) {
        let phi = tensor.phi_basis().eval(x)?;
        let through_u = tensor.k_u(u)?.matvec(&phi);
        let through_pi = k_pi.matvec(&phi);
        max_gap = max_gap.max(through_u.sub(&through_pi).max_abs());
    }
    Ok(max_gap)
}

/// Rolls out `policy`, fits the autonomous operator on the collected data,
/// and reports the consistency gap over the first `n_points` visited states.
pub fn policy_consistency(
    tensor: &KoopmanTensor,
    policy: &dyn Policy,
    env: &EnvironmentSpec,
    rng: &mut dyn rand::Rng,
    n_points: usize,
) -> Result<f64> {
    let episodes = n_points.div_ceil(env.episode_len).max(1);
    let mut dataset = Vec::with_capacity(episodes * env.episode_len);
    for (_, transitions) in rollout(env, policy, rng, episodes) {
        for t in transitions {
            dataset.push((t.x, t.u, t.x_next));
        }
    }
    policy_consistency_on(tensor, &dataset, tensor.ridge(), n_points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{EnvKind, FnPolicy, RandomPolicy};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// x' = 0.9 x + 0.1 u, exactly representable with degree-1 dictionaries.
    fn scalar_linear_dataset(n: usize, seed: u64) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x = rng.random_range(-1.0..1.0);
                let u = rng.random_range(-1.0..1.0);
                (
                    Vector::new(vec![x]),
                    Vector::new(vec![u]),
                    Vector::new(vec![0.9 * x + 0.1 * u]),
                )
            })
            .collect()
    }

    #[test]
    fn fit_exactly_representable_scalar_system() {
        let phi = MonomialBasis::new(1, 1);
        let psi = MonomialBasis::new(1, 1);
        let data = scalar_linear_dataset(500, 1);
        let tensor = fit_tensor(&data, &phi, &psi, 0.0).unwrap();
        let mut max_err = 0.0f64;
        for (x, u, x_next) in &data {
            let predicted = tensor.predict_phi(x, u).unwrap();
            let actual = phi.eval(x_next).unwrap();
            max_err = max_err.max(predicted.sub(&actual).max_abs());
        }
        assert!(max_err < 1e-8, "max phi prediction error {max_err}");
    }

    #[test]
    fn fit_recovers_planted_tensor() {
        let phi = MonomialBasis::new(1, 1); // [1, x]
        let psi = MonomialBasis::new(1, 1); // [1, u]
        // constant-preserving first row; random second row
        let planted = Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.3, 0.8, -0.5, 0.25],
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<Sample> = (0..500)
            .map(|_| {
                let x = Vector::new(vec![rng.random_range(-1.0..1.0)]);
                let u = Vector::new(vec![rng.random_range(-1.0..1.0)]);
                let joint = crate::dictionaries::joint_feature(&phi, &psi, &x, &u).unwrap();
                let x_next = Vector::new(vec![planted.matvec(&joint)[1]]);
                (x, u, x_next)
            })
            .collect();
        let tensor = fit_tensor(&data, &phi, &psi, 0.0).unwrap();
        let err = tensor.matrix().sub(&planted).max_abs();
        assert!(err < 1e-8, "recovery error {err}");
    }

    #[test]
    fn fit_single_repeated_sample_with_ridge() {
        let phi = MonomialBasis::new(1, 1);
        let psi = MonomialBasis::new(1, 1);
        let sample = (
            Vector::new(vec![0.5]),
            Vector::new(vec![0.1]),
            Vector::new(vec![0.45]),
        );
        let data = vec![sample.clone(), sample.clone(), sample];
        let tensor = fit_tensor(&data, &phi, &psi, 1e-4).unwrap();
        assert!(tensor.matrix().is_finite());
    }

    #[test]
    fn k_u_with_constant_control_dictionary_ignores_u() {
        let phi = MonomialBasis::new(1, 2);
        let psi = MonomialBasis::new(1, 0);
        let data = scalar_linear_dataset(200, 3);
        let tensor = fit_tensor(&data, &phi, &psi, 1e-9).unwrap();
        let k0 = tensor.k_u(&Vector::new(vec![0.0])).unwrap();
        let k7 = tensor.k_u(&Vector::new(vec![7.0])).unwrap();
        assert_eq!(k0, k7);
        assert_eq!(k0, tensor.k_from_psi(&Vector::new(vec![1.0])));
    }

    #[test]
    fn k_u_matches_flattened_product() {
        let phi = MonomialBasis::new(2, 2);
        let psi = MonomialBasis::new(1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<Sample> = (0..300)
            .map(|_| {
                let x = Vector::new(vec![
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]);
                let u = Vector::new(vec![rng.random_range(-1.0..1.0)]);
                let x_next = Vector::new(vec![
                    0.8 * x[0] + 0.1 * x[1] * u[0],
                    x[1] - 0.2 * u[0],
                ]);
                (x, u, x_next)
            })
            .collect();
        let tensor = fit_tensor(&data, &phi, &psi, 1e-8).unwrap();
        let mut max_gap = 0.0f64;
        for _ in 0..100 {
            let x = Vector::new(vec![
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ]);
            let u = Vector::new(vec![rng.random_range(-2.0..2.0)]);
            let via_k = tensor.k_u(&u).unwrap().matvec(&phi.eval(&x).unwrap());
            let via_m = tensor.predict_phi(&x, &u).unwrap();
            max_gap = max_gap.max(via_k.sub(&via_m).max_abs());
        }
        assert!(max_gap < 1e-12, "index-map inconsistency {max_gap}");
    }

    #[test]
    fn k_zero_action_recovers_scalar_dynamics() {
        let phi = MonomialBasis::new(1, 1);
        let psi = MonomialBasis::new(1, 1);
        let data = scalar_linear_dataset(500, 5);
        let tensor = fit_tensor(&data, &phi, &psi, 0.0).unwrap();
        let k0 = tensor.k_u(&Vector::new(vec![0.0])).unwrap();
        let expected = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.9]]);
        assert!(k0.sub(&expected).max_abs() < 1e-8, "K^0 = {k0:?}");
    }

    #[test]
    fn reshape_roundtrip_is_identity() {
        let phi = MonomialBasis::new(1, 1);
        let psi = MonomialBasis::new(1, 1);
        let data = scalar_linear_dataset(100, 6);
        let tensor = fit_tensor(&data, &phi, &psi, 1e-8).unwrap();
        let mut rebuilt = Matrix::zeros(tensor.d_x(), tensor.d_x() * tensor.d_u());
        for i in 0..tensor.d_x() {
            for j in 0..tensor.d_x() {
                for z in 0..tensor.d_u() {
                    rebuilt[(i, z * tensor.d_x() + j)] = tensor.entry(i, j, z);
                }
            }
        }
        assert_eq!(&rebuilt, tensor.matrix());
    }

    #[test]
    fn k_from_psi_is_linear_in_psi() {
        let phi = MonomialBasis::new(1, 2);
        let psi = MonomialBasis::new(1, 2);
        let data = scalar_linear_dataset(300, 7);
        let tensor = fit_tensor(&data, &phi, &psi, 1e-8).unwrap();
        let p1 = Vector::new(vec![1.0, 0.3, -0.2]);
        let p2 = Vector::new(vec![0.5, -1.0, 2.0]);
        let combined = p1.scale(2.0).add(&p2.scale(-0.75));
        let lhs = tensor.k_from_psi(&combined);
        let rhs = tensor
            .k_from_psi(&p1)
            .scale(2.0)
            .add(&tensor.k_from_psi(&p2).scale(-0.75));
        let scale = rhs.max_abs().max(1.0);
        assert!(lhs.sub(&rhs).max_abs() < 1e-14 * scale);
    }

    #[test]
    fn predicted_constant_feature_stays_one() {
        let phi = MonomialBasis::new(1, 1);
        let psi = MonomialBasis::new(1, 1);
        let data = scalar_linear_dataset(500, 8);
        let tensor = fit_tensor(&data, &phi, &psi, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let x = Vector::new(vec![rng.random_range(-1.0..1.0)]);
            let u = Vector::new(vec![rng.random_range(-1.0..1.0)]);
            let predicted = tensor.predict_phi(&x, &u).unwrap();
            assert!((predicted[0] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn fluid_flow_holdout_prediction_under_five_percent() {
        let spec = EnvironmentSpec::new(EnvKind::FluidFlow);
        let policy = RandomPolicy::for_env(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let episodes = 30_000 / spec.episode_len;
        let mut samples: Vec<Sample> = Vec::new();
        for (_, transitions) in rollout(&spec, &policy, &mut rng, episodes) {
            for t in transitions {
                samples.push((t.x, t.u, t.x_next));
            }
        }
        let split = samples.len() * 9 / 10;
        let (train, holdout) = samples.split_at(split);
        let phi = MonomialBasis::new(3, 2);
        let psi = MonomialBasis::new(1, 2);
        let tensor = fit_tensor(train, &phi, &psi, 1e-6).unwrap();
        let mut err_sq = 0.0;
        let mut ref_sq = 0.0;
        for (x, u, x_next) in holdout {
            let predicted = tensor.predict_state(x, u).unwrap();
            let diff = predicted.sub(x_next);
            err_sq += diff.dot(&diff);
            ref_sq += x_next.dot(x_next);
        }
        let rel = (err_sq / ref_sq).sqrt();
        assert!(rel < 0.05, "holdout relative state error {rel}");
    }

    #[test]
    fn rktd_scalar_single_sample() {
        // raw features phi(x) = x, psi(u) = 1: sample (x=1, x'=2) gives
        // v = 1, phi' = 2, and the ridge formula 2/(1+1) = 1
        let mut state = RktdState {
            z: Matrix::zeros(1, 1),
            inv_v: Matrix::diagonal(1, 1.0),
            delta: 1.0,
            samples_seen: 0,
            phi_basis: MonomialBasis::new(1, 0),
            psi_basis: MonomialBasis::new(1, 0),
        };
        // zero samples: estimate is the zero matrix by convention
        assert_eq!(state.tensor_matrix().max_abs(), 0.0);
        state.update_features(&Vector::new(vec![1.0]), &Vector::new(vec![2.0]));
        assert_eq!(state.tensor_matrix()[(0, 0)], 1.0);
    }

    #[test]
    fn rktd_matches_batch_ridge() {
        let phi = MonomialBasis::new(2, 2);
        let psi = MonomialBasis::new(1, 1);
        let delta = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<Sample> = (0..60)
            .map(|_| {
                let x = Vector::new(vec![
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]);
                let u = Vector::new(vec![rng.random_range(-1.0..1.0)]);
                let x_next = Vector::new(vec![
                    0.9 * x[0] + 0.05 * u[0],
                    -0.3 * x[1] * x[0] + 0.1 * u[0],
                ]);
                (x, u, x_next)
            })
            .collect();
        let mut state = RktdState::new(phi.clone(), psi.clone(), delta);
        for (i, (x, u, x_next)) in data.iter().enumerate() {
            state.update(x, u, x_next).unwrap();
            if i == 0 || i == 9 || i == data.len() - 1 {
                let batch = fit_tensor(&data[..=i], &phi, &psi, delta).unwrap();
                let gap = state
                    .tensor_matrix()
                    .sub(batch.matrix())
                    .frobenius_norm();
                assert!(gap < 1e-6, "gap {gap} after {} samples", i + 1);
            }
        }
        assert_eq!(state.samples_seen(), data.len());
    }

    #[test]
    fn generator_recovers_linear_decay_rate() {
        // dx/dt = -x sampled from the exact flow x' = x e^{-dt}
        let phi = MonomialBasis::new(1, 1); // [1, x]
        let psi = MonomialBasis::new(1, 0);
        let dt = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let data: Vec<GeneratorSample> = (0..400)
            .map(|_| {
                let x = rng.random_range(-2.0..2.0);
                (
                    Vector::new(vec![x]),
                    Vector::new(vec![0.0]),
                    Vector::new(vec![x * (-dt as f64).exp()]),
                    dt,
                )
            })
            .collect();
        let generator = fit_generator(&data, &phi, &psi, 1e-10).unwrap();
        let l = generator.k_from_psi(&Vector::new(vec![1.0]));
        // row acting on the linear monomial: L x = -x
        assert!((l[(1, 1)] + 1.0).abs() < 2e-2, "decay rate {}", l[(1, 1)]);
        assert!(l[(1, 0)].abs() < 2e-2);
        // generator kills constants
        assert!(l[(0, 0)].abs() < 1e-2 && l[(0, 1)].abs() < 1e-2);
        // a_hat is O(dt) for deterministic data
        let max_drift = 2.0;
        for (x, _, x_next, dt) in &data {
            let dx = x_next[0] - x[0];
            let a_hat = dx * dx / dt;
            assert!(a_hat < 10.0 * dt * max_drift * max_drift);
        }
    }

    #[test]
    fn policy_consistency_constant_policy() {
        // constant policy on the linear system: affine closed loop, exactly
        // representable, so K^{pi(x)} phi and K^pi phi agree on the data
        let spec = EnvironmentSpec::new(EnvKind::LinearSystem);
        let policy = FnPolicy(|_x: &Vector, _rng: &mut dyn rand::Rng| Vector::new(vec![0.37]));
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut dataset: Vec<Sample> = Vec::new();
        for (_, ts) in rollout(&spec, &policy, &mut rng, 4) {
            for t in ts {
                dataset.push((t.x, t.u, t.x_next));
            }
        }
        let phi = MonomialBasis::new(2, 1);
        let psi = MonomialBasis::new(1, 1);
        let tensor = fit_tensor(&dataset, &phi, &psi, 1e-7).unwrap();
        let gap = policy_consistency_on(&tensor, &dataset, 1e-7, 200).unwrap();
        assert!(gap < 1e-6, "constant-policy gap {gap}");
    }

    #[test]
    fn policy_consistency_linear_feedback_policy() {
        let spec = EnvironmentSpec::new(EnvKind::LinearSystem);
        let policy = FnPolicy(|x: &Vector, _rng: &mut dyn rand::Rng| {
            Vector::new(vec![-0.4 * x[0] - 0.9 * x[1]])
        });
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut dataset: Vec<Sample> = Vec::new();
        for (_, ts) in rollout(&spec, &policy, &mut rng, 4) {
            for t in ts {
                dataset.push((t.x, t.u, t.x_next));
            }
        }
        let phi = MonomialBasis::new(2, 1);
        let psi = MonomialBasis::new(1, 1);
        let tensor = fit_tensor(&dataset, &phi, &psi, 1e-7).unwrap();
        let gap = policy_consistency_on(&tensor, &dataset, 1e-7, 200).unwrap();
        assert!(gap < 1e-6, "linear-policy gap {gap}");
    }

    #[test]
    fn policy_consistency_reports_gap_on_undersampled_data() {
        let spec = EnvironmentSpec::new(EnvKind::DoubleWell);
        let policy = RandomPolicy::for_env(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let phi = MonomialBasis::new(2, 2);
        let psi = MonomialBasis::new(1, 2);
        let mut dataset: Vec<Sample> = Vec::new();
        for (_, ts) in rollout(&spec, &policy, &mut rng, 1) {
            for t in ts.into_iter().take(40) {
                dataset.push((t.x, t.u, t.x_next));
            }
        }
        let tensor = fit_tensor(&dataset, &phi, &psi, 1e-4).unwrap();
        let gap = policy_consistency_on(&tensor, &dataset, 1e-4, 40).unwrap();
        assert!(gap.is_finite());
    }

    #[test]
    fn projected_weights_match_direct_evaluation() {
        let phi = MonomialBasis::new(2, 2);
        let psi = MonomialBasis::new(1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let data: Vec<Sample> = (0..200)
            .map(|_| {
                let x = Vector::new(vec![
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]);
                let u = Vector::new(vec![rng.random_range(-1.0..1.0)]);
                let x_next = Vector::new(vec![0.5 * x[0] + u[0] * 0.2, 0.8 * x[1]]);
                (x, u, x_next)
            })
            .collect();
        let tensor = fit_tensor(&data, &phi, &psi, 1e-8).unwrap();
        let w = Vector::new((0..tensor.d_x()).map(|i| (i as f64) * 0.3 - 1.0).collect());
        let g = tensor.project_weights(&w);
        for _ in 0..50 {
            let x = Vector::new(vec![
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]);
            let u = Vector::new(vec![rng.random_range(-1.0..1.0)]);
            let direct = w.dot(&tensor.k_u(&u).unwrap().matvec(&phi.eval(&x).unwrap()));
            let projected = projected_value(
                &g,
                &psi.eval(&u).unwrap(),
                &phi.eval(&x).unwrap(),
            );
            assert!((direct - projected).abs() < 1e-10 * direct.abs().max(1.0));
        }
    }
}

//! Monomial feature maps on states and controls.
//!
//! A basis over `n` inputs with maximum total degree `p` enumerates every
//! multi-index `(e_1, ..., e_n)` with `sum(e) <= p`, ordered by total degree
//! and then descending-lexicographically within a degree, constant term
//! first. For `n = 2, p = 2` that is `1, x0, x1, x0^2, x0*x1, x1^2`. The
//! ordering is canonical: the Koopman tensor reshape and the symbolic value
//! function reports both depend on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Vector, kron};

/// Dictionary of monomials up to a fixed total degree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialBasis {
    input_dim: usize,
    max_degree: usize,
    exponents: Vec<Vec<usize>>,
}

/// Number of monomials in `n` variables with total degree at most `p`:
/// the binomial coefficient `C(n + p, n)`.
pub fn basis_dim(n: usize, p: usize) -> usize {
    // incremental product keeps intermediates exact for the sizes used here
    let mut result: usize = 1;
    for k in 1..=n.min(p) {
        result = result * (n + p - k + 1) / k;
    }
    // C(n+p, min(n, p)) == C(n+p, n)
    result
}

impl MonomialBasis {
    /// Builds the canonical degree-`max_degree` basis on `input_dim` inputs.
    pub fn new(input_dim: usize, max_degree: usize) -> Self {
        assert!(input_dim >= 1, "basis needs at least one input");
        let mut exponents = Vec::with_capacity(basis_dim(input_dim, max_degree));
        for degree in 0..=max_degree {
            enumerate_exact_degree(input_dim, degree, &mut Vec::new(), &mut exponents);
        }
        MonomialBasis {
            input_dim,
            max_degree,
            exponents,
        }
    }

    /// Rebuilds a basis from a serialized exponent list, validating the
    /// canonical ordering.
    pub fn from_exponents(input_dim: usize, exponents: Vec<Vec<usize>>) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::ModelFormat("empty exponent list".into()));
        }
        if exponents.iter().any(|e| e.len() != input_dim) {
            return Err(Error::ModelFormat(
                "exponent arity does not match input dimension".into(),
            ));
        }
        if exponents[0].iter().any(|&e| e != 0) {
            return Err(Error::ModelFormat(
                "first dictionary entry must be the constant".into(),
            ));
        }
        let max_degree = exponents
            .iter()
            .map(|e| e.iter().sum::<usize>())
            .max()
            .unwrap_or(0);
        let canonical = MonomialBasis::new(input_dim, max_degree);
        if canonical.exponents == exponents {
            Ok(canonical)
        } else {
            Err(Error::ModelFormat(
                "exponent list is not in canonical order".into(),
            ))
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Number of dictionary functions.
    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[Vec<usize>] {
        &self.exponents
    }

    /// Evaluates every monomial at `z`. Entry 0 is always 1.
    pub fn eval(&self, z: &Vector) -> Result<Vector> {
        if z.dim() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "basis expects {} inputs, got {}",
                self.input_dim,
                z.dim()
            )));
        }
        let mut out = Vector::zeros(self.dim());
        self.eval_into(z, &mut out);
        Ok(out)
    }

    /// Allocation-free evaluation into a caller-provided vector of length
    /// `self.dim()`.
    pub fn eval_into(&self, z: &Vector, out: &mut Vector) {
        debug_assert_eq!(z.dim(), self.input_dim);
        debug_assert_eq!(out.dim(), self.dim());
        for (k, exps) in self.exponents.iter().enumerate() {
            let mut value = 1.0;
            for (j, &e) in exps.iter().enumerate() {
                match e {
                    0 => {}
                    1 => value *= z[j],
                    2 => value *= z[j] * z[j],
                    _ => value *= z[j].powi(e as i32),
                }
            }
            out[k] = value;
        }
    }

    /// Gradient of monomial `k` at `z`.
    pub fn gradient(&self, k: usize, z: &Vector) -> Vector {
        let exps = &self.exponents[k];
        let mut grad = Vector::zeros(self.input_dim);
        for j in 0..self.input_dim {
            if exps[j] == 0 {
                continue;
            }
            let mut value = exps[j] as f64;
            for (l, &e) in exps.iter().enumerate() {
                let power = if l == j { e - 1 } else { e };
                if power > 0 {
                    value *= z[l].powi(power as i32);
                }
            }
            grad[j] = value;
        }
        grad
    }

    /// Hessian of monomial `k` at `z`.
    pub fn hessian(&self, k: usize, z: &Vector) -> crate::numerics::Matrix {
        let exps = &self.exponents[k];
        let n = self.input_dim;
        let mut hess = crate::numerics::Matrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let coeff = if a == b {
                    if exps[a] < 2 {
                        continue;
                    }
                    (exps[a] * (exps[a] - 1)) as f64
                } else {
                    if exps[a] == 0 || exps[b] == 0 {
                        continue;
                    }
                    (exps[a] * exps[b]) as f64
                };
                let mut value = coeff;
                for (l, &e) in exps.iter().enumerate() {
                    let power = if l == a && l == b {
                        e - 2
                    } else if l == a || l == b {
                        e - 1
                    } else {
                        e
                    };
                    if power > 0 {
                        value *= z[l].powi(power as i32);
                    }
                }
                hess[(a, b)] = value;
                hess[(b, a)] = value;
            }
        }
        hess
    }

    /// Human-readable name of monomial `k` with variables named by `vars`.
    pub fn term_name(&self, k: usize, vars: &[String]) -> String {
        let exps = &self.exponents[k];
        let mut parts = Vec::new();
        for (j, &e) in exps.iter().enumerate() {
            match e {
                0 => {}
                1 => parts.push(vars[j].clone()),
                _ => parts.push(format!("{}^{}", vars[j], e)),
            }
        }
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

/// Enumerates all multi-indices of exact total `degree` over `n` slots in
/// descending lexicographic order.
fn enumerate_exact_degree(
    n: usize,
    degree: usize,
    prefix: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if prefix.len() == n - 1 {
        let mut full = prefix.clone();
        full.push(degree);
        out.push(full);
        return;
    }
    for e in (0..=degree).rev() {
        prefix.push(e);
        enumerate_exact_degree(n, degree - e, prefix, out);
        prefix.pop();
    }
}

/// Combined state-control feature `psi(u) (x) phi(x)` in psi-major order:
/// entry `z * dim(phi) + i` equals `psi(u)[z] * phi(x)[i]`.
pub fn joint_feature(
    phi_basis: &MonomialBasis,
    psi_basis: &MonomialBasis,
    x: &Vector,
    u: &Vector,
) -> Result<Vector> {
    let phi = phi_basis.eval(x)?;
    let psi = psi_basis.eval(u)?;
    Ok(kron(&psi, &phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dim_three_states_order_two_is_ten() {
        assert_eq!(basis_dim(3, 2), 10);
        assert_eq!(MonomialBasis::new(3, 2).dim(), 10);
    }

    #[test]
    fn dim_degree_zero_is_constant_only() {
        for n in 1..6 {
            assert_eq!(basis_dim(n, 0), 1);
            let b = MonomialBasis::new(n, 0);
            assert_eq!(b.dim(), 1);
            assert_eq!(b.exponents()[0], vec![0; n]);
        }
    }

    #[test]
    fn dim_two_inputs_order_three_by_enumeration() {
        // independent enumeration of multi-indices with e0 + e1 <= 3
        let mut count = 0;
        for e0 in 0..=3usize {
            for e1 in 0..=3usize {
                if e0 + e1 <= 3 {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 10);
        assert_eq!(basis_dim(2, 3), count);
        assert_eq!(MonomialBasis::new(2, 3).dim(), count);
    }

    #[test]
    fn eval_scalar_order_two() {
        let b = MonomialBasis::new(1, 2);
        let v = b.eval(&Vector::new(vec![3.0])).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 3.0, 9.0]);
    }

    #[test]
    fn eval_at_zero_is_indicator_of_constant() {
        let b = MonomialBasis::new(3, 3);
        let v = b.eval(&Vector::zeros(3)).unwrap();
        assert_eq!(v[0], 1.0);
        for k in 1..v.dim() {
            assert_eq!(v[k], 0.0);
        }
    }

    #[test]
    fn eval_two_inputs_canonical_order() {
        let b = MonomialBasis::new(2, 2);
        let v = b.eval(&Vector::new(vec![2.0, 3.0])).unwrap();
        // 1, x0, x1, x0^2, x0*x1, x1^2
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0, 4.0, 6.0, 9.0]);
    }

    #[test]
    fn eval_dimension_mismatch() {
        let b = MonomialBasis::new(2, 2);
        assert!(b.eval(&Vector::zeros(3)).is_err());
    }

    #[test]
    fn construction_is_deterministic() {
        let a = MonomialBasis::new(4, 3);
        let b = MonomialBasis::new(4, 3);
        assert_eq!(a.exponents(), b.exponents());
    }

    #[test]
    fn joint_feature_hand_case() {
        let phi = MonomialBasis::new(1, 1); // [1, x]
        let psi = MonomialBasis::new(1, 1); // [1, u]
        let j = joint_feature(&phi, &psi, &Vector::new(vec![3.0]), &Vector::new(vec![2.0]))
            .unwrap();
        assert_eq!(j.as_slice(), &[1.0, 3.0, 2.0, 6.0]);
    }

    #[test]
    fn joint_feature_zero_control_blocks() {
        let phi = MonomialBasis::new(2, 2);
        let psi = MonomialBasis::new(1, 2);
        let x = Vector::new(vec![0.3, -0.7]);
        let u = Vector::zeros(1);
        let j = joint_feature(&phi, &psi, &x, &u).unwrap();
        let phi_x = phi.eval(&x).unwrap();
        // psi(0) = [1, 0, 0]: first block is phi(x), rest zero
        for i in 0..phi.dim() {
            assert_eq!(j[i], phi_x[i]);
        }
        for i in phi.dim()..j.dim() {
            assert_eq!(j[i], 0.0);
        }
    }

    #[test]
    fn joint_feature_length_is_product_of_dims() {
        let phi = MonomialBasis::new(3, 2); // 10
        let psi = MonomialBasis::new(1, 2); // 3
        let j = joint_feature(
            &phi,
            &psi,
            &Vector::new(vec![1.0, 2.0, 3.0]),
            &Vector::new(vec![0.5]),
        )
        .unwrap();
        assert_eq!(j.dim(), 30);
    }

    #[test]
    fn joint_feature_index_identity_exhaustive() {
        let phi = MonomialBasis::new(2, 2);
        let psi = MonomialBasis::new(1, 2);
        let x = Vector::new(vec![1.3, -0.4]);
        let u = Vector::new(vec![0.9]);
        let j = joint_feature(&phi, &psi, &x, &u).unwrap();
        let phi_x = phi.eval(&x).unwrap();
        let psi_u = psi.eval(&u).unwrap();
        for z in 0..psi.dim() {
            for i in 0..phi.dim() {
                assert_eq!(j[z * phi.dim() + i], psi_u[z] * phi_x[i]);
            }
        }
    }

    #[test]
    fn gradient_and_hessian_analytic() {
        // x0^2 * x1 at (2, 3): grad = (2*2*3, 4) = (12, 4)
        let b = MonomialBasis::new(2, 3);
        let idx = b
            .exponents()
            .iter()
            .position(|e| e == &vec![2, 1])
            .unwrap();
        let z = Vector::new(vec![2.0, 3.0]);
        let g = b.gradient(idx, &z);
        assert_eq!(g.as_slice(), &[12.0, 4.0]);
        let h = b.hessian(idx, &z);
        // d2/dx0^2 = 2*x1 = 6; d2/dx0dx1 = 2*x0 = 4; d2/dx1^2 = 0
        assert_eq!(h[(0, 0)], 6.0);
        assert_eq!(h[(0, 1)], 4.0);
        assert_eq!(h[(1, 0)], 4.0);
        assert_eq!(h[(1, 1)], 0.0);
    }

    #[test]
    fn from_exponents_roundtrip_and_rejects_shuffle() {
        let b = MonomialBasis::new(3, 2);
        let ok = MonomialBasis::from_exponents(3, b.exponents().to_vec()).unwrap();
        assert_eq!(ok, b);
        let mut shuffled = b.exponents().to_vec();
        shuffled.swap(1, 2);
        assert!(MonomialBasis::from_exponents(3, shuffled).is_err());
    }

    proptest! {
        #[test]
        fn constant_term_is_always_one(
            n in 1usize..4,
            p in 0usize..4,
            raw in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            let b = MonomialBasis::new(n, p);
            let z = Vector::new(raw[..n].to_vec());
            let v = b.eval(&z).unwrap();
            prop_assert_eq!(v[0], 1.0);
            prop_assert_eq!(v.dim(), basis_dim(n, p));
        }
    }
}

//! Linear-quadratic regulator baseline.
//!
//! Each environment is linearized analytically at its reference point; the
//! discrete linear system gets a DARE solve, the continuous systems a CARE
//! solve. Riccati equations are solved by fixed-point iteration and
//! pseudo-time integration respectively, which avoids an eigensolver and is
//! plenty at these dimensions (<= 3).

use rand::Rng;

use crate::environments::{EnvKind, EnvironmentSpec, Integrator, Policy, drift};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector, is_positive_definite};

/// Which algebraic Riccati equation produced a solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RiccatiMode {
    Discrete,
    Continuous,
}

/// Riccati solution with its feedback gain `u = -K (x - x_e)`.
#[derive(Clone, Debug)]
pub struct LqrSolution {
    pub p: Matrix,
    pub k: Matrix,
    pub mode: RiccatiMode,
}

/// Analytic Jacobians `(A, B) = (df/dx, df/du)` at `(x_e, 0)`.
///
/// For the discrete linear system this returns its own `A`/`B`. The
/// reference point must be an equilibrium: `f(x_e, 0) = 0` for continuous
/// systems, `F(x_e, 0) = x_e` for the discrete map.
pub fn linearize(env: &EnvironmentSpec) -> Result<(Matrix, Matrix)> {
    let u0 = Vector::zeros(env.action_dim);
    let f0 = drift(env, &env.x_e, &u0)?;
    let residual = match env.integrator {
        Integrator::DiscreteMap => f0.sub(&env.x_e).norm(),
        _ => f0.norm(),
    };
    if residual >= 1e-8 {
        return Err(Error::NotEquilibrium { residual });
    }
    let xe = &env.x_e;
    Ok(match env.kind {
        EnvKind::LinearSystem => {
            let lin = env.linear.as_ref().expect("linear system without A/B");
            (lin.a.clone(), lin.b.clone())
        }
        EnvKind::FluidFlow => {
            // f = (mu x0 - w x1 + a x0 x2, w x0 + mu x1 + a x1 x2 + u,
            //      -l (x2 - x0^2 - x1^2))
            let (mu, w, a, l) = (0.1, 1.0, -0.1, 1.0);
            let jac = Matrix::from_rows(&[
                vec![mu + a * xe[2], -w, a * xe[0]],
                vec![w, mu + a * xe[2], a * xe[1]],
                vec![2.0 * l * xe[0], 2.0 * l * xe[1], -l],
            ]);
            let b = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![0.0]]);
            (jac, b)
        }
        EnvKind::Lorenz63 => {
            let (sigma, rho, beta) = (10.0, 28.0, 8.0 / 3.0);
            let jac = Matrix::from_rows(&[
                vec![-sigma, sigma, 0.0],
                vec![rho - xe[2], -1.0, -xe[0]],
                vec![xe[1], xe[0], -beta],
            ]);
            let b = Matrix::from_rows(&[vec![1.0], vec![0.0], vec![0.0]]);
            (jac, b)
        }
        EnvKind::DoubleWell => {
            let jac = Matrix::from_rows(&[
                vec![4.0 - 12.0 * xe[0] * xe[0], 0.0],
                vec![0.0, -2.0],
            ]);
            let b = Matrix::from_rows(&[vec![1.0], vec![1.0]]);
            (jac, b)
        }
    })
}

/// Discrete algebraic Riccati equation by fixed-point iteration from
/// `P_0 = Q`:
/// `P <- Q + A^T P A - A^T P B (R + B^T P B)^{-1} B^T P A`.
pub fn solve_dare(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    tol: f64,
    max_iters: usize,
) -> Result<LqrSolution> {
    let mut p = q.clone();
    for _ in 0..max_iters {
        let pa = p.matmul(a); // P A
        let pb = p.matmul(b); // P B
        let btpb = b.matmul_transpose_a(&pb); // B^T P B
        let btpa = b.matmul_transpose_a(&pa); // B^T P A
        let gain = r.add(&btpb).solve(&btpa)?; // (R + B^T P B)^{-1} B^T P A
        // A^T P A - (B^T P A)^T gain + Q
        let mut next = a.matmul_transpose_a(&pa);
        next.add_assign_scaled(-1.0, &btpa.matmul_transpose_a(&gain));
        next.add_assign_scaled(1.0, q);
        next.symmetrize();
        let delta = next.sub(&p).max_abs();
        p = next;
        if delta < tol {
            let pa = p.matmul(a);
            let pb = p.matmul(b);
            let btpb = b.matmul_transpose_a(&pb);
            let btpa = b.matmul_transpose_a(&pa);
            let k = r.add(&btpb).solve(&btpa)?;
            return Ok(LqrSolution {
                p,
                k,
                mode: RiccatiMode::Discrete,
            });
        }
    }
    Err(Error::NoConvergence(format!(
        "DARE fixed point not reached in {max_iters} iterations"
    )))
}

/// Continuous algebraic Riccati equation: integrates the differential
/// Riccati equation `dP/dtau = A^T P + P A - P B R^{-1} B^T P + Q` with RK4
/// in pseudo-time (step 1e-3) from `P_0 = Q` until the derivative — which is
/// exactly the CARE residual — drops below `tol`.
pub fn solve_care(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    tol: f64,
    max_iters: usize,
) -> Result<LqrSolution> {
    let r_inv_bt = r.solve(&b.transpose())?; // R^{-1} B^T
    let riccati_rhs = |p: &Matrix| -> Matrix {
        let atp = a.matmul_transpose_a(p); // A^T P
        let pbrinvbt = p.matmul(b).matmul(&r_inv_bt); // P B R^{-1} B^T
        let mut rhs = atp.add(&atp.transpose());
        rhs.add_assign_scaled(-1.0, &pbrinvbt.matmul(p));
        rhs.add_assign_scaled(1.0, q);
        rhs
    };
    let dt = 1e-3;
    let mut p = q.clone();
    for _ in 0..max_iters {
        let k1 = riccati_rhs(&p);
        if k1.max_abs() < tol {
            let k = r_inv_bt.matmul(&p);
            return Ok(LqrSolution {
                p,
                k,
                mode: RiccatiMode::Continuous,
            });
        }
        let mut p2 = p.clone();
        p2.add_assign_scaled(0.5 * dt, &k1);
        let k2 = riccati_rhs(&p2);
        let mut p3 = p.clone();
        p3.add_assign_scaled(0.5 * dt, &k2);
        let k3 = riccati_rhs(&p3);
        let mut p4 = p.clone();
        p4.add_assign_scaled(dt, &k3);
        let k4 = riccati_rhs(&p4);
        p.add_assign_scaled(dt / 6.0, &k1);
        p.add_assign_scaled(dt / 3.0, &k2);
        p.add_assign_scaled(dt / 3.0, &k3);
        p.add_assign_scaled(dt / 6.0, &k4);
        p.symmetrize();
    }
    Err(Error::NoConvergence(format!(
        "CARE pseudo-time integration not settled in {max_iters} steps"
    )))
}

/// Linearizes `env` and solves the Riccati equation matching its
/// integrator: DARE for the discrete map, CARE otherwise.
pub fn solve_for_env(env: &EnvironmentSpec) -> Result<LqrSolution> {
    let (a, b) = linearize(env)?;
    match env.integrator {
        Integrator::DiscreteMap => solve_dare(&a, &b, &env.q, &env.r, 1e-12, 200_000),
        _ => solve_care(&a, &b, &env.q, &env.r, 1e-9, 2_000_000),
    }
}

/// CARE residual `A^T P + P A - P B R^{-1} B^T P + Q` at a candidate `P`.
pub fn care_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    let r_inv_bt = r.solve(&b.transpose())?;
    let atp = a.matmul_transpose_a(p);
    let mut res = atp.add(&atp.transpose());
    res.add_assign_scaled(-1.0, &p.matmul(b).matmul(&r_inv_bt).matmul(p));
    res.add_assign_scaled(1.0, q);
    Ok(res)
}

/// DARE residual `A^T P A - P - A^T P B (R + B^T P B)^{-1} B^T P A + Q`.
pub fn dare_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    let pa = p.matmul(a);
    let pb = p.matmul(b);
    let btpb = b.matmul_transpose_a(&pb);
    let btpa = b.matmul_transpose_a(&pa);
    let gain = r.add(&btpb).solve(&btpa)?;
    let mut res = a.matmul_transpose_a(&pa);
    res.add_assign_scaled(-1.0, p);
    res.add_assign_scaled(-1.0, &btpa.matmul_transpose_a(&gain));
    res.add_assign_scaled(1.0, q);
    Ok(res)
}

/// Feedback action `clip(-K (x - x_e), bounds)`.
pub fn lqr_action(
    sol: &LqrSolution,
    x: &Vector,
    x_e: &Vector,
    bounds: Option<(&[f64], &[f64])>,
) -> Vector {
    let mut u = sol.k.matvec(&x.sub(x_e)).scale(-1.0);
    if let Some((low, high)) = bounds {
        for i in 0..u.dim() {
            u[i] = u[i].clamp(low[i], high[i]);
        }
    }
    u
}

/// LQR as a [`Policy`]; clips into the environment's action bounds.
pub struct LqrPolicy {
    sol: LqrSolution,
    x_e: Vector,
    low: Vec<f64>,
    high: Vec<f64>,
}

impl LqrPolicy {
    pub fn for_env(env: &EnvironmentSpec) -> Result<Self> {
        Ok(LqrPolicy {
            sol: solve_for_env(env)?,
            x_e: env.x_e.clone(),
            low: env.action_low.clone(),
            high: env.action_high.clone(),
        })
    }

    pub fn solution(&self) -> &LqrSolution {
        &self.sol
    }
}

impl Policy for LqrPolicy {
    fn act(&self, x: &Vector, _rng: &mut dyn Rng) -> Vector {
        lqr_action(&self.sol, x, &self.x_e, Some((&self.low, &self.high)))
    }
}

/// Upper estimate of the spectral radius via `||M^(2^squarings)||_F^(1/2^squarings)`.
pub fn spectral_radius_upper(m: &Matrix, squarings: u32) -> f64 {
    let mut power = m.clone();
    for _ in 0..squarings {
        power = power.matmul(&power);
        // rescale to dodge overflow/underflow; track the exponent instead
        let norm = power.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
    }
    power.frobenius_norm().powf(1.0 / f64::from(2u32.pow(squarings)))
}

/// Continuous-time stability through a Lyapunov solve: `M` is Hurwitz iff
/// `M^T S + S M = -I` has a positive definite solution.
pub fn is_hurwitz(m: &Matrix) -> Result<bool> {
    let n = m.rows();
    assert_eq!(n, m.cols());
    let mut system = Matrix::zeros(n * n, n * n);
    let mut rhs = Matrix::zeros(n * n, 1);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            // sum_k M[k,i] S[k,j] + S[i,k] M[k,j] = -delta_ij
            for k in 0..n {
                system[(row, k * n + j)] += m[(k, i)];
                system[(row, i * n + k)] += m[(k, j)];
            }
            rhs[(row, 0)] = if i == j { -1.0 } else { 0.0 };
        }
    }
    let s_vec = system.solve(&rhs)?;
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = s_vec[(i * n + j, 0)];
        }
    }
    s.symmetrize();
    Ok(is_positive_definite(&s))
}

//! The four benchmark controlled dynamical systems: a discrete linear
//! system, the cylinder-wake reduced-order fluid flow, Lorenz 1963, and a
//! stochastically forced double-well particle. All share the quadratic cost
//! `(x - x_e)^T Q (x - x_e) + u^T R u` and fixed-length episodes.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

/// Which benchmark system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvKind {
    LinearSystem,
    FluidFlow,
    Lorenz63,
    DoubleWell,
}

impl EnvKind {
    pub fn parse(s: &str) -> Result<EnvKind> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "linear" | "linearsystem" => Ok(EnvKind::LinearSystem),
            "fluidflow" | "fluid" => Ok(EnvKind::FluidFlow),
            "lorenz" | "lorenz63" => Ok(EnvKind::Lorenz63),
            "doublewell" | "well" => Ok(EnvKind::DoubleWell),
            other => Err(Error::Config(format!("unknown environment '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvKind::LinearSystem => "linear",
            EnvKind::FluidFlow => "fluidflow",
            EnvKind::Lorenz63 => "lorenz",
            EnvKind::DoubleWell => "doublewell",
        }
    }

    pub fn all() -> [EnvKind; 4] {
        [
            EnvKind::LinearSystem,
            EnvKind::FluidFlow,
            EnvKind::Lorenz63,
            EnvKind::DoubleWell,
        ]
    }
}

/// Time-stepping scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrator {
    /// `x' = A x + B u` applied directly.
    DiscreteMap,
    /// Classical fourth-order Runge-Kutta with the control held over `dt`.
    Rk4,
    /// `x' = x + f(x,u) dt + sigma(x) sqrt(dt) xi` with standard normal `xi`.
    EulerMaruyama,
}

// Fluid flow (cylinder wake reduced-order model) constants.
const FF_MU: f64 = 0.1;
const FF_OMEGA: f64 = 1.0;
const FF_A: f64 = -0.1;
const FF_LAMBDA: f64 = 1.0;

// Lorenz 1963 constants.
const LORENZ_SIGMA: f64 = 10.0;
const LORENZ_RHO: f64 = 28.0;
const LORENZ_BETA: f64 = 8.0 / 3.0;

/// Explicit `A`/`B` pair for the discrete linear system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearDynamics {
    pub a: Matrix,
    pub b: Matrix,
}

/// Full description of one benchmark environment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub kind: EnvKind,
    pub state_dim: usize,
    pub action_dim: usize,
    pub dt: f64,
    pub integrator: Integrator,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    /// Reference point the cost stabilizes toward.
    pub x_e: Vector,
    pub q: Matrix,
    pub r: Matrix,
    pub episode_len: usize,
    /// Per-coordinate uniform sampling range for `reset`.
    pub init_box: Vec<(f64, f64)>,
    /// Multiplier on the diffusion term; 0 turns the double well deterministic.
    pub noise_scale: f64,
    /// Only present for `EnvKind::LinearSystem`.
    pub linear: Option<LinearDynamics>,
}

impl EnvironmentSpec {
    /// Default configuration for a benchmark system. Action bounds are the
    /// frozen min/max actions observed from the LQR policy over 10
    /// evaluation episodes on each system.
    pub fn new(kind: EnvKind) -> EnvironmentSpec {
        match kind {
            EnvKind::LinearSystem => EnvironmentSpec {
                kind,
                state_dim: 2,
                action_dim: 1,
                dt: 0.02,
                integrator: Integrator::DiscreteMap,
                action_low: vec![-2.2],
                action_high: vec![2.2],
                x_e: Vector::zeros(2),
                q: Matrix::identity(2),
                r: Matrix::identity(1),
                episode_len: 300,
                init_box: vec![(-1.0, 1.0), (-1.0, 1.0)],
                noise_scale: 1.0,
                linear: Some(LinearDynamics {
                    // marginally unstable discrete double integrator
                    a: Matrix::from_rows(&[vec![1.0, 0.02], vec![0.0, 1.0]]),
                    b: Matrix::from_rows(&[vec![0.0], vec![0.02]]),
                }),
            },
            EnvKind::FluidFlow => EnvironmentSpec {
                kind,
                state_dim: 3,
                action_dim: 1,
                dt: 0.01,
                integrator: Integrator::Rk4,
                action_low: vec![-1.7],
                action_high: vec![1.7],
                x_e: Vector::zeros(3),
                q: Matrix::identity(3),
                r: Matrix::identity(1),
                episode_len: 300,
                init_box: vec![(-1.0, 1.0), (-1.0, 1.0), (0.0, 1.0)],
                noise_scale: 1.0,
                linear: None,
            },
            EnvKind::Lorenz63 => {
                let xe = (LORENZ_BETA * (LORENZ_RHO - 1.0)).sqrt();
                EnvironmentSpec {
                    kind,
                    state_dim: 3,
                    action_dim: 1,
                    dt: 0.01,
                    integrator: Integrator::Rk4,
                    action_low: vec![-960.0],
                    action_high: vec![960.0],
                    x_e: Vector::new(vec![xe, xe, LORENZ_RHO - 1.0]),
                    q: Matrix::identity(3),
                    r: Matrix::diagonal(1, 0.001),
                    episode_len: 300,
                    init_box: vec![(-20.0, 20.0), (-20.0, 20.0), (0.0, 50.0)],
                    noise_scale: 1.0,
                    linear: None,
                }
            }
            EnvKind::DoubleWell => EnvironmentSpec {
                kind,
                state_dim: 2,
                action_dim: 1,
                dt: 0.01,
                integrator: Integrator::EulerMaruyama,
                action_low: vec![-13.4],
                action_high: vec![13.4],
                x_e: Vector::zeros(2),
                q: Matrix::identity(2),
                r: Matrix::identity(1),
                episode_len: 300,
                init_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
                noise_scale: 1.0,
                linear: None,
            },
        }
    }

    /// Clips an action into the spec's bounds coordinate-wise.
    pub fn clip_action(&self, u: &Vector) -> Vector {
        let mut out = u.clone();
        for i in 0..self.action_dim {
            out[i] = out[i].clamp(self.action_low[i], self.action_high[i]);
        }
        out
    }

    fn check_dims(&self, x: &Vector, u: &Vector) -> Result<()> {
        if x.dim() != self.state_dim || u.dim() != self.action_dim {
            return Err(Error::DimensionMismatch(format!(
                "{} expects state dim {} and action dim {}, got {} and {}",
                self.kind.name(),
                self.state_dim,
                self.action_dim,
                x.dim(),
                u.dim()
            )));
        }
        Ok(())
    }
}

/// One recorded environment interaction.
#[derive(Clone, Debug)]
pub struct Transition {
    pub x: Vector,
    pub u: Vector,
    pub reward: f64,
    pub x_next: Vector,
    pub done: bool,
}

/// Continuous-time drift `f(x, u)` (or the discrete map `F(x, u)` for the
/// linear system).
pub fn drift(spec: &EnvironmentSpec, x: &Vector, u: &Vector) -> Result<Vector> {
    spec.check_dims(x, u)?;
    Ok(match spec.kind {
        EnvKind::LinearSystem => {
            let lin = spec.linear.as_ref().expect("linear system without A/B");
            lin.a.matvec(x).add(&lin.b.matvec(u))
        }
        EnvKind::FluidFlow => Vector::new(vec![
            FF_MU * x[0] - FF_OMEGA * x[1] + FF_A * x[0] * x[2],
            FF_OMEGA * x[0] + FF_MU * x[1] + FF_A * x[1] * x[2] + u[0],
            -FF_LAMBDA * (x[2] - x[0] * x[0] - x[1] * x[1]),
        ]),
        EnvKind::Lorenz63 => Vector::new(vec![
            LORENZ_SIGMA * (x[1] - x[0]) + u[0],
            (LORENZ_RHO - x[2]) * x[0] - x[1],
            x[0] * x[1] - LORENZ_BETA * x[2],
        ]),
        EnvKind::DoubleWell => Vector::new(vec![
            4.0 * x[0] - 4.0 * x[0] * x[0] * x[0] + u[0],
            -2.0 * x[1] + u[0],
        ]),
    })
}

/// State-dependent diffusion matrix; zero for the deterministic systems.
pub fn diffusion(spec: &EnvironmentSpec, x: &Vector) -> Matrix {
    match spec.kind {
        EnvKind::DoubleWell => {
            Matrix::from_rows(&[vec![0.7, x[0]], vec![0.0, 0.5]]).scale(spec.noise_scale)
        }
        _ => Matrix::zeros(spec.state_dim, spec.state_dim),
    }
}

/// Advances the state one step, clipping the action to the spec bounds first.
pub fn step(
    spec: &EnvironmentSpec,
    x: &Vector,
    u: &Vector,
    rng: &mut dyn Rng,
) -> Result<Vector> {
    spec.check_dims(x, u)?;
    let u = spec.clip_action(u);
    let next = match spec.integrator {
        Integrator::DiscreteMap => drift(spec, x, &u)?,
        Integrator::Rk4 => rk4_step(spec, x, &u)?,
        Integrator::EulerMaruyama => {
            let mut next = x.clone();
            next.axpy(spec.dt, &drift(spec, x, &u)?);
            if spec.noise_scale != 0.0 {
                let sigma = diffusion(spec, x);
                let xi = Vector::new(
                    (0..spec.state_dim)
                        .map(|_| rng.sample(rand_distr::StandardNormal))
                        .collect(),
                );
                next.axpy(spec.dt.sqrt(), &sigma.matvec(&xi));
            }
            next
        }
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFiniteState)
    }
}

fn rk4_step(spec: &EnvironmentSpec, x: &Vector, u: &Vector) -> Result<Vector> {
    let dt = spec.dt;
    let k1 = drift(spec, x, u)?;
    let mut x2 = x.clone();
    x2.axpy(0.5 * dt, &k1);
    let k2 = drift(spec, &x2, u)?;
    let mut x3 = x.clone();
    x3.axpy(0.5 * dt, &k2);
    let k3 = drift(spec, &x3, u)?;
    let mut x4 = x.clone();
    x4.axpy(dt, &k3);
    let k4 = drift(spec, &x4, u)?;
    let mut next = x.clone();
    next.axpy(dt / 6.0, &k1);
    next.axpy(dt / 3.0, &k2);
    next.axpy(dt / 3.0, &k3);
    next.axpy(dt / 6.0, &k4);
    Ok(next)
}

/// Quadratic stage cost `(x - x_e)^T Q (x - x_e) + u^T R u`.
pub fn cost(spec: &EnvironmentSpec, x: &Vector, u: &Vector) -> f64 {
    let dx = x.sub(&spec.x_e);
    dx.dot(&spec.q.matvec(&dx)) + u.dot(&spec.r.matvec(u))
}

/// Samples an initial state uniformly from the spec's init box.
pub fn reset(spec: &EnvironmentSpec, rng: &mut dyn Rng) -> Vector {
    Vector::new(
        spec.init_box
            .iter()
            .map(|&(lo, hi)| {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..hi)
                }
            })
            .collect(),
    )
}

/// Anything that can choose an action from a state. Deterministic policies
/// ignore the rng.
pub trait Policy {
    fn act(&self, x: &Vector, rng: &mut dyn Rng) -> Vector;
}

/// Wraps a closure as a policy.
pub struct FnPolicy<F: Fn(&Vector, &mut dyn Rng) -> Vector>(pub F);

impl<F: Fn(&Vector, &mut dyn Rng) -> Vector> Policy for FnPolicy<F> {
    fn act(&self, x: &Vector, rng: &mut dyn Rng) -> Vector {
        (self.0)(x, rng)
    }
}

/// Uniform random actions within bounds; the "random agent" used to build
/// Koopman tensor training sets.
pub struct RandomPolicy {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl RandomPolicy {
    pub fn for_env(spec: &EnvironmentSpec) -> Self {
        RandomPolicy {
            low: spec.action_low.clone(),
            high: spec.action_high.clone(),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&self, _x: &Vector, rng: &mut dyn Rng) -> Vector {
        Vector::new(
            self.low
                .iter()
                .zip(self.high.iter())
                .map(|(&lo, &hi)| if lo == hi { lo } else { rng.random_range(lo..hi) })
                .collect(),
        )
    }
}

/// Always zero action.
pub struct ZeroPolicy(pub usize);

impl Policy for ZeroPolicy {
    fn act(&self, _x: &Vector, _rng: &mut dyn Rng) -> Vector {
        Vector::zeros(self.0)
    }
}

/// Runs fixed-length episodes under `policy`, returning per-episode
/// `(return, transitions)`.
///
/// A non-finite state terminates the episode early: its return is the
/// running return minus the largest single-step cost seen so far for each
/// remaining step, which keeps averages finite while still punishing
/// divergence.
pub fn rollout(
    spec: &EnvironmentSpec,
    policy: &dyn Policy,
    rng: &mut dyn Rng,
    episodes: usize,
) -> Vec<(f64, Vec<Transition>)> {
    let mut out = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        out.push(run_episode(spec, policy, rng));
    }
    out
}

fn run_episode(
    spec: &EnvironmentSpec,
    policy: &dyn Policy,
    rng: &mut dyn Rng,
) -> (f64, Vec<Transition>) {
    let mut x = reset(spec, rng);
    let mut transitions = Vec::with_capacity(spec.episode_len);
    let mut ret = 0.0;
    let mut max_cost = 0.0f64;
    for k in 0..spec.episode_len {
        let u = spec.clip_action(&policy.act(&x, rng));
        let c = cost(spec, &x, &u);
        max_cost = max_cost.max(c);
        match step(spec, &x, &u, rng) {
            Ok(x_next) => {
                ret += -c;
                transitions.push(Transition {
                    x: x.clone(),
                    u,
                    reward: -c,
                    x_next: x_next.clone(),
                    done: k + 1 == spec.episode_len,
                });
                x = x_next;
            }
            Err(Error::NonFiniteState) => {
                let remaining = (spec.episode_len - k) as f64;
                ret -= max_cost * remaining;
                if let Some(last) = transitions.last_mut() {
                    last.done = true;
                }
                return (ret, transitions);
            }
            Err(_) => unreachable!("step only fails with NonFiniteState after dim checks"),
        }
    }
    (ret, transitions)
}

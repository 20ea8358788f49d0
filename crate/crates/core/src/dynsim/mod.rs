//! Control-affine systems, fixed-step RK4 simulation and trajectory datasets.

mod dataset;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::polybasis::Polynomial;

pub use dataset::{
    collect_protocol, finite_difference, forward_stencil, DiffScheme, ProtocolOptions, Sampling, TrajectoryDataset,
};

/// Norm above which a trajectory is considered divergent and truncated.
pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e6;

type FieldFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A vector field on `R^n`, either polynomial or an opaque evaluator.
#[derive(Clone)]
pub enum Field {
    Poly(Vec<Polynomial>),
    Func(Arc<FieldFn>),
}

impl Field {
    pub fn func<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Field::Func(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Field::Poly(ps) => ps.iter().map(|p| p.eval(x)).collect(),
            Field::Func(f) => f(x),
        }
    }

    pub fn as_poly(&self) -> Option<&[Polynomial]> {
        match self {
            Field::Poly(ps) => Some(ps),
            Field::Func(_) => None,
        }
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Poly(ps) => f.debug_list().entries(ps).finish(),
            Field::Func(_) => write!(f, "<opaque field>"),
        }
    }
}

/// `ẋ = f(x) + Σ_j g_j(x) u_j`.
#[derive(Clone, Debug)]
pub struct ControlAffineSystem {
    pub name: String,
    pub n: usize,
    pub drift: Field,
    pub inputs: Vec<Field>,
}

impl ControlAffineSystem {
    pub fn m(&self) -> usize {
        self.inputs.len()
    }

    pub fn rhs(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut dx = self.drift.eval(x);
        for (g, &uj) in self.inputs.iter().zip(u) {
            if uj == 0.0 {
                continue;
            }
            for (d, gi) in dx.iter_mut().zip(g.eval(x)) {
                *d += gi * uj;
            }
        }
        dx
    }
}

type PolicyFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Input applied while simulating.
#[derive(Clone)]
pub enum InputPolicy {
    Zero,
    /// Unit step on input channel `j` (zero-based).
    Step(usize),
    Constant(Vec<f64>),
    Feedback(Arc<PolicyFn>),
}

impl InputPolicy {
    pub fn feedback<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        InputPolicy::Feedback(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64], m: usize) -> Vec<f64> {
        match self {
            InputPolicy::Zero => vec![0.0; m],
            InputPolicy::Step(j) => {
                let mut u = vec![0.0; m];
                u[*j] = 1.0;
                u
            }
            InputPolicy::Constant(u) => u.clone(),
            InputPolicy::Feedback(f) => f(x),
        }
    }
}

/// Sampled states `x_0, ..., x_K` of one integration run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
    /// Set when integration stopped early because the state left the
    /// admissible region (divergence bound or clipping box).
    pub truncated: bool,
    /// Set when the stop was caused by the divergence bound.
    pub diverged: bool,
}

/// Simulation limits applied per step.
#[derive(Clone, Debug)]
pub struct SimLimits {
    pub divergence_bound: f64,
    pub keep_in: Option<crate::polybasis::DomainBox>,
}

impl Default for SimLimits {
    fn default() -> Self {
        SimLimits {
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
            keep_in: None,
        }
    }
}

/// One classical RK4 step of `ẋ = rhs(x)`.
pub fn rk4_step<F>(rhs: F, x: &[f64], dt: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let k1 = rhs(x);
    let tmp: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * dt * k1[i]).collect();
    let k2 = rhs(&tmp);
    let tmp: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * dt * k2[i]).collect();
    let k3 = rhs(&tmp);
    let tmp: Vec<f64> = (0..n).map(|i| x[i] + dt * k3[i]).collect();
    let k4 = rhs(&tmp);
    (0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Fixed-step RK4 under `policy` (input held constant within each step's stages
/// only for non-feedback policies; feedback is re-evaluated at every stage).
pub fn simulate(
    system: &ControlAffineSystem,
    policy: &InputPolicy,
    x0: &[f64],
    dt: f64,
    steps: usize,
    limits: &SimLimits,
) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if x0.len() != system.n {
        return Err(Error::DimensionMismatch {
            expected: system.n,
            got: x0.len(),
        });
    }
    let m = system.m();
    let rhs = |x: &[f64]| system.rhs(x, &policy.eval(x, m));
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    let mut truncated = false;
    let mut diverged = false;
    let mut x = x0.to_vec();
    for _ in 0..steps {
        let next = rk4_step(rhs, &x, dt);
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        let outside = limits.keep_in.as_ref().is_some_and(|b| !b.contains(&next));
        if !norm.is_finite() || norm > limits.divergence_bound || outside {
            truncated = true;
            diverged = !norm.is_finite() || norm > limits.divergence_bound;
            break;
        }
        states.push(next.clone());
        x = next;
    }
    Ok(Trajectory {
        dt,
        states,
        truncated,
        diverged,
    })
}

/// Systems used throughout the examples and tests.
pub mod systems {
    use super::*;

    fn p(n: usize, terms: &[(&[u8], f64)]) -> Polynomial {
        Polynomial::from_exponents(n, terms)
    }

    /// `ẋ1 = -x1 + x2`, `ẋ2 = -0.5 (x1 + x2) + 0.5 x1^2 x2 + x1 u`.
    pub fn example1() -> ControlAffineSystem {
        ControlAffineSystem {
            name: "example1".into(),
            n: 2,
            drift: Field::Poly(vec![
                p(2, &[(&[1, 0], -1.0), (&[0, 1], 1.0)]),
                p(2, &[(&[1, 0], -0.5), (&[0, 1], -0.5), (&[2, 1], 0.5)]),
            ]),
            inputs: vec![Field::Poly(vec![p(2, &[]), p(2, &[(&[1, 0], 1.0)])])],
        }
    }

    /// Controlled Van der Pol oscillator `ẋ1 = x2`, `ẋ2 = (1 - x1^2) x2 - x1 + u`.
    pub fn van_der_pol() -> ControlAffineSystem {
        ControlAffineSystem {
            name: "vdp".into(),
            n: 2,
            drift: Field::Poly(vec![
                p(2, &[(&[0, 1], 1.0)]),
                p(2, &[(&[0, 1], 1.0), (&[2, 1], -1.0), (&[1, 0], -1.0)]),
            ]),
            inputs: vec![Field::Poly(vec![p(2, &[]), p(2, &[(&[0, 0], 1.0)])])],
        }
    }

    /// Damped pendulum `ẋ1 = x2`, `ẋ2 = -sin x1 - 0.2 x2 + u` (non-polynomial drift).
    pub fn pendulum() -> ControlAffineSystem {
        ControlAffineSystem {
            name: "pendulum".into(),
            n: 2,
            drift: Field::func(|x| vec![x[1], -x[0].sin() - 0.2 * x[1]]),
            inputs: vec![Field::Poly(vec![p(2, &[]), p(2, &[(&[0, 0], 1.0)])])],
        }
    }

    /// Lorenz system with input on the second state.
    pub fn lorentz(sigma: f64, rho: f64, eta: f64) -> ControlAffineSystem {
        ControlAffineSystem {
            name: "lorentz".into(),
            n: 3,
            drift: Field::Poly(vec![
                p(3, &[(&[0, 1, 0], sigma), (&[1, 0, 0], -sigma)]),
                p(3, &[(&[1, 0, 0], rho), (&[1, 0, 1], -1.0), (&[0, 1, 0], -1.0)]),
                p(3, &[(&[1, 1, 0], 1.0), (&[0, 0, 1], -eta)]),
            ]),
            inputs: vec![Field::Poly(vec![p(3, &[]), p(3, &[(&[0, 0, 0], 1.0)]), p(3, &[])])],
        }
    }

    /// `ẋ = A x + B u`.
    pub fn linear(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> ControlAffineSystem {
        let n = a.nrows();
        let lin = |row: Vec<f64>| {
            let mut q = Polynomial::zero(n);
            for (j, v) in row.into_iter().enumerate() {
                q.add_term(crate::polybasis::Monomial::var(n, j), v);
            }
            q
        };
        ControlAffineSystem {
            name: "linear".into(),
            n,
            drift: Field::Poly((0..n).map(|i| lin(a.row(i).iter().copied().collect())).collect()),
            inputs: (0..b.ncols())
                .map(|j| Field::Poly((0..n).map(|i| Polynomial::constant(n, b[(i, j)])).collect()))
                .collect(),
        }
    }
}

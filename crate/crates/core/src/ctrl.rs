//! Feedback recovery `k = c / a`, the local quadratic design that fixes
//! `b(x) = xᵀPx`, blending near the origin, closed-loop rollouts and the
//! grid check of the transport inequality.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsim::{simulate, ControlAffineSystem, InputPolicy, SimLimits};
use crate::error::{Error, Result};
use crate::polybasis::{DomainBox, Polynomial};

fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    a.complex_eigenvalues().iter().all(|l: &Complex<f64>| l.re < 0.0)
}

/// `AᵀP + PA = −Q` by the Kronecker form; requires `A` Hurwitz.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.shape() != (n, n) || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: q.nrows(),
        });
    }
    if !is_hurwitz(a) {
        return Err(Error::NotStabilizable(
            "the Lyapunov route needs a Hurwitz linearization when the input matrix vanishes".into(),
        ));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    // column-major vec: vec(AᵀP) = (I ⊗ Aᵀ) vec P, vec(PA) = (Aᵀ ⊗ I) vec P
    let k = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, (-q).as_slice());
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NotStabilizable("singular Lyapunov operator".into()))?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

fn matrix_sign(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.nrows() as f64;
    let mut z = h.clone();
    for _ in 0..100 {
        let inv = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NotStabilizable("Hamiltonian has eigenvalues on the imaginary axis".into()))?;
        let det = z.determinant().abs();
        let c = if det.is_finite() && det > 0.0 { det.powf(-1.0 / n) } else { 1.0 };
        let next = (&z * c + &inv / c) * 0.5;
        let delta = (&next - &z).norm() / next.norm();
        z = next;
        if delta < 1e-14 {
            break;
        }
    }
    Ok(z)
}

/// Stabilizing solution of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` from the sign of
/// the Hamiltonian, refined by Newton-Kleinman steps.
pub fn solve_are(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let m = b.ncols();
    if b.nrows() != n || r.shape() != (m, m) || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.nrows(),
        });
    }
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("R is singular".into()))?;
    let s = b * &r_inv * b.transpose();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let w = matrix_sign(&h)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w.view((n, 0), (n, n))));
    let mut p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::NotStabilizable(format!("ARE subspace solve failed: {e}")))?;
    p = (&p + p.transpose()) * 0.5;
    for _ in 0..3 {
        let k = &r_inv * b.transpose() * &p;
        let acl = a - b * &k;
        if !is_hurwitz(&acl) {
            break;
        }
        p = solve_lyapunov(&acl, &(q + k.transpose() * r * &k))?;
    }
    let k = &r_inv * b.transpose() * &p;
    if !is_hurwitz(&(a - b * &k)) {
        return Err(Error::NotStabilizable(
            "no stabilizing ARE solution; the linearization must be stabilizable".into(),
        ));
    }
    Ok(p)
}

/// Local quadratic design around the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalDesign {
    #[serde(with = "crate::matio::mat")]
    pub p: DMatrix<f64>,
    /// `u = −K x` near the origin.
    #[serde(with = "crate::matio::mat")]
    pub k: DMatrix<f64>,
    /// Blending threshold on `(xᵀPx)^{-3}`.
    pub delta: f64,
    /// Set when `P` came from the Lyapunov equation.
    pub lyapunov: bool,
}

impl LocalDesign {
    /// LQR with `Q = q·I` or, for a vanishing input matrix, the Lyapunov
    /// solution with the same `Q`. `Δ` makes `{xᵀPx < Δ^{-1/3}}` the
    /// smallest level set containing `excluded`.
    pub fn design(a: &DMatrix<f64>, b: &DMatrix<f64>, q: f64, r: &DMatrix<f64>, excluded: &DomainBox) -> Result<Self> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidArgument(format!("state weight {q} must be positive")));
        }
        let n = a.nrows();
        let qm = DMatrix::identity(n, n) * q;
        let (p, k, lyapunov) = if b.norm() < 1e-8 {
            (solve_lyapunov(a, &qm)?, DMatrix::zeros(b.ncols(), n), true)
        } else {
            let p = solve_are(a, b, &qm, r)?;
            let k = r
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::InvalidArgument("R is singular".into()))?
                * b.transpose()
                * &p;
            (p, k, false)
        };
        if p.clone().cholesky().is_none() {
            return Err(Error::NotStabilizable("local Lyapunov matrix is not positive definite".into()));
        }
        let level = corners(excluded)
            .iter()
            .map(|v| quad(&p, v))
            .fold(0.0f64, f64::max);
        Ok(LocalDesign {
            p,
            k,
            delta: level.powi(-3),
            lyapunov,
        })
    }

    pub fn b_poly(&self) -> Polynomial {
        Polynomial::quadratic_form(&self.p)
    }
}

fn quad(p: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += x[i] * p[(i, j)] * x[j];
        }
    }
    s
}

fn corners(bx: &DomainBox) -> Vec<Vec<f64>> {
    let n = bx.dim();
    (0..1usize << n)
        .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { bx.hi[i] } else { bx.lo[i] }).collect())
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator_digest: String,
    pub solver_status: String,
    pub objective: f64,
    pub equality_residual: f64,
    pub min_gram_eig: f64,
    pub iterations: u32,
}

/// Synthesized controller `k = c / a` blended with the local design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerArtifact {
    pub a: Polynomial,
    pub c: Vec<Polynomial>,
    pub gamma: f64,
    pub alpha: u32,
    pub b: Polynomial,
    pub local: LocalDesign,
    /// `k = c / a` is used only where `a > a_floor`.
    pub a_floor: f64,
    /// Decision-substituted transport polynomial.
    pub transport: Polynomial,
    pub provenance: Provenance,
}

/// Input at one state and whether the rational law had to be skipped.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlEval {
    pub u: Vec<f64>,
    pub local_only: bool,
}

impl ControllerArtifact {
    /// Record the polynomials; `a_floor` is `1e-8 · max a` over `grid`.
    pub fn new(a: Polynomial, c: Vec<Polynomial>, gamma: f64, alpha: u32, local: LocalDesign, transport: Polynomial, grid: &DomainBox) -> Result<Self> {
        if a.is_zero() {
            return Err(Error::InvalidArgument("density numerator is identically zero".into()));
        }
        let amax = grid_points(grid, 41)
            .iter()
            .map(|x| a.eval(x))
            .fold(0.0f64, f64::max);
        Ok(ControllerArtifact {
            b: local.b_poly(),
            a,
            c,
            gamma,
            alpha,
            local,
            a_floor: 1e-8 * amax,
            transport,
            provenance: Provenance::default(),
        })
    }

    pub fn n(&self) -> usize {
        self.a.n_vars()
    }

    pub fn m(&self) -> usize {
        self.c.len()
    }

    /// `c(x) / a(x)`, or `None` where `a ≤ a_floor`.
    pub fn k_star(&self, x: &[f64]) -> Option<Vec<f64>> {
        let a = self.a.eval(x);
        (a > self.a_floor).then(|| self.c.iter().map(|c| c.eval(x) / a).collect())
    }

    pub fn k_local(&self, x: &[f64]) -> Vec<f64> {
        let k = &self.local.k;
        (0..k.nrows())
            .map(|j| -(0..k.ncols()).map(|i| k[(j, i)] * x[i]).sum::<f64>())
            .collect()
    }

    pub fn rho_local(&self, x: &[f64]) -> f64 {
        let v = self.b.eval(x);
        if v <= 0.0 {
            return f64::INFINITY;
        }
        (v.powi(-3) - self.local.delta).max(0.0)
    }

    /// `a / max(b, b_Δ)^α` with `b_Δ = Δ^{-1/3}` the boundary level of
    /// the local region.
    pub fn rho_global(&self, x: &[f64]) -> f64 {
        let level = self.local.delta.powf(-1.0 / 3.0);
        let b = self.b.eval(x).max(level);
        self.a.eval(x).max(0.0) / b.powi(self.alpha as i32)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<ControlEval> {
        let kl = self.k_local(x);
        let rl = self.rho_local(x);
        let ks = self.k_star(x);
        let ks = match ks {
            Some(k) => k,
            None => {
                return Ok(ControlEval { u: kl, local_only: true });
            }
        };
        if rl.is_infinite() {
            return Ok(ControlEval { u: kl, local_only: false });
        }
        let rn = self.rho_global(x);
        let tot = rl + rn;
        if !(tot > 0.0) {
            return Err(Error::InvalidArgument(format!("both blending weights vanish at {x:?}")));
        }
        let u = kl.iter().zip(&ks).map(|(l, s)| (rl * l + rn * s) / tot).collect();
        Ok(ControlEval { u, local_only: false })
    }

    /// Blended input; where both weights vanish the rational law is used.
    pub fn u(&self, x: &[f64]) -> Vec<f64> {
        match self.evaluate(x) {
            Ok(e) => e.u,
            Err(_) => self.k_star(x).unwrap_or_else(|| self.k_local(x)),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: ControllerArtifact = serde_json::from_str(s)?;
        if c.local.p.clone().cholesky().is_none() {
            return Err(Error::Parse("local matrix P is not positive definite".into()));
        }
        Ok(c)
    }
}

/// Cell-centered grid with `per_axis` points per coordinate.
pub fn grid_points(bx: &DomainBox, per_axis: usize) -> Vec<Vec<f64>> {
    let n = bx.dim();
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|i| {
                    let k = idx % per_axis;
                    idx /= per_axis;
                    let h = (bx.hi[i] - bx.lo[i]) / per_axis as f64;
                    bx.lo[i] + (k as f64 + 0.5) * h
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    /// Running discounted cost `∫_0^t e^{γs}(q + β uᵀRu) ds`.
    pub cost: Vec<f64>,
    pub diverged: bool,
}

impl Rollout {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// First time with `‖x‖ ≤ r`.
    pub fn first_hit(&self, r: f64) -> Option<f64> {
        self.states
            .iter()
            .zip(&self.times)
            .find(|(x, _)| norm(x) <= r)
            .map(|(_, &t)| t)
    }

    pub fn max_norm(&self) -> f64 {
        self.states.iter().map(|x| norm(x)).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let n = self.states.first().map_or(0, |x| x.len());
        let m = self.inputs.first().map_or(0, |u| u.len());
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut head = vec!["t".to_string()];
        head.extend((1..=n).map(|i| format!("x{i}")));
        head.extend((1..=m).map(|j| format!("u{j}")));
        head.push("cost".into());
        writeln!(f, "{}", head.join(","))?;
        for k in 0..self.states.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.states[k].iter().map(|v| v.to_string()));
            row.extend(self.inputs[k].iter().map(|v| v.to_string()));
            row.push(self.cost[k].to_string());
            writeln!(f, "{}", row.join(","))?;
        }
        f.flush()?;
        Ok(())
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Cost weights of a rollout.
#[derive(Clone, Debug)]
pub struct CostSpec {
    pub gamma: f64,
    pub beta: f64,
    pub q: Polynomial,
    pub r: DMatrix<f64>,
}

/// RK4 closed loop under `policy` with trapezoidal cost accumulation.
pub fn rollout_with(
    system: &ControlAffineSystem,
    policy: InputPolicy,
    x0: &[f64],
    dt: f64,
    t_final: f64,
    cost: &CostSpec,
) -> Result<Rollout> {
    let steps = (t_final / dt).round() as usize;
    let tr = simulate(system, &policy, x0, dt, steps, &SimLimits::default())?;
    let m = system.m();
    let times: Vec<f64> = (0..tr.states.len()).map(|k| k as f64 * dt).collect();
    let inputs: Vec<Vec<f64>> = tr.states.iter().map(|x| policy.eval(x, m)).collect();
    let integrand: Vec<f64> = tr
        .states
        .iter()
        .zip(&inputs)
        .zip(&times)
        .map(|((x, u), &t)| {
            let mut uru = 0.0;
            for i in 0..m {
                for j in 0..m {
                    uru += u[i] * cost.r[(i, j)] * u[j];
                }
            }
            (cost.gamma * t).exp() * (cost.q.eval(x) + cost.beta * uru)
        })
        .collect();
    let mut acc = vec![0.0; integrand.len()];
    for k in 1..integrand.len() {
        acc[k] = acc[k - 1] + 0.5 * dt * (integrand[k - 1] + integrand[k]);
    }
    Ok(Rollout {
        times,
        states: tr.states,
        inputs,
        cost: acc,
        diverged: tr.diverged,
    })
}

/// Closed loop under the blended controller.
pub fn rollout(
    system: &ControlAffineSystem,
    controller: &ControllerArtifact,
    x0: &[f64],
    dt: f64,
    t_final: f64,
    cost: &CostSpec,
) -> Result<Rollout> {
    if controller.n() != system.n || controller.m() != system.m() {
        return Err(Error::DimensionMismatch {
            expected: system.n,
            got: controller.n(),
        });
    }
    let c = Arc::new(controller.clone());
    rollout_with(system, InputPolicy::feedback(move |x| c.u(x)), x0, dt, t_final, cost)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub points: usize,
    pub min_value: f64,
    pub argmin: Vec<f64>,
    pub max_abs_value: f64,
    /// Fraction of grid points below `−tolerance`.
    pub violation_fraction: f64,
    pub tolerance: f64,
    /// Grid estimate of `∫_{X\N} a / b^α`.
    pub density_integral: f64,
    pub passed: bool,
    pub unchecked_assumptions: Vec<String>,
}

/// Evaluate `transport` on a cell-centered grid of `domain \ excluded`.
///
/// The tolerance is `tol · (1 + max |value|)`.
pub fn certify_density(
    transport: &Polynomial,
    a: &Polynomial,
    b: &Polynomial,
    alpha: u32,
    gamma: f64,
    domain: &DomainBox,
    excluded: &DomainBox,
    per_axis: usize,
    tol: f64,
) -> CertificateReport {
    let pts: Vec<Vec<f64>> = grid_points(domain, per_axis)
        .into_iter()
        .filter(|x| !excluded.contains(x))
        .collect();
    let cell: f64 = (0..domain.dim())
        .map(|i| (domain.hi[i] - domain.lo[i]) / per_axis as f64)
        .product();
    let vals: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|x| (transport.eval(x), a.eval(x) / b.eval(x).powi(alpha as i32)))
        .collect();
    let (mut min_value, mut argmin, mut max_abs, mut integral) = (f64::INFINITY, Vec::new(), 0.0f64, 0.0);
    for (x, &(v, d)) in pts.iter().zip(&vals) {
        if v < min_value {
            min_value = v;
            argmin = x.clone();
        }
        max_abs = max_abs.max(v.abs());
        integral += d * cell;
    }
    let tolerance = tol * (1.0 + max_abs);
    let bad = vals.iter().filter(|(v, _)| *v < -tolerance).count();
    let mut unchecked = Vec::new();
    if gamma > 0.0 {
        unchecked.push(format!(
            "growing discount γ = {gamma} presumes a.e. exponential stabilizability with a rate above γ"
        ));
    }
    CertificateReport {
        points: pts.len(),
        min_value,
        argmin,
        max_abs_value: max_abs,
        violation_fraction: if pts.is_empty() { 0.0 } else { bad as f64 / pts.len() as f64 },
        tolerance,
        density_integral: integral,
        passed: min_value >= -tolerance && integral.is_finite(),
        unchecked_assumptions: unchecked,
    }
}

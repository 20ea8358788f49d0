//! The finite-dimensional optimal control problem over rational densities
//! `ρ = a / b^α`, `ρ̄_j = c_j / b^α`, written as an [`SosProgram`].
//!
//! The transport constraint is built from the Perron-Frobenius generators
//! of a [`GeneratorSet`]: multiplying `∇·(fρ + Σ g_j ρ̄_j) − γρ` by
//! `b^{α+1}` gives
//!
//! ```text
//! T = (1+α) b ∇·(fa + Σ g_j c_j) − α ∇·(b f a + Σ b g_j c_j) − γ a b,
//! ```
//!
//! which is affine in the coefficients of `a` and `c_j`. Each divergence is
//! evaluated through `P_jᵀ` on dictionary coefficients and each product
//! with `b` through an exact change of basis.

mod program;

pub use program::{AffinePoly, DecisionBlock, LinExpr, PsdConstraint, SosConstraint, SosProgram};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gedmd::GeneratorSet;
use crate::polybasis::{quadrature_moments, BasisDictionary, DomainBox, Polynomial};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            other => Err(Error::Parse(format!("unknown norm `{other}`, expected l1 or l2"))),
        }
    }
}

/// Discounted optimal control problem data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcpSpec {
    pub gamma: f64,
    pub alpha: u32,
    pub beta: f64,
    /// State cost, nonnegative with `q(0) = 0`.
    pub q: Polynomial,
    #[serde(with = "crate::matio::mat")]
    pub r: DMatrix<f64>,
    /// Fixed positive denominator polynomial.
    pub b: Polynomial,
    pub domain: DomainBox,
    pub excluded: DomainBox,
    pub deg_a: usize,
    pub deg_c: usize,
    /// Degree of the L1 bounds `s_j ≥ |c_j|`.
    pub deg_s: usize,
    /// Degree of the L2 epigraph variable `w`; defaults to the full
    /// diagonal degree of the Schur matrix.
    #[serde(default)]
    pub deg_w: Option<usize>,
    pub norm: Norm,
    /// `Σ_j c_j² ≤ M a b^α` when set.
    #[serde(default)]
    pub input_bound: Option<f64>,
    /// The transport polynomial must dominate `slack_floor · b`.
    #[serde(default = "default_slack_floor")]
    pub slack_floor: f64,
    /// Require the transport inequality only on `X ∩ {b ≥ b_N}`, where
    /// `{b < b_N}` is the largest sublevel set of `b` inside `N`, through
    /// S-procedure multipliers.
    #[serde(default = "default_localize")]
    pub localize: bool,
}

fn default_slack_floor() -> f64 {
    1.0
}

fn default_localize() -> bool {
    true
}

impl OcpSpec {
    pub fn validate(&self, m: usize) -> Result<()> {
        let n = self.domain.dim();
        let bad = |s: String| Err(Error::InvalidArgument(s));
        if self.alpha == 0 {
            return bad("alpha must be a positive integer".into());
        }
        if !self.gamma.is_finite() || !(self.beta >= 0.0) || !self.beta.is_finite() {
            return bad("gamma must be finite and beta finite and nonnegative".into());
        }
        if !(self.slack_floor >= 0.0) {
            return bad("slack floor must be nonnegative".into());
        }
        if let Some(mb) = self.input_bound {
            if !(mb > 0.0) {
                return bad("input bound must be positive".into());
            }
        }
        if self.q.n_vars() != n || self.b.n_vars() != n || self.excluded.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: if self.q.n_vars() != n { self.q.n_vars() } else { self.b.n_vars() },
            });
        }
        if self.r.shape() != (m, m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.r.nrows(),
            });
        }
        let sym = (&self.r - self.r.transpose()).amax() <= 1e-12 * (1.0 + self.r.amax());
        if !sym || self.r.clone().cholesky().is_none() {
            return bad("R must be symmetric positive definite".into());
        }
        if !self.domain.strictly_contains(&self.excluded) {
            return bad("excluded box must lie strictly inside the domain".into());
        }
        if self.q.eval(&vec![0.0; n]).abs() > 1e-12 {
            return bad("state cost must vanish at the origin".into());
        }
        if self.norm == Norm::L1 && self.deg_s < self.deg_c {
            return bad(format!("deg(s) = {} is below deg(c) = {}", self.deg_s, self.deg_c));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x0b5e);
        let mut checked = 0;
        while checked < 1000 {
            let x: Vec<f64> = (0..n)
                .map(|i| rng.gen_range(self.domain.lo[i]..=self.domain.hi[i]))
                .collect();
            if self.excluded.contains(&x) {
                continue;
            }
            checked += 1;
            if !(self.b.eval(&x) > 0.0) {
                return Err(Error::SingularWeight { point: x });
            }
            if self.q.eval(&x) < -1e-12 {
                return bad(format!("state cost is negative at {x:?}"));
            }
        }
        Ok(())
    }

    /// Variable scaling mapping the domain into the unit box.
    pub fn scale(&self) -> Vec<f64> {
        self.domain
            .lo
            .iter()
            .zip(&self.domain.hi)
            .map(|(l, h)| l.abs().max(h.abs()))
            .collect()
    }

    /// Largest `r` with `{b < r} ⊆ N`, for a quadratic form `b = xᵀPx`.
    pub fn excluded_level(&self) -> Result<f64> {
        let n = self.domain.dim();
        let p = DMatrix::from_fn(n, n, |i, j| {
            let mut e = vec![0u8; n];
            e[i] += 1;
            e[j] += 1;
            let c = self.b.coeff(&crate::polybasis::Monomial::from_exponents(&e));
            if i == j {
                c
            } else {
                0.5 * c
            }
        });
        if (&Polynomial::quadratic_form(&p) - &self.b).max_abs_coeff() > 1e-12 * (1.0 + self.b.max_abs_coeff()) {
            return Err(Error::InvalidArgument("localization needs b to be a quadratic form".into()));
        }
        let pinv = p
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("b is not positive definite".into()))?;
        let mut level = f64::INFINITY;
        for i in 0..n {
            let h = self.excluded.hi[i].min(-self.excluded.lo[i]);
            level = level.min(h * h / pinv[(i, i)]);
        }
        if !(level > 0.0) {
            return Err(Error::InvalidArgument("excluded box must contain the origin in its interior".into()));
        }
        Ok(level)
    }

    pub fn z_degree(&self, dict: &BasisDictionary) -> usize {
        dict.max_degree() / 2 + 1
    }

    pub fn w_degree(&self, dict: &BasisDictionary) -> usize {
        self.deg_w.unwrap_or(2 * self.z_degree(dict))
    }
}

/// `b − b_N` and `(x_i − lo_i)(hi_i − x_i)`: nonnegative on `X \ N`.
pub fn localizers(spec: &OcpSpec) -> Result<Vec<Polynomial>> {
    let n = spec.domain.dim();
    let mut g = spec.b.clone();
    g.axpy(-spec.excluded_level()?, &Polynomial::constant(n, 1.0));
    let mut out = vec![g];
    for i in 0..n {
        let xi = Polynomial::var(n, i);
        let lo = &xi - &Polynomial::constant(n, spec.domain.lo[i]);
        let hi = &Polynomial::constant(n, spec.domain.hi[i]) - &xi;
        out.push(&lo * &hi);
    }
    Ok(out)
}

/// Block name of the `j`-th control coefficient polynomial (1-based).
pub fn c_name(j: usize) -> String {
    format!("c{j}")
}

pub fn s_name(j: usize) -> String {
    format!("s{j}")
}

fn block_len(dict: &BasisDictionary, deg: usize, what: &str) -> Result<usize> {
    if deg > dict.max_degree() {
        return Err(Error::DegreeOverflow {
            what: what.to_string(),
            required: deg,
            available: dict.max_degree(),
        });
    }
    Ok(dict.count_up_to(deg))
}

/// Contributions of single coefficients to `T`: entry `k` of the first list
/// is `T` for `a = ψ_k, c = 0`, entry `[j][k]` of the second is `T` for
/// `a = 0, c_j = ψ_k`.
pub fn transport_terms(
    gens: &GeneratorSet,
    b: &Polynomial,
    alpha: f64,
    gamma: f64,
    na: usize,
    nc: usize,
) -> Result<(Vec<Polynomial>, Vec<Vec<Polynomial>>)> {
    let dict = &gens.dict;
    let q = dict.size();
    if na > q || nc > q {
        return Err(Error::DegreeOverflow {
            what: "decision polynomial".into(),
            required: na.max(nc),
            available: q,
        });
    }
    let need = na.max(nc);
    // proj(b ψ_k) must be exact
    let bpsi: Vec<Result<(Polynomial, DVector<f64>)>> = (0..need)
        .into_par_iter()
        .map(|k| {
            let psi = dict.basis_function(&dict.indices()[k]);
            let prod = b * &psi;
            let pr = dict.from_monomial(&prod);
            if pr.overflow {
                return Err(Error::DegreeOverflow {
                    what: "product of b with a decision polynomial".into(),
                    required: b.degree() + psi.degree(),
                    available: dict.max_degree(),
                });
            }
            Ok((prod, pr.coeffs))
        })
        .collect();
    let bpsi = bpsi.into_iter().collect::<Result<Vec<_>>>()?;
    let img = |j: usize, v: &DVector<f64>| dict.to_monomial(&gens.transport(j, v));
    let unit = |k: usize| DVector::from_fn(q, |i, _| if i == k { 1.0 } else { 0.0 });
    let term = |j: usize, k: usize, with_gamma: bool| {
        let mut t = (b * &img(j, &unit(k))).scale(1.0 + alpha);
        t.axpy(-alpha, &img(j, &bpsi[k].1));
        if with_gamma && gamma != 0.0 {
            t.axpy(-gamma, &bpsi[k].0);
        }
        t
    };
    let ta: Vec<Polynomial> = (0..na).into_par_iter().map(|k| term(0, k, true)).collect();
    let tc: Vec<Vec<Polynomial>> = (1..=gens.m())
        .map(|j| (0..nc).into_par_iter().map(|k| term(j, k, false)).collect())
        .collect();
    Ok((ta, tc))
}

/// `T` as an affine polynomial in the program's `a` and `c_j` blocks.
pub fn build_constraint_poly(gens: &GeneratorSet, spec: &OcpSpec, prog: &SosProgram) -> Result<AffinePoly> {
    let missing = |n: &str| Error::InvalidArgument(format!("program has no decision block `{n}`"));
    let a = prog.block("a").ok_or_else(|| missing("a"))?;
    let mut cs = Vec::new();
    for j in 1..=gens.m() {
        let name = c_name(j);
        cs.push(prog.block(&name).ok_or_else(|| missing(&name))?);
    }
    let nc = cs.iter().map(|c| c.len).max().unwrap_or(0);
    let (ta, tc) = transport_terms(gens, &spec.b, spec.alpha as f64, spec.gamma, a.len, nc)?;
    let mut t = AffinePoly::zero(gens.dict.n_vars());
    for (k, p) in ta.iter().enumerate() {
        t.add_decision_term(a.offset + k, p);
    }
    for (blk, terms) in cs.iter().zip(&tc) {
        for (k, p) in terms.iter().enumerate().take(blk.len) {
            t.add_decision_term(blk.offset + k, p);
        }
    }
    Ok(t)
}

/// `d1 = ∫ q Ψ / b^α` and `d2 = ∫ Ψ_2 / b^α` over `X \ N`, where `Ψ_2` is the
/// dictionary of `w` (L2) or of `s_j` (L1).
pub fn objective_vectors(spec: &OcpSpec, dict: &Arc<BasisDictionary>) -> Result<(DVector<f64>, DVector<f64>)> {
    let alpha = spec.alpha as f64;
    let one = Polynomial::constant(dict.n_vars(), 1.0);
    let d1 = quadrature_moments(dict, &spec.q, &spec.b, alpha, &spec.domain, Some(&spec.excluded))?;
    let d2 = match spec.norm {
        Norm::L1 => quadrature_moments(dict, &one, &spec.b, alpha, &spec.domain, Some(&spec.excluded))?,
        Norm::L2 => {
            let wd = dict.with_degree(spec.w_degree(dict))?;
            quadrature_moments(&wd, &one, &spec.b, alpha, &spec.domain, Some(&spec.excluded))?
        }
    };
    Ok((d1, d2))
}

fn base_program(spec: &OcpSpec, gens: &GeneratorSet, d1: &DVector<f64>) -> Result<SosProgram> {
    spec.validate(gens.m())?;
    let dict = &gens.dict;
    if dict.domain() != &spec.domain {
        log::warn!("dictionary domain differs from the problem domain");
    }
    let mut prog = SosProgram::new(dict.n_vars());
    prog.scale = spec.scale();
    let na = block_len(dict, spec.deg_a, "a")?;
    let nc = block_len(dict, spec.deg_c, "c")?;
    if d1.len() < na {
        return Err(Error::DimensionMismatch {
            expected: na,
            got: d1.len(),
        });
    }
    let a_off = prog.add_decision("a", dict, na)?;
    for j in 1..=gens.m() {
        prog.add_decision(&c_name(j), dict, nc)?;
    }
    for k in 0..na {
        prog.objective.axpy(d1[k], &LinExpr::var(a_off + k, 1.0));
    }
    let mut t = build_constraint_poly(gens, spec, &prog)?;
    t.add_poly(-spec.slack_floor, &spec.b);
    let multipliers = if spec.localize { localizers(spec)? } else { vec![] };
    prog.sos.push(SosConstraint {
        name: "transport".into(),
        poly: t,
        multipliers,
    });
    prog.sos.push(SosConstraint {
        name: "a".into(),
        poly: prog.decision_poly("a")?,
        multipliers: vec![],
    });
    Ok(prog)
}

/// `min d1ᵀa + β Σ_j d2ᵀs_j` s.t. `T ∈ Σ`, `a ∈ Σ`, `s_j ± c_j ∈ Σ`.
pub fn build_l1_program(spec: &OcpSpec, gens: &GeneratorSet, d1: &DVector<f64>, d2: &DVector<f64>) -> Result<SosProgram> {
    if spec.norm != Norm::L1 {
        return Err(Error::InvalidArgument("specification asks for the L2 norm".into()));
    }
    let mut prog = base_program(spec, gens, d1)?;
    let dict = &gens.dict;
    let ns = block_len(dict, spec.deg_s, "s")?;
    if d2.len() < ns {
        return Err(Error::DimensionMismatch {
            expected: ns,
            got: d2.len(),
        });
    }
    for j in 1..=gens.m() {
        let off = prog.add_decision(&s_name(j), dict, ns)?;
        for k in 0..ns {
            prog.objective.axpy(spec.beta * d2[k], &LinExpr::var(off + k, 1.0));
        }
        let s = prog.decision_poly(&s_name(j))?;
        let c = prog.decision_poly(&c_name(j))?;
        let mut minus = s.clone();
        minus.axpy(-1.0, &c);
        let mut plus = s;
        plus.axpy(1.0, &c);
        prog.sos.push(SosConstraint {
            name: format!("{}-{}", s_name(j), c_name(j)),
            poly: minus,
            multipliers: vec![],
        });
        prog.sos.push(SosConstraint {
            name: format!("{}+{}", s_name(j), c_name(j)),
            poly: plus,
            multipliers: vec![],
        });
    }
    if let Some(mb) = spec.input_bound {
        add_input_bound(&mut prog, spec, gens.m(), mb)?;
    }
    Ok(prog)
}

/// `min d1ᵀa + β d2ᵀw` s.t. `T ∈ Σ`, `a ∈ Σ` and
/// `[[w, cᵀ], [c, a R⁻¹]] ⪰ 0` as a polynomial matrix.
pub fn build_l2_program(spec: &OcpSpec, gens: &GeneratorSet, d1: &DVector<f64>, d2: &DVector<f64>) -> Result<SosProgram> {
    if spec.norm != Norm::L2 {
        return Err(Error::InvalidArgument("specification asks for the L1 norm".into()));
    }
    let mut prog = base_program(spec, gens, d1)?;
    let dict = &gens.dict;
    let wd = dict.with_degree(spec.w_degree(dict))?;
    if d2.len() != wd.size() {
        return Err(Error::DimensionMismatch {
            expected: wd.size(),
            got: d2.len(),
        });
    }
    let off = prog.add_decision("w", &wd, wd.size())?;
    for k in 0..wd.size() {
        prog.objective.axpy(spec.beta * d2[k], &LinExpr::var(off + k, 1.0));
    }
    let m = gens.m();
    let r_inv = spec
        .r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("R is singular".into()))?;
    let a = prog.decision_poly("a")?;
    let mut cs = Vec::with_capacity(m);
    for j in 1..=m {
        cs.push(prog.decision_poly(&c_name(j))?);
    }
    let mut entries = vec![vec![AffinePoly::zero(prog.n_vars); m + 1]; m + 1];
    entries[0][0] = prog.decision_poly("w")?;
    for j in 0..m {
        entries[0][j + 1] = cs[j].clone();
        entries[j + 1][0] = cs[j].clone();
        for k in 0..m {
            let mut e = AffinePoly::zero(prog.n_vars);
            e.axpy(r_inv[(j, k)], &a);
            entries[j + 1][k + 1] = e;
        }
    }
    prog.psd.push(PsdConstraint {
        name: "schur".into(),
        entries,
        z_degree: spec.z_degree(dict),
    });
    if let Some(mb) = spec.input_bound {
        add_input_bound(&mut prog, spec, m, mb)?;
    }
    Ok(prog)
}

/// `Σ_j c_j² ≤ M a b^α` through `[[M a b^α, cᵀ], [c, I]] ⪰ 0`.
pub fn add_input_bound(prog: &mut SosProgram, spec: &OcpSpec, m: usize, bound: f64) -> Result<()> {
    if !(bound > 0.0) || !bound.is_finite() {
        return Err(Error::InvalidArgument("input bound must be positive and finite".into()));
    }
    if prog.psd.iter().any(|p| p.name == "input_bound") {
        return Err(Error::InvalidArgument("input bound already present".into()));
    }
    let n = prog.n_vars;
    let b_alpha = spec.b.pow(spec.alpha);
    let top = prog.decision_poly("a")?.mul_poly(&b_alpha.scale(bound));
    let mut entries = vec![vec![AffinePoly::zero(n); m + 1]; m + 1];
    entries[0][0] = top;
    for j in 1..=m {
        let c = prog.decision_poly(&c_name(j))?;
        entries[0][j] = c.clone();
        entries[j][0] = c;
        entries[j][j] = AffinePoly::from_poly(&Polynomial::constant(n, 1.0));
    }
    let d = prog
        .decisions
        .iter()
        .find(|b| b.name == "a")
        .map(|b| b.basis.max_degree)
        .unwrap_or(1);
    // every entry must fit in the diagonal expansion
    let widest = entries.iter().flatten().map(|e| e.degree()).max().unwrap_or(0);
    prog.psd.push(PsdConstraint {
        name: "input_bound".into(),
        entries,
        z_degree: (d / 2 + 1).max(widest.div_ceil(2)),
    });
    Ok(())
}

/// Objective vectors followed by the program for `spec.norm`.
pub fn build_program(spec: &OcpSpec, gens: &GeneratorSet) -> Result<SosProgram> {
    spec.validate(gens.m())?;
    let (d1, d2) = objective_vectors(spec, &gens.dict)?;
    match spec.norm {
        Norm::L1 => build_l1_program(spec, gens, &d1, &d2),
        Norm::L2 => build_l2_program(spec, gens, &d1, &d2),
    }
}

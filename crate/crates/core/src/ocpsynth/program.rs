//! Solver-independent SOS programs whose polynomial data are affine in a
//! vector of decision coefficients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polybasis::{BasisDescriptor, BasisDictionary, Monomial, Polynomial};

/// `constant + Σ_i terms[i] · v_i` over the global decision vector `v`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub constant: f64,
    pub terms: BTreeMap<usize, f64>,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr {
            constant: c,
            terms: BTreeMap::new(),
        }
    }

    pub fn var(i: usize, coeff: f64) -> Self {
        let mut terms = BTreeMap::new();
        if coeff != 0.0 {
            terms.insert(i, coeff);
        }
        LinExpr { constant: 0.0, terms }
    }

    pub fn axpy(&mut self, s: f64, other: &LinExpr) {
        if s == 0.0 {
            return;
        }
        self.constant += s * other.constant;
        for (&i, &v) in &other.terms {
            let e = self.terms.entry(i).or_insert(0.0);
            *e += s * v;
            if *e == 0.0 {
                self.terms.remove(&i);
            }
        }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(&i, &c)| c * v[i]).sum::<f64>()
    }

    /// No decision dependence and zero constant.
    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(self.constant.abs(), |m, v| m.max(v.abs()))
    }
}

/// Polynomial in `x` whose coefficients are [`LinExpr`]s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "AffineRepr", try_from = "AffineRepr")]
pub struct AffinePoly {
    n_vars: usize,
    coeffs: BTreeMap<Monomial, LinExpr>,
}

#[derive(Serialize, Deserialize)]
struct AffineRepr {
    n_vars: usize,
    terms: Vec<(Monomial, LinExpr)>,
}

impl From<AffinePoly> for AffineRepr {
    fn from(p: AffinePoly) -> Self {
        AffineRepr {
            n_vars: p.n_vars,
            terms: p.coeffs.into_iter().collect(),
        }
    }
}

impl TryFrom<AffineRepr> for AffinePoly {
    type Error = String;

    fn try_from(r: AffineRepr) -> std::result::Result<Self, String> {
        if r.terms.iter().any(|(m, _)| m.n_vars() != r.n_vars) {
            return Err("monomial arity mismatch".into());
        }
        Ok(AffinePoly {
            n_vars: r.n_vars,
            coeffs: r.terms.into_iter().collect(),
        })
    }
}

impl AffinePoly {
    pub fn zero(n_vars: usize) -> Self {
        AffinePoly {
            n_vars,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn from_poly(p: &Polynomial) -> Self {
        let mut out = Self::zero(p.n_vars());
        for (m, c) in p.terms() {
            out.coeffs.insert(m.clone(), LinExpr::constant(c));
        }
        out
    }

    /// `v_i · p(x)`.
    pub fn from_decision(i: usize, p: &Polynomial) -> Self {
        let mut out = Self::zero(p.n_vars());
        for (m, c) in p.terms() {
            out.coeffs.insert(m.clone(), LinExpr::var(i, c));
        }
        out
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &LinExpr)> {
        self.coeffs.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> Option<&LinExpr> {
        self.coeffs.get(m)
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: f64, other: &AffinePoly) {
        assert_eq!(self.n_vars, other.n_vars, "arity mismatch");
        for (m, le) in &other.coeffs {
            let e = self.coeffs.entry(m.clone()).or_default();
            e.axpy(s, le);
            if e.is_zero() {
                self.coeffs.remove(m);
            }
        }
    }

    /// `self += v_i · p(x)`.
    pub fn add_decision_term(&mut self, i: usize, p: &Polynomial) {
        for (m, c) in p.terms() {
            let e = self.coeffs.entry(m.clone()).or_default();
            e.axpy(c, &LinExpr::var(i, 1.0));
            if e.is_zero() {
                self.coeffs.remove(m);
            }
        }
    }

    pub fn add_poly(&mut self, s: f64, p: &Polynomial) {
        self.axpy(s, &AffinePoly::from_poly(p));
    }

    pub fn mul_poly(&self, p: &Polynomial) -> AffinePoly {
        let mut out = AffinePoly::zero(self.n_vars);
        for (m1, le) in &self.coeffs {
            for (m2, c) in p.terms() {
                let e = out.coeffs.entry(m1.mul(m2)).or_default();
                e.axpy(c, le);
            }
        }
        out.coeffs.retain(|_, le| !le.is_zero());
        out
    }

    /// Substitute `x_i = s_i y_i`, returning the polynomial in `y`.
    pub fn rescaled(&self, scale: &[f64]) -> AffinePoly {
        let mut out = AffinePoly::zero(self.n_vars);
        for (m, le) in &self.coeffs {
            let mut e = LinExpr::default();
            e.axpy(m.eval(scale), le);
            if !e.is_zero() {
                out.coeffs.insert(m.clone(), e);
            }
        }
        out
    }

    /// Structural degree: highest monomial with a non-trivial coefficient.
    pub fn degree(&self) -> usize {
        self.coeffs.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    /// Lowest degree with a non-trivial coefficient.
    pub fn min_degree(&self) -> usize {
        self.coeffs.keys().map(|m| m.degree()).min().unwrap_or(0)
    }

    /// Highest exponent of each variable over the support.
    pub fn max_exponents(&self) -> Vec<usize> {
        let mut e = vec![0usize; self.n_vars];
        for m in self.coeffs.keys() {
            for (i, &k) in m.exponents().iter().enumerate() {
                e[i] = e[i].max(k as usize);
            }
        }
        e
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn substitute(&self, v: &[f64]) -> Polynomial {
        Polynomial::from_terms(self.n_vars, self.coeffs.iter().map(|(m, le)| (m.clone(), le.eval(v))))
    }

    /// Value at `x` as a linear expression in the decisions.
    pub fn at_point(&self, x: &[f64]) -> LinExpr {
        let mut out = LinExpr::default();
        for (m, le) in &self.coeffs {
            out.axpy(m.eval(x), le);
        }
        out
    }

    /// Largest decision index referenced, if any.
    pub fn max_decision(&self) -> Option<usize> {
        self.coeffs.values().filter_map(|le| le.terms.keys().next_back().copied()).max()
    }
}

/// A named group of decision coefficients: entry `k` multiplies the `k`-th
/// function of the dictionary described by `basis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub basis: BasisDescriptor,
}

/// `poly = σ_0 + Σ_i σ_i · multipliers[i]` with every `σ` a sum of squares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SosConstraint {
    pub name: String,
    pub poly: AffinePoly,
    #[serde(default)]
    pub multipliers: Vec<Polynomial>,
}

/// `entries(x) = (z(x) ⊗ I_p)ᵀ D (z(x) ⊗ I_p)` with `D ⪰ 0` and `z` all
/// monomials up to `z_degree`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdConstraint {
    pub name: String,
    /// Symmetric `p × p`; only the upper triangle is read.
    pub entries: Vec<Vec<AffinePoly>>,
    pub z_degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SosProgram {
    pub n_vars: usize,
    pub decisions: Vec<DecisionBlock>,
    pub objective: LinExpr,
    pub sos: Vec<SosConstraint>,
    pub psd: Vec<PsdConstraint>,
    /// Every coefficient must vanish.
    #[serde(default)]
    pub equalities: Vec<(String, AffinePoly)>,
    /// Variable scaling `x = scale ∘ y` used when compiling.
    pub scale: Vec<f64>,
}

impl SosProgram {
    pub fn new(n_vars: usize) -> Self {
        SosProgram {
            n_vars,
            decisions: Vec::new(),
            objective: LinExpr::default(),
            sos: Vec::new(),
            psd: Vec::new(),
            equalities: Vec::new(),
            scale: vec![1.0; n_vars],
        }
    }

    pub fn n_decisions(&self) -> usize {
        self.decisions.last().map_or(0, |b| b.offset + b.len)
    }

    /// Declare the first `len` functions of `dict` as a decision block.
    pub fn add_decision(&mut self, name: &str, dict: &BasisDictionary, len: usize) -> Result<usize> {
        if self.block(name).is_some() {
            return Err(Error::InvalidArgument(format!("decision `{name}` declared twice")));
        }
        if len > dict.size() {
            return Err(Error::DegreeOverflow {
                what: format!("decision `{name}`"),
                required: len,
                available: dict.size(),
            });
        }
        let offset = self.n_decisions();
        self.decisions.push(DecisionBlock {
            name: name.to_string(),
            offset,
            len,
            basis: dict.descriptor().clone(),
        });
        Ok(offset)
    }

    pub fn block(&self, name: &str) -> Option<&DecisionBlock> {
        self.decisions.iter().find(|b| b.name == name)
    }

    /// `Σ_k v_{offset+k} ψ_k(x)` for a declared block.
    pub fn decision_poly(&self, name: &str) -> Result<AffinePoly> {
        let b = self
            .block(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown decision `{name}`")))?;
        let dict = BasisDictionary::from_descriptor(b.basis.clone())?;
        let mut p = AffinePoly::zero(self.n_vars);
        for k in 0..b.len {
            p.add_decision_term(b.offset + k, &dict.basis_function(&dict.indices()[k]));
        }
        Ok(p)
    }

    /// Values of one block inside a full decision vector.
    pub fn block_values<'a>(&self, name: &str, v: &'a [f64]) -> Option<&'a [f64]> {
        self.block(name).map(|b| &v[b.offset..b.offset + b.len])
    }

    /// Polynomial of a block for concrete decision values.
    pub fn block_poly(&self, name: &str, v: &[f64]) -> Result<Polynomial> {
        Ok(self.decision_poly(name)?.substitute(v))
    }

    pub fn validate(&self) -> Result<()> {
        let nd = self.n_decisions();
        let bad = |p: &AffinePoly| p.max_decision().is_some_and(|i| i >= nd) || p.n_vars() != self.n_vars;
        if self.objective.terms.keys().any(|&i| i >= nd) {
            return Err(Error::InvalidArgument("objective references an undeclared decision".into()));
        }
        for c in &self.sos {
            if bad(&c.poly) {
                return Err(Error::InvalidArgument(format!("constraint `{}` is malformed", c.name)));
            }
        }
        for c in &self.psd {
            let p = c.entries.len();
            if c.entries.iter().any(|r| r.len() != p) || c.entries.iter().flatten().any(bad) {
                return Err(Error::InvalidArgument(format!("matrix constraint `{}` is malformed", c.name)));
            }
        }
        for (name, e) in &self.equalities {
            if bad(e) {
                return Err(Error::InvalidArgument(format!("equality `{name}` is malformed")));
            }
        }
        if self.scale.len() != self.n_vars || self.scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidArgument("variable scale must be positive per variable".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: SosProgram = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::{BasisKind, DomainBox};

    #[test]
    fn affine_arithmetic() {
        let x = Polynomial::var(1, 0);
        let mut p = AffinePoly::from_decision(0, &x);
        p.add_poly(2.0, &Polynomial::constant(1, 1.0));
        let q = p.mul_poly(&x);
        assert_eq!(q.degree(), 2);
        assert_eq!(q.min_degree(), 1);
        let v = [3.0];
        assert_eq!(q.substitute(&v), Polynomial::from_exponents(1, &[(&[2], 3.0), (&[1], 2.0)]));
        let le = q.at_point(&[2.0]);
        assert_eq!(le.eval(&v), 16.0);
        let mut r = q.clone();
        r.axpy(-1.0, &q);
        assert!(r.is_zero());
    }

    #[test]
    fn decision_blocks_and_json() {
        let dict = BasisDictionary::build(BasisKind::LegendreTensor, 2, 3, DomainBox::cube(2, -2.0, 2.0).unwrap()).unwrap();
        let mut prog = SosProgram::new(2);
        assert_eq!(prog.add_decision("a", &dict, 3).unwrap(), 0);
        assert_eq!(prog.add_decision("c1", &dict, 6).unwrap(), 3);
        assert!(prog.add_decision("a", &dict, 1).is_err());
        assert!(prog.add_decision("big", &dict, 11).is_err());
        let a = prog.decision_poly("a").unwrap();
        let v: Vec<f64> = (0..9).map(|i| i as f64 * 0.5 - 1.0).collect();
        let direct = dict.to_monomial(&nalgebra::DVector::from_fn(dict.size(), |k, _| if k < 3 { v[k] } else { 0.0 }));
        assert!((&a.substitute(&v) - &direct).max_abs_coeff() < 1e-14);
        prog.objective = LinExpr::var(4, 2.0);
        prog.sos.push(SosConstraint {
            name: "a".into(),
            poly: a,
            multipliers: vec![],
        });
        let back = SosProgram::from_json(&prog.to_json().unwrap()).unwrap();
        assert_eq!(back, prog);
        prog.objective = LinExpr::var(40, 1.0);
        assert!(prog.validate().is_err());
    }
}

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::monomial::Monomial;

/// Sparse multivariate polynomial in monomial form.
///
/// Terms are kept in graded lexicographic order; exact zeros are dropped.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PolyRepr", try_from = "PolyRepr")]
pub struct Polynomial {
    n_vars: usize,
    terms: BTreeMap<Monomial, f64>,
}

/// Wire form: `{"n_vars": n, "terms": [[[e1, .., en], coeff], ..]}`.
#[derive(Serialize, Deserialize)]
struct PolyRepr {
    n_vars: usize,
    terms: Vec<(Monomial, f64)>,
}

impl From<Polynomial> for PolyRepr {
    fn from(p: Polynomial) -> Self {
        PolyRepr {
            n_vars: p.n_vars,
            terms: p.terms.into_iter().collect(),
        }
    }
}

impl TryFrom<PolyRepr> for Polynomial {
    type Error = String;

    fn try_from(r: PolyRepr) -> Result<Self, String> {
        if let Some((m, _)) = r.terms.iter().find(|(m, _)| m.n_vars() != r.n_vars) {
            return Err(format!("monomial {m} has arity {}, expected {}", m.n_vars(), r.n_vars));
        }
        Ok(Polynomial::from_terms(r.n_vars, r.terms))
    }
}

impl Polynomial {
    pub fn zero(n_vars: usize) -> Self {
        Polynomial {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, c: f64) -> Self {
        let mut p = Self::zero(n_vars);
        p.add_term(Monomial::one(n_vars), c);
        p
    }

    /// The coordinate function `x_i` (zero-based).
    pub fn var(n_vars: usize, i: usize) -> Self {
        let mut p = Self::zero(n_vars);
        p.add_term(Monomial::var(n_vars, i), 1.0);
        p
    }

    pub fn from_terms<I>(n_vars: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, f64)>,
    {
        let mut p = Self::zero(n_vars);
        for (m, c) in terms {
            assert_eq!(m.n_vars(), n_vars, "monomial arity mismatch");
            p.add_term(m, c);
        }
        p
    }

    /// Convenience constructor from `(exponents, coefficient)` pairs.
    pub fn from_exponents(n_vars: usize, terms: &[(&[u8], f64)]) -> Self {
        Self::from_terms(
            n_vars,
            terms
                .iter()
                .map(|(e, c)| (Monomial::from_exponents(e), *c)),
        )
    }

    /// `x^T P x` for a symmetric matrix given row-major.
    pub fn quadratic_form(p: &nalgebra::DMatrix<f64>) -> Self {
        let n = p.nrows();
        let mut out = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                let mut e = vec![0u8; n];
                e[i] += 1;
                e[j] += 1;
                out.add_term(Monomial::from_exponents(&e), p[(i, j)]);
            }
        }
        out
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Total degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n_vars, "evaluation point arity");
        self.terms.iter().map(|(m, c)| c * m.eval(x)).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zero(self.n_vars);
        }
        Polynomial {
            n_vars: self.n_vars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect(),
        }
    }

    /// `self += s * other` without allocating an intermediate.
    pub fn axpy(&mut self, s: f64, other: &Polynomial) {
        assert_eq!(self.n_vars, other.n_vars);
        if s == 0.0 {
            return;
        }
        for (m, c) in &other.terms {
            self.add_term(m.clone(), s * c);
        }
    }

    pub fn partial(&self, i: usize) -> Self {
        let mut out = Self::zero(self.n_vars);
        for (m, c) in &self.terms {
            if let Some((k, r)) = m.derivative(i) {
                out.add_term(r, k * c);
            }
        }
        out
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.n_vars).map(|i| self.partial(i)).collect()
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::constant(self.n_vars, 1.0);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Drop terms with `|c| <= tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Polynomial {
            n_vars: self.n_vars,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.abs() > tol)
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }

    /// Substitute `x_i = s_i * y_i`, returning the polynomial in `y`.
    pub fn rescaled(&self, scale: &[f64]) -> Self {
        Polynomial {
            n_vars: self.n_vars,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c * m.eval(scale)))
                .collect(),
        }
    }

    /// Keep only terms of total degree `<= d`.
    pub fn truncated(&self, d: usize) -> Self {
        Polynomial {
            n_vars: self.n_vars,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() <= d)
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }
}

/// `Σ_j ∂ field_j / ∂ x_j` in monomial form.
pub fn divergence_of_field(field: &[Polynomial]) -> Polynomial {
    let n = field.first().map(|p| p.n_vars()).unwrap_or(0);
    assert_eq!(field.len(), n, "field must have one component per variable");
    let mut out = Polynomial::zero(n);
    for (j, fj) in field.iter().enumerate() {
        out.axpy(1.0, &fj.partial(j));
    }
    out
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " {} ", if *c < 0.0 { '-' } else { '+' })?;
            } else if *c < 0.0 {
                write!(f, "-")?;
            }
            if m.degree() == 0 {
                write!(f, "{}", c.abs())?;
            } else {
                write!(f, "{}*{}", c.abs(), m)?;
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.n_vars, rhs.n_vars);
        let mut out = Polynomial::zero(self.n_vars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

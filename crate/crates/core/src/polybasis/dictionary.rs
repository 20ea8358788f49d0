use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::legendre;
use super::monomial::{monomials_up_to, Monomial};
use super::polynomial::Polynomial;
use crate::error::{Error, Result};

/// Axis-aligned box `Π [lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "box bounds need equal nonzero length, got {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "empty or non-finite box {lo:?} x {hi:?}"
            )));
        }
        Ok(DomainBox { lo, hi })
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(xi, (l, h))| *xi >= *l && *xi <= *h)
    }

    /// Whether `other` lies strictly inside `self`.
    pub fn strictly_contains(&self, other: &DomainBox) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| self.lo[i] < other.lo[i] && other.hi[i] < self.hi[i])
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (h - l)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Monomial,
    LegendreTensor,
}

/// Everything needed to rebuild a dictionary; this is what gets serialized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisDescriptor {
    pub kind: BasisKind,
    pub n_vars: usize,
    pub max_degree: usize,
    pub domain: DomainBox,
}

/// Polynomial dictionary `Ψ(x) = [ψ_1(x), ..., ψ_Q(x)]`, total-degree truncated.
///
/// Basis functions are indexed by multi-indices in graded lexicographic
/// order, so for the Legendre kind `ψ_α(x) = Π_i P_{α_i}(s_i(x_i))` with
/// `s_i` the affine map of `[lo_i, hi_i]` onto `[-1, 1]`. The common
/// monomial list coincides with the multi-index list, which makes `C_Ψ`
/// square.
#[derive(Clone, Debug)]
pub struct BasisDictionary {
    desc: BasisDescriptor,
    indices: Vec<Monomial>,
    index_of: HashMap<Monomial, usize>,
    c_psi: DMatrix<f64>,
    c_x: DMatrix<f64>,
    shift: Vec<f64>,
    half_width: Vec<f64>,
}

/// Result of expressing a monomial-form polynomial in a dictionary.
#[derive(Clone, Debug)]
pub struct Projection {
    pub coeffs: DVector<f64>,
    /// Set when the input had content outside `span(Ψ)` that was dropped.
    pub overflow: bool,
    /// Largest magnitude among dropped basis coefficients.
    pub dropped: f64,
}

impl BasisDictionary {
    pub fn build(
        kind: BasisKind,
        n_vars: usize,
        max_degree: usize,
        domain: DomainBox,
    ) -> Result<Arc<Self>> {
        Self::from_descriptor(BasisDescriptor {
            kind,
            n_vars,
            max_degree,
            domain,
        })
    }

    pub fn from_descriptor(desc: BasisDescriptor) -> Result<Arc<Self>> {
        if desc.max_degree == 0 {
            return Err(Error::InvalidArgument(
                "dictionary degree must be >= 1 so that x is in its span".into(),
            ));
        }
        if desc.n_vars == 0 || desc.domain.dim() != desc.n_vars {
            return Err(Error::DimensionMismatch {
                expected: desc.n_vars,
                got: desc.domain.dim(),
            });
        }
        if desc.max_degree > 40 {
            return Err(Error::InvalidArgument("dictionary degree above 40".into()));
        }
        let indices = monomials_up_to(desc.n_vars, desc.max_degree);
        let index_of = indices
            .iter()
            .enumerate()
            .map(|(k, m)| (m.clone(), k))
            .collect();
        let shift = desc.domain.center();
        let half_width = desc.domain.half_widths();
        let mut dict = BasisDictionary {
            desc,
            indices,
            index_of,
            c_psi: DMatrix::zeros(0, 0),
            c_x: DMatrix::zeros(0, 0),
            shift,
            half_width,
        };
        dict.c_psi = dict.build_c_psi();
        let n = dict.n_vars();
        let mut c_x = DMatrix::zeros(dict.size(), n);
        for i in 0..n {
            let proj = dict.from_monomial(&Polynomial::var(n, i));
            debug_assert!(!proj.overflow);
            c_x.set_column(i, &proj.coeffs);
        }
        dict.c_x = c_x;
        Ok(Arc::new(dict))
    }

    pub fn descriptor(&self) -> &BasisDescriptor {
        &self.desc
    }

    pub fn kind(&self) -> BasisKind {
        self.desc.kind
    }

    pub fn n_vars(&self) -> usize {
        self.desc.n_vars
    }

    pub fn max_degree(&self) -> usize {
        self.desc.max_degree
    }

    pub fn domain(&self) -> &DomainBox {
        &self.desc.domain
    }

    /// Q, the number of basis functions.
    pub fn size(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[Monomial] {
        &self.indices
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.index_of.get(m).copied()
    }

    /// Number of basis functions of total degree `<= d`, which are the first ones.
    pub fn count_up_to(&self, d: usize) -> usize {
        self.indices.iter().take_while(|m| m.degree() <= d).count()
    }

    /// `Q x M` matrix with `Ψ(x) = C_Ψ · M(x)` over the common monomial list.
    pub fn c_psi(&self) -> &DMatrix<f64> {
        &self.c_psi
    }

    /// `Q x n` matrix with `x = C_xᵀ Ψ(x)`.
    pub fn c_x(&self) -> &DMatrix<f64> {
        &self.c_x
    }

    /// The common monomial list `M(x)`.
    pub fn monomials(&self) -> &[Monomial] {
        &self.indices
    }

    fn build_c_psi(&self) -> DMatrix<f64> {
        let q = self.size();
        match self.kind() {
            BasisKind::Monomial => DMatrix::identity(q, q),
            BasisKind::LegendreTensor => {
                let mut c = DMatrix::zeros(q, q);
                for (k, alpha) in self.indices.iter().enumerate() {
                    let p = self.basis_function(alpha);
                    for (m, v) in p.terms() {
                        let j = self.index_of[m];
                        c[(k, j)] = v;
                    }
                }
                c
            }
        }
    }

    /// `ψ_α` in monomial form.
    pub fn basis_function(&self, alpha: &Monomial) -> Polynomial {
        let n = self.n_vars();
        match self.kind() {
            BasisKind::Monomial => Polynomial::from_terms(n, [(alpha.clone(), 1.0)]),
            BasisKind::LegendreTensor => {
                let coeffs = legendre::monomial_coefficients(alpha.degree());
                let mut out = Polynomial::constant(n, 1.0);
                for (i, &e) in alpha.exponents().iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    // P_e(s) with s = (x_i - shift_i) / h_i
                    let mut s_poly = Polynomial::zero(n);
                    for (j, &cj) in coeffs[e as usize].iter().enumerate() {
                        let mut ex = vec![0u8; n];
                        ex[i] = j as u8;
                        s_poly.add_term(Monomial::from_exponents(&ex), cj);
                    }
                    let mut scale = vec![1.0; n];
                    let mut shift = vec![0.0; n];
                    scale[i] = 1.0 / self.half_width[i];
                    shift[i] = -self.shift[i] / self.half_width[i];
                    let factor = affine_substitute(&s_poly, &scale, &shift);
                    out = &out * &factor;
                }
                out
            }
        }
    }

    fn scaled(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.shift.iter().zip(&self.half_width))
            .map(|(xi, (c, h))| (xi - c) / h)
            .collect()
    }

    pub fn eval_basis(&self, x: &[f64]) -> DVector<f64> {
        assert_eq!(x.len(), self.n_vars(), "point dimension");
        let d = self.max_degree();
        match self.kind() {
            BasisKind::Monomial => {
                let pows: Vec<Vec<f64>> = x.iter().map(|&xi| powers(xi, d)).collect();
                DVector::from_iterator(
                    self.size(),
                    self.indices.iter().map(|m| {
                        m.exponents()
                            .iter()
                            .enumerate()
                            .map(|(i, &e)| pows[i][e as usize])
                            .product::<f64>()
                    }),
                )
            }
            BasisKind::LegendreTensor => {
                let s = self.scaled(x);
                let vals: Vec<Vec<f64>> = s.iter().map(|&si| legendre::values(d, si)).collect();
                DVector::from_iterator(
                    self.size(),
                    self.indices.iter().map(|m| {
                        m.exponents()
                            .iter()
                            .enumerate()
                            .map(|(i, &e)| vals[i][e as usize])
                            .product::<f64>()
                    }),
                )
            }
        }
    }

    /// `Q x n` matrix of analytic partial derivatives `∂ψ_k / ∂x_j`.
    pub fn grad_basis(&self, x: &[f64]) -> DMatrix<f64> {
        assert_eq!(x.len(), self.n_vars(), "point dimension");
        let n = self.n_vars();
        let d = self.max_degree();
        let (vals, ders): (Vec<Vec<f64>>, Vec<Vec<f64>>) = match self.kind() {
            BasisKind::Monomial => x
                .iter()
                .map(|&xi| {
                    let p = powers(xi, d);
                    let dp = (0..=d)
                        .map(|k| if k == 0 { 0.0 } else { k as f64 * p[k - 1] })
                        .collect();
                    (p, dp)
                })
                .unzip(),
            BasisKind::LegendreTensor => self
                .scaled(x)
                .iter()
                .enumerate()
                .map(|(i, &si)| {
                    let (p, mut dp) = legendre::values_and_derivatives(d, si);
                    dp.iter_mut().for_each(|v| *v /= self.half_width[i]);
                    (p, dp)
                })
                .unzip(),
        };
        let mut g = DMatrix::zeros(self.size(), n);
        for (k, m) in self.indices.iter().enumerate() {
            let e = m.exponents();
            for j in 0..n {
                if e[j] == 0 {
                    continue;
                }
                let mut prod = 1.0;
                for i in 0..n {
                    prod *= if i == j {
                        ders[i][e[i] as usize]
                    } else {
                        vals[i][e[i] as usize]
                    };
                }
                g[(k, j)] = prod;
            }
        }
        g
    }

    /// Monomial form of `coeffsᵀ Ψ(x)`, i.e. `C_Ψᵀ coeffs` over `M(x)`.
    pub fn to_monomial(&self, coeffs: &DVector<f64>) -> Polynomial {
        assert_eq!(coeffs.len(), self.size(), "coefficient length");
        let m = self.c_psi.tr_mul(coeffs);
        Polynomial::from_terms(
            self.n_vars(),
            self.indices
                .iter()
                .zip(m.iter())
                .filter(|(_, v)| **v != 0.0)
                .map(|(mono, v)| (mono.clone(), *v)),
        )
    }

    /// Express a monomial-form polynomial in this dictionary.
    ///
    /// Exact when the polynomial lies in `span(Ψ)`. Otherwise the content
    /// of total degree above `max_degree` is dropped: for the Legendre kind
    /// this is the L2 projection on the domain box (higher Legendre modes
    /// are orthogonal to lower ones), for monomials plain truncation.
    pub fn from_monomial(&self, p: &Polynomial) -> Projection {
        assert_eq!(p.n_vars(), self.n_vars(), "polynomial arity");
        let q = self.size();
        let mut coeffs = DVector::zeros(q);
        let mut dropped: f64 = 0.0;
        match self.kind() {
            BasisKind::Monomial => {
                for (m, c) in p.terms() {
                    match self.index_of.get(m) {
                        Some(&k) => coeffs[k] += c,
                        None => dropped = dropped.max(c.abs()),
                    }
                }
            }
            BasisKind::LegendreTensor => {
                let n = self.n_vars();
                let scale = self.half_width.clone();
                let shift = self.shift.clone();
                // p(x) with x = h s + center, as a polynomial in s
                let in_s = affine_substitute(p, &scale, &shift);
                let deg = in_s.degree().max(1);
                let to_leg = monomial_to_legendre(deg);
                let mut acc: HashMap<Monomial, f64> = HashMap::new();
                for (m, c) in in_s.terms() {
                    // s^β = Π_i Σ_k T[β_i][k] P_k(s_i)
                    let mut partial: Vec<(Vec<u8>, f64)> = vec![(Vec::with_capacity(n), c)];
                    for &e in m.exponents() {
                        let row = &to_leg[e as usize];
                        let mut next = Vec::with_capacity(partial.len() * row.len());
                        for (idx, v) in &partial {
                            for (k, &t) in row.iter().enumerate() {
                                if t == 0.0 {
                                    continue;
                                }
                                let mut i2 = idx.clone();
                                i2.push(k as u8);
                                next.push((i2, v * t));
                            }
                        }
                        partial = next;
                    }
                    for (idx, v) in partial {
                        *acc.entry(Monomial::from_exponents(&idx)).or_insert(0.0) += v;
                    }
                }
                for (alpha, v) in acc {
                    match self.index_of.get(&alpha) {
                        Some(&k) => coeffs[k] += v,
                        None => dropped = dropped.max(v.abs()),
                    }
                }
            }
        }
        let scale = p.max_abs_coeff().max(1.0);
        Projection {
            coeffs,
            overflow: dropped > 1e-12 * scale,
            dropped,
        }
    }

    /// Dictionary of the same kind and domain with a different degree.
    pub fn with_degree(&self, max_degree: usize) -> Result<Arc<Self>> {
        let mut desc = self.desc.clone();
        desc.max_degree = max_degree;
        Self::from_descriptor(desc)
    }
}

fn powers(x: f64, d: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(d + 1);
    let mut v = 1.0;
    for _ in 0..=d {
        p.push(v);
        v *= x;
    }
    p
}

/// `p(scale ∘ y + shift)` as a polynomial in `y`.
pub fn affine_substitute(p: &Polynomial, scale: &[f64], shift: &[f64]) -> Polynomial {
    let n = p.n_vars();
    let deg = p.degree();
    // binom expansions of (scale_i y_i + shift_i)^e, cached per variable and exponent
    let mut cache: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut rows = vec![vec![1.0]];
        for e in 1..=deg {
            let prev: &Vec<f64> = &rows[e - 1];
            let mut next = vec![0.0; e + 1];
            for (j, &v) in prev.iter().enumerate() {
                next[j] += v * shift[i];
                next[j + 1] += v * scale[i];
            }
            rows.push(next);
        }
        cache.push(rows);
    }
    let mut out = Polynomial::zero(n);
    for (m, c) in p.terms() {
        let mut partial: Vec<(Vec<u8>, f64)> = vec![(Vec::with_capacity(n), c)];
        for (i, &e) in m.exponents().iter().enumerate() {
            let row = &cache[i][e as usize];
            let mut next = Vec::with_capacity(partial.len() * row.len());
            for (idx, v) in &partial {
                for (j, &t) in row.iter().enumerate() {
                    if t == 0.0 {
                        continue;
                    }
                    let mut i2 = idx.clone();
                    i2.push(j as u8);
                    next.push((i2, v * t));
                }
            }
            partial = next;
        }
        for (idx, v) in partial {
            out.add_term(Monomial::from_exponents(&idx), v);
        }
    }
    out
}

/// `T[j][k]` with `t^j = Σ_k T[j][k] P_k(t)`.
fn monomial_to_legendre(max_deg: usize) -> Vec<Vec<f64>> {
    let c = legendre::monomial_coefficients(max_deg);
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(max_deg + 1);
    for j in 0..=max_deg {
        // t^j = (P_j - Σ_{l<j} c[j][l] t^l) / c[j][j]
        let mut row = vec![0.0; j + 1];
        row[j] = 1.0 / c[j][j];
        for l in 0..j {
            let w = -c[j][l] / c[j][j];
            if w == 0.0 {
                continue;
            }
            for (k, &v) in t[l].iter().enumerate() {
                row[k] += w * v;
            }
        }
        t.push(row);
    }
    t
}

/// A polynomial held as a coefficient vector over a dictionary.
#[derive(Clone, Debug)]
pub struct BasisPoly {
    pub dict: Arc<BasisDictionary>,
    pub coeffs: DVector<f64>,
}

/// Outcome of a product: either representable in the target dictionary or not.
#[derive(Clone, Debug)]
pub enum Product {
    InBasis(BasisPoly),
    Overflow(Polynomial),
}

#[derive(Serialize, Deserialize)]
struct BasisPolyJson {
    basis: BasisDescriptor,
    coeffs: Vec<f64>,
}

impl BasisPoly {
    pub fn new(dict: Arc<BasisDictionary>, coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.len() != dict.size() {
            return Err(Error::DimensionMismatch {
                expected: dict.size(),
                got: coeffs.len(),
            });
        }
        Ok(BasisPoly { dict, coeffs })
    }

    /// Exact conversion; fails on content outside the dictionary span.
    pub fn from_monomial(dict: &Arc<BasisDictionary>, p: &Polynomial) -> Result<Self> {
        let proj = dict.from_monomial(p);
        if proj.overflow {
            return Err(Error::DegreeOverflow {
                what: "polynomial".into(),
                required: p.degree(),
                available: dict.max_degree(),
            });
        }
        Ok(BasisPoly {
            dict: dict.clone(),
            coeffs: proj.coeffs,
        })
    }

    pub fn to_monomial(&self) -> Polynomial {
        self.dict.to_monomial(&self.coeffs)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.dict.eval_basis(x).dot(&self.coeffs)
    }

    pub fn mul(&self, other: &BasisPoly) -> Product {
        let prod = &self.to_monomial() * &other.to_monomial();
        let proj = self.dict.from_monomial(&prod);
        if proj.overflow {
            Product::Overflow(prod)
        } else {
            Product::InBasis(BasisPoly {
                dict: self.dict.clone(),
                coeffs: proj.coeffs,
            })
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(BasisPolyJson {
            basis: self.dict.descriptor().clone(),
            coeffs: self.coeffs.iter().copied().collect(),
        })
        .expect("basis polynomial serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let raw: BasisPolyJson = serde_json::from_value(v.clone())?;
        let dict = BasisDictionary::from_descriptor(raw.basis)?;
        Self::new(dict, DVector::from_vec(raw.coeffs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn legendre_1d(deg: usize) -> Arc<BasisDictionary> {
        BasisDictionary::build(
            BasisKind::LegendreTensor,
            1,
            deg,
            DomainBox::cube(1, -1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn monomial_dictionary_1d() {
        let d = BasisDictionary::build(BasisKind::Monomial, 1, 2, DomainBox::cube(1, -1.0, 1.0).unwrap())
            .unwrap();
        assert_eq!(d.size(), 3);
        assert_eq!(d.eval_basis(&[2.0]).as_slice(), &[1.0, 2.0, 4.0]);
        assert_eq!(d.grad_basis(&[2.0]).as_slice(), &[0.0, 1.0, 4.0]);
        assert_eq!(d.c_psi(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn degree_zero_rejected() {
        let r = BasisDictionary::build(BasisKind::Monomial, 2, 0, DomainBox::cube(2, -1.0, 1.0).unwrap());
        assert!(r.is_err());
    }

    #[test]
    fn legendre_values_at_one_and_zero() {
        let d = legendre_1d(2);
        assert_eq!(d.eval_basis(&[1.0]).as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(d.eval_basis(&[0.0]).as_slice(), &[1.0, 0.0, -0.5]);
        assert_eq!(d.grad_basis(&[0.0])[(2, 0)], 0.0);
    }

    #[test]
    fn legendre_round_trip_x_squared() {
        let d = legendre_1d(2);
        let x2 = Polynomial::from_exponents(1, &[(&[2], 1.0)]);
        let proj = d.from_monomial(&x2);
        assert!(!proj.overflow);
        // x^2 = (1/3) P0 + (2/3) P2
        assert_relative_eq!(proj.coeffs[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(proj.coeffs[2], 2.0 / 3.0, epsilon = 1e-15);
        let back = d.to_monomial(&proj.coeffs).pruned(1e-14);
        assert_eq!(back, x2);
    }

    #[test]
    fn c_x_recovers_coordinates() {
        let dom = DomainBox::new(vec![-5.0, -2.0], vec![5.0, 4.0]).unwrap();
        let d = BasisDictionary::build(BasisKind::LegendreTensor, 2, 3, dom).unwrap();
        let x = [1.3, -0.4];
        let psi = d.eval_basis(&x);
        let rec = d.c_x().tr_mul(&psi);
        assert_relative_eq!(rec[0], 1.3, epsilon = 1e-13);
        assert_relative_eq!(rec[1], -0.4, epsilon = 1e-13);
    }

    #[test]
    fn from_monomial_agrees_with_c_psi_pseudo_inverse() {
        let dom = DomainBox::new(vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
        let d = BasisDictionary::build(BasisKind::LegendreTensor, 2, 5, dom).unwrap();
        let p = Polynomial::from_exponents(
            2,
            &[(&[0, 0], 0.7), (&[1, 2], -1.1), (&[3, 1], 0.25), (&[0, 5], 0.01)],
        );
        let tensor = d.from_monomial(&p).coeffs;
        let pinv = d.c_psi().transpose().pseudo_inverse(1e-14).unwrap();
        let mono: DVector<f64> =
            DVector::from_iterator(d.size(), d.monomials().iter().map(|m| p.coeff(m)));
        let via_pinv = pinv * mono;
        for k in 0..d.size() {
            assert_relative_eq!(tensor[k], via_pinv[k], epsilon = 1e-8, max_relative = 1e-8);
        }
    }

    #[test]
    fn product_overflow_flagged() {
        let d = BasisDictionary::build(BasisKind::Monomial, 1, 2, DomainBox::cube(1, -1.0, 1.0).unwrap())
            .unwrap();
        let x = BasisPoly::from_monomial(&d, &Polynomial::var(1, 0)).unwrap();
        match x.mul(&x) {
            Product::InBasis(p) => assert_eq!(p.coeffs.as_slice(), &[0.0, 0.0, 1.0]),
            Product::Overflow(_) => panic!("x*x fits in degree 2"),
        }
        let x2 = BasisPoly::from_monomial(&d, &Polynomial::from_exponents(1, &[(&[2], 1.0)])).unwrap();
        assert!(matches!(x2.mul(&x), Product::Overflow(_)));
        let one = BasisPoly::from_monomial(&d, &Polynomial::constant(1, 1.0)).unwrap();
        match one.mul(&x2) {
            Product::InBasis(p) => assert_eq!(p.coeffs, x2.coeffs),
            Product::Overflow(_) => panic!(),
        }
    }

    #[test]
    fn json_round_trip() {
        let d = legendre_1d(3);
        let p = BasisPoly::new(d, DVector::from_vec(vec![1.0, -2.0, 0.5, 0.25])).unwrap();
        let v = p.to_json();
        assert_eq!(v["basis"]["kind"], "legendre-tensor");
        let q = BasisPoly::from_json(&v).unwrap();
        assert_eq!(q.coeffs, p.coeffs);
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn legendre_coefficients_round_trip(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 15),
            lo in -3.0f64..-0.5,
            hi in 0.5f64..3.0,
            x1 in 0.0f64..1.0,
            x2 in 0.0f64..1.0,
        ) {
            let dict = BasisDictionary::build(BasisKind::LegendreTensor, 2, 4, DomainBox::cube(2, lo, hi).unwrap()).unwrap();
            let c = DVector::from_vec(coeffs);
            let p = dict.to_monomial(&c);
            let back = dict.from_monomial(&p);
            prop_assert!(!back.overflow);
            prop_assert!((&back.coeffs - &c).amax() < 1e-9);
            let x = [lo + (hi - lo) * x1, lo + (hi - lo) * x2];
            prop_assert!((dict.eval_basis(&x).dot(&c) - p.eval(&x)).abs() < 1e-9);
        }
    }
}

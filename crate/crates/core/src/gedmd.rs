//! Generator EDMD: Koopman and Perron-Frobenius generator matrices from
//! state/derivative samples.
//!
//! Convention: `L` is stored so that row `k` holds the dictionary
//! coefficients of `𝒦ψ_k`, i.e. `𝒦Ψ ≈ LΨ`. It is the transpose of the
//! least-squares solution `K = A†B`. With this layout the reconstructed
//! field is `C_xᵀ L Ψ` and a density `φ = vᵀΨ` transports as
//! `∇·(F φ) ≈ vᵀ P Ψ`.

use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynsim::TrajectoryDataset;
use crate::error::{Error, Result};
use crate::matio;
use crate::polybasis::{divergence_of_field, BasisDescriptor, BasisDictionary, Polynomial};

const CHUNK: usize = 512;

/// Empirical Gram matrices `A = (1/T) Σ ΨΨᵀ`, `B = (1/T) Σ Ψψ̇ᵀ`.
#[derive(Clone, Debug)]
pub struct Gram {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub samples: usize,
}

pub fn assemble_gram(ds: &TrajectoryDataset, dict: &BasisDictionary) -> Result<Gram> {
    if ds.is_empty() {
        return Err(Error::InsufficientData("empty dataset".into()));
    }
    if ds.n != dict.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: dict.n_vars(),
            got: ds.n,
        });
    }
    assemble_gram_samples(&ds.states, &ds.derivs, dict)
}

/// Gram matrices from explicit sample pairs; summation order is fixed by
/// chunk index so results do not depend on the thread count.
pub fn assemble_gram_samples(states: &[Vec<f64>], derivs: &[Vec<f64>], dict: &BasisDictionary) -> Result<Gram> {
    if states.len() != derivs.len() {
        return Err(Error::DimensionMismatch {
            expected: states.len(),
            got: derivs.len(),
        });
    }
    if states.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let q = dict.size();
    let idx: Vec<usize> = (0..states.len()).collect();
    let partials: Vec<(DMatrix<f64>, DMatrix<f64>)> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut a = DMatrix::zeros(q, q);
            let mut b = DMatrix::zeros(q, q);
            for &l in chunk {
                let psi = dict.eval_basis(&states[l]);
                let dpsi = dict.grad_basis(&states[l]) * DVector::from_column_slice(&derivs[l]);
                a.ger(1.0, &psi, &psi, 1.0);
                b.ger(1.0, &psi, &dpsi, 1.0);
            }
            (a, b)
        })
        .collect();
    let mut a = DMatrix::zeros(q, q);
    let mut b = DMatrix::zeros(q, q);
    for (pa, pb) in partials {
        a += pa;
        b += pb;
    }
    let t = states.len() as f64;
    Ok(Gram {
        a: a / t,
        b: b / t,
        samples: states.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    /// Added to the diagonal of `A` before inversion.
    pub ridge: f64,
    /// Singular values below `rel_cutoff · σ_max` are treated as zero.
    pub rel_cutoff: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            ridge: 0.0,
            rel_cutoff: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Singular values kept by the cutoff.
    pub rank: usize,
    pub size: usize,
    pub samples: usize,
}

impl Conditioning {
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.size
    }
}

/// Minimum-norm least-squares generator `L = (A†B)ᵀ`.
pub fn estimate_generator(gram: &Gram, opts: &EstimateOptions) -> Result<(DMatrix<f64>, Conditioning)> {
    let q = gram.a.nrows();
    if gram.a.ncols() != q || gram.b.shape() != (q, q) {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: gram.b.nrows(),
        });
    }
    let mut a = gram.a.clone();
    for i in 0..q {
        a[(i, i)] += opts.ridge;
    }
    let a = (&a + a.transpose()) * 0.5;
    let eig = a.symmetric_eigen();
    let sig: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
    let smax = sig.iter().cloned().fold(0.0, f64::max);
    let smin = sig.iter().cloned().fold(f64::INFINITY, f64::min);
    let cut = opts.rel_cutoff * smax;
    let mut rank = 0;
    let mut inv = DVector::zeros(q);
    for i in 0..q {
        if sig[i] > cut && sig[i] > 0.0 {
            inv[i] = 1.0 / eig.eigenvalues[i];
            rank += 1;
        }
    }
    let v = &eig.eigenvectors;
    let pinv = v * DMatrix::from_diagonal(&inv) * v.transpose();
    let k = pinv * &gram.b;
    let cond = Conditioning {
        sigma_min: smin,
        sigma_max: smax,
        rank,
        size: q,
        samples: gram.samples,
    };
    if cond.rank_deficient() {
        warn!(
            "Gram matrix rank deficient: kept {rank} of {q} singular values (σ_min {smin:e}, σ_max {smax:e})"
        );
    }
    Ok((k.transpose(), cond))
}

/// `K_gj = L_j − L_0`.
pub fn control_generators(l0: &DMatrix<f64>, lj: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    lj.iter().map(|l| l - l0).collect()
}

/// Field components `C_xᵀ L Ψ` in monomial form.
pub fn field_polys(l: &DMatrix<f64>, dict: &BasisDictionary) -> Vec<Polynomial> {
    let cx = dict.c_x();
    (0..dict.n_vars())
        .map(|i| dict.to_monomial(&l.tr_mul(&cx.column(i).into_owned())))
        .collect()
}

/// `∇·(C_xᵀ L Ψ)`.
pub fn divergence_poly(l: &DMatrix<f64>, dict: &BasisDictionary) -> Polynomial {
    divergence_of_field(&field_polys(l, dict))
}

/// Matrix of `φ ↦ proj(div·φ)`: row `k` holds the coefficients of the
/// projection of `div·ψ_k`. The flag is set when some product left the span.
pub fn multiplication_matrix(div: &Polynomial, dict: &BasisDictionary) -> (DMatrix<f64>, bool) {
    let q = dict.size();
    let rows: Vec<(DVector<f64>, bool)> = (0..q)
        .into_par_iter()
        .map(|k| {
            let psi = dict.basis_function(&dict.indices()[k]);
            let pr = dict.from_monomial(&(div * &psi));
            (pr.coeffs, pr.overflow)
        })
        .collect();
    let mut m = DMatrix::zeros(q, q);
    let mut flag = false;
    for (k, (r, f)) in rows.into_iter().enumerate() {
        m.row_mut(k).copy_from(&r.transpose());
        flag |= f;
    }
    (m, flag)
}

/// `P = L + (div·)`, with the multiplication realized by projection.
pub fn pf_generator(l: &DMatrix<f64>, div: &Polynomial, dict: &BasisDictionary) -> (DMatrix<f64>, bool) {
    let (m, flag) = multiplication_matrix(div, dict);
    (l + m, flag)
}

/// Koopman generator of a known polynomial field: row `k` is the
/// projection of `F·∇ψ_k`.
pub fn galerkin_generator(field: &[Polynomial], dict: &BasisDictionary) -> DMatrix<f64> {
    let q = dict.size();
    let rows: Vec<DVector<f64>> = (0..q)
        .into_par_iter()
        .map(|k| {
            let psi = dict.basis_function(&dict.indices()[k]);
            let mut img = Polynomial::zero(dict.n_vars());
            for (i, fi) in field.iter().enumerate() {
                img = &img + &(fi * &psi.partial(i));
            }
            dict.from_monomial(&img).coeffs
        })
        .collect();
    let mut l = DMatrix::zeros(q, q);
    for (k, r) in rows.into_iter().enumerate() {
        l.row_mut(k).copy_from(&r.transpose());
    }
    l
}

/// Koopman and Perron-Frobenius generators sharing one dictionary.
///
/// Index `0` is the drift, index `j ≥ 1` the input field `g_j`:
/// `fields[0] = L_0`, `fields[j] = K_gj`, and `div[j]`, `p[j]` are derived
/// from `fields[j]`.
#[derive(Clone, Debug)]
pub struct GeneratorSet {
    pub dict: Arc<BasisDictionary>,
    /// Raw per-protocol estimates `L_0..L_m`.
    pub l: Vec<DMatrix<f64>>,
    pub fields: Vec<DMatrix<f64>>,
    pub div: Vec<Polynomial>,
    pub p: Vec<DMatrix<f64>>,
    /// `projected[j]` is set when `div_j·ψ_k` left `span(Ψ)` for some `k`.
    pub projected: Vec<bool>,
    pub conditioning: Vec<Conditioning>,
}

impl GeneratorSet {
    /// Build from raw `L_0..L_m`.
    pub fn from_generators(dict: Arc<BasisDictionary>, l: Vec<DMatrix<f64>>, conditioning: Vec<Conditioning>) -> Result<Self> {
        if l.is_empty() {
            return Err(Error::InvalidArgument("need at least the drift generator".into()));
        }
        let q = dict.size();
        if let Some(bad) = l.iter().find(|m| m.shape() != (q, q)) {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: bad.nrows(),
            });
        }
        let mut fields = vec![l[0].clone()];
        fields.extend(control_generators(&l[0], &l[1..]));
        let mut div = Vec::with_capacity(fields.len());
        let mut p = Vec::with_capacity(fields.len());
        let mut projected = Vec::with_capacity(fields.len());
        for f in &fields {
            let d = divergence_poly(f, &dict);
            let (pj, flag) = pf_generator(f, &d, &dict);
            div.push(d);
            p.push(pj);
            projected.push(flag);
        }
        Ok(GeneratorSet {
            dict,
            l,
            fields,
            div,
            p,
            projected,
            conditioning,
        })
    }

    /// Estimate from the zero-input dataset followed by one unit-step
    /// dataset per channel, ordered by label.
    pub fn estimate(dict: Arc<BasisDictionary>, datasets: &[TrajectoryDataset], opts: &EstimateOptions) -> Result<Self> {
        let mut sorted: Vec<&TrajectoryDataset> = datasets.iter().collect();
        sorted.sort_by_key(|d| d.input_label);
        for (i, d) in sorted.iter().enumerate() {
            if d.input_label != i {
                return Err(Error::InvalidArgument(format!(
                    "dataset labels must be 0..=m without gaps, missing label {i}"
                )));
            }
        }
        let mut l = Vec::with_capacity(sorted.len());
        let mut cond = Vec::with_capacity(sorted.len());
        for d in sorted {
            let (li, ci) = estimate_generator(&assemble_gram(d, &dict)?, opts)?;
            l.push(li);
            cond.push(ci);
        }
        Self::from_generators(dict, l, cond)
    }

    /// Generators of a known polynomial system, as unit-step data would
    /// give them with exact derivatives and unlimited samples.
    pub fn from_fields(dict: Arc<BasisDictionary>, drift: &[Polynomial], inputs: &[Vec<Polynomial>]) -> Result<Self> {
        let l0 = galerkin_generator(drift, &dict);
        let mut l = vec![l0.clone()];
        for g in inputs {
            l.push(&l0 + galerkin_generator(g, &dict));
        }
        Self::from_generators(dict, l, Vec::new())
    }

    pub fn m(&self) -> usize {
        self.fields.len() - 1
    }

    /// Reconstructed field for index `j` (drift or `g_j`).
    pub fn field_polys(&self, j: usize) -> Vec<Polynomial> {
        field_polys(&self.fields[j], &self.dict)
    }

    /// Coefficients of `∇·(F_j φ)` for `φ = vᵀΨ`.
    pub fn transport(&self, j: usize, v: &DVector<f64>) -> DVector<f64> {
        self.p[j].tr_mul(v)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GeneratorFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: GeneratorFile = serde_json::from_str(s)?;
        let dict = BasisDictionary::from_descriptor(f.basis)?;
        let q = dict.size();
        let ok = |ms: &[DMatrix<f64>]| ms.iter().all(|m| m.shape() == (q, q));
        if !ok(&f.l) || !ok(&f.p) || f.div.len() != f.l.len() || f.p.len() != f.l.len() {
            return Err(Error::Parse("generator file shapes disagree with its basis".into()));
        }
        let mut fields = vec![f.l[0].clone()];
        fields.extend(control_generators(&f.l[0], &f.l[1..]));
        Ok(GeneratorSet {
            dict,
            l: f.l,
            fields,
            div: f.div,
            p: f.p,
            projected: f.projected,
            conditioning: f.conditioning,
        })
    }

    /// SHA-256 of the JSON form, hex encoded.
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_json()?.as_bytes())))
    }
}

#[derive(Serialize, Deserialize)]
struct GeneratorFile {
    basis: BasisDescriptor,
    #[serde(with = "matio::mat_vec")]
    l: Vec<DMatrix<f64>>,
    div: Vec<Polynomial>,
    #[serde(with = "matio::mat_vec")]
    p: Vec<DMatrix<f64>>,
    projected: Vec<bool>,
    conditioning: Vec<Conditioning>,
}

impl From<&GeneratorSet> for GeneratorFile {
    fn from(g: &GeneratorSet) -> Self {
        GeneratorFile {
            basis: g.dict.descriptor().clone(),
            l: g.l.clone(),
            div: g.div.clone(),
            p: g.p.clone(),
            projected: g.projected.clone(),
            conditioning: g.conditioning.clone(),
        }
    }
}

/// Linearization `ẋ ≈ A x + B u` near the origin.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearModel {
    #[serde(with = "matio::mat")]
    pub a: DMatrix<f64>,
    #[serde(with = "matio::mat")]
    pub b: DMatrix<f64>,
    /// RMS residual of the zero-input fit.
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares `A` from zero-input samples with `‖x‖ ≤ r`, then column
/// `j` of `B` as the mean of `ẋ − A x` over step-`j` samples in the ball.
pub fn identify_linear(datasets: &[TrajectoryDataset], r: f64) -> Result<LinearModel> {
    let zero = datasets
        .iter()
        .find(|d| d.input_label == 0)
        .ok_or_else(|| Error::InsufficientData("no zero-input dataset".into()))?;
    let n = zero.n;
    let m = datasets.iter().map(|d| d.input_label).max().unwrap_or(0);
    let need = n + m;
    let near = zero.near_origin(r);
    if near.len() < need {
        return Err(Error::InsufficientData(format!(
            "identify_linear needs at least {need} zero-input samples within radius {r}, found {}",
            near.len()
        )));
    }
    let x = DMatrix::from_fn(n, near.len(), |i, l| zero.states[near[l]][i]);
    let dx = DMatrix::from_fn(n, near.len(), |i, l| zero.derivs[near[l]][i]);
    let svd = x.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    let x_pinv = svd
        .pseudo_inverse(eps)
        .map_err(|e| Error::InsufficientData(e.to_string()))?;
    let a = &dx * x_pinv;
    let res = &dx - &a * &x;
    let residual = (res.norm_squared() / near.len() as f64).sqrt();

    let mut b = DMatrix::zeros(n, m);
    for j in 1..=m {
        let d = datasets
            .iter()
            .find(|d| d.input_label == j)
            .ok_or_else(|| Error::InsufficientData(format!("no step dataset for input {j}")))?;
        let idx = d.near_origin(r);
        if idx.len() < need {
            return Err(Error::InsufficientData(format!(
                "identify_linear needs at least {need} step-{j} samples within radius {r}, found {}",
                idx.len()
            )));
        }
        let mut acc = DVector::zeros(n);
        for &l in &idx {
            let xv = DVector::from_column_slice(&d.states[l]);
            acc += DVector::from_column_slice(&d.derivs[l]) - &a * xv;
        }
        b.set_column(j - 1, &(acc / idx.len() as f64));
    }
    Ok(LinearModel {
        a,
        b,
        residual,
        samples: near.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsim::systems;
    use crate::polybasis::{BasisKind, DomainBox};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_dict(deg: usize) -> Arc<BasisDictionary> {
        BasisDictionary::build(BasisKind::Monomial, 1, deg, DomainBox::cube(1, -1.0, 1.0).unwrap()).unwrap()
    }

    fn dataset_from(states: Vec<Vec<f64>>, f: impl Fn(&[f64]) -> Vec<f64>, label: usize) -> TrajectoryDataset {
        let n = states[0].len();
        let derivs = states.iter().map(|x| f(x)).collect();
        let mut ds = TrajectoryDataset::empty(label, 0.01, n, 0);
        ds.push_samples(states, derivs).unwrap();
        ds
    }

    #[test]
    fn single_sample_gram_is_rank_one() {
        let d = scalar_dict(2);
        let ds = dataset_from(vec![vec![0.5]], |x| vec![-x[0]], 0);
        let g = assemble_gram(&ds, &d).unwrap();
        let psi = DVector::from_vec(vec![1.0, 0.5, 0.25]);
        assert_relative_eq!(g.a, &psi * psi.transpose(), epsilon = 1e-15);
        assert_eq!(g.a.rank(1e-12), 1);
    }

    #[test]
    fn scalar_decay_gram_matches_hand_sum() {
        let d = scalar_dict(2);
        let xs: Vec<Vec<f64>> = (0..7).map(|k| vec![-0.9 + 0.3 * k as f64]).collect();
        let ds = dataset_from(xs.clone(), |x| vec![-x[0]], 0);
        let g = assemble_gram(&ds, &d).unwrap();
        let mut b = DMatrix::zeros(3, 3);
        for x in &xs {
            let x = x[0];
            let psi = DVector::from_vec(vec![1.0, x, x * x]);
            let dpsi = DVector::from_vec(vec![0.0, -x, -2.0 * x * x]);
            b += psi * dpsi.transpose();
        }
        b /= xs.len() as f64;
        assert_relative_eq!(g.b, b, epsilon = 1e-15);

        let zero = dataset_from(xs, |_| vec![0.0], 0);
        assert_eq!(assemble_gram(&zero, &d).unwrap().b, DMatrix::zeros(3, 3));
    }

    #[test]
    fn scalar_decay_generator_is_galerkin_exact() {
        let d = scalar_dict(2);
        let xs: Vec<Vec<f64>> = (0..21).map(|k| vec![-1.0 + 0.1 * k as f64]).collect();
        let ds = dataset_from(xs, |x| vec![-x[0]], 0);
        let (l, c) = estimate_generator(&assemble_gram(&ds, &d).unwrap(), &EstimateOptions::default()).unwrap();
        assert!(!c.rank_deficient());
        let expect = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -2.0]);
        assert_relative_eq!(l, expect, epsilon = 1e-10);
        let f = &field_polys(&l, &d)[0];
        assert!((f - &Polynomial::from_exponents(1, &[(&[1], -1.0)])).max_abs_coeff() < 1e-10);
    }

    #[test]
    fn zero_derivatives_give_zero_generator() {
        let d = scalar_dict(3);
        let ds = dataset_from((0..10).map(|k| vec![k as f64 * 0.1]).collect(), |_| vec![0.0], 0);
        let (l, _) = estimate_generator(&assemble_gram(&ds, &d).unwrap(), &EstimateOptions::default()).unwrap();
        assert!(l.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degenerate_sampling_reports_rank() {
        let d = scalar_dict(3);
        let ds = dataset_from(vec![vec![0.2], vec![0.4]], |x| vec![-x[0]], 0);
        let (_, c) = estimate_generator(&assemble_gram(&ds, &d).unwrap(), &EstimateOptions::default()).unwrap();
        assert!(c.rank_deficient());
        assert_eq!(c.rank, 2);
    }

    #[test]
    fn example1_exact_generators() {
        let sys = systems::example1();
        let dom = DomainBox::cube(2, -5.0, 5.0).unwrap();
        let d = BasisDictionary::build(BasisKind::Monomial, 2, 4, dom).unwrap();
        let drift = sys.drift.as_poly().unwrap().to_vec();
        let g = sys.inputs[0].as_poly().unwrap().to_vec();
        let gs = GeneratorSet::from_fields(d.clone(), &drift, std::slice::from_ref(&g)).unwrap();
        let f = gs.field_polys(0);
        for i in 0..2 {
            assert_eq!(f[i], drift[i]);
        }
        let gf = gs.field_polys(1);
        assert_eq!(gf[0], Polynomial::zero(2));
        assert_eq!(gf[1], Polynomial::var(2, 0));
        let expect = Polynomial::from_exponents(2, &[(&[0, 0], -1.5), (&[2, 0], 0.5)]);
        assert!((&gs.div[0] - &expect).max_abs_coeff() < 1e-14);
        assert!(gs.div[1].is_zero());
        // zero divergence leaves P = L
        assert_eq!(gs.p[1], gs.fields[1]);
    }

    #[test]
    fn pf_action_on_scalar_decay() {
        let d = scalar_dict(2);
        let l = galerkin_generator(&[Polynomial::from_exponents(1, &[(&[1], -1.0)])], &d);
        let div = divergence_poly(&l, &d);
        assert_eq!(div, Polynomial::constant(1, -1.0));
        let (p, flag) = pf_generator(&l, &div, &d);
        assert!(!flag);
        // ∇·(−x · x) = −2x
        let img = p.tr_mul(&DVector::from_vec(vec![0.0, 1.0, 0.0]));
        assert_relative_eq!(img, DVector::from_vec(vec![0.0, -2.0, 0.0]), epsilon = 1e-15);
    }

    #[test]
    fn constant_field_transports_constants_to_zero() {
        let d = scalar_dict(2);
        let l = galerkin_generator(&[Polynomial::constant(1, 3.0)], &d);
        let div = divergence_poly(&l, &d);
        assert!(div.is_zero());
        let (p, _) = pf_generator(&l, &div, &d);
        assert!(p.tr_mul(&DVector::from_vec(vec![1.0, 0.0, 0.0])).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn multiplication_matrix_matches_products() {
        let dom = DomainBox::cube(2, -2.0, 2.0).unwrap();
        let d = BasisDictionary::build(BasisKind::LegendreTensor, 2, 6, dom).unwrap();
        let div = Polynomial::from_exponents(2, &[(&[0, 0], -1.5), (&[2, 0], 0.5)]);
        let (m, flag) = multiplication_matrix(&div, &d);
        assert!(flag);
        let low = d.count_up_to(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let mut v = DVector::zeros(d.size());
            for k in 0..low {
                v[k] = rng.gen_range(-1.0..1.0);
            }
            let lhs = d.to_monomial(&m.tr_mul(&v));
            let rhs = &div * &d.to_monomial(&v);
            for _ in 0..5 {
                let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                assert!((lhs.eval(&x) - rhs.eval(&x)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let d = scalar_dict(3);
        let gs = GeneratorSet::from_fields(
            d,
            &[Polynomial::from_exponents(1, &[(&[1], -1.0), (&[3], 0.25)])],
            &[vec![Polynomial::constant(1, 1.0)]],
        )
        .unwrap();
        let s = gs.to_json().unwrap();
        let back = GeneratorSet::from_json(&s).unwrap();
        assert_eq!(back.l, gs.l);
        assert_eq!(back.p, gs.p);
        assert_eq!(back.div, gs.div);
        assert_eq!(back.to_json().unwrap(), s);
    }

    #[test]
    fn identify_exact_linear_system() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -0.5, 0.3]);
        let bcol = [0.4, -1.2];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)])
            .collect();
        let lin = |x: &[f64], u: f64| {
            vec![
                a[(0, 0)] * x[0] + a[(0, 1)] * x[1] + bcol[0] * u,
                a[(1, 0)] * x[0] + a[(1, 1)] * x[1] + bcol[1] * u,
            ]
        };
        let d0 = dataset_from(pts.clone(), |x| lin(x, 0.0), 0);
        let d1 = dataset_from(pts, |x| lin(x, 1.0), 1);
        let lm = identify_linear(&[d0, d1], 0.5).unwrap();
        assert_relative_eq!(lm.a, a, epsilon = 1e-8);
        assert_relative_eq!(lm.b[(0, 0)], 0.4, epsilon = 1e-8);
        assert_relative_eq!(lm.b[(1, 0)], -1.2, epsilon = 1e-8);
    }

    #[test]
    fn identify_zero_dynamics_and_missing_data() {
        let pts: Vec<Vec<f64>> = (0..30).map(|k| vec![0.01 * k as f64, -0.005 * k as f64 + 0.1]).collect();
        let d0 = dataset_from(pts, |_| vec![0.0, 0.0], 0);
        let lm = identify_linear(std::slice::from_ref(&d0), 0.5).unwrap();
        assert!(lm.a.iter().all(|v| v.abs() < 1e-14));
        let far = dataset_from(vec![vec![3.0, 3.0]; 5], |_| vec![0.0, 0.0], 0);
        assert!(matches!(identify_linear(&[far], 0.5), Err(Error::InsufficientData(_))));
    }
}

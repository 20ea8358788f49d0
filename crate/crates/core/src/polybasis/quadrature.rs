use nalgebra::DVector;
use rayon::prelude::*;

use super::dictionary::{BasisDictionary, DomainBox};
use super::legendre;
use super::polynomial::Polynomial;
use crate::error::{Error, Result};

/// Split `domain \ excluded` into `2n` disjoint boxes by peeling one axis at a time.
pub fn half_slabs(domain: &DomainBox, excluded: &DomainBox) -> Vec<DomainBox> {
    let n = domain.dim();
    let mut core_lo = domain.lo.clone();
    let mut core_hi = domain.hi.clone();
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut lo = core_lo.clone();
        let mut hi = core_hi.clone();
        hi[i] = excluded.lo[i];
        out.push(DomainBox { lo, hi });
        lo = core_lo.clone();
        hi = core_hi.clone();
        lo[i] = excluded.hi[i];
        out.push(DomainBox { lo, hi });
        core_lo[i] = excluded.lo[i];
        core_hi[i] = excluded.hi[i];
    }
    out
}

/// Breakpoints per axis, graded geometrically (ratio 2) away from the
/// excluded box so that no cell spans a large range of `b(x)^-α`.
fn axis_breakpoints(domain: &DomainBox, excluded: Option<&DomainBox>) -> Vec<Vec<f64>> {
    (0..domain.dim())
        .map(|i| {
            let (lo, hi) = (domain.lo[i], domain.hi[i]);
            let mut pts = vec![lo, hi];
            if let Some(ex) = excluded {
                let c = 0.5 * (ex.lo[i] + ex.hi[i]);
                let w = 0.5 * (ex.hi[i] - ex.lo[i]);
                pts.push(ex.lo[i]);
                pts.push(ex.hi[i]);
                let mut r = w;
                while c + r < hi || c - r > lo {
                    r *= 2.0;
                    for p in [c + r, c - r] {
                        if p > lo && p < hi {
                            pts.push(p);
                        }
                    }
                }
            } else {
                // four equal pieces
                for k in 1..4 {
                    pts.push(lo + (hi - lo) * k as f64 / 4.0);
                }
            }
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
            pts
        })
        .collect()
}

/// Cells of a box after splitting each axis at the given breakpoints.
fn cells(bx: &DomainBox, breaks: &[Vec<f64>]) -> Vec<DomainBox> {
    let n = bx.dim();
    let pieces: Vec<Vec<(f64, f64)>> = (0..n)
        .map(|i| {
            let mut pts: Vec<f64> = breaks[i]
                .iter()
                .copied()
                .filter(|&p| p > bx.lo[i] && p < bx.hi[i])
                .collect();
            pts.insert(0, bx.lo[i]);
            pts.push(bx.hi[i]);
            pts.windows(2).map(|w| (w[0], w[1])).collect()
        })
        .collect();
    let mut out = vec![DomainBox {
        lo: Vec::new(),
        hi: Vec::new(),
    }];
    for p in &pieces {
        let mut next = Vec::with_capacity(out.len() * p.len());
        for c in &out {
            for &(l, h) in p {
                let mut c2 = c.clone();
                c2.lo.push(l);
                c2.hi.push(h);
                next.push(c2);
            }
        }
        out = next;
    }
    out
}

/// Per-dimension Gauss-Legendre order used by [`quadrature_moments`].
pub fn quadrature_order(dict: &BasisDictionary, weight: &Polynomial, b: &Polynomial, alpha: f64) -> usize {
    let num = weight.degree() + dict.max_degree();
    let rational = (alpha.max(0.0) * b.degree() as f64).ceil() as usize;
    (num + rational).div_ceil(2) + 8
}

/// `∫_{X \ N} weight(x) Ψ(x) / b(x)^α dx`, entry `k` for `ψ_k`.
///
/// The region is split into half-slabs, each slab into cells graded toward
/// the excluded box, and a tensor Gauss-Legendre rule is applied per cell.
/// Cells are reduced in a fixed order so the result is deterministic.
pub fn quadrature_moments(
    dict: &BasisDictionary,
    weight: &Polynomial,
    b: &Polynomial,
    alpha: f64,
    domain: &DomainBox,
    excluded: Option<&DomainBox>,
) -> Result<DVector<f64>> {
    let n = dict.n_vars();
    if domain.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: domain.dim(),
        });
    }
    let boxes = match excluded {
        Some(ex) => {
            if !domain.strictly_contains(ex) {
                return Err(Error::InvalidArgument(
                    "excluded box must lie strictly inside the domain".into(),
                ));
            }
            half_slabs(domain, ex)
        }
        None => vec![domain.clone()],
    };
    let breaks = axis_breakpoints(domain, excluded);
    let all_cells: Vec<DomainBox> = boxes.iter().flat_map(|bx| cells(bx, &breaks)).collect();

    let order = quadrature_order(dict, weight, b, alpha);
    let (nodes, weights) = legendre::gauss_rule(order);

    let partials: Vec<Result<DVector<f64>>> = all_cells
        .par_iter()
        .map(|cell| integrate_cell(dict, weight, b, alpha, cell, &nodes, &weights))
        .collect();
    let mut total = DVector::zeros(dict.size());
    for p in partials {
        total += p?;
    }
    Ok(total)
}

fn integrate_cell(
    dict: &BasisDictionary,
    weight: &Polynomial,
    b: &Polynomial,
    alpha: f64,
    cell: &DomainBox,
    nodes: &[f64],
    weights: &[f64],
) -> Result<DVector<f64>> {
    let n = cell.dim();
    let order = nodes.len();
    let half: Vec<f64> = cell.half_widths();
    let mid: Vec<f64> = cell.center();
    let jac: f64 = half.iter().product();
    let mut acc = DVector::zeros(dict.size());
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    loop {
        let mut w = jac;
        for i in 0..n {
            x[i] = mid[i] + half[i] * nodes[idx[i]];
            w *= weights[idx[i]];
        }
        let bx = if alpha == 0.0 { 1.0 } else { b.eval(&x) };
        if alpha != 0.0 && !(bx > 0.0) {
            return Err(Error::SingularWeight { point: x.clone() });
        }
        let scale = w * weight.eval(&x) / bx.powf(alpha);
        acc.axpy(scale, &dict.eval_basis(&x), 1.0);

        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < order {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == n {
                return Ok(acc);
            }
        }
    }
}

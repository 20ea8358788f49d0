//! Standard-form conic programs and their solution.
//!
//! ```text
//! minimize  cᵀx   subject to  A x = b,  x ∈ K = K_1 × … × K_p
//! ```
//!
//! Each `K_i` is a free block, a nonnegative orthant or a PSD cone. A PSD
//! block of side `s` holds `s(s+1)/2` entries: the upper triangle in
//! column-major order, off-diagonals scaled by `√2`, so that
//! `⟨X, Y⟩ = svec(X)ᵀ svec(Y)`.

use std::fmt::Write as _;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT, SolverStatus, SupportedConeT,
    ZeroConeT,
};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "size")]
pub enum ConeBlock {
    Free(usize),
    NonNeg(usize),
    /// Side length of the matrix.
    Psd(usize),
}

impl ConeBlock {
    pub fn dim(&self) -> usize {
        match *self {
            ConeBlock::Free(n) | ConeBlock::NonNeg(n) => n,
            ConeBlock::Psd(s) => s * (s + 1) / 2,
        }
    }
}

/// Position of `(i, j)`, `i ≤ j`, inside an svec block.
pub fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

/// Symmetric matrix from its svec form.
pub fn smat(v: &[f64], side: usize) -> DMatrix<f64> {
    let r2 = std::f64::consts::SQRT_2;
    DMatrix::from_fn(side, side, |i, j| {
        let x = v[svec_index(i, j)];
        if i == j {
            x
        } else {
            x / r2
        }
    })
}

/// svec of a symmetric matrix.
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let s = m.nrows();
    let r2 = std::f64::consts::SQRT_2;
    let mut v = vec![0.0; s * (s + 1) / 2];
    for j in 0..s {
        for i in 0..=j {
            v[svec_index(i, j)] = if i == j { m[(i, i)] } else { r2 * 0.5 * (m[(i, j)] + m[(j, i)]) };
        }
    }
    v
}

/// Sparse matrix in sorted, duplicate-free triplet form.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    /// `(row, col, value)` sorted by row, then column.
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    /// Sums duplicates and drops exact zeros.
    pub fn new(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = entries.iter().find(|(r, c, _)| *r >= nrows || *c >= ncols) {
            return Err(Error::InvalidArgument(format!(
                "entry ({r}, {c}) outside {nrows}x{ncols}"
            )));
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match out.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => out.push((r, c, v)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        Ok(Triplets {
            nrows,
            ncols,
            entries: out,
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.ncols];
        for &(r, c, v) in &self.entries {
            x[c] += v * y[r];
        }
        x
    }

    fn to_coo(&self, row_offset: usize) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut i = Vec::with_capacity(self.entries.len());
        let mut j = Vec::with_capacity(self.entries.len());
        let mut v = Vec::with_capacity(self.entries.len());
        for &(r, c, x) in &self.entries {
            i.push(r + row_offset);
            j.push(c);
            v.push(x);
        }
        (i, j, v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub c: Vec<f64>,
    pub a: Triplets,
    pub b: Vec<f64>,
    pub cones: Vec<ConeBlock>,
    /// One name per cone block, used in diagnostics.
    pub names: Vec<String>,
}

impl SdpProblem {
    pub fn n_vars(&self) -> usize {
        self.cones.iter().map(|c| c.dim()).sum()
    }

    /// Start offset of every cone block.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.cones.len());
        let mut acc = 0;
        for c in &self.cones {
            off.push(acc);
            acc += c.dim();
        }
        off
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.c.len() != n || self.a.ncols != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.c.len().max(self.a.ncols),
            });
        }
        if self.a.nrows != self.b.len() {
            return Err(Error::DimensionMismatch {
                expected: self.a.nrows,
                got: self.b.len(),
            });
        }
        if self.names.len() != self.cones.len() {
            return Err(Error::InvalidArgument("one name per cone block required".into()));
        }
        let finite = self.c.iter().chain(&self.b).all(|v| v.is_finite())
            && self.a.entries.iter().all(|e| e.2.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("non-finite problem data".into()));
        }
        Ok(())
    }

    /// Sparse text form; identical problems give identical bytes.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "conic-sdp 1");
        let _ = writeln!(s, "vars {}", self.n_vars());
        let _ = writeln!(s, "rows {}", self.b.len());
        let offs = self.offsets();
        let _ = writeln!(s, "blocks {}", self.cones.len());
        for ((c, name), off) in self.cones.iter().zip(&self.names).zip(offs) {
            let (kind, size) = match *c {
                ConeBlock::Free(n) => ("free", n),
                ConeBlock::NonNeg(n) => ("nonneg", n),
                ConeBlock::Psd(n) => ("psd", n),
            };
            let _ = writeln!(s, "block {kind} {size} {off} {name}");
        }
        let nz_c: Vec<(usize, f64)> = self.c.iter().copied().enumerate().filter(|e| e.1 != 0.0).collect();
        let _ = writeln!(s, "objective {}", nz_c.len());
        for (i, v) in nz_c {
            let _ = writeln!(s, "{i} {v:e}");
        }
        let nz_b: Vec<(usize, f64)> = self.b.iter().copied().enumerate().filter(|e| e.1 != 0.0).collect();
        let _ = writeln!(s, "rhs {}", nz_b.len());
        for (i, v) in nz_b {
            let _ = writeln!(s, "{i} {v:e}");
        }
        let _ = writeln!(s, "matrix {}", self.a.entries.len());
        for &(r, c, v) in &self.a.entries {
            let _ = writeln!(s, "{r} {c} {v:e}");
        }
        let _ = writeln!(s, "end");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("unexpected end of input, expected {what}")))
        };
        let header = |line: &str, key: &str| -> Result<usize> {
            let mut it = line.split_whitespace();
            if it.next() != Some(key) {
                return Err(Error::Parse(format!("expected `{key}`, found `{line}`")));
            }
            it.next()
                .ok_or_else(|| Error::Parse(format!("missing count after `{key}`")))?
                .parse()
                .map_err(|e| Error::Parse(format!("{key}: {e}")))
        };
        fn num<T: std::str::FromStr>(s: Option<&str>, line: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            s.ok_or_else(|| Error::Parse(format!("short line `{line}`")))?
                .parse()
                .map_err(|e| Error::Parse(format!("`{line}`: {e}")))
        }
        let l = next("header")?;
        if l != "conic-sdp 1" {
            return Err(Error::Parse(format!("unknown header `{l}`")));
        }
        let nvars = header(next("vars")?, "vars")?;
        let nrows = header(next("rows")?, "rows")?;
        let nblocks = header(next("blocks")?, "blocks")?;
        let mut cones = Vec::with_capacity(nblocks);
        let mut names = Vec::with_capacity(nblocks);
        for _ in 0..nblocks {
            let line = next("block")?;
            let mut it = line.splitn(5, ' ');
            if it.next() != Some("block") {
                return Err(Error::Parse(format!("expected block, found `{line}`")));
            }
            let kind = it.next().unwrap_or("");
            let size: usize = num(it.next(), line)?;
            let _off: usize = num(it.next(), line)?;
            names.push(it.next().unwrap_or("").to_string());
            cones.push(match kind {
                "free" => ConeBlock::Free(size),
                "nonneg" => ConeBlock::NonNeg(size),
                "psd" => ConeBlock::Psd(size),
                other => return Err(Error::Parse(format!("unknown cone `{other}`"))),
            });
        }
        let mut c = vec![0.0; nvars];
        for _ in 0..header(next("objective")?, "objective")? {
            let line = next("objective entry")?;
            let mut it = line.split_whitespace();
            let i: usize = num(it.next(), line)?;
            *c.get_mut(i).ok_or_else(|| Error::Parse(format!("index {i} out of range")))? = num(it.next(), line)?;
        }
        let mut b = vec![0.0; nrows];
        for _ in 0..header(next("rhs")?, "rhs")? {
            let line = next("rhs entry")?;
            let mut it = line.split_whitespace();
            let i: usize = num(it.next(), line)?;
            *b.get_mut(i).ok_or_else(|| Error::Parse(format!("row {i} out of range")))? = num(it.next(), line)?;
        }
        let nnz = header(next("matrix")?, "matrix")?;
        let mut entries = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let line = next("matrix entry")?;
            let mut it = line.split_whitespace();
            entries.push((num(it.next(), line)?, num(it.next(), line)?, num(it.next(), line)?));
        }
        if next("end")? != "end" {
            return Err(Error::Parse("missing `end`".into()));
        }
        let p = SdpProblem {
            c,
            a: Triplets::new(nrows, nvars, entries)?,
            b,
            cones,
            names,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
    /// The backend stopped early or its answer failed the residual check.
    Inaccurate,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::MaxIter => "max_iter",
            Status::Inaccurate => "inaccurate",
        };
        f.write_str(s)
    }
}

/// Residuals recomputed from the returned vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖Ax − b‖∞`.
    pub equality: f64,
    /// `max(0, −min cone eigenvalue)` over primal blocks.
    pub cone: f64,
    /// Same for the dual slack `c − Aᵀy`, plus its free-block magnitude.
    pub dual_cone: f64,
    /// `|cᵀx − bᵀy| / (1 + |cᵀx| + |bᵀy|)`.
    pub gap: f64,
    /// Most negative eigenvalue per PSD block, in block order.
    pub min_eig: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: Status,
    pub backend_status: String,
    pub x: Vec<f64>,
    /// Equality multipliers `y` of the dual `max bᵀy, c − Aᵀy ∈ K*`.
    pub y: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: u32,
}

impl ConicSolution {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Block `k` of the primal vector.
    pub fn block<'a>(&'a self, sdp: &SdpProblem, k: usize) -> &'a [f64] {
        let off = sdp.offsets()[k];
        &self.x[off..off + sdp.cones[k].dim()]
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 200,
            verbose: false,
        }
    }
}

fn min_eig(v: &[f64], side: usize) -> f64 {
    if side == 0 {
        return 0.0;
    }
    SymmetricEigen::new(smat(v, side)).eigenvalues.min()
}

/// Recompute residuals of `(x, y)` for `sdp`.
pub fn residuals(sdp: &SdpProblem, x: &[f64], y: &[f64]) -> Residuals {
    let ax = sdp.a.mul_vec(x);
    let equality = ax
        .iter()
        .zip(&sdp.b)
        .map(|(l, r)| (l - r).abs())
        .fold(0.0, f64::max);
    let aty = sdp.a.tr_mul_vec(y);
    let slack: Vec<f64> = sdp.c.iter().zip(&aty).map(|(c, a)| c - a).collect();
    let mut cone: f64 = 0.0;
    let mut dual_cone: f64 = 0.0;
    let mut eigs = Vec::new();
    for (blk, off) in sdp.cones.iter().zip(sdp.offsets()) {
        let xs = &x[off..off + blk.dim()];
        let zs = &slack[off..off + blk.dim()];
        match *blk {
            ConeBlock::Free(_) => {
                dual_cone = dual_cone.max(zs.iter().fold(0.0, |m, v| m.max(v.abs())));
            }
            ConeBlock::NonNeg(_) => {
                cone = cone.max(xs.iter().fold(0.0, |m, v| m.max(-v)));
                dual_cone = dual_cone.max(zs.iter().fold(0.0, |m, v| m.max(-v)));
            }
            ConeBlock::Psd(s) => {
                let e = min_eig(xs, s);
                eigs.push(e);
                cone = cone.max(-e);
                dual_cone = dual_cone.max(-min_eig(zs, s));
            }
        }
    }
    let p: f64 = sdp.c.iter().zip(x).map(|(c, x)| c * x).sum();
    let d: f64 = sdp.b.iter().zip(y).map(|(b, y)| b * y).sum();
    Residuals {
        equality,
        cone,
        dual_cone,
        gap: (p - d).abs() / (1.0 + p.abs() + d.abs()),
        min_eig: eigs,
    }
}

/// Solve with the interior-point backend.
///
/// An `Optimal` status is only reported when the recomputed residuals meet
/// `tol`: equality `≤ tol·(1+‖b‖∞)`, cone `≤ tol`, gap `≤ tol`.
pub fn solve(sdp: &SdpProblem, opts: &SolveOptions) -> Result<ConicSolution> {
    if !(1e-10..=1e-2).contains(&opts.tol) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {} outside [1e-10, 1e-2]",
            opts.tol
        )));
    }
    sdp.validate()?;
    let n = sdp.n_vars();
    let m_eq = sdp.b.len();
    if n == 0 {
        let infeasible = sdp.b.iter().any(|&v| v != 0.0);
        return Ok(ConicSolution {
            status: if infeasible { Status::Infeasible } else { Status::Optimal },
            backend_status: "trivial".into(),
            x: Vec::new(),
            y: vec![0.0; m_eq],
            objective: 0.0,
            dual_objective: 0.0,
            residuals: residuals(sdp, &[], &vec![0.0; m_eq]),
            iterations: 0,
        });
    }

    // Ax + s = b with s ∈ {0}^m_eq, then −x_K + s = 0 for every conic block
    let (mut ii, mut jj, mut vv) = sdp.a.to_coo(0);
    let mut rhs = sdp.b.clone();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    if m_eq > 0 {
        cones.push(ZeroConeT(m_eq));
    }
    let mut row = m_eq;
    for (blk, off) in sdp.cones.iter().zip(sdp.offsets()) {
        let dim = blk.dim();
        match *blk {
            ConeBlock::Free(_) => continue,
            ConeBlock::NonNeg(k) if k > 0 => cones.push(NonnegativeConeT(k)),
            ConeBlock::Psd(s) if s > 0 => cones.push(PSDTriangleConeT(s)),
            _ => continue,
        }
        for t in 0..dim {
            ii.push(row + t);
            jj.push(off + t);
            vv.push(-1.0);
        }
        rhs.extend(std::iter::repeat_n(0.0, dim));
        row += dim;
    }
    let a = CscMatrix::new_from_triplets(row, n, ii, jj, vv);
    let p = CscMatrix::zeros((n, n));
    // the backend measures feasibility in its own equilibrated scaling;
    // the tenfold margin lets the recomputed residuals meet `tol`
    let inner = (0.1 * opts.tol).max(1e-11);
    let settings = DefaultSettings {
        max_iter: opts.max_iter,
        verbose: opts.verbose,
        tol_feas: inner,
        tol_gap_abs: inner,
        tol_gap_rel: inner,
        tol_infeas_abs: opts.tol,
        tol_infeas_rel: opts.tol,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &sdp.c, &a, &rhs, &cones, settings)
        .map_err(|e| Error::Solver {
            status: "setup".into(),
            detail: format!("{e:?}"),
        })?;
    solver.solve();
    let sol = &solver.solution;
    // conic blocks are read from the slack, which the backend keeps inside
    // the cone; free blocks from x
    let mut x = sol.x.clone();
    let mut row = m_eq;
    for (blk, off) in sdp.cones.iter().zip(sdp.offsets()) {
        if matches!(blk, ConeBlock::Free(_)) {
            continue;
        }
        let dim = blk.dim();
        x[off..off + dim].copy_from_slice(&sol.s[row..row + dim]);
        row += dim;
    }
    let y: Vec<f64> = sol.z[..m_eq].iter().map(|v| -v).collect();
    let res = residuals(sdp, &x, &y);
    let b_inf = sdp.b.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let verified = res.equality <= opts.tol * (1.0 + b_inf) && res.cone <= opts.tol && res.gap <= opts.tol;
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved if verified => Status::Optimal,
        SolverStatus::Solved | SolverStatus::AlmostSolved => Status::Inaccurate,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Status::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Status::Unbounded,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => Status::MaxIter,
        _ => Status::Inaccurate,
    };
    let objective: f64 = sdp.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    let dual_objective: f64 = sdp.b.iter().zip(&y).map(|(b, y)| b * y).sum();
    Ok(ConicSolution {
        status,
        backend_status: format!("{:?}", sol.status),
        x,
        y,
        objective,
        dual_objective,
        residuals: res,
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn problem(c: Vec<f64>, rows: Vec<(usize, usize, f64)>, b: Vec<f64>, cones: Vec<ConeBlock>) -> SdpProblem {
        let n = cones.iter().map(|c| c.dim()).sum();
        let names = (0..cones.len()).map(|k| format!("blk{k}")).collect();
        SdpProblem {
            c,
            a: Triplets::new(b.len(), n, rows).unwrap(),
            b,
            cones,
            names,
        }
    }

    #[test]
    fn svec_round_trip() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.5, -1.0, 3.0, 0.25, 0.5, 0.25, 1.0]);
        let v = svec(&m);
        assert_eq!(v.len(), 6);
        assert_relative_eq!(smat(&v, 3), m, epsilon = 1e-15);
        let inner: f64 = v.iter().map(|a| a * a).sum();
        assert_relative_eq!(inner, m.component_mul(&m).sum(), epsilon = 1e-12);
    }

    #[test]
    fn scalar_lower_bound() {
        // min x s.t. x − s = 1, s ≥ 0
        let p = problem(
            vec![1.0, 0.0],
            vec![(0, 0, 1.0), (0, 1, -1.0)],
            vec![1.0],
            vec![ConeBlock::Free(1), ConeBlock::NonNeg(1)],
        );
        let s = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_relative_eq!(s.x[0], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn trace_with_pinned_corner() {
        let side = 3;
        let c = svec(&DMatrix::identity(side, side));
        let p = problem(c, vec![(0, svec_index(0, 0), 1.0)], vec![2.0], vec![ConeBlock::Psd(side)]);
        let s = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_relative_eq!(s.objective, 2.0, epsilon = 1e-7);
        let g = smat(&s.x, side);
        assert_relative_eq!(g[(0, 0)], 2.0, epsilon = 1e-7);
        assert!(g[(1, 1)].abs() < 1e-7 && g[(2, 2)].abs() < 1e-7);
    }

    /// min λ s.t. λI − S = X ⪰ 0.
    fn lambda_max_problem(sm: &DMatrix<f64>) -> SdpProblem {
        let s = sm.nrows();
        let mut rows = Vec::new();
        let mut b = Vec::new();
        for j in 0..s {
            for i in 0..=j {
                let r = b.len();
                if i == j {
                    rows.push((r, 0, 1.0));
                }
                rows.push((r, 1 + svec_index(i, j), if i == j { -1.0 } else { -std::f64::consts::FRAC_1_SQRT_2 }));
                b.push(sm[(i, j)]);
            }
        }
        let mut c = vec![0.0; 1 + s * (s + 1) / 2];
        c[0] = 1.0;
        problem(c, rows, b, vec![ConeBlock::Free(1), ConeBlock::Psd(s)])
    }

    #[test]
    fn largest_eigenvalue() {
        let sm = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, -1.0, 0.5, 0.0, 0.5, 3.0]);
        let s = solve(&lambda_max_problem(&sm), &SolveOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        let oracle = SymmetricEigen::new(sm).eigenvalues.max();
        assert_relative_eq!(s.x[0], oracle, epsilon = 1e-6);
    }

    #[test]
    fn reported_residuals_are_recomputable() {
        let sm = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let p = lambda_max_problem(&sm);
        let s = solve(&p, &SolveOptions::default()).unwrap();
        let r = residuals(&p, &s.x, &s.y);
        assert!((r.equality - s.residuals.equality).abs() <= 1e-12);
        assert!((r.gap - s.residuals.gap).abs() <= 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x ≥ 0, x = −1
        let p = problem(vec![0.0], vec![(0, 0, 1.0)], vec![-1.0], vec![ConeBlock::NonNeg(1)]);
        assert_eq!(solve(&p, &SolveOptions::default()).unwrap().status, Status::Infeasible);
        // min −x, x ≥ 0
        let p = problem(vec![-1.0], vec![], vec![], vec![ConeBlock::NonNeg(1)]);
        assert_eq!(solve(&p, &SolveOptions::default()).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn status_is_scale_invariant() {
        let sm = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, -2.0]);
        let p = lambda_max_problem(&sm);
        let mut q = p.clone();
        q.c.iter_mut().for_each(|v| *v *= 1e3);
        q.b.iter_mut().for_each(|v| *v *= 1e3);
        let a = solve(&p, &SolveOptions::default()).unwrap();
        let b = solve(&q, &SolveOptions::default()).unwrap();
        assert_eq!(a.status, b.status, "{:?} {:?}", a.residuals, b.residuals);
    }

    #[test]
    fn tolerance_range_enforced() {
        let p = problem(vec![1.0], vec![], vec![], vec![ConeBlock::NonNeg(1)]);
        let mut o = SolveOptions::default();
        o.tol = 1e-12;
        assert!(solve(&p, &o).is_err());
        o.tol = 0.1;
        assert!(solve(&p, &o).is_err());
    }

    #[test]
    fn empty_problem_is_trivial() {
        let p = problem(vec![], vec![], vec![], vec![]);
        let s = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn text_format_round_trip_is_byte_stable() {
        let sm = DMatrix::from_row_slice(2, 2, &[0.1, 1.0 / 3.0, 1.0 / 3.0, -2.5e-7]);
        let p = lambda_max_problem(&sm);
        let t = p.to_text();
        let back = SdpProblem::from_text(&t).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_text(), t);
        assert!(SdpProblem::from_text("conic-sdp 2\n").is_err());
    }
}

//! Compilation of an [`SosProgram`] into a standard-form SDP, and recovery
//! of the polynomial solution.
//!
//! An SOS constraint `p = σ_0 + Σ σ_i g_i` becomes Gram matrices
//! `σ_i = m_iᵀ G_i m_i`, `G_i ⪰ 0`, and one equality per monomial of the
//! expansion. A polynomial matrix constraint `M(x) ⪰ 0` becomes
//! `M = (z ⊗ I)ᵀ D (z ⊗ I)`, `D ⪰ 0`, matched entry by entry. The problem
//! is posed in `y = x / scale`, every row is normalized to unit max-norm
//! and the objective to unit max-norm.
//!
//! Gram bases are pruned exactly: a monomial `m` whose square lies outside
//! the degree range or the per-variable exponent range of a diagonal's
//! support forces its Gram row to zero in every feasible point, so
//! dropping it changes neither feasibility nor the optimum.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conic::{self, smat, svec_index, ConeBlock, ConicSolution, SdpProblem, SolveOptions, Status, Triplets};
use crate::error::{Error, Result};
use crate::ocpsynth::{AffinePoly, LinExpr, SosProgram};
use crate::polybasis::{monomials_up_to, Monomial, Polynomial};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileOptions {
    pub prune: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { prune: true }
    }
}

/// One PSD variable of the compiled problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    /// Index into [`CompiledProgram::owners`].
    pub owner: usize,
    /// Cone block index in the SDP.
    pub cone: usize,
    /// Row/column labels: matrix row `i` of the constraint and monomial.
    pub basis: Vec<(usize, Monomial)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompiledProgram {
    pub sdp: SdpProblem,
    pub blocks: Vec<BlockInfo>,
    /// Constraint names: SOS, matrix, then equality constraints.
    pub owners: Vec<String>,
    pub row_owner: Vec<usize>,
    /// Factor each row was divided by.
    pub row_scale: Vec<f64>,
    pub objective_scale: f64,
    pub n_decisions: usize,
    pub scale: Vec<f64>,
}

#[derive(Default)]
struct Row {
    entries: BTreeMap<usize, f64>,
    rhs: f64,
}

impl Row {
    fn add(&mut self, col: usize, v: f64) {
        if v != 0.0 {
            *self.entries.entry(col).or_insert(0.0) += v;
        }
    }

    fn has_gram(&self, nd: usize) -> bool {
        self.entries.iter().any(|(&c, &v)| c >= nd && v != 0.0)
    }

    fn has_any(&self) -> bool {
        self.entries.values().any(|&v| v != 0.0)
    }
}

type RowKey = (usize, usize, usize, Monomial);

struct Builder {
    nd: usize,
    rows: BTreeMap<RowKey, Row>,
    cones: Vec<ConeBlock>,
    names: Vec<String>,
    blocks: Vec<BlockInfo>,
    next_col: usize,
}

impl Builder {
    fn row(&mut self, key: RowKey) -> &mut Row {
        self.rows.entry(key).or_default()
    }

    /// `+ expr` into the row of `key`: decisions on the left, the constant
    /// moved to the right-hand side.
    fn add_expr(&mut self, key: RowKey, e: &LinExpr) {
        let r = self.row(key);
        for (&i, &v) in &e.terms {
            r.add(i, v);
        }
        r.rhs -= e.constant;
    }

    fn new_psd(&mut self, name: String, owner: usize, basis: Vec<(usize, Monomial)>) -> Option<(usize, usize)> {
        if basis.is_empty() {
            return None;
        }
        let side = basis.len();
        let start = self.next_col;
        self.next_col += side * (side + 1) / 2;
        self.cones.push(ConeBlock::Psd(side));
        self.names.push(name.clone());
        self.blocks.push(BlockInfo {
            name,
            owner,
            cone: self.cones.len() - 1,
            basis,
        });
        Some((start, side))
    }

    /// Subtract `Σ_{(P,Q)} D_PQ · basis_P · basis_Q · mult` for ordered pairs
    /// with `P` in row group `i` and `Q` in row group `j`, into rows
    /// `(owner, i, j, ·)`.
    #[allow(clippy::too_many_arguments)]
    fn sub_quadratic(
        &mut self,
        owner: usize,
        start: usize,
        basis: &[(usize, Monomial)],
        i: usize,
        j: usize,
        mult: &Polynomial,
        key_ij: (usize, usize),
    ) {
        let r2 = std::f64::consts::SQRT_2;
        for (p, (gi, mp)) in basis.iter().enumerate() {
            if *gi != i {
                continue;
            }
            for (q, (gj, mq)) in basis.iter().enumerate() {
                if *gj != j {
                    continue;
                }
                let w = if p == q { 1.0 } else { 1.0 / r2 };
                let col = start + svec_index(p, q);
                let prod = mp.mul(mq);
                for (mm, c) in mult.terms() {
                    let key = (owner, key_ij.0, key_ij.1, prod.mul(mm));
                    self.row(key).add(col, -w * c);
                }
            }
        }
    }
}

/// Gram monomials able to appear in an SOS representation of a polynomial
/// with the given support.
pub fn gram_basis(p: &AffinePoly, max_half: Option<usize>, prune: bool) -> Vec<Monomial> {
    let n = p.n_vars();
    if p.is_zero() {
        return Vec::new();
    }
    let hi = p.degree();
    let top = max_half.map_or(hi / 2, |h| h.min(hi / 2));
    let all = monomials_up_to(n, top);
    if !prune {
        return all;
    }
    let lo = p.min_degree();
    let maxexp = p.max_exponents();
    all.into_iter()
        .filter(|m| {
            2 * m.degree() >= lo
                && 2 * m.degree() <= hi
                && m.exponents().iter().zip(&maxexp).all(|(&e, &me)| 2 * e as usize <= me)
        })
        .collect()
}

/// Build the SDP for `prog`.
pub fn assemble_sdp(prog: &SosProgram, opts: &CompileOptions) -> Result<CompiledProgram> {
    prog.validate()?;
    let nd = prog.n_decisions();
    let scale = prog.scale.clone();
    let mut owners: Vec<String> = Vec::new();
    let mut b = Builder {
        nd,
        rows: BTreeMap::new(),
        cones: vec![ConeBlock::Free(nd)],
        names: vec!["decisions".into()],
        blocks: Vec::new(),
        next_col: nd,
    };
    let one = Polynomial::constant(prog.n_vars, 1.0);

    for c in &prog.sos {
        let owner = owners.len();
        owners.push(c.name.clone());
        let p = c.poly.rescaled(&scale);
        for (m, e) in p.terms() {
            b.add_expr((owner, 0, 0, m.clone()), e);
        }
        if c.multipliers.is_empty() {
            let basis: Vec<(usize, Monomial)> = gram_basis(&p, None, opts.prune).into_iter().map(|m| (0, m)).collect();
            if let Some((start, _)) = b.new_psd(c.name.clone(), owner, basis.clone()) {
                b.sub_quadratic(owner, start, &basis, 0, 0, &one, (0, 0));
            }
        } else {
            let mults: Vec<Polynomial> = c.multipliers.iter().map(|g| g.rescaled(&scale)).collect();
            let top = mults.iter().map(|g| g.degree()).chain([p.degree()]).max().unwrap_or(0);
            let even = 2 * top.div_ceil(2);
            for (k, g) in std::iter::once(&one).chain(mults.iter()).enumerate() {
                if g.degree() > even {
                    continue;
                }
                let half = (even - g.degree()) / 2;
                let basis: Vec<(usize, Monomial)> = monomials_up_to(prog.n_vars, half).into_iter().map(|m| (0, m)).collect();
                let name = if k == 0 { c.name.clone() } else { format!("{}/multiplier{k}", c.name) };
                if let Some((start, _)) = b.new_psd(name, owner, basis.clone()) {
                    b.sub_quadratic(owner, start, &basis, 0, 0, g, (0, 0));
                }
            }
        }
    }

    for c in &prog.psd {
        let owner = owners.len();
        owners.push(c.name.clone());
        let p = c.entries.len();
        let ents: Vec<Vec<AffinePoly>> = c
            .entries
            .iter()
            .map(|r| r.iter().map(|e| e.rescaled(&scale)).collect())
            .collect();
        for i in 0..p {
            for j in i + 1..p {
                if c.entries[i][j] != c.entries[j][i] {
                    return Err(Error::InvalidArgument(format!("matrix constraint `{}` is not symmetric", c.name)));
                }
            }
        }
        for (i, row) in ents.iter().enumerate() {
            for (j, e) in row.iter().enumerate().skip(i) {
                if e.degree() > 2 * c.z_degree && !e.is_zero() {
                    return Err(Error::DegreeOverflow {
                        what: format!("entry ({i}, {j}) of `{}`", c.name),
                        required: e.degree().div_ceil(2),
                        available: c.z_degree,
                    });
                }
                for (m, le) in e.terms() {
                    b.add_expr((owner, i, j, m.clone()), le);
                }
            }
        }
        let mut basis = Vec::new();
        for (i, row) in ents.iter().enumerate() {
            for m in gram_basis(&row[i], Some(c.z_degree), opts.prune) {
                basis.push((i, m));
            }
        }
        if let Some((start, _)) = b.new_psd(c.name.clone(), owner, basis.clone()) {
            for i in 0..p {
                for j in i..p {
                    b.sub_quadratic(owner, start, &basis, i, j, &one, (i, j));
                }
            }
        }
    }

    for (name, e) in &prog.equalities {
        let owner = owners.len();
        owners.push(name.clone());
        for (m, le) in e.rescaled(&scale).terms() {
            b.add_expr((owner, 0, 0, m.clone()), le);
        }
    }

    let ncols = b.next_col;
    let mut triplets = Vec::new();
    let mut rhs = Vec::new();
    let mut row_owner = Vec::new();
    let mut row_scale = Vec::new();
    let mut const_max = vec![0.0f64; owners.len()];
    for ((o, ..), r) in &b.rows {
        const_max[*o] = const_max[*o].max(r.rhs.abs());
    }
    for ((owner, i, j, m), r) in &b.rows {
        if !r.has_any() {
            if r.rhs.abs() > 1e-12 * const_max[*owner].max(1.0) {
                return Err(Error::NotSos {
                    block: owners[*owner].clone(),
                    reason: format!(
                        "coefficient of {m} in entry ({i}, {j}) is {} but no certificate term can produce it",
                        -r.rhs
                    ),
                });
            }
            continue;
        }
        if !r.has_gram(b.nd) && r.entries.values().all(|v| v.abs() < 1e-300) {
            continue;
        }
        let s = r.entries.values().fold(r.rhs.abs(), |a, v| a.max(v.abs()));
        let k = rhs.len();
        for (&col, &v) in &r.entries {
            if v != 0.0 {
                triplets.push((k, col, v / s));
            }
        }
        rhs.push(r.rhs / s);
        row_owner.push(*owner);
        row_scale.push(s);
    }

    let mut c = vec![0.0; ncols];
    for (&i, &v) in &prog.objective.terms {
        c[i] += v;
    }
    let objective_scale = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if objective_scale > 0.0 {
        c.iter_mut().for_each(|v| *v /= objective_scale);
    }
    let sdp = SdpProblem {
        c,
        a: Triplets::new(rhs.len(), ncols, triplets)?,
        b: rhs,
        cones: b.cones,
        names: b.names,
    };
    sdp.validate()?;
    Ok(CompiledProgram {
        sdp,
        blocks: b.blocks,
        owners,
        row_owner,
        row_scale,
        objective_scale: if objective_scale > 0.0 { objective_scale } else { 1.0 },
        n_decisions: nd,
        scale,
    })
}

/// Per-constraint quality of a solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub name: String,
    /// Smallest eigenvalue over the constraint's PSD variables (`+inf` when
    /// the constraint has none).
    pub min_eig: f64,
    /// Largest absolute residual among its normalized equality rows.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockValue {
    pub name: String,
    pub basis: Vec<(usize, Monomial)>,
    #[serde(with = "crate::matio::mat")]
    pub matrix: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SosSolution {
    pub status: Status,
    pub decisions: Vec<f64>,
    /// Program objective at `decisions`.
    pub objective: f64,
    pub constraints: Vec<ConstraintReport>,
    pub blocks: Vec<BlockValue>,
    pub conic_residuals: conic::Residuals,
    pub iterations: u32,
    /// Scaling of `x` the Gram bases refer to.
    pub scale: Vec<f64>,
}

impl SosSolution {
    pub fn block(&self, name: &str) -> Option<&BlockValue> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn worst_residual(&self) -> f64 {
        self.constraints.iter().fold(0.0, |m, c| m.max(c.residual))
    }

    pub fn min_eig(&self) -> f64 {
        self.constraints.iter().fold(f64::INFINITY, |m, c| m.min(c.min_eig))
    }
}

/// Decisions, Gram matrices and per-constraint diagnostics from a conic
/// solution.
pub fn extract_solution(compiled: &CompiledProgram, prog: &SosProgram, sol: &ConicSolution) -> Result<SosSolution> {
    let sdp = &compiled.sdp;
    if sol.x.len() != sdp.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: sdp.n_vars(),
            got: sol.x.len(),
        });
    }
    let decisions = sol.x[..compiled.n_decisions].to_vec();
    let ax = sdp.a.mul_vec(&sol.x);
    let mut constraints: Vec<ConstraintReport> = compiled
        .owners
        .iter()
        .map(|n| ConstraintReport {
            name: n.clone(),
            min_eig: f64::INFINITY,
            residual: 0.0,
        })
        .collect();
    for (r, &o) in compiled.row_owner.iter().enumerate() {
        let res = (ax[r] - sdp.b[r]).abs();
        constraints[o].residual = constraints[o].residual.max(res);
    }
    let offsets = sdp.offsets();
    let mut blocks = Vec::with_capacity(compiled.blocks.len());
    for bi in &compiled.blocks {
        let side = bi.basis.len();
        let off = offsets[bi.cone];
        let m = smat(&sol.x[off..off + side * (side + 1) / 2], side);
        let ev = m.clone().symmetric_eigenvalues().min();
        let rep = &mut constraints[bi.owner];
        rep.min_eig = rep.min_eig.min(ev);
        blocks.push(BlockValue {
            name: bi.name.clone(),
            basis: bi.basis.clone(),
            matrix: m,
        });
    }
    Ok(SosSolution {
        status: sol.status,
        objective: prog.objective.eval(&decisions),
        decisions,
        constraints,
        blocks,
        conic_residuals: sol.residuals.clone(),
        iterations: sol.iterations,
        scale: compiled.scale.clone(),
    })
}

/// Constraint carrying the largest share of a Farkas certificate.
pub fn failing_constraint(compiled: &CompiledProgram, y: &[f64]) -> Option<String> {
    let mut mass = vec![0.0; compiled.owners.len()];
    for (r, &o) in compiled.row_owner.iter().enumerate() {
        mass[o] += y.get(r).map_or(0.0, |v| v.abs());
    }
    mass.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .filter(|(_, &m)| m > 0.0)
        .map(|(i, _)| compiled.owners[i].clone())
}

/// Compile, solve and extract. Infeasible and unbounded outcomes are
/// errors naming the constraint the certificate points at.
pub fn solve_program(prog: &SosProgram, compile: &CompileOptions, opts: &SolveOptions) -> Result<SosSolution> {
    let compiled = assemble_sdp(prog, compile)?;
    let sol = conic::solve(&compiled.sdp, opts)?;
    match sol.status {
        Status::Infeasible | Status::Unbounded => {
            let culprit = failing_constraint(&compiled, &sol.y).unwrap_or_else(|| "unknown".into());
            Err(Error::Solver {
                status: sol.status.to_string(),
                detail: format!("certificate concentrated on constraint `{culprit}` (backend {})", sol.backend_status),
            })
        }
        _ => {
            if sol.status != Status::Optimal {
                log::warn!("conic solve ended with status {} ({})", sol.status, sol.backend_status);
            }
            extract_solution(&compiled, prog, &sol)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocpsynth::{PsdConstraint, SosConstraint};
    use crate::polybasis::{BasisDictionary, BasisKind, DomainBox};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixed(n: usize, name: &str, p: Polynomial) -> SosProgram {
        let mut prog = SosProgram::new(n);
        prog.sos.push(SosConstraint {
            name: name.into(),
            poly: AffinePoly::from_poly(&p),
            multipliers: vec![],
        });
        prog
    }

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn one_plus_square_is_sos() {
        let p = Polynomial::from_exponents(1, &[(&[2], 1.0), (&[0], 1.0)]);
        let sol = solve_program(&fixed(1, "p", p), &CompileOptions::default(), &opts()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let g = &sol.block("p").unwrap().matrix;
        assert!((g - DMatrix::identity(2, 2)).amax() < 1e-6, "{g}");
    }

    #[test]
    fn odd_polynomial_is_rejected_before_solving() {
        let err = assemble_sdp(&fixed(1, "odd", Polynomial::var(1, 0)), &CompileOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NotSos { ref block, .. } if block == "odd"), "{err}");
        let cubic = Polynomial::from_exponents(1, &[(&[3], 1.0), (&[2], 5.0)]);
        assert!(matches!(
            assemble_sdp(&fixed(1, "c", cubic), &CompileOptions { prune: false }),
            Err(Error::NotSos { .. })
        ));
    }

    #[test]
    fn perfect_square_has_rank_one_gram() {
        let x1 = Polynomial::var(2, 0);
        let x2 = Polynomial::var(2, 1);
        let s = &x1 + &x2;
        let sol = solve_program(&fixed(2, "sq", &s * &s), &CompileOptions::default(), &opts()).unwrap();
        let g = &sol.block("sq").unwrap().matrix;
        let ev = g.clone().symmetric_eigenvalues();
        let (lo, hi) = (ev.min(), ev.max());
        assert!(lo.abs() < 1e-6 && (hi - 2.0).abs() < 1e-6, "{ev}");
    }

    #[test]
    fn scalar_toy_minimum() {
        // min t  s.t.  t (1 + x²) − x ∈ Σ  →  t* = 1/2
        let dict = BasisDictionary::build(BasisKind::Monomial, 1, 1, DomainBox::cube(1, -1.0, 1.0).unwrap()).unwrap();
        let mut prog = SosProgram::new(1);
        prog.add_decision("t", &dict, 1).unwrap();
        prog.objective = LinExpr::var(0, 1.0);
        let mut p = AffinePoly::from_decision(0, &Polynomial::from_exponents(1, &[(&[0], 1.0), (&[2], 1.0)]));
        p.add_poly(-1.0, &Polynomial::var(1, 0));
        prog.sos.push(SosConstraint {
            name: "toy".into(),
            poly: p,
            multipliers: vec![],
        });
        let sol = solve_program(&prog, &CompileOptions::default(), &opts()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - 0.5).abs() < 1e-6, "{}", sol.objective);
    }

    #[test]
    fn empty_program_is_trivial() {
        let prog = SosProgram::new(2);
        let sol = solve_program(&prog, &CompileOptions::default(), &opts()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!(sol.decisions.is_empty());
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn constant_identity_matrix_is_feasible() {
        let mut prog = SosProgram::new(1);
        let e = |v: f64| AffinePoly::from_poly(&Polynomial::constant(1, v));
        prog.psd.push(PsdConstraint {
            name: "eye".into(),
            entries: vec![vec![e(1.0), e(0.0)], vec![e(0.0), e(1.0)]],
            z_degree: 1,
        });
        let sol = solve_program(&prog, &CompileOptions::default(), &opts()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let d = &sol.block("eye").unwrap().matrix;
        assert!((d - DMatrix::identity(2, 2)).amax() < 1e-6);
    }

    #[test]
    fn psd_round_trip_from_random_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let z = monomials_up_to(2, 1);
        let p = 2;
        let side = z.len() * p;
        let f = DMatrix::from_fn(side, side, |_, _| rng.gen_range(-1.0..1.0));
        let d0 = &f * f.transpose();
        // index of (z_a ⊗ e_i) is a·p + i
        let entry = |i: usize, j: usize| {
            let mut h = Polynomial::zero(2);
            for (a, ma) in z.iter().enumerate() {
                for (b, mb) in z.iter().enumerate() {
                    h.add_term(ma.mul(mb), d0[(a * p + i, b * p + j)]);
                }
            }
            h
        };
        let h: Vec<Vec<Polynomial>> = (0..p).map(|i| (0..p).map(|j| entry(i, j)).collect()).collect();
        let mut prog = SosProgram::new(2);
        prog.psd.push(PsdConstraint {
            name: "h".into(),
            entries: h.iter().map(|r| r.iter().map(AffinePoly::from_poly).collect()).collect(),
            z_degree: 1,
        });
        let sol = solve_program(&prog, &CompileOptions::default(), &opts()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let blk = sol.block("h").unwrap();
        assert!(sol.min_eig() > -1e-8);
        for _ in 0..20 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            for i in 0..p {
                for j in 0..p {
                    let mut v = 0.0;
                    for (r, (gi, mr)) in blk.basis.iter().enumerate() {
                        for (c, (gj, mc)) in blk.basis.iter().enumerate() {
                            if *gi == i && *gj == j {
                                v += blk.matrix[(r, c)] * mr.eval(&x) * mc.eval(&x);
                            }
                        }
                    }
                    let want = h[i][j].eval(&x);
                    assert!((v - want).abs() <= 1e-8 * (1.0 + want.abs()), "{v} vs {want}");
                }
            }
        }
    }

    #[test]
    fn localized_certificate_uses_multiplier() {
        // 1 − x² ≥ 0 on |x| ≤ 1 via 1 − x² = σ0 + σ1 (1 − x²)
        let mut prog = SosProgram::new(1);
        let g = Polynomial::from_exponents(1, &[(&[0], 1.0), (&[2], -1.0)]);
        prog.sos.push(SosConstraint {
            name: "loc".into(),
            poly: AffinePoly::from_poly(&g),
            multipliers: vec![g.clone()],
        });
        let sol = solve_program(&prog, &CompileOptions::default(), &opts()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!(sol.block("loc/multiplier1").is_some());
        assert!(solve_program(&fixed(1, "bare", g), &CompileOptions::default(), &opts()).is_err());
    }

    #[test]
    fn infeasible_names_the_constraint() {
        let mut prog = fixed(1, "fine", Polynomial::from_exponents(1, &[(&[2], 1.0), (&[0], 1.0)]));
        prog.sos.push(SosConstraint {
            name: "bad".into(),
            poly: AffinePoly::from_poly(&Polynomial::from_exponents(1, &[(&[2], 1.0), (&[0], -1.0)])),
            multipliers: vec![],
        });
        match solve_program(&prog, &CompileOptions::default(), &opts()) {
            Err(Error::Solver { status, detail }) => {
                assert_eq!(status, "infeasible");
                assert!(detail.contains("`bad`"), "{detail}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scaling_does_not_change_the_answer() {
        let dict = BasisDictionary::build(BasisKind::Monomial, 1, 1, DomainBox::cube(1, -1.0, 1.0).unwrap()).unwrap();
        let build = |s: f64| {
            let mut prog = SosProgram::new(1);
            prog.add_decision("t", &dict, 1).unwrap();
            prog.objective = LinExpr::var(0, 1.0);
            let mut p = AffinePoly::from_decision(0, &Polynomial::from_exponents(1, &[(&[0], 1.0), (&[2], 1.0)]));
            p.add_poly(-1.0, &Polynomial::var(1, 0));
            prog.sos.push(SosConstraint {
                name: "toy".into(),
                poly: p,
                multipliers: vec![],
            });
            prog.scale = vec![s];
            solve_program(&prog, &CompileOptions::default(), &opts()).unwrap().objective
        };
        assert!((build(1.0) - build(7.0)).abs() < 1e-6);
    }

    #[test]
    fn export_is_byte_stable() {
        let p = Polynomial::from_exponents(2, &[(&[2, 0], 1.0), (&[0, 2], 2.0), (&[1, 1], 0.5), (&[0, 0], 1.0)]);
        let a = assemble_sdp(&fixed(2, "p", p.clone()), &CompileOptions::default()).unwrap();
        let b = assemble_sdp(&fixed(2, "p", p), &CompileOptions::default()).unwrap();
        assert_eq!(a.sdp.to_text(), b.sdp.to_text());
        assert_eq!(SdpProblem::from_text(&a.sdp.to_text()).unwrap().to_text(), a.sdp.to_text());
    }

    #[test]
    fn pruning_keeps_only_reachable_monomials() {
        let p = AffinePoly::from_poly(&Polynomial::from_exponents(2, &[(&[4, 0], 1.0), (&[0, 2], 1.0)]));
        let pruned = gram_basis(&p, None, true);
        // x2² bounds x2 to exponent 1, degree at least 1
        assert!(pruned.iter().all(|m| m.exponents()[1] <= 1 && m.degree() >= 1));
        assert!(pruned.contains(&Monomial::from_exponents(&[2, 0])));
        assert_eq!(gram_basis(&p, None, false).len(), 6);
    }

    use proptest::prelude::*;

    fn arb_poly() -> impl Strategy<Value = Polynomial> {
        proptest::collection::vec((0u8..3, 0u8..3, -2.0f64..2.0), 1..6).prop_map(|ts| {
            Polynomial::from_terms(2, ts.into_iter().map(|(i, j, c)| (Monomial::from_exponents(&[i, j]), c)))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn pruned_gram_basis_keeps_every_square_root_monomial(q1 in arb_poly(), q2 in arb_poly()) {
            let p = &(&q1 * &q1) + &(&q2 * &q2);
            prop_assume!(!p.pruned(1e-9).is_zero());
            let q1 = q1.pruned(1e-9);
            let q2 = q2.pruned(1e-9);
            let basis = gram_basis(&AffinePoly::from_poly(&p), None, true);
            for (m, _) in q1.terms().chain(q2.terms()) {
                prop_assert!(basis.contains(m), "{m} missing from {basis:?}");
            }
        }
    }
}

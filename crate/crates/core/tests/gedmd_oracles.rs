use densocp::dynsim::{
    collect_protocol, finite_difference, simulate, systems, DiffScheme, InputPolicy, ProtocolOptions, Sampling,
    SimLimits,
    TrajectoryDataset,
};
use densocp::gedmd::{assemble_gram, estimate_generator, identify_linear, EstimateOptions, GeneratorSet};
use densocp::polybasis::{BasisDictionary, BasisKind, DomainBox, Polynomial};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn example1_data(dt: f64, seed: u64) -> Vec<TrajectoryDataset> {
    let sys = systems::example1();
    let dom = DomainBox::cube(2, -5.0, 5.0).unwrap();
    let opts = ProtocolOptions {
        n_traj: 200,
        steps: 100,
        dt,
        seed,
        scheme: DiffScheme::Backward,
        clip_to_domain: true,
        sampling: Sampling::Trajectories,
        stencil_refine: 10,
    };
    collect_protocol(&sys, &dom, &opts).unwrap()
}

fn with_analytic_derivs(ds: &TrajectoryDataset, field: &[Polynomial]) -> TrajectoryDataset {
    let mut out = ds.clone();
    out.derivs = ds
        .states
        .iter()
        .map(|x| field.iter().map(|f| f.eval(x)).collect())
        .collect();
    out
}

/// Least squares by Householder QR on the tall sample matrix, one
/// right-hand side per basis function, against symbolic `F·∇ψ_k`.
fn qr_galerkin(ds: &TrajectoryDataset, dict: &BasisDictionary, field: &[Polynomial]) -> DMatrix<f64> {
    let q = dict.size();
    let t = ds.len();
    let psi = DMatrix::from_fn(t, q, |l, k| dict.eval_basis(&ds.states[l])[k]);
    let images: Vec<Polynomial> = (0..q)
        .map(|k| {
            let b = dict.basis_function(&dict.indices()[k]);
            let mut img = Polynomial::zero(2);
            for (i, fi) in field.iter().enumerate() {
                img = &img + &(fi * &b.partial(i));
            }
            img
        })
        .collect();
    let rhs = DMatrix::from_fn(t, q, |l, k| images[k].eval(&ds.states[l]));
    let qr = psi.qr();
    let qt_rhs = qr.q().transpose() * rhs;
    let k = qr.r().solve_upper_triangular(&qt_rhs).unwrap();
    k.transpose()
}

#[test]
fn example1_drift_matches_least_squares_galerkin() {
    let sys = systems::example1();
    let drift = sys.drift.as_poly().unwrap().to_vec();
    let dict = BasisDictionary::build(BasisKind::Monomial, 2, 4, DomainBox::cube(2, -5.0, 5.0).unwrap()).unwrap();
    let data = with_analytic_derivs(&example1_data(0.01, 5)[0], &drift);
    let (l0, cond) = estimate_generator(&assemble_gram(&data, &dict).unwrap(), &EstimateOptions::default()).unwrap();
    assert!(!cond.rank_deficient());
    let oracle = qr_galerkin(&data, &dict, &drift);
    let rel = (&l0 - &oracle).norm() / oracle.norm();
    assert!(rel <= 1e-6, "relative Frobenius error {rel:e}");

    // the reconstructed drift is closed in a degree-4 monomial dictionary
    let gs = GeneratorSet::from_generators(dict, vec![l0], vec![cond]).unwrap();
    let f = gs.field_polys(0);
    for i in 0..2 {
        assert!((&f[i] - &drift[i]).max_abs_coeff() < 1e-6, "{} vs {}", f[i], drift[i]);
    }
}

/// Backward-difference samples at the times `0.01 k`, `k = 1..=100`,
/// integrated with step `0.01 / refine` from common initial states.
fn sampled_at(refine: usize, x0s: &[Vec<f64>]) -> TrajectoryDataset {
    let sys = systems::example1();
    let dt = 0.01 / refine as f64;
    let limits = SimLimits {
        keep_in: Some(DomainBox::cube(2, -5.0, 5.0).unwrap()),
        ..SimLimits::default()
    };
    let mut ds = TrajectoryDataset::empty(0, dt, 2, 1);
    for x0 in x0s {
        let tr = simulate(&sys, &InputPolicy::Zero, x0, dt, 100 * refine, &limits).unwrap();
        if tr.truncated {
            continue;
        }
        let d = finite_difference(&tr.states, dt, DiffScheme::Backward).unwrap();
        let keep: Vec<usize> = (1..=100).map(|k| k * refine).collect();
        ds.push_samples(
            keep.iter().map(|&j| tr.states[j].clone()).collect(),
            keep.iter().map(|&j| d[j].clone()).collect(),
        )
        .unwrap();
    }
    ds
}

#[test]
fn backward_difference_error_is_first_order() {
    let sys = systems::example1();
    let drift = sys.drift.as_poly().unwrap().to_vec();
    let dict = BasisDictionary::build(BasisKind::Monomial, 2, 4, DomainBox::cube(2, -5.0, 5.0).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x0s: Vec<Vec<f64>> = (0..300)
        .map(|_| vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)])
        .collect();
    let opts = EstimateOptions::default();
    let err = |refine: usize| {
        let fd = sampled_at(refine, &x0s);
        let exact = with_analytic_derivs(&fd, &drift);
        let (l_fd, _) = estimate_generator(&assemble_gram(&fd, &dict).unwrap(), &opts).unwrap();
        let (l_ex, _) = estimate_generator(&assemble_gram(&exact, &dict).unwrap(), &opts).unwrap();
        (&l_fd - &l_ex).norm()
    };
    let ratio = err(1) / err(2);
    assert!((1.6..=2.4).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn example1_step_generator_recovers_input_field() {
    let sys = systems::example1();
    let drift = sys.drift.as_poly().unwrap().to_vec();
    let g = sys.inputs[0].as_poly().unwrap().to_vec();
    let dict = BasisDictionary::build(BasisKind::LegendreTensor, 2, 4, DomainBox::cube(2, -5.0, 5.0).unwrap()).unwrap();
    let raw = example1_data(0.01, 1);
    let step_field: Vec<Polynomial> = drift.iter().zip(&g).map(|(f, gi)| f + gi).collect();
    let data = vec![with_analytic_derivs(&raw[0], &drift), with_analytic_derivs(&raw[1], &step_field)];
    let gs = GeneratorSet::estimate(dict, &data, &EstimateOptions::default()).unwrap();
    let gf = gs.field_polys(1);
    assert!(gf[0].max_abs_coeff() < 1e-8);
    assert!((&gf[1] - &Polynomial::var(2, 0)).max_abs_coeff() < 1e-8);
    assert!(gs.div[1].max_abs_coeff() < 1e-8);
}

#[test]
fn doubled_step_doubles_control_generator() {
    let sys = systems::example1();
    let drift = sys.drift.as_poly().unwrap().to_vec();
    let g = sys.inputs[0].as_poly().unwrap().to_vec();
    let dict = BasisDictionary::build(BasisKind::LegendreTensor, 2, 4, DomainBox::cube(2, -5.0, 5.0).unwrap()).unwrap();
    let raw = example1_data(0.01, 2);
    let field = |u: f64| -> Vec<Polynomial> { drift.iter().zip(&g).map(|(f, gi)| f + &gi.scale(u)).collect() };
    let base = with_analytic_derivs(&raw[0], &drift);
    let step = |u: f64| {
        let mut d = with_analytic_derivs(&raw[0], &field(u));
        d.input_label = 1;
        d
    };
    let opts = EstimateOptions::default();
    let one = GeneratorSet::estimate(dict.clone(), &[base.clone(), step(1.0)], &opts).unwrap();
    let two = GeneratorSet::estimate(dict, &[base, step(2.0)], &opts).unwrap();
    let diff = (&two.fields[1] - &one.fields[1] * 2.0).norm() / one.fields[1].norm();
    assert!(diff < 1e-8, "{diff:e}");
}

#[test]
fn example1_linearization_near_origin() {
    let sys = systems::example1();
    let opts = ProtocolOptions {
        n_traj: 100,
        steps: 50,
        dt: 0.01,
        seed: 4,
        scheme: DiffScheme::Central,
        clip_to_domain: true,
        sampling: Sampling::Trajectories,
        stencil_refine: 10,
    };
    let data = collect_protocol(&sys, &DomainBox::cube(2, -0.5, 0.5).unwrap(), &opts).unwrap();
    let lm = identify_linear(&data, 0.5).unwrap();
    let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -0.5, -0.5]);
    assert!((&lm.a - &a).norm() < 0.05, "{}", lm.a);
    assert!(lm.b.norm() < 0.05, "{}", lm.b);
}

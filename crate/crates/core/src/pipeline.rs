//! File-based pipeline: collect, estimate, synthesize, rollout, certify.
//!
//! Every stage reads the run configuration plus the files written by the
//! stages before it, so any suffix of the pipeline can be replayed from
//! an output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conic::SolveOptions;
use crate::ctrl::{self, CertificateReport, ControllerArtifact, CostSpec, LocalDesign, Provenance};
use crate::dynsim::{collect_protocol, systems, ControlAffineSystem, DiffScheme, Field, InputPolicy, ProtocolOptions, Sampling, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::gedmd::{EstimateOptions, GeneratorSet};
use crate::ocpsynth::{build_constraint_poly, build_program, Norm, OcpSpec, SosProgram};
use crate::polybasis::{BasisDictionary, BasisKind, DomainBox, Polynomial};
use crate::soscompile::{assemble_sdp, solve_program, CompileOptions, SosSolution};

pub const GENERATORS_FILE: &str = "generators.json";
pub const PROGRAM_FILE: &str = "program.json";
pub const SDP_FILE: &str = "sdp.txt";
pub const SOLUTION_FILE: &str = "solution.json";
pub const CONTROLLER_FILE: &str = "controller.json";
pub const ROLLOUT_SUMMARY_FILE: &str = "rollout_summary.json";
pub const CERTIFICATE_FILE: &str = "certificate.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Example1,
    Vdp,
    Pendulum,
    Lorentz,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Example1, Preset::Vdp, Preset::Pendulum, Preset::Lorentz];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Example1 => "example1",
            Preset::Vdp => "vdp",
            Preset::Pendulum => "pendulum",
            Preset::Lorentz => "lorentz",
        }
    }

    pub fn system(self) -> ControlAffineSystem {
        match self {
            Preset::Example1 => systems::example1(),
            Preset::Vdp => systems::van_der_pol(),
            Preset::Pendulum => systems::pendulum(),
            Preset::Lorentz => systems::lorentz(10.0, 28.0, 8.0 / 3.0),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("unknown preset `{s}` (expected example1, vdp, pendulum or lorentz)")))
    }
}

/// Polynomial control-affine field `ẋ = f(x) + Σ_j g_j(x) u_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomSystem {
    pub n: usize,
    pub drift: Vec<Polynomial>,
    pub inputs: Vec<Vec<Polynomial>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemConfig {
    Preset(Preset),
    Custom(CustomSystem),
}

impl SystemConfig {
    pub fn build(&self) -> Result<ControlAffineSystem> {
        match self {
            SystemConfig::Preset(p) => Ok(p.system()),
            SystemConfig::Custom(c) => {
                let arity_ok = |v: &[Polynomial]| v.len() == c.n && v.iter().all(|p| p.n_vars() == c.n);
                if !arity_ok(&c.drift) || !c.inputs.iter().all(|g| arity_ok(g)) {
                    return Err(Error::InvalidArgument(format!(
                        "custom fields must have {} components in {} variables",
                        c.n, c.n
                    )));
                }
                Ok(ControlAffineSystem {
                    name: "custom".into(),
                    n: c.n,
                    drift: Field::Poly(c.drift.clone()),
                    inputs: c.inputs.iter().map(|g| Field::Poly(g.clone())).collect(),
                })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    pub kind: BasisKind,
    pub order: usize,
}

impl FromStr for BasisConfig {
    type Err = Error;

    /// `kind:order`, e.g. `legendre:4`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, order) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("basis `{s}` is not of the form kind:order")))?;
        let kind = match kind.to_ascii_lowercase().as_str() {
            "monomial" => BasisKind::Monomial,
            "legendre" | "legendre-tensor" => BasisKind::LegendreTensor,
            other => return Err(Error::Parse(format!("unknown basis kind `{other}`"))),
        };
        let order = order
            .parse()
            .map_err(|_| Error::Parse(format!("basis order `{order}` is not an integer")))?;
        Ok(BasisConfig { kind, order })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: u32,
    #[serde(default = "yes")]
    pub prune: bool,
}

fn yes() -> bool {
    true
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-7,
            max_iter: 200,
            prune: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub dt: f64,
    pub t_final: f64,
    pub x0s: Vec<Vec<f64>>,
    /// A run converges when its final state lies within this norm ball.
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    /// Grid points per axis; `None` picks 200 in two dimensions and 50 above.
    #[serde(default)]
    pub per_axis: Option<usize>,
    pub tol: f64,
}

/// Everything a run needs; serialized as the `--config` file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub basis: BasisConfig,
    pub domain: DomainBox,
    pub excluded: DomainBox,
    pub deg_a: usize,
    pub deg_c: usize,
    pub deg_s: usize,
    #[serde(default)]
    pub deg_w: Option<usize>,
    pub alpha: u32,
    pub beta: f64,
    pub gamma: f64,
    pub norm: Norm,
    pub q: Polynomial,
    #[serde(with = "crate::matio::mat")]
    pub r: DMatrix<f64>,
    #[serde(default)]
    pub input_bound: Option<f64>,
    #[serde(default = "one")]
    pub slack_floor: f64,
    #[serde(default = "yes")]
    pub localize: bool,
    /// State weight `Q = local_q·I` of the local design that fixes `b`.
    #[serde(default = "one")]
    pub local_q: f64,
    pub protocol: ProtocolOptions,
    #[serde(default)]
    pub estimate: EstimateOptions,
    #[serde(default)]
    pub solver: SolverConfig,
    pub rollout: RolloutConfig,
    pub certify: CertifyConfig,
    pub out: PathBuf,
}

fn one() -> f64 {
    1.0
}

impl RunConfig {
    /// Shared defaults: Legendre dictionary, `X = [−5, 5]ⁿ`,
    /// `N = [−0.1, 0.1]ⁿ`, `α = 4`, `β = 1`, `q = xᵀx`, `R = I` and
    /// `2·10⁴` samples per input label at `Δt = 0.01`.
    pub fn preset(p: Preset) -> RunConfig {
        let sys = p.system();
        let n = sys.n;
        let m = sys.m();
        let (order, deg_c, deg_s, deg_w, norm, rollout) = match p {
            Preset::Example1 => (
                4,
                2,
                2,
                None,
                Norm::L2,
                RolloutConfig {
                    dt: 0.01,
                    t_final: 10.0,
                    x0s: vec![vec![3.0, 3.0], vec![-3.0, 3.0], vec![3.0, -1.0], vec![-3.0, -3.0], vec![0.5, 3.0]],
                    radius: 0.05,
                },
            ),
            Preset::Vdp => (
                9,
                6,
                7,
                None,
                Norm::L2,
                RolloutConfig {
                    dt: 0.01,
                    t_final: 20.0,
                    x0s: vec![vec![2.0, 2.0], vec![-2.0, 2.0], vec![-1.0, -3.0]],
                    radius: 0.1,
                },
            ),
            Preset::Pendulum => (
                7,
                3,
                7,
                None,
                Norm::L2,
                RolloutConfig {
                    dt: 0.01,
                    t_final: 20.0,
                    x0s: vec![vec![std::f64::consts::FRAC_PI_2, 0.0], vec![-2.0, 1.0], vec![3.0, 0.0]],
                    radius: 0.1,
                },
            ),
            Preset::Lorentz => (
                6,
                4,
                4,
                None,
                Norm::L1,
                RolloutConfig {
                    dt: 0.01,
                    t_final: 20.0,
                    x0s: vec![vec![1.0, 1.0, 1.0], vec![-2.0, 2.0, 3.0]],
                    radius: 0.5,
                },
            ),
        };
        let mut cfg = RunConfig {
            system: SystemConfig::Preset(p),
            basis: BasisConfig {
                kind: BasisKind::LegendreTensor,
                order,
            },
            domain: DomainBox::cube(n, -5.0, 5.0).expect("valid box"),
            excluded: DomainBox::cube(n, -0.1, 0.1).expect("valid box"),
            deg_a: 1,
            deg_c,
            deg_s,
            deg_w,
            alpha: 4,
            beta: 1.0,
            gamma: 0.0,
            norm,
            q: Polynomial::quadratic_form(&DMatrix::identity(n, n)),
            r: DMatrix::identity(m, m),
            input_bound: None,
            slack_floor: 1.0,
            localize: true,
            local_q: 1.0,
            protocol: ProtocolOptions {
                n_traj: 200,
                steps: 100,
                dt: 0.01,
                seed: 1,
                scheme: DiffScheme::Central,
                clip_to_domain: true,
                sampling: Sampling::Anchored,
                stencil_refine: 10,
            },
            estimate: EstimateOptions::default(),
            solver: SolverConfig::default(),
            rollout,
            certify: CertifyConfig { per_axis: None, tol: 1e-6 },
            out: PathBuf::from("out").join(p.name()),
        };
        match p {
            Preset::Example1 => {}
            // a heavier ARE weight widens the margin on the plane where the
            // input cannot reduce b
            Preset::Vdp | Preset::Pendulum => cfg.local_q = 10.0,
            // at alpha = 4 the cubic x1*x2*x3 growth of the thin LQR
            // ellipsoid leaves no interior point at reduced order
            Preset::Lorentz => {
                cfg.local_q = 10.0;
                cfg.alpha = 6;
                cfg.solver.tol = 1e-6;
            }
        }
        cfg
    }

    pub fn from_json(s: &str) -> Result<RunConfig> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        RunConfig::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `OcpSpec` with the given denominator.
    pub fn ocp_spec(&self, b: Polynomial) -> OcpSpec {
        OcpSpec {
            gamma: self.gamma,
            alpha: self.alpha,
            beta: self.beta,
            q: self.q.clone(),
            r: self.r.clone(),
            b,
            domain: self.domain.clone(),
            excluded: self.excluded.clone(),
            deg_a: self.deg_a,
            deg_c: self.deg_c,
            deg_s: self.deg_s,
            deg_w: self.deg_w,
            norm: self.norm,
            input_bound: self.input_bound,
            slack_floor: self.slack_floor,
            localize: self.localize,
        }
    }

    /// Checks everything that does not need data; the denominator is
    /// stood in for by `xᵀx` until the local design exists.
    pub fn validate(&self) -> Result<()> {
        let sys = self.system.build()?;
        if self.domain.dim() != sys.n {
            return Err(Error::DimensionMismatch {
                expected: sys.n,
                got: self.domain.dim(),
            });
        }
        if self.basis.order == 0 {
            return Err(Error::InvalidArgument("basis order must be positive".into()));
        }
        for (what, v) in [("deg_a", self.deg_a), ("deg_c", self.deg_c)] {
            if v > self.basis.order {
                return Err(Error::DegreeOverflow {
                    what: what.into(),
                    required: v,
                    available: self.basis.order,
                });
            }
        }
        if !(self.rollout.dt > 0.0 && self.rollout.t_final > 0.0 && self.rollout.radius > 0.0) {
            return Err(Error::InvalidArgument("rollout dt, t_final and radius must be positive".into()));
        }
        if let Some(x) = self.rollout.x0s.iter().find(|x| x.len() != sys.n) {
            return Err(Error::DimensionMismatch {
                expected: sys.n,
                got: x.len(),
            });
        }
        if !(self.local_q > 0.0 && self.local_q.is_finite()) {
            return Err(Error::InvalidArgument("local_q must be positive".into()));
        }
        if self.certify.per_axis == Some(0) || !(self.certify.tol >= 0.0) {
            return Err(Error::InvalidArgument("certify needs a positive grid and a nonnegative tolerance".into()));
        }
        let stand_in = Polynomial::quadratic_form(&DMatrix::identity(sys.n, sys.n));
        self.ocp_spec(stand_in).validate(sys.m())
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            verbose: false,
        }
    }

    fn cost(&self) -> CostSpec {
        CostSpec {
            gamma: self.gamma,
            beta: self.beta,
            q: self.q.clone(),
            r: self.r.clone(),
        }
    }
}

fn data_stem(label: usize) -> String {
    format!("data_{label}")
}

fn require(stage: &str, path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingPrerequisite {
            stage: stage.into(),
            path: path.display().to_string(),
        })
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(fs::write(path, text)?)
}

/// Simulated datasets `data_{i}.csv` / `data_{i}.json`, one per input label.
pub fn cmd_collect(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let sys = cfg.system.build()?;
    let data = collect_protocol(&sys, &cfg.domain, &cfg.protocol)?;
    let mut paths = Vec::new();
    for ds in &data {
        let stem = data_stem(ds.input_label);
        ds.save(&cfg.out, &stem)?;
        paths.push(cfg.out.join(format!("{stem}.csv")));
    }
    Ok(paths)
}

/// Generators from the collected datasets, written to `generators.json`.
pub fn cmd_estimate(cfg: &RunConfig) -> Result<GeneratorSet> {
    cfg.validate()?;
    let sys = cfg.system.build()?;
    let mut data = Vec::new();
    for label in 0..=sys.m() {
        let stem = data_stem(label);
        for ext in ["csv", "json"] {
            require("estimate", &cfg.out.join(format!("{stem}.{ext}")))?;
        }
        data.push(TrajectoryDataset::load(&cfg.out, &stem)?);
    }
    let dict = BasisDictionary::build(cfg.basis.kind, sys.n, cfg.basis.order, cfg.domain.clone())?;
    let gens = GeneratorSet::estimate(dict, &data, &cfg.estimate)?;
    write(&cfg.out.join(GENERATORS_FILE), &gens.to_json()?)?;
    Ok(gens)
}

/// Linearization of the estimated fields at the origin.
pub fn linearization(gens: &GeneratorSet) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = gens.dict.n_vars();
    let zero = vec![0.0; n];
    let f = gens.field_polys(0);
    let a = DMatrix::from_fn(n, n, |i, j| f[i].partial(j).eval(&zero));
    let g: Vec<Vec<Polynomial>> = (1..=gens.m()).map(|j| gens.field_polys(j)).collect();
    let b = DMatrix::from_fn(n, gens.m(), |i, j| g[j][i].eval(&zero));
    (a, b)
}

/// Result of [`cmd_synthesize`].
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub program: SosProgram,
    pub solution: SosSolution,
    pub controller: ControllerArtifact,
}

/// Local design, SOS program, SDP, solution and controller files.
pub fn cmd_synthesize(cfg: &RunConfig) -> Result<Synthesis> {
    cfg.validate()?;
    let path = cfg.out.join(GENERATORS_FILE);
    require("synthesize", &path)?;
    let gens = GeneratorSet::from_json(&fs::read_to_string(&path)?)?;
    let (a_lin, b_lin) = linearization(&gens);
    let local = LocalDesign::design(&a_lin, &b_lin, cfg.local_q, &cfg.r, &cfg.excluded)?;
    let spec = cfg.ocp_spec(local.b_poly());
    let program = build_program(&spec, &gens)?;
    write(&cfg.out.join(PROGRAM_FILE), &program.to_json()?)?;
    let compile = CompileOptions { prune: cfg.solver.prune };
    write(&cfg.out.join(SDP_FILE), &assemble_sdp(&program, &compile)?.sdp.to_text())?;
    let solution = solve_program(&program, &compile, &cfg.solve_options())?;
    write(&cfg.out.join(SOLUTION_FILE), &serde_json::to_string_pretty(&solution)?)?;

    let a = program.block_poly("a", &solution.decisions)?;
    let c = (1..=gens.m())
        .map(|j| program.block_poly(&format!("c{j}"), &solution.decisions))
        .collect::<Result<Vec<_>>>()?;
    let transport = build_constraint_poly(&gens, &spec, &program)?.substitute(&solution.decisions);
    let mut controller = ControllerArtifact::new(a, c, cfg.gamma, cfg.alpha, local, transport, &cfg.domain)?;
    controller.provenance = Provenance {
        generator_digest: gens.digest()?,
        solver_status: solution.status.to_string(),
        objective: solution.objective,
        equality_residual: solution.conic_residuals.equality,
        min_gram_eig: solution.min_eig(),
        iterations: solution.iterations,
    };
    write(&cfg.out.join(CONTROLLER_FILE), &controller.to_json()?)?;
    Ok(Synthesis {
        program,
        solution,
        controller,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub x0: Vec<f64>,
    pub csv: String,
    pub final_state: Vec<f64>,
    pub final_norm: f64,
    pub max_norm: f64,
    /// First time `‖x‖ ≤ radius`.
    pub first_hit: Option<f64>,
    pub cost: f64,
    pub diverged: bool,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub open_loop: bool,
    pub radius: f64,
    pub runs: Vec<RolloutRecord>,
}

/// Closed-loop runs of the true system from every configured initial
/// state, or open-loop runs with `zero_control`.
pub fn cmd_rollout(cfg: &RunConfig, zero_control: bool) -> Result<RolloutSummary> {
    cfg.validate()?;
    let sys = cfg.system.build()?;
    let controller = if zero_control {
        None
    } else {
        let path = cfg.out.join(CONTROLLER_FILE);
        require("rollout", &path)?;
        Some(ControllerArtifact::from_json(&fs::read_to_string(&path)?)?)
    };
    let cost = cfg.cost();
    let mut runs = Vec::new();
    for (k, x0) in cfg.rollout.x0s.iter().enumerate() {
        let ro = match &controller {
            Some(c) => ctrl::rollout(&sys, c, x0, cfg.rollout.dt, cfg.rollout.t_final, &cost)?,
            None => ctrl::rollout_with(&sys, InputPolicy::Zero, x0, cfg.rollout.dt, cfg.rollout.t_final, &cost)?,
        };
        let name = format!("rollout_{k}.csv");
        fs::create_dir_all(&cfg.out)?;
        ro.write_csv(&cfg.out.join(&name))?;
        let final_norm = ctrl::norm(ro.final_state());
        runs.push(RolloutRecord {
            x0: x0.clone(),
            csv: name,
            final_state: ro.final_state().to_vec(),
            final_norm,
            max_norm: ro.max_norm(),
            first_hit: ro.first_hit(cfg.rollout.radius),
            cost: ro.cost.last().copied().unwrap_or(0.0),
            diverged: ro.diverged,
            converged: !ro.diverged && final_norm <= cfg.rollout.radius,
        });
    }
    let summary = RolloutSummary {
        open_loop: zero_control,
        radius: cfg.rollout.radius,
        runs,
    };
    write(&cfg.out.join(ROLLOUT_SUMMARY_FILE), &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Grid check of the stored transport polynomial, written to `certificate.json`.
pub fn cmd_certify(cfg: &RunConfig) -> Result<CertificateReport> {
    cfg.validate()?;
    let path = cfg.out.join(CONTROLLER_FILE);
    require("certify", &path)?;
    let c = ControllerArtifact::from_json(&fs::read_to_string(&path)?)?;
    let per_axis = cfg
        .certify
        .per_axis
        .unwrap_or(if cfg.domain.dim() <= 2 { 200 } else { 50 });
    let report = ctrl::certify_density(
        &c.transport,
        &c.a,
        &c.b,
        c.alpha,
        c.gamma,
        &cfg.domain,
        &cfg.excluded,
        per_axis,
        cfg.certify.tol,
    );
    write(&cfg.out.join(CERTIFICATE_FILE), &serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// Outputs of a full [`cmd_run`].
#[derive(Clone, Debug)]
pub struct RunOutputs {
    pub synthesis: Synthesis,
    pub rollouts: RolloutSummary,
    pub certificate: CertificateReport,
}

pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutputs> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    write(&cfg.out.join("config.json"), &cfg.to_json()?)?;
    cmd_collect(cfg)?;
    cmd_estimate(cfg)?;
    let synthesis = cmd_synthesize(cfg)?;
    let rollouts = cmd_rollout(cfg, false)?;
    let certificate = cmd_certify(cfg)?;
    Ok(RunOutputs {
        synthesis,
        rollouts,
        certificate,
    })
}

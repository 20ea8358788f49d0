use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use densocp::ocpsynth::Norm;
use densocp::pipeline::{self, BasisConfig, Preset, RunConfig};
use densocp::polybasis::DomainBox;

#[derive(Parser)]
#[command(name = "densocp", version, about = "Data-driven optimal control synthesis in density space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the input protocol and write the datasets.
    Collect(Common),
    /// Estimate generators from collected datasets.
    Estimate(Common),
    /// Build and solve the SOS program; write the controller.
    Synthesize(Common),
    /// Closed-loop (or open-loop) rollouts of the true system.
    Rollout {
        #[command(flatten)]
        common: Common,
        /// Apply u = 0 instead of the synthesized controller.
        #[arg(long)]
        zero_control: bool,
        /// Initial state `x1,..,xn`; repeatable, replaces the configured list.
        #[arg(long = "x0", allow_hyphen_values = true)]
        x0: Vec<String>,
    },
    /// Grid check of the synthesized density certificate.
    Certify(Common),
    /// All stages in order.
    Run(Common),
    /// Print the resolved configuration as JSON.
    Config(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// `l1` or `l2`.
    #[arg(long)]
    norm: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<u32>,
    #[arg(long)]
    beta: Option<f64>,
    /// `monomial:<order>` or `legendre:<order>`.
    #[arg(long)]
    basis: Option<String>,
    #[arg(long)]
    degree_a: Option<usize>,
    #[arg(long)]
    degree_c: Option<usize>,
    #[arg(long)]
    degree_s: Option<usize>,
    /// Sampling box `lo,hi` applied to every coordinate.
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
    /// Excluded box `lo,hi` around the origin.
    #[arg(long, allow_hyphen_values = true)]
    exclude: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s.split_once(',').with_context(|| format!("`{s}` is not of the form lo,hi"))?;
    Ok((lo.trim().parse()?, hi.trim().parse()?))
}

fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad coordinate `{v}` in `{s}`")))
        .collect()
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
            (None, Some(p)) => RunConfig::preset(p.parse::<Preset>()?),
            (None, None) => bail!("either --config or --preset is required"),
        };
        let n = cfg.domain.dim();
        if let Some(v) = &self.norm {
            cfg.norm = v.parse::<Norm>()?;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = &self.basis {
            cfg.basis = v.parse::<BasisConfig>()?;
        }
        if let Some(v) = self.degree_a {
            cfg.deg_a = v;
        }
        if let Some(v) = self.degree_c {
            cfg.deg_c = v;
        }
        if let Some(v) = self.degree_s {
            cfg.deg_s = v;
        }
        if let Some(v) = &self.domain {
            let (lo, hi) = parse_pair(v)?;
            cfg.domain = DomainBox::cube(n, lo, hi)?;
        }
        if let Some(v) = &self.exclude {
            let (lo, hi) = parse_pair(v)?;
            cfg.excluded = DomainBox::cube(n, lo, hi)?;
        }
        if let Some(v) = self.seed {
            cfg.protocol.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        cfg.validate().context("invalid configuration")?;
        Ok(cfg)
    }
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Collect(c) => {
            let cfg = c.resolve()?;
            for p in pipeline::cmd_collect(&cfg)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Estimate(c) => {
            let cfg = c.resolve()?;
            let gens = pipeline::cmd_estimate(&cfg)?;
            println!("estimated {} generators on {} basis functions", gens.m() + 1, gens.dict.size());
            for j in 0..=gens.m() {
                let f: Vec<String> = gens.field_polys(j).iter().map(|p| p.pruned(1e-6).to_string()).collect();
                println!("field {j}: [{}]", f.join(", "));
            }
        }
        Command::Synthesize(c) => {
            let cfg = c.resolve()?;
            let s = pipeline::cmd_synthesize(&cfg)?;
            let ctl = &s.controller;
            println!("status {} objective {:.6e}", ctl.provenance.solver_status, ctl.provenance.objective);
            println!("a = {}", ctl.a.pruned(1e-8));
            let a0 = ctl.a.eval(&vec![0.0; ctl.n()]);
            for (j, c) in ctl.c.iter().enumerate() {
                println!("c{} = {}", j + 1, c.pruned(1e-8));
                if a0.abs() > 0.0 {
                    println!("k{} ~ {}", j + 1, c.scale(1.0 / a0).pruned(1e-6));
                }
            }
        }
        Command::Rollout { common, zero_control, x0 } => {
            let mut cfg = common.resolve()?;
            if !x0.is_empty() {
                cfg.rollout.x0s = x0.iter().map(|s| parse_point(s)).collect::<Result<_>>()?;
                cfg.validate()?;
            }
            let summary = pipeline::cmd_rollout(&cfg, zero_control)?;
            println!("{}", json(&summary)?);
        }
        Command::Certify(c) => {
            let cfg = c.resolve()?;
            let report = pipeline::cmd_certify(&cfg)?;
            println!("{}", json(&report)?);
            if !report.passed {
                bail!("certificate failed: minimum {:.3e} at {:?}", report.min_value, report.argmin);
            }
        }
        Command::Run(c) => {
            let cfg = c.resolve()?;
            let out = pipeline::cmd_run(&cfg)?;
            let prov = &out.synthesis.controller.provenance;
            println!("synthesis: {} (objective {:.6e})", prov.solver_status, prov.objective);
            for r in &out.rollouts.runs {
                println!(
                    "rollout from {:?}: final |x| {:.3e}, converged {}",
                    r.x0, r.final_norm, r.converged
                );
            }
            println!(
                "certificate: {} (min {:.3e}, tolerance {:.3e})",
                if out.certificate.passed { "passed" } else { "failed" },
                out.certificate.min_value,
                out.certificate.tolerance
            );
            println!("artifacts in {}", cfg.out.display());
        }
        Command::Config(c) => {
            println!("{}", c.resolve()?.to_json()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

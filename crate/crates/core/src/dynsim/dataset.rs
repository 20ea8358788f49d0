use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate, ControlAffineSystem, InputPolicy, SimLimits, Trajectory};
use crate::error::{Error, Result};
use crate::polybasis::DomainBox;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DiffScheme {
    /// `(x_j - x_{j-1}) / Δt`.
    #[default]
    Backward,
    /// `(x_{j+1} - x_{j-1}) / 2Δt`.
    Central,
}

/// Finite-difference derivative estimates for one segment of samples.
///
/// Boundary samples fall back to the one-sided difference that exists.
pub fn finite_difference(xs: &[Vec<f64>], dt: f64, scheme: DiffScheme) -> Result<Vec<Vec<f64>>> {
    let t = xs.len();
    if t < 2 {
        return Err(Error::InsufficientData(format!(
            "finite differences need at least 2 samples per segment, got {t}"
        )));
    }
    let diff = |a: &[f64], b: &[f64], h: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(ai, bi)| (ai - bi) / h).collect()
    };
    let mut out = Vec::with_capacity(t);
    for j in 0..t {
        let d = match scheme {
            DiffScheme::Backward if j > 0 => diff(&xs[j], &xs[j - 1], dt),
            DiffScheme::Backward => diff(&xs[1], &xs[0], dt),
            DiffScheme::Central if j > 0 && j + 1 < t => diff(&xs[j + 1], &xs[j - 1], 2.0 * dt),
            DiffScheme::Central if j == 0 => diff(&xs[1], &xs[0], dt),
            DiffScheme::Central => diff(&xs[j], &xs[j - 1], dt),
        };
        out.push(d);
    }
    Ok(out)
}

/// State and derivative samples for one input protocol, possibly
/// concatenated from several trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDataset {
    /// `0` for zero input, `j` for the unit step on channel `j` (one-based).
    pub input_label: usize,
    pub dt: f64,
    pub n: usize,
    pub m: usize,
    /// Sample `ℓ` is `states[ℓ]`; derivatives aligned.
    pub states: Vec<Vec<f64>>,
    pub derivs: Vec<Vec<f64>>,
    /// Start index of every concatenated segment.
    pub segments: Vec<usize>,
    pub seed: Option<u64>,
    /// Segments cut short by leaving the clipping box.
    pub truncated_segments: usize,
    /// Runs discarded because they diverged or left the box immediately.
    pub rejected_runs: usize,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    input_label: usize,
    dt: f64,
    n: usize,
    m: usize,
    segments: Vec<usize>,
    seed: Option<u64>,
    #[serde(default)]
    truncated_segments: usize,
    #[serde(default)]
    rejected_runs: usize,
}

impl TrajectoryDataset {
    pub fn empty(input_label: usize, dt: f64, n: usize, m: usize) -> Self {
        TrajectoryDataset {
            input_label,
            dt,
            n,
            m,
            states: Vec::new(),
            derivs: Vec::new(),
            segments: Vec::new(),
            seed: None,
            truncated_segments: 0,
            rejected_runs: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Append a trajectory: derivatives come from finite differences over
    /// the whole run, then the initial state is dropped so every retained
    /// sample has a genuine backward neighbour.
    pub fn push_trajectory(&mut self, tr: &Trajectory, scheme: DiffScheme) -> Result<()> {
        self.push_prefix(tr, scheme, usize::MAX)
    }

    /// As [`push_trajectory`](Self::push_trajectory), keeping at most
    /// `limit` samples; differences are taken on the full run first.
    fn push_prefix(&mut self, tr: &Trajectory, scheme: DiffScheme, limit: usize) -> Result<()> {
        if tr.states.len() < 2 {
            return Err(Error::InsufficientData(
                "trajectory with fewer than 2 states".into(),
            ));
        }
        let d = finite_difference(&tr.states, tr.dt, scheme)?;
        self.segments.push(self.states.len());
        let end = tr.states.len().min(limit.saturating_add(1));
        self.states.extend(tr.states[1..end].iter().cloned());
        self.derivs.extend(d[1..end].iter().cloned());
        if tr.truncated {
            self.truncated_segments += 1;
        }
        Ok(())
    }

    /// Append samples with externally supplied derivatives as one segment.
    pub fn push_samples(&mut self, states: Vec<Vec<f64>>, derivs: Vec<Vec<f64>>) -> Result<()> {
        if states.len() != derivs.len() {
            return Err(Error::DimensionMismatch {
                expected: states.len(),
                got: derivs.len(),
            });
        }
        if states.iter().chain(&derivs).any(|v| v.len() != self.n || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidArgument("non-finite or mis-sized sample".into()));
        }
        self.segments.push(self.states.len());
        self.states.extend(states);
        self.derivs.extend(derivs);
        Ok(())
    }

    /// Samples within Euclidean radius `r` of the origin.
    pub fn near_origin(&self, r: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&l| self.states[l].iter().map(|v| v * v).sum::<f64>().sqrt() <= r)
            .collect()
    }

    /// Write `<stem>.csv` and `<stem>.json`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n).map(|i| format!("x{i}")));
        header.extend((1..=self.n).map(|i| format!("dx{i}")));
        w.write_record(&header)?;
        let mut seg = 0;
        for l in 0..self.len() {
            while seg + 1 < self.segments.len() && self.segments[seg + 1] <= l {
                seg += 1;
            }
            let t = (l - self.segments[seg] + 1) as f64 * self.dt;
            let mut rec = vec![t.to_string()];
            rec.extend(self.states[l].iter().map(|v| v.to_string()));
            rec.extend(self.derivs[l].iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        let side = Sidecar {
            input_label: self.input_label,
            dt: self.dt,
            n: self.n,
            m: self.m,
            segments: self.segments.clone(),
            seed: self.seed,
            truncated_segments: self.truncated_segments,
            rejected_runs: self.rejected_runs,
        };
        fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let side: Sidecar = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        let mut r = csv::Reader::from_path(dir.join(format!("{stem}.csv")))?;
        let n = side.n;
        let mut states = Vec::new();
        let mut derivs = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 1 + 2 * n {
                return Err(Error::Parse(format!("expected {} columns, got {}", 1 + 2 * n, rec.len())));
            }
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}"))))
                .collect::<Result<_>>()?;
            states.push(vals[1..1 + n].to_vec());
            derivs.push(vals[1 + n..].to_vec());
        }
        Ok(TrajectoryDataset {
            input_label: side.input_label,
            dt: side.dt,
            n,
            m: side.m,
            states,
            derivs,
            segments: side.segments,
            seed: side.seed,
            truncated_segments: side.truncated_segments,
            rejected_runs: side.rejected_runs,
        })
    }
}

/// Data-collection settings for [`collect_protocol`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOptions {
    pub n_traj: usize,
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
    #[serde(default)]
    pub scheme: DiffScheme,
    /// Stop a trajectory once it leaves the sampling box.
    #[serde(default)]
    pub clip_to_domain: bool,
    #[serde(default)]
    pub sampling: Sampling,
    /// Anchored sampling evaluates its stencil at spacing `dt / stencil_refine`.
    #[serde(default = "default_refine")]
    pub stencil_refine: usize,
}

fn default_refine() -> usize {
    10
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Independent trajectories per input label, `steps` samples each.
    #[default]
    Trajectories,
    /// `n_traj · steps` anchor states shared by every input label; each
    /// label's derivative at an anchor comes from a four-step run at spacing
    /// `dt / stencil_refine` and the fourth-order forward stencil. `scheme`
    /// and `clip_to_domain` are unused.
    Anchored,
}

/// Fourth-order forward difference at `xs[0]`; needs five samples.
pub fn forward_stencil(xs: &[Vec<f64>], dt: f64) -> Result<Vec<f64>> {
    if xs.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "forward stencil needs 5 samples, got {}",
            xs.len()
        )));
    }
    const W: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
    Ok((0..xs[0].len())
        .map(|i| W.iter().zip(xs).map(|(w, x)| w * x[i]).sum::<f64>() / (12.0 * dt))
        .collect())
}

fn collect_anchored(
    system: &ControlAffineSystem,
    domain: &DomainBox,
    opts: &ProtocolOptions,
) -> Result<Vec<TrajectoryDataset>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let anchors: Vec<Vec<f64>> = (0..opts.n_traj * opts.steps)
        .map(|_| (0..system.n).map(|i| rng.gen_range(domain.lo[i]..domain.hi[i])).collect())
        .collect();
    if opts.stencil_refine == 0 {
        return Err(Error::InvalidArgument("stencil_refine must be positive".into()));
    }
    let h = opts.dt / opts.stencil_refine as f64;
    let limits = SimLimits::default();
    (0..=system.m())
        .map(|label| {
            let policy = if label == 0 {
                InputPolicy::Zero
            } else {
                InputPolicy::Step(label - 1)
            };
            let derivs: Vec<Vec<f64>> = anchors
                .par_iter()
                .map(|x0| {
                    let tr = simulate(system, &policy, x0, h, 4, &limits)?;
                    if tr.diverged {
                        return Err(Error::InsufficientData(format!(
                            "run from anchor {x0:?} diverged within four steps"
                        )));
                    }
                    forward_stencil(&tr.states, h)
                })
                .collect::<Result<_>>()?;
            let mut ds = TrajectoryDataset::empty(label, opts.dt, system.n, system.m());
            ds.seed = Some(opts.seed);
            ds.push_samples(anchors.clone(), derivs)?;
            Ok(ds)
        })
        .collect()
}

/// Zero input plus one unit-step experiment per channel, initial states
/// uniform on `domain`. Dataset `i` has label `i`.
pub fn collect_protocol(
    system: &ControlAffineSystem,
    domain: &DomainBox,
    opts: &ProtocolOptions,
) -> Result<Vec<TrajectoryDataset>> {
    if opts.n_traj == 0 || opts.steps == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory and one step".into()));
    }
    if domain.dim() != system.n {
        return Err(Error::DimensionMismatch {
            expected: system.n,
            got: domain.dim(),
        });
    }
    if opts.sampling == Sampling::Anchored {
        return collect_anchored(system, domain, opts);
    }
    let limits = SimLimits {
        keep_in: opts.clip_to_domain.then(|| domain.clone()),
        ..SimLimits::default()
    };
    (0..=system.m())
        .map(|label| {
            let policy = if label == 0 {
                InputPolicy::Zero
            } else {
                InputPolicy::Step(label - 1)
            };
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(label as u64));
            let mut ds = TrajectoryDataset::empty(label, opts.dt, system.n, system.m());
            ds.seed = Some(opts.seed);
            // Runs are drawn until the sample budget `n_traj · steps` is met:
            // diverging runs are discarded, runs clipped at the box keep
            // their in-box prefix, and the last segment is cut to the budget.
            // Draws are sequential, runs parallel, acceptance in draw order.
            let target = opts.n_traj * opts.steps;
            let mut drawn = 0;
            let max_draws = 50 * opts.n_traj;
            while ds.len() < target {
                let want = (target - ds.len()).div_ceil(opts.steps);
                if drawn + want > max_draws {
                    return Err(Error::InsufficientData(format!(
                        "collected {} of {target} samples after {drawn} runs",
                        ds.len()
                    )));
                }
                drawn += want;
                let x0s: Vec<Vec<f64>> = (0..want)
                    .map(|_| {
                        (0..system.n)
                            .map(|i| rng.gen_range(domain.lo[i]..domain.hi[i]))
                            .collect()
                    })
                    .collect();
                let trajs: Vec<Result<Trajectory>> = x0s
                    .par_iter()
                    .map(|x0| simulate(system, &policy, x0, opts.dt, opts.steps, &limits))
                    .collect();
                for tr in trajs {
                    let tr = tr?;
                    if tr.diverged || tr.states.len() < 2 {
                        ds.rejected_runs += 1;
                        continue;
                    }
                    let room = target - ds.len();
                    if room == 0 {
                        break;
                    }
                    ds.push_prefix(&tr, opts.scheme, room)?;
                }
            }
            Ok(ds)
        })
        .collect()
}

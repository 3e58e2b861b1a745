//! Monte-Carlo regret curves, their CSV/JSON serialization and bound overlays.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use onebit_core::bounds::{cor1_bound, cor2_bound, lemma1_bound, lemma2_lower_curve, DEFAULT_DELTA_GRID};
use onebit_core::{
    run_leader_follower, run_mab_baseline, BoundsError, DecisionKind, EngineError, Instance,
    RngStream, RunResult,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::instances::{InstanceError, InstanceSource};
use crate::TOOL_VERSION;

/// Curves are kept at every round up to this one, then on a geometric grid.
pub const DENSE_PREFIX: u64 = 1000;
pub const GRID_RATIO: f64 = 1.02;
/// Margin used by the lower-curve column of the overlay.
pub const OVERLAY_LOWER_DELTA: f64 = 0.02;

pub const CSV_HEADER: &str = "t,policy,mean_regret,std_regret";
pub const OVERLAY_HEADER: &str = "t,policy,mean_regret,std_regret,bound_formula,bound_value";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    pub fn is_io(&self) -> bool {
        match self {
            ExperimentError::Io { .. } => true,
            ExperimentError::Instance(e) => e.is_io(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    LfUcb1,
    LfKlucb,
    MabUcb1,
    MabKlucb,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::LfUcb1, Policy::LfKlucb, Policy::MabUcb1, Policy::MabKlucb];

    pub fn name(self) -> &'static str {
        match self {
            Policy::LfUcb1 => "lf-ucb1",
            Policy::LfKlucb => "lf-klucb",
            Policy::MabUcb1 => "mab-ucb1",
            Policy::MabKlucb => "mab-klucb",
        }
    }

    pub fn kind(self) -> DecisionKind {
        match self {
            Policy::LfUcb1 | Policy::MabUcb1 => DecisionKind::Ucb1,
            Policy::LfKlucb | Policy::MabKlucb => DecisionKind::KlUcb,
        }
    }

    /// Leader–follower with one-bit feedback, as opposed to the full-information baseline.
    pub fn is_one_bit(self) -> bool {
        matches!(self, Policy::LfUcb1 | Policy::LfKlucb)
    }

    pub fn run(self, instance: &Instance, n: u64, rng: RngStream) -> Result<RunResult, EngineError> {
        if self.is_one_bit() {
            run_leader_follower(instance, self.kind(), n, rng)
        } else {
            run_mab_baseline(instance, self.kind(), n, rng)
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown policy {s:?}; expected one of lf-ucb1, lf-klucb, mab-ucb1, mab-klucb"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub policies: Vec<Policy>,
    pub n: u64,
    pub trials: u64,
    pub seed: u64,
    /// Worker threads. Has no effect on results, so it is not echoed.
    #[serde(skip, default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self, instance: &Instance) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if self.n < instance.num_arms() as u64 {
            return bad(format!("n = {} is smaller than the number of arms {}", self.n, instance.num_arms()));
        }
        if self.policies.is_empty() {
            return bad("at least one policy is required".into());
        }
        for (i, p) in self.policies.iter().enumerate() {
            if self.policies[..i].contains(p) {
                return bad(format!("policy {p} listed twice"));
            }
        }
        if self.workers < 1 {
            return bad("workers must be at least 1".into());
        }
        Ok(())
    }
}

/// Rounds at which curves are stored: every `t <= 1000`, then a 2% geometric
/// grid, plus every power of ten and `n` itself.
pub fn stored_rounds(n: u64) -> Vec<u64> {
    let mut ts: Vec<u64> = (1..=n.min(DENSE_PREFIX)).collect();
    let mut t = DENSE_PREFIX;
    while t < n {
        t = (t + 1).max((t as f64 * GRID_RATIO).ceil() as u64).min(n);
        ts.push(t);
    }
    let mut decade = 10u64;
    while decade <= n {
        ts.push(decade);
        decade = match decade.checked_mul(10) {
            Some(d) => d,
            None => break,
        };
    }
    ts.sort_unstable();
    ts.dedup();
    ts
}

/// Aggregate over trials for one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCurve {
    pub policy: Policy,
    /// Mean pseudo-regret at each stored round.
    pub mean: Vec<f64>,
    /// Population standard deviation across trials.
    pub std: Vec<f64>,
    /// Pseudo-regret at `n`, one entry per trial in trial order.
    pub final_regret: Vec<f64>,
    /// `T_k(n)` per trial.
    pub final_counts: Vec<Vec<u64>>,
}

impl PolicyCurve {
    pub fn mean_final(&self) -> f64 {
        *self.mean.last().expect("curve has at least one round")
    }

    pub fn std_final(&self) -> f64 {
        *self.std.last().expect("curve has at least one round")
    }

    /// Standard error of the final mean regret.
    pub fn se_final(&self) -> f64 {
        self.std_final() / (self.final_regret.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub config: ExperimentConfig,
    pub instance_means: Vec<f64>,
    /// Rounds shared by every curve.
    pub rounds: Vec<u64>,
    pub curves: Vec<PolicyCurve>,
    pub input_hash: String,
}

impl AggregateCurve {
    pub fn curve(&self, policy: Policy) -> Option<&PolicyCurve> {
        self.curves.iter().find(|c| c.policy == policy)
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateCurve, ExperimentError> {
    let instance = config.instance.load()?;
    run_experiment_on(config, &instance)
}

/// [`run_experiment`] on an already-loaded instance. `config.instance` is
/// only used as a label.
pub fn run_experiment_on(
    config: &ExperimentConfig,
    instance: &Instance,
) -> Result<AggregateCurve, ExperimentError> {
    config.validate(instance)?;
    let rounds = stored_rounds(config.n);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()?;
    let mut curves = Vec::with_capacity(config.policies.len());
    for &policy in &config.policies {
        let trials: Vec<(Vec<f64>, Vec<u64>)> = pool.install(|| {
            (0..config.trials)
                .into_par_iter()
                .map(|j| {
                    let r = policy.run(instance, config.n, RngStream::new(config.seed, j))?;
                    let sampled = rounds.iter().map(|&t| r.pseudo_regret[t as usize - 1]).collect();
                    Ok((sampled, r.final_counts))
                })
                .collect::<Result<_, EngineError>>()
        })?;
        curves.push(reduce(policy, &trials));
    }
    Ok(AggregateCurve {
        input_hash: input_hash(config, instance)?,
        config: config.clone(),
        instance_means: instance.means().to_vec(),
        rounds,
        curves,
    })
}

// Sequential in trial order, so the result does not depend on scheduling.
fn reduce(policy: Policy, trials: &[(Vec<f64>, Vec<u64>)]) -> PolicyCurve {
    let m = trials.len() as f64;
    let len = trials[0].0.len();
    let mut mean = vec![0.0; len];
    for (curve, _) in trials {
        for (acc, v) in mean.iter_mut().zip(curve) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut var = vec![0.0; len];
    for (curve, _) in trials {
        for ((acc, v), mu) in var.iter_mut().zip(curve).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    PolicyCurve {
        policy,
        mean,
        std: var.into_iter().map(|v| (v / m).sqrt()).collect(),
        final_regret: trials.iter().map(|(c, _)| c[len - 1]).collect(),
        final_counts: trials.iter().map(|(_, k)| k.clone()).collect(),
    }
}

#[derive(Serialize)]
struct HashInput<'a> {
    config: &'a ExperimentConfig,
    arms: &'a [onebit_core::ArmDistribution],
}

/// SHA-256 over a git blob header plus the canonical JSON of the config and arms.
pub fn input_hash(config: &ExperimentConfig, instance: &Instance) -> Result<String, ExperimentError> {
    let body = serde_json::to_vec(&HashInput {
        config,
        arms: instance.arms(),
    })?;
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(&body);
    Ok(h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

pub fn to_csv(curve: &AggregateCurve) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in &curve.curves {
        for (i, t) in curve.rounds.iter().enumerate() {
            let _ = writeln!(out, "{t},{},{},{}", c.policy, c.mean[i], c.std[i]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub base: u64,
    /// Trial `j` draws from stream `(base, j)`.
    pub streams: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRegrets {
    pub policy: Policy,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub config: ExperimentConfig,
    pub instance_means: Vec<f64>,
    pub seeds: Seeds,
    pub tool_version: String,
    pub input_hash: String,
    pub final_regret: Vec<FinalRegrets>,
}

pub fn sidecar(curve: &AggregateCurve) -> Sidecar {
    Sidecar {
        config: curve.config.clone(),
        instance_means: curve.instance_means.clone(),
        seeds: Seeds {
            base: curve.config.seed,
            streams: (0..curve.config.trials).collect(),
        },
        tool_version: TOOL_VERSION.to_string(),
        input_hash: curve.input_hash.clone(),
        final_regret: curve
            .curves
            .iter()
            .map(|c| FinalRegrets {
                policy: c.policy,
                values: c.final_regret.clone(),
            })
            .collect(),
    }
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
    pub overlay: Option<PathBuf>,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), ExperimentError> {
    std::fs::write(path, contents).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `regret.csv` and `regret.json` into `dir`, plus
/// `regret_bounds.csv` when an overlay is given.
pub fn write_outputs(
    curve: &AggregateCurve,
    overlay: Option<&[OverlayRow]>,
    dir: &Path,
) -> Result<OutputFiles, ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let files = OutputFiles {
        csv: dir.join("regret.csv"),
        sidecar: dir.join("regret.json"),
        overlay: overlay.map(|_| dir.join("regret_bounds.csv")),
    };
    write_file(&files.csv, to_csv(curve).as_bytes())?;
    let mut json = serde_json::to_string_pretty(&sidecar(curve))?;
    json.push('\n');
    write_file(&files.sidecar, json.as_bytes())?;
    if let (Some(rows), Some(path)) = (overlay, &files.overlay) {
        write_file(path, overlay_csv(rows).as_bytes())?;
    }
    Ok(files)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayRow {
    pub t: u64,
    pub policy: Policy,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub bound_formula: &'static str,
    pub bound_value: f64,
}

/// Bound values at every power of ten up to `n`, one row per formula:
/// the kind's corollary (`cor1` or `cor2`), `lemma1`, and the `lemma2`
/// lower curve at margin [`OVERLAY_LOWER_DELTA`].
pub fn overlay_bounds(curve: &AggregateCurve, instance: &Instance) -> Result<Vec<OverlayRow>, ExperimentError> {
    let gaps: Vec<f64> = instance.gaps()[1..].to_vec();
    let mut rows = Vec::new();
    for c in &curve.curves {
        let kind = c.policy.kind();
        for (i, &t) in curve.rounds.iter().enumerate() {
            if !is_power_of_ten(t) {
                continue;
            }
            let cor = match kind {
                DecisionKind::Ucb1 => ("cor1", cor1_bound(t, &gaps)?),
                DecisionKind::KlUcb => ("cor2", cor2_bound(t, instance.means())?),
            };
            let values = [
                cor,
                ("lemma1", lemma1_bound(instance, kind, t, DEFAULT_DELTA_GRID)?.total_regret_bound),
                ("lemma2", lemma2_lower_curve(instance, kind, t, OVERLAY_LOWER_DELTA)?),
            ];
            for (bound_formula, bound_value) in values {
                rows.push(OverlayRow {
                    t,
                    policy: c.policy,
                    mean_regret: c.mean[i],
                    std_regret: c.std[i],
                    bound_formula,
                    bound_value,
                });
            }
        }
    }
    Ok(rows)
}

fn is_power_of_ten(mut t: u64) -> bool {
    if t < 10 {
        return false;
    }
    while t.is_multiple_of(10) {
        t /= 10;
    }
    t == 1
}

pub fn overlay_csv(rows: &[OverlayRow]) -> String {
    let mut out = String::from(OVERLAY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t, r.policy, r.mean_regret, r.std_regret, r.bound_formula, r.bound_value
        );
    }
    out
}

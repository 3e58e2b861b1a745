//! Arm environments and the two game loops.
//!
//! [`run_leader_follower`] plays the one-bit protocol: the leader sees only
//! the bits each follower transmits. [`run_mab_baseline`] is the ordinary
//! bandit loop with full reward observation. Both draw arm `k`'s `j`-th reward
//! from the same counter-based stream, so runs given the same [`RngStream`]
//! see identical rewards (common random numbers).

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use thiserror::Error;

use crate::codec::{Bit, CodecError, FollowerEncoder, LeaderDecoder};
use crate::policies::DecisionKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("an instance needs at least 2 arms (got {0})")]
    TooFewArms(usize),
    #[error("arm {index}: {reason}")]
    InvalidArm { index: usize, reason: &'static str },
    #[error(
        "arm means must satisfy 0 < mu_K <= ... <= mu_2 < mu_1 < 1 with a unique best arm first; \
         violated at arm {index} (means {means:?})"
    )]
    MeanOrdering { index: usize, means: Vec<f64> },
    #[error("horizon n = {n} is shorter than the round-robin phase (K = {k})")]
    HorizonTooShort { n: u64, k: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Reward distribution of one arm; all supports lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "lowercase"))]
pub enum ArmDistribution {
    Bernoulli { p: f64 },
    Beta { a: f64, b: f64 },
    /// Replays `values` in order, cycling when exhausted. Test fixture.
    #[cfg_attr(feature = "serde", serde(rename = "fixed"))]
    FixedSequence { values: Vec<f64> },
}

impl ArmDistribution {
    pub fn mean(&self) -> f64 {
        match self {
            ArmDistribution::Bernoulli { p } => *p,
            ArmDistribution::Beta { a, b } => a / (a + b),
            ArmDistribution::FixedSequence { values } => {
                values.iter().sum::<f64>() / values.len() as f64
            }
        }
    }

    fn validate(&self) -> Result<(), &'static str> {
        match self {
            ArmDistribution::Bernoulli { p } if !(*p > 0.0 && *p < 1.0) => {
                Err("Bernoulli parameter must lie in (0, 1)")
            }
            ArmDistribution::Beta { a, b }
                if !(a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0) =>
            {
                Err("Beta parameters must be positive and finite")
            }
            ArmDistribution::FixedSequence { values } if values.is_empty() => {
                Err("fixed sequence must be non-empty")
            }
            ArmDistribution::FixedSequence { values }
                if values.iter().any(|v| !(0.0..=1.0).contains(v)) =>
            {
                Err("fixed sequence values must lie in [0, 1]")
            }
            _ => Ok(()),
        }
    }
}

/// A bandit instance. Arm 0 is the unique best arm.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    arms: Vec<ArmDistribution>,
    means: Vec<f64>,
}

impl Instance {
    /// Validated instance: `0 < mu_K <= ... <= mu_2 < mu_1 < 1`.
    pub fn new(arms: Vec<ArmDistribution>) -> Result<Self, EngineError> {
        let inst = Self::degenerate(arms)?;
        check_mean_ordering(&inst.means)?;
        Ok(inst)
    }

    /// Per-arm parameter checks only; the mean ordering is not enforced.
    /// Used for degenerate fixtures such as all-ones versus all-zeros arms.
    pub fn degenerate(arms: Vec<ArmDistribution>) -> Result<Self, EngineError> {
        if arms.len() < 2 {
            return Err(EngineError::TooFewArms(arms.len()));
        }
        for (index, arm) in arms.iter().enumerate() {
            arm.validate()
                .map_err(|reason| EngineError::InvalidArm { index, reason })?;
        }
        let means = arms.iter().map(ArmDistribution::mean).collect();
        Ok(Instance { arms, means })
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn arms(&self) -> &[ArmDistribution] {
        &self.arms
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// `Delta_k = mu_1 - mu_k` for every arm; entry 0 is 0.
    pub fn gaps(&self) -> Vec<f64> {
        self.means.iter().map(|m| self.means[0] - m).collect()
    }
}

/// `0 < mu_K <= ... <= mu_2 < mu_1 < 1`; NaN fails every comparison.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn check_mean_ordering(m: &[f64]) -> Result<(), EngineError> {
    if m.len() < 2 {
        return Err(EngineError::TooFewArms(m.len()));
    }
    let bad = |index| EngineError::MeanOrdering {
        index,
        means: m.to_vec(),
    };
    if !(m[0] < 1.0) {
        return Err(bad(0));
    }
    if !(m[1] < m[0]) {
        return Err(bad(1));
    }
    for k in 2..m.len() {
        if !(m[k] <= m[k - 1]) {
            return Err(bad(k));
        }
    }
    if !(m[m.len() - 1] > 0.0) {
        return Err(bad(m.len() - 1));
    }
    Ok(())
}

/// Identifies one trial's randomness. Arm `k` draws from ChaCha8 stream `k`
/// under a key derived from `(seed, stream)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// Generator for one arm's rewards.
    pub fn arm_rng(&self, arm: usize) -> ChaCha8Rng {
        let mut mix = self.stream;
        let mut state = self.seed ^ splitmix64(&mut mix);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(arm as u64);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One draw from `dist`. `ordinal` is the 0-based pull index, used only by
/// fixed sequences.
pub fn sample_reward<R: Rng + ?Sized>(dist: &ArmDistribution, ordinal: u64, rng: &mut R) -> f64 {
    match dist {
        ArmDistribution::Bernoulli { p } => {
            if rng.random::<f64>() < *p {
                1.0
            } else {
                0.0
            }
        }
        ArmDistribution::Beta { a, b } => {
            let ga = Gamma::new(*a, 1.0).expect("validated shape");
            let gb = Gamma::new(*b, 1.0).expect("validated shape");
            beta_from_gammas(&ga, &gb, rng)
        }
        ArmDistribution::FixedSequence { values } => values[(ordinal % values.len() as u64) as usize],
    }
}

fn beta_from_gammas<R: Rng + ?Sized>(ga: &Gamma<f64>, gb: &Gamma<f64>, rng: &mut R) -> f64 {
    let x = ga.sample(rng);
    let y = gb.sample(rng);
    x / (x + y)
}

/// Reward stream for one arm within one trial.
#[derive(Debug, Clone)]
pub struct RewardSource {
    dist: ArmDistribution,
    gammas: Option<(Gamma<f64>, Gamma<f64>)>,
    rng: ChaCha8Rng,
    pulls: u64,
}

impl RewardSource {
    pub fn new(dist: &ArmDistribution, rng: ChaCha8Rng) -> Self {
        let gammas = match dist {
            ArmDistribution::Beta { a, b } => Some((
                Gamma::new(*a, 1.0).expect("validated shape"),
                Gamma::new(*b, 1.0).expect("validated shape"),
            )),
            _ => None,
        };
        RewardSource {
            dist: dist.clone(),
            gammas,
            rng,
            pulls: 0,
        }
    }

    /// Sources for every arm of `instance` under `stream`.
    pub fn for_instance(instance: &Instance, stream: RngStream) -> Vec<RewardSource> {
        instance
            .arms()
            .iter()
            .enumerate()
            .map(|(k, d)| RewardSource::new(d, stream.arm_rng(k)))
            .collect()
    }

    pub fn next_reward(&mut self) -> f64 {
        let r = match &self.gammas {
            Some((ga, gb)) => beta_from_gammas(ga, gb, &mut self.rng),
            None => sample_reward(&self.dist, self.pulls, &mut self.rng),
        };
        self.pulls += 1;
        r
    }

    pub fn pulls(&self) -> u64 {
        self.pulls
    }
}

/// Outcome of one trial of either game loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Arm pulled at round `t` is `arms_pulled[t - 1]`.
    pub arms_pulled: Vec<u32>,
    /// `T_k(n)`.
    pub final_counts: Vec<u64>,
    /// `sum_k Delta_k T_k(t)` at `t = 1..=n`.
    pub pseudo_regret: Vec<f64>,
}

impl RunResult {
    pub fn from_pulls(arms_pulled: Vec<u32>, instance: &Instance) -> Self {
        let mut final_counts = vec![0u64; instance.num_arms()];
        for &a in &arms_pulled {
            final_counts[a as usize] += 1;
        }
        let pseudo_regret = pseudo_regret(&arms_pulled, instance);
        RunResult {
            arms_pulled,
            final_counts,
            pseudo_regret,
        }
    }

    pub fn horizon(&self) -> usize {
        self.arms_pulled.len()
    }

    /// `T_k(t)` for every `t = 1..=n` (outer index `t - 1`).
    pub fn pull_counts_over_time(&self) -> Vec<Vec<u64>> {
        let k = self.final_counts.len();
        let mut counts = vec![0u64; k];
        self.arms_pulled
            .iter()
            .map(|&a| {
                counts[a as usize] += 1;
                counts.clone()
            })
            .collect()
    }

    pub fn final_regret(&self) -> f64 {
        self.pseudo_regret.last().copied().unwrap_or(0.0)
    }
}

/// `curve[t-1] = sum_k Delta_k T_k(t)`, accumulated round by round.
pub fn pseudo_regret(arms_pulled: &[u32], instance: &Instance) -> Vec<f64> {
    let gaps = instance.gaps();
    let mut acc = 0.0;
    arms_pulled
        .iter()
        .map(|&a| {
            acc += gaps[a as usize];
            acc
        })
        .collect()
}

#[inline]
fn argmax_lowest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (k, v) in values.enumerate() {
        if v > best_val {
            best = k;
            best_val = v;
        }
    }
    best
}

/// Leader side of the protocol. `channel(k)` makes follower `k` pull its arm
/// and returns the one bit it transmits; nothing else reaches the leader.
///
/// Returns the broadcast sequence `A_1..A_n` (0-based arm indices).
pub fn leader_loop<C>(
    num_arms: usize,
    kind: DecisionKind,
    n: u64,
    mut channel: C,
) -> Result<Vec<u32>, EngineError>
where
    C: FnMut(usize) -> Result<Bit, EngineError>,
{
    if n < num_arms as u64 {
        return Err(EngineError::HorizonTooShort { n, k: num_arms });
    }
    let mut decoders = vec![LeaderDecoder::new(); num_arms];
    let mut broadcasts = Vec::with_capacity(n as usize);
    for t in 1..=n {
        let arm = if t <= num_arms as u64 {
            (t - 1) as usize
        } else {
            argmax_lowest(decoders.iter().map(|d| {
                let est = d.estimate().expect("round robin completes packet 1");
                kind.index(t, est.mu_bar, est.eta)
            }))
        };
        let bit = channel(arm)?;
        decoders[arm].receive(bit);
        broadcasts.push(arm as u32);
    }
    Ok(broadcasts)
}

/// One-bit leader–follower game on `instance` for `n` rounds.
pub fn run_leader_follower(
    instance: &Instance,
    kind: DecisionKind,
    n: u64,
    rng: RngStream,
) -> Result<RunResult, EngineError> {
    let mut sources = RewardSource::for_instance(instance, rng);
    let mut encoders = vec![FollowerEncoder::new(); instance.num_arms()];
    let arms = leader_loop(instance.num_arms(), kind, n, |k| {
        let reward = sources[k].next_reward();
        Ok(encoders[k].observe(reward)?)
    })?;
    Ok(RunResult::from_pulls(arms, instance))
}

/// Standard bandit loop: round robin, then `argmax_k g_t(mu_hat_k, T_k)`.
pub fn run_mab_baseline(
    instance: &Instance,
    kind: DecisionKind,
    n: u64,
    rng: RngStream,
) -> Result<RunResult, EngineError> {
    let k = instance.num_arms();
    if n < k as u64 {
        return Err(EngineError::HorizonTooShort { n, k });
    }
    let mut sources = RewardSource::for_instance(instance, rng);
    let mut sums = vec![0.0f64; k];
    let mut counts = vec![0u64; k];
    let mut arms = Vec::with_capacity(n as usize);
    for t in 1..=n {
        let arm = if t <= k as u64 {
            (t - 1) as usize
        } else {
            argmax_lowest(
                sums.iter()
                    .zip(&counts)
                    .map(|(&sum, &c)| kind.index(t, sum / c as f64, c)),
            )
        };
        sums[arm] += sources[arm].next_reward();
        counts[arm] += 1;
        arms.push(arm as u32);
    }
    Ok(RunResult::from_pulls(arms, instance))
}

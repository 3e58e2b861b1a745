//! Finite-horizon regret bounds and the lower-bound comparator curve.
//!
//! Upper bounds apply to the one-bit leader–follower policy; the lower curve
//! is the asymptotic comparator for the standard bandit with the same index.
//! `log2` inside these formulas is floating point; they are analytic bounds,
//! not schedule indices.

use alloc::vec::Vec;

use thiserror::Error;

use crate::engine::{check_mean_ordering, EngineError, Instance};
use crate::policies::{f_of, horizon_s, kl_div, DecisionKind, PolicyError};

/// Grid size used when none is given.
pub const DEFAULT_DELTA_GRID: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("delta = {delta} must lie in (0, {upper})")]
    DeltaOutOfRange { delta: f64, upper: f64 },
    #[error("horizon n = {n} is below the minimum {min}")]
    HorizonTooSmall { n: u64, min: u64 },
    #[error("arm index {0} is not a suboptimal arm of the instance")]
    ArmIndex(usize),
    #[error("delta grid must have at least one point")]
    EmptyGrid,
    #[error(transparent)]
    Instance(#[from] EngineError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FormulaId {
    /// `S + 3 log2(S v 4/d^2) + 10/d^2`, minimized over the delta grid.
    Lemma1,
    /// `(S v 4/d^2) + 3 log2(S v 4/d^2) + 6/d^2`, minimized over the delta grid.
    NumPlays,
    /// UCB1 corollary, first branch (`delta = Delta/4`).
    Cor1a,
    /// UCB1 corollary, second branch (`delta = Delta/C_n`).
    Cor1b,
    Cor2,
    #[cfg_attr(feature = "serde", serde(rename = "lemma2"))]
    Lemma2Lower,
}

impl FormulaId {
    pub fn name(self) -> &'static str {
        match self {
            FormulaId::Lemma1 => "lemma1",
            FormulaId::NumPlays => "numplays",
            FormulaId::Cor1a => "cor1a",
            FormulaId::Cor1b => "cor1b",
            FormulaId::Cor2 => "cor2",
            FormulaId::Lemma2Lower => "lemma2",
        }
    }
}

/// Evaluated bound. Per-arm vectors cover the suboptimal arms in order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundReport {
    pub formula_id: FormulaId,
    pub n: u64,
    /// Bound on (or, for the lower curve, comparator for) `E[T_k(n)]`.
    pub per_arm_pull_bound: Vec<f64>,
    /// `sum_k Delta_k * per_arm_pull_bound[k]`.
    pub total_regret_bound: f64,
    /// The delta each arm's term was evaluated at.
    pub minimizing_delta: Vec<f64>,
}

/// `C_n = 2 + (log n)^(1/3)`.
pub fn c_n(n: u64) -> f64 {
    2.0 + libm::cbrt(libm::log(n as f64))
}

fn total(gaps: &[f64], per_arm: &[f64]) -> f64 {
    gaps.iter().zip(per_arm).map(|(d, p)| d * p).sum()
}

fn suboptimal_gaps(instance: &Instance) -> Vec<f64> {
    instance.gaps()[1..].to_vec()
}

/// Open uniform grid on `(0, upper)`: `(j + 1/2) * upper / size`.
pub fn delta_grid(upper: f64, size: usize) -> impl Iterator<Item = f64> {
    (0..size).map(move |j| (j as f64 + 0.5) * upper / size as f64)
}

fn s_n(
    instance: &Instance,
    kind: DecisionKind,
    k: usize,
    delta: f64,
    n: u64,
) -> Result<f64, BoundsError> {
    let m = instance.means();
    Ok(horizon_s(kind, n, m[k] + delta, m[0] - delta)? as f64)
}

fn check_delta(instance: &Instance, k: usize, delta: f64) -> Result<(), BoundsError> {
    if k == 0 || k >= instance.num_arms() {
        return Err(BoundsError::ArmIndex(k));
    }
    let upper = (instance.means()[0] - instance.means()[k]) / 2.0;
    if !(delta > 0.0 && delta < upper) {
        return Err(BoundsError::DeltaOutOfRange { delta, upper });
    }
    Ok(())
}

/// Lemma-1 summand for arm `k` at a fixed `delta` (pull-count scale).
pub fn lemma1_term(
    instance: &Instance,
    kind: DecisionKind,
    k: usize,
    delta: f64,
    n: u64,
) -> Result<f64, BoundsError> {
    check_delta(instance, k, delta)?;
    let s = s_n(instance, kind, k, delta, n)?;
    let inv = 1.0 / (delta * delta);
    Ok(s + 3.0 * libm::log2(s.max(4.0 * inv)) + 10.0 * inv)
}

/// Expected-pulls bound for arm `k` at a fixed `delta`, with the `v 4/d^2`
/// folded into the leading term.
pub fn numplays_bound(
    instance: &Instance,
    kind: DecisionKind,
    k: usize,
    delta: f64,
    n: u64,
) -> Result<f64, BoundsError> {
    check_delta(instance, k, delta)?;
    let s = s_n(instance, kind, k, delta, n)?;
    let inv = 1.0 / (delta * delta);
    let u = s.max(4.0 * inv);
    Ok(u + 3.0 * libm::log2(u) + 6.0 * inv)
}

fn minimize_over_grid<F>(
    instance: &Instance,
    formula_id: FormulaId,
    n: u64,
    grid_size: usize,
    mut term: F,
) -> Result<BoundReport, BoundsError>
where
    F: FnMut(usize, f64) -> Result<f64, BoundsError>,
{
    if grid_size == 0 {
        return Err(BoundsError::EmptyGrid);
    }
    let gaps = suboptimal_gaps(instance);
    let mut per_arm = Vec::with_capacity(gaps.len());
    let mut deltas = Vec::with_capacity(gaps.len());
    for (i, &gap) in gaps.iter().enumerate() {
        let mut best = (f64::INFINITY, f64::NAN);
        for delta in delta_grid(gap / 2.0, grid_size) {
            let v = term(i + 1, delta)?;
            if v < best.0 {
                best = (v, delta);
            }
        }
        per_arm.push(best.0);
        deltas.push(best.1);
    }
    Ok(BoundReport {
        formula_id,
        n,
        total_regret_bound: total(&gaps, &per_arm),
        per_arm_pull_bound: per_arm,
        minimizing_delta: deltas,
    })
}

/// Lemma-1 regret bound with each arm's delta minimized over a uniform open
/// grid of `grid_size` points in `(0, Delta_k / 2)`.
pub fn lemma1_bound(
    instance: &Instance,
    kind: DecisionKind,
    n: u64,
    grid_size: usize,
) -> Result<BoundReport, BoundsError> {
    if n == 0 {
        return Err(BoundsError::HorizonTooSmall { n, min: 1 });
    }
    minimize_over_grid(instance, FormulaId::Lemma1, n, grid_size, |k, d| {
        lemma1_term(instance, kind, k, d, n)
    })
}

/// [`numplays_bound`] minimized over the same grid as [`lemma1_bound`].
pub fn numplays_report(
    instance: &Instance,
    kind: DecisionKind,
    n: u64,
    grid_size: usize,
) -> Result<BoundReport, BoundsError> {
    if n == 0 {
        return Err(BoundsError::HorizonTooSmall { n, min: 1 });
    }
    minimize_over_grid(instance, FormulaId::NumPlays, n, grid_size, |k, d| {
        numplays_bound(instance, kind, k, d, n)
    })
}

fn cor1_branch_terms(n: u64, gap: f64) -> (f64, f64) {
    let ln_n = libm::log(n as f64);
    let c = c_n(n);
    let g2 = gap * gap;
    let shrink = (1.0 - 2.0 / c) * (1.0 - 2.0 / c);
    let a = 8.0 * ln_n / gap
        + 160.0 / gap
        + 19.0 * gap / 6.0 * libm::log2(libm::ceil(8.0 * ln_n / g2).max(64.0 / g2));
    let b = 2.0 * ln_n / gap
        + 8.0 * (1.0 - 1.0 / c) * ln_n / (gap * shrink * c)
        + 10.0 * c * c / gap
        + 13.0 * gap / 4.0
            * libm::log2(libm::ceil(2.0 * ln_n / (g2 * shrink)).max(4.0 * c * c / g2));
    (a, b)
}

/// UCB1 corollary: the smaller of its two printed branches.
pub fn cor1_bound(n: u64, gaps: &[f64]) -> Result<f64, BoundsError> {
    Ok(cor1_report(n, gaps)?.total_regret_bound)
}

/// [`cor1_bound`] with per-arm terms; `formula_id` names the winning branch.
pub fn cor1_report(n: u64, gaps: &[f64]) -> Result<BoundReport, BoundsError> {
    if n < 2 {
        return Err(BoundsError::HorizonTooSmall { n, min: 2 });
    }
    let (a, b): (Vec<f64>, Vec<f64>) = gaps.iter().map(|&g| cor1_branch_terms(n, g)).unzip();
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let c = c_n(n);
    let (formula_id, terms, deltas): (_, Vec<f64>, Vec<f64>) = if sa <= sb {
        (FormulaId::Cor1a, a, gaps.iter().map(|g| g / 4.0).collect())
    } else {
        (FormulaId::Cor1b, b, gaps.iter().map(|g| g / c).collect())
    };
    Ok(BoundReport {
        formula_id,
        n,
        per_arm_pull_bound: terms.iter().zip(gaps).map(|(t, g)| t / g).collect(),
        total_regret_bound: sa.min(sb),
        minimizing_delta: deltas,
    })
}

/// KL-UCB corollary, evaluated as printed. `means` must satisfy the instance
/// ordering `0 < mu_K <= ... <= mu_2 < mu_1 < 1`.
pub fn cor2_bound(n: u64, means: &[f64]) -> Result<f64, BoundsError> {
    Ok(cor2_report(n, means)?.total_regret_bound)
}

pub fn cor2_report(n: u64, means: &[f64]) -> Result<BoundReport, BoundsError> {
    if n < 2 {
        return Err(BoundsError::HorizonTooSmall { n, min: 2 });
    }
    check_mean_ordering(means)?;
    let c = c_n(n);
    let lf = libm::log(f_of(n));
    let m1 = means[0];
    let shrink = (1.0 - 2.0 / c) * (1.0 - 2.0 / c);
    let mut per_arm = Vec::with_capacity(means.len() - 1);
    let mut sum = 0.0;
    for &mk in &means[1..] {
        let gap = m1 - mk;
        let g2 = gap * gap;
        let curv = 1.0 / mk + 1.0 / (1.0 - m1);
        let term = gap * lf / kl_div(mk, m1)
            + curv * curv * lf / (c * gap * (2.0 - 1.0 / c) * (2.0 - 1.0 / c))
            + 10.0 * c * c / gap
            + 13.0 * gap / 4.0 * libm::log2(libm::ceil(lf / (2.0 * g2 * shrink)).max(4.0 * c * c / g2));
        sum += term;
        per_arm.push(term / gap);
    }
    Ok(BoundReport {
        formula_id: FormulaId::Cor2,
        n,
        per_arm_pull_bound: per_arm,
        total_regret_bound: sum,
        minimizing_delta: means[1..].iter().map(|mk| (m1 - mk) / c).collect(),
    })
}

/// `sum_k Delta_k S_{ceil((1-delta) n)}(mu_k - delta, mu_1 + delta)`.
pub fn lemma2_lower_curve(
    instance: &Instance,
    kind: DecisionKind,
    n: u64,
    delta: f64,
) -> Result<f64, BoundsError> {
    Ok(lemma2_report(instance, kind, n, delta)?.total_regret_bound)
}

pub fn lemma2_report(
    instance: &Instance,
    kind: DecisionKind,
    n: u64,
    delta: f64,
) -> Result<BoundReport, BoundsError> {
    if n == 0 {
        return Err(BoundsError::HorizonTooSmall { n, min: 1 });
    }
    let m = instance.means();
    let upper = m[m.len() - 1].min(1.0 - m[0]);
    if !(delta > 0.0 && delta < upper) {
        return Err(BoundsError::DeltaOutOfRange { delta, upper });
    }
    let t = (libm::ceil((1.0 - delta) * n as f64) as u64).max(1);
    let per_arm = m[1..]
        .iter()
        .map(|&mk| Ok(horizon_s(kind, t, mk - delta, m[0] + delta)? as f64))
        .collect::<Result<Vec<f64>, BoundsError>>()?;
    let gaps = suboptimal_gaps(instance);
    Ok(BoundReport {
        formula_id: FormulaId::Lemma2Lower,
        n,
        total_regret_bound: total(&gaps, &per_arm),
        minimizing_delta: alloc::vec![delta; per_arm.len()],
        per_arm_pull_bound: per_arm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ArmDistribution;

    fn bern(means: &[f64]) -> Instance {
        Instance::new(means.iter().map(|&p| ArmDistribution::Bernoulli { p }).collect()).unwrap()
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    // Golden values from an independent Python evaluation of the formulas.
    #[test]
    fn lemma1_golden() {
        let inst = bern(&[0.9, 0.6]);
        let cases = [
            (DecisionKind::Ucb1, 1_000, 666.035_199_891_526_9),
            (DecisionKind::Ucb1, 10_000, 751.456_232_527_892_1),
            (DecisionKind::KlUcb, 1_000, 420.994_106_951_610_7),
            (DecisionKind::KlUcb, 10_000, 453.682_578_260_865_97),
        ];
        for (kind, n, want) in cases {
            let r = lemma1_bound(&inst, kind, n, 200).unwrap();
            assert!(rel_close(r.total_regret_bound, want, 1e-12), "{kind:?} {n}: {}", r.total_regret_bound);
            assert_eq!(r.formula_id, FormulaId::Lemma1);
            assert!(rel_close(r.total_regret_bound, 0.3 * r.per_arm_pull_bound[0], 1e-15));
        }
    }

    #[test]
    fn lemma1_monotone_and_grid_stable() {
        let inst = bern(&[0.9, 0.6]);
        for kind in [DecisionKind::Ucb1, DecisionKind::KlUcb] {
            let a = lemma1_bound(&inst, kind, 1_000, 200).unwrap().total_regret_bound;
            let b = lemma1_bound(&inst, kind, 10_000, 200).unwrap().total_regret_bound;
            assert!(a <= b);
            let fine = lemma1_bound(&inst, kind, 10_000, 2000).unwrap().total_regret_bound;
            assert!((b - fine).abs() / fine < 0.01);
        }
        assert_eq!(lemma1_bound(&inst, DecisionKind::Ucb1, 100, 0), Err(BoundsError::EmptyGrid));
    }

    #[test]
    fn numplays_matches_lemma1_when_s_dominates() {
        let inst = bern(&[0.9, 0.6]);
        let n = 1_000_000;
        for kind in [DecisionKind::Ucb1, DecisionKind::KlUcb] {
            for delta in [0.08, 0.1, 0.14] {
                let s = horizon_s(kind, n, 0.6 + delta, 0.9 - delta).unwrap() as f64;
                let np = numplays_bound(&inst, kind, 1, delta, n).unwrap();
                let l1 = lemma1_term(&inst, kind, 1, delta, n).unwrap();
                assert!(np <= l1);
                if s >= 4.0 / (delta * delta) {
                    assert!(rel_close(np + 4.0 / (delta * delta), l1, 1e-14));
                }
            }
        }
    }

    #[test]
    fn numplays_edges() {
        let inst = bern(&[0.9, 0.6]);
        assert!(numplays_bound(&inst, DecisionKind::Ucb1, 1, 0.01, 1).unwrap() >= 1.0);
        assert!(matches!(
            numplays_bound(&inst, DecisionKind::Ucb1, 1, 0.16, 100),
            Err(BoundsError::DeltaOutOfRange { .. })
        ));
        assert!(numplays_bound(&inst, DecisionKind::Ucb1, 1, 0.0, 100).is_err());
        assert_eq!(
            numplays_bound(&inst, DecisionKind::Ucb1, 0, 0.1, 100),
            Err(BoundsError::ArmIndex(0))
        );
        // S grows with delta since the effective gap shrinks.
        let n = 1_000_000;
        let s_at = |d: f64| horizon_s(DecisionKind::Ucb1, n, 0.6 + d, 0.9 - d).unwrap();
        let grid: Vec<f64> = delta_grid(0.15, 200).collect();
        assert!(grid.windows(2).all(|w| s_at(w[0]) <= s_at(w[1])));
    }

    #[test]
    fn cor1_values() {
        let n = 10_000;
        let v = cor1_bound(n, &[0.3]).unwrap();
        assert!(rel_close(v, 788.136_243_578_924, 1e-12));
        assert!(v > 8.0 * (n as f64).ln() / 0.3);
        assert!(rel_close(8.0 * (n as f64).ln() / 0.3, 245.6, 1e-3));
        assert_eq!(cor1_report(n, &[0.3]).unwrap().formula_id, FormulaId::Cor1a);
        assert!(matches!(cor1_bound(1, &[0.3]), Err(BoundsError::HorizonTooSmall { .. })));
        // C_n at n = e is 3; the nearest integer horizon is close.
        assert!((2.0 + libm::cbrt(libm::log(core::f64::consts::E)) - 3.0).abs() < 1e-15);
        assert!((c_n(3) - (2.0 + (3f64).ln().cbrt())).abs() < 1e-15);
    }

    #[test]
    fn cor1_dominates_lemma1() {
        let inst = bern(&[0.9, 0.6]);
        for n in [100, 1_000, 10_000] {
            let c = cor1_bound(n, &[0.3]).unwrap();
            let l = lemma1_bound(&inst, DecisionKind::Ucb1, n, 200).unwrap().total_regret_bound;
            assert!(c >= l, "n = {n}: cor1 {c} < lemma1 {l}");
        }
    }

    #[test]
    fn cor2_values() {
        let means = [0.9, 0.6];
        let v = cor2_bound(10_000, &means).unwrap();
        assert!(rel_close(v, 1_072.174_993_297_505_4, 1e-12));
        let lead = 0.3 * f_of(10_000).ln() / kl_div(0.6, 0.9);
        assert!(rel_close(lead, 13.158_064_269_346_085, 1e-12));
        assert!(v > lead);
        assert!(cor2_bound(10_000, &[1.0, 0.6]).is_err());
        assert!(cor2_bound(10_000, &[0.6, 0.9]).is_err());
        let inst = bern(&means);
        for n in [1_000, 10_000, 100_000] {
            let l = lemma1_bound(&inst, DecisionKind::KlUcb, n, 200).unwrap().total_regret_bound;
            assert!(cor2_bound(n, &means).unwrap() >= l);
        }
        // KL leading term is tighter than the Pinsker-based one at large n.
        let n = 1_000_000u64;
        let lead_kl = 0.3 * f_of(n).ln() / kl_div(0.6, 0.9);
        let lead_ucb = 2.0 * (n as f64).ln() / 0.3;
        assert!(lead_kl < lead_ucb);
    }

    #[test]
    fn lemma2_values() {
        let inst = bern(&[0.9, 0.6]);
        let v = lemma2_lower_curve(&inst, DecisionKind::KlUcb, 10_000, 0.02).unwrap();
        let t = 9_800u64;
        let direct = 0.3 * (f_of(t).ln() / kl_div(0.58, 0.92)).ceil();
        assert!(rel_close(v, direct, 1e-15));
        assert!(rel_close(v, 9.6, 1e-12));
        // value grows as delta shrinks.
        let mut prev = 0.0;
        for delta in [0.09, 0.05, 0.02, 0.01, 0.005] {
            let v = lemma2_lower_curve(&inst, DecisionKind::KlUcb, 10_000, delta).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        assert!(matches!(
            lemma2_lower_curve(&inst, DecisionKind::KlUcb, 10_000, 0.1),
            Err(BoundsError::DeltaOutOfRange { .. })
        ));
    }

    #[test]
    fn lemma2_below_lemma1_at_large_n() {
        let inst = bern(&[0.9, 0.6]);
        let n = 1_000_000;
        for kind in [DecisionKind::Ucb1, DecisionKind::KlUcb] {
            let lo = lemma2_lower_curve(&inst, kind, n, 0.01).unwrap();
            let hi = lemma1_bound(&inst, kind, n, 200).unwrap().total_regret_bound;
            assert!(lo <= hi, "{kind:?}: {lo} > {hi}");
        }
    }

    #[test]
    fn reports_are_positive_and_finite() {
        let inst = bern(&[0.8, 0.7, 0.5, 0.5]);
        let r = lemma1_bound(&inst, DecisionKind::KlUcb, 5_000, 50).unwrap();
        assert_eq!(r.per_arm_pull_bound.len(), 3);
        assert!(r.per_arm_pull_bound.iter().all(|v| v.is_finite() && *v > 0.0));
        let gaps = [0.1, 0.3, 0.3];
        let sum: f64 = gaps.iter().zip(&r.per_arm_pull_bound).map(|(g, p)| g * p).sum();
        assert!(rel_close(r.total_regret_bound, sum, 1e-12));
    }
}

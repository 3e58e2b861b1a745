//! Decision functions `g_t(x, s)` for UCB1 and KL-UCB, the Bernoulli KL
//! divergence, and the horizon function `S_t(x1, x2)`.
//!
//! All logarithms are natural and evaluated through `libm`, so results are
//! bit-identical across platforms and build profiles.

use alloc::vec::Vec;

use thiserror::Error;

/// Bisection stops once the bracket is this narrow (and the residual is small).
pub const KLUCB_Y_TOLERANCE: f64 = 1e-10;
/// Target for `d(x, y) - c` at the returned upper end of the bracket.
pub const KLUCB_RESIDUAL_TOLERANCE: f64 = 1e-11;
pub const KLUCB_MAX_ITERATIONS: u32 = 200;
/// Linear-scan cap for [`horizon_s_bruteforce`].
pub const HORIZON_SCAN_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PolicyError {
    #[error("horizon arguments must satisfy 0 < x1 < x2 < 1 (got x1 = {x1}, x2 = {x2})")]
    HorizonDomain { x1: f64, x2: f64 },
    #[error("round index t must be at least 1")]
    ZeroRound,
    #[error("brute-force scan exceeded {HORIZON_SCAN_CAP} samples")]
    ScanCapExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum DecisionKind {
    Ucb1,
    KlUcb,
}

impl DecisionKind {
    /// `g_t(x, s)` for this kind.
    #[inline]
    pub fn index(self, t: u64, x: f64, s: u64) -> f64 {
        match self {
            DecisionKind::Ucb1 => g_ucb1(t, x, s),
            DecisionKind::KlUcb => g_klucb(t, x, s),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DecisionKind::Ucb1 => "ucb1",
            DecisionKind::KlUcb => "klucb",
        }
    }
}

/// Bernoulli KL divergence `d(p, q)` with `0 log 0 = 0` and `r log(r/0) = inf`.
pub fn kl_div(p: f64, q: f64) -> f64 {
    xlogx_over(p, q) + xlogx_over(1.0 - p, 1.0 - q)
}

#[inline]
fn xlogx_over(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if b == 0.0 {
        f64::INFINITY
    } else {
        a * libm::log(a / b)
    }
}

/// `f(t) = 1 + t (log t)^2`.
pub fn f_of(t: u64) -> f64 {
    let lt = libm::log(t as f64);
    1.0 + t as f64 * lt * lt
}

/// `x + sqrt(2 log(t) / s)`.
pub fn g_ucb1(t: u64, x: f64, s: u64) -> f64 {
    x + libm::sqrt(2.0 * libm::log(t as f64) / s as f64)
}

/// `max{y in [0, 1] : d(x, y) <= log(f(t)) / s}`.
///
/// Returns the upper end of the final bisection bracket, so `d(x, y)` is never
/// below the level when `y` is interior.
pub fn g_klucb(t: u64, x: f64, s: u64) -> f64 {
    klucb_upper(x, libm::log(f_of(t)) / s as f64)
}

/// KL-UCB upper confidence limit at divergence level `c`.
pub fn klucb_upper(x: f64, c: f64) -> f64 {
    if c <= 0.0 {
        return x;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x <= 0.0 {
        // d(0, y) = -log(1 - y)
        return (-libm::expm1(-c)).min(1.0);
    }
    if kl_div(x, 1.0 - f64::EPSILON) <= c {
        return 1.0;
    }
    let mut lo = x;
    let mut hi = 1.0;
    let mut hi_div = f64::INFINITY;
    for _ in 0..KLUCB_MAX_ITERATIONS {
        if hi - lo <= KLUCB_Y_TOLERANCE && hi_div - c <= KLUCB_RESIDUAL_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let dm = kl_div(x, mid);
        if dm <= c {
            lo = mid;
        } else {
            hi = mid;
            hi_div = dm;
        }
    }
    hi
}

fn check_horizon_args(t: u64, x1: f64, x2: f64) -> Result<(), PolicyError> {
    if t == 0 {
        return Err(PolicyError::ZeroRound);
    }
    if !(x1 > 0.0 && x1 < x2 && x2 < 1.0) {
        return Err(PolicyError::HorizonDomain { x1, x2 });
    }
    Ok(())
}

/// The real number whose ceiling is `S_t(x1, x2)` in closed form.
pub fn horizon_s_argument(
    kind: DecisionKind,
    t: u64,
    x1: f64,
    x2: f64,
) -> Result<f64, PolicyError> {
    check_horizon_args(t, x1, x2)?;
    let gap = x2 - x1;
    Ok(match kind {
        DecisionKind::Ucb1 => 2.0 * libm::log(t as f64) / (gap * gap),
        DecisionKind::KlUcb => libm::log(f_of(t)) / kl_div(x1, x2),
    })
}

/// Closed-form `S_t(x1, x2) = min{s : g_t(x1, s) <= x2}`.
///
/// Clamped below at 1: at `t = 1` both bonuses vanish and the first sample
/// already satisfies the condition.
pub fn horizon_s(kind: DecisionKind, t: u64, x1: f64, x2: f64) -> Result<u64, PolicyError> {
    let arg = horizon_s_argument(kind, t, x1, x2)?;
    Ok((libm::ceil(arg) as u64).max(1))
}

/// Linear-scan oracle for [`horizon_s`].
pub fn horizon_s_bruteforce(
    kind: DecisionKind,
    t: u64,
    x1: f64,
    x2: f64,
) -> Result<u64, PolicyError> {
    check_horizon_args(t, x1, x2)?;
    (1..=HORIZON_SCAN_CAP)
        .find(|&s| kind.index(t, x1, s) <= x2)
        .ok_or(PolicyError::ScanCapExceeded)
}

/// Sample points for [`check_assumptions`].
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionGrid {
    pub ts: Vec<u64>,
    pub xs: Vec<f64>,
    pub ss: Vec<u64>,
}

impl AssumptionGrid {
    /// t in 2..=100, x in {0.1, ..., 0.9}, s in 1..=100.
    pub fn standard() -> Self {
        AssumptionGrid {
            ts: (2..=100).collect(),
            xs: (1..=9).map(|i| i as f64 / 10.0).collect(),
            ss: (1..=100).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AssumptionCheck {
    IncreasingInT,
    IncreasingInX,
    DecreasingInS,
    AboveMean,
    KlAboveLevel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssumptionViolation {
    pub check: AssumptionCheck,
    pub t: u64,
    pub x: f64,
    pub s: u64,
    /// Index at (t, x, s).
    pub value: f64,
    /// The value it was compared against.
    pub against: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssumptionReport {
    pub points: usize,
    pub violations: Vec<AssumptionViolation>,
}

impl AssumptionReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audit monotonicity (non-decreasing in `t` and `x`, non-increasing in `s`,
/// between neighbouring grid points), `g > x`, and `d(x, g) >= log f(t) / s`
/// wherever `g < 1`.
pub fn check_assumptions<G>(g: G, grid: &AssumptionGrid) -> AssumptionReport
where
    G: Fn(u64, f64, u64) -> f64,
{
    let (nt, nx, ns) = (grid.ts.len(), grid.xs.len(), grid.ss.len());
    let mut values = Vec::with_capacity(nt * nx * ns);
    for &t in &grid.ts {
        for &x in &grid.xs {
            for &s in &grid.ss {
                values.push(g(t, x, s));
            }
        }
    }
    let at = |a: usize, b: usize, c: usize| values[(a * nx + b) * ns + c];

    let mut report = AssumptionReport {
        points: values.len(),
        violations: Vec::new(),
    };
    for (a, &t) in grid.ts.iter().enumerate() {
        let level_t = libm::log(f_of(t));
        for (b, &x) in grid.xs.iter().enumerate() {
            for (c, &s) in grid.ss.iter().enumerate() {
                let v = at(a, b, c);
                let mut push = |check, against| {
                    report.violations.push(AssumptionViolation {
                        check,
                        t,
                        x,
                        s,
                        value: v,
                        against,
                    })
                };
                if a + 1 < nt && at(a + 1, b, c) < v {
                    push(AssumptionCheck::IncreasingInT, at(a + 1, b, c));
                }
                if b + 1 < nx && at(a, b + 1, c) < v {
                    push(AssumptionCheck::IncreasingInX, at(a, b + 1, c));
                }
                if c + 1 < ns && at(a, b, c + 1) > v {
                    push(AssumptionCheck::DecreasingInS, at(a, b, c + 1));
                }
                if x > 0.0 && x < 1.0 {
                    if v <= x {
                        push(AssumptionCheck::AboveMean, x);
                    }
                    let level = level_t / s as f64;
                    if v < 1.0 && kl_div(x, v) < level {
                        push(AssumptionCheck::KlAboveLevel, level);
                    }
                }
            }
        }
    }
    report
}

//! Self-checks behind `onebit verify`. Every check stops at its first
//! counterexample.

use std::fmt;

use onebit_core::policies::{
    check_assumptions, g_klucb, g_ucb1, horizon_s, horizon_s_argument, horizon_s_bruteforce,
    kl_div, f_of, AssumptionGrid, DecisionKind,
};
use onebit_core::schedule::{alpha, eta, floor_log2, iota, tau, ScheduleCursor};
use onebit_core::{FollowerEncoder, LeaderDecoder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Schedule,
    Codec,
    Policies,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Intensity {
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub suite: Suite,
    pub intensity: Intensity,
    /// Flip one bit per codec stream; the round-trip check must then fail.
    pub inject_bit_flip: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub suite: &'static str,
    pub check: &'static str,
    pub cases: u64,
    pub counterexample: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.counterexample {
            None => write!(f, "ok   {}/{} ({} cases)", self.suite, self.check, self.cases),
            Some(c) => write!(f, "FAIL {}/{} after {} cases: {c}", self.suite, self.check, self.cases),
        }
    }
}

fn scan<I, F>(suite: &'static str, check: &'static str, cases: I, mut f: F) -> CheckResult
where
    I: IntoIterator,
    F: FnMut(I::Item) -> Option<String>,
{
    let mut n = 0;
    for case in cases {
        n += 1;
        if let Some(c) = f(case) {
            return CheckResult {
                suite,
                check,
                cases: n,
                counterexample: Some(c),
            };
        }
    }
    CheckResult {
        suite,
        check,
        cases: n,
        counterexample: None,
    }
}

pub fn run(opts: VerifyOptions) -> Vec<CheckResult> {
    let mut out = Vec::new();
    if matches!(opts.suite, Suite::Schedule | Suite::All) {
        out.extend(schedule_suite(opts.intensity));
    }
    if matches!(opts.suite, Suite::Codec | Suite::All) {
        out.extend(codec_suite(opts.intensity, opts.inject_bit_flip));
    }
    if matches!(opts.suite, Suite::Policies | Suite::All) {
        out.extend(policies_suite(opts.intensity));
    }
    out
}

/// `sum_{j=1}^{m} 2^(j-1) j + (i + 1 - 2^m)(m + 1)` with `m = floor(log2 i)`.
pub fn tau_rewrite(i: u64) -> u64 {
    match i {
        0 => 0,
        1 => 1,
        _ => {
            let m = 63 - i.leading_zeros() as u64;
            let head: u64 = (1..=m).map(|j| (1u64 << (j - 1)) * j).sum();
            head + (i + 1 - (1u64 << m)) * (m + 1)
        }
    }
}

pub fn schedule_suite(intensity: Intensity) -> Vec<CheckResult> {
    const S: &str = "schedule";
    let limit: u64 = match intensity {
        Intensity::Quick => 10_000,
        Intensity::Full => 1_000_000,
    };
    let t = |i| tau(i).expect("index in range");
    let mut out = vec![
        scan(S, "tau_difference", 0..limit, |i| {
            let d = t(i + 1) - t(i);
            let want = 1 + u64::from(floor_log2(i + 1));
            (d != want).then(|| format!("i = {i}: tau(i+1) - tau(i) = {d}, expected {want}"))
        }),
        scan(S, "tau_rewrite", 0..=limit, |i| {
            let (a, b) = (t(i), tau_rewrite(i));
            (a != b).then(|| format!("i = {i}: closed form {a}, rewrite {b}"))
        }),
        scan(S, "iota_inverts_tau", 1..=limit, |s| {
            let i = iota(s);
            if !(t(i) <= s && s < t(i + 1)) {
                return Some(format!("s = {s}: iota = {i} but tau(iota) = {}, tau(iota+1) = {}", t(i), t(i + 1)));
            }
            let ti = t(s);
            (iota(ti) != s).then(|| format!("i = {s}: iota(tau(i)) = {}", iota(ti)))
        }),
    ];
    let ae = |s| (eta(s).expect("s >= 1"), alpha(s).expect("s >= 1"));
    out.push(scan(S, "eta_alpha_growth", 28..=limit, |s| {
        let (e, a) = ae(s);
        let sf = s as f64;
        if (e as f64) < (sf / 2.0).max(16.0) {
            return Some(format!("s = {s}: eta = {e} < max(s/2, 16)"));
        }
        (f64::from(a) < sf.sqrt().log2()).then(|| format!("s = {s}: alpha = {a} < log2 sqrt(s)"))
    }));
    out.push(scan(S, "eta_upper", 1..=limit, |s| {
        let (e, a) = ae(s);
        (e > (1u64 << a) * u64::from(a)).then(|| format!("s = {s}: eta = {e} > 2^alpha alpha (alpha = {a})"))
    }));
    out.push(scan(S, "eta_lower", 1..=limit, |s| {
        let (e, _) = ae(s);
        let floor = s as f64 - 2.0 * (s as f64).log2() - 1.0;
        ((e as f64) < floor).then(|| format!("s = {s}: eta = {e} < s - 2 log2 s - 1 = {floor}"))
    }));
    let mut cursor = ScheduleCursor::first();
    out.push(scan(S, "cursor_walk", 1..=limit, |s| {
        if s > cursor.packet_end() {
            cursor = cursor.advance();
        }
        let direct = ScheduleCursor::containing(s).expect("s >= 1");
        (direct != cursor).then(|| format!("s = {s}: walked {cursor:?}, direct {direct:?}"))
    }));
    out
}

/// Reward streams of several shapes, reproducible from `seed`.
pub fn reward_stream(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: f64 = rng.random();
    match seed % 5 {
        0 => (0..len).map(|_| f64::from(u8::from(rng.random::<f64>() < p))).collect(),
        1 => (0..len).map(|_| rng.random()).collect(),
        2 => (0..len).map(|_| (rng.random::<f64>() * 8.0).floor() / 8.0).collect(),
        3 => (0..len).map(|_| if rng.random::<f64>() < 0.01 { 1.0 } else { 0.0 }).collect(),
        _ => (0..len).map(|_| rng.random::<f64>() * p).collect(),
    }
}

pub fn codec_suite(intensity: Intensity, inject_bit_flip: bool) -> Vec<CheckResult> {
    const S: &str = "codec";
    let streams: u64 = match intensity {
        Intensity::Quick => 100,
        Intensity::Full => 1000,
    };
    let len = 2000;
    let round_trip = scan(S, "round_trip", 0..streams, |seed| {
        let xs = reward_stream(seed, len);
        let mut enc = FollowerEncoder::new();
        let mut dec = LeaderDecoder::new();
        let mut sum = 0.0;
        let mut prefix = Vec::with_capacity(len);
        for (idx, &x) in xs.iter().enumerate() {
            sum += x;
            prefix.push(sum / (idx + 1) as f64);
            let mut bit = enc.observe(x).expect("rewards lie in [0, 1]");
            // pull 6 is the first bit of packet 4 (pulls 6..=8)
            if inject_bit_flip && idx == 5 {
                bit = bit.flipped();
            }
            if let Some(est) = dec.receive(bit) {
                let s = idx as u64 + 1;
                let (e, a) = (eta(s).expect("s >= 1"), alpha(s).expect("s >= 1"));
                if est.eta != e || est.alpha != a {
                    return Some(format!("seed {seed}, s = {s}: decoded (eta, alpha) = ({}, {}), schedule gives ({e}, {a})", est.eta, est.alpha));
                }
                let mu_hat = prefix[e as usize - 1];
                let scale = 2f64.powi(a as i32);
                let want = if mu_hat > 0.0 { (scale * mu_hat).ceil() / scale } else { 1.0 / scale };
                if est.mu_bar != want {
                    return Some(format!("seed {seed}, s = {s}: mu_bar = {}, expected {want} from mu_hat = {mu_hat}", est.mu_bar));
                }
                let err = est.mu_bar - mu_hat;
                if !(0.0..=1.0 / scale).contains(&err) {
                    return Some(format!("seed {seed}, s = {s}: mu_bar - mu_hat = {err} outside [0, 2^-{a}]"));
                }
            }
        }
        None
    });
    let bit_form = scan(S, "bits_are_level_differences", 0..streams.min(200), |seed| {
        let xs = reward_stream(seed, len);
        let mut enc = FollowerEncoder::new();
        let mut sum = 0.0;
        let mut snapshot = 0.0;
        for (idx, &x) in xs.iter().enumerate() {
            let s = idx as u64 + 1;
            sum += x;
            let done = tau(iota(s - 1)).expect("in range");
            if s == done + 1 {
                snapshot = sum / s as f64;
            }
            let j = (s - done) as i32;
            let level = |k: i32| if k == 0 || snapshot == 0.0 { 0.0 } else { (2f64.powi(k) * snapshot).ceil() - 1.0 };
            let want = level(j) - 2.0 * level(j - 1);
            let got = enc.observe(x).expect("rewards lie in [0, 1]");
            if f64::from(got.as_u8()) != want {
                return Some(format!("seed {seed}, s = {s}: bit {} but level difference {want}", got.as_u8()));
            }
        }
        None
    });
    vec![round_trip, bit_form]
}

const HORIZON_X1: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
const HORIZON_X2: [f64; 5] = [0.55, 0.65, 0.75, 0.85, 0.95];
const HORIZON_T: [u64; 3] = [10, 100, 1000];

/// Relative distance below which a ceiling may legitimately land on either side.
pub const CEIL_BOUNDARY_TOLERANCE: f64 = 1e-9;

fn near_integer(x: f64) -> bool {
    (x - x.round()).abs() <= CEIL_BOUNDARY_TOLERANCE * x.abs().max(1.0)
}

/// Closed form agrees with the scan, off by one only at a ceiling boundary.
pub fn horizon_agreement() -> Vec<(DecisionKind, u64, f64, f64, u64, u64, bool)> {
    let mut rows = Vec::new();
    for kind in [DecisionKind::Ucb1, DecisionKind::KlUcb] {
        for t in HORIZON_T {
            for x1 in HORIZON_X1 {
                for x2 in HORIZON_X2 {
                    let closed = horizon_s(kind, t, x1, x2).expect("valid grid point");
                    let scanned = horizon_s_bruteforce(kind, t, x1, x2).expect("within scan cap");
                    let arg = horizon_s_argument(kind, t, x1, x2).expect("valid grid point");
                    let ok = closed == scanned || (closed.abs_diff(scanned) == 1 && near_integer(arg));
                    rows.push((kind, t, x1, x2, closed, scanned, ok));
                }
            }
        }
    }
    rows
}

pub fn policies_suite(intensity: Intensity) -> Vec<CheckResult> {
    const S: &str = "policies";
    let mut out = vec![scan(S, "horizon_closed_form", horizon_agreement(), |(kind, t, x1, x2, c, b, ok)| {
        (!ok).then(|| format!("{kind:?} t = {t} x1 = {x1} x2 = {x2}: closed {c}, scan {b}"))
    })];

    let mut points = Vec::new();
    for x in (1..=9).map(|i| f64::from(i) / 10.0) {
        for s in 1..=20u64 {
            for t in HORIZON_T {
                points.push((x, s, t));
            }
        }
    }
    out.push(scan(S, "klucb_root", points, |(x, s, t)| {
        let y = g_klucb(t, x, s);
        let c = f_of(t).ln() / s as f64;
        if y >= 1.0 {
            return (kl_div(x, 1.0 - f64::EPSILON) > c).then(|| format!("x = {x} s = {s} t = {t}: returned 1 but an interior root exists"));
        }
        let d = kl_div(x, y);
        if d < c {
            return Some(format!("x = {x} s = {s} t = {t}: d(x, y) = {d} below level {c}"));
        }
        // within 1e-9, or no smaller double reaches the level
        let below = f64::from_bits(y.to_bits() - 1);
        ((d - c) > 1e-9 && kl_div(x, below) >= c)
            .then(|| format!("x = {x} s = {s} t = {t}: residual {} and y is not the first double past the root", d - c))
    }));

    let grid = match intensity {
        Intensity::Full => AssumptionGrid::standard(),
        Intensity::Quick => AssumptionGrid {
            ts: (2..=100).step_by(7).collect(),
            xs: (1..=9).map(|i| f64::from(i) / 10.0).collect(),
            ss: (1..=100).step_by(3).collect(),
        },
    };
    for (check, report) in [
        ("assumptions_ucb1", check_assumptions(g_ucb1, &grid)),
        ("assumptions_klucb", check_assumptions(g_klucb, &grid)),
    ] {
        let first = report.violations.first().map(|v| format!("{v:?}"));
        out.push(CheckResult {
            suite: S,
            check,
            cases: report.points as u64,
            counterexample: first,
        });
    }

    let pairs = (0..=200).flat_map(|i| (0..=200).map(move |j| (f64::from(i) / 200.0, f64::from(j) / 200.0)));
    out.push(scan(S, "kl_pinsker", pairs, |(p, q)| {
        let d = kl_div(p, q);
        (d + 1e-12 < 2.0 * (p - q) * (p - q)).then(|| format!("p = {p} q = {q}: d = {d} < 2(p-q)^2"))
    }));
    out
}

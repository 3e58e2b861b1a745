//! Pull-by-pull view of one follower's messages and the leader's decoding.

use std::fmt::Write as _;

use onebit_core::{CodecError, FollowerEncoder, LeaderDecoder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub pull: u64,
    pub packet: u64,
    pub reward: f64,
    pub bit: u8,
    /// Mean frozen at the start of this pull's packet.
    pub snapshot_mean: f64,
    /// Leader's estimate after this pull, once a packet has completed.
    pub decoded: Option<(f64, u64)>,
    /// This pull completes its packet.
    pub packet_end: bool,
}

/// Runs `pulls` pulls, cycling through `rewards`.
pub fn trace(rewards: &[f64], pulls: u64) -> Result<Vec<TraceRow>, CodecError> {
    let mut enc = FollowerEncoder::new();
    let mut dec = LeaderDecoder::new();
    let mut rows = Vec::with_capacity(pulls as usize);
    for (s, &reward) in (1..=pulls).zip(rewards.iter().cycle()) {
        let bit = enc.observe(reward)?;
        let completed = dec.receive(bit).is_some();
        let cursor = enc.cursor();
        rows.push(TraceRow {
            pull: s,
            packet: cursor.packet_index(),
            reward,
            bit: bit.as_u8(),
            snapshot_mean: enc.snapshot_mean().expect("snapshot exists after a pull"),
            decoded: dec.estimate().ok().map(|e| (e.mu_bar, e.eta)),
            packet_end: completed,
        });
    }
    Ok(rows)
}

/// Uniform rewards on `[0, 1]` from `seed`.
pub fn seeded_rewards(seed: u64, pulls: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..pulls).map(|_| rng.random()).collect()
}

/// Parses `0.3,0.9,0.6`. Every value must lie in `[0, 1]`.
pub fn parse_rewards(list: &str) -> Result<Vec<f64>, String> {
    let values = list
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            let x: f64 = v.parse().map_err(|_| format!("not a number: {v:?}"))?;
            if (0.0..=1.0).contains(&x) {
                Ok(x)
            } else {
                Err(format!("reward {x} is outside [0, 1]"))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err("reward list is empty".into());
    }
    Ok(values)
}

pub fn render(rows: &[TraceRow]) -> String {
    let mut out = String::from("pull  packet  reward    bit  snapshot  mu_bar    eta\n");
    for r in rows {
        let (mu_bar, eta) = match r.decoded {
            Some((m, e)) => (format!("{m:<8}"), e.to_string()),
            None => ("-       ".to_string(), "-".to_string()),
        };
        let _ = writeln!(
            out,
            "{:<5} {:<7} {:<9.6} {:<4} {:<9.6} {} {}{}",
            r.pull,
            r.packet,
            r.reward,
            r.bit,
            r.snapshot_mean,
            mu_bar,
            eta,
            if r.packet_end { "  |" } else { "" }
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_pull_example() {
        let rows = trace(&parse_rewards("0.3,0.9,0.6").unwrap(), 3).unwrap();
        assert_eq!(rows.iter().map(|r| r.bit).collect::<Vec<_>>(), [0, 1, 0]);
        assert_eq!(rows[2].decoded, Some((0.75, 2)));
        assert_eq!(rows[0].decoded, Some((0.5, 1)));
        assert_eq!(rows[1].decoded, Some((0.5, 1)));
        assert!((rows[1].snapshot_mean - 0.6).abs() < 1e-15);
    }

    #[test]
    fn packet_boundaries() {
        let rows = trace(&[0.5], 17).unwrap();
        let ends: Vec<u64> = rows.iter().filter(|r| r.packet_end).map(|r| r.pull).collect();
        assert_eq!(ends, [1, 3, 5, 8, 11, 14, 17]);
        assert_eq!(rows[16].packet, 7);
    }

    #[test]
    fn reward_parsing() {
        assert_eq!(parse_rewards(" 0, 1 ,0.25").unwrap(), [0.0, 1.0, 0.25]);
        assert!(parse_rewards("").is_err());
        assert!(parse_rewards(",").is_err());
        assert!(parse_rewards("0.5,1.5").is_err());
        assert!(parse_rewards("a").is_err());
    }

    #[test]
    fn rendering_marks_packet_ends() {
        let text = render(&trace(&[0.3, 0.9, 0.6], 3).unwrap());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].ends_with('|') && !lines[2].ends_with('|') && lines[3].ends_with('|'));
        assert!(lines[3].contains("0.75"));
    }

    #[test]
    fn seeded_rewards_are_reproducible() {
        assert_eq!(seeded_rewards(3, 10), seeded_rewards(3, 10));
        assert!(seeded_rewards(3, 100).iter().all(|x| (0.0..1.0).contains(x)));
    }
}

//! Follower-side encoder and leader-side decoder for the one-bit channel.
//!
//! At the first pull of each packet the follower freezes a quantized snapshot
//! of its empirical mean, then spends the packet's pulls sending that level
//! most-significant bit first. The leader mirrors the schedule, so packet
//! boundaries never travel over the channel. When a packet completes the
//! leader holds `mu_bar = 2^-alpha (level + 1)`, the snapshot rounded up to
//! the next multiple of `2^-alpha`.

use thiserror::Error;

use crate::schedule::{quantize, QuantLevel, ScheduleCursor, ScheduleError};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum CodecError {
    #[error("reward {0} is outside [0, 1]")]
    RewardOutOfRange(f64),
    #[error("no packet has been decoded yet")]
    NoPacket,
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// One message on the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub fn as_u8(self) -> u8 {
        match self {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }

    pub fn flipped(self) -> Bit {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }
}

impl From<bool> for Bit {
    fn from(b: bool) -> Self {
        if b {
            Bit::One
        } else {
            Bit::Zero
        }
    }
}

/// Per-arm follower state: reward statistics plus the packet in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerEncoder {
    pulls: u64,
    reward_sum: f64,
    snapshot: Option<Snapshot>,
    cursor: ScheduleCursor,
    bits_sent: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Snapshot {
    mean: f64,
    level: QuantLevel,
}

impl Default for FollowerEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl FollowerEncoder {
    pub fn new() -> Self {
        FollowerEncoder {
            pulls: 0,
            reward_sum: 0.0,
            snapshot: None,
            cursor: ScheduleCursor::first(),
            bits_sent: 0,
        }
    }

    /// Record one reward and return the bit transmitted for this pull.
    pub fn observe(&mut self, reward: f64) -> Result<Bit, CodecError> {
        if !(0.0..=1.0).contains(&reward) {
            return Err(CodecError::RewardOutOfRange(reward));
        }
        self.pulls += 1;
        self.reward_sum += reward;
        if self.pulls > self.cursor.packet_end() {
            self.cursor = self.cursor.advance();
        }
        if self.pulls == self.cursor.packet_start() {
            let mean = self.empirical_mean();
            self.snapshot = Some(Snapshot {
                mean,
                level: quantize(self.cursor.packet_length(), mean)?,
            });
            self.bits_sent = 0;
        }
        // A snapshot always exists here: pull 1 starts packet 1.
        let snap = self.snapshot.expect("snapshot taken at packet start");
        let bit = Bit::from(snap.level.msb_bit(self.bits_sent));
        self.bits_sent += 1;
        Ok(bit)
    }

    pub fn pulls(&self) -> u64 {
        self.pulls
    }

    pub fn reward_sum(&self) -> f64 {
        self.reward_sum
    }

    /// `reward_sum / pulls`, or 0 before the first pull.
    pub fn empirical_mean(&self) -> f64 {
        if self.pulls == 0 {
            0.0
        } else {
            self.reward_sum / self.pulls as f64
        }
    }

    /// Empirical mean frozen at the start of the packet in flight.
    pub fn snapshot_mean(&self) -> Option<f64> {
        self.snapshot.map(|s| s.mean)
    }

    pub fn snapshot_level(&self) -> Option<QuantLevel> {
        self.snapshot.map(|s| s.level)
    }

    pub fn cursor(&self) -> ScheduleCursor {
        self.cursor
    }

    pub fn bits_sent_in_packet(&self) -> u32 {
        self.bits_sent
    }
}

/// The leader's view of one completed packet.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecodedEstimate {
    /// Quantized mean estimate, in `(0, 1]`.
    pub mu_bar: f64,
    /// Sample count behind the estimate.
    pub eta: u64,
    /// Packet length in bits.
    pub alpha: u32,
}

/// Per-arm leader state. Consumes bits only.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderDecoder {
    received: u64,
    accumulator: u64,
    cursor: ScheduleCursor,
    last: Option<DecodedEstimate>,
}

impl Default for LeaderDecoder {
    fn default() -> Self {
        Self::new()
    }
}

impl LeaderDecoder {
    pub fn new() -> Self {
        LeaderDecoder {
            received: 0,
            accumulator: 0,
            cursor: ScheduleCursor::first(),
            last: None,
        }
    }

    /// Append one bit; returns the new estimate when it completes a packet.
    pub fn receive(&mut self, bit: Bit) -> Option<DecodedEstimate> {
        self.received += 1;
        if self.received > self.cursor.packet_end() {
            self.cursor = self.cursor.advance();
        }
        self.accumulator = (self.accumulator << 1) | u64::from(bit.as_u8());
        if self.received == self.cursor.packet_end() {
            let alpha = self.cursor.packet_length();
            let est = DecodedEstimate {
                mu_bar: (self.accumulator + 1) as f64 / (1u64 << alpha) as f64,
                eta: self.cursor.packet_start(),
                alpha,
            };
            self.last = Some(est);
            self.accumulator = 0;
            Some(est)
        } else {
            None
        }
    }

    /// Most recent completed packet's estimate.
    pub fn estimate(&self) -> Result<DecodedEstimate, CodecError> {
        self.last.ok_or(CodecError::NoPacket)
    }

    pub fn messages_received(&self) -> u64 {
        self.received
    }

    pub fn cursor(&self) -> ScheduleCursor {
        self.cursor
    }
}

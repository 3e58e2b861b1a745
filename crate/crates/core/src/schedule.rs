//! Packet-length schedule and the round-up quantizer.
//!
//! A follower transmits its quantized empirical mean in packets of growing
//! length: one 1-bit packet, two 2-bit packets, four 3-bit packets, and in
//! general `2^(j-1)` packets of `j` bits. Everything here is integer
//! arithmetic on pull counts; base-2 logarithms are taken from bit lengths,
//! never from floating point.

use thiserror::Error;

/// Largest packet index accepted by [`tau`]. Far beyond any simulated horizon.
pub const MAX_PACKET_INDEX: u64 = 1 << 57;

/// Largest quantizer bit width. `2^52 * x` keeps integer precision in an `f64`.
pub const MAX_QUANT_BITS: u32 = 52;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ScheduleError {
    #[error("packet index {0} exceeds the supported range (max {MAX_PACKET_INDEX})")]
    IndexOutOfRange(u64),
    #[error("pull count must be at least 1")]
    ZeroPulls,
    #[error("quantizer input {0} is outside [0, 1]")]
    ValueOutOfRange(f64),
    #[error("quantizer bit width {0} is outside [1, {MAX_QUANT_BITS}]")]
    BitWidthOutOfRange(u32),
}

/// `floor(log2(x))` for `x >= 1`.
#[inline]
pub fn floor_log2(x: u64) -> u32 {
    debug_assert!(x >= 1);
    63 - x.leading_zeros()
}

/// `ceil(log2(x))` for `x >= 1`.
#[inline]
pub fn ceil_log2(x: u64) -> u32 {
    debug_assert!(x >= 1);
    if x == 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Pull count at which packet `i` completes transmission; `tau(0) = 0`.
///
/// `tau(i) = 1 + (i+1) * ceil(log2(i+1)) - 2^ceil(log2(i+1))`.
pub fn tau(i: u64) -> Result<u64, ScheduleError> {
    if i > MAX_PACKET_INDEX {
        return Err(ScheduleError::IndexOutOfRange(i));
    }
    let c = ceil_log2(i + 1);
    let pow = 1u64 << c;
    // (i + 1) * c <= (2^57 + 1) * 58, well inside u64.
    Ok(1 + (i + 1) * u64::from(c) - pow)
}

/// Number of packets fully transmitted after `s` pulls: `max{i : tau(i) <= s}`.
///
/// Random-access form (binary search). Simulations track the same quantity
/// incrementally with [`ScheduleCursor`].
pub fn iota(s: u64) -> u64 {
    // tau(i) >= i, so the answer lies in [0, min(s, MAX_PACKET_INDEX)].
    let mut lo = 0u64;
    let mut hi = s.min(MAX_PACKET_INDEX);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if tau_unchecked(mid) <= s {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

#[inline]
fn tau_unchecked(i: u64) -> u64 {
    let c = ceil_log2(i + 1);
    1 + (i + 1) * u64::from(c) - (1u64 << c)
}

/// Length in bits of the most recently completed packet after `s >= 1` pulls.
pub fn alpha(s: u64) -> Result<u32, ScheduleError> {
    if s == 0 {
        return Err(ScheduleError::ZeroPulls);
    }
    let i = iota(s);
    Ok((tau_unchecked(i) - tau_unchecked(i - 1)) as u32)
}

/// Number of samples behind the most recently completed packet's snapshot.
pub fn eta(s: u64) -> Result<u64, ScheduleError> {
    if s == 0 {
        return Err(ScheduleError::ZeroPulls);
    }
    Ok(1 + tau_unchecked(iota(s) - 1))
}

/// An `alpha`-bit round-up quantization level of a value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuantLevel {
    level: u64,
    bits: u32,
}

impl QuantLevel {
    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Bit `j` counted from the most significant end (`j = 0` is the MSB).
    pub fn msb_bit(&self, j: u32) -> bool {
        debug_assert!(j < self.bits);
        (self.level >> (self.bits - 1 - j)) & 1 == 1
    }

    /// The reconstruction `2^-bits * (level + 1)`, which rounds the input up
    /// to the next multiple of `2^-bits`.
    pub fn reconstruct(&self) -> f64 {
        (self.level + 1) as f64 / (1u64 << self.bits) as f64
    }
}

/// `Gamma_alpha(x) = ceil(2^alpha x) - 1` for `x` in `(0, 1]`, and `0` at `x = 0`.
pub fn quantize(alpha: u32, x: f64) -> Result<QuantLevel, ScheduleError> {
    if !(1..=MAX_QUANT_BITS).contains(&alpha) {
        return Err(ScheduleError::BitWidthOutOfRange(alpha));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(ScheduleError::ValueOutOfRange(x));
    }
    Ok(QuantLevel {
        level: gamma_level(alpha, x),
        bits: alpha,
    })
}

/// Raw quantizer level, also defined for `alpha = 0` (always 0).
///
/// Caller guarantees `x` in `[0, 1]` and `alpha <= MAX_QUANT_BITS`.
pub fn gamma_level(alpha: u32, x: f64) -> u64 {
    if x == 0.0 || alpha == 0 {
        return 0;
    }
    let scaled = x * (1u64 << alpha) as f64;
    libm::ceil(scaled) as u64 - 1
}

/// Position in the packet schedule: the packet containing the next pull.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScheduleCursor {
    packet_index: u64,
    packet_start: u64,
    packet_end: u64,
}

impl ScheduleCursor {
    /// Cursor on packet 1, which is the single pull 1.
    pub const fn first() -> Self {
        ScheduleCursor {
            packet_index: 1,
            packet_start: 1,
            packet_end: 1,
        }
    }

    /// Cursor on packet `i >= 1`, computed from [`tau`].
    pub fn at(i: u64) -> Result<Self, ScheduleError> {
        if i == 0 {
            return Err(ScheduleError::IndexOutOfRange(0));
        }
        Ok(ScheduleCursor {
            packet_index: i,
            packet_start: 1 + tau(i - 1)?,
            packet_end: tau(i)?,
        })
    }

    /// Cursor on the packet that pull `s >= 1` belongs to.
    pub fn containing(s: u64) -> Result<Self, ScheduleError> {
        if s == 0 {
            return Err(ScheduleError::ZeroPulls);
        }
        Self::at(iota(s - 1) + 1)
    }

    pub fn packet_index(&self) -> u64 {
        self.packet_index
    }

    pub fn packet_start(&self) -> u64 {
        self.packet_start
    }

    pub fn packet_end(&self) -> u64 {
        self.packet_end
    }

    pub fn packet_length(&self) -> u32 {
        (self.packet_end - self.packet_start + 1) as u32
    }

    /// Next packet. Its length is `1 + floor(log2(i + 1))`.
    pub fn advance(&self) -> Self {
        let next = self.packet_index + 1;
        let len = 1 + u64::from(floor_log2(next));
        ScheduleCursor {
            packet_index: next,
            packet_start: self.packet_end + 1,
            packet_end: self.packet_end + len,
        }
    }
}

impl Default for ScheduleCursor {
    fn default() -> Self {
        Self::first()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: linear scan over the closed form.
    fn iota_scan(s: u64) -> u64 {
        let mut i = 0;
        while tau(i + 1).unwrap() <= s {
            i += 1;
        }
        i
    }

    #[test]
    fn tau_values() {
        assert_eq!(tau(0), Ok(0));
        assert_eq!(tau(1), Ok(1));
        assert_eq!(tau(4), Ok(8));
        assert_eq!(tau(8), Ok(21));
        let table: [u64; 9] = [0, 1, 3, 5, 8, 11, 14, 17, 21];
        for (i, want) in table.iter().enumerate() {
            assert_eq!(tau(i as u64).unwrap(), *want);
        }
    }

    #[test]
    fn tau_range() {
        assert!(tau(MAX_PACKET_INDEX).is_ok());
        assert_eq!(
            tau(MAX_PACKET_INDEX + 1),
            Err(ScheduleError::IndexOutOfRange(MAX_PACKET_INDEX + 1))
        );
    }

    #[test]
    fn iota_values() {
        assert_eq!(iota(0), 0);
        assert_eq!(iota(5), 3);
        assert_eq!(iota(8), 4);
        for s in 0..5_000 {
            assert_eq!(iota(s), iota_scan(s), "s = {s}");
        }
    }

    #[test]
    fn alpha_eta_values() {
        assert_eq!(alpha(1), Ok(1));
        assert_eq!(alpha(3), Ok(2));
        assert_eq!(alpha(8), Ok(3));
        assert_eq!(eta(1), Ok(1));
        assert_eq!(eta(8), Ok(6));
        assert_eq!(eta(3), Ok(2));
        assert_eq!(alpha(0), Err(ScheduleError::ZeroPulls));
        assert_eq!(eta(0), Err(ScheduleError::ZeroPulls));
    }

    #[test]
    fn quantize_values() {
        assert_eq!(quantize(3, 0.0).unwrap().level(), 0);
        assert_eq!(quantize(2, 0.6).unwrap().level(), 2);
        assert_eq!(quantize(3, 1.0).unwrap().level(), 7);
        assert!(matches!(
            quantize(3, 1.5),
            Err(ScheduleError::ValueOutOfRange(_))
        ));
        assert!(matches!(
            quantize(3, -0.1),
            Err(ScheduleError::ValueOutOfRange(_))
        ));
        assert!(quantize(2, f64::NAN).is_err());
        assert_eq!(quantize(0, 0.5), Err(ScheduleError::BitWidthOutOfRange(0)));
        assert_eq!(quantize(53, 0.5), Err(ScheduleError::BitWidthOutOfRange(53)));
    }

    #[test]
    fn quantize_dyadic_boundaries() {
        // At x = j / 2^alpha the ceiling is exact: level j - 1, reconstruction x.
        for alpha in 1..=10u32 {
            let denom = 1u64 << alpha;
            for j in 1..=denom {
                let x = j as f64 / denom as f64;
                let q = quantize(alpha, x).unwrap();
                assert_eq!(q.level(), j - 1);
                assert_eq!(q.reconstruct(), x);
            }
        }
    }

    #[test]
    fn cursor_examples() {
        let c1 = ScheduleCursor::first();
        let c2 = c1.advance();
        assert_eq!(
            (c2.packet_index(), c2.packet_start(), c2.packet_end(), c2.packet_length()),
            (2, 2, 3, 2)
        );
        let c4 = ScheduleCursor::at(3).unwrap().advance();
        assert_eq!(
            (c4.packet_index(), c4.packet_start(), c4.packet_end(), c4.packet_length()),
            (4, 6, 8, 3)
        );
        let c7 = ScheduleCursor::at(7).unwrap();
        assert_eq!(c7.packet_end(), 17);
        let c8 = c7.advance();
        assert_eq!(
            (c8.packet_index(), c8.packet_start(), c8.packet_end(), c8.packet_length()),
            (8, 18, 21, 4)
        );
    }

    #[test]
    fn cursor_agrees_with_random_access() {
        let mut c = ScheduleCursor::first();
        for s in 1..20_000u64 {
            if s > c.packet_end() {
                c = c.advance();
            }
            assert_eq!(c, ScheduleCursor::containing(s).unwrap());
            assert_eq!(
                c.packet_length(),
                1 + floor_log2(c.packet_index()),
                "packet {}",
                c.packet_index()
            );
            if s == c.packet_end() {
                assert_eq!(iota(s), c.packet_index());
                assert_eq!(alpha(s).unwrap(), c.packet_length());
                assert_eq!(eta(s).unwrap(), c.packet_start());
            }
        }
    }

    #[test]
    fn log2_helpers() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(floor_log2(1), 0);
        assert_eq!(floor_log2(7), 2);
        assert_eq!(floor_log2(8), 3);
        assert_eq!(ceil_log2(1 << 40), 40);
        assert_eq!(ceil_log2((1 << 40) + 1), 41);
    }
}

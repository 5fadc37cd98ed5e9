//! Saturating s{6}{3} fixed point: 1 sign bit, 6 integer bits, 3 fraction bits.
//!
//! Every synaptic weight and bias the sampler sees lives in this format. The
//! raw two's-complement value occupies 10 bits, so the representable set is
//! `raw / 8` for `raw` in `-512..=511`, i.e. `[-64.0, 63.875]` in steps of
//! `0.125`.

use std::fmt;

use crate::error::{Error, Result};

pub const FRAC_BITS: u32 = 3;
pub const TOTAL_BITS: u32 = 10;
pub const RAW_MIN: i16 = -(1 << (TOTAL_BITS - 1));
pub const RAW_MAX: i16 = (1 << (TOTAL_BITS - 1)) - 1;
/// Value of one least-significant bit.
pub const LSB: f64 = 1.0 / (1u32 << FRAC_BITS) as f64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FixedPoint(i16);

impl FixedPoint {
    pub const ZERO: FixedPoint = FixedPoint(0);
    pub const ONE: FixedPoint = FixedPoint(1 << FRAC_BITS);
    pub const MIN: FixedPoint = FixedPoint(RAW_MIN);
    pub const MAX: FixedPoint = FixedPoint(RAW_MAX);

    /// Builds a value from its raw integer, rejecting anything outside 10 bits.
    pub fn from_raw(raw: i16) -> Result<Self> {
        if (RAW_MIN..=RAW_MAX).contains(&raw) {
            Ok(FixedPoint(raw))
        } else {
            Err(Error::invalid(format!(
                "raw fixed-point value {raw} outside [{RAW_MIN}, {RAW_MAX}]"
            )))
        }
    }

    /// Clamps a wide accumulator into range, the way a saturating adder would.
    pub fn saturating_from_raw(acc: i32) -> Self {
        FixedPoint(acc.clamp(RAW_MIN as i32, RAW_MAX as i32) as i16)
    }

    pub fn raw(self) -> i16 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 * LSB
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn saturating_add(self, other: Self) -> Self {
        Self::saturating_from_raw(self.0 as i32 + other.0 as i32)
    }

    pub fn saturating_neg(self) -> Self {
        Self::saturating_from_raw(-(self.0 as i32))
    }
}

impl fmt::Display for FixedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// Rounds to the nearest multiple of 0.125 (ties to the even raw value) and
/// saturates to `[-64.0, 63.875]`.
pub fn quantize(x: f64) -> Result<FixedPoint> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    let scaled = (x / LSB).clamp(RAW_MIN as f64, RAW_MAX as f64);
    Ok(FixedPoint(scaled.round_ties_even() as i16))
}

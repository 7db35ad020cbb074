//! Least-significant-bit payloads and nearest-codeword reconstruction.
//!
//! A node with budget `b` sends the low `b` bits of its `n`-bit reading.
//! The receiver picks, among all `n`-bit values sharing those low bits, the
//! one closest to a reference reading (ties go to the smaller value). This
//! recovers the true reading whenever it lies within
//! [`correctness_radius`] of the reference, including across carry
//! boundaries where splicing the reference's high bits would fail.

use crate::correlation::{BitBudget, MAX_WIDTH};
use crate::error::{Error, Result};

/// An unsigned `width`-bit sensor reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Reading {
    value: u64,
    width: u32,
}

impl Reading {
    pub fn new(value: u64, width: u32) -> Result<Self> {
        if width == 0 || width > MAX_WIDTH {
            return Err(Error::Width(format!("width must be in 1..={MAX_WIDTH}, got {width}")));
        }
        if value >> width != 0 {
            return Err(Error::Width(format!("{value} does not fit in {width} bits")));
        }
        Ok(Self { value, width })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn width(&self) -> u32 {
        self.width
    }
}

/// Low-order payload actually transmitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Codeword {
    payload: u64,
    bits: u32,
}

impl Codeword {
    pub fn new(payload: u64, bits: u32) -> Result<Self> {
        if bits > MAX_WIDTH || payload & !low_mask(bits) != 0 {
            return Err(Error::Width(format!("payload {payload} does not fit in {bits} bits")));
        }
        Ok(Self { payload, bits })
    }

    pub fn payload(&self) -> u64 {
        self.payload
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }
}

#[inline]
fn low_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

pub fn encode(reading: Reading, budget: BitBudget) -> Result<Codeword> {
    if budget.0 > reading.width {
        return Err(Error::Width(format!(
            "budget {} exceeds reading width {}",
            budget.0, reading.width
        )));
    }
    Ok(Codeword {
        payload: reading.value & low_mask(budget.0),
        bits: budget.0,
    })
}

/// Nearest value to `reference` that is congruent to the payload.
pub fn decode(reference: Reading, codeword: Codeword) -> Result<Reading> {
    let width = reference.width;
    if codeword.bits > width {
        return Err(Error::Width(format!(
            "codeword of {} bits exceeds reading width {width}",
            codeword.bits
        )));
    }
    let step = 1u64 << codeword.bits;
    let top = low_mask(width);
    let r = reference.value;
    let p = codeword.payload;

    // Largest candidate <= r and smallest candidate > r, when in range.
    let below = (r >= p).then(|| r - (r - p) % step);
    let above = match below {
        Some(b) => b.checked_add(step).filter(|&v| v <= top),
        None => Some(p),
    };
    let value = match (below, above) {
        (Some(b), Some(a)) => {
            if a - r < r - b {
                a
            } else {
                b
            }
        }
        (Some(b), None) => b,
        (None, Some(a)) => a,
        (None, None) => unreachable!("payload itself is always a candidate"),
    };
    Ok(Reading { value, width })
}

/// Largest `|true - reference|` for which [`decode`] is guaranteed exact.
pub fn correctness_radius(bits: u32) -> u64 {
    if bits == 0 {
        0
    } else {
        (1u64 << (bits - 1)) - 1
    }
}

//! Analytical cost tables: average unpack instruction counts per output
//! for each packing scheme, and register occupancy arithmetic.
//!
//! These are static model data used as golden values in tests and to
//! annotate benchmark reports; measured timings live in the bench harness.

use crate::error::{Error, Result};
use crate::packing::PackScheme;

/// Average instruction counts to produce one lookup index, by kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnpackCost {
    pub and_ops: f64,
    pub shift_ops: f64,
    pub or_ops: f64,
    pub shuffle_ops: f64,
}

impl UnpackCost {
    pub fn total(&self) -> f64 {
        self.and_ops + self.shift_ops + self.or_ops + self.shuffle_ops
    }
}

/// Per-output unpack cost of a packing scheme.
///
/// Scheme B halves the OR count by extracting two index nibbles per mask
/// pass; C removes the weight shift via the offline rotation; D combines
/// both.
pub fn unpack_cost(scheme: PackScheme) -> UnpackCost {
    match scheme {
        PackScheme::A => UnpackCost {
            and_ops: 2.0,
            shift_ops: 1.5,
            or_ops: 1.0,
            shuffle_ops: 1.0,
        },
        PackScheme::B => UnpackCost {
            and_ops: 2.0,
            shift_ops: 1.0,
            or_ops: 0.5,
            shuffle_ops: 1.0,
        },
        PackScheme::C => UnpackCost {
            and_ops: 2.0,
            shift_ops: 0.5,
            or_ops: 1.0,
            shuffle_ops: 1.0,
        },
        PackScheme::D => UnpackCost {
            and_ops: 2.0,
            shift_ops: 0.5,
            or_ops: 0.5,
            shuffle_ops: 1.0,
        },
    }
}

/// How many values of a given bit width fit in a vector register.
pub fn values_per_register(register_bits: u32, value_bits: u32) -> Result<u32> {
    if value_bits == 0 || !register_bits.is_multiple_of(value_bits) {
        return Err(Error::NonDivisible {
            register_bits,
            value_bits,
        });
    }
    Ok(register_bits / value_bits)
}

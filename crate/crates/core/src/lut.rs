//! Construction of the lookup tables that replace multiply-accumulate:
//! per-pair product tables (16 entries at 2 bits, generalized to 3/4 bits)
//! and the per-quad dot-product table with 65,536 entries.
//!
//! Entries can be 8-bit integers (the layout the in-register kernels
//! shuffle from), 32-bit integers, or f32 for codebook quantizers whose
//! levels are not integral. The 8-bit domain enforces that no precomputed
//! result overflows; wider domains lift that assumption.

use crate::error::{Error, Result};
use crate::quant::ValueMap;

/// Storage domain of table entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryDomain {
    Int8,
    Int32,
    Real,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LutEntries {
    I8(Vec<i8>),
    I32(Vec<i32>),
    F32(Vec<f32>),
}

impl LutEntries {
    pub fn len(&self) -> usize {
        match self {
            LutEntries::I8(v) => v.len(),
            LutEntries::I32(v) => v.len(),
            LutEntries::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn domain(&self) -> EntryDomain {
        match self {
            LutEntries::I8(_) => EntryDomain::Int8,
            LutEntries::I32(_) => EntryDomain::Int32,
            LutEntries::F32(_) => EntryDomain::Real,
        }
    }
}

/// A precomputed product (arity 1) or group dot-product (arity 4) table.
///
/// The value maps used at build time travel with the table; kernels use
/// them for scalar remainder lanes so every path draws values from the
/// same source.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    arity: u8,
    index_bits: u8,
    entries: LutEntries,
    w_map: ValueMap,
    a_map: ValueMap,
}

impl LookupTable {
    /// 1 for per-pair product tables, 4 for per-quad dot-product tables.
    pub fn arity(&self) -> u8 {
        self.arity
    }

    pub fn index_bits(&self) -> u8 {
        self.index_bits
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn domain(&self) -> EntryDomain {
        self.entries.domain()
    }

    pub fn entries(&self) -> &LutEntries {
        &self.entries
    }

    pub fn w_map(&self) -> &ValueMap {
        &self.w_map
    }

    pub fn a_map(&self) -> &ValueMap {
        &self.a_map
    }

    /// Code bit width of each operand feeding this table.
    pub fn operand_bits(&self) -> u8 {
        match self.arity {
            1 => self.index_bits / 2,
            _ => 2,
        }
    }

    /// Integer entry at an index; only for the integer domains.
    pub fn entry_i32(&self, index: usize) -> i32 {
        match &self.entries {
            LutEntries::I8(v) => i32::from(v[index]),
            LutEntries::I32(v) => v[index],
            LutEntries::F32(_) => panic!("entry_i32 on a real-entry table"),
        }
    }

    pub fn entry_f32(&self, index: usize) -> f32 {
        match &self.entries {
            LutEntries::F32(v) => v[index],
            _ => panic!("entry_f32 on an integer-entry table"),
        }
    }

    pub fn as_i8(&self) -> Option<&[i8]> {
        match &self.entries {
            LutEntries::I8(v) => Some(v),
            _ => None,
        }
    }

    /// Largest absolute entry value; bounds how many 8-bit lane
    /// accumulations the kernel may perform before widening.
    pub fn max_abs_entry(&self) -> i64 {
        match &self.entries {
            LutEntries::I8(v) => v.iter().map(|&e| i64::from(e).abs()).max().unwrap_or(0),
            LutEntries::I32(v) => v.iter().map(|&e| i64::from(e).abs()).max().unwrap_or(0),
            LutEntries::F32(v) => v.iter().map(|&e| e.abs().ceil() as i64).max().unwrap_or(0),
        }
    }
}

fn int_entries(products: Vec<i64>, domain: EntryDomain) -> Result<LutEntries> {
    match domain {
        EntryDomain::Int8 => {
            let mut out = Vec::with_capacity(products.len());
            for (index, &v) in products.iter().enumerate() {
                if !(-128..=127).contains(&v) {
                    return Err(Error::Int8Overflow { index, value: v });
                }
                out.push(v as i8);
            }
            Ok(LutEntries::I8(out))
        }
        EntryDomain::Int32 => {
            let mut out = Vec::with_capacity(products.len());
            for &v in &products {
                if v < i64::from(i32::MIN) || v > i64::from(i32::MAX) {
                    return Err(Error::IntegerOverflow {
                        context: "lookup table entry",
                    });
                }
                out.push(v as i32);
            }
            Ok(LutEntries::I32(out))
        }
        EntryDomain::Real => unreachable!("real entries are built directly"),
    }
}

/// Builds the per-pair product table for `bits`-bit codes:
/// `entries[(i << bits) | j] = w_values(i) * a_values(j)` over raw codes.
#[allow(clippy::needless_range_loop)] // i and j are the index fields
pub fn build_lut_general(
    bits: u8,
    w_values: &ValueMap,
    a_values: &ValueMap,
    domain: EntryDomain,
) -> Result<LookupTable> {
    if !matches!(bits, 2..=4) {
        return Err(Error::UnsupportedBits(bits));
    }
    if w_values.bits() != bits || a_values.bits() != bits {
        return Err(Error::LutMismatch(format!(
            "value maps are {}/{} bit, table wants {bits}",
            w_values.bits(),
            a_values.bits()
        )));
    }
    let n = 1usize << bits;
    // integer domains require integer-valued maps; the real domain forms
    // products in f32 so table entries match scalar f32 products bit for bit
    let entries = match domain {
        EntryDomain::Real => {
            let w_vals = w_values.values();
            let a_vals = a_values.values();
            let mut products = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    products.push(w_vals[i] * a_vals[j]);
                }
            }
            LutEntries::F32(products)
        }
        _ => {
            let w_vals = w_values.integer_values()?;
            let a_vals = a_values.integer_values()?;
            let mut products = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    products.push(i64::from(w_vals[i]) * i64::from(a_vals[j]));
                }
            }
            int_entries(products, domain)?
        }
    };
    Ok(LookupTable {
        arity: 1,
        index_bits: 2 * bits,
        entries,
        w_map: w_values.clone(),
        a_map: a_values.clone(),
    })
}

/// The 16-entry table for 2-bit codes: `entries[(i << 2) | j]`.
pub fn build_lut16(
    w_values: &ValueMap,
    a_values: &ValueMap,
    domain: EntryDomain,
) -> Result<LookupTable> {
    if w_values.bits() != 2 || a_values.bits() != 2 {
        return Err(Error::LutMismatch(
            "16-entry tables take 2-bit value maps".into(),
        ));
    }
    build_lut_general(2, w_values, a_values, domain)
}

/// The 65,536-entry table: for every (weight byte, activation byte) pair
/// under the natural layout, the dot product of the four code pairs.
pub fn build_lut65k(
    w_values: &ValueMap,
    a_values: &ValueMap,
    domain: EntryDomain,
) -> Result<LookupTable> {
    if w_values.bits() != 2 || a_values.bits() != 2 {
        return Err(Error::LutMismatch(
            "65k tables take 2-bit value maps".into(),
        ));
    }
    let entries = match domain {
        EntryDomain::Real => {
            let w_vals = w_values.values();
            let a_vals = a_values.values();
            let mut products = Vec::with_capacity(1 << 16);
            for w_byte in 0..256usize {
                for a_byte in 0..256usize {
                    let mut acc = 0.0f32;
                    for j in 0..4 {
                        acc += w_vals[(w_byte >> (2 * j)) & 3] * a_vals[(a_byte >> (2 * j)) & 3];
                    }
                    products.push(acc);
                }
            }
            LutEntries::F32(products)
        }
        _ => {
            let w_vals = w_values.integer_values()?;
            let a_vals = a_values.integer_values()?;
            let mut products = Vec::with_capacity(1 << 16);
            for w_byte in 0..256usize {
                for a_byte in 0..256usize {
                    let mut sum = 0i64;
                    for j in 0..4 {
                        sum += i64::from(w_vals[(w_byte >> (2 * j)) & 3])
                            * i64::from(a_vals[(a_byte >> (2 * j)) & 3]);
                    }
                    products.push(sum);
                }
            }
            int_entries(products, domain)?
        }
    };
    Ok(LookupTable {
        arity: 4,
        index_bits: 16,
        entries,
        w_map: w_values.clone(),
        a_map: a_values.clone(),
    })
}

/// Storage footprint of the per-pair table for a bit width, assuming
/// 8-bit entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LutStorage {
    pub index_bits: u32,
    pub entries: u32,
    pub size_bits: u32,
    pub vector_registers_256b: u32,
    pub fits_l1: bool,
}

/// How the per-pair table scales with operand bit width.
pub fn lut_storage(bits: u8) -> Result<LutStorage> {
    if !matches!(bits, 2..=4) {
        return Err(Error::UnsupportedBits(bits));
    }
    let index_bits = 2 * u32::from(bits);
    let entries = 1u32 << index_bits;
    let size_bits = entries * 8;
    Ok(LutStorage {
        index_bits,
        entries,
        size_bits,
        vector_registers_256b: size_bits.div_ceil(256),
        fits_l1: size_bits / 8 <= 32 * 1024,
    })
}

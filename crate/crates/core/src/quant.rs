//! Uniform and codebook quantization of real matrices to sub-byte codes.
//!
//! Codes are stored as unsigned bit patterns regardless of signedness: a
//! signed code `c` is stored as `c + 2^(b-1)`, so packing never has to care
//! about sign. The value map ([`QuantParams`] or [`Codebook`]) carries the
//! signedness and converts raw codes back to real values.
//!
//! Uniform quantization maps `x` to `clip(round(scale * x + zero_point))`
//! with round-half-away-from-zero, clipped to `[-2^(b-1), 2^(b-1)-1]` when
//! signed and `[0, 2^b-1]` when unsigned. All arithmetic runs in f64 so the
//! round-trip bound `|x - dequantize(quantize(x))| <= 0.5/|scale|` holds
//! without f32 rounding slop.

use crate::error::{Error, Result};

/// Parameters of a uniform (linear) quantizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    /// Scale factor applied to the real value before rounding.
    pub scale: f32,
    /// Real value that code 0 maps to (need not be an integer).
    pub zero_point: f32,
    /// Bit width of the codes, one of 2, 3, 4.
    pub bits: u8,
    /// Whether codes are interpreted as signed integers.
    pub signed: bool,
}

impl QuantParams {
    pub fn new(scale: f32, zero_point: f32, bits: u8, signed: bool) -> Result<Self> {
        if !scale.is_finite() || scale == 0.0 {
            return Err(Error::InvalidScale(scale));
        }
        if !zero_point.is_finite() {
            return Err(Error::InvalidZeroPoint(zero_point));
        }
        check_bits(bits)?;
        Ok(Self {
            scale,
            zero_point,
            bits,
            signed,
        })
    }

    /// Inclusive range of logical (signed or unsigned) codes.
    pub fn code_range(&self) -> (i32, i32) {
        if self.signed {
            (-(1 << (self.bits - 1)), (1 << (self.bits - 1)) - 1)
        } else {
            (0, (1 << self.bits) - 1)
        }
    }

    /// Offset added to a logical code to obtain its raw storage pattern.
    pub fn raw_offset(&self) -> i32 {
        if self.signed {
            1 << (self.bits - 1)
        } else {
            0
        }
    }

    /// Raw storage pattern for a logical code.
    pub fn raw_code(&self, logical: i32) -> Result<u8> {
        let (lo, hi) = self.code_range();
        if logical < lo || logical > hi {
            return Err(Error::CodeOutOfRange {
                index: 0,
                code: i64::from(logical),
                bits: self.bits,
            });
        }
        Ok((logical + self.raw_offset()) as u8)
    }

    /// Logical code for a raw storage pattern.
    pub fn logical_code(&self, raw: u8) -> i32 {
        i32::from(raw) - self.raw_offset()
    }

    fn value_of_raw_f64(&self, raw: u8) -> f64 {
        let logical = f64::from(self.logical_code(raw));
        (logical - f64::from(self.zero_point)) / f64::from(self.scale)
    }
}

/// Non-uniform quantizer: an arbitrary real level per code.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    bits: u8,
    levels: Vec<f32>,
}

impl Codebook {
    pub fn new(bits: u8, levels: Vec<f32>) -> Result<Self> {
        check_bits(bits)?;
        let expected = 1usize << bits;
        if levels.len() != expected {
            return Err(Error::CodebookSize {
                bits,
                expected,
                got: levels.len(),
            });
        }
        if let Some(index) = levels.iter().position(|l| !l.is_finite()) {
            return Err(Error::CodebookNonFinite { index });
        }
        Ok(Self { bits, levels })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn levels(&self) -> &[f32] {
        &self.levels
    }
}

/// Map from raw codes to real values: either a uniform quantizer or a
/// codebook of explicit levels.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueMap {
    Uniform(QuantParams),
    Codebook(Codebook),
}

impl ValueMap {
    pub fn bits(&self) -> u8 {
        match self {
            ValueMap::Uniform(p) => p.bits,
            ValueMap::Codebook(c) => c.bits,
        }
    }

    pub fn num_codes(&self) -> usize {
        1 << self.bits()
    }

    fn value_f64(&self, raw: u8) -> f64 {
        match self {
            ValueMap::Uniform(p) => p.value_of_raw_f64(raw),
            ValueMap::Codebook(c) => f64::from(c.levels[usize::from(raw)]),
        }
    }

    /// Real value of a raw code.
    pub fn value(&self, raw: u8) -> Result<f32> {
        if usize::from(raw) >= self.num_codes() {
            return Err(Error::CodeOutOfRange {
                index: 0,
                code: i64::from(raw),
                bits: self.bits(),
            });
        }
        Ok(self.value_f64(raw) as f32)
    }

    /// All `2^b` values, indexed by raw code.
    pub fn values(&self) -> Vec<f32> {
        (0..self.num_codes())
            .map(|raw| self.value_f64(raw as u8) as f32)
            .collect()
    }

    /// All values as exact integers, or an error if any value is fractional
    /// or outside the i32 range. Integer-entry tables and the exact integer
    /// GEMM mode require this.
    pub fn integer_values(&self) -> Result<Vec<i32>> {
        (0..self.num_codes())
            .map(|raw| {
                let v = self.value_f64(raw as u8);
                if v.fract() != 0.0 || v < f64::from(i32::MIN) || v > f64::from(i32::MAX) {
                    Err(Error::NonIntegerValueMap {
                        code: raw as u8,
                        value: v,
                    })
                } else {
                    Ok(v as i32)
                }
            })
            .collect()
    }

    /// Raw code whose value is exactly zero, if one exists. Used as the
    /// default pad code so padded positions do not disturb dot products.
    pub fn zero_code(&self) -> Option<u8> {
        (0..self.num_codes()).find_map(|raw| {
            if self.value_f64(raw as u8) == 0.0 {
                Some(raw as u8)
            } else {
                None
            }
        })
    }
}

/// Real value represented by a logical code under a value map.
///
/// For uniform maps the code is the signed/unsigned logical code; for
/// codebooks it is the level index. Out-of-range codes are rejected.
pub fn code_value(code: i32, map: &ValueMap) -> Result<f32> {
    match map {
        ValueMap::Uniform(p) => {
            let raw = p.raw_code(code)?;
            Ok(p.value_of_raw_f64(raw) as f32)
        }
        ValueMap::Codebook(c) => {
            if code < 0 || code >= (1 << c.bits) {
                return Err(Error::CodeOutOfRange {
                    index: 0,
                    code: i64::from(code),
                    bits: c.bits,
                });
            }
            Ok(c.levels[code as usize])
        }
    }
}

/// Dense row-major matrix of f32 values.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "expected {rows}x{cols} = {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Row-major matrix of raw (unsigned bit pattern) codes, one byte per
/// logical value. This is the unpacked intermediate between real tensors
/// and [`crate::packing::PackedMatrix`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeTensor {
    rows: usize,
    cols: usize,
    bits: u8,
    codes: Vec<u8>,
}

impl CodeTensor {
    pub fn new(rows: usize, cols: usize, bits: u8, codes: Vec<u8>) -> Result<Self> {
        check_bits(bits)?;
        if codes.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "expected {rows}x{cols} = {} codes, got {}",
                rows * cols,
                codes.len()
            )));
        }
        let max = (1u16 << bits) - 1;
        for (index, &code) in codes.iter().enumerate() {
            if u16::from(code) > max {
                return Err(Error::CodeOutOfRange {
                    index,
                    code: i64::from(code),
                    bits,
                });
            }
        }
        Ok(Self {
            rows,
            cols,
            bits,
            codes,
        })
    }

    /// Builds a tensor from logical codes under a uniform quantizer.
    pub fn from_logical(
        rows: usize,
        cols: usize,
        p: &QuantParams,
        logical: &[i32],
    ) -> Result<Self> {
        let codes = logical
            .iter()
            .map(|&c| p.raw_code(c))
            .collect::<Result<Vec<u8>>>()?;
        Self::new(rows, cols, p.bits, codes)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.codes[r * self.cols + c]
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn transpose(&self) -> CodeTensor {
        let mut codes = vec![0u8; self.codes.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                codes[c * self.rows + r] = self.codes[r * self.cols + c];
            }
        }
        CodeTensor {
            rows: self.cols,
            cols: self.rows,
            bits: self.bits,
            codes,
        }
    }
}

/// Quantizes a real matrix to raw codes under a uniform quantizer.
pub fn quantize_uniform(x: &RealMatrix, p: &QuantParams) -> Result<CodeTensor> {
    let (lo, hi) = p.code_range();
    let offset = p.raw_offset();
    let scale = f64::from(p.scale);
    let zero = f64::from(p.zero_point);
    let mut codes = Vec::with_capacity(x.data.len());
    for (index, &v) in x.data.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteInput { index });
        }
        // f64::round is round-half-away-from-zero, which is the rounding
        // rule fixed across every implementation of this pipeline.
        let logical = (scale * f64::from(v) + zero)
            .round()
            .clamp(f64::from(lo), f64::from(hi)) as i32;
        codes.push((logical + offset) as u8);
    }
    Ok(CodeTensor {
        rows: x.rows,
        cols: x.cols,
        bits: p.bits,
        codes,
    })
}

/// Inverse of [`quantize_uniform`]: maps each code back to `(c - z)/s`.
pub fn dequantize_uniform(c: &CodeTensor, p: &QuantParams) -> Result<RealMatrix> {
    if c.bits != p.bits {
        return Err(Error::ShapeMismatch(format!(
            "code tensor holds {}-bit codes, quantizer expects {}-bit",
            c.bits, p.bits
        )));
    }
    let data = c
        .codes
        .iter()
        .map(|&raw| p.value_of_raw_f64(raw) as f32)
        .collect();
    Ok(RealMatrix {
        rows: c.rows,
        cols: c.cols,
        data,
    })
}

fn check_bits(bits: u8) -> Result<()> {
    if matches!(bits, 2..=4) {
        Ok(())
    } else {
        Err(Error::UnsupportedBits(bits))
    }
}

//! GEMM engines.
//!
//! `gemm_reference_real` and `gemm_reference_quant` are deliberately plain
//! triple loops with ascending reduction order: they are the ground truth
//! every lookup kernel is checked against, and double as the internal
//! `ref_f32` / `ref_i8` baselines in benchmarks.
//!
//! `gemm_lut16` replaces multiply-accumulate with 16-entry table lookups.
//! On x86-64 with AVX2 the table lives broadcast in a 256-bit register and
//! 32 lookups issue per shuffle; everywhere else (or when forced) a scalar
//! path runs the same index arithmetic byte by byte. Integer outputs are
//! bit-identical across paths and to the reference.
//!
//! `gemm_lut65k` looks up 4-element dot products at a time from a 64 KiB
//! cache-resident table indexed by a (weight byte, activation byte) pair.
//!
//! Problems are stated as C[M x K] = A[M x N] x B[N x K]; kernels stream
//! both operands along the shared dimension N, so the reduction axis is
//! the vectorized one, and walk output columns at the macro level.

mod scalar;

#[cfg(target_arch = "x86_64")]
mod avx2;

pub mod instrument;

use crate::error::{Error, Result};
use crate::lut::LookupTable;
use crate::packing::{OperandRole, PackScheme, PackedMatrix};
use crate::quant::{CodeTensor, RealMatrix, ValueMap};

/// Benchmark shape triple: C[M x K] = A[M x N] x B[N x K].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GemmProblem {
    pub m: usize,
    pub n: usize,
    pub k: usize,
}

impl GemmProblem {
    pub fn new(m: usize, n: usize, k: usize) -> Result<Self> {
        if m == 0 || n == 0 || k == 0 {
            return Err(Error::ShapeMismatch(format!(
                "all GEMM dimensions must be >= 1, got ({m}, {n}, {k})"
            )));
        }
        Ok(Self { m, n, k })
    }

    pub fn flops(&self) -> u64 {
        2 * self.m as u64 * self.n as u64 * self.k as u64
    }
}

/// Accumulator output of a GEMM: exact 32-bit integers or f32.
#[derive(Debug, Clone, PartialEq)]
pub enum AccumData {
    Int(Vec<i32>),
    Real(Vec<f32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccumMatrix {
    rows: usize,
    cols: usize,
    data: AccumData,
}

impl AccumMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &AccumData {
        &self.data
    }

    pub fn as_int(&self) -> Option<&[i32]> {
        match &self.data {
            AccumData::Int(v) => Some(v),
            AccumData::Real(_) => None,
        }
    }

    pub fn as_real(&self) -> Option<&[f32]> {
        match &self.data {
            AccumData::Real(v) => Some(v),
            AccumData::Int(_) => None,
        }
    }
}

/// Accumulation mode of the quantized reference GEMM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccumMode {
    Int,
    Real,
}

/// Kernel execution options.
#[derive(Debug, Clone, Copy)]
pub struct KernelOpts {
    /// Never take the in-register vector path.
    pub force_scalar: bool,
    /// Allow the per-lane scalar remainder path when the reduction length
    /// is ragged and no zero-valued pad code exists.
    pub allow_scalar_remainder: bool,
}

impl Default for KernelOpts {
    fn default() -> Self {
        Self {
            force_scalar: false,
            allow_scalar_remainder: true,
        }
    }
}

/// Which implementation a kernel invocation will run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelPath {
    Vector,
    Scalar,
}

impl KernelPath {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelPath::Vector => "vector",
            KernelPath::Scalar => "scalar",
        }
    }
}

/// Reports whether the 128-bit in-register table-lookup path is available
/// under the given options. Both paths produce identical integer outputs.
pub fn select_kernel_path(opts: &KernelOpts) -> KernelPath {
    if opts.force_scalar {
        return KernelPath::Scalar;
    }
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            return KernelPath::Vector;
        }
    }
    KernelPath::Scalar
}

/// FP32 reference GEMM: plain triple loop, ascending-n summation.
pub fn gemm_reference_real(a: &RealMatrix, b: &RealMatrix) -> Result<AccumMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::ShapeMismatch(format!(
            "A is {}x{}, B is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let (m, n, k) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0f32; m * k];
    for mi in 0..m {
        for ki in 0..k {
            let mut acc = 0.0f32;
            for ni in 0..n {
                acc += a.get(mi, ni) * b.get(ni, ki);
            }
            out[mi * k + ki] = acc;
        }
    }
    Ok(AccumMatrix {
        rows: m,
        cols: k,
        data: AccumData::Real(out),
    })
}

/// Quantized reference GEMM over unpacked codes: the oracle for every
/// lookup kernel, and the `ref_i8` baseline in integer mode.
///
/// Integer mode requires integer-valued maps and accumulates exactly;
/// real mode multiplies f32 values with ascending-n summation.
pub fn gemm_reference_quant(
    codes_a: &CodeTensor,
    codes_w: &CodeTensor,
    a_values: &ValueMap,
    w_values: &ValueMap,
    mode: AccumMode,
) -> Result<AccumMatrix> {
    if codes_a.cols() != codes_w.rows() {
        return Err(Error::ShapeMismatch(format!(
            "A is {}x{}, W is {}x{}",
            codes_a.rows(),
            codes_a.cols(),
            codes_w.rows(),
            codes_w.cols()
        )));
    }
    if codes_a.bits() != a_values.bits() || codes_w.bits() != w_values.bits() {
        return Err(Error::ShapeMismatch(
            "code tensor bit width does not match its value map".into(),
        ));
    }
    let (m, n, k) = (codes_a.rows(), codes_a.cols(), codes_w.cols());
    let a_codes = codes_a.codes();
    let w_codes = codes_w.codes();
    match mode {
        AccumMode::Int => {
            let a_vals = a_values.integer_values()?;
            let w_vals = w_values.integer_values()?;
            let mut out = vec![0i32; m * k];
            for mi in 0..m {
                let a_row = &a_codes[mi * n..(mi + 1) * n];
                for ki in 0..k {
                    let mut acc = 0i64;
                    for ni in 0..n {
                        let w = i64::from(w_vals[usize::from(w_codes[ni * k + ki])]);
                        let a = i64::from(a_vals[usize::from(a_row[ni])]);
                        acc += w * a;
                    }
                    out[mi * k + ki] = i32::try_from(acc).map_err(|_| Error::IntegerOverflow {
                        context: "32-bit GEMM accumulator",
                    })?;
                }
            }
            Ok(AccumMatrix {
                rows: m,
                cols: k,
                data: AccumData::Int(out),
            })
        }
        AccumMode::Real => {
            let a_vals = a_values.values();
            let w_vals = w_values.values();
            let mut out = vec![0.0f32; m * k];
            for mi in 0..m {
                let a_row = &a_codes[mi * n..(mi + 1) * n];
                for ki in 0..k {
                    let mut acc = 0.0f32;
                    for ni in 0..n {
                        let w = w_vals[usize::from(w_codes[ni * k + ki])];
                        let a = a_vals[usize::from(a_row[ni])];
                        acc += w * a;
                    }
                    out[mi * k + ki] = acc;
                }
            }
            Ok(AccumMatrix {
                rows: m,
                cols: k,
                data: AccumData::Real(out),
            })
        }
    }
}

/// Validation shared by the packed-operand kernels.
fn validate_packed_pair(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
    problem: &GemmProblem,
    bits: u8,
) -> Result<()> {
    if packed_a.role() != OperandRole::Activation {
        return Err(Error::WrongRole {
            expected: "activation",
        });
    }
    if packed_w.role() != OperandRole::Weight {
        return Err(Error::WrongRole { expected: "weight" });
    }
    if packed_a.bits() != bits || packed_w.bits() != bits {
        return Err(Error::UnsupportedBits(packed_a.bits().max(packed_w.bits())));
    }
    if packed_a.rows() != problem.m
        || packed_a.cols() != problem.n
        || packed_w.rows() != problem.k
        || packed_w.cols() != problem.n
    {
        return Err(Error::ShapeMismatch(format!(
            "problem ({}, {}, {}) vs packed A {}x{} and packed W {}x{}",
            problem.m,
            problem.n,
            problem.k,
            packed_a.rows(),
            packed_a.cols(),
            packed_w.rows(),
            packed_w.cols()
        )));
    }
    Ok(())
}

/// Whether padded lanes contribute exactly zero to dot products, i.e. the
/// product of the two pad-code values is zero.
fn pad_product_is_zero(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
    lut: &LookupTable,
) -> bool {
    let w = lut.w_map().value(packed_w.pad_code()).unwrap_or(f32::NAN);
    let a = lut.a_map().value(packed_a.pad_code()).unwrap_or(f32::NAN);
    w * a == 0.0
}

/// The 16-entry lookup GEMM for 2-bit operands.
///
/// Integer-entry tables produce outputs bit-identical to
/// [`gemm_reference_quant`]; real-entry tables run the scalar path with a
/// fixed pairwise reduction tree (deterministic, within 1e-5 relative of
/// the ascending-order reference). The weight matrix must be packed with
/// the kernel's scheme: C/D variants expect the rotated layout and skip
/// the in-loop weight shift, A/B variants shift.
pub fn gemm_lut16(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
    lut: &LookupTable,
    problem: &GemmProblem,
    scheme: PackScheme,
    opts: &KernelOpts,
) -> Result<AccumMatrix> {
    validate_packed_pair(packed_a, packed_w, problem, 2)?;
    if lut.arity() != 1 || lut.index_bits() != 4 {
        return Err(Error::LutMismatch(format!(
            "16-entry kernel needs an arity-1, 4-index-bit table, got arity {} with {} index bits",
            lut.arity(),
            lut.index_bits()
        )));
    }
    if packed_w.scheme() != scheme {
        return Err(Error::SchemeMismatch {
            kernel: scheme.letter(),
            packed: packed_w.scheme().letter(),
        });
    }
    // Bound N so i32 lane accumulators can never wrap.
    if problem.n as i64 * lut.max_abs_entry().max(1) > i64::from(i32::MAX) / 2 {
        return Err(Error::IntegerOverflow {
            context: "lookup accumulator bound",
        });
    }

    let include_pad = !packed_a.has_padding() || pad_product_is_zero(packed_a, packed_w, lut);

    match lut.entries() {
        crate::lut::LutEntries::F32(entries) => Ok(AccumMatrix {
            rows: problem.m,
            cols: problem.k,
            data: AccumData::Real(scalar::lut16_real(
                packed_a, packed_w, entries, scheme, problem,
            )),
        }),
        _ => {
            let mut entries16 = [0i32; 16];
            for (i, e) in entries16.iter_mut().enumerate() {
                *e = lut.entry_i32(i);
            }
            #[cfg(target_arch = "x86_64")]
            {
                if select_kernel_path(opts) == KernelPath::Vector {
                    if let Some(bytes) = lut.as_i8() {
                        let mut table = [0i8; 16];
                        table.copy_from_slice(bytes);
                        // Safety: AVX2 availability was just detected.
                        let out = unsafe {
                            avx2::lut16_int_avx2(
                                packed_a,
                                packed_w,
                                &table,
                                &entries16,
                                scheme,
                                problem,
                                include_pad,
                            )
                        };
                        return Ok(AccumMatrix {
                            rows: problem.m,
                            cols: problem.k,
                            data: AccumData::Int(out),
                        });
                    }
                }
            }
            let _ = opts;
            Ok(AccumMatrix {
                rows: problem.m,
                cols: problem.k,
                data: AccumData::Int(scalar::lut16_int(
                    packed_a,
                    packed_w,
                    &entries16,
                    scheme,
                    problem,
                    include_pad,
                )),
            })
        }
    }
}

/// Scalar per-pair lookup GEMM for 2/3/4-bit operands in the natural
/// layout, backed by a `2^(2b)`-entry table. The 2-bit case matches
/// [`gemm_lut16`] exactly; wider codes run scalar only.
pub fn gemm_lut_general(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
    lut: &LookupTable,
    problem: &GemmProblem,
    _opts: &KernelOpts,
) -> Result<AccumMatrix> {
    let bits = lut.operand_bits();
    validate_packed_pair(packed_a, packed_w, problem, bits)?;
    if lut.arity() != 1 || lut.index_bits() != 2 * bits {
        return Err(Error::LutMismatch(format!(
            "general kernel needs an arity-1 table with {} index bits",
            2 * bits
        )));
    }
    if packed_w.rotated_layout() {
        return Err(Error::SchemeMismatch {
            kernel: PackScheme::A.letter(),
            packed: packed_w.scheme().letter(),
        });
    }
    if problem.n as i64 * lut.max_abs_entry().max(1) > i64::from(i32::MAX) / 2 {
        return Err(Error::IntegerOverflow {
            context: "lookup accumulator bound",
        });
    }
    match lut.entries() {
        crate::lut::LutEntries::F32(entries) => Ok(AccumMatrix {
            rows: problem.m,
            cols: problem.k,
            data: AccumData::Real(scalar::lut_general_real(
                packed_a, packed_w, entries, bits, problem,
            )),
        }),
        _ => Ok(AccumMatrix {
            rows: problem.m,
            cols: problem.k,
            data: AccumData::Int(scalar::lut_general_int(
                packed_a, packed_w, lut, bits, problem,
            )?),
        }),
    }
}

/// The 65,536-entry lookup GEMM: one table access per group of four
/// 2-bit code pairs. Requires natural-layout operands; rotated weights
/// must be un-rotated first.
///
/// Ragged N uses zero-valued pad codes when both maps provide them,
/// otherwise a scalar remainder path (rejected when disabled).
pub fn gemm_lut65k(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
    lut: &LookupTable,
    problem: &GemmProblem,
    opts: &KernelOpts,
) -> Result<AccumMatrix> {
    validate_packed_pair(packed_a, packed_w, problem, 2)?;
    if lut.arity() != 4 || lut.index_bits() != 16 {
        return Err(Error::LutMismatch(format!(
            "65k kernel needs an arity-4, 16-index-bit table, got arity {} with {} index bits",
            lut.arity(),
            lut.index_bits()
        )));
    }
    if packed_w.rotated_layout() {
        return Err(Error::SchemeMismatch {
            kernel: PackScheme::A.letter(),
            packed: packed_w.scheme().letter(),
        });
    }
    if problem.n as i64 * lut.max_abs_entry().max(1) > i64::from(i32::MAX) / 2 {
        return Err(Error::IntegerOverflow {
            context: "lookup accumulator bound",
        });
    }
    let include_pad = !packed_a.has_padding() || pad_product_is_zero(packed_a, packed_w, lut);
    if !include_pad && !opts.allow_scalar_remainder {
        return Err(Error::RemainderPathDisabled { n: problem.n });
    }
    match lut.entries() {
        crate::lut::LutEntries::F32(entries) => Ok(AccumMatrix {
            rows: problem.m,
            cols: problem.k,
            data: AccumData::Real(scalar::lut65k_real(
                packed_a,
                packed_w,
                entries,
                lut,
                problem,
                include_pad,
            )?),
        }),
        _ => Ok(AccumMatrix {
            rows: problem.m,
            cols: problem.k,
            data: AccumData::Int(scalar::lut65k_int(
                packed_a,
                packed_w,
                lut,
                problem,
                include_pad,
            )?),
        }),
    }
}

/// Exact sum of integer lane partials by successive halving: the upper
/// half is folded onto the lower half until one lane remains, the same
/// extract/add/shuffle/add shape the vector reduction uses.
pub fn horizontal_reduce(lanes: &[i64]) -> i64 {
    let mut buf = lanes.to_vec();
    let mut len = buf.len();
    while len > 1 {
        let half = len.div_ceil(2);
        for i in 0..len - half {
            buf[i] += buf[half + i];
        }
        len = half;
    }
    buf.first().copied().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lut::{build_lut16, EntryDomain};
    use crate::packing::pack_gemm_weights;
    use crate::quant::QuantParams;

    fn signed2() -> ValueMap {
        ValueMap::Uniform(QuantParams::new(1.0, 0.0, 2, true).unwrap())
    }

    #[test]
    fn reference_real_basics() {
        let a = RealMatrix::new(1, 1, vec![2.0]).unwrap();
        let b = RealMatrix::new(1, 1, vec![3.0]).unwrap();
        let c = gemm_reference_real(&a, &b).unwrap();
        assert_eq!(c.as_real().unwrap(), &[6.0]);

        // identity x B = B
        let eye = RealMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = RealMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let c = gemm_reference_real(&eye, &b).unwrap();
        assert_eq!(c.as_real().unwrap(), b.data());

        // a hand-computed 4x4x4 entry
        let a = RealMatrix::new(4, 4, (0..16).map(|i| i as f32).collect()).unwrap();
        let b = RealMatrix::new(4, 4, (0..16).map(|i| (15 - i) as f32).collect()).unwrap();
        let c = gemm_reference_real(&a, &b).unwrap();
        // row 1 of A = [4,5,6,7], col 2 of B = [13,9,5,1]
        assert_eq!(
            c.as_real().unwrap()[4 + 2],
            4.0 * 13.0 + 5.0 * 9.0 + 6.0 * 5.0 + 7.0 * 1.0
        );

        let bad = RealMatrix::new(3, 2, vec![0.0; 6]).unwrap();
        assert!(gemm_reference_real(&a, &bad).is_err());
    }

    #[test]
    fn reference_quant_manual_case() {
        let p = QuantParams::new(1.0, 0.0, 2, true).unwrap();
        // products [4, 2, 0, -1]: (-2)(-2), (-2)(-1), (0)(1), (1)(-1)
        let a = CodeTensor::from_logical(1, 4, &p, &[-2, -2, 0, 1]).unwrap();
        let w = CodeTensor::from_logical(4, 1, &p, &[-2, -1, 1, -1]).unwrap();
        let c = gemm_reference_quant(&a, &w, &signed2(), &signed2(), AccumMode::Int).unwrap();
        assert_eq!(c.as_int().unwrap(), &[5]);
    }

    #[test]
    fn reference_quant_zero_activations() {
        let p = QuantParams::new(1.0, 0.0, 2, true).unwrap();
        let a = CodeTensor::from_logical(2, 3, &p, &[0; 6]).unwrap();
        let w = CodeTensor::from_logical(3, 2, &p, &[-2, 1, 0, 1, -1, -2]).unwrap();
        let c = gemm_reference_quant(&a, &w, &signed2(), &signed2(), AccumMode::Int).unwrap();
        assert_eq!(c.as_int().unwrap(), &[0; 4]);
    }

    #[test]
    fn reference_quant_real_matches_real_reference() {
        let p = QuantParams::new(2.0, 0.5, 2, true).unwrap();
        let map = ValueMap::Uniform(p);
        let a =
            CodeTensor::new(3, 5, 2, vec![0, 1, 2, 3, 1, 2, 0, 3, 2, 1, 3, 3, 0, 0, 2]).unwrap();
        let w = CodeTensor::new(5, 2, 2, vec![1, 0, 2, 3, 0, 1, 3, 2, 1, 1]).unwrap();
        let quant = gemm_reference_quant(&a, &w, &map, &map, AccumMode::Real).unwrap();
        let a_real = crate::quant::dequantize_uniform(&a, &p).unwrap();
        let w_real = crate::quant::dequantize_uniform(&w, &p).unwrap();
        let real = gemm_reference_real(&a_real, &w_real).unwrap();
        for (x, y) in quant.as_real().unwrap().iter().zip(real.as_real().unwrap()) {
            assert!((x - y).abs() <= 1e-6 * y.abs().max(1.0));
        }
    }

    #[test]
    fn reference_quant_int_rejects_fractional_maps() {
        let frac = ValueMap::Uniform(QuantParams::new(2.0, 0.0, 2, true).unwrap());
        let a = CodeTensor::new(1, 1, 2, vec![1]).unwrap();
        let w = CodeTensor::new(1, 1, 2, vec![1]).unwrap();
        assert!(gemm_reference_quant(&a, &w, &frac, &frac, AccumMode::Int).is_err());
    }

    #[test]
    fn lut16_manual_case_and_zero_weights() {
        let p = QuantParams::new(1.0, 0.0, 2, true).unwrap();
        let map = signed2();
        let lut = build_lut16(&map, &map, EntryDomain::Int8).unwrap();
        let problem = GemmProblem::new(1, 4, 1).unwrap();
        let a = CodeTensor::from_logical(1, 4, &p, &[-2, -2, 0, 1]).unwrap();
        let w = CodeTensor::from_logical(4, 1, &p, &[-2, -1, 1, -1]).unwrap();
        for scheme in PackScheme::ALL {
            let pa = crate::packing::pack(&a, scheme, OperandRole::Activation, None).unwrap();
            let pw = pack_gemm_weights(&w, scheme, None).unwrap();
            let c = gemm_lut16(&pa, &pw, &lut, &problem, scheme, &KernelOpts::default()).unwrap();
            assert_eq!(c.as_int().unwrap(), &[5], "scheme {scheme:?}");
        }

        // zero weights -> zero output
        let w0 = CodeTensor::from_logical(4, 2, &p, &[0; 8]).unwrap();
        let pa = crate::packing::pack(&a, PackScheme::D, OperandRole::Activation, None).unwrap();
        let pw = pack_gemm_weights(&w0, PackScheme::D, None).unwrap();
        let problem = GemmProblem::new(1, 4, 2).unwrap();
        let c = gemm_lut16(
            &pa,
            &pw,
            &lut,
            &problem,
            PackScheme::D,
            &KernelOpts::default(),
        )
        .unwrap();
        assert_eq!(c.as_int().unwrap(), &[0, 0]);
    }

    #[test]
    fn lut16_rejects_mismatched_scheme_and_lut() {
        let map = signed2();
        let lut = build_lut16(&map, &map, EntryDomain::Int8).unwrap();
        let p = QuantParams::new(1.0, 0.0, 2, true).unwrap();
        let a = CodeTensor::from_logical(1, 4, &p, &[0; 4]).unwrap();
        let w = CodeTensor::from_logical(4, 1, &p, &[0; 4]).unwrap();
        let pa = crate::packing::pack(&a, PackScheme::A, OperandRole::Activation, None).unwrap();
        let pw = pack_gemm_weights(&w, PackScheme::A, None).unwrap();
        let problem = GemmProblem::new(1, 4, 1).unwrap();
        assert!(matches!(
            gemm_lut16(
                &pa,
                &pw,
                &lut,
                &problem,
                PackScheme::C,
                &KernelOpts::default()
            ),
            Err(Error::SchemeMismatch { .. })
        ));

        let lut65k = crate::lut::build_lut65k(&map, &map, EntryDomain::Int8).unwrap();
        assert!(matches!(
            gemm_lut16(
                &pa,
                &pw,
                &lut65k,
                &problem,
                PackScheme::A,
                &KernelOpts::default()
            ),
            Err(Error::LutMismatch(_))
        ));
    }

    #[test]
    fn lut65k_rejects_rotated_weight_layout() {
        let map = signed2();
        let p = QuantParams::new(1.0, 0.0, 2, true).unwrap();
        let lut = crate::lut::build_lut65k(&map, &map, EntryDomain::Int8).unwrap();
        let a = CodeTensor::from_logical(1, 4, &p, &[0; 4]).unwrap();
        let w = CodeTensor::from_logical(4, 1, &p, &[1; 4]).unwrap();
        let pa = crate::packing::pack(&a, PackScheme::C, OperandRole::Activation, None).unwrap();
        let pw = pack_gemm_weights(&w, PackScheme::C, None).unwrap();
        let problem = GemmProblem::new(1, 4, 1).unwrap();
        assert!(matches!(
            gemm_lut65k(&pa, &pw, &lut, &problem, &KernelOpts::default()),
            Err(Error::SchemeMismatch { .. })
        ));
    }

    #[test]
    fn lut65k_single_group_is_single_lookup() {
        let map = signed2();
        let p = QuantParams::new(1.0, 0.0, 2, true).unwrap();
        let lut = crate::lut::build_lut65k(&map, &map, EntryDomain::Int8).unwrap();
        let a = CodeTensor::from_logical(1, 4, &p, &[-2, 1, 0, -1]).unwrap();
        let w = CodeTensor::from_logical(4, 1, &p, &[1, 1, -2, 0]).unwrap();
        let pa = crate::packing::pack(&a, PackScheme::A, OperandRole::Activation, None).unwrap();
        let pw = pack_gemm_weights(&w, PackScheme::A, None).unwrap();
        let problem = GemmProblem::new(1, 4, 1).unwrap();
        let c = gemm_lut65k(&pa, &pw, &lut, &problem, &KernelOpts::default()).unwrap();
        let idx = crate::packing::gather_index_lut65k(pw.data()[0], pa.data()[0]);
        assert_eq!(c.as_int().unwrap(), &[lut.entry_i32(usize::from(idx))]);
    }

    #[test]
    fn horizontal_reduce_matches_scalar_sum() {
        assert_eq!(horizontal_reduce(&[]), 0);
        assert_eq!(horizontal_reduce(&[0; 8]), 0);
        assert_eq!(horizontal_reduce(&[1, 2, 3, 4]), 10);
        let mut h = 0x9E3779B97F4A7C15u64;
        for len in 1..40usize {
            let lanes: Vec<i64> = (0..len)
                .map(|_| {
                    h = h
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    ((h >> 20) as i64 % 100_000) - 50_000
                })
                .collect();
            assert_eq!(horizontal_reduce(&lanes), lanes.iter().sum::<i64>());
        }
    }

    #[test]
    fn kernel_path_selection() {
        let scalar = KernelOpts {
            force_scalar: true,
            ..KernelOpts::default()
        };
        assert_eq!(select_kernel_path(&scalar), KernelPath::Scalar);
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx2") {
                assert_eq!(
                    select_kernel_path(&KernelOpts::default()),
                    KernelPath::Vector
                );
            }
        }
    }
}

//! AVX2 path of the 16-entry lookup kernel.
//!
//! The 128-bit table of 8-bit products is broadcast into both halves of a
//! 256-bit register, so one `vpshufb` performs 32 lookups. Each 32-byte
//! block of packed operands (128 code pairs) takes four index-extraction
//! passes whose mask/shift mix depends on the packing scheme; the lookup
//! results accumulate in 8-bit lanes and widen to 16 and then 32 bits on a
//! cadence bounded by the table's largest absolute entry, so lane sums can
//! never wrap. Everything here is exact integer arithmetic and matches the
//! scalar path bit for bit.
//!
//! Callers must verify AVX2 availability before entering.

use std::arch::x86_64::*;

use crate::packing::{gather_indices_lut16, PackScheme, PackedMatrix};

use super::GemmProblem;

/// Widen events the 16-bit accumulators tolerate before spilling to
/// 32-bit: each event deposits at most 127 per lane, 32767 / 127 = 258.
const WIDEN16_BUDGET: usize = 258;

/// How many 8-bit lane accumulations are safe before widening. A single
/// lookup result always fits (it is an i8), hence the floor of one pass.
pub(super) fn i8_pass_budget(max_abs_entry: i64) -> usize {
    if max_abs_entry == 0 {
        usize::MAX
    } else {
        ((127 / max_abs_entry) as usize).max(1)
    }
}

#[inline]
#[target_feature(enable = "avx2")]
unsafe fn rotr2_bytes(v: __m256i) -> __m256i {
    let lo = _mm256_and_si256(_mm256_srli_epi16::<2>(v), _mm256_set1_epi8(0x3F));
    let hi = _mm256_and_si256(_mm256_slli_epi16::<6>(v), _mm256_set1_epi8(0xC0u8 as i8));
    _mm256_or_si256(lo, hi)
}

/// The four per-lane index vectors for one 32-byte block, as nibble bytes
/// ready for `vpshufb`. Runs the scheme's mask/shift sequence; all four
/// schemes produce identical indices from their respective layouts.
#[inline]
#[target_feature(enable = "avx2")]
pub(super) unsafe fn extract_indices(scheme: PackScheme, w: __m256i, a: __m256i) -> [__m256i; 4] {
    let m3 = _mm256_set1_epi8(0x03);
    let mc = _mm256_set1_epi8(0x0C);
    match scheme {
        // natural layout: mask each 2-bit field, shift the weight field up
        PackScheme::A => [
            _mm256_or_si256(
                _mm256_and_si256(_mm256_slli_epi16::<2>(w), mc),
                _mm256_and_si256(a, m3),
            ),
            _mm256_or_si256(
                _mm256_and_si256(w, mc),
                _mm256_and_si256(_mm256_srli_epi16::<2>(a), m3),
            ),
            _mm256_or_si256(
                _mm256_and_si256(_mm256_srli_epi16::<2>(w), mc),
                _mm256_and_si256(_mm256_srli_epi16::<4>(a), m3),
            ),
            _mm256_or_si256(
                _mm256_and_si256(_mm256_srli_epi16::<4>(w), mc),
                _mm256_and_si256(_mm256_srli_epi16::<6>(a), m3),
            ),
        ],
        // natural layout, two indices per mask pass via the wide 0x33 mask
        PackScheme::B => {
            let m33 = _mm256_set1_epi8(0x33);
            let mf = _mm256_set1_epi8(0x0F);
            let mut idx = [_mm256_setzero_si256(); 4];
            for pass in 0..2 {
                let (ws, as_) = if pass == 0 {
                    (w, a)
                } else {
                    (_mm256_srli_epi16::<2>(w), _mm256_srli_epi16::<2>(a))
                };
                let wm = _mm256_and_si256(ws, m33);
                let am = _mm256_and_si256(as_, m33);
                let combined = _mm256_or_si256(_mm256_slli_epi16::<2>(wm), am);
                idx[pass] = _mm256_and_si256(combined, mf);
                idx[pass + 2] = _mm256_and_si256(_mm256_srli_epi16::<4>(combined), mf);
            }
            idx
        }
        // rotated layout: the masked weight field is already in place
        PackScheme::C => [
            _mm256_or_si256(_mm256_and_si256(w, mc), _mm256_and_si256(a, m3)),
            _mm256_or_si256(
                _mm256_and_si256(_mm256_srli_epi16::<2>(w), mc),
                _mm256_and_si256(_mm256_srli_epi16::<2>(a), m3),
            ),
            _mm256_or_si256(
                _mm256_and_si256(_mm256_srli_epi16::<4>(w), mc),
                _mm256_and_si256(_mm256_srli_epi16::<4>(a), m3),
            ),
            _mm256_or_si256(
                _mm256_and_si256(_mm256_slli_epi16::<2>(w), mc),
                _mm256_and_si256(_mm256_srli_epi16::<6>(a), m3),
            ),
        ],
        // rotated layout and two indices per pass: masked weight and
        // activation fields combine with a single OR, no weight shift
        PackScheme::D => {
            let m33 = _mm256_set1_epi8(0x33);
            let mcc = _mm256_set1_epi8(0xCCu8 as i8);
            let mf = _mm256_set1_epi8(0x0F);
            let mut idx = [_mm256_setzero_si256(); 4];
            for pass in 0..2 {
                let (wr, as_) = if pass == 0 {
                    (w, a)
                } else {
                    (rotr2_bytes(w), _mm256_srli_epi16::<2>(a))
                };
                let combined =
                    _mm256_or_si256(_mm256_and_si256(wr, mcc), _mm256_and_si256(as_, m33));
                idx[pass] = _mm256_and_si256(combined, mf);
                idx[pass + 2] = _mm256_and_si256(_mm256_srli_epi16::<4>(combined), mf);
            }
            idx
        }
    }
}

/// 8-to-16-to-32-bit widening accumulator with an overflow-safe cadence.
pub(super) struct WideningAccum {
    acc8: __m256i,
    acc16_lo: __m256i,
    acc16_hi: __m256i,
    acc32: __m256i,
    passes8: usize,
    widens16: usize,
    budget8: usize,
}

impl WideningAccum {
    #[inline]
    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn new(budget8: usize) -> Self {
        let zero = _mm256_setzero_si256();
        Self {
            acc8: zero,
            acc16_lo: zero,
            acc16_hi: zero,
            acc32: zero,
            passes8: 0,
            widens16: 0,
            budget8,
        }
    }

    /// Adds one vector of 32 lookup results to the 8-bit lanes, widening
    /// first whenever another pass could exceed the safe count.
    #[inline]
    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn add_products(&mut self, products: __m256i) {
        if self.passes8 == self.budget8 {
            self.widen8();
        }
        self.acc8 = _mm256_add_epi8(self.acc8, products);
        self.passes8 += 1;
        debug_assert!(
            self.passes8 <= self.budget8,
            "8-bit lane accumulation exceeded the safe widening cadence"
        );
    }

    #[inline]
    #[target_feature(enable = "avx2")]
    unsafe fn widen8(&mut self) {
        let lo = _mm256_cvtepi8_epi16(_mm256_castsi256_si128(self.acc8));
        let hi = _mm256_cvtepi8_epi16(_mm256_extracti128_si256::<1>(self.acc8));
        self.acc16_lo = _mm256_add_epi16(self.acc16_lo, lo);
        self.acc16_hi = _mm256_add_epi16(self.acc16_hi, hi);
        self.acc8 = _mm256_setzero_si256();
        self.passes8 = 0;
        self.widens16 += 1;
        if self.widens16 == WIDEN16_BUDGET {
            self.widen16();
        }
    }

    #[inline]
    #[target_feature(enable = "avx2")]
    unsafe fn widen16(&mut self) {
        let ones = _mm256_set1_epi16(1);
        self.acc32 = _mm256_add_epi32(self.acc32, _mm256_madd_epi16(self.acc16_lo, ones));
        self.acc32 = _mm256_add_epi32(self.acc32, _mm256_madd_epi16(self.acc16_hi, ones));
        self.acc16_lo = _mm256_setzero_si256();
        self.acc16_hi = _mm256_setzero_si256();
        self.widens16 = 0;
    }

    /// Flushes every level and reduces the 32-bit lanes to one scalar.
    #[inline]
    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn finish(mut self) -> i64 {
        if self.passes8 > 0 {
            self.widen8();
        }
        if self.widens16 > 0 {
            self.widen16();
        }
        hsum_epi32(self.acc32)
    }
}

/// Horizontal sum of eight 32-bit lanes by successive halving, the vector
/// counterpart of [`super::horizontal_reduce`].
#[inline]
#[target_feature(enable = "avx2")]
pub(super) unsafe fn hsum_epi32(v: __m256i) -> i64 {
    let lo = _mm256_castsi256_si128(v);
    let hi = _mm256_extracti128_si256::<1>(v);
    let s = _mm_add_epi32(lo, hi);
    let s = _mm_add_epi32(s, _mm_shuffle_epi32::<0b01_00_11_10>(s));
    let s = _mm_add_epi32(s, _mm_shuffle_epi32::<0b00_00_00_01>(s));
    i64::from(_mm_cvtsi128_si32(s))
}

/// Dot product of one packed row pair: whole 32-byte blocks through the
/// in-register table, leftover bytes through the same index arithmetic in
/// scalar form.
#[inline]
#[target_feature(enable = "avx2")]
#[allow(clippy::too_many_arguments)]
unsafe fn dot_row(
    a_row: &[u8],
    w_row: &[u8],
    full_bytes: usize,
    rem: usize,
    table: __m256i,
    entries16: &[i32; 16],
    scheme: PackScheme,
    budget8: usize,
) -> i64 {
    let blocks = full_bytes / 32;
    let mut acc = WideningAccum::new(budget8);
    for b in 0..blocks {
        let av = _mm256_loadu_si256(a_row.as_ptr().add(b * 32) as *const __m256i);
        let wv = _mm256_loadu_si256(w_row.as_ptr().add(b * 32) as *const __m256i);
        for idx in extract_indices(scheme, wv, av) {
            acc.add_products(_mm256_shuffle_epi8(table, idx));
        }
    }
    let mut total = acc.finish();
    for g in blocks * 32..full_bytes {
        let idx = gather_indices_lut16(w_row[g], a_row[g], scheme);
        for &i in &idx {
            total += i64::from(entries16[usize::from(i)]);
        }
    }
    if rem > 0 {
        let idx = gather_indices_lut16(w_row[full_bytes], a_row[full_bytes], scheme);
        for &i in &idx[..rem] {
            total += i64::from(entries16[usize::from(i)]);
        }
    }
    total
}

/// Integer 16-entry lookup GEMM, vector path.
///
/// # Safety
/// AVX2 must be available.
pub(super) unsafe fn lut16_int_avx2(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
    table: &[i8; 16],
    entries16: &[i32; 16],
    scheme: PackScheme,
    problem: &GemmProblem,
    include_pad: bool,
) -> Vec<i32> {
    unsafe {
        lut16_int_avx2_inner(
            packed_a,
            packed_w,
            table,
            entries16,
            scheme,
            problem,
            include_pad,
        )
    }
}

#[target_feature(enable = "avx2")]
unsafe fn lut16_int_avx2_inner(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
    table: &[i8; 16],
    entries16: &[i32; 16],
    scheme: PackScheme,
    problem: &GemmProblem,
    include_pad: bool,
) -> Vec<i32> {
    let (full_bytes, rem) = if include_pad {
        (packed_a.row_stride_bytes(), 0)
    } else {
        (problem.n / 4, problem.n % 4)
    };
    let table_v = _mm256_broadcastsi128_si256(_mm_loadu_si128(table.as_ptr() as *const __m128i));
    let budget8 = i8_pass_budget(
        entries16
            .iter()
            .map(|&e| i64::from(e).abs())
            .max()
            .unwrap_or(0),
    );
    let mut out = vec![0i32; problem.m * problem.k];
    for mi in 0..problem.m {
        let a_row = packed_a.row_bytes(mi);
        for ki in 0..problem.k {
            let w_row = packed_w.row_bytes(ki);
            out[mi * problem.k + ki] = dot_row(
                a_row, w_row, full_bytes, rem, table_v, entries16, scheme, budget8,
            ) as i32;
        }
    }
    out
}

/// Instrumented sub-passes of the vector kernel, for stage attribution.
/// Same loads and index extraction as production; `black_box` keeps the
/// partial results alive. Not a production timing path.
pub(super) mod subpass {
    use super::*;
    use std::hint::black_box;

    /// Index extraction only (plus the accumulate-shaped adds that keep
    /// the indices live).
    ///
    /// # Safety
    /// AVX2 must be available.
    pub(in crate::kernels) unsafe fn unpack_only(
        packed_a: &PackedMatrix,
        packed_w: &PackedMatrix,
        scheme: PackScheme,
        problem: &GemmProblem,
        full_bytes: usize,
        rem: usize,
    ) {
        unsafe { unpack_only_inner(packed_a, packed_w, scheme, problem, full_bytes, rem) }
    }

    #[target_feature(enable = "avx2")]
    unsafe fn unpack_only_inner(
        packed_a: &PackedMatrix,
        packed_w: &PackedMatrix,
        scheme: PackScheme,
        problem: &GemmProblem,
        full_bytes: usize,
        rem: usize,
    ) {
        let blocks = full_bytes / 32;
        for mi in 0..problem.m {
            let a_row = packed_a.row_bytes(mi);
            for ki in 0..problem.k {
                let w_row = packed_w.row_bytes(ki);
                let mut sink = _mm256_setzero_si256();
                for b in 0..blocks {
                    let av = _mm256_loadu_si256(a_row.as_ptr().add(b * 32) as *const __m256i);
                    let wv = _mm256_loadu_si256(w_row.as_ptr().add(b * 32) as *const __m256i);
                    for idx in extract_indices(scheme, wv, av) {
                        sink = _mm256_add_epi8(sink, idx);
                    }
                }
                let mut tail_sink = 0u32;
                for g in blocks * 32..full_bytes {
                    let idx = gather_indices_lut16(w_row[g], a_row[g], scheme);
                    tail_sink = tail_sink.wrapping_add(idx.iter().map(|&i| u32::from(i)).sum());
                }
                if rem > 0 {
                    let idx = gather_indices_lut16(w_row[full_bytes], a_row[full_bytes], scheme);
                    tail_sink =
                        tail_sink.wrapping_add(idx[..rem].iter().map(|&i| u32::from(i)).sum());
                }
                black_box((sink, tail_sink));
            }
        }
    }

    /// Index extraction plus table lookup.
    ///
    /// # Safety
    /// AVX2 must be available.
    #[allow(clippy::too_many_arguments)]
    pub(in crate::kernels) unsafe fn unpack_lookup(
        packed_a: &PackedMatrix,
        packed_w: &PackedMatrix,
        table: &[i8; 16],
        entries16: &[i32; 16],
        scheme: PackScheme,
        problem: &GemmProblem,
        full_bytes: usize,
        rem: usize,
    ) {
        unsafe {
            unpack_lookup_inner(
                packed_a, packed_w, table, entries16, scheme, problem, full_bytes, rem,
            )
        }
    }

    #[target_feature(enable = "avx2")]
    #[allow(clippy::too_many_arguments)]
    unsafe fn unpack_lookup_inner(
        packed_a: &PackedMatrix,
        packed_w: &PackedMatrix,
        table: &[i8; 16],
        entries16: &[i32; 16],
        scheme: PackScheme,
        problem: &GemmProblem,
        full_bytes: usize,
        rem: usize,
    ) {
        let table_v =
            _mm256_broadcastsi128_si256(_mm_loadu_si128(table.as_ptr() as *const __m128i));
        let blocks = full_bytes / 32;
        for mi in 0..problem.m {
            let a_row = packed_a.row_bytes(mi);
            for ki in 0..problem.k {
                let w_row = packed_w.row_bytes(ki);
                let mut sink = _mm256_setzero_si256();
                for b in 0..blocks {
                    let av = _mm256_loadu_si256(a_row.as_ptr().add(b * 32) as *const __m256i);
                    let wv = _mm256_loadu_si256(w_row.as_ptr().add(b * 32) as *const __m256i);
                    for idx in extract_indices(scheme, wv, av) {
                        sink = _mm256_add_epi8(sink, _mm256_shuffle_epi8(table_v, idx));
                    }
                }
                let mut tail_sink = 0i64;
                for g in blocks * 32..full_bytes {
                    let idx = gather_indices_lut16(w_row[g], a_row[g], scheme);
                    for &i in &idx {
                        tail_sink = tail_sink.wrapping_add(i64::from(entries16[usize::from(i)]));
                    }
                }
                if rem > 0 {
                    let idx = gather_indices_lut16(w_row[full_bytes], a_row[full_bytes], scheme);
                    for &i in &idx[..rem] {
                        tail_sink = tail_sink.wrapping_add(i64::from(entries16[usize::from(i)]));
                    }
                }
                black_box((sink, tail_sink));
            }
        }
    }

    /// The full production pass, result kept alive.
    ///
    /// # Safety
    /// AVX2 must be available.
    pub(in crate::kernels) unsafe fn full(
        packed_a: &PackedMatrix,
        packed_w: &PackedMatrix,
        table: &[i8; 16],
        entries16: &[i32; 16],
        scheme: PackScheme,
        problem: &GemmProblem,
        include_pad: bool,
    ) {
        let out = unsafe {
            lut16_int_avx2(
                packed_a,
                packed_w,
                table,
                entries16,
                scheme,
                problem,
                include_pad,
            )
        };
        black_box(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::horizontal_reduce;

    #[test]
    fn pass_budget_bounds() {
        assert_eq!(i8_pass_budget(4), 31); // the 2-bit signed uniform case
        assert_eq!(i8_pass_budget(1), 127);
        assert_eq!(i8_pass_budget(127), 1);
        assert_eq!(i8_pass_budget(128), 1);
        assert_eq!(i8_pass_budget(0), usize::MAX);
    }

    #[test]
    fn vector_hsum_matches_halving_reduce() {
        if !std::arch::is_x86_feature_detected!("avx2") {
            return;
        }
        let cases = [
            [0i32; 8],
            [1, 2, 3, 4, 5, 6, 7, 8],
            [-5, 17, 0, -123456, 99, 1 << 20, -7, 3],
        ];
        for lanes in cases {
            let got = unsafe { hsum_epi32(_mm256_loadu_si256(lanes.as_ptr() as *const __m256i)) };
            let expect = horizontal_reduce(&lanes.map(i64::from));
            assert_eq!(got, expect);
            assert_eq!(got, lanes.iter().map(|&x| i64::from(x)).sum::<i64>());
        }
    }
}

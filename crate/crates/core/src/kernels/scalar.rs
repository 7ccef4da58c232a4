//! Scalar kernel paths: the same index arithmetic as the vector kernels,
//! one byte at a time. Integer outputs are bit-identical to the vector
//! path and to the reference GEMM.

use crate::error::Result;
use crate::lut::{LookupTable, LutEntries};
use crate::packing::{gather_index_lut65k, gather_indices_lut16, PackScheme, PackedMatrix};

use super::GemmProblem;

/// Dot product of one activation row and one weight row of packed bytes
/// through the 16-entry table. `full_bytes` bytes are consumed whole;
/// `rem` extra lanes of the following byte are consumed individually.
pub(super) fn dot_lut16_int(
    a_row: &[u8],
    w_row: &[u8],
    full_bytes: usize,
    rem: usize,
    entries16: &[i32; 16],
    scheme: PackScheme,
) -> i64 {
    let mut acc = 0i64;
    for g in 0..full_bytes {
        let idx = gather_indices_lut16(w_row[g], a_row[g], scheme);
        for &i in &idx {
            acc += i64::from(entries16[usize::from(i)]);
        }
    }
    if rem > 0 {
        let idx = gather_indices_lut16(w_row[full_bytes], a_row[full_bytes], scheme);
        for &i in &idx[..rem] {
            acc += i64::from(entries16[usize::from(i)]);
        }
    }
    acc
}

pub(super) fn lut16_int(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
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
    let mut out = vec![0i32; problem.m * problem.k];
    for mi in 0..problem.m {
        let a_row = packed_a.row_bytes(mi);
        for ki in 0..problem.k {
            let w_row = packed_w.row_bytes(ki);
            out[mi * problem.k + ki] =
                dot_lut16_int(a_row, w_row, full_bytes, rem, entries16, scheme) as i32;
        }
    }
    out
}

/// Deterministic pairwise summation tree over `f(0..n)`, ascending at the
/// leaves. Fixed shape, so real-mode results are reproducible run to run.
pub(super) fn pairwise_sum<F: Fn(usize) -> f32>(lo: usize, hi: usize, f: &F) -> f32 {
    if hi - lo <= 8 {
        let mut acc = 0.0f32;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    } else {
        let mid = lo + (hi - lo) / 2;
        pairwise_sum(lo, mid, f) + pairwise_sum(mid, hi, f)
    }
}

pub(super) fn lut16_real(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
    entries: &[f32],
    scheme: PackScheme,
    problem: &GemmProblem,
) -> Vec<f32> {
    let mut out = vec![0.0f32; problem.m * problem.k];
    for mi in 0..problem.m {
        let a_row = packed_a.row_bytes(mi);
        for ki in 0..problem.k {
            let w_row = packed_w.row_bytes(ki);
            let product = |ni: usize| {
                let idx = gather_indices_lut16(w_row[ni / 4], a_row[ni / 4], scheme);
                entries[usize::from(idx[ni % 4])]
            };
            out[mi * problem.k + ki] = pairwise_sum(0, problem.n, &product);
        }
    }
    out
}

pub(super) fn lut_general_int(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
    lut: &LookupTable,
    bits: u8,
    problem: &GemmProblem,
) -> Result<Vec<i32>> {
    let entries: Vec<i32> = (0..lut.len()).map(|i| lut.entry_i32(i)).collect();
    let mut out = vec![0i32; problem.m * problem.k];
    for mi in 0..problem.m {
        for ki in 0..problem.k {
            let mut acc = 0i64;
            for ni in 0..problem.n {
                let idx = (usize::from(packed_w.code_at(ki, ni)) << bits)
                    | usize::from(packed_a.code_at(mi, ni));
                acc += i64::from(entries[idx]);
            }
            out[mi * problem.k + ki] = acc as i32;
        }
    }
    Ok(out)
}

pub(super) fn lut_general_real(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
    entries: &[f32],
    bits: u8,
    problem: &GemmProblem,
) -> Vec<f32> {
    let mut out = vec![0.0f32; problem.m * problem.k];
    for mi in 0..problem.m {
        for ki in 0..problem.k {
            let product = |ni: usize| {
                let idx = (usize::from(packed_w.code_at(ki, ni)) << bits)
                    | usize::from(packed_a.code_at(mi, ni));
                entries[idx]
            };
            out[mi * problem.k + ki] = pairwise_sum(0, problem.n, &product);
        }
    }
    out
}

/// Integer table entries viewed uniformly as i64, without widening the
/// whole table up front.
pub(super) trait IntEntries {
    fn at(&self, i: usize) -> i64;
}

impl IntEntries for [i8] {
    #[inline(always)]
    fn at(&self, i: usize) -> i64 {
        i64::from(self[i])
    }
}

impl IntEntries for [i32] {
    #[inline(always)]
    fn at(&self, i: usize) -> i64 {
        i64::from(self[i])
    }
}

/// Dot product of one row pair through the 65k table: one lookup per byte
/// group, plus per-lane remainder products from the value maps.
pub(super) fn dot_lut65k_int<E: IntEntries + ?Sized>(
    a_row: &[u8],
    w_row: &[u8],
    groups: usize,
    rem: usize,
    entries: &E,
    rem_products: &[[i64; 4]; 4],
) -> i64 {
    let mut acc = 0i64;
    for g in 0..groups {
        acc += entries.at(usize::from(gather_index_lut65k(w_row[g], a_row[g])));
    }
    if rem > 0 {
        let wb = w_row[groups];
        let ab = a_row[groups];
        for j in 0..rem {
            let w = usize::from((wb >> (2 * j)) & 3);
            let a = usize::from((ab >> (2 * j)) & 3);
            acc += rem_products[w][a];
        }
    }
    acc
}

/// Per-lane remainder products `w_value * a_value`, indexed by raw codes.
pub(super) fn remainder_products(lut: &LookupTable) -> Result<[[i64; 4]; 4]> {
    let w_vals = lut.w_map().integer_values()?;
    let a_vals = lut.a_map().integer_values()?;
    let mut table = [[0i64; 4]; 4];
    for (w, row) in table.iter_mut().enumerate() {
        for (a, p) in row.iter_mut().enumerate() {
            *p = i64::from(w_vals[w]) * i64::from(a_vals[a]);
        }
    }
    Ok(table)
}

fn run_lut65k_int<E: IntEntries + ?Sized>(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
    entries: &E,
    problem: &GemmProblem,
    groups: usize,
    rem: usize,
    rem_products: &[[i64; 4]; 4],
) -> Vec<i32> {
    let mut out = vec![0i32; problem.m * problem.k];
    for mi in 0..problem.m {
        let a_row = packed_a.row_bytes(mi);
        for ki in 0..problem.k {
            let w_row = packed_w.row_bytes(ki);
            out[mi * problem.k + ki] =
                dot_lut65k_int(a_row, w_row, groups, rem, entries, rem_products) as i32;
        }
    }
    out
}

pub(super) fn lut65k_int(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
    lut: &LookupTable,
    problem: &GemmProblem,
    include_pad: bool,
) -> Result<Vec<i32>> {
    let (groups, rem) = if include_pad {
        (packed_a.row_stride_bytes(), 0)
    } else {
        (problem.n / 4, problem.n % 4)
    };
    let rem_products = if rem > 0 {
        remainder_products(lut)?
    } else {
        [[0i64; 4]; 4]
    };
    Ok(match lut.entries() {
        LutEntries::I8(v) => run_lut65k_int(
            packed_a,
            packed_w,
            v.as_slice(),
            problem,
            groups,
            rem,
            &rem_products,
        ),
        LutEntries::I32(v) => run_lut65k_int(
            packed_a,
            packed_w,
            v.as_slice(),
            problem,
            groups,
            rem,
            &rem_products,
        ),
        LutEntries::F32(_) => unreachable!("integer path on real entries"),
    })
}

pub(super) fn lut65k_real(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
    entries: &[f32],
    lut: &LookupTable,
    problem: &GemmProblem,
    include_pad: bool,
) -> Result<Vec<f32>> {
    let (groups, rem) = if include_pad {
        (packed_a.row_stride_bytes(), 0)
    } else {
        (problem.n / 4, problem.n % 4)
    };
    let w_vals = lut.w_map().values();
    let a_vals = lut.a_map().values();
    let mut out = vec![0.0f32; problem.m * problem.k];
    for mi in 0..problem.m {
        let a_row = packed_a.row_bytes(mi);
        for ki in 0..problem.k {
            let w_row = packed_w.row_bytes(ki);
            let mut acc = 0.0f32;
            for g in 0..groups {
                acc += entries[usize::from(gather_index_lut65k(w_row[g], a_row[g]))];
            }
            if rem > 0 {
                let wb = w_row[groups];
                let ab = a_row[groups];
                for j in 0..rem {
                    let w = w_vals[usize::from((wb >> (2 * j)) & 3)];
                    let a = a_vals[usize::from((ab >> (2 * j)) & 3)];
                    acc += w * a;
                }
            }
            out[mi * problem.k + ki] = acc;
        }
    }
    Ok(out)
}

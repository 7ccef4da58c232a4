//! Differential sub-stage timing for the lookup kernels.
//!
//! The production kernels cannot carry timers in their hot loops without
//! perturbing them, so attribution works by timing three variants over
//! identical inputs: index extraction only, extraction plus table lookup,
//! and the full kernel. The differences attribute time to unpack, lookup
//! and accumulate. These passes share the production kernel's loads and
//! index arithmetic but are instrumentation, never a production timing
//! path.

use std::hint::black_box;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::lut::{LookupTable, LutEntries};
use crate::packing::{gather_index_lut65k, gather_indices_lut16, PackScheme, PackedMatrix};

use super::scalar::IntEntries;
use super::{
    gemm_lut16, gemm_lut65k, pad_product_is_zero, select_kernel_path, GemmProblem, KernelOpts,
    KernelPath,
};

/// Raw per-pass medians, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubPassNanos {
    pub unpack_ns: f64,
    pub lookup_ns: f64,
    pub accumulate_ns: f64,
}

impl SubPassNanos {
    pub fn total(&self) -> f64 {
        self.unpack_ns + self.lookup_ns + self.accumulate_ns
    }
}

fn median_of(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
    let n = samples.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

fn time_pass(mut pass: impl FnMut(), repeats: usize) -> f64 {
    pass(); // warm caches and branch predictors
    let repeats = repeats.max(1);
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        pass();
        samples.push(start.elapsed().as_nanos() as f64);
    }
    median_of(samples)
}

fn diff_to_subpasses(t_unpack: f64, t_lookup: f64, t_full: f64) -> SubPassNanos {
    SubPassNanos {
        unpack_ns: t_unpack,
        lookup_ns: (t_lookup - t_unpack).max(0.0),
        accumulate_ns: (t_full - t_lookup).max(0.0),
    }
}

/// Sub-stage timing of the 16-entry lookup kernel.
pub fn lut16_subpass_nanos(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
    lut: &LookupTable,
    problem: &GemmProblem,
    scheme: PackScheme,
    opts: &KernelOpts,
    repeats: usize,
) -> Result<SubPassNanos> {
    // A dry production run validates all operands and warms the caches.
    let dry = gemm_lut16(packed_a, packed_w, lut, problem, scheme, opts)?;
    black_box(&dry);
    if matches!(lut.entries(), LutEntries::F32(_)) {
        return Err(Error::LutMismatch(
            "instrumented timing covers integer-entry tables".into(),
        ));
    }
    let mut entries16 = [0i32; 16];
    for (i, e) in entries16.iter_mut().enumerate() {
        *e = lut.entry_i32(i);
    }
    let include_pad = !packed_a.has_padding() || pad_product_is_zero(packed_a, packed_w, lut);
    let (full_bytes, rem) = if include_pad {
        (packed_a.row_stride_bytes(), 0)
    } else {
        (problem.n / 4, problem.n % 4)
    };

    let path = select_kernel_path(opts);
    #[cfg(target_arch = "x86_64")]
    {
        if path == KernelPath::Vector {
            if let Some(bytes) = lut.as_i8() {
                let mut table = [0i8; 16];
                table.copy_from_slice(bytes);
                // Safety: vector path selection implies AVX2 is available.
                let t_unpack = time_pass(
                    || unsafe {
                        super::avx2::subpass::unpack_only(
                            packed_a, packed_w, scheme, problem, full_bytes, rem,
                        )
                    },
                    repeats,
                );
                let t_lookup = time_pass(
                    || unsafe {
                        super::avx2::subpass::unpack_lookup(
                            packed_a, packed_w, &table, &entries16, scheme, problem, full_bytes,
                            rem,
                        )
                    },
                    repeats,
                );
                let t_full = time_pass(
                    || unsafe {
                        super::avx2::subpass::full(
                            packed_a,
                            packed_w,
                            &table,
                            &entries16,
                            scheme,
                            problem,
                            include_pad,
                        )
                    },
                    repeats,
                );
                return Ok(diff_to_subpasses(t_unpack, t_lookup, t_full));
            }
        }
    }
    debug_assert!(path == KernelPath::Scalar || lut.as_i8().is_none());

    let t_unpack = time_pass(
        || {
            let mut sink = 0u64;
            for mi in 0..problem.m {
                let a_row = packed_a.row_bytes(mi);
                for ki in 0..problem.k {
                    let w_row = packed_w.row_bytes(ki);
                    for g in 0..full_bytes {
                        let idx = gather_indices_lut16(w_row[g], a_row[g], scheme);
                        sink = sink.wrapping_add(idx.iter().map(|&i| u64::from(i)).sum());
                    }
                    if rem > 0 {
                        let idx =
                            gather_indices_lut16(w_row[full_bytes], a_row[full_bytes], scheme);
                        sink = sink.wrapping_add(idx[..rem].iter().map(|&i| u64::from(i)).sum());
                    }
                }
            }
            black_box(sink);
        },
        repeats,
    );
    let t_lookup = time_pass(
        || {
            let mut sink = 0i64;
            for mi in 0..problem.m {
                let a_row = packed_a.row_bytes(mi);
                for ki in 0..problem.k {
                    let w_row = packed_w.row_bytes(ki);
                    for g in 0..full_bytes {
                        let idx = gather_indices_lut16(w_row[g], a_row[g], scheme);
                        for &i in &idx {
                            sink = sink.wrapping_add(i64::from(entries16[usize::from(i)]));
                        }
                    }
                    if rem > 0 {
                        let idx =
                            gather_indices_lut16(w_row[full_bytes], a_row[full_bytes], scheme);
                        for &i in &idx[..rem] {
                            sink = sink.wrapping_add(i64::from(entries16[usize::from(i)]));
                        }
                    }
                }
            }
            black_box(sink);
        },
        repeats,
    );
    let t_full = time_pass(
        || {
            let out = gemm_lut16(packed_a, packed_w, lut, problem, scheme, opts)
                .expect("validated by the dry run");
            black_box(out);
        },
        repeats,
    );
    Ok(diff_to_subpasses(t_unpack, t_lookup, t_full))
}

/// Sub-stage timing of the 65k lookup kernel (scalar).
pub fn lut65k_subpass_nanos(
    packed_a: &PackedMatrix,
    packed_w: &PackedMatrix,
    lut: &LookupTable,
    problem: &GemmProblem,
    opts: &KernelOpts,
    repeats: usize,
) -> Result<SubPassNanos> {
    let dry = gemm_lut65k(packed_a, packed_w, lut, problem, opts)?;
    black_box(&dry);
    let include_pad = !packed_a.has_padding() || pad_product_is_zero(packed_a, packed_w, lut);
    let (groups, rem) = if include_pad {
        (packed_a.row_stride_bytes(), 0)
    } else {
        (problem.n / 4, problem.n % 4)
    };

    let t_unpack = time_pass(
        || {
            let mut sink = 0u64;
            for mi in 0..problem.m {
                let a_row = packed_a.row_bytes(mi);
                for ki in 0..problem.k {
                    let w_row = packed_w.row_bytes(ki);
                    for g in 0..groups {
                        sink =
                            sink.wrapping_add(u64::from(gather_index_lut65k(w_row[g], a_row[g])));
                    }
                    if rem > 0 {
                        sink = sink.wrapping_add(u64::from(gather_index_lut65k(
                            w_row[groups],
                            a_row[groups],
                        )));
                    }
                }
            }
            black_box(sink);
        },
        repeats,
    );
    fn lookup_pass<E: IntEntries + ?Sized>(
        packed_a: &PackedMatrix,
        packed_w: &PackedMatrix,
        problem: &GemmProblem,
        groups: usize,
        rem: usize,
        entries: &E,
    ) {
        let mut sink = 0i64;
        for mi in 0..problem.m {
            let a_row = packed_a.row_bytes(mi);
            for ki in 0..problem.k {
                let w_row = packed_w.row_bytes(ki);
                for g in 0..groups {
                    let idx = usize::from(gather_index_lut65k(w_row[g], a_row[g]));
                    sink = sink.wrapping_add(entries.at(idx));
                }
                if rem > 0 {
                    let idx = usize::from(gather_index_lut65k(w_row[groups], a_row[groups]));
                    sink = sink.wrapping_add(entries.at(idx));
                }
            }
        }
        black_box(sink);
    }
    let t_lookup = match lut.entries() {
        LutEntries::I8(v) => time_pass(
            || lookup_pass(packed_a, packed_w, problem, groups, rem, v.as_slice()),
            repeats,
        ),
        LutEntries::I32(v) => time_pass(
            || lookup_pass(packed_a, packed_w, problem, groups, rem, v.as_slice()),
            repeats,
        ),
        LutEntries::F32(_) => {
            return Err(Error::LutMismatch(
                "instrumented timing covers integer-entry tables".into(),
            ))
        }
    };
    let t_full = time_pass(
        || {
            let out = gemm_lut65k(packed_a, packed_w, lut, problem, opts)
                .expect("validated by the dry run");
            black_box(out);
        },
        repeats,
    );
    Ok(diff_to_subpasses(t_unpack, t_lookup, t_full))
}

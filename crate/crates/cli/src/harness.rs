//! Timed benchmark runs over shape catalogs.
//!
//! Weights are packed and tables built offline, outside the timed region,
//! matching how a deployed network would prepare its parameters. Every
//! lookup-kernel output is checked against the reference GEMM before any
//! timing starts; a mismatch aborts the whole run. Timing itself is
//! single-threaded (one shape at a time) for stable medians; the optional
//! worker count parallelizes only the correctness gate.

use std::hint::black_box;
use std::time::Instant;

use rayon::prelude::*;

use lutgemm_core::kernels::instrument;
use lutgemm_core::{
    build_lut16, build_lut65k, build_lut_general, cost, gemm_lut16, gemm_lut65k, gemm_lut_general,
    gemm_reference_quant, gemm_reference_real, pack, pack_gemm_weights, quantize_uniform,
    select_kernel_path, AccumMatrix, AccumMode, EntryDomain, GemmProblem, KernelOpts, LookupTable,
    OperandRole, PackScheme, PackedMatrix, ValueMap,
};

use crate::catalog::ShapeCatalog;
use crate::gen::{generate_case, shape_seed, BenchCase};
use crate::report::{Environment, ProfileReport, ShapeDims, ShapeRecord, StageTiming, Summary};
use crate::{geomean, CliError, CliResult};

/// Kernel identifiers accepted by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelId {
    Lut16,
    Lut65k,
    RefI8,
    RefF32,
}

impl KernelId {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelId::Lut16 => "lut16",
            KernelId::Lut65k => "lut65k",
            KernelId::RefI8 => "ref_i8",
            KernelId::RefF32 => "ref_f32",
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "lut16" => Ok(KernelId::Lut16),
            "lut65k" => Ok(KernelId::Lut65k),
            "ref_i8" => Ok(KernelId::RefI8),
            "ref_f32" => Ok(KernelId::RefF32),
            other => Err(CliError::Usage(format!(
                "unknown kernel {other:?}, expected lut16, lut65k, ref_i8 or ref_f32"
            ))),
        }
    }

    pub fn is_lut(self) -> bool {
        matches!(self, KernelId::Lut16 | KernelId::Lut65k)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BenchConfig {
    pub kernel: KernelId,
    pub baseline: KernelId,
    pub scheme: PackScheme,
    pub bits: u8,
    pub signed: bool,
    pub repeats: u32,
    pub warmup: u32,
    pub seed: u64,
    pub force_scalar: bool,
    pub profile_stages: bool,
    /// Repeats for the per-stage profile passes.
    pub stage_repeats: u32,
    /// Worker threads for the correctness gate; timing stays sequential.
    pub workers: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            kernel: KernelId::Lut16,
            baseline: KernelId::RefI8,
            scheme: PackScheme::D,
            bits: 2,
            signed: true,
            repeats: 100,
            warmup: 10,
            seed: 0,
            force_scalar: false,
            profile_stages: false,
            stage_repeats: 15,
            workers: 1,
        }
    }
}

impl BenchConfig {
    pub fn opts(&self) -> KernelOpts {
        KernelOpts {
            force_scalar: self.force_scalar,
            ..KernelOpts::default()
        }
    }
}

/// Rejects kernel/scheme/bit combinations the kernels do not implement.
pub fn validate_combo(kernel: KernelId, scheme: PackScheme, bits: u8) -> CliResult<()> {
    if !matches!(bits, 2..=4) {
        return Err(CliError::Usage(format!(
            "unsupported bit width {bits}, expected 2, 3 or 4"
        )));
    }
    match kernel {
        KernelId::Lut65k => {
            if bits != 2 {
                return Err(CliError::Usage(
                    "kernel lut65k supports 2-bit codes only".into(),
                ));
            }
            if scheme.rotated_weights() {
                return Err(CliError::Usage(
                    "kernel lut65k decodes the natural layout; use scheme a or b".into(),
                ));
            }
        }
        KernelId::Lut16 => {
            if bits != 2 && scheme != PackScheme::A {
                return Err(CliError::Usage(format!(
                    "{bits}-bit lookup runs the scalar natural-layout path; use scheme a"
                )));
            }
        }
        KernelId::RefI8 | KernelId::RefF32 => {}
    }
    Ok(())
}

/// Integer entry domain wide enough for the table the maps produce.
fn int_domain_for(map: &ValueMap, arity4: bool) -> CliResult<EntryDomain> {
    let vals = map.integer_values()?;
    let max_abs = vals.iter().map(|v| i64::from(v.abs())).max().unwrap_or(0);
    let bound = max_abs * max_abs * if arity4 { 4 } else { 1 };
    Ok(if bound <= 127 {
        EntryDomain::Int8
    } else {
        EntryDomain::Int32
    })
}

/// One kernel bound to its prepared (offline) operands.
enum PreparedKernel {
    Lut16 {
        packed_a: PackedMatrix,
        packed_w: PackedMatrix,
        lut: LookupTable,
        scheme: PackScheme,
    },
    LutGeneral {
        packed_a: PackedMatrix,
        packed_w: PackedMatrix,
        lut: LookupTable,
    },
    Lut65k {
        packed_a: PackedMatrix,
        packed_w: PackedMatrix,
        lut: LookupTable,
    },
    RefI8,
    RefF32,
}

impl PreparedKernel {
    fn prepare(id: KernelId, cfg: &BenchConfig, case: &BenchCase) -> CliResult<Self> {
        validate_combo(id, cfg.scheme, cfg.bits)?;
        let pad = case.a_map.zero_code();
        match id {
            KernelId::RefI8 => Ok(PreparedKernel::RefI8),
            KernelId::RefF32 => Ok(PreparedKernel::RefF32),
            KernelId::Lut16 if cfg.bits == 2 => {
                let domain = int_domain_for(&case.a_map, false)?;
                let lut = build_lut16(&case.w_map, &case.a_map, domain)?;
                let packed_a = pack(&case.codes_a, cfg.scheme, OperandRole::Activation, pad)?;
                let packed_w = pack_gemm_weights(&case.codes_w, cfg.scheme, pad)?;
                Ok(PreparedKernel::Lut16 {
                    packed_a,
                    packed_w,
                    lut,
                    scheme: cfg.scheme,
                })
            }
            KernelId::Lut16 => {
                let domain = int_domain_for(&case.a_map, false)?;
                let lut = build_lut_general(cfg.bits, &case.w_map, &case.a_map, domain)?;
                let packed_a = pack(&case.codes_a, PackScheme::A, OperandRole::Activation, pad)?;
                let packed_w = pack_gemm_weights(&case.codes_w, PackScheme::A, pad)?;
                Ok(PreparedKernel::LutGeneral {
                    packed_a,
                    packed_w,
                    lut,
                })
            }
            KernelId::Lut65k => {
                let domain = int_domain_for(&case.a_map, true)?;
                let lut = build_lut65k(&case.w_map, &case.a_map, domain)?;
                let packed_a = pack(&case.codes_a, cfg.scheme, OperandRole::Activation, pad)?;
                let packed_w = pack_gemm_weights(&case.codes_w, cfg.scheme, pad)?;
                Ok(PreparedKernel::Lut65k {
                    packed_a,
                    packed_w,
                    lut,
                })
            }
        }
    }

    fn run(&self, case: &BenchCase, opts: &KernelOpts) -> CliResult<AccumMatrix> {
        let out = match self {
            PreparedKernel::Lut16 {
                packed_a,
                packed_w,
                lut,
                scheme,
            } => gemm_lut16(packed_a, packed_w, lut, &case.problem, *scheme, opts)?,
            PreparedKernel::LutGeneral {
                packed_a,
                packed_w,
                lut,
            } => gemm_lut_general(packed_a, packed_w, lut, &case.problem, opts)?,
            PreparedKernel::Lut65k {
                packed_a,
                packed_w,
                lut,
            } => gemm_lut65k(packed_a, packed_w, lut, &case.problem, opts)?,
            PreparedKernel::RefI8 => gemm_reference_quant(
                &case.codes_a,
                &case.codes_w,
                &case.a_map,
                &case.w_map,
                AccumMode::Int,
            )?,
            PreparedKernel::RefF32 => gemm_reference_real(&case.a_real, &case.w_real)?,
        };
        Ok(out)
    }
}

fn median_of(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

fn time_median_ns(mut run: impl FnMut(), warmup: u32, repeats: u32) -> f64 {
    for _ in 0..warmup {
        run();
    }
    let repeats = repeats.max(1);
    let mut samples = Vec::with_capacity(repeats as usize);
    for _ in 0..repeats {
        let start = Instant::now();
        run();
        samples.push(start.elapsed().as_nanos() as f64);
    }
    median_of(samples)
}

/// Times kernel and baseline in alternating bursts so both sides sample
/// the same machine epochs (frequency steps, noisy neighbors); speedup
/// ratios stay meaningful even when absolute throughput drifts during the
/// run. Returns (kernel median, baseline median).
fn time_pair_median_ns(
    mut kernel: impl FnMut(),
    mut baseline: impl FnMut(),
    warmup: u32,
    repeats: u32,
) -> (f64, f64) {
    for _ in 0..warmup {
        kernel();
        baseline();
    }
    let repeats = repeats.max(1);
    let bursts = repeats.min(4);
    let per_burst = repeats.div_ceil(bursts);
    let mut kernel_samples = Vec::with_capacity((bursts * per_burst) as usize);
    let mut baseline_samples = Vec::with_capacity((bursts * per_burst) as usize);
    for _ in 0..bursts {
        for _ in 0..per_burst {
            let start = Instant::now();
            kernel();
            kernel_samples.push(start.elapsed().as_nanos() as f64);
        }
        for _ in 0..per_burst {
            let start = Instant::now();
            baseline();
            baseline_samples.push(start.elapsed().as_nanos() as f64);
        }
    }
    kernel_samples.truncate(repeats as usize);
    baseline_samples.truncate(repeats as usize);
    (median_of(kernel_samples), median_of(baseline_samples))
}

/// Runs the configured kernel over every catalog shape: offline packing,
/// correctness gate, then median-of-repeats timing against the baseline.
pub fn run_benchmark(catalog: &ShapeCatalog, cfg: &BenchConfig) -> CliResult<ProfileReport> {
    validate_combo(cfg.kernel, cfg.scheme, cfg.bits)?;
    validate_combo(cfg.baseline, cfg.scheme, cfg.bits)?;
    if cfg.profile_stages && cfg.kernel.is_lut() && cfg.bits != 2 {
        return Err(CliError::Usage(
            "stage attribution covers the 2-bit lookup kernels".into(),
        ));
    }
    if catalog.shapes.is_empty() {
        return Err(CliError::Usage("catalog holds no shapes".into()));
    }
    let opts = cfg.opts();

    struct ShapeRun {
        case: BenchCase,
        kernel: PreparedKernel,
        baseline: Option<PreparedKernel>,
    }

    let mut runs = Vec::with_capacity(catalog.shapes.len());
    for (i, &shape) in catalog.shapes.iter().enumerate() {
        let case = generate_case(shape, cfg.bits, cfg.signed, shape_seed(cfg.seed, i));
        let kernel = PreparedKernel::prepare(cfg.kernel, cfg, &case)?;
        let baseline = if cfg.baseline == cfg.kernel {
            None
        } else {
            Some(PreparedKernel::prepare(cfg.baseline, cfg, &case)?)
        };
        runs.push(ShapeRun {
            case,
            kernel,
            baseline,
        });
    }

    // Correctness gate: every lookup kernel must reproduce the reference
    // exactly before any timing happens.
    let gate = |run: &ShapeRun| -> CliResult<()> {
        for (id, prepared) in [
            (cfg.kernel, Some(&run.kernel)),
            (cfg.baseline, run.baseline.as_ref()),
        ] {
            let Some(prepared) = prepared else { continue };
            if !id.is_lut() {
                continue;
            }
            let got = prepared.run(&run.case, &opts)?;
            let expect = gemm_reference_quant(
                &run.case.codes_a,
                &run.case.codes_w,
                &run.case.a_map,
                &run.case.w_map,
                AccumMode::Int,
            )?;
            if got != expect {
                let p = run.case.problem;
                return Err(CliError::Gate(format!(
                    "{} output differs from the reference on shape ({}, {}, {})",
                    id.as_str(),
                    p.m,
                    p.n,
                    p.k
                )));
            }
        }
        Ok(())
    };
    if cfg.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot build worker pool: {e}")))?;
        pool.install(|| runs.par_iter().try_for_each(gate))?;
    } else {
        for run in &runs {
            gate(run)?;
        }
    }

    // Timing: sequential, one shape at a time.
    let mut records = Vec::with_capacity(runs.len());
    for run in &runs {
        let (median_ns, baseline_median_ns) = match &run.baseline {
            // self-comparison: reuse the same measurement, speedup is 1
            None => {
                let m = time_median_ns(
                    || {
                        black_box(run.kernel.run(&run.case, &opts).expect("gated kernel run"));
                    },
                    cfg.warmup,
                    cfg.repeats,
                );
                (m, m)
            }
            Some(baseline) => time_pair_median_ns(
                || {
                    black_box(run.kernel.run(&run.case, &opts).expect("gated kernel run"));
                },
                || {
                    black_box(baseline.run(&run.case, &opts).expect("gated baseline run"));
                },
                cfg.warmup,
                cfg.repeats,
            ),
        };
        let stage_timing = if cfg.profile_stages && cfg.kernel.is_lut() {
            Some(profile_case_stages(&run.case, cfg)?)
        } else {
            None
        };
        let p = run.case.problem;
        records.push(ShapeRecord {
            shape: ShapeDims {
                m: p.m,
                n: p.n,
                k: p.k,
            },
            kernel: cfg.kernel.as_str().to_string(),
            scheme: if cfg.kernel.is_lut() {
                cfg.scheme.letter().to_string()
            } else {
                "-".to_string()
            },
            bits: cfg.bits,
            repeats: cfg.repeats.max(1),
            median_ns,
            baseline: cfg.baseline.as_str().to_string(),
            baseline_median_ns,
            speedup: baseline_median_ns / median_ns,
            unpack_cost_per_output: (cfg.kernel == KernelId::Lut16 && cfg.bits == 2)
                .then(|| cost::unpack_cost(cfg.scheme).total()),
            stage_timing,
        });
    }

    let speedups: Vec<f64> = records.iter().map(|r| r.speedup).collect();
    Ok(ProfileReport {
        environment: Environment::capture(select_kernel_path(&opts).as_str()),
        records,
        summary: Summary {
            geomean_speedup: geomean(&speedups),
        },
    })
}

fn dequantize_output(acc: &[i32], scale_a: f32, scale_w: f32) -> Vec<f32> {
    let inv = 1.0 / (scale_a * scale_w);
    acc.iter().map(|&v| v as f32 * inv).collect()
}

/// Times the four pipeline stages around one kernel invocation on a
/// fresh seeded case: activation quantization, activation packing, the
/// lookup GEMM itself, and output dequantization. Weight packing and
/// table construction stay offline and untimed.
#[allow(clippy::too_many_arguments)]
pub fn profile_stages(
    problem: GemmProblem,
    kernel: KernelId,
    scheme: PackScheme,
    bits: u8,
    signed: bool,
    seed: u64,
    repeats: u32,
    force_scalar: bool,
) -> CliResult<StageTiming> {
    if !kernel.is_lut() {
        return Err(CliError::Usage(
            "stage profiling applies to the lookup kernels".into(),
        ));
    }
    let cfg = BenchConfig {
        kernel,
        scheme,
        bits,
        signed,
        seed,
        stage_repeats: repeats,
        force_scalar,
        ..BenchConfig::default()
    };
    validate_combo(kernel, scheme, bits)?;
    let case = generate_case(problem, bits, signed, shape_seed(seed, 0));
    profile_case_stages(&case, &cfg)
}

fn profile_case_stages(case: &BenchCase, cfg: &BenchConfig) -> CliResult<StageTiming> {
    let opts = cfg.opts();
    let repeats = cfg.stage_repeats.max(1);
    let warmup = 2;
    let pad = case.a_map.zero_code();
    let pack_scheme = match cfg.kernel {
        KernelId::Lut16 if cfg.bits == 2 => cfg.scheme,
        _ => PackScheme::A,
    };

    // stage 1: activation quantization (real tensor -> codes)
    let act_quantize_ns = time_median_ns(
        || {
            black_box(quantize_uniform(&case.a_real, &case.params).expect("finite inputs"));
        },
        warmup,
        repeats,
    );

    // stage 2: activation packing (codes -> packed bytes)
    let act_pack_ns = time_median_ns(
        || {
            black_box(
                pack(&case.codes_a, pack_scheme, OperandRole::Activation, pad)
                    .expect("codes in range"),
            );
        },
        warmup,
        repeats,
    );

    // offline, untimed: weight packing and table construction
    let prepared = PreparedKernel::prepare(cfg.kernel, cfg, case)?;

    // stage 3: the lookup GEMM
    let lut_conv_ns = time_median_ns(
        || {
            black_box(prepared.run(case, &opts).expect("prepared kernel run"));
        },
        warmup,
        repeats,
    );

    // stage 4: output dequantization (int accumulators -> real)
    let output = prepared.run(case, &opts)?;
    let acc = output
        .as_int()
        .expect("benchmark tables are integer-valued");
    let act_dequantize_ns = time_median_ns(
        || {
            black_box(dequantize_output(acc, case.params.scale, case.params.scale));
        },
        warmup,
        repeats,
    );

    // attribution of the kernel stage to unpack/lookup/accumulate via the
    // instrumented sub-passes
    let sub = match &prepared {
        PreparedKernel::Lut16 {
            packed_a,
            packed_w,
            lut,
            scheme,
        } => instrument::lut16_subpass_nanos(
            packed_a,
            packed_w,
            lut,
            &case.problem,
            *scheme,
            &opts,
            repeats as usize,
        )?,
        PreparedKernel::LutGeneral { .. } => {
            return Err(CliError::Usage(
                "stage attribution covers the 2-bit lookup kernels".into(),
            ))
        }
        PreparedKernel::Lut65k {
            packed_a,
            packed_w,
            lut,
        } => instrument::lut65k_subpass_nanos(
            packed_a,
            packed_w,
            lut,
            &case.problem,
            &opts,
            repeats as usize,
        )?,
        PreparedKernel::RefI8 | PreparedKernel::RefF32 => unreachable!("validated lut kernel"),
    };
    let total = sub.total();
    let (unpack_fraction, lookup_fraction, accumulate_fraction) = if total > 0.0 {
        (
            sub.unpack_ns / total,
            sub.lookup_ns / total,
            sub.accumulate_ns / total,
        )
    } else {
        // degenerate shapes can time below the clock resolution
        (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    };

    Ok(StageTiming {
        act_quantize_ns,
        act_pack_ns,
        lut_conv_ns,
        act_dequantize_ns,
        unpack_fraction,
        lookup_fraction,
        accumulate_fraction,
    })
}

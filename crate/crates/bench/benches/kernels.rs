//! Kernel microbenchmarks: the lookup kernels across packing schemes and
//! paths against the scalar reference baselines.
//!
//! Run with `cargo bench -p lutgemm-bench`. Inputs are seeded, weights are
//! packed and tables built outside the measured region.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use lutgemm_cli::{generate_case, BenchCase};
use lutgemm_core::{
    build_lut16, build_lut65k, gemm_lut16, gemm_lut65k, gemm_reference_quant, gemm_reference_real,
    pack, AccumMode, EntryDomain, GemmProblem, KernelOpts, LookupTable, OperandRole, PackScheme,
    PackedMatrix,
};

struct Operands {
    case: BenchCase,
    packed_a: PackedMatrix,
    packed_w: PackedMatrix,
    lut16: LookupTable,
    lut65k: LookupTable,
}

fn prepare(problem: GemmProblem, scheme: PackScheme) -> Operands {
    let case = generate_case(problem, 2, true, 0xBE7C4);
    let pad = case.a_map.zero_code();
    let packed_a = pack(&case.codes_a, scheme, OperandRole::Activation, pad).unwrap();
    let packed_w = lutgemm_core::pack_gemm_weights(&case.codes_w, scheme, pad).unwrap();
    let lut16 = build_lut16(&case.w_map, &case.a_map, EntryDomain::Int8).unwrap();
    let lut65k = build_lut65k(&case.w_map, &case.a_map, EntryDomain::Int8).unwrap();
    Operands {
        case,
        packed_a,
        packed_w,
        lut16,
        lut65k,
    }
}

fn bench_schemes(c: &mut Criterion) {
    let problem = GemmProblem::new(32, 2048, 32).unwrap();
    let mut group = c.benchmark_group("lut16_schemes");
    group.throughput(Throughput::Elements(
        problem.m as u64 * problem.n as u64 * problem.k as u64,
    ));
    for scheme in PackScheme::ALL {
        let ops = prepare(problem, scheme);
        group.bench_with_input(
            BenchmarkId::from_parameter(scheme.letter()),
            &ops,
            |b, ops| {
                b.iter(|| {
                    black_box(
                        gemm_lut16(
                            &ops.packed_a,
                            &ops.packed_w,
                            &ops.lut16,
                            &ops.case.problem,
                            scheme,
                            &KernelOpts::default(),
                        )
                        .unwrap(),
                    )
                })
            },
        );
    }
    group.finish();
}

fn bench_paths_and_baselines(c: &mut Criterion) {
    let problem = GemmProblem::new(32, 2048, 32).unwrap();
    let ops = prepare(problem, PackScheme::D);
    let ops_natural = prepare(problem, PackScheme::A);
    let elements = problem.m as u64 * problem.n as u64 * problem.k as u64;

    let mut group = c.benchmark_group("kernels");
    group.throughput(Throughput::Elements(elements));
    group.bench_function("lut16_d_vector", |b| {
        b.iter(|| {
            black_box(
                gemm_lut16(
                    &ops.packed_a,
                    &ops.packed_w,
                    &ops.lut16,
                    &ops.case.problem,
                    PackScheme::D,
                    &KernelOpts::default(),
                )
                .unwrap(),
            )
        })
    });
    group.bench_function("lut16_d_scalar", |b| {
        let opts = KernelOpts {
            force_scalar: true,
            ..KernelOpts::default()
        };
        b.iter(|| {
            black_box(
                gemm_lut16(
                    &ops.packed_a,
                    &ops.packed_w,
                    &ops.lut16,
                    &ops.case.problem,
                    PackScheme::D,
                    &opts,
                )
                .unwrap(),
            )
        })
    });
    group.bench_function("lut65k", |b| {
        b.iter(|| {
            black_box(
                gemm_lut65k(
                    &ops_natural.packed_a,
                    &ops_natural.packed_w,
                    &ops_natural.lut65k,
                    &ops_natural.case.problem,
                    &KernelOpts::default(),
                )
                .unwrap(),
            )
        })
    });
    group.bench_function("ref_i8", |b| {
        b.iter(|| {
            black_box(
                gemm_reference_quant(
                    &ops.case.codes_a,
                    &ops.case.codes_w,
                    &ops.case.a_map,
                    &ops.case.w_map,
                    AccumMode::Int,
                )
                .unwrap(),
            )
        })
    });
    group.bench_function("ref_f32", |b| {
        b.iter(|| black_box(gemm_reference_real(&ops.case.a_real, &ops.case.w_real).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_schemes, bench_paths_and_baselines);
criterion_main!(benches);

//! `lutgemm` — benchmark and inspection CLI for the lookup-table GEMM
//! kernels.
//!
//! Exit codes: 0 success, 1 correctness-gate or runtime failure, 2 usage
//! error.

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lutgemm_cli::{
    emit_report, profile_stages, resolve_catalog, run_benchmark, BenchConfig, CliError, CliResult,
    KernelId, ReportFormat,
};
use lutgemm_core::{
    cost, lut_storage, pack_gemm_weights, CodeTensor, GemmProblem, PackScheme, PackedMatrix,
};

#[derive(Parser)]
#[command(
    name = "lutgemm",
    version,
    about = "Lookup-table GEMM kernels for 2-4 bit quantized matrices: benchmarks, profiling, packing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time a kernel over a shape catalog against an internal baseline.
    Bench(BenchArgs),
    /// Per-stage pipeline timing for one shape.
    Profile(ProfileArgs),
    /// Pack seeded weights offline and write the cache file.
    Pack(PackArgs),
    /// Print the header of a packed weight cache file.
    Inspect(InspectArgs),
    /// Print the analytical cost tables.
    Cost,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelArg {
    #[value(name = "lut16")]
    Lut16,
    #[value(name = "lut65k")]
    Lut65k,
    #[value(name = "ref_i8")]
    RefI8,
    #[value(name = "ref_f32")]
    RefF32,
}

impl From<KernelArg> for KernelId {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Lut16 => KernelId::Lut16,
            KernelArg::Lut65k => KernelId::Lut65k,
            KernelArg::RefI8 => KernelId::RefI8,
            KernelArg::RefF32 => KernelId::RefF32,
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    /// Built-in catalog name (mobilenetv1, resnet18, resnet34, resnet50,
    /// nsweep) or a path to a CSV of M,N,K rows.
    #[arg(long)]
    catalog: String,
    #[arg(long, value_enum, default_value = "lut16")]
    kernel: KernelArg,
    /// Packing scheme a|b|c|d; defaults to d for lut16 and a for lut65k.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, default_value_t = 2)]
    bits: u8,
    #[arg(long, value_enum, default_value = "ref_i8")]
    baseline: KernelArg,
    #[arg(long, default_value_t = 100)]
    repeats: u32,
    #[arg(long, default_value_t = 10)]
    warmup: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: String,
    /// Never take the vector kernel path.
    #[arg(long)]
    force_scalar: bool,
    /// Generate unsigned codes instead of signed.
    #[arg(long)]
    unsigned: bool,
    /// Worker threads for the correctness gate (timing stays sequential).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Attach per-stage timings to every record (instrumented runs).
    #[arg(long)]
    profile_stages: bool,
}

#[derive(Args)]
struct ProfileArgs {
    /// Shape as M,N,K.
    #[arg(long)]
    shape: String,
    #[arg(long, value_enum, default_value = "lut16")]
    kernel: KernelArg,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, default_value_t = 2)]
    bits: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 15)]
    repeats: u32,
    #[arg(long)]
    force_scalar: bool,
    #[arg(long)]
    unsigned: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PackArgs {
    /// Reduction length (rows of the weight matrix).
    #[arg(long)]
    rows: usize,
    /// Output columns of the weight matrix.
    #[arg(long)]
    cols: usize,
    #[arg(long, default_value = "d")]
    scheme: String,
    #[arg(long, default_value_t = 2)]
    bits: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    file: PathBuf,
}

fn default_scheme(kernel: KernelId) -> PackScheme {
    match kernel {
        KernelId::Lut65k => PackScheme::A,
        _ => PackScheme::D,
    }
}

fn parse_scheme_arg(arg: &Option<String>, kernel: KernelId) -> CliResult<PackScheme> {
    match arg {
        None => Ok(default_scheme(kernel)),
        Some(s) => PackScheme::parse(s)
            .map_err(|_| CliError::Usage(format!("unknown scheme {s:?}, expected a, b, c or d"))),
    }
}

fn parse_shape(spec: &str) -> CliResult<GemmProblem> {
    let fields: Vec<&str> = spec.split(',').map(str::trim).collect();
    if fields.len() != 3 {
        return Err(CliError::Usage(format!(
            "shape must be M,N,K, got {spec:?}"
        )));
    }
    let mut dims = [0usize; 3];
    for (slot, field) in dims.iter_mut().zip(&fields) {
        *slot = field
            .parse()
            .map_err(|_| CliError::Usage(format!("{field:?} is not a positive integer")))?;
    }
    GemmProblem::new(dims[0], dims[1], dims[2]).map_err(|e| CliError::Usage(e.to_string()))
}

fn write_output(
    path: &Option<PathBuf>,
    contents: impl FnOnce(&mut dyn Write) -> CliResult<()>,
) -> CliResult<()> {
    match path {
        Some(p) => {
            let mut f = File::create(p)?;
            contents(&mut f)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            contents(&mut lock)
        }
    }
}

fn cmd_bench(args: BenchArgs) -> CliResult<()> {
    let kernel: KernelId = args.kernel.into();
    let baseline: KernelId = args.baseline.into();
    let scheme = parse_scheme_arg(&args.scheme, kernel)?;
    let format = ReportFormat::parse(&args.format)?;
    let catalog = resolve_catalog(&args.catalog)?;
    let cfg = BenchConfig {
        kernel,
        baseline,
        scheme,
        bits: args.bits,
        signed: !args.unsigned,
        repeats: args.repeats,
        warmup: args.warmup,
        seed: args.seed,
        force_scalar: args.force_scalar,
        profile_stages: args.profile_stages,
        workers: args.workers.max(1),
        ..BenchConfig::default()
    };
    let report = run_benchmark(&catalog, &cfg)?;
    for r in &report.records {
        eprintln!(
            "({}, {}, {}) {}[{}] median {:.0} ns vs {} {:.0} ns -> speedup {:.2}x",
            r.shape.m,
            r.shape.n,
            r.shape.k,
            r.kernel,
            r.scheme,
            r.median_ns,
            r.baseline,
            r.baseline_median_ns,
            r.speedup
        );
    }
    eprintln!(
        "geomean speedup over {} shapes: {:.2}x (baseline: internal)",
        report.records.len(),
        report.summary.geomean_speedup
    );
    write_output(&args.output, |w| emit_report(&report, format, w))
}

fn cmd_profile(args: ProfileArgs) -> CliResult<()> {
    let kernel: KernelId = args.kernel.into();
    let scheme = parse_scheme_arg(&args.scheme, kernel)?;
    let problem = parse_shape(&args.shape)?;
    let timing = profile_stages(
        problem,
        kernel,
        scheme,
        args.bits,
        !args.unsigned,
        args.seed,
        args.repeats,
        args.force_scalar,
    )?;
    write_output(&args.output, |w| {
        serde_json::to_writer_pretty(&mut *w, &timing).map_err(CliError::from)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn cmd_pack(args: PackArgs) -> CliResult<()> {
    use rand::{Rng, SeedableRng};
    let scheme = PackScheme::parse(&args.scheme)
        .map_err(|_| CliError::Usage(format!("unknown scheme {:?}", args.scheme)))?;
    if args.rows == 0 || args.cols == 0 {
        return Err(CliError::Usage("rows and cols must be positive".into()));
    }
    if !matches!(args.bits, 2..=4) {
        return Err(CliError::Usage(format!(
            "unsupported bit width {}",
            args.bits
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let max = 1u8 << args.bits;
    let codes: Vec<u8> = (0..args.rows * args.cols)
        .map(|_| rng.random_range(0..max))
        .collect();
    let tensor = CodeTensor::new(args.rows, args.cols, args.bits, codes)?;
    // pad with the raw zero pattern; signedness is a kernel-time concern
    let packed = pack_gemm_weights(&tensor, scheme, Some(0))?;
    let mut file = File::create(&args.output)?;
    packed.write_to(&mut file)?;
    eprintln!(
        "packed {}x{} {}-bit weights (scheme {}) into {} ({} data bytes)",
        args.rows,
        args.cols,
        args.bits,
        scheme.letter(),
        args.output.display(),
        packed.data().len()
    );
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> CliResult<()> {
    let mut file = File::open(&args.file)?;
    let packed = PackedMatrix::read_from(&mut file)?;
    let header = serde_json::json!({
        "role": match packed.role() {
            lutgemm_core::OperandRole::Weight => "weight",
            lutgemm_core::OperandRole::Activation => "activation",
        },
        "scheme": packed.scheme().letter().to_string(),
        "bits": packed.bits(),
        "rows": packed.rows(),
        "cols": packed.cols(),
        "pad_code": packed.pad_code(),
        "data_bytes": packed.data().len(),
    });
    println!("{}", serde_json::to_string_pretty(&header)?);
    Ok(())
}

fn cmd_cost() -> CliResult<()> {
    let mut unpack = serde_json::Map::new();
    for scheme in PackScheme::ALL {
        let c = cost::unpack_cost(scheme);
        unpack.insert(
            scheme.letter().to_string(),
            serde_json::json!({
                "and": c.and_ops,
                "shift": c.shift_ops,
                "or": c.or_ops,
                "shuffle": c.shuffle_ops,
                "total": c.total(),
            }),
        );
    }
    let mut storage = serde_json::Map::new();
    for bits in [2u8, 3, 4] {
        let s = lut_storage(bits)?;
        storage.insert(
            bits.to_string(),
            serde_json::json!({
                "index_bits": s.index_bits,
                "entries": s.entries,
                "size_bits": s.size_bits,
                "vector_registers_256b": s.vector_registers_256b,
                "fits_l1": s.fits_l1,
            }),
        );
    }
    let mut density = serde_json::Map::new();
    for value_bits in [2u32, 8, 32] {
        density.insert(
            value_bits.to_string(),
            serde_json::json!(cost::values_per_register(256, value_bits)?),
        );
    }
    let doc = serde_json::json!({
        "unpack_cost_per_output": unpack,
        "lut_storage": storage,
        "values_per_256b_register": density,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(args) => cmd_bench(args),
        Command::Profile(args) => cmd_profile(args),
        Command::Pack(args) => cmd_pack(args),
        Command::Inspect(args) => cmd_inspect(args),
        Command::Cost => cmd_cost(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

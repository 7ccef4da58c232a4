//! Benchmark harness for the lookup-table GEMM kernels: shape catalogs,
//! seeded input generation, timed kernel runs with a correctness gate,
//! four-stage pipeline profiling, and machine-readable reports.

pub mod catalog;
pub mod gen;
pub mod harness;
pub mod report;

use thiserror::Error;

pub use catalog::{builtin_catalog, builtin_names, load_catalog, resolve_catalog, ShapeCatalog};
pub use gen::{generate_case, shape_seed, BenchCase};
pub use harness::{profile_stages, run_benchmark, BenchConfig, KernelId};
pub use report::{
    emit_report, geomean, Environment, ProfileReport, ReportFormat, ShapeDims, ShapeRecord,
    StageTiming, Summary,
};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, flag combinations or malformed input files. Exit code 2.
    #[error("{0}")]
    Usage(String),

    /// A lookup kernel disagreed with the reference GEMM. Exit code 1.
    #[error("correctness gate failed: {0}")]
    Gate(String),

    #[error(transparent)]
    Core(#[from] lutgemm_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("report serialization failed: {0}")]
    Report(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

//! Benchmark report types and emission.
//!
//! JSON reports carry three top-level keys: `environment` (capability
//! flags, clock source, baseline provenance), `records` (one per shape)
//! and `summary` (geomean speedup). CSV reports are one row per shape
//! with the fixed header
//! `shape_m,shape_n,shape_k,kernel,scheme,median_ns,baseline_ns,speedup`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeDims {
    pub m: usize,
    pub n: usize,
    pub k: usize,
}

/// Wall time of the four pipeline stages around one kernel invocation,
/// plus the attribution of the kernel stage to its three internal steps.
/// Fractions are normalized to sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub act_quantize_ns: f64,
    pub act_pack_ns: f64,
    pub lut_conv_ns: f64,
    pub act_dequantize_ns: f64,
    pub unpack_fraction: f64,
    pub lookup_fraction: f64,
    pub accumulate_fraction: f64,
}

impl StageTiming {
    /// Largest of the four pipeline stages, by name.
    pub fn largest_stage(&self) -> &'static str {
        let stages = [
            ("act_quantize", self.act_quantize_ns),
            ("act_pack", self.act_pack_ns),
            ("lut_conv", self.lut_conv_ns),
            ("act_dequantize", self.act_dequantize_ns),
        ];
        stages
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("stage times are finite"))
            .expect("four stages")
            .0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeRecord {
    pub shape: ShapeDims,
    pub kernel: String,
    pub scheme: String,
    pub bits: u8,
    pub repeats: u32,
    pub median_ns: f64,
    pub baseline: String,
    pub baseline_median_ns: f64,
    pub speedup: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub unpack_cost_per_output: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stage_timing: Option<StageTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub arch: String,
    pub avx2: bool,
    pub kernel_path: String,
    pub clock_source: String,
    /// Baselines are the library's own reference GEMMs, not an external
    /// framework; speedups are comparable only within this report.
    pub baseline: String,
}

impl Environment {
    pub fn capture(kernel_path: &str) -> Self {
        #[cfg(target_arch = "x86_64")]
        let avx2 = std::arch::is_x86_feature_detected!("avx2");
        #[cfg(not(target_arch = "x86_64"))]
        let avx2 = false;
        Self {
            arch: std::env::consts::ARCH.to_string(),
            avx2,
            kernel_path: kernel_path.to_string(),
            clock_source: "std::time::Instant (monotonic)".to_string(),
            baseline: "internal".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub geomean_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub environment: Environment,
    pub records: Vec<ShapeRecord>,
    pub summary: Summary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(CliError::Usage(format!(
                "unknown report format {other:?}, expected json or csv"
            ))),
        }
    }
}

/// Geometric mean of positive ratios.
pub fn geomean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

pub const CSV_HEADER: &str = "shape_m,shape_n,shape_k,kernel,scheme,median_ns,baseline_ns,speedup";

/// Writes a report. Reports with no records are rejected before any
/// output is produced.
pub fn emit_report<W: Write + ?Sized>(
    report: &ProfileReport,
    format: ReportFormat,
    out: &mut W,
) -> CliResult<()> {
    if report.records.is_empty() {
        return Err(CliError::Usage("report holds no records".into()));
    }
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, report)?;
            out.write_all(b"\n")?;
        }
        ReportFormat::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for r in &report.records {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.shape.m,
                    r.shape.n,
                    r.shape.k,
                    r.kernel,
                    r.scheme,
                    r.median_ns,
                    r.baseline_median_ns,
                    r.speedup
                )?;
            }
        }
    }
    Ok(())
}

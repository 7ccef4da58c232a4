//! Layer-shape catalogs: CSV files of `M,N,K` GEMM problems.
//!
//! The built-in catalogs are lowered from the standard definitions of
//! common convolutional architectures (M = output channels, N = input
//! channels x kernel area, K = output spatial size). They are
//! reconstructions for benchmarking, not published measurement sets.

use std::fs;
use std::path::Path;

use lutgemm_core::GemmProblem;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeCatalog {
    pub name: String,
    pub shapes: Vec<GemmProblem>,
}

impl ShapeCatalog {
    pub fn new(name: impl Into<String>, shapes: Vec<GemmProblem>) -> CliResult<Self> {
        if shapes.is_empty() {
            return Err(CliError::Usage("catalog holds no shapes".into()));
        }
        Ok(Self {
            name: name.into(),
            shapes,
        })
    }
}

/// Parses catalog text: one `M,N,K` triple per line, `#` comments and
/// blank lines ignored. Errors carry the 1-based line number.
pub fn parse_catalog(name: &str, text: &str) -> CliResult<ShapeCatalog> {
    let mut shapes = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(CliError::Usage(format!(
                "{name}:{}: expected M,N,K, got {raw:?}",
                lineno + 1
            )));
        }
        let mut dims = [0usize; 3];
        for (slot, field) in dims.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| {
                CliError::Usage(format!(
                    "{name}:{}: {field:?} is not a positive integer",
                    lineno + 1
                ))
            })?;
        }
        let problem = GemmProblem::new(dims[0], dims[1], dims[2])
            .map_err(|e| CliError::Usage(format!("{name}:{}: {e}", lineno + 1)))?;
        shapes.push(problem);
    }
    if shapes.is_empty() {
        return Err(CliError::Usage(format!("{name}: catalog holds no shapes")));
    }
    ShapeCatalog::new(name, shapes)
}

pub fn load_catalog(path: &Path) -> CliResult<ShapeCatalog> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read catalog {}: {e}", path.display())))?;
    parse_catalog(&path.display().to_string(), &text)
}

const BUILTINS: [(&str, &str); 5] = [
    ("mobilenetv1", include_str!("../catalogs/mobilenetv1.csv")),
    ("resnet18", include_str!("../catalogs/resnet18.csv")),
    ("resnet34", include_str!("../catalogs/resnet34.csv")),
    ("resnet50", include_str!("../catalogs/resnet50.csv")),
    ("nsweep", include_str!("../catalogs/nsweep.csv")),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

pub fn builtin_catalog(name: &str) -> Option<ShapeCatalog> {
    BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| parse_catalog(n, text).expect("built-in catalogs parse"))
}

/// A built-in catalog name or a path to a CSV file.
pub fn resolve_catalog(spec: &str) -> CliResult<ShapeCatalog> {
    if let Some(catalog) = builtin_catalog(spec) {
        return Ok(catalog);
    }
    let path = Path::new(spec);
    if path.exists() {
        return load_catalog(path);
    }
    Err(CliError::Usage(format!(
        "catalog {spec:?} is neither a built-in ({}) nor a readable file",
        builtin_names().join(", ")
    )))
}

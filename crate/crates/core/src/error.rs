//! Error type shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scale must be finite and non-zero, got {0}")]
    InvalidScale(f32),

    #[error("zero-point must be finite, got {0}")]
    InvalidZeroPoint(f32),

    #[error("unsupported bit width {0}, expected 2, 3 or 4")]
    UnsupportedBits(u8),

    #[error("non-finite input value at element {index}")]
    NonFiniteInput { index: usize },

    #[error("code {code} at element {index} outside the valid {bits}-bit range")]
    CodeOutOfRange { index: usize, code: i64, bits: u8 },

    #[error("codebook for {bits} bits must hold {expected} levels, got {got}")]
    CodebookSize {
        bits: u8,
        expected: usize,
        got: usize,
    },

    #[error("codebook level {index} is not finite")]
    CodebookNonFinite { index: usize },

    #[error("value map is not integer-valued: code {code} maps to {value}")]
    NonIntegerValueMap { code: u8, value: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("columns ({cols}) are not a multiple of {values_per_byte} values per byte and no pad code was given")]
    PaddingRequired { cols: usize, values_per_byte: usize },

    #[error("operation requires a {expected} operand")]
    WrongRole { expected: &'static str },

    #[error("scheme {scheme} is not defined for {bits}-bit {role} data")]
    UnsupportedScheme {
        scheme: char,
        bits: u8,
        role: &'static str,
    },

    #[error("kernel scheme {kernel} does not match packed weight scheme {packed}")]
    SchemeMismatch { kernel: char, packed: char },

    #[error("lookup table does not fit this kernel: {0}")]
    LutMismatch(String),

    #[error("table entry at index {index} ({value}) overflows 8 bits")]
    Int8Overflow { index: usize, value: i64 },

    #[error("integer overflow in {context}")]
    IntegerOverflow { context: &'static str },

    #[error("{value_bits}-bit values do not divide a {register_bits}-bit register")]
    NonDivisible { register_bits: u32, value_bits: u32 },

    #[error("reduction length {n} is ragged, pad values are non-zero and the scalar remainder path is disabled")]
    RemainderPathDisabled { n: usize },

    #[error("invalid serialized matrix: {0}")]
    InvalidHeader(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

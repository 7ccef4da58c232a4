//! Lookup-table GEMM for ultra low-bit (2-4 bit) quantized matrices on
//! SIMD CPUs.
//!
//! Multiplying sub-byte codes does not map onto commodity SIMD integer
//! units, so these kernels precompute every possible product of a weight
//! code and an activation code in a lookup table and replace
//! multiply-accumulate with table indexing:
//!
//! * [`quant`] — uniform and codebook quantization between real tensors
//!   and sub-byte codes;
//! * [`packing`] — bit-exact byte layouts (schemes A-D), the offline
//!   weight reordering, and lookup-index extraction;
//! * [`lut`] — table construction: 16-entry per-pair tables, their 3/4-bit
//!   generalizations, and the 65,536-entry per-quad table;
//! * [`kernels`] — brute-force reference GEMMs, the in-register and
//!   cache-table lookup kernels, and the horizontal reduction;
//! * [`cost`] — analytical per-output instruction counts for the packing
//!   schemes and register-occupancy arithmetic.
//!
//! Integer-mode lookup kernels are bit-identical to the scalar reference
//! on every path; that property is what the test suite is built around.

pub mod cost;
pub mod error;
pub mod kernels;
pub mod lut;
pub mod packing;
pub mod quant;

pub use error::{Error, Result};
pub use kernels::{
    gemm_lut16, gemm_lut65k, gemm_lut_general, gemm_reference_quant, gemm_reference_real,
    horizontal_reduce, select_kernel_path, AccumData, AccumMatrix, AccumMode, GemmProblem,
    KernelOpts, KernelPath,
};
pub use lut::{
    build_lut16, build_lut65k, build_lut_general, lut_storage, EntryDomain, LookupTable,
};
pub use packing::{
    gather_index_lut65k, gather_indices_lut16, pack, pack_gemm_weights, reorder_weights_offline,
    unpack, OperandRole, PackScheme, PackedMatrix,
};
pub use quant::{
    code_value, dequantize_uniform, quantize_uniform, CodeTensor, Codebook, QuantParams,
    RealMatrix, ValueMap,
};

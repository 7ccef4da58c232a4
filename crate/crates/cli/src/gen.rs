//! Seeded benchmark input generation. The same seed always produces the
//! same codes, value maps and real tensors, so benchmark runs are
//! reproducible and the correctness gate is deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lutgemm_core::{
    dequantize_uniform, CodeTensor, GemmProblem, QuantParams, RealMatrix, ValueMap,
};

/// One benchmark problem instance: quantized codes for both operands plus
/// the real tensors they decode to (inputs for the f32 baseline and the
/// quantize-stage timing).
#[derive(Debug, Clone, PartialEq)]
pub struct BenchCase {
    pub problem: GemmProblem,
    pub params: QuantParams,
    pub a_map: ValueMap,
    pub w_map: ValueMap,
    pub codes_a: CodeTensor,
    pub codes_w: CodeTensor,
    pub a_real: RealMatrix,
    pub w_real: RealMatrix,
}

/// Decorrelates per-shape streams drawn from one base seed.
pub fn shape_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Generates a case with uniformly random codes. The value maps are
/// unit-scale uniform quantizers (scale 1, zero-point 0), so integer
/// tables are exact and the real tensors are the decoded code values.
pub fn generate_case(problem: GemmProblem, bits: u8, signed: bool, seed: u64) -> BenchCase {
    let params = QuantParams::new(1.0, 0.0, bits, signed).expect("unit quantizer is valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = 1u8 << bits;
    let mut draw = |rows: usize, cols: usize| {
        let codes: Vec<u8> = (0..rows * cols).map(|_| rng.random_range(0..max)).collect();
        CodeTensor::new(rows, cols, bits, codes).expect("codes drawn in range")
    };
    let codes_a = draw(problem.m, problem.n);
    let codes_w = draw(problem.n, problem.k);
    let a_real = dequantize_uniform(&codes_a, &params).expect("codes in range");
    let w_real = dequantize_uniform(&codes_w, &params).expect("codes in range");
    BenchCase {
        problem,
        params,
        a_map: ValueMap::Uniform(params),
        w_map: ValueMap::Uniform(params),
        codes_a,
        codes_w,
        a_real,
        w_real,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_case() {
        let problem = GemmProblem::new(5, 17, 3).unwrap();
        let a = generate_case(problem, 2, true, 42);
        let b = generate_case(problem, 2, true, 42);
        assert_eq!(a, b);
        let c = generate_case(problem, 2, true, 43);
        assert_ne!(a.codes_a, c.codes_a);
    }

    #[test]
    fn real_tensors_requantize_to_the_same_codes() {
        let problem = GemmProblem::new(3, 9, 4).unwrap();
        let case = generate_case(problem, 3, true, 7);
        let requant = lutgemm_core::quantize_uniform(&case.a_real, &case.params).unwrap();
        assert_eq!(requant, case.codes_a);
    }

    #[test]
    fn shape_seeds_decorrelate() {
        let s: Vec<u64> = (0..4).map(|i| shape_seed(9, i)).collect();
        assert!(s.windows(2).all(|w| w[0] != w[1]));
    }
}

//! Deterministic inputs shared by the benchmarks.

use packconv::{FeatureMap, KernelTensor, QuantSeq};

/// A cheap, fixed sequence of values in `0..2^bits`.
pub fn ramp(len: usize, bits: u32, salt: u64) -> Vec<i64> {
    let modulus = 1u64 << bits;
    (0..len as u64)
        .map(|i| (i.wrapping_mul(2654435761).wrapping_add(salt) >> 7) % modulus)
        .map(|v| v as i64)
        .collect()
}

pub fn sequence(len: usize, bits: u32, salt: u64) -> QuantSeq {
    QuantSeq::unsigned(ramp(len, bits, salt), bits).expect("values in range")
}

pub fn layer(
    ci: usize,
    co: usize,
    h: usize,
    w: usize,
    k: usize,
    bits: u32,
) -> (FeatureMap, KernelTensor) {
    let input = FeatureMap::new(ramp(ci * h * w, bits, 1), ci, h, w, bits, false)
        .expect("valid feature map");
    let kernel = KernelTensor::new(ramp(co * ci * k * k, bits, 2), co, ci, k, bits, false)
        .expect("valid kernel");
    (input, kernel)
}

//! Seeded random inputs.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`; trial
//! `t` draws from stream `t`, so trials are independent of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use packconv::packing::quant_range;

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// How input values are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fill {
    Uniform,
    AllMin,
    AllMax,
    /// Each element independently at the minimum or the maximum.
    Extremes,
}

impl Fill {
    pub fn extremal(rng: &mut impl Rng) -> Self {
        match rng.random_range(0..3) {
            0 => Fill::AllMin,
            1 => Fill::AllMax,
            _ => Fill::Extremes,
        }
    }
}

pub fn values(rng: &mut impl Rng, len: usize, bits: u32, signed: bool, fill: Fill) -> Vec<i64> {
    let (lo, hi) = quant_range(bits, signed);
    (0..len)
        .map(|_| match fill {
            Fill::Uniform => rng.random_range(lo..=hi),
            Fill::AllMin => lo,
            Fill::AllMax => hi,
            Fill::Extremes => {
                if rng.random_bool(0.5) {
                    lo
                } else {
                    hi
                }
            }
        })
        .collect()
}

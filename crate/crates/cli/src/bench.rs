//! Multiply-count benchmarks. Counts are exact and deterministic; wall
//! times are informational only.

use std::time::Instant;

use serde::Serialize;

use packconv::dnnconv::conv_layer_with_plan;
use packconv::{
    conv_extended, naive_conv1d, naive_conv_layer, plan_layer, search_optimal, FeatureMap,
    KernelTensor, MultiplierSpec, QuantSeq, QuantSpec,
};

use crate::rng::{trial_rng, values, Fill};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
pub enum BenchLevel {
    #[value(name = "1d")]
    #[serde(rename = "1d")]
    OneD,
    #[value(name = "layer")]
    #[serde(rename = "layer")]
    Layer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KernelFill {
    Random,
    /// One unit tap per output channel, so the layer copies input channels.
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LayerShape {
    pub ci: usize,
    pub co: usize,
    pub hi: usize,
    pub wi: usize,
    pub k: usize,
}

impl Default for LayerShape {
    /// The final 3x3 layer of a small detection network, at 4 bits.
    fn default() -> Self {
        Self {
            ci: 64,
            co: 36,
            hi: 12,
            wi: 22,
            k: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BenchConfig {
    pub level: BenchLevel,
    pub p: u32,
    pub q: u32,
    pub bit_a: u32,
    pub bit_b: u32,
    pub signed_f: bool,
    pub signed_g: bool,
    pub seed: u64,
    /// Input length for the 1-D level.
    pub size: usize,
    pub shape: LayerShape,
    pub kernel: KernelFill,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Geometry {
    pub slice_width: u32,
    pub guard_bits: u32,
    pub n: usize,
    pub k: usize,
    /// Channels accumulated per packed word.
    pub m: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub geometry: Geometry,
    pub outputs_match_oracle: bool,
    pub wide_multiplies: u64,
    pub predicted_wide_multiplies: u64,
    pub naive_scalar_multiplies: u64,
    pub naive_scalar_adds: u64,
    /// Equivalent operations per wide multiply for this geometry.
    pub ops_per_multiply: u64,
    pub nk: u64,
    /// `naive_scalar_multiplies / wide_multiplies`.
    pub multiply_ratio: f64,
    /// The same ratio from the geometry alone.
    pub predicted_ratio: f64,
    pub wall_time_informational: WallTime,
}

/// Best of a few runs, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WallTime {
    pub packed_ns: u128,
    pub naive_ns: u128,
}

const TIMING_RUNS: usize = 3;

fn best_of<T>(mut f: impl FnMut() -> T) -> u128 {
    (0..TIMING_RUNS)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(f());
            t.elapsed().as_nanos()
        })
        .min()
        .unwrap_or(0)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn bench_1d(
    cfg: &BenchConfig,
    spec: MultiplierSpec,
    quant: QuantSpec,
) -> Result<BenchReport, CliError> {
    if cfg.size == 0 {
        return Err(CliError::usage("--size must be positive"));
    }
    let params = search_optimal(spec, quant, 1)?;
    let mut rng = trial_rng(cfg.seed, 0);
    let f = QuantSeq::new(
        values(
            &mut rng,
            cfg.size,
            quant.p(),
            quant.signed_f(),
            Fill::Uniform,
        ),
        quant.p(),
        quant.signed_f(),
    )?;
    let g = QuantSeq::new(
        values(
            &mut rng,
            params.k,
            quant.q(),
            quant.signed_g(),
            Fill::Uniform,
        ),
        quant.q(),
        quant.signed_g(),
    )?;

    let packed = conv_extended(&f, &g, &params)?;
    let (want, naive_ops) = naive_conv1d(&f, &g)?;
    if packed.values != want {
        return Err(CliError::failure(
            "packed 1-D convolution disagrees with the oracle",
        ));
    }

    let predicted = cfg.size.div_ceil(params.n) as u64;
    let wall = WallTime {
        packed_ns: best_of(|| conv_extended(&f, &g, &params)),
        naive_ns: best_of(|| naive_conv1d(&f, &g)),
    };
    Ok(BenchReport {
        config: *cfg,
        geometry: geometry(&params),
        outputs_match_oracle: true,
        wide_multiplies: packed.wide_multiplies,
        predicted_wide_multiplies: predicted,
        naive_scalar_multiplies: naive_ops.scalar_multiplies,
        naive_scalar_adds: naive_ops.scalar_adds,
        ops_per_multiply: params.ops(),
        nk: (params.n * params.k) as u64,
        multiply_ratio: ratio(naive_ops.scalar_multiplies, packed.wide_multiplies),
        predicted_ratio: ratio((cfg.size * params.k) as u64, predicted),
        wall_time_informational: wall,
    })
}

fn geometry(params: &packconv::PackParams) -> Geometry {
    Geometry {
        slice_width: params.slice_width,
        guard_bits: params.guard_bits,
        n: params.n,
        k: params.k,
        m: params.m,
    }
}

fn delta_kernel(s: &LayerShape) -> Vec<i64> {
    let mut w = vec![0; s.co * s.ci * s.k * s.k];
    let c = s.k / 2;
    for o in 0..s.co {
        w[((o * s.ci + o % s.ci) * s.k + c) * s.k + c] = 1;
    }
    w
}

fn bench_layer(
    cfg: &BenchConfig,
    spec: MultiplierSpec,
    quant: QuantSpec,
) -> Result<BenchReport, CliError> {
    let s = cfg.shape;
    if [s.ci, s.co, s.hi, s.wi, s.k].contains(&0) {
        return Err(CliError::usage("layer dimensions must be positive"));
    }
    if s.k > s.hi || s.k > s.wi {
        return Err(CliError::usage(format!(
            "{}x{} kernel larger than the {}x{} input",
            s.k, s.k, s.hi, s.wi
        )));
    }
    let mut rng = trial_rng(cfg.seed, 0);
    let x = values(
        &mut rng,
        s.ci * s.hi * s.wi,
        quant.p(),
        quant.signed_f(),
        Fill::Uniform,
    );
    let w = match cfg.kernel {
        KernelFill::Random => values(
            &mut rng,
            s.co * s.ci * s.k * s.k,
            quant.q(),
            quant.signed_g(),
            Fill::Uniform,
        ),
        KernelFill::Delta => delta_kernel(&s),
    };
    let input = FeatureMap::new(x, s.ci, s.hi, s.wi, quant.p(), quant.signed_f())?;
    let kernel = KernelTensor::new(w, s.co, s.ci, s.k, quant.q(), quant.signed_g())?;
    let plan = plan_layer(spec, quant, s.ci, s.k, s.wi)?;

    let packed = conv_layer_with_plan(&input, &kernel, &plan)?;
    let (want, naive_ops) = naive_conv_layer(&input, &kernel)?;
    if packed.data() != want.data() {
        return Err(CliError::failure("packed layer disagrees with the oracle"));
    }

    let predicted = plan.expected_wide_multiplies(input.dims(), kernel.dims());
    let wall = WallTime {
        packed_ns: best_of(|| conv_layer_with_plan(&input, &kernel, &plan)),
        naive_ns: best_of(|| naive_conv_layer(&input, &kernel)),
    };
    Ok(BenchReport {
        config: *cfg,
        geometry: geometry(&plan.params),
        outputs_match_oracle: true,
        wide_multiplies: packed.wide_multiplies,
        predicted_wide_multiplies: predicted,
        naive_scalar_multiplies: naive_ops.scalar_multiplies,
        naive_scalar_adds: naive_ops.scalar_adds,
        ops_per_multiply: plan.params.ops(),
        nk: (plan.params.n * plan.params.k) as u64,
        multiply_ratio: ratio(naive_ops.scalar_multiplies, packed.wide_multiplies),
        predicted_ratio: ratio(naive_ops.scalar_multiplies, predicted),
        wall_time_informational: wall,
    })
}

/// Validates the packed path against the oracle, then times both.
pub fn run(cfg: BenchConfig) -> Result<BenchReport, CliError> {
    let spec = MultiplierSpec::new(cfg.bit_a, cfg.bit_b)?;
    let quant = QuantSpec::new(cfg.p, cfg.q, cfg.signed_f, cfg.signed_g)?;
    match cfg.level {
        BenchLevel::OneD => bench_1d(&cfg, spec, quant),
        BenchLevel::Layer => bench_layer(&cfg, spec, quant),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(level: BenchLevel, p: u32, q: u32) -> BenchConfig {
        BenchConfig {
            level,
            p,
            q,
            bit_a: 32,
            bit_b: 32,
            signed_f: false,
            signed_g: false,
            seed: 1,
            size: 3000,
            shape: LayerShape {
                ci: 8,
                co: 4,
                hi: 6,
                wi: 10,
                k: 3,
            },
            kernel: KernelFill::Random,
        }
    }

    #[test]
    fn one_d_counts() {
        let r = run(cfg(BenchLevel::OneD, 4, 4)).unwrap();
        assert_eq!(r.wide_multiplies, 1000);
        assert_eq!(r.naive_scalar_multiplies, 9000);
        assert_eq!(r.multiply_ratio, 9.0);
        assert_eq!(r.predicted_ratio, r.multiply_ratio);
    }

    #[test]
    fn binary_ratio_is_nk() {
        let r = run(cfg(BenchLevel::OneD, 1, 1)).unwrap();
        let params = search_optimal(
            MultiplierSpec::new(32, 32).unwrap(),
            QuantSpec::unsigned(1, 1).unwrap(),
            1,
        )
        .unwrap();
        assert_eq!(r.nk, (params.n * params.k) as u64);
        assert_eq!(r.multiply_ratio, r.nk as f64);
    }

    #[test]
    fn delta_layer_matches_oracle() {
        let mut c = cfg(BenchLevel::Layer, 4, 4);
        c.kernel = KernelFill::Delta;
        let r = run(c).unwrap();
        assert!(r.outputs_match_oracle);
        assert_eq!(r.wide_multiplies, r.predicted_wide_multiplies);
    }
}

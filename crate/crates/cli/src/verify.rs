//! Randomized equivalence checks of the packed kernels against the oracle.

use rayon::prelude::*;
use serde::Serialize;

use packconv::{
    conv_base, conv_extended, conv_layer, conv_multichannel, naive_conv1d, naive_conv_layer,
    search_optimal, FeatureMap, KernelTensor, MultiplierSpec, QuantSeq, QuantSpec,
};

use crate::rng::{trial_rng, values, Fill};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Base,
    Extended,
    Multichannel,
    Layer,
}

/// Every fourth trial uses extremal inputs.
const EXTREMAL_EVERY: u64 = 4;

const MAX_EXTENDED_LEN: usize = 64;
const MAX_MULTICHANNEL_LEN: usize = 40;
const MAX_CHANNELS: usize = 4;
const MAX_LAYER_KERNEL: usize = 5;
const MAX_LAYER_SIDE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VerifyConfig {
    pub level: Level,
    pub p: u32,
    pub q: u32,
    pub bit_a: u32,
    pub bit_b: u32,
    pub signed_f: bool,
    pub signed_g: bool,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    #[serde(flatten)]
    pub config: VerifyConfig,
    pub failures: u64,
    pub extremal_trials: u64,
    pub first_failure: Option<Failure>,
}

/// Enough to reproduce one failing trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub trial: u64,
    pub extremal: bool,
    pub inputs: Inputs,
    pub expected: Vec<i64>,
    /// Kernel output, or the error it raised.
    pub got: Result<Vec<i64>, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Inputs {
    Sequences {
        channels: u32,
        f: Vec<Vec<i64>>,
        g: Vec<Vec<i64>>,
    },
    Layer {
        input_shape: [usize; 3],
        input: Vec<i64>,
        kernel_shape: [usize; 4],
        kernel: Vec<i64>,
    },
}

fn expected_sum(fs: &[QuantSeq], gs: &[QuantSeq]) -> Vec<i64> {
    let mut sum: Vec<i64> = Vec::new();
    for (f, g) in fs.iter().zip(gs) {
        let (y, _) = naive_conv1d(f, g).expect("nonempty sequences");
        if sum.len() < y.len() {
            sum.resize(y.len(), 0);
        }
        for (s, v) in sum.iter_mut().zip(y) {
            *s += v;
        }
    }
    sum
}

fn run_trial(
    cfg: &VerifyConfig,
    spec: MultiplierSpec,
    quant: QuantSpec,
    trial: u64,
) -> Option<Failure> {
    let mut rng = trial_rng(cfg.seed, trial);
    let extremal = trial % EXTREMAL_EVERY == EXTREMAL_EVERY - 1;
    let fill = if extremal {
        Fill::extremal(&mut rng)
    } else {
        Fill::Uniform
    };
    let (p, q) = (quant.p(), quant.q());
    let (sf, sg) = (quant.signed_f(), quant.signed_g());

    let (inputs, expected, got) = match cfg.level {
        Level::Base | Level::Extended | Level::Multichannel => {
            let channels = match cfg.level {
                Level::Multichannel => rand::Rng::random_range(&mut rng, 1..=MAX_CHANNELS),
                _ => 1,
            };
            let params = search_optimal(spec, quant, channels as u32).ok()?;
            let max_len = match cfg.level {
                Level::Base => params.n,
                Level::Extended => MAX_EXTENDED_LEN,
                _ => MAX_MULTICHANNEL_LEN,
            };
            let lf = rand::Rng::random_range(&mut rng, 1..=max_len);
            let fs: Vec<QuantSeq> = (0..channels)
                .map(|_| QuantSeq::new(values(&mut rng, lf, p, sf, fill), p, sf).unwrap())
                .collect();
            let gs: Vec<QuantSeq> = (0..channels)
                .map(|_| {
                    let lg = rand::Rng::random_range(&mut rng, 1..=params.k);
                    QuantSeq::new(values(&mut rng, lg, q, sg, fill), q, sg).unwrap()
                })
                .collect();
            let mut expected = expected_sum(&fs, &gs);
            let got = match cfg.level {
                Level::Base => conv_base(&fs[0], &gs[0], &params),
                Level::Extended => conv_extended(&fs[0], &gs[0], &params),
                _ => conv_multichannel(&fs, &gs, &params),
            }
            .map(|r| r.values)
            .map_err(|e| e.to_string());
            if cfg.level == Level::Base {
                // The base kernel reports every segment of the padded word.
                expected.resize(params.segments(), 0);
            }
            let inputs = Inputs::Sequences {
                channels: channels as u32,
                f: fs.into_iter().map(QuantSeq::into_values).collect(),
                g: gs.into_iter().map(QuantSeq::into_values).collect(),
            };
            (inputs, expected, got)
        }
        Level::Layer => {
            use rand::Rng;
            let ci = rng.random_range(1..=MAX_CHANNELS);
            let co = rng.random_range(1..=MAX_CHANNELS);
            let ks = rng.random_range(1..=MAX_LAYER_KERNEL);
            let hi = rng.random_range(ks..=MAX_LAYER_SIDE);
            let wi = rng.random_range(ks..=MAX_LAYER_SIDE);
            let x = values(&mut rng, ci * hi * wi, p, sf, fill);
            let w = values(&mut rng, co * ci * ks * ks, q, sg, fill);
            let input = FeatureMap::new(x.clone(), ci, hi, wi, p, sf).unwrap();
            let kernel = KernelTensor::new(w.clone(), co, ci, ks, q, sg).unwrap();
            let (want, _) = naive_conv_layer(&input, &kernel).unwrap();
            let got = conv_layer(&input, &kernel, spec)
                .map(|o| o.into_data())
                .map_err(|e| e.to_string());
            let inputs = Inputs::Layer {
                input_shape: [ci, hi, wi],
                input: x,
                kernel_shape: [co, ci, ks, ks],
                kernel: w,
            };
            (inputs, want.into_data(), got)
        }
    };

    if got.as_ref() == Ok(&expected) {
        None
    } else {
        Some(Failure {
            trial,
            extremal,
            inputs,
            expected,
            got,
        })
    }
}

/// Runs `cfg.trials` seeded trials. The report depends only on the config.
pub fn run(cfg: VerifyConfig) -> Result<VerifyReport, CliError> {
    let spec = MultiplierSpec::new(cfg.bit_a, cfg.bit_b)?;
    let quant = QuantSpec::new(cfg.p, cfg.q, cfg.signed_f, cfg.signed_g)?;
    // Surface infeasible configurations as usage errors up front.
    search_optimal(spec, quant, 1)?;

    let failures: Vec<Failure> = (0..cfg.trials)
        .into_par_iter()
        .filter_map(|t| run_trial(&cfg, spec, quant, t))
        .collect();
    let first_failure = failures.iter().min_by_key(|f| f.trial).cloned();
    Ok(VerifyReport {
        config: cfg,
        failures: failures.len() as u64,
        extremal_trials: cfg.trials / EXTREMAL_EVERY,
        first_failure,
    })
}

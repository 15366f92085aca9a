//! Naive reference convolutions. Every packed kernel is checked against these.

use serde::{Deserialize, Serialize};

use crate::dnnconv::{FeatureMap, KernelTensor, OutputMap};
use crate::error::{Error, Result};
use crate::packing::QuantSeq;

/// Scalar operations spent by a naive evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    pub scalar_multiplies: u64,
    pub scalar_adds: u64,
}

fn narrow(v: i128) -> i64 {
    i64::try_from(v).expect("oracle result exceeds i64")
}

/// `y[m] = sum_k h[m-k] * g[k]` with `h` the zero extension of `f`.
pub fn naive_conv1d(f: &QuantSeq, g: &QuantSeq) -> Result<(Vec<i64>, OpCount)> {
    if f.is_empty() || g.is_empty() {
        return Err(Error::Shape(
            "naive convolution needs nonempty sequences".into(),
        ));
    }
    Ok(naive_conv1d_values(f.values(), g.values()))
}

pub(crate) fn naive_conv1d_values(f: &[i64], g: &[i64]) -> (Vec<i64>, OpCount) {
    let out_len = f.len() + g.len() - 1;
    let mut count = OpCount::default();
    let y = (0..out_len)
        .map(|m| {
            let mut acc: Option<i128> = None;
            for (k, &gk) in g.iter().enumerate() {
                let Some(n) = m.checked_sub(k) else { break };
                let Some(&fn_) = f.get(n) else { continue };
                let prod = i128::from(fn_) * i128::from(gk);
                count.scalar_multiplies += 1;
                acc = Some(match acc {
                    Some(a) => {
                        count.scalar_adds += 1;
                        a + prod
                    }
                    None => prod,
                });
            }
            narrow(acc.unwrap_or(0))
        })
        .collect();
    (y, count)
}

/// Valid-mode cross-correlation as six nested loops over output channel,
/// input channel, output row, output column, kernel row and kernel column.
pub fn naive_conv_layer(input: &FeatureMap, kernel: &KernelTensor) -> Result<(OutputMap, OpCount)> {
    let (ci, hi, wi) = input.dims();
    let (co, kci, ks) = kernel.dims();
    if kci != ci {
        return Err(Error::Shape(format!(
            "kernel expects {kci} input channels, feature map has {ci}"
        )));
    }
    if ks > hi || ks > wi {
        return Err(Error::Shape(format!(
            "{ks}x{ks} kernel larger than the {hi}x{wi} feature map"
        )));
    }
    let (ho, wo) = (hi - ks + 1, wi - ks + 1);
    let mut acc = vec![0i128; co * ho * wo];
    let mut count = OpCount::default();
    for o in 0..co {
        for c in 0..ci {
            for h in 0..ho {
                for w in 0..wo {
                    let out = &mut acc[(o * ho + h) * wo + w];
                    for kh in 0..ks {
                        for kw in 0..ks {
                            let x = input.get(c, h + kh, w + kw);
                            let k = kernel.get(o, c, kh, kw);
                            *out += i128::from(x) * i128::from(k);
                            count.scalar_multiplies += 1;
                        }
                    }
                }
            }
        }
    }
    let outputs = (co * ho * wo) as u64;
    count.scalar_adds = count.scalar_multiplies - outputs;
    let data = acc.into_iter().map(narrow).collect();
    Ok((OutputMap::new(data, co, ho, wo, 0), count))
}

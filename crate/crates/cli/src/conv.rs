//! File-based convolution.

use std::path::Path;

use packconv::{
    conv_extended, conv_layer, search_optimal, FeatureMap, KernelTensor, MultiplierSpec, QuantSeq,
    QuantSpec,
};

use crate::tensor_file::TensorFile;
use crate::CliError;

fn ceil_log2(x: usize) -> u32 {
    x.next_power_of_two().trailing_zeros()
}

/// Bitwidth holding any sum of `terms` products of a `p`-bit and a `q`-bit
/// operand.
fn output_bitwidth(p: u32, q: u32, terms: usize) -> u32 {
    p + q + ceil_log2(terms)
}

/// Convolves `input` with `kernel`: 1-D full convolution for rank-1 tensors,
/// valid cross-correlation for a `[C_i][H][W]` input and `[C_o][C_i][K][K]`
/// kernel.
pub fn convolve(
    input: &TensorFile,
    kernel: &TensorFile,
    spec: MultiplierSpec,
) -> Result<TensorFile, CliError> {
    let quant = QuantSpec::new(input.bitwidth, kernel.bitwidth, input.signed, kernel.signed)?;
    let signed = quant.signed_output();
    match (input.shape.as_slice(), kernel.shape.as_slice()) {
        (&[_], &[lg]) => {
            let params = search_optimal(spec, quant, 1)?;
            if lg > params.k {
                return Err(CliError::usage(format!(
                    "kernel has {lg} taps; this multiplier packs at most {} at {}x{} bits",
                    params.k,
                    quant.p(),
                    quant.q()
                )));
            }
            let f = QuantSeq::new(input.data.clone(), quant.p(), input.signed)?;
            let g = QuantSeq::new(kernel.data.clone(), quant.q(), kernel.signed)?;
            let y = conv_extended(&f, &g, &params)?;
            let bits = output_bitwidth(quant.p(), quant.q(), lg.min(f.len()));
            Ok(TensorFile {
                shape: vec![y.values.len()],
                bitwidth: bits,
                signed,
                data: y.values,
            })
        }
        (&[ci, hi, wi], &[co, kci, kh, kw]) => {
            if kh != kw {
                return Err(CliError::usage(format!("kernel must be square, got {kh}x{kw}")));
            }
            let fm = FeatureMap::new(input.data.clone(), ci, hi, wi, quant.p(), input.signed)?;
            let kt = KernelTensor::new(kernel.data.clone(), co, kci, kh, quant.q(), kernel.signed)?;
            let out = conv_layer(&fm, &kt, spec)?;
            let (c, h, w) = out.dims();
            Ok(TensorFile {
                shape: vec![c, h, w],
                bitwidth: output_bitwidth(quant.p(), quant.q(), ci * kh * kw),
                signed,
                data: out.into_data(),
            })
        }
        (a, b) => Err(CliError::usage(format!(
            "unsupported shapes {a:?} and {b:?}: expected 1-D with 1-D, or 3-D input with 4-D kernel"
        ))),
    }
}

pub fn run(
    input: &Path,
    kernel: &Path,
    output: &Path,
    bit_a: u32,
    bit_b: u32,
) -> Result<TensorFile, CliError> {
    let spec = MultiplierSpec::new(bit_a, bit_b)?;
    let x = TensorFile::read(input)?;
    let w = TensorFile::read(kernel)?;
    let y = convolve(&x, &w, spec)?;
    y.write(output)?;
    Ok(y)
}

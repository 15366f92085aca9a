//! A convolution layer built from extended 1-D convolutions.
//!
//! Output row `h` of channel `o` gathers, for each input channel and kernel
//! row `kh`, the 1-D convolution of input row `h + kh` with the reversed
//! kernel row. Reversal turns convolution into the layer's cross-correlation,
//! and entry `w + K - 1` of the 1-D result is output column `w`.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv1d::{conv_packed, pack_kernel, PackedKernel};
use crate::error::{Error, Result};
use crate::packing::{quant_range, WideMultiplier};
use crate::params::{search_optimal, MultiplierSpec, PackParams, QuantSpec, MAX_CHANNELS};

fn check_range(data: &[i64], bitwidth: u32, signed: bool) -> Result<()> {
    if !(1..=32).contains(&bitwidth) {
        return Err(Error::Invalid(format!(
            "bitwidth {bitwidth} outside 1..=32"
        )));
    }
    let (lo, hi) = quant_range(bitwidth, signed);
    match data.iter().position(|v| !(lo..=hi).contains(v)) {
        Some(i) => Err(Error::Range(format!(
            "element {i} = {} outside [{lo}, {hi}]",
            data[i]
        ))),
        None => Ok(()),
    }
}

/// Input feature maps, `[C_i][H_i][W_i]` row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMap {
    data: Vec<i64>,
    channels: usize,
    height: usize,
    width: usize,
    bitwidth: u32,
    signed: bool,
}

impl FeatureMap {
    pub fn new(
        data: Vec<i64>,
        channels: usize,
        height: usize,
        width: usize,
        bitwidth: u32,
        signed: bool,
    ) -> Result<Self> {
        if channels * height * width != data.len() || data.is_empty() {
            return Err(Error::Shape(format!(
                "{} elements for a {channels}x{height}x{width} feature map",
                data.len()
            )));
        }
        check_range(&data, bitwidth, signed)?;
        Ok(Self {
            data,
            channels,
            height,
            width,
            bitwidth,
            signed,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn bitwidth(&self) -> u32 {
        self.bitwidth
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn data(&self) -> &[i64] {
        &self.data
    }

    pub fn get(&self, c: usize, h: usize, w: usize) -> i64 {
        self.data[(c * self.height + h) * self.width + w]
    }

    pub fn row(&self, c: usize, h: usize) -> &[i64] {
        let start = (c * self.height + h) * self.width;
        &self.data[start..start + self.width]
    }
}

/// Square kernels, `[C_o][C_i][K][K]` row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelTensor {
    data: Vec<i64>,
    out_channels: usize,
    in_channels: usize,
    size: usize,
    bitwidth: u32,
    signed: bool,
}

impl KernelTensor {
    pub fn new(
        data: Vec<i64>,
        out_channels: usize,
        in_channels: usize,
        size: usize,
        bitwidth: u32,
        signed: bool,
    ) -> Result<Self> {
        if out_channels * in_channels * size * size != data.len() || data.is_empty() {
            return Err(Error::Shape(format!(
                "{} elements for a {out_channels}x{in_channels}x{size}x{size} kernel",
                data.len()
            )));
        }
        check_range(&data, bitwidth, signed)?;
        Ok(Self {
            data,
            out_channels,
            in_channels,
            size,
            bitwidth,
            signed,
        })
    }

    /// `(C_o, C_i, K)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.out_channels, self.in_channels, self.size)
    }

    pub fn bitwidth(&self) -> u32 {
        self.bitwidth
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn data(&self) -> &[i64] {
        &self.data
    }

    pub fn get(&self, o: usize, c: usize, kh: usize, kw: usize) -> i64 {
        self.data[((o * self.in_channels + c) * self.size + kh) * self.size + kw]
    }

    pub fn row(&self, o: usize, c: usize, kh: usize) -> &[i64] {
        let start = ((o * self.in_channels + c) * self.size + kh) * self.size;
        &self.data[start..start + self.size]
    }
}

/// Layer output, `[C_o][H_o][W_o]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputMap {
    data: Vec<i64>,
    channels: usize,
    height: usize,
    width: usize,
    pub wide_multiplies: u64,
}

impl OutputMap {
    pub fn new(
        data: Vec<i64>,
        channels: usize,
        height: usize,
        width: usize,
        wide_multiplies: u64,
    ) -> Self {
        assert_eq!(data.len(), channels * height * width);
        Self {
            data,
            channels,
            height,
            width,
            wide_multiplies,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[i64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<i64> {
        self.data
    }

    pub fn get(&self, c: usize, h: usize, w: usize) -> i64 {
        self.data[(c * self.height + h) * self.width + w]
    }
}

/// How a layer is mapped onto the multiplier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPlan {
    /// Geometry shared by every channel group; `params.m` is the group size.
    pub params: PackParams,
    /// Input channels accumulated in the packed domain.
    pub groups: Vec<Range<usize>>,
    /// Sub-rows each kernel row is split into (`ceil(K / params.k)`).
    pub kernel_pieces: usize,
}

impl LayerPlan {
    /// Multiplies needed for one output channel and row per kernel row and
    /// input channel.
    pub fn cost_per_row(&self, width: usize) -> u64 {
        (width.div_ceil(self.params.n) * self.kernel_pieces) as u64
    }

    /// `C_o * H_o * K * C_i * ceil(W_i/N) * pieces`.
    pub fn expected_wide_multiplies(
        &self,
        input: (usize, usize, usize),
        kernel: (usize, usize, usize),
    ) -> u64 {
        let (ci, hi, wi) = input;
        let (co, _, ks) = kernel;
        let ho = hi + 1 - ks;
        (co * ho * ks * ci) as u64 * self.cost_per_row(wi)
    }
}

/// Picks the channel group size.
///
/// Larger groups need more guard bits and can shrink `N` or `K`. The plan
/// takes the largest group whose geometry still reaches the fewest
/// multiplies per row over all group sizes, so packed-domain accumulation
/// never costs extra multiplies.
pub fn plan_layer(
    spec: MultiplierSpec,
    quant: QuantSpec,
    in_channels: usize,
    kernel_size: usize,
    width: usize,
) -> Result<LayerPlan> {
    if in_channels == 0 || kernel_size == 0 || width == 0 {
        return Err(Error::Shape("layer dimensions must be positive".into()));
    }
    let max_m = in_channels.min(MAX_CHANNELS as usize);
    let mut best: Option<(u64, PackParams)> = None;
    for m in 1..=max_m {
        let params = search_optimal(spec, quant, m as u32)?;
        let cost = (width.div_ceil(params.n) * kernel_size.div_ceil(params.k)) as u64;
        if best.is_none_or(|(c, _)| cost <= c) {
            best = Some((cost, params));
        }
    }
    let (_, params) = best.expect("at least one group size");
    let m = params.m as usize;
    let groups = (0..in_channels)
        .step_by(m)
        .map(|lo| lo..(lo + m).min(in_channels))
        .collect();
    Ok(LayerPlan {
        params,
        groups,
        kernel_pieces: kernel_size.div_ceil(params.k),
    })
}

/// Valid-mode cross-correlation of `input` with `kernel` on the wide
/// multiplier.
pub fn conv_layer(
    input: &FeatureMap,
    kernel: &KernelTensor,
    spec: MultiplierSpec,
) -> Result<OutputMap> {
    let quant = QuantSpec::new(input.bitwidth, kernel.bitwidth, input.signed, kernel.signed)?;
    let (ci, hi, wi) = input.dims();
    let (_, kci, ks) = kernel.dims();
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
    let plan = plan_layer(spec, quant, ci, ks, wi)?;
    conv_layer_with_plan(input, kernel, &plan)
}

/// Runs a layer under an explicit plan.
pub fn conv_layer_with_plan(
    input: &FeatureMap,
    kernel: &KernelTensor,
    plan: &LayerPlan,
) -> Result<OutputMap> {
    let (ci, hi, wi) = input.dims();
    let (co, kci, ks) = kernel.dims();
    if kci != ci || ks > hi || ks > wi {
        return Err(Error::Shape(
            "kernel and feature map shapes disagree".into(),
        ));
    }
    let params = &plan.params;
    let tap_cap = params.k;
    let pieces = plan.kernel_pieces;
    if pieces != ks.div_ceil(tap_cap) {
        return Err(Error::Shape(
            "plan was built for another kernel size".into(),
        ));
    }
    let (ho, wo) = (hi - ks + 1, wi - ks + 1);

    // Kernel rows are reversed and packed once, before any input is touched.
    let mut packed = Vec::with_capacity(co * ci * ks * pieces);
    for o in 0..co {
        for c in 0..ci {
            for kh in 0..ks {
                let reversed: Vec<i64> = kernel.row(o, c, kh).iter().rev().copied().collect();
                for piece in reversed.chunks(tap_cap) {
                    packed.push(pack_kernel(piece, params)?);
                }
            }
        }
    }
    let packed_at =
        |o: usize, c: usize, kh: usize, j: usize| packed[((o * ci + c) * ks + kh) * pieces + j];

    let mul = WideMultiplier::new();
    let channels = (0..co)
        .into_par_iter()
        .map(|o| -> Result<Vec<i64>> {
            let mut out = Vec::with_capacity(ho * wo);
            let mut row_acc = vec![0i64; wi + ks - 1];
            let mut kernels: Vec<PackedKernel> = Vec::with_capacity(params.m as usize);
            for h in 0..ho {
                row_acc.iter_mut().for_each(|v| *v = 0);
                for group in &plan.groups {
                    for kh in 0..ks {
                        let rows: Vec<&[i64]> =
                            group.clone().map(|c| input.row(c, h + kh)).collect();
                        for j in 0..pieces {
                            kernels.clear();
                            kernels.extend(group.clone().map(|c| packed_at(o, c, kh, j)));
                            let y = conv_packed(&rows, &kernels, params, &mul)?;
                            let offset = j * tap_cap;
                            for (n, v) in y.values.into_iter().enumerate() {
                                row_acc[n + offset] += v;
                            }
                        }
                    }
                }
                out.extend_from_slice(&row_acc[ks - 1..ks - 1 + wo]);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let data = channels.into_iter().flatten().collect();
    Ok(OutputMap::new(data, co, ho, wo, mul.count()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::naive_conv_layer;

    fn spec32() -> MultiplierSpec {
        MultiplierSpec::new(32, 32).unwrap()
    }

    fn ramp(len: usize, modulo: i64) -> Vec<i64> {
        (0..len as i64).map(|v| (v * 7 + 3) % modulo).collect()
    }

    #[test]
    fn delta_kernel_copies_input() {
        let input = FeatureMap::new(ramp(36, 16), 1, 6, 6, 4, false).unwrap();
        let mut k = vec![0; 9];
        k[0] = 1;
        let kernel = KernelTensor::new(k, 1, 1, 3, 4, false).unwrap();
        let out = conv_layer(&input, &kernel, spec32()).unwrap();
        assert_eq!(out.dims(), (1, 4, 4));
        for h in 0..4 {
            for w in 0..4 {
                assert_eq!(out.get(0, h, w), input.get(0, h, w));
            }
        }
    }

    #[test]
    fn every_delta_position_shifts_the_input() {
        let input = FeatureMap::new(ramp(2 * 7 * 8, 16), 2, 7, 8, 4, false).unwrap();
        for kh in 0..3 {
            for kw in 0..3 {
                let mut k = vec![0; 2 * 9];
                k[kh * 3 + kw] = 1;
                let kernel = KernelTensor::new(k, 1, 2, 3, 4, false).unwrap();
                let out = conv_layer(&input, &kernel, spec32()).unwrap();
                for h in 0..5 {
                    for w in 0..6 {
                        assert_eq!(
                            out.get(0, h, w),
                            input.get(0, h + kh, w + kw),
                            "delta at ({kh},{kw})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn small_layer_matches_oracle() {
        let input = FeatureMap::new(ramp(2 * 4 * 4, 16), 2, 4, 4, 4, false).unwrap();
        let kernel = KernelTensor::new(ramp(2 * 9, 13), 1, 2, 3, 4, false).unwrap();
        let out = conv_layer(&input, &kernel, spec32()).unwrap();
        let (want, _) = naive_conv_layer(&input, &kernel).unwrap();
        assert_eq!(out.data(), want.data());
    }

    #[test]
    fn long_kernel_rows_are_split() {
        // 27x18 with p=q=4 only holds K=2 taps.
        let spec = MultiplierSpec::new(27, 18).unwrap();
        let input = FeatureMap::new(ramp(3 * 8 * 9, 16), 3, 8, 9, 4, false).unwrap();
        let kernel = KernelTensor::new(ramp(2 * 3 * 25, 16), 2, 3, 5, 4, false).unwrap();
        let quant = QuantSpec::unsigned(4, 4).unwrap();
        let plan = plan_layer(spec, quant, 3, 5, 9).unwrap();
        assert!(plan.kernel_pieces > 1);
        let out = conv_layer(&input, &kernel, spec).unwrap();
        let (want, _) = naive_conv_layer(&input, &kernel).unwrap();
        assert_eq!(out.data(), want.data());
        assert_eq!(
            out.wide_multiplies,
            plan.expected_wide_multiplies(input.dims(), kernel.dims())
        );
    }

    #[test]
    fn plan_prefers_large_groups_at_equal_cost() {
        let quant = QuantSpec::unsigned(4, 4).unwrap();
        let plan = plan_layer(spec32(), quant, 64, 3, 22).unwrap();
        assert_eq!((plan.params.n, plan.params.k), (3, 3));
        // 21 channels * min(N,K)=3 = 63 stacked terms fit in Gb=6.
        assert_eq!(plan.params.m, 21);
        assert_eq!(plan.groups.len(), 4);
        assert_eq!(plan.groups.iter().map(|g| g.len()).sum::<usize>(), 64);
    }

    #[test]
    fn shape_errors() {
        let input = FeatureMap::new(vec![1; 2 * 9], 2, 3, 3, 4, false).unwrap();
        let kernel = KernelTensor::new(vec![1; 9], 1, 1, 3, 4, false).unwrap();
        assert!(matches!(
            conv_layer(&input, &kernel, spec32()),
            Err(Error::Shape(_))
        ));
        let big = KernelTensor::new(vec![1; 2 * 16], 1, 2, 4, 4, false).unwrap();
        assert!(matches!(
            conv_layer(&input, &big, spec32()),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            FeatureMap::new(vec![1; 5], 1, 2, 3, 4, false),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            FeatureMap::new(vec![16], 1, 1, 1, 4, false),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn signed_one_bit_layer_is_rejected() {
        let input = FeatureMap::new(vec![0; 9], 1, 3, 3, 1, true).unwrap();
        let kernel = KernelTensor::new(vec![0; 1], 1, 1, 1, 4, false).unwrap();
        assert!(matches!(
            conv_layer(&input, &kernel, spec32()),
            Err(Error::Invalid(_))
        ));
    }
}

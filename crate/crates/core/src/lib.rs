//! Quantized convolution on a wide integer multiplier.
//!
//! Low-bitwidth operands are packed into the slices of two wide words so
//! that one multiplication produces a whole short convolution. The crate
//! covers the packing geometry ([`params`]), word packing and segmentation
//! ([`packing`]), 1-D kernels ([`conv1d`]), convolution layers
//! ([`dnnconv`]) and naive reference implementations ([`oracle`]).

pub mod conv1d;
pub mod dnnconv;
pub mod error;
pub mod oracle;
pub mod packing;
pub mod params;

pub use conv1d::{conv_base, conv_extended, conv_multichannel, Conv1DResult};
pub use dnnconv::{conv_layer, plan_layer, FeatureMap, KernelTensor, LayerPlan, OutputMap};
pub use error::{Error, Result};
pub use oracle::{naive_conv1d, naive_conv_layer, OpCount};
pub use packing::{pack_signed, pack_unsigned, unpack, PackedWord, QuantSeq, WideMultiplier};
pub use params::{
    guard_bits, search_optimal, slice_width, throughput_grid, MultiplierSpec, PackParams,
    QuantSpec, ThroughputCell,
};

//! 1-D convolution on the wide multiplier.
//!
//! `conv_base` computes an `N x K` convolution with a single multiply.
//! Longer inputs are cut into `N`-element chunks whose partial outputs are
//! added back at offset `x*N`. Channels that share an output are summed as
//! packed products before segmentation, which is what the guard bits budget
//! for.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packing::{
    accumulate, pack_signed, pack_unsigned, unpack, PackedWord, QuantSeq, WideMultiplier,
};
use crate::params::PackParams;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv1DResult {
    pub values: Vec<i64>,
    pub wide_multiplies: u64,
}

/// A kernel row packed once for port B.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackedKernel {
    word: PackedWord,
    len: usize,
}

impl PackedKernel {
    pub fn word(&self) -> &PackedWord {
        &self.word
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

fn pack_side(
    values: &[i64],
    slots: usize,
    bits: u32,
    signed: bool,
    params: &PackParams,
    port: u32,
) -> Result<PackedWord> {
    let mut padded = values.to_vec();
    padded.resize(slots, 0);
    let seq = QuantSeq::new(padded, bits, signed)?;
    if signed {
        pack_signed(&seq, params.slice_width, port)
    } else {
        pack_unsigned(&seq, params.slice_width, port)
    }
}

/// Packs `g` (at most `K` taps) for port B.
pub fn pack_kernel(g: &[i64], params: &PackParams) -> Result<PackedKernel> {
    if g.is_empty() {
        return Err(Error::Shape("empty kernel".into()));
    }
    if g.len() > params.k {
        return Err(Error::Shape(format!(
            "kernel of {} taps exceeds the packing capacity K={}",
            g.len(),
            params.k
        )));
    }
    let q = params.quant;
    let word = pack_side(
        g,
        params.k,
        q.q(),
        q.signed_g(),
        params,
        params.spec.bit_b(),
    )?;
    Ok(PackedKernel { word, len: g.len() })
}

/// Packs one input chunk (at most `N` elements) for port A.
pub fn pack_input(f: &[i64], params: &PackParams) -> Result<PackedWord> {
    if f.len() > params.n {
        return Err(Error::Shape(format!(
            "chunk of {} elements exceeds the packing capacity N={}",
            f.len(),
            params.n
        )));
    }
    let q = params.quant;
    pack_side(
        f,
        params.n,
        q.p(),
        q.signed_f(),
        params,
        params.spec.bit_a(),
    )
}

pub(crate) struct PackedConv {
    pub values: Vec<i64>,
    /// Most chunk outputs that landed on one output index.
    pub max_overlap: usize,
}

/// Multichannel extended convolution over raw rows and prepacked kernels.
/// All rows must have the same length.
pub(crate) fn conv_packed(
    rows: &[&[i64]],
    kernels: &[PackedKernel],
    params: &PackParams,
    mul: &WideMultiplier,
) -> Result<PackedConv> {
    if rows.is_empty() || rows.len() != kernels.len() {
        return Err(Error::Shape(format!(
            "{} input rows against {} kernels",
            rows.len(),
            kernels.len()
        )));
    }
    if rows.len() > params.m as usize {
        return Err(Error::Overflow(format!(
            "{} channels exceed the guard-bit budget for M={}",
            rows.len(),
            params.m
        )));
    }
    let len = rows[0].len();
    if len == 0 || rows.iter().any(|r| r.len() != len) {
        return Err(Error::Shape(
            "channel rows must be nonempty and of equal length".into(),
        ));
    }
    let taps = kernels.iter().map(PackedKernel::len).max().unwrap_or(0);
    let (n, k) = (params.n, params.k);
    let chunks = len.div_ceil(n);
    let segments = n + k - 1;
    let mut acc = vec![0i64; chunks * n + k - 1];
    let mut overlap = vec![0usize; acc.len()];
    let mut products = Vec::with_capacity(rows.len());

    for x in 0..chunks {
        products.clear();
        let lo = x * n;
        let hi = (lo + n).min(len);
        for (row, kernel) in rows.iter().zip(kernels) {
            let a = pack_input(&row[lo..hi], params)?;
            products.push(mul.multiply(&a, &kernel.word)?);
        }
        let sum = if products.len() == 1 {
            products[0]
        } else {
            accumulate(&products)?
        };
        let ys = unpack(
            &sum,
            params.slice_width,
            segments,
            params.quant.signed_output(),
        )?;
        for (m, y) in ys.into_iter().enumerate() {
            acc[lo + m] += y;
            overlap[lo + m] += 1;
        }
    }
    acc.truncate(len + taps - 1);
    let out = PackedConv {
        values: acc,
        max_overlap: overlap.into_iter().max().unwrap_or(0),
    };
    debug_assert!(out.max_overlap <= segments.div_ceil(n));
    Ok(out)
}

/// One-multiply convolution of `f` (at most `N` elements) with `g` (at most
/// `K` taps). Returns all `N + K - 1` segments.
pub fn conv_base(f: &QuantSeq, g: &QuantSeq, params: &PackParams) -> Result<Conv1DResult> {
    if f.is_empty() || f.len() > params.n {
        return Err(Error::Shape(format!(
            "base convolution takes 1..={} input elements, got {}",
            params.n,
            f.len()
        )));
    }
    let kernel = pack_kernel(g.values(), params)?;
    let a = pack_input(f.values(), params)?;
    let mul = WideMultiplier::new();
    let prod = mul.multiply(&a, kernel.word())?;
    let values = unpack(
        &prod,
        params.slice_width,
        params.segments(),
        params.quant.signed_output(),
    )?;
    Ok(Conv1DResult {
        values,
        wide_multiplies: mul.count(),
    })
}

/// Convolution of an arbitrarily long `f` with `g` (at most `K` taps),
/// `ceil(len(f)/N)` multiplies. The result has `len(f) + len(g) - 1` values.
pub fn conv_extended(f: &QuantSeq, g: &QuantSeq, params: &PackParams) -> Result<Conv1DResult> {
    conv_multichannel(std::slice::from_ref(f), std::slice::from_ref(g), params)
}

/// `sum_i fs[i] * gs[i]` with the per-chunk products of all channels added
/// in the packed domain before segmentation.
pub fn conv_multichannel(
    fs: &[QuantSeq],
    gs: &[QuantSeq],
    params: &PackParams,
) -> Result<Conv1DResult> {
    if fs.len() != gs.len() {
        return Err(Error::Shape(format!(
            "{} input channels against {} kernels",
            fs.len(),
            gs.len()
        )));
    }
    let kernels = gs
        .iter()
        .map(|g| pack_kernel(g.values(), params))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<&[i64]> = fs.iter().map(QuantSeq::values).collect();
    let mul = WideMultiplier::new();
    let out = conv_packed(&rows, &kernels, params, &mul)?;
    Ok(Conv1DResult {
        values: out.values,
        wide_multiplies: mul.count(),
    })
}

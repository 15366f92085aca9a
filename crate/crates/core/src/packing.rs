//! Packing quantized sequences into wide words and slicing products back out.
//!
//! Slice `n` of a word occupies bits `[S(n+1)-1 : S*n]`, so a packed word is
//! the polynomial `sum values[n] * 2^(S*n)` evaluated in binary. Multiplying
//! two such words multiplies the polynomials, and with enough guard bits in
//! each slice every coefficient of the product lands in its own segment.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ceil_log2;

/// Inclusive value range of a `bitwidth`-bit integer.
pub fn quant_range(bitwidth: u32, signed: bool) -> (i64, i64) {
    if signed {
        (-(1i64 << (bitwidth - 1)), (1i64 << (bitwidth - 1)) - 1)
    } else {
        (0, (1i64 << bitwidth) - 1)
    }
}

/// A sequence of quantized integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantSeq {
    values: Vec<i64>,
    bitwidth: u32,
    signed: bool,
}

impl QuantSeq {
    pub fn new(values: Vec<i64>, bitwidth: u32, signed: bool) -> Result<Self> {
        if !(1..=32).contains(&bitwidth) {
            return Err(Error::Invalid(format!(
                "bitwidth {bitwidth} outside 1..=32"
            )));
        }
        let (lo, hi) = quant_range(bitwidth, signed);
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(lo..=hi).contains(*v))
        {
            return Err(Error::Range(format!(
                "element {i} = {v} outside the {}{bitwidth}-bit range [{lo}, {hi}]",
                if signed { "signed " } else { "" }
            )));
        }
        Ok(Self {
            values,
            bitwidth,
            signed,
        })
    }

    pub fn unsigned(values: Vec<i64>, bitwidth: u32) -> Result<Self> {
        Self::new(values, bitwidth, false)
    }

    pub fn signed(values: Vec<i64>, bitwidth: u32) -> Result<Self> {
        Self::new(values, bitwidth, true)
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<i64> {
        self.values
    }

    pub fn bitwidth(&self) -> u32 {
        self.bitwidth
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Copy zero-padded to `len` elements.
    pub fn padded(&self, len: usize) -> Self {
        let mut values = self.values.clone();
        if values.len() < len {
            values.resize(len, 0);
        }
        Self {
            values,
            bitwidth: self.bitwidth,
            signed: self.signed,
        }
    }
}

fn mask(bits: u32) -> u128 {
    if bits >= 128 {
        u128::MAX
    } else {
        (1u128 << bits) - 1
    }
}

/// A wide integer word of declared width. Signed words hold a two's-complement
/// bit pattern in `width_bits` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PackedWord {
    value: u128,
    width_bits: u32,
    signed: bool,
}

impl PackedWord {
    pub fn new(value: u128, width_bits: u32, signed: bool) -> Result<Self> {
        if !(1..=128).contains(&width_bits) {
            return Err(Error::Overflow(format!(
                "word width {width_bits} outside 1..=128"
            )));
        }
        if value & !mask(width_bits) != 0 {
            return Err(Error::Range(format!(
                "value {value:#x} does not fit {width_bits} bits"
            )));
        }
        Ok(Self {
            value,
            width_bits,
            signed,
        })
    }

    pub fn unsigned(value: u128, width_bits: u32) -> Result<Self> {
        Self::new(value, width_bits, false)
    }

    /// Encodes `v` into a `width_bits` word, two's complement if `signed`.
    pub fn from_i128(v: i128, width_bits: u32, signed: bool) -> Result<Self> {
        if !(1..=128).contains(&width_bits) {
            return Err(Error::Overflow(format!(
                "word width {width_bits} outside 1..=128"
            )));
        }
        let fits = if signed {
            width_bits == 128 || {
                let half = 1i128 << (width_bits - 1);
                (-half..half).contains(&v)
            }
        } else {
            v >= 0 && (width_bits >= 127 || v < (1i128 << width_bits))
        };
        if !fits {
            return Err(Error::Overflow(format!(
                "{v} does not fit a {width_bits}-bit word"
            )));
        }
        Ok(Self {
            value: (v as u128) & mask(width_bits),
            width_bits,
            signed,
        })
    }

    /// Raw bit pattern.
    pub fn value(&self) -> u128 {
        self.value
    }

    pub fn width_bits(&self) -> u32 {
        self.width_bits
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    /// The integer the word represents.
    pub fn to_i128(&self) -> Result<i128> {
        if self.signed {
            let shift = 128 - self.width_bits;
            Ok(((self.value << shift) as i128) >> shift)
        } else {
            i128::try_from(self.value)
                .map_err(|_| Error::Overflow(format!("{:#x} exceeds i128", self.value)))
        }
    }
}

fn check_fits(seq: &QuantSeq, s: u32, width_bits: u32) -> Result<()> {
    if seq.is_empty() {
        return Err(Error::Shape("cannot pack an empty sequence".into()));
    }
    if s == 0 {
        return Err(Error::Invalid("slice width must be positive".into()));
    }
    let needed = u64::from(seq.bitwidth) + (seq.len() as u64 - 1) * u64::from(s);
    if needed > u64::from(width_bits) {
        return Err(Error::Overflow(format!(
            "{} slices of {s} bits ({needed} bits) do not fit a {width_bits}-bit word",
            seq.len()
        )));
    }
    Ok(())
}

/// Places each value in its own zero-extended `s`-bit slice.
pub fn pack_unsigned(seq: &QuantSeq, s: u32, width_bits: u32) -> Result<PackedWord> {
    if seq.is_signed() && seq.values().iter().any(|&v| v < 0) {
        return Err(Error::Range("negative value in an unsigned packing".into()));
    }
    check_fits(seq, s, width_bits)?;
    if seq.len() > 1 && seq.bitwidth > s {
        return Err(Error::Range(format!(
            "{}-bit values overlap {s}-bit slices",
            seq.bitwidth
        )));
    }
    let word = seq.values().iter().enumerate().fold(0u128, |acc, (n, &v)| {
        acc | ((v as u128) << (s as usize * n))
    });
    PackedWord::new(word, width_bits, false)
}

/// Packs signed values as a concatenation of `s`-bit two's-complement slices.
///
/// The sign extension of slice `n-1` reads as `-1` in slice `n`, so each
/// slice above the first stores `values[n] - msb(slice n-1)` and the
/// concatenation equals `sum values[n] * 2^(s*n)` as a signed integer. The
/// returned word is `len * s` bits wide.
pub fn pack_signed(seq: &QuantSeq, s: u32, width_bits: u32) -> Result<PackedWord> {
    check_fits(seq, s, width_bits)?;
    if seq.len() > 1 && s < seq.bitwidth + 1 {
        return Err(Error::Range(format!(
            "{s}-bit slices leave no borrow bit for {}-bit signed values",
            seq.bitwidth
        )));
    }
    let total = seq.len() as u64 * u64::from(s);
    if total > 128 {
        return Err(Error::Overflow(format!(
            "{total}-bit signed packing exceeds 128 bits"
        )));
    }
    let slice_mask = mask(s);
    let mut word = 0u128;
    let mut borrow = 0i64;
    for (n, &v) in seq.values().iter().enumerate() {
        let slice = ((v - borrow) as i128 as u128) & slice_mask;
        word |= slice << (s as usize * n);
        borrow = ((slice >> (s - 1)) & 1) as i64;
    }
    PackedWord::new(word, total as u32, true)
}

/// The emulated wide multiplier. Every invocation is counted.
#[derive(Debug, Default)]
pub struct WideMultiplier {
    count: AtomicU64,
}

impl WideMultiplier {
    pub fn new() -> Self {
        Self::default()
    }

    /// Exact product. Signed if either factor is signed; the result is
    /// `a.width + b.width` bits wide.
    pub fn multiply(&self, a: &PackedWord, b: &PackedWord) -> Result<PackedWord> {
        let width = a.width_bits + b.width_bits;
        if width > 128 {
            return Err(Error::Overflow(format!(
                "{}x{}-bit product exceeds the 128-bit accumulator",
                a.width_bits, b.width_bits
            )));
        }
        self.count.fetch_add(1, Ordering::Relaxed);
        if !a.signed && !b.signed {
            // Both below 2^width_bits, so the product is below 2^width.
            return PackedWord::new(a.value * b.value, width, false);
        }
        let product = a
            .to_i128()?
            .checked_mul(b.to_i128()?)
            .ok_or_else(|| Error::Overflow("signed product exceeds i128".into()))?;
        PackedWord::from_i128(product, width, true)
    }

    /// Wide multiplies issued so far.
    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }
}

/// Sums product words in the packed domain. The result grows by
/// `ceil(log2(len))` bits over the widest input.
pub fn accumulate(words: &[PackedWord]) -> Result<PackedWord> {
    let Some(widest) = words.iter().map(|w| w.width_bits).max() else {
        return Err(Error::Shape("nothing to accumulate".into()));
    };
    let width = widest + ceil_log2(words.len() as u64);
    if width > 128 {
        return Err(Error::Overflow(format!(
            "accumulating {} words of {widest} bits exceeds 128 bits",
            words.len()
        )));
    }
    if words.iter().all(|w| !w.signed) {
        let sum = words
            .iter()
            .try_fold(0u128, |acc, w| acc.checked_add(w.value))
            .ok_or_else(|| Error::Overflow("unsigned accumulation exceeds 128 bits".into()))?;
        return PackedWord::new(sum, width, false);
    }
    let mut sum = 0i128;
    for w in words {
        sum = sum
            .checked_add(w.to_i128()?)
            .ok_or_else(|| Error::Overflow("signed accumulation exceeds i128".into()))?;
    }
    PackedWord::from_i128(sum, width, true)
}

/// Reads `count` segments of `s` bits out of a product.
///
/// Unsigned segments are the raw bit fields. Signed segments are read as
/// `s`-bit two's complement after removing every lower segment, which puts
/// back the borrow the lower segments took (the MSB of the segment below in
/// the usual case). Bits past the word's width are implied by zero or sign
/// extension, so the top segment may straddle the word boundary.
pub fn unpack(prod: &PackedWord, s: u32, count: usize, signed_output: bool) -> Result<Vec<i64>> {
    if s == 0 || s > 64 {
        return Err(Error::Range(format!("segment width {s} outside 1..=64")));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let start_of_last = (count as u64 - 1) * u64::from(s);
    if start_of_last >= u64::from(prod.width_bits) {
        return Err(Error::Range(format!(
            "{count} segments of {s} bits exceed a {}-bit product",
            prod.width_bits
        )));
    }

    let seg_mask = mask(s);
    if !signed_output {
        if prod.signed && prod.to_i128()? < 0 {
            return Err(Error::Range(
                "negative product read as unsigned segments".into(),
            ));
        }
        return Ok((0..count)
            .map(|m| {
                let shift = s as usize * m;
                if shift >= 128 {
                    0
                } else {
                    ((prod.value >> shift) & seg_mask) as i64
                }
            })
            .collect());
    }

    let mut rest = prod.to_i128()?;
    let half = 1i128 << (s - 1);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let field = rest & (seg_mask as i128);
        let seg = if field >= half {
            field - (1i128 << s)
        } else {
            field
        };
        out.push(seg as i64);
        // Exact: the low s bits of rest - seg are zero.
        rest = (rest - seg) >> s;
    }
    Ok(out)
}

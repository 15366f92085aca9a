//! Packing geometry: guard bits, slice width and the number of operands each
//! multiplier port can hold.
//!
//! A `bit_a x bit_b` multiplier receives `N` slices of `f` on port A and `K`
//! slices of `g` on port B, each slice `S` bits wide. One multiplication then
//! yields `N + K - 1` segments, each a short partial convolution, which is
//! worth `N*K` multiplications plus `(N-1)*(K-1)` additions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest channel accumulation count the 128-bit accumulator budgets for.
pub const MAX_CHANNELS: u32 = 128;

/// Bits reserved above the raw product for channel accumulation.
const ACCUMULATION_HEADROOM: u32 = 7;

/// Port widths of the emulated wide multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiplierSpec {
    bit_a: u32,
    bit_b: u32,
}

impl MultiplierSpec {
    pub fn new(bit_a: u32, bit_b: u32) -> Result<Self> {
        if bit_a == 0 || bit_b == 0 {
            return Err(Error::Invalid(format!(
                "multiplier ports must be at least 1 bit wide, got {bit_a}x{bit_b}"
            )));
        }
        if bit_a + bit_b + ACCUMULATION_HEADROOM > 128 {
            return Err(Error::Invalid(format!(
                "{bit_a}x{bit_b} multiplier leaves no accumulation headroom in 128 bits"
            )));
        }
        Ok(Self { bit_a, bit_b })
    }

    pub fn bit_a(&self) -> u32 {
        self.bit_a
    }

    pub fn bit_b(&self) -> u32 {
        self.bit_b
    }
}

/// Bitwidth and signedness of the two convolution operands.
///
/// `p` describes the input sequence `f`, `q` the kernel `g`. One-bit operands
/// are always unsigned `{0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantSpec {
    p: u32,
    q: u32,
    signed_f: bool,
    signed_g: bool,
}

impl QuantSpec {
    pub fn new(p: u32, q: u32, signed_f: bool, signed_g: bool) -> Result<Self> {
        for (name, bits) in [("p", p), ("q", q)] {
            if !(1..=8).contains(&bits) {
                return Err(Error::Invalid(format!("{name}={bits} outside 1..=8")));
            }
        }
        if p == 1 && signed_f {
            return Err(Error::Invalid("signed 1-bit f is not supported".into()));
        }
        if q == 1 && signed_g {
            return Err(Error::Invalid("signed 1-bit g is not supported".into()));
        }
        Ok(Self {
            p,
            q,
            signed_f,
            signed_g,
        })
    }

    pub fn unsigned(p: u32, q: u32) -> Result<Self> {
        Self::new(p, q, false, false)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn signed_f(&self) -> bool {
        self.signed_f
    }

    pub fn signed_g(&self) -> bool {
        self.signed_g
    }

    /// Segments of the product are signed whenever either operand is.
    pub fn signed_output(&self) -> bool {
        self.signed_f || self.signed_g
    }
}

/// A self-consistent packing geometry for one multiplier and quantization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PackParams {
    pub spec: MultiplierSpec,
    pub quant: QuantSpec,
    /// Channel products accumulated before segmentation.
    pub m: u32,
    pub guard_bits: u32,
    pub slice_width: u32,
    /// Operands of `f` per word on port A.
    pub n: usize,
    /// Operands of `g` per word on port B.
    pub k: usize,
}

impl PackParams {
    /// Equivalent multiply and add operations delivered by one wide multiply.
    pub fn ops(&self) -> u64 {
        equivalent_ops(self.n, self.k)
    }

    /// Number of segments in one product word.
    pub fn segments(&self) -> usize {
        self.n + self.k - 1
    }
}

/// `N*K` multiplications plus `(N-1)*(K-1)` additions.
pub fn equivalent_ops(n: usize, k: usize) -> u64 {
    let (n, k) = (n as u64, k as u64);
    n * k + (n - 1) * (k - 1)
}

/// `ceil(log2(x))` for `x >= 1`.
pub(crate) fn ceil_log2(x: u64) -> u32 {
    debug_assert!(x >= 1);
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Guard bits needed so that `m * min(n, k)` stacked products cannot carry
/// into the next segment.
pub fn guard_bits(m: u32, n: usize, k: usize) -> u32 {
    assert!(
        m >= 1 && n >= 1 && k >= 1,
        "guard_bits needs positive arguments"
    );
    ceil_log2(u64::from(m) * n.min(k) as u64)
}

/// Slice width for a quantization with `guard` guard bits. A 1-bit operand
/// only gates the other one, so its width is not added.
pub fn slice_width(quant: &QuantSpec, guard: u32) -> u32 {
    match (quant.p, quant.q) {
        (1, q) => q + guard,
        (p, 1) => p + guard,
        (p, q) => p + q + guard,
    }
}

/// Largest operand count that fits a `port`-bit input with `bits`-wide
/// operands laid out every `slice` bits.
fn port_capacity(port: u32, bits: u32, slice: u32, signed: bool) -> usize {
    if bits > port {
        return 0;
    }
    // A signed slice needs a spare bit to absorb the borrow from below.
    if signed && slice < bits + 1 {
        return 1;
    }
    ((port - bits) / slice) as usize + 1
}

/// Finds the geometry with the most equivalent operations per multiply.
///
/// Every guard-bit budget is tried in increasing order. For a budget `gb`
/// the stacked-term cap is `floor(2^gb / m)`; both ports are filled to
/// capacity and the smaller side is clamped to the cap. Candidates whose
/// clamped geometry would need fewer guard bits are skipped: the smaller
/// budget already dominates them. Ties keep the smaller slice.
pub fn search_optimal(spec: MultiplierSpec, quant: QuantSpec, m: u32) -> Result<PackParams> {
    if m == 0 || m > MAX_CHANNELS {
        return Err(Error::Invalid(format!(
            "channel accumulation count {m} outside 1..={MAX_CHANNELS}"
        )));
    }
    if quant.p > spec.bit_a || quant.q > spec.bit_b {
        return Err(Error::Infeasible(format!(
            "{}x{}-bit operands do not fit a {}x{} multiplier",
            quant.p, quant.q, spec.bit_a, spec.bit_b
        )));
    }

    let max_gb = ceil_log2(u64::from(m) * u64::from(spec.bit_a.min(spec.bit_b)));
    let mut best: Option<PackParams> = None;
    for gb in 0..=max_gb {
        let cap = ((1u64 << gb) / u64::from(m)) as usize;
        if cap == 0 {
            continue;
        }
        let s = slice_width(&quant, gb);
        let mut n = port_capacity(spec.bit_a, quant.p, s, quant.signed_f);
        let mut k = port_capacity(spec.bit_b, quant.q, s, quant.signed_g);
        if n.min(k) > cap {
            if n >= k {
                k = cap;
            } else {
                n = cap;
            }
        }
        if guard_bits(m, n, k) != gb {
            continue;
        }
        let candidate = PackParams {
            spec,
            quant,
            m,
            guard_bits: gb,
            slice_width: s,
            n,
            k,
        };
        if best.is_none_or(|b| candidate.ops() > b.ops()) {
            best = Some(candidate);
        }
    }
    best.ok_or_else(|| Error::Infeasible("no packing geometry satisfies the port limits".into()))
}

/// One `(p, q)` entry of a throughput grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThroughputCell {
    pub p: u32,
    pub q: u32,
    /// `None` when no geometry fits; `ops` is then 0.
    pub geometry: Option<Geometry>,
    pub ops: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub slice_width: u32,
    pub guard_bits: u32,
    pub n: usize,
    pub k: usize,
}

impl ThroughputCell {
    pub fn feasible(&self) -> bool {
        self.geometry.is_some()
    }
}

/// Best unsigned packing for every `(p, q)` in `1..=pmax x 1..=qmax`, row-major
/// in `p`, with a single channel.
pub fn throughput_grid(spec: MultiplierSpec, pmax: u32, qmax: u32) -> Result<Vec<ThroughputCell>> {
    if !(1..=8).contains(&pmax) || !(1..=8).contains(&qmax) {
        return Err(Error::Invalid(format!(
            "grid bounds {pmax}x{qmax} outside 1..=8"
        )));
    }
    let mut cells = Vec::with_capacity((pmax * qmax) as usize);
    for p in 1..=pmax {
        for q in 1..=qmax {
            let quant = QuantSpec::unsigned(p, q)?;
            let cell = match search_optimal(spec, quant, 1) {
                Ok(params) => ThroughputCell {
                    p,
                    q,
                    geometry: Some(Geometry {
                        slice_width: params.slice_width,
                        guard_bits: params.guard_bits,
                        n: params.n,
                        k: params.k,
                    }),
                    ops: params.ops(),
                },
                Err(Error::Infeasible(_)) => ThroughputCell {
                    p,
                    q,
                    geometry: None,
                    ops: 0,
                },
                Err(e) => return Err(e),
            };
            cells.push(cell);
        }
    }
    Ok(cells)
}

//! Geometry search against exhaustive enumeration of every (Gb, S, N, K).

use packconv::{search_optimal, throughput_grid, MultiplierSpec, QuantSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Tuple {
    ops: u64,
    s: u32,
    gb: u32,
    n: u32,
    k: u32,
}

fn smallest_pow2_exponent(x: u64) -> u32 {
    let mut g = 0;
    while (1u64 << g) < x {
        g += 1;
    }
    g
}

/// Enumerates every tuple satisfying the slice, port and guard-bit
/// constraints and keeps the most ops, then the smaller slice, then the
/// larger N.
fn brute_force(
    bit_a: u32,
    bit_b: u32,
    p: u32,
    q: u32,
    sf: bool,
    sg: bool,
    m: u32,
) -> Option<Tuple> {
    let mut best: Option<Tuple> = None;
    // M <= 128 adds at most 7 bits beyond what the ports alone need.
    for gb in 0..=bit_a + 8 {
        let s = if p == 1 {
            q + gb
        } else if q == 1 {
            p + gb
        } else {
            p + q + gb
        };
        for n in 1..=bit_a {
            if p + (n - 1) * s > bit_a {
                break;
            }
            if sf && n > 1 && s < p + 1 {
                break;
            }
            for k in 1..=bit_b {
                if q + (k - 1) * s > bit_b {
                    break;
                }
                if sg && k > 1 && s < q + 1 {
                    break;
                }
                if smallest_pow2_exponent(u64::from(m) * u64::from(n.min(k))) != gb {
                    continue;
                }
                let ops = u64::from(n * k + (n - 1) * (k - 1));
                let t = Tuple { ops, s, gb, n, k };
                let better = match best {
                    None => true,
                    Some(b) => {
                        (t.ops, std::cmp::Reverse(t.s), t.n) > (b.ops, std::cmp::Reverse(b.s), b.n)
                    }
                };
                if better {
                    best = Some(t);
                }
            }
        }
    }
    best
}

fn legal_signedness(p: u32, q: u32) -> Vec<(bool, bool)> {
    let mut v = vec![(false, false)];
    if p > 1 {
        v.push((true, false));
    }
    if q > 1 {
        v.push((false, true));
    }
    if p > 1 && q > 1 {
        v.push((true, true));
    }
    v
}

#[test]
fn search_equals_brute_force() {
    let specs = [
        (27, 18),
        (32, 32),
        (18, 27),
        (16, 16),
        (8, 8),
        (48, 24),
        (3, 5),
    ];
    for (a, b) in specs {
        let spec = MultiplierSpec::new(a, b).unwrap();
        for p in 1..=8 {
            for q in 1..=8 {
                for (sf, sg) in legal_signedness(p, q) {
                    let quant = QuantSpec::new(p, q, sf, sg).unwrap();
                    for m in [1, 2, 3, 4, 5, 7, 8, 16, 64] {
                        let want = brute_force(a, b, p, q, sf, sg, m);
                        let got = search_optimal(spec, quant, m).ok();
                        let got = got.map(|r| Tuple {
                            ops: r.ops(),
                            s: r.slice_width,
                            gb: r.guard_bits,
                            n: r.n as u32,
                            k: r.k as u32,
                        });
                        assert_eq!(got, want, "{a}x{b} p={p} q={q} sf={sf} sg={sg} m={m}");
                    }
                }
            }
        }
    }
}

#[test]
fn returned_params_satisfy_invariants() {
    for (a, b) in [(27, 18), (32, 32), (64, 57)] {
        let spec = MultiplierSpec::new(a, b).unwrap();
        for p in 1..=8 {
            for q in 1..=8 {
                for m in [1, 3, 16, 128] {
                    let r = search_optimal(spec, QuantSpec::unsigned(p, q).unwrap(), m).unwrap();
                    assert!(p + (r.n as u32 - 1) * r.slice_width <= a);
                    assert!(q + (r.k as u32 - 1) * r.slice_width <= b);
                    assert_eq!(r.guard_bits, packconv::guard_bits(m, r.n, r.k));
                    assert_eq!(r.slice_width, packconv::slice_width(&r.quant, r.guard_bits));
                    assert!(r.ops() >= 1);
                }
            }
        }
    }
}

#[test]
fn grid_matches_brute_force_and_is_monotone() {
    for (a, b) in [(27, 18), (32, 32)] {
        let grid = throughput_grid(MultiplierSpec::new(a, b).unwrap(), 8, 8).unwrap();
        assert_eq!(grid.len(), 64);
        for cell in &grid {
            let want = brute_force(a, b, cell.p, cell.q, false, false, 1).unwrap();
            let g = cell.geometry.unwrap();
            assert_eq!(
                (
                    cell.ops,
                    g.slice_width,
                    g.guard_bits,
                    g.n as u32,
                    g.k as u32
                ),
                (want.ops, want.s, want.gb, want.n, want.k)
            );
        }
        let ops = |p: u32, q: u32| grid[((p - 1) * 8 + (q - 1)) as usize].ops;
        for p in 1..=8 {
            for q in 1..=8 {
                if p < 8 {
                    assert!(
                        ops(p + 1, q) <= ops(p, q),
                        "{a}x{b}: ops({},{q}) > ops({p},{q})",
                        p + 1
                    );
                }
                if q < 8 {
                    assert!(
                        ops(p, q + 1) <= ops(p, q),
                        "{a}x{b}: ops({p},{}) > ops({p},{q})",
                        q + 1
                    );
                }
            }
        }
    }
}

#[test]
fn degenerate_packing_always_fits() {
    for a in 1..=12 {
        for b in 1..=12 {
            let spec = MultiplierSpec::new(a, b).unwrap();
            for p in 1..=a.min(8) {
                for q in 1..=b.min(8) {
                    let r = search_optimal(spec, QuantSpec::unsigned(p, q).unwrap(), 1).unwrap();
                    assert!(r.ops() >= 1);
                }
            }
        }
    }
}

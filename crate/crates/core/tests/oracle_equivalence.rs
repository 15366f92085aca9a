//! Packed kernels against the naive convolutions on random inputs.

use packconv::packing::quant_range;
use packconv::{
    conv_base, conv_extended, conv_layer, conv_multichannel, naive_conv1d, naive_conv_layer,
    pack_signed, pack_unsigned, search_optimal, unpack, FeatureMap, KernelTensor, MultiplierSpec,
    PackParams, QuantSeq, QuantSpec,
};
use proptest::prelude::*;

const SPECS: [(u32, u32); 2] = [(27, 18), (32, 32)];

/// Quantization with a legal signedness combination.
fn quant() -> impl Strategy<Value = QuantSpec> {
    (1u32..=8, 1u32..=8, any::<bool>(), any::<bool>())
        .prop_map(|(p, q, sf, sg)| QuantSpec::new(p, q, sf && p > 1, sg && q > 1).unwrap())
}

fn setup(m: u32) -> impl Strategy<Value = PackParams> {
    (0usize..SPECS.len(), quant()).prop_map(move |(i, quant)| {
        let (a, b) = SPECS[i];
        search_optimal(MultiplierSpec::new(a, b).unwrap(), quant, m).unwrap()
    })
}

fn values(
    bits: u32,
    signed: bool,
    len: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = Vec<i64>> {
    let (lo, hi) = quant_range(bits, signed);
    // Half the draws come from the range ends only.
    prop_oneof![
        prop::collection::vec(lo..=hi, len.clone()),
        prop::collection::vec(prop_oneof![Just(lo), Just(hi)], len),
    ]
}

fn f_seq(params: &PackParams, v: Vec<i64>) -> QuantSeq {
    QuantSeq::new(v, params.quant.p(), params.quant.signed_f()).unwrap()
}

fn g_seq(params: &PackParams, v: Vec<i64>) -> QuantSeq {
    QuantSeq::new(v, params.quant.q(), params.quant.signed_g()).unwrap()
}

fn with_inputs(
    m: u32,
    flen: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = (PackParams, Vec<Vec<i64>>, Vec<Vec<i64>>)> {
    setup(m).prop_flat_map(move |params| {
        let q = params.quant;
        let chans = 1..=params.m as usize;
        let flen = flen.clone();
        (Just(params), chans).prop_flat_map(move |(params, c)| {
            let lens = if *flen.end() == 0 {
                1..=params.n
            } else {
                flen.clone()
            };
            (lens, 1..=params.k).prop_flat_map(move |(lf, lg)| {
                (
                    Just(params),
                    prop::collection::vec(values(q.p(), q.signed_f(), lf..=lf), c),
                    prop::collection::vec(values(q.q(), q.signed_g(), lg..=lg), c),
                )
            })
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn base_matches_oracle((params, fs, gs) in with_inputs(1, 0..=0)) {
        let f = f_seq(&params, fs[0].clone());
        let g = g_seq(&params, gs[0].clone());
        let got = conv_base(&f, &g, &params).unwrap();
        let (want, _) = naive_conv1d(&f, &g).unwrap();
        prop_assert_eq!(got.wide_multiplies, 1);
        prop_assert_eq!(got.values.len(), params.n + params.k - 1);
        prop_assert_eq!(&got.values[..want.len()], &want[..]);
        prop_assert!(got.values[want.len()..].iter().all(|&v| v == 0));
    }

    #[test]
    fn extended_matches_oracle((params, fs, gs) in with_inputs(1, 1..=64)) {
        let f = f_seq(&params, fs[0].clone());
        let g = g_seq(&params, gs[0].clone());
        let got = conv_extended(&f, &g, &params).unwrap();
        let (want, naive) = naive_conv1d(&f, &g).unwrap();
        prop_assert_eq!(&got.values, &want);
        prop_assert_eq!(got.wide_multiplies, f.len().div_ceil(params.n) as u64);
        prop_assert_eq!(naive.scalar_multiplies, (f.len() * g.len()) as u64);
    }

    #[test]
    fn multichannel_is_sum_of_channels(
        (params, fs, gs) in (1u32..=6).prop_flat_map(|m| with_inputs(m, 1..=40)),
    ) {
        let fs: Vec<_> = fs.into_iter().map(|v| f_seq(&params, v)).collect();
        let gs: Vec<_> = gs.into_iter().map(|v| g_seq(&params, v)).collect();
        let got = conv_multichannel(&fs, &gs, &params).unwrap();
        let mut want = vec![0i64; got.values.len()];
        let mut separate = 0;
        for (f, g) in fs.iter().zip(&gs) {
            let one = conv_extended(f, g, &params).unwrap();
            separate += one.wide_multiplies;
            for (w, v) in want.iter_mut().zip(one.values) {
                *w += v;
            }
        }
        prop_assert_eq!(&got.values, &want);
        prop_assert_eq!(got.wide_multiplies, separate);
    }

    #[test]
    fn packing_round_trips(
        s in 5u32..=16,
        signed in any::<bool>(),
        raw in prop::collection::vec(any::<i8>(), 1..=6),
    ) {
        let bits = 4;
        let (lo, hi) = quant_range(bits, signed);
        let vals: Vec<i64> = raw.iter().map(|&v| (v as i64).clamp(lo, hi)).collect();
        let seq = QuantSeq::new(vals.clone(), bits, signed).unwrap();
        let width = bits + (vals.len() as u32 - 1) * s;
        let word = if signed { pack_signed(&seq, s, width).unwrap() } else { pack_unsigned(&seq, s, width).unwrap() };
        let poly: i128 = vals.iter().enumerate().map(|(n, &v)| (v as i128) << (s as usize * n)).sum();
        prop_assert_eq!(word.to_i128().unwrap(), poly);
        prop_assert_eq!(unpack(&word, s, vals.len(), signed).unwrap(), vals);
    }

    #[test]
    fn oracle_is_commutative(
        f in prop::collection::vec(-128i64..=127, 1..=20),
        g in prop::collection::vec(-128i64..=127, 1..=20),
    ) {
        let f = QuantSeq::signed(f, 8).unwrap();
        let g = QuantSeq::signed(g, 8).unwrap();
        prop_assert_eq!(naive_conv1d(&f, &g).unwrap().0, naive_conv1d(&g, &f).unwrap().0);
    }
}

fn layer_case() -> impl Strategy<Value = (MultiplierSpec, FeatureMap, KernelTensor)> {
    (
        0usize..SPECS.len(),
        quant(),
        1usize..=4,
        1usize..=4,
        1usize..=5,
    )
        .prop_flat_map(|(i, quant, ci, co, ks)| {
            let (a, b) = SPECS[i];
            let spec = MultiplierSpec::new(a, b).unwrap();
            (ks..=12, ks..=12).prop_flat_map(move |(hi, wi)| {
                (
                    values(quant.p(), quant.signed_f(), ci * hi * wi..=ci * hi * wi),
                    values(
                        quant.q(),
                        quant.signed_g(),
                        co * ci * ks * ks..=co * ci * ks * ks,
                    ),
                )
                    .prop_map(move |(x, w)| {
                        (
                            spec,
                            FeatureMap::new(x, ci, hi, wi, quant.p(), quant.signed_f()).unwrap(),
                            KernelTensor::new(w, co, ci, ks, quant.q(), quant.signed_g()).unwrap(),
                        )
                    })
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn layer_matches_oracle((spec, input, kernel) in layer_case()) {
        let got = conv_layer(&input, &kernel, spec).unwrap();
        let (want, _) = naive_conv_layer(&input, &kernel).unwrap();
        prop_assert_eq!(got.dims(), want.dims());
        prop_assert_eq!(got.data(), want.data());

        let quant = QuantSpec::new(input.bitwidth(), kernel.bitwidth(), input.is_signed(), kernel.is_signed()).unwrap();
        let (ci, _, wi) = input.dims();
        let plan = packconv::plan_layer(spec, quant, ci, kernel.dims().2, wi).unwrap();
        prop_assert_eq!(got.wide_multiplies, plan.expected_wide_multiplies(input.dims(), kernel.dims()));
    }
}

use mimo_gmp::coding::{encode, CodeSpec, Interleaver};
use mimo_gmp::constellation::Alphabet;
use mimo_gmp::llr_bridge::WpParams;
use mimo_gmp::scalar::cplx;
use proptest::prelude::*;

fn bits(max: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..2, 1..max)
}

proptest! {
    #[test]
    fn modulate_then_demap_is_identity(order in prop::sample::select(vec![2usize, 4, 16, 64]), raw in bits(120)) {
        let a = Alphabet::<f64>::new(order).unwrap();
        let b = a.bits_per_symbol();
        let mut input = raw;
        input.truncate(input.len() / b * b);
        prop_assume!(!input.is_empty());
        let symbols = a.modulate(&input).unwrap();
        prop_assert_eq!(a.hard_demap(&symbols), input);
    }

    #[test]
    fn interleaver_round_trip(n in 1usize..300, seed in any::<u64>()) {
        let pi = Interleaver::new(n, seed).unwrap();
        let seq: Vec<usize> = (0..n).collect();
        let fwd = pi.interleave(&seq).unwrap();
        let mut sorted = fwd.clone();
        sorted.sort_unstable();
        prop_assert_eq!(&sorted, &seq);
        prop_assert_eq!(pi.deinterleave(&fwd).unwrap(), seq);
    }

    #[test]
    fn encoder_is_linear(a in bits(60), seed in any::<u64>()) {
        let b: Vec<u8> = a.iter().enumerate().map(|(i, _)| ((seed >> (i % 64)) & 1) as u8).collect();
        for spec in [CodeSpec::conv_7_5(), CodeSpec::conv_133_171()] {
            let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let lhs = encode(&sum, &spec);
            let rhs: Vec<u8> = encode(&a, &spec).iter().zip(encode(&b, &spec)).map(|(x, y)| x ^ y).collect();
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn bit_extrinsic_ignores_own_prior(
        order in prop::sample::select(vec![4usize, 16, 64]),
        re in -1.5f64..1.5, im in -1.5f64..1.5, mu in 0.05f64..0.95,
        priors in prop::collection::vec(-8.0f64..8.0, 6),
        q in 0usize..6, replacement in -50.0f64..50.0,
    ) {
        let a = Alphabet::<f64>::new(order).unwrap();
        let b = a.bits_per_symbol();
        let q = q % b;
        let wp = WpParams { x_hat: cplx(re, im), mu, sigma2: mu * (1.0 - mu) };
        let base = a.extrinsic_bit_llrs(&wp, &priors[..b]).unwrap();
        let mut changed = priors[..b].to_vec();
        changed[q] = replacement;
        let other = a.extrinsic_bit_llrs(&wp, &changed).unwrap();
        prop_assert!((base[q] - other[q]).abs() <= 1e-9 * base[q].abs().max(1.0));
    }
}

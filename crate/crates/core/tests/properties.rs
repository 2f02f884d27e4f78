use num_complex::Complex64;
use proptest::prelude::*;

use tracekit::analytic::{self, composed_inverse, composed_map, deletion_forward, deletion_moebius};
use tracekit::channels::sample_traces;
use tracekit::hardpairs::{exact_product_bernoulli_tv, tv_bound_per_bit};
use tracekit::meanstats;
use tracekit::reconstruct::chernoff_sample_size;
use tracekit::{tracefile, BitString, ChannelSpec, SignedSeq};

fn bits(max: usize) -> impl Strategy<Value = BitString> {
    prop::collection::vec(0u8..=1, 1..=max).prop_map(|v| BitString::new(v).unwrap())
}

fn signed(len: usize) -> impl Strategy<Value = Vec<i8>> {
    prop::collection::vec(-1i8..=1, len)
}

fn unit_point() -> impl Strategy<Value = Complex64> {
    (-std::f64::consts::PI..std::f64::consts::PI).prop_map(|t| Complex64::from_polar(1.0, t))
}

proptest! {
    #[test]
    fn eval_poly_is_linear(a in signed(12), b in signed(12), re in -1.2f64..1.2, im in -1.2f64..1.2, c in -3.0f64..3.0) {
        let z = Complex64::new(re, im);
        let fa: Vec<f64> = a.iter().map(|&v| v as f64).collect();
        let fb: Vec<f64> = b.iter().map(|&v| v as f64).collect();
        let mix: Vec<f64> = fa.iter().zip(&fb).map(|(u, v)| u + c * v).collect();
        let lhs = analytic::eval_poly(&mix, z).unwrap();
        let rhs = analytic::eval_poly(&fa, z).unwrap() + analytic::eval_poly(&fb, z).unwrap() * c;
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn trivial_bound_on_the_circle(a in signed(20), z in unit_point()) {
        let s = SignedSeq::new(a.clone()).unwrap();
        let v = s.eval(z).unwrap().norm();
        let support = a.iter().filter(|&&c| c != 0).count() as f64;
        prop_assert!(v <= support + 1e-12);
    }

    #[test]
    fn bitstring_text_round_trip(x in bits(64)) {
        prop_assert_eq!(x.to_string().parse::<BitString>().unwrap(), x);
    }

    #[test]
    fn expected_retained_ones(x in bits(40), q in 0.0f64..0.95) {
        // Each 1 survives with probability p, so the means sum to p * weight.
        let m = meanstats::exact_deletion_means::<f64>(&x, q).unwrap();
        let total: f64 = m.means.iter().sum();
        prop_assert!((total - (1.0 - q) * x.weight() as f64).abs() <= 1e-9);
    }

    #[test]
    fn means_are_nonincreasing_for_all_ones(n in 1usize..40, q in 0.0f64..0.95) {
        let m = meanstats::exact_deletion_means::<f64>(&BitString::ones(n).unwrap(), q).unwrap();
        prop_assert!(m.means.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn moebius_inverts_forward(z in unit_point(), q in 0.01f64..0.95) {
        let back = deletion_moebius(deletion_forward(z, q), q);
        prop_assert!((back - z).norm() <= 1e-9);
    }

    #[test]
    fn composed_map_round_trip(z in unit_point(), q in 0.0f64..0.9, lambda in 0.0f64..0.45, beta in 0.0f64..0.9) {
        let spec = ChannelSpec::full(q, lambda, beta).unwrap();
        let f = composed_map(z, &spec).unwrap();
        prop_assert!(f.norm() <= 1.0 + 1e-12);
        let back = composed_inverse(f, &spec).unwrap();
        prop_assert!((back - z).norm() <= 1e-6 * (1.0 + z.norm()));
    }

    #[test]
    fn trace_file_round_trip(x in bits(20), q in 0.0f64..0.9, seed in any::<u64>(), count in 1usize..20) {
        let spec = ChannelSpec::deletion_substitution(q, 0.1).unwrap();
        let ts = sample_traces(&x, &spec, count, seed).unwrap();
        let mut buf = Vec::new();
        tracefile::write_traces(&mut buf, &ts).unwrap();
        let back = tracefile::read_traces(&buf[..]).unwrap();
        prop_assert_eq!(back, ts);
    }

    #[test]
    fn chernoff_size_is_minimal(eta in 0.05f64..1.0, n in 0u32..30, delta in 0.001f64..0.5) {
        let t = chernoff_sample_size(eta, n, delta).unwrap();
        let fail = |t: u64| (n as f64) * std::f64::consts::LN_2 - t as f64 * eta * eta / 2.0;
        prop_assert!(fail(t) <= delta.ln() + 1e-9);
        if t > 1 {
            prop_assert!(fail(t - 1) > delta.ln() - 1e-9);
        }
    }

    #[test]
    fn inversion_round_trip(x in bits(24), q in 0.0f64..0.6) {
        let m = meanstats::exact_deletion_means::<f64>(&x, q).unwrap();
        let inv = meanstats::invert_deletion_means(&m, q).unwrap();
        prop_assert_eq!(inv.string, x);
    }

    #[test]
    fn exact_tv_between_gap_and_bound(p1 in 0.0f64..=1.0, d in -0.2f64..0.2, t in 1u64..400) {
        let p2 = (p1 + d).clamp(0.0, 1.0);
        let tv = exact_product_bernoulli_tv(p1, p2, t).unwrap();
        prop_assert!(tv >= (p1 - p2).abs() - 1e-12);
        prop_assert!(tv <= tv_bound_per_bit(p1 - p2, t) + 1e-12);
        prop_assert!(tv <= 1.0 + 1e-12);
    }

    #[test]
    fn seeds_reproduce_trace_sets(x in bits(16), seed in any::<u64>()) {
        let spec = ChannelSpec::full(0.2, 0.1, 0.3).unwrap();
        prop_assert_eq!(sample_traces(&x, &spec, 5, seed).unwrap(), sample_traces(&x, &spec, 5, seed).unwrap());
    }
}

mod common;

use common::{lie, shapes, texp, tinv, tmul, to_levels};
use proptest::prelude::*;
use rough_tails::algebra::{group_inv, group_mul, group_mul_generic, signature_of_segments};
use rough_tails::{AlgebraShape, LieElement};

const TOL: f64 = 1e-10;

fn shape_and(n: usize) -> impl Strategy<Value = (AlgebraShape, Vec<LieElement>)> {
    shapes().prop_flat_map(move |s| (Just(s), prop::collection::vec(lie(s, 2.0), n)))
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn product_matches_series_oracle((s, v) in shape_and(2)) {
        let d = s.dim();
        let got = group_mul(&v[0], &v[1]).unwrap().exp();
        let want = tmul(d, &texp(d, &to_levels(s, v[0].coeffs())), &texp(d, &to_levels(s, v[1].coeffs())));
        prop_assert!(max_diff(&to_levels(s, got.tensor().coeffs()), &want) < TOL);
    }

    #[test]
    fn fast_product_matches_generic((_s, v) in shape_and(2)) {
        let a = group_mul(&v[0], &v[1]).unwrap();
        let b = group_mul_generic(&v[0], &v[1]).unwrap();
        prop_assert!(a.max_abs_diff(&b) < TOL);
    }

    #[test]
    fn associative((_s, v) in shape_and(3)) {
        let left = group_mul(&group_mul(&v[0], &v[1]).unwrap(), &v[2]).unwrap();
        let right = group_mul(&v[0], &group_mul(&v[1], &v[2]).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) < TOL);
    }

    #[test]
    fn identity_and_inverse((s, v) in shape_and(1)) {
        let zero = LieElement::zero(s);
        let x = &v[0];
        prop_assert!(group_mul(x, &zero).unwrap().max_abs_diff(x) < TOL);
        prop_assert!(group_mul(&zero, x).unwrap().max_abs_diff(x) < TOL);
        prop_assert!(group_mul(x, &group_inv(x)).unwrap().max_abs_diff(&zero) < TOL);
        prop_assert!(group_mul(&group_inv(x), x).unwrap().max_abs_diff(&zero) < TOL);
        let d = s.dim();
        let inv = group_inv(x).exp();
        let want = tinv(d, &texp(d, &to_levels(s, x.coeffs())));
        prop_assert!(max_diff(&to_levels(s, inv.tensor().coeffs()), &want) < TOL);
    }

    #[test]
    fn exp_log_round_trip((_s, v) in shape_and(1)) {
        let x = &v[0];
        let g = x.exp();
        prop_assert!(g.log().max_abs_diff(x) < TOL);
        let back = g.log().exp();
        prop_assert!(back.tensor().max_abs_diff(g.tensor()) < TOL);
    }

    #[test]
    fn dilation_is_an_automorphism((_s, v) in shape_and(2), r in -3.0f64..3.0) {
        let left = group_mul(&v[0], &v[1]).unwrap().dilate(r);
        let right = group_mul(&v[0].dilate(r), &v[1].dilate(r)).unwrap();
        prop_assert!(left.max_abs_diff(&right) < TOL * (1.0 + r.abs().powi(3)));
    }

    #[test]
    fn chen_identity(
        s in shapes(),
        raw in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 2..8),
        cut in 1usize..7,
    ) {
        let d = s.dim();
        let incs: Vec<Vec<f64>> = raw.iter().map(|v| v[..d].to_vec()).collect();
        let cut = cut.min(incs.len() - 1);
        let whole = signature_of_segments(s, &incs).unwrap();
        let a = signature_of_segments(s, &incs[..cut]).unwrap();
        let b = signature_of_segments(s, &incs[cut..]).unwrap();
        prop_assert!(whole.tensor().max_abs_diff(a.mul(&b).unwrap().tensor()) < TOL);
        let mut walk = LieElement::zero(s);
        for inc in &incs {
            walk.push_level1(inc);
        }
        prop_assert!(walk.exp().tensor().max_abs_diff(whole.tensor()) < TOL);
    }
}

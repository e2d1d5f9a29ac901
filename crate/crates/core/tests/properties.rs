use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use stable_cantor::affine::RealAffine;
use stable_cantor::cantor::{linear_fit, AffineCantorSystem, PerturbedCantorSystem};
use stable_cantor::constructions::{build_k1, build_k1prime, verify_prop_6_2, ExampleParams};
use stable_cantor::covering::CoveringCertificate;
use stable_cantor::lab::{empirical_intersection, perturb_and_retest, StressSystems};
use stable_cantor::limit::{
    ball_grid, c1_distance, control_of_shape, distortion_check, limit_geometry, normalized_composition, piece_grid, ContractionSequence,
};
use stable_cantor::scalar::Scalar;
use stable_cantor::smooth::{Perturbation, PerturbedAffine, SmoothMap};
use stable_cantor::symbolic::LeftWord;

fn perturbed_k1prime() -> PerturbedCantorSystem {
    let base = build_k1prime(&Scalar::ratio(1, 10)).unwrap();
    PerturbedCantorSystem::from_letter_perturbations(base, vec![Perturbation::sine(1, 0.01, 1.0); 2], 1.0).unwrap()
}

fn sequence(lin: &[[f64; 4]], quad: &[[f64; 2]]) -> ContractionSequence {
    let maps: Vec<Arc<dyn SmoothMap>> = lin
        .iter()
        .zip(quad)
        .map(|(l, q)| {
            let m = PerturbedAffine::new(DMatrix::from_row_slice(2, 2, l), DVector::zeros(2), Perturbation::quadratic(q.to_vec()));
            Arc::new(m) as Arc<dyn SmoothMap>
        })
        .collect();
    ContractionSequence::new(maps, 0.5, 1.0, 0.1).unwrap()
}

fn contraction() -> impl Strategy<Value = [f64; 4]> {
    (0.3f64..0.45, 0.25f64..0.45, -0.05f64..0.05, -0.05f64..0.05).prop_map(|(a, d, b, c)| [a, b, c, d])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normalization_fixes_origin_to_first_order(
        lin in proptest::collection::vec(contraction(), 12),
        quad in proptest::collection::vec((-0.05f64..0.05, -0.05f64..0.05).prop_map(|(a, b)| [a, b]), 12),
        n in 1usize..12,
    ) {
        let seq = sequence(&lin, &quad);
        let g = normalized_composition(&seq, n).unwrap();
        let zero = DVector::zeros(2);
        prop_assert!(g.eval(&zero).amax() < 1e-12);
        prop_assert!((g.jacobian(&zero) - DMatrix::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn affine_sequences_are_undistorted(lin in proptest::collection::vec(contraction(), 8), x in -0.3f64..0.3, y in -0.3f64..0.3) {
        let seq = sequence(&lin, &[[0.0, 0.0]; 8]);
        let r = distortion_check(&seq, &DVector::from_vec(vec![x, y]), &DVector::from_vec(vec![y, x]), 8).unwrap();
        prop_assert!(r.deviation() < 1e-12);
        let s = control_of_shape(&seq, 0.125, 8).unwrap();
        prop_assert!((s.eta1 - 1.0).abs() < 1e-12 && (s.eta2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn limit_geometry_is_hoelder_in_theta(prefix in proptest::collection::vec(0usize..2, 8), other in proptest::collection::vec(0usize..2, 8), common in proptest::collection::vec(0usize..2, 2..8)) {
        let sys = perturbed_k1prime();
        let n = 14;
        let k = common.len() - 1;
        let word = |head: &[usize]| {
            let mut w: Vec<usize> = head.iter().copied().cycle().take(n + 1 - common.len()).collect();
            w.extend(&common);
            LeftWord::finite(w).unwrap()
        };
        let (a, b) = (word(&prefix), word(&other));
        let ga = limit_geometry(&sys, &a, n, None).unwrap();
        let gb = limit_geometry(&sys, &b, n, None).unwrap();
        // the truncations to k letters coincide, so each side is within its own tail bound
        let bound = limit_geometry(&sys, &a, k, None).unwrap().error_bound + limit_geometry(&sys, &b, k, None).unwrap().error_bound;
        let grid = piece_grid(&sys, a.last(), 17);
        prop_assert!(c1_distance(&ga.geometry, &gb.geometry, &grid) <= bound * 1.0001 + 1e-12);
    }

    #[test]
    fn base_point_changes_by_an_affine_map(w in proptest::collection::vec(0usize..2, 13), c1 in 0.05f64..0.4, c2 in 0.05f64..0.4) {
        let sys = perturbed_k1prime();
        let theta = LeftWord::finite(w).unwrap();
        let shift = if theta.last() == 1 { 0.5 } else { 0.0 };
        let at = |c: f64| limit_geometry(&sys, &theta, 12, Some(DVector::from_element(1, c + shift))).unwrap().geometry;
        let (k1, k2) = (at(c1), at(c2));
        let sample = |i: usize, m: usize| DVector::from_element(1, shift + 0.47 * i as f64 / m as f64);
        let fit: Vec<usize> = vec![0, 5, 10];
        let xs: Vec<f64> = fit.iter().map(|&i| k1.eval(&sample(i, 10))[0]).collect();
        let ys: Vec<f64> = fit.iter().map(|&i| k2.eval(&sample(i, 10))[0]).collect();
        let (a, b, _) = linear_fit(&xs, &ys);
        for i in 0..20 {
            let x = sample(i, 19);
            prop_assert!((k2.eval(&x)[0] - (a * k1.eval(&x)[0] + b)).abs() < 1e-9);
        }
    }

    #[test]
    fn linking_flags_are_monotone(s in 1i64..40, t in -40i64..40) {
        let k = build_k1(7, &Scalar::ratio(1, 100)).unwrap();
        let kp = build_k1prime(&Scalar::ratio(1, 100)).unwrap();
        let b = RealAffine::line(Scalar::ratio(s, 10), Scalar::ratio(t, 20)).unwrap();
        let r = empirical_intersection(&k, &kp, &b, 6, 512).unwrap();
        let first_false = r.linked.iter().position(|x| !x).unwrap_or(r.linked.len());
        prop_assert!(r.linked[first_false..].iter().all(|x| !x));
        prop_assert!(r.linked.iter().zip(&r.frontier).all(|(l, f)| *l == (*f > 0)));
    }

    #[test]
    fn certificates_roundtrip_and_recheck(n in 7i64..14) {
        let r = verify_prop_6_2(&ExampleParams::exact(n)).unwrap();
        for c in &r.certificates {
            let back = CoveringCertificate::from_json(&c.to_json()).unwrap();
            prop_assert_eq!(&back, c);
            prop_assert_eq!(back.recheck().unwrap(), c.delta.clone());
        }
    }
}

#[test]
fn affine_limit_geometry_is_identity_in_floats() {
    let sys = PerturbedCantorSystem::unperturbed(build_k1prime(&Scalar::ratio(1, 10)).unwrap()).unwrap();
    let g = limit_geometry(&sys, &LeftWord::constant(1), 20, None).unwrap();
    assert_eq!(g.error_bound, 0.0);
    for x in ball_grid(1, 0.5, 11) {
        let y = &x + DVector::from_element(1, 0.5);
        assert!((g.geometry.eval(&y) - &y).amax() < 1e-9);
    }
}

#[test]
fn reports_are_reproducible() {
    let m = AffineCantorSystem::middle_third();
    let b = RealAffine::line(Scalar::ratio(3, 2), Scalar::ratio(-1, 4)).unwrap();
    let run = || serde_json::to_string(&empirical_intersection(&m, &m, &b, 8, 256).unwrap()).unwrap();
    assert_eq!(run(), run());
    let r = verify_prop_6_2(&ExampleParams::exact(7)).unwrap();
    let sys = StressSystems { k: &m, kp: &m, b: &b, depth: 6, cap: 64 };
    let stress = || serde_json::to_string(&perturb_and_retest(42, 1e-6, 8, &r.certificates[1], Some(&sys)).unwrap()).unwrap();
    assert_eq!(stress(), stress());
}

#[test]
fn periodic_limit_geometry_tail() {
    let sys = perturbed_k1prime();
    let theta = LeftWord::constant(1);
    let g10 = limit_geometry(&sys, &theta, 10, None).unwrap();
    let g12 = limit_geometry(&sys, &theta, 12, None).unwrap();
    let grid = piece_grid(&sys, 1, 17);
    let dist = c1_distance(&g10.geometry, &g12.geometry, &grid);
    assert!(dist > 0.0 && dist <= g10.error_bound, "{dist} vs {}", g10.error_bound);
    assert!(g10.rate < 0.5);
}

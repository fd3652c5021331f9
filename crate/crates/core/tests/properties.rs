//! Property tests over randomized inputs: canonicalization, the
//! transferability order, the percent mapping and the accuracy envelope.

use onnmesh::linalg::{max_abs_diff, wrap_angle};
use onnmesh::{
    error_level_from_percent, error_level_percent, faulty_mzi_transfer, is_transferable,
    monotone_envelope, theta_range, MZIParams, SplitterError,
};
use proptest::prelude::*;
use std::f64::consts::FRAC_PI_4;

proptest! {
    #[test]
    fn wrap_angle_lands_in_range_and_is_idempotent(x in -1e6f64..1e6f64) {
        let w = wrap_angle(x);
        prop_assert!((0.0..std::f64::consts::TAU).contains(&w));
        prop_assert_eq!(wrap_angle(w), w);
    }

    #[test]
    fn canonicalized_params_preserve_the_faulty_transfer_matrix(
        theta in -50.0f64..50.0,
        phi in -50.0f64..50.0,
        alpha in -0.7f64..0.7,
        beta in -0.7f64..0.7,
    ) {
        let e = SplitterError::new(alpha, beta).unwrap();
        let canonical = faulty_mzi_transfer(MZIParams::new(theta, phi), e);
        // shifting by whole turns changes nothing
        let shifted = faulty_mzi_transfer(
            MZIParams::new(theta + 4.0 * std::f64::consts::TAU, phi - 2.0 * std::f64::consts::TAU),
            e,
        );
        prop_assert!(max_abs_diff(&canonical, &shifted) < 1e-12);
    }

    #[test]
    fn transferability_is_reflexive_and_transitive(
        a1 in -0.7f64..0.7, b1 in -0.7f64..0.7,
        a2 in -0.7f64..0.7, b2 in -0.7f64..0.7,
        a3 in -0.7f64..0.7, b3 in -0.7f64..0.7,
    ) {
        let x = SplitterError::new(a1, b1).unwrap();
        let y = SplitterError::new(a2, b2).unwrap();
        let z = SplitterError::new(a3, b3).unwrap();
        prop_assert!(is_transferable(x, x));
        if is_transferable(x, y) && is_transferable(y, z) {
            prop_assert!(is_transferable(x, z));
        }
        // transferability implies the theta range only shrinks
        if is_transferable(x, y) {
            let rx = theta_range(x);
            let ry = theta_range(y);
            prop_assert!(ry.lo <= rx.lo + 1e-12 && rx.hi <= ry.hi + 1e-12);
        }
    }

    #[test]
    fn percent_mapping_round_trips_and_is_monotone(
        eps1 in 0.0f64..FRAC_PI_4,
        eps2 in 0.0f64..FRAC_PI_4,
    ) {
        let p1 = error_level_percent(eps1);
        prop_assert!((error_level_from_percent(p1) - eps1).abs() < 1e-12);
        if eps1 < eps2 {
            prop_assert!(p1 <= error_level_percent(eps2));
        }
    }

    #[test]
    fn envelope_is_a_non_increasing_idempotent_upper_bound(
        curve in prop::collection::vec(0.0f64..1.0, 1..40)
    ) {
        let env = monotone_envelope(&curve);
        for (x, e) in curve.iter().zip(&env) {
            prop_assert!(e >= x);
        }
        for pair in env.windows(2) {
            prop_assert!(pair[0] >= pair[1]);
        }
        prop_assert_eq!(monotone_envelope(&env), env.clone());
        // definition: out[i] = max over j >= i of in[j]
        for i in 0..curve.len() {
            let suffix_max = curve[i..].iter().cloned().fold(f64::MIN, f64::max);
            prop_assert_eq!(env[i], suffix_max);
        }
    }
}

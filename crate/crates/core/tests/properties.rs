//! Property tests for the crate-wide invariants.

use heleshaw::lattice::{
    read_cluster, run_idla, run_rotor_router, write_cluster, AngleSides, BoundaryCondition,
    RotorInit,
};
use heleshaw::shape::{hausdorff_distance, polygon_area, symmetric_difference_fraction,
    NormalizedShape};
use heleshaw::special::{
    arctan_c, branch_log, branch_pow, gauss_2f1_full, BranchConvention, Complex,
};
use proptest::prelude::*;

fn off_cut(z: Complex) -> bool {
    z.norm() > 1e-6 && z.im.abs() > 1e-9
}

fn conventions() -> impl Strategy<Value = BranchConvention> {
    prop_oneof![
        Just(BranchConvention::standard()),
        Just(BranchConvention::positive_axis()),
    ]
}

fn bcs() -> impl Strategy<Value = BoundaryCondition> {
    prop_oneof![
        Just(BoundaryCondition::None),
        Just(BoundaryCondition::KillNegAxis),
        Just(BoundaryCondition::KillAngleSides(AngleSides::Half)),
        Just(BoundaryCondition::KillAngleSides(AngleSides::Quarter)),
        Just(BoundaryCondition::KillReflect),
        (0.0..=1.0f64).prop_map(BoundaryCondition::Kpr),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_exp_roundtrip(
        re in -3.0..3.0f64,
        im in -3.0..3.0f64,
        conv in conventions(),
    ) {
        let z = Complex::new(re, im);
        prop_assume!(off_cut(z));
        let l = branch_log(z, conv).unwrap();
        prop_assert!((l.exp() - z).norm() <= 1e-14 * (1.0 + z.norm()));
    }

    #[test]
    fn integer_powers_match_repeated_multiplication(
        re in -2.0..2.0f64,
        im in -2.0..2.0f64,
        m in 0u32..6,
        conv in conventions(),
    ) {
        let z = Complex::new(re, im);
        prop_assume!(off_cut(z));
        let direct = branch_pow(z, m as f64, conv).unwrap();
        let mut repeated = Complex::ONE;
        for _ in 0..m {
            repeated *= z;
        }
        prop_assert!(
            (direct - repeated).norm() <= 1e-12 * (1.0 + repeated.norm()),
            "{direct} vs {repeated}"
        );
    }

    #[test]
    fn arctan_is_odd(re in -2.0..2.0f64, im in -0.9..0.9f64) {
        let w = Complex::new(re, im);
        prop_assume!((w - Complex::I).norm() > 1e-3 && (w + Complex::I).norm() > 1e-3);
        let conv = BranchConvention::standard();
        let plus = arctan_c(w, conv).unwrap();
        let minus = arctan_c(-w, conv).unwrap();
        prop_assert!((plus + minus).norm() < 1e-12);
    }

    #[test]
    fn hypergeometric_cap_doubling_is_stable(
        b in 0.1..2.0f64,
        r in 0.0..0.9f64,
        theta in 0.0..std::f64::consts::TAU,
    ) {
        let z = Complex::from_polar(r, theta);
        let (al, be, ga) = (-0.5, 2.0 * b, 2.0 * b + 1.5);
        let s1 = gauss_2f1_full(al, be, ga, z, 1e-12, 20_000).unwrap();
        let s2 = gauss_2f1_full(al, be, ga, z, 1e-12, 40_000).unwrap();
        prop_assert!((s1.value - s2.value).norm() <= 1e-12 * (1.0 + s1.value.norm()));
        // terms eventually decrease under the ratio test
        prop_assert!(s1.error_bound <= 1e-12 * (1.0 + s1.value.norm()));
    }

    #[test]
    fn idla_cluster_invariants(
        n in 1usize..40,
        seed in 0u64..500,
        bc in bcs(),
    ) {
        let c = run_idla(n, bc, seed).unwrap();
        prop_assert_eq!(c.n(), n);
        prop_assert!(c.emitted >= n as u64);
        prop_assert_eq!(c.sites()[0], (0, 0));
        prop_assert!(c.is_connected());
        prop_assert!(c.sites().iter().all(|&(x, y)| !c.bc.is_killing(x, y)));
        if c.bc == BoundaryCondition::None {
            prop_assert_eq!(c.emitted, n as u64);
        }
        // serialization round-trip
        let mut buf = Vec::new();
        write_cluster(&c, &mut buf).unwrap();
        let back = read_cluster(&buf[..]).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn rotor_matches_itself(n in 1usize..60, init in prop_oneof![
        Just(RotorInit::AllNorth), Just(RotorInit::MirrorAxis)
    ]) {
        let a = run_rotor_router(n, BoundaryCondition::KillNegAxis, init).unwrap();
        let b = run_rotor_router(n, BoundaryCondition::KillNegAxis, init).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn shape_metrics_are_symmetric(
        r1 in 0.3..0.7f64,
        r2 in 0.3..0.7f64,
        dx in -0.2..0.2f64,
    ) {
        let circle = |r: f64, cx: f64| {
            let boundary: Vec<[f64; 2]> = (0..96)
                .map(|i| {
                    let t = std::f64::consts::TAU * i as f64 / 96.0;
                    [cx + r * t.cos(), r * t.sin()]
                })
                .collect();
            let area = polygon_area(&boundary).abs();
            NormalizedShape { boundary, area, origin_inside: true }
        };
        let a = circle(r1, 0.0);
        let b = circle(r2, dx);
        let h1 = hausdorff_distance(&a, &b);
        let h2 = hausdorff_distance(&b, &a);
        prop_assert!((h1 - h2).abs() < 1e-12);
        let s1 = symmetric_difference_fraction(&a, &b);
        let s2 = symmetric_difference_fraction(&b, &a);
        prop_assert!((s1 - s2).abs() < 1e-12);
        // vanish iff identical (at raster resolution)
        prop_assert!(hausdorff_distance(&a, &a.clone()) < 1e-12);
        if (r1 - r2).abs() > 0.05 {
            prop_assert!(s1 > 0.0 && h1 > 0.0);
        }
    }
}

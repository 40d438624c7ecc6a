mod common;

use common::*;
use nonlocal_fem::kernels::KernelSpec;
use nonlocal_fem::special::gamma;
use nonlocal_fem::sparse::CsrMatrix;
use proptest::prelude::*;

#[test]
fn legendre_and_tensor_rules_are_exact() {
    legendre_exactness().unwrap();
}

#[test]
fn triangle_rules_are_exact() {
    triangle_exactness().unwrap();
}

#[test]
fn jacobi_moments_and_exactness() {
    jacobi_identities().unwrap();
}

#[test]
fn jacobi_matches_singular_oracle() {
    singular_oracle().unwrap();
}

#[test]
fn inverse_map_round_trips() {
    isoparametric_round_trip().unwrap();
}

#[test]
fn shape_functions_partition_unity() {
    partition_of_unity().unwrap();
}

#[test]
fn spatial_index_matches_brute_force() {
    spatial_index_agreement().unwrap();
}

#[test]
fn local_patch_test_is_exact() {
    let err = patch_test_error();
    assert!(err < 1e-10, "patch test error {err:e}");
}

#[test]
fn narrow_kernel_recovers_local_law() {
    let (operator_gap, delta) = local_limit_gaps();
    assert!(operator_gap < 0.01, "stress operator gap {operator_gap}");
    assert!(delta < 2.0, "solution gap {delta}%");
}

#[test]
fn assembly_is_deterministic_across_workers() {
    determinism_across_workers().unwrap();
}

#[test]
fn adaptive_oracle_self_check() {
    oracle_self_check().unwrap();
}

fn kernels() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (1e-4f64..0.1).prop_map(|tau| KernelSpec::BiExponential { tau }),
        (0.05f64..0.95).prop_map(|alpha| KernelSpec::PowerLaw { alpha }),
        (1e-4f64..1.0, 1e-3f64..1.0).prop_map(|(tau1, tau2)| KernelSpec::RadialExponential { tau1, tau2 }),
        (1.0f64..200.0, 1.0f64..5000.0).prop_map(|(tau1, tau2)| KernelSpec::Rational { tau1, tau2 }),
        (0.05f64..0.95).prop_map(|alpha| KernelSpec::BidirectionalPowerLaw { alpha }),
    ]
}

proptest! {
    #[test]
    fn kernels_are_symmetric(k in kernels(), x in prop::array::uniform2(-1.0f64..1.0), d in prop::array::uniform2(-0.5f64..0.5), axis in 0usize..3) {
        // the bidirectional kernel lives on coordinate lines through x
        let d = match (k, axis) {
            (KernelSpec::BidirectionalPowerLaw { .. }, 0) => [d[0], 0.0],
            (KernelSpec::BidirectionalPowerLaw { .. }, _) => [0.0, d[1]],
            _ => d,
        };
        prop_assume!(d[0] != 0.0 && d[1] != 0.0 || matches!(k, KernelSpec::BidirectionalPowerLaw { .. }) && d != [0.0, 0.0]);
        let xp = [x[0] + d[0], x[1] + d[1]];
        let a = k.eval(x, xp).unwrap();
        let b = k.eval(xp, x).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a >= 0.0 && a.is_finite());
    }

    #[test]
    fn gamma_recurrence_and_reflection(x in 0.05f64..5.0) {
        prop_assert!((gamma(x + 1.0) - x * gamma(x)).abs() <= 1e-12 * gamma(x + 1.0).abs().max(1.0));
        if x < 1.0 {
            let r = gamma(x) * gamma(1.0 - x) * (std::f64::consts::PI * x).sin();
            prop_assert!((r - std::f64::consts::PI).abs() < 1e-12);
        }
    }

    #[test]
    fn csr_matvec_matches_dense(entries in prop::collection::vec((0u32..6, 0u32..5, -10.0f64..10.0), 0..40), x in prop::collection::vec(-1.0f64..1.0, 5)) {
        let mut dense = [[0.0; 5]; 6];
        for &(i, j, v) in &entries {
            dense[i as usize][j as usize] += v;
        }
        let half = entries.len() / 2;
        let m = CsrMatrix::from_triplet_blocks(6, 5, &[entries[..half].to_vec(), entries[half..].to_vec()]);
        let y = m.matvec(&x);
        for i in 0..6 {
            let expect: f64 = (0..5).map(|j| dense[i][j] * x[j]).sum();
            prop_assert!((y[i] - expect).abs() < 1e-12);
        }
    }
}

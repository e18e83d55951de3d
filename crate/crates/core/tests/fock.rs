use faer::Mat;
use moyal_scatter::fock::{conj_sandwich_coords, exponential_check, CarNormalization, FockSpace};
use moyal_scatter::linalg::{self, c64, ZERO};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c_odd_hermitian(m2: usize, seed: u64) -> Mat<c64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = linalg::random_hermitian(m2, &mut rng);
    let c = conj_sandwich_coords(&h);
    Mat::from_fn(m2, m2, |i, j| (h[(i, j)] - c[(i, j)]) * 0.5)
}

fn normalization(standard: bool) -> CarNormalization {
    if standard {
        CarNormalization::Standard1
    } else {
        CarNormalization::SelfDual2
    }
}

#[test]
fn standard_normalization_two_point() {
    let f = FockSpace::build(4, CarNormalization::Standard1).unwrap();
    let mut v = vec![ZERO; 8];
    v[1] = c64::new(1.0, 0.0);
    assert!((f.two_point(&v, &v) - c64::new(1.0, 0.0)).norm() < 1e-14);
    // χ⁻ directions annihilate the vacuum on the right
    let mut w = vec![ZERO; 8];
    w[5] = c64::new(1.0, 0.0);
    assert!(f.two_point(&w, &w).norm() < 1e-14);
}

#[test]
fn odd_mode_count_is_rejected() {
    assert!(FockSpace::build(13, CarNormalization::SelfDual2).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn car_relations(half in 1usize..4, standard in any::<bool>()) {
        let f = FockSpace::build(2 * half, normalization(standard)).unwrap();
        let (car, star) = f.car_residuals();
        prop_assert!(car < 1e-12);
        prop_assert!(star < 1e-12);
    }

    #[test]
    fn bilinear_is_a_derivation(seed in any::<u64>(), half in 1usize..4, standard in any::<bool>()) {
        let m = 2 * half;
        let f = FockSpace::build(m, normalization(standard)).unwrap();
        let a = c_odd_hermitian(2 * m, seed);
        let g = f.normal_ordered_bilinear(&a).unwrap();
        prop_assert!(f.derivation_residual(&g, &a) < 1e-10);
        prop_assert!(g[(0, 0)].norm() < 1e-13);
        prop_assert!(linalg::hermiticity_defect(g.as_ref()) < 1e-12);
    }

    #[test]
    fn bilinear_basis_independent(seed in any::<u64>()) {
        let m = 4;
        let f = FockSpace::build(m, CarNormalization::SelfDual2).unwrap();
        let a = c_odd_hermitian(2 * m, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let u = linalg::random_unitary(m, &mut rng);
        let w = Mat::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
            (true, true) => u[(i, j)],
            (false, false) => u[(i - m, j - m)].conj(),
            _ => ZERO,
        });
        let g = f.normal_ordered_bilinear(&a).unwrap();
        let gw = f.normal_ordered_bilinear_in_basis(&a, &w).unwrap();
        prop_assert!(linalg::max_abs_diff(g.as_ref(), gw.as_ref()) < 1e-12);
    }

    #[test]
    fn implementer_intertwines(seed in any::<u64>()) {
        let f = FockSpace::build(4, CarNormalization::SelfDual2).unwrap();
        let a = c_odd_hermitian(8, seed);
        let n = linalg::operator_norm(a.as_ref(), 500);
        let a = linalg::scale(a.as_ref(), c64::new(0.3 / n, 0.0));
        let ex = exponential_check(&f, &a, &[1.0, 0.5, 0.25]).unwrap();
        prop_assert!(ex.intertwining.iter().all(|&r| r < 1e-8));
        prop_assert!(ex.exp_defects.iter().all(|&r| r < 1e-8));
        prop_assert!(ex.linear_ratios.iter().all(|&r| (r - 4.0).abs() < 0.5), "{:?}", ex.linear_ratios);
    }
}

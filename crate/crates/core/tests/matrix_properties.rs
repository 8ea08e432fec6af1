mod common;

use common::*;
use nujd::{
    apply_congruence, hermitian_skew_split, is_essentially_equivalent, offdiag_residual, ComplexMatrix, CongruenceKind,
    GlElement, TaggedMatrix, TaggedMatrixSet, C64,
};
use proptest::prelude::*;

fn gl(m: nalgebra::DMatrix<C64>) -> GlElement {
    GlElement::new(ComplexMatrix::from_dmatrix(m).unwrap()).unwrap()
}

fn diagonal_set(m: usize, count: usize, seed: u64) -> TaggedMatrixSet {
    let mut r = rng(seed);
    let items = (0..count)
        .map(|i| {
            if i % 2 == 0 {
                let d: Vec<f64> = (0..m).map(|_| cn(&mut r).re).collect();
                TaggedMatrix::hermitian(ComplexMatrix::from_real_diagonal(&d)).unwrap()
            } else {
                let d: Vec<C64> = (0..m).map(|_| cn(&mut r)).collect();
                TaggedMatrix::transpose(ComplexMatrix::from_diagonal(&d)).unwrap()
            }
        })
        .collect();
    TaggedMatrixSet::new(items).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn split_recombines(m in 1usize..10, seed in any::<u64>()) {
        let c = random_matrix(m, &mut rng(seed));
        let (h, s) = hermitian_skew_split(&c).unwrap();
        prop_assert!(h.hermitian_deviation() == 0.0);
        prop_assert!(s.hermitian_deviation() == 0.0);
        let back = h.as_dmatrix() + s.as_dmatrix() * C64::new(0.0, 1.0);
        let err = (back - c.as_dmatrix()).norm();
        prop_assert!(err <= 8.0 * f64::EPSILON * c.frobenius(), "error {err:e}");
    }

    #[test]
    fn congruence_is_a_group_action(m in 1usize..8, seed in any::<u64>(), hermitian in any::<bool>()) {
        let mut r = rng(seed);
        let x = mixing(m, 1e3, &mut r);
        let y = mixing(m, 1e3, &mut r);
        let c = if hermitian {
            TaggedMatrix::hermitian(random_hermitian(m, &mut r)).unwrap()
        } else {
            TaggedMatrix::transpose(random_symmetric(m, &mut r)).unwrap()
        };
        let stepwise = apply_congruence(&y, &apply_congruence(&x, &c).unwrap()).unwrap();
        let xy = gl(x.matrix().as_dmatrix() * y.matrix().as_dmatrix());
        let direct = apply_congruence(&xy, &c).unwrap();
        let diff = (stepwise.matrix().as_dmatrix() - direct.matrix().as_dmatrix()).norm();
        prop_assert!(diff <= 1e-12 * direct.matrix().frobenius().max(1e-300), "relative {:e}", diff / direct.matrix().frobenius());
    }

    #[test]
    fn essential_equivalence_is_an_equivalence(m in 1usize..7, seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = mixing(m, 1e3, &mut r);
        let e1 = random_gm(m, false, &mut r);
        let e2 = random_gm(m, false, &mut r);
        let y = gl(x.matrix().as_dmatrix() * &e1);
        let z = gl(y.matrix().as_dmatrix() * &e2);
        let tol = 1e-6;
        prop_assert!(is_essentially_equivalent(&x, &x, tol).unwrap().equivalent);
        prop_assert!(is_essentially_equivalent(&y, &x, tol).unwrap().equivalent);
        prop_assert!(is_essentially_equivalent(&x, &y, tol).unwrap().equivalent);
        prop_assert!(is_essentially_equivalent(&z, &x, 2.0 * tol).unwrap().equivalent);
        // A generic second matrix is not in the class.
        if m >= 2 {
            let w = mixing(m, 1e3, &mut r);
            prop_assert!(!is_essentially_equivalent(&w, &x, tol).unwrap().equivalent);
        }
    }

    #[test]
    fn residual_is_invariant_under_unit_modulus_patterns(m in 2usize..7, seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = mixing(m, 1e3, &mut r);
        let set = TaggedMatrixSet::new(vec![
            TaggedMatrix::hermitian(random_hermitian(m, &mut r)).unwrap(),
            TaggedMatrix::transpose(random_symmetric(m, &mut r)).unwrap(),
        ]).unwrap();
        let e = random_gm(m, true, &mut r);
        let xe = gl(a.matrix().as_dmatrix() * &e);
        let base = offdiag_residual(&set, &a).unwrap();
        let moved = offdiag_residual(&set, &xe).unwrap();
        prop_assert!((base - moved).abs() <= 1e-12 * base.max(1.0), "{base:e} vs {moved:e}");
    }

    #[test]
    fn residual_zero_set_is_invariant_under_patterns(m in 2usize..7, count in 1usize..5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let set = diagonal_set(m, count, seed ^ 0x5a5a);
        let e = gl(random_gm(m, false, &mut r));
        prop_assert!(offdiag_residual(&set, &GlElement::identity(m)).unwrap() == 0.0);
        prop_assert!(offdiag_residual(&set, &e).unwrap() <= 1e-14);
    }
}

#[test]
fn congruence_kinds_follow_the_tag() {
    let mut r = rng(1);
    let x = mixing(3, 10.0, &mut r);
    let h = apply_congruence(&x, &TaggedMatrix::hermitian(random_hermitian(3, &mut r)).unwrap()).unwrap();
    let s = apply_congruence(&x, &TaggedMatrix::transpose(random_symmetric(3, &mut r)).unwrap()).unwrap();
    assert_eq!(h.kind(), CongruenceKind::Hermitian);
    assert_eq!(s.kind(), CongruenceKind::Transpose);
    assert!(h.matrix().hermitian_deviation() < 1e-12);
    assert!(s.matrix().symmetry_deviation() < 1e-12);
}

mod common;

use common::*;
use nalgebra::DMatrix;
use nujd::linalg::{general_evd, hermitian_evd, symmetric_orthogonalize, takagi};
use nujd::{ComplexMatrix, GlElement, C64};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn takagi_reconstructs(m in 1usize..=12, seed in any::<u64>()) {
        let c = random_symmetric(m, &mut rng(seed));
        let tk = takagi(&c).unwrap();
        let u = tk.u.as_dmatrix();
        let unitarity = (u.adjoint() * u - DMatrix::<C64>::identity(m, m)).norm();
        prop_assert!(unitarity <= 1e-9, "UᴴU defect {unitarity:e}");
        prop_assert!(tk.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(tk.sigma.iter().all(|&s| s >= 0.0));
        let err = (tk.reconstruct().as_dmatrix() - c.as_dmatrix()).norm() / c.frobenius();
        prop_assert!(err <= 1e-9, "relative error {err:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn takagi_matches_evd_on_positive_definite_input(m in 1usize..=8, seed in any::<u64>()) {
        // A real symmetric positive definite matrix is both Hermitian and symmetric.
        let mut r = rng(seed);
        let a = DMatrix::from_fn(m, m, |_, _| C64::new(cn(&mut r).re, 0.0));
        let spd = &a * a.transpose() + DMatrix::<C64>::identity(m, m) * C64::new(0.5, 0.0);
        let c = ComplexMatrix::from_dmatrix(spd).unwrap();
        let sigma = takagi(&c).unwrap().sigma;
        let values = hermitian_evd(&c).unwrap().values;
        for (s, l) in sigma.iter().zip(&values) {
            prop_assert!((s - l).abs() <= 1e-10 * l.abs().max(1.0), "{s} vs {l}");
        }
    }

    #[test]
    fn symmetric_orthogonalization(m in 1usize..=8, seed in any::<u64>()) {
        let mut r = rng(seed);
        let w = mixing(m, 100.0, &mut r);
        let v = symmetric_orthogonalize(&w).unwrap();
        let vd = v.as_dmatrix();
        let defect = (vd.transpose() * vd - DMatrix::<C64>::identity(m, m)).norm();
        prop_assert!(defect <= 1e-9, "VᵀV defect {defect:e}");
        // V = W·M with M invertible: [W | V] has rank m.
        let stacked = DMatrix::from_fn(m, 2 * m, |i, j| if j < m { w.matrix()[(i, j)] } else { vd[(i, j - m)] });
        let s = stacked.singular_values();
        let rank = s.iter().filter(|&&x| x > 1e-9 * s[0]).count();
        prop_assert_eq!(rank, m);
        let factor = w.matrix().as_dmatrix().clone().try_inverse().unwrap() * vd;
        prop_assert!(GlElement::new(ComplexMatrix::from_dmatrix(factor).unwrap()).is_ok());
    }

    #[test]
    fn general_evd_trace(m in 1usize..=10, seed in any::<u64>()) {
        let c = random_matrix(m, &mut rng(seed));
        let (w, lambda) = general_evd(&c).unwrap();
        let sum: C64 = lambda.iter().sum();
        let trace = c.as_dmatrix().trace();
        let scale = lambda.iter().map(|l| l.norm()).sum::<f64>().max(1.0);
        prop_assert!((sum - trace).norm() <= 1e-8 * scale);
        let cw = c.as_dmatrix() * w.matrix().as_dmatrix();
        let wl = w.matrix().as_dmatrix() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda.clone()));
        prop_assert!((cw - wl).norm() <= 1e-8 * c.frobenius());
    }
}

#[test]
fn general_evd_near_scalar_input_terminates() {
    // C₁C₂⁻¹ close to a multiple of the identity used to stall the Schur iteration.
    let mut r = rng(99);
    let p = random_matrix(4, &mut r);
    let eye = DMatrix::<C64>::identity(4, 4) * C64::new(2.0, 0.5);
    let c = ComplexMatrix::from_dmatrix(eye + p.as_dmatrix() * C64::new(1e-13, 0.0)).unwrap();
    let (_, lambda) = general_evd(&c).unwrap_or_else(|e| {
        // Defective or near-defective reports are acceptable; hanging is not.
        assert!(matches!(e, nujd::NujdError::Defective { .. }), "{e}");
        (GlElement::identity(4), vec![C64::new(2.0, 0.5); 4])
    });
    for l in lambda {
        assert!((l - C64::new(2.0, 0.5)).norm() < 1e-9);
    }
}

#[test]
fn takagi_of_diagonal_with_phases() {
    let d = [C64::new(0.0, 3.0), C64::new(-1.0, 0.0), C64::new(0.5, 0.5)];
    let tk = takagi(&ComplexMatrix::from_diagonal(&d)).unwrap();
    let expected = [3.0, 1.0, 0.5f64.hypot(0.5)];
    for (s, e) in tk.sigma.iter().zip(expected) {
        assert!((s - e).abs() < 1e-12);
    }
}

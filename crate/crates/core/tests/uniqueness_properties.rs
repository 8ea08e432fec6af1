mod common;

use common::*;
use nujd::uniqueness::{
    collinear_pair, collinearity, identifiability_master, unique_thm1, unique_thm2, CertifyOptions, Verdict,
};
use nujd::{
    is_essentially_equivalent, offdiag_residual, CongruenceKind, DiagonalStack, GlElement, TaggedMatrixSet, C64,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Hermitian), Just(Family::Transpose), Just(Family::Mixed)]
}

fn random_stack(kind: CongruenceKind, m: usize, n: usize, seed: u64) -> DiagonalStack {
    let mut r = rng(seed);
    let spectra = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| match kind {
                    CongruenceKind::Hermitian => C64::new(cn(&mut r).re, 0.0),
                    CongruenceKind::Transpose => cn(&mut r),
                })
                .collect()
        })
        .collect();
    DiagonalStack::new(kind, spectra).unwrap()
}

fn kind_of(hermitian: bool) -> CongruenceKind {
    if hermitian {
        CongruenceKind::Hermitian
    } else {
        CongruenceKind::Transpose
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3000))]

    #[test]
    fn every_negative_verdict_ships_a_sound_witness(family in family(), seed in any::<u64>()) {
        let (sym, herm) = nonidentifiable(family, &mut rng(seed));
        let report = identifiability_master(sym.as_ref(), herm.as_ref(), CertifyOptions::default()).unwrap();
        prop_assert_eq!(report.verdict, Verdict::NotUnique);
        let witness = report.witness.expect("witness");
        let set = TaggedMatrixSet::new(stack_matrices(sym.as_ref(), herm.as_ref())).unwrap();
        let residual = offdiag_residual(&set, &witness).unwrap();
        prop_assert!(residual <= 1e-10, "residual {residual:e}");
        let m = set.dim();
        let eq = is_essentially_equivalent(&witness, &GlElement::identity(m), nujd::tol::PATTERN).unwrap();
        prop_assert!(!eq.equivalent);
        prop_assert!(eq.distance > 0.1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn collinearity_invariances(
        hermitian in any::<bool>(),
        m in 2usize..7,
        n in 1usize..6,
        seed in any::<u64>(),
    ) {
        let kind = kind_of(hermitian);
        let stack = random_stack(kind, m, n, seed);
        let rho = collinearity(&stack).unwrap();
        let mut r = rng(seed.wrapping_add(1));

        let mut reordered = stack.spectra().to_vec();
        reordered.shuffle(&mut r);
        let rho_reordered = collinearity(&DiagonalStack::new(kind, reordered).unwrap()).unwrap();
        prop_assert!((rho - rho_reordered).abs() <= 1e-12);

        // Rescaling one source (one position in every matrix) keeps ρ.
        let source = r.random_range(0..m);
        let alpha = match kind {
            CongruenceKind::Hermitian => C64::new(-4.2, 0.0),
            CongruenceKind::Transpose => C64::new(-2.5, 1.3),
        };
        let rescaled: Vec<Vec<C64>> = stack
            .spectra()
            .iter()
            .map(|d| d.iter().enumerate().map(|(k, z)| if k == source { z * alpha } else { *z }).collect())
            .collect();
        let rho_rescaled = collinearity(&DiagonalStack::new(kind, rescaled).unwrap()).unwrap();
        prop_assert!((rho - rho_rescaled).abs() <= 1e-12, "{rho} vs {rho_rescaled}");

        // Rescaling one matrix keeps the collinear pairs.
        let mut planted = stack.spectra().to_vec();
        for d in planted.iter_mut() {
            d[m - 1] = d[0] * C64::new(0.5, 0.0);
        }
        let before = collinear_pair(&DiagonalStack::new(kind, planted.clone()).unwrap(), 1e-10);
        let which = r.random_range(0..n);
        let factor = match kind {
            CongruenceKind::Hermitian => C64::new(if r.random_bool(0.5) { -3.7 } else { 0.02 }, 0.0),
            CongruenceKind::Transpose => C64::new(-2.5, 1.3),
        };
        planted[which].iter_mut().for_each(|z| *z *= factor);
        let after_stack = DiagonalStack::new(kind, planted).unwrap();
        prop_assert_eq!(before, collinear_pair(&after_stack, 1e-10));
        prop_assert!((collinearity(&after_stack).unwrap() - 1.0).abs() <= 1e-12);

        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(&mut r);
        let permuted: Vec<Vec<C64>> = stack.spectra().iter().map(|d| perm.iter().map(|&p| d[p]).collect()).collect();
        let rho_permuted = collinearity(&DiagonalStack::new(kind, permuted).unwrap()).unwrap();
        prop_assert!((rho - rho_permuted).abs() <= 1e-12);
    }

    #[test]
    fn master_agrees_with_single_kind_rule(
        hermitian in any::<bool>(),
        plant in any::<bool>(),
        m in 2usize..6,
        n in 1usize..4,
        seed in any::<u64>(),
    ) {
        let kind = kind_of(hermitian);
        let mut spectra = random_stack(kind, m, n, seed).spectra().to_vec();
        if plant {
            for d in spectra.iter_mut() {
                d[m - 1] = d[0] * C64::new(-1.5, 0.0);
            }
        }
        let stack = DiagonalStack::new(kind, spectra).unwrap();
        let opts = CertifyOptions::default();
        let direct = unique_thm1(&stack, opts).unwrap();
        let master = if hermitian {
            identifiability_master(None, Some(&stack), opts).unwrap()
        } else {
            identifiability_master(Some(&stack), None, opts).unwrap()
        };
        prop_assert_eq!(direct.verdict, master.verdict);
        prop_assert_eq!(master.verdict == Verdict::NotUnique, plant || n == 1);
    }

    #[test]
    fn master_agrees_with_two_matrix_rule(plant in any::<bool>(), m in 2usize..7, seed in any::<u64>()) {
        let mut r = rng(seed);
        let omega1: Vec<C64> = (0..m).map(|_| cn(&mut r)).collect();
        let mut omega2: Vec<f64> = (0..m).map(|_| cn(&mut r).re).collect();
        if plant {
            // |ω₁₀||ω₂₁| = |ω₁₁||ω₂₀|
            omega2[1] = omega1[1].norm() * omega2[0] / omega1[0].norm();
        }
        let opts = CertifyOptions::default();
        let direct = unique_thm2(&omega1, &omega2, opts).unwrap();
        let sym = DiagonalStack::transpose(vec![omega1.clone()]).unwrap();
        let herm = DiagonalStack::hermitian(vec![omega2.clone()]).unwrap();
        let master = identifiability_master(Some(&sym), Some(&herm), opts).unwrap();
        prop_assert_eq!(direct.verdict, master.verdict);
        prop_assert_eq!(direct.verdict == Verdict::NotUnique, plant);
    }
}

mod common;

use common::*;
use nujd::parallel::Execution;
use nujd::simulation::{generate, mix, Part, SourceKind, SourceSpec, StatisticSpec};
use nujd::statistics::{bootstrap_sigma, cumulant, ConjugationPattern, SignalBlock};
use nujd::{ComplexMatrix, GlElement};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn source_mix() -> Vec<SourceSpec> {
    vec![
        SourceSpec::new(SourceKind::Bpsk),
        SourceSpec::new(SourceKind::Qpsk),
        SourceSpec::new(SourceKind::NoncircularGaussian { lambda: 0.6 }),
    ]
}

fn statistics() -> Vec<StatisticSpec> {
    let cum = |pattern: &str, axes: [usize; 2], fixed: Vec<usize>, part: Part| StatisticSpec::Cumulant {
        pattern: pattern.into(),
        axes,
        fixed,
        part,
    };
    vec![
        StatisticSpec::Covariance,
        StatisticSpec::PseudoCovariance,
        StatisticSpec::Autocorrelation {
            lag: 1,
            part: Part::Hermitian,
        },
        StatisticSpec::Autocorrelation {
            lag: 2,
            part: Part::Skew,
        },
        StatisticSpec::PseudoAutocorrelation { lag: 1 },
        StatisticSpec::Window { start: 100, len: 600 },
        cum("0000", [2, 3], vec![0, 0], Part::Hermitian),
        cum("0101", [0, 1], vec![1, 2], Part::Hermitian),
        cum("0101", [0, 1], vec![2, 2], Part::Skew),
        cum("0011", [1, 3], vec![0, 1], Part::Hermitian),
        cum("001", [0, 1], vec![2], Part::Hermitian),
    ]
}

fn sigma(stat: &StatisticSpec, w: &SignalBlock, seed: u64) -> f64 {
    bootstrap_sigma(w, 20, seed, Execution::default(), |b| {
        stat.estimate(b).map(|t| t.matrix().clone())
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn statistics_are_multilinear(which in 0usize..11, seed in any::<u64>()) {
        let stat = &statistics()[which];
        let (s, truth) = generate(&source_mix(), 1000, seed).unwrap();
        let w = mix(&s, &truth.mixing).unwrap();
        let estimated = stat.estimate(&w).unwrap();
        let expected = mixed_image(stat, &s, &truth.mixing);
        let err = (estimated.matrix().as_dmatrix() - expected).norm();
        let a_norm = spectral_norm(truth.mixing.matrix().as_dmatrix());
        let bound = 5.0 * sigma(stat, &w, seed) * a_norm * a_norm;
        prop_assert!(err <= bound, "{stat:?}: {err:e} > {bound:e}");
        // The identity is exact in exact arithmetic.
        prop_assert!(err <= 1e-10 * estimated.matrix().frobenius().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cumulants_are_symmetric_under_joint_permutation(
        order in 2usize..=6,
        bits in proptest::collection::vec(any::<bool>(), 6),
        seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let series: Vec<Vec<nujd::C64>> = (0..order).map(|_| (0..200).map(|_| cn(&mut r)).collect()).collect();
        let bits = &bits[..order];
        let base = cumulant(
            &series.iter().map(Vec::as_slice).collect::<Vec<_>>(),
            &ConjugationPattern::new(bits.to_vec()).unwrap(),
        ).unwrap();
        let mut perm: Vec<usize> = (0..order).collect();
        perm.shuffle(&mut r);
        let permuted = cumulant(
            &perm.iter().map(|&i| series[i].as_slice()).collect::<Vec<_>>(),
            &ConjugationPattern::new(perm.iter().map(|&i| bits[i]).collect()).unwrap(),
        ).unwrap();
        prop_assert!((base - permuted).norm() <= 1e-12 * base.norm().max(1.0), "{base} vs {permuted}");
    }
}

#[test]
fn slices_of_independent_sources_are_diagonal() {
    let (s, _) = generate(&source_mix(), 100_000, 5).unwrap();
    let cases = [
        StatisticSpec::Covariance,
        StatisticSpec::PseudoCovariance,
        StatisticSpec::Cumulant {
            pattern: "0101".into(),
            axes: [0, 1],
            fixed: vec![0, 0],
            part: Part::Hermitian,
        },
        StatisticSpec::Cumulant {
            pattern: "0000".into(),
            axes: [0, 1],
            fixed: vec![2, 2],
            part: Part::Hermitian,
        },
    ];
    for stat in &cases {
        let est = stat.estimate(&s).unwrap();
        let off = est.matrix().offdiag_norm();
        let bound = 4.0 * sigma(stat, &s, 11);
        assert!(off <= bound, "{stat:?}: off-diagonal {off:e} > {bound:e}");
    }
}

#[test]
fn bootstrap_sigma_scales_like_inverse_root_t() {
    let (s, truth) = generate(&source_mix(), 100_000, 8).unwrap();
    let w = mix(&s, &truth.mixing).unwrap();
    let stats = [
        StatisticSpec::Covariance,
        StatisticSpec::Cumulant {
            pattern: "0101".into(),
            axes: [0, 1],
            fixed: vec![1, 1],
            part: Part::Hermitian,
        },
    ];
    for stat in &stats {
        let sig: Vec<f64> = [1_000usize, 10_000, 100_000]
            .iter()
            .map(|&t| sigma(stat, &w.window(0, t).unwrap(), 3))
            .collect();
        for pair in sig.windows(2) {
            let ratio = pair[0] / pair[1];
            let ideal = 10f64.sqrt();
            assert!(
                ratio >= ideal / 2.0 && ratio <= ideal * 2.0,
                "{stat:?}: σ ratio {ratio}"
            );
        }
    }
}

#[test]
fn bootstrap_is_independent_of_execution_mode() {
    let (s, _) = generate(&source_mix(), 2000, 2).unwrap();
    let f = |b: &SignalBlock| nujd::statistics::covariance(b).map(|t| t.matrix().clone());
    let par = bootstrap_sigma(&s, 30, 9, Execution::Parallel, f).unwrap();
    let seq = bootstrap_sigma(&s, 30, 9, Execution::Sequential, f).unwrap();
    assert_eq!(par.to_bits(), seq.to_bits());
}

#[test]
fn identity_mixing_leaves_statistics_unchanged() {
    let (s, _) = generate(&source_mix(), 1000, 4).unwrap();
    let eye = GlElement::identity(3);
    let w = mix(&s, &eye).unwrap();
    for stat in statistics() {
        let a = stat.estimate(&s).unwrap();
        let b = stat.estimate(&w).unwrap();
        let diff = ComplexMatrix::from_dmatrix(a.matrix().as_dmatrix() - b.matrix().as_dmatrix()).unwrap();
        assert_eq!(diff.frobenius(), 0.0, "{stat:?}");
    }
}

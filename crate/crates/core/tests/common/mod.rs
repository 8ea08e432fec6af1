#![allow(dead_code)]

use nalgebra::DMatrix;
use nujd::simulation::random_mixing;
use nujd::simulation::{Part, StatisticSpec};
use nujd::statistics::{cumulant_slice, ConjugationPattern, SignalBlock};
use nujd::{hermitian_skew_split, ComplexMatrix, CongruenceKind, DiagonalStack, GlElement, TaggedMatrix, C64};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cn(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_dmatrix(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    DMatrix::from_fn(m, m, |_, _| cn(rng))
}

pub fn random_matrix(m: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_dmatrix(random_dmatrix(m, rng)).unwrap()
}

pub fn random_symmetric(m: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let a = random_dmatrix(m, rng);
    ComplexMatrix::from_dmatrix(&a + a.transpose()).unwrap()
}

pub fn random_hermitian(m: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let a = random_dmatrix(m, rng);
    ComplexMatrix::from_dmatrix(&a + a.adjoint()).unwrap()
}

pub fn random_hpd(m: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let a = random_dmatrix(m, rng);
    let eye = DMatrix::<C64>::identity(m, m) * C64::new(0.1 * m as f64, 0.0);
    ComplexMatrix::from_dmatrix(&a * a.adjoint() + eye).unwrap()
}

pub fn random_unitary(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    random_dmatrix(m, rng).qr().q()
}

pub fn mixing(m: usize, kappa: f64, rng: &mut ChaCha8Rng) -> GlElement {
    random_mixing(m, kappa, rng).unwrap()
}

/// Random element of 𝒢(m): permutation times nonzero complex diagonal.
pub fn random_gm(m: usize, unit_modulus: bool, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(rng);
    let mut e = DMatrix::<C64>::zeros(m, m);
    for (j, &i) in perm.iter().enumerate() {
        let phase = C64::from_polar(1.0, rng.random_range(-PI..PI));
        let scale = if unit_modulus { 1.0 } else { rng.random_range(0.2..5.0) };
        e[(i, j)] = phase * scale;
    }
    e
}

pub fn inverse_adjoint(a: &GlElement) -> GlElement {
    let inv = a.matrix().as_dmatrix().clone().try_inverse().unwrap();
    GlElement::new(ComplexMatrix::from_dmatrix(inv.adjoint()).unwrap()).unwrap()
}

/// `A·diag(d)·Aᴴ` (Hermitian kind) or `A·diag(d)·Aᵀ` (transpose kind).
pub fn congruent(a: &GlElement, d: &[C64], hermitian: bool) -> TaggedMatrix {
    let ad = a.matrix().as_dmatrix();
    let dm = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d));
    if hermitian {
        TaggedMatrix::symmetrized(
            &ComplexMatrix::from_dmatrix(ad * dm * ad.adjoint()).unwrap(),
            nujd::CongruenceKind::Hermitian,
        )
        .unwrap()
    } else {
        TaggedMatrix::symmetrized(
            &ComplexMatrix::from_dmatrix(ad * dm * ad.transpose()).unwrap(),
            nujd::CongruenceKind::Transpose,
        )
        .unwrap()
    }
}

/// A two-matrix problem `C₁ = A Ω₁ Aᴴ`, `C₂ = A Ω₂ Aᵀ` with real Ω₁ whose
/// ratios |Ω₁ₖ|/|Ω₂ₖ| are separated by at least `margin` (relative).
pub struct PutInstance {
    pub a: GlElement,
    pub omega1: Vec<f64>,
    pub omega2: Vec<C64>,
    pub c1: TaggedMatrix,
    pub c2: TaggedMatrix,
}

pub fn separated_ratios(m: usize, margin: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let r: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..3.0)).collect();
        let ok = (0..m).all(|k| ((k + 1)..m).all(|l| (r[k] - r[l]).abs() / r[k].max(r[l]) >= margin));
        if ok {
            return r;
        }
    }
}

pub fn put_instance(m: usize, kappa: f64, margin: f64, rng: &mut ChaCha8Rng) -> PutInstance {
    let a = mixing(m, kappa, rng);
    let ratios = separated_ratios(m, margin, rng);
    let omega2: Vec<C64> = (0..m)
        .map(|_| C64::from_polar(rng.random_range(0.5..2.0), rng.random_range(-PI..PI)))
        .collect();
    let omega1: Vec<f64> = (0..m)
        .map(|k| {
            let sign = if rng.random_bool(0.3) { -1.0 } else { 1.0 };
            sign * ratios[k] * omega2[k].norm()
        })
        .collect();
    let d1: Vec<C64> = omega1.iter().map(|&x| C64::new(x, 0.0)).collect();
    let c1 = congruent(&a, &d1, true);
    let c2 = congruent(&a, &omega2, false);
    PutInstance {
        a,
        omega1,
        omega2,
        c1,
        c2,
    }
}

/// Kinds present in a generated identifiability problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Hermitian,
    Transpose,
    Mixed,
}

fn real_spectra(m: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<C64>> {
    (0..n)
        .map(|_| (0..m).map(|_| C64::new(rng.sample(StandardNormal), 0.0)).collect())
        .collect()
}

fn complex_spectra(m: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<C64>> {
    (0..n).map(|_| (0..m).map(|_| cn(rng)).collect()).collect()
}

fn make_proportional(spectra: &mut [Vec<C64>], k: usize, l: usize, c: C64) {
    for d in spectra.iter_mut() {
        d[l] = c * d[k];
    }
}

/// Random stacks with a planted non-identifiable pair; `m ∈ 2..=6`, one to
/// five matrices per stack.
pub fn nonidentifiable(family: Family, rng: &mut ChaCha8Rng) -> (Option<DiagonalStack>, Option<DiagonalStack>) {
    let m = rng.random_range(2..=6);
    let k = rng.random_range(0..m);
    let l = (k + rng.random_range(1..m)) % m;
    let n1 = rng.random_range(1..=5);
    let n2 = rng.random_range(1..=5);
    let modulus = rng.random_range(0.2..3.0);
    let real_c = if rng.random_bool(0.5) { modulus } else { -modulus };
    let complex_c = C64::from_polar(modulus, rng.random_range(-PI..PI));
    let zero_pair = rng.random_bool(0.1);
    match family {
        Family::Hermitian => {
            let mut h = real_spectra(m, n2, rng);
            make_proportional(&mut h, k, l, C64::new(real_c, 0.0));
            (
                None,
                Some(DiagonalStack::new(nujd::CongruenceKind::Hermitian, h).unwrap()),
            )
        }
        Family::Transpose => {
            let mut s = complex_spectra(m, n1, rng);
            make_proportional(&mut s, k, l, complex_c);
            (
                Some(DiagonalStack::new(nujd::CongruenceKind::Transpose, s).unwrap()),
                None,
            )
        }
        Family::Mixed => {
            let mut s = complex_spectra(m, n1, rng);
            make_proportional(&mut s, k, l, complex_c);
            let mut h = real_spectra(m, n2, rng);
            if zero_pair {
                // Both sources silent in the Hermitian statistics.
                for d in h.iter_mut() {
                    d[k] = C64::new(0.0, 0.0);
                    d[l] = C64::new(0.0, 0.0);
                }
            } else {
                make_proportional(&mut h, k, l, C64::new(real_c, 0.0));
            }
            let sym = DiagonalStack::new(nujd::CongruenceKind::Transpose, s).unwrap();
            let herm = DiagonalStack::new(nujd::CongruenceKind::Hermitian, h).ok();
            (Some(sym), herm)
        }
    }
}

/// The diagonal matrices behind the stacks (mixing A = I).
pub fn stack_matrices(sym: Option<&DiagonalStack>, herm: Option<&DiagonalStack>) -> Vec<TaggedMatrix> {
    sym.into_iter().chain(herm).flat_map(|s| s.to_matrices()).collect()
}

/// Statistic of `A·s` rebuilt from sources `s`: the raw source slice is
/// contracted over the fixed cumulant positions, mapped by `A·Ŝ·A^†` and
/// only then split into its Hermitian or skew part. Agrees with the direct
/// estimate up to rounding.
pub fn mixed_image(stat: &StatisticSpec, s: &SignalBlock, a: &GlElement) -> DMatrix<C64> {
    let ad = a.matrix().as_dmatrix();
    let congruence = |kind: CongruenceKind, inner: &DMatrix<C64>| match kind {
        CongruenceKind::Hermitian => ad * inner * ad.adjoint(),
        CongruenceKind::Transpose => ad * inner * ad.transpose(),
    };
    let StatisticSpec::Cumulant {
        pattern,
        axes,
        fixed,
        part,
    } = stat
    else {
        let t = stat.estimate(s).unwrap();
        return congruence(t.kind(), t.matrix().as_dmatrix());
    };
    let bits = ConjugationPattern::parse(pattern).unwrap();
    let k = bits.order();
    let free: Vec<usize> = (0..k).filter(|p| !axes.contains(p)).collect();
    let m = s.channels();
    let kind = bits.slice_kind(axes[0], axes[1]);
    let mut raw = DMatrix::<C64>::zeros(m, m);
    for combo in 0..m.pow(fixed.len() as u32) {
        let channels: Vec<usize> = (0..fixed.len()).map(|i| (combo / m.pow(i as u32)) % m).collect();
        let weight: C64 = channels
            .iter()
            .zip(fixed)
            .zip(&free)
            .map(|((&c, &f), &pos)| {
                if bits.bits()[pos] {
                    ad[(f, c)].conj()
                } else {
                    ad[(f, c)]
                }
            })
            .product();
        let slice = cumulant_slice(s, &bits, &channels, (axes[0], axes[1])).unwrap();
        raw += slice.raw.as_dmatrix() * weight;
    }
    let mixed = congruence(kind, &raw);
    match kind {
        CongruenceKind::Transpose => (&mixed + mixed.transpose()) * C64::new(0.5, 0.0),
        CongruenceKind::Hermitian => {
            let (h, sk) = hermitian_skew_split(&ComplexMatrix::from_dmatrix(mixed).unwrap()).unwrap();
            match part {
                Part::Hermitian => h.into_dmatrix(),
                Part::Skew => sk.into_dmatrix(),
            }
        }
    }
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<C64>) -> f64 {
    a.singular_values().max()
}

//! Dense complex factorizations: SVD and Hermitian EVD (nalgebra-backed),
//! the Takagi factorization, general eigendecomposition through the complex
//! Schur form, principal matrix square roots and symmetric orthogonalization.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{NujdError, Result};
use crate::matrix::{ComplexMatrix, GlElement, C64};
use crate::tol;

/// Thin SVD `M = U · diag(s) · Vᴴ` with singular values sorted descending.
pub(crate) struct Svd {
    pub u: DMatrix<C64>,
    pub s: Vec<f64>,
    pub v: DMatrix<C64>,
}

pub(crate) fn svd(m: &DMatrix<C64>) -> Svd {
    let dec = m.clone().svd(true, true);
    let u = dec.u.expect("requested U");
    let v_t = dec.v_t.expect("requested V^T");
    let s: Vec<f64> = dec.singular_values.iter().copied().collect();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let u = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let v = DMatrix::from_fn(v_t.ncols(), order.len(), |i, j| v_t[(order[j], i)].conj());
    let s = order.iter().map(|&k| s[k]).collect();
    Svd { u, s, v }
}

pub(crate) fn singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// σ_max / σ_min in the 2-norm; infinite for singular input.
pub fn condition_number(m: &ComplexMatrix) -> f64 {
    let s = singular_values(m.as_dmatrix());
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// `C = U · diag(sigma) · Uᵀ` with unitary U and nonincreasing sigma.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TakagiFactorization {
    #[serde(serialize_with = "crate::io::ser_matrix")]
    pub u: ComplexMatrix,
    pub sigma: Vec<f64>,
}

impl TakagiFactorization {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let u = self.u.as_dmatrix();
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.sigma.len(),
            self.sigma.iter().map(|&s| C64::new(s, 0.0)),
        ));
        ComplexMatrix::trusted(u * d * u.transpose())
    }
}

/// `C = V · diag(lambda) · Vᴴ`, eigenvalues descending.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianEvd {
    pub vectors: ComplexMatrix,
    pub values: Vec<f64>,
}

impl HermitianEvd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let v = self.vectors.as_dmatrix();
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&s| C64::new(s, 0.0)),
        ));
        ComplexMatrix::trusted(v * d * v.adjoint())
    }
}

/// Takagi factorization of a complex symmetric matrix.
///
/// Computed from the SVD `C = P Σ Qᴴ` of the symmetrized input: the matrix
/// `Z = Pᴴ conj(Q)` is unitary and symmetric within each block of equal
/// singular values, and `U = P · Z^{1/2}` with a primary square root of Z.
/// Under repeated singular values U is not unique; any valid one is returned.
pub fn takagi(c: &ComplexMatrix) -> Result<TakagiFactorization> {
    c.ensure_square()?;
    let dev = c.symmetry_deviation();
    if dev > tol::SYM {
        return Err(NujdError::NotSymmetric { deviation: dev });
    }
    let m = c.as_dmatrix();
    let sym = (m + m.transpose()) * C64::new(0.5, 0.0);
    let Svd { u: p, s, v: q } = svd(&sym);
    let z = p.adjoint() * q.conjugate();
    let root = unitary_sqrt(&z).ok_or(NujdError::NoConvergence("Schur decomposition"))?;
    let u = p * root;
    Ok(TakagiFactorization {
        u: ComplexMatrix::trusted(u),
        sigma: s,
    })
}

/// Complex Schur form `M = Q T Qᴴ`, `None` if the QR iteration stalls.
/// A stalled iteration (typical for near-scalar matrices) is retried on
/// `M − μI` with μ the mean eigenvalue.
pub(crate) fn schur(m: &DMatrix<C64>) -> Option<(DMatrix<C64>, DMatrix<C64>)> {
    let n = m.nrows();
    let iters = 1000 * n.max(1);
    if let Some(s) = m.clone().try_schur(f64::EPSILON, iters) {
        return Some(s.unpack());
    }
    let mu = m.trace() / C64::new(n as f64, 0.0);
    let shifted = m - DMatrix::<C64>::identity(n, n) * mu;
    let (q, mut t) = shifted.try_schur(f64::EPSILON, iters)?.unpack();
    for i in 0..n {
        t[(i, i)] += mu;
    }
    Some((q, t))
}

/// Primary square root of a unitary matrix. The branch cut is placed in the
/// widest gap between eigenphases, so clustered eigenvalues share a branch
/// and the root is a polynomial in `z`.
fn unitary_sqrt(z: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    let n = z.nrows();
    if n == 0 {
        return Some(z.clone());
    }
    let (q, t) = schur(z)?;
    let phases: Vec<f64> = (0..n).map(|i| t[(i, i)].arg()).collect();
    let cut = widest_gap_midpoint(&phases);
    let roots: Vec<C64> = phases
        .iter()
        .map(|&p| {
            // map p into (cut − 2π, cut]
            let mut a = p;
            while a > cut {
                a -= 2.0 * PI;
            }
            while a <= cut - 2.0 * PI {
                a += 2.0 * PI;
            }
            C64::from_polar(1.0, a / 2.0)
        })
        .collect();
    let d = DMatrix::from_diagonal(&DVector::from_vec(roots));
    Some(&q * d * q.adjoint())
}

fn widest_gap_midpoint(phases: &[f64]) -> f64 {
    let mut p: Vec<f64> = phases.to_vec();
    p.sort_by(|a, b| a.total_cmp(b));
    let mut best = (p[0] + 2.0 * PI - p[p.len() - 1], p[p.len() - 1]);
    for w in p.windows(2) {
        let gap = w[1] - w[0];
        if gap > best.0 {
            best = (gap, w[0]);
        }
    }
    best.1 + best.0 / 2.0
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
pub fn hermitian_evd(c: &ComplexMatrix) -> Result<HermitianEvd> {
    let n = c.ensure_square()?;
    let dev = c.hermitian_deviation();
    if dev > tol::SYM {
        return Err(NujdError::NotHermitian { deviation: dev });
    }
    let m = c.as_dmatrix();
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    Ok(HermitianEvd {
        vectors: ComplexMatrix::trusted(vectors),
        values,
    })
}

/// Orders eigenvalues by descending magnitude, then real part, then imaginary part.
pub(crate) fn eigen_order(a: &C64, b: &C64) -> std::cmp::Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

/// Eigendecomposition `C·W = W·diag(λ)` of a general complex matrix.
///
/// Eigenvectors come from back-substitution on the complex Schur form and are
/// normalized to unit length with the largest entry real positive. A
/// defective (or numerically near-defective) matrix is reported through the
/// condition number of W.
pub fn general_evd(c: &ComplexMatrix) -> Result<(GlElement, Vec<C64>)> {
    let n = c.ensure_square()?;
    let (q, t) = schur(c.as_dmatrix()).ok_or(NujdError::NoConvergence("Schur decomposition"))?;
    let scale = t.norm().max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;
    let mut y = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let lam = t[(k, k)];
        y[(k, k)] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut den = t[(i, i)] - lam;
            if den.norm() < small {
                den = C64::new(small, 0.0);
            }
            y[(i, k)] = -acc / den;
        }
    }
    let mut w = q * y;
    for k in 0..n {
        normalize_column(&mut w, k);
    }
    let lambda: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen_order(&lambda[a], &lambda[b]));
    let w = DMatrix::from_fn(n, n, |i, j| w[(i, order[j])]);
    let lambda = order.iter().map(|&k| lambda[k]).collect();
    let wm = ComplexMatrix::from_dmatrix(w)?;
    let condition = condition_number(&wm);
    if !(condition <= tol::KAPPA_MAX) {
        return Err(NujdError::Defective { condition });
    }
    Ok((GlElement::new(wm)?, lambda))
}

/// Eigendecomposition that tolerates repeated eigenvalues. Eigenvalues within
/// `rel_tol`·max|λ| of each other form a cluster whose eigenvectors span the
/// numerical null space of `C − μI` (μ the cluster mean).
pub fn clustered_evd(c: &ComplexMatrix, rel_tol: f64) -> Result<(GlElement, Vec<C64>)> {
    let n = c.ensure_square()?;
    let (_, t) = schur(c.as_dmatrix()).ok_or(NujdError::NoConvergence("Schur decomposition"))?;
    let mut mu: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();
    mu.sort_by(eigen_order);
    let scale = mu.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut assigned = vec![false; n];
    let mut columns: Vec<DVector<C64>> = Vec::with_capacity(n);
    let mut lambda = Vec::with_capacity(n);
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let members: Vec<usize> = (i..n)
            .filter(|&j| !assigned[j] && (mu[j] - mu[i]).norm() <= rel_tol * scale)
            .collect();
        let centre = members.iter().map(|&j| mu[j]).sum::<C64>() / members.len() as f64;
        let shifted = c.as_dmatrix() - DMatrix::<C64>::identity(n, n) * centre;
        let dec = svd(&shifted);
        for (r, &j) in members.iter().enumerate() {
            assigned[j] = true;
            columns.push(dec.v.column(n - members.len() + r).into_owned());
            lambda.push(centre);
        }
    }
    let mut w = DMatrix::from_columns(&columns);
    for k in 0..n {
        normalize_column(&mut w, k);
    }
    let wm = ComplexMatrix::from_dmatrix(w)?;
    let condition = condition_number(&wm);
    if !(condition <= tol::KAPPA_MAX) {
        return Err(NujdError::Defective { condition });
    }
    Ok((GlElement::new(wm)?, lambda))
}

fn normalize_column(w: &mut DMatrix<C64>, k: usize) {
    let n = w.nrows();
    let norm = (0..n).map(|i| w[(i, k)].norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let big = (0..n)
        .max_by(|&a, &b| w[(a, k)].norm().total_cmp(&w[(b, k)].norm()))
        .unwrap_or(0);
    let phase = w[(big, k)] / w[(big, k)].norm();
    let f = phase.conj() / norm;
    for i in 0..n {
        w[(i, k)] *= f;
    }
}

/// diag(1/√σ_k) for positive σ; fails when some σ_k ≤ `tol::SIGMA_MIN`·max σ.
pub fn principal_inv_sqrt_diag(sigma: &[f64]) -> Result<ComplexMatrix> {
    let max = sigma.iter().copied().fold(0.0, f64::max);
    for (index, &s) in sigma.iter().enumerate() {
        if !(s > tol::SIGMA_MIN * max) || max == 0.0 {
            return Err(NujdError::SingularPseudoCovariance {
                index,
                ratio: if max > 0.0 { s / max } else { 0.0 },
            });
        }
    }
    let d: Vec<C64> = sigma.iter().map(|&s| C64::new(1.0 / s.sqrt(), 0.0)).collect();
    Ok(ComplexMatrix::from_diagonal(&d))
}

/// Principal square root (eigenvalue branch arg ∈ (−π/2, π/2]) computed on
/// the Schur form. Returns `None` when no primary root exists, i.e. two
/// eigenvalues sit on opposite sides of the negative real axis cut.
pub(crate) fn principal_sqrt(m: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    let n = m.nrows();
    let (q, t) = schur(m)?;
    let mut r = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = t[(i, i)].sqrt();
    }
    let scale = t.norm().sqrt().max(f64::MIN_POSITIVE);
    for d in 1..n {
        for i in 0..(n - d) {
            let j = i + d;
            let mut acc = t[(i, j)];
            for k in (i + 1)..j {
                acc -= r[(i, k)] * r[(k, j)];
            }
            let den = r[(i, i)] + r[(j, j)];
            if den.norm() <= 1e3 * f64::EPSILON * scale {
                if acc.norm() <= 1e3 * f64::EPSILON * scale {
                    continue;
                }
                return None;
            }
            r[(i, j)] = acc / den;
        }
    }
    Some(&q * r * q.adjoint())
}

/// Symmetric orthogonalization `V = W (WᵀW)^{−1/2}`, so that `VᵀV = I`
/// and V spans the same columns as W.
pub fn symmetric_orthogonalize(w: &GlElement) -> Result<ComplexMatrix> {
    let wm = w.matrix().as_dmatrix();
    let n = wm.nrows();
    let g = wm.transpose() * wm;
    let s = singular_values(&g);
    let ratio = match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    };
    if !(ratio > tol::SIGMA_MIN) {
        return Err(NujdError::OrthogonalizationFailure { ratio });
    }
    let root = principal_sqrt(&g).ok_or(NujdError::OrthogonalizationFailure { ratio })?;
    // V = W · root⁻¹  ⇔  rootᵀ · Vᵀ = Wᵀ
    let vt = root
        .transpose()
        .lu()
        .solve(&wm.transpose())
        .ok_or(NujdError::OrthogonalizationFailure { ratio })?;
    let v = vt.transpose();
    let defect = (v.transpose() * &v - DMatrix::<C64>::identity(n, n)).norm();
    if !(defect <= 1e-8 * n as f64) {
        return Err(NujdError::OrthogonalizationFailure { ratio });
    }
    ComplexMatrix::from_dmatrix(v)
}

//! Algebraic joint diagonalizers for two matrices.

use nalgebra::DMatrix;
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::error::{NujdError, Result};
use crate::io::{ComplexList, MatrixEntries};
use crate::linalg::{self, TakagiFactorization};
use crate::matrix::{
    congruence_raw, offdiag_residual, ComplexMatrix, CongruenceKind, GlElement, TaggedMatrix, TaggedMatrixSet, C64,
};
use crate::tol;
use crate::uniqueness::{self, CertifyOptions, UniquenessReport};

/// Relative eigenvalue distance treated as a repeated eigenvalue.
const CLUSTER_TOL: f64 = 1e-6;

/// Output of [`put`] and [`sut`].
#[derive(Clone, Debug, PartialEq)]
pub struct PutResult {
    /// Demixing matrix with `Xᴴ C₂ conj(X) = I` and `Xᴴ C₁ X` diagonal.
    pub x: GlElement,
    /// Diagonal of `Xᴴ C₁ X`.
    pub lambda: Vec<C64>,
    /// Takagi factorization of the transpose-kind input.
    pub takagi: TakagiFactorization,
    /// Smallest relative gap between eigenvalue magnitudes of the reduced
    /// problem; small values mean X is not determined up to 𝒢(m).
    pub eig_gap: f64,
    /// Non-fatal conditions met along the way.
    pub warnings: Vec<NujdError>,
}

/// Postcondition defects of a [`PutResult`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PutDefects {
    /// ‖Xᴴ C₂ conj(X) − I‖_F
    pub pseudo: f64,
    /// ‖offdiag(Xᴴ C₁ X)‖_F / ‖C₁‖_F
    pub hermitian: f64,
}

impl PutDefects {
    /// Both postconditions within `1e-8·m` and `1e-8` respectively.
    pub fn within_tolerance(&self, m: usize) -> bool {
        self.pseudo <= 1e-8 * m as f64 && self.hermitian <= 1e-8
    }
}

impl PutResult {
    pub fn defects(&self, c1: &TaggedMatrix, c2: &TaggedMatrix) -> PutDefects {
        let x = self.x.matrix().as_dmatrix();
        let m = x.nrows();
        let p = x.adjoint() * c2.matrix().as_dmatrix() * x.conjugate();
        let pseudo = (p - DMatrix::<C64>::identity(m, m)).norm();
        let h = ComplexMatrix::trusted(x.adjoint() * c1.matrix().as_dmatrix() * x);
        let scale = c1.matrix().frobenius();
        let hermitian = if scale == 0.0 { 0.0 } else { h.offdiag_norm() / scale };
        PutDefects { pseudo, hermitian }
    }
}

impl Serialize for PutResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("PutResult", 5)?;
        st.serialize_field("x", &MatrixEntries(self.x.matrix()))?;
        st.serialize_field("lambda", &ComplexList(&self.lambda))?;
        st.serialize_field("takagi", &self.takagi)?;
        st.serialize_field("eig_gap", &self.eig_gap)?;
        let warnings: Vec<String> = self.warnings.iter().map(|w| w.to_string()).collect();
        st.serialize_field("warnings", &warnings)?;
        st.end()
    }
}

fn require_pair(herm: &TaggedMatrix, sym: &TaggedMatrix) -> Result<usize> {
    if herm.kind() != CongruenceKind::Hermitian || sym.kind() != CongruenceKind::Transpose {
        return Err(NujdError::InvalidArgument(
            "expected one Hermitian-kind and one transpose-kind matrix".into(),
        ));
    }
    if herm.dim() != sym.dim() {
        return Err(NujdError::DimensionMismatch {
            expected: herm.dim(),
            found: sym.dim(),
        });
    }
    Ok(herm.dim())
}

/// Smallest pairwise relative gap between magnitudes.
fn magnitude_gap(values: &[C64]) -> f64 {
    let mut gap: f64 = 1.0;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            let (x, y) = (a.norm(), b.norm());
            let top = x.max(y);
            gap = gap.min(if top == 0.0 { 0.0 } else { (x - y).abs() / top });
        }
    }
    gap
}

/// Flips column signs of X so that the largest entry of each row of Xᴴ has
/// positive real part. Sign flips preserve both PUT postconditions.
fn fix_signs(x: &mut DMatrix<C64>) {
    for j in 0..x.ncols() {
        let big = (0..x.nrows())
            .max_by(|&a, &b| x[(a, j)].norm().total_cmp(&x[(b, j)].norm()))
            .unwrap_or(0);
        if x[(big, j)].re < 0.0 {
            x.column_mut(j).neg_mut();
        }
    }
}

fn diag_of_congruence(x: &DMatrix<C64>, c: &ComplexMatrix) -> Vec<C64> {
    let h = x.adjoint() * c.as_dmatrix() * x;
    (0..h.nrows()).map(|i| h[(i, i)]).collect()
}

fn degenerate_warning(gap: f64) -> Vec<NujdError> {
    if gap < tol::DEGENERATE_GAP {
        log::warn!("eigenvalue gap {gap:.3e}: diagonalizer not essentially unique");
        vec![NujdError::DegenerateSpectrum { gap }]
    } else {
        Vec::new()
    }
}

/// Pseudo-uncorrelating transform of a Hermitian-kind `c1` and a
/// transpose-kind `c2`.
///
/// Whitens `c2` through its Takagi factorization, diagonalizes the reduced
/// matrix `C̃₁C̃₁ᵀ`, and orthogonalizes the eigenvectors with respect to the
/// bilinear form so that the whitening of `c2` is kept.
pub fn put(c1: &TaggedMatrix, c2: &TaggedMatrix) -> Result<PutResult> {
    let m = require_pair(c1, c2)?;
    let tk = linalg::takagi(c2.matrix())?;
    let inv_root = linalg::principal_inv_sqrt_diag(&tk.sigma)?;
    // Y = Σ^{-1/2} Uᴴ
    let y = inv_root.as_dmatrix() * tk.u.as_dmatrix().adjoint();
    let ct = &y * c1.matrix().as_dmatrix() * y.adjoint();
    let ct = (&ct + ct.adjoint()) * C64::new(0.5, 0.0);
    let reduced = ComplexMatrix::from_dmatrix(&ct * ct.transpose())?;
    let (w, mu) = linalg::general_evd(&reduced)?;
    let mut w = w.into_matrix().into_dmatrix();
    for k in 0..m {
        let g: C64 = w.column(k).iter().map(|z| z * z).sum();
        if g.norm() > 0.0 {
            let phase = C64::from_polar(1.0, -g.arg() / 2.0);
            for i in 0..m {
                w[(i, k)] *= phase;
            }
        }
    }
    let v = linalg::symmetric_orthogonalize(&GlElement::new(ComplexMatrix::trusted(w))?)?;
    let mut x = y.adjoint() * v.as_dmatrix().conjugate();
    fix_signs(&mut x);
    let lambda = diag_of_congruence(&x, c1.matrix());
    let eig_gap = magnitude_gap(&mu);
    Ok(PutResult {
        x: GlElement::new(ComplexMatrix::from_dmatrix(x)?)?,
        lambda,
        takagi: tk,
        eig_gap,
        warnings: degenerate_warning(eig_gap),
    })
}

/// Strong uncorrelating transform for a positive-definite Hermitian-kind
/// matrix (covariance) and a transpose-kind one (pseudo-covariance).
///
/// Whitens the covariance, then Takagi-factorizes the whitened
/// pseudo-covariance `P̃ = QKQᵀ`; K holds the circularity coefficients. The
/// returned X satisfies the same postconditions as [`put`], with
/// `lambda = 1/K` ordered like `put` orders its output.
pub fn sut(c_herm: &TaggedMatrix, c_sym: &TaggedMatrix) -> Result<PutResult> {
    let m = require_pair(c_herm, c_sym)?;
    let evd = linalg::hermitian_evd(c_herm.matrix())?;
    let top = evd.values.first().copied().unwrap_or(0.0);
    let low = evd.values.last().copied().unwrap_or(0.0);
    if !(top > 0.0 && low > tol::SIGMA_MIN * top) {
        return Err(NujdError::NotPositiveDefinite { min_eigenvalue: low });
    }
    let e = evd.vectors.as_dmatrix();
    let d = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            C64::new(1.0 / evd.values[i].sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let whiten = e * d * e.adjoint();
    let p = &whiten * c_sym.matrix().as_dmatrix() * whiten.conjugate();
    let p = (&p + p.transpose()) * C64::new(0.5, 0.0);
    let inner = linalg::takagi(&ComplexMatrix::trusted(p))?;
    // validates K against the singular floor
    linalg::principal_inv_sqrt_diag(&inner.sigma)?;
    // ascending K ⇔ descending lambda = 1/K
    let order: Vec<usize> = (0..m).rev().collect();
    let q = inner.u.as_dmatrix();
    let mut x = DMatrix::from_fn(m, m, |i, j| {
        let k = order[j];
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..m {
            acc += whiten[(i, r)] * q[(r, k)];
        }
        acc / inner.sigma[k].sqrt()
    });
    fix_signs(&mut x);
    let lambda = diag_of_congruence(&x, c_herm.matrix());
    let squares: Vec<C64> = order.iter().map(|&k| C64::new(inner.sigma[k].powi(-2), 0.0)).collect();
    let eig_gap = magnitude_gap(&squares);
    Ok(PutResult {
        x: GlElement::new(ComplexMatrix::from_dmatrix(x)?)?,
        lambda,
        takagi: linalg::takagi(c_sym.matrix())?,
        eig_gap,
        warnings: degenerate_warning(eig_gap),
    })
}

/// Joint diagonalizer of two same-kind matrices from the eigenvectors of
/// `C₁C₂⁻¹`. Rows of Xᴴ have unit norm with their largest entry real
/// positive.
pub fn two_matrix_same_kind(c1: &TaggedMatrix, c2: &TaggedMatrix) -> Result<GlElement> {
    same_kind_diagonalizer(c1, c2, true)
}

fn same_kind_diagonalizer(c1: &TaggedMatrix, c2: &TaggedMatrix, require_gap: bool) -> Result<GlElement> {
    if c1.kind() != c2.kind() {
        return Err(NujdError::InvalidArgument(
            "matrices must share a congruence kind".into(),
        ));
    }
    if c1.dim() != c2.dim() {
        return Err(NujdError::DimensionMismatch {
            expected: c1.dim(),
            found: c2.dim(),
        });
    }
    let m = c1.dim();
    let condition = linalg::condition_number(c2.matrix());
    let c2_inv = if condition <= tol::KAPPA_MAX {
        c2.matrix().as_dmatrix().clone().try_inverse()
    } else {
        None
    };
    let c2_inv = c2_inv.ok_or(NujdError::SingularSecondMatrix { condition })?;
    let prod = ComplexMatrix::from_dmatrix(c1.matrix().as_dmatrix() * c2_inv)?;
    let (w, mu) = if require_gap {
        linalg::general_evd(&prod)?
    } else {
        linalg::clustered_evd(&prod, CLUSTER_TOL)?
    };
    let mut gap: f64 = 1.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let top = mu[i].norm().max(mu[j].norm());
            gap = gap.min(if top == 0.0 { 0.0 } else { (mu[i] - mu[j]).norm() / top });
        }
    }
    if require_gap && !(gap > tol::GEVD_GAP) {
        return Err(NujdError::DegenerateSpectrum { gap });
    }
    let w_inv = w
        .matrix()
        .as_dmatrix()
        .clone()
        .try_inverse()
        .ok_or(NujdError::Singular {
            condition: w.condition(),
        })?;
    let mut x = w_inv.adjoint();
    for j in 0..m {
        let norm = x.column(j).norm();
        let big = (0..m)
            .max_by(|&a, &b| x[(a, j)].norm().total_cmp(&x[(b, j)].norm()))
            .unwrap_or(0);
        let phase = x[(big, j)] / x[(big, j)].norm();
        let f = phase.conj() / norm;
        for i in 0..m {
            x[(i, j)] *= f;
        }
    }
    GlElement::new(ComplexMatrix::from_dmatrix(x)?)
}

/// Some joint diagonalizer of an exactly jointly diagonalizable set, found
/// algebraically from one Hermitian/transpose pair (PUT) or from two
/// same-kind matrices. Unlike the solvers above it accepts repeated
/// eigenvalues, so it also reduces sets whose diagonalizer is not unique.
/// Fails when the result leaves an off-diagonal residual above `tol`.
pub fn reducing_transform(set: &TaggedMatrixSet, tol: f64) -> Result<GlElement> {
    let herm: Vec<&TaggedMatrix> = set.of_kind(CongruenceKind::Hermitian).collect();
    let sym: Vec<&TaggedMatrix> = set.of_kind(CongruenceKind::Transpose).collect();
    let x = match (herm.as_slice(), sym.as_slice()) {
        ([h, ..], [s, ..]) => put(h, s)?.x,
        ([a, b, ..], []) | ([], [a, b, ..]) => same_kind_diagonalizer(a, b, false)?,
        _ => {
            return Err(NujdError::InvalidPrecondition(
                "reduction needs at least two matrices".into(),
            ))
        }
    };
    let x = GlElement::new(ComplexMatrix::from_dmatrix(refine_blocks(
        set.items(),
        x.into_matrix().into_dmatrix(),
        tol,
    )?)?)?;
    let residual = offdiag_residual(set, &x)?;
    if !(residual <= tol) {
        return Err(NujdError::InvalidPrecondition(format!(
            "set is not exactly jointly diagonalizable (residual {residual:.3e} after reduction)"
        )));
    }
    Ok(x)
}

/// Index groups coupled by off-diagonal entries above `tol` (relative).
fn coupled_groups(reduced: &[(CongruenceKind, ComplexMatrix)], tol: f64) -> Vec<Vec<usize>> {
    let m = reduced.first().map_or(0, |(_, r)| r.rows());
    let mut root: Vec<usize> = (0..m).collect();
    fn find(root: &mut [usize], mut i: usize) -> usize {
        while root[i] != i {
            root[i] = root[root[i]];
            i = root[i];
        }
        i
    }
    for (_, r) in reduced {
        let scale = r.frobenius();
        for i in 0..m {
            for j in (i + 1)..m {
                if r[(i, j)].norm().max(r[(j, i)].norm()) > tol * scale {
                    let (a, b) = (find(&mut root, i), find(&mut root, j));
                    root[a] = b;
                }
            }
        }
    }
    (0..m)
        .map(|rep| (0..m).filter(|&i| find(&mut root, i) == rep).collect::<Vec<_>>())
        .filter(|g| g.len() > 1)
        .collect()
}

fn hermitian_part(b: &DMatrix<C64>) -> Result<ComplexMatrix> {
    ComplexMatrix::from_dmatrix((b + b.adjoint()) * C64::new(0.5, 0.0))
}

fn symmetric_part(b: &DMatrix<C64>) -> Result<ComplexMatrix> {
    ComplexMatrix::from_dmatrix((b + b.transpose()) * C64::new(0.5, 0.0))
}

fn relative_offdiag(b: &DMatrix<C64>) -> f64 {
    let n = b.norm();
    if n == 0.0 {
        return 0.0;
    }
    ComplexMatrix::trusted(b.clone()).offdiag_norm() / n
}

/// Congruence for a block holding a Hermitian part `h` and a nonsingular
/// transpose part `t` whose diagonal forms have equal ratios: whitens `t`
/// by Takagi, then applies the inverse square root of the normalized
/// Hermitian block, which keeps the whitened `t` at identity.
fn mixed_block_transform(h: &DMatrix<C64>, t: &DMatrix<C64>) -> Result<Option<DMatrix<C64>>> {
    let tk = linalg::takagi(&symmetric_part(t)?)?;
    let top = tk.sigma.first().copied().unwrap_or(0.0);
    if tk.sigma.iter().any(|&s| !(s > tol::SIGMA_MIN * top)) {
        return Ok(None);
    }
    let inv_root = linalg::principal_inv_sqrt_diag(&tk.sigma)?;
    let z1 = tk.u.as_dmatrix() * inv_root.as_dmatrix();
    let b = z1.adjoint() * h * &z1;
    let evd = linalg::hermitian_evd(&hermitian_part(&b)?)?;
    if evd.values.iter().any(|&l| !(l > 0.0)) {
        return Ok(None);
    }
    let log_mean = evd.values.iter().map(|l| l.ln()).sum::<f64>() / evd.values.len() as f64;
    let v = evd.vectors.as_dmatrix();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        evd.values.len(),
        evd.values
            .iter()
            .map(|&l| C64::new((-0.5 * (l.ln() - log_mean)).exp(), 0.0)),
    ));
    Ok(Some(z1 * (v * d * v.adjoint())))
}

/// Block factor that diagonalizes every member of a coupled group, if one
/// of the available constructions applies.
fn group_transform(blocks: &[(CongruenceKind, DMatrix<C64>)]) -> Result<Option<DMatrix<C64>>> {
    let dominant = |kind: CongruenceKind| {
        blocks
            .iter()
            .filter(|(k, _)| *k == kind)
            .map(|(_, b)| b)
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
    };
    if let (Some(h), Some(t)) = (dominant(CongruenceKind::Hermitian), dominant(CongruenceKind::Transpose)) {
        if h.norm() > 0.0 && t.norm() > 0.0 {
            if let Some(z) = mixed_block_transform(h, t)? {
                return Ok(Some(z));
            }
        }
    }
    let Some((kind, b)) = blocks
        .iter()
        .max_by(|a, b| relative_offdiag(&a.1).total_cmp(&relative_offdiag(&b.1)))
    else {
        return Ok(None);
    };
    let u = match kind {
        CongruenceKind::Hermitian => linalg::hermitian_evd(&hermitian_part(b)?)?.vectors,
        CongruenceKind::Transpose => linalg::takagi(&symmetric_part(b)?)?.u,
    };
    Ok(Some(u.into_dmatrix()))
}

/// Diagonalizes the blocks that a non-unique transform leaves coupled.
/// Within such a block the reduced matrices have proportional diagonal
/// forms, so a factor built from the dominant members clears all of them.
fn refine_blocks(items: &[TaggedMatrix], mut x: DMatrix<C64>, tol: f64) -> Result<DMatrix<C64>> {
    const ROUNDS: usize = 4;
    for _ in 0..ROUNDS {
        let xm = ComplexMatrix::trusted(x.clone());
        let reduced = items
            .iter()
            .map(|c| congruence_raw(&xm, c).map(|r| (c.kind(), r)))
            .collect::<Result<Vec<_>>>()?;
        let groups = coupled_groups(&reduced, tol);
        if groups.is_empty() {
            break;
        }
        for idx in groups {
            let n = idx.len();
            let blocks: Vec<(CongruenceKind, DMatrix<C64>)> = reduced
                .iter()
                .map(|(kind, r)| (*kind, DMatrix::from_fn(n, n, |a, b| r[(idx[a], idx[b])])))
                .collect();
            let Some(z) = group_transform(&blocks)? else {
                continue;
            };
            let cols = DMatrix::from_fn(x.nrows(), n, |i, b| x[(i, idx[b])]);
            let mixed = cols * z;
            for (b, &j) in idx.iter().enumerate() {
                x.set_column(j, &mixed.column(b));
            }
        }
    }
    Ok(x)
}

/// Sufficient identifiability test for PUT-based separation from diagonal
/// source statistics: a lagged autocorrelation `auto` (complex diagonal) and
/// a pseudo-covariance `pseudo`. Unique when the modulus-product condition
/// holds for every pair using the real parts of `auto`, or for every pair
/// using the imaginary parts. A negative verdict carries the witness for
/// the real-part problem.
pub fn put_identifiability_check(
    auto: &ComplexMatrix,
    pseudo: &ComplexMatrix,
    opts: CertifyOptions,
) -> Result<UniquenessReport> {
    let m = auto.ensure_square()?;
    if pseudo.ensure_square()? != m {
        return Err(NujdError::DimensionMismatch {
            expected: m,
            found: pseudo.rows(),
        });
    }
    for (name, mat) in [("autocorrelation", auto), ("pseudo-covariance", pseudo)] {
        let dev = mat.diagonality_deviation();
        if dev > tol::SYM {
            return Err(NujdError::InvalidPrecondition(format!(
                "{name} is not diagonal (relative off-diagonal mass {dev:.3e})"
            )));
        }
    }
    let d = auto.diagonal_entries();
    let p = pseudo.diagonal_entries();
    let re: Vec<f64> = d.iter().map(|z| z.re).collect();
    let im: Vec<f64> = d.iter().map(|z| z.im).collect();
    let by_re = uniqueness::unique_thm2(&p, &re, opts)?;
    if by_re.is_unique() {
        return Ok(by_re);
    }
    let by_im = uniqueness::unique_thm2(&p, &im, opts)?;
    if by_im.is_unique() {
        return Ok(by_im);
    }
    Ok(by_re)
}

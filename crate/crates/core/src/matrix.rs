//! Shared domain types: dense complex matrices, congruence-tagged matrix
//! sets, diagonal spectra, and the permutation-scaling group.
//!
//! All types are immutable after construction. Validation happens in the
//! constructors so downstream code can rely on the invariants.

use std::ops::Deref;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NujdError, Result};
use crate::linalg;
use crate::tol;

pub type C64 = Complex64;

/// Dense complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(NujdError::ShapeMismatch {
                rows,
                cols,
                len: entries.len(),
            });
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, &entries))
    }

    pub fn from_dmatrix(m: DMatrix<C64>) -> Result<Self> {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(NujdError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(ComplexMatrix(m))
    }

    /// Wraps the result of arithmetic on already-validated matrices.
    pub(crate) fn trusted(m: DMatrix<C64>) -> Self {
        debug_assert!(m.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        ComplexMatrix(m)
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn identity(m: usize) -> Self {
        ComplexMatrix(DMatrix::identity(m, m))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        ComplexMatrix::trusted(m)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.0.nrows() == self.0.ncols()
    }

    pub fn ensure_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows())
        } else {
            Err(NujdError::NonSquare {
                rows: self.rows(),
                cols: self.cols(),
            })
        }
    }

    /// Row-major copy of the entries.
    pub fn row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.0.len());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn diagonal_entries(&self) -> Vec<C64> {
        self.0.diagonal().iter().copied().collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        ComplexMatrix(self.0.transpose())
    }

    pub fn conjugate(&self) -> Self {
        ComplexMatrix(self.0.conjugate())
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(NujdError::DimensionMismatch {
                expected: self.cols(),
                found: rhs.rows(),
            });
        }
        Ok(ComplexMatrix(&self.0 * &rhs.0))
    }

    /// Frobenius norm of the off-diagonal part.
    pub fn offdiag_norm(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.cols() {
            for i in 0..self.rows() {
                if i != j {
                    s += self.0[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    }

    /// ‖C − Cᵀ‖_F / ‖C‖_F (zero for the zero matrix).
    pub fn symmetry_deviation(&self) -> f64 {
        relative(&(&self.0 - self.0.transpose()), &self.0)
    }

    /// ‖C − Cᴴ‖_F / ‖C‖_F (zero for the zero matrix).
    pub fn hermitian_deviation(&self) -> f64 {
        relative(&(&self.0 - self.0.adjoint()), &self.0)
    }

    /// Largest relative off-diagonal deviation from a diagonal matrix.
    pub fn diagonality_deviation(&self) -> f64 {
        let n = self.frobenius();
        if n == 0.0 {
            0.0
        } else {
            self.offdiag_norm() / n
        }
    }
}

fn relative(diff: &DMatrix<C64>, base: &DMatrix<C64>) -> f64 {
    let b = base.norm();
    if b == 0.0 {
        0.0
    } else {
        diff.norm() / b
    }
}

impl Deref for ComplexMatrix {
    type Target = DMatrix<C64>;

    fn deref(&self) -> &DMatrix<C64> {
        &self.0
    }
}

/// Which congruence a matrix transforms under: `X^H C X` or `X^H C conj(X)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CongruenceKind {
    Hermitian,
    Transpose,
}

impl CongruenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CongruenceKind::Hermitian => "hermitian",
            CongruenceKind::Transpose => "transpose",
        }
    }
}

/// A square matrix together with its congruence kind. Transpose-kind
/// matrices are complex symmetric, Hermitian-kind matrices are Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggedMatrix {
    matrix: ComplexMatrix,
    kind: CongruenceKind,
}

impl TaggedMatrix {
    /// Validates the symmetry class within `tol::SYM`.
    pub fn new(matrix: ComplexMatrix, kind: CongruenceKind) -> Result<Self> {
        Self::with_tolerance(matrix, kind, tol::SYM)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, kind: CongruenceKind, tau: f64) -> Result<Self> {
        matrix.ensure_square()?;
        match kind {
            CongruenceKind::Transpose => {
                let d = matrix.symmetry_deviation();
                if d > tau {
                    return Err(NujdError::NotSymmetric { deviation: d });
                }
            }
            CongruenceKind::Hermitian => {
                let d = matrix.hermitian_deviation();
                if d > tau {
                    return Err(NujdError::NotHermitian { deviation: d });
                }
            }
        }
        Ok(TaggedMatrix { matrix, kind })
    }

    /// Projects onto the symmetry class of `kind` before tagging.
    pub fn symmetrized(matrix: &ComplexMatrix, kind: CongruenceKind) -> Result<Self> {
        matrix.ensure_square()?;
        let m = matrix.as_dmatrix();
        let sym = match kind {
            CongruenceKind::Transpose => (m + m.transpose()) * C64::new(0.5, 0.0),
            CongruenceKind::Hermitian => (m + m.adjoint()) * C64::new(0.5, 0.0),
        };
        Ok(TaggedMatrix {
            matrix: ComplexMatrix::trusted(sym),
            kind,
        })
    }

    pub(crate) fn trusted(matrix: ComplexMatrix, kind: CongruenceKind) -> Self {
        TaggedMatrix { matrix, kind }
    }

    pub fn hermitian(matrix: ComplexMatrix) -> Result<Self> {
        Self::new(matrix, CongruenceKind::Hermitian)
    }

    pub fn transpose(matrix: ComplexMatrix) -> Result<Self> {
        Self::new(matrix, CongruenceKind::Transpose)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> CongruenceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }
}

/// A non-empty set of tagged m×m matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggedMatrixSet {
    dim: usize,
    items: Vec<TaggedMatrix>,
}

impl TaggedMatrixSet {
    pub fn new(items: Vec<TaggedMatrix>) -> Result<Self> {
        let first = items.first().ok_or(NujdError::Empty("matrix set"))?;
        let dim = first.dim();
        for it in &items {
            if it.dim() != dim {
                return Err(NujdError::DimensionMismatch {
                    expected: dim,
                    found: it.dim(),
                });
            }
        }
        Ok(TaggedMatrixSet { dim, items })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn items(&self) -> &[TaggedMatrix] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn of_kind(&self, kind: CongruenceKind) -> impl Iterator<Item = &TaggedMatrix> {
        self.items.iter().filter(move |t| t.kind() == kind)
    }
}

/// Diagonals of Ω₁…Ωₙ, all of one congruence kind.
///
/// `spectra[i][k]` is the k-th diagonal entry of Ωᵢ; the position vector
/// `z_k` collects `spectra[i][k]` over `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalStack {
    dim: usize,
    kind: CongruenceKind,
    spectra: Vec<Vec<C64>>,
}

impl DiagonalStack {
    pub fn new(kind: CongruenceKind, spectra: Vec<Vec<C64>>) -> Result<Self> {
        let first = spectra.first().ok_or(NujdError::Empty("diagonal stack"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(NujdError::Empty("spectrum"));
        }
        let mut scale = 0.0f64;
        for s in &spectra {
            if s.len() != dim {
                return Err(NujdError::DimensionMismatch {
                    expected: dim,
                    found: s.len(),
                });
            }
            for (k, z) in s.iter().enumerate() {
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(NujdError::NonFinite { row: 0, col: k });
                }
                scale = scale.max(z.norm());
            }
        }
        if scale == 0.0 {
            return Err(NujdError::ZeroStack);
        }
        if kind == CongruenceKind::Hermitian {
            let imag = spectra.iter().flatten().map(|z| z.im.abs()).fold(0.0, f64::max);
            if imag > tol::REAL * scale {
                return Err(NujdError::NonRealSpectrum { imag });
            }
        }
        Ok(DiagonalStack { dim, kind, spectra })
    }

    /// Real spectra for a Hermitian-kind stack.
    pub fn hermitian(spectra: Vec<Vec<f64>>) -> Result<Self> {
        let s = spectra
            .into_iter()
            .map(|v| v.into_iter().map(|x| C64::new(x, 0.0)).collect())
            .collect();
        Self::new(CongruenceKind::Hermitian, s)
    }

    pub fn transpose(spectra: Vec<Vec<C64>>) -> Result<Self> {
        Self::new(CongruenceKind::Transpose, spectra)
    }

    /// Reads the diagonals of already-diagonal tagged matrices of one kind.
    pub fn from_matrices(matrices: &[&TaggedMatrix]) -> Result<Self> {
        let first = matrices.first().ok_or(NujdError::Empty("diagonal stack"))?;
        let kind = first.kind();
        let mut spectra = Vec::with_capacity(matrices.len());
        for t in matrices {
            if t.kind() != kind {
                return Err(NujdError::InvalidArgument("mixed congruence kinds in one stack".into()));
            }
            let mut d = t.matrix().diagonal_entries();
            if kind == CongruenceKind::Hermitian {
                for z in &mut d {
                    z.im = 0.0;
                }
            }
            spectra.push(d);
        }
        Self::new(kind, spectra)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.spectra.len()
    }

    pub fn kind(&self) -> CongruenceKind {
        self.kind
    }

    pub fn spectra(&self) -> &[Vec<C64>] {
        &self.spectra
    }

    /// The vector of k-th diagonal entries across all matrices.
    pub fn position_vector(&self, k: usize) -> Vec<C64> {
        self.spectra.iter().map(|s| s[k]).collect()
    }

    /// The stack as diagonal tagged matrices (the set with A = I).
    pub fn to_matrices(&self) -> Vec<TaggedMatrix> {
        self.spectra
            .iter()
            .map(|s| TaggedMatrix::trusted(ComplexMatrix::from_diagonal(s), self.kind))
            .collect()
    }
}

/// An invertible matrix with condition number at most `tol::KAPPA_MAX`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlElement {
    matrix: ComplexMatrix,
    condition: f64,
}

impl GlElement {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let m = matrix.ensure_square()?;
        let condition = linalg::condition_number(&matrix);
        let sv_ok = condition.is_finite() && 1.0 / condition > m as f64 * f64::EPSILON;
        if !sv_ok || condition > tol::KAPPA_MAX {
            return Err(NujdError::Singular { condition });
        }
        Ok(GlElement { matrix, condition })
    }

    pub fn identity(m: usize) -> Self {
        GlElement {
            matrix: ComplexMatrix::identity(m),
            condition: 1.0,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// 2-norm condition number.
    pub fn condition(&self) -> f64 {
        self.condition
    }
}

/// A member of 𝒢(m): diagonal times permutation, i.e. exactly one
/// dominant entry in every row and column.
#[derive(Clone, Debug, PartialEq)]
pub struct GmElement {
    matrix: ComplexMatrix,
    /// `permutation[j]` is the row holding the dominant entry of column j.
    permutation: Vec<usize>,
}

impl GmElement {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let m = matrix.ensure_square()?;
        let mut permutation = vec![usize::MAX; m];
        let mut row_used = vec![false; m];
        for i in 0..m {
            let row_max = (0..m).map(|j| matrix[(i, j)].norm()).fold(0.0, f64::max);
            if row_max == 0.0 {
                return Err(NujdError::NotScaledPermutation);
            }
            let big: Vec<usize> = (0..m)
                .filter(|&j| matrix[(i, j)].norm() > tol::PATTERN * row_max)
                .collect();
            if big.len() != 1 || permutation[big[0]] != usize::MAX || row_used[i] {
                return Err(NujdError::NotScaledPermutation);
            }
            permutation[big[0]] = i;
            row_used[i] = true;
        }
        Ok(GmElement { matrix, permutation })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }
}

/// Splits C into Hermitian parts (C + Cᴴ)/2 and (C − Cᴴ)/(2i), so that
/// C = H + i·S.
pub fn hermitian_skew_split(c: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = c.ensure_square()?;
    let mut h = DMatrix::zeros(n, n);
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let a = c[(i, j)];
            let b = c[(j, i)].conj();
            let hij = (a + b) * 0.5;
            // (a − b) / (2i) = −i (a − b) / 2
            let d = (a - b) * 0.5;
            let sij = C64::new(d.im, -d.re);
            if i == j {
                h[(i, i)] = C64::new(hij.re, 0.0);
                s[(i, i)] = C64::new(sij.re, 0.0);
            } else {
                h[(i, j)] = hij;
                h[(j, i)] = hij.conj();
                s[(i, j)] = sij;
                s[(j, i)] = sij.conj();
            }
        }
    }
    Ok((ComplexMatrix::trusted(h), ComplexMatrix::trusted(s)))
}

/// `X^H C X` for Hermitian kind, `X^H C conj(X)` for transpose kind.
pub fn apply_congruence(x: &GlElement, c: &TaggedMatrix) -> Result<TaggedMatrix> {
    congruence_raw(x.matrix(), c).map(|m| TaggedMatrix::trusted(m, c.kind()))
}

/// Congruence without the invertibility certificate on `x`.
pub(crate) fn congruence_raw(x: &ComplexMatrix, c: &TaggedMatrix) -> Result<ComplexMatrix> {
    if x.rows() != c.dim() {
        return Err(NujdError::DimensionMismatch {
            expected: c.dim(),
            found: x.rows(),
        });
    }
    let xh = x.as_dmatrix().adjoint();
    let right = match c.kind() {
        CongruenceKind::Hermitian => x.as_dmatrix().clone(),
        CongruenceKind::Transpose => x.as_dmatrix().conjugate(),
    };
    Ok(ComplexMatrix::trusted(xh * c.matrix().as_dmatrix() * right))
}

/// Outcome of an essential-equivalence test.
#[derive(Clone, Debug, PartialEq)]
pub struct Equivalence {
    pub equivalent: bool,
    /// Relative off-pattern mass of the column-normalized E = Y⁻¹X.
    pub distance: f64,
    /// The pattern projection of E (the factor in X ≈ Y·E) when equivalent.
    pub factor: Option<GmElement>,
}

/// Tests whether X = Y·E for some E ∈ 𝒢(m).
///
/// E = Y⁻¹X is formed by an LU solve. Columns of E are normalized to unit
/// length, so the verdict ignores column scaling of X; then the best
/// column-to-row assignment is found and E is accepted when the mass off
/// that pattern is at most `tol`·‖E‖_F and every pattern entry dominates
/// its row and column.
pub fn is_essentially_equivalent(x: &GlElement, y: &GlElement, tol: f64) -> Result<Equivalence> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(NujdError::InvalidArgument(format!("tolerance {tol} outside (0, 1)")));
    }
    if x.dim() != y.dim() {
        return Err(NujdError::DimensionMismatch {
            expected: y.dim(),
            found: x.dim(),
        });
    }
    let e = y
        .matrix()
        .as_dmatrix()
        .clone()
        .lu()
        .solve(x.matrix().as_dmatrix())
        .ok_or(NujdError::Singular {
            condition: f64::INFINITY,
        })?;
    let e = ComplexMatrix::trusted(e);
    let (distance, perm) = pattern_distance(&e);
    let dominant = pattern_dominates(&e, &perm);
    let equivalent = distance <= tol && dominant;
    let factor = if equivalent {
        let m = e.rows();
        let mut p = DMatrix::zeros(m, m);
        for (j, &i) in perm.iter().enumerate() {
            p[(i, j)] = e[(i, j)];
        }
        Some(GmElement {
            matrix: ComplexMatrix::trusted(p),
            permutation: perm,
        })
    } else {
        None
    };
    Ok(Equivalence {
        equivalent,
        distance,
        factor,
    })
}

/// Distance of a matrix from 𝒢(m): after normalizing each column to unit
/// length, the square root of the fraction of Frobenius mass lying off
/// the best permutation pattern. Returns the distance and the pattern
/// (`perm[j]` = row of column j's entry). Zero columns count as fully
/// off-pattern.
pub fn pattern_distance(e: &ComplexMatrix) -> (f64, Vec<usize>) {
    let m = e.rows();
    let mut w = vec![vec![0.0; m]; m];
    for j in 0..m {
        let norm: f64 = (0..m).map(|i| e[(i, j)].norm_sqr()).sum();
        for i in 0..m {
            w[i][j] = if norm > 0.0 { e[(i, j)].norm_sqr() / norm } else { 0.0 };
        }
    }
    let row_of_col = max_weight_assignment(&w);
    let kept: f64 = row_of_col.iter().enumerate().map(|(j, &i)| w[i][j]).sum();
    let frac = ((m as f64 - kept) / m as f64).max(0.0);
    (frac.sqrt(), row_of_col)
}

fn pattern_dominates(e: &ComplexMatrix, perm: &[usize]) -> bool {
    let m = e.rows();
    perm.iter().enumerate().all(|(j, &i)| {
        let p = e[(i, j)].norm();
        p > 0.0 && (0..m).all(|r| r == i || e[(r, j)].norm() < p) && (0..m).all(|c| c == j || e[(i, c)].norm() < p)
    })
}

/// Assignment maximizing Σ w[row][col]; returns `row_of_col`.
/// O(m³) Hungarian method with potentials on the negated weights.
fn max_weight_assignment(w: &[Vec<f64>]) -> Vec<usize> {
    let n = w.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays as in the classical formulation; rows assigned to columns.
    let inf = f64::INFINITY;
    let cost = |i: usize, j: usize| -w[i - 1][j - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| p[j] - 1).collect()
}

/// Normalized joint-diagonality cost
/// √(Σᵢ ‖offdiag(congruence(X, Cᵢ))‖²_F / Σᵢ ‖Cᵢ‖²_F).
pub fn offdiag_residual(set: &TaggedMatrixSet, x: &GlElement) -> Result<f64> {
    offdiag_residual_raw(set.items(), x.matrix())
}

pub(crate) fn offdiag_residual_raw(items: &[TaggedMatrix], x: &ComplexMatrix) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for c in items {
        let t = congruence_raw(x, c)?;
        num += t.offdiag_norm().powi(2);
        den += c.matrix().frobenius().powi(2);
    }
    Ok(if den == 0.0 { 0.0 } else { (num / den).sqrt() })
}

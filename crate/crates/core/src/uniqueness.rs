//! Identifiability certification for non-unitary joint diagonalization.
//!
//! Given the diagonal spectra Ωᵢ of a set Cᵢ = A Ωᵢ A^{†ᵢ}, decides whether
//! the joint diagonalizer is unique up to permutation and scaling. Every
//! negative verdict ships a witness: an explicit joint diagonalizer of the
//! set {Ωᵢ} (A = I) that is not a scaled permutation. Witnesses are checked
//! before they are returned.
//!
//! "Collinear" comparisons use the sine of the complex angle between two
//! position vectors, `√(1 − |c|²)`, computed from the projection residual.
//! A pair counts as collinear when its sine is at most the certification
//! tolerance; this keeps the witness residual on the same scale as the
//! tolerance.

use nalgebra::DMatrix;
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::error::{NujdError, Result};
use crate::linalg;
use crate::matrix::{
    offdiag_residual_raw, pattern_distance, ComplexMatrix, CongruenceKind, DiagonalStack, GlElement, TaggedMatrix, C64,
};
use crate::tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Unique,
    NotUnique,
}

/// Which predicate decided a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Transpose-congruence set, collinearity criterion.
    Thm1a,
    /// Hermitian-congruence set, collinearity criterion.
    Thm1b,
    /// One transpose and one Hermitian matrix, modulus-product criterion.
    Thm2,
    /// Mixed sets with both collinearity measures equal to one.
    Thm3,
    /// Unified test, branch (i): transpose-kind collinearity below one.
    IdentifiabilityI,
    /// Unified test, branch (ii): Hermitian-kind collinearity below one.
    IdentifiabilityII,
    /// Unified test, branch (iii): pairwise mixed conditions.
    IdentifiabilityIII,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Thm1a => "thm1a",
            Rule::Thm1b => "thm1b",
            Rule::Thm2 => "thm2",
            Rule::Thm3 => "thm3",
            Rule::IdentifiabilityI => "identifiability-i",
            Rule::IdentifiabilityII => "identifiability-ii",
            Rule::IdentifiabilityIII => "identifiability-iii",
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            Verdict::Unique => "unique",
            Verdict::NotUnique => "not_unique",
        })
    }
}

impl Serialize for Rule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniquenessReport {
    pub verdict: Verdict,
    pub rho_transpose: Option<f64>,
    pub rho_hermitian: Option<f64>,
    pub violating_pair: Option<(usize, usize)>,
    pub witness: Option<GlElement>,
    pub rule_fired: Rule,
}

impl UniquenessReport {
    fn unique(rule: Rule, rho_t: Option<f64>, rho_h: Option<f64>) -> Self {
        UniquenessReport {
            verdict: Verdict::Unique,
            rho_transpose: rho_t,
            rho_hermitian: rho_h,
            violating_pair: None,
            witness: None,
            rule_fired: rule,
        }
    }

    fn not_unique(
        rule: Rule,
        rho_t: Option<f64>,
        rho_h: Option<f64>,
        pair: (usize, usize),
        witness: GlElement,
    ) -> Self {
        UniquenessReport {
            verdict: Verdict::NotUnique,
            rho_transpose: rho_t,
            rho_hermitian: rho_h,
            violating_pair: Some(pair),
            witness: Some(witness),
            rule_fired: rule,
        }
    }

    pub fn is_unique(&self) -> bool {
        self.verdict == Verdict::Unique
    }
}

impl Serialize for UniquenessReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = if self.witness.is_some() { 6 } else { 5 };
        let mut st = s.serialize_struct("UniquenessReport", n)?;
        st.serialize_field("verdict", &self.verdict)?;
        st.serialize_field("rho_transpose", &self.rho_transpose)?;
        st.serialize_field("rho_hermitian", &self.rho_hermitian)?;
        st.serialize_field("pair", &self.violating_pair.map(|(k, l)| [k, l]))?;
        st.serialize_field("rule", &self.rule_fired)?;
        if let Some(w) = &self.witness {
            st.serialize_field("witness", &crate::io::MatrixEntries(w.matrix()))?;
        }
        st.end()
    }
}

/// Certification tolerance. The default certifies exact (synthetic)
/// spectra; [`CertifyOptions::noisy`] uses the wider margin meant for
/// spectra estimated from data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertifyOptions {
    pub tol: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { tol: tol::RHO }
    }
}

impl CertifyOptions {
    pub fn noisy() -> Self {
        CertifyOptions { tol: tol::NOISY_MARGIN }
    }

    pub fn with_tol(tol: f64) -> Self {
        CertifyOptions { tol }
    }

    fn witness_limit(&self) -> f64 {
        tol::WITNESS_RESIDUAL.max(10.0 * self.tol)
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn inner(v: &[C64], w: &[C64]) -> C64 {
    v.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

/// Cosine of the complex angle, vᴴw / (‖v‖‖w‖), and 1 when either vector is zero.
pub fn complex_cosine(v: &[C64], w: &[C64]) -> Result<C64> {
    if v.len() != w.len() {
        return Err(NujdError::DimensionMismatch {
            expected: v.len(),
            found: w.len(),
        });
    }
    let (nv, nw) = (norm(v), norm(w));
    if nv == 0.0 || nw == 0.0 {
        return Ok(C64::new(1.0, 0.0));
    }
    Ok(inner(v, w) / (nv * nw))
}

/// Sine of the complex angle, √(1 − |c(v, w)|²), from the residual of
/// projecting ŵ onto v̂. Zero when either vector is zero.
pub fn complex_sine(v: &[C64], w: &[C64]) -> f64 {
    let (nv, nw) = (norm(v), norm(w));
    if nv == 0.0 || nw == 0.0 {
        return 0.0;
    }
    let c = inner(v, w) / (nv * nw);
    v.iter()
        .zip(w)
        .map(|(a, b)| (b / nw - c * (a / nv)).norm_sqr())
        .sum::<f64>()
        .sqrt()
        .min(1.0)
}

/// ρ = max over k < l of |c(z_k, z_l)|.
pub fn collinearity(stack: &DiagonalStack) -> Result<f64> {
    let m = stack.dim();
    if m < 2 {
        return Err(NujdError::TooFewSources(m));
    }
    let vecs: Vec<Vec<C64>> = (0..m).map(|k| stack.position_vector(k)).collect();
    let mut rho: f64 = 0.0;
    for k in 0..m {
        for l in (k + 1)..m {
            rho = rho.max(complex_cosine(&vecs[k], &vecs[l])?.norm());
        }
    }
    Ok(rho.min(1.0))
}

/// First pair (k < l, lexicographic) whose position vectors are collinear
/// within `tol`.
pub fn collinear_pair(stack: &DiagonalStack, tol: f64) -> Option<(usize, usize)> {
    let m = stack.dim();
    let vecs: Vec<Vec<C64>> = (0..m).map(|k| stack.position_vector(k)).collect();
    for k in 0..m {
        for l in (k + 1)..m {
            if complex_sine(&vecs[k], &vecs[l]) <= tol {
                return Some((k, l));
            }
        }
    }
    None
}

/// Uniqueness for a single-kind stack: unique iff no pair of position
/// vectors is collinear.
pub fn unique_thm1(stack: &DiagonalStack, opts: CertifyOptions) -> Result<UniquenessReport> {
    let rho = collinearity(stack)?;
    let (rule, rt, rh) = match stack.kind() {
        CongruenceKind::Transpose => (Rule::Thm1a, Some(rho), None),
        CongruenceKind::Hermitian => (Rule::Thm1b, None, Some(rho)),
    };
    match collinear_pair(stack, opts.tol) {
        None => Ok(UniquenessReport::unique(rule, rt, rh)),
        Some(pair) => {
            let w = witness_thm1_checked(stack, pair, opts)?;
            Ok(UniquenessReport::not_unique(rule, rt, rh, pair, w))
        }
    }
}

fn products_equal(p: f64, q: f64, tol: f64) -> bool {
    (p - q).abs() <= tol * p.max(q)
}

fn stacks_from_pair(omega1: &[C64], omega2: &[f64]) -> (Vec<TaggedMatrix>, Option<f64>, Option<f64>) {
    let sym = TaggedMatrix::trusted(ComplexMatrix::from_diagonal(omega1), CongruenceKind::Transpose);
    let herm = TaggedMatrix::trusted(ComplexMatrix::from_real_diagonal(omega2), CongruenceKind::Hermitian);
    let rt = DiagonalStack::transpose(vec![omega1.to_vec()])
        .ok()
        .and_then(|s| collinearity(&s).ok())
        .or(Some(1.0));
    let rh = DiagonalStack::hermitian(vec![omega2.to_vec()])
        .ok()
        .and_then(|s| collinearity(&s).ok())
        .or(Some(1.0));
    (vec![sym, herm], rt, rh)
}

/// Uniqueness for one transpose-kind diagonal `omega1` and one
/// Hermitian-kind real diagonal `omega2`: unique iff
/// |ω₁ₖ||ω₂ₗ| ≠ |ω₁ₗ||ω₂ₖ| for every pair.
pub fn unique_thm2(omega1: &[C64], omega2: &[f64], opts: CertifyOptions) -> Result<UniquenessReport> {
    if omega1.len() != omega2.len() {
        return Err(NujdError::DimensionMismatch {
            expected: omega1.len(),
            found: omega2.len(),
        });
    }
    let m = omega1.len();
    if m < 2 {
        return Err(NujdError::TooFewSources(m));
    }
    let (_, rt, rh) = stacks_from_pair(omega1, omega2);
    for k in 0..m {
        for l in (k + 1)..m {
            let p = omega1[k].norm() * omega2[l].abs();
            let q = omega1[l].norm() * omega2[k].abs();
            if products_equal(p, q, opts.tol) {
                let w = witness_thm2_checked(omega1, omega2, (k, l), opts)?;
                return Ok(UniquenessReport::not_unique(Rule::Thm2, rt, rh, (k, l), w));
            }
        }
    }
    Ok(UniquenessReport::unique(Rule::Thm2, rt, rh))
}

fn check_kinds(sym: Option<&DiagonalStack>, herm: Option<&DiagonalStack>) -> Result<usize> {
    if let Some(s) = sym {
        if s.kind() != CongruenceKind::Transpose {
            return Err(NujdError::InvalidArgument("transpose-kind stack expected".into()));
        }
    }
    if let Some(h) = herm {
        if h.kind() != CongruenceKind::Hermitian {
            return Err(NujdError::InvalidArgument("Hermitian-kind stack expected".into()));
        }
    }
    let m = match (sym, herm) {
        (Some(s), Some(h)) => {
            if s.dim() != h.dim() {
                return Err(NujdError::DimensionMismatch {
                    expected: s.dim(),
                    found: h.dim(),
                });
            }
            s.dim()
        }
        (Some(s), None) => s.dim(),
        (None, Some(h)) => h.dim(),
        (None, None) => return Err(NujdError::Empty("both stacks")),
    };
    if m < 2 {
        return Err(NujdError::TooFewSources(m));
    }
    Ok(m)
}

fn position(stack: Option<&DiagonalStack>, k: usize) -> Vec<C64> {
    stack.map(|s| s.position_vector(k)).unwrap_or_default()
}

/// Both mixed conditions at (k, l): the pair is collinear in each stack and
/// ‖ω_k‖‖ω′_l‖ = ‖ω_l‖‖ω′_k‖. Absent stacks contribute zero vectors.
fn mixed_pair_violates(
    sym: Option<&DiagonalStack>,
    herm: Option<&DiagonalStack>,
    k: usize,
    l: usize,
    tol: f64,
) -> bool {
    let (a, b) = (position(sym, k), position(sym, l));
    let (a2, b2) = (position(herm, k), position(herm, l));
    let collinear = complex_sine(&a, &b) <= tol && complex_sine(&a2, &b2) <= tol;
    collinear && products_equal(norm(&a) * norm(&b2), norm(&b) * norm(&a2), tol)
}

fn first_mixed_violation(
    sym: Option<&DiagonalStack>,
    herm: Option<&DiagonalStack>,
    m: usize,
    tol: f64,
) -> Option<(usize, usize)> {
    (0..m)
        .flat_map(|k| ((k + 1)..m).map(move |l| (k, l)))
        .find(|&(k, l)| mixed_pair_violates(sym, herm, k, l, tol))
}

/// Uniqueness for mixed sets whose transpose-kind and Hermitian-kind stacks
/// both have collinearity one: non-unique iff some pair is collinear in both
/// stacks and ‖ω_k‖‖ω′_l‖ = ‖ω_l‖‖ω′_k‖.
pub fn unique_thm3(sym: &DiagonalStack, herm: &DiagonalStack, opts: CertifyOptions) -> Result<UniquenessReport> {
    let m = check_kinds(Some(sym), Some(herm))?;
    let rt = collinearity(sym)?;
    let rh = collinearity(herm)?;
    if collinear_pair(sym, opts.tol).is_none() || collinear_pair(herm, opts.tol).is_none() {
        return Err(NujdError::InvalidPrecondition(format!(
            "both collinearity measures must equal one (got {rt:.6}, {rh:.6}); use identifiability_master"
        )));
    }
    match first_mixed_violation(Some(sym), Some(herm), m, opts.tol) {
        None => Ok(UniquenessReport::unique(Rule::Thm3, Some(rt), Some(rh))),
        Some(pair) => {
            let w = mixed_witness_checked(Some(sym), Some(herm), pair, opts)?;
            Ok(UniquenessReport::not_unique(Rule::Thm3, Some(rt), Some(rh), pair, w))
        }
    }
}

/// Unified identifiability test over a transpose-kind and a Hermitian-kind
/// stack (either may be absent, which imposes no constraint). Unique iff the
/// transpose stack has no collinear pair, or the Hermitian stack has none,
/// or no pair satisfies both mixed conditions.
pub fn identifiability_master(
    sym: Option<&DiagonalStack>,
    herm: Option<&DiagonalStack>,
    opts: CertifyOptions,
) -> Result<UniquenessReport> {
    let m = check_kinds(sym, herm)?;
    let rt = sym.map(collinearity).transpose()?;
    let rh = herm.map(collinearity).transpose()?;
    let sym_collinear = sym.is_none_or(|s| collinear_pair(s, opts.tol).is_some());
    if !sym_collinear {
        return Ok(UniquenessReport::unique(Rule::IdentifiabilityI, rt, rh));
    }
    let herm_collinear = herm.is_none_or(|h| collinear_pair(h, opts.tol).is_some());
    if !herm_collinear {
        return Ok(UniquenessReport::unique(Rule::IdentifiabilityII, rt, rh));
    }
    match first_mixed_violation(sym, herm, m, opts.tol) {
        None => Ok(UniquenessReport::unique(Rule::IdentifiabilityIII, rt, rh)),
        Some(pair) => {
            let w = mixed_witness_checked(sym, herm, pair, opts)?;
            Ok(UniquenessReport::not_unique(Rule::IdentifiabilityIII, rt, rh, pair, w))
        }
    }
}

/// 2×2 block `[[x1, x2], [x3, x4]]` of a witness.
type Block = [C64; 4];

/// Null vector of the n×2 matrix with columns `a`, `b` (right singular
/// vector of the smallest singular value).
fn null_pair(a: &[C64], b: &[C64]) -> (C64, C64) {
    let rows = a.len().max(2);
    let m = DMatrix::from_fn(rows, 2, |i, j| {
        if i >= a.len() {
            C64::new(0.0, 0.0)
        } else if j == 0 {
            a[i]
        } else {
            b[i]
        }
    });
    let svd = linalg::svd(&m);
    (svd.v[(0, 1)], svd.v[(1, 1)])
}

/// Block with x1·x2 ↦ `p` and x3·x4 ↦ `q` (transpose kind) or
/// conj(x1)·x2 ↦ `p`, conj(x3)·x4 ↦ `q` (Hermitian kind); x1, x3 are real.
/// x1 is doubled when the plain choice would be nearly singular.
fn kernel_block(p: C64, q: C64) -> Block {
    let one = C64::new(1.0, 0.0);
    let scale = p.norm().max(q.norm());
    if (p - q).norm() < 0.25 * scale {
        [C64::new(2.0, 0.0), p / 2.0, one, q]
    } else {
        [one, p, one, q]
    }
}

/// Witness block for a single-kind pair of position vectors.
fn single_kind_block(kind: CongruenceKind, a: &[C64], b: &[C64]) -> Block {
    let (y1, y2) = null_pair(a, b);
    match kind {
        // conj(x1 x2)·a + conj(x3 x4)·b = 0
        CongruenceKind::Transpose => kernel_block(y1.conj(), y2.conj()),
        // conj(x1) x2·a + conj(x3) x4·b = 0
        CongruenceKind::Hermitian => kernel_block(y1, y2),
    }
}

/// Witness block for a mixed pair with b = z·a and b′ = z′·a′, |z| = |z′|,
/// a ≠ 0 and a′ ≠ 0:
/// X = [[s, −e^{iγ} conj(z)/s], [e^{iγ}, 1]] with e^{2iγ} conj(z) = z′.
fn mixed_block(a: &[C64], b: &[C64], a2: &[C64], b2: &[C64]) -> Block {
    let z = inner(a, b) / inner(a, a).re;
    let z2 = inner(a2, b2).re / inner(a2, a2).re;
    let gamma = if z.norm() > 0.0 && z2 != 0.0 {
        (z * z2).arg() / 2.0
    } else {
        0.0
    };
    let x3 = C64::from_polar(1.0, gamma);
    let q = x3 * x3 * z.conj();
    let s = if (C64::new(1.0, 0.0) + q).norm() >= 0.5 {
        1.0
    } else {
        2.0
    };
    [C64::new(s, 0.0), -x3 * z.conj() / s, x3, C64::new(1.0, 0.0)]
}

fn swapped(block: Block) -> Block {
    // rows of the 2×2 block exchanged: X = P·X′
    [block[2], block[3], block[0], block[1]]
}

/// Embeds a 2×2 block at positions (k, l) of the identity and normalizes
/// every column to unit length.
fn embed(m: usize, (k, l): (usize, usize), b: Block) -> ComplexMatrix {
    let mut x = DMatrix::<C64>::identity(m, m);
    x[(k, k)] = b[0];
    x[(k, l)] = b[1];
    x[(l, k)] = b[2];
    x[(l, l)] = b[3];
    for j in 0..m {
        let n = x.column(j).norm();
        if n > 0.0 {
            x.column_mut(j).unscale_mut(n);
        }
    }
    ComplexMatrix::trusted(x)
}

/// Verifies a witness against the reconstructed diagonal set.
fn certify(x: ComplexMatrix, items: &[TaggedMatrix], opts: CertifyOptions) -> Result<GlElement> {
    let residual = offdiag_residual_raw(items, &x)?;
    let (distance, _) = pattern_distance(&x);
    if !(residual <= opts.witness_limit()) {
        return Err(NujdError::SelfCheck(format!(
            "witness residual {residual:.3e} above {:.1e}",
            opts.witness_limit()
        )));
    }
    if !(distance > tol::WITNESS_DISTANCE) {
        return Err(NujdError::SelfCheck(format!(
            "witness distance {distance:.3e} from the permutation-scaling group"
        )));
    }
    GlElement::new(x).map_err(|e| NujdError::SelfCheck(format!("witness not invertible: {e}")))
}

fn check_pair(m: usize, (k, l): (usize, usize)) -> Result<()> {
    if k >= m || l >= m || k == l {
        return Err(NujdError::OutOfRange(format!("pair ({k}, {l}) for dimension {m}")));
    }
    Ok(())
}

/// Non-uniqueness witness for a single-kind stack at a collinear pair.
pub fn witness_thm1(stack: &DiagonalStack, pair: (usize, usize)) -> Result<GlElement> {
    witness_thm1_checked(stack, pair, CertifyOptions::default())
}

fn witness_thm1_checked(stack: &DiagonalStack, pair: (usize, usize), opts: CertifyOptions) -> Result<GlElement> {
    check_pair(stack.dim(), pair)?;
    let (k, l) = pair;
    let (a, b) = (stack.position_vector(k), stack.position_vector(l));
    let sine = complex_sine(&a, &b);
    if sine > opts.tol {
        return Err(NujdError::NotCollinear { k, l, sine });
    }
    let block = single_kind_block(stack.kind(), &a, &b);
    certify(embed(stack.dim(), pair, block), &stack.to_matrices(), opts)
}

/// Non-uniqueness witness for one transpose-kind and one Hermitian-kind
/// diagonal at a pair with |ω₁ₖ||ω₂ₗ| = |ω₁ₗ||ω₂ₖ|.
pub fn witness_thm2(omega1: &[C64], omega2: &[f64], pair: (usize, usize)) -> Result<GlElement> {
    witness_thm2_checked(omega1, omega2, pair, CertifyOptions::default())
}

fn witness_thm2_checked(
    omega1: &[C64],
    omega2: &[f64],
    pair: (usize, usize),
    opts: CertifyOptions,
) -> Result<GlElement> {
    if omega1.len() != omega2.len() {
        return Err(NujdError::DimensionMismatch {
            expected: omega1.len(),
            found: omega2.len(),
        });
    }
    let m = omega1.len();
    check_pair(m, pair)?;
    let (k, l) = pair;
    let p = omega1[k].norm() * omega2[l].abs();
    let q = omega1[l].norm() * omega2[k].abs();
    if !products_equal(p, q, opts.tol) {
        return Err(NujdError::ConditionSatisfied { k, l });
    }
    let re = |x: f64| vec![C64::new(x, 0.0)];
    let block = pair_block(&[omega1[k]], &[omega1[l]], &re(omega2[k]), &re(omega2[l]))
        .ok_or(NujdError::ConditionSatisfied { k, l })?;
    let (items, _, _) = stacks_from_pair(omega1, omega2);
    certify(embed(m, pair, block), &items, opts)
}

/// Non-uniqueness witness for a mixed pair satisfying both conditions.
pub fn witness_thm3(sym: &DiagonalStack, herm: &DiagonalStack, pair: (usize, usize)) -> Result<GlElement> {
    mixed_witness_checked(Some(sym), Some(herm), pair, CertifyOptions::default())
}

fn mixed_witness_checked(
    sym: Option<&DiagonalStack>,
    herm: Option<&DiagonalStack>,
    pair: (usize, usize),
    opts: CertifyOptions,
) -> Result<GlElement> {
    let m = check_kinds(sym, herm)?;
    check_pair(m, pair)?;
    let (k, l) = pair;
    if !mixed_pair_violates(sym, herm, k, l, opts.tol) {
        return Err(NujdError::ConditionSatisfied { k, l });
    }
    let block = pair_block(
        &position(sym, k),
        &position(sym, l),
        &position(herm, k),
        &position(herm, l),
    )
    .ok_or(NujdError::ConditionSatisfied { k, l })?;
    let mut items = sym.map(|s| s.to_matrices()).unwrap_or_default();
    items.extend(herm.map(|h| h.to_matrices()).unwrap_or_default());
    certify(embed(m, pair, block), &items, opts)
}

/// Witness block for the pair given transpose-kind position vectors (a, b)
/// and Hermitian-kind ones (a2, b2); empty or zero vectors impose no
/// constraint. `None` when no orientation admits the mixed construction.
fn pair_block(a: &[C64], b: &[C64], a2: &[C64], b2: &[C64]) -> Option<Block> {
    let sym_zero = norm(a) == 0.0 && norm(b) == 0.0;
    let herm_zero = norm(a2) == 0.0 && norm(b2) == 0.0;
    if sym_zero {
        return Some(single_kind_block(CongruenceKind::Hermitian, a2, b2));
    }
    if herm_zero {
        return Some(single_kind_block(CongruenceKind::Transpose, a, b));
    }
    if norm(a) > 0.0 && norm(a2) > 0.0 {
        return Some(mixed_block(a, b, a2, b2));
    }
    if norm(b) > 0.0 && norm(b2) > 0.0 {
        return Some(swapped(mixed_block(b, a, b2, a2)));
    }
    None
}

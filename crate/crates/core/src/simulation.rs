//! Ground-truth blind source separation experiments.
//!
//! Sources are drawn from seeded generators with known population
//! statistics, mixed by a random well-conditioned matrix, re-estimated, and
//! separated. Trial `i` of a batch draws from stream `i` of the seed, so a
//! batch gives bit-identical reports whatever the execution mode.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{NujdError, Result};
use crate::linalg;
use crate::matrix::{
    is_essentially_equivalent, offdiag_residual, pattern_distance, ComplexMatrix, CongruenceKind, DiagonalStack,
    GlElement, TaggedMatrix, TaggedMatrixSet, C64,
};
use crate::parallel::{self, Execution};
use crate::solvers;
use crate::statistics::{self, ConjugationPattern, SignalBlock};
use crate::tol;
use crate::uniqueness::{self, CertifyOptions, UniquenessReport, Verdict};

/// Source process; every kind has unit average power before scaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    /// Equiprobable ±1.
    Bpsk,
    /// Equiprobable (±1 ± i)/√2.
    Qpsk,
    /// (x + iy)/√2 with independent standard normal x, y.
    CircularGaussian,
    /// a·x + i·b·y with a² + b² = 1 and a² − b² = λ.
    NoncircularGaussian { lambda: f64 },
    /// s(t) = φ·s(t−1) + √(1−φ²)·e(t) with non-circular Gaussian e.
    Ar1Noncircular { coefficient: f64, lambda: f64 },
    /// Circular Gaussian whose variance follows `profile` over equal blocks.
    BlockNonstationary { profile: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    #[serde(flatten)]
    pub kind: SourceKind,
    #[serde(default = "unit")]
    pub power: f64,
}

fn unit() -> f64 {
    1.0
}

impl SourceSpec {
    pub fn new(kind: SourceKind) -> Self {
        SourceSpec { kind, power: 1.0 }
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.power = power;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NujdError::InvalidArgument(msg));
        if !(self.power > 0.0 && self.power.is_finite()) {
            return bad(format!("source power must be positive, got {}", self.power));
        }
        match &self.kind {
            SourceKind::NoncircularGaussian { lambda } => check_lambda(*lambda),
            SourceKind::Ar1Noncircular { coefficient, lambda } => {
                if !(coefficient.abs() < 1.0) {
                    return bad(format!("AR coefficient must satisfy |φ| < 1, got {coefficient}"));
                }
                check_lambda(*lambda)
            }
            SourceKind::BlockNonstationary { profile } => {
                if profile.is_empty() || profile.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return bad("variance profile must be non-empty and positive".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(NujdError::InvalidArgument(format!(
            "circularity target must lie in [0, 1], got {lambda}"
        )));
    }
    Ok(())
}

/// Block boundaries `[start, end)` for a profile of `n` blocks over T samples;
/// the last block takes the remainder.
fn blocks(n: usize, t: usize) -> Vec<(usize, usize)> {
    let len = t / n;
    (0..n)
        .map(|b| (b * len, if b + 1 == n { t } else { (b + 1) * len }))
        .collect()
}

fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn noncircular(rng: &mut ChaCha8Rng, lambda: f64) -> C64 {
    let a = ((1.0 + lambda) / 2.0).sqrt();
    let b = ((1.0 - lambda) / 2.0).sqrt();
    C64::new(a * std_normal(rng), b * std_normal(rng))
}

fn draw_source(spec: &SourceSpec, t: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut s: Vec<C64> = match &spec.kind {
        SourceKind::Bpsk => (0..t)
            .map(|_| C64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0))
            .collect(),
        SourceKind::Qpsk => (0..t)
            .map(|_| {
                let re = if rng.random::<bool>() { h } else { -h };
                let im = if rng.random::<bool>() { h } else { -h };
                C64::new(re, im)
            })
            .collect(),
        SourceKind::CircularGaussian => (0..t).map(|_| noncircular(rng, 0.0)).collect(),
        SourceKind::NoncircularGaussian { lambda } => (0..t).map(|_| noncircular(rng, *lambda)).collect(),
        SourceKind::Ar1Noncircular { coefficient, lambda } => {
            let g = (1.0 - coefficient * coefficient).sqrt();
            let mut out = Vec::with_capacity(t);
            let mut prev = noncircular(rng, *lambda);
            out.push(prev);
            for _ in 1..t {
                prev = prev * *coefficient + noncircular(rng, *lambda) * g;
                out.push(prev);
            }
            out
        }
        SourceKind::BlockNonstationary { profile } => {
            let mut out = Vec::with_capacity(t);
            for (&v, (a, b)) in profile.iter().zip(blocks(profile.len(), t)) {
                let sd = v.sqrt();
                out.extend((a..b).map(|_| noncircular(rng, 0.0) * sd));
            }
            out
        }
    };
    let scale = spec.power.sqrt();
    if scale != 1.0 {
        for z in &mut s {
            *z *= scale;
        }
    }
    s
}

/// Random mixing matrix with standard complex Gaussian entries, redrawn
/// until its condition number is at most `kappa_max`.
pub fn random_mixing(m: usize, kappa_max: f64, rng: &mut ChaCha8Rng) -> Result<GlElement> {
    if !(kappa_max >= 1.0) {
        return Err(NujdError::InvalidArgument(format!("condition cap {kappa_max} below 1")));
    }
    for _ in 0..10_000 {
        let a = DMatrix::from_fn(m, m, |_, _| noncircular(rng, 0.0));
        let a = ComplexMatrix::from_dmatrix(a)?;
        if linalg::condition_number(&a) <= kappa_max {
            return GlElement::new(a);
        }
    }
    Err(NujdError::InvalidArgument(format!(
        "no {m}x{m} mixing matrix with condition ≤ {kappa_max} after 10000 draws"
    )))
}

/// Everything needed to recompute population statistics of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentTruth {
    pub mixing: GlElement,
    pub sources: Vec<SourceSpec>,
    pub seed: u64,
    pub samples: usize,
}

/// `E[s^a conj(s)^b]` for jointly Gaussian zero-mean s with E|s|² = 1 and
/// E[s²] = λ (real), by summing over perfect matchings.
fn gaussian_moment(a: usize, b: usize, lambda: f64) -> f64 {
    let n = a + b;
    if n % 2 == 1 {
        return 0.0;
    }
    // factors: true = conjugated
    let f: Vec<bool> = (0..n).map(|i| i >= a).collect();
    fn rec(rest: &mut Vec<bool>, lambda: f64) -> f64 {
        if rest.is_empty() {
            return 1.0;
        }
        let first = rest.remove(0);
        let mut total = 0.0;
        for i in 0..rest.len() {
            let other = rest.remove(i);
            let pair = if first == other { lambda } else { 1.0 };
            if pair != 0.0 {
                total += pair * rec(rest, lambda);
            }
            rest.insert(i, other);
        }
        rest.insert(0, first);
        total
    }
    let mut f = f;
    rec(&mut f, lambda)
}

impl ExperimentTruth {
    pub fn dim(&self) -> usize {
        self.sources.len()
    }

    /// Time-averaged power profile weights of source k over `[start, end)`:
    /// list of (variance, fraction of the window).
    fn variance_profile(&self, k: usize, start: usize, end: usize) -> Vec<(f64, f64)> {
        match &self.sources[k].kind {
            SourceKind::BlockNonstationary { profile } => {
                let span = (end - start) as f64;
                profile
                    .iter()
                    .zip(blocks(profile.len(), self.samples))
                    .filter_map(|(&v, (a, b))| {
                        let lo = a.max(start);
                        let hi = b.min(end);
                        (hi > lo).then(|| (v, (hi - lo) as f64 / span))
                    })
                    .collect()
            }
            _ => vec![(1.0, 1.0)],
        }
    }

    /// Time-averaged `E[s_k^a conj(s_k)^b]` over `[start, end)`.
    pub fn source_moment(&self, k: usize, a: usize, b: usize, start: usize, end: usize) -> C64 {
        let spec = &self.sources[k];
        let n = a + b;
        let scale = spec.power.powf(n as f64 / 2.0);
        let unit = match &spec.kind {
            SourceKind::Bpsk => C64::new(if n.is_multiple_of(2) { 1.0 } else { 0.0 }, 0.0),
            SourceKind::Qpsk => {
                let d = a as i64 - b as i64;
                if d.rem_euclid(4) == 0 {
                    C64::from_polar(1.0, d as f64 * std::f64::consts::FRAC_PI_4)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            SourceKind::CircularGaussian => C64::new(gaussian_moment(a, b, 0.0), 0.0),
            SourceKind::NoncircularGaussian { lambda } | SourceKind::Ar1Noncircular { lambda, .. } => {
                C64::new(gaussian_moment(a, b, *lambda), 0.0)
            }
            SourceKind::BlockNonstationary { .. } => {
                let g = gaussian_moment(a, b, 0.0);
                let avg: f64 = self
                    .variance_profile(k, start, end)
                    .iter()
                    .map(|(v, w)| w * v.powf(n as f64 / 2.0))
                    .sum();
                C64::new(g * avg, 0.0)
            }
        };
        unit * scale
    }

    /// Population cumulant of source k under `pattern` (all factors at lag 0).
    pub fn source_cumulant(&self, k: usize, pattern: &ConjugationPattern) -> C64 {
        let bits = pattern.bits();
        let n = bits.len();
        let mut total = C64::new(0.0, 0.0);
        for (coef, part) in signed_partitions(n) {
            let mut prod = C64::new(1.0, 0.0);
            for block in part {
                let conj = (0..n).filter(|&i| block & (1 << i) != 0 && bits[i]).count();
                let plain = block.count_ones() as usize - conj;
                prod *= self.source_moment(k, plain, conj, 0, self.samples);
            }
            total += prod * coef;
        }
        total
    }

    /// Population `E[s_k(t) conj(s_k(t+τ))]` (conj) or `E[s_k(t) s_k(t+τ)]`.
    fn source_lagged(&self, k: usize, lag: usize, conj: bool) -> C64 {
        let spec = &self.sources[k];
        let zero_lag = if conj {
            self.source_moment(k, 1, 1, 0, self.samples)
        } else {
            self.source_moment(k, 2, 0, 0, self.samples)
        };
        if lag == 0 {
            return zero_lag;
        }
        match &spec.kind {
            SourceKind::Ar1Noncircular { coefficient, .. } => zero_lag * coefficient.powi(lag as i32),
            _ => C64::new(0.0, 0.0),
        }
    }

    /// Diagonal Ω of the population statistic in its congruence form
    /// `A Ω A^†`.
    pub fn population_diagonal(&self, stat: &StatisticSpec) -> Result<(CongruenceKind, Vec<C64>)> {
        let m = self.dim();
        let t = self.samples;
        let split = |d: Vec<C64>, part: Part| -> Vec<C64> {
            d.into_iter()
                .map(|z| match part {
                    Part::Hermitian => C64::new(z.re, 0.0),
                    Part::Skew => C64::new(z.im, 0.0),
                })
                .collect()
        };
        Ok(match stat {
            StatisticSpec::Covariance => (
                CongruenceKind::Hermitian,
                (0..m).map(|k| self.source_moment(k, 1, 1, 0, t)).collect(),
            ),
            StatisticSpec::PseudoCovariance => (
                CongruenceKind::Transpose,
                (0..m).map(|k| self.source_moment(k, 2, 0, 0, t)).collect(),
            ),
            StatisticSpec::Autocorrelation { lag, part } => (
                CongruenceKind::Hermitian,
                split((0..m).map(|k| self.source_lagged(k, *lag, true)).collect(), *part),
            ),
            StatisticSpec::PseudoAutocorrelation { lag } => (
                CongruenceKind::Transpose,
                (0..m).map(|k| self.source_lagged(k, *lag, false)).collect(),
            ),
            StatisticSpec::Window { start, len } => {
                if start + len > t {
                    return Err(NujdError::OutOfRange(format!(
                        "window ({start}, {len}) for {t} samples"
                    )));
                }
                (
                    CongruenceKind::Hermitian,
                    (0..m)
                        .map(|k| self.source_moment(k, 1, 1, *start, start + len))
                        .collect(),
                )
            }
            StatisticSpec::Cumulant {
                pattern,
                axes,
                fixed,
                part,
            } => {
                let pat = ConjugationPattern::parse(pattern)?;
                let (p, q) = (axes[0], axes[1]);
                let k = pat.order();
                if p >= k || q >= k || p == q || fixed.len() != k - 2 {
                    return Err(NujdError::InvalidArgument(format!(
                        "cumulant slice axes {axes:?} / fixed {fixed:?} invalid for order {k}"
                    )));
                }
                let a = self.mixing.matrix();
                let positions: Vec<usize> = (0..k).filter(|&i| i != p && i != q).collect();
                let mut d: Vec<C64> = (0..m)
                    .map(|s| {
                        let mut v = self.source_cumulant(s, &pat);
                        for (&pos, &ch) in positions.iter().zip(fixed) {
                            let entry = a[(ch, s)];
                            v *= if pat.bits()[pos] { entry.conj() } else { entry };
                        }
                        v
                    })
                    .collect();
                if pat.bits()[p] && pat.bits()[q] {
                    d.iter_mut().for_each(|z| *z = z.conj());
                }
                let kind = pat.slice_kind(p, q);
                match kind {
                    CongruenceKind::Transpose => (kind, d),
                    CongruenceKind::Hermitian => (kind, split(d, *part)),
                }
            }
        })
    }

    /// Population matrix `A Ω A^†` of a statistic.
    pub fn population_matrix(&self, stat: &StatisticSpec) -> Result<TaggedMatrix> {
        let (kind, d) = self.population_diagonal(stat)?;
        let a = self.mixing.matrix().as_dmatrix();
        let omega = ComplexMatrix::from_diagonal(&d);
        let right = match kind {
            CongruenceKind::Hermitian => a.adjoint(),
            CongruenceKind::Transpose => a.transpose(),
        };
        let c = ComplexMatrix::from_dmatrix(a * omega.as_dmatrix() * right)?;
        TaggedMatrix::symmetrized(&c, kind)
    }
}

fn signed_partitions(n: usize) -> Vec<(f64, Vec<u32>)> {
    fn rec(i: usize, n: usize, blocks: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == n {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b] |= 1 << i;
            rec(i + 1, n, blocks, out);
            blocks[b] &= !(1 << i);
        }
        blocks.push(1 << i);
        rec(i + 1, n, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|p| {
            let len = p.len();
            let fact: f64 = (1..len).map(|i| i as f64).product();
            (if len % 2 == 1 { fact } else { -fact }, p)
        })
        .collect()
}

fn generate_with(specs: &[SourceSpec], t: usize, rng: &mut ChaCha8Rng) -> Result<SignalBlock> {
    if specs.is_empty() {
        return Err(NujdError::Empty("source specs"));
    }
    if t < 100 {
        return Err(NujdError::InvalidArgument(format!(
            "at least 100 samples required, got {t}"
        )));
    }
    for s in specs {
        s.validate()?;
    }
    SignalBlock::new(specs.iter().map(|s| draw_source(s, t, rng)).collect())
}

/// Draws independent sources and a random mixing matrix (condition ≤ 100).
pub fn generate(specs: &[SourceSpec], t: usize, seed: u64) -> Result<(SignalBlock, ExperimentTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sources = generate_with(specs, t, &mut rng)?;
    let mixing = random_mixing(specs.len(), 100.0, &mut rng)?;
    Ok((
        sources,
        ExperimentTruth {
            mixing,
            sources: specs.to_vec(),
            seed,
            samples: t,
        },
    ))
}

/// Observations `w(t) = A s(t)`.
pub fn mix(sources: &SignalBlock, a: &GlElement) -> Result<SignalBlock> {
    apply(sources, a.matrix().as_dmatrix())
}

/// Source estimates `y(t) = Xᴴ w(t)`.
pub fn demix(w: &SignalBlock, x: &GlElement) -> Result<SignalBlock> {
    apply(w, &x.matrix().as_dmatrix().adjoint())
}

fn apply(s: &SignalBlock, a: &DMatrix<C64>) -> Result<SignalBlock> {
    if a.ncols() != s.channels() {
        return Err(NujdError::DimensionMismatch {
            expected: a.ncols(),
            found: s.channels(),
        });
    }
    let t = s.samples();
    let out: Vec<Vec<C64>> = (0..a.nrows())
        .map(|i| {
            (0..t)
                .map(|n| (0..a.ncols()).map(|j| a[(i, j)] * s.channel(j)[n]).sum())
                .collect()
        })
        .collect();
    SignalBlock::new(out)
}

/// Amari performance index of a global matrix G = XᴴA, normalized to
/// [0, 1]; zero exactly on scaled permutations.
pub fn amari_index(g: &ComplexMatrix) -> Result<f64> {
    let m = g.ensure_square()?;
    if m < 2 {
        return Ok(0.0);
    }
    let abs = DMatrix::from_fn(m, m, |i, j| g[(i, j)].norm());
    let mut total = 0.0;
    for i in 0..m {
        let row = abs.row(i);
        let max = row.max();
        if max == 0.0 {
            return Err(NujdError::InvalidArgument(format!(
                "row {i} of the global matrix is zero"
            )));
        }
        total += row.sum() / max - 1.0;
    }
    for j in 0..m {
        let col = abs.column(j);
        let max = col.max();
        if max == 0.0 {
            return Err(NujdError::InvalidArgument(format!(
                "column {j} of the global matrix is zero"
            )));
        }
        total += col.sum() / max - 1.0;
    }
    Ok(total / (2 * m * (m - 1)) as f64)
}

/// Hermitian part or skew part of a Hermitian-kind statistic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    #[default]
    Hermitian,
    Skew,
}

impl Part {
    fn is_default(&self) -> bool {
        *self == Part::Hermitian
    }
}

/// One entry of a statistics recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "statistic", rename_all = "snake_case", deny_unknown_fields)]
pub enum StatisticSpec {
    Covariance,
    PseudoCovariance,
    Autocorrelation {
        lag: usize,
        #[serde(default, skip_serializing_if = "Part::is_default")]
        part: Part,
    },
    PseudoAutocorrelation {
        lag: usize,
    },
    Window {
        start: usize,
        len: usize,
    },
    /// Cumulant slice; `axes` and `fixed` are zero-based.
    Cumulant {
        pattern: String,
        axes: [usize; 2],
        fixed: Vec<usize>,
        #[serde(default, skip_serializing_if = "Part::is_default")]
        part: Part,
    },
}

impl StatisticSpec {
    /// Estimate from observations.
    pub fn estimate(&self, w: &SignalBlock) -> Result<TaggedMatrix> {
        match self {
            StatisticSpec::Covariance => statistics::covariance(w),
            StatisticSpec::PseudoCovariance => statistics::pseudo_covariance(w),
            StatisticSpec::Autocorrelation { lag, part } => {
                let a = statistics::autocorrelation(w, *lag)?;
                Ok(match part {
                    Part::Hermitian => a.hermitian,
                    Part::Skew => a.skew,
                })
            }
            StatisticSpec::PseudoAutocorrelation { lag } => statistics::pseudo_autocorrelation(w, *lag),
            StatisticSpec::Window { start, len } => {
                Ok(statistics::windowed_covariances(w, &[(*start, *len)])?.remove(0))
            }
            StatisticSpec::Cumulant {
                pattern,
                axes,
                fixed,
                part,
            } => {
                let pat = ConjugationPattern::parse(pattern)?;
                let s = statistics::cumulant_slice(w, &pat, fixed, (axes[0], axes[1]))?;
                Ok(match (part, s.skew) {
                    (Part::Skew, Some(skew)) => skew,
                    _ => s.matrix,
                })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Put,
    Sut,
    Gevd,
    /// Certification only.
    None,
}

fn default_kappa() -> f64 {
    100.0
}

fn default_trials() -> usize {
    1
}

fn default_margin() -> f64 {
    tol::NOISY_MARGIN
}

fn default_equivalence() -> f64 {
    tol::PATTERN
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sources: Vec<SourceSpec>,
    #[serde(rename = "T")]
    pub samples: usize,
    pub seed: u64,
    pub statistics: Vec<StatisticSpec>,
    pub solver: SolverChoice,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_kappa")]
    pub kappa_max: f64,
    /// Certification tolerance applied to the population diagonals.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Tolerance for the essential-equivalence score.
    #[serde(default = "default_equivalence")]
    pub equivalence_tol: f64,
    /// Standard deviation of additive circular Gaussian noise on w.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub noise_std: f64,
    #[serde(default)]
    pub execution: Execution,
}

impl ExperimentConfig {
    pub fn new(
        sources: Vec<SourceSpec>,
        samples: usize,
        seed: u64,
        statistics: Vec<StatisticSpec>,
        solver: SolverChoice,
    ) -> Self {
        ExperimentConfig {
            sources,
            samples,
            seed,
            statistics,
            solver,
            trials: 1,
            kappa_max: default_kappa(),
            margin: default_margin(),
            equivalence_tol: default_equivalence(),
            noise_std: 0.0,
            execution: Execution::default(),
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(NujdError::Empty("sources"));
        }
        for s in &self.sources {
            s.validate()?;
        }
        if self.samples < 100 {
            return Err(NujdError::InvalidArgument(format!(
                "T must be at least 100, got {}",
                self.samples
            )));
        }
        if self.statistics.is_empty() {
            return Err(NujdError::Empty("statistics recipe"));
        }
        if self.trials == 0 {
            return Err(NujdError::InvalidArgument("trials must be positive".into()));
        }
        for (name, v) in [("margin", self.margin), ("equivalence_tol", self.equivalence_tol)] {
            if !(v > 0.0) {
                return Err(NujdError::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !(self.noise_std >= 0.0) {
            return Err(NujdError::InvalidArgument("noise_std must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialReport {
    pub trial: usize,
    /// Identifiability of the recipe from population diagonals.
    pub verdict: Option<Verdict>,
    pub rule: Option<&'static str>,
    /// Sufficient PUT/SUT condition on the two population diagonals.
    pub pair_check: Option<Verdict>,
    pub amari: Option<f64>,
    /// Distance of XᴴA from the scaled permutations.
    pub pattern_distance: Option<f64>,
    pub equivalent: Option<bool>,
    /// Joint off-diagonal residual of the estimated set under X.
    pub residual: Option<f64>,
    pub eig_gap: Option<f64>,
    /// Solver output is backed by a positive identifiability verdict.
    pub reliable: bool,
    pub error: Option<String>,
}

impl TrialReport {
    fn empty(trial: usize) -> Self {
        TrialReport {
            trial,
            verdict: None,
            rule: None,
            pair_check: None,
            amari: None,
            pattern_distance: None,
            equivalent: None,
            residual: None,
            eig_gap: None,
            reliable: false,
            error: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub completed: usize,
    pub failed: usize,
    pub unique_verdicts: usize,
    pub amari_median: Option<f64>,
    pub amari_q1: Option<f64>,
    pub amari_q3: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialReport>,
    pub summary: Summary,
}

impl ExperimentReport {
    pub fn all_completed(&self) -> bool {
        self.summary.failed == 0
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

/// Median of a sample (`None` when empty).
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Runs all trials with the execution mode stored in the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(config, config.execution)
}

/// Runs all trials with an explicit execution mode. Per-trial failures are
/// recorded in the report; only an invalid config is an error.
pub fn run_experiment_with(config: &ExperimentConfig, exec: Execution) -> Result<ExperimentReport> {
    config.validate()?;
    let trials = parallel::map_indexed(exec, config.trials, |i| {
        let mut report = TrialReport::empty(i);
        if let Err(e) = run_trial(config, i, &mut report) {
            report.error = Some(e.to_string());
        }
        report
    });
    let failed = trials.iter().filter(|t| t.error.is_some()).count();
    let unique_verdicts = trials.iter().filter(|t| t.verdict == Some(Verdict::Unique)).count();
    let mut amaris: Vec<f64> = trials.iter().filter_map(|t| t.amari).collect();
    amaris.sort_by(f64::total_cmp);
    Ok(ExperimentReport {
        config: config.clone(),
        summary: Summary {
            completed: trials.len() - failed,
            failed,
            unique_verdicts,
            amari_median: quantile(&amaris, 0.5),
            amari_q1: quantile(&amaris, 0.25),
            amari_q3: quantile(&amaris, 0.75),
        },
        trials,
    })
}

/// Sources, truth and observations of trial `trial`.
pub fn trial_data(config: &ExperimentConfig, trial: usize) -> Result<(SignalBlock, ExperimentTruth, SignalBlock)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(trial as u64);
    let sources = generate_with(&config.sources, config.samples, &mut rng)?;
    let mixing = random_mixing(config.sources.len(), config.kappa_max, &mut rng)?;
    let mut w = mix(&sources, &mixing)?;
    if config.noise_std > 0.0 {
        let data = w
            .into_data()
            .into_iter()
            .map(|ch| {
                ch.into_iter()
                    .map(|z| z + noncircular(&mut rng, 0.0) * config.noise_std)
                    .collect()
            })
            .collect();
        w = SignalBlock::new(data)?;
    }
    let truth = ExperimentTruth {
        mixing,
        sources: config.sources.clone(),
        seed: config.seed,
        samples: config.samples,
    };
    Ok((sources, truth, w))
}

/// Identifiability of a recipe from population diagonals. All-zero stacks
/// carry no constraint and count as absent.
pub fn recipe_identifiability(
    truth: &ExperimentTruth,
    recipe: &[StatisticSpec],
    opts: CertifyOptions,
) -> Result<UniquenessReport> {
    let mut sym = Vec::new();
    let mut herm = Vec::new();
    for stat in recipe {
        let (kind, d) = truth.population_diagonal(stat)?;
        match kind {
            CongruenceKind::Transpose => sym.push(d),
            CongruenceKind::Hermitian => herm.push(d.iter().map(|z| z.re).collect::<Vec<f64>>()),
        }
    }
    let stack = |r: Result<DiagonalStack>| match r {
        Ok(s) => Ok(Some(s)),
        Err(NujdError::ZeroStack) | Err(NujdError::Empty(_)) => Ok(None),
        Err(e) => Err(e),
    };
    let sym = stack(DiagonalStack::transpose(sym))?;
    let herm = stack(DiagonalStack::hermitian(herm))?;
    if sym.is_none() && herm.is_none() {
        return Err(NujdError::InvalidPrecondition(
            "every statistic in the recipe vanishes on the sources".into(),
        ));
    }
    uniqueness::identifiability_master(sym.as_ref(), herm.as_ref(), opts)
}

fn run_trial(config: &ExperimentConfig, trial: usize, report: &mut TrialReport) -> Result<()> {
    let (_, truth, w) = trial_data(config, trial)?;
    let opts = CertifyOptions::with_tol(config.margin);
    let ident = recipe_identifiability(&truth, &config.statistics, opts)?;
    report.verdict = Some(ident.verdict);
    report.rule = Some(ident.rule_fired.as_str());
    let mut reliable = ident.is_unique();

    if config.solver == SolverChoice::None {
        report.reliable = reliable;
        return Ok(());
    }
    let estimated: Vec<TaggedMatrix> = config
        .statistics
        .iter()
        .map(|s| s.estimate(&w))
        .collect::<Result<_>>()?;
    if estimated.len() != 2 {
        return Err(NujdError::InvalidArgument(format!(
            "solver needs exactly two statistics, recipe has {}",
            estimated.len()
        )));
    }
    let x = match config.solver {
        SolverChoice::Put | SolverChoice::Sut => {
            let (hi, si) = match (estimated[0].kind(), estimated[1].kind()) {
                (CongruenceKind::Hermitian, CongruenceKind::Transpose) => (0, 1),
                (CongruenceKind::Transpose, CongruenceKind::Hermitian) => (1, 0),
                _ => {
                    return Err(NujdError::InvalidArgument(
                        "put/sut need one Hermitian-kind and one transpose-kind statistic".into(),
                    ))
                }
            };
            let (_, hd) = truth.population_diagonal(&config.statistics[hi])?;
            let (_, sd) = truth.population_diagonal(&config.statistics[si])?;
            let pair = solvers::put_identifiability_check(
                &ComplexMatrix::from_diagonal(&hd),
                &ComplexMatrix::from_diagonal(&sd),
                opts,
            )?;
            report.pair_check = Some(pair.verdict);
            reliable &= pair.is_unique();
            let res = if config.solver == SolverChoice::Put {
                solvers::put(&estimated[hi], &estimated[si])?
            } else {
                solvers::sut(&estimated[hi], &estimated[si])?
            };
            report.eig_gap = Some(res.eig_gap);
            reliable &= res.warnings.is_empty();
            res.x
        }
        SolverChoice::Gevd => solvers::two_matrix_same_kind(&estimated[0], &estimated[1])?,
        SolverChoice::None => unreachable!("handled above"),
    };
    let a = truth.mixing.matrix();
    let g = ComplexMatrix::from_dmatrix(x.matrix().as_dmatrix().adjoint() * a.as_dmatrix())?;
    report.amari = Some(amari_index(&g)?);
    report.pattern_distance = Some(pattern_distance(&g).0);
    if let Ok(a_inv_h) = a
        .as_dmatrix()
        .clone()
        .try_inverse()
        .ok_or(NujdError::Singular {
            condition: truth.mixing.condition(),
        })
        .and_then(|inv| GlElement::new(ComplexMatrix::from_dmatrix(inv.adjoint())?))
    {
        report.equivalent = Some(is_essentially_equivalent(&x, &a_inv_h, config.equivalence_tol)?.equivalent);
    }
    report.residual = Some(offdiag_residual(&TaggedMatrixSet::new(estimated)?, &x)?);
    report.reliable = reliable;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistics::circularity_coefficient;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn bpsk_samples_are_signs() {
        let (s, _) = generate(&[SourceSpec::new(SourceKind::Bpsk)], 1000, 1).unwrap();
        assert!(s.channel(0).iter().all(|z| z.im == 0.0 && z.re.abs() == 1.0));
    }

    #[test]
    fn circular_target() {
        let (s, _) = generate(
            &[SourceSpec::new(SourceKind::NoncircularGaussian { lambda: 0.0 })],
            100_000,
            2,
        )
        .unwrap();
        assert!(circularity_coefficient(s.channel(0)).unwrap() <= 0.02);
    }

    #[test]
    fn block_variance_ratio() {
        let spec = SourceSpec::new(SourceKind::BlockNonstationary {
            profile: vec![1.0, 4.0],
        });
        let (s, _) = generate(&[spec], 20_000, 3).unwrap();
        let var = |r: &[C64]| r.iter().map(|z| z.norm_sqr()).sum::<f64>() / r.len() as f64;
        let ratio = var(&s.channel(0)[10_000..]) / var(&s.channel(0)[..10_000]);
        assert!((ratio - 4.0).abs() < 0.3);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(SourceSpec::new(SourceKind::NoncircularGaussian { lambda: 1.5 })
            .validate()
            .is_err());
        assert!(SourceSpec::new(SourceKind::Ar1Noncircular {
            coefficient: 1.0,
            lambda: 0.5
        })
        .validate()
        .is_err());
        assert!(SourceSpec::new(SourceKind::BlockNonstationary {
            profile: vec![1.0, 0.0]
        })
        .validate()
        .is_err());
        assert!(SourceSpec::new(SourceKind::Bpsk).with_power(0.0).validate().is_err());
        assert!(generate(&[SourceSpec::new(SourceKind::Bpsk)], 99, 0).is_err());
    }

    #[test]
    fn mix_examples() {
        let s = SignalBlock::new(vec![vec![c(1.0, 0.0), c(2.0, 1.0)], vec![c(0.0, 1.0), c(-1.0, 0.0)]]).unwrap();
        assert_eq!(mix(&s, &GlElement::identity(2)).unwrap(), s);
        let d = GlElement::new(ComplexMatrix::from_real_diagonal(&[2.0, 1.0])).unwrap();
        let w = mix(&s, &d).unwrap();
        assert_eq!(w.channel(0), &[c(2.0, 0.0), c(4.0, 2.0)]);
        assert_eq!(w.channel(1), s.channel(1));
        let p = GlElement::new(ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()).unwrap();
        let w = mix(&s, &p).unwrap();
        assert_eq!(w.channel(0), s.channel(1));
        assert!(mix(&s, &GlElement::identity(3)).is_err());
    }

    #[test]
    fn demix_inverts_mixing() {
        let (s, truth) = generate(
            &[SourceSpec::new(SourceKind::Qpsk), SourceSpec::new(SourceKind::Bpsk)],
            200,
            4,
        )
        .unwrap();
        let w = mix(&s, &truth.mixing).unwrap();
        assert_eq!(demix(&w, &GlElement::identity(2)).unwrap(), w);
        let inv = truth.mixing.matrix().as_dmatrix().clone().try_inverse().unwrap();
        let x = GlElement::new(ComplexMatrix::from_dmatrix(inv.adjoint()).unwrap()).unwrap();
        let y = demix(&w, &x).unwrap();
        for k in 0..2 {
            for (a, b) in y.channel(k).iter().zip(s.channel(k)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn amari_examples() {
        assert_eq!(amari_index(&ComplexMatrix::identity(2)).unwrap(), 0.0);
        let g = ComplexMatrix::new(2, 2, vec![c(0.0, 0.0), c(5.0, 0.0), c(0.0, -1.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(amari_index(&g).unwrap(), 0.0);
        let ones = ComplexMatrix::from_real(2, 2, &[1.0; 4]).unwrap();
        assert_eq!(amari_index(&ones).unwrap(), 1.0);
        let zero_row = ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(amari_index(&zero_row).is_err());
    }

    #[test]
    fn gaussian_moments() {
        assert_eq!(gaussian_moment(1, 1, 0.3), 1.0);
        assert_eq!(gaussian_moment(2, 0, 0.3), 0.3);
        // E|s|⁴ = 2 + λ² for unit variance, pseudo-variance λ
        assert!((gaussian_moment(2, 2, 0.5) - 2.25).abs() < 1e-15);
        assert_eq!(gaussian_moment(3, 0, 0.5), 0.0);
    }

    #[test]
    fn analytic_cumulants() {
        let truth = ExperimentTruth {
            mixing: GlElement::identity(3),
            sources: vec![
                SourceSpec::new(SourceKind::Bpsk),
                SourceSpec::new(SourceKind::Qpsk),
                SourceSpec::new(SourceKind::NoncircularGaussian { lambda: 0.6 }),
            ],
            seed: 0,
            samples: 1000,
        };
        let p = |s: &str| ConjugationPattern::parse(s).unwrap();
        assert!((truth.source_cumulant(0, &p("0000")) - c(-2.0, 0.0)).norm() < 1e-15);
        assert!((truth.source_cumulant(1, &p("0000")) - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((truth.source_cumulant(1, &p("1100")) - c(-1.0, 0.0)).norm() < 1e-15);
        assert!(truth.source_cumulant(1, &p("1000")).norm() < 1e-15);
        assert!(truth.source_cumulant(2, &p("1100")).norm() < 1e-15);
        assert!((truth.source_cumulant(2, &p("01")) - c(1.0, 0.0)).norm() < 1e-15);
    }

    fn sut_config(l1: f64, l2: f64) -> ExperimentConfig {
        ExperimentConfig::new(
            vec![
                SourceSpec::new(SourceKind::NoncircularGaussian { lambda: l1 }),
                SourceSpec::new(SourceKind::NoncircularGaussian { lambda: l2 }),
            ],
            20_000,
            9,
            vec![StatisticSpec::Covariance, StatisticSpec::PseudoCovariance],
            SolverChoice::Sut,
        )
    }

    #[test]
    fn sut_experiment_separates() {
        let rep = run_experiment(&sut_config(0.9, 0.3).with_trials(3)).unwrap();
        assert!(rep.all_completed(), "{:?}", rep.trials);
        assert_eq!(rep.summary.unique_verdicts, 3);
        assert!(rep.summary.amari_median.unwrap() < 0.1);
        assert!(rep.trials.iter().all(|t| t.reliable));
    }

    #[test]
    fn equal_circularity_is_flagged() {
        let rep = run_experiment(&sut_config(0.5, 0.5)).unwrap();
        let t = &rep.trials[0];
        assert_eq!(t.pair_check, Some(Verdict::NotUnique));
        assert_eq!(t.verdict, Some(Verdict::NotUnique));
        assert!(!t.reliable);
    }

    #[test]
    fn execution_modes_agree() {
        let cfg = sut_config(0.9, 0.3).with_trials(4);
        let a = run_experiment_with(&cfg, Execution::Parallel).unwrap();
        let b = run_experiment_with(&cfg, Execution::Sequential).unwrap();
        assert_eq!(
            serde_json::to_string(&a.trials).unwrap(),
            serde_json::to_string(&b.trials).unwrap()
        );
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = sut_config(0.9, 0.3);
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"T\":20000"));
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        let bad = json.replace("\"sut\"", "\"jade\"");
        assert!(serde_json::from_str::<ExperimentConfig>(&bad).is_err());
    }
}

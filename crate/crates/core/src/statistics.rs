//! Second- and higher-order statistics of multichannel complex signals.
//!
//! Expectations are time averages over one realization with 1/T
//! normalization. Every estimator centers each channel first.
//!
//! Conjugation convention: bit `ι_j = 1` conjugates the j-th factor, so the
//! pattern `(0, 1)` gives `E[w_a w_b*]`, the covariance entry.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NujdError, Result};
use crate::matrix::{hermitian_skew_split, ComplexMatrix, CongruenceKind, TaggedMatrix, C64};
use crate::parallel::{self, Execution};

/// m channels of T complex samples each.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalBlock {
    channels: Vec<Vec<C64>>,
}

impl SignalBlock {
    pub fn new(channels: Vec<Vec<C64>>) -> Result<Self> {
        let first = channels.first().ok_or(NujdError::Empty("signal block"))?;
        let t = first.len();
        if t == 0 {
            return Err(NujdError::Empty("signal samples"));
        }
        for (row, ch) in channels.iter().enumerate() {
            if ch.len() != t {
                return Err(NujdError::DimensionMismatch {
                    expected: t,
                    found: ch.len(),
                });
            }
            if let Some(col) = ch.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(NujdError::NonFinite { row, col });
            }
        }
        Ok(SignalBlock { channels })
    }

    /// Number of channels m.
    pub fn channels(&self) -> usize {
        self.channels.len()
    }

    /// Number of samples T.
    pub fn samples(&self) -> usize {
        self.channels[0].len()
    }

    pub fn channel(&self, i: usize) -> &[C64] {
        &self.channels[i]
    }

    pub fn data(&self) -> &[Vec<C64>] {
        &self.channels
    }

    pub fn into_data(self) -> Vec<Vec<C64>> {
        self.channels
    }

    /// Copy with every channel shifted to zero sample mean.
    pub fn centered(&self) -> SignalBlock {
        SignalBlock {
            channels: self.channels.iter().map(|c| center(c)).collect(),
        }
    }

    /// Samples `start .. start + len` of every channel.
    pub fn window(&self, start: usize, len: usize) -> Result<SignalBlock> {
        let t = self.samples();
        if len == 0 || start.checked_add(len).is_none_or(|end| end > t) {
            return Err(NujdError::OutOfRange(format!(
                "window ({start}, {len}) for {t} samples"
            )));
        }
        Ok(SignalBlock {
            channels: self.channels.iter().map(|c| c[start..start + len].to_vec()).collect(),
        })
    }

    /// Block built from the given time indices (with repetition).
    pub fn resample(&self, times: &[usize]) -> SignalBlock {
        SignalBlock {
            channels: self
                .channels
                .iter()
                .map(|c| times.iter().map(|&t| c[t]).collect())
                .collect(),
        }
    }
}

fn center(c: &[C64]) -> Vec<C64> {
    let mean = c.iter().sum::<C64>() / c.len() as f64;
    c.iter().map(|z| z - mean).collect()
}

/// Per-factor conjugation bits of a cumulant, length 2 to 6.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct ConjugationPattern(Vec<bool>);

impl ConjugationPattern {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if !(2..=6).contains(&bits.len()) {
            return Err(NujdError::CumulantOrder(bits.len()));
        }
        Ok(ConjugationPattern(bits))
    }

    /// Parses a string of `0`/`1` characters such as `"0101"`.
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(NujdError::InvalidArgument(format!(
                    "conjugation pattern must be 0/1 digits, got {s:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bits)
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Congruence kind of the (p, q) slice: Hermitian iff ι_p ⊕ ι_q.
    pub fn slice_kind(&self, p: usize, q: usize) -> CongruenceKind {
        if self.0[p] ^ self.0[q] {
            CongruenceKind::Hermitian
        } else {
            CongruenceKind::Transpose
        }
    }
}

impl TryFrom<Vec<u8>> for ConjugationPattern {
    type Error = NujdError;

    fn try_from(v: Vec<u8>) -> Result<Self> {
        if v.iter().any(|&b| b > 1) {
            return Err(NujdError::InvalidArgument("pattern bits must be 0 or 1".into()));
        }
        Self::new(v.into_iter().map(|b| b == 1).collect())
    }
}

impl From<ConjugationPattern> for Vec<u8> {
    fn from(p: ConjugationPattern) -> Vec<u8> {
        p.0.into_iter().map(u8::from).collect()
    }
}

impl std::fmt::Display for ConjugationPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Lagged second-order statistic `(1/(T−τ)) Σ w(t) w(t+τ)ᴴ` and its
/// Hermitian parts.
#[derive(Clone, Debug, PartialEq)]
pub struct Autocorrelation {
    pub lag: usize,
    /// Estimate as computed; not Hermitian in general.
    pub raw: ComplexMatrix,
    /// (C + Cᴴ)/2
    pub hermitian: TaggedMatrix,
    /// (C − Cᴴ)/(2i)
    pub skew: TaggedMatrix,
}

/// Matrix slice of a cumulant tensor, oriented so that for w = A s it reads
/// `A D Aᴴ` (Hermitian kind) or `A D Aᵀ` (transpose kind).
#[derive(Clone, Debug, PartialEq)]
pub struct CumulantSlice {
    pub order: usize,
    pub pattern: ConjugationPattern,
    /// Channel indices held fixed at the non-slice positions, in position order.
    pub fixed_indices: Vec<usize>,
    /// Tensor positions (p, q) that vary along rows and columns.
    pub axes: (usize, usize),
    /// Lag of each tensor position; all zero for [`cumulant_slice`].
    pub offsets: Vec<isize>,
    /// Oriented slice before symmetrization.
    pub raw: ComplexMatrix,
    /// Symmetrized slice (transpose kind) or Hermitian part (Hermitian kind).
    pub matrix: TaggedMatrix,
    /// Skew part (C − Cᴴ)/(2i) for Hermitian-kind slices.
    pub skew: Option<TaggedMatrix>,
}

impl CumulantSlice {
    pub fn kind(&self) -> CongruenceKind {
        self.matrix.kind()
    }

    /// Matrices to hand to a joint diagonalizer.
    pub fn parts(&self) -> Vec<TaggedMatrix> {
        let mut v = vec![self.matrix.clone()];
        v.extend(self.skew.clone());
        v
    }
}

fn require_samples(w: &SignalBlock) -> Result<()> {
    if w.samples() < w.channels() {
        log::warn!(
            "{} samples for {} channels: estimate is rank deficient",
            w.samples(),
            w.channels()
        );
    }
    Ok(())
}

/// `(1/N) Σ_t x(t) y(t + lag)^{(conj)}` over the overlap of two centered
/// channels, where the second factor is conjugated when `conj` is set.
fn lagged_product(x: &[C64], y: &[C64], lag: usize, conj: bool) -> C64 {
    let n = x.len() - lag;
    let s: C64 = if conj {
        x[..n].iter().zip(&y[lag..]).map(|(a, b)| a * b.conj()).sum()
    } else {
        x[..n].iter().zip(&y[lag..]).map(|(a, b)| a * b).sum()
    };
    s / n as f64
}

fn lagged_matrix(w: &SignalBlock, lag: usize, conj: bool) -> Result<DMatrix<C64>> {
    let t = w.samples();
    if lag >= t {
        return Err(NujdError::OutOfRange(format!("lag {lag} for {t} samples")));
    }
    let c = w.centered();
    let m = c.channels();
    Ok(DMatrix::from_fn(m, m, |i, j| {
        lagged_product(c.channel(i), c.channel(j), lag, conj)
    }))
}

/// Sample covariance `(1/T) Σ w(t) w(t)ᴴ` of the centered signal.
pub fn covariance(w: &SignalBlock) -> Result<TaggedMatrix> {
    require_samples(w)?;
    let c = ComplexMatrix::from_dmatrix(lagged_matrix(w, 0, true)?)?;
    TaggedMatrix::symmetrized(&c, CongruenceKind::Hermitian)
}

/// Sample pseudo-covariance `(1/T) Σ w(t) w(t)ᵀ` of the centered signal.
pub fn pseudo_covariance(w: &SignalBlock) -> Result<TaggedMatrix> {
    pseudo_autocorrelation(w, 0)
}

/// Lagged autocorrelation with its Hermitian/skew split.
pub fn autocorrelation(w: &SignalBlock, lag: usize) -> Result<Autocorrelation> {
    require_samples(w)?;
    let raw = ComplexMatrix::from_dmatrix(lagged_matrix(w, lag, true)?)?;
    let (h, s) = hermitian_skew_split(&raw)?;
    Ok(Autocorrelation {
        lag,
        raw,
        hermitian: TaggedMatrix::hermitian(h)?,
        skew: TaggedMatrix::hermitian(s)?,
    })
}

/// Lagged pseudo-autocorrelation `(1/(T−τ)) Σ w(t) w(t+τ)ᵀ`, symmetrized.
pub fn pseudo_autocorrelation(w: &SignalBlock, lag: usize) -> Result<TaggedMatrix> {
    require_samples(w)?;
    let raw = ComplexMatrix::from_dmatrix(lagged_matrix(w, lag, false)?)?;
    TaggedMatrix::symmetrized(&raw, CongruenceKind::Transpose)
}

/// One covariance per `(start, len)` window.
pub fn windowed_covariances(w: &SignalBlock, windows: &[(usize, usize)]) -> Result<Vec<TaggedMatrix>> {
    windows
        .iter()
        .map(|&(start, len)| {
            if len < w.channels() {
                return Err(NujdError::InvalidArgument(format!(
                    "window length {len} below channel count {}",
                    w.channels()
                )));
            }
            covariance(&w.window(start, len)?)
        })
        .collect()
}

/// `|E[s²]| / E[|s|²]` of the centered channel.
pub fn circularity_coefficient(channel: &[C64]) -> Result<f64> {
    if channel.is_empty() {
        return Err(NujdError::Empty("channel"));
    }
    let c = center(channel);
    let power = c.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if !(power > 0.0) {
        return Err(NujdError::ZeroPower);
    }
    let pseudo: C64 = c.iter().map(|z| z * z).sum();
    Ok(pseudo.norm() / power)
}

/// Set partition of {0..k} as block bitmasks, with its cumulant coefficient
/// (−1)^{p−1}(p−1)!.
struct Partition {
    coef: f64,
    blocks: Vec<u32>,
}

fn all_partitions(k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut blocks: Vec<u32> = Vec::new();
    fn rec(i: usize, k: usize, blocks: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == k {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b] |= 1 << i;
            rec(i + 1, k, blocks, out);
            blocks[b] &= !(1 << i);
        }
        blocks.push(1 << i);
        rec(i + 1, k, blocks, out);
        blocks.pop();
    }
    rec(0, k, &mut blocks, &mut out);
    out
}

/// Partitions of {0..k} without singleton blocks: singletons carry the
/// mean, which is zero for centered data.
fn zero_mean_partitions(k: usize) -> &'static [Partition] {
    static CACHE: [OnceLock<Vec<Partition>>; 7] = [const { OnceLock::new() }; 7];
    CACHE[k].get_or_init(|| {
        all_partitions(k)
            .into_iter()
            .filter(|p| p.iter().all(|b| b.count_ones() > 1))
            .map(|blocks| {
                let p = blocks.len();
                let fact: f64 = (1..p).map(|i| i as f64).product();
                let sign = if p % 2 == 1 { 1.0 } else { -1.0 };
                Partition {
                    coef: sign * fact,
                    blocks,
                }
            })
            .collect()
    })
}

/// Cumulant from factor series already conjugated and aligned.
#[allow(clippy::needless_range_loop)]
fn cumulant_of_factors(factors: &[&[C64]]) -> C64 {
    let k = factors.len();
    let n = factors[0].len();
    let size = 1usize << k;
    let mut moments = vec![C64::new(0.0, 0.0); size];
    let mut prod = vec![C64::new(1.0, 0.0); size];
    for t in 0..n {
        for mask in 1..size {
            let low = mask.trailing_zeros() as usize;
            prod[mask] = prod[mask & (mask - 1)] * factors[low][t];
            moments[mask] += prod[mask];
        }
    }
    let inv = 1.0 / n as f64;
    zero_mean_partitions(k)
        .iter()
        .map(|p| p.blocks.iter().map(|&b| moments[b as usize] * inv).product::<C64>() * p.coef)
        .sum()
}

fn check_order(k: usize) -> Result<()> {
    if !(2..=6).contains(&k) {
        return Err(NujdError::CumulantOrder(k));
    }
    Ok(())
}

/// Joint cumulant `cum(x₁^{ι₁}, …, x_k^{ι_k})` of k channels (centered here).
pub fn cumulant(channels: &[&[C64]], pattern: &ConjugationPattern) -> Result<C64> {
    let k = channels.len();
    check_order(k)?;
    if pattern.order() != k {
        return Err(NujdError::DimensionMismatch {
            expected: k,
            found: pattern.order(),
        });
    }
    let n = channels[0].len();
    if n == 0 {
        return Err(NujdError::Empty("channel"));
    }
    if let Some(bad) = channels.iter().find(|c| c.len() != n) {
        return Err(NujdError::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let factors: Vec<Vec<C64>> = channels
        .iter()
        .zip(pattern.bits())
        .map(|(c, &conj)| {
            let c = center(c);
            if conj {
                c.iter().map(|z| z.conj()).collect()
            } else {
                c
            }
        })
        .collect();
    let refs: Vec<&[C64]> = factors.iter().map(|f| f.as_slice()).collect();
    Ok(cumulant_of_factors(&refs))
}

/// (p, q) slice of the k-th order cumulant tensor with the other positions
/// fixed to `fixed` channels (in position order). Positions and channels
/// are zero-based.
pub fn cumulant_slice(
    w: &SignalBlock,
    pattern: &ConjugationPattern,
    fixed: &[usize],
    axes: (usize, usize),
) -> Result<CumulantSlice> {
    lagged_cumulant_slice(w, pattern, fixed, axes, &vec![0; pattern.order()])
}

/// As [`cumulant_slice`], with tensor position j read at time `t + offsets[j]`.
pub fn lagged_cumulant_slice(
    w: &SignalBlock,
    pattern: &ConjugationPattern,
    fixed: &[usize],
    axes: (usize, usize),
    offsets: &[isize],
) -> Result<CumulantSlice> {
    let k = pattern.order();
    check_order(k)?;
    let (p, q) = axes;
    if p >= k || q >= k {
        return Err(NujdError::OutOfRange(format!("axes ({p}, {q}) for order {k}")));
    }
    if p == q {
        return Err(NujdError::InvalidArgument("slice axes must differ".into()));
    }
    if fixed.len() != k - 2 {
        return Err(NujdError::DimensionMismatch {
            expected: k - 2,
            found: fixed.len(),
        });
    }
    let m = w.channels();
    if let Some(&bad) = fixed.iter().find(|&&c| c >= m) {
        return Err(NujdError::OutOfRange(format!("channel {bad} of {m}")));
    }
    if offsets.len() != k {
        return Err(NujdError::DimensionMismatch {
            expected: k,
            found: offsets.len(),
        });
    }
    let t = w.samples() as isize;
    let lo = offsets.iter().copied().min().unwrap_or(0);
    let hi = offsets.iter().copied().max().unwrap_or(0);
    // position j reads samples (o_j − lo) .. (o_j − lo + n)
    let n = t - (hi - lo);
    if n < 2 {
        return Err(NujdError::OutOfRange(format!(
            "offsets {offsets:?} leave fewer than 2 samples of {t}"
        )));
    }
    let centered = w.centered();
    // factor series per (position, channel), shifted and conjugated
    let series = |pos: usize, ch: usize| -> Vec<C64> {
        let s = (offsets[pos] - lo) as usize;
        let raw = &centered.channel(ch)[s..s + n as usize];
        if pattern.bits()[pos] {
            raw.iter().map(|z| z.conj()).collect()
        } else {
            raw.to_vec()
        }
    };
    let mut channel_of: Vec<Option<usize>> = vec![None; k];
    let mut fi = fixed.iter();
    for (pos, slot) in channel_of.iter_mut().enumerate() {
        if pos != p && pos != q {
            *slot = fi.next().copied();
        }
    }
    let fixed_series: Vec<Option<Vec<C64>>> = channel_of
        .iter()
        .enumerate()
        .map(|(pos, c)| c.map(|ch| series(pos, ch)))
        .collect();
    let row_series: Vec<Vec<C64>> = (0..m).map(|i| series(p, i)).collect();
    let col_series: Vec<Vec<C64>> = (0..m).map(|j| series(q, j)).collect();
    let mut raw = DMatrix::<C64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let factors: Vec<&[C64]> = (0..k)
                .map(|pos| {
                    if pos == p {
                        row_series[i].as_slice()
                    } else if pos == q {
                        col_series[j].as_slice()
                    } else {
                        fixed_series[pos].as_deref().expect("fixed position")
                    }
                })
                .collect();
            raw[(i, j)] = cumulant_of_factors(&factors);
        }
    }
    let bits = pattern.bits();
    let oriented = match (bits[p], bits[q]) {
        (false, false) | (false, true) => raw,
        (true, false) => raw.transpose(),
        (true, true) => raw.conjugate(),
    };
    let kind = pattern.slice_kind(p, q);
    let oriented = ComplexMatrix::from_dmatrix(oriented)?;
    let (matrix, skew) = match kind {
        CongruenceKind::Transpose => (TaggedMatrix::symmetrized(&oriented, kind)?, None),
        CongruenceKind::Hermitian => {
            let (h, s) = hermitian_skew_split(&oriented)?;
            (TaggedMatrix::hermitian(h)?, Some(TaggedMatrix::hermitian(s)?))
        }
    };
    Ok(CumulantSlice {
        order: k,
        pattern: pattern.clone(),
        fixed_indices: fixed.to_vec(),
        axes,
        offsets: offsets.to_vec(),
        raw: oriented,
        matrix,
        skew,
    })
}

/// Bootstrap standard error (Frobenius norm) of a matrix-valued statistic,
/// from `resamples` i.i.d. time resamplings. Resample b draws from its own
/// RNG stream, so the value does not depend on `exec`.
pub fn bootstrap_sigma<F>(w: &SignalBlock, resamples: usize, seed: u64, exec: Execution, statistic: F) -> Result<f64>
where
    F: Fn(&SignalBlock) -> Result<ComplexMatrix> + Sync + Send,
{
    if resamples < 2 {
        return Err(NujdError::InvalidArgument(
            "bootstrap needs at least 2 resamples".into(),
        ));
    }
    let t = w.samples();
    let stats = parallel::try_map_indexed(exec, resamples, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let times: Vec<usize> = (0..t).map(|_| rng.random_range(0..t)).collect();
        statistic(&w.resample(&times)).map(ComplexMatrix::into_dmatrix)
    })?;
    let mean = stats
        .iter()
        .fold(DMatrix::<C64>::zeros(stats[0].nrows(), stats[0].ncols()), |acc, s| {
            acc + s
        })
        / C64::new(resamples as f64, 0.0);
    let var = stats.iter().map(|s| (s - &mean).norm_squared()).sum::<f64>() / (resamples - 1) as f64;
    Ok(var.sqrt())
}

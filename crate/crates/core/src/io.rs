//! JSON file formats. Complex numbers are `[re, im]` pairs and matrices are
//! row-major lists of pairs. Floats are written in shortest round-trip form,
//! so write → read → write is byte-identical.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{NujdError, Result};
use crate::matrix::{ComplexMatrix, CongruenceKind, DiagonalStack, TaggedMatrix, TaggedMatrixSet, C64};
use crate::statistics::SignalBlock;
use crate::tol;

/// Serializes a matrix as row-major `[[re, im], ...]` pairs.
pub fn ser_matrix<S: Serializer>(m: &ComplexMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    let entries = m.row_major();
    let mut seq = s.serialize_seq(Some(entries.len()))?;
    for z in entries {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

/// Borrowed matrix serialized as row-major `[[re, im], ...]` pairs.
pub struct MatrixEntries<'a>(pub &'a ComplexMatrix);

impl Serialize for MatrixEntries<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ser_matrix(self.0, s)
    }
}

/// Borrowed complex sequence serialized as `[[re, im], ...]` pairs.
pub struct ComplexList<'a>(pub &'a [C64]);

impl Serialize for ComplexList<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for z in self.0 {
            seq.serialize_element(&[z.re, z.im])?;
        }
        seq.end()
    }
}

pub type Pair = [f64; 2];

fn to_pairs(v: &[C64]) -> Vec<Pair> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn from_pairs(v: &[Pair]) -> Vec<C64> {
    v.iter().map(|p| C64::new(p[0], p[1])).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixEntry {
    pub kind: CongruenceKind,
    pub entries: Vec<Pair>,
}

/// `{"m": int, "matrices": [{"kind": "hermitian"|"transpose", "entries": [[re, im], ...]}]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSetFile {
    pub m: usize,
    pub matrices: Vec<MatrixEntry>,
    /// Free-form record of how the matrices were produced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl MatrixSetFile {
    pub fn from_matrices(items: &[TaggedMatrix], provenance: Option<serde_json::Value>) -> Self {
        MatrixSetFile {
            m: items.first().map_or(0, |t| t.dim()),
            matrices: items
                .iter()
                .map(|t| MatrixEntry {
                    kind: t.kind(),
                    entries: to_pairs(&t.matrix().row_major()),
                })
                .collect(),
            provenance,
        }
    }

    /// Validated set; each matrix must match its kind within `tau`.
    pub fn to_set(&self, tau: f64) -> Result<TaggedMatrixSet> {
        let items = self
            .matrices
            .iter()
            .map(|e| {
                let c = ComplexMatrix::new(self.m, self.m, from_pairs(&e.entries))?;
                TaggedMatrix::with_tolerance(c, e.kind, tau)
            })
            .collect::<Result<Vec<_>>>()?;
        TaggedMatrixSet::new(items)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumEntry {
    pub kind: CongruenceKind,
    pub diagonal: Vec<Pair>,
}

/// `{"m": int, "spectra": [{"kind": ..., "diagonal": [[re, im], ...]}]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraFile {
    pub m: usize,
    pub spectra: Vec<SpectrumEntry>,
}

/// Transpose-kind and Hermitian-kind stacks; a kind without entries is `None`.
pub type StackPair = (Option<DiagonalStack>, Option<DiagonalStack>);

impl SpectraFile {
    pub fn from_stacks(sym: Option<&DiagonalStack>, herm: Option<&DiagonalStack>) -> Self {
        let m = sym.or(herm).map_or(0, |s| s.dim());
        let spectra = sym
            .into_iter()
            .chain(herm)
            .flat_map(|s| {
                s.spectra().iter().map(move |d| SpectrumEntry {
                    kind: s.kind(),
                    diagonal: to_pairs(d),
                })
            })
            .collect();
        SpectraFile { m, spectra }
    }

    pub fn to_stacks(&self) -> Result<StackPair> {
        if self.spectra.is_empty() {
            return Err(NujdError::Empty("spectra"));
        }
        let collect = |kind: CongruenceKind| -> Result<Option<DiagonalStack>> {
            let spectra: Vec<Vec<C64>> = self
                .spectra
                .iter()
                .filter(|e| e.kind == kind)
                .map(|e| {
                    if e.diagonal.len() != self.m {
                        return Err(NujdError::DimensionMismatch {
                            expected: self.m,
                            found: e.diagonal.len(),
                        });
                    }
                    Ok(from_pairs(&e.diagonal))
                })
                .collect::<Result<_>>()?;
            if spectra.is_empty() {
                return Ok(None);
            }
            DiagonalStack::new(kind, spectra).map(Some)
        };
        Ok((collect(CongruenceKind::Transpose)?, collect(CongruenceKind::Hermitian)?))
    }
}

/// Splits a diagonal matrix set into spectra stacks, or `None` when some
/// matrix is not diagonal within `tau`.
pub fn diagonal_stacks(set: &TaggedMatrixSet, tau: f64) -> Result<Option<StackPair>> {
    if set.items().iter().any(|t| t.matrix().diagonality_deviation() > tau) {
        return Ok(None);
    }
    let build = |kind: CongruenceKind| -> Result<Option<DiagonalStack>> {
        let spectra: Vec<Vec<C64>> = set.of_kind(kind).map(|t| t.matrix().diagonal_entries()).collect();
        if spectra.is_empty() {
            return Ok(None);
        }
        match DiagonalStack::new(kind, spectra) {
            Err(NujdError::ZeroStack) => Ok(None),
            r => r.map(Some),
        }
    };
    Ok(Some((
        build(CongruenceKind::Transpose)?,
        build(CongruenceKind::Hermitian)?,
    )))
}

/// `{"m": int, "T": int, "channels": [[[re, im], ...], ...], "truth"?: {...}}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalFile {
    pub m: usize,
    #[serde(rename = "T")]
    pub samples: usize,
    pub channels: Vec<Vec<Pair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<serde_json::Value>,
}

impl SignalFile {
    pub fn from_block(w: &SignalBlock, truth: Option<serde_json::Value>) -> Self {
        SignalFile {
            m: w.channels(),
            samples: w.samples(),
            channels: w.data().iter().map(|c| to_pairs(c)).collect(),
            truth,
        }
    }

    pub fn to_block(&self) -> Result<SignalBlock> {
        if self.channels.len() != self.m {
            return Err(NujdError::DimensionMismatch {
                expected: self.m,
                found: self.channels.len(),
            });
        }
        if let Some(c) = self.channels.iter().find(|c| c.len() != self.samples) {
            return Err(NujdError::DimensionMismatch {
                expected: self.samples,
                found: c.len(),
            });
        }
        SignalBlock::new(self.channels.iter().map(|c| from_pairs(c)).collect())
    }
}

/// Matrix-set or spectra input, told apart by their top-level keys.
#[derive(Clone, Debug, PartialEq)]
pub enum CheckInput {
    MatrixSet(MatrixSetFile),
    Spectra(SpectraFile),
}

/// Parses a check input from JSON text.
pub fn parse_check_input(text: &str) -> Result<CheckInput> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("spectra").is_some() {
        Ok(CheckInput::Spectra(serde_json::from_value(value)?))
    } else if value.get("matrices").is_some() {
        Ok(CheckInput::MatrixSet(serde_json::from_value(value)?))
    } else {
        Err(NujdError::InvalidArgument(
            "expected a matrix-set file (\"matrices\") or a spectra file (\"spectra\")".into(),
        ))
    }
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json(&std::fs::read_to_string(path)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Default tolerance for kind validation of file inputs.
pub const FILE_TOLERANCE: f64 = tol::SYM;

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn matrix_set_round_trip() {
        let h = TaggedMatrix::hermitian(
            ComplexMatrix::new(2, 2, vec![c(2.0, 0.0), c(0.1, 0.3), c(0.1, -0.3), c(1.0 / 3.0, 0.0)]).unwrap(),
        )
        .unwrap();
        let t = TaggedMatrix::transpose(
            ComplexMatrix::new(
                2,
                2,
                vec![c(1.0, 1.0), c(0.7, 0.0), c(0.7, 0.0), c(std::f64::consts::PI, -1e-300)],
            )
            .unwrap(),
        )
        .unwrap();
        let file = MatrixSetFile::from_matrices(&[h.clone(), t.clone()], None);
        let text = to_json(&file).unwrap();
        let back: MatrixSetFile = from_json(&text).unwrap();
        assert_eq!(to_json(&back).unwrap(), text);
        let set = back.to_set(FILE_TOLERANCE).unwrap();
        assert_eq!(set.items(), &[h, t]);
    }

    #[test]
    fn json_errors_carry_position() {
        let err = from_json::<MatrixSetFile>("{\n  \"m\": 2,\n  \"matrices\": [ oops ]\n}").unwrap_err();
        match err {
            NujdError::Json { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spectra_round_trip() {
        let text = r#"{"m": 2, "spectra": [{"kind": "hermitian", "diagonal": [[1, 0], [2, 0]]}, {"kind": "transpose", "diagonal": [[1, 1], [0, 2]]}]}"#;
        let CheckInput::Spectra(f) = parse_check_input(text).unwrap() else {
            panic!("expected spectra")
        };
        let (sym, herm) = f.to_stacks().unwrap();
        assert_eq!(sym.as_ref().unwrap().count(), 1);
        assert_eq!(herm.as_ref().unwrap().spectra()[0][1], c(2.0, 0.0));
        let again = SpectraFile::from_stacks(sym.as_ref(), herm.as_ref());
        assert_eq!(again.to_stacks().unwrap(), (sym, herm));
    }

    #[test]
    fn signal_round_trip() {
        let w = SignalBlock::new(vec![vec![c(1.0, 2.0), c(0.5, -0.25)], vec![c(0.0, 0.0), c(1e-17, 3.0)]]).unwrap();
        let f = SignalFile::from_block(&w, None);
        let text = to_json(&f).unwrap();
        assert!(text.contains("\"T\": 2"));
        assert_eq!(from_json::<SignalFile>(&text).unwrap().to_block().unwrap(), w);
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}

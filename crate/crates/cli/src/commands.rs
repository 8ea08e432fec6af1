use std::path::Path;

use anyhow::{anyhow, Context};
use nujd::io::{self, CheckInput, MatrixSetFile, SignalFile, StackPair};
use nujd::parallel;
use nujd::simulation::{self, ExperimentConfig, Part, StatisticSpec};
use nujd::solvers;
use nujd::statistics::ConjugationPattern;
use nujd::uniqueness::{self, CertifyOptions, UniquenessReport};
use nujd::{offdiag_residual, CongruenceKind, DiagonalStack, GlElement, NujdError, TaggedMatrix};
use serde_json::json;

use crate::{Cli, Command, EstimateArgs, GlobalOpts, Method};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NOT_UNIQUE: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

/// Residual tolerance for `solve` when `--tol` is absent.
const SOLVE_TOL: f64 = 1e-8;
/// Off-diagonal residual accepted when reducing a non-diagonal set for `check`.
const REDUCE_TOL: f64 = 1e-6;

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure::new(EXIT_ERROR, error)
    }
}

impl From<NujdError> for Failure {
    fn from(error: NujdError) -> Self {
        Failure::new(EXIT_ERROR, error)
    }
}

type CmdResult = Result<u8, Failure>;

pub fn run(cli: Cli) -> CmdResult {
    let threads = parallel::configure_threads()?;
    log::debug!("{threads} worker threads");
    match cli.command {
        Command::Check { file } => check(&file, &cli.global),
        Command::Solve { file, method, out } => solve(&file, method, out.as_deref(), &cli.global),
        Command::Estimate(args) => estimate(&args),
        Command::Simulate { config, out } => simulate(&config, out.as_deref(), &cli.global),
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Variant name of an error, e.g. `SingularPseudoCovariance`.
fn error_name(e: &NujdError) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or_default()
        .to_string()
}

fn named(e: NujdError) -> anyhow::Error {
    anyhow!("{}: {e}", error_name(&e))
}

fn check(file: &Path, global: &GlobalOpts) -> CmdResult {
    let text = read_text(file)?;
    let opts = global
        .tol
        .map_or_else(CertifyOptions::default, CertifyOptions::with_tol);
    let report = match io::parse_check_input(&text).with_context(|| format!("parsing {}", file.display()))? {
        CheckInput::Spectra(f) => certify(&f.to_stacks()?, None, opts)?,
        CheckInput::MatrixSet(f) => {
            let set = f.to_set(io::FILE_TOLERANCE)?;
            match io::diagonal_stacks(&set, io::FILE_TOLERANCE)? {
                Some(stacks) => certify(&stacks, None, opts)?,
                None => {
                    let x = solvers::reducing_transform(&set, REDUCE_TOL).map_err(named)?;
                    let reduced: Vec<TaggedMatrix> = set
                        .items()
                        .iter()
                        .map(|c| nujd::apply_congruence(&x, c))
                        .collect::<nujd::Result<_>>()?;
                    certify(&spectra_of(&reduced)?, Some(&x), opts)?
                }
            }
        }
    };
    print!("{}", io::to_json(&report)?);
    Ok(if report.is_unique() { EXIT_OK } else { EXIT_NOT_UNIQUE })
}

fn certify(stacks: &StackPair, reducer: Option<&GlElement>, opts: CertifyOptions) -> nujd::Result<UniquenessReport> {
    let mut report = uniqueness::identifiability_master(stacks.0.as_ref(), stacks.1.as_ref(), opts)?;
    if let (Some(x), Some(w)) = (reducer, report.witness.as_ref()) {
        let composed = x.matrix().matmul(w.matrix())?;
        report.witness = Some(GlElement::new(composed)?);
    }
    Ok(report)
}

fn spectra_of(reduced: &[TaggedMatrix]) -> nujd::Result<StackPair> {
    let build = |kind: CongruenceKind| -> nujd::Result<Option<DiagonalStack>> {
        let spectra: Vec<Vec<nujd::C64>> = reduced
            .iter()
            .filter(|t| t.kind() == kind)
            .map(|t| {
                let d = t.matrix().diagonal_entries();
                match kind {
                    CongruenceKind::Hermitian => d.iter().map(|z| nujd::C64::new(z.re, 0.0)).collect(),
                    CongruenceKind::Transpose => d,
                }
            })
            .collect();
        if spectra.is_empty() {
            return Ok(None);
        }
        match DiagonalStack::new(kind, spectra) {
            Err(NujdError::ZeroStack) => Ok(None),
            r => r.map(Some),
        }
    };
    Ok((build(CongruenceKind::Transpose)?, build(CongruenceKind::Hermitian)?))
}

fn solve(file: &Path, method: Method, out: Option<&Path>, global: &GlobalOpts) -> CmdResult {
    let text = read_text(file)?;
    let parsed: MatrixSetFile = io::from_json(&text).with_context(|| format!("parsing {}", file.display()))?;
    let set = parsed.to_set(io::FILE_TOLERANCE)?;
    let tol = global.tol.unwrap_or(SOLVE_TOL);
    let items = set.items();
    let usage = |msg: &str| Failure::new(EXIT_USAGE, anyhow!("{msg}"));
    let numeric = |e: NujdError| Failure::new(EXIT_NUMERIC, named(e));

    let (body, ok) = match method {
        Method::Put | Method::Sut => {
            let herm: Vec<&TaggedMatrix> = set.of_kind(CongruenceKind::Hermitian).collect();
            let sym: Vec<&TaggedMatrix> = set.of_kind(CongruenceKind::Transpose).collect();
            let ([h], [s]) = (herm.as_slice(), sym.as_slice()) else {
                return Err(usage(
                    "put and sut need exactly one Hermitian-kind and one transpose-kind matrix",
                ));
            };
            let result = if method == Method::Put {
                solvers::put(h, s)
            } else {
                solvers::sut(h, s)
            }
            .map_err(numeric)?;
            let defects = result.defects(h, s);
            let residual = offdiag_residual(&set, &result.x)?;
            let ok = defects.pseudo <= tol * h.dim() as f64 && defects.hermitian <= tol;
            let mut body = serde_json::to_value(&result).map_err(NujdError::from)?;
            body["residuals"] = json!({
                "offdiag": residual,
                "pseudo_whitening": defects.pseudo,
                "hermitian_offdiag": defects.hermitian,
            });
            (body, ok)
        }
        Method::Gevd => {
            let [a, b] = items else {
                return Err(usage("gevd needs exactly two matrices"));
            };
            if a.kind() != b.kind() {
                return Err(usage("gevd needs two matrices of the same kind"));
            }
            let x = solvers::two_matrix_same_kind(a, b).map_err(numeric)?;
            let lambda: Vec<nujd::C64> = items
                .iter()
                .map(|c| nujd::apply_congruence(&x, c).map(|t| t.matrix().diagonal_entries()))
                .collect::<nujd::Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            let residual = offdiag_residual(&set, &x)?;
            let body = json!({
                "x": serde_json::to_value(io::MatrixEntries(x.matrix())).map_err(NujdError::from)?,
                "lambda": serde_json::to_value(io::ComplexList(&lambda)).map_err(NujdError::from)?,
                "residuals": { "offdiag": residual },
            });
            (body, residual <= tol)
        }
    };

    let mut doc = json!({
        "input_sha256": io::sha256_hex(text.as_bytes()),
        "method": format!("{method:?}").to_lowercase(),
        "tol": tol,
    });
    if let (Some(d), Some(b)) = (doc.as_object_mut(), body.as_object()) {
        d.extend(b.clone());
    }
    emit(&io::to_json(&doc)?, out)?;
    if ok {
        Ok(EXIT_OK)
    } else {
        Err(Failure::new(EXIT_NUMERIC, anyhow!("residual above tolerance {tol:e}")))
    }
}

fn one_based(s: &str, what: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            let v: usize = t
                .trim()
                .parse()
                .with_context(|| format!("{what}: cannot parse {t:?}"))?;
            v.checked_sub(1).ok_or_else(|| anyhow!("{what} are 1-based, got 0"))
        })
        .collect()
}

/// Statistic recipe from the flags, in flag-group order.
pub fn recipe(args: &EstimateArgs) -> anyhow::Result<Vec<StatisticSpec>> {
    let mut specs = Vec::new();
    if args.cov {
        specs.push(StatisticSpec::Covariance);
    }
    if args.pseudocov {
        specs.push(StatisticSpec::PseudoCovariance);
    }
    for &lag in &args.lags {
        specs.push(StatisticSpec::Autocorrelation {
            lag,
            part: Part::Hermitian,
        });
        specs.push(StatisticSpec::PseudoAutocorrelation { lag });
    }
    for w in &args.windows {
        let (s, l) = w.split_once(':').ok_or_else(|| anyhow!("window {w:?} is not S:L"))?;
        let start: usize = s.trim().parse().with_context(|| format!("window start {s:?}"))?;
        let len: usize = l.trim().parse().with_context(|| format!("window length {l:?}"))?;
        let start = start
            .checked_sub(1)
            .ok_or_else(|| anyhow!("window start is 1-based, got 0"))?;
        specs.push(StatisticSpec::Window { start, len });
    }
    for group in args.cum4.chunks(3) {
        let [pattern, axes, fixed] = group else {
            return Err(anyhow!("--cum4 takes PATTERN AXES FIXED"));
        };
        let pat = ConjugationPattern::parse(pattern)?;
        if pat.order() != 4 {
            return Err(anyhow!("--cum4 pattern must have four bits, got {pattern:?}"));
        }
        let ax = one_based(axes, "axes")?;
        let [p, q] = ax[..] else {
            return Err(anyhow!("axes must be two positions \"p,q\", got {axes:?}"));
        };
        let fixed = one_based(fixed, "fixed channels")?;
        let push = |part| StatisticSpec::Cumulant {
            pattern: pattern.clone(),
            axes: [p, q],
            fixed: fixed.clone(),
            part,
        };
        let hermitian_kind = p < 4 && q < 4 && pat.slice_kind(p, q) == CongruenceKind::Hermitian;
        specs.push(push(Part::Hermitian));
        if hermitian_kind {
            specs.push(push(Part::Skew));
        }
    }
    if specs.is_empty() {
        return Err(anyhow!(
            "empty recipe: pass at least one of --cov, --pseudocov, --lag, --window, --cum4"
        ));
    }
    Ok(specs)
}

fn estimate(args: &EstimateArgs) -> CmdResult {
    let specs = recipe(args)?;
    let text = read_text(&args.signal)?;
    let signal: SignalFile = io::from_json(&text).with_context(|| format!("parsing {}", args.signal.display()))?;
    let w = signal.to_block()?;
    let matrices = specs.iter().map(|s| s.estimate(&w)).collect::<nujd::Result<Vec<_>>>()?;
    let provenance = json!({
        "signal_sha256": io::sha256_hex(text.as_bytes()),
        "T": w.samples(),
        "recipe": specs,
    });
    let file = MatrixSetFile::from_matrices(&matrices, Some(provenance));
    emit(&io::to_json(&file)?, args.out.as_deref())?;
    Ok(EXIT_OK)
}

fn simulate(path: &Path, out: Option<&Path>, global: &GlobalOpts) -> CmdResult {
    let text = read_text(path)?;
    let mut config: ExperimentConfig = io::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(margin) = global.margin {
        config.margin = margin;
    }
    let report = simulation::run_experiment(&config)?;
    emit(&io::to_json(&report)?, out)?;
    if report.all_completed() {
        Ok(EXIT_OK)
    } else {
        Err(Failure::new(
            EXIT_ERROR,
            anyhow!("{} of {} trials failed", report.summary.failed, config.trials),
        ))
    }
}

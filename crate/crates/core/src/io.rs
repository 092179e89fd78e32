//! Text file formats and atomic output.
//!
//! Every format starts with a versioned header line:
//!
//! | tag | header | body |
//! |-----|--------|------|
//! | sub-patch logits | `VSL 1 <T> <K>` | T rows of K values |
//! | ensemble logits | `VSE 1 <M> <K>` | M rows of K values |
//! | dataset | `VSD 1 <N> <T> <d> <K>` | per sample, a label line then T rows of d values |
//! | model | `VSM 1 <K> <d>` | K weight rows of d values, then one row of K biases |
//!
//! Values are written with 17 significant digits, so a write followed by a
//! read reproduces every `f64` exactly. Line numbers in errors are 1-based.

use std::fs;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::ReliabilityBin;
use crate::synth::{EpochLog, PatchClassifier, SynthSample};
use crate::types::{EnsembleLogits, LogitMatrix, Matrix};

/// Contents of a logits file, by header tag.
#[derive(Debug, Clone, PartialEq)]
pub enum LogitFile {
    SubPatch(LogitMatrix<f64>),
    Ensemble(EnsembleLogits<f64>),
}

/// A labelled dataset together with its declared class count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub classes: usize,
    pub samples: Vec<SynthSample>,
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

fn push_row(out: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&format!("{v:.16e}"));
    }
    out.push('\n');
}

fn push_matrix(out: &mut String, m: &Matrix<f64>) {
    for row in m.iter_rows() {
        push_row(out, row);
    }
}

/// Line cursor that remembers where it is for error messages.
struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    /// Number of the line most recently returned, or about to be missing.
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Self {
            path,
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    fn next_line(&mut self, what: &str) -> Result<&'a str> {
        self.line += 1;
        match self.inner.next() {
            Some((_, l)) => Ok(l),
            None => Err(Error::RowCountMismatch {
                path: self.path.to_path_buf(),
                line: self.line,
                reason: format!("file ended where {what} was expected"),
            }),
        }
    }

    fn finish(mut self) -> Result<()> {
        for (i, l) in self.inner.by_ref() {
            if !l.trim().is_empty() {
                return Err(Error::RowCountMismatch {
                    path: self.path.to_path_buf(),
                    line: i + 1,
                    reason: "more rows than the header declares".into(),
                });
            }
        }
        Ok(())
    }

    fn values(&mut self, expected: usize, what: &str, out: &mut Vec<f64>) -> Result<()> {
        let line = self.next_line(what)?;
        let before = out.len();
        for token in line.split_whitespace() {
            match token.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ => {
                    return Err(Error::NonFiniteValue {
                        path: self.path.to_path_buf(),
                        line: self.line,
                        token: token.to_string(),
                    })
                }
            }
        }
        let found = out.len() - before;
        if found != expected {
            return Err(Error::RowCountMismatch {
                path: self.path.to_path_buf(),
                line: self.line,
                reason: format!("{what} has {found} values, expected {expected}"),
            });
        }
        Ok(())
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<Matrix<f64>> {
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            self.values(cols, what, &mut values)?;
        }
        Matrix::new(rows, cols, values)
    }
}

/// Parses `TAG 1 <n>...` and returns the tag and the dimensions.
fn parse_header(path: &Path, line: Option<&str>) -> Result<(String, Vec<usize>)> {
    let bad = |reason: String| Error::MalformedHeader {
        path: path.to_path_buf(),
        line: 1,
        reason,
    };
    let line = line.ok_or_else(|| bad("file is empty".into()))?;
    let mut tokens = line.split_whitespace();
    let tag = tokens
        .next()
        .ok_or_else(|| bad("header line is blank".into()))?;
    let dims_expected = match tag {
        "VSL" | "VSE" | "VSM" => 2,
        "VSD" => 4,
        other => return Err(bad(format!("unknown format tag {other:?}"))),
    };
    match tokens.next() {
        Some("1") => {}
        Some(v) => return Err(bad(format!("unsupported version {v:?}"))),
        None => return Err(bad("missing version".into())),
    }
    let dims = tokens
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| bad(format!("dimension {t:?} is not a count")))
        })
        .collect::<Result<Vec<_>>>()?;
    if dims.len() != dims_expected {
        return Err(bad(format!(
            "{tag} header needs {dims_expected} dimensions, got {}",
            dims.len()
        )));
    }
    Ok((tag.to_string(), dims))
}

fn expect_tag(path: &Path, tag: &str, wanted: &[&str]) -> Result<()> {
    if wanted.contains(&tag) {
        Ok(())
    } else {
        Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("expected {}, found {tag}", wanted.join(" or ")),
        })
    }
}

/// Header tag of a file: `VSL`, `VSE`, `VSD` or `VSM`.
pub fn peek_format(path: &Path) -> Result<String> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut first = String::new();
    BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    let line = (!first.is_empty()).then_some(first.as_str());
    parse_header(path, line).map(|(tag, _)| tag)
}

pub fn read_logits(path: &Path) -> Result<LogitFile> {
    let text = read_text(path)?;
    parse_logits(path, &text)
}

/// [`read_logits`] on text already in memory; `path` only labels errors.
pub fn parse_logits(path: &Path, text: &str) -> Result<LogitFile> {
    let mut lines = Lines::new(path, text);
    let (tag, dims) = parse_header(path, lines.next_line("header").ok())?;
    expect_tag(path, &tag, &["VSL", "VSE"])?;
    let m = lines.matrix(dims[0], dims[1], "logit row")?;
    lines.finish()?;
    Ok(match tag.as_str() {
        "VSL" => LogitFile::SubPatch(LogitMatrix::new(m)?),
        _ => LogitFile::Ensemble(EnsembleLogits::new(m)?),
    })
}

pub fn format_logits(logits: &LogitMatrix<f64>) -> String {
    let mut out = format!("VSL 1 {} {}\n", logits.rows(), logits.classes());
    push_matrix(&mut out, logits.matrix());
    out
}

pub fn format_ensemble(logits: &EnsembleLogits<f64>) -> String {
    let mut out = format!("VSE 1 {} {}\n", logits.rows(), logits.classes());
    push_matrix(&mut out, logits.matrix());
    out
}

pub fn write_logits(path: &Path, logits: &LogitMatrix<f64>) -> Result<()> {
    write_atomic(path, format_logits(logits).as_bytes())
}

pub fn write_ensemble(path: &Path, logits: &EnsembleLogits<f64>) -> Result<()> {
    write_atomic(path, format_ensemble(logits).as_bytes())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = read_text(path)?;
    parse_dataset(path, &text)
}

pub fn parse_dataset(path: &Path, text: &str) -> Result<Dataset> {
    let mut lines = Lines::new(path, text);
    let (tag, dims) = parse_header(path, lines.next_line("header").ok())?;
    expect_tag(path, &tag, &["VSD"])?;
    let [n, t, d, k] = [dims[0], dims[1], dims[2], dims[3]];
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let raw = lines.next_line("label line")?;
        let label = raw
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::RowCountMismatch {
                path: path.to_path_buf(),
                line: lines.line,
                reason: format!("expected a label, found {raw:?}"),
            })?;
        if label >= k {
            return Err(Error::InvalidLabel { label, classes: k });
        }
        let patches = lines.matrix(t, d, "patch row")?;
        samples.push(SynthSample { patches, label });
    }
    lines.finish()?;
    Ok(Dataset {
        classes: k,
        samples,
    })
}

pub fn format_dataset(dataset: &Dataset) -> Result<String> {
    let first = dataset.samples.first().ok_or(Error::EmptyDataset)?;
    let (t, d) = (first.patches.rows(), first.patches.cols());
    let mut out = format!(
        "VSD 1 {} {t} {d} {}\n",
        dataset.samples.len(),
        dataset.classes
    );
    for s in &dataset.samples {
        if s.patches.rows() != t || s.patches.cols() != d {
            return Err(Error::ShapeError(format!(
                "sample of shape {}x{} in a {t}x{d} dataset",
                s.patches.rows(),
                s.patches.cols()
            )));
        }
        if s.label >= dataset.classes {
            return Err(Error::InvalidLabel {
                label: s.label,
                classes: dataset.classes,
            });
        }
        out.push_str(&format!("{}\n", s.label));
        push_matrix(&mut out, &s.patches);
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    write_atomic(path, format_dataset(dataset)?.as_bytes())
}

pub fn read_model(path: &Path) -> Result<PatchClassifier> {
    let text = read_text(path)?;
    parse_model(path, &text)
}

pub fn parse_model(path: &Path, text: &str) -> Result<PatchClassifier> {
    let mut lines = Lines::new(path, text);
    let (tag, dims) = parse_header(path, lines.next_line("header").ok())?;
    expect_tag(path, &tag, &["VSM"])?;
    let (k, d) = (dims[0], dims[1]);
    let weights = lines.matrix(k, d, "weight row")?;
    let mut bias = Vec::with_capacity(k);
    lines.values(k, "bias row", &mut bias)?;
    lines.finish()?;
    PatchClassifier::new(weights, bias)
}

pub fn format_model(model: &PatchClassifier) -> String {
    let mut out = format!("VSM 1 {} {}\n", model.weights.rows(), model.weights.cols());
    push_matrix(&mut out, &model.weights);
    push_row(&mut out, &model.bias);
    out
}

pub fn write_model(path: &Path, model: &PatchClassifier) -> Result<()> {
    write_atomic(path, format_model(model).as_bytes())
}

/// One non-negative integer label per non-blank line.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        labels.push(line.parse::<usize>().map_err(|_| Error::NonFiniteValue {
            path: path.to_path_buf(),
            line: i + 1,
            token: line.to_string(),
        })?);
    }
    Ok(labels)
}

pub const BINS_CSV_HEADER: &str = "bin_lo,bin_hi,count,mean_conf,accuracy";

/// Reliability bins as CSV; empty bins leave the last two fields blank.
pub fn bins_csv(bins: &[ReliabilityBin<f64>]) -> String {
    let mut out = format!("{BINS_CSV_HEADER}\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for b in bins {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            b.lo,
            b.hi,
            b.count,
            opt(b.mean_confidence),
            opt(b.empirical_accuracy)
        ));
    }
    out
}

pub fn training_log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,loss,accuracy\n");
    for e in log {
        out.push_str(&format!(
            "{},{:.16e},{:.16e}\n",
            e.epoch, e.loss, e.accuracy
        ));
    }
    out
}

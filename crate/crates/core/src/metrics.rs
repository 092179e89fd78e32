//! Calibration and uncertainty metrics.
//!
//! Entropies are in nats. Confidence is the probability of the most likely
//! class. Reliability bins are half-open `[lo, hi)` with confidence 1.0
//! clamped into the top bin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{compensated_mean, CompensatedSum, Real};
use crate::types::ProbVector;

/// One confidence bin of a reliability diagram.
///
/// `mean_confidence` and `empirical_accuracy` are `None` for empty bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin<R = f64> {
    pub lo: R,
    pub hi: R,
    pub count: usize,
    pub mean_confidence: Option<R>,
    pub empirical_accuracy: Option<R>,
}

/// Everything reported for one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport<R = f64> {
    pub n: usize,
    pub accuracy: R,
    pub ece: R,
    pub brier: R,
    pub mean_entropy: R,
    pub mean_kl_to_uniform: R,
    /// Always `"nats"`.
    pub entropy_unit: String,
    pub bins: Vec<ReliabilityBin<R>>,
}

/// Shannon entropy `−Σ p_k ln p_k`, with `0 ln 0 = 0`.
pub fn predictive_entropy<R: Real>(p: &ProbVector<R>) -> R {
    let mut acc = CompensatedSum::new();
    for &pk in p.as_slice() {
        if pk > R::zero() {
            acc.add(-pk * pk.ln());
        }
    }
    acc.value().max(R::zero())
}

/// `D_KL(p ‖ uniform) = ln K − H(p)`.
pub fn kl_to_uniform<R: Real>(p: &ProbVector<R>) -> R {
    let ln_k = R::of_usize(p.classes()).ln();
    (ln_k - predictive_entropy(p)).max(R::zero())
}

fn check_label(label: usize, classes: usize) -> Result<()> {
    if label >= classes {
        return Err(Error::InvalidLabel { label, classes });
    }
    Ok(())
}

/// Multi-class Brier score `Σ_k (p_k − 1[k = label])²`, in `[0, 2]`.
pub fn brier<R: Real>(p: &ProbVector<R>, label: usize) -> Result<R> {
    check_label(label, p.classes())?;
    let mut acc = CompensatedSum::new();
    for (k, &pk) in p.as_slice().iter().enumerate() {
        let d = if k == label { pk - R::one() } else { pk };
        acc.add(d * d);
    }
    Ok(acc.value())
}

/// `−ln softmax(logits)[label]`, evaluated as log-sum-exp minus the logit.
pub fn cross_entropy<R: Real>(logits: &[R], label: usize) -> Result<R> {
    check_label(label, logits.len())?;
    if let Some(index) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidLogits { index });
    }
    let max = logits.iter().copied().fold(R::neg_infinity(), R::max);
    let mut acc = CompensatedSum::new();
    for &z in logits {
        acc.add((z - max).exp());
    }
    // ln Σ exp(z − max) ≥ 0 since the maximum contributes exp(0) = 1.
    Ok((acc.value().ln() + (max - logits[label])).max(R::zero()))
}

fn check_lists<R: Real>(
    predictions: &[ProbVector<R>],
    labels: &[usize],
    n_bins: usize,
) -> Result<()> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if n_bins < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 bins, got {n_bins}"
        )));
    }
    for (p, &y) in predictions.iter().zip(labels) {
        check_label(y, p.classes())?;
    }
    Ok(())
}

/// Bin index of a confidence value: `floor(conf · n_bins)`, top bin clamped.
pub fn bin_index<R: Real>(confidence: R, n_bins: usize) -> usize {
    let raw = (confidence * R::of_usize(n_bins))
        .floor()
        .to_usize()
        .unwrap_or(0);
    raw.min(n_bins - 1)
}

struct BinAccumulator<R> {
    count: usize,
    confidence: CompensatedSum<R>,
    correct: usize,
}

fn accumulate<R: Real>(
    predictions: &[ProbVector<R>],
    labels: &[usize],
    n_bins: usize,
) -> Vec<BinAccumulator<R>> {
    let mut bins: Vec<BinAccumulator<R>> = (0..n_bins)
        .map(|_| BinAccumulator {
            count: 0,
            confidence: CompensatedSum::new(),
            correct: 0,
        })
        .collect();
    for (p, &y) in predictions.iter().zip(labels) {
        let conf = p.confidence();
        let bin = &mut bins[bin_index(conf, n_bins)];
        bin.count += 1;
        bin.confidence.add(conf);
        bin.correct += usize::from(p.argmax() == y);
    }
    bins
}

/// Partitions predictions into `n_bins` equal-width confidence bins.
pub fn reliability_bins<R: Real>(
    predictions: &[ProbVector<R>],
    labels: &[usize],
    n_bins: usize,
) -> Result<Vec<ReliabilityBin<R>>> {
    check_lists(predictions, labels, n_bins)?;
    let width = R::of_usize(n_bins);
    Ok(accumulate(predictions, labels, n_bins)
        .into_iter()
        .enumerate()
        .map(|(b, acc)| {
            let n = R::of_usize(acc.count);
            let filled = acc.count > 0;
            ReliabilityBin {
                lo: R::of_usize(b) / width,
                hi: R::of_usize(b + 1) / width,
                count: acc.count,
                mean_confidence: filled.then(|| acc.confidence.value() / n),
                empirical_accuracy: filled.then(|| R::of_usize(acc.correct) / n),
            }
        })
        .collect())
}

fn ece_from_bins<R: Real>(bins: &[ReliabilityBin<R>], n: usize) -> R {
    let total = R::of_usize(n);
    let mut acc = CompensatedSum::new();
    for bin in bins {
        if let (Some(conf), Some(accuracy)) = (bin.mean_confidence, bin.empirical_accuracy) {
            acc.add(R::of_usize(bin.count) / total * (accuracy - conf).abs());
        }
    }
    acc.value()
}

/// Expected calibration error: count-weighted mean |accuracy − confidence|
/// over non-empty bins.
pub fn ece<R: Real>(predictions: &[ProbVector<R>], labels: &[usize], n_bins: usize) -> Result<R> {
    if predictions.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let bins = reliability_bins(predictions, labels, n_bins)?;
    Ok(ece_from_bins(&bins, predictions.len()))
}

/// Fraction of predictions whose argmax equals the label.
pub fn accuracy<R: Real>(predictions: &[ProbVector<R>], labels: &[usize]) -> Result<R> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, &y)| p.argmax() == y)
        .count();
    Ok(R::of_usize(correct) / R::of_usize(predictions.len()))
}

/// Computes every report quantity for one set of predictions.
pub fn evaluate<R: Real>(
    predictions: &[ProbVector<R>],
    labels: &[usize],
    n_bins: usize,
) -> Result<CalibrationReport<R>> {
    if predictions.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let bins = reliability_bins(predictions, labels, n_bins)?;
    let n = predictions.len();
    let brier_scores = predictions
        .iter()
        .zip(labels)
        .map(|(p, &y)| brier(p, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationReport {
        n,
        accuracy: accuracy(predictions, labels)?,
        ece: ece_from_bins(&bins, n),
        brier: compensated_mean(brier_scores).expect("non-empty"),
        mean_entropy: compensated_mean(predictions.iter().map(predictive_entropy))
            .expect("non-empty"),
        mean_kl_to_uniform: compensated_mean(predictions.iter().map(kl_to_uniform))
            .expect("non-empty"),
        entropy_unit: "nats".to_string(),
        bins,
    })
}

//! Synthetic "informative sub-patches" task and a per-patch linear classifier.
//!
//! Every sample is a `T × d` matrix of sub-patches. Most patches carry a
//! scaled class prototype plus Gaussian noise; the rest carry noise only,
//! like a silent stretch of audio. The classifier scores each patch
//! separately (`z_t = W x_t + b`), so it emits genuine sub-patch logits, and
//! is trained on the softmax cross-entropy of the mean-pooled logits.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::cross_entropy;
use crate::real::{argmax, compensated_mean};
use crate::seed;
use crate::types::{softmax, EnsembleLogits, LogitMatrix, Matrix};

/// Maximum pairwise cosine similarity allowed between class prototypes.
pub const MAX_PROTOTYPE_COSINE: f64 = 0.9;

/// Standard deviation of the random weight initialisation.
pub const INIT_SCALE: f64 = 2.0;

/// Anything that maps a sample's sub-patches to sub-patch logits.
pub trait LogitProducer: Sync {
    fn sub_patch_logits(&self, patches: &Matrix<f64>) -> Result<LogitMatrix<f64>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    /// `T × d`, one row per sub-patch.
    pub patches: Matrix<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthDatasetSpec {
    pub n_samples: usize,
    pub classes: usize,
    pub patches: usize,
    pub dim: usize,
    pub signal_strength: f64,
    pub patch_noise: f64,
    pub informative_fraction: f64,
    pub seed: u64,
}

impl SynthDatasetSpec {
    /// K = 10, T = 8, d = 16, unit signal, unit noise, 75% informative patches.
    pub fn standard(n_samples: usize, seed: u64) -> Self {
        Self {
            n_samples,
            classes: 10,
            patches: 8,
            dim: 16,
            signal_strength: 1.0,
            patch_noise: 1.0,
            informative_fraction: 0.75,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidSpec(m));
        if self.n_samples == 0 || self.dim == 0 {
            return fail(format!(
                "n_samples and dim must be positive, got {} and {}",
                self.n_samples, self.dim
            ));
        }
        if self.classes < 2 || self.patches < 2 {
            return fail(format!(
                "need K >= 2 and T >= 2, got K = {} and T = {}",
                self.classes, self.patches
            ));
        }
        if !(self.signal_strength > 0.0 && self.signal_strength.is_finite()) {
            return fail(format!(
                "signal_strength must be positive, got {}",
                self.signal_strength
            ));
        }
        if !(self.patch_noise >= 0.0 && self.patch_noise.is_finite()) {
            return fail(format!(
                "patch_noise must be non-negative, got {}",
                self.patch_noise
            ));
        }
        if !(self.informative_fraction > 0.0 && self.informative_fraction <= 1.0) {
            return fail(format!(
                "informative_fraction must lie in (0, 1], got {}",
                self.informative_fraction
            ));
        }
        if self.classes > 1 && self.dim == 1 {
            return fail("dim = 1 admits no two distinct unit prototypes with cos < 0.9".into());
        }
        Ok(())
    }

    /// Informative patches per sample: `round(fraction · T)`, at least one.
    pub fn informative_patches(&self) -> usize {
        ((self.informative_fraction * self.patches as f64).round() as usize).clamp(1, self.patches)
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Seeded unit class prototypes whose pairwise cosine is below 0.9.
pub fn class_prototypes(spec: &SynthDatasetSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(spec.seed, "prototypes"));
    let mut prototypes: Vec<Vec<f64>> = Vec::with_capacity(spec.classes);
    let mut attempts = 0usize;
    while prototypes.len() < spec.classes {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::InvalidSpec(format!(
                "could not place {} prototypes in {} dimensions",
                spec.classes, spec.dim
            )));
        }
        let v: Vec<f64> = (0..spec.dim).map(|_| normal(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let v: Vec<f64> = v.into_iter().map(|x| x / norm).collect();
        let too_close = prototypes
            .iter()
            .any(|p| p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() >= MAX_PROTOTYPE_COSINE);
        if !too_close {
            prototypes.push(v);
        }
    }
    Ok(prototypes)
}

/// Draws `spec.n_samples` samples; identical specs give identical datasets.
pub fn generate_dataset(spec: &SynthDatasetSpec) -> Result<Vec<SynthSample>> {
    let prototypes = class_prototypes(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(spec.seed, "samples"));
    let informative = spec.informative_patches();
    let mut order: Vec<usize> = (0..spec.patches).collect();
    let mut samples = Vec::with_capacity(spec.n_samples);
    for _ in 0..spec.n_samples {
        let label = rng.random_range(0..spec.classes);
        order.shuffle(&mut rng);
        let mut patches = Matrix::zeros(spec.patches, spec.dim);
        for (rank, &t) in order.iter().enumerate() {
            let carries_signal = rank < informative;
            for (j, x) in patches.row_mut(t).iter_mut().enumerate() {
                let signal = if carries_signal {
                    spec.signal_strength * prototypes[label][j]
                } else {
                    0.0
                };
                *x = signal + spec.patch_noise * normal(&mut rng);
            }
        }
        samples.push(SynthSample { patches, label });
    }
    Ok(samples)
}

/// Linear classifier applied independently to every sub-patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchClassifier {
    /// `K × d`.
    pub weights: Matrix<f64>,
    pub bias: Vec<f64>,
}

/// Gradient of the mean loss with respect to weights (row-major) and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl PatchClassifier {
    pub fn new(weights: Matrix<f64>, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::ShapeError(format!(
                "bias has {} entries for {} classes",
                bias.len(),
                weights.rows()
            )));
        }
        if weights.rows() < 2 || weights.cols() < 1 {
            return Err(Error::ShapeError(format!(
                "need K >= 2 and d >= 1, got {}x{}",
                weights.rows(),
                weights.cols()
            )));
        }
        if weights
            .as_slice()
            .iter()
            .chain(&bias)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput(
                "classifier parameters must be finite".into(),
            ));
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            weights: Matrix::zeros(classes, dim),
            bias: vec![0.0; classes],
        }
    }

    /// Weights i.i.d. `N(0, INIT_SCALE² / d)`, zero bias.
    pub fn random(classes: usize, dim: usize, seed: u64) -> Self {
        Self::random_with_scale(classes, dim, INIT_SCALE, seed)
    }

    /// Weights i.i.d. `N(0, init_scale² / d)`, zero bias.
    pub fn random_with_scale(classes: usize, dim: usize, init_scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, "init"));
        let scale = init_scale / (dim as f64).sqrt();
        let values = (0..classes * dim)
            .map(|_| scale * normal(&mut rng))
            .collect();
        Self {
            weights: Matrix::new(classes, dim, values).expect("sized"),
            bias: vec![0.0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    /// Same classifier with every logit multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            weights: self.weights.map(|w| factor * w),
            bias: self.bias.iter().map(|b| factor * b).collect(),
        }
    }

    fn logits_of(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter_rows()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b)
            .collect()
    }

    fn check_dim(&self, patches: &Matrix<f64>) -> Result<()> {
        if patches.cols() != self.dim() {
            return Err(Error::ShapeError(format!(
                "patch dimension {} does not match classifier dimension {}",
                patches.cols(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// One logit row per sub-patch: `z_t = W x_t + b`.
    pub fn predict_logits(&self, sample: &SynthSample) -> Result<LogitMatrix<f64>> {
        self.sub_patch_logits(&sample.patches)
    }

    /// Logits of the mean patch, equal to the mean of the sub-patch logits.
    pub fn mean_logits(&self, patches: &Matrix<f64>) -> Result<Vec<f64>> {
        self.check_dim(patches)?;
        Ok(self.logits_of(&crate::types::mean_over_rows(patches)?))
    }

    /// Mean cross-entropy of the mean-pooled logits and its exact gradient.
    pub fn loss_and_gradient(&self, batch: &[&SynthSample]) -> Result<(f64, Gradient)> {
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (k, d) = (self.classes(), self.dim());
        let mut gw = vec![0.0; k * d];
        let mut gb = vec![0.0; k];
        let mut losses = Vec::with_capacity(batch.len());
        let inv_n = 1.0 / batch.len() as f64;
        for sample in batch {
            self.check_dim(&sample.patches)?;
            if sample.label >= k {
                return Err(Error::InvalidLabel {
                    label: sample.label,
                    classes: k,
                });
            }
            let x = crate::types::mean_over_rows(&sample.patches)?;
            let z = self.logits_of(&x);
            losses.push(cross_entropy(&z, sample.label)?);
            let p = softmax(&z)?;
            for c in 0..k {
                let delta = (p[c] - if c == sample.label { 1.0 } else { 0.0 }) * inv_n;
                gb[c] += delta;
                for (g, xj) in gw[c * d..(c + 1) * d].iter_mut().zip(&x) {
                    *g += delta * xj;
                }
            }
        }
        let loss = compensated_mean(losses).expect("non-empty");
        Ok((
            loss,
            Gradient {
                weights: gw,
                bias: gb,
            },
        ))
    }

    fn step(&mut self, gradient: &Gradient, learning_rate: f64) {
        let k = self.classes();
        let d = self.dim();
        for c in 0..k {
            for (w, g) in self
                .weights
                .row_mut(c)
                .iter_mut()
                .zip(&gradient.weights[c * d..(c + 1) * d])
            {
                *w -= learning_rate * g;
            }
            self.bias[c] -= learning_rate * gradient.bias[c];
        }
    }
}

impl LogitProducer for PatchClassifier {
    fn sub_patch_logits(&self, patches: &Matrix<f64>) -> Result<LogitMatrix<f64>> {
        self.check_dim(patches)?;
        let k = self.classes();
        let mut values = Vec::with_capacity(patches.rows() * k);
        for row in patches.iter_rows() {
            values.extend(self.logits_of(row));
        }
        LogitMatrix::new(Matrix::new(patches.rows(), k, values)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl TrainConfig {
    pub fn new(epochs: usize, learning_rate: f64) -> Self {
        Self {
            epochs,
            learning_rate,
            batch_size: 32,
        }
    }

    /// Settings used for the standard synthetic experiments.
    pub fn standard() -> Self {
        Self::new(40, 0.1)
    }
}

/// Per-epoch record of mean training loss and accuracy after the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Mini-batch gradient descent, reshuffling every epoch from `seed`.
pub fn train(
    init: &PatchClassifier,
    dataset: &[SynthSample],
    config: TrainConfig,
    seed: u64,
) -> Result<PatchClassifier> {
    train_with_log(init, dataset, config, seed).map(|(model, _)| model)
}

pub fn train_with_log(
    init: &PatchClassifier,
    dataset: &[SynthSample],
    config: TrainConfig,
    seed: u64,
) -> Result<(PatchClassifier, Vec<EpochLog>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.batch_size == 0 || !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::ConfigError(format!(
            "batch size must be positive and learning rate positive, got {} and {}",
            config.batch_size, config.learning_rate
        )));
    }
    let mut model = init.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, "shuffle"));
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut losses = Vec::new();
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&SynthSample> = chunk.iter().map(|&i| &dataset[i]).collect();
            let (loss, gradient) = model.loss_and_gradient(&batch)?;
            losses.push(loss);
            model.step(&gradient, config.learning_rate);
        }
        log.push(EpochLog {
            epoch: epoch + 1,
            loss: compensated_mean(losses).expect("non-empty"),
            accuracy: accuracy(&model, dataset)?,
        });
    }
    Ok((model, log))
}

/// Accuracy of the argmax of the mean-pooled logits.
pub fn accuracy(model: &PatchClassifier, dataset: &[SynthSample]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    for s in dataset {
        correct += usize::from(argmax(&model.mean_logits(&s.patches)?) == Some(s.label));
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Fraction of individual sub-patch rows whose argmax equals the label.
pub fn sub_patch_accuracy(model: &PatchClassifier, dataset: &[SynthSample]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    let mut total = 0usize;
    for s in dataset {
        let z = model.predict_logits(s)?;
        for t in 0..z.rows() {
            correct += usize::from(argmax(z.row(t)) == Some(s.label));
            total += 1;
        }
    }
    Ok(correct as f64 / total as f64)
}

/// `M` classifiers trained on the same data with seeds `base_seed + m`,
/// which set both the initialisation and the shuffling order.
pub fn make_ensemble(
    dataset: &[SynthSample],
    members: usize,
    base_seed: u64,
    config: TrainConfig,
) -> Result<Vec<PatchClassifier>> {
    if members < 2 {
        return Err(Error::InsufficientMembers { members });
    }
    let (classes, dim) = dataset_shape(dataset)?;
    (0..members as u64)
        .map(|m| {
            let seed = base_seed.wrapping_add(m);
            train(
                &PatchClassifier::random(classes, dim, seed),
                dataset,
                config,
                seed,
            )
        })
        .collect()
}

/// `M × K` matrix whose rows are each member's mean logits for one input.
pub fn ensemble_logits(
    members: &[PatchClassifier],
    patches: &Matrix<f64>,
) -> Result<EnsembleLogits<f64>> {
    if members.len() < 2 {
        return Err(Error::InsufficientMembers {
            members: members.len(),
        });
    }
    let rows = members
        .iter()
        .map(|m| m.mean_logits(patches))
        .collect::<Result<Vec<_>>>()?;
    EnsembleLogits::from_rows(&rows)
}

/// `(K, d)` of a dataset: the largest label + 1 and the patch dimension.
///
/// Only correct when every class appears; generated datasets of realistic
/// size satisfy that, and callers with a known K should use it directly.
pub fn dataset_shape(dataset: &[SynthSample]) -> Result<(usize, usize)> {
    let first = dataset.first().ok_or(Error::EmptyDataset)?;
    let classes = dataset.iter().map(|s| s.label).max().unwrap_or(0) + 1;
    Ok((classes.max(2), first.patches.cols()))
}

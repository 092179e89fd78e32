//! Input perturbations of controlled intensity λ ∈ [0, 1] and the
//! dataset-shift sweep built on them.
//!
//! * Gaussian: `x + λ ε`
//! * speckle: `x + λ (x ⊙ ε)`
//! * affine: rotation λ·30°, shear λ·10° (in radians), isotropic scale 1 + λ,
//!   applied about the centre of an edge-replicated padded image, then
//!   centre-cropped back
//! * elastic: per-pixel displacements from U(−5λ, 5λ), clamped to the image
//!
//! with ε ~ N(0, I). Every operator is the exact identity at λ = 0 and is
//! deterministic given its seed.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::predictive_entropy;
use crate::real::{compensated_mean, Real};
use crate::seed;
use crate::smoothing::{variance_smoothed_forward, BetaCalibration};
use crate::synth::{LogitProducer, SynthSample};
use crate::types::{Matrix, SmoothingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Speckle,
    Affine,
    Elastic,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [
        NoiseKind::Gaussian,
        NoiseKind::Speckle,
        NoiseKind::Affine,
        NoiseKind::Elastic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Speckle => "speckle",
            NoiseKind::Affine => "affine",
            NoiseKind::Elastic => "elastic",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::ConfigError(format!("unknown noise kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub lambda: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, lambda: f64, seed: u64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { kind, lambda, seed })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidInput(format!(
            "lambda {lambda} is outside [0, 1]"
        )));
    }
    Ok(())
}

/// `H × W × C` image stored row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid<R = f64> {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<R>,
}

impl<R: Real> ImageGrid<R> {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<R>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::ShapeError(format!(
                "image dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::ShapeError(format!(
                "{height}x{width}x{channels} image needs {} values, got {}",
                height * width * channels,
                pixels.len()
            )));
        }
        if let Some(index) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "pixel value {index} is not finite"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
        })
    }

    /// Single-channel view of a matrix: rows become image rows.
    pub fn from_matrix(m: &Matrix<R>) -> Result<Self> {
        Self::new(m.rows(), m.cols(), 1, m.as_slice().to_vec())
    }

    pub fn into_matrix(self) -> Result<Matrix<R>> {
        Matrix::new(self.height, self.width * self.channels, self.pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[R] {
        &self.pixels
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[R] {
        let start = (y * self.width + x) * self.channels;
        &self.pixels[start..start + self.channels]
    }

    /// Resamples: output pixel `(y, x)` copies input pixel `source(y, x)`.
    fn resample(
        &self,
        height: usize,
        width: usize,
        source: impl Fn(usize, usize) -> (usize, usize),
    ) -> Self {
        let mut pixels = Vec::with_capacity(height * width * self.channels);
        for y in 0..height {
            for x in 0..width {
                let (sy, sx) = source(y, x);
                pixels.extend_from_slice(self.pixel(sy, sx));
            }
        }
        Self {
            height,
            width,
            channels: self.channels,
            pixels,
        }
    }

    /// Edge-replicating pad of `p` pixels on every side.
    fn pad_edge(&self, p: usize) -> Self {
        let clamp = |v: usize, n: usize| v.saturating_sub(p).min(n - 1);
        self.resample(self.height + 2 * p, self.width + 2 * p, |y, x| {
            (clamp(y, self.height), clamp(x, self.width))
        })
    }
}

fn normal_draws(n: usize, seed: u64) -> impl Iterator<Item = f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(move |_| StandardNormal.sample(&mut rng))
}

/// `x + λ ε`, ε i.i.d. standard normal from `seed`.
pub fn gaussian_noise<R: Real>(x: &[R], lambda: R, seed: u64) -> Result<Vec<R>> {
    check_lambda(lambda.to_f64_lossy())?;
    if lambda == R::zero() {
        return Ok(x.to_vec());
    }
    Ok(x.iter()
        .zip(normal_draws(x.len(), seed))
        .map(|(&v, e)| v + lambda * R::of(e))
        .collect())
}

/// `x + λ (x ⊙ ε)`, ε i.i.d. standard normal from `seed`.
pub fn speckle_noise<R: Real>(x: &[R], lambda: R, seed: u64) -> Result<Vec<R>> {
    check_lambda(lambda.to_f64_lossy())?;
    if lambda == R::zero() {
        return Ok(x.to_vec());
    }
    Ok(x.iter()
        .zip(normal_draws(x.len(), seed))
        .map(|(&v, e)| v + lambda * (v * R::of(e)))
        .collect())
}

/// The 2×2 matrix `A` for intensity λ, acting on `(x, y)` column vectors:
///
/// ```text
/// [ γ cos θ   −γ sin θ + s ]
/// [ γ sin θ    γ cos θ + s ]
/// ```
///
/// with θ = λ·30°, s = λ·10° (converted to radians) and γ = 1 + λ.
pub fn affine_matrix(lambda: f64) -> [[f64; 2]; 2] {
    let theta = (30.0 * lambda).to_radians();
    let shear = (10.0 * lambda).to_radians();
    let gamma = 1.0 + lambda;
    let (sin, cos) = theta.sin_cos();
    [
        [gamma * cos, -gamma * sin + shear],
        [gamma * sin, gamma * cos + shear],
    ]
}

fn invert(a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [
        [a[1][1] / det, -a[0][1] / det],
        [-a[1][0] / det, a[0][0] / det],
    ]
}

/// Padding applied before the affine warp: `round(0.2 · max(H, W))`.
pub fn affine_padding(height: usize, width: usize) -> usize {
    (0.2 * height.max(width) as f64).round() as usize
}

/// Affine warp with nearest-neighbour inverse mapping.
///
/// The image is edge-padded by [`affine_padding`], every output pixel of
/// the padded canvas pulls from `A⁻¹ (q − c) + c` (c the canvas centre),
/// and the centre `H × W` window is returned.
pub fn affine_transform<R: Real>(img: &ImageGrid<R>, lambda: f64) -> Result<ImageGrid<R>> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(img.clone());
    }
    let p = affine_padding(img.height, img.width);
    let padded = img.pad_edge(p);
    let inv = invert(affine_matrix(lambda));
    let cy = (padded.height as f64 - 1.0) / 2.0;
    let cx = (padded.width as f64 - 1.0) / 2.0;
    let max_y = (padded.height - 1) as f64;
    let max_x = (padded.width - 1) as f64;
    Ok(padded.resample(img.height, img.width, |y, x| {
        let dx = (x + p) as f64 - cx;
        let dy = (y + p) as f64 - cy;
        let sx = inv[0][0] * dx + inv[0][1] * dy + cx;
        let sy = inv[1][0] * dx + inv[1][1] * dy + cy;
        // Sources outside the canvas continue the replicated edge.
        (
            sy.round().clamp(0.0, max_y) as usize,
            sx.round().clamp(0.0, max_x) as usize,
        )
    }))
}

/// Elastic distortion with per-pixel displacements from U(−5λ, 5λ).
///
/// Output pixel `(x, y)` copies the input at
/// `(round(clamp(x + Δx, 0, W − 1)), round(clamp(y + Δy, 0, H − 1)))`.
pub fn elastic_distortion<R: Real>(
    img: &ImageGrid<R>,
    lambda: f64,
    seed: u64,
) -> Result<ImageGrid<R>> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(img.clone());
    }
    let reach = 5.0 * lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = img.height * img.width;
    let dx: Vec<f64> = (0..n).map(|_| rng.random_range(-reach..=reach)).collect();
    let dy: Vec<f64> = (0..n).map(|_| rng.random_range(-reach..=reach)).collect();
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    Ok(img.resample(img.height, img.width, |y, x| {
        let i = y * img.width + x;
        let sx = (x as f64 + dx[i]).clamp(0.0, max_x).round();
        let sy = (y as f64 + dy[i]).clamp(0.0, max_y).round();
        (sy as usize, sx as usize)
    }))
}

/// Applies one noise kind to a sample's `T × d` patch matrix; the spatial
/// kinds treat it as a single-channel `T × d` image.
pub fn perturb(patches: &Matrix<f64>, spec: &NoiseSpec) -> Result<Matrix<f64>> {
    check_lambda(spec.lambda)?;
    match spec.kind {
        NoiseKind::Gaussian => Matrix::new(
            patches.rows(),
            patches.cols(),
            gaussian_noise(patches.as_slice(), spec.lambda, spec.seed)?,
        ),
        NoiseKind::Speckle => Matrix::new(
            patches.rows(),
            patches.cols(),
            speckle_noise(patches.as_slice(), spec.lambda, spec.seed)?,
        ),
        NoiseKind::Affine => {
            affine_transform(&ImageGrid::from_matrix(patches)?, spec.lambda)?.into_matrix()
        }
        NoiseKind::Elastic => {
            elastic_distortion(&ImageGrid::from_matrix(patches)?, spec.lambda, spec.seed)?
                .into_matrix()
        }
    }
}

/// Noise seed of sample `sample` at grid point `lambda_index`.
pub fn sample_seed(sweep_seed: u64, sample: usize, lambda_index: usize) -> u64 {
    seed::mix(&[sweep_seed, sample as u64, lambda_index as u64])
}

/// `steps` evenly spaced values from `start` to `stop`, both included.
pub fn lambda_grid(start: f64, stop: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::ConfigError(
            "lambda grid needs at least one step".into(),
        ));
    }
    if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&stop) || start > stop {
        return Err(Error::ConfigError(format!(
            "lambda grid {start}:{stop} must be ascending within [0, 1]"
        )));
    }
    if steps == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| {
            if i + 1 == steps {
                stop
            } else {
                start + step * i as f64
            }
        })
        .collect())
}

/// Mean σ̄, mean entropy and accuracy of variance-smoothed predictions
/// across a grid of noise intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub kind: NoiseKind,
    pub lambdas: Vec<f64>,
    pub sigma_bar: Vec<f64>,
    pub mean_entropy: Vec<f64>,
    pub accuracy: Vec<f64>,
}

impl SweepCurve {
    pub const CSV_HEADER: &'static str = "lambda,sigma_bar,mean_entropy,accuracy";

    /// CSV with 9 significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for i in 0..self.lambdas.len() {
            out.push_str(&format!(
                "{:.8e},{:.8e},{:.8e},{:.8e}\n",
                self.lambdas[i], self.sigma_bar[i], self.mean_entropy[i], self.accuracy[i]
            ));
        }
        out
    }
}

/// Perturbs every sample at every λ, runs the variance-smoothed forward
/// pass, and averages σ̄, entropy and correctness per λ.
///
/// Noise seeds come from [`sample_seed`], so results do not depend on the
/// evaluation order.
pub fn noise_sweep<P: LogitProducer>(
    model: &P,
    dataset: &[SynthSample],
    kind: NoiseKind,
    lambdas: &[f64],
    config: &SmoothingConfig<f64>,
    beta: &BetaCalibration<f64>,
    sweep_seed: u64,
) -> Result<SweepCurve> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if lambdas.is_empty() {
        return Err(Error::ConfigError("lambda grid is empty".into()));
    }
    if lambdas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::ConfigError("lambda grid must be ascending".into()));
    }
    lambdas.iter().try_for_each(|&l| check_lambda(l))?;
    config.validate()?;

    let mut curve = SweepCurve {
        kind,
        lambdas: lambdas.to_vec(),
        sigma_bar: Vec::with_capacity(lambdas.len()),
        mean_entropy: Vec::with_capacity(lambdas.len()),
        accuracy: Vec::with_capacity(lambdas.len()),
    };
    for (j, &lambda) in lambdas.iter().enumerate() {
        let per_sample = dataset
            .par_iter()
            .enumerate()
            .map(|(i, sample)| {
                let spec = NoiseSpec::new(kind, lambda, sample_seed(sweep_seed, i, j))?;
                let logits = model.sub_patch_logits(&perturb(&sample.patches, &spec)?)?;
                let (p, stats) = variance_smoothed_forward(&logits, config, beta)?;
                let correct = if p.argmax() == sample.label { 1.0 } else { 0.0 };
                Ok((stats.sigma_bar, predictive_entropy(&p), correct))
            })
            .collect::<Result<Vec<_>>>()?;
        curve
            .sigma_bar
            .push(compensated_mean(per_sample.iter().map(|r| r.0)).expect("non-empty"));
        curve
            .mean_entropy
            .push(compensated_mean(per_sample.iter().map(|r| r.1)).expect("non-empty"));
        curve
            .accuracy
            .push(compensated_mean(per_sample.iter().map(|r| r.2)).expect("non-empty"));
    }
    Ok(curve)
}

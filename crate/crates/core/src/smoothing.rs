//! Variance-based smoothing.
//!
//! The spread of sub-patch (or ensemble member) logits is turned into a
//! softmax temperature:
//!
//! 1. neighbouring sub-patch logits are average-pooled ([`pool_logits`]);
//! 2. the per-class sample standard deviation σ_k across pooled rows is
//!    computed ([`class_sigma`]);
//! 3. σ̄ = mean_k σ_k and σ̃ = max(α(σ̄ + β), 1) ([`aggregate_sigma`]);
//! 4. the conventional mean logits are divided by σ̃ before the softmax
//!    ([`smooth_predict`]).
//!
//! Because σ̃ ≥ 1 is a single positive scalar per input, the predicted class
//! never changes; only the confidence does.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{compensated_mean, compensated_sum, Real};
use crate::types::{
    mean_over_rows, tempered_softmax, BetaPolicy, EnsembleLogits, LogitMatrix, Matrix,
    PooledLogits, ProbVector, SigmaStats, SmoothingConfig,
};

/// Fitted shift β plus the validation statistics it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaCalibration<R = f64> {
    pub beta: R,
    pub source: BetaSource<R>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSource<R = f64> {
    pub policy: BetaPolicy<R>,
    /// Number of validation σ̄ values used.
    pub n_validation: usize,
    /// Mean of the validation σ̄ values.
    pub mean: R,
    /// Requested percentile q and the σ̄ value found at it, for `NegPercentile`.
    pub percentile: Option<(R, R)>,
}

impl<R: Real> BetaCalibration<R> {
    /// A β that was not derived from validation data.
    pub fn fixed(beta: R) -> Self {
        Self {
            beta,
            source: BetaSource {
                policy: BetaPolicy::Fixed(beta),
                n_validation: 0,
                mean: R::zero(),
                percentile: None,
            },
        }
    }
}

/// Average pooling over windows of `kernel` consecutive rows, `stride` apart.
///
/// Produces `floor((T − kernel) / stride) + 1` rows; row `i` is the mean of
/// input rows `[i·stride, i·stride + kernel)`.
pub fn pool_logits<R: Real>(
    logits: &LogitMatrix<R>,
    kernel: usize,
    stride: usize,
) -> Result<PooledLogits<R>> {
    if kernel == 0 || stride == 0 {
        return Err(Error::InvalidInput(format!(
            "pooling kernel and stride must be at least 1, got {kernel} and {stride}"
        )));
    }
    let rows = logits.rows();
    if kernel > rows {
        return Err(Error::KernelTooLarge { kernel, rows });
    }
    let classes = logits.classes();
    let windows = (rows - kernel) / stride + 1;
    let mut values = Vec::with_capacity(windows * classes);
    for i in 0..windows {
        let start = i * stride;
        let window = Matrix::new(
            kernel,
            classes,
            logits.matrix().as_slice()[start * classes..(start + kernel) * classes].to_vec(),
        )?;
        values.extend(mean_over_rows(&window)?);
    }
    PooledLogits::new(Matrix::new(windows, classes, values)?)
}

/// Column-wise sample standard deviation (n − 1 normalisation), two-pass.
fn column_sample_std<R: Real>(matrix: &Matrix<R>) -> Vec<R> {
    let n = matrix.rows();
    let means = mean_over_rows(matrix).expect("caller checked rows >= 2");
    let denom = R::of_usize(n - 1);
    means
        .iter()
        .enumerate()
        .map(|(k, &mu)| {
            let ss = compensated_sum(matrix.iter_rows().map(|r| {
                let d = r[k] - mu;
                d * d
            }));
            (ss / denom).sqrt()
        })
        .collect()
}

/// Per-class standard deviation σ_k across the pooled sub-patch rows.
pub fn class_sigma<R: Real>(pooled: &PooledLogits<R>) -> Result<Vec<R>> {
    if pooled.rows() < 2 {
        return Err(Error::InsufficientRows {
            rows: pooled.rows(),
        });
    }
    Ok(column_sample_std(pooled.matrix()))
}

/// σ̄ = mean(σ_k) and σ̃ = max(α(σ̄ + β), 1).
pub fn aggregate_sigma<R: Real>(per_class: &[R], alpha: R, beta: R) -> Result<SigmaStats<R>> {
    if !(alpha > R::zero() && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if !beta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "beta must be finite, got {beta}"
        )));
    }
    if let Some(i) = per_class
        .iter()
        .position(|s| !(s.is_finite() && *s >= R::zero()))
    {
        return Err(Error::InvalidInput(format!(
            "sigma[{i}] = {} is not a finite non-negative value",
            per_class[i]
        )));
    }
    let sigma_bar = compensated_mean(per_class.iter().copied()).ok_or(Error::EmptyInput)?;
    let scaled = alpha * (sigma_bar + beta);
    if scaled.is_infinite() {
        return Err(Error::InvalidInput(format!(
            "temperature alpha * (sigma_bar + beta) = {scaled} overflows"
        )));
    }
    // Anything not at least one, including a negative pre-floor value, floors to one.
    let sigma_tilde = if scaled >= R::one() { scaled } else { R::one() };
    Ok(SigmaStats {
        per_class: per_class.to_vec(),
        sigma_bar,
        sigma_tilde,
    })
}

/// `softmax(mean_logits / sigma_tilde)` for `sigma_tilde ≥ 1`.
pub fn smooth_predict<R: Real>(mean_logits: &[R], sigma_tilde: R) -> Result<ProbVector<R>> {
    if !(sigma_tilde >= R::one() && sigma_tilde.is_finite()) {
        return Err(Error::InvalidTemperature(sigma_tilde.to_f64_lossy()));
    }
    tempered_softmax(mean_logits, sigma_tilde)
}

/// σ̄ of one input under the given pooling, independent of α and β.
///
/// This is the statistic collected over a validation set to fit β.
pub fn sigma_bar<R: Real>(logits: &LogitMatrix<R>, kernel: usize, stride: usize) -> Result<R> {
    let pooled = pool_logits(logits, kernel, stride)?;
    let sigma = class_sigma(&pooled)?;
    compensated_mean(sigma).ok_or(Error::EmptyInput)
}

/// Full single-model pipeline: pool, σ_k, σ̃, then the smoothed prediction.
///
/// The temperature comes from the pooled rows while the prediction uses the
/// mean of the original, unpooled rows, so the predicted class equals the
/// conventional classifier's.
pub fn variance_smoothed_forward<R: Real>(
    logits: &LogitMatrix<R>,
    config: &SmoothingConfig<R>,
    beta: &BetaCalibration<R>,
) -> Result<(ProbVector<R>, SigmaStats<R>)> {
    config.validate()?;
    let pooled = pool_logits(logits, config.pool_kernel, config.pool_stride)?;
    let sigma = class_sigma(&pooled)?;
    let stats = aggregate_sigma(&sigma, config.alpha, beta.beta)?;
    let prediction = smooth_predict(&logits.mean_logits(), stats.sigma_tilde)?;
    Ok((prediction, stats))
}

/// Linearly interpolated percentile, `q ∈ [0, 100]`, of unsorted values.
pub fn percentile<R: Real>(values: &[R], q: R) -> Result<R> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(q >= R::zero() && q <= R::of(100.0)) {
        return Err(Error::InvalidInput(format!(
            "percentile {q} is outside [0, 100]"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let h = q / R::of(100.0) * R::of_usize(sorted.len() - 1);
    let lo = h.floor().to_usize().expect("in range");
    let frac = h - R::of_usize(lo);
    Ok(match sorted.get(lo + 1) {
        Some(&next) if frac > R::zero() => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    })
}

/// Derives β from σ̄ values measured on a validation set.
pub fn calibrate_beta<R: Real>(
    validation_sigma_bars: &[R],
    policy: BetaPolicy<R>,
) -> Result<BetaCalibration<R>> {
    policy.validate()?;
    if validation_sigma_bars.len() < 2 {
        return Err(Error::EmptyValidationSet);
    }
    if let Some(i) = validation_sigma_bars
        .iter()
        .position(|s| !(s.is_finite() && *s >= R::zero()))
    {
        return Err(Error::InvalidInput(format!(
            "validation sigma_bar[{i}] = {} is not a finite non-negative value",
            validation_sigma_bars[i]
        )));
    }
    let mean = compensated_mean(validation_sigma_bars.iter().copied()).expect("non-empty");
    let (beta, percentile_record) = match policy {
        BetaPolicy::Fixed(v) => (v, None),
        BetaPolicy::MeanOffset(offset) => (mean + offset, None),
        BetaPolicy::NegPercentile(q) => {
            let p = percentile(validation_sigma_bars, q)?;
            (-p, Some((q, p)))
        }
    };
    Ok(BetaCalibration {
        beta,
        source: BetaSource {
            policy,
            n_validation: validation_sigma_bars.len(),
            mean,
            percentile: percentile_record,
        },
    })
}

/// Per-class standard deviation of the logits across ensemble members.
pub fn ensemble_sigma<R: Real>(ensemble: &EnsembleLogits<R>) -> Result<Vec<R>> {
    if ensemble.members() < 2 {
        return Err(Error::InsufficientMembers {
            members: ensemble.members(),
        });
    }
    Ok(column_sample_std(ensemble.matrix()))
}

/// Ensemble variant: softmax of the mean member logits divided by σ̃, where
/// σ̃ is built from the across-member spread.
pub fn ensemble_smoothed_predict<R: Real>(
    ensemble: &EnsembleLogits<R>,
    alpha: R,
    beta: R,
) -> Result<(ProbVector<R>, SigmaStats<R>)> {
    let sigma = ensemble_sigma(ensemble)?;
    let stats = aggregate_sigma(&sigma, alpha, beta)?;
    let prediction = smooth_predict(&ensemble.mean_logits(), stats.sigma_tilde)?;
    Ok((prediction, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{kl_to_uniform, predictive_entropy};
    use crate::types::softmax;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::SQRT_2;

    fn logits(rows: &[Vec<f64>]) -> LogitMatrix {
        LogitMatrix::from_rows(rows).unwrap()
    }

    fn random_rows(rng: &mut ChaCha8Rng, t: usize, k: usize) -> Vec<Vec<f64>> {
        (0..t)
            .map(|_| (0..k).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect()
    }

    // Definition of the sample standard deviation written as plain loops.
    fn naive_sigma(rows: &[Vec<f64>]) -> Vec<f64> {
        let t = rows.len();
        let k = rows[0].len();
        let mut out = vec![0.0; k];
        for c in 0..k {
            let mut mu = 0.0;
            for r in rows {
                mu += r[c];
            }
            mu /= t as f64;
            let mut ss = 0.0;
            for r in rows {
                ss += (r[c] - mu) * (r[c] - mu);
            }
            out[c] = (ss / (t as f64 - 1.0)).sqrt();
        }
        out
    }

    #[test]
    fn pooled_row_counts() {
        let z = LogitMatrix::<f64>::new(Matrix::zeros(79, 20)).unwrap();
        assert_eq!(pool_logits(&z, 10, 1).unwrap().rows(), 70);
        let z = LogitMatrix::<f64>::new(Matrix::zeros(128, 251)).unwrap();
        let pooled = pool_logits(&z, 40, 1).unwrap();
        assert_eq!((pooled.rows(), pooled.classes()), (89, 251));
        let z = LogitMatrix::<f64>::new(Matrix::zeros(10, 2)).unwrap();
        assert_eq!(pool_logits(&z, 3, 2).unwrap().rows(), 4);
    }

    #[test]
    fn unit_pooling_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = logits(&random_rows(&mut rng, 5, 3));
        let pooled = pool_logits(&z, 1, 1).unwrap();
        assert_eq!(pooled.matrix(), z.matrix());
    }

    #[test]
    fn pooling_errors() {
        let z = logits(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(
            pool_logits(&z, 3, 1),
            Err(Error::KernelTooLarge { kernel: 3, rows: 2 })
        ));
        assert!(pool_logits(&z, 0, 1).is_err());
        assert!(pool_logits(&z, 1, 0).is_err());
    }

    #[test]
    fn pooling_values() {
        let z = logits(&[vec![0.0, 0.0], vec![2.0, 4.0], vec![4.0, 2.0]]);
        let pooled = pool_logits(&z, 2, 1).unwrap();
        assert_eq!(pooled.row(0), &[1.0, 2.0]);
        assert_eq!(pooled.row(1), &[3.0, 3.0]);
    }

    #[test]
    fn class_sigma_examples() {
        let identical = logits(&vec![vec![1.5, -2.0, 0.25]; 6]);
        let pooled = pool_logits(&identical, 1, 1).unwrap();
        assert_eq!(class_sigma(&pooled).unwrap(), vec![0.0; 3]);

        let z = logits(&[vec![0.0, 0.0], vec![2.0, 4.0]]);
        let s = class_sigma(&pool_logits(&z, 1, 1).unwrap()).unwrap();
        assert!((s[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((s[1] - 8f64.sqrt()).abs() < 1e-15);
        assert!((s[0] - SQRT_2).abs() < 1e-6 && (s[1] - 2.0 * SQRT_2).abs() < 1e-6);

        let single = pool_logits(&z, 2, 1).unwrap();
        assert!(matches!(
            class_sigma(&single),
            Err(Error::InsufficientRows { rows: 1 })
        ));
    }

    #[test]
    fn class_sigma_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows = random_rows(&mut rng, 70, 20);
        let got = class_sigma(&pool_logits(&logits(&rows), 1, 1).unwrap()).unwrap();
        for (g, w) in got.iter().zip(naive_sigma(&rows)) {
            assert!((g - w).abs() < 1e-10);
        }
    }

    #[test]
    fn aggregate_examples() {
        let s = aggregate_sigma(&[0.0; 5], 1.0, 0.0).unwrap();
        assert_eq!(s.sigma_tilde, 1.0);

        let s = aggregate_sigma(&[1.0, 3.0], 5.0, -1.0).unwrap();
        assert_eq!(s.sigma_bar, 2.0);
        assert_eq!(s.sigma_tilde, 5.0);

        let s = aggregate_sigma(&[0.2, 0.2], 1.0, -0.5).unwrap();
        assert_eq!(s.sigma_tilde, 1.0);

        assert!(aggregate_sigma(&[f64::NAN], 1.0, 0.0).is_err());
        assert!(aggregate_sigma(&[-1.0], 1.0, 0.0).is_err());
        assert!(aggregate_sigma(&[1.0], 0.0, 0.0).is_err());
        assert!(aggregate_sigma(&[1.0], 1.0, f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn smooth_predict_examples() {
        let z = [0.3, -1.2, 2.2];
        assert_eq!(smooth_predict(&z, 1.0).unwrap(), softmax(&z).unwrap());

        let p = smooth_predict(&[2.0f64, 0.0], 2.0).unwrap();
        let q = softmax(&[1.0f64, 0.0]).unwrap();
        assert!((p[0] - q[0]).abs() < 1e-15);
        assert!((p[0] - 0.731059).abs() < 1e-6 && (p[1] - 0.268941).abs() < 1e-6);

        let hot = predictive_entropy(&smooth_predict(&[3.0, 1.0, 0.0], 1.0).unwrap());
        let cold = predictive_entropy(&smooth_predict(&[3.0, 1.0, 0.0], 10.0).unwrap());
        assert!(cold > hot);

        assert!(matches!(
            smooth_predict(&[1.0, 0.0], 0.5),
            Err(Error::InvalidTemperature(_))
        ));
        assert!(smooth_predict(&[1.0, 0.0], f64::NAN).is_err());
    }

    #[test]
    fn forward_on_constant_rows_is_plain_softmax() {
        let row = vec![0.5, -1.0, 2.0];
        let z = logits(&vec![row.clone(); 4]);
        let config = SmoothingConfig::new(1.0, BetaPolicy::Fixed(0.0), 1, 1).unwrap();
        let (p, stats) =
            variance_smoothed_forward(&z, &config, &BetaCalibration::fixed(0.0)).unwrap();
        assert_eq!(stats.sigma_tilde, 1.0);
        assert_eq!(p, softmax(&row).unwrap());
    }

    #[test]
    fn forward_on_79_rows_with_kernel_10() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = logits(&random_rows(&mut rng, 79, 20));
        let config = SmoothingConfig::new(1.0, BetaPolicy::MeanOffset(0.5), 10, 1).unwrap();
        let (p, stats) =
            variance_smoothed_forward(&z, &config, &BetaCalibration::fixed(0.5)).unwrap();
        assert_eq!(stats.per_class.len(), 20);
        assert!(stats.sigma_tilde >= 1.0);
        assert_eq!(p.argmax(), softmax(&z.mean_logits()).unwrap().argmax());
    }

    #[test]
    fn forward_needs_two_pooled_rows() {
        let z = logits(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let config = SmoothingConfig::new(1.0, BetaPolicy::Fixed(0.0), 2, 1).unwrap();
        assert!(matches!(
            variance_smoothed_forward(&z, &config, &BetaCalibration::fixed(0.0)),
            Err(Error::InsufficientRows { rows: 1 })
        ));
    }

    #[test]
    fn calibrate_beta_examples() {
        let b = calibrate_beta(&[1.0; 4], BetaPolicy::MeanOffset(0.5)).unwrap();
        assert_eq!(b.beta, 1.5);
        assert_eq!(b.source.mean, 1.0);

        let b = calibrate_beta(&[0.0; 10], BetaPolicy::NegPercentile(95.0)).unwrap();
        assert_eq!(b.beta, 0.0);

        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let b = calibrate_beta(&values, BetaPolicy::NegPercentile(95.0)).unwrap();
        assert!((b.beta + 95.05).abs() < 1e-12);
        assert_eq!(b.source.percentile.unwrap().0, 95.0);

        let b = calibrate_beta(&values, BetaPolicy::Fixed(-0.25)).unwrap();
        assert_eq!(b.beta, -0.25);

        assert!(matches!(
            calibrate_beta::<f64>(&[], BetaPolicy::MeanOffset(0.5)),
            Err(Error::EmptyValidationSet)
        ));
        assert!(calibrate_beta(&[1.0, -1.0], BetaPolicy::MeanOffset(0.5)).is_err());
    }

    #[test]
    fn percentile_oracle() {
        // Brute force: linear interpolation between the order statistics that
        // bracket rank q/100 * (n - 1).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(2..60);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
            let q: f64 = rng.random_range(0.0..100.0);
            let mut s = v.clone();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let rank = q / 100.0 * (n - 1) as f64;
            let mut want = s[n - 1];
            for i in 0..n - 1 {
                if rank >= i as f64 && rank <= (i + 1) as f64 {
                    want = s[i] + (rank - i as f64) * (s[i + 1] - s[i]);
                    break;
                }
            }
            assert!((percentile(&v, q).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn ensemble_examples() {
        let identical = EnsembleLogits::from_rows(&vec![vec![1.0, 2.0, 3.0]; 4]).unwrap();
        assert_eq!(ensemble_sigma(&identical).unwrap(), vec![0.0; 3]);
        let (p, stats) = ensemble_smoothed_predict(&identical, 1.0, 0.0).unwrap();
        assert_eq!(stats.sigma_tilde, 1.0);
        assert_eq!(p, softmax(&[1.0, 2.0, 3.0]).unwrap());

        let pair = EnsembleLogits::from_rows(&[vec![0.0f64, 0.0], vec![2.0, 4.0]]).unwrap();
        let s = ensemble_sigma(&pair).unwrap();
        assert!((s[0] - SQRT_2).abs() < 1e-6 && (s[1] - 2.0 * SQRT_2).abs() < 1e-6);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows = random_rows(&mut rng, 10, 251);
        let e = EnsembleLogits::from_rows(&rows).unwrap();
        for (g, w) in ensemble_sigma(&e).unwrap().iter().zip(naive_sigma(&rows)) {
            assert!((g - w).abs() < 1e-10);
        }
        let (p, _) = ensemble_smoothed_predict(&e, 1.0, 0.0).unwrap();
        assert_eq!(p.argmax(), crate::real::argmax(&e.mean_logits()).unwrap());

        let (p, _) = ensemble_smoothed_predict(&e, 1e6, 0.0).unwrap();
        assert!(kl_to_uniform(&p) < 1e-6);
    }

    #[test]
    fn works_in_single_precision() {
        let z = LogitMatrix::from_rows(&[vec![0.0f32, 0.0], vec![2.0, 4.0]]).unwrap();
        let s = class_sigma(&pool_logits(&z, 1, 1).unwrap()).unwrap();
        assert!((s[1] - 2.828427).abs() < 1e-5);
    }

    fn matrix_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..40, 2usize..12).prop_flat_map(|(t, k)| {
            prop::collection::vec(prop::collection::vec(-20.0f64..20.0, k), t)
        })
    }

    proptest! {
        #[test]
        fn temperature_never_below_one(
            sigma in prop::collection::vec(0.0f64..1e3, 1..50),
            alpha in 1e-6f64..1e3,
            beta in -1e6f64..1e3,
        ) {
            let s = aggregate_sigma(&sigma, alpha, beta).unwrap();
            prop_assert!(s.sigma_tilde >= 1.0);
        }

        #[test]
        fn argmax_is_preserved(rows in matrix_strategy(), alpha in 0.1f64..10.0, beta in -5.0f64..5.0) {
            let z = logits(&rows);
            let config = SmoothingConfig::new(alpha, BetaPolicy::Fixed(beta), 1, 1).unwrap();
            let (p, _) = variance_smoothed_forward(&z, &config, &BetaCalibration::fixed(beta)).unwrap();
            prop_assert_eq!(p.argmax(), softmax(&z.mean_logits()).unwrap().argmax());
        }

        #[test]
        fn entropy_nondecreasing_in_temperature(z in prop::collection::vec(-10.0f64..10.0, 2..30)) {
            let mut last = f64::NEG_INFINITY;
            for i in 0..50 {
                let t = 1.0 + 99.0 * i as f64 / 49.0;
                let h = predictive_entropy(&smooth_predict(&z, t).unwrap());
                prop_assert!(h >= last - 1e-12);
                last = h;
            }
        }

        #[test]
        fn full_window_pool_is_row_mean(rows in matrix_strategy()) {
            let z = logits(&rows);
            let pooled = pool_logits(&z, z.rows(), 1).unwrap();
            prop_assert_eq!(pooled.rows(), 1);
            let mean = z.mean_logits();
            prop_assert_eq!(pooled.row(0), mean.as_slice());
        }

        #[test]
        fn sigma_is_homogeneous(rows in matrix_strategy(), c in 0.01f64..100.0) {
            let z = logits(&rows);
            let scaled = LogitMatrix::new(z.matrix().map(|v| c * v)).unwrap();
            let a = class_sigma(&pool_logits(&z, 1, 1).unwrap()).unwrap();
            let b = class_sigma(&pool_logits(&scaled, 1, 1).unwrap()).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((c * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
            let sa = aggregate_sigma(&a, 1.0, 0.0).unwrap().sigma_bar;
            let sb = aggregate_sigma(&b, 1.0, 0.0).unwrap().sigma_bar;
            prop_assert!((c * sa - sb).abs() <= 1e-12 * (1.0 + sb.abs()));
        }
    }
}

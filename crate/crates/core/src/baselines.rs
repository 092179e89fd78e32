//! Logit-only comparison methods: the conventional classifier, naive
//! sub-patch softmax averaging, the ensemble mean, and scalar temperature
//! scaling fitted on held-out data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::cross_entropy;
use crate::real::{compensated_mean, CompensatedSum, Real};
use crate::types::{softmax, tempered_softmax, EnsembleLogits, LogitMatrix, ProbVector};

/// Lower and upper bound of the temperature search.
pub const TEMPERATURE_BOUNDS: (f64, f64) = (0.05, 20.0);
const MAX_ITERATIONS: usize = 200;
const BRACKET_TOLERANCE: f64 = 1e-6;

/// Result of [`fit_temperature`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTemperature<R = f64> {
    pub t: R,
    /// Mean NLL on the fitting set at `t`.
    pub final_nll: R,
    pub iterations: usize,
    /// The optimum sits on a search bound; the true minimiser may lie outside.
    pub at_bound: bool,
}

/// Softmax of the mean sub-patch logits.
pub fn conventional_predict<R: Real>(logits: &LogitMatrix<R>) -> Result<ProbVector<R>> {
    softmax(&logits.mean_logits())
}

fn average_of_softmaxes<'a, R: Real>(
    rows: impl ExactSizeIterator<Item = &'a [R]>,
    classes: usize,
) -> Result<ProbVector<R>> {
    let n = R::of_usize(rows.len());
    let mut acc = vec![CompensatedSum::new(); classes];
    for row in rows {
        for (a, &p) in acc.iter_mut().zip(softmax(row)?.as_slice()) {
            a.add(p);
        }
    }
    ProbVector::new(acc.iter().map(|a| a.value() / n).collect())
}

/// `(1/T) Σ_t softmax(z_t)`: averaging per-sub-patch distributions.
pub fn naive_subpatch_average<R: Real>(logits: &LogitMatrix<R>) -> Result<ProbVector<R>> {
    average_of_softmaxes(logits.matrix().iter_rows(), logits.classes())
}

/// `(1/M) Σ_m softmax(member logits)`.
pub fn ensemble_mean_predict<R: Real>(members: &EnsembleLogits<R>) -> Result<ProbVector<R>> {
    if members.members() < 2 {
        return Err(Error::InsufficientMembers {
            members: members.members(),
        });
    }
    average_of_softmaxes(members.matrix().iter_rows(), members.classes())
}

/// `softmax(mean_logits / t)` for `t > 0`.
pub fn apply_temperature<R: Real>(mean_logits: &[R], t: R) -> Result<ProbVector<R>> {
    if !(t > R::zero() && t.is_finite()) {
        return Err(Error::InvalidTemperature(t.to_f64_lossy()));
    }
    tempered_softmax(mean_logits, t)
}

/// Mean NLL of `softmax(z / t)` over a labelled set.
pub fn mean_nll<R: Real>(logits: &[Vec<R>], labels: &[usize], t: R) -> Result<R> {
    let losses = logits
        .iter()
        .zip(labels)
        .map(|(z, &y)| {
            let scaled: Vec<R> = z.iter().map(|&v| v / t).collect();
            cross_entropy(&scaled, y)
        })
        .collect::<Result<Vec<_>>>()?;
    compensated_mean(losses).ok_or(Error::EmptyValidationSet)
}

/// Fits one temperature minimising the mean NLL.
///
/// Golden-section search over `ln t` in `[ln 0.05, ln 20]`, at most 200
/// iterations, stopping once the bracket is narrower than `1e-6`. The result
/// is never worse in-sample than `t = 1`.
pub fn fit_temperature<R: Real>(
    val_mean_logits: &[Vec<R>],
    labels: &[usize],
) -> Result<FittedTemperature<R>> {
    if val_mean_logits.is_empty() {
        return Err(Error::EmptyValidationSet);
    }
    if val_mean_logits.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: val_mean_logits.len(),
            right: labels.len(),
        });
    }
    for (z, &y) in val_mean_logits.iter().zip(labels) {
        if y >= z.len() {
            return Err(Error::InvalidLabel {
                label: y,
                classes: z.len(),
            });
        }
    }

    let objective = |log_t: R| mean_nll(val_mean_logits, labels, log_t.exp());
    let inv_phi = R::of((5f64.sqrt() - 1.0) / 2.0);
    let (lo_bound, hi_bound) = (
        R::of(TEMPERATURE_BOUNDS.0.ln()),
        R::of(TEMPERATURE_BOUNDS.1.ln()),
    );
    let (mut a, mut b) = (lo_bound, hi_bound);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(c)?;
    let mut fd = objective(d)?;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS && (b - a) >= R::of(BRACKET_TOLERANCE) {
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d)?;
        }
    }
    let (mut log_t, mut nll) = if fc <= fd { (c, fc) } else { (d, fd) };
    let unit = objective(R::zero())?;
    if unit < nll {
        log_t = R::zero();
        nll = unit;
    }
    let tol = R::of(2.0 * BRACKET_TOLERANCE);
    Ok(FittedTemperature {
        t: log_t.exp(),
        final_nll: nll,
        iterations,
        at_bound: (log_t - lo_bound) <= tol || (hi_bound - log_t) <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::predictive_entropy;
    use crate::real::argmax;
    use crate::smoothing::{ensemble_smoothed_predict, smooth_predict};
    use proptest::prelude::*;
    use rand::distr::weighted::WeightedIndex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn logits(rows: &[Vec<f64>]) -> LogitMatrix {
        LogitMatrix::from_rows(rows).unwrap()
    }

    /// Labels drawn from softmax(z) for z with i.i.d. N(0, scale²) entries.
    fn calibrated_set(seed: u64, n: usize, k: usize, scale: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut zs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let z: Vec<f64> = (0..k)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    scale * e
                })
                .collect();
            let p = softmax(&z).unwrap();
            ys.push(WeightedIndex::new(p.as_slice()).unwrap().sample(&mut rng));
            zs.push(z);
        }
        (zs, ys)
    }

    #[test]
    fn conventional_examples() {
        assert_eq!(
            conventional_predict(&logits(&[vec![0.0, 0.0]]))
                .unwrap()
                .as_slice(),
            &[0.5, 0.5]
        );
        assert_eq!(
            conventional_predict(&logits(&[vec![2.0, 0.0], vec![0.0, 2.0]]))
                .unwrap()
                .as_slice(),
            &[0.5, 0.5]
        );
        let z = logits(&[vec![1.0, -3.0, 0.5], vec![0.2, 0.1, 4.0]]);
        assert_eq!(
            conventional_predict(&z).unwrap(),
            smooth_predict(&z.mean_logits(), 1.0).unwrap()
        );
    }

    #[test]
    fn naive_average_examples() {
        let row = vec![0.3, -0.7, 1.1];
        let p = naive_subpatch_average(&logits(&vec![row.clone(); 3])).unwrap();
        let q = softmax(&row).unwrap();
        for k in 0..3 {
            assert!((p[k] - q[k]).abs() < 1e-15);
        }

        let p = naive_subpatch_average(&logits(&[vec![10.0, 0.0], vec![0.0, 10.0]])).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);

        let z = logits(&[vec![10.0, 0.0], vec![0.0, 2.0]]);
        let naive = naive_subpatch_average(&z).unwrap();
        let want = (1.0 / (1.0 + (-10f64).exp()) + 1.0 / (1.0 + 2f64.exp())) / 2.0;
        assert!((naive[0] - want).abs() < 1e-15);
        assert!((naive[0] - 0.559579).abs() < 1e-6);
        let conventional = conventional_predict(&z).unwrap();
        assert!((conventional[0] - 0.9820).abs() < 1e-4);
    }

    #[test]
    fn ensemble_mean_examples() {
        let row = vec![1.0f64, 2.0, -1.0];
        let e = EnsembleLogits::from_rows(&vec![row.clone(); 3]).unwrap();
        let p = ensemble_mean_predict(&e).unwrap();
        let q = softmax(&row).unwrap();
        for k in 0..3 {
            assert!((p[k] - q[k]).abs() < 1e-15);
        }
        let (s, _) = ensemble_smoothed_predict(&e, 1.0, 0.0).unwrap();
        for k in 0..3 {
            assert!((p[k] - s[k]).abs() < 1e-15);
        }

        let opposed = EnsembleLogits::from_rows(&[vec![30.0f64, 0.0], vec![0.0, 30.0]]).unwrap();
        let p = ensemble_mean_predict(&opposed).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..6).map(|_| rng.random_range(-4.0..4.0)).collect())
            .collect();
        let e = EnsembleLogits::from_rows(&rows).unwrap();
        let p = ensemble_mean_predict(&e).unwrap();
        let members: Vec<ProbVector> = rows.iter().map(|r| softmax(r).unwrap()).collect();
        for k in 0..6 {
            let lo = members.iter().map(|m| m[k]).fold(f64::INFINITY, f64::min);
            let hi = members
                .iter()
                .map(|m| m[k])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(p[k] >= lo - 1e-15 && p[k] <= hi + 1e-15);
        }
    }

    #[test]
    fn apply_temperature_examples() {
        let z = [0.4f64, 1.9, -2.0];
        assert_eq!(apply_temperature(&z, 1.0).unwrap(), softmax(&z).unwrap());
        let p = apply_temperature(&[2.0f64, 0.0], 2.0).unwrap();
        assert!((p[0] - 0.731059).abs() < 1e-6 && (p[1] - 0.268941).abs() < 1e-6);
        let p = apply_temperature(&z, 1000.0).unwrap();
        assert!(p.as_slice().iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-3));
        assert!(matches!(
            apply_temperature(&z, 0.0),
            Err(Error::InvalidTemperature(_))
        ));
        assert!(apply_temperature(&z, -1.0).is_err());
    }

    #[test]
    fn fit_recovers_unit_temperature() {
        let (z, y) = calibrated_set(17, 10_000, 5, 1.5);
        let fit = fit_temperature(&z, &y).unwrap();
        assert!((fit.t - 1.0).abs() < 0.1, "t = {}", fit.t);
        assert!(!fit.at_bound);
    }

    #[test]
    fn fit_recovers_scale() {
        let (z, y) = calibrated_set(23, 10_000, 5, 1.5);
        let scaled: Vec<Vec<f64>> = z
            .iter()
            .map(|r| r.iter().map(|v| 5.0 * v).collect())
            .collect();
        let fit = fit_temperature(&scaled, &y).unwrap();
        assert!((fit.t / 5.0 - 1.0).abs() < 0.05, "t = {}", fit.t);
        assert!(fit.final_nll <= mean_nll(&scaled, &y, 1.0).unwrap());
    }

    #[test]
    fn single_confident_sample_hits_lower_bound() {
        let fit = fit_temperature(&[vec![3.0, 0.0, -1.0]], &[0]).unwrap();
        assert!((fit.t - TEMPERATURE_BOUNDS.0).abs() < 1e-5, "t = {}", fit.t);
        assert!(fit.at_bound);
    }

    #[test]
    fn fit_errors_and_determinism() {
        assert!(matches!(
            fit_temperature::<f64>(&[], &[]),
            Err(Error::EmptyValidationSet)
        ));
        assert!(fit_temperature(&[vec![0.0, 1.0]], &[2]).is_err());
        assert!(fit_temperature(&[vec![0.0, 1.0]], &[0, 1]).is_err());

        let (z, y) = calibrated_set(5, 500, 4, 2.0);
        let a = fit_temperature(&z, &y).unwrap();
        let b = fit_temperature(&z, &y).unwrap();
        assert_eq!(a.t.to_bits(), b.t.to_bits());
        assert!(a.iterations <= MAX_ITERATIONS);
    }

    proptest! {
        #[test]
        fn temperature_preserves_argmax(z in prop::collection::vec(-50.0f64..50.0, 2..60), t in 1e-2f64..1e3) {
            prop_assert_eq!(apply_temperature(&z, t).unwrap().argmax(), argmax(&z).unwrap());
        }

        #[test]
        fn mixture_entropy_is_bounded(rows in (1usize..20, 2usize..10).prop_flat_map(|(t, k)| {
            prop::collection::vec(prop::collection::vec(-10.0f64..10.0, k), t)
        })) {
            let z = logits(&rows);
            let h = predictive_entropy(&naive_subpatch_average(&z).unwrap());
            let min_row = rows
                .iter()
                .map(|r| predictive_entropy(&softmax(r).unwrap()))
                .fold(f64::INFINITY, f64::min);
            prop_assert!(h >= min_row - 1e-12);
            prop_assert!(h <= (z.classes() as f64).ln() + 1e-12);
        }
    }
}

//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the calibration math is written against.
///
/// Implemented for `f32` and `f64`. The command line tooling and the file
/// formats are `f64` only.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Tolerance on `|Σ p_k − 1|` accepted by [`crate::ProbVector`].
    const SUM_TOLERANCE: f64;

    /// Lossy conversion from `f64`; always defined for finite inputs.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    /// Conversion from a count.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const SUM_TOLERANCE: f64 = 1e-9;
}

impl Real for f32 {
    const SUM_TOLERANCE: f64 = 1e-5;
}

/// Neumaier-compensated accumulator.
///
/// Reductions over samples use this so that the result does not depend on
/// how the samples were partitioned beyond rounding of the final value.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<R> {
    sum: R,
    carry: R,
}

impl<R: Real> CompensatedSum<R> {
    pub fn new() -> Self {
        Self {
            sum: R::zero(),
            carry: R::zero(),
        }
    }

    pub fn add(&mut self, x: R) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> R {
        self.sum + self.carry
    }
}

impl<R: Real> Extend<R> for CompensatedSum<R> {
    fn extend<I: IntoIterator<Item = R>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<R: Real, I: IntoIterator<Item = R>>(iter: I) -> R {
    let mut acc = CompensatedSum::new();
    acc.extend(iter);
    acc.value()
}

/// Compensated mean; `None` for an empty iterator.
pub fn compensated_mean<R: Real, I: IntoIterator<Item = R>>(iter: I) -> Option<R> {
    let mut acc = CompensatedSum::new();
    let mut n = 0usize;
    for x in iter {
        acc.add(x);
        n += 1;
    }
    (n > 0).then(|| acc.value() / R::of_usize(n))
}

/// Index of the largest entry, ties resolved towards the lowest index.
///
/// Returns `None` for an empty slice. NaN entries never win.
pub fn argmax<R: Real>(values: &[R]) -> Option<usize> {
    let mut best: Option<(usize, R)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            _ if v.is_nan() => {}
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

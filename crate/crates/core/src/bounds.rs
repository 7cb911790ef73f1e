//! Closed-form mathematics of the benchmark: how the Bayes error moves under
//! uniform label resampling, the envelope of valid bounds derived from it, and
//! the nearest-neighbor bound inversions used by the kNN family of estimators.
//!
//! Everything here is a pure function of its arguments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of classes `C`, always at least two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct ClassCount(usize);

impl ClassCount {
    pub fn new(c: usize) -> Result<Self> {
        if c < 2 {
            return Err(Error::InvalidValue(format!("class count must be >= 2, got {c}")));
        }
        Ok(ClassCount(c))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    /// Error of a classifier that picks a label uniformly at random: `1 - 1/C`.
    #[inline]
    pub fn chance_error(self) -> f64 {
        1.0 - 1.0 / self.0 as f64
    }

    /// The `2C/(C-1)` factor that normalizes areas so a random classifier scores 1.
    #[inline]
    pub fn area_scale(self) -> f64 {
        let c = self.0 as f64;
        2.0 * c / (c - 1.0)
    }
}

impl TryFrom<usize> for ClassCount {
    type Error = Error;

    fn try_from(c: usize) -> Result<Self> {
        ClassCount::new(c)
    }
}

impl From<ClassCount> for usize {
    fn from(c: ClassCount) -> usize {
        c.0
    }
}

/// Probability `rho` that a label is resampled uniformly over all classes.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NoiseLevel(f64);

impl NoiseLevel {
    pub fn new(rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidValue(format!("noise level must lie in [0, 1], got {rho}")));
        }
        Ok(NoiseLevel(rho))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for NoiseLevel {
    type Error = Error;

    fn try_from(rho: f64) -> Result<Self> {
        NoiseLevel::new(rho)
    }
}

impl From<NoiseLevel> for f64 {
    fn from(n: NoiseLevel) -> f64 {
        n.0
    }
}

/// A classification error rate in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ErrorRate(f64);

impl ErrorRate {
    pub const ZERO: ErrorRate = ErrorRate(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidValue(format!("error rate must lie in [0, 1], got {value}")));
        }
        Ok(ErrorRate(value))
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            return ErrorRate(0.0);
        }
        ErrorRate(value.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ErrorRate {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        ErrorRate::new(value)
    }
}

impl From<ErrorRate> for f64 {
    fn from(e: ErrorRate) -> f64 {
        e.0
    }
}

/// Envelope of valid Bayes-error bounds under label noise, anchored at the best
/// known (state-of-the-art) error `sota` of the clean dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCurve {
    classes: ClassCount,
    sota: ErrorRate,
}

impl EnvelopeCurve {
    pub fn new(classes: ClassCount, sota: ErrorRate) -> Result<Self> {
        if sota.get() > classes.chance_error() {
            return Err(Error::ErrorAboveChance { rate: sota.get(), classes: classes.get() });
        }
        Ok(EnvelopeCurve { classes, sota })
    }

    pub fn classes(&self) -> ClassCount {
        self.classes
    }

    pub fn sota(&self) -> ErrorRate {
        self.sota
    }

    /// Lower envelope `rho (1 - 1/C)`.
    #[inline]
    pub fn lower_at(&self, rho: f64) -> f64 {
        rho * self.classes.chance_error()
    }

    /// Upper envelope `s + rho (1 - 1/C - s)`.
    #[inline]
    pub fn upper_at(&self, rho: f64) -> f64 {
        let s = self.sota.get();
        s + rho * (self.classes.chance_error() - s)
    }
}

/// Lower and upper Bayes-error estimate of one trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateInterval {
    lower: ErrorRate,
    upper: ErrorRate,
}

impl EstimateInterval {
    pub fn new(lower: ErrorRate, upper: ErrorRate) -> Result<Self> {
        if lower > upper {
            return Err(Error::InvalidValue(format!("interval lower {} exceeds upper {}", lower.get(), upper.get())));
        }
        Ok(EstimateInterval { lower, upper })
    }

    /// Interval of a single-value estimator.
    pub fn point(value: ErrorRate) -> Self {
        EstimateInterval { lower: value, upper: value }
    }

    /// Builds an interval from two raw values, ordering them and clamping to `[0, 1]`.
    pub(crate) fn ordered(a: f64, b: f64) -> Self {
        let (a, b) = (ErrorRate::clamped(a), ErrorRate::clamped(b));
        if a <= b {
            EstimateInterval { lower: a, upper: b }
        } else {
            EstimateInterval { lower: b, upper: a }
        }
    }

    pub fn lower(&self) -> ErrorRate {
        self.lower
    }

    pub fn upper(&self) -> ErrorRate {
        self.upper
    }
}

/// Bayes error after resampling each label with probability `rho` uniformly
/// over all `C` classes: `R + rho (1 - 1/C - R)`.
pub fn noisy_ber(r_star: ErrorRate, rho: NoiseLevel, c: ClassCount) -> Result<ErrorRate> {
    let chance = c.chance_error();
    let r = r_star.get();
    if r > chance {
        return Err(Error::ErrorAboveChance { rate: r, classes: c.get() });
    }
    let value = r + rho.get() * (chance - r);
    // affine combination of two points in [r, chance]; clamp only absorbs rounding
    Ok(ErrorRate::clamped(value.min(chance).max(r)))
}

/// `(lower, upper)` envelope values at noise level `rho`.
pub fn envelope(rho: NoiseLevel, env: &EnvelopeCurve) -> (ErrorRate, ErrorRate) {
    let rho = rho.get();
    (ErrorRate::clamped(env.lower_at(rho)), ErrorRate::clamped(env.upper_at(rho)))
}

/// Inverts the asymptotic 1NN bound: `err / (1 + sqrt(1 - C err / (C - 1)))`.
///
/// The radicand is clamped to `[0, 1]` and the output to `[0, 1 - 1/C]`, so finite
/// sample errors above the chance level still map to a value.
pub fn cover_hart_lower(err: ErrorRate, c: ClassCount) -> ErrorRate {
    let e = err.get();
    let cf = c.get() as f64;
    let radicand = (1.0 - cf * e / (cf - 1.0)).clamp(0.0, 1.0);
    finish_lower(e / (1.0 + radicand.sqrt()), c)
}

/// Lower bound from a `k`-NN error. Binary tasks with `k > 1` use the sharper
/// divisors `1 + sqrt(2/k)` (k = 2) and `1 + sqrt(1/k)` (k > 2); every other case
/// falls back to [`cover_hart_lower`].
pub fn knn_lower(err: ErrorRate, c: ClassCount, k: usize) -> Result<ErrorRate> {
    if k == 0 {
        return Err(Error::InvalidValue("k must be >= 1".into()));
    }
    if c.get() > 2 || k == 1 {
        return Ok(cover_hart_lower(err, c));
    }
    let kf = k as f64;
    let divisor = if k == 2 { 1.0 + (2.0 / kf).sqrt() } else { 1.0 + (1.0 / kf).sqrt() };
    Ok(finish_lower(err.get() / divisor, c))
}

fn finish_lower(value: f64, c: ClassCount) -> ErrorRate {
    ErrorRate::clamped(value.clamp(0.0, c.chance_error()))
}

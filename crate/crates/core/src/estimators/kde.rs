use rayon::prelude::*;

use crate::bounds::{ErrorRate, EstimateInterval};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::neighbors::squared_euclidean;

/// Estimated class posteriors of every evaluated sample, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorEstimate {
    classes: usize,
    values: Vec<f64>,
}

impl PosteriorEstimate {
    pub fn num_samples(&self) -> usize {
        self.values.len() / self.classes
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.classes..(i + 1) * self.classes]
    }

    /// Mean of `1 - max_y eta_y(x)`: the Bayes error of the plug-in posterior.
    pub fn plugin_error(&self) -> f64 {
        let n = self.num_samples();
        (0..n).map(|i| 1.0 - self.row(i).iter().copied().fold(0.0, f64::max)).sum::<f64>() / n as f64
    }
}

/// Gaussian kernel posteriors with per-coordinate standard deviation
/// `bandwidth`, each sample's own point included in its class sum.
///
/// With class priors equal to class fractions, `prior_y * density_y(x)` is
/// proportional to the unnormalized kernel sum over class `y`, so the posterior
/// is the normalized vector of class log-sum-exps.
pub fn kde_posteriors(eval: &Dataset, bandwidth: f64) -> Result<PosteriorEstimate> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidValue(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let c = eval.num_classes().get();
    if let Some(y) = eval.labels().class_counts(eval.num_classes()).iter().position(|&n| n == 0) {
        return Err(Error::Dataset(format!("class {y} has no samples")));
    }
    let features = eval.features();
    let labels = eval.labels();
    let n = eval.n();
    let scale = -0.5 / (bandwidth * bandwidth);

    let mut values = vec![0.0; n * c];
    values.par_chunks_mut(c).enumerate().for_each_init(
        || (vec![0.0f64; n], vec![0.0f64; c]),
        |(log_k, top), (q, out)| {
            let x = features.row(q);
            top.iter_mut().for_each(|t| *t = f64::NEG_INFINITY);
            for (i, lk) in log_k.iter_mut().enumerate() {
                *lk = scale * squared_euclidean(x, features.row(i));
                let y = labels.get(i);
                top[y] = top[y].max(*lk);
            }
            out.iter_mut().for_each(|o| *o = 0.0);
            for (i, &lk) in log_k.iter().enumerate() {
                let y = labels.get(i);
                out[y] += (lk - top[y]).exp();
            }
            // class log-sum-exps, then softmax across classes
            let mut best = f64::NEG_INFINITY;
            for (o, &t) in out.iter_mut().zip(top.iter()) {
                *o = t + o.ln();
                best = best.max(*o);
            }
            let mut total = 0.0;
            for o in out.iter_mut() {
                *o = (*o - best).exp();
                total += *o;
            }
            out.iter_mut().for_each(|o| *o /= total);
        },
    );
    Ok(PosteriorEstimate { classes: c, values })
}

pub(super) fn kde(eval: &Dataset, bandwidth: f64) -> Result<EstimateInterval> {
    let e = kde_posteriors(eval, bandwidth)?.plugin_error();
    Ok(EstimateInterval::point(ErrorRate::clamped(e)))
}

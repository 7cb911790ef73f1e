use rayon::prelude::*;

use crate::bounds::{ErrorRate, EstimateInterval};
use crate::data::{Dataset, FeatureMatrix};
use crate::error::{Error, Result};

const CHUNK: usize = 256;

/// Full-batch gradient descent settings for [`SoftmaxRegression`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingRecipe {
    pub learning_rate: f64,
    pub iterations: usize,
    /// L2 penalty on the weights (not the biases).
    pub l2: f64,
}

impl Default for TrainingRecipe {
    fn default() -> Self {
        TrainingRecipe { learning_rate: 0.1, iterations: 500, l2: 1e-4 }
    }
}

/// Multinomial logistic regression on standardized features.
#[derive(Clone, Debug)]
pub struct SoftmaxRegression {
    classes: usize,
    dim: usize,
    mean: Vec<f64>,
    inv_std: Vec<f64>,
    /// `classes x dim`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
    initial_loss: f64,
    final_loss: f64,
}

fn standardize(m: &FeatureMatrix, mean: &[f64], inv_std: &[f64]) -> Vec<f64> {
    m.rows().flat_map(|row| row.iter().zip(mean).zip(inv_std).map(|((&v, mu), s)| (v as f64 - mu) * s)).collect()
}

/// Overwrites `out` with softmax probabilities and returns `ln(sum exp(z))`.
fn softmax(logits: &[f64], out: &mut [f64]) -> f64 {
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - top).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    top + total.ln()
}

impl SoftmaxRegression {
    pub fn fit(train: &Dataset, recipe: TrainingRecipe) -> Result<Self> {
        let (n, d, c) = (train.n(), train.d(), train.num_classes().get());
        if n == 0 {
            return Err(Error::Dataset("empty training set".into()));
        }
        let mut mean = vec![0.0; d];
        for row in train.features().rows() {
            mean.iter_mut().zip(row).for_each(|(m, &v)| *m += v as f64);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for row in train.features().rows() {
            var.iter_mut().zip(row).zip(&mean).for_each(|((s, &v), m)| *s += (v as f64 - m).powi(2));
        }
        let inv_std: Vec<f64> = var
            .iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 0.0 {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        let x = standardize(train.features(), &mean, &inv_std);
        let labels = train.labels().as_slice();

        let mut model = SoftmaxRegression {
            classes: c,
            dim: d,
            mean,
            inv_std,
            weights: vec![0.0; c * d],
            bias: vec![0.0; c],
            initial_loss: f64::NAN,
            final_loss: f64::NAN,
        };
        for it in 0..=recipe.iterations {
            let (loss, grad_w, grad_b) = model.loss_and_gradient(&x, labels, recipe.l2);
            if it == 0 {
                model.initial_loss = loss;
            }
            model.final_loss = loss;
            if !loss.is_finite() {
                break;
            }
            if it == recipe.iterations {
                break;
            }
            model.weights.iter_mut().zip(&grad_w).for_each(|(w, g)| *w -= recipe.learning_rate * g);
            model.bias.iter_mut().zip(&grad_b).for_each(|(b, g)| *b -= recipe.learning_rate * g);
        }
        if !model.final_loss.is_finite() || model.final_loss > model.initial_loss {
            return Err(Error::NotConverged { iterations: recipe.iterations, final_loss: model.final_loss });
        }
        Ok(model)
    }

    fn logits(&self, x: &[f64], out: &mut [f64]) {
        for (y, o) in out.iter_mut().enumerate() {
            let w = &self.weights[y * self.dim..(y + 1) * self.dim];
            *o = self.bias[y] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Mean cross-entropy plus penalty, and its gradient, at the current parameters.
    fn loss_and_gradient(&self, x: &[f64], labels: &[u32], l2: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let (c, d) = (self.classes, self.dim);
        let n = labels.len();
        // fixed chunking and an in-order sum keep the result independent of thread count
        let partials: Vec<(f64, Vec<f64>, Vec<f64>)> = labels
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(chunk, ys)| {
                let mut gw = vec![0.0; c * d];
                let mut gb = vec![0.0; c];
                let mut loss = 0.0;
                let mut z = vec![0.0; c];
                let mut p = vec![0.0; c];
                for (offset, &y) in ys.iter().enumerate() {
                    let i = chunk * CHUNK + offset;
                    let xi = &x[i * d..(i + 1) * d];
                    self.logits(xi, &mut z);
                    loss += softmax(&z, &mut p) - z[y as usize];
                    p[y as usize] -= 1.0;
                    for (yy, &r) in p.iter().enumerate() {
                        gb[yy] += r;
                        gw[yy * d..(yy + 1) * d].iter_mut().zip(xi).for_each(|(g, &v)| *g += r * v);
                    }
                }
                (loss, gw, gb)
            })
            .collect();
        let mut loss = 0.0;
        let mut gw = vec![0.0; c * d];
        let mut gb = vec![0.0; c];
        for (l, w, b) in partials {
            loss += l;
            gw.iter_mut().zip(&w).for_each(|(a, v)| *a += v);
            gb.iter_mut().zip(&b).for_each(|(a, v)| *a += v);
        }
        let inv_n = 1.0 / n as f64;
        gw.iter_mut().zip(&self.weights).for_each(|(g, w)| *g = *g * inv_n + l2 * w);
        gb.iter_mut().for_each(|g| *g *= inv_n);
        let penalty = 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        (loss * inv_n + penalty, gw, gb)
    }

    /// Most probable class of every row; ties go to the smaller class index.
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<u32>> {
        if features.d() != self.dim {
            return Err(Error::DimensionMismatch { left: self.dim, right: features.d() });
        }
        let x = standardize(features, &self.mean, &self.inv_std);
        let mut z = vec![0.0; self.classes];
        Ok(x.chunks(self.dim)
            .map(|xi| {
                self.logits(xi, &mut z);
                let mut best = 0;
                for y in 1..self.classes {
                    if z[y] > z[best] {
                        best = y;
                    }
                }
                best as u32
            })
            .collect())
    }

    pub fn error(&self, eval: &Dataset) -> Result<ErrorRate> {
        if eval.n() == 0 {
            return Err(Error::Dataset("empty evaluation set".into()));
        }
        let predicted = self.predict(eval.features())?;
        let wrong = predicted.iter().zip(eval.labels().as_slice()).filter(|(a, b)| a != b).count();
        Ok(ErrorRate::clamped(wrong as f64 / eval.n() as f64))
    }

    pub fn initial_loss(&self) -> f64 {
        self.initial_loss
    }

    pub fn final_loss(&self) -> f64 {
        self.final_loss
    }
}

/// Lower bound from an error `e` by treating `(1 - e) / c` as the best reachable accuracy.
pub(super) fn scaled_lower(e: ErrorRate, scaling: f64) -> ErrorRate {
    ErrorRate::clamped((1.0 - (1.0 - e.get()) / scaling).max(0.0))
}

pub(super) fn scaled_classifier(train: &Dataset, eval: &Dataset, scaling: f64) -> Result<EstimateInterval> {
    let model = SoftmaxRegression::fit(train, TrainingRecipe::default())?;
    let e = model.error(eval)?;
    EstimateInterval::new(scaled_lower(e, scaling), e)
}

//! Area scores of an estimator's bound curves against the noise envelope.
//!
//! `L` measures how far the lower-bound curve leaves the envelope band and `U`
//! does the same for the upper-bound curve. Each is split into the area below
//! the lower envelope (`left`) and above the upper envelope (`right`), and
//! scaled by `2C/(C-1)` so that always answering at chance level scores 1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bounds::{ClassCount, EnvelopeCurve, ErrorRate, EstimateInterval, NoiseLevel};
use crate::error::{Error, Result};

const GRID_TOLERANCE: f64 = 1e-9;

/// One estimator run at one noise level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub rho: NoiseLevel,
    pub seed: u64,
    pub estimate: EstimateInterval,
    pub wall_time_ms: u64,
}

/// Summary of all trials at one noise level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rho: f64,
    pub count: usize,
    pub lower_mean: f64,
    pub lower_std: f64,
    pub upper_mean: f64,
    pub upper_std: f64,
    pub lower_q05: f64,
    pub lower_q95: f64,
    pub upper_q05: f64,
    pub upper_q95: f64,
}

/// Mean bound curves over seeds, sorted by noise level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveEstimate {
    pub points: Vec<CurvePoint>,
}

impl CurveEstimate {
    pub fn rho(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rho).collect()
    }

    pub fn lower_mean(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lower_mean).collect()
    }

    pub fn upper_mean(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.upper_mean).collect()
    }
}

/// Mean and sample standard deviation; values are sorted first so the result
/// does not depend on input order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn group_by_rho(trials: &[TrialResult]) -> BTreeMap<u64, Vec<TrialResult>> {
    // noise levels are nonnegative, so their bit patterns sort like the values
    let mut groups: BTreeMap<u64, Vec<TrialResult>> = BTreeMap::new();
    for t in trials {
        groups.entry(t.rho.get().to_bits()).or_default().push(*t);
    }
    for g in groups.values_mut() {
        g.sort_by(|a, b| {
            a.seed
                .cmp(&b.seed)
                .then(a.estimate.lower().get().total_cmp(&b.estimate.lower().get()))
                .then(a.estimate.upper().get().total_cmp(&b.estimate.upper().get()))
        });
    }
    groups
}

pub fn aggregate_trials(trials: &[TrialResult]) -> Result<CurveEstimate> {
    if trials.is_empty() {
        return Err(Error::Scoring("no trials to aggregate".into()));
    }
    let points = group_by_rho(trials)
        .into_iter()
        .map(|(bits, group)| {
            let mut lower: Vec<f64> = group.iter().map(|t| t.estimate.lower().get()).collect();
            let mut upper: Vec<f64> = group.iter().map(|t| t.estimate.upper().get()).collect();
            lower.sort_by(f64::total_cmp);
            upper.sort_by(f64::total_cmp);
            let (lower_mean, lower_std) = mean_std(&lower);
            let (upper_mean, upper_std) = mean_std(&upper);
            CurvePoint {
                rho: f64::from_bits(bits),
                count: group.len(),
                lower_mean,
                lower_std,
                upper_mean,
                upper_std,
                lower_q05: quantile(&lower, 0.05),
                lower_q95: quantile(&lower, 0.95),
                upper_q05: quantile(&upper, 0.05),
                upper_q95: quantile(&upper, 0.95),
            }
        })
        .collect();
    Ok(CurveEstimate { points })
}

/// `int max(f, 0)` for the piecewise-linear `f` through `(xs[i], ys[i])`,
/// splitting each segment where `f` changes sign so the result is exact.
pub fn positive_area(xs: &[f64], ys: &[f64]) -> f64 {
    let mut area = 0.0;
    for (x, y) in xs.windows(2).zip(ys.windows(2)) {
        let (w, f0, f1) = (x[1] - x[0], y[0], y[1]);
        area += if f0 >= 0.0 && f1 >= 0.0 {
            0.5 * w * (f0 + f1)
        } else if f0 <= 0.0 && f1 <= 0.0 {
            0.0
        } else {
            // f crosses zero at x0 + t w
            let t = f0 / (f0 - f1);
            if f0 > 0.0 {
                0.5 * f0 * t * w
            } else {
                0.5 * f1 * (1.0 - t) * w
            }
        };
    }
    area
}

/// The four scaled escape areas of one pair of bound curves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Areas {
    pub l_left: f64,
    pub l_right: f64,
    pub u_left: f64,
    pub u_right: f64,
}

impl Areas {
    pub fn l(&self) -> f64 {
        self.l_left + self.l_right
    }

    pub fn u(&self) -> f64 {
        self.u_left + self.u_right
    }
}

fn check_grid(rho: &[f64]) -> Result<()> {
    if rho.len() < 2 {
        return Err(Error::Scoring(format!("need at least two noise levels, got {}", rho.len())));
    }
    if rho.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Scoring("noise levels must be strictly increasing".into()));
    }
    if rho[0].abs() > GRID_TOLERANCE || (rho[rho.len() - 1] - 1.0).abs() > GRID_TOLERANCE {
        return Err(Error::Scoring(format!("noise grid must span [0, 1], got [{}, {}]", rho[0], rho[rho.len() - 1])));
    }
    Ok(())
}

/// Escape areas of bound curves sampled on `rho`, which must span `[0, 1]`.
pub fn curve_areas(rho: &[f64], lower: &[f64], upper: &[f64], env: &EnvelopeCurve) -> Result<Areas> {
    check_grid(rho)?;
    if lower.len() != rho.len() || upper.len() != rho.len() {
        return Err(Error::Scoring("curve lengths differ from the noise grid".into()));
    }
    let diff = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..rho.len()).map(f).collect() };
    let ld: Vec<f64> = rho.iter().map(|&r| env.lower_at(r)).collect();
    let ud: Vec<f64> = rho.iter().map(|&r| env.upper_at(r)).collect();
    let scale = env.classes().area_scale();
    Ok(Areas {
        l_left: scale * positive_area(rho, &diff(&|i| ld[i] - lower[i])),
        l_right: scale * positive_area(rho, &diff(&|i| lower[i] - ud[i])),
        u_left: scale * positive_area(rho, &diff(&|i| ld[i] - upper[i])),
        u_right: scale * positive_area(rho, &diff(&|i| upper[i] - ud[i])),
    })
}

/// Scores with their dispersion across seed slices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub l: f64,
    pub l_left: f64,
    pub l_right: f64,
    pub u: f64,
    pub u_left: f64,
    pub u_right: f64,
    pub l_std: f64,
    pub l_left_std: f64,
    pub l_right_std: f64,
    pub u_std: f64,
    pub u_left_std: f64,
    pub u_right_std: f64,
    /// Number of seed slices averaged.
    pub slices: usize,
}

/// Scores of the mean curves (zero dispersion).
pub fn area_scores(curve: &CurveEstimate, c: ClassCount, sota: ErrorRate) -> Result<ScoreReport> {
    let env = EnvelopeCurve::new(c, sota)?;
    let a = curve_areas(&curve.rho(), &curve.lower_mean(), &curve.upper_mean(), &env)?;
    Ok(ScoreReport::from_slices(&[a]))
}

impl ScoreReport {
    fn from_slices(slices: &[Areas]) -> Self {
        let stat = |f: &dyn Fn(&Areas) -> f64| mean_std(&slices.iter().map(f).collect::<Vec<_>>());
        let (l, l_std) = stat(&|a| a.l());
        let (l_left, l_left_std) = stat(&|a| a.l_left);
        let (l_right, l_right_std) = stat(&|a| a.l_right);
        let (u, u_std) = stat(&|a| a.u());
        let (u_left, u_left_std) = stat(&|a| a.u_left);
        let (u_right, u_right_std) = stat(&|a| a.u_right);
        ScoreReport {
            l,
            l_left,
            l_right,
            u,
            u_left,
            u_right,
            l_std,
            l_left_std,
            l_right_std,
            u_std,
            u_left_std,
            u_right_std,
            slices: slices.len(),
        }
    }
}

/// Scores each seed slice separately and reports mean and sample std across
/// slices. Slice `s` takes the trial with the `s`-th smallest seed at every
/// noise level; the number of slices is the smallest per-level trial count.
pub fn score_trials(trials: &[TrialResult], c: ClassCount, sota: ErrorRate) -> Result<ScoreReport> {
    if trials.is_empty() {
        return Err(Error::Scoring("no trials to score".into()));
    }
    let env = EnvelopeCurve::new(c, sota)?;
    let groups = group_by_rho(trials);
    let rho: Vec<f64> = groups.keys().map(|&b| f64::from_bits(b)).collect();
    check_grid(&rho)?;
    let slices = groups.values().map(Vec::len).min().unwrap();
    let areas = (0..slices)
        .map(|s| {
            let lower: Vec<f64> = groups.values().map(|g| g[s].estimate.lower().get()).collect();
            let upper: Vec<f64> = groups.values().map(|g| g[s].estimate.upper().get()).collect();
            curve_areas(&rho, &lower, &upper, &env)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreReport::from_slices(&areas))
}

/// Scores every configuration in `groups`, ordered by key.
pub fn score_experiment<K: Ord + Clone>(
    groups: &BTreeMap<K, Vec<TrialResult>>,
    c: ClassCount,
    sota: ErrorRate,
) -> Result<Vec<(K, ScoreReport)>> {
    groups.iter().map(|(k, trials)| Ok((k.clone(), score_trials(trials, c, sota)?))).collect()
}

/// Which total a best-per-method reduction minimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    Lower,
    Upper,
}

/// For each method, the entry minimizing `L` (or `U`); ties go to the smaller key.
pub fn best_per_method<K: Ord + Clone, M: Ord + Clone>(
    reports: &[(K, ScoreReport)],
    method_of: impl Fn(&K) -> M,
    criterion: Criterion,
) -> Vec<(K, ScoreReport)> {
    let value = |r: &ScoreReport| match criterion {
        Criterion::Lower => r.l,
        Criterion::Upper => r.u,
    };
    let mut best: BTreeMap<M, (K, ScoreReport)> = BTreeMap::new();
    for (k, r) in reports {
        let m = method_of(k);
        let replace = match best.get(&m) {
            None => true,
            Some((bk, br)) => value(r).total_cmp(&value(br)).then_with(|| k.cmp(bk)).is_lt(),
        };
        if replace {
            best.insert(m, (k.clone(), *r));
        }
    }
    best.into_values().collect()
}

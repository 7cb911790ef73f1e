use crate::bounds::{cover_hart_lower, knn_lower, ClassCount, ErrorRate, EstimateInterval};
use crate::data::{Dataset, LabelVector};
use crate::error::{Error, Result};
use crate::neighbors::{knn_error_from_neighbors, DistanceMetric, NeighborList, QueryMode};

use super::cache::{CacheKey, FeatureCache};

fn error_interval(e: ErrorRate, c: ClassCount, k: usize) -> Result<EstimateInterval> {
    EstimateInterval::new(knn_lower(e, c, k)?, e)
}

pub(super) fn one_nn(
    cache: &FeatureCache,
    train: &Dataset,
    eval: &Dataset,
    metric: DistanceMetric,
) -> Result<EstimateInterval> {
    let nl = cache.neighbors(CacheKey::TrainEval { metric }, 1)?;
    let e = knn_error_from_neighbors(nl, 1, train.labels(), eval.labels(), eval.num_classes())?;
    EstimateInterval::new(cover_hart_lower(e, eval.num_classes()), e)
}

pub(super) fn knn(
    cache: &FeatureCache,
    train: &Dataset,
    eval: &Dataset,
    k: usize,
    metric: DistanceMetric,
) -> Result<EstimateInterval> {
    let nl = cache.neighbors(CacheKey::TrainEval { metric }, k)?;
    let e = knn_error_from_neighbors(nl, k, train.labels(), eval.labels(), eval.num_classes())?;
    error_interval(e, eval.num_classes(), k)
}

pub(super) fn knn_loo(
    cache: &FeatureCache,
    eval: &Dataset,
    k: usize,
    metric: DistanceMetric,
) -> Result<EstimateInterval> {
    let nl = cache.neighbors(CacheKey::Eval { metric, mode: QueryMode::LeaveOneOut }, k)?;
    let e = knn_error_from_neighbors(nl, k, eval.labels(), eval.labels(), eval.num_classes())?;
    error_interval(e, eval.num_classes(), k)
}

/// Calls `f` with the label histogram of the first `k` neighbors of each query.
fn for_each_histogram(nl: &NeighborList, k: usize, labels: &LabelVector, c: ClassCount, mut f: impl FnMut(&[u32])) {
    let mut counts = vec![0u32; c.get()];
    for q in 0..nl.num_queries() {
        counts.iter_mut().for_each(|x| *x = 0);
        for &i in &nl.indices(q)[..k] {
            counts[labels.get(i as usize)] += 1;
        }
        f(&counts);
    }
}

/// Mean plug-in error `1 - max_y k_y / k` over all queries.
fn plugin_statistic(nl: &NeighborList, k: usize, labels: &LabelVector, c: ClassCount) -> f64 {
    let mut total = 0.0;
    for_each_histogram(nl, k, labels, c, |counts| {
        total += 1.0 - *counts.iter().max().unwrap() as f64 / k as f64;
    });
    total / nl.num_queries() as f64
}

/// Mean of `sum_y k_y (k - k_y) / (k (k - 1))` over the first `k` neighbors of
/// every query: the probability that two distinct neighbors drawn without
/// replacement disagree, an estimate of the asymptotic 1NN error.
pub fn devijver_statistic(nl: &NeighborList, k: usize, labels: &LabelVector, c: ClassCount) -> Result<f64> {
    if k < 2 || k > nl.k() {
        return Err(Error::KOutOfRange { k, available: nl.k() });
    }
    if nl.num_queries() == 0 {
        return Err(Error::Dataset("empty evaluation set".into()));
    }
    let norm = (k * (k - 1)) as f64;
    let mut total = 0.0;
    for_each_histogram(nl, k, labels, c, |counts| {
        let pairs: u64 = counts.iter().map(|&ky| ky as u64 * (k as u64 - ky as u64)).sum();
        total += pairs as f64 / norm;
    });
    Ok(total / nl.num_queries() as f64)
}

pub(super) fn de_knn(
    cache: &FeatureCache,
    eval: &Dataset,
    k: usize,
    metric: DistanceMetric,
) -> Result<EstimateInterval> {
    let c = eval.num_classes();
    let resub = cache.neighbors(CacheKey::Eval { metric, mode: QueryMode::Resubstitution }, k)?;
    let loo = cache.neighbors(CacheKey::Eval { metric, mode: QueryMode::LeaveOneOut }, k)?;
    let optimistic = plugin_statistic(resub, k, eval.labels(), c);
    let pessimistic = plugin_statistic(loo, k, eval.labels(), c);
    // the self vote usually lowers the statistic, but nothing forces it on every sample
    Ok(EstimateInterval::ordered(optimistic, pessimistic))
}

pub(super) fn one_nn_knn(
    cache: &FeatureCache,
    eval: &Dataset,
    k: usize,
    metric: DistanceMetric,
) -> Result<EstimateInterval> {
    let c = eval.num_classes();
    let nl = cache.neighbors(CacheKey::Eval { metric, mode: QueryMode::Resubstitution }, k)?;
    let e = ErrorRate::clamped(devijver_statistic(nl, k, eval.labels(), c)?);
    EstimateInterval::new(cover_hart_lower(e, c), e)
}

/// Geometric training-size schedule `n/16, n/8, n/4, n/2, n`.
pub fn default_schedule(n: usize) -> Vec<usize> {
    [16, 8, 4, 2, 1].iter().map(|div| n / div).collect()
}

pub(super) fn resolve_schedule(schedule: Option<&[usize]>, n_train: usize) -> Result<Vec<usize>> {
    let schedule = schedule.map(<[usize]>::to_vec).unwrap_or_else(|| default_schedule(n_train));
    if schedule.len() < 3 {
        return Err(Error::InvalidValue(format!("schedule needs at least 3 sizes, got {schedule:?}")));
    }
    if schedule[0] == 0 || schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidValue(format!(
            "schedule must be positive and strictly increasing, got {schedule:?}"
        )));
    }
    if *schedule.last().unwrap() > n_train {
        return Err(Error::InvalidValue(format!("schedule {schedule:?} exceeds {n_train} training samples")));
    }
    Ok(schedule)
}

/// Least-squares fit of `e_m = a + b m^(-2/d)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtrapolationFit {
    pub intercept: f64,
    pub slope: f64,
}

pub fn fit_extrapolation(sizes: &[usize], errors: &[f64], dim: usize) -> Result<ExtrapolationFit> {
    if sizes.len() != errors.len() || sizes.len() < 2 {
        return Err(Error::InvalidValue(format!("{} sizes for {} errors", sizes.len(), errors.len())));
    }
    if dim == 0 {
        return Err(Error::InvalidValue("expansion dimension must be >= 1".into()));
    }
    let exponent = -2.0 / dim as f64;
    let xs: Vec<f64> = sizes.iter().map(|&m| (m as f64).powf(exponent)).collect();
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = errors.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    let sxy: f64 = xs.iter().zip(errors).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    if !(sxx > f64::EPSILON * f64::EPSILON * x_mean * x_mean * n) {
        return Err(Error::SingularFit);
    }
    let slope = sxy / sxx;
    Ok(ExtrapolationFit { intercept: y_mean - slope * x_mean, slope })
}

#[allow(clippy::too_many_arguments)]
pub(super) fn knn_extrapolate(
    cache: &FeatureCache,
    train: &Dataset,
    eval: &Dataset,
    k: usize,
    metric: DistanceMetric,
    schedule: Option<&[usize]>,
    dim: usize,
    seed: u64,
) -> Result<EstimateInterval> {
    let c = eval.num_classes();
    let schedule = resolve_schedule(schedule, train.n())?;
    let mut errors = Vec::with_capacity(schedule.len());
    for &size in &schedule {
        let (indices, nl) = cache.subsample(CacheKey::Subsample { metric, size, seed }, k)?;
        let labels = LabelVector::new(indices.iter().map(|&i| train.labels().as_slice()[i]).collect());
        errors.push(knn_error_from_neighbors(nl, k, &labels, eval.labels(), c)?.get());
    }
    let fit = fit_extrapolation(&schedule, &errors, dim)?;
    log::trace!("extrapolation sizes {schedule:?} errors {errors:?} -> {fit:?}");
    let a = ErrorRate::clamped(fit.intercept.clamp(0.0, c.chance_error()));
    error_interval(a, c, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureMatrix, Split};
    use crate::estimators::{self, EstimatorConfig};
    use crate::seed::rng_from_seed;
    use rand::Rng;

    fn dataset(points: &[f32], labels: &[u32], c: usize) -> Dataset {
        let f = FeatureMatrix::new(points.len(), 1, points.to_vec()).unwrap();
        Dataset::new(f, LabelVector::new(labels.to_vec()), ClassCount::new(c).unwrap(), Split::Eval).unwrap()
    }

    fn two_clusters(n: usize, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = (i % 2) as u32;
            pts.push(y as f32 * 100.0 + rng.random::<f32>());
            labels.push(y);
        }
        dataset(&pts, &labels, 2)
    }

    fn random_labels(n: usize, c: usize, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let pts: Vec<f32> = (0..n).map(|_| rng.random::<f32>()).collect();
        let labels: Vec<u32> = (0..n).map(|_| rng.random_range(0..c as u32)).collect();
        dataset(&pts, &labels, c)
    }

    const L2: DistanceMetric = DistanceMetric::SquaredEuclidean;

    #[test]
    fn separable_data_gives_zero() {
        let train = two_clusters(200, 1);
        let eval = two_clusters(200, 2);
        for r in [
            estimators::one_nn(&train, &eval, L2).unwrap(),
            estimators::knn(&train, &eval, 5, L2).unwrap(),
            estimators::knn_loo(&eval, 5, L2).unwrap(),
            estimators::de_knn(&eval, 5, L2).unwrap(),
            estimators::one_nn_knn(&eval, 5, L2).unwrap(),
        ] {
            assert_eq!((r.lower().get(), r.upper().get()), (0.0, 0.0));
        }
    }

    #[test]
    fn knn_with_one_neighbor_is_one_nn() {
        let train = random_labels(300, 3, 3);
        let eval = random_labels(300, 3, 4);
        assert_eq!(estimators::knn(&train, &eval, 1, L2).unwrap(), estimators::one_nn(&train, &eval, L2).unwrap());
    }

    #[test]
    fn noise_drives_bounds_to_chance() {
        for c in [2usize, 5] {
            let train = random_labels(5000, c, 10 + c as u64);
            let eval = random_labels(5000, c, 20 + c as u64);
            let chance = 1.0 - 1.0 / c as f64;
            let r = estimators::one_nn(&train, &eval, L2).unwrap();
            assert!((r.upper().get() - chance).abs() < 0.03, "{r:?}");
            assert!((r.lower().get() - chance).abs() < 0.03, "{r:?}");
            let r = estimators::knn_loo(&eval, 3, L2).unwrap();
            assert!((r.upper().get() - chance).abs() < 0.03, "{r:?}");
        }
    }

    #[test]
    fn loo_matches_standard_knn_on_held_out_copies() {
        // evaluating each point against the others by hand must match the LOO path
        let eval = random_labels(60, 3, 8);
        let k = 3;
        let loo = estimators::knn_loo(&eval, k, L2).unwrap();
        let mut wrong = 0;
        for q in 0..eval.n() {
            let rest: Vec<usize> = (0..eval.n()).filter(|&i| i != q).collect();
            let train = eval.select(&rest).unwrap();
            let query = eval.select(&[q]).unwrap();
            let e = crate::neighbors::knn_error(&train, &query, k, L2, QueryMode::Standard).unwrap();
            wrong += (e.get() > 0.0) as usize;
        }
        assert_eq!(loo.upper().get(), wrong as f64 / eval.n() as f64);
    }

    #[test]
    fn knn_lower_follows_binary_divisor() {
        let e = ErrorRate::new(0.2).unwrap();
        let r = error_interval(e, ClassCount::new(2).unwrap(), 2).unwrap();
        assert!((r.lower().get() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn de_knn_on_identical_labels_is_zero() {
        let ds = dataset(&[0.0, 1.0, 2.0, 3.0, 4.0], &[1, 1, 1, 1, 1], 3);
        let r = estimators::de_knn(&ds, 3, L2).unwrap();
        assert_eq!((r.lower().get(), r.upper().get()), (0.0, 0.0));
    }

    #[test]
    fn de_knn_matches_direct_plugin_oracle() {
        let ds = random_labels(3000, 2, 5);
        let k = 20;
        let r = estimators::de_knn(&ds, k, L2).unwrap();
        // oracle: sort all distances per point and count labels directly
        let pts = ds.features().values();
        let plugin = |include_self: bool| {
            let mut total = 0.0;
            for q in 0..ds.n() {
                let mut order: Vec<(f64, usize)> = (0..ds.n())
                    .filter(|&i| include_self || i != q)
                    .map(|i| (((pts[i] - pts[q]) as f64).powi(2), i))
                    .collect();
                order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                if include_self {
                    // self first even when another point sits at distance 0
                    let pos = order.iter().position(|&(_, i)| i == q).unwrap();
                    let me = order.remove(pos);
                    order.insert(0, me);
                }
                let ones = order[..k].iter().filter(|&&(_, i)| ds.labels().get(i) == 1).count();
                total += 1.0 - ones.max(k - ones) as f64 / k as f64;
            }
            total / ds.n() as f64
        };
        let (resub, loo) = (plugin(true), plugin(false));
        assert!((r.lower().get() - resub.min(loo)).abs() < 1e-12);
        assert!((r.upper().get() - resub.max(loo)).abs() < 1e-12);
        // leave-one-out counts of independent fair labels are Binomial(k, 1/2)
        let mut expected = 0.0;
        let mut binom = 1.0f64;
        for j in 0..=k {
            expected += binom / 2f64.powi(k as i32) * (1.0 - j.max(k - j) as f64 / k as f64);
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
        assert!((loo - expected).abs() < 0.02, "{loo} vs {expected}");
    }

    #[test]
    fn devijver_hand_example() {
        // k = 3 covers all three points for every query: counts [2, 1, 0]
        let ds = dataset(&[0.0, 1.0, 2.0], &[0, 0, 1], 3);
        let nl = crate::neighbors::knn_query(ds.features(), ds.features(), 3, L2, QueryMode::Resubstitution).unwrap();
        let stat = devijver_statistic(&nl, 3, ds.labels(), ds.num_classes()).unwrap();
        assert!((stat - 2.0 / 3.0).abs() < 1e-15);
        let same = dataset(&[0.0, 1.0, 2.0], &[2, 2, 2], 3);
        let nl =
            crate::neighbors::knn_query(same.features(), same.features(), 3, L2, QueryMode::Resubstitution).unwrap();
        assert_eq!(devijver_statistic(&nl, 3, same.labels(), same.num_classes()).unwrap(), 0.0);
    }

    #[test]
    fn one_nn_knn_on_noise_approaches_one_half() {
        let ds = random_labels(4000, 2, 12);
        let r = estimators::one_nn_knn(&ds, 50, L2).unwrap();
        assert!((r.upper().get() - 0.5).abs() < 0.03, "{r:?}");
        assert!(r.lower().get() <= r.upper().get());
        assert!(estimators::one_nn_knn(&ds, 1, L2).is_err());
    }

    #[test]
    fn exact_extrapolation_recovery() {
        let sizes = [500, 1000, 2000, 4000, 8000];
        let errs: Vec<f64> = sizes.iter().map(|&m| 0.1 + 0.5 * (m as f64).powf(-1.0)).collect();
        let fit = fit_extrapolation(&sizes, &errs, 2).unwrap();
        assert!((fit.intercept - 0.1).abs() < 1e-9);
        assert!((fit.slope - 0.5).abs() < 1e-6);
        let flat = fit_extrapolation(&sizes, &[0.07; 5], 3).unwrap();
        assert!((flat.intercept - 0.07).abs() < 1e-15);
        assert!(matches!(fit_extrapolation(&[10, 10, 10], &[0.1, 0.2, 0.3], 2), Err(Error::SingularFit)));
    }

    #[test]
    fn schedule_validation() {
        assert_eq!(resolve_schedule(None, 1600).unwrap(), vec![100, 200, 400, 800, 1600]);
        assert!(resolve_schedule(Some(&[10, 20]), 100).is_err());
        assert!(resolve_schedule(Some(&[10, 10, 20]), 100).is_err());
        assert!(resolve_schedule(Some(&[10, 20, 200]), 100).is_err());
        assert!(resolve_schedule(None, 8).is_err());
    }

    #[test]
    fn extrapolation_on_separable_data() {
        let train = two_clusters(800, 30);
        let eval = two_clusters(200, 31);
        let cfg = EstimatorConfig::KnnExtrapolate {
            k: 1,
            metric: L2,
            schedule: None,
            expansion_dim: None,
            subsample_seed: 4,
        };
        let r = estimators::estimate(&train, &eval, &cfg).unwrap();
        assert_eq!(r.upper().get(), 0.0);
    }
}

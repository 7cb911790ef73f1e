use crate::bounds::{ClassCount, ErrorRate, EstimateInterval};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mst::dichotomous_counts;

use super::cache::FeatureCache;

/// Bounds from the pooled divergence estimate `g = sum_{i<j} R_ij / (2n)`,
/// where `R_ij` counts spanning-tree edges joining classes `i` and `j`:
///
/// * upper `min(2g, 1 - 1/C)`
/// * lower `(1 - 1/C) (1 - sqrt(max(0, 1 - 2C g / (C - 1))))`
pub fn ghp_bounds(g: f64, c: ClassCount) -> Result<EstimateInterval> {
    if !(g >= 0.0 && g.is_finite()) {
        return Err(Error::InvalidValue(format!("divergence estimate must be nonnegative, got {g}")));
    }
    let chance = c.chance_error();
    let upper = (2.0 * g).min(chance);
    let lower = chance * (1.0 - (1.0 - c.area_scale() * g).max(0.0).sqrt());
    // 1 - sqrt(1 - a) <= a on [0, 1], so lower <= upper up to rounding
    Ok(EstimateInterval::ordered(lower.min(upper), upper))
}

pub(super) fn ghp(cache: &FeatureCache, eval: &Dataset) -> Result<EstimateInterval> {
    let edges = cache.mst()?;
    let counts = dichotomous_counts(edges, eval.labels(), eval.num_classes())?;
    let g = counts.dichotomous() as f64 / (2.0 * eval.n() as f64);
    let r = ghp_bounds(g, eval.num_classes())?;
    debug_assert!(r.upper() <= ErrorRate::clamped(eval.num_classes().chance_error()));
    Ok(r)
}

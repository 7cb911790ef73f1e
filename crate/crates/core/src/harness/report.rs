use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{TrialRow, TrialStatus};
use crate::bounds::{EnvelopeCurve, ErrorRate, EstimateInterval, NoiseLevel};
use crate::error::{Error, Result};
use crate::scoring::{aggregate_trials, best_per_method, score_trials, Criterion, ScoreReport, TrialResult};

pub const SCORES_FILE: &str = "scores.csv";
pub const BEST_L_FILE: &str = "best_L.csv";
pub const BEST_U_FILE: &str = "best_U.csv";
pub const PLOT_FILE: &str = "plot_data.json";

const RHO_MATCH: f64 = 1e-12;

/// Identifies one estimator variant within a trial table.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub dataset: String,
    pub transformation: String,
    pub method: String,
    pub variant: String,
}

impl GroupKey {
    fn of(row: &TrialRow) -> Self {
        GroupKey {
            dataset: row.dataset.clone(),
            transformation: row.transformation.clone(),
            method: row.method.clone(),
            variant: row.variant.clone(),
        }
    }
}

/// One line of the score table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub dataset: String,
    pub transformation: String,
    pub method: String,
    pub variant: String,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "L_left")]
    pub l_left: f64,
    #[serde(rename = "L_right")]
    pub l_right: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "U_left")]
    pub u_left: f64,
    #[serde(rename = "U_right")]
    pub u_right: f64,
    #[serde(rename = "L_std")]
    pub l_std: f64,
    #[serde(rename = "U_std")]
    pub u_std: f64,
}

impl ScoreRow {
    fn new(key: &GroupKey, r: &ScoreReport) -> Self {
        ScoreRow {
            dataset: key.dataset.clone(),
            transformation: key.transformation.clone(),
            method: key.method.clone(),
            variant: key.variant.clone(),
            l: r.l,
            l_left: r.l_left,
            l_right: r.l_right,
            u: r.u,
            u_left: r.u_left,
            u_right: r.u_right,
            l_std: r.l_std,
            u_std: r.u_std,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreOutcome {
    pub scores: Vec<ScoreRow>,
    pub best_l: Vec<ScoreRow>,
    pub best_u: Vec<ScoreRow>,
    /// Rows left out because their status is not `ok`.
    pub excluded_rows: usize,
    /// Variants that could not be scored, with the reason.
    pub rejected: Vec<(GroupKey, String)>,
}

fn to_result(row: &TrialRow) -> Result<TrialResult> {
    let (Some(lower), Some(upper)) = (row.lower, row.upper) else {
        return Err(Error::Scoring(format!("ok row without estimate values: {row:?}")));
    };
    Ok(TrialResult {
        rho: NoiseLevel::new(row.rho)?,
        seed: row.seed,
        estimate: EstimateInterval::new(ErrorRate::new(lower)?, ErrorRate::new(upper)?)?,
        wall_time_ms: row.wall_time_ms,
    })
}

/// Successful trials grouped by variant, with the count of skipped rows.
fn group_rows(rows: &[TrialRow]) -> Result<(BTreeMap<GroupKey, Vec<TrialResult>>, usize)> {
    let mut groups: BTreeMap<GroupKey, Vec<TrialResult>> = BTreeMap::new();
    let mut excluded = 0;
    for row in rows {
        if row.status != TrialStatus::Ok {
            excluded += 1;
            continue;
        }
        groups.entry(GroupKey::of(row)).or_default().push(to_result(row)?);
    }
    Ok((groups, excluded))
}

/// Noise levels of `grid` with no trial in `trials`.
fn missing_levels(trials: &[TrialResult], grid: &[f64]) -> Vec<f64> {
    grid.iter().copied().filter(|&r| !trials.iter().any(|t| (t.rho.get() - r).abs() <= RHO_MATCH)).collect()
}

/// Scores every variant covering the whole noise grid; variants with missing
/// levels are rejected with a diagnostic instead of failing the table.
pub fn score_rows(rows: &[TrialRow], envelope: &EnvelopeCurve, grid: &[f64]) -> Result<ScoreOutcome> {
    let (groups, excluded_rows) = group_rows(rows)?;
    if excluded_rows > 0 {
        log::warn!("{excluded_rows} trial rows without an ok status were excluded from scoring");
    }
    let mut outcome = ScoreOutcome { excluded_rows, ..Default::default() };
    let mut reports = Vec::new();
    for (key, trials) in &groups {
        let missing = missing_levels(trials, grid);
        if !missing.is_empty() {
            let reason = format!("no ok trials at rho = {missing:?}");
            log::warn!("{}[{}] rejected: {reason}", key.method, key.variant);
            outcome.rejected.push((key.clone(), reason));
            continue;
        }
        match score_trials(trials, envelope.classes(), envelope.sota()) {
            Ok(report) => reports.push((key.clone(), report)),
            Err(e) => {
                log::warn!("{}[{}] rejected: {e}", key.method, key.variant);
                outcome.rejected.push((key.clone(), e.to_string()));
            }
        }
    }
    if reports.is_empty() {
        return Err(Error::Scoring("no variant has complete noise-level coverage".into()));
    }
    let method_of = |k: &GroupKey| (k.dataset.clone(), k.method.clone());
    let rows_of = |r: &[(GroupKey, ScoreReport)]| r.iter().map(|(k, s)| ScoreRow::new(k, s)).collect::<Vec<_>>();
    outcome.best_l = rows_of(&best_per_method(&reports, method_of, Criterion::Lower));
    outcome.best_u = rows_of(&best_per_method(&reports, method_of, Criterion::Upper));
    outcome.scores = rows_of(&reports);
    Ok(outcome)
}

fn write_rows(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Scores a trial table and writes the score, best-`L` and best-`U` tables into `out_dir`.
pub fn score_table(config: &ExperimentConfig, rows: &[TrialRow], out_dir: &Path) -> Result<ScoreOutcome> {
    let outcome = score_rows(rows, &config.envelope()?, &config.rho.values())?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_rows(&out_dir.join(SCORES_FILE), &outcome.scores)?;
    write_rows(&out_dir.join(BEST_L_FILE), &outcome.best_l)?;
    write_rows(&out_dir.join(BEST_U_FILE), &outcome.best_u)?;
    Ok(outcome)
}

/// Bound curves of one variant ready for plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    #[serde(flatten)]
    pub key: GroupKey,
    pub rho: Vec<f64>,
    pub lower_mean: Vec<f64>,
    pub lower_std: Vec<f64>,
    pub upper_mean: Vec<f64>,
    pub upper_std: Vec<f64>,
    pub lower_q05: Vec<f64>,
    pub lower_q95: Vec<f64>,
    pub upper_q05: Vec<f64>,
    pub upper_q95: Vec<f64>,
    pub envelope_lower: Vec<f64>,
    pub envelope_upper: Vec<f64>,
}

pub fn plot_series(rows: &[TrialRow], envelope: &EnvelopeCurve) -> Result<Vec<PlotSeries>> {
    let (groups, _) = group_rows(rows)?;
    groups
        .into_iter()
        .map(|(key, trials)| {
            let curve = aggregate_trials(&trials)?;
            let col = |f: fn(&crate::scoring::CurvePoint) -> f64| curve.points.iter().map(f).collect::<Vec<_>>();
            let rho = curve.rho();
            Ok(PlotSeries {
                key,
                lower_mean: col(|p| p.lower_mean),
                lower_std: col(|p| p.lower_std),
                upper_mean: col(|p| p.upper_mean),
                upper_std: col(|p| p.upper_std),
                lower_q05: col(|p| p.lower_q05),
                lower_q95: col(|p| p.lower_q95),
                upper_q05: col(|p| p.upper_q05),
                upper_q95: col(|p| p.upper_q95),
                envelope_lower: rho.iter().map(|&r| envelope.lower_at(r)).collect(),
                envelope_upper: rho.iter().map(|&r| envelope.upper_at(r)).collect(),
                rho,
            })
        })
        .collect()
}

/// Writes the plot series of every variant as a JSON array.
pub fn emit_plot_data(config: &ExperimentConfig, rows: &[TrialRow], path: &Path) -> Result<Vec<PlotSeries>> {
    let series = plot_series(rows, &config.envelope()?)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(&series)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(series)
}

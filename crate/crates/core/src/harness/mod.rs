//! Experiment driver: TOML configuration, the parallel trial grid, and the
//! trial, score and plot tables it writes.

mod config;
mod report;
mod run;
mod synth;

pub use config::{
    DatasetConfig, EstimatorGrid, ExperimentConfig, FileFormat, OneOrMany, OutputOptions, ResourceCaps, RhoGrid,
};
pub use report::{
    emit_plot_data, plot_series, score_rows, score_table, GroupKey, PlotSeries, ScoreOutcome, ScoreRow, BEST_L_FILE,
    BEST_U_FILE, PLOT_FILE, SCORES_FILE,
};
pub use run::{
    execute_trials, read_trials, run_experiment, RunSummary, TrialRow, TrialStatus, TIMINGS_FILE, TRIALS_FILE,
};
pub use synth::{write_synthetic, ORACLE_FILE, SYNTH_EVAL_FILE, SYNTH_TRAIN_FILE};

//! Experiment drivers: test metrics, seed aggregation, the tuning grid,
//! ablation sweeps, synthetic win-rate experiments and their tables.

mod ablation;
mod grid;
mod parallel;
mod report;
mod synth;
mod tables;

pub use ablation::{ablation_sweep, delta_pct, AblationRow, AblationTable, Variant, ABLATION_SEED};
pub use grid::{select_best, tuning_grid, GridCell, GridResult, GridSettings};
pub use parallel::par_map;
pub use report::{
    config_fingerprint, evaluate, mean, multi_seed, run, sample_std, MetricReport, RunOutcome, RunSpec, SeedFailure,
    SeedSummary,
};
pub use synth::{contender_config, median, synth_experiment, win_rate, Contender, SynthSettings, Trial, WinRateResult};
pub use tables::{ablation_table, activity_table, grid_table, metrics_table, seeds_table, winrate_table, Table};

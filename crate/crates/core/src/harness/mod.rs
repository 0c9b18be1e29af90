//! Seeded experiment runner: training runs with on-disk artifacts, greedy
//! evaluation, and sweeps over N, f_max or a time-varying population.
//!
//! Every run directory holds `config.toml` (the fully resolved config with
//! the run's seed), the per-episode `metrics.csv`, `moving_average.csv` and a
//! `checkpoint.bin` / `checkpoint.manifest.json` pair. A `PARTIAL` file marks a
//! run that did not finish; it carries the error message.

mod model;
mod run;
mod sweep;

pub use model::Model;
pub use run::{
    eval_at, fixed_population, run_dir, run_eval, run_training, EvalSummary, TrainedRun,
};
pub use sweep::{schedule_trace, sweep, MetricsRow, MetricsTable, SlotEnergy};

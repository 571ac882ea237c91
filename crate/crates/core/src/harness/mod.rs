//! Experiment harness: datasets, configs, instrumented runs, grids and
//! log summaries.

pub mod config;
pub mod data;
pub mod grid;
pub mod record;
pub mod run;
pub mod summary;

pub use config::{Clock, ExperimentConfig, ObjectiveSpec, RawConfig, SpectralConfig};
pub use data::{load_dataset, DataSource, DatasetSpec};
pub use grid::{run_grid, GridEntry, GridIndex};
pub use record::{read_csv_file, write_csv_file, Flags, LogTable, StepRecord};
pub use run::{run_experiment, run_to_file};
pub use summary::{summarize, Summary};

//! Configuration, dataset checks, trial execution and parameter sweeps.

mod config;
mod io;
mod run;
mod sweep;

pub use config::{
    dataset_reference_seed, resolve_dataset, Algorithm, ExperimentConfig, DATA_DIR_ENV,
    REFERENCE_SEED_ROOT,
};
pub use io::{
    partition_dump, read_labels, similarity_from_files, verify_dataset, write_labels,
    write_labels_file, write_rows, write_rows_to, VerifyReport,
};
pub use run::{
    median, run_experiment, run_experiment_detailed, run_experiment_on, run_trial, Dataset,
    Experiment, Reference, ResultRecord, TrialOutput,
};
pub use sweep::{sweep, sweep_on, SummaryRow, SweepAxis, SweepOutcome};

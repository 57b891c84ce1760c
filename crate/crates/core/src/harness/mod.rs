//! Experiment runner: configuration, seeds, calibration and result files.
//!
//! An experiment is a named [`Experiment`] in an [`ExperimentRegistry`].
//! [`run_experiment`] runs one, keeps every output in memory until it has
//! finished, then writes the CSVs, `summary.json` and a `manifest.json`
//! from which the run can be repeated exactly.

mod calibrate;
mod config;
mod experiments;
mod output;
mod run;
mod seed;

pub use calibrate::{
    calibrate, calibration_report, CalibrationReport, CalibrationRow, CALIBRATION_RESIDUAL_LIMIT,
    EXPONENT_TOLERANCE,
};
pub use config::{ExperimentConfig, Overrides, SchemeChoice, ENV_PREFIX, KEYS};
pub use experiments::{
    resolve_scheme, Experiment, ExperimentRegistry, ASCLT_AVERAGED_TOLERANCE,
    ASCLT_SINGLE_TOLERANCE, EXPECTED_RATIO_BAND,
};
pub use output::{
    row, sha256_hex, verdict_label, Artifacts, CsvField, FileRecord, Manifest, VerdictEntry,
    MANIFEST_FILE, SUMMARY_FILE,
};
pub use run::{
    config_from_manifest, rerun_from_manifest, run_experiment, run_experiment_with_threads,
    run_with_registry, RunOutcome, SEED_RULE,
};
pub use seed::{derive_path_seed, seed_uniform, splitmix64_finalize};

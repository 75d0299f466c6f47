//! Experiment configuration, orchestration and run output.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{
    DiagnosticsConfig, ExperimentConfig, GridConfig, Method, ParticleConfig, ProfileConfig, ScheduleKind, System, TimeConfig, KEYS, PARTICLE_BUDGET,
};
pub use experiment::{
    decay_sweep, initial_density, initial_particles, run_experiment, schedule, solver_config, worker_count, ExperimentFailure, ExperimentOutcome,
    FinalState, SweepPoint, WORKERS_ENV,
};
pub use output::{
    exit_code, parse_series_csv, resolve_output_dir, series_csv, series_file_name, verify_manifest, write_failure, write_outcome, FileEntry,
    Manifest, CHECK_FAILURE_EXIT, MANIFEST_FILE, OUTPUT_ROOT_ENV,
};

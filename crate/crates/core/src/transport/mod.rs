//! Time evolution under free and perturbed transport: semi-Lagrangian grids
//! (`n = 2`), particles (`n = 3`), and the observation loop.

pub mod config;
pub mod particles;
pub mod run;
pub mod sweeps;

pub use config::{ObservationSchedule, SolverConfig, MAX_CFL_SAFETY};
pub use particles::{run_particles, step_particles, ParticleField, ParticleSettings, ParticleStep, OFF_DOMAIN_TOLERANCE};
pub use run::{
    config_hash, free_transport_exact, mass_error, run, run_with, step_semilagrangian, FieldCache, FieldSnapshot, FieldState, KickContext,
    NoPassenger, Observation, Observer, Passenger, RunFailure, RunRecord, DEFAULT_STREAMING_STEP,
};
pub use sweeps::{free_flow_lab, kick_lab, kick_streaming, kick_streaming_with, streaming_shifts};

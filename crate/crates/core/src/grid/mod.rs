//! Phase-space grids, spatial fields and particle ensembles.

pub mod density;
pub mod field;
pub mod io;
pub mod particles;
pub mod spec;
pub mod stencil;

pub use density::{
    apply_vfield, l1_norm, sample_function, velocity_average, velocity_average_on, BoundaryReport, Frame, PhaseDensity, BOUNDARY_TOLERANCE,
};
pub use field::SpatialField;
pub use particles::{deposit, gather, Deposit, ParticleEnsemble};
pub use spec::{GridSpec, SpatialGrid, DEFAULT_CELL_BUDGET};

//! Modified vector fields `Yⁱ = Zⁱ − Σ_k varphi[i][k] ∂_{x^k}` for `n = 2`:
//! coefficient transport, modified energies and bootstrap ratio checks.

pub mod bootstrap;
pub mod coefficients;

pub use bootstrap::{
    bootstrap_check, modified_energy_n, modified_energy_series, varphi_norms, varphi_series, ModifiedEnergyReport, ModifiedFieldObserver,
    EXCURSION_LIMIT, GRAD_VARPHI_SERIES, VARPHI_ORDER,
};
pub use coefficients::{add_broadcast, apply_modified_field, modified_images, spatial_derivatives, CoefficientField};

//! Energies, sup-ratios, commuted potentials, bilinear terms, decay fits and
//! property suites computed from densities and run records.

pub mod energy;
pub mod fit;
pub mod ks;
pub mod lemmas;
pub mod observers;
pub mod potentials;

pub use energy::{check_stencil_budget, energy_n, energy_with, EnergyMode, EnergyReport, EnergyTerm, N_MAX_GRID};
pub use fit::{decay_fit, default_window, excursion_ratio, DecayFit, MIN_FIT_POINTS};
pub use ks::{ks_ratio, ks_ratio_with, weighted_density_sup};
pub use lemmas::{
    bessel_suite, commutator_suite, kernel_integral_suite, ks_suite, log_log_slope, random_bump_data, LemmaCheck, LemmaCheckReport, LemmaSuite,
    BESSEL_ENVELOPE_LIMIT,
};
pub use observers::{
    budget_series, energy_series, grad_field_decay, grad_field_series, high_dim_commutator_budget, CommutedFieldObserver, EnergyObserver,
};
pub use potentials::{apply_macroscopic, bilinear_term, commutator_budget, envelope_power, weighted_l1, BilinearTerm, CommutedPotentials};

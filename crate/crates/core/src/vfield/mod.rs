//! Exact symbolic algebra of the commuting vector fields.
//!
//! Operators are first-order differential expressions in `(t, x, v)` with
//! polynomial coefficients over ℚ, so every commutation identity is checked
//! exactly rather than to a floating tolerance.

pub mod expr;
pub mod gamma;
pub mod linalg;
pub mod poly;

pub use expr::{free_transport, perturbed_transport, FieldExpression, SecondOrderOperator, Slot};
pub use gamma::{
    commute_with_tphi_order1, gamma_count, laplacian_commutation, make_gamma, rho_commutation, rotation_v, rotation_x, scaling_v, scaling_x,
    structure_constants, weighted_derivative_identity_check, MultiIndex, RhoCommutation, StructureTable, SymbolKind, TphiTemplate, VectorFieldSymbol,
};
pub use linalg::{express_in_basis, Span};
pub use poly::{integer, rational, CompiledPolynomial, Polynomial, Variable};

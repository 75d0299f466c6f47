//! Green's-function field solvers, Bessel kernels and kernel integrals.

pub mod bessel;
pub mod decay_integral;
pub mod fft;
pub mod kernel;
pub mod solver;

pub use bessel::{bessel_k, bessel_k_bound, bessel_k_half, bessel_k_scaled, k0_fast};
pub use decay_integral::{kernel_decay_integral, DecayIntegral};
pub use kernel::{kernel_gradient_magnitude, kernel_l1_norms, kernel_value, sphere_area, KernelKind, KernelSpec};
pub use solver::{
    iterated_yukawa_convolution, origin_weight, residual, solve_field, solve_field_direct, FieldSolution, FieldSolver, SingularCellRule, SolveMethod,
    CUBIC_LATTICE_COULOMB,
};

/// CSV table `r,value` of a kernel at the given radii.
pub fn kernel_table_csv(spec: KernelSpec, radii: &[f64]) -> crate::Result<String> {
    let mut out = String::from("r,value\n");
    for &r in radii {
        out.push_str(&format!("{r:.17e},{:.17e}\n", kernel_value(spec, r)?));
    }
    Ok(out)
}

/// CSV table `nu,r,k_nu,bound,ratio` of `K_ν(r)` against its envelope.
pub fn bessel_table_csv(orders: &[f64], radii: &[f64]) -> crate::Result<String> {
    let mut out = String::from("nu,r,k_nu,bound,ratio\n");
    for &nu in orders {
        for &r in radii {
            let (k, bound) = (bessel_k(nu, r)?, bessel_k_bound(nu, r)?);
            out.push_str(&format!("{nu:?},{r:.17e},{k:.17e},{bound:.17e},{:.17e}\n", k / bound));
        }
    }
    Ok(out)
}

//! Property tests of algebraic identities, serialization and linear solvers.

use approx::assert_relative_eq;
use proptest::prelude::*;
use vlasov_lab::diagnostics::decay_fit;
use vlasov_lab::greens::{FieldSolver, KernelSpec, SingularCellRule};
use vlasov_lab::grid::io::{density_bytes, parse_snapshot, Snapshot};
use vlasov_lab::grid::{Frame, GridSpec, PhaseDensity, SpatialField, SpatialGrid};
use vlasov_lab::runner::ExperimentConfig;
use vlasov_lab::vfield::{make_gamma, rational, FieldExpression};

fn combination(n: usize, coeffs: &[(i64, i64)]) -> FieldExpression {
    let gamma = make_gamma(n).unwrap();
    gamma.iter().zip(coeffs).fold(FieldExpression::zero(n), |acc, (z, &(p, q))| acc.add(&z.expression().scale(&rational(p, q))))
}

fn coeffs(len: usize) -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((-5i64..=5, 1i64..=4), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jacobi_identity_on_the_span(a in coeffs(10), b in coeffs(10), c in coeffs(10)) {
        let (x, y, z) = (combination(3, &a), combination(3, &b), combination(3, &c));
        let br = FieldExpression::commutator;
        let sum = br(&x, &br(&y, &z)).add(&br(&y, &br(&z, &x))).add(&br(&z, &br(&x, &y)));
        prop_assert!(sum.is_zero());
    }

    #[test]
    fn commutator_is_antisymmetric(a in coeffs(6), b in coeffs(6)) {
        let (x, y) = (combination(2, &a), combination(2, &b));
        prop_assert!(FieldExpression::commutator(&x, &y).add(&FieldExpression::commutator(&y, &x)).is_zero());
    }

    #[test]
    fn config_round_trips(
        eps in 1e-6f64..1e-1,
        nx in 8usize..64,
        first in 0.1f64..2.0,
        count in 2usize..30,
        seed in any::<u64>(),
        modified in any::<bool>(),
        centre in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let mut c = ExperimentConfig { eps, seed, ..ExperimentConfig::default() };
        c.grid.nx = nx;
        c.time.first = first;
        c.time.count = count;
        c.diagnostics.modified = modified;
        c.profile.x_center = centre;
        prop_assert_eq!(ExperimentConfig::parse(&c.serialize()).unwrap(), c);
    }

    #[test]
    fn density_snapshots_round_trip(values in prop::collection::vec(-1e3f64..1e3, 4096), time in 0.0f64..100.0, streaming in any::<bool>()) {
        let spec = GridSpec::new(2, 3.0, 2.0, 8, 8).unwrap();
        let frame = if streaming { Frame::FreeStreaming } else { Frame::Lab };
        let f = PhaseDensity::from_values(spec, values, time, frame).unwrap();
        prop_assert_eq!(parse_snapshot(&density_bytes(&f)).unwrap(), Snapshot::Density(f));
    }

    #[test]
    fn decay_fit_recovers_power_laws(p in -4.0f64..-0.5, c in 0.01f64..100.0) {
        let series: Vec<(f64, f64)> = (0..20).map(|k| {
            let t = 1.0 + 2.0 * k as f64;
            (t, c * (1.0 + t).powf(p))
        }).collect();
        let fit = decay_fit(&series, (1.0, 39.0)).unwrap();
        assert_relative_eq!(fit.exponent, p, epsilon = 1e-9);
        assert_relative_eq!(fit.intercept, c.ln(), epsilon = 1e-9);
    }

    #[test]
    fn field_solve_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, shift in -1.0f64..1.0) {
        let g = SpatialGrid::new(2, 4.0, 16).unwrap();
        let solver = FieldSolver::new(KernelSpec::yukawa(2).unwrap(), g, SingularCellRule::default()).unwrap();
        let r1 = SpatialField::sample(g, |x| (-(x[0] - shift).powi(2) - x[1] * x[1]).exp());
        let r2 = SpatialField::sample(g, |x| x[0] * (-x[0] * x[0] - (x[1] + shift).powi(2)).exp());
        let mixed = SpatialField::scalar(g, r1.values.iter().zip(&r2.values).map(|(u, v)| a * u + b * v).collect()).unwrap();
        let (p1, p2, pm) = (solver.convolve(&r1.values).unwrap(), solver.convolve(&r2.values).unwrap(), solver.convolve(&mixed.values).unwrap());
        for k in 0..pm.len() {
            assert_relative_eq!(pm[k], a * p1[k] + b * p2[k], epsilon = 1e-12);
        }
    }
}

//! First-order energy terms of a unit Gaussian against the exact derivatives.

use vlasov_lab::diagnostics::energy_n;
use vlasov_lab::grid::{l1_norm, sample_function, GridSpec};

fn gaussian(x: &[f64], v: &[f64]) -> f64 {
    (-(x[0] * x[0] + x[1] * x[1] + v[0] * v[0] + v[1] * v[1])).exp()
}

#[test]
fn first_order_terms_match_exact_derivative_integrals() {
    // h ≈ 0.114: fourth-order differences reach the 1e-4 level.
    let spec = GridSpec::new(2, 5.0, 5.0, 88, 88).unwrap();
    let f = sample_function(spec, gaussian).unwrap();
    let report = energy_n(&f, 1, 0.0).unwrap();
    drop(f);
    assert_eq!(report.terms.len(), 7);
    // Exact Zf / f at t = 0, in the family's order: boosts, translations, rotation, scaling.
    type Factor = fn(&[f64], &[f64]) -> f64;
    let factors: [Factor; 6] = [
        |_, v| -2.0 * v[0],
        |_, v| -2.0 * v[1],
        |x, _| -2.0 * x[0],
        |x, _| -2.0 * x[1],
        |_, _| 0.0,
        |x, v| -2.0 * (x[0] * x[0] + x[1] * x[1] + v[0] * v[0] + v[1] * v[1]),
    ];
    for (term, factor) in report.terms[1..].iter().zip(factors) {
        let exact = l1_norm(&sample_function(spec, |x, v| factor(x, v) * gaussian(x, v)).unwrap());
        if exact == 0.0 {
            // No relative scale for an annihilated term: bound it against a first-order derivative.
            let scale = report.terms[1].value;
            assert!(term.value < 1e-3 * scale, "{}: {} vs scale {scale}", term.label, term.value);
        } else {
            let rel = (term.value / exact - 1.0).abs();
            eprintln!("{}: rel {rel:.2e}", term.label);
            assert!(rel < 1e-4, "{}: {} vs {exact} (rel {rel:.2e})", term.label, term.value);
        }
    }
}

//! Property suites over the kernels, the vector-field algebra and the
//! Klainerman–Sobolev sup-ratio, each reduced to a table and pass/fail checks.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ks::ks_ratio;
use super::potentials::apply_macroscopic;
use crate::error::{invalid, Result};
use crate::greens::{bessel_k, bessel_k_bound, bessel_k_half, kernel_decay_integral};
use crate::grid::{apply_vfield, sample_function, velocity_average, Frame, GridSpec, PhaseDensity};
use crate::vfield::{free_transport, laplacian_commutation, make_gamma, rho_commutation, structure_constants, FieldExpression};

/// One pass/fail comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub name: String,
    pub measured: f64,
    /// Reference value for closeness checks; `None` for upper bounds.
    pub target: Option<f64>,
    /// Upper bound on `measured` (or on `|measured − target|`).
    pub threshold: f64,
    pub passed: bool,
}

impl LemmaCheck {
    /// `measured ≤ threshold`.
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self { name: name.into(), measured, target: None, threshold, passed: measured <= threshold }
    }

    /// `|measured − target| ≤ tolerance`.
    pub fn near(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        let passed = (measured - target).abs() <= tolerance;
        Self { name: name.into(), measured, target: Some(target), threshold: tolerance, passed }
    }

    /// A boolean property.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), measured: if ok { 1.0 } else { 0.0 }, target: Some(1.0), threshold: 0.0, passed: ok }
    }
}

impl fmt::Display for LemmaCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        match self.target {
            Some(t) => write!(f, "{verdict} {}: {:.6e} vs {:.6e} (tol {:.1e})", self.name, self.measured, t, self.threshold),
            None => write!(f, "{verdict} {}: {:.6e} <= {:.6e}", self.name, self.measured, self.threshold),
        }
    }
}

/// A suite's sampled table, worst ratio and checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheckReport {
    pub suite: String,
    pub columns: Vec<String>,
    pub table: Vec<Vec<f64>>,
    /// Largest measured/bound ratio of the suite's envelope check.
    pub worst_ratio: f64,
    pub threshold: f64,
    pub checks: Vec<LemmaCheck>,
}

impl LemmaCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// The table as CSV text.
    pub fn table_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.table {
            out.push_str(&row.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

/// The available suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LemmaSuite {
    Bessel,
    KernelIntegral,
    Ks,
    Commutators,
}

impl LemmaSuite {
    pub const ALL: [LemmaSuite; 4] = [LemmaSuite::Bessel, LemmaSuite::KernelIntegral, LemmaSuite::Ks, LemmaSuite::Commutators];

    pub fn name(self) -> &'static str {
        match self {
            LemmaSuite::Bessel => "bessel",
            LemmaSuite::KernelIntegral => "kernel-integral",
            LemmaSuite::Ks => "ks",
            LemmaSuite::Commutators => "commutators",
        }
    }

    /// Parses comma-separated suite names; `all` yields every suite.
    pub fn parse_list(s: &str) -> Result<Vec<LemmaSuite>> {
        if s.trim() == "all" {
            return Ok(Self::ALL.to_vec());
        }
        s.split(',')
            .map(|name| {
                let name = name.trim();
                Self::ALL
                    .iter()
                    .copied()
                    .find(|x| x.name() == name)
                    .ok_or_else(|| invalid(format!("unknown suite '{name}' (expected bessel, kernel-integral, ks, commutators or all)")))
            })
            .collect()
    }

    pub fn run(self) -> Result<LemmaCheckReport> {
        match self {
            LemmaSuite::Bessel => bessel_suite(),
            LemmaSuite::KernelIntegral => kernel_integral_suite(),
            LemmaSuite::Ks => ks_suite(),
            LemmaSuite::Commutators => commutator_suite(),
        }
    }
}

/// Envelope constant allowed for `K_ν / bound`.
pub const BESSEL_ENVELOPE_LIMIT: f64 = 3.0;

/// `K_{1/2}` against its closed form and `K_ν` against its envelope over
/// `ν ∈ {1/2, 1, 3/2, 2}`, `r ∈ logspace(−3, 2)`.
pub fn bessel_suite() -> Result<LemmaCheckReport> {
    let radii: Vec<f64> = (0..=40).map(|k| 10f64.powf(-3.0 + 5.0 * k as f64 / 40.0)).collect();
    let mut table = Vec::new();
    let mut worst = 0.0f64;
    let mut closed_form = 0.0f64;
    for nu in [0.5, 1.0, 1.5, 2.0] {
        for &r in &radii {
            let k = bessel_k(nu, r)?;
            let bound = bessel_k_bound(nu, r)?;
            worst = worst.max(k / bound);
            if nu == 0.5 {
                closed_form = closed_form.max((k / bessel_k_half(r) - 1.0).abs());
            }
            table.push(vec![nu, r, k, bound, k / bound]);
        }
    }
    Ok(LemmaCheckReport {
        suite: LemmaSuite::Bessel.name().into(),
        columns: ["nu", "r", "k_nu", "bound", "ratio"].map(String::from).to_vec(),
        table,
        worst_ratio: worst,
        threshold: BESSEL_ENVELOPE_LIMIT,
        checks: vec![
            LemmaCheck::at_most("half-order closed form, max relative error", closed_form, 1e-10),
            LemmaCheck::at_most("envelope constant sup K_nu/bound", worst, BESSEL_ENVELOPE_LIMIT),
        ],
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = points.iter().fold((0.0, 0.0), |(n, d), (x, y)| {
        let dx = x.ln() - mx;
        (n + dx * (y.ln() - my), d + dx * dx)
    });
    num / den
}

/// The kernel-decay integral: origin values, boundedness by 1.5× the origin
/// value, and the fitted slope of the shell contribution on `|x| ∈ [10, 100]`.
pub fn kernel_integral_suite() -> Result<LemmaCheckReport> {
    let mut table = Vec::new();
    let mut checks = Vec::new();
    let mut worst = 0.0f64;
    for n in [2usize, 3] {
        let origin = kernel_decay_integral(n, 0.0)?.total();
        checks.push(LemmaCheck::near(format!("n={n}: integral at x=0"), origin, 2.0 * PI, 1e-8));
        table.push(vec![n as f64, 0.0, origin, 0.0, 1.0]);
        let mut sup = 0.0f64;
        for x in [0.5, 1.0, 5.0, 20.0, 100.0] {
            let d = kernel_decay_integral(n, x)?;
            sup = sup.max(d.total() / origin);
            table.push(vec![n as f64, x, d.total(), d.shell, d.total() / origin]);
        }
        worst = worst.max(sup);
        checks.push(LemmaCheck::at_most(format!("n={n}: sup over |x| of I(x)/I(0)"), sup, 1.5));
        let shell: Vec<(f64, f64)> = (0..8)
            .map(|k| {
                let x = 10f64 * 10f64.powf(k as f64 / 7.0);
                kernel_decay_integral(n, x).map(|d| (x, d.shell))
            })
            .collect::<Result<_>>()?;
        let predicted = 1.0 - n as f64 / 2.0;
        let slope = log_log_slope(&shell);
        checks.push(LemmaCheck::near(format!("n={n}: shell-region slope on [10,100]"), slope, predicted, 0.1));
        checks.push(LemmaCheck::at_most(format!("n={n}: shell-region slope below the bound slope"), slope, predicted));
    }
    Ok(LemmaCheckReport {
        suite: LemmaSuite::KernelIntegral.name().into(),
        columns: ["n", "x_norm", "integral", "shell", "ratio_to_origin"].map(String::from).to_vec(),
        table,
        worst_ratio: worst,
        threshold: 1.5,
        checks,
    })
}

/// `[T, Z] = 0` and closure of γ for `n ∈ {2, 3, 4}`, `[S^x, Δ] = −2Δ`, and
/// `Zρ(f) = ρ(Zf) + cρ(f)` on grid data.
pub fn commutator_suite() -> Result<LemmaCheckReport> {
    let mut checks = Vec::new();
    let mut table = Vec::new();
    for n in 2..=4 {
        let gamma = make_gamma(n)?;
        let t = free_transport(n);
        let commuting = gamma.iter().all(|z| FieldExpression::commutator(&t, &z.expression()).is_zero());
        checks.push(LemmaCheck::holds(format!("n={n}: [T, Z] = 0 for all {} fields", gamma.len()), commuting));
        let closed = structure_constants(n)?.all_in_span();
        checks.push(LemmaCheck::holds(format!("n={n}: every [Z^a, Z^b] lies in the span of the family"), closed));
        let scaling = gamma.iter().find(|z| z.is_scaling()).expect("family contains the scaling field");
        let c = laplacian_commutation(scaling)?;
        checks.push(LemmaCheck::near(format!("n={n}: [S, Δ] = cΔ"), c as f64, -2.0, 0.0));
        table.push(vec![n as f64, gamma.len() as f64, commuting as u8 as f64, closed as u8 as f64, c as f64]);
    }
    let worst = rho_commutation_residual()?;
    checks.push(LemmaCheck::at_most("n=2: grid residual of Zρ(f) − ρ(Zf) − cρ(f), relative", worst, 1e-3));
    Ok(LemmaCheckReport {
        suite: LemmaSuite::Commutators.name().into(),
        columns: ["n", "fields", "commute_with_t", "closed", "scaling_laplace_constant"].map(String::from).to_vec(),
        table,
        worst_ratio: worst,
        threshold: 1e-3,
        checks,
    })
}

/// Worst relative interior residual of `Zρ(f) = ρ(Zf) + cρ(f)` over γ, `n = 2`.
pub fn rho_commutation_residual() -> Result<f64> {
    let spec = GridSpec::new(2, 6.0, 6.0, 48, 48)?;
    let f = sample_function(spec, |x, v| (-(x[0] - 0.4).powi(2) - 0.7 * x[1] * x[1] - (v[0] - 0.3).powi(2) - 1.3 * v[1] * v[1]).exp())?;
    let t = 0.6;
    let rho = velocity_average(&f, false)?;
    let mut worst = 0.0f64;
    for z in make_gamma(2)? {
        let lhs = apply_macroscopic(&rho, &z, t)?;
        let rho_zf = velocity_average(&apply_vfield(&f, &z.expression(), t)?, false)?;
        let c = rho_commutation(&z)?.constant as f64;
        let scale = lhs.sup_norm().max(rho.sup_norm());
        for idx in 0..rho.grid.len() {
            if rho.grid.point(idx).iter().all(|c| c.abs() < 4.0) {
                let r = lhs.values[idx] - rho_zf.values[idx] - c * rho.values[idx];
                worst = worst.max(r.abs() / scale);
            }
        }
    }
    Ok(worst)
}

/// Grid used by the sup-ratio suite.
pub fn ks_grid() -> Result<GridSpec> {
    GridSpec::new(2, 8.0, 5.0, 32, 32)
}

fn gaussian(spec: GridSpec, shift: [f64; 2], scale: f64) -> Result<PhaseDensity> {
    sample_function(spec, move |x, v| {
        let a = (x[0] - shift[0]) / scale;
        let b = (x[1] - shift[1]) / scale;
        (-(a * a + b * b) - (v[0] * v[0] + v[1] * v[1]) / (scale * scale)).exp()
    })
}

/// Smooth compactly supported data: a sum of three `exp(1 − 1/(1 − r²))` bumps
/// with random centres, radii and amplitudes.
pub fn random_bump_data(spec: GridSpec, seed: u64) -> Result<PhaseDensity> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<([f64; 4], f64, f64, f64)> = (0..3)
        .map(|_| {
            let c = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            (c, rng.random_range(2.0..3.0), rng.random_range(1.5..2.5), rng.random_range(0.5..1.5))
        })
        .collect();
    sample_function(spec, move |x, v| {
        bumps
            .iter()
            .map(|(c, rx, rv, amp)| {
                let r2 = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (rx * rx) + ((v[0] - c[2]).powi(2) + (v[1] - c[3]).powi(2)) / (rv * rv);
                if r2 < 1.0 {
                    amp * (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            })
            .sum()
    })
}

/// Number of random data sets in the sup-ratio suite.
pub const KS_RANDOM_SAMPLES: u64 = 5;

/// The sup-ratio: Gaussian baseline, translation and scaling of the data,
/// stability along free transport and random compactly supported data.
pub fn ks_suite() -> Result<LemmaCheckReport> {
    let spec = ks_grid()?;
    let f0 = gaussian(spec, [0.0, 0.0], 1.0)?;
    let baseline = ks_ratio(&f0, 0.0)?;
    let mut table = vec![vec![0.0, 0.0, baseline, 1.0]];
    let mut checks = Vec::new();

    let shifted = ks_ratio(&gaussian(spec, [1.0, 0.5], 1.0)?, 0.0)?;
    table.push(vec![1.0, 0.0, shifted, shifted / baseline]);
    checks.push(LemmaCheck::near("translated data (1, 0.5): ratio / baseline", shifted / baseline, 1.0, 1e-3));
    let scaled = ks_ratio(&gaussian(spec, [0.0, 0.0], 1.25)?, 0.0)?;
    table.push(vec![2.0, 0.0, scaled, scaled / baseline]);
    checks.push(LemmaCheck::near("scaled data (λ = 1.25): ratio / baseline", scaled / baseline, 1.0, 1e-3));

    let mut drift = 1.0f64;
    for t in [1.0, 5.0, 25.0] {
        // Free transport is exact in the free-streaming frame: only the time tag moves.
        let ft = PhaseDensity { time: t, frame: Frame::FreeStreaming, ..f0.clone() };
        let r = ks_ratio(&ft, t)?;
        table.push(vec![3.0, t, r, r / baseline]);
        drift = drift.max(r / baseline).max(baseline / r);
    }
    checks.push(LemmaCheck::at_most("free transport t ∈ {1,5,25}: max(r/r0, r0/r)", drift, 2.0));

    let mut worst = 0.0f64;
    for seed in 0..KS_RANDOM_SAMPLES {
        let r = ks_ratio(&random_bump_data(spec, 1000 + seed)?, 0.0)?;
        table.push(vec![4.0, seed as f64, r, r / baseline]);
        worst = worst.max(r / baseline);
    }
    checks.push(LemmaCheck::at_most("random bump data: max ratio / baseline", worst, 5.0));
    Ok(LemmaCheckReport {
        suite: LemmaSuite::Ks.name().into(),
        columns: ["case", "parameter", "ratio", "relative_to_baseline"].map(String::from).to_vec(),
        table,
        worst_ratio: worst.max(drift),
        threshold: 5.0,
        checks,
    })
}

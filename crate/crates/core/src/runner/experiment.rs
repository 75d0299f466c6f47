//! Builds initial data and solver settings from a config and runs them.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use super::config::{ExperimentConfig, Method, ScheduleKind, System};
use crate::diagnostics::{decay_fit, CommutedFieldObserver, DecayFit, EnergyObserver};
use crate::error::{LabError, Result};
use crate::greens::KernelSpec;
use crate::grid::{sample_function, GridSpec, ParticleEnsemble, PhaseDensity};
use crate::modified::{CoefficientField, ModifiedFieldObserver};
use crate::transport::{
    mass_error, run_particles, run_with, NoPassenger, ObservationSchedule, Observer, ParticleSettings, Passenger, RunFailure, RunRecord, SolverConfig,
};

/// Environment variable overriding the sweep worker count.
pub const WORKERS_ENV: &str = "VLASOV_LAB_WORKERS";

/// State at the end of a run.
#[derive(Clone, Debug)]
pub enum FinalState {
    Grid { density: PhaseDensity, coefficients: Option<CoefficientField> },
    Particles(ParticleEnsemble),
}

/// A completed experiment.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub record: RunRecord,
    pub state: FinalState,
}

/// A run that stopped early; the partial record is kept for output.
#[derive(Debug)]
pub struct ExperimentFailure {
    pub config: ExperimentConfig,
    pub record: RunRecord,
    pub error: LabError,
}

impl From<Box<ExperimentFailure>> for LabError {
    fn from(f: Box<ExperimentFailure>) -> Self {
        f.error
    }
}

fn centre(c: &[f64], n: usize) -> Vec<f64> {
    if c.is_empty() {
        vec![0.0; n]
    } else {
        c.to_vec()
    }
}

/// The observation schedule of a config.
pub fn schedule(cfg: &ExperimentConfig) -> Result<ObservationSchedule> {
    let t = &cfg.time;
    match t.schedule {
        ScheduleKind::Geometric => ObservationSchedule::geometric(t.first, t.t_end, t.count),
        ScheduleKind::Uniform => ObservationSchedule::uniform(t.interval, t.t_end),
    }
}

/// Solver settings of a config.
pub fn solver_config(cfg: &ExperimentConfig) -> Result<SolverConfig> {
    let kernel = match cfg.system {
        System::Vp => KernelSpec::poisson(cfg.n)?,
        System::Vy => KernelSpec::yukawa(cfg.n)?,
    };
    let mut s = SolverConfig::new(kernel, cfg.mu, cfg.time.t_end)?.with_schedule(schedule(cfg)?).with_frame(cfg.grid.frame);
    s.cfl_safety = cfg.time.cfl;
    s.dt_max = (cfg.time.dt_max > 0.0).then_some(cfg.time.dt_max);
    s.interpolation = cfg.grid.interpolation;
    s.field_points = Some(match cfg.method {
        Method::Grid => cfg.grid.field_points,
        Method::Particles => cfg.particles.field_points,
    });
    s.keep_fields = cfg.diagnostics.keep_fields;
    s.validate()?;
    Ok(s)
}

/// Gaussian profile sampled on the phase grid (lab frame, `t = 0`).
pub fn initial_density(cfg: &ExperimentConfig) -> Result<PhaseDensity> {
    let g = &cfg.grid;
    let spec = GridSpec::new(cfg.n, g.x_extent, g.v_extent, g.nx, g.nv)?;
    let (xc, vc) = (centre(&cfg.profile.x_center, cfg.n), centre(&cfg.profile.v_center, cfg.n));
    let (wx, wv, eps) = (cfg.profile.x_width, cfg.profile.v_width, cfg.eps);
    sample_function(spec, move |x, v| {
        let rx: f64 = x.iter().zip(&xc).map(|(a, c)| ((a - c) / wx).powi(2)).sum();
        let rv: f64 = v.iter().zip(&vc).map(|(a, c)| ((a - c) / wv).powi(2)).sum();
        eps * (-rx - rv).exp()
    })
}

/// Weighted samples of the same profile; total weight `ε πⁿ w_xⁿ w_vⁿ`.
pub fn initial_particles(cfg: &ExperimentConfig) -> Result<ParticleEnsemble> {
    let n = cfg.n;
    let mut p = ParticleEnsemble::sample_gaussian(n, cfg.particles.count, cfg.eps, cfg.seed)?;
    let (xc, vc) = (centre(&cfg.profile.x_center, n), centre(&cfg.profile.v_center, n));
    let (wx, wv) = (cfg.profile.x_width, cfg.profile.v_width);
    for (k, x) in p.positions.iter_mut().enumerate() {
        *x = xc[k % n] + wx * *x;
    }
    for (k, v) in p.velocities.iter_mut().enumerate() {
        *v = vc[k % n] + wv * *v;
    }
    let scale = (wx * wv).powi(n as i32);
    for w in &mut p.weights {
        *w *= scale;
    }
    Ok(p)
}

fn grid_observers<P: Passenger>(cfg: &ExperimentConfig) -> Result<Vec<Box<dyn Observer<P>>>> {
    let d = &cfg.diagnostics;
    let mut out: Vec<Box<dyn Observer<P>>> = Vec::new();
    if d.energy_order > 0 {
        out.push(Box::new(EnergyObserver { n_max: d.energy_order }));
    }
    if d.commuted_order > 0 || d.budget_order > 0 {
        out.push(Box::new(CommutedFieldObserver::up_to(cfg.n, d.commuted_order, d.budget_order)?));
    }
    Ok(out)
}

fn run_grid<P: Passenger>(
    cfg: &ExperimentConfig,
    solver: &SolverConfig,
    f0: PhaseDensity,
    passenger: &mut P,
    mut observers: Vec<Box<dyn Observer<P>>>,
) -> std::result::Result<(RunRecord, PhaseDensity), Box<ExperimentFailure>> {
    let mut refs: Vec<&mut dyn Observer<P>> = observers.iter_mut().map(|o| &mut **o as &mut dyn Observer<P>).collect();
    run_with(solver, f0, passenger, &mut refs).map_err(|f| {
        let RunFailure { record, error } = *f;
        Box::new(ExperimentFailure { config: cfg.clone(), record, error })
    })
}

/// Validates, checks budgets and runs an experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> std::result::Result<ExperimentOutcome, Box<ExperimentFailure>> {
    let early = |error: LabError| Box::new(ExperimentFailure { config: cfg.clone(), record: RunRecord::default(), error });
    let prepared = (|| -> Result<SolverConfig> {
        cfg.validate()?;
        cfg.check_budget()?;
        solver_config(cfg)
    })();
    let solver = prepared.map_err(early)?;
    let done = |record: RunRecord, state: FinalState| ExperimentOutcome { config: cfg.clone(), record, state };
    match cfg.method {
        Method::Particles => {
            let p0 = initial_particles(cfg).map_err(early)?;
            let settings = ParticleSettings {
                count: cfg.particles.count,
                seed: cfg.seed,
                eps: cfg.eps,
                field_points: cfg.particles.field_points,
                dt: cfg.particles.dt,
            };
            let (record, p) = run_particles(&solver, p0, &settings).map_err(early)?;
            Ok(done(record, FinalState::Particles(p)))
        }
        Method::Grid => {
            let f0 = initial_density(cfg).map_err(early)?;
            if cfg.diagnostics.modified {
                let f0 = f0.with_frame(cfg.grid.frame);
                let mut coeffs = CoefficientField::zeros(&f0).map_err(early)?;
                let mut observers = grid_observers::<CoefficientField>(cfg).map_err(early)?;
                observers.push(Box::new(ModifiedFieldObserver { energy_order: cfg.diagnostics.energy_order.max(1) }));
                let (record, density) = run_grid(cfg, &solver, f0, &mut coeffs, observers)?;
                Ok(done(record, FinalState::Grid { density, coefficients: Some(coeffs) }))
            } else {
                let observers = grid_observers::<NoPassenger>(cfg).map_err(early)?;
                let (record, density) = run_grid(cfg, &solver, f0, &mut NoPassenger, observers)?;
                Ok(done(record, FinalState::Grid { density, coefficients: None }))
            }
        }
    }
}

/// Worker count: `VLASOV_LAB_WORKERS` if set, else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// One member of an ε sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub eps: f64,
    pub fit: Option<DecayFit>,
    pub mass_error: Option<f64>,
    pub error: Option<String>,
}

/// Runs `base` once per `ε` on a pool of `workers` threads and fits the
/// decay of `series` over `window`. Results keep the order of `eps_values`.
pub fn decay_sweep(base: &ExperimentConfig, eps_values: &[f64], series: &str, window: (f64, f64), workers: usize) -> Vec<SweepPoint> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<SweepPoint>>> = Mutex::new(vec![None; eps_values.len()]);
    let workers = workers.clamp(1, eps_values.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&eps) = eps_values.get(k) else { break };
                let mut cfg = base.clone();
                cfg.eps = eps;
                let point = match run_experiment(&cfg) {
                    Ok(out) => {
                        let fit = out.record.pairs(series).and_then(|p| decay_fit(&p, window));
                        SweepPoint {
                            eps,
                            mass_error: mass_error(&out.record).ok(),
                            error: fit.as_ref().err().map(ToString::to_string),
                            fit: fit.ok(),
                        }
                    }
                    Err(f) => SweepPoint { eps, fit: None, mass_error: None, error: Some(f.error.to_string()) },
                };
                results.lock().expect("sweep results lock")[k] = Some(point);
            });
        }
    });
    results.into_inner().expect("sweep results lock").into_iter().map(|p| p.expect("every index visited")).collect()
}

//! The observation loop: Strang-split stepping between observation times,
//! field solves, co-evolved densities and the run record.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::SolverConfig;
use super::sweeps::{free_flow_lab, kick_lab, kick_streaming_with, streaming_shifts};
use crate::error::{invalid, LabError, Result};
use crate::greens::{FieldSolution, FieldSolver, KernelKind};
use crate::grid::{l1_norm, velocity_average_on, Frame, PhaseDensity, SpatialField, SpatialGrid};
use crate::interp::Interpolation;

/// Step ceiling in the free-streaming frame when none is configured.
pub const DEFAULT_STREAMING_STEP: f64 = 0.1;

/// Field-grid growth factor when a free-streaming run outgrows its field grid.
const FIELD_GRID_GROWTH: f64 = 1.25;

/// `f₀(x − vt, v)`: the explicit flow of free transport.
pub fn free_transport_exact(f0: &dyn Fn(&[f64], &[f64]) -> f64, t: f64, x: &[f64], v: &[f64]) -> f64 {
    let shifted: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - b * t).collect();
    f0(&shifted, v)
}

/// ρ, the field solution and the time they belong to.
#[derive(Clone, Debug)]
pub struct FieldState {
    pub time: f64,
    pub rho: SpatialField,
    pub solution: FieldSolution,
}

/// Field solver cache: rebuilt only when the spatial grid changes.
#[derive(Clone, Debug)]
pub struct FieldCache {
    config: SolverConfig,
    extent: f64,
    solver: Option<FieldSolver>,
}

impl FieldCache {
    pub fn new(config: &SolverConfig) -> Self {
        Self { config: config.clone(), extent: 0.0, solver: None }
    }

    /// Lab frame: the density's x grid. Free-streaming frame: a grid covering
    /// `|x| ≤ X + V t` that grows geometrically as the support spreads.
    pub fn grid_for(&mut self, f: &PhaseDensity) -> Result<SpatialGrid> {
        match f.frame {
            Frame::Lab => Ok(f.spec.x_grid()),
            Frame::FreeStreaming => {
                let needed = f.spec.x_extent + f.spec.v_extent * f.time;
                if self.extent < needed {
                    self.extent = needed * FIELD_GRID_GROWTH;
                }
                SpatialGrid::new(f.spec.n, self.extent, self.config.field_points.unwrap_or(f.spec.nx))
            }
        }
    }

    fn solver_on(&mut self, grid: SpatialGrid) -> Result<&FieldSolver> {
        let rebuild = match &self.solver {
            Some(s) => s.grid != grid,
            None => true,
        };
        if rebuild {
            let next = match self.solver.take() {
                Some(s) if s.spec.kind == KernelKind::Poisson => s.rescaled(grid)?,
                _ => FieldSolver::new(self.config.kernel, grid, self.config.singular_rule)?,
            };
            self.solver = Some(next);
        }
        Ok(self.solver.as_ref().expect("solver just built"))
    }

    /// The solver used by the latest [`FieldCache::solve`].
    pub fn solver(&self) -> Option<&FieldSolver> {
        self.solver.as_ref()
    }

    /// ρ(f) on the current field grid and its potential.
    pub fn solve(&mut self, f: &PhaseDensity) -> Result<FieldState> {
        let grid = self.grid_for(f)?;
        let scheme = self.config.interpolation;
        let rho = velocity_average_on(f, &grid, false, scheme)?;
        let solution = self.solver_on(grid)?.solve(&rho)?;
        Ok(FieldState { time: f.time, rho, solution })
    }
}

/// What a co-evolved density sees at each kick.
pub struct KickContext<'a> {
    /// Midpoint time of the step.
    pub time: f64,
    pub dt: f64,
    pub config: &'a SolverConfig,
    /// The transported density at the midpoint, before its kick.
    pub density: &'a PhaseDensity,
    pub field: &'a FieldState,
    pub solver: &'a FieldSolver,
}

/// Densities advected with the same sub-flows as `f`, plus a source added at each kick.
pub trait Passenger {
    fn densities_mut(&mut self) -> Vec<&mut PhaseDensity>;
    /// Adds `dt · S(t_mid)`; called after the passengers' own kick.
    fn add_source(&mut self, ctx: &KickContext<'_>) -> Result<()>;
}

/// No co-evolved densities.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoPassenger;

impl Passenger for NoPassenger {
    fn densities_mut(&mut self) -> Vec<&mut PhaseDensity> {
        Vec::new()
    }
    fn add_source(&mut self, _: &KickContext<'_>) -> Result<()> {
        Ok(())
    }
}

/// State handed to observers at each observation time.
pub struct Observation<'a, P: ?Sized> {
    pub time: f64,
    pub density: &'a PhaseDensity,
    pub field: &'a FieldState,
    pub solver: &'a FieldSolver,
    pub passenger: &'a P,
    pub config: &'a SolverConfig,
}

/// Adds named scalars to the record at each observation time.
pub trait Observer<P: ?Sized = NoPassenger> {
    fn observe(&mut self, obs: &Observation<'_, P>, out: &mut Vec<(String, f64)>) -> Result<()>;
}

impl<P: ?Sized, F> Observer<P> for F
where
    F: FnMut(&Observation<'_, P>, &mut Vec<(String, f64)>) -> Result<()>,
{
    fn observe(&mut self, obs: &Observation<'_, P>, out: &mut Vec<(String, f64)>) -> Result<()> {
        self(obs, out)
    }
}

/// Field kept at an observation time.
#[derive(Clone, Debug)]
pub struct FieldSnapshot {
    pub time: f64,
    pub phi: SpatialField,
    pub grad_phi: SpatialField,
    pub residual_norm: f64,
    pub boundary_contaminated: bool,
}

/// Time series and snapshots of a run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunRecord {
    pub times: Vec<f64>,
    /// One column per observable; rows align with `times` (NaN where absent).
    pub series: BTreeMap<String, Vec<f64>>,
    /// Written as snapshot files, not as JSON.
    #[serde(skip)]
    pub fields: Vec<FieldSnapshot>,
    pub boundary_flags: Vec<bool>,
    pub config_hash: String,
    pub abort_reason: Option<String>,
}

impl RunRecord {
    pub fn new(config_hash: String) -> Self {
        Self { config_hash, ..Self::default() }
    }

    /// Appends a row; observables first seen now are back-filled with NaN.
    pub fn push_row(&mut self, time: f64, values: Vec<(String, f64)>) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if time < last {
                return Err(invalid(format!("record times must be monotone: {time} after {last}")));
            }
        }
        let rows = self.times.len();
        self.times.push(time);
        for (key, value) in values {
            let column = self.series.entry(key).or_insert_with(|| vec![f64::NAN; rows]);
            if column.len() == rows + 1 {
                *column.last_mut().expect("non-empty") = value;
            } else {
                column.push(value);
            }
        }
        for column in self.series.values_mut() {
            column.resize(rows + 1, f64::NAN);
        }
        Ok(())
    }

    pub fn series(&self, name: &str) -> Result<&[f64]> {
        self.series
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| LabError::Missing(format!("series '{name}' (available: {:?})", self.series.keys().collect::<Vec<_>>())))
    }

    /// `(t, value)` pairs of a series, skipping NaN entries.
    pub fn pairs(&self, name: &str) -> Result<Vec<(f64, f64)>> {
        let s = self.series(name)?;
        Ok(self.times.iter().zip(s).filter(|(_, v)| !v.is_nan()).map(|(&t, &v)| (t, v)).collect())
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// A run that stopped early; the partial record is preserved.
#[derive(Debug)]
pub struct RunFailure {
    pub record: RunRecord,
    pub error: LabError,
}

impl From<Box<RunFailure>> for LabError {
    fn from(f: Box<RunFailure>) -> Self {
        f.error
    }
}

/// SHA-256 of the JSON form of a config.
pub fn config_hash(config: &SolverConfig) -> String {
    let bytes = serde_json::to_vec(config).unwrap_or_default();
    hex::encode(Sha256::digest(&bytes))
}

/// `max_t |‖f(t)‖_{L¹} − ‖f₀‖_{L¹}| / ‖f₀‖_{L¹}` from the `l1` series.
pub fn mass_error(record: &RunRecord) -> Result<f64> {
    let l1 = record.series("l1")?;
    let first = *l1.first().ok_or_else(|| LabError::Missing("empty record".into()))?;
    if first == 0.0 {
        return Ok(0.0);
    }
    Ok(l1.iter().filter(|v| !v.is_nan()).map(|v| (v - first).abs() / first.abs()).fold(0.0, f64::max))
}

/// Applies one sub-flow to `f` and every passenger.
fn free_flow_all<P: Passenger + ?Sized>(f: &mut PhaseDensity, passenger: &mut P, tau: f64, scheme: Interpolation) -> Result<()> {
    let mut targets = passenger.densities_mut();
    targets.insert(0, f);
    for d in targets {
        match d.frame {
            Frame::Lab => free_flow_lab(d, tau, scheme)?,
            Frame::FreeStreaming => d.time += tau,
        }
    }
    Ok(())
}

/// Largest `dt` allowed by the CFL rule for the current field.
/// `streaming_cap` bounds free-streaming steps when no `dt_max` is configured.
fn stable_step(f: &PhaseDensity, config: &SolverConfig, max_grad: f64, streaming_cap: f64) -> f64 {
    let spec = f.spec;
    let sigma = config.cfl_safety;
    let velocity = if config.force && max_grad > 0.0 { sigma * spec.dv() / max_grad } else { f64::INFINITY };
    match f.frame {
        Frame::Lab => {
            let v_max = spec.v_extent - 0.5 * spec.dv();
            let transport = sigma * spec.dx() / v_max;
            velocity.min(transport).min(config.dt_max.unwrap_or(f64::INFINITY))
        }
        Frame::FreeStreaming => velocity.min(config.dt_max.unwrap_or(streaming_cap)),
    }
}

/// Kick of `f` and passengers at the midpoint field.
fn kick_all<P: Passenger + ?Sized>(
    f: &mut PhaseDensity,
    passenger: &mut P,
    config: &SolverConfig,
    cache: &mut FieldCache,
    dt: f64,
) -> Result<FieldState> {
    let state = cache.solve(f)?;
    state.solution.grad_phi.check_finite("potential gradient")?;
    let max_grad = state.solution.grad_phi.sup_norm();
    let limit = config.cfl_safety * f.spec.dv() / max_grad;
    if max_grad > 0.0 && dt > limit * (1.0 + 1e-12) {
        return Err(LabError::CflViolation { dt, suggested: limit });
    }
    let scale = config.mu * dt;
    let scheme = config.interpolation;
    let grad = &state.solution.grad_phi;
    let shifts = match f.frame {
        Frame::FreeStreaming => Some(streaming_shifts(f, grad, scale)?),
        Frame::Lab => None,
    };
    for d in passenger.densities_mut() {
        if d.time != f.time {
            return Err(LabError::Desynchronized { expected: f.time, found: d.time });
        }
        match &shifts {
            Some(s) => kick_streaming_with(d, s, scheme)?,
            None => kick_lab(d, grad, scale, scheme)?,
        }
    }
    {
        let solver = cache.solver().expect("solved above");
        let ctx = KickContext { time: f.time, dt, config, density: f, field: &state, solver };
        passenger.add_source(&ctx)?;
    }
    match &shifts {
        Some(s) => kick_streaming_with(f, s, scheme)?,
        None => kick_lab(f, grad, scale, scheme)?,
    }
    Ok(state)
}

/// One unfused Strang step `X(dt/2) K(dt) X(dt/2)` with the CFL precondition
/// checked on the field of the current ρ. Returns the midpoint field.
pub fn step_semilagrangian(f: &mut PhaseDensity, config: &SolverConfig, dt: f64, cache: &mut FieldCache) -> Result<Option<FieldState>> {
    config.validate()?;
    if f.spec.n != 2 {
        return Err(LabError::Unsupported("semi-Lagrangian stepping is implemented for n = 2".into()));
    }
    if !(dt >= 0.0) {
        return Err(invalid("dt must be >= 0"));
    }
    if dt == 0.0 {
        return Ok(None);
    }
    let max_grad = if config.force { cache.solve(f)?.solution.grad_phi.sup_norm() } else { 0.0 };
    let limit = stable_step(f, config, max_grad, f64::INFINITY);
    if dt > limit * (1.0 + 1e-12) {
        return Err(LabError::CflViolation { dt, suggested: limit });
    }
    let scheme = config.interpolation;
    let mut none = NoPassenger;
    free_flow_all(f, &mut none, 0.5 * dt, scheme)?;
    let state = if config.force { Some(kick_all(f, &mut none, config, cache, dt)?) } else { None };
    free_flow_all(f, &mut none, 0.5 * dt, scheme)?;
    Ok(state)
}

/// Advances to `target` with a uniform step inside the interval.
fn advance<P: Passenger + ?Sized>(
    f: &mut PhaseDensity,
    passenger: &mut P,
    config: &SolverConfig,
    cache: &mut FieldCache,
    target: f64,
    max_grad: f64,
) -> Result<()> {
    let span = target - f.time;
    if span <= 0.0 {
        return Ok(());
    }
    let scheme = config.interpolation;
    let limit = stable_step(f, config, max_grad, DEFAULT_STREAMING_STEP);
    let steps = if limit.is_finite() { ((span / limit) * (1.0 - 1e-12)).ceil().max(1.0) as usize } else { 1 };
    let dt = span / steps as f64;
    if !config.force {
        for _ in 0..steps {
            free_flow_all(f, passenger, dt, scheme)?;
        }
    } else {
        free_flow_all(f, passenger, 0.5 * dt, scheme)?;
        for k in 0..steps {
            kick_all(f, passenger, config, cache, dt)?;
            if k + 1 == steps {
                free_flow_all(f, passenger, 0.5 * dt, scheme)?;
            } else if config.fuse_half_steps {
                free_flow_all(f, passenger, dt, scheme)?;
            } else {
                free_flow_all(f, passenger, 0.5 * dt, scheme)?;
                free_flow_all(f, passenger, 0.5 * dt, scheme)?;
            }
        }
    }
    // Pin the time tags to the observation time (no round-off drift).
    f.time = target;
    for d in passenger.densities_mut() {
        d.time = target;
    }
    Ok(())
}

/// Standard observables plus every observer's output.
fn observe<P: Passenger>(
    f: &PhaseDensity,
    state: &FieldState,
    cache: &FieldCache,
    passenger: &P,
    config: &SolverConfig,
    observers: &mut [&mut dyn Observer<P>],
    record: &mut RunRecord,
) -> Result<()> {
    let boundary = f.boundary_report(2);
    let solution = &state.solution;
    let mut row = vec![
        ("mass".to_string(), f.mass()),
        ("l1".to_string(), l1_norm(f)),
        ("sup_rho".to_string(), state.rho.sup_norm()),
        ("sup_grad_phi".to_string(), solution.grad_phi.sup_norm()),
        ("residual".to_string(), solution.residual_norm),
        ("boundary_fraction".to_string(), boundary.boundary_fraction),
        ("min_f".to_string(), f.min_value()),
        ("field_extent".to_string(), state.rho.grid.extent),
    ];
    let solver = cache.solver().expect("solved before observing");
    let obs = Observation { time: f.time, density: f, field: state, solver, passenger, config };
    for o in observers.iter_mut() {
        o.observe(&obs, &mut row)?;
    }
    record.push_row(f.time, row)?;
    record.boundary_flags.push(boundary.contaminated || solution.boundary_contaminated);
    if config.keep_fields {
        record.fields.push(FieldSnapshot {
            time: f.time,
            phi: solution.phi.clone(),
            grad_phi: solution.grad_phi.clone(),
            residual_norm: solution.residual_norm,
            boundary_contaminated: solution.boundary_contaminated,
        });
    }
    Ok(())
}

/// Runs `f₀` to `t_end`, observing at every scheduled time; returns the
/// record and the final density.
pub fn run_with<P: Passenger>(
    config: &SolverConfig,
    f0: PhaseDensity,
    passenger: &mut P,
    observers: &mut [&mut dyn Observer<P>],
) -> std::result::Result<(RunRecord, PhaseDensity), Box<RunFailure>> {
    let mut record = RunRecord::new(config_hash(config));
    let fail = |record: RunRecord, error: LabError| {
        let mut record = record;
        record.abort_reason = Some(error.to_string());
        Box::new(RunFailure { record, error })
    };
    if let Err(e) = prepare(config, &f0) {
        return Err(fail(record, e));
    }
    let mut f = if f0.frame != config.frame { f0.with_frame(config.frame) } else { f0 };
    let mut cache = FieldCache::new(config);
    let times: Vec<f64> = config.schedule.times.iter().copied().filter(|&t| t >= f.time).collect();
    for target in times {
        let step = (|| -> Result<()> {
            let max_grad = if target > f.time {
                let state = cache.solve(&f)?;
                state.solution.grad_phi.sup_norm()
            } else {
                0.0
            };
            advance(&mut f, passenger, config, &mut cache, target, max_grad)?;
            let state = cache.solve(&f)?;
            observe(&f, &state, &cache, passenger, config, observers, &mut record)
        })();
        if let Err(e) = step {
            return Err(fail(record, e));
        }
    }
    Ok((record, f))
}

fn prepare(config: &SolverConfig, f0: &PhaseDensity) -> Result<()> {
    config.validate()?;
    if f0.spec.n != 2 {
        return Err(LabError::Unsupported("grid runs are implemented for n = 2; use particles for n = 3".into()));
    }
    if config.kernel.n != 2 {
        return Err(invalid("kernel dimension must match the grid"));
    }
    if f0.frame != config.frame && f0.time != 0.0 {
        return Err(invalid("frames can only be switched at t = 0"));
    }
    Ok(())
}

/// [`run_with`] without co-evolved densities.
pub fn run(
    config: &SolverConfig,
    f0: PhaseDensity,
    observers: &mut [&mut dyn Observer<NoPassenger>],
) -> std::result::Result<RunRecord, Box<RunFailure>> {
    run_with(config, f0, &mut NoPassenger, observers).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::KernelSpec;
    use crate::grid::{sample_function, GridSpec};
    use crate::transport::ObservationSchedule;

    fn gauss(x: &[f64], v: &[f64]) -> f64 {
        1e-3 * (-x.iter().chain(v).map(|a| a * a).sum::<f64>()).exp()
    }

    fn small() -> PhaseDensity {
        sample_function(GridSpec::new(2, 6.0, 4.5, 24, 24).unwrap(), gauss).unwrap()
    }

    #[test]
    fn exact_flow_at_time_zero() {
        let f = |x: &[f64], v: &[f64]| x[0] + 2.0 * v[0];
        assert_eq!(free_transport_exact(&f, 0.0, &[1.0, 0.0], &[0.5, 0.0]), 2.0);
        assert_eq!(free_transport_exact(&f, 2.0, &[1.0, 0.0], &[0.5, 0.0]), 1.0);
    }

    #[test]
    fn zero_end_time_records_initial_observables() {
        let cfg = SolverConfig::new(KernelSpec::yukawa(2).unwrap(), -1.0, 0.0).unwrap();
        let rec = run(&cfg, small(), &mut []).unwrap();
        assert_eq!(rec.times, vec![0.0]);
        assert_eq!(mass_error(&rec).unwrap(), 0.0);
        assert!(rec.series("sup_rho").unwrap()[0] > 0.0);
    }

    #[test]
    fn zero_step_is_identity() {
        let cfg = SolverConfig::new(KernelSpec::yukawa(2).unwrap(), -1.0, 1.0).unwrap();
        let mut f = small();
        let orig = f.values.clone();
        step_semilagrangian(&mut f, &cfg, 0.0, &mut FieldCache::new(&cfg)).unwrap();
        assert_eq!(f.values, orig);
    }

    #[test]
    fn cfl_violation_suggests_a_step() {
        let cfg = SolverConfig::new(KernelSpec::yukawa(2).unwrap(), -1.0, 1.0).unwrap();
        let mut f = small();
        match step_semilagrangian(&mut f, &cfg, 1.0, &mut FieldCache::new(&cfg)) {
            Err(LabError::CflViolation { suggested, .. }) => assert!(suggested > 0.0 && suggested < 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn runs_are_deterministic_and_conserve_mass() {
        let cfg =
            SolverConfig::new(KernelSpec::yukawa(2).unwrap(), -1.0, 1.0).unwrap().with_schedule(ObservationSchedule::uniform(0.5, 1.0).unwrap());
        let a = run(&cfg, small(), &mut []).unwrap();
        let b = run(&cfg, small(), &mut []).unwrap();
        assert_eq!(a.times, vec![0.0, 0.5, 1.0]);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(mass_error(&a).unwrap() < 1e-3);
    }

    #[test]
    fn streaming_and_lab_frames_agree_over_short_times() {
        let mut cfg = SolverConfig::new(KernelSpec::yukawa(2).unwrap(), -1.0, 1.0).unwrap();
        cfg.field_points = Some(32);
        let (_, lab) = run_with(&cfg, small(), &mut NoPassenger, &mut []).unwrap();
        let fs_cfg = cfg.clone().with_frame(Frame::FreeStreaming);
        let (_, fs) = run_with(&fs_cfg, small(), &mut NoPassenger, &mut []).unwrap();
        assert_eq!(fs.time, 1.0);
        let lab_rho = crate::grid::velocity_average(&lab, false).unwrap();
        let fs_rho = FieldCache::new(&fs_cfg).solve(&fs).unwrap().rho;
        let peak = lab_rho.sup_norm();
        for idx in 0..fs_rho.grid.len() {
            let x = fs_rho.grid.point(idx);
            if x.iter().all(|a| a.abs() < 4.0) {
                let diff = (fs_rho.values[idx] - lab_rho.interpolate(0, &x)).abs();
                assert!(diff < 0.02 * peak, "{x:?} {diff} {peak}");
            }
        }
    }

    #[test]
    fn observers_extend_the_record() {
        let cfg = SolverConfig::new(KernelSpec::yukawa(2).unwrap(), -1.0, 0.5).unwrap().without_force();
        let mut obs = |o: &Observation<'_, NoPassenger>, out: &mut Vec<(String, f64)>| -> Result<()> {
            out.push(("twice_t".into(), 2.0 * o.time));
            Ok(())
        };
        let rec = run(&cfg, small(), &mut [&mut obs]).unwrap();
        assert_eq!(rec.series("twice_t").unwrap(), &[0.0, 1.0]);
        assert!(rec.series("nope").is_err());
    }

    #[test]
    fn partial_record_survives_an_abort() {
        let mut cfg = SolverConfig::new(KernelSpec::yukawa(2).unwrap(), -1.0, 1.0).unwrap();
        cfg.kernel = KernelSpec::yukawa(3).unwrap();
        let err = run(&cfg, small(), &mut []).unwrap_err();
        assert!(err.record.abort_reason.is_some());
    }
}

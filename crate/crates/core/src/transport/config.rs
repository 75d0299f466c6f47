//! Solver settings and observation schedules.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::greens::{KernelSpec, SingularCellRule};
use crate::grid::Frame;
use crate::interp::Interpolation;

/// Largest admissible CFL safety factor.
pub const MAX_CFL_SAFETY: f64 = 0.9;

/// Times at which observers run (always includes `t = 0` and `t_end`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSchedule {
    pub times: Vec<f64>,
}

impl ObservationSchedule {
    /// `0, Δ, 2Δ, …, t_end`.
    pub fn uniform(interval: f64, t_end: f64) -> Result<Self> {
        if !(interval > 0.0) || !(t_end >= 0.0) {
            return Err(invalid("uniform cadence needs a positive interval and t_end >= 0"));
        }
        let count = (t_end / interval - 1e-9).ceil().max(0.0) as usize;
        let mut times: Vec<f64> = (0..count).map(|k| k as f64 * interval).collect();
        times.push(t_end);
        Self::from_times(times)
    }

    /// `0` followed by `count` geometrically spaced times from `first` to `t_end`.
    pub fn geometric(first: f64, t_end: f64, count: usize) -> Result<Self> {
        if !(first > 0.0 && first <= t_end) || count < 2 {
            return Err(invalid("geometric cadence needs 0 < first <= t_end and count >= 2"));
        }
        let ratio = (t_end / first).powf(1.0 / (count - 1) as f64);
        let mut times = vec![0.0];
        times.extend((0..count).map(|k| if k + 1 == count { t_end } else { first * ratio.powi(k as i32) }));
        Self::from_times(times)
    }

    /// Sorted, de-duplicated times starting at 0.
    pub fn from_times(mut times: Vec<f64>) -> Result<Self> {
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(invalid("observation times must be finite and >= 0"));
        }
        times.push(0.0);
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
        Ok(Self { times })
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }
}

/// Settings of a phase-space or particle run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Sign in front of the force: characteristics obey `v̇ = μ∇φ`.
    pub mu: f64,
    pub kernel: KernelSpec,
    /// When false the force term is dropped (free transport).
    pub force: bool,
    /// `σ_CFL` in `dt ≤ σ·min(Δx/v_max, Δv/max|∇φ|)`.
    pub cfl_safety: f64,
    /// Optional ceiling on the step.
    pub dt_max: Option<f64>,
    pub interpolation: Interpolation,
    pub singular_rule: SingularCellRule,
    pub frame: Frame,
    /// Field-grid points per axis in the free-streaming frame (defaults to `Nx`).
    pub field_points: Option<usize>,
    pub schedule: ObservationSchedule,
    /// Fuse consecutive half-step free flows between observation times.
    pub fuse_half_steps: bool,
    /// Keep the potential gradient of every observation in the record.
    pub keep_fields: bool,
}

impl SolverConfig {
    /// Lab-frame defaults for kernel `kernel`, ending at `t_end` with
    /// observations at `t = 0` and `t_end`.
    pub fn new(kernel: KernelSpec, mu: f64, t_end: f64) -> Result<Self> {
        let cfg = Self {
            mu,
            kernel,
            force: true,
            cfl_safety: MAX_CFL_SAFETY,
            dt_max: None,
            interpolation: Interpolation::default(),
            singular_rule: SingularCellRule::default(),
            frame: Frame::Lab,
            field_points: None,
            schedule: ObservationSchedule::from_times(vec![t_end])?,
            fuse_half_steps: true,
            keep_fields: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu != 1.0 && self.mu != -1.0 {
            return Err(invalid(format!("mu must be +1 or -1, got {}", self.mu)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= MAX_CFL_SAFETY) {
            return Err(invalid(format!("CFL safety must lie in (0, {MAX_CFL_SAFETY}], got {}", self.cfl_safety)));
        }
        if let Some(d) = self.dt_max {
            if !(d > 0.0) {
                return Err(invalid("dt_max must be positive"));
            }
        }
        if !(self.t_end() >= 0.0) {
            return Err(invalid("t_end must be >= 0"));
        }
        Ok(())
    }

    pub fn t_end(&self) -> f64 {
        self.schedule.t_end()
    }

    pub fn with_schedule(mut self, schedule: ObservationSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    pub fn without_force(mut self) -> Self {
        self.force = false;
        self
    }
}

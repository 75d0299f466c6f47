//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, dotted keys group related
//! settings. Unknown keys, duplicates and malformed values are rejected with
//! their line number; absent keys take the defaults of [`ExperimentConfig::default`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::Frame;
use crate::interp::Interpolation;
use crate::transport::MAX_CFL_SAFETY;

/// Largest particle count accepted before a run starts.
pub const PARTICLE_BUDGET: usize = 20_000_000;

/// Which field equation couples to the transport.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum System {
    /// Vlasov–Poisson.
    Vp,
    /// Vlasov–Yukawa.
    Vy,
}

impl System {
    pub fn name(self) -> &'static str {
        match self {
            System::Vp => "vp",
            System::Vy => "vy",
        }
    }
}

/// Phase-space grid or particle ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Grid,
    Particles,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Grid => "grid",
            Method::Particles => "particles",
        }
    }
}

/// Spacing of observation times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleKind {
    Geometric,
    Uniform,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Geometric => "geometric",
            ScheduleKind::Uniform => "uniform",
        }
    }
}

/// Gaussian initial data `ε exp(−|x−x_c|²/w_x² − |v−v_c|²/w_v²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub x_width: f64,
    pub v_width: f64,
    /// Empty means the origin.
    pub x_center: Vec<f64>,
    pub v_center: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub nx: usize,
    pub nv: usize,
    pub x_extent: f64,
    pub v_extent: f64,
    pub frame: Frame,
    /// Field-grid points per axis in the free-streaming frame.
    pub field_points: usize,
    pub interpolation: Interpolation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfig {
    pub count: usize,
    pub field_points: usize,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    pub t_end: f64,
    /// `0` means no ceiling beyond the CFL rule.
    pub dt_max: f64,
    pub cfl: f64,
    pub schedule: ScheduleKind,
    /// First positive observation time (geometric cadence).
    pub first: f64,
    /// Number of positive observation times (geometric cadence).
    pub count: usize,
    /// Spacing (uniform cadence).
    pub interval: f64,
}

/// Which observers run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    /// Largest `N` of the recorded energies (`0` disables them).
    pub energy_order: usize,
    /// Largest `|α|` of the recorded `sup|∇ₓZ^αφ|` (`0` records only `∇ₓφ`).
    pub commuted_order: usize,
    /// Largest order of the recorded commutator budgets (`0` disables them).
    pub budget_order: usize,
    /// Evolve the modified-field coefficients (grid runs).
    pub modified: bool,
    /// Keep the field of every observation as a snapshot.
    pub keep_fields: bool,
}

/// A complete experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: System,
    pub n: usize,
    pub mu: f64,
    pub eps: f64,
    pub method: Method,
    pub profile: ProfileConfig,
    pub grid: GridConfig,
    pub particles: ParticleConfig,
    pub time: TimeConfig,
    pub diagnostics: DiagnosticsConfig,
    pub seed: u64,
    /// Output directory, relative to the output root unless absolute.
    pub output: String,
}

impl Default for ExperimentConfig {
    /// A small Vlasov–Yukawa run in two dimensions.
    fn default() -> Self {
        Self {
            system: System::Vy,
            n: 2,
            mu: -1.0,
            eps: 1e-3,
            method: Method::Grid,
            profile: ProfileConfig { x_width: 1.0, v_width: 1.0, x_center: Vec::new(), v_center: Vec::new() },
            grid: GridConfig {
                nx: 24,
                nv: 24,
                x_extent: 6.0,
                v_extent: 5.0,
                frame: Frame::FreeStreaming,
                field_points: 48,
                interpolation: Interpolation::CubicSpline,
            },
            particles: ParticleConfig { count: 1_000_000, field_points: 96, dt: 0.1 },
            time: TimeConfig { t_end: 5.0, dt_max: 0.5, cfl: MAX_CFL_SAFETY, schedule: ScheduleKind::Geometric, first: 0.5, count: 8, interval: 1.0 },
            diagnostics: DiagnosticsConfig { energy_order: 1, commuted_order: 1, budget_order: 1, modified: false, keep_fields: false },
            seed: 20_240_601,
            output: "vy-n2".to_string(),
        }
    }
}

fn config_error(line: usize, message: impl Into<String>) -> LabError {
    LabError::Config { line, message: message.into() }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| config_error(line, format!("cannot parse '{raw}' for {key}")))
}

fn parse_bool(line: usize, key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(config_error(line, format!("expected true or false for {key}, got '{raw}'"))),
    }
}

fn parse_list(line: usize, key: &str, raw: &str) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|s| parse_value(line, key, s.trim())).collect()
}

/// Every key, in serialization order.
pub const KEYS: &[&str] = &[
    "system",
    "n",
    "mu",
    "eps",
    "method",
    "profile.x_width",
    "profile.v_width",
    "profile.x_center",
    "profile.v_center",
    "grid.nx",
    "grid.nv",
    "grid.x_extent",
    "grid.v_extent",
    "grid.frame",
    "grid.field_points",
    "grid.interpolation",
    "particles.count",
    "particles.field_points",
    "particles.dt",
    "time.t_end",
    "time.dt_max",
    "time.cfl",
    "time.schedule",
    "time.first",
    "time.count",
    "time.interval",
    "diagnostics.energy_order",
    "diagnostics.commuted_order",
    "diagnostics.budget_order",
    "diagnostics.modified",
    "diagnostics.keep_fields",
    "seed",
    "output",
];

impl ExperimentConfig {
    /// Parses the flat format on top of the defaults. Only syntax and value
    /// types are checked here; see [`ExperimentConfig::validate`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (k, raw_line) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| config_error(line, format!("expected 'key = value', got '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(config_error(line, format!("duplicate key '{key}'")));
            }
            cfg.set(line, key, value)?;
        }
        Ok(cfg)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        match key {
            "system" => {
                self.system = match v {
                    "vp" => System::Vp,
                    "vy" => System::Vy,
                    _ => return Err(config_error(line, format!("system must be vp or vy, got '{v}'"))),
                }
            }
            "n" => self.n = parse_value(line, key, v)?,
            "mu" => self.mu = parse_value(line, key, v)?,
            "eps" => self.eps = parse_value(line, key, v)?,
            "method" => {
                self.method = match v {
                    "grid" => Method::Grid,
                    "particles" => Method::Particles,
                    _ => return Err(config_error(line, format!("method must be grid or particles, got '{v}'"))),
                }
            }
            "profile.x_width" => self.profile.x_width = parse_value(line, key, v)?,
            "profile.v_width" => self.profile.v_width = parse_value(line, key, v)?,
            "profile.x_center" => self.profile.x_center = parse_list(line, key, v)?,
            "profile.v_center" => self.profile.v_center = parse_list(line, key, v)?,
            "grid.nx" => self.grid.nx = parse_value(line, key, v)?,
            "grid.nv" => self.grid.nv = parse_value(line, key, v)?,
            "grid.x_extent" => self.grid.x_extent = parse_value(line, key, v)?,
            "grid.v_extent" => self.grid.v_extent = parse_value(line, key, v)?,
            "grid.frame" => {
                self.grid.frame = Frame::parse(v).ok_or_else(|| config_error(line, format!("frame must be lab or free-streaming, got '{v}'")))?
            }
            "grid.field_points" => self.grid.field_points = parse_value(line, key, v)?,
            "grid.interpolation" => {
                self.grid.interpolation = Interpolation::parse(v)
                    .ok_or_else(|| config_error(line, format!("interpolation must be cubic-spline or lagrange4, got '{v}'")))?
            }
            "particles.count" => self.particles.count = parse_value(line, key, v)?,
            "particles.field_points" => self.particles.field_points = parse_value(line, key, v)?,
            "particles.dt" => self.particles.dt = parse_value(line, key, v)?,
            "time.t_end" => self.time.t_end = parse_value(line, key, v)?,
            "time.dt_max" => self.time.dt_max = parse_value(line, key, v)?,
            "time.cfl" => self.time.cfl = parse_value(line, key, v)?,
            "time.schedule" => {
                self.time.schedule = match v {
                    "geometric" => ScheduleKind::Geometric,
                    "uniform" => ScheduleKind::Uniform,
                    _ => return Err(config_error(line, format!("schedule must be geometric or uniform, got '{v}'"))),
                }
            }
            "time.first" => self.time.first = parse_value(line, key, v)?,
            "time.count" => self.time.count = parse_value(line, key, v)?,
            "time.interval" => self.time.interval = parse_value(line, key, v)?,
            "diagnostics.energy_order" => self.diagnostics.energy_order = parse_value(line, key, v)?,
            "diagnostics.commuted_order" => self.diagnostics.commuted_order = parse_value(line, key, v)?,
            "diagnostics.budget_order" => self.diagnostics.budget_order = parse_value(line, key, v)?,
            "diagnostics.modified" => self.diagnostics.modified = parse_bool(line, key, v)?,
            "diagnostics.keep_fields" => self.diagnostics.keep_fields = parse_bool(line, key, v)?,
            "seed" => self.seed = parse_value(line, key, v)?,
            "output" => self.output = v.to_string(),
            _ => return Err(config_error(line, format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// The flat text form; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("system", self.system.name().into());
        put("n", self.n.to_string());
        put("mu", format!("{:?}", self.mu));
        put("eps", format!("{:?}", self.eps));
        put("method", self.method.name().into());
        put("profile.x_width", format!("{:?}", self.profile.x_width));
        put("profile.v_width", format!("{:?}", self.profile.v_width));
        put("profile.x_center", list(&self.profile.x_center));
        put("profile.v_center", list(&self.profile.v_center));
        put("grid.nx", self.grid.nx.to_string());
        put("grid.nv", self.grid.nv.to_string());
        put("grid.x_extent", format!("{:?}", self.grid.x_extent));
        put("grid.v_extent", format!("{:?}", self.grid.v_extent));
        put("grid.frame", self.grid.frame.name().into());
        put("grid.field_points", self.grid.field_points.to_string());
        put("grid.interpolation", self.grid.interpolation.name().into());
        put("particles.count", self.particles.count.to_string());
        put("particles.field_points", self.particles.field_points.to_string());
        put("particles.dt", format!("{:?}", self.particles.dt));
        put("time.t_end", format!("{:?}", self.time.t_end));
        put("time.dt_max", format!("{:?}", self.time.dt_max));
        put("time.cfl", format!("{:?}", self.time.cfl));
        put("time.schedule", self.time.schedule.name().into());
        put("time.first", format!("{:?}", self.time.first));
        put("time.count", self.time.count.to_string());
        put("time.interval", format!("{:?}", self.time.interval));
        put("diagnostics.energy_order", self.diagnostics.energy_order.to_string());
        put("diagnostics.commuted_order", self.diagnostics.commuted_order.to_string());
        put("diagnostics.budget_order", self.diagnostics.budget_order.to_string());
        put("diagnostics.modified", self.diagnostics.modified.to_string());
        put("diagnostics.keep_fields", self.diagnostics.keep_fields.to_string());
        put("seed", self.seed.to_string());
        put("output", self.output.clone());
        out
    }

    /// Semantic checks: system/dimension gating, method compatibility and
    /// parameter ranges. Resource budgets are checked separately.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(config_error(0, m));
        match (self.system, self.n) {
            (System::Vp, 3) | (System::Vy, 2) | (System::Vy, 3) => {}
            (System::Vp, n) => return bad(format!("vp runs are numerical in n = 3 only (got n = {n})")),
            (System::Vy, n) => return bad(format!("vy runs need n in {{2, 3}} (got n = {n})")),
        }
        match (self.method, self.n) {
            (Method::Grid, 2) | (Method::Particles, 3) => {}
            (m, n) => return bad(format!("method {} is not available for n = {n}", m.name())),
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.mu != 1.0 && self.mu != -1.0 {
            return bad(format!("mu must be +1 or -1, got {}", self.mu));
        }
        let p = &self.profile;
        if !(p.x_width > 0.0 && p.v_width > 0.0) {
            return bad("profile widths must be positive".into());
        }
        for c in [&p.x_center, &p.v_center] {
            if !c.is_empty() && c.len() != self.n {
                return bad(format!("profile centres need {} components", self.n));
            }
        }
        let t = &self.time;
        if !(t.t_end > 0.0) {
            return bad("time.t_end must be positive".into());
        }
        if !(t.dt_max >= 0.0) {
            return bad("time.dt_max must be >= 0".into());
        }
        if !(t.cfl > 0.0 && t.cfl <= MAX_CFL_SAFETY) {
            return bad(format!("time.cfl must lie in (0, {MAX_CFL_SAFETY}]"));
        }
        match t.schedule {
            ScheduleKind::Geometric if !(t.first > 0.0 && t.first <= t.t_end && t.count >= 2) => {
                return bad("geometric cadence needs 0 < time.first <= time.t_end and time.count >= 2".into())
            }
            ScheduleKind::Uniform if !(t.interval > 0.0) => return bad("time.interval must be positive".into()),
            _ => {}
        }
        let d = &self.diagnostics;
        if d.energy_order > 2 || d.commuted_order > 2 || d.budget_order > 2 {
            return bad("diagnostic orders are limited to 2 on grids".into());
        }
        if self.method == Method::Particles && (d.modified || d.energy_order > 0 || d.commuted_order > 0 || d.budget_order > 0) {
            return bad("particle runs record field and density observables only; set diagnostics orders to 0 and modified = false".into());
        }
        if self.method == Method::Particles && !(self.particles.dt > 0.0) {
            return bad("particles.dt must be positive".into());
        }
        if self.output.is_empty() {
            return bad("output must name a directory".into());
        }
        Ok(())
    }

    /// Pre-flight resource check (memory budgets).
    pub fn check_budget(&self) -> Result<()> {
        match self.method {
            Method::Grid => {
                crate::grid::GridSpec::new(self.n, self.grid.x_extent, self.grid.v_extent, self.grid.nx, self.grid.nv)?;
                let phase_arrays = 2 + if self.diagnostics.modified { 8 } else { 0 };
                let cells = (self.grid.nx as u128 * self.grid.nv as u128).pow(self.n as u32) * phase_arrays;
                if cells > crate::grid::DEFAULT_CELL_BUDGET {
                    return Err(LabError::MemoryBudget { cells, budget: crate::grid::DEFAULT_CELL_BUDGET });
                }
            }
            Method::Particles => {
                if self.particles.count > PARTICLE_BUDGET {
                    return Err(LabError::MemoryBudget { cells: self.particles.count as u128, budget: PARTICLE_BUDGET as u128 });
                }
            }
        }
        Ok(())
    }
}

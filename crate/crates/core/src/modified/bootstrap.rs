//! Modified energies, the run observer for coefficient functions, and the
//! bootstrap ratio checks built from its series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::coefficients::{modified_images, spatial_derivatives, CoefficientField};
use crate::diagnostics::{energy_with, excursion_ratio, grad_field_series, ks_ratio_with, EnergyMode, EnergyReport, N_MAX_GRID};
use crate::error::{invalid, LabError, Result};
use crate::grid::PhaseDensity;
use crate::transport::{Observation, Observer, RunRecord};
use crate::vfield::MultiIndex;

/// Excursion factor (max/median) flagged by the bootstrap checks.
pub const EXCURSION_LIMIT: f64 = 5.0;

/// Largest `|α|` for `Y^α varphi`.
pub const VARPHI_ORDER: usize = 1;

/// `E_N` with modified fields `Y^α`.
pub fn modified_energy_n(f: &PhaseDensity, coeffs: &CoefficientField, n_max: usize, t: f64) -> Result<EnergyReport> {
    coeffs.check_synchronized(f, t)?;
    energy_with(f, n_max, t, EnergyMode::Modified, &coeffs.gamma, |g| modified_images(g, coeffs, t))
}

/// Series name of the modified energy `E_N`.
pub fn modified_energy_series(order: usize) -> String {
    format!("modified_energy[{order}]")
}

/// Series name of `max_{i,k} sup|Y^α varphi[i][k]|`.
pub fn varphi_series(label: &str) -> String {
    format!("varphi_sup[{label}]")
}

/// Series name of `max_{i,k,l} sup|∂_{x^l} varphi[i][k]|`.
pub const GRAD_VARPHI_SERIES: &str = "grad_varphi_sup";

/// Records modified energies, the modified sup-ratio and sup norms of the
/// coefficient functions and their first `Y` derivatives.
#[derive(Clone, Copy, Debug)]
pub struct ModifiedFieldObserver {
    pub energy_order: usize,
}

impl Default for ModifiedFieldObserver {
    fn default() -> Self {
        Self { energy_order: N_MAX_GRID }
    }
}

impl Observer<CoefficientField> for ModifiedFieldObserver {
    fn observe(&mut self, obs: &Observation<'_, CoefficientField>, out: &mut Vec<(String, f64)>) -> Result<()> {
        let (f, coeffs, t) = (obs.density, obs.passenger, obs.time);
        let report = modified_energy_n(f, coeffs, self.energy_order, t)?;
        for (k, e) in report.totals.iter().enumerate() {
            out.push((modified_energy_series(k), *e));
        }
        if let Some(e) = report.energy(f.spec.n) {
            out.push(("ks_ratio_modified".to_string(), ks_ratio_with(f, t, e)?));
        }
        for (name, value) in varphi_norms(coeffs, t)? {
            out.push((name, value));
        }
        Ok(())
    }
}

/// `sup|Y^α varphi|` for `|α| ≤ 1` (maximized over components) and `sup|∇ₓ varphi|`.
pub fn varphi_norms(coeffs: &CoefficientField, t: f64) -> Result<Vec<(String, f64)>> {
    let count = coeffs.gamma.len();
    let mut sups = vec![0.0f64; count + 1];
    let mut grad = 0.0f64;
    for (_, _, d) in coeffs.components() {
        sups[0] = sups[0].max(d.max_abs());
        for p in spatial_derivatives(d, t)? {
            grad = grad.max(p.max_abs());
        }
        for (j, img) in modified_images(d, coeffs, t)?.into_iter().enumerate() {
            sups[j + 1] = sups[j + 1].max(img.max_abs());
        }
    }
    let mut out = vec![(varphi_series("id"), sups[0])];
    for (j, z) in coeffs.gamma.iter().enumerate() {
        out.push((varphi_series(&z.label()), sups[j + 1]));
    }
    out.push((GRAD_VARPHI_SERIES.to_string(), grad));
    Ok(out)
}

/// Normalized bootstrap ratio series and their excursions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModifiedEnergyReport {
    pub eps: f64,
    pub window: (f64, f64),
    /// Normalized ratio series by name.
    pub ratios: BTreeMap<String, Vec<(f64, f64)>>,
    /// `max / median` of each ratio series inside the window.
    pub excursions: BTreeMap<String, f64>,
    /// Series whose excursion exceeds [`EXCURSION_LIMIT`].
    pub flagged: Vec<String>,
    /// Largest `E_N(t) / E_N(0)` of the modified energies, by order.
    pub energy_growth: BTreeMap<usize, f64>,
}

impl ModifiedEnergyReport {
    pub fn bounded(&self) -> bool {
        self.flagged.is_empty()
    }
}

fn normalized(record: &RunRecord, name: &str, weight: impl Fn(f64) -> f64) -> Result<Vec<(f64, f64)>> {
    Ok(record.pairs(name)?.into_iter().map(|(t, v)| (t, v * weight(t))).collect())
}

/// Bootstrap ratios from a record with coefficient and commuted-field series:
/// `sup|Y^α varphi| / (ε^{1/2}(1+log(1+t)))`, `sup|∇ₓvarphi| / ε^{1/2}` and
/// `sup|∇ₓZ^αφ| (1+t)² / ε^{1/2}` for `|α| ≤ 1`.
pub fn bootstrap_check(record: &RunRecord, n: usize, eps: f64, window: (f64, f64)) -> Result<ModifiedEnergyReport> {
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    if !record.series.contains_key(&varphi_series("id")) {
        return Err(LabError::Missing(format!("the record has no coefficient history; record times: {:?}", record.times)));
    }
    let root = eps.sqrt();
    let mut ratios = BTreeMap::new();
    let names: Vec<String> = record.series.keys().filter(|k| k.starts_with("varphi_sup[")).cloned().collect();
    for name in names {
        let s = normalized(record, &name, |t| 1.0 / (root * (1.0 + (1.0 + t).ln())))?;
        ratios.insert(format!("{name}/log"), s);
    }
    ratios.insert(format!("{GRAD_VARPHI_SERIES}/eps"), normalized(record, GRAD_VARPHI_SERIES, |_| 1.0 / root)?);
    let count = crate::vfield::gamma_count(n);
    for alpha in MultiIndex::all_up_to(count, VARPHI_ORDER) {
        let name = grad_field_series(&alpha, n)?;
        if let Ok(s) = normalized(record, &name, |t| (1.0 + t).powi(2) / root) {
            ratios.insert(format!("{name}*(1+t)^2"), s);
        }
    }
    let mut excursions = BTreeMap::new();
    let mut flagged = Vec::new();
    for (name, s) in &ratios {
        let e = excursion_ratio(s, window)?;
        // An identically zero series has no excursion.
        let e = if s.iter().all(|p| p.1 == 0.0) { 0.0 } else { e };
        if e > EXCURSION_LIMIT {
            flagged.push(name.clone());
        }
        excursions.insert(name.clone(), e);
    }
    let mut energy_growth = BTreeMap::new();
    for order in 0..=N_MAX_GRID {
        if let Ok(s) = record.pairs(&modified_energy_series(order)) {
            if let Some(&(_, e0)) = s.first() {
                let g = s.iter().map(|p| if e0 > 0.0 { p.1 / e0 } else { 0.0 }).fold(0.0, f64::max);
                energy_growth.insert(order, g);
            }
        }
    }
    Ok(ModifiedEnergyReport { eps, window, ratios, excursions, flagged, energy_growth })
}

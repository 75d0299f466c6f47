//! Vector-field energies `E_N[f] = Σ_{|α|≤N} ‖Z^α f‖_{L¹}`.

use std::borrow::Cow;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{apply_vfield, l1_norm, PhaseDensity};
use crate::vfield::{make_gamma, MultiIndex, VectorFieldSymbol};

/// Largest energy order supported on grids (nested 4th-order stencils).
pub const N_MAX_GRID: usize = 2;

/// Plain `Z^α` or modified `Y^α` compositions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnergyMode {
    Plain,
    Modified,
}

/// `‖Z^α f‖_{L¹}` for one word.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerm {
    pub label: String,
    pub order: usize,
    pub value: f64,
}

/// One row of an energy report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub time: f64,
    pub mode: EnergyMode,
    pub terms: Vec<EnergyTerm>,
    /// `totals[N] = E_N`, cumulative in `N`.
    pub totals: Vec<f64>,
}

impl EnergyReport {
    pub fn energy(&self, n: usize) -> Option<f64> {
        self.totals.get(n).copied()
    }
}

/// Checks that nested stencils of depth `n_max` fit the grid.
pub fn check_stencil_budget(f: &PhaseDensity, n_max: usize) -> Result<()> {
    if n_max > N_MAX_GRID {
        return Err(LabError::StencilBudget(format!("energy order {n_max} exceeds the grid limit {N_MAX_GRID}")));
    }
    let need = 8 * n_max.max(1);
    if f.spec.nx < need || f.spec.nv < need {
        return Err(LabError::StencilBudget(format!("order {n_max} needs at least {need} points per axis")));
    }
    Ok(())
}

/// `E_N` with a custom first-order action: `apply_all(g)` returns the image of
/// `g` under every letter of the family, in order. Words act innermost-last:
/// `Z^{(a, b)} f = Z^a(Z^b f)`.
pub fn energy_with<F>(
    f: &PhaseDensity,
    n_max: usize,
    time: f64,
    mode: EnergyMode,
    gamma: &[VectorFieldSymbol],
    mut apply_all: F,
) -> Result<EnergyReport>
where
    F: FnMut(&PhaseDensity) -> Result<Vec<PhaseDensity>>,
{
    check_stencil_budget(f, n_max)?;
    let mut values: HashMap<MultiIndex, f64> = HashMap::new();
    values.insert(MultiIndex::empty(), l1_norm(f));
    // Words of length < n_max are kept for the next layer.
    let mut layer: Vec<(MultiIndex, Cow<'_, PhaseDensity>)> = vec![(MultiIndex::empty(), Cow::Borrowed(f))];
    for len in 1..=n_max {
        let mut next = Vec::new();
        for (tail, g) in &layer {
            let images = apply_all(g)?;
            if images.len() != gamma.len() {
                return Err(LabError::InvalidArgument("one image per member of the family expected".into()));
            }
            for (a, h) in images.into_iter().enumerate() {
                let mut word = vec![a];
                word.extend(&tail.0);
                let word = MultiIndex(word);
                values.insert(word.clone(), l1_norm(&h));
                if len < n_max {
                    next.push((word, Cow::Owned(h)));
                }
            }
        }
        layer = next;
    }
    let mut terms = Vec::new();
    let mut totals = vec![0.0; n_max + 1];
    for word in MultiIndex::all_up_to(gamma.len(), n_max) {
        let value = values[&word];
        if !value.is_finite() {
            return Err(LabError::NonFinite("energy term"));
        }
        for total in totals.iter_mut().skip(word.len()) {
            *total += value;
        }
        terms.push(EnergyTerm { label: word.label(gamma), order: word.len(), value });
    }
    Ok(EnergyReport { time, mode, terms, totals })
}

/// Plain energy `E_N[f](t)`.
pub fn energy_n(f: &PhaseDensity, n_max: usize, t: f64) -> Result<EnergyReport> {
    let gamma = make_gamma(f.spec.n)?;
    let exprs: Vec<_> = gamma.iter().map(VectorFieldSymbol::expression).collect();
    energy_with(f, n_max, t, EnergyMode::Plain, &gamma, |g| exprs.iter().map(|e| apply_vfield(g, e, t)).collect())
}

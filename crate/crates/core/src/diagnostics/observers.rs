//! Run observers recording energies, sup-ratios, commuted fields and budgets,
//! and the record-level fits built on their series.

use super::energy::{energy_n, N_MAX_GRID};
use super::fit::{decay_fit, DecayFit};
use super::ks::ks_ratio_with;
use super::potentials::{commutator_budget, CommutedPotentials};
use crate::error::{LabError, Result};
use crate::transport::{Observation, Observer, RunRecord};
use crate::vfield::{make_gamma, MultiIndex};

/// Series name of `E_N` (plain).
pub fn energy_series(order: usize) -> String {
    format!("energy[{order}]")
}

/// Series name of `sup_x |∇ₓZ^αφ|`.
pub fn grad_field_series(alpha: &MultiIndex, n: usize) -> Result<String> {
    if alpha.is_empty() {
        return Ok("sup_grad_phi".to_string());
    }
    Ok(format!("grad_phi[{}]", alpha.label(&make_gamma(n)?)))
}

/// Series name of the order-`k` commutator budget.
pub fn budget_series(order: usize) -> String {
    format!("budget[{order}]")
}

/// Records `E_0 … E_{n_max}` and, when `n_max ≥ n`, the sup-ratio.
#[derive(Clone, Copy, Debug)]
pub struct EnergyObserver {
    pub n_max: usize,
}

impl<P: ?Sized> Observer<P> for EnergyObserver {
    fn observe(&mut self, obs: &Observation<'_, P>, out: &mut Vec<(String, f64)>) -> Result<()> {
        let report = energy_n(obs.density, self.n_max, obs.time)?;
        for (k, e) in report.totals.iter().enumerate() {
            out.push((energy_series(k), *e));
        }
        let n = obs.density.spec.n;
        if let Some(e) = report.energy(n) {
            out.push(("ks_ratio".to_string(), ks_ratio_with(obs.density, obs.time, e)?));
        }
        Ok(())
    }
}

/// Records `sup|∇ₓZ^αφ|` for chosen words and commutator budgets of chosen orders.
#[derive(Clone, Debug, Default)]
pub struct CommutedFieldObserver {
    pub words: Vec<MultiIndex>,
    pub budget_orders: Vec<usize>,
}

impl CommutedFieldObserver {
    /// Every word with `1 ≤ |α| ≤ order` and budgets up to `budget_order`.
    pub fn up_to(n: usize, order: usize, budget_order: usize) -> Result<Self> {
        if order > N_MAX_GRID || budget_order > N_MAX_GRID {
            return Err(LabError::StencilBudget(format!("commuted fields are evaluated up to order {N_MAX_GRID}")));
        }
        let count = make_gamma(n)?.len();
        let words = MultiIndex::all_up_to(count, order).into_iter().filter(|w| !w.is_empty()).collect();
        Ok(Self { words, budget_orders: (1..=budget_order).collect() })
    }
}

impl<P: ?Sized> Observer<P> for CommutedFieldObserver {
    fn observe(&mut self, obs: &Observation<'_, P>, out: &mut Vec<(String, f64)>) -> Result<()> {
        let n = obs.density.spec.n;
        let mut pots = CommutedPotentials::new(obs.density, obs.time, obs.solver, obs.config.interpolation)?;
        for w in &self.words {
            let sup = pots.gradient(&w.0)?.sup_norm();
            out.push((grad_field_series(w, n)?, sup));
        }
        for &k in &self.budget_orders {
            out.push((budget_series(k), commutator_budget(&mut pots, k)?));
        }
        Ok(())
    }
}

/// Decay fit of `sup_x |∇ₓZ^αφ|` from a record.
pub fn grad_field_decay(record: &RunRecord, alpha: &MultiIndex, n: usize, window: (f64, f64)) -> Result<DecayFit> {
    let name = grad_field_series(alpha, n)?;
    let series = match record.pairs(&name) {
        Ok(s) => s,
        Err(_) if alpha.is_empty() && !record.fields.is_empty() => record.fields.iter().map(|s| (s.time, s.grad_phi.sup_norm())).collect(),
        Err(_) => return Err(LabError::Missing(format!("no '{name}' series or field snapshots; record times: {:?}", record.times))),
    };
    decay_fit(&series, window)
}

/// The recorded order-`order` budget `(1+t) Σ ‖∇ₓZ^γφ · Z^βf‖_{L¹}` as `(t, value)` pairs.
pub fn high_dim_commutator_budget(record: &RunRecord, order: usize) -> Result<Vec<(f64, f64)>> {
    if order == 0 || order > N_MAX_GRID {
        return Err(LabError::StencilBudget(format!("budgets are recorded for 1 ≤ |α| ≤ {N_MAX_GRID}")));
    }
    record.pairs(&budget_series(order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialField;
    use crate::grid::SpatialGrid;
    use crate::transport::FieldSnapshot;

    #[test]
    fn missing_snapshots_list_times() {
        let mut r = RunRecord::new(String::new());
        r.push_row(0.0, vec![]).unwrap();
        r.push_row(1.0, vec![]).unwrap();
        let e = grad_field_decay(&r, &MultiIndex::empty(), 2, (0.0, 1.0)).unwrap_err().to_string();
        assert!(e.contains("[0.0, 1.0]"), "{e}");
    }

    #[test]
    fn frozen_field_gives_zero_exponent() {
        let grid = SpatialGrid::new(2, 4.0, 8).unwrap();
        let mut vals: Vec<f64> = (0..grid.len()).map(|i| (-grid.point(i)[0].powi(2)).exp()).collect();
        vals.extend(vec![0.0; grid.len()]);
        let g = SpatialField::new(grid, 2, vals).unwrap();
        let mut r = RunRecord::new(String::new());
        for k in 0..12 {
            let t = k as f64;
            r.push_row(t, vec![]).unwrap();
            r.fields.push(FieldSnapshot {
                time: t,
                phi: SpatialField::zeros(grid, 1),
                grad_phi: g.clone(),
                residual_norm: 0.0,
                boundary_contaminated: false,
            });
        }
        let fit = grad_field_decay(&r, &MultiIndex::empty(), 2, (0.0, 11.0)).unwrap();
        assert!(fit.exponent.abs() < 1e-12);
    }

    #[test]
    fn zero_data_budget_is_zero_series() {
        let mut r = RunRecord::new(String::new());
        for k in 0..3 {
            r.push_row(k as f64, vec![(budget_series(1), 0.0)]).unwrap();
        }
        assert!(high_dim_commutator_budget(&r, 1).unwrap().iter().all(|p| p.1 == 0.0));
        assert!(high_dim_commutator_budget(&r, 3).is_err());
    }
}

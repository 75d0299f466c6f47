//! Exact linear-combination detection for field expressions.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::expr::{FieldExpression, Slot};
use super::poly::Monomial;

/// Result of [`express_in_basis`]: a value, never an error.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Span {
    Coefficients(Vec<BigRational>),
    NotInSpan,
}

/// Coordinates of an expression: (slot or zeroth term, monomial) → coefficient.
fn flatten(e: &FieldExpression) -> BTreeMap<(Option<Slot>, Monomial), BigRational> {
    let mut out = BTreeMap::new();
    for (s, c) in e.slots() {
        for (m, q) in c.terms() {
            out.insert((Some(*s), m.clone()), q.clone());
        }
    }
    for (m, q) in e.zeroth().terms() {
        out.insert((None, m.clone()), q.clone());
    }
    out
}

/// Finds constant rational `c_b` with `E = Σ c_b B_b` by exact elimination.
///
/// Free unknowns (linearly dependent basis members, e.g. a zero member) are
/// set to zero, so the returned combination is one valid representation.
pub fn express_in_basis(e: &FieldExpression, basis: &[FieldExpression]) -> Span {
    let target = flatten(e);
    let columns: Vec<_> = basis.iter().map(flatten).collect();
    let mut keys: Vec<(Option<Slot>, Monomial)> = target.keys().cloned().collect();
    for c in &columns {
        keys.extend(c.keys().cloned());
    }
    keys.sort();
    keys.dedup();
    let cols = basis.len();
    let mut rows: Vec<Vec<BigRational>> = keys
        .iter()
        .map(|k| {
            let mut row: Vec<BigRational> = columns.iter().map(|c| c.get(k).cloned().unwrap_or_else(BigRational::zero)).collect();
            row.push(target.get(k).cloned().unwrap_or_else(BigRational::zero));
            row
        })
        .collect();

    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][col].is_zero()) else { continue };
        rows.swap(r, p);
        let inv = BigRational::one() / rows[r][col].clone();
        for v in rows[r].iter_mut() {
            *v = &*v * &inv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][col].is_zero() {
                let factor = rows[i][col].clone();
                let pivot_row = rows[r].clone();
                for (v, pv) in rows[i].iter_mut().zip(pivot_row.iter()) {
                    *v = &*v - &factor * pv;
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    if rows[r..].iter().any(|row| !row[cols].is_zero()) {
        return Span::NotInSpan;
    }
    let mut coeffs = vec![BigRational::zero(); cols];
    for (i, &col) in pivots.iter().enumerate() {
        coeffs[col] = rows[i][cols].clone();
    }
    Span::Coefficients(coeffs)
}

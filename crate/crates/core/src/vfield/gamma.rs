//! The commuting family γ, its macroscopic counterpart Γ, and the structure
//! constants checked symbolically.

use std::fmt;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::expr::{perturbed_transport, FieldExpression, SecondOrderOperator, Slot};
use super::linalg::{express_in_basis, Span};
use super::poly::{integer, rational, Polynomial, Variable};
use crate::error::{LabError, Result};

/// The kind of a γ member (axes from 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SymbolKind {
    /// `∂_{xⁱ}`
    Translation(usize),
    /// `t∂_{xⁱ} + ∂_{vⁱ}`
    Boost(usize),
    /// `Ω^x_{ij} + Ω^v_{ij}` with `i < j`
    Rotation(usize, usize),
    /// `S^x + S^v`
    Scaling,
}

/// A member of γ in dimension `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VectorFieldSymbol {
    pub kind: SymbolKind,
    pub n: usize,
}

impl VectorFieldSymbol {
    /// Validated constructor; rotations must satisfy `i < j < n`.
    pub fn new(kind: SymbolKind, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(LabError::InvalidDimension { n, reason: "vector fields need n >= 2" });
        }
        let ok = match kind {
            SymbolKind::Translation(i) | SymbolKind::Boost(i) => i < n,
            SymbolKind::Rotation(i, j) => i < j && j < n,
            SymbolKind::Scaling => true,
        };
        if ok {
            Ok(Self { kind, n })
        } else {
            Err(LabError::InvalidArgument(format!("symbol {kind:?} out of range for n = {n}")))
        }
    }

    pub fn is_translation(&self) -> bool {
        matches!(self.kind, SymbolKind::Translation(_))
    }

    pub fn is_scaling(&self) -> bool {
        matches!(self.kind, SymbolKind::Scaling)
    }

    /// Microscopic operator in `(t, x, v)`.
    pub fn expression(&self) -> FieldExpression {
        let n = self.n;
        match self.kind {
            SymbolKind::Translation(i) => FieldExpression::partial(n, Slot::X(i)),
            SymbolKind::Boost(i) => {
                FieldExpression::slot(n, Slot::X(i), Polynomial::var(n, Variable::T)).add(&FieldExpression::partial(n, Slot::V(i)))
            }
            SymbolKind::Rotation(i, j) => rotation_x(n, i, j).add(&rotation_v(n, i, j)),
            SymbolKind::Scaling => scaling_x(n).add(&scaling_v(n)),
        }
    }

    /// Member of Γ acting on functions of `(t, x)`.
    pub fn macroscopic(&self) -> FieldExpression {
        self.expression().macroscopic()
    }

    pub fn label(&self) -> String {
        match self.kind {
            SymbolKind::Translation(i) => format!("dx{}", i + 1),
            SymbolKind::Boost(i) => format!("B{}", i + 1),
            SymbolKind::Rotation(i, j) => format!("R{}{}", i + 1, j + 1),
            SymbolKind::Scaling => "S".to_string(),
        }
    }
}

impl fmt::Display for VectorFieldSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

fn oriented(n: usize, i: usize, j: usize, x: bool) -> FieldExpression {
    let var = |k| if x { Variable::X(k) } else { Variable::V(k) };
    let slot = |k| if x { Slot::X(k) } else { Slot::V(k) };
    FieldExpression::slot(n, slot(j), Polynomial::var(n, var(i))).sub(&FieldExpression::slot(n, slot(i), Polynomial::var(n, var(j))))
}

/// `Ω^x_{ij} = xⁱ∂_{xʲ} − xʲ∂_{xⁱ}`; `Ω_{ii} = 0` and `Ω_{ji} = −Ω_{ij}` by construction.
pub fn rotation_x(n: usize, i: usize, j: usize) -> FieldExpression {
    oriented(n, i, j, true)
}

/// `Ω^v_{ij} = vⁱ∂_{vʲ} − vʲ∂_{vⁱ}`.
pub fn rotation_v(n: usize, i: usize, j: usize) -> FieldExpression {
    oriented(n, i, j, false)
}

/// `S^x = Σ xⁱ∂_{xⁱ}`.
pub fn scaling_x(n: usize) -> FieldExpression {
    (0..n).fold(FieldExpression::zero(n), |acc, i| acc.add(&FieldExpression::slot(n, Slot::X(i), Polynomial::var(n, Variable::X(i)))))
}

/// `S^v = Σ vⁱ∂_{vⁱ}`.
pub fn scaling_v(n: usize) -> FieldExpression {
    (0..n).fold(FieldExpression::zero(n), |acc, i| acc.add(&FieldExpression::slot(n, Slot::V(i), Polynomial::var(n, Variable::V(i)))))
}

/// Number of members of γ: `2n + n(n−1)/2 + 1`.
pub fn gamma_count(n: usize) -> usize {
    2 * n + n * (n - 1) / 2 + 1
}

/// γ in its fixed order: boosts, translations, rotations `(i<j)` lexicographic, scaling.
pub fn make_gamma(n: usize) -> Result<Vec<VectorFieldSymbol>> {
    if n < 2 {
        return Err(LabError::InvalidDimension { n, reason: "the family γ is defined for n >= 2" });
    }
    let mut out = Vec::with_capacity(gamma_count(n));
    out.extend((0..n).map(|i| VectorFieldSymbol { kind: SymbolKind::Boost(i), n }));
    out.extend((0..n).map(|i| VectorFieldSymbol { kind: SymbolKind::Translation(i), n }));
    for i in 0..n {
        for j in i + 1..n {
            out.push(VectorFieldSymbol { kind: SymbolKind::Rotation(i, j), n });
        }
    }
    out.push(VectorFieldSymbol { kind: SymbolKind::Scaling, n });
    Ok(out)
}

/// An ordered word `Z^α = Z^{α¹}⋯Z^{α^k}` of indices into [`make_gamma`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn new(entries: Vec<usize>, n: usize) -> Result<Self> {
        let count = gamma_count(n);
        if let Some(bad) = entries.iter().find(|&&e| e >= count) {
            return Err(LabError::InvalidArgument(format!("multi-index entry {bad} outside γ of size {count}")));
        }
        Ok(Self(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// All ordered words of length at most `max_len` over `count` letters, by length then lexicographically.
    pub fn all_up_to(count: usize, max_len: usize) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::empty()];
        let mut layer = vec![MultiIndex::empty()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &layer {
                for a in 0..count {
                    let mut v = w.0.clone();
                    v.push(a);
                    next.push(MultiIndex(v));
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    /// The word without its first letter: `Z^α = Z^{α¹} Z^{tail}`.
    pub fn split_first(&self) -> Option<(usize, MultiIndex)> {
        let (&h, t) = self.0.split_first()?;
        Some((h, MultiIndex(t.to_vec())))
    }

    pub fn label(&self, gamma: &[VectorFieldSymbol]) -> String {
        if self.0.is_empty() {
            return "id".into();
        }
        self.0.iter().map(|&i| gamma[i].label()).collect::<Vec<_>>().join(".")
    }
}

/// Composed first-order words are not first-order; this returns the symbols of a word.
pub fn word_symbols(alpha: &MultiIndex, gamma: &[VectorFieldSymbol]) -> Vec<VectorFieldSymbol> {
    alpha.0.iter().map(|&i| gamma[i]).collect()
}

/// `c` with `[Z, Δ] = cΔ` on functions of `x`, computed by symbolic probing.
pub fn laplacian_commutation(z: &VectorFieldSymbol) -> Result<i64> {
    let lap = SecondOrderOperator::laplacian(z.n);
    let bracket = SecondOrderOperator::commutator_with(&z.expression(), &lap);
    let c = bracket.constant_multiple_of(&lap).map_err(|e| LabError::Unsupported(format!("[{z}, Δ] is not a multiple of Δ: {e}")))?;
    c.to_integer().to_i64().ok_or_else(|| LabError::Unsupported("non-integer Laplacian constant".into()))
}

/// `Zρ(f) = ρ(Zf) + c·ρ(f)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhoCommutation {
    pub pass_through: bool,
    pub constant: i64,
}

/// Derived from the operator: x-coefficients must be `v`-free and the
/// velocity divergence of the `∂_v` part must be a constant `c`; integration
/// by parts in `v` then gives `Z^macro ρ(f) = ρ(Zf) + cρ(f)`.
pub fn rho_commutation(z: &VectorFieldSymbol) -> Result<RhoCommutation> {
    let e = z.expression();
    let n = z.n;
    for i in 0..n {
        let a = e.coefficient(Slot::X(i));
        if (0..n).any(|k| a.degree_in(Variable::V(k)) > 0) {
            return Err(LabError::Unsupported(format!("{z}: x-coefficient depends on v")));
        }
    }
    let mut div = Polynomial::zero(n);
    for k in 0..n {
        div = div.add(&e.coefficient(Slot::V(k)).derivative(Variable::V(k)));
    }
    let c = div.as_constant().ok_or_else(|| LabError::Unsupported(format!("{z}: velocity divergence is not constant")))?;
    let c = c.to_integer().to_i64().unwrap_or(0);
    Ok(RhoCommutation { pass_through: c == 0, constant: c })
}

/// Template `[T_φ, Z] f = −μ Σ_k ∂_{x^k}(Zφ + cφ) ∂_{v^k} f`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TphiTemplate {
    pub symbol: VectorFieldSymbol,
    /// The constant `c` (−2 for scaling, 0 otherwise).
    pub constant: i64,
    /// Macroscopic operator producing the `Zφ` factor.
    pub macroscopic: FieldExpression,
    /// Velocity slots carrying the template.
    pub velocity_slots: Vec<Slot>,
}

impl TphiTemplate {
    /// A template whose bracket is only the commuted-potential term (no `cφ` part).
    pub fn is_zero_constant(&self) -> bool {
        self.constant == 0
    }
}

/// Deterministic generic polynomial potential `φ(t, x)` of degree ≤ 3 used as a probe.
fn probe_potential(n: usize, salt: i64) -> Polynomial {
    let mut p = Polynomial::zero(n);
    let mut k = salt;
    let mut next = || {
        k = (k * 1_103_515_245 + 12_345) % 2_147_483_648;
        rational(k % 17 - 8, 1 + k % 5)
    };
    let vars: Vec<Variable> = std::iter::once(Variable::T).chain((0..n).map(Variable::X)).collect();
    p = p.add(&Polynomial::constant(n, next()));
    for &a in &vars {
        p = p.add(&Polynomial::var(n, a).scale(&next()));
        for &b in &vars {
            p = p.add(&Polynomial::var(n, a).mul(&Polynomial::var(n, b)).scale(&next()));
            for &c in &vars {
                p = p.add(&Polynomial::var(n, a).mul(&Polynomial::var(n, b)).mul(&Polynomial::var(n, c)).scale(&next()));
            }
        }
    }
    p
}

/// Derives the `[T_φ, Z]` template symbolically: for generic polynomial
/// potentials, `[T_φ, Z] + μΣ∂_k(Zφ)∂_{v^k}` is expressed in the basis
/// `{−μΣ∂_kφ ∂_{v^k}}` and the coefficient is checked to be φ-independent.
pub fn commute_with_tphi_order1(z: &VectorFieldSymbol) -> Result<TphiTemplate> {
    let n = z.n;
    let mu = 1i64;
    let zx = z.expression();
    let macro_z = zx.macroscopic();
    let mut constant: Option<BigRational> = None;
    for salt in [7, 101] {
        let phi = probe_potential(n, salt);
        let bracket = FieldExpression::commutator(&perturbed_transport(&phi, mu), &zx);
        let z_phi = macro_z.apply(&phi);
        let mut main = FieldExpression::zero(n);
        let mut base = FieldExpression::zero(n);
        for k in 0..n {
            main = main.add(&FieldExpression::slot(n, Slot::V(k), z_phi.derivative(Variable::X(k)).scale(&integer(-mu))));
            base = base.add(&FieldExpression::slot(n, Slot::V(k), phi.derivative(Variable::X(k)).scale(&integer(-mu))));
        }
        let rest = bracket.sub(&main);
        let c = match express_in_basis(&rest, &[base]) {
            Span::Coefficients(c) => c[0].clone(),
            Span::NotInSpan => return Err(LabError::Unsupported(format!("[T_φ, {z}] does not follow the first-order template"))),
        };
        match &constant {
            Some(prev) if *prev != c => return Err(LabError::Unsupported(format!("[T_φ, {z}] template constant depends on φ"))),
            _ => constant = Some(c),
        }
    }
    let c = constant.unwrap_or_else(BigRational::zero);
    Ok(TphiTemplate {
        symbol: *z,
        constant: c.to_integer().to_i64().unwrap_or(0),
        macroscopic: macro_z,
        velocity_slots: (0..n).map(Slot::V).collect(),
    })
}

/// Structure constants of `[Z^a, Z^b] = Σ_c k_c Z^c` over γ.
#[derive(Clone, Debug)]
pub struct StructureTable {
    pub n: usize,
    /// `entries[a][b]` holds the coefficient vector, or `None` if outside the span.
    pub entries: Vec<Vec<Option<Vec<BigRational>>>>,
}

impl StructureTable {
    pub fn all_in_span(&self) -> bool {
        self.entries.iter().flatten().all(Option::is_some)
    }
}

/// Computes every pairwise bracket in γ and expresses it in the γ span.
pub fn structure_constants(n: usize) -> Result<StructureTable> {
    let gamma = make_gamma(n)?;
    let basis: Vec<FieldExpression> = gamma.iter().map(VectorFieldSymbol::expression).collect();
    let entries = basis
        .iter()
        .map(|a| {
            basis
                .iter()
                .map(|b| match express_in_basis(&FieldExpression::commutator(a, b), &basis) {
                    Span::Coefficients(c) => Some(c),
                    Span::NotInSpan => None,
                })
                .collect()
        })
        .collect();
    Ok(StructureTable { n, entries })
}

/// Checks `|x|∂_{xⁱ} p = Σ_j (xʲ/|x|)Ω^x_{ji} p + (xⁱ/|x|) S^x p` at the given
/// points for a generic polynomial `p` of degree ≤ 3; true iff the worst
/// relative residual is below `1e-12`.
pub fn weighted_derivative_identity_check(n: usize, points: &[Vec<f64>]) -> Result<bool> {
    if n < 2 {
        return Err(LabError::InvalidDimension { n, reason: "identity needs n >= 2" });
    }
    if points.iter().any(|x| x.len() != n) {
        return Err(LabError::InvalidArgument("sample point of wrong dimension".into()));
    }
    if points.iter().any(|x| x.iter().all(|&c| c == 0.0)) {
        return Err(LabError::Domain("the identity requires x != 0".into()));
    }
    let p = probe_potential(n, 29);
    let sx = scaling_x(n).apply(&p).compile();
    let omegas: Vec<Vec<_>> = (0..n).map(|j| (0..n).map(|i| rotation_x(n, j, i).apply(&p).compile()).collect()).collect();
    let grads: Vec<_> = (0..n).map(|i| p.derivative(Variable::X(i)).compile()).collect();
    let t = 0.75;
    let v = vec![0.0; n];
    let mut worst = 0.0f64;
    for x in points {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        for i in 0..n {
            let lhs = r * grads[i].eval(t, x, &v);
            let mut rhs = x[i] / r * sx.eval(t, x, &v);
            let mut scale = lhs.abs() + rhs.abs();
            for j in 0..n {
                let term = x[j] / r * omegas[j][i].eval(t, x, &v);
                scale += term.abs();
                rhs += term;
            }
            let rel = (lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
        }
    }
    Ok(worst < 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vfield::expr::free_transport;

    #[test]
    fn family_sizes() {
        assert_eq!(make_gamma(2).unwrap().len(), 6);
        assert_eq!(make_gamma(3).unwrap().len(), 10);
        assert_eq!(make_gamma(4).unwrap().len(), 15);
        assert!(make_gamma(1).is_err());
    }

    #[test]
    fn boosts_come_first() {
        let g = make_gamma(3).unwrap();
        for (i, z) in g.iter().take(3).enumerate() {
            assert_eq!(z.kind, SymbolKind::Boost(i));
        }
        assert_eq!(g.last().unwrap().kind, SymbolKind::Scaling);
    }

    #[test]
    fn transport_commutes_with_gamma() {
        for n in 2..=4 {
            let t = free_transport(n);
            for z in make_gamma(n).unwrap() {
                assert!(FieldExpression::commutator(&t, &z.expression()).is_zero(), "{z}");
            }
        }
    }

    #[test]
    fn rotation_bracket_with_translation() {
        let n = 2;
        let r = VectorFieldSymbol::new(SymbolKind::Rotation(0, 1), n).unwrap().expression();
        let d1 = FieldExpression::partial(n, Slot::X(0));
        let d2 = FieldExpression::partial(n, Slot::X(1));
        assert_eq!(FieldExpression::commutator(&r, &d1), d2.neg());
    }

    #[test]
    fn degenerate_rotations_normalize() {
        assert!(rotation_x(3, 1, 1).is_zero());
        assert_eq!(rotation_x(3, 2, 0), rotation_x(3, 0, 2).neg());
    }

    #[test]
    fn laplacian_constants() {
        for n in 2..=4 {
            for z in make_gamma(n).unwrap() {
                let c = laplacian_commutation(&z).unwrap();
                assert_eq!(c, if z.is_scaling() { -2 } else { 0 }, "{z}");
            }
        }
    }

    #[test]
    fn rho_constants() {
        for n in 2..=4 {
            for z in make_gamma(n).unwrap() {
                let r = rho_commutation(&z).unwrap();
                let expected = if z.is_scaling() { n as i64 } else { 0 };
                assert_eq!(r.constant, expected, "{z}");
                assert_eq!(r.pass_through, !z.is_scaling());
            }
        }
    }

    #[test]
    fn tphi_templates() {
        for n in 2..=3 {
            for z in make_gamma(n).unwrap() {
                let tpl = commute_with_tphi_order1(&z).unwrap();
                assert_eq!(tpl.constant, if z.is_scaling() { -2 } else { 0 }, "{z}");
            }
        }
    }

    #[test]
    fn boost_template_factor_is_t_dx() {
        let z = VectorFieldSymbol::new(SymbolKind::Boost(0), 2).unwrap();
        let tpl = commute_with_tphi_order1(&z).unwrap();
        assert_eq!(tpl.macroscopic, FieldExpression::slot(2, Slot::X(0), Polynomial::var(2, Variable::T)));
    }

    #[test]
    fn identity_rejects_origin() {
        assert!(weighted_derivative_identity_check(2, &[vec![0.0, 0.0]]).is_err());
        assert!(weighted_derivative_identity_check(3, &[vec![1.0, 0.0, 0.0]]).unwrap());
    }
}

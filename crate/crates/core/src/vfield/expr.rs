//! First-order differential operators with polynomial coefficients, their Lie
//! brackets, and second-order operators recovered by probing.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::poly::{integer, Polynomial, Variable};
use crate::error::{invalid, Result};

/// A derivative slot `∂_t`, `∂_{x^i}` or `∂_{v^i}` (axes from 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    T,
    X(usize),
    V(usize),
}

impl Slot {
    pub fn variable(self) -> Variable {
        match self {
            Slot::T => Variable::T,
            Slot::X(i) => Variable::X(i),
            Slot::V(i) => Variable::V(i),
        }
    }

    pub fn all(n: usize) -> Vec<Slot> {
        let mut s = vec![Slot::T];
        s.extend((0..n).map(Slot::X));
        s.extend((0..n).map(Slot::V));
        s
    }

    fn name(self) -> String {
        match self {
            Slot::T => "d_t".into(),
            Slot::X(i) => format!("d_x{}", i + 1),
            Slot::V(i) => format!("d_v{}", i + 1),
        }
    }
}

/// `Σ_s a_s ∂_s + a_0` in canonical form (no zero coefficients stored).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FieldExpression {
    n: usize,
    terms: BTreeMap<Slot, Polynomial>,
    zeroth: Polynomial,
}

impl FieldExpression {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: BTreeMap::new(), zeroth: Polynomial::zero(n) }
    }

    /// `coeff · ∂_slot`.
    pub fn slot(n: usize, slot: Slot, coeff: Polynomial) -> Self {
        let mut e = Self::zero(n);
        e.add_slot(slot, coeff);
        e
    }

    /// Plain `∂_slot`.
    pub fn partial(n: usize, slot: Slot) -> Self {
        Self::slot(n, slot, Polynomial::one(n))
    }

    /// Multiplication operator by `p`.
    pub fn multiplication(p: Polynomial) -> Self {
        let n = p.dimension();
        Self { n, terms: BTreeMap::new(), zeroth: p }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn coefficient(&self, slot: Slot) -> Polynomial {
        self.terms.get(&slot).cloned().unwrap_or_else(|| Polynomial::zero(self.n))
    }

    pub fn zeroth(&self) -> &Polynomial {
        &self.zeroth
    }

    pub fn slots(&self) -> impl Iterator<Item = (&Slot, &Polynomial)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.zeroth.is_zero()
    }

    pub fn has_slot(&self, slot: Slot) -> bool {
        self.terms.contains_key(&slot)
    }

    fn add_slot(&mut self, slot: Slot, coeff: Polynomial) {
        let sum = self.coefficient(slot).add(&coeff);
        if sum.is_zero() {
            self.terms.remove(&slot);
        } else {
            self.terms.insert(slot, sum);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "expressions of different dimensions");
        let mut out = self.clone();
        for (s, c) in &other.terms {
            out.add_slot(*s, c.clone());
        }
        out.zeroth = out.zeroth.add(&other.zeroth);
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&-BigRational::one())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        let mut out = Self::zero(self.n);
        for (s, c) in &self.terms {
            out.add_slot(*s, c.scale(k));
        }
        out.zeroth = self.zeroth.scale(k);
        out
    }

    /// Left multiplication by a polynomial: `p·E`.
    pub fn times(&self, p: &Polynomial) -> Self {
        let mut out = Self::zero(self.n);
        for (s, c) in &self.terms {
            out.add_slot(*s, c.mul(p));
        }
        out.zeroth = self.zeroth.mul(p);
        out
    }

    /// Drops every `∂_v` slot: the macroscopic counterpart acting on functions of `(t, x)`.
    pub fn macroscopic(&self) -> Self {
        let mut out = self.clone();
        out.terms.retain(|s, _| !matches!(s, Slot::V(_)));
        out
    }

    /// Action on a polynomial test function.
    pub fn apply(&self, p: &Polynomial) -> Polynomial {
        let mut out = self.zeroth.mul(p);
        for (s, c) in &self.terms {
            out = out.add(&c.mul(&p.derivative(s.variable())));
        }
        out
    }

    /// Action of the first-order part only (no multiplication term).
    fn apply_derivation(&self, p: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero(self.n);
        for (s, c) in &self.terms {
            out = out.add(&c.mul(&p.derivative(s.variable())));
        }
        out
    }

    /// Lie bracket `[A, B] = AB − BA`, again a first-order operator.
    pub fn commutator(a: &Self, b: &Self) -> Self {
        assert_eq!(a.n, b.n, "expressions of different dimensions");
        let n = a.n;
        let mut out = Self::zero(n);
        for s in Slot::all(n) {
            let ab = a.apply_derivation(&b.coefficient(s));
            let ba = b.apply_derivation(&a.coefficient(s));
            out.add_slot(s, ab.sub(&ba));
        }
        out.zeroth = a.apply_derivation(&b.zeroth).sub(&b.apply_derivation(&a.zeroth));
        out
    }

    /// Rewrites the operator in free-streaming coordinates `y = x − vt`.
    ///
    /// Coefficients are re-expressed through `x = y + vt`; slots transform as
    /// `∂_x → ∂_y`, `∂_v → ∂_v − t∂_y`, `∂_t → ∂_t − v·∂_y`. The result uses
    /// the `X` slots/variables for `y`.
    pub fn to_free_streaming(&self) -> Self {
        let n = self.n;
        let t = Polynomial::var(n, Variable::T);
        let mut images = vec![t.clone()];
        for i in 0..n {
            images.push(Polynomial::var(n, Variable::X(i)).add(&Polynomial::var(n, Variable::V(i)).mul(&t)));
        }
        for i in 0..n {
            images.push(Polynomial::var(n, Variable::V(i)));
        }
        let mut out = Self::zero(n);
        out.zeroth = self.zeroth.substitute(&images);
        for (s, c) in &self.terms {
            let c = c.substitute(&images);
            match *s {
                Slot::X(i) => out.add_slot(Slot::X(i), c),
                Slot::V(i) => {
                    out.add_slot(Slot::V(i), c.clone());
                    out.add_slot(Slot::X(i), c.mul(&t).neg());
                }
                Slot::T => {
                    out.add_slot(Slot::T, c.clone());
                    for i in 0..n {
                        out.add_slot(Slot::X(i), c.mul(&Polynomial::var(n, Variable::V(i))).neg());
                    }
                }
            }
        }
        out
    }

    /// Highest total degree among coefficients.
    pub fn coefficient_degree(&self) -> u32 {
        self.terms.values().map(Polynomial::total_degree).max().unwrap_or(0).max(self.zeroth.total_degree())
    }
}

impl fmt::Display for FieldExpression {
    /// Canonical text form: `[slot: poly]` entries in slot order, then the
    /// multiplication term, `0` for the zero operator.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut parts: Vec<String> = self.terms.iter().map(|(s, c)| format!("[{}: {}]", s.name(), c)).collect();
        if !self.zeroth.is_zero() {
            parts.push(format!("[1: {}]", self.zeroth));
        }
        write!(f, "{}", parts.join(" "))
    }
}

/// `∂_t + Σ vⁱ ∂_{xⁱ}`.
pub fn free_transport(n: usize) -> FieldExpression {
    let mut e = FieldExpression::partial(n, Slot::T);
    for i in 0..n {
        e = e.add(&FieldExpression::slot(n, Slot::X(i), Polynomial::var(n, Variable::V(i))));
    }
    e
}

/// `T + μ Σ ∂_{x^k}φ ∂_{v^k}` for a polynomial potential `φ(t, x)`.
pub fn perturbed_transport(phi: &Polynomial, mu: i64) -> FieldExpression {
    let n = phi.dimension();
    let mut e = free_transport(n);
    for k in 0..n {
        let c = phi.derivative(Variable::X(k)).scale(&integer(mu));
        e = e.add(&FieldExpression::slot(n, Slot::V(k), c));
    }
    e
}

/// A second-order operator `Σ_{p≤q} a_{pq}∂_p∂_q + Σ_s b_s ∂_s + c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecondOrderOperator {
    pub n: usize,
    pub second: BTreeMap<(Slot, Slot), Polynomial>,
    pub first: BTreeMap<Slot, Polynomial>,
    pub zeroth: Polynomial,
}

impl SecondOrderOperator {
    /// `Δ_x = Σ ∂²_{xⁱ}`.
    pub fn laplacian(n: usize) -> Self {
        let second = (0..n).map(|i| ((Slot::X(i), Slot::X(i)), Polynomial::one(n))).collect();
        Self { n, second, first: BTreeMap::new(), zeroth: Polynomial::zero(n) }
    }

    pub fn apply(&self, p: &Polynomial) -> Polynomial {
        let mut out = self.zeroth.mul(p);
        for (s, c) in &self.first {
            out = out.add(&c.mul(&p.derivative(s.variable())));
        }
        for ((a, b), c) in &self.second {
            out = out.add(&c.mul(&p.derivative(a.variable()).derivative(b.variable())));
        }
        out
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        fn sc<K: Ord + Copy>(m: &BTreeMap<K, Polynomial>, k: &BigRational) -> BTreeMap<K, Polynomial> {
            m.iter().map(|(s, c)| (*s, c.scale(k))).filter(|(_, c)| !c.is_zero()).collect()
        }
        Self { n: self.n, second: sc(&self.second, k), first: sc(&self.first, k), zeroth: self.zeroth.scale(k) }
    }

    /// Recovers the coefficients of a (at most) second-order operator with
    /// polynomial coefficients from its action on `1`, `w_s` and `w_p w_q`.
    pub fn probe(n: usize, op: impl Fn(&Polynomial) -> Polynomial) -> Self {
        let zeroth = op(&Polynomial::one(n));
        let slots = Slot::all(n);
        let w = |s: Slot| Polynomial::var(n, s.variable());
        let mut first = BTreeMap::new();
        for &s in &slots {
            let c = op(&w(s)).sub(&zeroth.mul(&w(s)));
            if !c.is_zero() {
                first.insert(s, c);
            }
        }
        let lower = |p: &Polynomial, first: &BTreeMap<Slot, Polynomial>| {
            let mut out = zeroth.mul(p);
            for (s, c) in first {
                out = out.add(&c.mul(&p.derivative(s.variable())));
            }
            out
        };
        let mut second = BTreeMap::new();
        for (i, &p) in slots.iter().enumerate() {
            for &q in &slots[i..] {
                let probe = w(p).mul(&w(q));
                let mut c = op(&probe).sub(&lower(&probe, &first));
                if p == q {
                    c = c.scale(&BigRational::new(1.into(), 2.into()));
                }
                if !c.is_zero() {
                    second.insert((p, q), c);
                }
            }
        }
        Self { n, second, first, zeroth }
    }

    /// `[Z, D] = ZD − DZ` for a first-order `Z`.
    pub fn commutator_with(z: &FieldExpression, d: &Self) -> Self {
        let n = d.n;
        Self::probe(n, |p| z.apply(&d.apply(p)).sub(&d.apply(&z.apply(p))))
    }

    /// Returns `c` with `self = c·other` (constant `c`), if it exists.
    pub fn constant_multiple_of(&self, other: &Self) -> Result<BigRational> {
        let pick = other.second.iter().next().ok_or_else(|| invalid("reference operator has no second-order part"))?;
        let mine = self.second.get(pick.0).cloned().unwrap_or_else(|| Polynomial::zero(self.n));
        // c = mine / reference must be a constant when the reference is.
        let reference = pick.1.as_constant().ok_or_else(|| invalid("reference coefficient is not constant"))?;
        let c = match mine.as_constant() {
            Some(m) => m / reference,
            None => return Err(invalid("commutator coefficient is not constant")),
        };
        if *self == other.scale(&c) || (c.is_zero() && self.is_zero()) {
            Ok(c)
        } else {
            Err(invalid("operator is not a constant multiple of the reference"))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.second.is_empty() && self.first.is_empty() && self.zeroth.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_of_x_d_x_with_d_x() {
        let n = 2;
        let xdx = FieldExpression::slot(n, Slot::X(0), Polynomial::var(n, Variable::X(0)));
        let dx = FieldExpression::partial(n, Slot::X(0));
        let c = FieldExpression::commutator(&xdx, &dx);
        assert_eq!(c, dx.neg());
    }

    #[test]
    fn bracket_matches_operator_composition_on_probes() {
        let n = 2;
        let a = FieldExpression::slot(n, Slot::V(1), Polynomial::var(n, Variable::X(0)).pow(2))
            .add(&FieldExpression::multiplication(Polynomial::var(n, Variable::T)));
        let b = FieldExpression::slot(n, Slot::X(0), Polynomial::var(n, Variable::V(1))).add(&FieldExpression::partial(n, Slot::T));
        let c = FieldExpression::commutator(&a, &b);
        let probe = Polynomial::var(n, Variable::X(0)).mul(&Polynomial::var(n, Variable::V(1)).pow(3)).add(&Polynomial::var(n, Variable::T).pow(2));
        let lhs = c.apply(&probe);
        let rhs = a.apply(&b.apply(&probe)).sub(&b.apply(&a.apply(&probe)));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn probing_recovers_laplacian() {
        let n = 3;
        let lap = SecondOrderOperator::laplacian(n);
        let recovered = SecondOrderOperator::probe(n, |p| lap.apply(p));
        assert_eq!(recovered, lap);
    }

    #[test]
    fn display_is_canonical() {
        let n = 2;
        let e = FieldExpression::slot(n, Slot::X(1), Polynomial::var(n, Variable::T)).add(&FieldExpression::partial(n, Slot::V(1)));
        assert_eq!(e.to_string(), "[d_x2: t] [d_v2: 1]");
        assert_eq!(FieldExpression::zero(2).to_string(), "0");
    }
}

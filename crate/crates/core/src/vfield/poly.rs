//! Sparse multivariate polynomials in `(t, x⁰…xⁿ⁻¹, v⁰…vⁿ⁻¹)` with exact
//! rational coefficients.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A phase-space variable. Spatial and velocity axes are numbered from 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variable {
    T,
    X(usize),
    V(usize),
}

impl Variable {
    /// Position of the variable in an exponent vector of dimension `n`.
    pub fn index(self, n: usize) -> usize {
        match self {
            Variable::T => 0,
            Variable::X(i) => 1 + i,
            Variable::V(i) => 1 + n + i,
        }
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        match index {
            0 => Variable::T,
            i if i <= n => Variable::X(i - 1),
            i => Variable::V(i - 1 - n),
        }
    }

    fn name(self) -> String {
        match self {
            Variable::T => "t".to_string(),
            Variable::X(i) => format!("x{}", i + 1),
            Variable::V(i) => format!("v{}", i + 1),
        }
    }
}

/// Exponent vector of length `2n + 1`.
pub type Monomial = Vec<u32>;

/// Polynomial stored in canonical form: sorted monomials, no zero coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<Monomial, BigRational>,
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn integer(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: BigRational) -> Self {
        let mut p = Self::zero(n);
        p.add_term(vec![0; 2 * n + 1], c);
        p
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, BigRational::one())
    }

    pub fn var(n: usize, v: Variable) -> Self {
        let mut m = vec![0; 2 * n + 1];
        m[v.index(n)] = 1;
        let mut p = Self::zero(n);
        p.add_term(m, BigRational::one());
        p
    }

    /// Builds a polynomial from `(coefficient, exponent vector)` pairs.
    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (BigRational, Monomial)>) -> Self {
        let mut p = Self::zero(n);
        for (c, m) in terms {
            assert_eq!(m.len(), 2 * n + 1, "exponent vector length must be 2n+1");
            p.add_term(m, c);
        }
        p
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    /// The constant value if the polynomial has no variable dependence.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next()?;
                m.iter().all(|&e| e == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.iter().sum()).max().unwrap_or(0)
    }

    /// Highest exponent of `v` over all monomials.
    pub fn degree_in(&self, v: Variable) -> u32 {
        let k = v.index(self.n);
        self.terms.keys().map(|m| m[k]).max().unwrap_or(0)
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get() + c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    fn check(&self, other: &Self) {
        assert_eq!(self.n, other.n, "polynomials of different dimensions");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check(other);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self { n: self.n, terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        if k.is_zero() {
            return Self::zero(self.n);
        }
        Self { n: self.n, terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check(other);
        let mut out = Self::zero(self.n);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m: Monomial = ma.iter().zip(mb).map(|(a, b)| a + b).collect();
                out.add_term(m, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::one(self.n);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Exact partial derivative.
    pub fn derivative(&self, v: Variable) -> Self {
        let k = v.index(self.n);
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            if m[k] == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm[k] -= 1;
            out.add_term(dm, c * integer(i64::from(m[k])));
        }
        out
    }

    /// Substitutes every variable by a polynomial (indexed like exponent vectors).
    pub fn substitute(&self, images: &[Polynomial]) -> Self {
        assert_eq!(images.len(), 2 * self.n + 1);
        let target_n = images[0].n;
        let mut out = Self::zero(target_n);
        for (m, c) in &self.terms {
            let mut term = Polynomial::constant(target_n, c.clone());
            for (k, &e) in m.iter().enumerate() {
                if e > 0 {
                    term = term.mul(&images[k].pow(e));
                }
            }
            out = out.add(&term);
        }
        out
    }

    /// Exact evaluation at a rational point `(t, x, v)`.
    pub fn eval_exact(&self, point: &[BigRational]) -> BigRational {
        assert_eq!(point.len(), 2 * self.n + 1);
        let mut total = BigRational::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for (k, &e) in m.iter().enumerate() {
                for _ in 0..e {
                    term *= &point[k];
                }
            }
            total += term;
        }
        total
    }

    /// Floating-point evaluation at `(t, x, v)`.
    pub fn eval(&self, t: f64, x: &[f64], v: &[f64]) -> f64 {
        self.compile().eval(t, x, v)
    }

    pub fn compile(&self) -> CompiledPolynomial {
        CompiledPolynomial {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    let powers = m.iter().enumerate().filter(|(_, &e)| e > 0).map(|(k, &e)| (k, e as i32)).collect();
                    (c.to_f64().unwrap_or(f64::NAN), powers)
                })
                .collect(),
        }
    }
}

/// Polynomial lowered to `f64` for grid evaluation.
#[derive(Clone, Debug)]
pub struct CompiledPolynomial {
    n: usize,
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CompiledPolynomial {
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, t: f64, x: &[f64], v: &[f64]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for (c, powers) in &self.terms {
            let mut term = *c;
            for &(k, e) in powers {
                let base = if k == 0 {
                    t
                } else if k <= n {
                    x[k - 1]
                } else {
                    v[k - 1 - n]
                };
                term *= base.powi(e);
            }
            total += term;
        }
        total
    }
}

fn fmt_rational(c: &BigRational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

impl fmt::Display for Polynomial {
    /// Canonical text: `c*m` terms in monomial order joined by ` + `.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let factors: Vec<String> = m
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(k, &e)| {
                    let name = Variable::from_index(k, self.n).name();
                    if e == 1 {
                        name
                    } else {
                        format!("{name}^{e}")
                    }
                })
                .collect();
            if factors.is_empty() {
                write!(f, "{}", fmt_rational(c))?;
            } else if c.is_one() {
                write!(f, "{}", factors.join("*"))?;
            } else if (-c).is_one() {
                write!(f, "-{}", factors.join("*"))?;
            } else {
                write!(f, "{}*{}", fmt_rational(c), factors.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Largest absolute numerator/denominator magnitude, a cheap size measure.
pub fn coefficient_height(p: &Polynomial) -> BigInt {
    p.terms().map(|(_, c)| c.numer().abs().max(c.denom().abs())).max().unwrap_or_else(BigInt::zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_derivative() {
        let n = 2;
        let x1 = Polynomial::var(n, Variable::X(0));
        let v2 = Polynomial::var(n, Variable::V(1));
        let p = x1.mul(&x1).mul(&v2).scale(&rational(3, 2));
        assert_eq!(p.to_string(), "3/2*x1^2*v2");
        let d = p.derivative(Variable::X(0));
        assert_eq!(d.to_string(), "3*x1*v2");
        assert!(p.derivative(Variable::T).is_zero());
    }

    #[test]
    fn cancellation_leaves_canonical_zero() {
        let t = Polynomial::var(3, Variable::T);
        assert!(t.sub(&t).is_zero());
        assert_eq!(t.sub(&t).to_string(), "0");
    }

    #[test]
    fn substitution_shears_coordinates() {
        // x1 -> y1 + v1 t
        let n = 1;
        let t = Polynomial::var(n, Variable::T);
        let x = Polynomial::var(n, Variable::X(0));
        let v = Polynomial::var(n, Variable::V(0));
        let images = vec![t.clone(), x.add(&v.mul(&t)), v.clone()];
        let p = x.mul(&x);
        let q = p.substitute(&images);
        let expected = x.mul(&x).add(&x.mul(&v).mul(&t).scale(&integer(2))).add(&v.mul(&v).mul(&t).mul(&t));
        assert_eq!(q, expected);
    }

    #[test]
    fn float_evaluation_matches_exact() {
        let n = 2;
        let p = Polynomial::var(n, Variable::X(1))
            .mul(&Polynomial::var(n, Variable::V(0)))
            .add(&Polynomial::constant(n, rational(-1, 3)))
            .add(&Polynomial::var(n, Variable::T).pow(2));
        let pt = [integer(2), integer(1), integer(3), integer(5), integer(7)];
        let exact = p.eval_exact(&pt).to_f64().unwrap();
        let float = p.eval(2.0, &[1.0, 3.0], &[5.0, 7.0]);
        assert!((exact - float).abs() < 1e-12);
        assert!((exact - (15.0 - 1.0 / 3.0 + 4.0)).abs() < 1e-12);
    }
}

//! Exact multivariate polynomials in coefficient form.
//!
//! Terms are kept in graded-lexicographic order (total degree first, then
//! lexicographic on the exponent vector), which is also the order used for
//! iteration and serialization.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{argument, Result};

/// Coefficients below this magnitude are treated as exact zeros and dropped.
pub const ZERO_THRESHOLD: f64 = 1e-300;

/// Exponent vector of a monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn zero(dimension: usize) -> Self {
        Self(vec![0; dimension])
    }

    /// Exponent vector of the single variable `x_axis`.
    pub fn unit(dimension: usize, axis: usize) -> Self {
        let mut e = vec![0; dimension];
        e[axis] = 1;
        Self(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// All multi-indices of total degree exactly `degree`, in graded-lex order.
    pub fn of_degree(dimension: usize, degree: u32) -> Vec<MultiIndex> {
        fn rec(prefix: &mut Vec<u32>, remaining: u32, slots: usize, out: &mut Vec<MultiIndex>) {
            if slots == 1 {
                prefix.push(remaining);
                out.push(MultiIndex(prefix.clone()));
                prefix.pop();
                return;
            }
            for e in 0..=remaining {
                prefix.push(e);
                rec(prefix, remaining - e, slots - 1, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if dimension == 0 {
            return out;
        }
        rec(&mut Vec::with_capacity(dimension), degree, dimension, &mut out);
        out.sort();
        out
    }

    /// All multi-indices of total degree at most `max_degree`, in graded-lex order.
    pub fn up_to_degree(dimension: usize, max_degree: u32) -> Vec<MultiIndex> {
        (0..=max_degree).flat_map(|d| Self::of_degree(dimension, d)).collect()
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A real polynomial in `dimension` variables.
///
/// Values are immutable; every operation returns a new polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly {
    dimension: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl MultiPoly {
    pub fn zero(dimension: usize) -> Self {
        Self {
            dimension,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dimension: usize, c: f64) -> Self {
        Self::from_terms(dimension, [(MultiIndex::zero(dimension), c)]).expect("zero index always matches dimension")
    }

    /// The coordinate function `x_axis` (0-based axis).
    pub fn variable(dimension: usize, axis: usize) -> Result<Self> {
        if axis >= dimension {
            return Err(argument(format!("axis {axis} out of range for dimension {dimension}")));
        }
        Self::from_terms(dimension, [(MultiIndex::unit(dimension, axis), 1.0)])
    }

    pub fn monomial(exponents: Vec<u32>, c: f64) -> Self {
        let dimension = exponents.len();
        Self::from_terms(dimension, [(MultiIndex::new(exponents), c)]).expect("dimension taken from the index")
    }

    /// Builds a polynomial from (index, coefficient) pairs; repeated indices accumulate.
    pub fn from_terms<I>(dimension: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut map = BTreeMap::new();
        for (idx, c) in terms {
            if idx.dimension() != dimension {
                return Err(argument(format!(
                    "term {:?} has dimension {}, polynomial has {}",
                    idx.exponents(),
                    idx.dimension(),
                    dimension
                )));
            }
            *map.entry(idx).or_insert(0.0) += c;
        }
        Ok(Self::normalized(dimension, map))
    }

    fn normalized(dimension: usize, mut terms: BTreeMap<MultiIndex, f64>) -> Self {
        terms.retain(|_, c| c.abs() >= ZERO_THRESHOLD);
        Self { dimension, terms }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum total degree over stored terms; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, idx: &MultiIndex) -> f64 {
        self.terms.get(idx).copied().unwrap_or(0.0)
    }

    /// Terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(k, &v)| (k, v))
    }

    /// Largest absolute coefficient (0 for the zero polynomial).
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, s: f64) -> Self {
        let terms = self.terms.iter().map(|(k, &c)| (k.clone(), c * s)).collect();
        Self::normalized(self.dimension, terms)
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Result<Self> {
        self.check_same_dimension(other)?;
        let mut terms = self.terms.clone();
        for (k, &c) in &other.terms {
            *terms.entry(k.clone()).or_insert(0.0) += s * c;
        }
        Ok(Self::normalized(self.dimension, terms))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_same_dimension(other)?;
        let mut terms = BTreeMap::new();
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                *terms.entry(a.plus(b)).or_insert(0.0) += ca * cb;
            }
        }
        Ok(Self::normalized(self.dimension, terms))
    }

    fn check_same_dimension(&self, other: &Self) -> Result<()> {
        if self.dimension != other.dimension {
            return Err(argument(format!(
                "dimension mismatch: {} vs {}",
                self.dimension, other.dimension
            )));
        }
        Ok(())
    }

    /// Evaluates the polynomial at `x` by nested Horner accumulation, one
    /// variable at a time.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(argument(format!(
                "point has dimension {}, polynomial has {}",
                x.len(),
                self.dimension
            )));
        }
        if self.terms.is_empty() {
            return Ok(0.0);
        }
        let mut lex: Vec<(&[u32], f64)> = self.terms.iter().map(|(k, &c)| (k.exponents(), c)).collect();
        lex.sort_by(|a, b| b.0.cmp(a.0));
        Ok(horner(&lex, 0, x))
    }

    /// Exact partial derivative with respect to `x_axis` (0-based).
    pub fn partial(&self, axis: usize) -> Result<Self> {
        if axis >= self.dimension {
            return Err(argument(format!(
                "axis {axis} out of range for dimension {}",
                self.dimension
            )));
        }
        let terms = self.terms.iter().filter_map(|(k, &c)| {
            let e = k.exponents()[axis];
            (e > 0).then(|| {
                let mut ex = k.exponents().to_vec();
                ex[axis] -= 1;
                (MultiIndex(ex), c * f64::from(e))
            })
        });
        Ok(Self::normalized(self.dimension, terms.collect()))
    }

    pub fn gradient(&self) -> Vec<MultiPoly> {
        (0..self.dimension)
            .map(|i| self.partial(i).expect("axis in range"))
            .collect()
    }

    /// Multiplies by `x_axis`.
    pub fn times_variable(&self, axis: usize) -> Result<Self> {
        if axis >= self.dimension {
            return Err(argument(format!(
                "axis {axis} out of range for dimension {}",
                self.dimension
            )));
        }
        let terms = self.terms.iter().map(|(k, &c)| {
            let mut ex = k.exponents().to_vec();
            ex[axis] += 1;
            (MultiIndex(ex), c)
        });
        Ok(Self::normalized(self.dimension, terms.collect()))
    }

    /// For a univariate polynomial `p`, returns `q(x) = p(a x + b)`.
    pub fn compose_affine(&self, a: f64, b: f64) -> Result<Self> {
        if self.dimension != 1 {
            return Err(argument("affine composition needs a univariate polynomial"));
        }
        let deg = self.degree() as usize;
        let mut dense = vec![0.0; deg + 1];
        for (k, c) in self.terms() {
            dense[k.exponents()[0] as usize] = c;
        }
        // Horner in polynomial arithmetic: q = (...(c_d (ax+b) + c_{d-1})(ax+b) + ...)
        let mut acc = vec![0.0; deg + 1];
        for m in (0..=deg).rev() {
            let mut next = vec![0.0; deg + 1];
            for (j, &v) in acc.iter().enumerate() {
                if v != 0.0 {
                    next[j] += b * v;
                    if j < deg {
                        next[j + 1] += a * v;
                    }
                }
            }
            next[0] += dense[m];
            acc = next;
        }
        Self::from_terms(
            1,
            acc.into_iter()
                .enumerate()
                .map(|(j, c)| (MultiIndex(vec![j as u32]), c)),
        )
    }
}

fn horner(terms: &[(&[u32], f64)], var: usize, x: &[f64]) -> f64 {
    if var == x.len() {
        return terms.iter().map(|t| t.1).sum();
    }
    // terms are sorted lexicographically descending, so exponents of `var`
    // appear in non-increasing runs
    let mut acc = 0.0;
    let mut prev: Option<u32> = None;
    let mut start = 0;
    while start < terms.len() {
        let e = terms[start].0[var];
        let mut end = start + 1;
        while end < terms.len() && terms[end].0[var] == e {
            end += 1;
        }
        let inner = horner(&terms[start..end], var + 1, x);
        acc = match prev {
            None => inner,
            Some(p) => acc * x[var].powi((p - e) as i32) + inner,
        };
        prev = Some(e);
        start = end;
    }
    acc * x[var].powi(prev.unwrap_or(0) as i32)
}

impl Add for &MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: &MultiPoly) -> MultiPoly {
        self.add_scaled(rhs, 1.0)
            .expect("dimension mismatch in polynomial addition")
    }
}

impl Sub for &MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: &MultiPoly) -> MultiPoly {
        self.add_scaled(rhs, -1.0)
            .expect("dimension mismatch in polynomial subtraction")
    }
}

impl Mul for &MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: &MultiPoly) -> MultiPoly {
        self.try_mul(rhs).expect("dimension mismatch in polynomial product")
    }
}

impl Mul<f64> for &MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: f64) -> MultiPoly {
        self.scale(rhs)
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        self.scale(-1.0)
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, &e) in k.exponents().iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{e}", i + 1)?,
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    dimension: usize,
    terms: Vec<(Vec<u32>, f64)>,
}

impl Serialize for MultiPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyRepr {
            dimension: self.dimension,
            terms: self.terms.iter().map(|(k, &c)| (k.exponents().to_vec(), c)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultiPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PolyRepr::deserialize(d)?;
        MultiPoly::from_terms(repr.dimension, repr.terms.into_iter().map(|(e, c)| (MultiIndex(e), c)))
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p2(terms: &[([u32; 2], f64)]) -> MultiPoly {
        MultiPoly::from_terms(2, terms.iter().map(|(e, c)| (MultiIndex::new(e.to_vec()), *c))).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(MultiPoly::constant(2, 1.0).eval(&[0.3, 0.4]).unwrap(), 1.0);
        assert_eq!(p2(&[([1, 1], 1.0)]).eval(&[2.0, 3.0]).unwrap(), 6.0);
        let p = MultiPoly::from_terms(1, [(MultiIndex::new(vec![2]), 1.0), (MultiIndex::new(vec![0]), -0.5)]).unwrap();
        assert_eq!(p.eval(&[0.5]).unwrap(), -0.25);
    }

    #[test]
    fn eval_dimension_mismatch() {
        let p = MultiPoly::constant(2, 1.0);
        assert!(matches!(p.eval(&[1.0]), Err(crate::Error::Argument(_))));
    }

    #[test]
    fn partial_examples() {
        let p = p2(&[([2, 1], 1.0)]);
        assert_eq!(p.partial(0).unwrap(), p2(&[([1, 1], 2.0)]));
        assert!(MultiPoly::variable(2, 0).unwrap().partial(1).unwrap().is_zero());
        let q = MultiPoly::from_terms(1, [(MultiIndex::new(vec![3]), 3.0), (MultiIndex::new(vec![1]), -1.0)]).unwrap();
        let expected =
            MultiPoly::from_terms(1, [(MultiIndex::new(vec![2]), 9.0), (MultiIndex::new(vec![0]), -1.0)]).unwrap();
        assert_eq!(q.partial(0).unwrap(), expected);
        assert!(q.partial(1).is_err());
    }

    #[test]
    fn graded_lex_order() {
        let idx = MultiIndex::up_to_degree(2, 2);
        let exps: Vec<_> = idx.iter().map(|i| i.exponents().to_vec()).collect();
        assert_eq!(
            exps,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![0, 2], vec![1, 1], vec![2, 0]]
        );
    }

    #[test]
    fn zero_pruning_keeps_small_nonzero() {
        let p = p2(&[([1, 0], 1e-200), ([0, 1], 1e-310)]);
        assert_eq!(p.num_terms(), 1);
    }

    #[test]
    fn compose_affine_matches_pointwise() {
        let p = MultiPoly::from_terms(1, (0..6).map(|k| (MultiIndex::new(vec![k]), 1.0 / (k as f64 + 1.0)))).unwrap();
        let q = p.compose_affine(2.0, -1.0).unwrap();
        for &x in &[0.0, 0.3, 0.9] {
            let lhs = q.eval(&[x]).unwrap();
            let rhs = p.eval(&[2.0 * x - 1.0]).unwrap();
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn json_shape() {
        let p = p2(&[([1, 0], 2.0), ([0, 0], -1.0)]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"dimension":2,"terms":[[[0,0],-1.0],[[1,0],2.0]]}"#);
        let back: MultiPoly = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    fn arb_poly(dim: usize, max_deg: u32) -> impl Strategy<Value = MultiPoly> {
        let n = MultiIndex::up_to_degree(dim, max_deg).len();
        proptest::collection::vec(-3.0f64..3.0, n).prop_map(move |cs| {
            MultiPoly::from_terms(dim, MultiIndex::up_to_degree(dim, max_deg).into_iter().zip(cs)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn horner_matches_naive(p in arb_poly(3, 5), x in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let naive: f64 = p.terms().map(|(k, c)| {
                c * k.exponents().iter().zip(&x).map(|(&e, xi)| xi.powi(e as i32)).product::<f64>()
            }).sum();
            let h = p.eval(&x).unwrap();
            prop_assert!((h - naive).abs() <= 1e-12 * (1.0 + naive.abs()));
        }

        #[test]
        fn product_evaluates_pointwise(p in arb_poly(2, 4), q in arb_poly(2, 3), x in proptest::collection::vec(-1.0f64..1.0, 2)) {
            let pq = &p * &q;
            let lhs = pq.eval(&x).unwrap();
            let rhs = p.eval(&x).unwrap() * q.eval(&x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + rhs.abs()));
        }

        #[test]
        fn json_roundtrip(p in arb_poly(2, 4)) {
            let s = serde_json::to_string(&p).unwrap();
            let back: MultiPoly = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}

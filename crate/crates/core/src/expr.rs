//! Signomial scalar fields: finite sums of complex-coefficient monomials with
//! real exponents in the coordinates `u = (x^1..x^n, y^1..y^n)`, together with
//! classical and left-Caputo differentiation.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Relative magnitude below which a coefficient is treated as cancellation debris.
pub const DEAD_ZONE: f64 = 1e-13;

/// Exponents live on a dyadic lattice so that sums and differences of
/// exponents are exact in `f64`.
const LATTICE: f64 = (1u64 << 40) as f64;

/// Snap a real number onto the exponent lattice (also folds `-0.0` into `0.0`).
pub fn snap(p: f64) -> f64 {
    let s = (p * LATTICE).round() / LATTICE;
    if s == 0.0 {
        0.0
    } else {
        s
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("outside expression class: {0}")]
    OutsideClass(String),
    #[error("fractional domain: term {term} has exponent {exponent} in coordinate {coord}, a Gamma pole")]
    FractionalDomain {
        term: String,
        coord: usize,
        exponent: f64,
    },
    #[error("evaluation domain: coordinate {coord} = {value} is not strictly positive")]
    EvaluationDomain { coord: usize, value: f64 },
}

/// Order of the fractional derivative and the number of base coordinates.
///
/// The derivative order `s` is fixed at 1 and the lower terminals of the
/// Caputo integral sit at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaContext {
    alpha: f64,
    n: usize,
}

impl AlphaContext {
    pub fn new(alpha: f64, n: usize) -> Result<Self, ExprError> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
            return Err(ExprError::Malformed(format!(
                "alpha out of range (0,1]: {alpha}"
            )));
        }
        if n == 0 {
            return Err(ExprError::Malformed("n must be at least 1".into()));
        }
        Ok(Self {
            alpha: snap(alpha),
            n,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of coordinates `u^β`, i.e. `2n`.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// `alpha = 1` selects the classical derivative.
    pub fn is_classical(&self) -> bool {
        self.alpha == 1.0
    }
}

/// Exponent vector of one monomial; entries are lattice-snapped and finite.
#[derive(Clone, Debug)]
pub struct Exponents(Box<[f64]>);

impl Exponents {
    fn new(raw: &[f64]) -> Self {
        Exponents(raw.iter().map(|&p| snap(p)).collect())
    }

    fn zeros(dim: usize) -> Self {
        Exponents(vec![0.0; dim].into_boxed_slice())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    fn sum(&self, other: &Exponents) -> Exponents {
        Exponents(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| snap(a + b))
                .collect(),
        )
    }

    fn shifted(&self, coord: usize, delta: f64) -> Exponents {
        let mut e = self.0.clone();
        e[coord] = snap(e[coord] + delta);
        Exponents(e)
    }
}

impl PartialEq for Exponents {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Exponents {}

impl PartialOrd for Exponents {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Exponents {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

/// Sum of terms `c · Π u_β^{p_β}` in canonical form: unique exponent vectors,
/// no dead-zone coefficients, empty map for zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Signomial {
    dim: usize,
    terms: BTreeMap<Exponents, Complex64>,
}

/// Collects raw term contributions and prunes them relative to the largest
/// contribution seen.
#[derive(Debug)]
pub struct SigAccumulator {
    dim: usize,
    terms: BTreeMap<Exponents, Complex64>,
    scale: f64,
}

impl SigAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
            scale: 0.0,
        }
    }

    fn push(&mut self, exps: Exponents, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        self.scale = self.scale.max(c.norm());
        *self.terms.entry(exps).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    pub fn add_scaled(&mut self, a: &Signomial, factor: Complex64) {
        debug_assert_eq!(a.dim, self.dim);
        for (e, c) in &a.terms {
            self.push(e.clone(), c * factor);
        }
    }

    /// Adds `factor · a · b`.
    pub fn add_product(&mut self, a: &Signomial, b: &Signomial, factor: Complex64) {
        assert_eq!(a.dim, b.dim, "signomial dimension mismatch");
        for (ea, ca) in &a.terms {
            for (eb, cb) in &b.terms {
                self.push(ea.sum(eb), ca * cb * factor);
            }
        }
    }

    pub fn finish(self) -> Signomial {
        let cut = DEAD_ZONE * self.scale;
        let terms = self
            .terms
            .into_iter()
            .filter(|(_, c)| c.norm() > cut && *c != Complex64::new(0.0, 0.0))
            .collect();
        Signomial {
            dim: self.dim,
            terms,
        }
    }
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// `Γ(p+1) / Γ(p+1−α)` with sign tracking; `None` when the numerator sits on a
/// pole. A pole of the denominator yields `Some(0.0)`.
pub fn gamma_ratio(p: f64, alpha: f64) -> Option<f64> {
    let num = p + 1.0;
    let den = p + 1.0 - alpha;
    if is_nonpositive_integer(num) {
        return None;
    }
    if is_nonpositive_integer(den) {
        return Some(0.0);
    }
    let (ln_num, s_num) = libm::lgamma_r(num);
    let (ln_den, s_den) = libm::lgamma_r(den);
    Some(f64::from(s_num * s_den) * (ln_num - ln_den).exp())
}

/// `Γ(x)` for real non-pole `x`.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

impl Signomial {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: Complex64) -> Self {
        let mut terms = BTreeMap::new();
        if c != Complex64::new(0.0, 0.0) {
            terms.insert(Exponents::zeros(dim), c);
        }
        Self { dim, terms }
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, Complex64::new(1.0, 0.0))
    }

    pub fn real(dim: usize, c: f64) -> Self {
        Self::constant(dim, Complex64::new(c, 0.0))
    }

    /// The coordinate function `u^idx`.
    pub fn coordinate(dim: usize, idx: usize) -> Self {
        let mut e = vec![0.0; dim];
        e[idx] = 1.0;
        Self::monomial(Complex64::new(1.0, 0.0), &e).expect("finite unit monomial")
    }

    pub fn monomial(c: Complex64, exps: &[f64]) -> Result<Self, ExprError> {
        Self::normalize(exps.len(), [(c, exps.to_vec())])
    }

    /// Builds the canonical form of a raw term list: like terms merge by exact
    /// exponent equality, dead-zone coefficients are dropped.
    pub fn normalize<I>(dim: usize, raw: I) -> Result<Self, ExprError>
    where
        I: IntoIterator<Item = (Complex64, Vec<f64>)>,
    {
        let mut acc = SigAccumulator::new(dim);
        for (k, (c, e)) in raw.into_iter().enumerate() {
            if e.len() != dim {
                return Err(ExprError::Malformed(format!(
                    "term {k}: exponent vector has length {}, expected {dim}",
                    e.len()
                )));
            }
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(ExprError::Malformed(format!(
                    "term {k}: non-finite coefficient"
                )));
            }
            if let Some(bad) = e.iter().find(|p| !p.is_finite()) {
                return Err(ExprError::Malformed(format!(
                    "term {k}: non-finite exponent {bad}"
                )));
            }
            acc.push(Exponents::new(&e), c);
        }
        Ok(acc.finish())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[f64], Complex64)> + '_ {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    /// Largest coefficient magnitude (0 for the zero signomial).
    pub fn max_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// The constant term, if the signomial is a constant.
    pub fn as_constant(&self) -> Option<Complex64> {
        match self.terms.len() {
            0 => Some(Complex64::new(0.0, 0.0)),
            1 => {
                let (e, c) = self.terms.iter().next().unwrap();
                e.0.iter().all(|&p| p == 0.0).then_some(*c)
            }
            _ => None,
        }
    }

    pub fn add(&self, other: &Signomial) -> Signomial {
        assert_eq!(self.dim, other.dim, "signomial dimension mismatch");
        let mut acc = SigAccumulator::new(self.dim);
        acc.add_scaled(self, Complex64::new(1.0, 0.0));
        acc.add_scaled(other, Complex64::new(1.0, 0.0));
        acc.finish()
    }

    pub fn sub(&self, other: &Signomial) -> Signomial {
        assert_eq!(self.dim, other.dim, "signomial dimension mismatch");
        let mut acc = SigAccumulator::new(self.dim);
        acc.add_scaled(self, Complex64::new(1.0, 0.0));
        acc.add_scaled(other, Complex64::new(-1.0, 0.0));
        acc.finish()
    }

    pub fn mul(&self, other: &Signomial) -> Signomial {
        let mut acc = SigAccumulator::new(self.dim);
        acc.add_product(self, other, Complex64::new(1.0, 0.0));
        acc.finish()
    }

    pub fn scale(&self, c: Complex64) -> Signomial {
        let mut acc = SigAccumulator::new(self.dim);
        acc.add_scaled(self, c);
        acc.finish()
    }

    pub fn scale_re(&self, c: f64) -> Signomial {
        self.scale(Complex64::new(c, 0.0))
    }

    /// Multiply by the coordinate function `u^coord`.
    pub fn mul_coordinate(&self, coord: usize) -> Signomial {
        Signomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.shifted(coord, 1.0), *c))
                .collect(),
        }
    }

    /// Classical partial derivative by the power rule.
    pub fn partial_int(&self, coord: usize) -> Signomial {
        let mut acc = SigAccumulator::new(self.dim);
        for (e, c) in &self.terms {
            let p = e.0[coord];
            if p != 0.0 {
                acc.push(e.shifted(coord, -1.0), c * p);
            }
        }
        acc.finish()
    }

    /// Left Caputo derivative of order α (lower terminal 0) in `coord`, via the
    /// generalized power rule `u^p ↦ Γ(p+1)/Γ(p+1−α) · u^{p−α}` and `u^0 ↦ 0`.
    /// Delegates to [`Signomial::partial_int`] at α = 1.
    pub fn caputo(&self, coord: usize, ctx: &AlphaContext) -> Result<Signomial, ExprError> {
        if ctx.is_classical() {
            return Ok(self.partial_int(coord));
        }
        let alpha = ctx.alpha();
        let mut acc = SigAccumulator::new(self.dim);
        for (e, c) in &self.terms {
            let p = e.0[coord];
            if p == 0.0 {
                continue;
            }
            let ratio = gamma_ratio(p, alpha).ok_or_else(|| ExprError::FractionalDomain {
                term: format_term(e, *c, self.dim),
                coord,
                exponent: p,
            })?;
            if ratio != 0.0 {
                acc.push(e.shifted(coord, -alpha), c * ratio);
            }
        }
        Ok(acc.finish())
    }

    /// Like [`Signomial::caputo`], but terms sitting on a numerator pole are
    /// left out instead of failing; their number is returned.
    pub fn caputo_excluding_poles(&self, coord: usize, ctx: &AlphaContext) -> (Signomial, usize) {
        if ctx.is_classical() {
            return (self.partial_int(coord), 0);
        }
        let alpha = ctx.alpha();
        let mut acc = SigAccumulator::new(self.dim);
        let mut skipped = 0;
        for (e, c) in &self.terms {
            let p = e.0[coord];
            if p == 0.0 {
                continue;
            }
            match gamma_ratio(p, alpha) {
                Some(r) if r != 0.0 => acc.push(e.shifted(coord, -alpha), c * r),
                Some(_) => {}
                None => skipped += 1,
            }
        }
        (acc.finish(), skipped)
    }

    /// Number of terms whose Caputo derivative in `coord` relies on the analytic
    /// continuation of the power rule (exponent outside the convergent region p > 0).
    pub fn continuation_terms(&self, coord: usize) -> usize {
        self.terms.keys().filter(|e| e.0[coord] < 0.0).count()
    }

    /// Inverse of a single-term signomial.
    pub fn reciprocal(&self) -> Result<Signomial, ExprError> {
        if self.terms.len() != 1 {
            return Err(ExprError::OutsideClass(format!(
                "reciprocal needs exactly one term, got {} ({self})",
                self.terms.len()
            )));
        }
        let (e, c) = self.terms.iter().next().unwrap();
        let neg = Exponents(e.0.iter().map(|&p| snap(-p)).collect());
        let mut terms = BTreeMap::new();
        terms.insert(neg, c.inv());
        Ok(Signomial {
            dim: self.dim,
            terms,
        })
    }

    pub fn eval_at(&self, point: &[f64]) -> Result<Complex64, ExprError> {
        if point.len() != self.dim {
            return Err(ExprError::Malformed(format!(
                "evaluation point has {} coordinates, expected {}",
                point.len(),
                self.dim
            )));
        }
        if let Some((coord, &value)) = point.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            return Err(ExprError::EvaluationDomain { coord, value });
        }
        let logs: Vec<f64> = point.iter().map(|v| v.ln()).collect();
        Ok(self
            .terms
            .iter()
            .map(|(e, c)| {
                let s: f64 = e.0.iter().zip(&logs).map(|(p, l)| p * l).sum();
                c * s.exp()
            })
            .sum())
    }

    /// Largest |value| over a set of evaluation points.
    pub fn max_abs_at(&self, points: &[Vec<f64>]) -> Result<f64, ExprError> {
        let mut m = 0.0f64;
        for pt in points {
            m = m.max(self.eval_at(pt)?.norm());
        }
        Ok(m)
    }
}

/// Coordinate label for index `idx` in dimension `dim`: `x1..xn`, `y1..yn`.
pub fn coordinate_name(idx: usize, dim: usize) -> String {
    let n = dim / 2;
    if idx < n {
        format!("x{}", idx + 1)
    } else {
        format!("y{}", idx - n + 1)
    }
}

fn format_term(e: &Exponents, c: Complex64, dim: usize) -> String {
    let mut s = if c.im == 0.0 {
        format!("{}", c.re)
    } else {
        format!("({}{:+}i)", c.re, c.im)
    };
    for (k, &p) in e.0.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        s.push('·');
        s.push_str(&coordinate_name(k, dim));
        if p != 1.0 {
            s.push_str(&format!("^{p}"));
        }
    }
    s
}

impl fmt::Display for Signomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (e, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", format_term(e, *c, self.dim))?;
        }
        Ok(())
    }
}

impl Add for &Signomial {
    type Output = Signomial;
    fn add(self, rhs: &Signomial) -> Signomial {
        Signomial::add(self, rhs)
    }
}

impl Sub for &Signomial {
    type Output = Signomial;
    fn sub(self, rhs: &Signomial) -> Signomial {
        Signomial::sub(self, rhs)
    }
}

impl Mul for &Signomial {
    type Output = Signomial;
    fn mul(self, rhs: &Signomial) -> Signomial {
        Signomial::mul(self, rhs)
    }
}

impl Neg for &Signomial {
    type Output = Signomial;
    fn neg(self) -> Signomial {
        self.scale_re(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn mono(coef: f64, e: &[f64]) -> Signomial {
        Signomial::monomial(c(coef), e).unwrap()
    }

    #[test]
    fn normalize_merges_and_cancels() {
        let s = Signomial::normalize(2, [(c(2.0), vec![1.0, 0.0]), (c(3.0), vec![1.0, 0.0])]).unwrap();
        assert_eq!(s, mono(5.0, &[1.0, 0.0]));
        let z = Signomial::normalize(2, [(c(1.0), vec![0.0, 0.0]), (c(-1.0), vec![0.0, 0.0])]).unwrap();
        assert!(z.is_zero());
        let s = Signomial::normalize(2, [(c(1.5), vec![0.5, 2.0])]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.terms().next().unwrap().0, &[0.5, 2.0]);
    }

    #[test]
    fn normalize_rejects_non_finite() {
        assert!(matches!(
            Signomial::normalize(2, [(c(f64::NAN), vec![1.0, 0.0])]),
            Err(ExprError::Malformed(_))
        ));
        assert!(matches!(
            Signomial::normalize(2, [(c(1.0), vec![f64::INFINITY, 0.0])]),
            Err(ExprError::Malformed(_))
        ));
        assert!(Signomial::normalize(2, [(c(1.0), vec![1.0])]).is_err());
    }

    #[test]
    fn ring_examples() {
        let x = Signomial::coordinate(2, 0);
        let y = Signomial::coordinate(2, 1);
        let s = &x + &y;
        assert_eq!(s.len(), 2);
        let h = mono(1.0, &[0.5, 0.0]);
        assert_eq!(&h * &h, x);
        let prod = &(&x + &y) * &(&x - &y);
        let expected = &mono(1.0, &[2.0, 0.0]) - &mono(1.0, &[0.0, 2.0]);
        assert_eq!(prod, expected);
    }

    #[test]
    fn classical_partials() {
        let f = mono(1.0, &[2.0, 1.0]);
        assert_eq!(f.partial_int(0), mono(2.0, &[1.0, 1.0]));
        assert!(mono(1.0, &[2.0, 0.0]).partial_int(1).is_zero());
        assert_eq!(mono(1.0, &[0.5, 0.0]).partial_int(0), mono(0.5, &[-0.5, 0.0]));
    }

    #[test]
    fn caputo_examples() {
        let ctx = AlphaContext::new(0.5, 1).unwrap();
        let d = mono(1.0, &[0.0, 2.0]).caputo(1, &ctx).unwrap();
        let (e, coef) = d.terms().next().unwrap();
        assert_eq!(e, &[0.0, 1.5]);
        assert!((coef.re - 2.0 / gamma(2.5)).abs() < 1e-13);
        assert!((coef.re - 1.504506).abs() < 1e-6);
        assert!(Signomial::real(2, 7.0).caputo(0, &ctx).unwrap().is_zero());

        let ctx = AlphaContext::new(0.3, 1).unwrap();
        let d = mono(1.0, &[2.0, 3.0]).caputo(0, &ctx).unwrap();
        let (e, coef) = d.terms().next().unwrap();
        assert!((e[0] - 1.7).abs() < 1e-12 && e[1] == 3.0);
        assert!((coef.re - gamma(3.0) / gamma(2.7)).abs() < 1e-12);
    }

    #[test]
    fn caputo_pole_handling() {
        let ctx = AlphaContext::new(0.5, 1).unwrap();
        // numerator pole: exponent -1
        let err = mono(1.0, &[-1.0, 0.0]).caputo(0, &ctx).unwrap_err();
        assert!(matches!(err, ExprError::FractionalDomain { coord: 0, .. }));
        // denominator pole: p + 1 - α = 0
        assert!(mono(1.0, &[-0.5, 0.0]).caputo(0, &ctx).unwrap().is_zero());
        // negative non-integer exponent uses the continuation
        let d = mono(1.0, &[-0.25, 0.0]).caputo(0, &ctx).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(mono(1.0, &[-0.25, 1.0]).continuation_terms(0), 1);
    }

    #[test]
    fn caputo_at_alpha_one_is_classical() {
        let ctx = AlphaContext::new(1.0, 1).unwrap();
        let f = &mono(2.0, &[3.0, 0.5]) + &mono(-1.0, &[0.5, 1.0]);
        assert_eq!(f.caputo(0, &ctx).unwrap(), f.partial_int(0));
    }

    #[test]
    fn exponent_lattice_makes_routes_agree() {
        let ctx = AlphaContext::new(0.3, 1).unwrap();
        let a = mono(1.0, &[2.0, 0.0]).caputo(0, &ctx).unwrap().caputo(0, &ctx).unwrap();
        let b = mono(1.0, &[2.0 - 0.6, 0.0]);
        assert_eq!(a.terms().next().unwrap().0, b.terms().next().unwrap().0);
    }

    #[test]
    fn reciprocal_examples() {
        let y = Signomial::coordinate(2, 1);
        assert_eq!(y.reciprocal().unwrap(), mono(1.0, &[0.0, -1.0]));
        assert_eq!(mono(2.0, &[0.5, 0.0]).reciprocal().unwrap(), mono(0.5, &[-0.5, 0.0]));
        let one_plus_x = &Signomial::one(2) + &Signomial::coordinate(2, 0);
        assert!(matches!(one_plus_x.reciprocal(), Err(ExprError::OutsideClass(_))));
    }

    #[test]
    fn eval_examples() {
        let f = &mono(1.0, &[2.0, 0.0]) + &mono(1.0, &[0.0, 1.0]);
        assert!((f.eval_at(&[2.0, 3.0]).unwrap() - c(7.0)).norm() < 1e-14);
        assert!((mono(1.0, &[0.5, 0.0]).eval_at(&[4.0, 1.0]).unwrap() - c(2.0)).norm() < 1e-14);
        assert!(matches!(
            Signomial::coordinate(2, 0).eval_at(&[0.0, 1.0]),
            Err(ExprError::EvaluationDomain { coord: 0, .. })
        ));
    }

    #[test]
    fn caputo_approaches_classical_as_alpha_to_one() {
        let pt = [1.7, 0.8];
        for p in [0.5, 1.0, 2.0, 3.0] {
            let f = mono(1.0, &[p, 0.0]);
            let exact = f.partial_int(0).eval_at(&pt).unwrap();
            let mut last = f64::INFINITY;
            for alpha in [0.9, 0.99, 0.999] {
                let ctx = AlphaContext::new(alpha, 1).unwrap();
                let err = (f.caputo(0, &ctx).unwrap().eval_at(&pt).unwrap() - exact).norm();
                assert!(err < last, "p={p} alpha={alpha}: {err} !< {last}");
                last = err;
            }
        }
    }

    fn arb_signomial() -> impl Strategy<Value = Signomial> {
        let exps = prop::sample::select(vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0, -0.5]);
        prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, exps.clone(), exps), 0..5).prop_map(
            |ts| {
                Signomial::normalize(
                    2,
                    ts.into_iter()
                        .map(|(re, im, a, b)| (Complex64::new(re, im), vec![a, b])),
                )
                .unwrap()
            },
        )
    }

    fn coeffwise_close(a: &Signomial, b: &Signomial, tol: f64) -> bool {
        let d = a - b;
        d.max_coeff() <= tol * (1.0 + a.max_coeff().max(b.max_coeff()))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn caputo_is_linear(a in arb_signomial(), b in arb_signomial(), k in -2.0f64..2.0, alpha in 0.05f64..0.95) {
            let ctx = AlphaContext::new(alpha, 1).unwrap();
            let lhs = (&a + &b).caputo(0, &ctx).unwrap();
            let rhs = &a.caputo(0, &ctx).unwrap() + &b.caputo(0, &ctx).unwrap();
            prop_assert!(coeffwise_close(&lhs, &rhs, 1e-13));
            let lhs = a.scale_re(k).caputo(1, &ctx).unwrap();
            let rhs = a.caputo(1, &ctx).unwrap().scale_re(k);
            prop_assert!(coeffwise_close(&lhs, &rhs, 1e-13));
        }

        #[test]
        fn caputo_kills_constants(c0 in -5.0f64..5.0, alpha in 0.01f64..0.99) {
            let ctx = AlphaContext::new(alpha, 1).unwrap();
            prop_assert!(Signomial::real(2, c0).caputo(0, &ctx).unwrap().is_zero());
        }

        #[test]
        fn reciprocal_is_exact(coef in 0.1f64..10.0, p in -3.0f64..3.0, q in -3.0f64..3.0) {
            let a = mono(coef, &[p, q]);
            let prod = &a * &a.reciprocal().unwrap();
            // exponents cancel exactly; the coefficient is c·(1/c), within one rounding
            prop_assert_eq!(prod.len(), 1);
            let (e, k) = prod.terms().next().unwrap();
            prop_assert_eq!(e, &[0.0, 0.0][..]);
            prop_assert!((k - c(1.0)).norm() <= 2.0 * f64::EPSILON);
        }
    }
}

//! Fibrewise Wick product on formal series in `v`, the fibre variables `z^α`,
//! and N-adapted co-frame factors `e^α`, with signomial coefficients.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::expr::{ExprError, SigAccumulator, Signomial};
use crate::forms;

/// `v^v · z^{z} · e^{forms}`: `z` holds one power per fibre direction and
/// `forms` a strictly increasing label list.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WickKey {
    pub v: u32,
    pub z: Box<[u8]>,
    pub forms: Box<[u8]>,
}

impl WickKey {
    pub fn new(v: u32, z: &[u8], forms: &[u8]) -> Self {
        debug_assert!(forms.windows(2).all(|w| w[0] < w[1]));
        Self {
            v,
            z: z.into(),
            forms: forms.into(),
        }
    }

    pub fn deg_v(&self) -> u32 {
        self.v
    }

    pub fn deg_s(&self) -> u32 {
        self.z.iter().map(|&p| p as u32).sum()
    }

    pub fn deg_a(&self) -> usize {
        self.forms.len()
    }

    /// Total degree `2·deg_v + deg_s`.
    pub fn deg(&self) -> u32 {
        2 * self.v + self.deg_s()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WickElement {
    dim: usize,
    terms: BTreeMap<WickKey, Signomial>,
}

impl WickElement {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn term(key: WickKey, coeff: Signomial) -> Self {
        let dim = coeff.dim();
        let mut e = Self::zero(dim);
        e.add_term(key, coeff);
        e
    }

    /// A scalar field `f` (degree zero in every grading).
    pub fn scalar(f: Signomial) -> Self {
        let dim = f.dim();
        Self::term(WickKey::new(0, &vec![0; dim], &[]), f)
    }

    /// The fibre coordinate `z^α`.
    pub fn fibre(dim: usize, alpha: usize) -> Self {
        let mut z = vec![0u8; dim];
        z[alpha] = 1;
        Self::term(WickKey::new(0, &z, &[]), Signomial::one(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&WickKey, &Signomial)> + '_ {
        self.terms.iter()
    }

    pub fn get(&self, key: &WickKey) -> Option<&Signomial> {
        self.terms.get(key)
    }

    pub fn add_term(&mut self, key: WickKey, coeff: Signomial) {
        if coeff.is_zero() {
            return;
        }
        debug_assert_eq!(key.z.len(), self.dim);
        match self.terms.get_mut(&key) {
            Some(c) => {
                *c = c.add(&coeff);
                if c.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, coeff);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map_coeffs(|s| s.scale(c))
    }

    /// Multiplies every coefficient by a scalar field.
    pub fn scale_field(&self, f: &Signomial) -> Self {
        self.map_coeffs(|s| s.mul(f))
    }

    fn map_coeffs(&self, f: impl Fn(&Signomial) -> Signomial) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(k, c)| (k.clone(), f(c)))
            .filter(|(_, c)| !c.is_zero())
            .collect();
        Self { dim: self.dim, terms }
    }

    /// Keeps the terms whose key satisfies `pred`.
    pub fn filter(&self, pred: impl Fn(&WickKey) -> bool) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(k, _)| pred(k))
            .map(|(k, c)| (k.clone(), c.clone()))
            .collect();
        Self { dim: self.dim, terms }
    }

    /// Homogeneous component of total degree `deg`.
    pub fn deg_part(&self, deg: u32) -> Self {
        self.filter(|k| k.deg() == deg)
    }

    pub fn max_deg(&self) -> Option<u32> {
        self.terms.keys().map(WickKey::deg).max()
    }

    pub fn min_deg(&self) -> Option<u32> {
        self.terms.keys().map(WickKey::deg).min()
    }

    /// Form degree if homogeneous.
    pub fn form_degree(&self) -> Option<usize> {
        let mut it = self.terms.keys().map(WickKey::deg_a);
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }

    /// Shifts the `v` power by `shift`; fails if some term would get a
    /// negative power, reporting its key.
    pub fn shift_v(&self, shift: i32) -> Result<Self, WickKey> {
        let mut terms = BTreeMap::new();
        for (k, c) in &self.terms {
            let v = k.v as i32 + shift;
            if v < 0 {
                return Err(k.clone());
            }
            let mut nk = k.clone();
            nk.v = v as u32;
            terms.insert(nk, c.clone());
        }
        Ok(Self { dim: self.dim, terms })
    }

    /// Largest coefficient magnitude over the sample points, over all terms.
    pub fn max_abs_at(&self, points: &[Vec<f64>]) -> Result<f64, ExprError> {
        let mut m = 0.0f64;
        for c in self.terms.values() {
            m = m.max(c.max_abs_at(points)?);
        }
        Ok(m)
    }

    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (WickKey, Signomial)>) -> Self {
        let mut e = Self::zero(dim);
        for (k, c) in terms {
            e.add_term(k, c);
        }
        e
    }
}

impl fmt::Display for WickElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            if k.v > 0 {
                write!(f, "·v^{}", k.v)?;
            }
            for (a, &p) in k.z.iter().enumerate() {
                if p > 0 {
                    write!(f, "·z{a}^{p}")?;
                }
            }
            for a in k.forms.iter() {
                write!(f, "·e{a}")?;
            }
        }
        Ok(())
    }
}

type MonoKey = (Box<[u8]>, Box<[u8]>);
type MonoProduct = Arc<Vec<(u32, Box<[u8]>, Signomial)>>;

/// Wick product with contraction tensor `Λ^{αβ}`.
#[derive(Debug)]
pub struct WickAlgebra {
    dim: usize,
    lambda: Vec<Vec<Signomial>>,
    cache: Mutex<HashMap<MonoKey, MonoProduct>>,
}

impl Clone for WickAlgebra {
    fn clone(&self) -> Self {
        Self::new(self.lambda.clone())
    }
}

impl WickAlgebra {
    pub fn new(lambda: Vec<Vec<Signomial>>) -> Self {
        let dim = lambda.len();
        Self {
            dim,
            lambda,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> &[Vec<Signomial>] {
        &self.lambda
    }

    /// `z^A ∘ z^B = Σ_r (iv/2)^r / r! · Λ^{α1β1}···Λ^{αrβr} ∂^r_α z^A ∂^r_β z^B`,
    /// as a list of `(r, z-exponent, coefficient)`.
    fn monomial_product(&self, a: &[u8], b: &[u8]) -> MonoProduct {
        let key: MonoKey = (a.into(), b.into());
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return hit.clone();
        }
        let dim = self.dim;
        let mut out = Vec::new();
        let mut level: BTreeMap<MonoKey, Signomial> = BTreeMap::new();
        level.insert(key.clone(), Signomial::one(dim));
        let mut r = 0u32;
        while !level.is_empty() {
            for ((ra, rb), c) in &level {
                let z: Box<[u8]> = ra.iter().zip(rb.iter()).map(|(x, y)| x + y).collect();
                out.push((r, z, c.clone()));
            }
            let step = Complex64::new(0.0, 0.5 / (r as f64 + 1.0));
            let mut next: BTreeMap<MonoKey, SigAccumulator> = BTreeMap::new();
            for ((ra, rb), c) in &level {
                for al in 0..dim {
                    if ra[al] == 0 {
                        continue;
                    }
                    for be in 0..dim {
                        if rb[be] == 0 || self.lambda[al][be].is_zero() {
                            continue;
                        }
                        let mut na = ra.clone();
                        let mut nb = rb.clone();
                        na[al] -= 1;
                        nb[be] -= 1;
                        let factor = step * (ra[al] as f64 * rb[be] as f64);
                        next.entry((na, nb))
                            .or_insert_with(|| SigAccumulator::new(dim))
                            .add_product(c, &self.lambda[al][be], factor);
                    }
                }
            }
            level = next
                .into_iter()
                .map(|(k, acc)| (k, acc.finish()))
                .filter(|(_, c)| !c.is_zero())
                .collect();
            r += 1;
        }
        let out = Arc::new(out);
        self.cache.lock().expect("cache lock").insert(key, out.clone());
        out
    }

    /// Wick product; terms of total degree above `max_deg` are dropped.
    pub fn product_truncated(&self, a: &WickElement, b: &WickElement, max_deg: Option<u32>) -> WickElement {
        assert_eq!(a.dim, self.dim, "element dimension mismatch");
        assert_eq!(b.dim, self.dim, "element dimension mismatch");
        let mut acc: BTreeMap<WickKey, SigAccumulator> = BTreeMap::new();
        for (ka, ca) in &a.terms {
            for (kb, cb) in &b.terms {
                if let Some(m) = max_deg {
                    if ka.deg() + kb.deg() > m {
                        continue;
                    }
                }
                let Some((sign, forms)) = forms::wedge(&ka.forms, &kb.forms) else {
                    continue;
                };
                let coeff = ca.mul(cb);
                for (r, z, c) in self.monomial_product(&ka.z, &kb.z).iter() {
                    let key = WickKey {
                        v: ka.v + kb.v + r,
                        z: z.clone(),
                        forms: forms.clone().into(),
                    };
                    acc.entry(key)
                        .or_insert_with(|| SigAccumulator::new(self.dim))
                        .add_product(&coeff, c, Complex64::new(sign, 0.0));
                }
            }
        }
        WickElement::from_terms(self.dim, acc.into_iter().map(|(k, a)| (k, a.finish())))
    }

    pub fn product(&self, a: &WickElement, b: &WickElement) -> WickElement {
        self.product_truncated(a, b, None)
    }

    /// Graded commutator `a∘b − (−1)^{|a||b|} b∘a` with the form degree as
    /// parity; non-homogeneous arguments are split by form degree.
    pub fn commutator_truncated(&self, a: &WickElement, b: &WickElement, max_deg: Option<u32>) -> WickElement {
        let mut out = WickElement::zero(self.dim);
        for (pa, ea) in split_by_form_degree(a) {
            for (pb, eb) in split_by_form_degree(b) {
                let ab = self.product_truncated(&ea, &eb, max_deg);
                let ba = self.product_truncated(&eb, &ea, max_deg);
                let s = if (pa * pb) % 2 == 1 { -1.0 } else { 1.0 };
                out = out.add(&ab).sub(&ba.scale(Complex64::new(s, 0.0)));
            }
        }
        out
    }

    pub fn commutator(&self, a: &WickElement, b: &WickElement) -> WickElement {
        self.commutator_truncated(a, b, None)
    }

    /// `ad(a) b = [a, b]`.
    pub fn ad(&self, a: &WickElement, b: &WickElement) -> WickElement {
        self.commutator(a, b)
    }
}

fn split_by_form_degree(a: &WickElement) -> Vec<(usize, WickElement)> {
    let mut by: BTreeMap<usize, WickElement> = BTreeMap::new();
    for (k, c) in &a.terms {
        by.entry(k.deg_a())
            .or_insert_with(|| WickElement::zero(a.dim))
            .add_term(k.clone(), c.clone());
    }
    by.into_iter().collect()
}

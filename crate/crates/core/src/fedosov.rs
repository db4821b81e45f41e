//! Fedosov operators on the Wick algebra, the flat connection `D̂`, the
//! quantization map `τ` and the resulting star product.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{ExprError, SigAccumulator, Signomial};
use crate::forms;
use crate::geometry::Geometry;
use crate::wick::{WickAlgebra, WickElement, WickKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FedosovError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("flatness obstruction at degree {degree}: residual {residual:e} exceeds {threshold:e}")]
    FlatnessObstruction { degree: u32, residual: f64, threshold: f64 },
    #[error("invalid request: {0}")]
    Invalid(String),
}

fn merge(dim: usize, acc: BTreeMap<WickKey, SigAccumulator>) -> WickElement {
    WickElement::from_terms(dim, acc.into_iter().map(|(k, a)| (k, a.finish())))
}

fn with_z(z: &[u8], drop: Option<usize>, add: Option<usize>) -> Box<[u8]> {
    let mut out: Box<[u8]> = z.into();
    if let Some(d) = drop {
        out[d] -= 1;
    }
    if let Some(a) = add {
        out[a] += 1;
    }
    out
}

/// `δa = e^β ∧ ∂a/∂z^β`.
pub fn delta(a: &WickElement) -> WickElement {
    let dim = a.dim();
    let mut acc: BTreeMap<WickKey, SigAccumulator> = BTreeMap::new();
    for (k, c) in a.terms() {
        for beta in 0..dim {
            let p = k.z[beta];
            if p == 0 {
                continue;
            }
            let Some((sign, f)) = forms::wedge_left(beta as u8, &k.forms) else {
                continue;
            };
            let key = WickKey {
                v: k.v,
                z: with_z(&k.z, Some(beta), None),
                forms: f.into(),
            };
            acc.entry(key)
                .or_insert_with(|| SigAccumulator::new(dim))
                .add_scaled(c, Complex64::new(sign * p as f64, 0.0));
        }
    }
    merge(dim, acc)
}

/// `δ⁻¹a = (1/(p+q)) z^β ι(e_β) a` on terms of bidegree `(p, q)`, zero on `(0, 0)`.
pub fn delta_inv(a: &WickElement) -> WickElement {
    let dim = a.dim();
    let mut acc: BTreeMap<WickKey, SigAccumulator> = BTreeMap::new();
    for (k, c) in a.terms() {
        let pq = k.deg_s() as usize + k.deg_a();
        if pq == 0 {
            continue;
        }
        for &beta in k.forms.iter() {
            let (sign, rest) = forms::contract(beta, &k.forms).expect("label present");
            let key = WickKey {
                v: k.v,
                z: with_z(&k.z, None, Some(beta as usize)),
                forms: rest.into(),
            };
            acc.entry(key)
                .or_insert_with(|| SigAccumulator::new(dim))
                .add_scaled(c, Complex64::new(sign / pq as f64, 0.0));
        }
    }
    merge(dim, acc)
}

/// Part of bidegree `(0, 0)`, keeping all powers of `v`.
pub fn sigma(a: &WickElement) -> WickElement {
    a.filter(|k| k.deg_s() == 0 && k.deg_a() == 0)
}

/// Coefficients of `v^0, v^1, …, v^max_v` of a scalar series.
pub fn v_coefficients(a: &WickElement, max_v: u32) -> Vec<Signomial> {
    let dim = a.dim();
    let mut out = vec![Signomial::zero(dim); max_v as usize + 1];
    for (k, c) in sigma(a).terms() {
        if k.v <= max_v {
            out[k.v as usize] = c.clone();
        }
    }
    out
}

/// Scalar series `Σ_r v^r c_r`.
pub fn scalar_series(coeffs: &[Signomial]) -> WickElement {
    let dim = coeffs.first().map(Signomial::dim).unwrap_or(0);
    WickElement::from_terms(
        dim,
        coeffs
            .iter()
            .enumerate()
            .map(|(r, c)| (WickKey::new(r as u32, &vec![0; dim], &[]), c.clone())),
    )
}

/// Multiplies by `i/v`. Terms without a factor of `v` must cancel in every
/// legitimate use; their largest magnitude at `points` is returned alongside.
pub fn i_over_v(x: &WickElement, points: &[Vec<f64>]) -> Result<(WickElement, f64), ExprError> {
    let debris = x.filter(|k| k.v == 0).max_abs_at(points)?;
    let shifted = x
        .filter(|k| k.v > 0)
        .shift_v(-1)
        .expect("v = 0 terms filtered")
        .scale(Complex64::new(0.0, 1.0));
    Ok((shifted, debris))
}

/// Wick calculus bound to one geometry.
#[derive(Debug, Clone)]
pub struct Fedosov<'g> {
    geo: &'g Geometry,
    wick: WickAlgebra,
    /// nonzero `Γ^γ_{βα}` grouped by the differentiation direction `α`
    conn: Vec<Vec<(usize, usize, Signomial)>>,
    t_hat: WickElement,
    r_hat: WickElement,
}

impl<'g> Fedosov<'g> {
    pub fn new(geo: &'g Geometry) -> Self {
        let dim = geo.dim();
        let mut conn = vec![Vec::new(); dim];
        for (idx, s) in geo.dconn.gamma.nonzero() {
            conn[idx[2]].push((idx[0], idx[1], s.clone()));
        }
        let mut out = Self {
            geo,
            wick: WickAlgebra::new(geo.symp.lambda.clone()),
            conn,
            t_hat: WickElement::zero(dim),
            r_hat: WickElement::zero(dim),
        };
        out.t_hat = out.torsion_element();
        out.r_hat = out.curvature_element();
        out
    }

    pub fn t_hat(&self) -> &WickElement {
        &self.t_hat
    }

    pub fn r_hat(&self) -> &WickElement {
        &self.r_hat
    }

    pub fn geometry(&self) -> &Geometry {
        self.geo
    }

    pub fn wick(&self) -> &WickAlgebra {
        &self.wick
    }

    pub fn dim(&self) -> usize {
        self.geo.dim()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.geo.spec.sample_points
    }

    /// `Ď(c z^A e^I) = e^α ∧ (e_α(c) z^A − c Γ^γ_{βα} z^β ∂_γ z^A) ∧ e^I + c z^A d(e^I)`.
    pub fn dconn_apply(&self, a: &WickElement) -> Result<WickElement, ExprError> {
        let dim = self.dim();
        let w = &self.geo.anholonomy.coeffs;
        let mut acc: BTreeMap<WickKey, SigAccumulator> = BTreeMap::new();
        let one = Complex64::new(1.0, 0.0);
        for (k, c) in a.terms() {
            for alpha in 0..dim {
                let Some((sign, f)) = forms::wedge_left(alpha as u8, &k.forms) else {
                    continue;
                };
                let f: Box<[u8]> = f.into();
                let ec = self.geo.frame.apply(c, alpha)?;
                if !ec.is_zero() {
                    let key = WickKey {
                        v: k.v,
                        z: k.z.clone(),
                        forms: f.clone(),
                    };
                    acc.entry(key)
                        .or_insert_with(|| SigAccumulator::new(dim))
                        .add_scaled(&ec, Complex64::new(sign, 0.0));
                }
                for (g, beta, gm) in &self.conn[alpha] {
                    let p = k.z[*g];
                    if p == 0 {
                        continue;
                    }
                    let key = WickKey {
                        v: k.v,
                        z: with_z(&k.z, Some(*g), Some(*beta)),
                        forms: f.clone(),
                    };
                    acc.entry(key)
                        .or_insert_with(|| SigAccumulator::new(dim))
                        .add_product(c, gm, Complex64::new(-sign * p as f64, 0.0));
                }
            }
            if !k.forms.is_empty() {
                for (set, s) in forms::basis_differential(&k.forms, dim, |g, m, n| w.get(&[g, m, n]).clone()) {
                    let key = WickKey {
                        v: k.v,
                        z: k.z.clone(),
                        forms: set.into(),
                    };
                    acc.entry(key)
                        .or_insert_with(|| SigAccumulator::new(dim))
                        .add_product(c, &s, one);
                }
            }
        }
        Ok(merge(dim, acc))
    }

    /// `T̂ = Σ_{α<β} z^γ θ_{γτ} T^τ_{αβ} e^α ∧ e^β`.
    pub fn torsion_element(&self) -> WickElement {
        let dim = self.dim();
        let th = &self.geo.symp.theta_lower;
        let t = &self.geo.torsion;
        let mut acc: BTreeMap<WickKey, SigAccumulator> = BTreeMap::new();
        for a in 0..dim {
            for b in (a + 1)..dim {
                for g in 0..dim {
                    for tau in 0..dim {
                        let (x, y) = (&th[g][tau], t.get(&[tau, a, b]));
                        if x.is_zero() || y.is_zero() {
                            continue;
                        }
                        let key = WickKey {
                            v: 0,
                            z: with_z(&vec![0; dim], None, Some(g)),
                            forms: vec![a as u8, b as u8].into(),
                        };
                        acc.entry(key)
                            .or_insert_with(|| SigAccumulator::new(dim))
                            .add_product(x, y, Complex64::new(1.0, 0.0));
                    }
                }
            }
        }
        merge(dim, acc)
    }

    /// `R̂ = Σ_{α<β} (1/2) z^γ z^φ θ_{γτ} R^τ_{φαβ} e^α ∧ e^β`.
    pub fn curvature_element(&self) -> WickElement {
        let dim = self.dim();
        let th = &self.geo.symp.theta_lower;
        let r = &self.geo.curvature;
        let mut acc: BTreeMap<WickKey, SigAccumulator> = BTreeMap::new();
        for a in 0..dim {
            for b in (a + 1)..dim {
                for g in 0..dim {
                    for phi in 0..dim {
                        for tau in 0..dim {
                            let (x, y) = (&th[g][tau], r.get(&[tau, phi, a, b]));
                            if x.is_zero() || y.is_zero() {
                                continue;
                            }
                            let key = WickKey {
                                v: 0,
                                z: with_z(&with_z(&vec![0; dim], None, Some(g)), None, Some(phi)),
                                forms: vec![a as u8, b as u8].into(),
                            };
                            acc.entry(key)
                                .or_insert_with(|| SigAccumulator::new(dim))
                                .add_product(x, y, Complex64::new(0.5, 0.0));
                        }
                    }
                }
            }
        }
        merge(dim, acc)
    }

    /// `(i/v) ad(a) b`, truncated to total degree `max_deg` after the shift.
    fn i_over_v_ad(&self, a: &WickElement, b: &WickElement, max_deg: Option<u32>) -> Result<(WickElement, f64), ExprError> {
        let c = self.wick.commutator_truncated(a, b, max_deg.map(|d| d + 2));
        i_over_v(&c, self.points())
    }
}

/// Degree-by-degree solution of `δr = T̂ + R̂ + Ďr − (i/v) r∘r` with `δ⁻¹r = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FedosovState {
    /// truncation order requested by the caller
    pub order: u32,
    /// `r^{(m)}` keyed by total degree `m ≥ 2`
    pub r: BTreeMap<u32, WickElement>,
    /// mismatch of the defining equation at total degree `m`, keyed by `m`
    pub residuals: BTreeMap<u32, f64>,
    /// largest `v`-free remainder met when dividing by `v`
    pub debris: f64,
}

impl FedosovState {
    /// Highest total degree of `r` computed so far.
    pub fn top_degree(&self) -> u32 {
        self.r.keys().next_back().copied().unwrap_or(1)
    }

    pub fn component(&self, deg: u32) -> Option<&WickElement> {
        self.r.get(&deg)
    }

    /// Sum of the stored components up to `max_deg`.
    pub fn r_total(&self, dim: usize, max_deg: u32) -> WickElement {
        self.r
            .range(..=max_deg)
            .fold(WickElement::zero(dim), |acc, (_, c)| acc.add(c))
    }
}

/// Largest coefficient magnitude over points, split by total degree.
fn by_degree(a: &WickElement, points: &[Vec<f64>]) -> Result<BTreeMap<u32, f64>, ExprError> {
    let mut out = BTreeMap::new();
    for (k, c) in a.terms() {
        let m = c.max_abs_at(points)?;
        let e = out.entry(k.deg()).or_insert(0.0f64);
        *e = e.max(m);
    }
    Ok(out)
}

impl<'g> Fedosov<'g> {
    /// Solves for `r` through total degree `order + 2`. With a threshold, the
    /// first degree whose residual exceeds it aborts the construction.
    pub fn solve_r(&self, order: u32, threshold: Option<f64>) -> Result<FedosovState, FedosovError> {
        if order < 2 {
            return Err(FedosovError::Invalid(format!("truncation order must be at least 2, got {order}")));
        }
        let mut state = FedosovState {
            order,
            r: BTreeMap::new(),
            residuals: BTreeMap::new(),
            debris: 0.0,
        };
        self.extend(&mut state, order + 2, threshold)?;
        Ok(state)
    }

    /// Extends `state.r` through total degree `deg`.
    pub fn extend(&self, state: &mut FedosovState, deg: u32, threshold: Option<f64>) -> Result<(), FedosovError> {
        let dim = self.dim();
        let start = state.top_degree();
        for m in start..deg {
            let mut rhs = WickElement::zero(dim);
            if m == 1 {
                rhs = rhs.add(&self.t_hat);
            }
            if m == 2 {
                rhs = rhs.add(&self.r_hat);
            }
            if let Some(rm) = state.r.get(&m) {
                rhs = rhs.add(&self.dconn_apply(rm)?);
            }
            let mut quad = WickElement::zero(dim);
            for k in 2..=m {
                let l = m + 2 - k;
                if let (Some(a), Some(b)) = (state.r.get(&k), state.r.get(&l)) {
                    quad = quad.add(&self.wick.product(a, b));
                }
            }
            let (quad, debris) = i_over_v(&quad, self.points())?;
            state.debris = state.debris.max(debris);
            rhs = rhs.sub(&quad);
            let next = delta_inv(&rhs);
            let residual = delta(&next).sub(&rhs).max_abs_at(self.points())?;
            state.residuals.insert(m, residual);
            state.r.insert(m + 1, next);
            if let Some(t) = threshold {
                if !(residual <= t) {
                    return Err(FedosovError::FlatnessObstruction {
                        degree: m,
                        residual,
                        threshold: t,
                    });
                }
            }
        }
        Ok(())
    }

    /// `D̂a = −δa + Ďa − (i/v)[r, a]`, keeping total degrees up to `max_deg`.
    pub fn flat_d(&self, a: &WickElement, state: &mut FedosovState, max_deg: u32) -> Result<WickElement, ExprError> {
        let r = state.r_total(self.dim(), max_deg + 2);
        let (ad, debris) = self.i_over_v_ad(&r, a, Some(max_deg))?;
        state.debris = state.debris.max(debris);
        Ok(delta(a)
            .scale(Complex64::new(-1.0, 0.0))
            .add(&self.dconn_apply(a)?)
            .sub(&ad)
            .filter(|k| k.deg() <= max_deg))
    }

    /// Largest `D̂²a` component with total degree at most `cap`.
    pub fn flat_d_squared_residual(&self, a: &WickElement, state: &mut FedosovState, cap: u32) -> Result<f64, ExprError> {
        let first = self.flat_d(a, state, cap + 1)?;
        let second = self.flat_d(&first, state, cap)?;
        second.max_abs_at(self.points())
    }

    /// The lift `τ(a)` of a scalar series `a` through total degree `max_deg`:
    /// `τ^{(k+1)} = a^{(k+1)} + δ⁻¹(Ďτ^{(k)} − (i/v) Σ_l ad(r^{(l+2)}) τ^{(k−l)})`.
    pub fn tau_lift(&self, a: &WickElement, state: &mut FedosovState, max_deg: u32) -> Result<WickElement, FedosovError> {
        if a.terms().any(|(k, _)| k.deg_s() != 0 || k.deg_a() != 0) {
            return Err(FedosovError::Invalid("only scalar series can be lifted".into()));
        }
        if state.top_degree() < max_deg + 1 {
            self.extend(state, max_deg + 1, None)?;
        }
        let mut parts: Vec<WickElement> = vec![a.deg_part(0)];
        for k in 0..max_deg {
            let mut rhs = self.dconn_apply(&parts[k as usize])?;
            for l in 0..=k {
                let Some(rl) = state.r.get(&(l + 2)) else { continue };
                let t = &parts[(k - l) as usize];
                if rl.is_zero() || t.is_zero() {
                    continue;
                }
                let (ad, debris) = self.i_over_v_ad(rl, t, None)?;
                state.debris = state.debris.max(debris);
                rhs = rhs.sub(&ad);
            }
            parts.push(a.deg_part(k + 1).add(&delta_inv(&rhs)));
        }
        Ok(parts.iter().fold(WickElement::zero(self.dim()), |acc, p| acc.add(p)))
    }

    /// `a ⋆ b = σ(τ(a) ∘ τ(b))` through `v^order`, for scalar series `a`, `b`.
    pub fn star(&self, a: &WickElement, b: &WickElement, state: &mut FedosovState, order: u32) -> Result<WickElement, FedosovError> {
        let d = 2 * order;
        let ta = self.tau_lift(a, state, d)?;
        let tb = self.tau_lift(b, state, d)?;
        Ok(sigma(&self.wick.product_truncated(&ta, &tb, Some(d))))
    }

    /// Star-product coefficients `C_0 … C_order` of two functions.
    pub fn star_coefficients(
        &self,
        f: &Signomial,
        g: &Signomial,
        state: &mut FedosovState,
        order: u32,
    ) -> Result<Vec<Signomial>, FedosovError> {
        let p = self.star(&WickElement::scalar(f.clone()), &WickElement::scalar(g.clone()), state, order)?;
        Ok(v_coefficients(&p, order))
    }

    /// Largest component of `D̂τ(f)` with total degree below `max_deg`.
    pub fn lift_flatness_residual(&self, f: &Signomial, state: &mut FedosovState, max_deg: u32) -> Result<f64, FedosovError> {
        let t = self.tau_lift(&WickElement::scalar(f.clone()), state, max_deg)?;
        Ok(self.flat_d(&t, state, max_deg.saturating_sub(1))?.max_abs_at(self.points())?)
    }
}

/// Operator identities evaluated on a probe set; each value is the largest
/// mismatch at the sample points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OperatorResiduals {
    /// `Ďδ + δĎ − (i/v) ad(T̂)`
    pub comf_torsion: f64,
    /// `Ď² + (i/v) ad(R̂)`
    pub comf_curvature: f64,
    /// `δT̂`
    pub delta_torsion: f64,
    /// `δR̂ − ĎT̂`
    pub bianchi: f64,
    /// `D̂²` on probes, components of total degree up to the admissible cap
    pub flatness: f64,
    /// `Ďδ⁻¹r`, reported only
    pub gauge: f64,
    /// `v`-free remainders met while dividing by `v`
    pub debris: f64,
}

impl<'g> Fedosov<'g> {
    pub fn operator_residuals(
        &self,
        probes: &[WickElement],
        state: &mut FedosovState,
        flatness_cap: u32,
    ) -> Result<OperatorResiduals, FedosovError> {
        let pts = self.points();
        let mut out = OperatorResiduals::default();
        for a in probes {
            let da = delta(a);
            let dca = self.dconn_apply(a)?;
            let lhs = self.dconn_apply(&da)?.add(&delta(&dca));
            let (rhs, d1) = self.i_over_v_ad(&self.t_hat, a, None)?;
            out.comf_torsion = out.comf_torsion.max(lhs.sub(&rhs).max_abs_at(pts)?);
            let lhs = self.dconn_apply(&dca)?;
            let (rhs, d2) = self.i_over_v_ad(&self.r_hat, a, None)?;
            out.comf_curvature = out.comf_curvature.max(lhs.add(&rhs).max_abs_at(pts)?);
            out.debris = out.debris.max(d1).max(d2);

            let deg = a.max_deg().unwrap_or(0);
            let cap = flatness_cap.min(deg + state.order - 1);
            out.flatness = out.flatness.max(self.flat_d_squared_residual(a, state, cap)?);
        }
        out.delta_torsion = delta(&self.t_hat).max_abs_at(pts)?;
        out.bianchi = delta(&self.r_hat)
            .sub(&self.dconn_apply(&self.t_hat)?)
            .max_abs_at(pts)?;
        let r = state.r_total(self.dim(), state.order + 2);
        out.gauge = self.dconn_apply(&delta_inv(&r))?.max_abs_at(pts)?;
        out.debris = out.debris.max(state.debris);
        Ok(out)
    }

    /// Per-degree breakdown of `D̂²a`, for reports.
    pub fn flat_d_squared_by_degree(&self, a: &WickElement, state: &mut FedosovState, cap: u32) -> Result<BTreeMap<u32, f64>, ExprError> {
        let first = self.flat_d(a, state, cap + 1)?;
        let second = self.flat_d(&first, state, cap)?;
        by_degree(&second, self.points())
    }
}

fn z_monomials(dim: usize, max_deg: u32) -> Vec<Vec<u8>> {
    let mut out = vec![vec![0u8; dim]];
    let mut frontier = out.clone();
    for _ in 0..max_deg {
        let mut next = Vec::new();
        for z in &frontier {
            // extend only at or after the last nonzero slot to avoid repeats
            let last = z.iter().rposition(|&p| p > 0).unwrap_or(0);
            for a in last..dim {
                let mut w = z.clone();
                w[a] += 1;
                next.push(w);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Monomial probes `c · z^A` and `c · z^A e^α` with `|A| ≤ 3`; each coefficient
/// is drawn from `observables` with the given seed.
pub fn probe_set(dim: usize, observables: &[Signomial], seed: u64) -> Vec<WickElement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for z in z_monomials(dim, 3) {
        let mut form_choices: Vec<Vec<u8>> = vec![vec![]];
        form_choices.extend((0..dim as u8).map(|a| vec![a]));
        for f in form_choices {
            let c = if observables.is_empty() {
                Signomial::one(dim)
            } else {
                observables[rng.gen_range(0..observables.len())].clone()
            };
            out.push(WickElement::term(WickKey::new(0, &z, &f), c));
        }
    }
    out
}

/// Random elements with `deg_s ≤ max_s`, `deg_a ≤ max_a` and monomial
/// coefficients with half-integer exponents.
pub fn random_elements(dim: usize, count: usize, max_s: u32, max_a: usize, seed: u64) -> Vec<WickElement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut e = WickElement::zero(dim);
            for _ in 0..rng.gen_range(1..=4) {
                let mut z = vec![0u8; dim];
                for _ in 0..rng.gen_range(0..=max_s) {
                    z[rng.gen_range(0..dim)] += 1;
                }
                let mut f: Vec<u8> = (0..rng.gen_range(0..=max_a)).map(|_| rng.gen_range(0..dim as u8)).collect();
                f.sort_unstable();
                f.dedup();
                let exps: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2..=4) as f64 * 0.5).collect();
                let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                e.add_term(
                    WickKey::new(rng.gen_range(0..2), &z, &f),
                    Signomial::monomial(c, &exps).expect("finite exponents"),
                );
            }
            e
        })
        .collect()
}

/// `|δ²a|`, `|(δδ⁻¹ + δ⁻¹δ + σ)a − a|` at the points.
pub fn hodge_residuals(a: &WickElement, points: &[Vec<f64>]) -> Result<(f64, f64), ExprError> {
    let d2 = delta(&delta(a)).max_abs_at(points)?;
    let id = delta(&delta_inv(a))
        .add(&delta_inv(&delta(a)))
        .add(&sigma(a))
        .sub(a)
        .max_abs_at(points)?;
    Ok((d2, id))
}

/// `|δ(a∘b) − δa∘b − (−1)^{deg_a a} a∘δb|` for form-homogeneous `a`.
pub fn derivation_residual(w: &WickAlgebra, a: &WickElement, b: &WickElement, points: &[Vec<f64>]) -> Result<f64, ExprError> {
    let mut worst = 0.0f64;
    let mut by: BTreeMap<usize, WickElement> = BTreeMap::new();
    for (k, c) in a.terms() {
        by.entry(k.deg_a())
            .or_insert_with(|| WickElement::zero(a.dim()))
            .add_term(k.clone(), c.clone());
    }
    for (q, part) in by {
        let s = if q % 2 == 1 { -1.0 } else { 1.0 };
        let lhs = delta(&w.product(&part, b));
        let rhs = w
            .product(&delta(&part), b)
            .add(&w.product(&part, &delta(b)).scale(Complex64::new(s, 0.0)));
        worst = worst.max(lhs.sub(&rhs).max_abs_at(points)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configs;
    use crate::expr::AlphaContext;
    use crate::geometry::LagrangianSpec;

    fn geo(alpha: f64, n: usize, l: Signomial) -> Geometry {
        let ctx = AlphaContext::new(alpha, n).unwrap();
        Geometry::build(LagrangianSpec::new(l, ctx, configs::default_sample_points(n)).unwrap()).unwrap()
    }

    fn key(v: u32, z: &[u8], f: &[u8]) -> WickKey {
        WickKey::new(v, z, f)
    }

    fn coord(dim: usize, i: usize) -> Signomial {
        Signomial::coordinate(dim, i)
    }

    #[test]
    fn delta_examples() {
        let zx = WickElement::fibre(2, 0);
        let ex = WickElement::term(key(0, &[0, 0], &[0]), Signomial::one(2));
        assert_eq!(delta(&zx), ex);
        assert_eq!(delta_inv(&ex), zx);
        let a = WickElement::term(key(0, &[1, 0], &[1]), Signomial::one(2));
        assert!(delta(&delta(&a)).is_zero());
        let back = delta(&delta_inv(&a)).add(&delta_inv(&delta(&a))).add(&sigma(&a));
        assert_eq!(back, a);
    }

    #[test]
    fn hodge_identity_on_random_elements() {
        let pts = configs::default_sample_points(2);
        for a in random_elements(4, 100, 4, 2, 1) {
            let (d2, id) = hodge_residuals(&a, &pts).unwrap();
            let scale = a.max_abs_at(&pts).unwrap().max(1.0);
            assert!(d2 == 0.0, "{d2}");
            assert!(id <= 1e-12 * scale, "{id}");
        }
    }

    #[test]
    fn delta_is_a_graded_derivation() {
        for alpha in [0.3, 1.0] {
            let g = geo(alpha, 1, configs::lagrangian_x2y2(1));
            let w = WickAlgebra::new(g.symp.lambda.clone());
            let pts = &g.spec.sample_points;
            let els = random_elements(2, 40, 3, 1, 2);
            for pair in els.chunks(2) {
                let r = derivation_residual(&w, &pair[0], &pair[1], pts).unwrap();
                let scale = w.product(&pair[0], &pair[1]).max_abs_at(pts).unwrap().max(1.0);
                assert!(r <= 1e-12 * scale, "alpha={alpha}: {r}");
            }
        }
    }

    #[test]
    fn flat_config_has_trivial_operators() {
        let g = geo(1.0, 1, configs::lagrangian_y2(1));
        let fed = Fedosov::new(&g);
        assert!(fed.dconn_apply(&WickElement::fibre(2, 0)).unwrap().is_zero());
        assert!(fed.t_hat().is_zero());
        assert!(fed.r_hat().is_zero());
        let state = fed.solve_r(4, Some(0.0)).unwrap();
        assert!(state.r.values().all(WickElement::is_zero));
        let f = coord(2, 0).mul(&coord(2, 1));
        let df = fed.dconn_apply(&WickElement::scalar(f)).unwrap();
        let expected = WickElement::from_terms(
            2,
            [
                (key(0, &[0, 0], &[0]), coord(2, 1)),
                (key(0, &[0, 0], &[1]), coord(2, 0)),
            ],
        );
        assert_eq!(df, expected);
    }

    #[test]
    fn torsion_element_at_half_order() {
        let g = geo(0.5, 1, configs::lagrangian_y2(1));
        let fed = Fedosov::new(&g);
        let t = fed.t_hat();
        assert_eq!(t.len(), 1);
        let (k, c) = t.terms().next().unwrap();
        assert_eq!((k.deg_s(), k.deg_a(), k.deg()), (1, 2, 1));
        // z^y θ_{yx} T^x_{xy} with θ_{yx} = g = y^{1/2}·… and T^x_{xy} = −C
        let (e, coef) = c.terms().next().unwrap();
        assert_eq!(k.z.as_ref(), &[0, 1]);
        assert!((e[1] - 0.5).abs() < 1e-12);
        assert!((coef.re + 0.564190).abs() < 1e-6, "{coef}");
        assert!(matches!(
            fed.solve_r(3, None),
            Err(FedosovError::Expr(ExprError::FractionalDomain { .. }))
        ));
        let ctx = AlphaContext::new(0.5, 1).unwrap();
        let spec = LagrangianSpec::new(configs::lagrangian_y2(1), ctx, configs::default_sample_points(1))
            .unwrap()
            .with_policy(crate::geometry::DomainPolicy::Exclude);
        let g = Geometry::build(spec).unwrap();
        let fed = Fedosov::new(&g);
        let state = fed.solve_r(3, None).unwrap();
        assert!(g.frame.excluded_count() > 0);
        assert!(state.residuals.values().all(|r| r.is_finite()));
        let r2 = state.component(2).unwrap();
        for (k, _) in r2.terms() {
            assert_eq!((k.deg_s(), k.deg_a(), k.deg()), (2, 1, 2));
        }
        assert!(state.residuals.contains_key(&2));
    }

    fn nontrivial() -> Vec<Geometry> {
        vec![
            geo(1.0, 1, configs::lagrangian_y4(1)),
            geo(1.0, 2, configs::lagrangian_y4(2)),
            geo(1.0, 2, configs::lagrangian_coupled(2)),
        ]
    }

    #[test]
    fn comf_and_bianchi_identities() {
        for g in nontrivial() {
            let fed = Fedosov::new(&g);
            let obs = [coord(g.dim(), 0), coord(g.dim(), g.n())];
            let probes: Vec<_> = probe_set(g.dim(), &obs, 3).into_iter().step_by(7).collect();
            let mut state = fed.solve_r(2, None).unwrap();
            let res = fed.operator_residuals(&probes, &mut state, 6).unwrap();
            assert!(res.comf_torsion < 1e-8, "{res:?}");
            assert!(res.comf_curvature < 1e-8, "{res:?}");
            assert!(res.delta_torsion < 1e-8, "{res:?}");
            assert!(res.bianchi < 1e-8, "{res:?}");
            assert!(res.debris < 1e-10, "{res:?}");
        }
    }

    #[test]
    fn fedosov_recursion_is_consistent_at_integer_order() {
        for g in nontrivial() {
            let fed = Fedosov::new(&g);
            let state = fed.solve_r(4, Some(1e-9)).unwrap();
            assert!(!state.r.values().all(WickElement::is_zero));
            for r in state.r.values() {
                assert!(r.form_degree().is_none_or(|q| q == 1));
                assert!(delta_inv(r).is_zero());
            }
        }
    }

    #[test]
    fn flat_connection_squares_to_zero() {
        for g in nontrivial() {
            let fed = Fedosov::new(&g);
            let mut state = fed.solve_r(4, None).unwrap();
            let obs = [coord(g.dim(), 0)];
            for a in probe_set(g.dim(), &obs, 5).into_iter().step_by(11) {
                let cap = 6.min(a.max_deg().unwrap() + 3);
                let r = fed.flat_d_squared_residual(&a, &mut state, cap).unwrap();
                assert!(r < 1e-8, "{r}");
            }
        }
    }

    #[test]
    fn flat_lift_of_x_is_x_plus_zx() {
        let g = geo(1.0, 1, configs::lagrangian_y2(1));
        let fed = Fedosov::new(&g);
        let mut state = fed.solve_r(3, None).unwrap();
        let t = fed.tau_lift(&WickElement::scalar(coord(2, 0)), &mut state, 4).unwrap();
        assert_eq!(t, WickElement::scalar(coord(2, 0)).add(&WickElement::fibre(2, 0)));
        let one = fed.tau_lift(&WickElement::scalar(Signomial::one(2)), &mut state, 4).unwrap();
        assert_eq!(one, WickElement::scalar(Signomial::one(2)));
    }

    #[test]
    fn lifts_are_flat_and_sections() {
        for g in nontrivial() {
            let fed = Fedosov::new(&g);
            let mut state = fed.solve_r(4, None).unwrap();
            let f = coord(g.dim(), 0).mul(&coord(g.dim(), g.n()));
            let t = fed.tau_lift(&WickElement::scalar(f.clone()), &mut state, 4).unwrap();
            assert_eq!(sigma(&t), WickElement::scalar(f.clone()));
            assert!(fed.lift_flatness_residual(&f, &mut state, 4).unwrap() < 1e-9);
        }
    }

    #[test]
    fn star_axioms_on_nontrivial_geometry() {
        for g in nontrivial() {
            let fed = Fedosov::new(&g);
            let dim = g.dim();
            let n = g.n();
            let mut state = fed.solve_r(2, None).unwrap();
            let (x, y) = (coord(dim, 0), coord(dim, n));
            let xy = x.mul(&y);
            let c = fed.star_coefficients(&x, &xy, &mut state, 2).unwrap();
            assert_eq!(c[0], x.mul(&xy));
            let c2 = fed.star_coefficients(&xy, &x, &mut state, 2).unwrap();
            let pb = g.poisson_bracket(&x, &xy).unwrap();
            let diff = c[1].sub(&c2[1]).sub(&pb.scale(Complex64::new(0.0, 1.0)));
            assert!(diff.max_abs_at(&g.spec.sample_points).unwrap() < 1e-8);
            let one = Signomial::one(dim);
            let c = fed.star_coefficients(&one, &xy, &mut state, 3).unwrap();
            assert_eq!(c[0], xy);
            assert!(c[1..].iter().all(Signomial::is_zero));
        }
    }

    #[test]
    fn star_is_associative_on_nontrivial_geometry() {
        let g = geo(1.0, 1, configs::lagrangian_y4(1));
        let fed = Fedosov::new(&g);
        let mut state = fed.solve_r(2, None).unwrap();
        let k = 3;
        let x = WickElement::scalar(coord(2, 0));
        let y = WickElement::scalar(coord(2, 1));
        let xy = WickElement::scalar(coord(2, 0).mul(&coord(2, 1)));
        let l = fed.star(&fed.star(&x, &y, &mut state, k).unwrap(), &xy, &mut state, k).unwrap();
        let r = fed.star(&x, &fed.star(&y, &xy, &mut state, k).unwrap(), &mut state, k).unwrap();
        assert!(l.sub(&r).max_abs_at(&g.spec.sample_points).unwrap() < 1e-8);
    }

    #[test]
    fn flat_commutator_is_iv() {
        let g = geo(1.0, 1, configs::lagrangian_y2(1));
        let fed = Fedosov::new(&g);
        let mut state = fed.solve_r(2, None).unwrap();
        let (x, y) = (coord(2, 0), coord(2, 1));
        let a = fed.star_coefficients(&x, &y, &mut state, 2).unwrap();
        let b = fed.star_coefficients(&y, &x, &mut state, 2).unwrap();
        assert_eq!(a[1].sub(&b[1]), Signomial::constant(2, Complex64::new(0.0, 1.0)));
        assert!(a[2].sub(&b[2]).is_zero());
    }

    #[test]
    fn probe_set_is_reproducible() {
        let obs = [coord(4, 0), coord(4, 1)];
        assert_eq!(probe_set(4, &obs, 9), probe_set(4, &obs, 9));
        assert_eq!(probe_set(4, &obs, 9).len(), 35 * 5);
        assert_eq!(z_monomials(2, 3).len(), 10);
    }
}

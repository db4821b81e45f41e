//! Characteristic forms on the N-adapted co-frame: the Chern-Weyl form `γ`,
//! the auxiliary forms `μ`, `λ = dμ`, `κ`, and the representative of the
//! zero-degree class coefficient.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::expr::{ExprError, Signomial};
use crate::forms;
use crate::geometry::{lagrange_one_form, Geometry};

/// A differential form `Σ_I c_I e^I` over strictly increasing label sets.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedForm {
    dim: usize,
    degree: usize,
    components: BTreeMap<Vec<u8>, Signomial>,
}

impl AdaptedForm {
    pub fn zero(dim: usize, degree: usize) -> Self {
        Self {
            dim,
            degree,
            components: BTreeMap::new(),
        }
    }

    pub fn scalar(f: Signomial) -> Self {
        let mut out = Self::zero(f.dim(), 0);
        out.add_component(vec![], f);
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> impl Iterator<Item = (&[u8], &Signomial)> + '_ {
        self.components.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn component(&self, labels: &[u8]) -> Signomial {
        self.components
            .get(labels)
            .cloned()
            .unwrap_or_else(|| Signomial::zero(self.dim))
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    /// Adds `c` to the component on the sorted label set `labels`.
    pub fn add_component(&mut self, labels: Vec<u8>, c: Signomial) {
        debug_assert_eq!(labels.len(), self.degree);
        debug_assert!(labels.windows(2).all(|w| w[0] < w[1]));
        if c.is_zero() {
            return;
        }
        let slot = self
            .components
            .entry(labels.clone())
            .or_insert_with(|| Signomial::zero(self.dim));
        *slot = slot.add(&c);
        if slot.is_zero() {
            self.components.remove(&labels);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.degree, other.degree, "form degree mismatch");
        let mut out = self.clone();
        for (k, c) in &other.components {
            out.add_component(k.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.dim, self.degree);
        for (k, v) in &self.components {
            out.add_component(k.clone(), v.scale(c));
        }
        out
    }

    pub fn max_abs_at(&self, points: &[Vec<f64>]) -> Result<f64, ExprError> {
        let mut m = 0.0f64;
        for c in self.components.values() {
            m = m.max(c.max_abs_at(points)?);
        }
        Ok(m)
    }
}

/// `d(c e^I) = e_α(c) e^α ∧ e^I + c d(e^I)` with `d e^γ = −Σ_{α<β} w^γ_{αβ} e^α ∧ e^β`.
pub fn exterior_derivative(form: &AdaptedForm, geo: &Geometry) -> Result<AdaptedForm, ExprError> {
    let dim = form.dim;
    let w = &geo.anholonomy.coeffs;
    let mut out = AdaptedForm::zero(dim, form.degree + 1);
    for (labels, c) in &form.components {
        for a in 0..dim {
            let Some((sign, set)) = forms::wedge_left(a as u8, labels) else {
                continue;
            };
            let d = geo.frame.apply(c, a)?;
            out.add_component(set, d.scale_re(sign));
        }
        for (set, s) in forms::basis_differential(labels, dim, |g, m, n| w.get(&[g, m, n]).clone()) {
            out.add_component(set, c.mul(&s));
        }
    }
    Ok(out)
}

/// `tr(J R(e_α, e_β)) = J^φ_τ R^τ_{φαβ}`.
fn trace_jr(geo: &Geometry, a: usize, b: usize) -> Signomial {
    let dim = geo.dim();
    let j = &geo.symp.j;
    let mut acc = crate::expr::SigAccumulator::new(dim);
    for tau in 0..dim {
        for phi in 0..dim {
            if j[phi][tau] != 0.0 {
                acc.add_scaled(geo.curvature.get(&[tau, phi, a, b]), Complex64::new(j[phi][tau], 0.0));
            }
        }
    }
    acc.finish()
}

/// `γ = −(1/4) J^{α'}_τ R^τ_{α'αβ} e^α ∧ e^β`.
pub fn chern_weyl(geo: &Geometry) -> AdaptedForm {
    let dim = geo.dim();
    let mut out = AdaptedForm::zero(dim, 2);
    for a in 0..dim {
        for b in (a + 1)..dim {
            out.add_component(vec![a as u8, b as u8], trace_jr(geo, a, b).scale_re(-0.5));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaForms {
    pub mu: AdaptedForm,
    pub lambda: AdaptedForm,
    pub kappa: AdaptedForm,
}

/// `μ = (1/6) J^{α'}_τ T^τ_{α'β} e^β`, `λ = dμ`,
/// `κ = −(i/8) J^{γ'}_τ R^τ_{γ'γβ} e^γ ∧ e^β − iλ`.
pub fn lemma_forms(geo: &Geometry) -> Result<LemmaForms, ExprError> {
    let dim = geo.dim();
    let j = &geo.symp.j;
    let mut mu = AdaptedForm::zero(dim, 1);
    for b in 0..dim {
        let mut acc = crate::expr::SigAccumulator::new(dim);
        for tau in 0..dim {
            for a in 0..dim {
                if j[a][tau] != 0.0 {
                    acc.add_scaled(geo.torsion.get(&[tau, a, b]), Complex64::new(j[a][tau] / 6.0, 0.0));
                }
            }
        }
        mu.add_component(vec![b as u8], acc.finish());
    }
    let lambda = exterior_derivative(&mu, geo)?;
    let mut kappa = AdaptedForm::zero(dim, 2);
    for a in 0..dim {
        for b in (a + 1)..dim {
            kappa.add_component(vec![a as u8, b as u8], trace_jr(geo, a, b).scale(Complex64::new(0.0, -0.25)));
        }
    }
    let kappa = kappa.sub(&lambda.scale(Complex64::new(0.0, 1.0)));
    Ok(LemmaForms { mu, lambda, kappa })
}

/// Representative `−(1/(2i)) γ` of the zero-degree class coefficient. Only the
/// representative form is produced; no cohomology class is computed.
pub fn c0_representative(gamma: &AdaptedForm) -> AdaptedForm {
    gamma.scale(-Complex64::new(0.0, 2.0).inv())
}

/// Residuals of the characteristic-form layer at the sample points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChernResiduals {
    /// `dγ`
    pub closed_gamma: f64,
    /// `dλ`
    pub closed_lambda: f64,
    /// `κ + iλ − (i/2)γ`
    pub assembly: f64,
    /// `d²f` over the probe functions
    pub d_squared: f64,
    /// `θ − dω` with `ω = (1/2) ∂_{y^i}L e^i`
    pub theta_exact: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChernLayer {
    pub gamma: AdaptedForm,
    pub lemma: LemmaForms,
    pub c0: AdaptedForm,
    pub residuals: ChernResiduals,
}

/// The almost symplectic form `Σ_{α<β} θ_{αβ} e^α ∧ e^β`.
pub fn theta_form(geo: &Geometry) -> AdaptedForm {
    let dim = geo.dim();
    let mut out = AdaptedForm::zero(dim, 2);
    for a in 0..dim {
        for b in (a + 1)..dim {
            out.add_component(vec![a as u8, b as u8], geo.symp.theta_lower[a][b].clone());
        }
    }
    out
}

pub fn chern_layer(geo: &Geometry, probes: &[Signomial]) -> Result<ChernLayer, ExprError> {
    let pts = &geo.spec.sample_points;
    let gamma = chern_weyl(geo);
    let lemma = lemma_forms(geo)?;
    let c0 = c0_representative(&gamma);
    let mut res = ChernResiduals {
        closed_gamma: exterior_derivative(&gamma, geo)?.max_abs_at(pts)?,
        closed_lambda: exterior_derivative(&lemma.lambda, geo)?.max_abs_at(pts)?,
        ..Default::default()
    };
    let lhs = lemma.kappa.add(&lemma.lambda.scale(Complex64::new(0.0, 1.0)));
    res.assembly = lhs.sub(&gamma.scale(Complex64::new(0.0, 0.5))).max_abs_at(pts)?;
    for f in probes {
        let d1 = exterior_derivative(&AdaptedForm::scalar(f.clone()), geo)?;
        res.d_squared = res.d_squared.max(exterior_derivative(&d1, geo)?.max_abs_at(pts)?);
    }
    let n = geo.n();
    let mut omega = AdaptedForm::zero(geo.dim(), 1);
    let spec = &geo.spec;
    let comps = lagrange_one_form(spec).map_err(|e| match e {
        crate::geometry::GeometryError::Expr(e) => e,
        crate::geometry::GeometryError::Block { source, .. } => source,
        other => ExprError::OutsideClass(other.to_string()),
    })?;
    for (i, c) in comps.into_iter().enumerate().take(n) {
        omega.add_component(vec![i as u8], c);
    }
    res.theta_exact = theta_form(geo)
        .sub(&exterior_derivative(&omega, geo)?)
        .max_abs_at(pts)?;
    Ok(ChernLayer {
        gamma,
        lemma,
        c0,
        residuals: res,
    })
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

    #[test]
    fn d_of_constants_vanishes() {
        for alpha in [0.5, 1.0] {
            let g = geo(alpha, 1, configs::lagrangian_x2y2(1));
            let d = exterior_derivative(&AdaptedForm::scalar(Signomial::real(2, 3.0)), &g).unwrap();
            assert!(d.is_zero());
        }
    }

    #[test]
    fn flat_examples() {
        let g = geo(1.0, 1, configs::lagrangian_y2(1));
        let x = Signomial::coordinate(2, 0);
        let dx = exterior_derivative(&AdaptedForm::scalar(x.clone()), &g).unwrap();
        let mut expected = AdaptedForm::zero(2, 1);
        expected.add_component(vec![0], Signomial::one(2));
        assert_eq!(dx, expected);
        let mut xex = AdaptedForm::zero(2, 1);
        xex.add_component(vec![0], x);
        assert!(exterior_derivative(&xex, &g).unwrap().is_zero());
        for n in [1, 2] {
            let g = geo(1.0, n, configs::lagrangian_y2(n));
            let layer = chern_layer(&g, &[]).unwrap();
            assert!(layer.gamma.is_zero());
            assert!(layer.lemma.mu.is_zero());
            assert!(layer.lemma.lambda.is_zero());
            assert!(layer.lemma.kappa.is_zero());
            assert!(layer.c0.is_zero());
        }
    }

    #[test]
    fn half_order_mu_comes_from_torsion() {
        let g = geo(0.5, 1, configs::lagrangian_y2(1));
        let l = lemma_forms(&g).unwrap();
        // J^y_x T^x_{yβ}: only β = x survives, T^x_{yx} = C ≈ 0.564190 y^{-1/2}
        let c = l.mu.component(&[0]);
        let (e, k) = c.terms().next().unwrap();
        assert_eq!(e, &[0.0, -0.5]);
        assert!((k.re + 0.564190 / 6.0).abs() < 1e-6, "{k}");
        assert!(l.mu.component(&[1]).is_zero());
    }

    #[test]
    fn integer_order_closedness_on_curved_config() {
        let g = geo(1.0, 2, configs::lagrangian_coupled(2));
        let probes = [Signomial::coordinate(4, 0).mul(&Signomial::coordinate(4, 3)), Signomial::coordinate(4, 1)];
        let layer = chern_layer(&g, &probes).unwrap();
        // R preserves the h/v splitting while J swaps it, so tr(JR) = 0
        assert!(!g.curvature.is_zero());
        assert!(layer.gamma.is_zero());
        let r = &layer.residuals;
        assert!(r.closed_gamma < 1e-8, "{r:?}");
        assert!(r.closed_lambda < 1e-10, "{r:?}");
        assert!(r.assembly < 1e-8, "{r:?}");
        assert!(r.d_squared < 1e-10, "{r:?}");
        assert!(r.theta_exact < 1e-10, "{r:?}");
    }

    /// A curvature tensor with an h/v-mixing part, contracted by hand.
    #[test]
    fn chern_weyl_contracts_against_j() {
        let mut g = geo(1.0, 1, configs::lagrangian_y2(1));
        let y = Signomial::coordinate(2, 1);
        // R^x_{y,xy} = y, R^y_{x,xy} = 2: tr(JR_{xy}) = J^y_x R^x_{y xy} + J^x_y R^y_{x xy} = −y + 2
        g.curvature.set(&[0, 1, 0, 1], y.clone());
        g.curvature.set(&[0, 1, 1, 0], y.scale_re(-1.0));
        g.curvature.set(&[1, 0, 0, 1], Signomial::real(2, 2.0));
        g.curvature.set(&[1, 0, 1, 0], Signomial::real(2, -2.0));
        let gamma = chern_weyl(&g);
        let expected = y.scale_re(0.5).sub(&Signomial::one(2));
        assert_eq!(gamma.component(&[0, 1]), expected);
        let l = lemma_forms(&g).unwrap();
        let k = l.kappa.add(&l.lambda.scale(Complex64::new(0.0, 1.0)));
        assert_eq!(k, gamma.scale(Complex64::new(0.0, 0.5)));
        let c0 = c0_representative(&gamma);
        assert_eq!(c0.component(&[0, 1]), expected.scale(Complex64::new(0.0, 0.5)));
    }

    #[test]
    fn c0_is_linear_in_gamma() {
        let mut g = geo(1.0, 1, configs::lagrangian_y2(1));
        g.curvature.set(&[1, 0, 0, 1], Signomial::coordinate(2, 0));
        let gamma = chern_weyl(&g);
        assert!(!gamma.is_zero());
        let c = Complex64::new(2.5, -1.0);
        assert_eq!(c0_representative(&gamma.scale(c)), c0_representative(&gamma).scale(c));
        let pt = vec![1.0, 1.0];
        for (labels, comp) in c0_representative(&gamma).components() {
            let direct = gamma.component(labels).eval_at(&pt).unwrap() * (-1.0 / Complex64::new(0.0, 2.0));
            assert!((comp.eval_at(&pt).unwrap() - direct).norm() < 1e-14);
        }
    }
}

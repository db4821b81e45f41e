//! Canonical almost-Kähler geometry of a regular (fractional) Lagrangian:
//! Hessian metric, semi-spray and N-connection, adapted frames, the canonical
//! d-connection with its torsion and curvature, the almost complex and
//! almost symplectic structures, and the derived brackets.
//!
//! Index conventions (dimension `2n`): labels `0..n` are the horizontal
//! directions `e_i`, labels `n..2n` the vertical ones `e_{n+a}`.
//!
//! * connection: `D_{e_α} e_β = Γ^γ_{βα} e_γ`, stored as `gamma[γ][β][α]`
//! * anholonomy: `[e_α, e_β] = w^γ_{αβ} e_γ`
//! * torsion: `T(e_α, e_β) = D_α e_β − D_β e_α − [e_α, e_β] = T^γ_{αβ} e_γ`
//! * curvature: `R(e_α, e_β) e_φ = R^τ_{φαβ} e_τ`
//! * `θ(X, Y) = g(JX, Y)` with `J e_i = −e_{n+i}`, `J e_{n+i} = e_i`

use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64;
use thiserror::Error;

use crate::expr::{AlphaContext, ExprError, Signomial};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("Hessian outside the diagonal-monomial class: {0}")]
    OutsideClass(String),
    #[error("degenerate Hessian: g_{index}{index} vanishes at sample point {point:?}")]
    Regularity { index: usize, point: Vec<f64> },
    #[error("{block}: {source}")]
    Block {
        block: &'static str,
        #[source]
        source: ExprError,
    },
}

fn in_block(block: &'static str) -> impl Fn(ExprError) -> GeometryError {
    move |source| GeometryError::Block { block, source }
}

/// Dense rank-`r` array of signomials over `dim` labels per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dim: usize,
    rank: usize,
    data: Vec<Signomial>,
}

impl Tensor {
    pub fn zeros(dim: usize, rank: usize, field_dim: usize) -> Self {
        Self {
            dim,
            rank,
            data: vec![Signomial::zero(field_dim); dim.pow(rank as u32)],
        }
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> &Signomial {
        &self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Signomial) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// All multi-indices with nonzero entries, in lexicographic order.
    pub fn nonzero(&self) -> Vec<(Vec<usize>, &Signomial)> {
        let mut out = Vec::new();
        for (o, s) in self.data.iter().enumerate() {
            if s.is_zero() {
                continue;
            }
            let mut idx = vec![0; self.rank];
            let mut r = o;
            for k in (0..self.rank).rev() {
                idx[k] = r % self.dim;
                r /= self.dim;
            }
            out.push((idx, s));
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Signomial::is_zero)
    }
}

/// A Lagrangian on the (fractional) tangent bundle with the points where
/// regularity is checked.
#[derive(Debug, Clone)]
pub struct LagrangianSpec {
    pub lagrangian: Signomial,
    pub ctx: AlphaContext,
    pub sample_points: Vec<Vec<f64>>,
    pub policy: DomainPolicy,
}

impl LagrangianSpec {
    pub fn new(lagrangian: Signomial, ctx: AlphaContext, sample_points: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        if lagrangian.dim() != ctx.dim() {
            return Err(ExprError::Malformed(format!(
                "Lagrangian has dimension {}, context expects {}",
                lagrangian.dim(),
                ctx.dim()
            ))
            .into());
        }
        Ok(Self {
            lagrangian,
            ctx,
            sample_points,
            policy: DomainPolicy::Strict,
        })
    }

    pub fn with_policy(mut self, policy: DomainPolicy) -> Self {
        self.policy = policy;
        self
    }
}

/// Diagonal Hessian metric; the vertical block repeats the horizontal one.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBlocks {
    pub diag: Vec<Signomial>,
    pub inv_diag: Vec<Signomial>,
}

impl MetricBlocks {
    /// Sasaki-type metric component `g_{αβ}` on the full `2n` frame.
    pub fn full(&self, a: usize, b: usize) -> Signomial {
        let n = self.diag.len();
        if a == b {
            self.diag[a % n].clone()
        } else {
            Signomial::zero(2 * n)
        }
    }

    pub fn full_inv(&self, a: usize, b: usize) -> Signomial {
        let n = self.diag.len();
        if a == b {
            self.inv_diag[a % n].clone()
        } else {
            Signomial::zero(2 * n)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NConnection {
    /// `G^k`
    pub semi_spray: Vec<Signomial>,
    /// `N^a_j`, indexed `[a][j]`
    pub coeffs: Vec<Vec<Signomial>>,
    /// `Ω^a_{ij} = e_j(N^a_i) − e_i(N^a_j)`, indexed `[a][i][j]`
    pub omega: Vec<Vec<Vec<Signomial>>>,
}

/// What a frame derivative does with a term whose fractional power rule hits
/// a numerator pole (exponent a negative integer).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DomainPolicy {
    /// Fail with [`ExprError::FractionalDomain`].
    #[default]
    Strict,
    /// Drop the term from the derivative and count it.
    Exclude,
}

/// Applies N-adapted frame vectors `e_α` (Caputo backend for α < 1).
#[derive(Debug)]
pub struct FrameOps {
    ctx: AlphaContext,
    n_coeffs: Vec<Vec<Signomial>>,
    policy: DomainPolicy,
    continuation: AtomicUsize,
    excluded: AtomicUsize,
}

impl Clone for FrameOps {
    fn clone(&self) -> Self {
        Self {
            ctx: self.ctx,
            n_coeffs: self.n_coeffs.clone(),
            policy: self.policy,
            continuation: AtomicUsize::new(self.continuation.load(Ordering::Relaxed)),
            excluded: AtomicUsize::new(self.excluded.load(Ordering::Relaxed)),
        }
    }
}

impl FrameOps {
    pub fn new(ctx: AlphaContext, n_coeffs: Vec<Vec<Signomial>>) -> Self {
        Self {
            ctx,
            n_coeffs,
            policy: DomainPolicy::Strict,
            continuation: AtomicUsize::new(0),
            excluded: AtomicUsize::new(0),
        }
    }

    pub fn with_policy(mut self, policy: DomainPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn policy(&self) -> DomainPolicy {
        self.policy
    }

    /// Frame with vanishing N-connection (coordinate frame).
    pub fn holonomic(ctx: AlphaContext) -> Self {
        let n = ctx.n();
        Self::new(ctx, vec![vec![Signomial::zero(2 * n); n]; n])
    }

    pub fn ctx(&self) -> &AlphaContext {
        &self.ctx
    }

    /// Fractional (or classical) partial derivative in coordinate `coord`.
    pub fn partial(&self, f: &Signomial, coord: usize) -> Result<Signomial, ExprError> {
        if !self.ctx.is_classical() {
            let k = f.continuation_terms(coord);
            if k > 0 {
                self.continuation.fetch_add(k, Ordering::Relaxed);
            }
        }
        match self.policy {
            DomainPolicy::Strict => f.caputo(coord, &self.ctx),
            DomainPolicy::Exclude => {
                let (d, skipped) = f.caputo_excluding_poles(coord, &self.ctx);
                if skipped > 0 {
                    self.excluded.fetch_add(skipped, Ordering::Relaxed);
                }
                Ok(d)
            }
        }
    }

    /// `e_j f = ∂_j f − N^a_j ∂_a f`, `e_{n+b} f = ∂_{n+b} f`.
    pub fn apply(&self, f: &Signomial, index: usize) -> Result<Signomial, ExprError> {
        let n = self.ctx.n();
        if index >= n {
            return self.partial(f, index);
        }
        let mut out = self.partial(f, index)?;
        for a in 0..n {
            let na = &self.n_coeffs[a][index];
            if na.is_zero() {
                continue;
            }
            let d = self.partial(f, n + a)?;
            out = out.sub(&na.mul(&d));
        }
        Ok(out)
    }

    /// Terms differentiated through the analytic continuation of the power
    /// rule so far.
    pub fn continuation_count(&self) -> usize {
        self.continuation.load(Ordering::Relaxed)
    }

    /// Terms left out of a derivative under [`DomainPolicy::Exclude`].
    pub fn excluded_count(&self) -> usize {
        self.excluded.load(Ordering::Relaxed)
    }
}

/// Canonical d-connection coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DConnection {
    /// `L^i_{jk}` indexed `[i][j][k]`
    pub l_coeffs: Vec<Vec<Vec<Signomial>>>,
    /// `C^a_{bc}` indexed `[a][b][c]`
    pub c_coeffs: Vec<Vec<Vec<Signomial>>>,
    /// Full `Γ^γ_{βα}` over `2n` labels, indexed `[γ][β][α]`.
    pub gamma: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmostSymplectic {
    pub theta_lower: Vec<Vec<Signomial>>,
    pub theta_upper: Vec<Vec<Signomial>>,
    pub lambda: Vec<Vec<Signomial>>,
    /// `J^μ_α` (component μ of `J e_α`), indexed `[μ][α]`
    pub j: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Anholonomy {
    /// `w^γ_{αβ}` indexed `[γ][α][β]`
    pub coeffs: Tensor,
    /// Max over probes and sample points of `|([e_α,e_β] − w^γ_{αβ} e_γ) f|`.
    pub residual: f64,
}

/// Everything derived from one Lagrangian.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub spec: LagrangianSpec,
    pub metric: MetricBlocks,
    pub nconn: NConnection,
    pub frame: FrameOps,
    pub dconn: DConnection,
    pub anholonomy: Anholonomy,
    pub torsion: Tensor,
    pub curvature: Tensor,
    pub symp: AlmostSymplectic,
}

impl Geometry {
    pub fn build(spec: LagrangianSpec) -> Result<Self, GeometryError> {
        let metric = hessian_metric(&spec)?;
        let semi = semi_spray(&spec, &metric)?;
        let nconn = n_connection(semi, &spec.ctx, spec.policy)?;
        let frame = FrameOps::new(spec.ctx, nconn.coeffs.clone()).with_policy(spec.policy);
        let dconn = canonical_d_connection(&metric, &frame)?;
        let anholonomy = anholonomy(&nconn, &frame, &spec.sample_points)?;
        let torsion = torsion(&dconn, &anholonomy.coeffs);
        let curvature = curvature(&dconn, &anholonomy.coeffs, &frame)?;
        let symp = almost_symplectic(&metric);
        Ok(Self {
            spec,
            metric,
            nconn,
            frame,
            dconn,
            anholonomy,
            torsion,
            curvature,
            symp,
        })
    }

    pub fn ctx(&self) -> &AlphaContext {
        &self.spec.ctx
    }

    pub fn n(&self) -> usize {
        self.spec.ctx.n()
    }

    pub fn dim(&self) -> usize {
        self.spec.ctx.dim()
    }

    pub fn adapted_derivative(&self, f: &Signomial, index: usize) -> Result<Signomial, ExprError> {
        self.frame.apply(f, index)
    }

    pub fn poisson_bracket(&self, f: &Signomial, g: &Signomial) -> Result<Signomial, ExprError> {
        poisson_bracket(f, g, &self.symp, &self.frame)
    }
}

/// `g_ij = (1/4)(∂_i∂_j + ∂_j∂_i) L` with fractional y-derivatives.
pub fn hessian_metric(spec: &LagrangianSpec) -> Result<MetricBlocks, GeometryError> {
    let ctx = &spec.ctx;
    let n = ctx.n();
    let l = &spec.lagrangian;
    let mut first = Vec::with_capacity(n);
    for i in 0..n {
        first.push(l.caputo(n + i, ctx)?);
    }
    let mut diag = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..n {
            let gij = first[j]
                .caputo(n + i, ctx)?
                .add(&first[i].caputo(n + j, ctx)?)
                .scale_re(0.25);
            if i != j && !gij.is_zero() {
                return Err(GeometryError::OutsideClass(format!(
                    "off-diagonal Hessian entry g_{i}{j} = {gij}"
                )));
            }
            if i == j {
                if gij.len() != 1 {
                    return Err(GeometryError::OutsideClass(format!(
                        "diagonal Hessian entry g_{i}{i} = {gij} is not a single monomial"
                    )));
                }
                diag.push(gij);
            }
        }
    }
    for (i, gii) in diag.iter().enumerate() {
        for pt in &spec.sample_points {
            if gii.eval_at(pt)?.norm() == 0.0 {
                return Err(GeometryError::Regularity {
                    index: i,
                    point: pt.clone(),
                });
            }
        }
    }
    let inv_diag = diag
        .iter()
        .map(|g| g.reciprocal())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricBlocks { diag, inv_diag })
}

/// `G^k = (1/4) g^{kj} [ y^m ∂_{x^m} ∂_{y^j} L − ∂_{x^j} L ]`.
pub fn semi_spray(spec: &LagrangianSpec, metric: &MetricBlocks) -> Result<Vec<Signomial>, GeometryError> {
    let ctx = &spec.ctx;
    let n = ctx.n();
    let mut g_out = Vec::with_capacity(n);
    for k in 0..n {
        let dx = spec.lagrangian.caputo(k, ctx).map_err(in_block("semi-spray"))?;
        let dy = spec.lagrangian.caputo(n + k, ctx).map_err(in_block("semi-spray"))?;
        let mut bracket = dx.scale_re(-1.0);
        for m in 0..n {
            let dxy = dy.caputo(m, ctx).map_err(in_block("semi-spray"))?;
            bracket = bracket.add(&dxy.mul_coordinate(n + m));
        }
        g_out.push(metric.inv_diag[k].mul(&bracket).scale_re(0.25));
    }
    Ok(g_out)
}

/// `N^a_j = ∂_{y^j} G^a` and the N-connection curvature `Ω^a_{ij}`.
pub fn n_connection(semi_spray: Vec<Signomial>, ctx: &AlphaContext, policy: DomainPolicy) -> Result<NConnection, GeometryError> {
    let n = ctx.n();
    let mut coeffs = vec![vec![Signomial::zero(2 * n); n]; n];
    for a in 0..n {
        for j in 0..n {
            coeffs[a][j] = semi_spray[a].caputo(n + j, ctx).map_err(in_block("N-connection"))?;
        }
    }
    let frame = FrameOps::new(*ctx, coeffs.clone()).with_policy(policy);
    let mut omega = vec![vec![vec![Signomial::zero(2 * n); n]; n]; n];
    for a in 0..n {
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let t1 = frame.apply(&coeffs[a][i], j).map_err(in_block("Omega"))?;
                let t2 = frame.apply(&coeffs[a][j], i).map_err(in_block("Omega"))?;
                omega[a][i][j] = t1.sub(&t2);
            }
        }
    }
    Ok(NConnection {
        semi_spray,
        coeffs,
        omega,
    })
}

/// Koszul-form coefficients `L^i_{jk}`, `C^a_{bc}` and the full connection with
/// the cross blocks filled by the h/v index identification.
pub fn canonical_d_connection(metric: &MetricBlocks, frame: &FrameOps) -> Result<DConnection, GeometryError> {
    let n = metric.diag.len();
    let dim = 2 * n;
    let g = |i: usize, j: usize| -> Signomial {
        if i == j {
            metric.diag[i].clone()
        } else {
            Signomial::zero(dim)
        }
    };
    // e_α g_{ij} for every frame direction and metric slot
    let mut dg = vec![vec![Signomial::zero(dim); n]; dim];
    for (alpha, row) in dg.iter_mut().enumerate() {
        for (i, slot) in row.iter_mut().enumerate() {
            *slot = frame.apply(&metric.diag[i], alpha).map_err(in_block("d-connection"))?;
        }
    }
    let dgij = |alpha: usize, i: usize, j: usize| -> Signomial {
        if i == j {
            dg[alpha][i].clone()
        } else {
            Signomial::zero(dim)
        }
    };
    let _ = g;
    let mut l_coeffs = vec![vec![vec![Signomial::zero(dim); n]; n]; n];
    let mut c_coeffs = vec![vec![vec![Signomial::zero(dim); n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                // (1/2) g^{ii} (e_k g_ji + e_j g_ki − e_i g_jk)
                let s = dgij(k, j, i).add(&dgij(j, k, i)).sub(&dgij(i, j, k));
                l_coeffs[i][j][k] = metric.inv_diag[i].mul(&s).scale_re(0.5);
                let s = dgij(n + k, j, i).add(&dgij(n + j, k, i)).sub(&dgij(n + i, j, k));
                c_coeffs[i][j][k] = metric.inv_diag[i].mul(&s).scale_re(0.5);
            }
        }
    }
    let mut gamma = Tensor::zeros(dim, 3, dim);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                gamma.set(&[i, j, k], l_coeffs[i][j][k].clone());
                gamma.set(&[n + i, n + j, k], l_coeffs[i][j][k].clone());
                gamma.set(&[i, j, n + k], c_coeffs[i][j][k].clone());
                gamma.set(&[n + i, n + j, n + k], c_coeffs[i][j][k].clone());
            }
        }
    }
    Ok(DConnection {
        l_coeffs,
        c_coeffs,
        gamma,
    })
}

/// Probe functions for operator-level residuals.
pub fn probe_signomials(dim: usize) -> Vec<Signomial> {
    let one = Complex64::new(1.0, 0.0);
    let mut out = Vec::new();
    for a in 0..dim {
        out.push(Signomial::coordinate(dim, a));
        let mut e = vec![0.0; dim];
        e[a] = 2.0;
        out.push(Signomial::monomial(one, &e).unwrap());
        for b in (a + 1)..dim {
            let mut e = vec![0.0; dim];
            e[a] = 1.0;
            e[b] = 1.5;
            out.push(Signomial::monomial(one, &e).unwrap());
        }
    }
    out
}

/// Structure coefficients of the adapted frame and the residual of the
/// commutator realization on probe signomials.
pub fn anholonomy(nconn: &NConnection, frame: &FrameOps, points: &[Vec<f64>]) -> Result<Anholonomy, GeometryError> {
    let n = nconn.coeffs.len();
    let dim = 2 * n;
    let mut coeffs = Tensor::zeros(dim, 3, dim);
    for a in 0..n {
        for i in 0..n {
            for j in 0..n {
                coeffs.set(&[n + a, i, j], nconn.omega[a][i][j].clone());
            }
            for b in 0..n {
                let d = frame.apply(&nconn.coeffs[a][i], n + b).map_err(in_block("anholonomy"))?;
                coeffs.set(&[n + a, n + b, i], d.scale_re(-1.0));
                coeffs.set(&[n + a, i, n + b], d);
            }
        }
    }
    let mut residual = 0.0f64;
    for f in probe_signomials(dim) {
        let ef: Vec<Signomial> = (0..dim)
            .map(|g| frame.apply(&f, g))
            .collect::<Result<_, _>>()
            .map_err(in_block("anholonomy"))?;
        for al in 0..dim {
            for be in 0..dim {
                let mut r = frame
                    .apply(&ef[be], al)
                    .map_err(in_block("anholonomy"))?
                    .sub(&frame.apply(&ef[al], be).map_err(in_block("anholonomy"))?);
                for g in 0..dim {
                    let w = coeffs.get(&[g, al, be]);
                    if !w.is_zero() {
                        r = r.sub(&w.mul(&ef[g]));
                    }
                }
                residual = residual.max(r.max_abs_at(points)?);
            }
        }
    }
    Ok(Anholonomy { coeffs, residual })
}

/// `T^γ_{αβ} = Γ^γ_{βα} − Γ^γ_{αβ} − w^γ_{αβ}`.
pub fn torsion(dconn: &DConnection, w: &Tensor) -> Tensor {
    let dim = dconn.gamma.dim();
    let mut t = Tensor::zeros(dim, 3, dim);
    for g in 0..dim {
        for a in 0..dim {
            for b in 0..dim {
                let v = dconn
                    .gamma
                    .get(&[g, b, a])
                    .sub(dconn.gamma.get(&[g, a, b]))
                    .sub(w.get(&[g, a, b]));
                t.set(&[g, a, b], v);
            }
        }
    }
    t
}

/// `R^τ_{φαβ} = e_α Γ^τ_{φβ} − e_β Γ^τ_{φα} + Γ^μ_{φβ} Γ^τ_{μα} − Γ^μ_{φα} Γ^τ_{μβ} − w^μ_{αβ} Γ^τ_{φμ}`.
pub fn curvature(dconn: &DConnection, w: &Tensor, frame: &FrameOps) -> Result<Tensor, GeometryError> {
    let gm = &dconn.gamma;
    let dim = gm.dim();
    // e_α Γ^τ_{φβ}
    let mut de = Tensor::zeros(dim, 4, dim);
    for (idx, s) in gm.nonzero() {
        for a in 0..dim {
            let d = frame.apply(s, a).map_err(in_block("curvature"))?;
            de.set(&[a, idx[0], idx[1], idx[2]], d);
        }
    }
    let mut r = Tensor::zeros(dim, 4, dim);
    for tau in 0..dim {
        for phi in 0..dim {
            for a in 0..dim {
                for b in 0..dim {
                    if a == b {
                        continue;
                    }
                    let mut acc = crate::expr::SigAccumulator::new(dim);
                    let one = Complex64::new(1.0, 0.0);
                    acc.add_scaled(de.get(&[a, tau, phi, b]), one);
                    acc.add_scaled(de.get(&[b, tau, phi, a]), -one);
                    for mu in 0..dim {
                        acc.add_product(gm.get(&[mu, phi, b]), gm.get(&[tau, mu, a]), one);
                        acc.add_product(gm.get(&[mu, phi, a]), gm.get(&[tau, mu, b]), -one);
                        acc.add_product(w.get(&[mu, a, b]), gm.get(&[tau, phi, mu]), -one);
                    }
                    r.set(&[tau, phi, a, b], acc.finish());
                }
            }
        }
    }
    Ok(r)
}

/// `θ = g_ij e^{n+i} ∧ e^j`, its inverse, `Λ = θ^{-1} − i g^{-1}`, and `J`.
pub fn almost_symplectic(metric: &MetricBlocks) -> AlmostSymplectic {
    let n = metric.diag.len();
    let dim = 2 * n;
    let zero = Signomial::zero(dim);
    let mut theta_lower = vec![vec![zero.clone(); dim]; dim];
    let mut theta_upper = vec![vec![zero.clone(); dim]; dim];
    let mut lambda = vec![vec![zero; dim]; dim];
    let mut j = vec![vec![0.0; dim]; dim];
    let minus_i = Complex64::new(0.0, -1.0);
    for i in 0..n {
        theta_lower[n + i][i] = metric.diag[i].clone();
        theta_lower[i][n + i] = metric.diag[i].scale_re(-1.0);
        theta_upper[i][n + i] = metric.inv_diag[i].clone();
        theta_upper[n + i][i] = metric.inv_diag[i].scale_re(-1.0);
        lambda[i][n + i] = theta_upper[i][n + i].clone();
        lambda[n + i][i] = theta_upper[n + i][i].clone();
        lambda[i][i] = metric.inv_diag[i].scale(minus_i);
        lambda[n + i][n + i] = metric.inv_diag[i].scale(minus_i);
        j[n + i][i] = -1.0;
        j[i][n + i] = 1.0;
    }
    AlmostSymplectic {
        theta_lower,
        theta_upper,
        lambda,
        j,
    }
}

/// `ω = (1/2)(∂_{y^i} L) e^i`, components on the horizontal co-frame.
pub fn lagrange_one_form(spec: &LagrangianSpec) -> Result<Vec<Signomial>, GeometryError> {
    let n = spec.ctx.n();
    (0..n)
        .map(|i| Ok(spec.lagrangian.caputo(n + i, &spec.ctx)?.scale_re(0.5)))
        .collect()
}

/// `{f, g} = θ^{αβ} e_α(f) e_β(g)`.
pub fn poisson_bracket(
    f: &Signomial,
    g: &Signomial,
    symp: &AlmostSymplectic,
    frame: &FrameOps,
) -> Result<Signomial, ExprError> {
    let dim = symp.theta_upper.len();
    let df: Vec<Signomial> = (0..dim).map(|a| frame.apply(f, a)).collect::<Result<_, _>>()?;
    let dg: Vec<Signomial> = (0..dim).map(|a| frame.apply(g, a)).collect::<Result<_, _>>()?;
    let mut acc = crate::expr::SigAccumulator::new(dim);
    for a in 0..dim {
        for b in 0..dim {
            let t = &symp.theta_upper[a][b];
            if t.is_zero() {
                continue;
            }
            acc.add_product(&t.mul(&df[a]), &dg[b], Complex64::new(1.0, 0.0));
        }
    }
    Ok(acc.finish())
}

/// Nijenhuis tensor of `J` realized through the frame brackets,
/// `N(X,Y) = [JX,JY] − J[JX,Y] − J[X,JY] − [X,Y]`, indexed `[γ][α][β]`.
pub fn nijenhuis(symp: &AlmostSymplectic, w: &Tensor) -> Tensor {
    let dim = w.dim();
    let j = &symp.j;
    let mut out = Tensor::zeros(dim, 3, dim);
    for g in 0..dim {
        for a in 0..dim {
            for b in 0..dim {
                let mut acc = crate::expr::SigAccumulator::new(dim);
                for mu in 0..dim {
                    for nu in 0..dim {
                        let c = j[mu][a] * j[nu][b];
                        if c != 0.0 {
                            acc.add_scaled(w.get(&[g, mu, nu]), Complex64::new(c, 0.0));
                        }
                    }
                }
                for s in 0..dim {
                    if j[g][s] == 0.0 {
                        continue;
                    }
                    for mu in 0..dim {
                        let c1 = j[g][s] * j[mu][a];
                        if c1 != 0.0 {
                            acc.add_scaled(w.get(&[s, mu, b]), Complex64::new(-c1, 0.0));
                        }
                        let c2 = j[g][s] * j[mu][b];
                        if c2 != 0.0 {
                            acc.add_scaled(w.get(&[s, a, mu]), Complex64::new(-c2, 0.0));
                        }
                    }
                }
                acc.add_scaled(w.get(&[g, a, b]), Complex64::new(-1.0, 0.0));
                out.set(&[g, a, b], acc.finish());
            }
        }
    }
    out
}

/// Max at sample points of the Nijenhuis components minus `4 T^γ_{αβ}`.
pub fn nijenhuis_residual(geo: &Geometry) -> Result<f64, ExprError> {
    let nij = nijenhuis(&geo.symp, &geo.anholonomy.coeffs);
    let dim = geo.dim();
    let mut m = 0.0f64;
    for g in 0..dim {
        for a in 0..dim {
            for b in 0..dim {
                let d = nij.get(&[g, a, b]).sub(&geo.torsion.get(&[g, a, b]).scale_re(4.0));
                m = m.max(d.max_abs_at(&geo.spec.sample_points)?);
            }
        }
    }
    Ok(m)
}

/// Exact term-level checks of the almost-Kähler structure. Each entry is the
/// number of offending components (0 means the identity holds term-wise).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompatibilityReport {
    pub metric_compat: usize,
    pub j_compat: usize,
    pub metric_inverse: usize,
    pub theta_inverse: usize,
    pub j_squared: usize,
    pub theta_gj: usize,
    pub torsion_hh: usize,
    pub torsion_vv: usize,
    pub curvature_antisym: usize,
}

fn is_identity_entry(s: &Signomial, diagonal: bool) -> bool {
    if !diagonal {
        return s.is_zero();
    }
    match s.as_constant() {
        Some(c) => (c - Complex64::new(1.0, 0.0)).norm() <= 4.0 * f64::EPSILON,
        None => false,
    }
}

pub fn compatibility(geo: &Geometry) -> Result<CompatibilityReport, ExprError> {
    let n = geo.n();
    let dim = geo.dim();
    let gm = &geo.dconn.gamma;
    let mut rep = CompatibilityReport::default();
    let one = Complex64::new(1.0, 0.0);
    // D_γ g_{αβ} = e_γ g_{αβ} − Γ^μ_{αγ} g_{μβ} − Γ^μ_{βγ} g_{αμ}
    for c in 0..dim {
        for a in 0..dim {
            for b in 0..dim {
                let mut acc = crate::expr::SigAccumulator::new(dim);
                acc.add_scaled(&geo.frame.apply(&geo.metric.full(a, b), c)?, one);
                for mu in 0..dim {
                    acc.add_product(gm.get(&[mu, a, c]), &geo.metric.full(mu, b), -one);
                    acc.add_product(gm.get(&[mu, b, c]), &geo.metric.full(a, mu), -one);
                }
                if !acc.finish().is_zero() {
                    rep.metric_compat += 1;
                }
            }
        }
    }
    // (D_γ J)^μ_α = Γ^μ_{νγ} J^ν_α − J^μ_ν Γ^ν_{αγ}
    let j = &geo.symp.j;
    for c in 0..dim {
        for mu in 0..dim {
            for a in 0..dim {
                let mut acc = crate::expr::SigAccumulator::new(dim);
                for nu in 0..dim {
                    if j[nu][a] != 0.0 {
                        acc.add_scaled(gm.get(&[mu, nu, c]), Complex64::new(j[nu][a], 0.0));
                    }
                    if j[mu][nu] != 0.0 {
                        acc.add_scaled(gm.get(&[nu, a, c]), Complex64::new(-j[mu][nu], 0.0));
                    }
                }
                if !acc.finish().is_zero() {
                    rep.j_compat += 1;
                }
            }
        }
    }
    for i in 0..n {
        if !is_identity_entry(&geo.metric.diag[i].mul(&geo.metric.inv_diag[i]), true) {
            rep.metric_inverse += 1;
        }
    }
    for a in 0..dim {
        for b in 0..dim {
            let mut acc = crate::expr::SigAccumulator::new(dim);
            for mu in 0..dim {
                acc.add_product(&geo.symp.theta_lower[a][mu], &geo.symp.theta_upper[mu][b], one);
            }
            if !is_identity_entry(&acc.finish(), a == b) {
                rep.theta_inverse += 1;
            }
            let jj: f64 = (0..dim).map(|mu| j[a][mu] * j[mu][b]).sum();
            if jj != if a == b { -1.0 } else { 0.0 } {
                rep.j_squared += 1;
            }
            // θ(e_a, e_b) = g(J e_a, e_b) = J^μ_a g_{μb}
            let mut acc = crate::expr::SigAccumulator::new(dim);
            acc.add_scaled(&geo.symp.theta_lower[a][b], one);
            for mu in 0..dim {
                if j[mu][a] != 0.0 {
                    acc.add_scaled(&geo.metric.full(mu, b), Complex64::new(-j[mu][a], 0.0));
                }
            }
            if !acc.finish().is_zero() {
                rep.theta_gj += 1;
            }
        }
    }
    for g in 0..n {
        for a in 0..n {
            for b in 0..n {
                if !geo.torsion.get(&[g, a, b]).is_zero() {
                    rep.torsion_hh += 1;
                }
                if !geo.torsion.get(&[n + g, n + a, n + b]).is_zero() {
                    rep.torsion_vv += 1;
                }
            }
        }
    }
    let r = &geo.curvature;
    for t in 0..dim {
        for p in 0..dim {
            for a in 0..dim {
                for b in 0..dim {
                    if !r.get(&[t, p, a, b]).add(r.get(&[t, p, b, a])).is_zero() {
                        rep.curvature_antisym += 1;
                    }
                }
            }
        }
    }
    Ok(rep)
}

/// Max at sample points of `θ_{φτ} R^τ_{γαβ} − θ_{γτ} R^τ_{φαβ}`.
pub fn acp_residual(geo: &Geometry) -> Result<f64, ExprError> {
    let dim = geo.dim();
    let th = &geo.symp.theta_lower;
    let r = &geo.curvature;
    let one = Complex64::new(1.0, 0.0);
    let mut m = 0.0f64;
    for phi in 0..dim {
        for g in 0..dim {
            for a in 0..dim {
                for b in (a + 1)..dim {
                    let mut acc = crate::expr::SigAccumulator::new(dim);
                    for t in 0..dim {
                        acc.add_product(&th[phi][t], r.get(&[t, g, a, b]), one);
                        acc.add_product(&th[g][t], r.get(&[t, phi, a, b]), -one);
                    }
                    m = m.max(acc.finish().max_abs_at(&geo.spec.sample_points)?);
                }
            }
        }
    }
    Ok(m)
}

/// Leibniz defect `{f, gh} − {f,g} h − g {f,h}` at sample points.
pub fn poisson_leibniz_residual(geo: &Geometry, f: &Signomial, g: &Signomial, h: &Signomial) -> Result<f64, ExprError> {
    let lhs = geo.poisson_bracket(f, &g.mul(h))?;
    let rhs = geo
        .poisson_bracket(f, g)?
        .mul(h)
        .add(&g.mul(&geo.poisson_bracket(f, h)?));
    lhs.sub(&rhs).max_abs_at(&geo.spec.sample_points)
}

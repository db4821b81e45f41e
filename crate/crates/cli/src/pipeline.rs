//! Geometry → Wick → Fedosov → star → Chern, with tiered invariant checks.

use fracquant::caputo_oracle::power_rule_residual;
use fracquant::chern::chern_layer;
use fracquant::fedosov::{
    derivation_residual, hodge_residuals, probe_set, random_elements, v_coefficients, Fedosov, FedosovState,
};
use fracquant::geometry::{self, DomainPolicy, Geometry, LagrangianSpec};
use fracquant::wick::{WickAlgebra, WickElement};
use fracquant::Signomial;
use num_complex::Complex64;

use crate::checks::{CheckName, Tier};
use crate::config::{Mode, RunSpec};
use crate::report::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Caputo,
    Algebra,
    Geometry,
    Fedosov,
    Star,
    Chern,
}

impl Stage {
    pub const ALL: &'static [Stage] = &[
        Stage::Caputo,
        Stage::Algebra,
        Stage::Geometry,
        Stage::Fedosov,
        Stage::Star,
        Stage::Chern,
    ];
}

struct Recorder<'a> {
    spec: &'a RunSpec,
    out: Vec<CheckResult>,
}

impl Recorder<'_> {
    fn record(&mut self, name: CheckName, value: f64) {
        let threshold = self
            .spec
            .tolerances
            .get(&name)
            .copied()
            .unwrap_or_else(|| name.default_threshold());
        let asserted = match name.tier() {
            Tier::Exact => true,
            Tier::Integer => self.spec.alpha == 1.0 || self.spec.mode == Mode::Strict,
            Tier::Report => false,
        };
        let status = if !asserted {
            CheckStatus::Diagnostic
        } else if value.is_finite() && value <= threshold {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        self.out.push(CheckResult {
            name: name.as_str().to_string(),
            value: value.is_finite().then_some(value),
            threshold: threshold.is_finite().then_some(threshold),
            status,
        });
    }
}

/// Runs the selected stages. Domain errors stop the run and leave a partial
/// report with status `domain_error`.
pub fn run_pipeline(spec: &RunSpec, stages: &[Stage]) -> Report {
    let mut report = Report {
        provenance: Provenance {
            config_sha256: spec.config_hash.clone(),
            seed: spec.seed,
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        run: RunInfo {
            alpha: spec.alpha,
            n: spec.n,
            mode: spec.mode.as_str().to_string(),
            truncation_order: spec.truncation_order,
        },
        status: RunStatus::Ok,
        error: None,
        geometry: None,
        fedosov: None,
        star: None,
        chern: None,
        checks: Vec::new(),
        continuation_terms: 0,
        excluded_terms: 0,
    };
    let mut rec = Recorder { spec, out: Vec::new() };
    let result = execute(spec, stages, &mut rec, &mut report);
    report.checks = rec.out;
    if let Err(e) = result {
        report.status = RunStatus::DomainError;
        report.error = Some(e);
    } else if report.checks.iter().any(|c| c.status == CheckStatus::Fail) {
        report.status = RunStatus::InvariantFailure;
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .map(|c| c.name.as_str())
            .collect();
        report.error = Some(format!("failed checks: {}", failed.join(", ")));
    }
    report
}

fn stage_err(stage: &str) -> impl Fn(&dyn std::fmt::Display) -> String + '_ {
    move |e| format!("{stage}: {e}")
}

fn max_rel(a: f64, scale: f64) -> f64 {
    a / scale.max(1.0)
}

fn execute(spec: &RunSpec, stages: &[Stage], rec: &mut Recorder, report: &mut Report) -> Result<(), String> {
    let has = |s: Stage| stages.contains(&s);
    if has(Stage::Caputo) {
        caputo_stage(spec, rec);
    }
    if stages.iter().all(|&s| s == Stage::Caputo) {
        return Ok(());
    }

    let policy = match spec.mode {
        Mode::Strict => DomainPolicy::Strict,
        Mode::Diagnostic => DomainPolicy::Exclude,
    };
    let lspec = LagrangianSpec::new(spec.lagrangian.clone(), spec.ctx(), spec.sample_points.clone())
        .map_err(|e| stage_err("geometry")(&e))?
        .with_policy(policy);
    let geo = Geometry::build(lspec).map_err(|e| stage_err("geometry")(&e))?;
    report.geometry = Some(geometry_summary(&geo));
    let finish = |report: &mut Report, geo: &Geometry| {
        report.continuation_terms = geo.frame.continuation_count();
        report.excluded_terms = geo.frame.excluded_count();
    };

    let r = (|| {
        if has(Stage::Algebra) {
            algebra_stage(spec, &geo, rec).map_err(|e| stage_err("algebra")(&e))?;
        }
        if has(Stage::Geometry) {
            geometry_stage(spec, &geo, rec).map_err(|e| stage_err("geometry")(&e))?;
        }
        if has(Stage::Fedosov) || has(Stage::Star) {
            let fed = Fedosov::new(&geo);
            let mut state = fed
                .solve_r(spec.truncation_order, None)
                .map_err(|e| stage_err("fedosov")(&e))?;
            report.fedosov = Some(FedosovSummary {
                residuals: state
                    .residuals
                    .iter()
                    .map(|(&degree, &value)| DegreeValue { degree, value })
                    .collect(),
                r_terms: state
                    .r
                    .iter()
                    .map(|(&degree, r)| DegreeValue {
                        degree,
                        value: r.len() as f64,
                    })
                    .collect(),
            });
            if has(Stage::Fedosov) {
                fedosov_stage(spec, &fed, &mut state, rec).map_err(|e| stage_err("fedosov")(&e))?;
            }
            if has(Stage::Star) {
                report.star = Some(star_stage(spec, &fed, &mut state, rec).map_err(|e| stage_err("star")(&e))?);
            }
        }
        if has(Stage::Chern) {
            report.chern = Some(chern_stage(spec, &geo, rec).map_err(|e| stage_err("chern")(&e))?);
        }
        Ok(())
    })();
    finish(report, &geo);
    r
}

fn caputo_stage(spec: &RunSpec, rec: &mut Recorder) {
    let alphas: Vec<f64> = if spec.alpha < 1.0 {
        vec![spec.alpha]
    } else {
        vec![0.3, 0.5, 0.9]
    };
    let mut worst = 0.0f64;
    for &a in &alphas {
        for p in [0.5, 1.0, 2.0, 3.7] {
            for x in [0.5, 1.0, 2.0] {
                let r = power_rule_residual(p, a, x).unwrap_or(f64::NAN);
                worst = if r.is_nan() { f64::NAN } else { worst.max(r) };
            }
        }
    }
    rec.record(CheckName::CaputoOracle, worst);
}

/// Splits into the parts of even and odd form degree.
fn form_parity_part(a: &WickElement, odd: bool) -> WickElement {
    a.filter(|k| (k.deg_a() % 2 == 1) == odd)
}

fn algebra_stage(spec: &RunSpec, geo: &Geometry, rec: &mut Recorder) -> Result<(), fracquant::ExprError> {
    let dim = geo.dim();
    let pts = &geo.spec.sample_points;
    let w = WickAlgebra::new(geo.symp.lambda.clone());
    let (mut d2, mut hodge) = (0.0f64, 0.0f64);
    for a in random_elements(dim, 100, 4, 2, spec.seed) {
        let (x, y) = hodge_residuals(&a, pts)?;
        let s = a.max_abs_at(pts)?;
        d2 = d2.max(max_rel(x, s));
        hodge = hodge.max(max_rel(y, s));
    }
    rec.record(CheckName::DeltaSquared, d2);
    rec.record(CheckName::HodgeIdentity, hodge);

    let els = random_elements(dim, 200, 3, 1, spec.seed.wrapping_add(1));
    let mut der = 0.0f64;
    for pair in els.chunks(2) {
        let r = derivation_residual(&w, &pair[0], &pair[1], pts)?;
        der = der.max(max_rel(r, w.product(&pair[0], &pair[1]).max_abs_at(pts)?));
    }
    rec.record(CheckName::DeltaDerivation, der);

    let els = random_elements(dim, 300, 3, 1, spec.seed.wrapping_add(2));
    let (mut assoc, mut jacobi) = (0.0f64, 0.0f64);
    for (i, t) in els.chunks(3).enumerate() {
        let l = w.product(&w.product(&t[0], &t[1]), &t[2]);
        let r = w.product(&t[0], &w.product(&t[1], &t[2]));
        assoc = assoc.max(max_rel(l.sub(&r).max_abs_at(pts)?, l.max_abs_at(pts)?));

        let a = form_parity_part(&t[0], i % 2 == 1);
        let b = form_parity_part(&t[1], i % 3 == 1);
        let c = t[2].clone();
        let pa = a.form_degree().unwrap_or(0);
        let pb = b.form_degree().unwrap_or(0);
        let sign = if (pa * pb) % 2 == 1 { -1.0 } else { 1.0 };
        let lhs = w.commutator(&a, &w.commutator(&b, &c));
        let rhs = w
            .commutator(&w.commutator(&a, &b), &c)
            .add(&w.commutator(&b, &w.commutator(&a, &c)).scale(Complex64::new(sign, 0.0)));
        jacobi = jacobi.max(max_rel(lhs.sub(&rhs).max_abs_at(pts)?, lhs.max_abs_at(pts)?));
    }
    rec.record(CheckName::WickAssociativity, assoc);
    rec.record(CheckName::GradedJacobi, jacobi);
    Ok(())
}

fn geometry_summary(geo: &Geometry) -> GeometrySummary {
    let n = geo.n();
    GeometrySummary {
        metric: geo
            .metric
            .diag
            .iter()
            .enumerate()
            .map(|(i, g)| entry(format!("g[{i},{i}]"), g))
            .collect(),
        semi_spray: geo
            .nconn
            .semi_spray
            .iter()
            .enumerate()
            .map(|(k, g)| entry(format!("G[{k}]"), g))
            .collect(),
        n_connection: (0..n)
            .flat_map(|a| (0..n).map(move |j| (a, j)))
            .filter(|&(a, j)| !geo.nconn.coeffs[a][j].is_zero())
            .map(|(a, j)| entry(format!("N[{a},{j}]"), &geo.nconn.coeffs[a][j]))
            .collect(),
        torsion: tensor_entries("T", &geo.torsion),
        curvature: tensor_entries("R", &geo.curvature),
    }
}

fn geometry_stage(spec: &RunSpec, geo: &Geometry, rec: &mut Recorder) -> Result<(), fracquant::ExprError> {
    let c = geometry::compatibility(geo)?;
    rec.record(CheckName::MetricCompatibility, c.metric_compat as f64);
    rec.record(CheckName::JCompatibility, c.j_compat as f64);
    rec.record(CheckName::MetricInverse, c.metric_inverse as f64);
    rec.record(CheckName::ThetaInverse, c.theta_inverse as f64);
    rec.record(CheckName::JSquared, c.j_squared as f64);
    rec.record(CheckName::ThetaEqualsGj, c.theta_gj as f64);
    rec.record(CheckName::PureTorsionBlocks, (c.torsion_hh + c.torsion_vv) as f64);
    rec.record(CheckName::CurvatureAntisymmetry, c.curvature_antisym as f64);
    rec.record(CheckName::Anholonomy, geo.anholonomy.residual);
    rec.record(CheckName::CurvatureSymplectic, geometry::acp_residual(geo)?);
    let h = spec.f.mul(&spec.g);
    rec.record(
        CheckName::PoissonLeibniz,
        geometry::poisson_leibniz_residual(geo, &spec.f, &spec.g, &h)?
            .max(geometry::poisson_leibniz_residual(geo, &spec.g, &h, &spec.f)?),
    );
    rec.record(CheckName::Nijenhuis, geometry::nijenhuis_residual(geo)?);
    Ok(())
}

fn fedosov_stage(
    spec: &RunSpec,
    fed: &Fedosov,
    state: &mut FedosovState,
    rec: &mut Recorder,
) -> Result<(), fracquant::fedosov::FedosovError> {
    let pts = fed.points();
    let worst = state.residuals.values().fold(0.0f64, |m, &r| if r.is_nan() { f64::NAN } else { m.max(r) });
    rec.record(CheckName::FedosovResidual, worst);
    let probes = probe_set(fed.dim(), &[spec.f.clone(), spec.g.clone()], spec.seed);
    let ops = fed.operator_residuals(&probes, state, 6)?;
    rec.record(CheckName::ComfTorsion, ops.comf_torsion);
    rec.record(CheckName::ComfCurvature, ops.comf_curvature);
    rec.record(CheckName::DeltaTorsion, ops.delta_torsion);
    rec.record(CheckName::Bianchi, ops.bianchi);
    rec.record(CheckName::Flatness, ops.flatness);

    let k = spec.truncation_order;
    let mut section = 0.0f64;
    let mut flat = 0.0f64;
    for f in [&spec.f, &spec.g] {
        let t = fed.tau_lift(&WickElement::scalar(f.clone()), state, k)?;
        let s = fracquant::fedosov::sigma(&t);
        if s != WickElement::scalar(f.clone()) {
            section = section.max(s.sub(&WickElement::scalar(f.clone())).max_abs_at(pts)?.max(f64::MIN_POSITIVE));
        }
        flat = flat.max(fed.lift_flatness_residual(f, state, k)?);
    }
    rec.record(CheckName::LiftSection, section);
    rec.record(CheckName::LiftFlatness, flat);
    rec.record(CheckName::Gauge, ops.gauge);
    rec.record(CheckName::DivisionDebris, ops.debris.max(state.debris));
    Ok(())
}

/// Distance between two coefficient lists: 0 when structurally equal,
/// otherwise the largest difference at the sample points (at least the
/// smallest positive float, so exact checks fail).
fn coefficient_distance(a: &[Signomial], b: &[Signomial], pts: &[Vec<f64>]) -> Result<f64, fracquant::ExprError> {
    let mut d = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        if x != y {
            d = d.max(x.sub(y).max_abs_at(pts)?.max(f64::MIN_POSITIVE));
        }
    }
    Ok(d)
}

fn star_stage(
    spec: &RunSpec,
    fed: &Fedosov,
    state: &mut FedosovState,
    rec: &mut Recorder,
) -> Result<StarSummary, fracquant::fedosov::FedosovError> {
    let k = spec.truncation_order;
    let pts = fed.points();
    let dim = fed.dim();
    let (f, g) = (&spec.f, &spec.g);
    let fg = fed.star_coefficients(f, g, state, k)?;
    let gf = fed.star_coefficients(g, f, state, k)?;
    rec.record(CheckName::StarC0, coefficient_distance(&fg[..1], &[f.mul(g)], pts)?);

    let pb = fed.geometry().poisson_bracket(f, g)?;
    let comm = fg[1].sub(&gf[1]).sub(&pb.scale(Complex64::new(0.0, 1.0)));
    rec.record(CheckName::StarCommutator, comm.max_abs_at(pts)?);

    let one = Signomial::one(dim);
    let mut expected = vec![Signomial::zero(dim); k as usize + 1];
    expected[0] = f.clone();
    let left = fed.star_coefficients(&one, f, state, k)?;
    let right = fed.star_coefficients(f, &one, state, k)?;
    rec.record(
        CheckName::StarUnit,
        coefficient_distance(&left, &expected, pts)?.max(coefficient_distance(&right, &expected, pts)?),
    );

    let (ef, eg) = (WickElement::scalar(f.clone()), WickElement::scalar(g.clone()));
    let l = fed.star(&fed.star(&ef, &eg, state, k)?, &ef, state, k)?;
    let r = fed.star(&ef, &fed.star(&eg, &ef, state, k)?, state, k)?;
    let diff = v_coefficients(&l.sub(&r), k)
        .iter()
        .try_fold(0.0f64, |m, c| c.max_abs_at(pts).map(|x| m.max(x)))?;
    rec.record(CheckName::StarAssociativity, diff);

    Ok(StarSummary {
        f: terms_of(f),
        g: terms_of(g),
        coefficients: fg
            .iter()
            .enumerate()
            .map(|(r, c)| StarCoefficient {
                r: r as u32,
                terms: terms_of(c),
            })
            .collect(),
    })
}

fn chern_stage(spec: &RunSpec, geo: &Geometry, rec: &mut Recorder) -> Result<ChernSummary, fracquant::ExprError> {
    let layer = chern_layer(geo, &[spec.f.clone(), spec.g.clone()])?;
    let r = &layer.residuals;
    rec.record(CheckName::ClosedGamma, r.closed_gamma);
    rec.record(CheckName::ClosedLambda, r.closed_lambda);
    rec.record(CheckName::ExteriorDSquared, r.d_squared);
    rec.record(CheckName::ChernAssembly, r.assembly);
    rec.record(CheckName::ThetaExact, r.theta_exact);
    Ok(ChernSummary {
        gamma: form_entries("gamma", &layer.gamma),
        mu: form_entries("mu", &layer.lemma.mu),
        lambda: form_entries("lambda", &layer.lemma.lambda),
        kappa: form_entries("kappa", &layer.lemma.kappa),
        c0_representative: form_entries("c0", &layer.c0),
        note: "representative 2-form -(1/2i) gamma only; the cohomology class is not computed".into(),
    })
}

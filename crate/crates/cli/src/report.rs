//! Machine-readable run report and its JSON / text renderings.

use std::fmt::Write as _;

use fracquant::chern::AdaptedForm;
use fracquant::geometry::Tensor;
use fracquant::Signomial;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub re: f64,
    pub im: f64,
    pub exp: Vec<f64>,
}

pub fn terms_of(s: &Signomial) -> Vec<Term> {
    s.terms()
        .map(|(e, c)| Term {
            re: c.re,
            im: c.im,
            exp: e.to_vec(),
        })
        .collect()
}

/// A labeled component (tensor entry, form component) as a term list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    pub terms: Vec<Term>,
}

pub fn entry(name: impl Into<String>, s: &Signomial) -> Entry {
    Entry {
        name: name.into(),
        terms: terms_of(s),
    }
}

pub fn tensor_entries(label: &str, t: &Tensor) -> Vec<Entry> {
    t.nonzero()
        .into_iter()
        .map(|(idx, s)| {
            let ix: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            entry(format!("{label}[{}]", ix.join(",")), s)
        })
        .collect()
}

pub fn form_entries(label: &str, f: &AdaptedForm) -> Vec<Entry> {
    f.components()
        .map(|(labels, s)| {
            let ix: Vec<String> = labels.iter().map(|i| i.to_string()).collect();
            entry(format!("{label}[{}]", ix.join(",")), s)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub engine_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub alpha: f64,
    pub n: usize,
    pub mode: String,
    pub truncation_order: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub metric: Vec<Entry>,
    pub semi_spray: Vec<Entry>,
    pub n_connection: Vec<Entry>,
    pub torsion: Vec<Entry>,
    pub curvature: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeValue {
    pub degree: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedosovSummary {
    /// defining-equation mismatch per total degree
    pub residuals: Vec<DegreeValue>,
    /// number of Wick terms of `r` per total degree
    pub r_terms: Vec<DegreeValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarCoefficient {
    pub r: u32,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarSummary {
    pub f: Vec<Term>,
    pub g: Vec<Term>,
    pub coefficients: Vec<StarCoefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernSummary {
    pub gamma: Vec<Entry>,
    pub mu: Vec<Entry>,
    pub lambda: Vec<Entry>,
    pub kappa: Vec<Entry>,
    /// representative form of the zero-degree class coefficient
    pub c0_representative: Vec<Entry>,
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Diagnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// `None` when the value was not finite
    pub value: Option<f64>,
    /// `None` for report-only checks
    pub threshold: Option<f64>,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    InvariantFailure,
    DomainError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub provenance: Provenance,
    pub run: RunInfo,
    pub status: RunStatus,
    pub error: Option<String>,
    pub geometry: Option<GeometrySummary>,
    pub fedosov: Option<FedosovSummary>,
    pub star: Option<StarSummary>,
    pub chern: Option<ChernSummary>,
    pub checks: Vec<CheckResult>,
    /// terms differentiated through the analytic continuation of the power rule
    pub continuation_terms: usize,
    /// terms left out of a derivative because of a Γ pole (diagnostic mode)
    pub excluded_terms: usize,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            RunStatus::Ok => 0,
            RunStatus::InvariantFailure => 1,
            RunStatus::DomainError => 2,
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let status = match self.status {
            RunStatus::Ok => "ok",
            RunStatus::InvariantFailure => "invariant failure",
            RunStatus::DomainError => "domain error",
        };
        let _ = writeln!(
            s,
            "alpha={} n={} mode={} K={} status={status}",
            self.run.alpha, self.run.n, self.run.mode, self.run.truncation_order
        );
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error: {e}");
        }
        let _ = writeln!(s, "config sha256 {} seed {}", self.provenance.config_sha256, self.provenance.seed);
        if let Some(f) = &self.fedosov {
            for d in &f.residuals {
                let _ = writeln!(s, "fedosov residual deg {:>2}: {:.3e}", d.degree, d.value);
            }
        }
        if let Some(st) = &self.star {
            for c in &st.coefficients {
                let _ = writeln!(s, "C_{}: {} terms", c.r, c.terms.len());
            }
        }
        let _ = writeln!(
            s,
            "continuation terms {}, excluded terms {}",
            self.continuation_terms, self.excluded_terms
        );
        for c in &self.checks {
            let value = c.value.map_or("n/a".to_string(), |v| format!("{v:.3e}"));
            let threshold = c.threshold.map_or("-".to_string(), |t| format!("{t:.1e}"));
            let tag = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Diagnostic => "DIAG",
            };
            let _ = writeln!(s, "{tag} {:<24} {value:>10} (threshold {threshold})", c.name);
        }
        s
    }
}

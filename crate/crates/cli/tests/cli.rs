use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fracquant_cli::checks::{CheckName, Tier};
use fracquant_cli::config::parse_config_bytes;
use fracquant_cli::pipeline::{run_pipeline, Stage};
use fracquant_cli::report::{CheckStatus, Report, RunStatus};

const FLAT: &str = r#"{
  "alpha": 1, "n": 1,
  "lagrangian": [{"c": 1, "exp": [0, 2]}],
  "truncation_order": 3,
  "observables": {"f": [{"c": 1, "exp": [1, 0]}], "g": [{"c": 1, "exp": [0, 1]}]},
  "seed": 4
}"#;

const FRACTIONAL: &str = r#"{
  "alpha": 0.5, "n": 1,
  "lagrangian": [{"c": 1, "exp": [2, 2]}],
  "truncation_order": 3,
  "observables": {"f": [{"c": 1, "exp": [1, 0]}], "g": [{"c": 1, "exp": [1, 1]}]},
  "mode": "diagnostic"
}"#;

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn fracquant(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracquant")).args(args).output().unwrap()
}

fn report_of(out: &Output) -> Report {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn report_json_round_trips() {
    let spec = parse_config_bytes(FRACTIONAL.as_bytes()).unwrap();
    let report = run_pipeline(&spec, Stage::ALL);
    let back: Report = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.to_json(), report.to_json());
}

#[test]
fn every_check_appears_once_in_a_full_run() {
    let spec = parse_config_bytes(FLAT.as_bytes()).unwrap();
    let report = run_pipeline(&spec, Stage::ALL);
    assert_eq!(report.status, RunStatus::Ok, "{:?}", report.error);
    for c in CheckName::ALL {
        let hits = report.checks.iter().filter(|r| r.name == c.as_str()).count();
        assert_eq!(hits, 1, "{c}");
    }
}

#[test]
fn fractional_diagnostic_tiers() {
    let spec = parse_config_bytes(FRACTIONAL.as_bytes()).unwrap();
    let report = run_pipeline(&spec, Stage::ALL);
    assert_eq!(report.exit_code(), 0, "{:?}", report.error);
    assert!(report.continuation_terms > 0);
    for r in &report.checks {
        let tier = r.name.parse::<CheckName>().unwrap().tier();
        match tier {
            Tier::Exact => assert_eq!(r.status, CheckStatus::Pass, "{}", r.name),
            Tier::Integer | Tier::Report => assert_eq!(r.status, CheckStatus::Diagnostic, "{}", r.name),
        }
    }
    // d^2 = 0 genuinely fails for the term-wise Caputo frame
    assert!(report.check("exterior_d_squared").unwrap().value.unwrap() > 1e-3);
}

#[test]
fn tolerance_override_can_fail_an_exact_check() {
    let raw = FLAT.replace(r#""seed": 4"#, r#""seed": 4, "tolerances": {"caputo_oracle": 1e-300}"#);
    let spec = parse_config_bytes(raw.as_bytes()).unwrap();
    let report = run_pipeline(&spec, &[Stage::Caputo]);
    assert_eq!(report.check("caputo_oracle").unwrap().status, CheckStatus::Fail);
    assert_eq!(report.exit_code(), 1);
}

#[test]
fn binary_output_is_deterministic_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "flat.json", FRACTIONAL);
    let cfg = cfg.to_str().unwrap();
    for format in ["json", "text"] {
        let a = fracquant(&["run", "--config", cfg, "--format", format]);
        let b = fracquant(&["run", "--config", cfg, "--format", format]);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout);
    }
    let out = dir.path().join("report.json");
    let o = fracquant(&["run", "--config", cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let stdout = fracquant(&["run", "--config", cfg]).stdout;
    assert_eq!(std::fs::read(&out).unwrap(), stdout);
}

#[test]
fn provenance_carries_hash_seed_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "flat.json", FLAT);
    let r = report_of(&fracquant(&["run", "--config", cfg.to_str().unwrap()]));
    assert_eq!(r.provenance.seed, 4);
    assert_eq!(r.provenance.config_sha256.len(), 64);
    assert_eq!(r.provenance.engine_version, env!("CARGO_PKG_VERSION"));
    assert_eq!(r.provenance.config_sha256, parse_config_bytes(FLAT.as_bytes()).unwrap().config_hash);
}

#[test]
fn check_subcommand_runs_one_suite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "flat.json", FLAT);
    let cfg = cfg.to_str().unwrap();
    let r = report_of(&fracquant(&["check", "caputo", "--config", cfg]));
    let names: Vec<&str> = r.checks.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["caputo_oracle"]);
    assert!(r.geometry.is_none());

    let r = report_of(&fracquant(&["check", "fedosov", "--config", cfg]));
    assert!(r.fedosov.is_some() && r.star.is_none());
    assert!(r.check("flatness").is_some() && r.check("delta_squared").is_none());
}

#[test]
fn star_subcommand_reports_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "flat.json", FLAT);
    let o = fracquant(&["star", "--config", cfg.to_str().unwrap(), "--order", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report_of(&o);
    assert_eq!(r.run.truncation_order, 5);
    let star = r.star.unwrap();
    assert_eq!(star.coefficients.len(), 6);
    // x*y in the flat case: C_0 = xy, C_1 = i/2, nothing beyond
    assert_eq!(star.coefficients[1].terms.len(), 1);
    assert_eq!(star.coefficients[1].terms[0].im, 0.5);
    assert!(star.coefficients[2..].iter().all(|c| c.terms.is_empty()));
}

#[test]
fn usage_and_config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "flat.json", FLAT);
    let cfg = cfg.to_str().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"alpha": 1, "n": 1, "extra": true}"#);
    let cases: [&[&str]; 5] = [
        &["run", "--config", bad.to_str().unwrap()],
        &["run", "--config", "/no/such/config.json"],
        &["run", "--config", cfg, "--order", "1"],
        &["check", "nothing", "--config", cfg],
        &["run"],
    ];
    for args in cases {
        let o = fracquant(args);
        assert_eq!(o.status.code(), Some(3), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(fracquant(&["--help"]).status.code(), Some(0));
}

#[test]
fn domain_error_leaves_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let raw = FRACTIONAL.replace("diagnostic", "strict");
    let cfg = write(dir.path(), "strict.json", &raw);
    let o = fracquant(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let r = report_of(&o);
    assert_eq!(r.status, RunStatus::DomainError);
    assert!(r.error.as_deref().unwrap().contains("fedosov"));
    assert!(r.geometry.is_some() && r.star.is_none());
}

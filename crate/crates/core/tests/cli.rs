use std::fs;
use std::path::{Path, PathBuf};

use robinflux::cli::manifest::{sha256_hex, RunManifest};
use robinflux::cli::{main_with_args, EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_PASS};
use tempfile::TempDir;

const BALL: &str = r#"{"schema_version": 1, "domain": {"kind": "ball", "radius": 4, "h": 0.5}}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(command: &str, config: Option<&Path>, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec!["robinflux".to_string(), command.to_string()];
    if let Some(c) = config {
        args.extend(["--config".into(), c.display().to_string()]);
    }
    args.extend(["--out".into(), out.display().to_string()]);
    args.extend(extra.iter().map(|s| s.to_string()));
    main_with_args(args)
}

fn flux_config() -> String {
    r#"{"schema_version": 1, "seed": 3,
        "domain": {"kind": "ball", "radius": 4, "h": 0.5},
        "flux": {"a_grid": {"min": 1e-4, "max": 100, "count": 7}, "oracle_tolerance": null}}"#
        .to_string()
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "bad.json", "{\"schema_version\": 1, \"domain\": ");
    let out = dir.path().join("out");
    assert_eq!(run("gen-domain", Some(&config), &out, &[]), EXIT_ERROR);
    assert!(!out.exists());

    let unknown = write_config(dir.path(), "unknown.json", &BALL.replace("\"h\": 0.5", "\"h\": 0.5, \"hh\": 1"));
    assert_eq!(run("gen-domain", Some(&unknown), &out, &[]), EXIT_ERROR);
    assert_eq!(run("gen-domain", None, &out, &[]), EXIT_ERROR);
    assert!(!out.exists());
}

#[test]
fn invalid_arguments() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "ball.json", BALL);
    let out = dir.path().join("out");
    assert_eq!(run("gen-domain", Some(&config), &out, &["--accept-const", "0.5"]), EXIT_ERROR);
    assert_eq!(run("no-such-command", Some(&config), &out, &[]), EXIT_ERROR);
    assert_eq!(main_with_args(["robinflux", "--help"]), EXIT_PASS);
    assert!(!out.exists());
}

#[test]
fn gen_domain_writes_hashed_artifacts() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "ball.json", BALL);
    let out = dir.path().join("out");
    assert_eq!(run("gen-domain", Some(&config), &out, &[]), EXIT_PASS);

    let manifest = RunManifest::load(&out.join("manifest-gen-domain.json")).unwrap();
    assert!(manifest.passed);
    assert_eq!(manifest.command, "gen-domain");
    assert!(manifest.domain_sha256.is_some());
    assert!(manifest.artifacts.len() >= 3);
    for a in &manifest.artifacts {
        let bytes = fs::read(out.join(&a.path)).unwrap();
        assert_eq!(sha256_hex(&bytes), a.sha256, "{}", a.path);
        assert_eq!(bytes.len() as u64, a.bytes);
    }

    let geometry: serde_json::Value = serde_json::from_slice(&fs::read(out.join("geometry.json")).unwrap()).unwrap();
    let d = geometry["mixed_dimension"]["fitted_d"].as_f64().unwrap();
    assert!((d - 2.0).abs() <= 0.2, "{d}");

    // the saved domain can be used as input
    let header = out.join("domain.json");
    assert!(header.exists());
    let text = format!(r#"{{"schema_version": 1, "domain": {{"kind": "file", "path": "{}"}}}}"#, header.display());
    let reuse = write_config(dir.path(), "file.json", &text);
    let again = dir.path().join("again");
    assert_eq!(run("gen-domain", Some(&reuse), &again, &[]), EXIT_PASS);
    let second = RunManifest::load(&again.join("manifest-gen-domain.json")).unwrap();
    assert_eq!(second.domain_sha256, manifest.domain_sha256);
}

#[test]
fn forcing_the_wrong_regime_fails_the_check() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"schema_version": 1, "domain": {"kind": "ball", "radius": 4, "h": 0.5},
        "green": {"a": 1e-4, "samples": 4, "oracle": false}}"#;
    let config = write_config(dir.path(), "green.json", text);
    let out = dir.path().join("out");
    assert_eq!(run("green-checks", Some(&config), &out, &["--force-regime", "dirichlet"]), EXIT_CHECK_FAILED);
}

#[test]
fn injected_mass_fault_fails_hm_checks() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"schema_version": 1, "domain": {"kind": "ball", "radius": 4, "h": 0.5},
        "measure": {"a_relative": [1.0], "enabled": ["doubling"], "params": {"samples": 4}}}"#;
    let config = write_config(dir.path(), "hm.json", text);
    let clean = dir.path().join("clean");
    assert_eq!(run("hm-checks", Some(&config), &clean, &[]), EXIT_PASS);
    assert!(clean.join("measure.csv").exists());
    let faulty = dir.path().join("faulty");
    assert_eq!(run("hm-checks", Some(&config), &faulty, &["--inject-fault", "mass"]), EXIT_CHECK_FAILED);
    let manifest = RunManifest::load(&faulty.join("manifest-hm-checks.json")).unwrap();
    assert!(!manifest.passed);
    assert!(manifest.checks.iter().any(|c| c.name.contains("mass") && !c.passed));
}

#[test]
fn flux_rerun_from_manifest_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "flux.json", &flux_config());
    let first = dir.path().join("first");
    let code = run("flux", Some(&config), &first, &[]);
    assert_eq!(code, EXIT_PASS);
    let csv = fs::read(first.join("flux.csv")).unwrap();
    let rows = String::from_utf8(csv.clone()).unwrap().lines().count();
    assert_eq!(rows, 8);
    assert!(first.join("flux.svg").exists());

    let manifest = first.join("manifest-flux.json");
    let second = dir.path().join("second");
    assert_eq!(run("flux", Some(&manifest), &second, &["--jobs", "2"]), code);
    assert_eq!(fs::read(second.join("flux.csv")).unwrap(), csv);
    let m1 = RunManifest::load(&manifest).unwrap();
    let m2 = RunManifest::load(&second.join("manifest-flux.json")).unwrap();
    assert_eq!(m1.config, m2.config);
    let hash = |m: &RunManifest| m.artifacts.iter().find(|a| a.path == "flux.csv").unwrap().sha256.clone();
    assert_eq!(hash(&m1), hash(&m2));
}

#[test]
fn resume_reuses_cached_solves() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "flux.json", &flux_config());
    let out = dir.path().join("out");
    assert_eq!(run("flux", Some(&config), &out, &["--resume"]), EXIT_PASS);
    let csv = fs::read(out.join("flux.csv")).unwrap();
    let manifest = RunManifest::load(&out.join("manifest-flux.json")).unwrap();
    let cache = out.join("cache").join(manifest.domain_sha256.unwrap());
    let cached = fs::read_dir(cache).unwrap().count();
    assert_eq!(cached, 7);
    assert_eq!(run("flux", Some(&config), &out, &["--resume"]), EXIT_PASS);
    assert_eq!(fs::read(out.join("flux.csv")).unwrap(), csv);
}

#[test]
fn report_summarizes_manifests() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    assert_eq!(run("report", None, &out, &[]), EXIT_ERROR);

    let config = write_config(dir.path(), "ball.json", BALL);
    assert_eq!(run("gen-domain", Some(&config), &out, &[]), EXIT_PASS);
    assert_eq!(run("report", None, &out, &[]), EXIT_PASS);
    let text = fs::read_to_string(out.join("report.md")).unwrap();
    assert!(text.contains("## gen-domain (pass)"), "{text}");
    assert!(text.contains("mixed_dimension"));
}

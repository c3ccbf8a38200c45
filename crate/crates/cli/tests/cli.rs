use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn magmf(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magmf"))
        .args(args)
        .current_dir(root)
        .env("MAGMF_OUTPUT_ROOT", root.join("out"))
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn missing_config_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let o = magmf(tmp.path(), &["hartree", "--config", "no/such/file.toml"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no/such/file.toml"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = magmf(tmp.path(), &["hartree", "--config", fixture("typo.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("tfinal"), "{}", stderr(&o));
}

#[test]
fn bad_flag_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&magmf(tmp.path(), &["hartree", "--no-such-flag"])), 1);
    assert_eq!(code(&magmf(tmp.path(), &["converge", "--which", "sideways"])), 1);
}

#[test]
fn free_run_conserves_energy_and_records_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture("free.toml");
    let o = magmf(tmp.path(), &["hartree", "--config", cfg.to_str().unwrap(), "--dt", "0.005"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dir = tmp.path().join("out/magmf-out");
    let (header, rows) = read_csv(&dir.join("trajectory.csv"));
    let e = header.iter().position(|h| h == "energy").unwrap();
    assert_eq!(rows.len(), 21);
    for r in &rows {
        assert!((r[e] - rows[0][e]).abs() <= 1e-10, "{} vs {}", r[e], rows[0][e]);
    }
    let m = manifest(&dir);
    assert_eq!(m["status"], "complete");
    let dt = m["parameters"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["key"] == "solver.dt")
        .unwrap();
    assert_eq!(dt["value"], "0.005");
    assert_eq!(dt["source"], "command line");
    let t_final = m["parameters"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["key"] == "solver.t_final")
        .unwrap();
    assert_eq!(t_final["source"], "config");
    assert_eq!(m["inventory"][0]["path"], "trajectory.csv");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn nbody_over_budget_refuses_before_allocating() {
    let tmp = tempfile::tempdir().unwrap();
    let o = magmf(tmp.path(), &["nbody", "--n-particles", "12"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("needs"), "{}", stderr(&o));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn nbody_desk_cell_writes_a_row_per_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = preset("desk.toml");
    let o = magmf(tmp.path(), &["nbody", "--config", cfg.to_str().unwrap(), "--n-particles", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&tmp.path().join("out/desk-out/nbody_N2.csv"));
    assert_eq!(header[..3], ["N", "alpha", "t"]);
    assert_eq!(rows.len(), 5);
    let t: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    assert_eq!(t, vec![0.1, 0.2, 0.3, 0.4, 0.5]);
    assert!(rows.iter().all(|r| r[3] > 0.0 && r[6] < 1e-10));
}

#[test]
fn single_free_particle_matches_the_one_body_flow() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture("free.toml");
    let o = magmf(
        tmp.path(),
        &["nbody", "--config", cfg.to_str().unwrap(), "--n-particles", "1"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = read_csv(&tmp.path().join("out/magmf-out/nbody_N1.csv"));
    assert!(rows.iter().all(|r| r[3] < 1e-8), "{rows:?}");
}

#[test]
fn checkpoint_is_listed_in_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("ck.toml");
    fs::write(
        &cfg,
        "[grid]\npoints = 12\n[experiment]\nn_particles = 2\n[output]\ncheckpoint = true\n",
    )
    .unwrap();
    let o = magmf(tmp.path(), &["nbody", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dir = tmp.path().join("out/magmf-out");
    let (psi, t) = magmf_core::FockState::load(&dir.join("nbody_N2.ckpt")).unwrap();
    assert_eq!(psi.n_particles(), 2);
    assert!((t - 0.5).abs() < 1e-12);
    let paths: Vec<String> = manifest(&dir)["inventory"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["path"].as_str().unwrap().to_string())
        .collect();
    assert!(paths.contains(&"nbody_N2.ckpt".to_string()), "{paths:?}");
}

#[test]
fn regularization_preset_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = preset("regularization.toml");
    let o = magmf(
        tmp.path(),
        &["converge", "--which", "regularization", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("flag.pass = true"));
    let dir = tmp.path().join("out/regularization-out");
    for f in ["regularization_raw.csv", "regularization_summary.txt", "regularization_gaps_vs_alpha.svg"] {
        assert!(dir.join(f).exists(), "{f}");
    }
}

#[test]
fn no_plots_flag_skips_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = preset("regularization.toml");
    let o = magmf(
        tmp.path(),
        &["--no-plots", "converge", "--which", "regularization", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0);
    let dir = tmp.path().join("out/regularization-out");
    assert!(dir.join("regularization_raw.csv").exists());
    assert!(!dir.join("regularization_gaps_vs_alpha.svg").exists());
}

#[test]
fn non_interacting_study_is_degenerate_not_failed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = preset("regularization.toml");
    let o = magmf(
        tmp.path(),
        &["converge", "--which", "regularization", "--config", cfg.to_str().unwrap(), "--lambda", "0"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("non-interacting"), "{}", stdout(&o));
}

#[test]
fn unstable_envelope_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture("wide.toml");
    let o = magmf(
        tmp.path(),
        &["--no-plots", "converge", "--which", "energy", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code(&o), 3, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("flag.energy_k1.envelope_stable = false"));
    let m = manifest(&tmp.path().join("out/magmf-out"));
    assert_eq!(m["status"], "failed");
    assert_eq!(m["inventory"].as_array().unwrap().len(), 2);
}

#[test]
fn descending_n_list_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture("descending.toml");
    let o = magmf(tmp.path(), &["converge", "--which", "trace", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("n_list"), "{}", stderr(&o));
}

#[test]
fn dry_run_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = preset("desk.toml");
    let o = magmf(
        tmp.path(),
        &["converge", "--which", "energy", "--dry-run", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("study = energy"));
    assert!(out.contains("5153632"), "{out}");
    assert!(out.contains("\"config_sha256\""));
    assert!(!tmp.path().join("out").exists());
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn all_suites_pass_on_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let o = magmf(tmp.path(), &["check"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 7);
    assert!(stdout(&o).lines().all(|l| l.contains(" pass ")));
}

#[test]
fn only_filter_runs_one_suite() {
    let tmp = tempfile::tempdir().unwrap();
    let o = magmf(tmp.path(), &["check", "--only", "hardy"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("hardy"));
    assert_eq!(code(&magmf(tmp.path(), &["check", "--only", "nonsense"])), 1);
}

#[test]
fn injected_link_fault_fails_gauge_suite() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture("fault.toml");
    let o = magmf(tmp.path(), &["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).starts_with("gauge        FAIL"), "{}", stdout(&o));
    assert_eq!(manifest(&tmp.path().join("out/magmf-out"))["exit_code"], 3);
}

//! Study pipeline: report round-trips, determinism and the fixed-alpha plateau.

use magmf_core::lab::report::{read_meta, read_raw_csv, summarize};
use magmf_core::lab::{emit_report, run_energy_convergence, run_trace_convergence, ExperimentConfig, RateReport, ReportMeta, Study};

fn small(extra: &str) -> ExperimentConfig {
    let text = format!(
        r#"
[grid]
dim = 1
points = 12
half_width = 1.5

[interaction]
lambda = 1.0
alpha = 0.0

[initial]
kind = "gaussian"
width = 0.4

[solver]
dt = 0.01
t_final = 0.2
sample_stride = 10
nbody_dt = 0.05

[experiment]
n_list = [2, 3, 4]
distances = ["trace_k1", "hs"]
{extra}
"#
    );
    let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    cfg.validate().unwrap();
    cfg
}

#[test]
fn three_cell_report_round_trips_bit_for_bit() {
    let cfg = small("");
    let report = run_trace_convergence(&cfg, 1).unwrap();
    let (_, samples) = cfg.sampling().unwrap();
    assert_eq!(report.raw.len(), 3 * samples * 2);
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&report, dir.path(), false).unwrap();
    assert!(files.plots.is_empty());
    let written = std::fs::read_to_string(&files.summary).unwrap();
    let raw = read_raw_csv(&files.csv).unwrap();
    assert_eq!(raw, report.raw);
    let meta = read_meta(&written).unwrap();
    assert_eq!(summarize(&meta, &raw).to_text(), written);
}

#[test]
fn identical_configs_give_identical_bytes_for_any_worker_count() {
    let cfg = small("");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = emit_report(&run_trace_convergence(&cfg, 1).unwrap(), a.path(), false).unwrap();
    let fb = emit_report(&run_trace_convergence(&cfg, 3).unwrap(), b.path(), false).unwrap();
    assert_eq!(std::fs::read(fa.csv).unwrap(), std::fs::read(fb.csv).unwrap());
    assert_eq!(std::fs::read(fa.summary).unwrap(), std::fs::read(fb.summary).unwrap());
}

#[test]
fn fixed_regularization_floors_the_energy_distance() {
    let cfg = small("alpha_list = [0.3, 0.3, 0.3]");
    let report = run_energy_convergence(&cfg, 1).unwrap();
    let s = report.summarize();
    assert_eq!(s.flag("energy_k1.decreasing"), Some(true));
    assert_eq!(s.get("plateau"), Some("true"));
}

#[test]
fn empty_run_writes_headers_and_zero_cells() {
    let report = RateReport {
        meta: ReportMeta {
            study: Study::Trace,
            lambda: 1.0,
            analytic_c: None,
            notes: vec![],
        },
        raw: vec![],
        failure: None,
    };
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&report, dir.path(), true).unwrap();
    assert_eq!(std::fs::read_to_string(files.csv).unwrap().trim(), "N,alpha,t,distance_kind,value");
    let text = std::fs::read_to_string(files.summary).unwrap();
    assert!(text.lines().any(|l| l == "cells = 0"), "{text}");
    assert!(files.plots.is_empty());
}

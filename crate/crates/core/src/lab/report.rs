//! Rate reports: the raw distance table, fits and flags derived from it, and
//! their on-disk form (CSV, flat `key = value` summary, SVG plots).
//!
//! Every fit and flag is a pure function of the raw table and a few declared
//! parameters, so a summary can be regenerated exactly from its CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::fit::{loglog_fit, PowerFit};
use crate::error::{Error, Result};

/// Values at or below this are treated as numerically zero.
pub const DEGENERATE_FLOOR: f64 = 1e-7;
/// Largest tolerated trace distance slope in `N`.
pub const TRACE_SLOPE_MAX: f64 = -0.4;
/// Largest tolerated max/min ratio of the energy envelope constant across `t`.
pub const ENVELOPE_STABILITY: f64 = 2.0;
/// Slack in the triangle-inequality bridge check.
pub const BRIDGE_SLACK: f64 = 1e-8;
pub const L2_GAP_SLOPE: (f64, f64) = (0.9, 1.5);
pub const H1A_GAP_SLOPE_MIN: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Trace,
    Energy,
    Regularization,
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::Trace => "trace",
            Study::Energy => "energy",
            Study::Regularization => "regularization",
        }
    }

    pub fn parse(s: &str) -> Option<Study> {
        [Study::Trace, Study::Energy, Study::Regularization]
            .into_iter()
            .find(|x| x.name() == s)
    }
}

/// Kind names used in the raw table beyond the configurable distances.
pub mod kinds {
    pub const TRACE_K1: &str = "trace_k1";
    pub const TRACE_K2: &str = "trace_k2";
    pub const ENERGY_K1: &str = "energy_k1";
    pub const HS: &str = "hs";
    /// Energy distance against the regularized Hartree flow with the same `alpha_N`.
    pub const ENERGY_K1_REG: &str = "energy_k1_reg";
    /// Energy trace norm between the regularized and reference Hartree projectors.
    pub const ENERGY_BRIDGE: &str = "energy_bridge";
    pub const L2_GAP: &str = "l2_gap";
    pub const H1A_GAP: &str = "h1a_gap";
    pub const H2A_SUP: &str = "h2a_sup";
    pub const DPHI_DT_H1A_SUP: &str = "dphi_dt_h1a_sup";
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawPoint {
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    pub t: f64,
    #[serde(rename = "distance_kind")]
    pub kind: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportMeta {
    pub study: Study,
    pub lambda: f64,
    /// Reported for reference; never used in a flag.
    pub analytic_c: Option<f64>,
    /// Declarations carried verbatim into the summary, e.g. the kernel used.
    pub notes: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub meta: ReportMeta,
    pub raw: Vec<RawPoint>,
    /// Set when a cell failed and the table is partial.
    pub failure: Option<String>,
}

/// Derived fits and flags.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub entries: Vec<(String, String)>,
    pub flags: Vec<(String, bool)>,
    pub degenerate: bool,
}

impl Summary {
    pub fn pass(&self) -> bool {
        self.flags.iter().all(|(_, ok)| *ok)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn flag(&self, name: &str) -> Option<bool> {
        self.flags.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        for (k, v) in &self.flags {
            let _ = writeln!(out, "flag.{k} = {v}");
        }
        let _ = writeln!(out, "flag.pass = {}", self.pass());
        out
    }
}

/// Points of one kind, grouped by time, each group sorted by `N`.
fn by_time<'a>(raw: &'a [RawPoint], kind: &str) -> Vec<(f64, Vec<&'a RawPoint>)> {
    let mut groups: BTreeMap<u64, Vec<&RawPoint>> = BTreeMap::new();
    for p in raw.iter().filter(|p| p.kind == kind) {
        groups.entry(ordered_bits(p.t)).or_default().push(p);
    }
    groups
        .into_values()
        .map(|mut v| {
            v.sort_by_key(|p| p.n);
            (v[0].t, v)
        })
        .collect()
}

/// Order-preserving key for non-negative finite floats.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if x.is_sign_negative() {
        !b
    } else {
        b | (1 << 63)
    }
}

fn fmt_fit(entries: &mut Vec<(String, String)>, prefix: &str, fit: Option<PowerFit>) {
    match fit {
        Some(f) => {
            entries.push((format!("{prefix}.slope"), f.slope.to_string()));
            entries.push((format!("{prefix}.residual"), f.residual.to_string()));
        }
        None => entries.push((format!("{prefix}.slope"), "none".into())),
    }
}

fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

fn n_fit(points: &[&RawPoint]) -> Option<PowerFit> {
    let x: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.value).collect();
    loglog_fit(&x, &y)
}

/// Smallest `C >= 0` with `d <= sqrt(8 k / N) e^{C t}` at every point with `t > 0`.
pub fn trace_envelope_constant(points: &[(usize, f64, f64)], k: usize) -> f64 {
    points
        .iter()
        .filter(|(_, t, _)| *t > 0.0)
        .map(|&(n, t, d)| (d / (8.0 * k as f64 / n as f64).sqrt()).ln() / t)
        .fold(0.0, f64::max)
}

/// `N^{-1/4} + alpha^{1/4}`.
pub fn energy_rate(n: usize, alpha: f64) -> f64 {
    (n as f64).powf(-0.25) + alpha.powf(0.25)
}

impl RateReport {
    pub fn summarize(&self) -> Summary {
        summarize(&self.meta, &self.raw)
    }
}

pub fn summarize(meta: &ReportMeta, raw: &[RawPoint]) -> Summary {
    let mut entries = vec![
        ("meta.study".to_string(), meta.study.name().to_string()),
        ("meta.lambda".to_string(), meta.lambda.to_string()),
    ];
    if let Some(c) = meta.analytic_c {
        entries.push(("meta.analytic_C".into(), c.to_string()));
    }
    for (k, v) in &meta.notes {
        entries.push((format!("meta.note.{k}"), v.clone()));
    }
    let mut cells: Vec<(usize, u64)> = raw.iter().map(|p| (p.n, p.alpha.to_bits())).collect();
    cells.sort_unstable();
    cells.dedup();
    entries.push(("cells".into(), cells.len().to_string()));
    entries.push(("rows".into(), raw.len().to_string()));
    let mut flags = Vec::new();
    let max_value = raw
        .iter()
        .filter(|p| p.kind != kinds::H2A_SUP && p.kind != kinds::DPHI_DT_H1A_SUP)
        .map(|p| p.value.abs())
        .fold(0.0, f64::max);
    let degenerate = !raw.is_empty() && (meta.lambda == 0.0 || max_value <= DEGENERATE_FLOOR);
    if degenerate {
        let why = if meta.lambda == 0.0 {
            "non-interacting"
        } else {
            "identical flows"
        };
        entries.push(("degenerate".into(), why.into()));
        entries.push(("max_value".into(), max_value.to_string()));
        flags.push(("at_floor".into(), max_value <= DEGENERATE_FLOOR));
        return Summary {
            entries,
            flags,
            degenerate,
        };
    }
    match meta.study {
        Study::Trace => summarize_trace(raw, &mut entries, &mut flags),
        Study::Energy => summarize_energy(raw, &mut entries, &mut flags),
        Study::Regularization => summarize_regularization(raw, &mut entries, &mut flags),
    }
    Summary {
        entries,
        flags,
        degenerate,
    }
}

fn summarize_trace(raw: &[RawPoint], entries: &mut Vec<(String, String)>, flags: &mut Vec<(String, bool)>) {
    for kind in [kinds::TRACE_K1, kinds::TRACE_K2, kinds::HS, kinds::ENERGY_K1] {
        let groups = by_time(raw, kind);
        if groups.is_empty() {
            continue;
        }
        let gated = kind == kinds::TRACE_K1 || kind == kinds::TRACE_K2;
        let mut decreasing = true;
        let mut slope_ok = true;
        for (t, pts) in &groups {
            let prefix = format!("{kind}.t={t}");
            let fit = n_fit(pts);
            fmt_fit(entries, &prefix, fit);
            let dec = strictly_decreasing(&pts.iter().map(|p| p.value).collect::<Vec<_>>());
            entries.push((format!("{prefix}.decreasing"), dec.to_string()));
            decreasing &= dec || pts.len() < 2;
            if let Some(f) = fit {
                slope_ok &= f.slope <= TRACE_SLOPE_MAX;
            }
        }
        if gated {
            let k = if kind == kinds::TRACE_K1 { 1 } else { 2 };
            let pts: Vec<(usize, f64, f64)> = raw
                .iter()
                .filter(|p| p.kind == kind)
                .map(|p| (p.n, p.t, p.value))
                .collect();
            let c = trace_envelope_constant(&pts, k);
            let sound = pts
                .iter()
                .all(|&(n, t, d)| d <= (8.0 * k as f64 / n as f64).sqrt() * (c * t).exp() * (1.0 + 1e-12));
            entries.push((format!("{kind}.envelope_C"), c.to_string()));
            flags.push((format!("{kind}.decreasing"), decreasing));
            flags.push((format!("{kind}.slope"), slope_ok));
            flags.push((format!("{kind}.envelope_sound"), sound && c.is_finite()));
        }
    }
}

fn summarize_energy(raw: &[RawPoint], entries: &mut Vec<(String, String)>, flags: &mut Vec<(String, bool)>) {
    let groups = by_time(raw, kinds::ENERGY_K1);
    let reg_groups = by_time(raw, kinds::ENERGY_K1_REG);
    let mut decreasing = true;
    let mut c_t = Vec::new();
    let mut last_slopes = (None, None);
    for (i, (t, pts)) in groups.iter().enumerate() {
        let prefix = format!("{}.t={t}", kinds::ENERGY_K1);
        let fit = n_fit(pts);
        fmt_fit(entries, &prefix, fit);
        let dec = strictly_decreasing(&pts.iter().map(|p| p.value).collect::<Vec<_>>());
        entries.push((format!("{prefix}.decreasing"), dec.to_string()));
        decreasing &= dec || pts.len() < 2;
        let c = pts
            .iter()
            .map(|p| p.value / energy_rate(p.n, p.alpha))
            .fold(0.0, f64::max);
        entries.push((format!("{prefix}.envelope_C"), c.to_string()));
        c_t.push(c);
        let reg_fit = reg_groups.get(i).and_then(|(_, r)| n_fit(r));
        fmt_fit(entries, &format!("{}.t={t}", kinds::ENERGY_K1_REG), reg_fit);
        last_slopes = (fit.map(|f| f.slope), reg_fit.map(|f| f.slope));
    }
    if c_t.is_empty() {
        return;
    }
    let c_max = c_t.iter().cloned().fold(0.0, f64::max);
    let c_min = c_t.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = c_max / c_min;
    entries.push((format!("{}.envelope_C", kinds::ENERGY_K1), c_max.to_string()));
    entries.push((format!("{}.envelope_ratio", kinds::ENERGY_K1), ratio.to_string()));
    let sound = raw
        .iter()
        .filter(|p| p.kind == kinds::ENERGY_K1)
        .all(|p| p.value <= c_max * energy_rate(p.n, p.alpha) * (1.0 + 1e-12));
    if let (Some(a), Some(b)) = last_slopes {
        entries.push(("plateau".into(), (a > b).to_string()));
    }
    let mut bridge = true;
    let mut worst = f64::NEG_INFINITY;
    let lookup: BTreeMap<(usize, u64, u64, &str), f64> = raw
        .iter()
        .map(|p| ((p.n, p.alpha.to_bits(), p.t.to_bits(), p.kind.as_str()), p.value))
        .collect();
    for p in raw.iter().filter(|p| p.kind == kinds::ENERGY_K1) {
        let key = |k| (p.n, p.alpha.to_bits(), p.t.to_bits(), k);
        match (lookup.get(&key(kinds::ENERGY_K1_REG)), lookup.get(&key(kinds::ENERGY_BRIDGE))) {
            (Some(reg), Some(cross)) => {
                let excess = p.value - reg - cross;
                worst = worst.max(excess);
                bridge &= excess <= BRIDGE_SLACK;
            }
            _ => bridge = false,
        }
    }
    entries.push(("bridge.worst_excess".into(), worst.to_string()));
    flags.push((format!("{}.decreasing", kinds::ENERGY_K1), decreasing));
    flags.push((format!("{}.envelope_stable", kinds::ENERGY_K1), ratio <= ENVELOPE_STABILITY));
    flags.push((format!("{}.envelope_sound", kinds::ENERGY_K1), sound && c_max.is_finite()));
    flags.push(("bridge".into(), bridge));
}

fn summarize_regularization(
    raw: &[RawPoint],
    entries: &mut Vec<(String, String)>,
    flags: &mut Vec<(String, bool)>,
) {
    for kind in [kinds::L2_GAP, kinds::H1A_GAP] {
        let mut pts: Vec<&RawPoint> = raw.iter().filter(|p| p.kind == kind).collect();
        if pts.is_empty() {
            continue;
        }
        pts.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        let x: Vec<f64> = pts.iter().map(|p| p.alpha).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.value).collect();
        let fit = loglog_fit(&x, &y);
        fmt_fit(entries, kind, fit);
        let monotone = y.windows(2).all(|w| w[1] > w[0]);
        entries.push((format!("{kind}.monotone"), monotone.to_string()));
        // Fitted constants of the bounds `C2 alpha` and `C3 alpha^(1/4)`.
        let (name, power) = if kind == kinds::L2_GAP { ("C2", 1.0) } else { ("C3", 0.25) };
        let c = pts.iter().map(|p| p.value / p.alpha.powf(power)).fold(0.0, f64::max);
        entries.push((format!("{kind}.{name}"), c.to_string()));
        let window = match fit {
            Some(f) if kind == kinds::L2_GAP => f.slope >= L2_GAP_SLOPE.0 && f.slope <= L2_GAP_SLOPE.1,
            Some(f) => f.slope >= H1A_GAP_SLOPE_MIN,
            None => true,
        };
        flags.push((format!("{kind}.slope"), window));
        flags.push((format!("{kind}.monotone"), monotone));
    }
    for kind in [kinds::H2A_SUP, kinds::DPHI_DT_H1A_SUP] {
        let v: Vec<f64> = raw.iter().filter(|p| p.kind == kind).map(|p| p.value).collect();
        if v.is_empty() {
            continue;
        }
        let hi = v.iter().cloned().fold(0.0, f64::max);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        entries.push((format!("{kind}.max"), hi.to_string()));
        entries.push((format!("{kind}.ratio"), (hi / lo).to_string()));
    }
}

pub fn write_raw_csv(raw: &[RawPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if raw.is_empty() {
        w.write_record(["N", "alpha", "t", "distance_kind", "value"])?;
    }
    for p in raw {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_raw_csv(path: &Path) -> Result<Vec<RawPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Recovers the declared parameters from a summary file.
pub fn read_meta(text: &str) -> Result<ReportMeta> {
    let mut study = None;
    let mut lambda = None;
    let mut analytic_c = None;
    let mut notes = Vec::new();
    for line in text.lines() {
        let Some((k, v)) = line.split_once(" = ") else {
            continue;
        };
        let parse = |v: &str| v.parse::<f64>().map_err(|e| Error::Report(format!("{k}: {e}")));
        match k {
            "meta.study" => study = Study::parse(v),
            "meta.lambda" => lambda = Some(parse(v)?),
            "meta.analytic_C" => analytic_c = Some(parse(v)?),
            _ => {
                if let Some(name) = k.strip_prefix("meta.note.") {
                    notes.push((name.to_string(), v.to_string()));
                }
            }
        }
    }
    Ok(ReportMeta {
        study: study.ok_or_else(|| Error::Report("summary lacks meta.study".into()))?,
        lambda: lambda.ok_or_else(|| Error::Report("summary lacks meta.lambda".into()))?,
        analytic_c,
        notes,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub plots: Vec<PathBuf>,
}

impl ReportFiles {
    pub fn all(&self) -> Vec<PathBuf> {
        let mut v = vec![self.csv.clone(), self.summary.clone()];
        v.extend(self.plots.iter().cloned());
        v
    }
}

/// Writes `<study>_raw.csv`, `<study>_summary.txt` and, when enabled, SVG plots into `dir`.
pub fn emit_report(report: &RateReport, dir: &Path, plots: bool) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Report(format!("cannot create {}: {e}", dir.display())))?;
    let name = report.meta.study.name();
    let csv = dir.join(format!("{name}_raw.csv"));
    write_raw_csv(&report.raw, &csv)?;
    let summary = dir.join(format!("{name}_summary.txt"));
    let mut text = report.summarize().to_text();
    if let Some(f) = &report.failure {
        let _ = writeln!(text, "partial = {}", f.replace('\n', " "));
    }
    std::fs::write(&summary, text)?;
    let plots = if plots {
        super::plot::write_plots(report, dir)?
    } else {
        Vec::new()
    };
    Ok(ReportFiles { csv, summary, plots })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(n: usize, alpha: f64, t: f64, kind: &str, value: f64) -> RawPoint {
        RawPoint {
            n,
            alpha,
            t,
            kind: kind.into(),
            value,
        }
    }

    fn meta(study: Study, lambda: f64) -> ReportMeta {
        ReportMeta {
            study,
            lambda,
            analytic_c: None,
            notes: vec![],
        }
    }

    #[test]
    fn single_cell_has_no_slope() {
        let raw = vec![point(2, 0.0, 0.1, kinds::TRACE_K1, 0.05)];
        let s = summarize(&meta(Study::Trace, 1.0), &raw);
        assert_eq!(s.get("trace_k1.t=0.1.slope"), Some("none"));
        assert!(s.pass());
    }

    #[test]
    fn trace_envelope_is_tight() {
        let raw: Vec<RawPoint> = [2usize, 3, 4]
            .iter()
            .map(|&n| point(n, 0.0, 0.5, kinds::TRACE_K1, 6.0 / n as f64))
            .collect();
        let s = summarize(&meta(Study::Trace, 1.0), &raw);
        let c: f64 = s.get("trace_k1.envelope_C").unwrap().parse().unwrap();
        let at_two = (8.0f64 / 2.0).sqrt() * (c * 0.5).exp();
        assert!((at_two - 3.0).abs() < 1e-12, "{at_two}");
        assert_eq!(s.flag("trace_k1.envelope_sound"), Some(true));
        assert_eq!(s.flag("trace_k1.slope"), Some(true));
    }

    #[test]
    fn increasing_distance_fails() {
        let raw: Vec<RawPoint> = [2usize, 3, 4]
            .iter()
            .map(|&n| point(n, 0.0, 0.5, kinds::TRACE_K1, 0.01 * n as f64))
            .collect();
        let s = summarize(&meta(Study::Trace, 1.0), &raw);
        assert_eq!(s.flag("trace_k1.decreasing"), Some(false));
        assert!(!s.pass());
    }

    #[test]
    fn non_interacting_is_degenerate() {
        let raw = vec![point(2, 0.0, 0.1, kinds::TRACE_K1, 1e-12), point(3, 0.0, 0.1, kinds::TRACE_K1, 2e-12)];
        let s = summarize(&meta(Study::Trace, 0.0), &raw);
        assert!(s.degenerate);
        assert_eq!(s.get("degenerate"), Some("non-interacting"));
        assert!(s.pass());
    }

    #[test]
    fn empty_run() {
        let s = summarize(&meta(Study::Energy, 1.0), &[]);
        assert_eq!(s.get("cells"), Some("0"));
        let dir = tempfile::tempdir().unwrap();
        let report = RateReport {
            meta: meta(Study::Energy, 1.0),
            raw: vec![],
            failure: None,
        };
        let files = emit_report(&report, dir.path(), false).unwrap();
        assert_eq!(std::fs::read_to_string(&files.csv).unwrap().trim(), "N,alpha,t,distance_kind,value");
        assert!(files.plots.is_empty());
    }

    #[test]
    fn meta_roundtrip() {
        let m = ReportMeta {
            study: Study::Regularization,
            lambda: 1.0,
            analytic_c: Some(12.5),
            notes: vec![("kernel".into(), "lattice floor".into())],
        };
        let text = summarize(&m, &[]).to_text();
        assert_eq!(read_meta(&text).unwrap(), m);
    }
}

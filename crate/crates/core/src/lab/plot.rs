//! SVG plots: distance against `N` for each sampled time, gaps against `alpha`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::report::{kinds, RateReport, Study};
use crate::error::{Error, Result};

type Series = Vec<(String, Vec<(f64, f64)>)>;

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Report(format!("plot: {e}"))
}

/// Returns false, writing nothing, when no point is positive on both axes.
fn loglog(path: &Path, title: &str, x_label: &str, series: &Series) -> Result<bool> {
    let pts = series.iter().flat_map(|(_, s)| s.iter()).filter(|(x, y)| *x > 0.0 && *y > 0.0);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return Ok(false);
    }
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d((x0 * 0.9..x1 * 1.1).log_scale(), (y0 * 0.8..y1 * 1.25).log_scale())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc("value")
        .draw()
        .map_err(plot_err)?;
    for (i, (name, s)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let s: Vec<(f64, f64)> = s.iter().copied().filter(|(x, y)| *x > 0.0 && *y > 0.0).collect();
        chart
            .draw_series(LineSeries::new(s.clone(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(name.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        chart
            .draw_series(s.into_iter().map(|p| Circle::new(p, 3, color.filled())))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(true)
}

/// Point series of one plot keyed by label.
type SeriesByLabel = BTreeMap<String, Vec<(f64, f64)>>;

pub fn write_plots(report: &RateReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    match report.meta.study {
        Study::Trace | Study::Energy => {
            let mut per_kind: BTreeMap<&str, SeriesByLabel> = BTreeMap::new();
            for p in &report.raw {
                per_kind
                    .entry(p.kind.as_str())
                    .or_default()
                    .entry(format!("t = {}", p.t))
                    .or_default()
                    .push((p.n as f64, p.value));
            }
            for (kind, by_t) in per_kind {
                let path = dir.join(format!("{}_{kind}_vs_N.svg", report.meta.study.name()));
                let series: Series = by_t.into_iter().collect();
                if loglog(&path, &format!("{kind} against N"), "N", &series)? {
                    out.push(path);
                }
            }
        }
        Study::Regularization => {
            let mut series: Series = Vec::new();
            for kind in [kinds::L2_GAP, kinds::H1A_GAP] {
                let mut s: Vec<(f64, f64)> = report
                    .raw
                    .iter()
                    .filter(|p| p.kind == kind)
                    .map(|p| (p.alpha, p.value))
                    .collect();
                s.sort_by(|a, b| a.0.total_cmp(&b.0));
                if !s.is_empty() {
                    series.push((kind.to_string(), s));
                }
            }
            if !series.is_empty() {
                let path = dir.join("regularization_gaps_vs_alpha.svg");
                if loglog(&path, "regularization gaps", "alpha", &series)? {
                    out.push(path);
                }
            }
        }
    }
    Ok(out)
}

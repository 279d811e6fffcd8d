use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::config::ExperimentKind;
use super::report::{FitSummary, RunReport};
use crate::error::{Error, Result};

fn draw_error<E: std::fmt::Debug>(e: E) -> Error {
    Error::Io(std::io::Error::other(format!("plot rendering: {e:?}")))
}

/// Whether `metric` of `kind` is read as a power law in the sweep variable.
fn is_scaling_metric(kind: ExperimentKind, metric: &str) -> bool {
    !matches!(kind, ExperimentKind::SpinLeeyang)
        && !matches!(metric, "points" | "side" | "scan_certified" | "zeros" | "mean")
}

/// Writes an SVG plot of `metric` against the sweep variable to `path`.
/// Power-law metrics use log-log axes with the fitted line overlaid; KS
/// metrics of i.i.d. sums also get a slope −1/2 guide through the first
/// point.
pub fn emit_plot(report: &RunReport, metric: &str, path: impl AsRef<Path>) -> Result<PathBuf> {
    let path = path.as_ref().to_path_buf();
    if report.rows.is_empty() {
        return Err(Error::Argument("report has no rows to plot".into()));
    }
    let points = report.series(metric)?;
    if points.is_empty() {
        return Err(Error::Argument(format!("metric {metric:?} has no values to plot")));
    }
    let log = is_scaling_metric(report.kind, metric) && points.iter().all(|&(x, y)| x > 0.0 && y != 0.0);
    let points: Vec<(f64, f64)> = if log {
        points.iter().map(|&(x, y)| (x, y.abs())).collect()
    } else {
        points
    };
    let fit = report
        .fit(metric)
        .cloned()
        .or_else(|| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
            FitSummary::log_log(metric, &xs, &ys)
        })
        .filter(|_| log);
    let guide = log
        && matches!(report.kind, ExperimentKind::IidRate | ExperimentKind::KsBoundAudit)
        && metric.ends_with("ks");

    let (xlo, xhi) = bounds(points.iter().map(|p| p.0));
    let (ylo, yhi) = bounds(points.iter().map(|p| p.1));
    let title = format!("{} against {} ({})", metric, report.sweep, report.kind);
    let root = SVGBackend::new(&path, (800, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_error)?;
    let mut builder = ChartBuilder::on(&root);
    builder
        .caption(title, ("sans-serif", 22))
        .margin(20)
        .x_label_area_size(50)
        .y_label_area_size(80);

    let fit_line = |x: f64| fit.as_ref().map(|f| f.intercept.exp() * x.powf(f.slope));
    let grid: Vec<f64> = (0..=64).map(|k| xlo * (xhi / xlo).powf(k as f64 / 64.0)).collect();
    if log {
        let (ylo, yhi) = (ylo / 1.5, yhi * 1.5);
        let (xlo, xhi) = (xlo / 1.2, xhi * 1.2);
        let mut chart = builder
            .build_cartesian_2d((xlo..xhi).log_scale(), (ylo..yhi).log_scale())
            .map_err(draw_error)?;
        chart
            .configure_mesh()
            .x_desc(format!("{} (log)", report.sweep))
            .y_desc(format!("{metric} (log)"))
            .draw()
            .map_err(draw_error)?;
        chart
            .draw_series(points.iter().map(|&p| Circle::new(p, 4, BLUE.filled())))
            .map_err(draw_error)?
            .label(metric.to_string())
            .legend(|(x, y)| Circle::new((x + 10, y), 4, BLUE.filled()));
        if let Some(f) = &fit {
            chart
                .draw_series(LineSeries::new(grid.iter().filter_map(|&x| fit_line(x).map(|y| (x, y))), &RED))
                .map_err(draw_error)?
                .label(format!("fit: slope {:.3}", f.slope))
                .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RED));
        }
        if guide {
            let (x0, y0) = points[0];
            chart
                .draw_series(LineSeries::new(grid.iter().map(|&x| (x, y0 * (x / x0).powf(-0.5))), BLACK.mix(0.5)))
                .map_err(draw_error)?
                .label("slope −1/2")
                .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLACK.mix(0.5)));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(draw_error)?;
    } else {
        let pad = |lo: f64, hi: f64| {
            let w = if hi > lo { hi - lo } else { lo.abs().max(1.0) };
            (lo - 0.1 * w, hi + 0.1 * w)
        };
        let (xlo, xhi) = pad(xlo, xhi);
        let (ylo, yhi) = pad(ylo, yhi);
        let mut chart = builder.build_cartesian_2d(xlo..xhi, ylo..yhi).map_err(draw_error)?;
        chart
            .configure_mesh()
            .x_desc(report.sweep.clone())
            .y_desc(metric.to_string())
            .draw()
            .map_err(draw_error)?;
        chart
            .draw_series(LineSeries::new(points.iter().copied(), &BLUE))
            .map_err(draw_error)?;
        chart
            .draw_series(points.iter().map(|&p| Circle::new(p, 4, BLUE.filled())))
            .map_err(draw_error)?;
    }
    root.present().map_err(draw_error)?;
    drop(root);
    Ok(path)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

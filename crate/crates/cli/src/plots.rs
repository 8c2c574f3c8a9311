//! SVG figures, built only from CSV files already written to disk.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use codimlab::experiments::AggregateRow;
use codimlab::plot::{heatmap, line_chart, write_svg, Series};
use ndarray::Array2;

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .with_context(|| format!("reading {}", path.display()))
}

#[derive(Clone, Copy)]
pub enum GroupBy {
    Codim,
    Dim,
}

/// Mean of `metric` against ε, one line per codimension (or dimension).
pub fn metric_vs_eps(dir: &Path, metric: &str, group: GroupBy, title: &str) -> Result<()> {
    let rows: Vec<AggregateRow> = read_rows(&dir.join("aggregates.csv"))?;
    let mut lines: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        let key = match group {
            GroupBy::Codim => r.codim,
            GroupBy::Dim => r.dim,
        };
        lines.entry(key).or_default().push((r.eps, r.mean));
    }
    if lines.is_empty() {
        return Ok(());
    }
    let prefix = match group {
        GroupBy::Codim => "codim",
        GroupBy::Dim => "dim",
    };
    let series: Vec<Series> = lines
        .into_iter()
        .map(|(k, points)| Series {
            name: format!("{prefix} {k}"),
            points,
        })
        .collect();
    write_svg(
        &dir.join(format!("{metric}.svg")),
        &line_chart(&series, title, "ε", metric),
    )?;
    Ok(())
}

/// Mean of `metric` (at ε = `eps`) against dimension, as a single line.
pub fn metric_vs_dim(dir: &Path, metric: &str, eps: f64, title: &str) -> Result<()> {
    let rows: Vec<AggregateRow> = read_rows(&dir.join("aggregates.csv"))?;
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.metric == metric && r.eps == eps)
        .map(|r| (r.dim as f64, r.mean))
        .collect();
    if points.is_empty() {
        return Ok(());
    }
    let series = [Series {
        name: metric.to_string(),
        points,
    }];
    write_svg(
        &dir.join(format!("{metric}.svg")),
        &line_chart(&series, title, "ambient dimension", metric),
    )?;
    Ok(())
}

/// Heatmap of column `value` over the `(x, y)` grid of a CSV file.
pub fn grid_heatmap(
    csv_path: &Path,
    value: &str,
    range: Option<(f64, f64)>,
    svg_path: &Path,
    title: &str,
) -> Result<()> {
    let mut r = csv::Reader::from_path(csv_path)
        .with_context(|| format!("opening {}", csv_path.display()))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{}: no `{name}` column", csv_path.display()))
    };
    let (cx, cy, cv) = (col("x")?, col("y")?, col(value)?);
    let mut cells = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| {
            rec[i]
                .parse::<f64>()
                .with_context(|| format!("{}: bad number `{}`", csv_path.display(), &rec[i]))
        };
        cells.push((f(cx)?, f(cy)?, f(cv)?));
    }
    let axis = |pick: fn(&(f64, f64, f64)) -> f64| {
        let mut v: Vec<f64> = cells.iter().map(pick).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let xs = axis(|c| c.0);
    let ys = axis(|c| c.1);
    let mut grid = Array2::zeros((ys.len(), xs.len()));
    for &(x, y, v) in &cells {
        let i = xs.partition_point(|&a| a < x);
        let j = ys.partition_point(|&a| a < y);
        grid[[j, i]] = v;
    }
    let (lo, hi) = range.unwrap_or_else(|| {
        cells
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| {
                (a.min(c.2), b.max(c.2))
            })
    });
    let span = |v: &[f64]| {
        (
            v.first().copied().unwrap_or(0.0),
            v.last().copied().unwrap_or(1.0),
        )
    };
    write_svg(
        svg_path,
        &heatmap(grid.view(), span(&xs), span(&ys), (lo, hi), title),
    )?;
    Ok(())
}

/// Several metrics against ε for one codimension, one line each.
pub fn metrics_vs_eps(
    dir: &Path,
    metrics: &[String],
    codim: usize,
    file: &str,
    title: &str,
) -> Result<()> {
    let rows: Vec<AggregateRow> = read_rows(&dir.join("aggregates.csv"))?;
    let series: Vec<Series> = metrics
        .iter()
        .map(|m| Series {
            name: m.clone(),
            points: rows
                .iter()
                .filter(|r| r.codim == codim && &r.metric == m)
                .map(|r| (r.eps, r.mean))
                .collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    if !series.is_empty() {
        write_svg(
            &dir.join(file),
            &line_chart(&series, title, "ε", "accuracy"),
        )?;
    }
    Ok(())
}

/// Angle histograms (`angle_bin_NN` metrics), one line per codimension.
pub fn angle_histograms(dir: &Path, bin_width: f64) -> Result<()> {
    let rows: Vec<AggregateRow> = read_rows(&dir.join("aggregates.csv"))?;
    let mut lines: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &rows {
        if let Some(bin) = r
            .metric
            .strip_prefix("angle_bin_")
            .and_then(|b| b.parse::<usize>().ok())
        {
            lines
                .entry(r.codim)
                .or_default()
                .push(((bin as f64 + 0.5) * bin_width, r.mean));
        }
    }
    let series: Vec<Series> = lines
        .into_iter()
        .map(|(k, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series {
                name: format!("codim {k}"),
                points,
            }
        })
        .collect();
    write_svg(
        &dir.join("angles.svg"),
        &line_chart(
            &series,
            "perturbation angle to the normal space",
            "angle (degrees)",
            "fraction",
        ),
    )?;
    Ok(())
}

//! Coefficient of determination, R² histograms, path comparisons and SVG charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `1 − SS_res / SS_tot`. Returns `None` when the truth is constant.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> Result<Option<f64>> {
    if pred.len() != truth.len() {
        return Err(Error::input(format!(
            "{} predictions for {} observations",
            pred.len(),
            truth.len()
        )));
    }
    if truth.len() < 2 {
        return Err(Error::input("R² needs at least two observations"));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot <= 0.0 {
        return Ok(None);
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p) * (t - p)).sum();
    Ok(Some(1.0 - ss_res / ss_tot))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Village,
    Tehsil,
    District,
}

/// One outcome's score. `r2` is `None` for outcomes that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub outcome: String,
    pub description: String,
    pub r2: Option<f64>,
    pub n: usize,
    pub level: Level,
    pub path: String,
}

impl OutcomeReport {
    pub fn evaluate(
        outcome: impl Into<String>,
        description: impl Into<String>,
        pred: &[f64],
        truth: &[f64],
        level: Level,
        path: impl Into<String>,
    ) -> Result<Self> {
        Ok(OutcomeReport {
            outcome: outcome.into(),
            description: description.into(),
            r2: r_squared(pred, truth)?,
            n: truth.len(),
            level,
            path: path.into(),
        })
    }
}

pub fn mean_r2(reports: &[OutcomeReport]) -> Option<f64> {
    let vals: Vec<f64> = reports.iter().filter_map(|r| r.r2).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

pub fn write_reports(path: &Path, reports: &[OutcomeReport]) -> Result<()> {
    let mut w = crate::tabular::csv_writer(path)?;
    w.write_record(["outcome", "description", "r2", "n", "level", "path"])?;
    for r in reports {
        w.write_record([
            r.outcome.clone(),
            r.description.clone(),
            format_r2(r.r2),
            r.n.to_string(),
            serde_json::to_value(r.level)?.as_str().unwrap_or_default().to_string(),
            r.path.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_reports(path: &Path) -> Result<Vec<OutcomeReport>> {
    let mut rdr = crate::tabular::csv_reader(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 6 {
            return Err(Error::format(path, "report rows need 6 columns"));
        }
        let level: Level = serde_json::from_value(serde_json::Value::String(rec[4].to_string()))?;
        out.push(OutcomeReport {
            outcome: rec[0].to_string(),
            description: rec[1].to_string(),
            r2: parse_r2(&rec[2]).map_err(|m| Error::format(path, m))?,
            n: rec[3].parse().map_err(|_| Error::format(path, "bad count"))?,
            level,
            path: rec[5].to_string(),
        });
    }
    Ok(out)
}

/// R² as written to reports; unevaluated outcomes read "not evaluated".
pub fn format_r2(r2: Option<f64>) -> String {
    match r2 {
        Some(v) => format!("{v}"),
        None => "not evaluated".to_string(),
    }
}

pub fn parse_r2(s: &str) -> std::result::Result<Option<f64>, String> {
    if s == "not evaluated" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| format!("bad R² value '{s}'"))
}

/// Counts of R² values per interval `[edge_k, edge_{k+1})`, with open-ended
/// first and last bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R2Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub at_least_zero: usize,
    pub at_least_half: usize,
    pub evaluated: usize,
}

impl R2Histogram {
    pub fn count_at_least(&self, threshold: f64, values: &[f64]) -> usize {
        values.iter().filter(|v| **v >= threshold).count()
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.counts.len());
        out.push(format!("< {}", self.edges[0]));
        for w in self.edges.windows(2) {
            out.push(format!("[{}, {})", w[0], w[1]));
        }
        out.push(format!(">= {}", self.edges[self.edges.len() - 1]));
        out
    }
}

pub fn default_r2_edges() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// Histogram of R² values; `edges` must be ascending and nonempty.
pub fn r2_histogram(values: &[f64], edges: &[f64]) -> Result<R2Histogram> {
    if edges.is_empty() || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::input("histogram edges must be nonempty and strictly ascending"));
    }
    let mut counts = vec![0; edges.len() + 1];
    for v in values {
        let k = edges.partition_point(|e| e <= v);
        counts[k] += 1;
    }
    Ok(R2Histogram {
        edges: edges.to_vec(),
        counts,
        at_least_zero: values.iter().filter(|v| **v >= 0.0).count(),
        at_least_half: values.iter().filter(|v| **v >= 0.5).count(),
        evaluated: values.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub outcome: String,
    pub r2_asset: f64,
    pub r2_nightlight: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathComparison {
    pub rows: Vec<PathRow>,
    pub mean_delta: f64,
}

/// Pairs outcomes evaluated on both paths; others are dropped with a log line.
pub fn compare_paths(asset: &[OutcomeReport], nightlight: &[OutcomeReport]) -> PathComparison {
    let night: BTreeMap<&str, Option<f64>> = nightlight.iter().map(|r| (r.outcome.as_str(), r.r2)).collect();
    let mut rows = Vec::new();
    for a in asset {
        match (a.r2, night.get(a.outcome.as_str()).copied().flatten()) {
            (Some(ra), Some(rn)) => rows.push(PathRow {
                outcome: a.outcome.clone(),
                r2_asset: ra,
                r2_nightlight: rn,
                delta: ra - rn,
            }),
            _ => log::info!("outcome {} not evaluated on both paths; dropped from comparison", a.outcome),
        }
    }
    let asset_ids: std::collections::BTreeSet<&str> = asset.iter().map(|r| r.outcome.as_str()).collect();
    for n in nightlight.iter().filter(|n| !asset_ids.contains(n.outcome.as_str())) {
        log::info!("outcome {} only on the nightlight path; dropped from comparison", n.outcome);
    }
    let mean_delta = if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(|r| r.delta).sum::<f64>() / rows.len() as f64
    };
    PathComparison { rows, mean_delta }
}

pub fn write_comparison(path: &Path, cmp: &PathComparison) -> Result<()> {
    let mut w = crate::tabular::csv_writer(path)?;
    for row in &cmp.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Horizontal bar chart of one or more R² series sharing outcome labels.
pub fn bar_chart_svg(title: &str, labels: &[String], series: &[(&str, Vec<f64>)]) -> String {
    let row_h = 14.0 * series.len().max(1) as f64 + 6.0;
    let (left, width) = (220.0, 420.0);
    let height = 50.0 + row_h * labels.len() as f64 + 20.0 * series.len() as f64;
    let all: Vec<f64> = series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite()).collect();
    let lo = all.iter().copied().fold(0.0f64, f64::min).max(-1.0);
    let hi = 1.0;
    let x = |v: f64| left + (v.clamp(lo, hi) - lo) / (hi - lo) * width;
    let colors = ["#3b6ea5", "#d08c2f", "#5a9e5a", "#a54a4a"];
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="11">"#,
        left + width + 40.0
    );
    let _ = writeln!(svg, r#"<text x="10" y="20" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(
        svg,
        r##"<line x1="{0}" y1="30" x2="{0}" y2="{1}" stroke="#888"/>"##,
        x(0.0),
        height - 20.0 * series.len() as f64
    );
    for (i, label) in labels.iter().enumerate() {
        let y0 = 36.0 + i as f64 * row_h;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y0 + row_h / 2.0,
            escape(label)
        );
        for (s, (_, values)) in series.iter().enumerate() {
            let v = values.get(i).copied().unwrap_or(f64::NAN);
            if !v.is_finite() {
                continue;
            }
            let (a, b) = (x(0.0).min(x(v)), x(0.0).max(x(v)));
            let _ = writeln!(
                svg,
                r#"<rect x="{a:.1}" y="{:.1}" width="{:.1}" height="12" fill="{}"><title>{v:.3}</title></rect>"#,
                y0 + s as f64 * 14.0,
                (b - a).max(0.5),
                colors[s % colors.len()]
            );
        }
    }
    for (s, (name, _)) in series.iter().enumerate() {
        let y = height - 20.0 * (series.len() - s) as f64 + 12.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{left}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{y}">{}</text>"#,
            y - 9.0,
            colors[s % colors.len()],
            left + 14.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Vertical bar chart of histogram counts.
pub fn histogram_svg(title: &str, hist: &R2Histogram) -> String {
    let labels = hist.labels();
    let max = hist.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let (bw, plot_h) = (48.0, 200.0);
    let width = 60.0 + bw * labels.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{}" font-family="sans-serif" font-size="10">"#,
        plot_h + 90.0
    );
    let _ = writeln!(svg, r#"<text x="10" y="18" font-size="14">{}</text>"#, escape(title));
    for (i, (count, label)) in hist.counts.iter().zip(&labels).enumerate() {
        let h = *count as f64 / max * plot_h;
        let x0 = 40.0 + i as f64 * bw;
        let _ = writeln!(
            svg,
            r##"<rect x="{x0}" y="{:.1}" width="{}" height="{h:.1}" fill="#3b6ea5"/><text x="{}" y="{:.1}" text-anchor="middle">{count}</text>"##,
            30.0 + plot_h - h,
            bw - 4.0,
            x0 + bw / 2.0 - 2.0,
            26.0 + plot_h - h
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end" transform="rotate(-45 {} {})">{}</text>"#,
            x0 + bw / 2.0,
            plot_h + 44.0,
            x0 + bw / 2.0,
            plot_h + 44.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::PipelineConfig;
use super::{create_dir, ModelKind, OutputLayout};
use crate::error::{Error, Result};
use crate::evaluation::{
    bar_chart_svg, compare_paths, default_r2_edges, format_r2, histogram_svg, mean_r2, parse_r2, r2_histogram,
    read_reports, write_comparison, OutcomeReport,
};
use crate::temporal::{TemporalRow, TransformKind};
use crate::transfer::FactorRow;

pub fn read_factor_report(path: &Path) -> Result<Vec<FactorRow>> {
    let mut rdr = crate::tabular::csv_reader(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(Error::format(path, "factor rows need 5 columns"));
        }
        out.push(FactorRow {
            factor_id: rec[0].to_string(),
            description: rec[1].to_string(),
            r2: parse_r2(&rec[2]).map_err(|m| Error::format(path, m))?,
            n_districts: rec[3].parse().map_err(|_| Error::format(path, "bad district count"))?,
            path: rec[4].to_string(),
        });
    }
    Ok(out)
}

fn read_temporal(path: &Path) -> Result<Vec<TemporalRow>> {
    let mut rdr = crate::tabular::csv_reader(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::format(path, "temporal rows need 4 columns"));
        }
        out.push(TemporalRow {
            outcome: rec[0].to_string(),
            transform: TransformKind::parse(&rec[1])?,
            r2: parse_r2(&rec[2]).map_err(|m| Error::format(path, m))?,
            n_tehsils: rec[3].parse().map_err(|_| Error::format(path, "bad tehsil count"))?,
        });
    }
    Ok(out)
}

fn optional<T>(path: &Path, read: impl Fn(&Path) -> Result<T>) -> Result<Option<T>> {
    if path.is_file() {
        read(path).map(Some)
    } else {
        log::info!("{} not found; section skipped", path.display());
        Ok(None)
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.3}")).unwrap_or_else(|| format_r2(None))
}

fn write_svg(dir: &Path, name: &str, svg: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, svg).map_err(|e| Error::io(&path, e))
}

fn reports_section(md: &mut String, dir: &Path, title: &str, svg: &str, reports: &[OutcomeReport]) -> Result<()> {
    let _ = writeln!(md, "## {title}\n\n| outcome | R² | n |\n|---|---|---|");
    for r in reports {
        let _ = writeln!(md, "| {} | {} | {} |", r.outcome, fmt(r.r2), r.n);
    }
    let at_half = reports.iter().filter(|r| r.r2.is_some_and(|v| v >= 0.5)).count();
    let _ = writeln!(
        md,
        "\nMean R² {}; {at_half} of {} outcomes at R² ≥ 0.5.\n\n![{title}]({svg})\n",
        fmt(mean_r2(reports)),
        reports.len()
    );
    let labels: Vec<String> = reports.iter().map(|r| r.outcome.clone()).collect();
    let values: Vec<f64> = reports.iter().map(|r| r.r2.unwrap_or(0.0)).collect();
    write_svg(dir, svg, &bar_chart_svg(title, &labels, &[("R²", values)]))
}

/// Collects every report written by earlier stages into `report/report.md`
/// with SVG charts next to it. Sections whose inputs are missing are skipped.
pub fn report(cfg: &PipelineConfig) -> Result<PathBuf> {
    let out = OutputLayout::new(&cfg.out);
    let dir = out.report_dir();
    create_dir(&dir)?;
    let mut md = String::from("# Pipeline report\n\n");
    if let Some(seed) = cfg.seed {
        let _ = writeln!(md, "Seed {seed}.\n");
    }

    if let Some(r) = optional(&out.model_r2(ModelKind::Asset), read_reports)? {
        reports_section(&mut md, &dir, "Direct asset model, village validation", "asset_r2.svg", &r)?;
    }
    if let Some(r) = optional(&out.model_r2(ModelKind::Nightlight), read_reports)? {
        let _ = writeln!(md, "## Nightlight baseline\n\nValidation R² {}.\n", fmt(mean_r2(&r)));
    }
    if let Some(r) = optional(&out.transfer_dir(ModelKind::Nightlight).join("assets_r2.csv"), read_reports)? {
        reports_section(&mut md, &dir, "Assets from nightlight features", "nightlight_assets_r2.svg", &r)?;
    }

    let demo = |k: ModelKind| optional(&out.transfer_dir(k).join("demographics_r2.csv"), read_reports);
    if let (Some(a), Some(n)) = (demo(ModelKind::Asset)?, demo(ModelKind::Nightlight)?) {
        let cmp = compare_paths(&a, &n);
        write_comparison(&dir.join("comparison.csv"), &cmp)?;
        let _ = writeln!(
            md,
            "## Demographics by transfer path\n\n| outcome | asset | nightlight | delta |\n|---|---|---|---|"
        );
        for r in &cmp.rows {
            let _ = writeln!(md, "| {} | {:.3} | {:.3} | {:+.3} |", r.outcome, r.r2_asset, r.r2_nightlight, r.delta);
        }
        let _ = writeln!(
            md,
            "\nMean R²: asset {}, nightlight {}; mean delta {:+.3}.\n\n![demographics](demographics.svg)\n",
            fmt(mean_r2(&a)),
            fmt(mean_r2(&n)),
            cmp.mean_delta
        );
        let labels: Vec<String> = cmp.rows.iter().map(|r| r.outcome.clone()).collect();
        let series = [
            ("asset", cmp.rows.iter().map(|r| r.r2_asset).collect()),
            ("nightlight", cmp.rows.iter().map(|r| r.r2_nightlight).collect()),
        ];
        write_svg(&dir, "demographics.svg", &bar_chart_svg("Demographics R² by path", &labels, &series))?;
    }

    let mut survey_header = false;
    for path in ModelKind::ALL {
        for round in ["nfhs4", "nfhs5"] {
            let Some(rows) = optional(&out.transfer_dir(path).join(format!("{round}.csv")), read_factor_report)? else {
                continue;
            };
            if !survey_header {
                let _ = writeln!(
                    md,
                    "## Survey factors, district cross-validation\n\n| path | round | evaluated | R² ≥ 0 | R² ≥ 0.5 | chart |\n|---|---|---|---|---|---|"
                );
                survey_header = true;
            }
            let values: Vec<f64> = rows.iter().filter_map(|r| r.r2).collect();
            let hist = r2_histogram(&values, &default_r2_edges())?;
            let svg = format!("{}_{round}_hist.svg", path.name());
            write_svg(&dir, &svg, &histogram_svg(&format!("{} path, {round}", path.name()), &hist))?;
            let _ = writeln!(
                md,
                "| {} | {round} | {} | {} | {} | [histogram]({svg}) |",
                path.name(),
                hist.evaluated,
                hist.at_least_zero,
                hist.at_least_half
            );
        }
    }
    if survey_header {
        md.push('\n');
    }

    for path in ModelKind::ALL {
        let Some(rows) = optional(&out.temporal_dir(path).join("temporal.csv"), read_temporal)? else {
            continue;
        };
        let mut kinds: Vec<TransformKind> = rows.iter().map(|r| r.transform).collect();
        kinds.sort_unstable();
        kinds.dedup();
        let mut outcomes: Vec<&str> = Vec::new();
        for r in &rows {
            if !outcomes.contains(&r.outcome.as_str()) {
                outcomes.push(&r.outcome);
            }
        }
        let r2 = |o: &str, k: TransformKind| rows.iter().find(|r| r.outcome == o && r.transform == k).and_then(|r| r.r2);
        let _ = write!(md, "## Temporal evaluation, {} path\n\n| outcome |", path.name());
        for k in &kinds {
            let _ = write!(md, " {} |", k.name());
        }
        let _ = write!(md, "\n|---|{}\n", "---|".repeat(kinds.len()));
        for o in &outcomes {
            let _ = write!(md, "| {o} |");
            for k in &kinds {
                let _ = write!(md, " {} |", fmt(r2(o, *k)));
            }
            md.push('\n');
        }
        let svg = format!("{}_temporal.svg", path.name());
        let _ = writeln!(md, "\n![temporal]({svg})\n");
        let labels: Vec<String> = outcomes.iter().map(|s| s.to_string()).collect();
        let series: Vec<(&str, Vec<f64>)> = kinds
            .iter()
            .filter(|k| **k != TransformKind::None)
            .map(|k| (k.name(), outcomes.iter().map(|o| r2(o, *k).unwrap_or(0.0)).collect()))
            .collect();
        write_svg(&dir, &svg, &bar_chart_svg("Temporal R² by transform", &labels, &series))?;
    }

    let path = dir.join("report.md");
    fs::write(&path, md).map_err(|e| Error::io(&path, e))?;
    log::info!("stage=report path={}", path.display());
    Ok(path)
}

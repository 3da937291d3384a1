//! CSV and JSON report files for a sweep.

use super::stats::Summary;
use super::sweep::{SummaryRow, SweepTable};
use crate::error::{Error, Result};
use crate::rational::{format_rational, to_f64};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReportFiles {
    pub raw_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub summary_json: PathBuf,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn write_raw(table: &SweepTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "size_class",
        "alignment",
        "aon_fraction",
        "zipf_alpha",
        "latent_dim",
        "payoff_regime",
        "seed_index",
        "game_seed",
        "game_hash",
        "method",
        "status",
        "error",
        "payoff_sum",
        "payoffs",
        "l1_error",
        "delta_sum",
        "delta_min",
        "delta_variance",
        "fraction_improved",
    ])
    .map_err(csv_err)?;
    for r in &table.rows {
        let d = r.delta.as_ref();
        w.write_record([
            r.size_class.label().to_string(),
            r.cell.alignment.to_string(),
            r.cell.aon_fraction.to_string(),
            r.cell.zipf_alpha.to_string(),
            r.cell.latent_dim.to_string(),
            r.cell.payoff_regime.to_string(),
            r.seed_index.to_string(),
            r.game_seed.to_string(),
            r.game_hash.clone(),
            r.method.clone(),
            if r.error.is_some() { "error" } else { "ok" }.to_string(),
            r.error.clone().unwrap_or_default(),
            opt(r.payoffs.as_ref(), |p| format_rational(&p.total())),
            opt(r.payoffs.as_ref(), |p| {
                p.values().iter().map(format_rational).collect::<Vec<_>>().join(";")
            }),
            opt(r.l1_error.as_ref(), format_rational),
            opt(d, |d| format_rational(&d.sum)),
            opt(d, |d| format_rational(&d.min)),
            opt(d, |d| format_rational(&d.variance)),
            opt(d, |d| to_f64(&d.fraction_improved).to_string()),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn summary_fields(s: &Option<Summary>) -> [String; 3] {
    match s {
        Some(s) => [s.mean.to_string(), s.sd.to_string(), s.se.to_string()],
        None => Default::default(),
    }
}

fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = [
        "alignment",
        "aon_fraction",
        "zipf_alpha",
        "latent_dim",
        "payoff_regime",
        "method",
        "seeds",
        "errors",
    ]
    .map(String::from)
    .to_vec();
    for metric in ["l1_error", "delta_sum", "fraction_improved", "payoff_sum"] {
        for stat in ["mean", "sd", "se"] {
            header.push(format!("{metric}_{stat}"));
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.cell.alignment.to_string(),
            r.cell.aon_fraction.to_string(),
            r.cell.zipf_alpha.to_string(),
            r.cell.latent_dim.to_string(),
            r.cell.payoff_regime.to_string(),
            r.method.clone(),
            r.seeds.to_string(),
            r.errors.to_string(),
        ];
        for s in [&r.l1_error, &r.delta_sum, &r.fraction_improved, &r.payoff_sum] {
            rec.extend(summary_fields(s));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `raw.csv`, `summary.csv` and `summary.json` into `dir`.
pub fn emit_report(table: &SweepTable, dir: &Path) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir)?;
    let files = ReportFiles {
        raw_csv: dir.join("raw.csv"),
        summary_csv: dir.join("summary.csv"),
        summary_json: dir.join("summary.json"),
    };
    write_raw(table, &files.raw_csv)?;
    let summaries = table.summaries();
    write_summary(&summaries, &files.summary_csv)?;
    let json = serde_json::json!({
        "grid": table.grid,
        "methods": table.methods,
        "protocol": table.protocol,
        "cells": summaries,
    });
    let mut text = serde_json::to_string_pretty(&json)?;
    text.push('\n');
    std::fs::write(&files.summary_json, text)?;
    Ok(files)
}

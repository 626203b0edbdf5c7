//! Single-file HTML report with inline CSS and SVG; no external references.

use std::fmt::Write as _;
use std::fs;

use super::run::{derived_seeds, EdaArtifacts, RunSummary, EDA_FILE, SUMMARY_FILE};
use super::workspace::{sha256_hex, ManifestEntry, Stage, Workspace};
use super::{PipelineError, Result};
use crate::eda::export::{self, escape};

pub const REPORT_FILE: &str = "index.html";

const STYLE: &str = "body{font-family:sans-serif;margin:2em auto;max-width:1000px;color:#222}\
h1{font-size:1.6em}h2{font-size:1.2em;border-bottom:1px solid #ccc;padding-bottom:.2em;margin-top:2em}\
table{border-collapse:collapse;margin:.5em 0}th,td{border:1px solid #ccc;padding:.3em .6em;text-align:right}\
th:first-child,td:first-child{text-align:left}.charts{display:flex;flex-wrap:wrap;gap:1em}\
.note{color:#666;font-style:italic}code{font-size:.9em}";

fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

fn comparison_section(s: &RunSummary, out: &mut String) {
    out.push_str("<section id=\"comparison\"><h2>Model comparison</h2>\n<table>\n<thead><tr><th>Model</th><th>Accuracy</th><th>Precision</th><th>Recall</th><th>F1-score</th></tr></thead>\n<tbody>\n");
    for r in &s.comparison.rows {
        let _ = writeln!(
            out,
            "<tr class=\"model-row\"><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
            escape(&r.model),
            format_args!("{:.6}", r.accuracy),
            fmt4(r.precision),
            fmt4(r.recall),
            fmt4(r.f1)
        );
    }
    out.push_str("</tbody>\n</table>\n<p class=\"note\">Precision, recall and F1 are support-weighted averages over classes.</p>\n");
    for r in &s.reports {
        let _ = write!(
            out,
            "<details><summary>{} confusion matrix</summary>\n<table class=\"confusion\"><thead><tr><th>true \\ predicted</th>",
            escape(&r.model)
        );
        let name = |c: &u32| s.class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
        for c in &r.confusion.classes {
            let _ = write!(out, "<th>{}</th>", escape(&name(c)));
        }
        out.push_str("</tr></thead><tbody>");
        for (c, row) in r.confusion.classes.iter().zip(&r.confusion.counts) {
            let _ = write!(out, "<tr><td>{}</td>", escape(&name(c)));
            for v in row {
                let _ = write!(out, "<td>{v}</td>");
            }
            out.push_str("</tr>");
        }
        out.push_str("</tbody></table></details>\n");
    }
    out.push_str("</section>\n");
}

fn eda_sections(s: &RunSummary, eda: Option<&EdaArtifacts>, out: &mut String) {
    let Some(eda) = eda else {
        out.push_str("<section id=\"eda\"><h2>Exploratory analysis</h2><p class=\"note\">Histograms, class distribution and correlation heatmap omitted: EDA was disabled for this run.</p></section>\n");
        return;
    };
    out.push_str("<section id=\"class-distribution\"><h2>Class distribution</h2>\n");
    out.push_str(&export::class_distribution_svg("Class distribution", &eda.class_distribution, &s.class_names));
    out.push_str("\n</section>\n<section id=\"histograms\"><h2>Feature histograms</h2>\n<div class=\"charts\">\n");
    for h in &eda.histograms {
        out.push_str(&export::histogram_svg(h));
        out.push('\n');
    }
    out.push_str("</div>\n</section>\n<section id=\"correlation\"><h2>Feature correlation</h2>\n");
    out.push_str(&export::heatmap_svg(&eda.correlation));
    out.push_str("\n</section>\n");
}

fn provenance_section(s: &RunSummary, out: &mut String) {
    out.push_str("<section id=\"provenance\"><h2>Run provenance</h2>\n<table>\n");
    let mut row = |k: &str, v: String| {
        let _ = writeln!(out, "<tr><th>{}</th><td>{}</td></tr>", escape(k), escape(&v));
    };
    row("Dataset", s.dataset.clone());
    row("Input SHA-256", s.input_hash.clone());
    row("Config hash", s.config_hash.clone());
    row("Seed", s.seed.to_string());
    for (name, seed) in derived_seeds(s.seed) {
        row(&format!("Seed ({name})"), seed.to_string());
    }
    row("Target", serde_json::to_value(s.target).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
    row("Features", s.features.join(", "));
    if !s.dropped_features.is_empty() {
        let dropped: Vec<String> = s
            .dropped_features
            .iter()
            .map(|d| format!("{} (r = {:.3} with {})", d.name, d.r, d.partner))
            .collect();
        row("Dropped features", dropped.join("; "));
    }
    row("Rows", format!("{} ({} skipped)", s.rows, s.skipped_rows));
    row("Train / test rows", format!("{} / {}", s.train_rows, s.test_rows));
    row("Synthetic training rows", s.synthetic_rows.to_string());
    row("Standardized", s.scaled.to_string());
    row(
        "Created",
        if s.created_at == 0 { "stable run".to_string() } else { format!("{} (unix seconds)", s.created_at) },
    );
    out.push_str("</table>\n</section>\n");
}

/// Render the report for a run. Output depends only on its inputs.
pub fn render_report(summary: &RunSummary, eda: Option<&EdaArtifacts>) -> String {
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Network flow analysis report</title>\n<style>");
    out.push_str(STYLE);
    out.push_str("</style>\n</head>\n<body>\n<h1>Network flow analysis report</h1>\n");
    comparison_section(summary, &mut out);
    eda_sections(summary, eda, &mut out);
    provenance_section(summary, &mut out);
    out.push_str("</body>\n</html>\n");
    out
}

fn read_json<T: serde::de::DeserializeOwned>(ws: &Workspace, file: &str) -> Result<Option<T>> {
    let path = ws.path(Stage::Results, file);
    match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| PipelineError::Json {
            path,
            message: e.to_string(),
        }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(PipelineError::io(&path, e)),
    }
}

/// Re-render `report/index.html` from the results stage and record it in
/// the report manifest.
pub fn emit_report(ws: &Workspace) -> Result<(RunSummary, std::path::PathBuf)> {
    let summary: RunSummary = read_json(ws, SUMMARY_FILE)?
        .ok_or_else(|| PipelineError::MissingResults(format!("{} not found in results stage", SUMMARY_FILE)))?;
    let eda: Option<EdaArtifacts> = if summary.eda_enabled {
        Some(
            read_json(ws, EDA_FILE)?
                .ok_or_else(|| PipelineError::MissingResults(format!("{EDA_FILE} not found in results stage")))?,
        )
    } else {
        None
    };
    let html = render_report(&summary, eda.as_ref());
    let path = ws.path(Stage::Report, REPORT_FILE);
    fs::write(&path, &html).map_err(|e| PipelineError::io(&path, e))?;
    let mut manifest = ws.manifest(Stage::Report)?;
    manifest.entries.insert(
        REPORT_FILE.to_string(),
        ManifestEntry {
            file: REPORT_FILE.to_string(),
            bytes: html.len() as u64,
            sha256: sha256_hex(html.as_bytes()),
            created_at: summary.created_at,
            step: "report".into(),
            config_hash: summary.config_hash.clone(),
        },
    );
    ws.write_manifest(Stage::Report, &manifest)?;
    Ok((summary, path))
}

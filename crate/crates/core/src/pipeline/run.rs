use std::collections::BTreeMap;
use std::fs;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::report::{render_report, REPORT_FILE};
use super::workspace::{init_workspace, sha256_hex, ManifestEntry, Stage, StageManifest, Workspace};
use super::{PipelineError, Result};
use crate::eda::{self, export, CorrelationMatrix, DroppedFeature, Histogram};
use crate::flowdata::{
    assemble, fit_encoders, load_flow_csv, ColumnKind, ColumnSpec, EncoderMap, LabelVector, Policy, RecordTable, Target, Value,
};
use crate::learners::{fit, model_to_json, ModelKind, Standardizer, TrainedModel};
use crate::metrics::{compare, evaluate, ComparisonTable, EvaluationReport};
use crate::rng::{derive_seed, streams};
use crate::sampling::{smote, stratified_split};

pub const SUMMARY_FILE: &str = "summary.json";
pub const EDA_FILE: &str = "eda.json";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Record timestamps as 0 so repeated runs are byte-identical.
    pub stable: bool,
    /// Skip the run when the workspace already holds verified results for
    /// the same input and config hashes.
    pub reuse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaArtifacts {
    pub histograms: Vec<Histogram>,
    pub correlation: CorrelationMatrix,
    pub class_distribution: BTreeMap<u32, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub dataset: String,
    pub input_hash: String,
    pub config_hash: String,
    pub seed: u64,
    pub target: Target,
    pub features: Vec<String>,
    pub dropped_features: Vec<DroppedFeature>,
    pub rows: usize,
    pub skipped_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub synthetic_rows: usize,
    pub scaled: bool,
    pub eda_enabled: bool,
    pub class_names: BTreeMap<u32, String>,
    pub models: Vec<ModelKind>,
    pub reports: Vec<EvaluationReport>,
    pub comparison: ComparisonTable,
    /// Unix seconds; 0 in stable mode.
    pub created_at: u64,
    /// Set on the returned value when a `reuse` run skipped every step.
    #[serde(skip)]
    pub reused: bool,
}

struct Recorder<'a> {
    ws: &'a Workspace,
    manifests: BTreeMap<Stage, StageManifest>,
    config_hash: String,
    created_at: u64,
    step: &'static str,
    written: Vec<(Stage, String)>,
}

impl Recorder<'_> {
    fn write(&mut self, stage: Stage, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.ws.path(stage, name);
        self.written.push((stage, name.to_string()));
        fs::write(&path, bytes).map_err(|e| PipelineError::io(&path, e))?;
        let entry = ManifestEntry {
            file: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
            created_at: self.created_at,
            step: self.step.to_string(),
            config_hash: self.config_hash.clone(),
        };
        self.manifests
            .entry(stage)
            .or_default()
            .entries
            .insert(name.to_string(), entry);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, stage: Stage, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
        text.push('\n');
        self.write(stage, name, text.as_bytes())
    }

    /// Run one step; on failure its files are deleted and the manifests
    /// rolled back, otherwise the manifests are persisted.
    fn step<T>(&mut self, name: &'static str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let snapshot = self.manifests.clone();
        self.step = name;
        self.written.clear();
        match f(self) {
            Ok(v) => {
                for (stage, m) in &self.manifests {
                    self.ws.write_manifest(*stage, m)?;
                }
                Ok(v)
            }
            Err(e) => {
                for (stage, file) in self.written.drain(..) {
                    let _ = fs::remove_file(self.ws.path(stage, &file));
                }
                self.manifests = snapshot;
                Err(PipelineError::Step {
                    step: name,
                    source: Box::new(e),
                })
            }
        }
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn file_stem_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn csv_bytes(table: &RecordTable) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    Ok(buf)
}

/// Display names per class code: `Normal`/`Attack` for the binary label,
/// decoded category names for the attack target.
pub fn class_names(y: &LabelVector, target: Target, target_encoder: Option<&EncoderMap>) -> BTreeMap<u32, String> {
    y.classes()
        .iter()
        .map(|&c| {
            let name = match (target, target_encoder) {
                (Target::BinaryLabel, _) => if c == 0 { "Normal" } else { "Attack" }.to_string(),
                (Target::AttackCategory, Some(e)) => e.decode(c).map_or_else(|| c.to_string(), |v| v.to_string()),
                (Target::AttackCategory, None) => c.to_string(),
            };
            (c, name)
        })
        .collect()
}

fn try_reuse(ws: &Workspace, config_hash: &str, input_hash: &str) -> Option<RunSummary> {
    let text = fs::read_to_string(ws.path(Stage::Results, SUMMARY_FILE)).ok()?;
    let summary: RunSummary = serde_json::from_str(&text).ok()?;
    if summary.config_hash != config_hash || summary.input_hash != input_hash {
        return None;
    }
    if Stage::ALL.iter().any(|&s| ws.verify(s).is_err()) {
        return None;
    }
    Some(RunSummary { reused: true, ..summary })
}

/// Execute ingest, curate, select, eda, split, smote, scale, train,
/// evaluate and report against `config.workspace`.
///
/// A fresh run clears every stage first. Seeds: split uses
/// `derive_seed(seed, SPLIT)`, SMOTE `derive_seed(seed, SMOTE)`, and each
/// model family derives its own stream from `seed`.
pub fn run_pipeline(config: &RunConfig, opts: RunOptions) -> Result<RunSummary> {
    config.validate()?;
    let kinds = config.model_kinds()?;
    if kinds.is_empty() {
        return Err(PipelineError::NoModelsEnabled);
    }
    let schema = config.resolve_schema()?;
    let config_hash = config.config_hash(&schema)?;
    let dataset_bytes = fs::read(&config.dataset).map_err(|e| PipelineError::Step {
        step: "ingest",
        source: Box::new(PipelineError::io(&config.dataset, e)),
    })?;
    let input_hash = sha256_hex(&dataset_bytes);

    let ws = init_workspace(&config.workspace)?;
    let _lock = ws.lock()?;
    if opts.reuse {
        if let Some(summary) = try_reuse(&ws, &config_hash, &input_hash) {
            return Ok(summary);
        }
    }
    ws.clear()?;

    let created_at = if opts.stable { 0 } else { now() };
    let mut rec = Recorder {
        ws: &ws,
        manifests: Stage::ALL.iter().map(|&s| (s, StageManifest::default())).collect(),
        config_hash: config_hash.clone(),
        created_at,
        step: "",
        written: Vec::new(),
    };
    let policy = if config.lenient { Policy::Lenient } else { Policy::Strict };
    let dataset_name = config
        .dataset
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset.csv".into());

    rec.step("ingest", |r| r.write(Stage::Raw, &dataset_name, &dataset_bytes))?;

    let (table, encoders, x, y) = rec.step("curate", |r| {
        let table = load_flow_csv(&ws.path(Stage::Raw, &dataset_name), &schema, policy)?;
        let encoders = fit_encoders(&table, &schema, config.target, policy)?;
        let (x, y) = assemble(&table, &schema, &encoders, config.target)?;
        let mut curated = table.clone();
        for e in &encoders {
            let codes = e.encode(&table.column_values(e.column())?)?;
            curated.push_column(
                ColumnSpec::new(format!("{}_code", e.column()), ColumnKind::Integer),
                codes.into_iter().map(|c| Value::Integer(i64::from(c))).collect(),
            )?;
        }
        r.write(Stage::Curated, "flows.csv", &csv_bytes(&curated)?)?;
        r.write_json(Stage::Curated, "encoders.json", &encoders)?;
        Ok((table, encoders, x, y))
    })?;

    let (x, dropped) = rec.step("select", |r| {
        if !config.selection.drop_correlated {
            return Ok((x, Vec::new()));
        }
        let selection = eda::drop_correlated(&eda::pearson(&x)?, config.selection.threshold)?;
        r.write_json(Stage::Results, "feature_selection.json", &selection)?;
        let x = x.select_columns(&selection.kept)?;
        Ok((x, selection.dropped))
    })?;

    let target_encoder = config
        .target
        .column(&schema)
        .ok()
        .and_then(|col| encoders.iter().find(|e| e.column() == col));
    let names = class_names(&y, config.target, target_encoder);

    let eda_artifacts = rec.step("eda", |r| {
        if !config.eda.enabled {
            return Ok(None);
        }
        let histograms = eda::histograms(&x, config.eda.bins)?;
        let correlation = eda::pearson(&x)?;
        let class_distribution = eda::class_distribution(&y);
        for h in &histograms {
            let stem = file_stem_safe(&h.column);
            r.write(Stage::Results, &format!("histogram_{stem}.csv"), export::histogram_csv(h).as_bytes())?;
            r.write(Stage::Results, &format!("histogram_{stem}.svg"), export::histogram_svg(h).as_bytes())?;
        }
        r.write(Stage::Results, "correlation.csv", export::correlation_csv(&correlation).as_bytes())?;
        r.write(Stage::Results, "correlation_heatmap.svg", export::heatmap_svg(&correlation).as_bytes())?;
        let dist_svg = export::class_distribution_svg("Class distribution", &class_distribution, &names);
        r.write(Stage::Results, "class_distribution.svg", dist_svg.as_bytes())?;
        let artifacts = EdaArtifacts {
            histograms,
            correlation,
            class_distribution,
        };
        r.write_json(Stage::Results, EDA_FILE, &artifacts)?;
        Ok(Some(artifacts))
    })?;

    let (x_train, y_train, x_test, y_test) = rec.step("split", |r| {
        let split = stratified_split(&y, config.split.test_fraction, derive_seed(config.seed, streams::SPLIT))?;
        r.write_json(Stage::Curated, "split.json", &split)?;
        Ok((
            x.select_rows(&split.train),
            y.select(&split.train),
            x.select_rows(&split.test),
            y.select(&split.test),
        ))
    })?;
    let train_rows = x_train.n_rows();

    let (x_train, y_train, synthetic_rows) = rec.step("smote", |_| {
        if !config.smote.enabled {
            return Ok((x_train, y_train, 0));
        }
        let set = smote(&x_train, &y_train, config.smote.k, derive_seed(config.seed, streams::SMOTE))?;
        let added = set.synthetic_count();
        Ok((set.x, set.y, added))
    })?;

    let (x_fit, scaler) = rec.step("scale", |_| {
        if !config.scale {
            return Ok((x_train, None));
        }
        let s = Standardizer::fit(&x_train)?;
        Ok((s.transform(&x_train)?, Some(s)))
    })?;

    let models: Vec<TrainedModel> = rec.step("train", |r| {
        let mut out = Vec::new();
        for &kind in &kinds {
            let mut m = fit(kind, &x_fit, &y_train, &config.hyperparameters, config.seed)?;
            if let Some(s) = &scaler {
                m = m.with_scaler(s.clone());
            }
            r.write(Stage::Models, &format!("{}.json", kind.short_name()), model_to_json(&m).as_bytes())?;
            out.push(m);
        }
        Ok(out)
    })?;

    let summary = rec.step("evaluate", |r| {
        let mut reports = Vec::new();
        for m in &models {
            let pred = m.predict(&x_test)?;
            let report = evaluate(m.kind().display_name(), y_test.values(), &pred, y.classes())?;
            r.write_json(Stage::Results, &format!("{}_evaluation.json", m.kind().short_name()), &report)?;
            reports.push(report);
        }
        let comparison = compare(&reports);
        r.write_json(Stage::Results, "comparison.json", &comparison)?;
        r.write(Stage::Results, "comparison.txt", comparison.render_text().as_bytes())?;
        let summary = RunSummary {
            dataset: dataset_name.clone(),
            input_hash: input_hash.clone(),
            config_hash: config_hash.clone(),
            seed: config.seed,
            target: config.target,
            features: x_test.names().to_vec(),
            dropped_features: dropped,
            rows: table.row_count(),
            skipped_rows: table.skipped_rows(),
            train_rows,
            test_rows: x_test.n_rows(),
            synthetic_rows,
            scaled: config.scale,
            eda_enabled: eda_artifacts.is_some(),
            class_names: names,
            models: kinds.clone(),
            reports,
            comparison,
            created_at,
            reused: false,
        };
        r.write_json(Stage::Results, SUMMARY_FILE, &summary)?;
        Ok(summary)
    })?;

    rec.step("report", |r| {
        let html = render_report(&summary, eda_artifacts.as_ref());
        r.write(Stage::Report, REPORT_FILE, html.as_bytes())
    })?;
    Ok(summary)
}

/// Seeds each component of a run draws from.
pub fn derived_seeds(seed: u64) -> BTreeMap<&'static str, u64> {
    BTreeMap::from([
        ("split", derive_seed(seed, streams::SPLIT)),
        ("smote", derive_seed(seed, streams::SMOTE)),
        ("tree", derive_seed(seed, streams::TREE)),
        ("forest", derive_seed(seed, streams::FOREST)),
        ("adaboost", derive_seed(seed, streams::ADABOOST)),
    ])
}

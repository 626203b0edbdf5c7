use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use flowguard_core::eda::{self, export};
use flowguard_core::flowdata::{
    assemble, fit_encoders, load_flow_csv, EncoderMap, FeatureMatrix, FlowSchema, LabelVector, Policy, RecordTable,
    Target,
};
use flowguard_core::learners::{load_model, ModelKind};
use flowguard_core::metrics::{compare, evaluate, EvaluationReport};
use flowguard_core::pipeline::{
    class_names, emit_report, eval_query, parse_query, run_pipeline, write_synthetic, PipelineError, RunConfig,
    RunOptions, RunSummary, Stage, Workspace, SUMMARY_FILE,
};
use flowguard_core::rng::{derive_seed, streams};
use flowguard_core::sampling::stratified_split;
use serde_json::{json, Value as Json};

use crate::error::CliError;
use crate::{Cli, Command, DataOpts, GlobalOpts, ModelArg, Outcome, TargetArg, WorkspaceOpts};

type Result<T> = std::result::Result<T, CliError>;

const DEFAULT_SEED: u64 = 7;

pub fn dispatch(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Inspect { csv, data } => inspect(csv, data),
        Command::Eda { csv, data, out, bins } => eda_cmd(g, csv, data, out, *bins),
        Command::Split {
            csv,
            data,
            test_fraction,
            out,
        } => split(g, csv, data, *test_fraction, out),
        Command::Train { model, ws, data } => train(g, model, ws, data.as_deref()),
        Command::Evaluate { model_file, ws, data } => evaluate_cmd(g, model_file, ws, data.as_deref()),
        Command::Compare { ws } => compare_cmd(g, ws),
        Command::Query {
            expr,
            ws,
            stage,
            file,
            columns,
            limit,
        } => query(g, expr, ws, stage, file, columns, *limit),
        Command::Run { ws, reuse } => run(g, ws, *reuse),
        Command::Report { ws } => report(g, ws),
        Command::Synth { rows, weights, out } => synth(g, *rows, weights, out),
    }
}

fn target(t: TargetArg) -> Target {
    match t {
        TargetArg::Binary => Target::BinaryLabel,
        TargetArg::Attack => Target::AttackCategory,
    }
}

fn target_name(t: Target) -> &'static str {
    match t {
        Target::BinaryLabel => "binary_label",
        Target::AttackCategory => "attack_category",
    }
}

struct Loaded {
    schema: FlowSchema,
    table: RecordTable,
    encoders: Vec<EncoderMap>,
    x: FeatureMatrix,
    y: LabelVector,
    target: Target,
}

impl Loaded {
    fn names(&self) -> BTreeMap<u32, String> {
        let col = self.target.column(&self.schema).ok();
        let enc = col.and_then(|c| self.encoders.iter().find(|e| e.column() == c));
        class_names(&self.y, self.target, enc)
    }
}

fn load(csv: &Path, data: &DataOpts) -> Result<Loaded> {
    let schema = match &data.schema {
        Some(p) => FlowSchema::from_json_file(p)?,
        None => FlowSchema::netflow_default(),
    };
    let policy = if data.lenient { Policy::Lenient } else { Policy::Strict };
    let target = target(data.target);
    let table = load_flow_csv(csv, &schema, policy)?;
    let encoders = fit_encoders(&table, &schema, target, policy)?;
    let (x, y) = assemble(&table, &schema, &encoders, target)?;
    Ok(Loaded {
        schema,
        table,
        encoders,
        x,
        y,
        target,
    })
}

fn load_config(opts: &WorkspaceOpts, g: &GlobalOpts) -> Result<RunConfig> {
    if !opts.config.is_file() {
        return Err(CliError::Usage(format!(
            "config file {} not found (pass --config)",
            opts.config.display()
        )));
    }
    let mut cfg = RunConfig::load(&opts.config)?;
    if let Some(ws) = &opts.workspace {
        cfg.workspace = ws.clone();
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if g.scale {
        cfg.scale = true;
    }
    if g.smote {
        cfg.smote.enabled = true;
    }
    if g.no_smote {
        cfg.smote.enabled = false;
    }
    if let Some(t) = g.threshold {
        cfg.selection.drop_correlated = true;
        cfg.selection.threshold = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn open_workspace(opts: &WorkspaceOpts, g: &GlobalOpts) -> Result<Workspace> {
    let root = match &opts.workspace {
        Some(ws) => ws.clone(),
        None => load_config(opts, g)?.workspace,
    };
    Ok(Workspace::open(&root)?)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn distribution_lines(counts: &BTreeMap<u32, usize>, names: &BTreeMap<u32, String>) -> (String, Json) {
    let total: usize = counts.values().sum();
    let width = names.values().map(String::len).max().unwrap_or(0);
    let mut text = String::new();
    let mut obj = serde_json::Map::new();
    for (code, &n) in counts {
        let name = names.get(code).cloned().unwrap_or_else(|| code.to_string());
        let pct = 100.0 * n as f64 / total.max(1) as f64;
        let _ = writeln!(text, "  {name:<width$}  {n:>9}  {pct:>6.2}%");
        obj.insert(name, json!(n));
    }
    (text, Json::Object(obj))
}

fn inspect(csv: &Path, data: &DataOpts) -> Result<Outcome> {
    let l = load(csv, data)?;
    let mut human = format!(
        "file: {}\nrows: {} ({} skipped)\ncolumns:\n",
        csv.display(),
        l.table.row_count(),
        l.table.skipped_rows()
    );
    let mut cols = Vec::new();
    for c in l.schema.columns() {
        let kind = serde_json::to_value(c.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let mut roles = Vec::new();
        if l.schema.features().contains(&c.name) {
            roles.push("feature");
        }
        if l.schema.encoded().contains(&c.name) {
            roles.push("encoded");
        }
        if l.schema.label() == c.name {
            roles.push("label");
        }
        if l.schema.attack() == Some(c.name.as_str()) {
            roles.push("attack");
        }
        let distinct = l.encoders.iter().find(|e| e.column() == c.name).map(EncoderMap::len);
        let _ = write!(human, "  {:<14} {:<8} {}", c.name, kind, roles.join(", "));
        if let Some(d) = distinct {
            let _ = write!(human, " ({d} distinct)");
        }
        human.push('\n');
        cols.push(json!({ "name": c.name, "kind": kind, "roles": roles, "distinct": distinct }));
    }
    let counts = eda::class_distribution(&l.y);
    let (text, dist) = distribution_lines(&counts, &l.names());
    let _ = write!(human, "class distribution ({}):\n{text}", target_name(l.target));
    Ok(Outcome {
        human,
        json: json!({
            "command": "inspect",
            "rows": l.table.row_count(),
            "skipped_rows": l.table.skipped_rows(),
            "columns": cols,
            "target": target_name(l.target),
            "class_distribution": dist,
        }),
    })
}

fn stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn eda_cmd(g: &GlobalOpts, csv: &Path, data: &DataOpts, out: &Path, bins: usize) -> Result<Outcome> {
    let l = load(csv, data)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let histograms = eda::histograms(&l.x, bins)?;
    let corr = eda::pearson(&l.x)?;
    let counts = eda::class_distribution(&l.y);
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        write_file(&out.join(&name), body)?;
        written.push(name);
        Ok(())
    };
    for h in &histograms {
        put(format!("histogram_{}.csv", stem(&h.column)), export::histogram_csv(h))?;
        put(format!("histogram_{}.svg", stem(&h.column)), export::histogram_svg(h))?;
    }
    put("correlation.csv".into(), export::correlation_csv(&corr))?;
    put("correlation_heatmap.svg".into(), export::heatmap_svg(&corr))?;
    put(
        "class_distribution.svg".into(),
        export::class_distribution_svg("Class distribution", &counts, &l.names()),
    )?;
    let selection = match g.threshold {
        Some(t) => {
            let s = eda::drop_correlated(&corr, t)?;
            put(
                "feature_selection.json".into(),
                serde_json::to_string_pretty(&s).expect("selection serializes"),
            )?;
            Some(s)
        }
        None => None,
    };

    let mut human = String::from("correlation (Pearson):\n");
    let width = corr.names.iter().map(String::len).max().unwrap_or(0).max(6);
    let _ = write!(human, "  {:width$}", "");
    for n in &corr.names {
        let _ = write!(human, " {n:>width$}");
    }
    human.push('\n');
    for (i, n) in corr.names.iter().enumerate() {
        let _ = write!(human, "  {n:<width$}");
        for j in 0..corr.names.len() {
            let _ = write!(human, " {:>width$.3}", corr.get(i, j));
        }
        human.push('\n');
    }
    if let Some(s) = &selection {
        for d in &s.dropped {
            let _ = writeln!(human, "drop {} (r = {:.3} with {})", d.name, d.r, d.partner);
        }
    }
    let _ = writeln!(human, "wrote {} files to {}", written.len(), out.display());
    Ok(Outcome {
        human,
        json: json!({
            "command": "eda",
            "out": out,
            "files": written,
            "correlation": corr,
            "class_distribution": counts,
            "selection": selection,
        }),
    })
}

fn split(g: &GlobalOpts, csv: &Path, data: &DataOpts, fraction: f64, out: &Path) -> Result<Outcome> {
    let l = load(csv, data)?;
    let seed = g.seed.unwrap_or(DEFAULT_SEED);
    let s = stratified_split(&l.y, fraction, derive_seed(seed, streams::SPLIT))?;
    write_file(out, serde_json::to_string_pretty(&s).expect("split serializes") + "\n")?;
    let names = l.names();
    let mut per_class = serde_json::Map::new();
    let mut human = format!("train {} / test {} rows (seed {seed})\n", s.train.len(), s.test.len());
    for &c in l.y.classes() {
        let tr = s.train.iter().filter(|&&i| l.y.values()[i] == c).count();
        let te = s.test.iter().filter(|&&i| l.y.values()[i] == c).count();
        let name = names.get(&c).cloned().unwrap_or_else(|| c.to_string());
        let _ = writeln!(human, "  {name}: train {tr}, test {te}");
        per_class.insert(name, json!({ "train": tr, "test": te }));
    }
    let _ = writeln!(human, "wrote {}", out.display());
    Ok(Outcome {
        human,
        json: json!({
            "command": "split",
            "seed": seed,
            "train": s.train.len(),
            "test": s.test.len(),
            "per_class": per_class,
            "out": out,
        }),
    })
}

fn model_names(models: &[ModelArg]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut add = |k: ModelKind| {
        let s = k.short_name().to_string();
        if !out.contains(&s) {
            out.push(s);
        }
    };
    for m in models {
        match m {
            ModelArg::Nb => add(ModelKind::NaiveBayes),
            ModelArg::Knn => add(ModelKind::Knn),
            ModelArg::Tree => add(ModelKind::DecisionTree),
            ModelArg::Rf => add(ModelKind::RandomForest),
            ModelArg::Ada => add(ModelKind::AdaBoost),
            ModelArg::All => ModelKind::COMPARED.into_iter().for_each(&mut add),
        }
    }
    out
}

fn summary_outcome(command: &str, s: &RunSummary, ws: &Path) -> Outcome {
    let mut human = String::new();
    if s.reused {
        human.push_str("inputs and config unchanged; reused existing results\n");
    }
    human.push_str(&s.comparison.render_text());
    let _ = writeln!(
        human,
        "train {} rows (+{} synthetic), test {} rows; config {}",
        s.train_rows,
        s.synthetic_rows,
        s.test_rows,
        &s.config_hash[..12]
    );
    let report = ws.join(Stage::Report.name()).join("index.html");
    let _ = writeln!(human, "report: {}", report.display());
    let mut json = serde_json::to_value(s).expect("summary serializes");
    json["command"] = json!(command);
    json["reused"] = json!(s.reused);
    json["report"] = json!(report);
    Outcome { human, json }
}

fn train(g: &GlobalOpts, models: &[ModelArg], opts: &WorkspaceOpts, data: Option<&Path>) -> Result<Outcome> {
    let mut cfg = load_config(opts, g)?;
    if let Some(d) = data {
        cfg.dataset = d.to_path_buf();
    }
    cfg.models = model_names(models);
    let s = run_pipeline(
        &cfg,
        RunOptions {
            stable: g.stable,
            reuse: false,
        },
    )?;
    Ok(summary_outcome("train", &s, &cfg.workspace))
}

fn run(g: &GlobalOpts, opts: &WorkspaceOpts, reuse: bool) -> Result<Outcome> {
    let cfg = load_config(opts, g)?;
    let s = run_pipeline(&cfg, RunOptions { stable: g.stable, reuse })?;
    Ok(summary_outcome("run", &s, &cfg.workspace))
}

fn read_results_json<T: serde::de::DeserializeOwned>(ws: &Workspace, stage: Stage, file: &str) -> Result<T> {
    let path = ws.path(stage, file);
    let text = fs::read_to_string(&path).map_err(|_| {
        PipelineError::MissingResults(format!("{file} not found in {stage} stage"))
    })?;
    serde_json::from_str(&text).map_err(|e| {
        PipelineError::Json {
            path,
            message: e.to_string(),
        }
        .into()
    })
}

fn evaluate_cmd(g: &GlobalOpts, model_file: &Path, opts: &WorkspaceOpts, data: Option<&Path>) -> Result<Outcome> {
    let model = load_model(model_file)?;
    let ws = open_workspace(opts, g)?;
    let summary: RunSummary = read_results_json(&ws, Stage::Results, SUMMARY_FILE)?;
    let encoders: Vec<EncoderMap> = read_results_json(&ws, Stage::Curated, "encoders.json")?;
    let encoders: Vec<EncoderMap> = encoders.into_iter().map(|e| e.with_policy(Policy::Lenient)).collect();
    let base = if opts.config.is_file() {
        RunConfig::load(&opts.config)?.resolve_schema()?
    } else {
        FlowSchema::netflow_default()
    };
    let schema = base.with_features(model.feature_names.clone())?;
    let (path, rows): (PathBuf, Option<Vec<usize>>) = match data {
        Some(d) => (d.to_path_buf(), None),
        None => {
            let split: flowguard_core::sampling::SplitIndices = read_results_json(&ws, Stage::Curated, "split.json")?;
            (ws.path(Stage::Raw, &summary.dataset), Some(split.test))
        }
    };
    let table = load_flow_csv(&path, &schema, Policy::Lenient)?;
    let table = match &rows {
        Some(r) => table.select_rows(r),
        None => table,
    };
    let (x, y) = assemble(&table, &schema, &encoders, summary.target)?;
    let pred = model.predict(&x)?;
    let mut classes: Vec<u32> = y.classes().to_vec();
    classes.extend(&model.classes);
    let report = evaluate(model.kind().display_name(), y.values(), &pred, &classes)?;
    let mut json = serde_json::to_value(&report).expect("report serializes");
    json["command"] = json!("evaluate");
    json["rows"] = json!(y.len());
    Ok(Outcome {
        human: report.render_text(),
        json,
    })
}

fn compare_cmd(g: &GlobalOpts, opts: &WorkspaceOpts) -> Result<Outcome> {
    let ws = open_workspace(opts, g)?;
    let manifest = ws.manifest(Stage::Results)?;
    let mut reports: Vec<EvaluationReport> = Vec::new();
    for name in manifest.entries.keys().filter(|n| n.ends_with("_evaluation.json")) {
        reports.push(read_results_json(&ws, Stage::Results, name)?);
    }
    if reports.is_empty() {
        return Err(PipelineError::MissingResults("no model evaluations in results stage".into()).into());
    }
    let table = compare(&reports);
    Ok(Outcome {
        human: table.render_text(),
        json: json!({ "command": "compare", "rows": table.rows }),
    })
}

fn query(
    g: &GlobalOpts,
    expr: &str,
    opts: &WorkspaceOpts,
    stage: &str,
    file: &str,
    columns: &[String],
    limit: Option<usize>,
) -> Result<Outcome> {
    let parsed = parse_query(expr).map_err(|source| CliError::Query {
        text: expr.to_string(),
        source,
    })?;
    let stage: Stage = stage.parse()?;
    let ws = open_workspace(opts, g)?;
    let result = eval_query(&ws, stage, file, &parsed, columns)?;
    let shown = limit.unwrap_or(result.count).min(result.count);
    let shown_table = result.table.select_rows(&(0..shown).collect::<Vec<_>>());
    let mut buf = Vec::new();
    shown_table.write_csv(&mut buf)?;
    let mut human = String::from_utf8(buf).expect("csv output is utf-8");
    let _ = writeln!(human, "{} rows matched", result.count);
    let names: Vec<&str> = shown_table.columns().iter().map(|c| c.name.as_str()).collect();
    Ok(Outcome {
        human,
        json: json!({
            "command": "query",
            "query": parsed.render(),
            "count": result.count,
            "columns": names,
            "rows": shown_table.rows(),
        }),
    })
}

fn report(g: &GlobalOpts, opts: &WorkspaceOpts) -> Result<Outcome> {
    let ws = open_workspace(opts, g)?;
    let (summary, path) = emit_report(&ws)?;
    Ok(Outcome {
        human: format!("wrote {}\n", path.display()),
        json: json!({
            "command": "report",
            "path": path,
            "models": summary.comparison.rows.len(),
        }),
    })
}

fn synth(g: &GlobalOpts, rows: usize, weights: &[f64], out: &Path) -> Result<Outcome> {
    if rows == 0 {
        return Err(CliError::Usage("--rows must be at least 1".into()));
    }
    let seed = g.seed.unwrap_or(DEFAULT_SEED);
    let table = write_synthetic(out, rows, weights, seed)?;
    let labels = table.column_values("Label")?;
    let attacks = labels
        .iter()
        .filter(|v| **v != flowguard_core::flowdata::Value::Integer(0))
        .count();
    Ok(Outcome {
        human: format!(
            "wrote {} rows ({} normal, {} attack) to {} (seed {seed})\n",
            rows,
            rows - attacks,
            attacks,
            out.display()
        ),
        json: json!({
            "command": "synth",
            "rows": rows,
            "normal": rows - attacks,
            "attack": attacks,
            "seed": seed,
            "out": out,
        }),
    })
}

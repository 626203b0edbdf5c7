use std::fs;
use std::path::{Path, PathBuf};

use flowguard_core::pipeline::{
    emit_report, eval_query, generate_synthetic, init_workspace, parse_query, run_pipeline, PipelineError,
    RunConfig, RunOptions, Stage, Workspace,
};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fixture_csv() -> PathBuf {
    fixtures().join("synthetic_1000_seed7.csv")
}

fn update_golden() -> bool {
    std::env::var_os("UPDATE_GOLDEN").is_some()
}

fn config(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::new(fixture_csv(), dir.join("ws"));
    cfg.seed = 7;
    cfg
}

#[test]
fn committed_fixture_matches_generator() {
    let mut bytes = Vec::new();
    generate_synthetic(1000, &[0.9, 0.1], 7).unwrap().write_csv(&mut bytes).unwrap();
    if update_golden() {
        fs::create_dir_all(fixtures()).unwrap();
        fs::write(fixture_csv(), &bytes).unwrap();
    }
    assert_eq!(fs::read(fixture_csv()).unwrap(), bytes);
}

#[test]
fn default_run_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let summary = run_pipeline(&cfg, RunOptions { stable: true, reuse: false }).unwrap();
    assert_eq!(summary.reports.len(), 4);
    assert_eq!(summary.rows, 1000);
    assert_eq!(summary.test_rows, 200);
    assert!(summary.synthetic_rows > 0);
    let ws = Workspace::open(&cfg.workspace).unwrap();
    for stage in Stage::ALL {
        ws.verify(stage).unwrap();
    }
    let html = fs::read_to_string(ws.path(Stage::Report, "index.html")).unwrap();
    assert_eq!(html.matches("<tr class=\"model-row\">").count(), 4);
    assert!(html.contains("id=\"histograms\""));
    assert!(!html.contains(" src=") && !html.contains(" href=") && !html.contains("url("));
    for file in ["nb.json", "knn.json", "rf.json", "ada.json"] {
        assert!(ws.manifest(Stage::Models).unwrap().get(file).is_some(), "{file}");
    }

    let golden = fixtures().join("report_synthetic_seed7.html");
    if update_golden() {
        fs::write(&golden, &html).unwrap();
    }
    assert_eq!(html, fs::read_to_string(&golden).unwrap());

    let (_, path) = emit_report(&ws).unwrap();
    assert_eq!(fs::read_to_string(path).unwrap(), html);
    ws.verify(Stage::Report).unwrap();
}

#[test]
fn reuse_skips_and_keeps_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let opts = RunOptions { stable: false, reuse: true };
    let first = run_pipeline(&cfg, opts).unwrap();
    assert!(!first.reused);
    let ws = Workspace::open(&cfg.workspace).unwrap();
    let before: Vec<_> = Stage::ALL.iter().map(|&s| ws.manifest(s).unwrap()).collect();
    let second = run_pipeline(&cfg, opts).unwrap();
    assert!(second.reused);
    assert_eq!(second.comparison, first.comparison);
    let after: Vec<_> = Stage::ALL.iter().map(|&s| ws.manifest(s).unwrap()).collect();
    assert_eq!(before, after);

    let mut changed = cfg.clone();
    changed.seed = 8;
    assert!(!run_pipeline(&changed, opts).unwrap().reused);
}

#[test]
fn no_models_enabled() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.models.clear();
    let err = run_pipeline(&cfg, RunOptions::default()).unwrap_err();
    assert!(matches!(err, PipelineError::NoModelsEnabled));
    assert_eq!(err.to_string(), "no models enabled");
}

#[test]
fn eda_disabled_is_noted() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.eda.enabled = false;
    cfg.models = vec!["nb".into()];
    run_pipeline(&cfg, RunOptions { stable: true, reuse: false }).unwrap();
    let ws = Workspace::open(&cfg.workspace).unwrap();
    let html = fs::read_to_string(ws.path(Stage::Report, "index.html")).unwrap();
    assert!(!html.contains("id=\"histograms\""));
    assert!(html.contains("EDA was disabled"));
    assert_eq!(html.matches("<tr class=\"model-row\">").count(), 1);
}

#[test]
fn failing_step_is_named_and_cleaned() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "L4_DST_PORT,L7_PROTO,TCP_FLAGS,Label,Attack\n80,7.0,27,0,Benign\n81,x,27,1,DoS\n").unwrap();
    let mut cfg = RunConfig::new(&data, dir.path().join("ws"));
    cfg.models = vec!["nb".into()];
    let err = run_pipeline(&cfg, RunOptions::default()).unwrap_err();
    assert_eq!(err.step(), Some("curate"));
    let ws = Workspace::open(&cfg.workspace).unwrap();
    assert!(ws.stage_files(Stage::Curated).unwrap().is_empty());
    assert!(ws.manifest(Stage::Curated).unwrap().entries.is_empty());
    assert_eq!(ws.stage_files(Stage::Raw).unwrap(), vec!["bad.csv".to_string()]);
    for stage in Stage::ALL {
        ws.verify(stage).unwrap();
    }
    assert!(!ws.root().join(".lock").exists());
}

#[test]
fn missing_results_for_report() {
    let dir = tempfile::tempdir().unwrap();
    let ws = init_workspace(dir.path()).unwrap();
    assert!(matches!(emit_report(&ws), Err(PipelineError::MissingResults(_))));
}

#[test]
fn query_curated_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.models = vec!["nb".into()];
    run_pipeline(&cfg, RunOptions::default()).unwrap();
    let ws = Workspace::open(&cfg.workspace).unwrap();
    let all = eval_query(&ws, Stage::Curated, "flows.csv", &parse_query("L4_DST_PORT >= 0").unwrap(), &[]).unwrap();
    assert_eq!(all.count, 1000);
    let attacks = eval_query(
        &ws,
        Stage::Curated,
        "flows.csv",
        &parse_query("Label == 1").unwrap(),
        &["L4_DST_PORT".to_string()],
    )
    .unwrap();
    assert_eq!(attacks.count, 100);
    assert_eq!(attacks.table.columns().len(), 1);
    assert!(matches!(
        eval_query(&ws, Stage::Curated, "nope.csv", &parse_query("Label == 1").unwrap(), &[]),
        Err(PipelineError::NotInManifest { .. })
    ));
}

mod commands;
mod error;

use std::io::{IsTerminal, Write};
use std::panic;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, ColorChoice, Parser, Subcommand, ValueEnum};
use serde_json::json;

use error::CliError;

/// Network-flow intrusion detection toolkit.
#[derive(Debug, Parser)]
#[command(name = "flowguard", version, arg_required_else_help = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Emit one JSON document on stdout instead of human output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Zero all timestamps so repeated runs give identical output.
    #[arg(long, global = true)]
    pub stable: bool,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Standardize features before training.
    #[arg(long, global = true)]
    pub scale: bool,
    /// Oversample minority classes of the training split.
    #[arg(long, global = true, overrides_with = "no_smote")]
    pub smote: bool,
    /// Train on the split as is.
    #[arg(long = "no-smote", global = true, action = ArgAction::SetTrue)]
    pub no_smote: bool,
    /// Drop one of every feature pair with |r| at or above this value.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    /// Binary `Label` column.
    Binary,
    /// Attack category column.
    Attack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Nb,
    Knn,
    Tree,
    Rf,
    Ada,
    /// The four compared families: nb, rf, knn, ada.
    All,
}

#[derive(Debug, Clone, Args)]
pub struct DataOpts {
    /// Schema JSON; the built-in NetFlow schema when omitted.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "binary")]
    pub target: TargetArg,
    /// Skip unparsable rows instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Args)]
pub struct WorkspaceOpts {
    /// Run config (TOML or JSON).
    #[arg(long, default_value = "run.toml")]
    pub config: PathBuf,
    /// Workspace root; overrides the config file.
    #[arg(long)]
    pub workspace: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Show schema, row counts and class distribution of a flow CSV.
    Inspect {
        csv: PathBuf,
        #[command(flatten)]
        data: DataOpts,
    },
    /// Write histograms, correlation matrix and charts for a flow CSV.
    Eda {
        csv: PathBuf,
        #[command(flatten)]
        data: DataOpts,
        /// Output directory.
        #[arg(long, default_value = "eda")]
        out: PathBuf,
        #[arg(long, default_value_t = flowguard_core::eda::DEFAULT_BINS)]
        bins: usize,
    },
    /// Stratified train/test split of a flow CSV, written as JSON indices.
    Split {
        csv: PathBuf,
        #[command(flatten)]
        data: DataOpts,
        #[arg(long, default_value_t = flowguard_core::sampling::DEFAULT_TEST_FRACTION)]
        test_fraction: f64,
        #[arg(long, default_value = "split.json")]
        out: PathBuf,
    },
    /// Train and evaluate models through the pipeline.
    Train {
        #[arg(long, value_enum, num_args = 1.., value_delimiter = ',', required = true)]
        model: Vec<ModelArg>,
        #[command(flatten)]
        ws: WorkspaceOpts,
        /// Dataset; overrides the config file.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Score a saved model on new data or on the workspace test split.
    Evaluate {
        #[arg(long)]
        model_file: PathBuf,
        #[command(flatten)]
        ws: WorkspaceOpts,
        /// Flow CSV to score; the workspace test split when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Print the model comparison table of a workspace.
    Compare {
        #[command(flatten)]
        ws: WorkspaceOpts,
    },
    /// Filter a stage table, e.g. `query "Label == 1 AND L7_PROTO == 7"`.
    Query {
        expr: String,
        #[command(flatten)]
        ws: WorkspaceOpts,
        #[arg(long, default_value = "curated")]
        stage: String,
        #[arg(long, default_value = "flows.csv")]
        file: String,
        /// Comma-separated output columns; all when omitted.
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
        /// Print at most this many rows (the count covers all matches).
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Run the full pipeline from a config file.
    Run {
        #[command(flatten)]
        ws: WorkspaceOpts,
        /// Skip the run when inputs and config are unchanged.
        #[arg(long)]
        reuse: bool,
    },
    /// Re-render the HTML report from the results stage.
    Report {
        #[command(flatten)]
        ws: WorkspaceOpts,
    },
    /// Generate a synthetic flow CSV.
    Synth {
        #[arg(long, default_value_t = 1000)]
        rows: usize,
        /// Class proportions, class 0 (benign) first.
        #[arg(long, value_delimiter = ',', default_values_t = [0.9, 0.1])]
        weights: Vec<f64>,
        #[arg(long, default_value = "synthetic.csv")]
        out: PathBuf,
    },
}

/// Result of a successful command: text for people, a JSON payload for
/// `--json` (merged with `"status": "ok"`).
pub struct Outcome {
    pub human: String,
    pub json: serde_json::Value,
}

fn use_color() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && std::io::stderr().is_terminal()
}

fn report_error(json: bool, err: &CliError) {
    if json {
        let mut doc = json!({ "status": "error", "kind": err.kind(), "message": err.to_string() });
        if let Some(step) = err.step() {
            doc["step"] = json!(step);
        }
        println!("{doc}");
    }
    let prefix = if use_color() { "\x1b[31merror:\x1b[0m" } else { "error:" };
    eprintln!("{prefix} {}", err.detail());
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let wants_json = argv.iter().skip(1).any(|a| a == "--json");
    let mut cmd = <Cli as clap::CommandFactory>::command();
    if !use_color() {
        cmd = cmd.color(ColorChoice::Never);
    }
    let matches = match cmd.try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if wants_json {
                let msg = e.kind().as_str().unwrap_or("invalid usage");
                println!("{}", json!({ "status": "error", "kind": "usage", "message": msg }));
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let cli = match <Cli as clap::FromArgMatches>::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let json_mode = cli.global.json;

    panic::set_hook(Box::new(|info| {
        eprintln!("internal error: {info}");
    }));
    match panic::catch_unwind(|| commands::dispatch(&cli)) {
        Ok(Ok(outcome)) => {
            let mut out = std::io::stdout().lock();
            if json_mode {
                let mut doc = json!({ "status": "ok" });
                if let (Some(dst), serde_json::Value::Object(src)) = (doc.as_object_mut(), outcome.json) {
                    dst.extend(src);
                }
                let _ = writeln!(out, "{doc}");
            } else {
                let _ = write!(out, "{}", outcome.human);
            }
            ExitCode::SUCCESS
        }
        Ok(Err(err)) => {
            report_error(json_mode, &err);
            ExitCode::from(1)
        }
        Err(_) => {
            if json_mode {
                println!("{}", json!({ "status": "error", "kind": "internal", "message": "internal error" }));
            }
            ExitCode::from(2)
        }
    }
}

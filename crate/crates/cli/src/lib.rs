//! The `hatespeech` command line: preprocessing, training, evaluation,
//! comparison tables, FLAIR export and the annotation server.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod server;

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use hatespeech::annotation::ProjectStore;
use hatespeech::corpus::{load_csv, ColumnMap};
use hatespeech::preprocess::PipelineLanguage;

use crate::config::RunConfig;
use crate::error::{CliError, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "hatespeech", version, about = "Hate-speech detection for English and Hinglish social media text")]
pub struct Cli {
    /// Overrides the split and training seeds of a config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run configuration (TOML, or a run.json to repeat a run).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Where run directories are written.
    #[arg(long, global = true, default_value = "runs")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LanguageArg {
    English,
    Hinglish,
}

impl From<LanguageArg> for PipelineLanguage {
    fn from(l: LanguageArg) -> Self {
        match l {
            LanguageArg::English => PipelineLanguage::English,
            LanguageArg::Hinglish => PipelineLanguage::Hinglish,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply a preprocessing pipeline and add a `processed_text` column.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        language: LanguageArg,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a model from a config and report on the dev split.
    Train {
        /// Config file; `--config` works too.
        config_file: Option<PathBuf>,
    },
    /// Evaluate a saved model on a labeled CSV, or score a predictions file.
    Evaluate {
        #[arg(long, requires = "test")]
        model: Option<PathBuf>,
        #[arg(long, requires = "model")]
        test: Option<PathBuf>,
        /// CSV with `gold` and `pred` columns.
        #[arg(long, conflicts_with_all = ["model", "test"])]
        predictions: Option<PathBuf>,
    },
    /// Train and test several configs and print one table.
    Compare {
        configs: Vec<PathBuf>,
    },
    /// Write `__label__<class> <text>` train/dev/test files.
    ExportFlair {
        #[arg(long)]
        input: PathBuf,
        /// Pipeline for every row; by default each row's language tag decides.
        #[arg(long, value_enum)]
        language: Option<LanguageArg>,
        /// Output directory (default: <out-dir>/flair).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the annotation service.
    Serve {
        #[arg(long)]
        project: PathBuf,
        /// Create the project from this corpus CSV.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
        /// Register an annotator id (repeatable).
        #[arg(long = "annotator")]
        annotators: Vec<String>,
        /// Directory of client assets served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Seconds a handed-out task stays reserved for its annotator.
        #[arg(long)]
        lease_secs: Option<u64>,
    },
}

fn run_name(config: &RunConfig, path: &Path) -> String {
    config.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    })
}

fn config_path(positional: Option<PathBuf>, global: Option<PathBuf>) -> Result<PathBuf, CliError> {
    positional
        .or(global)
        .ok_or_else(|| CliError::Usage("a config file is required (positional or --config)".into()))
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Preprocess { input, language, output } => {
            let s = commands::preprocess(&input, language.into(), &output)?;
            println!("rows: {}", s.rows);
            println!("emptied by pipeline: {}", s.emptied);
            println!("written: {}", output.display());
        }
        Command::Train { config_file } => {
            let path = config_path(config_file, cli.config)?;
            let mut config = RunConfig::load(&path)?;
            if let Some(s) = cli.seed {
                config.apply_seed(s);
            }
            let run_dir = cli.out_dir.join(run_name(&config, &path));
            let t = commands::train(&config, &run_dir, "train")?;
            print!("{}", commands::describe_history(&t.model));
            println!("model: {}", t.model_dir.display());
            println!("manifest: {}", t.run_dir.join("run.json").display());
            match &t.dev {
                Some(r) => {
                    println!();
                    print!("{}", commands::render_evaluation(&config.dataset_label(), &config.model_label(), r));
                }
                None => println!("dev split is empty; no report"),
            }
        }
        Command::Evaluate { model, test, predictions } => {
            let run_dir = cli.out_dir.join("evaluate");
            let (_, text) = match (model, test, predictions) {
                (_, _, Some(p)) => commands::evaluate_predictions(&p, &run_dir)?,
                (Some(m), Some(t), None) => commands::evaluate_model(&m, &t, &run_dir)?,
                _ => return Err(CliError::Usage("pass --model with --test, or --predictions".into())),
            };
            print!("{text}");
            println!("\nreport: {}", run_dir.join("report.json").display());
        }
        Command::Compare { mut configs } => {
            if let Some(c) = cli.config {
                configs.insert(0, c);
            }
            if configs.is_empty() {
                return Err(CliError::Usage("compare needs at least one config".into()));
            }
            let (table, results) = commands::compare(&configs, cli.seed, &cli.out_dir)?;
            print!("{table}");
            for r in results.iter().filter(|r| r.error.is_some()) {
                eprintln!("FAILED {}: {}", r.config.display(), r.error.as_deref().unwrap_or(""));
            }
            if let Some(r) = results.iter().find(|r| r.exit_code != 0) {
                return Ok(r.exit_code);
            }
        }
        Command::ExportFlair { input, language, out } => {
            let out = out.unwrap_or_else(|| cli.out_dir.join("flair"));
            let n = commands::export_flair_splits(&input, language.map(Into::into), cli.seed.unwrap_or(0), &out)?;
            println!("train: {}  dev: {}  test: {}", n.train, n.dev, n.test);
            println!("written: {}", out.display());
        }
        Command::Serve {
            project,
            init,
            listen,
            annotators,
            static_dir,
            lease_secs,
        } => {
            let addr: SocketAddr = listen
                .parse()
                .map_err(|e| CliError::Usage(format!("invalid --listen address `{listen}`: {e}")))?;
            let mut store = match init {
                Some(csv) => {
                    let data = load_csv(&csv, &ColumnMap::default())?.dataset;
                    ProjectStore::create(&project, &data, &annotators)?
                }
                None if !project.exists() => {
                    return Err(CliError::Data(format!(
                        "{} does not exist; pass --init <corpus.csv> to create it",
                        project.display()
                    )))
                }
                None => {
                    let mut s = ProjectStore::open(&project)?;
                    for a in &annotators {
                        s.register(a)?;
                    }
                    s
                }
            };
            if let Some(secs) = lease_secs {
                store.set_lease(Duration::from_secs(secs));
            }
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
            rt.block_on(server::serve(store, addr, static_dir))?;
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

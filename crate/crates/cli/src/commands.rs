use std::fs;
use std::path::{Path, PathBuf};

use hatespeech::corpus::{export_flair, load_csv, split, write_csv, ColumnMap, Dataset};
use hatespeech::metrics::{evaluate, render_confusion, render_table, Average, EvalReport, TableRow};
use hatespeech::models::{self, read_manifest, TrainedModel};
use hatespeech::preprocess::{run_pipeline, PipelineLanguage};
use hatespeech::{Error, Label, SplitSpec};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::RunManifest;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn load(path: &Path, columns: &ColumnMap) -> Result<Dataset, CliError> {
    let report = load_csv(path, columns)?;
    for e in &report.row_errors {
        log::warn!("{}: {e}", path.display());
    }
    if report.skipped_empty > 0 {
        log::warn!("{}: skipped {} rows with empty text", path.display(), report.skipped_empty);
    }
    Ok(report.dataset)
}

fn require_labels(data: &Dataset) -> Result<(), CliError> {
    let missing: Vec<String> = data.iter().filter(|c| c.gold_label.is_none()).map(|c| c.id.clone()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingLabels(missing).into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub rows: usize,
    /// Rows the pipeline reduced to an empty string.
    pub emptied: usize,
}

pub fn preprocess(input: &Path, language: PipelineLanguage, output: &Path) -> Result<PreprocessSummary, CliError> {
    let data = load(input, &ColumnMap::default())?;
    let processed = data.map_processed(|t| run_pipeline(language, t));
    let emptied = processed
        .iter()
        .filter(|c| c.processed_text.as_deref().is_some_and(str::is_empty))
        .count();
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let file = fs::File::create(output).map_err(|e| io_err(output, e))?;
    write_csv(&processed, file)?;
    Ok(PreprocessSummary {
        rows: processed.len(),
        emptied,
    })
}

pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub model_dir: PathBuf,
    pub model: TrainedModel,
    /// `None` when the dev split came out empty.
    pub dev: Option<EvalReport>,
    /// Preprocessed held-out split.
    pub test: Dataset,
}

fn report_on(model: &TrainedModel, data: &Dataset) -> Result<Option<EvalReport>, CliError> {
    if data.is_empty() {
        return Ok(None);
    }
    let preds = model.predict_dataset(data)?;
    let golds: Vec<Label> = data.iter().map(|c| c.gold_label.expect("labels checked")).collect();
    let predicted: Vec<Label> = preds.iter().map(|p| p.label).collect();
    Ok(Some(evaluate(&golds, &predicted)?))
}

/// Split, preprocess, train, save. Writes `model/`, `dev_report.json` and
/// `run.json` under `run_dir`.
pub fn train(config: &RunConfig, run_dir: &Path, command: &str) -> Result<TrainOutcome, CliError> {
    let mut manifest = RunManifest::start(command, Some(config.clone()));
    let data = load(&config.data.path, &config.data.columns)?;
    manifest.input(&config.data.path)?;
    require_labels(&data)?;
    let splits = split(&data, &config.split)?;
    let lang = config.pipeline.language;
    let prep = |d: &Dataset| d.map_processed(|t| run_pipeline(lang, t));
    let (tr, dev, test) = (prep(&splits.train), prep(&splits.dev), prep(&splits.test));

    let ctx = config.load_context();
    let model = models::train(&config.embedder, &ctx, lang, &tr, &dev, &config.classifier)?;

    create_dir(run_dir)?;
    let model_dir = run_dir.join("model");
    if model_dir.exists() {
        fs::remove_dir_all(&model_dir).map_err(|e| CliError::Runtime(format!("{}: {e}", model_dir.display())))?;
    }
    for f in model.save(&model_dir, &ctx)? {
        manifest.output(&f, run_dir)?;
    }
    let dev_report = report_on(&model, &dev)?;
    if let Some(r) = &dev_report {
        let path = run_dir.join("dev_report.json");
        write_json(&path, r)?;
        manifest.output(&path, run_dir)?;
    }
    manifest.finish(run_dir)?;
    Ok(TrainOutcome {
        run_dir: run_dir.to_path_buf(),
        model_dir,
        model,
        dev: dev_report,
        test,
    })
}

pub fn describe_history(model: &TrainedModel) -> String {
    let mut s = String::new();
    for h in &model.history {
        let dev = h.dev_accuracy.map_or("-".into(), |a| format!("{a:.4}"));
        s += &format!("epoch {:>3}  loss {:.4}  dev accuracy {dev}\n", h.epoch, h.train_loss);
    }
    if let Some(b) = model.best_epoch {
        s += &format!("kept epoch {b}\n");
    }
    s
}

fn model_label(dir: &Path) -> String {
    read_manifest(dir)
        .map(|m| {
            let name = if m.embedder.name.is_empty() { "embedder".to_string() } else { m.embedder.name };
            format!("{name} + {}", m.config.head.as_str().to_uppercase())
        })
        .unwrap_or_else(|_| dir.display().to_string())
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// The table row, the confusion block and the report path.
pub fn render_evaluation(dataset: &str, model: &str, report: &EvalReport) -> String {
    let mut s = render_table(&[TableRow::from_report(dataset, model, report, Average::Weighted)]);
    s.push('\n');
    s.push_str(&render_confusion(&report.confusion));
    s
}

pub fn evaluate_model(model_dir: &Path, test_csv: &Path, run_dir: &Path) -> Result<(EvalReport, String), CliError> {
    let weights_root = std::env::var_os(hatespeech::embeddings::WEIGHTS_DIR_ENV).map(PathBuf::from);
    let model = TrainedModel::load(model_dir, weights_root)?;
    let data = load(test_csv, &ColumnMap::default())?;
    if data.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no comments", test_csv.display())).into());
    }
    require_labels(&data)?;
    let report = report_on(&model, &data)?.expect("non-empty");

    let mut manifest = RunManifest::start("evaluate", None);
    manifest.input(&model_dir.join("model.json"))?;
    manifest.input(test_csv)?;
    create_dir(run_dir)?;
    let path = run_dir.join("report.json");
    write_json(&path, &report)?;
    manifest.output(&path, run_dir)?;
    manifest.finish(run_dir)?;
    let text = render_evaluation(&stem(test_csv), &model_label(model_dir), &report);
    Ok((report, text))
}

/// Offline mode: a CSV with `gold` and `pred` columns.
pub fn evaluate_predictions(predictions: &Path, run_dir: &Path) -> Result<(EvalReport, String), CliError> {
    let mut rdr = csv::Reader::from_path(predictions).map_err(|e| CliError::Data(format!("{}: {e}", predictions.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::Data(e.to_string()))?.clone();
    let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h.trim().to_lowercase().as_str()));
    let gold = col(&["gold", "label", "gold_label"]).ok_or_else(|| Error::MissingColumn("gold".into()))?;
    let pred = col(&["pred", "prediction", "predicted"]).ok_or_else(|| Error::MissingColumn("pred".into()))?;
    let (mut golds, mut preds) = (Vec::new(), Vec::new());
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| CliError::Data(e.to_string()))?;
        let parse = |j: usize| -> Result<Label, CliError> {
            row.get(j)
                .unwrap_or("")
                .parse::<Label>()
                .map_err(|e| CliError::Data(format!("{} line {}: {e}", predictions.display(), i + 2)))
        };
        golds.push(parse(gold)?);
        preds.push(parse(pred)?);
    }
    if golds.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no predictions", predictions.display())).into());
    }
    let report = evaluate(&golds, &preds)?;
    let mut manifest = RunManifest::start("evaluate", None);
    manifest.input(predictions)?;
    create_dir(run_dir)?;
    let path = run_dir.join("report.json");
    write_json(&path, &report)?;
    manifest.output(&path, run_dir)?;
    manifest.finish(run_dir)?;
    Ok((report.clone(), render_evaluation(&stem(predictions), "predictions", &report)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareResult {
    pub config: PathBuf,
    pub row: TableRow,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
    pub exit_code: i32,
}

/// Trains and tests every config in order. A failing run becomes a FAILED
/// row; the others still run.
pub fn compare(configs: &[PathBuf], seed: Option<u64>, out_dir: &Path) -> Result<(String, Vec<CompareResult>), CliError> {
    let mut results = Vec::new();
    for (i, path) in configs.iter().enumerate() {
        let loaded = RunConfig::load(path);
        let (dataset, model) = match &loaded {
            Ok(c) => (c.dataset_label(), c.model_label()),
            Err(_) => (stem(path), "-".into()),
        };
        let outcome = loaded.and_then(|mut c| {
            if let Some(s) = seed {
                c.apply_seed(s);
            }
            let run_dir = out_dir.join("compare").join(format!("{}-{}", i + 1, stem(path)));
            let t = train(&c, &run_dir, "compare")?;
            match report_on(&t.model, &t.test)? {
                Some(r) => Ok(r),
                None => Err(Error::EmptyInput("test split is empty".into()).into()),
            }
        });
        results.push(match outcome {
            Ok(report) => CompareResult {
                config: path.clone(),
                row: TableRow::from_report(&dataset, &model, &report, Average::Weighted),
                report: Some(report),
                error: None,
                exit_code: 0,
            },
            Err(e) => {
                log::error!("{}: {e}", path.display());
                CompareResult {
                    config: path.clone(),
                    row: TableRow::failed(&dataset, &model),
                    report: None,
                    error: Some(e.to_string()),
                    exit_code: e.exit_code(),
                }
            }
        });
    }
    let rows: Vec<TableRow> = results.iter().map(|r| r.row.clone()).collect();
    let table = render_table(&rows);
    let dir = out_dir.join("compare");
    create_dir(&dir)?;
    fs::write(dir.join("table.txt"), &table).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_json(&dir.join("results.json"), &results)?;
    Ok((table, results))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlairCounts {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

/// Preprocesses, splits 80/10/10 and writes `train.txt`, `dev.txt` and
/// `test.txt`. Without a language each row uses the pipeline of its own
/// language tag.
pub fn export_flair_splits(input: &Path, language: Option<PipelineLanguage>, seed: u64, out: &Path) -> Result<FlairCounts, CliError> {
    let data = load(input, &ColumnMap::default())?;
    require_labels(&data)?;
    let untagged: Vec<&str> = data
        .iter()
        .filter(|c| language.is_none() && PipelineLanguage::for_comment(c.language).is_none())
        .map(|c| c.id.as_str())
        .collect();
    if !untagged.is_empty() {
        return Err(CliError::Data(format!(
            "no pipeline language for comments {}; pass --language",
            untagged.join(", ")
        )));
    }
    let comments = data
        .iter()
        .map(|c| {
            let lang = language.or_else(|| PipelineLanguage::for_comment(c.language)).expect("checked above");
            let mut c = c.clone();
            c.processed_text = Some(run_pipeline(lang, &c.raw_text));
            c
        })
        .collect();
    let processed = Dataset::from_comments(data.name.clone(), comments)?;
    let splits = split(&processed, &SplitSpec::standard(seed))?;
    create_dir(out)?;
    Ok(FlairCounts {
        train: export_flair(&splits.train, out.join("train.txt"))?,
        dev: export_flair(&splits.dev, out.join("dev.txt"))?,
        test: export_flair(&splits.test, out.join("test.txt"))?,
    })
}

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{output_root, read_bytes, required, short_hash, Cli, CliError, Command, FileConfig};
use super::{EvaluateArgs, IngestArgs, PredictArgs, TrainArgs};
use crate::eval::{case_view, comparison_table, ingest_external_predictions, EvalReport, PredictionSet};
use crate::ingest::{
    body_warnings, build_windows, counts_by_target_year, filter_seasons, fit_normalizer,
    parse_seasons, published_split_counts, read_artifact, split, write_artifact, IngestError,
    SplitSpec, WindowSample,
};
use crate::models::{
    builtin_spec, fit_linear, read_model, write_model, Model, ModelError, ModelFile, Predictor,
    SavedModel, BUILTIN_NAMES, LINEAR_NAME,
};
use crate::train::{train_with, TrainConfig, TrainError};

/// Players at or above this true home-run total get a case view in every evaluation bundle.
const CASE_VIEW_MIN_HR: u32 = 40;

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(a) => run_ingest(&a, &file, out),
        Command::Train(a) => run_train(&a, &file, out),
        Command::Evaluate(a) => run_evaluate(&a, &file, out),
        Command::Predict(a) => run_predict(&a, &file, out),
    }
}

/// A file named by base name and content hash, so outputs do not depend on where runs happen.
#[derive(Debug, Clone, Serialize)]
struct FileRef {
    name: String,
    sha256: String,
}

impl FileRef {
    fn new(path: &Path, bytes: &[u8]) -> Self {
        Self {
            name: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: short_hash(bytes),
        }
    }
}

fn load_artifact(path: &Path) -> Result<(FileRef, Vec<WindowSample>), CliError> {
    let bytes = read_bytes(path)?;
    let samples = crate::ingest::read_artifact_from(bytes.as_slice())?;
    Ok((FileRef::new(path, &bytes), samples))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn published_note(out: &mut dyn Write, samples: &[WindowSample]) -> Result<(), CliError> {
    writeln!(out, "published split counts (informational):")?;
    for year in [2018, 2019] {
        let (train, test) = published_split_counts(year).expect("known year");
        let here_train = samples.iter().filter(|s| s.target_year < year).count();
        let here_test = samples.iter().filter(|s| s.target_year == year).count();
        writeln!(
            out,
            "  {year}: published train {train} test {test}; this dataset train {here_train} ({:+}) test {here_test} ({:+})",
            here_train as i64 - train as i64,
            here_test as i64 - test as i64
        )?;
    }
    Ok(())
}

pub fn run_ingest(args: &IngestArgs, file: &FileConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let input = required(args.input.clone().or_else(|| file.input.clone()), "input")?;
    let artifact = required(args.out.clone().or_else(|| file.data.clone()), "out")?;
    let bytes = read_bytes(&input)?;
    let seasons = parse_seasons(bytes.as_slice())?;
    for w in body_warnings(&seasons) {
        log::warn!("{w}");
        writeln!(out, "warning: {w}")?;
    }
    let kept = filter_seasons(&seasons);
    let samples = build_windows(&kept);
    writeln!(
        out,
        "seasons {} (dropped by playing-time filter {}), players {}",
        seasons.len(),
        seasons.len() - kept.len(),
        kept.iter().map(|s| s.player_id.as_str()).collect::<std::collections::BTreeSet<_>>().len()
    )?;
    writeln!(out, "samples per target year:")?;
    for (year, n) in counts_by_target_year(&samples) {
        writeln!(out, "  {year} {n}")?;
    }
    writeln!(out, "total samples {}", samples.len())?;
    published_note(out, &samples)?;
    if let Some(parent) = artifact.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_artifact(&artifact, &samples)?;
    writeln!(out, "wrote {}", artifact.display())?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrainRun {
    data: FileRef,
    model: String,
    split: SplitSpec,
    warm_start: Option<FileRef>,
    train: TrainConfig,
}

fn merged_train_config(args: &TrainArgs, file: &FileConfig) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        epochs: args.epochs.or(file.epochs).unwrap_or(d.epochs),
        learning_rate: args.learning_rate.or(file.learning_rate).unwrap_or(d.learning_rate),
        batch_size: args.batch_size.or(file.batch_size).unwrap_or(d.batch_size),
        seed: args.seed.or(file.seed).unwrap_or(d.seed),
        checkpoint_every: args.checkpoint_every.or(file.checkpoint_every).unwrap_or(d.checkpoint_every),
        clip_norm: args.clip_norm.or(file.clip_norm),
        ..d
    }
}

fn unknown_model(name: &str) -> CliError {
    CliError::Model(ModelError::UnknownModel {
        name: name.to_string(),
        valid: format!("{}, {LINEAR_NAME}", BUILTIN_NAMES.join(", ")),
    })
}

pub fn run_train(args: &TrainArgs, file: &FileConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let data_path = required(args.data.clone().or_else(|| file.data.clone()), "data")?;
    let name = required(args.model.clone().or_else(|| file.model.clone()), "model")?;
    let year = required(args.year.or(file.year), "year")?;
    let config = merged_train_config(args, file);
    config.validate()?;
    let spec = if name == LINEAR_NAME {
        None
    } else {
        Some(builtin_spec(&name).map_err(|_| unknown_model(&name))?)
    };
    let root = output_root(args.out.as_deref(), file);

    let (data, samples) = load_artifact(&data_path)?;
    let split_spec = SplitSpec {
        cutoff: year,
        holdout_start: args.holdout_start.or(file.holdout_start),
        retrain_prior: args.retrain_prior || file.retrain_prior.unwrap_or(false),
    };
    let split = split(&samples, split_spec)?;
    if split.train.is_empty() {
        return Err(IngestError::EmptyTrain.into());
    }

    let warm_path = args.warm_start.clone().or_else(|| file.warm_start.clone());
    let warm = match &warm_path {
        Some(p) => {
            let bytes = read_bytes(p)?;
            Some((FileRef::new(p, &bytes), read_model(&bytes)?))
        }
        None => None,
    };
    let run = TrainRun {
        data,
        model: name.clone(),
        split: split_spec,
        warm_start: warm.as_ref().map(|(r, _)| r.clone()),
        train: config.clone(),
    };
    let info = serde_json::to_value(&run)?;
    let run_hash = short_hash(info.to_string().as_bytes());
    writeln!(out, "effective config: {info}")?;
    writeln!(
        out,
        "split {year}: train {} test {} (train target years < {})",
        split.train.len(),
        split.test.len(),
        split_spec.train_end()
    )?;
    if let Some((train, test)) = published_split_counts(year) {
        writeln!(out, "published counts for {year} (informational): train {train} test {test}")?;
    }

    let normalizer = fit_normalizer(&split.train)?;
    let train_set = normalizer.apply(&split.train);
    let models_dir = root.join("models");
    create_dir(&models_dir)?;

    let (saved, history) = match spec {
        None => (SavedModel::Linear(fit_linear(&train_set)?), None),
        Some(spec) => {
            let mut model = match warm {
                None => Model::build(&spec, config.seed)?,
                Some((_, f)) => match f.model {
                    SavedModel::Network(m) if m.spec() == &spec => m,
                    _ => {
                        return Err(CliError::Usage(format!(
                            "warm-start file does not hold a {name} network"
                        )))
                    }
                },
            };
            let ckpt_dir = models_dir.join("checkpoints");
            let label = file_label(&name);
            let history = train_with(&mut model, &train_set, &config, None, |c| {
                let mut f = ModelFile::new(SavedModel::Network(c.model.clone()));
                f.normalizer = Some(normalizer.clone());
                f.info = info.clone();
                f.adam = Some(c.adam.clone());
                let bytes = write_model(&f).map_err(TrainError::Model)?;
                let path = ckpt_dir.join(format!("{label}-{year}-{run_hash}-e{:05}.hrsm", c.epoch));
                std::fs::create_dir_all(&ckpt_dir)
                    .and_then(|_| std::fs::write(&path, bytes))
                    .map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.display())))
            })?;
            (SavedModel::Network(model), Some(history))
        }
    };

    let mut model_file = ModelFile::new(saved);
    model_file.normalizer = Some(normalizer.clone());
    model_file.info = info;
    let bytes = write_model(&model_file)?;
    let hash = short_hash(&bytes);
    let stem = format!("{}-{year}-{hash}", file_label(&name));
    let model_path = models_dir.join(format!("{stem}.hrsm"));
    write_file(&model_path, &bytes)?;
    write_file(
        &models_dir.join(format!("{stem}.normalizer.json")),
        serde_json::to_string_pretty(&normalizer)?.as_bytes(),
    )?;

    let preds = model_file.model.predict(&train_set)?;
    let targets: Vec<f64> = train_set.iter().map(|s| f64::from(s.y)).collect();
    writeln!(out, "training mse (inference mode) {:.6}", crate::train::mse(&preds, &targets)?)?;
    if let Some(h) = history {
        let history_dir = root.join("history");
        create_dir(&history_dir)?;
        let path = history_dir.join(format!("{stem}.jsonl"));
        write_file(&path, h.to_jsonl().as_bytes())?;
        writeln!(out, "epochs {} final epoch mse {:.6}", h.epochs.len(), h.final_mse().unwrap_or(f64::NAN))?;
        writeln!(out, "wrote {}", path.display())?;
    }
    writeln!(out, "parameters {}", model_file.model.count_params())?;
    writeln!(out, "wrote {}", model_path.display())?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ModelRef {
    file: FileRef,
    label: String,
    info: serde_json::Value,
}

#[derive(Debug, Serialize)]
struct ExternalRef {
    label: String,
    file: FileRef,
    matched: usize,
    unmatched: usize,
    missing: usize,
}

#[derive(Debug, Serialize)]
struct EvalRun {
    data: FileRef,
    year: i32,
    models: Vec<ModelRef>,
    externals: Vec<ExternalRef>,
}

fn unique_label(base: &str, taken: &mut BTreeMap<String, usize>) -> String {
    let n = taken.entry(base.to_string()).or_insert(0);
    *n += 1;
    if *n == 1 {
        base.to_string()
    } else {
        format!("{base}-{n}")
    }
}

fn parse_external(spec: &str) -> (Option<String>, PathBuf) {
    match spec.split_once('=') {
        Some((label, path)) if !label.is_empty() => (Some(label.to_string()), PathBuf::from(path)),
        _ => (None, PathBuf::from(spec)),
    }
}

struct Sources {
    sets: Vec<PredictionSet>,
    models: Vec<ModelRef>,
    externals: Vec<ExternalRef>,
}

/// Loads every model and external file before anything is evaluated, so a bad input aborts the
/// run without partial output.
fn gather_sources(
    model_paths: &[PathBuf],
    external_specs: &[String],
    test: &[WindowSample],
) -> Result<Sources, CliError> {
    let mut loaded = Vec::new();
    for path in model_paths {
        let bytes = read_bytes(path)?;
        let file = read_model(&bytes)?;
        loaded.push((FileRef::new(path, &bytes), file));
    }
    let mut ext_loaded = Vec::new();
    for spec in external_specs {
        let (label, path) = parse_external(spec);
        let bytes = read_bytes(&path)?;
        let label = label.unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "external".into())
        });
        let set = ingest_external_predictions(bytes.as_slice(), &label)?;
        ext_loaded.push((FileRef::new(&path, &bytes), set));
    }

    let mut taken = BTreeMap::new();
    let mut sources = Sources {
        sets: Vec::new(),
        models: Vec::new(),
        externals: Vec::new(),
    };
    for (file_ref, file) in loaded {
        let label = unique_label(file.model.name(), &mut taken);
        let preds = file.predict_raw(test)?;
        sources.sets.push(PredictionSet::from_samples(label.clone(), test, &preds)?);
        sources.models.push(ModelRef {
            file: file_ref,
            label,
            info: file.info,
        });
    }
    for (file_ref, mut ext) in ext_loaded {
        let label = unique_label(&ext.source, &mut taken);
        ext.source = label.clone();
        let joined = ext.join(test)?;
        if !joined.unmatched.is_empty() {
            log::warn!("{label}: {} predictions match no test sample", joined.unmatched.len());
        }
        sources.externals.push(ExternalRef {
            label,
            file: file_ref,
            matched: joined.set.len(),
            unmatched: joined.unmatched.len(),
            missing: joined.missing.len(),
        });
        sources.sets.push(joined.set);
    }
    Ok(sources)
}

fn test_year(samples: &[WindowSample], year: i32) -> Result<Vec<WindowSample>, CliError> {
    let test: Vec<WindowSample> = samples.iter().filter(|s| s.target_year == year).cloned().collect();
    if test.is_empty() {
        return Err(IngestError::EmptyTest(year).into());
    }
    Ok(test)
}

pub fn run_evaluate(args: &EvaluateArgs, file: &FileConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let model_paths = if args.models.is_empty() {
        file.models.clone().unwrap_or_default()
    } else {
        args.models.clone()
    };
    let externals = if args.externals.is_empty() {
        file.external.clone().unwrap_or_default()
    } else {
        args.externals.clone()
    };
    if model_paths.is_empty() && externals.is_empty() {
        return Err(CliError::Usage("nothing to evaluate; pass --model or --external".into()));
    }
    let data_path = required(args.data.clone().or_else(|| file.data.clone()), "data")?;
    let year = required(args.year.or(file.year), "year")?;
    let root = output_root(args.out.as_deref(), file);

    let (data, samples) = load_artifact(&data_path)?;
    let test = test_year(&samples, year)?;
    let sources = gather_sources(&model_paths, &externals, &test)?;

    let mut reports = Vec::new();
    for set in &sources.sets {
        let mut report = EvalReport::build(set, year)?;
        report.unmatched = sources
            .externals
            .iter()
            .find(|e| e.label == set.source)
            .map(|e| e.unmatched);
        reports.push(report);
    }
    let big: Vec<String> = test
        .iter()
        .filter(|s| s.y >= CASE_VIEW_MIN_HR)
        .map(|s| s.player_id.clone())
        .collect();
    let set_refs: Vec<&PredictionSet> = sources.sets.iter().collect();
    let cases = case_view(&set_refs, &test, &big)?;

    let run = EvalRun {
        data,
        year,
        models: sources.models,
        externals: sources.externals,
    };
    let config = serde_json::to_value(&run)?;
    let hash = short_hash(config.to_string().as_bytes());
    let table = comparison_table(&reports);

    // Everything is computed; only now touch the output tree.
    let dir = root.join("reports");
    create_dir(&dir)?;
    let mut written = Vec::new();
    for report in &reports {
        let stem = format!("{}-{year}-{hash}", file_label(&report.source));
        let bundle = serde_json::json!({ "config": config, "report": report });
        let json = dir.join(format!("{stem}.json"));
        write_file(&json, (serde_json::to_string_pretty(&bundle)? + "\n").as_bytes())?;
        let txt = dir.join(format!("{stem}.txt"));
        write_file(&txt, report.render_text().as_bytes())?;
        written.extend([json, txt]);
    }
    let stem = format!("comparison-{year}-{hash}");
    let bundle = serde_json::json!({ "config": config, "reports": reports, "cases": cases });
    let json = dir.join(format!("{stem}.json"));
    write_file(&json, (serde_json::to_string_pretty(&bundle)? + "\n").as_bytes())?;
    let mut text = table.clone();
    if !cases.rows.is_empty() {
        text.push_str(&format!("\nPlayers with {CASE_VIEW_MIN_HR} or more home runs\n"));
        text.push_str(&cases.render());
    }
    for r in &reports {
        text.push('\n');
        text.push_str(&r.render_text());
    }
    let txt = dir.join(format!("{stem}.txt"));
    write_file(&txt, text.as_bytes())?;
    written.extend([json, txt]);

    writeln!(out, "effective config: {config}")?;
    for e in &run.externals {
        writeln!(
            out,
            "{}: {} matched, {} unmatched, {} test players without a prediction",
            e.label, e.matched, e.unmatched, e.missing
        )?;
    }
    write!(out, "{table}")?;
    for p in written {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}

pub fn run_predict(args: &PredictArgs, file: &FileConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let model_paths = if args.models.is_empty() {
        file.models.clone().unwrap_or_default()
    } else {
        args.models.clone()
    };
    if model_paths.is_empty() {
        return Err(CliError::Usage("missing required option --model".into()));
    }
    let externals = if args.externals.is_empty() {
        file.external.clone().unwrap_or_default()
    } else {
        args.externals.clone()
    };
    let players = if args.players.is_empty() {
        file.players.clone().unwrap_or_default()
    } else {
        args.players.clone()
    };
    if players.is_empty() {
        return Err(CliError::Usage("missing required option --player".into()));
    }
    let data_path = required(args.data.clone().or_else(|| file.data.clone()), "data")?;
    let year = required(args.year.or(file.year), "year")?;
    let samples = read_artifact(&data_path)?;
    let test = test_year(&samples, year)?;
    let chosen: Vec<WindowSample> = players
        .iter()
        .map(|id| {
            test.iter()
                .find(|s| &s.player_id == id)
                .cloned()
                .ok_or_else(|| crate::eval::EvalError::UnknownPlayer(id.clone()))
        })
        .collect::<Result<_, _>>()?;
    let sources = gather_sources(&model_paths, &externals, &chosen)?;
    let refs: Vec<&PredictionSet> = sources.sets.iter().collect();
    write!(out, "{}", case_view(&refs, &chosen, &players)?.render())?;
    Ok(())
}

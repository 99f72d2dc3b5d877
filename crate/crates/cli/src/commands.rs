use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use concentration::features::{emit_2d_histogram, extract_features, FeatureVector};
use concentration::kalman::{run_filter, EstimationSeries};
use concentration::keypoint_io::{parse_trace, serialize_trace, Label, LabeledTrace};
use concentration::mixture_fit::{
    build_histogram, curve, fit_bimodal, Bimodal, BimodalFit, Histogram1D,
};
use concentration::mlp::{
    accuracy, kfold_cv, load_model, predict_series, save_model, train as train_model, Classifier,
    Dataset, RecognitionSeries,
};
use concentration::synth::generate_dataset;
use concentration::Error;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::output::{self, SeriesRow, Staged};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug)]
pub struct CommandError {
    pub code: u8,
    pub source: anyhow::Error,
}

impl CommandError {
    pub fn input(e: impl Into<anyhow::Error>) -> Self {
        CommandError {
            code: EXIT_INPUT,
            source: e.into(),
        }
    }

    pub fn data(e: impl Into<anyhow::Error>) -> Self {
        CommandError {
            code: EXIT_DATA,
            source: e.into(),
        }
    }
}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_)
            | Error::Parse { .. }
            | Error::PointCount { .. }
            | Error::OutOfRange { .. }
            | Error::FrameOrder { .. }
            | Error::Config(_)
            | Error::Version { .. }
            | Error::Corrupt(_) => EXIT_INPUT,
            Error::InsufficientData(_) | Error::ShapeMismatch { .. } => EXIT_DATA,
            Error::NonFinite(_) => EXIT_NUMERIC,
        };
        CommandError {
            code,
            source: e.into(),
        }
    }
}

type CmdResult = Result<(), CommandError>;

/// Attaches a file name to a library error without changing its exit code.
fn at(path: &Path) -> impl Fn(Error) -> CommandError + '_ {
    move |e| {
        let mut err = CommandError::from(e);
        err.source = err.source.context(path.display().to_string());
        err
    }
}

pub struct Context {
    pub cfg: PipelineConfig,
    pub out_dir: PathBuf,
}

impl Context {
    fn manifest(&self, command: &str, inputs: &[&Path]) -> String {
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            inputs: Vec<String>,
            config: &'a PipelineConfig,
        }
        let m = Manifest {
            command,
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            config: &self.cfg,
        };
        serde_json::to_string_pretty(&m).expect("config serializes") + "\n"
    }

    fn commit(&self, staged: Staged) -> CmdResult {
        let written = staged.commit(&self.out_dir).map_err(CommandError::input)?;
        for p in written {
            log::info!("wrote {}", p.display());
        }
        Ok(())
    }
}

fn read_trace(path: &Path) -> Result<LabeledTrace, CommandError> {
    let file =
        File::open(path).map_err(|e| CommandError::input(anyhow!("{}: {e}", path.display())))?;
    parse_trace(BufReader::new(file), None, None).map_err(at(path))
}

fn read_model(path: &Path) -> Result<Classifier, CommandError> {
    let file =
        File::open(path).map_err(|e| CommandError::input(anyhow!("{}: {e}", path.display())))?;
    Ok(load_model(BufReader::new(file))
        .map_err(at(path))?
        .classifier)
}

pub fn preprocess(ctx: &Context, traces: &[PathBuf]) -> CmdResult {
    let mut rows: Vec<FeatureVector> = Vec::new();
    let mut summary = Vec::new();
    for path in traces {
        let trace = read_trace(path)?;
        let set = extract_features(&trace, &ctx.cfg.features).map_err(at(path))?;
        summary.push(format!(
            "{}: {} windows kept, {} dropped",
            path.display(),
            set.vectors.len(),
            set.dropped_windows
        ));
        rows.extend(set.vectors);
    }

    let mut staged = Staged::default();
    staged.add("features.csv", output::features_csv(&rows));
    let inputs: Vec<&Path> = traces.iter().map(PathBuf::as_path).collect();
    staged.add("manifest.json", ctx.manifest("preprocess", &inputs));
    ctx.commit(staged)?;
    for line in summary {
        println!("{line}");
    }
    println!("{} feature rows", rows.len());
    Ok(())
}

#[derive(Serialize)]
struct FoldReport<'a> {
    folds: usize,
    stratified: bool,
    fold_sizes: Vec<usize>,
    fold_accuracies: &'a [f64],
    median_accuracy: f64,
    training_accuracy: f64,
    final_loss: f64,
}

pub fn train(ctx: &Context, features: &Path, folds: Option<usize>) -> CmdResult {
    let rows = output::read_features(features).map_err(CommandError::input)?;
    let dataset = Dataset::from_vectors(&rows).map_err(at(features))?;
    let mut cfg = ctx.cfg.train.clone();
    if let Some(k) = folds {
        cfg.folds = k;
    }
    if cfg.folds < 2 {
        return Err(CommandError::input(anyhow!(
            "k-fold cross validation needs at least 2 folds, got {}",
            cfg.folds
        )));
    }
    let (low, high) = dataset.class_counts();
    if low == 0 || high == 0 {
        return Err(CommandError::data(anyhow!(
            "{}: training data contains a single class ({low} low, {high} high)",
            features.display()
        )));
    }

    let report = kfold_cv(&dataset, &cfg).map_err(at(features))?;
    let outcome = train_model(&dataset, &cfg).map_err(at(features))?;
    let train_acc = accuracy(&outcome.classifier, &dataset, cfg.threshold)?;

    let mut model_bytes = Vec::new();
    save_model(&outcome.classifier, &cfg, &mut model_bytes)?;
    let fold_report = FoldReport {
        folds: cfg.folds,
        stratified: report.split.stratified,
        fold_sizes: report.split.folds.iter().map(Vec::len).collect(),
        fold_accuracies: &report.fold_accuracies,
        median_accuracy: report.median,
        training_accuracy: train_acc,
        final_loss: outcome.loss_history.last().copied().unwrap_or(f64::NAN),
    };

    let mut staged = Staged::default();
    staged.add("model.json", model_bytes);
    staged.add(
        "fold_report.json",
        serde_json::to_string_pretty(&fold_report).expect("report serializes") + "\n",
    );
    staged.add("manifest.json", ctx.manifest("train", &[features]));
    ctx.commit(staged)?;

    for (k, acc) in report.fold_accuracies.iter().enumerate() {
        println!("fold {k}: accuracy {acc:.4}");
    }
    println!("median accuracy {:.4}", report.median);
    Ok(())
}

fn recognition(
    ctx: &Context,
    trace: &LabeledTrace,
    trace_path: &Path,
    model_path: &Path,
) -> Result<(Vec<FeatureVector>, RecognitionSeries), CommandError> {
    let classifier = read_model(model_path)?;
    let set = extract_features(trace, &ctx.cfg.features).map_err(at(trace_path))?;
    if set.vectors.is_empty() {
        return Err(CommandError::data(anyhow!(
            "{}: no complete feature window ({} frames, {} dropped windows)",
            trace_path.display(),
            trace.len(),
            set.dropped_windows
        )));
    }
    let series = predict_series(&classifier, &set.vectors)?;
    Ok((set.vectors, series))
}

fn series_rows(
    windows: &[usize],
    s_r: &RecognitionSeries,
    s_e: Option<&EstimationSeries>,
) -> Vec<SeriesRow> {
    (0..s_r.values.len())
        .map(|i| SeriesRow {
            window_index: windows[i],
            t_seconds: s_r.t_seconds[i],
            s_r: s_r.values[i],
            s_e: s_e.map(|e| e.values[i]),
        })
        .collect()
}

pub fn recognize(ctx: &Context, trace: &Path, model: &Path) -> CmdResult {
    let (vectors, s_r) = recognition(ctx, &read_trace(trace)?, trace, model)?;
    let windows: Vec<usize> = vectors.iter().map(|v| v.window_index).collect();
    let mut staged = Staged::default();
    staged.add(
        "recognition.csv",
        output::series_csv(&series_rows(&windows, &s_r, None)),
    );
    staged.add("manifest.json", ctx.manifest("recognize", &[trace, model]));
    ctx.commit(staged)?;
    println!("{} recognition levels", s_r.values.len());
    Ok(())
}

pub fn estimate(ctx: &Context, recognition: &Path) -> CmdResult {
    let rows = output::read_series(recognition).map_err(CommandError::input)?;
    let s_r = RecognitionSeries {
        values: rows.iter().map(|r| r.s_r).collect(),
        t_seconds: rows.iter().map(|r| r.t_seconds).collect(),
    };
    let s_e = run_filter(&s_r, &ctx.cfg.kalman).map_err(at(recognition))?;
    let windows: Vec<usize> = rows.iter().map(|r| r.window_index).collect();
    let mut staged = Staged::default();
    staged.add(
        "estimation.csv",
        output::series_csv(&series_rows(&windows, &s_r, Some(&s_e))),
    );
    staged.add("manifest.json", ctx.manifest("estimate", &[recognition]));
    ctx.commit(staged)?;
    println!("{} estimation levels", s_e.values.len());
    Ok(())
}

#[derive(Serialize)]
struct FitReport<'a> {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
    #[serde(flatten)]
    params: Option<Bimodal>,
    residual_sse: Option<f64>,
    converged: Option<bool>,
    iterations: Option<usize>,
    bins: usize,
    sample_count: usize,
    config: &'a PipelineConfig,
}

struct FitArtifacts {
    histogram: Histogram1D,
    fit: Result<BimodalFit, Error>,
}

fn fit_levels(ctx: &Context, levels: &[f64]) -> Result<FitArtifacts, Error> {
    let histogram = build_histogram(levels, ctx.cfg.fit.bins)?;
    let fit = fit_bimodal(&histogram, None, &ctx.cfg.fit);
    Ok(FitArtifacts { histogram, fit })
}

fn stage_fit(ctx: &Context, staged: &mut Staged, levels: &[f64], art: &FitArtifacts) -> CmdResult {
    let base = FitReport {
        status: "fitted",
        message: None,
        params: None,
        residual_sse: None,
        converged: None,
        iterations: None,
        bins: art.histogram.bins(),
        sample_count: levels.len(),
        config: &ctx.cfg,
    };
    let report = match &art.fit {
        Ok(fit) => {
            let points = curve(&fit.params, ctx.cfg.fit.curve_points)?;
            staged.add("fit_curve.csv", output::curve_csv(&points));
            FitReport {
                params: Some(fit.params),
                residual_sse: Some(fit.residual_sse),
                converged: Some(fit.converged),
                iterations: Some(fit.iterations),
                ..base
            }
        }
        Err(e) => FitReport {
            status: "not_fitted",
            message: Some(e.to_string()),
            ..base
        },
    };
    staged.add("histogram.csv", output::histogram_csv(&art.histogram));
    staged.add(
        "fit_report.json",
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    );
    Ok(())
}

pub fn fit(ctx: &Context, series: &Path) -> CmdResult {
    let rows = output::read_series(series).map_err(CommandError::input)?;
    let levels: Vec<f64> = rows
        .iter()
        .map(|r| r.s_e)
        .collect::<Option<_>>()
        .ok_or_else(|| {
            CommandError::data(anyhow!("{}: missing s_e column values", series.display()))
        })?;
    let art = fit_levels(ctx, &levels).map_err(at(series))?;
    if let Err(e) = &art.fit {
        return Err(CommandError::data(anyhow!("{}: {e}", series.display())));
    }
    let mut staged = Staged::default();
    stage_fit(ctx, &mut staged, &levels, &art)?;
    staged.add("manifest.json", ctx.manifest("fit", &[series]));
    ctx.commit(staged)?;
    print_fit(&art);
    Ok(())
}

fn print_fit(art: &FitArtifacts) {
    match &art.fit {
        Ok(f) => println!(
            "mu1 {:.4} (s1 {:.4}), mu2 {:.4} (s2 {:.4}), converged {}",
            f.params.mu1, f.params.s1, f.params.mu2, f.params.s2, f.converged
        ),
        Err(e) => println!("no bimodal fit: {e}"),
    }
}

pub fn synth(ctx: &Context, traces_per_class: Option<usize>) -> CmdResult {
    let n = traces_per_class.unwrap_or(ctx.cfg.traces_per_class);
    let traces = generate_dataset(&ctx.cfg.synth, n)?;
    let mut staged = Staged::default();
    for (i, trace) in traces.iter().enumerate() {
        let tag = match trace.label() {
            Some(Label::High) => "high",
            _ => "low",
        };
        let mut bytes = Vec::new();
        serialize_trace(trace, &mut bytes)?;
        staged.add(format!("traces/trace_{i:04}_{tag}.jsonl"), bytes);
    }
    staged.add("manifest.json", ctx.manifest("synth", &[]));
    ctx.commit(staged)?;
    println!("{} traces written", traces.len());
    Ok(())
}

pub fn run(ctx: &Context, trace_path: &Path, model_path: &Path) -> CmdResult {
    let trace = read_trace(trace_path)?;
    let (vectors, s_r) = recognition(ctx, &trace, trace_path, model_path)?;
    let s_e = run_filter(&s_r, &ctx.cfg.kalman).map_err(at(trace_path))?;
    let windows: Vec<usize> = vectors.iter().map(|v| v.window_index).collect();
    let art = fit_levels(ctx, &s_e.values).map_err(at(trace_path))?;
    let grid = emit_2d_histogram(
        &trace,
        ctx.cfg.keypoint_histogram_bins,
        ctx.cfg.features.confidence_threshold,
    )?;

    let mut staged = Staged::default();
    staged.add("features.csv", output::features_csv(&vectors));
    staged.add(
        "series.csv",
        output::series_csv(&series_rows(&windows, &s_r, Some(&s_e))),
    );
    stage_fit(ctx, &mut staged, &s_e.values, &art)?;
    staged.add("keypoints_2d.csv", output::grid_csv(&grid));
    staged.add(
        "manifest.json",
        ctx.manifest("run", &[trace_path, model_path]),
    );
    ctx.commit(staged)?;

    println!("{} windows", s_e.values.len());
    print_fit(&art);
    Ok(())
}

//! Command-line surface: `gen-data`, `train`, `calibrate`, `evaluate`, `sweep`.
//!
//! All randomness comes from `--seed`, mixed with a per-command name
//! (`synth`, `train`, `noise`) so one number reproduces a whole run.
//! `calibrate` refuses any input path that names the test split: a file
//! whose stem is `test` or anything inside a directory called `test`.

use std::fs;
use std::path::{Component, Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    apply_temperature, conventional_predict, ensemble_mean_predict, fit_temperature,
    naive_subpatch_average, FittedTemperature,
};
use crate::error::{Error, Result};
use crate::io::{self, Dataset, LogitFile};
use crate::metrics::evaluate;
use crate::noise::{lambda_grid, noise_sweep, NoiseKind};
use crate::real::compensated_mean;
use crate::seed;
use crate::smoothing::{
    calibrate_beta, ensemble_sigma, ensemble_smoothed_predict, sigma_bar,
    variance_smoothed_forward, BetaCalibration,
};
use crate::synth::{
    ensemble_logits, generate_dataset, train_with_log, PatchClassifier, SynthDatasetSpec,
    TrainConfig,
};
use crate::types::{BetaPolicy, EnsembleLogits, LogitMatrix, ProbVector, SmoothingConfig};

#[derive(Debug, Parser)]
#[command(
    name = "varsmooth",
    version,
    about = "Variance-based softmax smoothing and calibration"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate train/val/test splits of the synthetic sub-patch task.
    GenData(GenDataArgs),
    /// Train a per-patch linear classifier on a dataset.
    Train(TrainArgs),
    /// Fit β or a temperature on validation data.
    Calibrate(CalibrateArgs),
    /// Score predictions: JSON report plus reliability-bin CSV.
    Evaluate(EvaluateArgs),
    /// σ̄, entropy and accuracy of smoothed predictions across noise levels.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Conventional,
    NaiveAverage,
    TempScaling,
    VarianceSmoothing,
    EnsembleMean,
    EnsembleSmoothing,
}

impl Method {
    fn is_ensemble(self) -> bool {
        matches!(self, Method::EnsembleMean | Method::EnsembleSmoothing)
    }

    fn name(self) -> &'static str {
        match self {
            Method::Conventional => "conventional",
            Method::NaiveAverage => "naive_average",
            Method::TempScaling => "temp_scaling",
            Method::VarianceSmoothing => "variance_smoothing",
            Method::EnsembleMean => "ensemble_mean",
            Method::EnsembleSmoothing => "ensemble_smoothing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "kebab-case")]
pub enum BetaMode {
    Fixed,
    MeanOffset,
    NegPercentile,
}

#[derive(Debug, Clone, Args)]
pub struct SmoothingArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = BetaMode::Fixed)]
    pub beta_mode: BetaMode,
    /// β for `--beta-mode fixed`.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta_value: f64,
    /// c in β = mean(validation σ̄) + c.
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub beta_offset: f64,
    /// q in β = −percentile_q(validation σ̄).
    #[arg(long, default_value_t = 95.0)]
    pub beta_percentile: f64,
    #[arg(long, default_value_t = 1)]
    pub pool_kernel: usize,
    #[arg(long, default_value_t = 1)]
    pub pool_stride: usize,
}

impl SmoothingArgs {
    fn policy(&self) -> BetaPolicy<f64> {
        match self.beta_mode {
            BetaMode::Fixed => BetaPolicy::Fixed(self.beta_value),
            BetaMode::MeanOffset => BetaPolicy::MeanOffset(self.beta_offset),
            BetaMode::NegPercentile => BetaPolicy::NegPercentile(self.beta_percentile),
        }
    }

    fn config(&self) -> Result<SmoothingConfig<f64>> {
        SmoothingConfig::new(
            self.alpha,
            self.policy(),
            self.pool_kernel,
            self.pool_stride,
        )
    }
}

/// Where predictions come from: either a `VSD` dataset run through
/// `--model` (or `--members`), or `VSL`/`VSE` logit files plus `--labels`.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Model (`VSM`) applied to a `VSD` dataset.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Ensemble member models (`VSM`) applied to a `VSD` dataset.
    #[arg(long, num_args = 2..)]
    pub members: Vec<PathBuf>,
    /// One label per line, in the order of the `--in` logit files.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Multiplies every logit, e.g. 5 to make a model overconfident.
    #[arg(long, default_value_t = 1.0)]
    pub logit_scale: f64,
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    /// Output directory for train.vsd, val.vsd, test.vsd and spec.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_val: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_test: usize,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 8)]
    pub patches: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub signal_strength: f64,
    #[arg(long, default_value_t = 1.0)]
    pub patch_noise: f64,
    #[arg(long, default_value_t = 0.75)]
    pub informative_fraction: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Model file; the training log goes next to it as `<stem>.log.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = TrainConfig::standard().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::standard().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::standard().batch_size)]
    pub batch_size: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    /// Calibration record (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    /// Record from `calibrate`; overrides the smoothing flags.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Output directory for report.json and bins.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// `VSD` dataset to perturb.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub logit_scale: f64,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    /// Variance-smoothing record from `calibrate`; overrides the smoothing flags.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Noise kinds to sweep; all four when omitted.
    #[arg(long, value_enum, num_args = 1..)]
    pub noise: Vec<NoiseArg>,
    /// `start:stop:steps`, inclusive.
    #[arg(long, default_value = "0:1:11")]
    pub lambda_grid: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for one `sweep_<kind>.csv` per noise kind.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Gaussian,
    Speckle,
    Affine,
    Elastic,
}

impl From<NoiseArg> for NoiseKind {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Gaussian => NoiseKind::Gaussian,
            NoiseArg::Speckle => NoiseKind::Speckle,
            NoiseArg::Affine => NoiseKind::Affine,
            NoiseArg::Elastic => NoiseKind::Elastic,
        }
    }
}

/// What `calibrate` writes and `evaluate`/`sweep` read back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CalibrationRecord {
    TempScaling {
        temperature: FittedTemperature<f64>,
        n_validation: usize,
    },
    VarianceSmoothing {
        smoothing: SmoothingConfig<f64>,
        beta: BetaCalibration<f64>,
    },
    EnsembleSmoothing {
        alpha: f64,
        beta: BetaCalibration<f64>,
    },
}

impl CalibrationRecord {
    fn method(&self) -> Method {
        match self {
            CalibrationRecord::TempScaling { .. } => Method::TempScaling,
            CalibrationRecord::VarianceSmoothing { .. } => Method::VarianceSmoothing,
            CalibrationRecord::EnsembleSmoothing { .. } => Method::EnsembleSmoothing,
        }
    }
}

/// Parses `start:stop:steps`.
pub fn parse_lambda_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::ConfigError(format!("lambda grid {text:?} is not start:stop:steps"));
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, steps] = parts.as_slice() else {
        return Err(bad());
    };
    lambda_grid(
        start.trim().parse().map_err(|_| bad())?,
        stop.trim().parse().map_err(|_| bad())?,
        steps.trim().parse().map_err(|_| bad())?,
    )
}

/// True when `path` names the held-out test split.
pub fn is_test_split(path: &Path) -> bool {
    let is_test = |name: &std::ffi::OsStr| {
        let name = name.to_string_lossy();
        let stem = name.split('.').next().unwrap_or_default();
        stem.eq_ignore_ascii_case("test")
    };
    path.components()
        .any(|c| matches!(c, Component::Normal(n) if is_test(n)))
}

enum Samples {
    SubPatch(Vec<LogitMatrix<f64>>),
    Ensemble(Vec<EnsembleLogits<f64>>),
}

impl Samples {
    fn len(&self) -> usize {
        match self {
            Samples::SubPatch(v) => v.len(),
            Samples::Ensemble(v) => v.len(),
        }
    }
}

fn scale_model(model: PatchClassifier, c: f64) -> Result<PatchClassifier> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::ConfigError(format!(
            "--logit-scale must be positive, got {c}"
        )));
    }
    Ok(if c == 1.0 { model } else { model.scaled(c) })
}

fn scale_logits(m: &crate::types::Matrix<f64>, c: f64) -> crate::types::Matrix<f64> {
    if c == 1.0 {
        m.clone()
    } else {
        m.map(|v| v * c)
    }
}

/// Loads labelled samples in the shape `method` needs.
fn load_samples(args: &InputArgs, method: Method) -> Result<(Samples, Vec<usize>)> {
    if !(args.logit_scale.is_finite() && args.logit_scale > 0.0) {
        return Err(Error::ConfigError(format!(
            "--logit-scale must be positive, got {}",
            args.logit_scale
        )));
    }
    let ensemble = method.is_ensemble();
    if ensemble && args.model.is_some() {
        return Err(Error::ConfigError(format!(
            "{} takes --members, not --model",
            method.name()
        )));
    }
    if !ensemble && !args.members.is_empty() {
        return Err(Error::ConfigError(format!(
            "{} takes --model, not --members",
            method.name()
        )));
    }
    let first = &args.inputs[0];
    if io::peek_format(first)? == "VSD" {
        if args.inputs.len() != 1 {
            return Err(Error::ConfigError(
                "a VSD dataset must be the only --in file".into(),
            ));
        }
        if args.labels.is_some() {
            return Err(Error::ConfigError(
                "--labels is only used with logit files".into(),
            ));
        }
        let Dataset { samples, .. } = io::read_dataset(first)?;
        let labels = samples.iter().map(|s| s.label).collect();
        let data = if ensemble {
            if args.members.len() < 2 {
                return Err(Error::ConfigError(format!(
                    "{} on a dataset needs at least two --members models",
                    method.name()
                )));
            }
            let members = args
                .members
                .iter()
                .map(|p| scale_model(io::read_model(p)?, args.logit_scale))
                .collect::<Result<Vec<_>>>()?;
            Samples::Ensemble(
                samples
                    .par_iter()
                    .map(|s| ensemble_logits(&members, &s.patches))
                    .collect::<Result<_>>()?,
            )
        } else {
            let path = args.model.as_ref().ok_or_else(|| {
                Error::ConfigError(format!("{} on a dataset needs --model", method.name()))
            })?;
            let model = scale_model(io::read_model(path)?, args.logit_scale)?;
            Samples::SubPatch(
                samples
                    .par_iter()
                    .map(|s| model.predict_logits(s))
                    .collect::<Result<_>>()?,
            )
        };
        return Ok((data, labels));
    }

    if args.model.is_some() || !args.members.is_empty() {
        return Err(Error::ConfigError(
            "--model and --members apply only to a VSD dataset".into(),
        ));
    }
    let labels_path = args
        .labels
        .as_ref()
        .ok_or_else(|| Error::ConfigError("logit files need --labels".into()))?;
    let labels = io::read_labels(labels_path)?;
    if labels.len() != args.inputs.len() {
        return Err(Error::LengthMismatch {
            left: args.inputs.len(),
            right: labels.len(),
        });
    }
    let files = args
        .inputs
        .par_iter()
        .map(|p| io::read_logits(p).map(|f| (p, f)))
        .collect::<Result<Vec<_>>>()?;
    let c = args.logit_scale;
    let wrong_kind = |p: &Path| {
        Error::ConfigError(format!(
            "{} holds {} logits, which {} cannot use",
            p.display(),
            if ensemble { "sub-patch" } else { "ensemble" },
            method.name()
        ))
    };
    let data = if ensemble {
        Samples::Ensemble(
            files
                .into_iter()
                .map(|(p, f)| match f {
                    LogitFile::Ensemble(e) => EnsembleLogits::new(scale_logits(e.matrix(), c)),
                    LogitFile::SubPatch(_) => Err(wrong_kind(p)),
                })
                .collect::<Result<_>>()?,
        )
    } else {
        Samples::SubPatch(
            files
                .into_iter()
                .map(|(p, f)| match f {
                    LogitFile::SubPatch(m) => LogitMatrix::new(scale_logits(m.matrix(), c)),
                    LogitFile::Ensemble(_) => Err(wrong_kind(p)),
                })
                .collect::<Result<_>>()?,
        )
    };
    Ok((data, labels))
}

fn sub_patch(samples: Samples) -> Vec<LogitMatrix<f64>> {
    match samples {
        Samples::SubPatch(v) => v,
        Samples::Ensemble(_) => unreachable!("load_samples checks the kind"),
    }
}

fn ensemble(samples: Samples) -> Vec<EnsembleLogits<f64>> {
    match samples {
        Samples::Ensemble(v) => v,
        Samples::SubPatch(_) => unreachable!("load_samples checks the kind"),
    }
}

fn read_record(path: &Path, method: Method) -> Result<CalibrationRecord> {
    let record: CalibrationRecord = io::read_json(path)?;
    if record.method() != method {
        return Err(Error::ConfigError(format!(
            "{} holds a {} calibration, not {}",
            path.display(),
            record.method().name(),
            method.name()
        )));
    }
    Ok(record)
}

/// β from the flags alone, which only a fixed policy allows.
fn flag_beta(args: &SmoothingArgs) -> Result<BetaCalibration<f64>> {
    match args.policy() {
        BetaPolicy::Fixed(v) => Ok(BetaCalibration::fixed(v)),
        _ => Err(Error::ConfigError(
            "mean-offset and neg-percentile β need a --calibration record".into(),
        )),
    }
}

fn smoothing_from(
    args: &SmoothingArgs,
    calibration: Option<&PathBuf>,
) -> Result<(SmoothingConfig<f64>, BetaCalibration<f64>)> {
    match calibration {
        Some(path) => match read_record(path, Method::VarianceSmoothing)? {
            CalibrationRecord::VarianceSmoothing { smoothing, beta } => {
                smoothing.validate()?;
                Ok((smoothing, beta))
            }
            _ => unreachable!("read_record checks the method"),
        },
        None => Ok((args.config()?, flag_beta(args)?)),
    }
}

pub fn cmd_gen_data(args: &GenDataArgs) -> Result<()> {
    let n = [args.n_train, args.n_val, args.n_test];
    if n.contains(&0) {
        return Err(Error::ConfigError(
            "every split needs at least one sample".into(),
        ));
    }
    let spec = SynthDatasetSpec {
        n_samples: n.iter().sum(),
        classes: args.classes,
        patches: args.patches,
        dim: args.dim,
        signal_strength: args.signal_strength,
        patch_noise: args.patch_noise,
        informative_fraction: args.informative_fraction,
        seed: seed::derive(args.seed, "synth"),
    };
    let mut samples = generate_dataset(&spec)?;
    let test = samples.split_off(args.n_train + args.n_val);
    let val = samples.split_off(args.n_train);
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    for (name, split) in [("train.vsd", samples), ("val.vsd", val), ("test.vsd", test)] {
        let ds = Dataset {
            classes: args.classes,
            samples: split,
        };
        io::write_dataset(&args.out.join(name), &ds)?;
    }
    io::write_json(&args.out.join("spec.json"), &spec)
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let Dataset { classes, samples } = io::read_dataset(&args.input)?;
    let dim = samples.first().ok_or(Error::EmptyDataset)?.patches.cols();
    let seed = seed::derive(args.seed, "train");
    let config = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
    };
    let init = PatchClassifier::random(classes, dim, seed);
    let (model, log) = train_with_log(&init, &samples, config, seed)?;
    io::write_model(&args.out, &model)?;
    io::write_atomic(
        &args.out.with_extension("log.csv"),
        io::training_log_csv(&log).as_bytes(),
    )
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let mut guarded = args.input.inputs.iter().chain(&args.input.labels);
    if let Some(p) = guarded.find(|p| is_test_split(p)) {
        return Err(Error::ConfigError(format!(
            "calibrate must not read the test split ({})",
            p.display()
        )));
    }
    let record = match args.method {
        Method::TempScaling => {
            let (samples, labels) = load_samples(&args.input, args.method)?;
            let means = sub_patch(samples)
                .iter()
                .map(|z| z.mean_logits())
                .collect::<Vec<_>>();
            CalibrationRecord::TempScaling {
                temperature: fit_temperature(&means, &labels)?,
                n_validation: labels.len(),
            }
        }
        Method::VarianceSmoothing => {
            let smoothing = args.smoothing.config()?;
            let (samples, _) = load_samples(&args.input, args.method)?;
            let (k, s) = (smoothing.pool_kernel, smoothing.pool_stride);
            let sigma_bars = sub_patch(samples)
                .par_iter()
                .map(|z| sigma_bar(z, k, s))
                .collect::<Result<Vec<_>>>()?;
            CalibrationRecord::VarianceSmoothing {
                beta: calibrate_beta(&sigma_bars, smoothing.beta_policy)?,
                smoothing,
            }
        }
        Method::EnsembleSmoothing => {
            args.smoothing.policy().validate()?;
            let (samples, _) = load_samples(&args.input, args.method)?;
            let sigma_bars = ensemble(samples)
                .par_iter()
                .map(|e| {
                    let sigma = ensemble_sigma(e)?;
                    Ok(compensated_mean(sigma).expect("K >= 2"))
                })
                .collect::<Result<Vec<_>>>()?;
            CalibrationRecord::EnsembleSmoothing {
                alpha: args.smoothing.alpha,
                beta: calibrate_beta(&sigma_bars, args.smoothing.policy())?,
            }
        }
        other => {
            return Err(Error::ConfigError(format!(
                "{} has nothing to calibrate",
                other.name()
            )));
        }
    };
    io::write_json(&args.out, &record)
}

/// Predictions of `method` for every sample, in input order.
fn predict(args: &EvaluateArgs, samples: Samples) -> Result<Vec<ProbVector<f64>>> {
    let calibration = args.calibration.as_ref();
    match args.method {
        Method::Conventional => sub_patch(samples)
            .par_iter()
            .map(conventional_predict)
            .collect(),
        Method::NaiveAverage => sub_patch(samples)
            .par_iter()
            .map(naive_subpatch_average)
            .collect(),
        Method::TempScaling => {
            let path = calibration
                .ok_or_else(|| Error::ConfigError("temp_scaling needs --calibration".into()))?;
            let CalibrationRecord::TempScaling { temperature, .. } =
                read_record(path, Method::TempScaling)?
            else {
                unreachable!("read_record checks the method")
            };
            sub_patch(samples)
                .par_iter()
                .map(|z| apply_temperature(&z.mean_logits(), temperature.t))
                .collect()
        }
        Method::VarianceSmoothing => {
            let (config, beta) = smoothing_from(&args.smoothing, calibration)?;
            sub_patch(samples)
                .par_iter()
                .map(|z| variance_smoothed_forward(z, &config, &beta).map(|(p, _)| p))
                .collect()
        }
        Method::EnsembleMean => ensemble(samples)
            .par_iter()
            .map(ensemble_mean_predict)
            .collect(),
        Method::EnsembleSmoothing => {
            let (alpha, beta) = match calibration {
                Some(path) => match read_record(path, Method::EnsembleSmoothing)? {
                    CalibrationRecord::EnsembleSmoothing { alpha, beta } => (alpha, beta.beta),
                    _ => unreachable!("read_record checks the method"),
                },
                None => (args.smoothing.alpha, flag_beta(&args.smoothing)?.beta),
            };
            ensemble(samples)
                .par_iter()
                .map(|e| ensemble_smoothed_predict(e, alpha, beta).map(|(p, _)| p))
                .collect()
        }
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let (samples, labels) = load_samples(&args.input, args.method)?;
    if samples.len() == 0 {
        return Err(Error::EmptyEvaluationSet);
    }
    let predictions = predict(args, samples)?;
    let report = evaluate(&predictions, &labels, args.bins)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    io::write_json(&args.out.join("report.json"), &report)?;
    io::write_atomic(
        &args.out.join("bins.csv"),
        io::bins_csv(&report.bins).as_bytes(),
    )
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let lambdas = parse_lambda_grid(&args.lambda_grid)?;
    let (config, beta) = smoothing_from(&args.smoothing, args.calibration.as_ref())?;
    let model = scale_model(io::read_model(&args.model)?, args.logit_scale)?;
    let Dataset { samples, .. } = io::read_dataset(&args.input)?;
    let kinds: Vec<NoiseKind> = if args.noise.is_empty() {
        NoiseKind::ALL.to_vec()
    } else {
        args.noise.iter().map(|&n| n.into()).collect()
    };
    let sweep_seed = seed::derive(args.seed, "noise");
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    for kind in kinds {
        let curve = noise_sweep(&model, &samples, kind, &lambdas, &config, &beta, sweep_seed)?;
        let path = args.out.join(format!("sweep_{}.csv", kind.name()));
        io::write_atomic(&path, curve.to_csv().as_bytes())?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Train(a) => cmd_train(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

//! `ehr-interpret` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 I/O error.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ehr_interpret::cohort::{build_cohort, read_records, write_records, CohortSpec, LabConfig};
use ehr_interpret::dataset::{load_dataset, read_meta, save_dataset, standardize, write_meta, RawDataset, StandardizationStats};
use ehr_interpret::experiment::{fit_model, run_experiment, write_exports, ExperimentConfig, ExperimentReport, FittedModel, HyperParams, Method};
use ehr_interpret::impute::{fit_imputer, ImputationConfig};
use ehr_interpret::interpret::{permutation_importance, render_heatmap_svg, write_reports_csv};
use ehr_interpret::linear::{coefficient_importance, univariate_screen, PenaltyConfig};
use ehr_interpret::synth::{generate_records, generate_tabular, RecordsSpec, TabularSpec};
use ehr_interpret::trees::{gini_importance, BoostConfig, ForestConfig};
use ehr_interpret::Error;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "ehr-interpret", version, about = "Cohorts, classifiers and feature-importance analysis for EHR-style data")]
struct Cli {
    /// Seed for every random choice; overrides any seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory for output artifacts.
    #[arg(long, global = true, env = "EHR_INTERPRET_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic tabular dataset or synthetic patient records.
    Generate {
        #[arg(long, value_enum, default_value_t = GenerateKind::Tabular)]
        kind: GenerateKind,
        /// JSON generator spec; defaults to a planted-signal table or the default record generator.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Build a matched case-control feature table from patient records.
    Cohort {
        /// Patient records, one JSON object per line.
        #[arg(long)]
        data: PathBuf,
        /// JSON cohort spec.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Outcome ICD-9 code; required without `--config`.
        #[arg(long)]
        outcome: Option<String>,
        #[arg(long)]
        horizon_days: Option<u32>,
        /// JSON lab panel `{"common": [...], "rare": [...]}`.
        #[arg(long)]
        labs: Option<PathBuf>,
    },
    /// Fill missing cells of a dataset.
    Impute {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        meta: Option<PathBuf>,
        /// JSON keys: shrinkage_fraction, max_rank, tol, max_iter (or `"method": "mean"`).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Standardize a complete dataset and fit one classifier.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// JSON hyper-parameters for the chosen method.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score features of a dataset.
    Importance {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long, value_enum)]
        measure: Measure,
        /// Model file written by `train`; required except for `univariate`.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Run the full repeated-split comparison protocol.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Replaces the configured horizon list with this single horizon.
        #[arg(long)]
        horizon_days: Option<u32>,
    },
    /// Emit CSV projections and figures from an experiment report.
    Report {
        /// `report.json` written by `experiment`.
        #[arg(long)]
        data: PathBuf,
        /// Also write `heatmap.svg` from the bicluster summary.
        #[arg(long)]
        heatmap: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GenerateKind {
    Tabular,
    Records,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Lr,
    Rf,
    Gbm,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lr => Method::Lr,
            MethodArg::Rf => Method::Rf,
            MethodArg::Gbm => Method::Gbm,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Measure {
    Coefficient,
    Univariate,
    Gini,
    Permutation,
}

/// Everything `importance` needs to reuse a trained model.
#[derive(Debug, Serialize, Deserialize)]
struct TrainedModel {
    params: HyperParams,
    seed: u64,
    feature_names: Vec<String>,
    standardization: StandardizationStats,
    model: FittedModel,
}

fn open(path: &Path) -> Result<File, Error> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    Ok(serde_json::from_reader(BufReader::new(open(path)?))?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn load(data: &Path, meta: Option<&Path>) -> Result<RawDataset, Error> {
    let schema = meta.map(|m| open(m).and_then(|_| read_meta(m))).transpose()?;
    open(data)?;
    load_dataset(data, schema.as_deref())
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn imputation_config(path: Option<&Path>) -> Result<ImputationConfig, Error> {
    let Some(path) = path else { return Ok(ImputationConfig::default()) };
    let mut value: serde_json::Value = read_json(path)?;
    if let Some(obj) = value.as_object_mut() {
        obj.entry("method").or_insert_with(|| "soft".into());
    }
    Ok(serde_json::from_value(value)?)
}

fn hyper_params(method: Method, path: Option<&Path>) -> Result<HyperParams, Error> {
    Ok(match (method, path) {
        (Method::Lr, None) => HyperParams::Lr(PenaltyConfig::l2(1.0)),
        (Method::Lr, Some(p)) => HyperParams::Lr(read_json(p)?),
        (Method::Rf, None) => HyperParams::Rf(ForestConfig::default()),
        (Method::Rf, Some(p)) => HyperParams::Rf(read_json::<ForestConfig>(p)?),
        (Method::Gbm, None) => HyperParams::Gbm(BoostConfig::default()),
        (Method::Gbm, Some(p)) => HyperParams::Gbm(read_json::<BoostConfig>(p)?),
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    let out = cli.out_dir.as_path();
    fs::create_dir_all(out)?;
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Generate { kind: GenerateKind::Tabular, config } => {
            let mut spec: TabularSpec = match &config {
                Some(p) => read_json(p)?,
                None => TabularSpec::planted(2000, 20, 5, 2.0, 0),
            };
            spec.seed = cli.seed.unwrap_or(spec.seed);
            let data = generate_tabular(&spec)?;
            save_dataset(out.join("data.csv"), &data)?;
            write_meta(out.join("meta.json"), &data.meta)?;
        }
        Command::Generate { kind: GenerateKind::Records, config } => {
            let mut spec: RecordsSpec = match &config {
                Some(p) => read_json(p)?,
                None => RecordsSpec::default(),
            };
            spec.seed = cli.seed.unwrap_or(spec.seed);
            write_records(out.join("records.jsonl"), &generate_records(&spec)?)?;
            write_json(&out.join("labs.json"), &spec.lab_config())?;
        }
        Command::Cohort { data, config, outcome, horizon_days, labs } => {
            let mut spec: CohortSpec = match (&config, outcome) {
                (Some(p), _) => read_json(p)?,
                (None, Some(code)) => CohortSpec::new(code, 1),
                (None, None) => return Err(invalid("cohort needs --config or --outcome")),
            };
            if let Some(h) = horizon_days {
                spec.horizon_days = h;
            }
            let labs = match &labs {
                Some(p) => open(p).and_then(|_| LabConfig::read(p))?,
                None => LabConfig::default(),
            };
            open(&data)?;
            let records = read_records(&data)?;
            let cohort = build_cohort(&records, &spec, &labs, seed)?;
            log::info!(
                "{} cases matched, {} dropped, {} lab events outside the panel",
                cohort.matched.cases.len(),
                cohort.matched.dropped_cases.len(),
                cohort.features.unknown_lab_events
            );
            save_dataset(out.join("cohort.csv"), &cohort.features.data)?;
            write_meta(out.join("cohort_meta.json"), &cohort.features.data.meta)?;
            write_json(&out.join("members.json"), &cohort.matched)?;
        }
        Command::Impute { data, meta, config } => {
            let raw = load(&data, meta.as_deref())?;
            let cfg = imputation_config(config.as_deref())?;
            let (completed, _) = fit_imputer(&raw.x, &cfg)?;
            let done = RawDataset::new(completed, raw.y, raw.meta)?;
            save_dataset(out.join("imputed.csv"), &done)?;
            write_meta(out.join("imputed_meta.json"), &done.meta)?;
        }
        Command::Train { data, meta, method, config } => {
            let labeled = load(&data, meta.as_deref())?.into_labeled()?;
            if labeled.x.has_missing() {
                return Err(invalid("training data has missing cells; run `impute` first"));
            }
            let params = hyper_params(method.into(), config.as_deref())?;
            let (x, standardization) = standardize(&labeled.x, None)?;
            let train = labeled.with_x(x)?;
            let model = fit_model(&train, &params, seed)?;
            let trained = TrainedModel { params, seed, feature_names: train.feature_names(), standardization, model };
            write_json(&out.join("model.json"), &trained)?;
        }
        Command::Importance { data, meta, measure, model, repeats, alpha } => {
            let labeled = load(&data, meta.as_deref())?.into_labeled()?;
            let names = labeled.feature_names();
            let report = if let Measure::Univariate = measure {
                let (x, _) = standardize(&labeled.x, None)?;
                univariate_screen(&labeled.with_x(x)?, alpha)?.report
            } else {
                let path = model.ok_or_else(|| invalid(format!("--measure {measure:?} needs --model").to_lowercase()))?;
                let trained: TrainedModel = read_json(&path)?;
                if trained.feature_names != names {
                    return Err(invalid("dataset columns differ from the model's training columns"));
                }
                match (measure, &trained.model) {
                    (Measure::Coefficient, FittedModel::Linear(m)) => coefficient_importance(m, &names)?,
                    (Measure::Gini, FittedModel::Ensemble(m)) => gini_importance(m, &names)?,
                    (Measure::Permutation, m) => {
                        let (x, _) = standardize(&labeled.x, Some(&trained.standardization))?;
                        permutation_importance(m, &labeled.with_x(x)?, seed, repeats)?
                            .with_model(trained.params.method().as_str())
                    }
                    (Measure::Coefficient, _) => return Err(invalid("coefficient importance needs an lr model")),
                    (_, _) => return Err(invalid("gini importance needs an rf or gbm model")),
                }
            };
            let name = format!("importance_{}.csv", report.method.as_str());
            write_reports_csv(BufWriter::new(File::create(out.join(name))?), &[report])?;
        }
        Command::Experiment { config, horizon_days } => {
            let mut cfg: ExperimentConfig = read_json(&config)?;
            if let Some(s) = cli.seed {
                cfg.master_seed = s;
            }
            if let Some(h) = horizon_days {
                cfg.horizons = vec![h];
            }
            let report = run_experiment(&cfg)?;
            write_exports(&report, out)?;
        }
        Command::Report { data, heatmap } => {
            let report: ExperimentReport = read_json(&data)?;
            write_exports(&report, out)?;
            if heatmap {
                let b = report.bicluster.as_ref().ok_or_else(|| invalid("report has no bicluster summary for a heatmap"))?;
                fs::write(out.join("heatmap.svg"), render_heatmap_svg(&b.matrix, &b.clusters)?)?;
            }
        }
    }
    Ok(())
}

fn init_threads(threads: Option<usize>) -> Result<(), Error> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(invalid("--threads must be positive"));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| invalid(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    log::warn!("built without the parallel feature; --threads {n} has no effect");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match init_threads(cli.threads).and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

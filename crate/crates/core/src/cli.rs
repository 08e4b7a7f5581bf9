//! Command-line front end: `fit`, `predict` and `simulate`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{fit_method, EstimatorSettings, FitResult, Method, RidgeSettings, FIRTH_TAU, WF_TAU};
use crate::inference::{default_intervals, IntervalMethod, IntervalSet};
use crate::logistic::{predict_probabilities, Dataset};
use crate::predictions::{au_from_parts, correction_terms, PredictionSet};
use crate::simgen::{run_scenario, standard_grid, ScenarioConfig, ScenarioSummary, SignPattern};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CONVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "rarefit", version, about = "Penalized logistic regression for rare events")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit models and report coefficients, odds ratios and intervals.
    Fit(FitArgs),
    /// Per-row predicted probabilities.
    Predict(PredictArgs),
    /// Run simulation scenarios from a TOML file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Json,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Name of the 0/1 outcome column.
    #[arg(long)]
    pub outcome: String,
    /// Comma-separated covariate columns; all other columns when omitted,
    /// none (intercept only) when empty.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "fl")]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Penalty weight for wf.
    #[arg(long, default_value_t = WF_TAU)]
    pub tau: f64,
    /// Fixed ridge penalty instead of AIC selection.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "fl")]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = WF_TAU)]
    pub tau: f64,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// JSON report from `fit`; its coefficients are used instead of refitting.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides the seed in the scenario file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the method list in the scenario file.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: Format,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoConvergence { .. } | Error::Singular => EXIT_CONVERGENCE,
            Error::InvalidArgument(_) | Error::Unsupported(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        CliError { code, message: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError { code: EXIT_USAGE, message: msg.into() }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("rarefit: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    }
}

/// Formats like C's `%g` with six significant digits.
pub fn sig6(v: f64) -> String {
    if v.is_nan() {
        return "NA".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..6).contains(&exp) {
        trim(&format!("{:.*}", (5 - exp) as usize, v))
    } else {
        format!("{}e{}{:02}", trim(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn opt6(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), sig6)
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn parse_methods(names: &[String]) -> CliResult<Vec<Method>> {
    let names: Vec<&str> = names.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    if names.is_empty() {
        return Err(usage("no methods given"));
    }
    let mut out = Vec::new();
    for n in names {
        let m: Method = n.parse().map_err(|_| usage(format!("unknown method `{n}`")))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

/// Reads numeric columns of a headed CSV file.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut cols = vec![Vec::new(); headers.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::InvalidData(format!("row {}, column `{}`: `{field}` is not a number", r + 2, headers[c]))
            })?;
            cols[c].push(v);
        }
    }
    Ok((headers, cols))
}

/// Builds the dataset described by `a`.
pub fn load_dataset(a: &DataArgs) -> Result<Dataset> {
    let (headers, cols) = read_table(&a.input)?;
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidData(format!("column `{name}` not found in {}", a.input.display())))
    };
    let yi = find(&a.outcome)?;
    let covs: Vec<String> = match &a.covariates {
        Some(c) => c.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        None => headers.iter().filter(|h| **h != a.outcome).cloned().collect(),
    };
    let idx = covs.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;
    let y = cols[yi].clone();
    if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidData(format!("outcome `{}` is not binary (found {v})", a.outcome)));
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidData("no data rows".into()));
    }
    let x = DMatrix::from_fn(n, idx.len(), |i, j| cols[idx[j]][i]);
    let names = std::iter::once("(Intercept)".to_string()).chain(covs).collect();
    Dataset::from_covariates(y, &x)?.with_names(names)
}

fn ridge_settings(lambda: Option<f64>) -> RidgeSettings {
    lambda.map_or_else(RidgeSettings::default, RidgeSettings::fixed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub term: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    /// Absent for the intercept.
    pub odds_ratio: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub ci_method: Option<IntervalMethod>,
    pub excludes_zero: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub method: Method,
    pub converged: bool,
    pub separation: bool,
    pub iterations: usize,
    pub loglik: f64,
    pub penalized_loglik: f64,
    pub tau: Option<f64>,
    pub lambda: Option<f64>,
    pub mean_prediction: f64,
    pub coefficients: Vec<CoefficientRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub outcome: String,
    pub n: usize,
    pub events: f64,
    pub level: f64,
    pub models: Vec<ModelReport>,
}

impl ModelReport {
    pub fn beta(&self) -> DVector<f64> {
        DVector::from_iterator(self.coefficients.len(), self.coefficients.iter().map(|c| c.estimate))
    }
}

fn model_report(ds: &Dataset, fit: &FitResult, level: f64) -> Result<ModelReport> {
    let ok = fit.converged && !fit.extras.separation;
    let intervals: Option<IntervalSet> = if ok { Some(default_intervals(ds, fit, level)?) } else { None };
    let se = fit.std_errors();
    let coefficients = (0..fit.beta.len())
        .map(|j| {
            let iv = intervals.as_ref().map(|s| &s.intervals[j]);
            CoefficientRow {
                term: ds.names()[j].clone(),
                estimate: fit.beta[j],
                std_error: finite(se[j]),
                odds_ratio: if j == 0 { None } else { finite(fit.beta[j].exp()) },
                lower: iv.and_then(|i| finite(i.lower)),
                upper: iv.and_then(|i| finite(i.upper)),
                ci_method: iv.map(|i| i.method),
                excludes_zero: iv.map(|i| i.excludes_zero),
            }
        })
        .collect();
    Ok(ModelReport {
        method: fit.method,
        converged: fit.converged,
        separation: fit.extras.separation,
        iterations: fit.iterations,
        loglik: fit.loglik,
        penalized_loglik: fit.penloglik,
        tau: fit.extras.tau,
        lambda: fit.extras.lambda,
        mean_prediction: predict_probabilities(ds, &fit.beta)?.mean(),
        coefficients,
    })
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn fit_report(ds: &Dataset, outcome: &str, methods: &[Method], level: f64, tau: f64, lambda: Option<f64>) -> Result<FitReport> {
    let settings = EstimatorSettings::default();
    let ridge = ridge_settings(lambda);
    let models = methods
        .iter()
        .map(|&m| {
            let fit = fit_method(ds, m, tau, &ridge, &settings)?;
            if fit.extras.separation {
                eprintln!("rarefit: warning: {m} estimates diverge (separation)");
            }
            model_report(ds, &fit, level)
        })
        .collect::<Result<_>>()?;
    Ok(FitReport {
        schema_version: SCHEMA_VERSION,
        outcome: outcome.to_string(),
        n: ds.n_rows(),
        events: ds.event_count(),
        level,
        models,
    })
}

pub fn render_fit_tsv(r: &FitReport) -> String {
    let mut s = String::from(
        "method\tterm\testimate\tstd_error\todds_ratio\tlower\tupper\tci_method\texcludes_zero\tconverged\tseparation\n",
    );
    for m in &r.models {
        for c in &m.coefficients {
            let ci = c.ci_method.map_or("NA", |k| match k {
                IntervalMethod::Wald => "wald",
                IntervalMethod::Profile => "profile",
                IntervalMethod::FlicIntercept => "flic-intercept",
            });
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                m.method,
                c.term,
                sig6(c.estimate),
                opt6(c.std_error),
                opt6(c.odds_ratio),
                opt6(c.lower),
                opt6(c.upper),
                ci,
                c.excludes_zero.map_or("NA".into(), |b| b.to_string()),
                m.converged,
                m.separation
            );
        }
    }
    s
}

pub fn cmd_fit(a: &FitArgs) -> CliResult<()> {
    let methods = parse_methods(&a.methods)?;
    if let Some(m) = methods.iter().find(|m| m.is_prediction_only()) {
        return Err(usage(format!("{m} is only available under `predict`")));
    }
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(usage(format!("level {} outside (0, 1)", a.level)));
    }
    let ds = load_dataset(&a.data)?;
    let report = fit_report(&ds, &a.data.outcome, &methods, a.level, a.tau, a.lambda)?;
    let text = match a.format {
        Format::Tsv => render_fit_tsv(&report),
        Format::Json => serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n",
    };
    emit(&a.output, &text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    pub schema_version: u32,
    pub predictions: Vec<PredictionSet>,
}

fn coefficients_for(ds: &Dataset, model: Option<&FitReport>, m: Method, tau: f64, ridge: &RidgeSettings) -> Result<DVector<f64>> {
    match model {
        Some(r) => {
            let mr = r
                .models
                .iter()
                .find(|x| x.method == m)
                .ok_or_else(|| Error::InvalidArgument(format!("model file has no {m} fit")))?;
            let terms: Vec<&str> = mr.coefficients.iter().map(|c| c.term.as_str()).collect();
            let names: Vec<&str> = ds.names().iter().map(String::as_str).collect();
            if terms != names {
                return Err(Error::InvalidData(format!(
                    "model terms {terms:?} do not match data columns {names:?}"
                )));
            }
            Ok(mr.beta())
        }
        None => Ok(fit_method(ds, m, tau, ridge, &EstimatorSettings::default())?.beta),
    }
}

pub fn predict_report(ds: &Dataset, methods: &[Method], model: Option<&FitReport>, tau: f64, lambda: Option<f64>) -> Result<PredictReport> {
    let ridge = ridge_settings(lambda);
    let mut predictions = Vec::new();
    for &m in methods {
        let set = if m.is_prediction_only() {
            let beta = coefficients_for(ds, model, Method::Fl, FIRTH_TAU, &ridge)?;
            let fl = FitResult {
                beta,
                cov: DMatrix::zeros(0, 0),
                loglik: f64::NAN,
                penloglik: f64::NAN,
                iterations: 0,
                converged: true,
                method: Method::Fl,
                extras: Default::default(),
            };
            let (pi, c) = correction_terms(ds, &fl)?;
            if m == Method::Ab {
                let v: Vec<f64> = (pi + c).iter().copied().collect();
                PredictionSet { clipped: vec![false; v.len()], pi: v, method: m }
            } else {
                au_from_parts(&pi, &c)
            }
        } else {
            let beta = coefficients_for(ds, model, m, tau, &ridge)?;
            let v: Vec<f64> = predict_probabilities(ds, &beta)?.iter().copied().collect();
            PredictionSet { clipped: vec![false; v.len()], pi: v, method: m }
        };
        predictions.push(set);
    }
    Ok(PredictReport { schema_version: SCHEMA_VERSION, predictions })
}

pub fn render_predict_tsv(r: &PredictReport) -> String {
    let mut s = String::from("row");
    for p in &r.predictions {
        let _ = write!(s, "\t{}", p.method);
    }
    let au = r.predictions.iter().position(|p| p.method == Method::Au);
    if au.is_some() {
        s.push_str("\tau_clipped");
    }
    s.push('\n');
    let n = r.predictions.first().map_or(0, |p| p.pi.len());
    for i in 0..n {
        let _ = write!(s, "{}", i + 1);
        for p in &r.predictions {
            let _ = write!(s, "\t{}", sig6(p.pi[i]));
        }
        if let Some(k) = au {
            let _ = write!(s, "\t{}", r.predictions[k].clipped[i]);
        }
        s.push('\n');
    }
    s.push_str("mean");
    for p in &r.predictions {
        let _ = write!(s, "\t{}", sig6(p.mean()));
    }
    if au.is_some() {
        s.push_str("\tNA");
    }
    s.push('\n');
    s
}

pub fn cmd_predict(a: &PredictArgs) -> CliResult<()> {
    let methods = parse_methods(&a.methods)?;
    let ds = load_dataset(&a.data)?;
    let model: Option<FitReport> = match &a.model {
        Some(p) => Some(serde_json::from_str(&fs::read_to_string(p).map_err(Error::from)?).map_err(Error::from)?),
        None => None,
    };
    let report = predict_report(&ds, &methods, model.as_ref(), a.tau, a.lambda)?;
    let text = match a.format {
        Format::Tsv => render_predict_tsv(&report),
        Format::Json => serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n",
    };
    emit(&a.output, &text)?;
    Ok(())
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grid {
    /// The 45-scenario design.
    Standard,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntry {
    pub n: usize,
    pub event_rate: f64,
    pub effect: f64,
    #[serde(default = "default_signs")]
    pub signs: SignPattern,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
}

fn default_signs() -> SignPattern {
    SignPattern::AllPositive
}

/// Contents of a scenario file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationFile {
    pub seed: u64,
    pub replications: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub intervals: bool,
    #[serde(default = "crate::cli::default_level")]
    pub level: f64,
    #[serde(default = "crate::cli::default_tau")]
    pub tau: f64,
    pub grid: Option<Grid>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioEntry>,
}

fn default_level() -> f64 {
    0.95
}

fn default_tau() -> f64 {
    WF_TAU
}

impl SimulationFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Expands into validated scenarios. Listed scenario `k` (after any grid
    /// entries) defaults to seed `seed + k`.
    pub fn scenarios(&self) -> Result<Vec<ScenarioConfig>> {
        let mut out = match self.grid {
            Some(Grid::Standard) => standard_grid(self.replications, self.seed),
            None => Vec::new(),
        };
        for e in &self.scenarios {
            let k = out.len() as u64;
            out.push(ScenarioConfig::new(
                e.n,
                e.event_rate,
                e.effect,
                e.signs,
                e.replications.unwrap_or(self.replications),
                e.seed.unwrap_or(self.seed.wrapping_add(k)),
            ));
        }
        if out.is_empty() {
            return Err(Error::Config("scenario file defines no scenarios".into()));
        }
        for c in out.iter_mut() {
            c.intervals = self.intervals;
            c.level = self.level;
            c.tau = self.tau;
            c.validate()?;
        }
        Ok(out)
    }
}

/// Metric families, one table each.
pub const TABLES: [&str; 5] = ["event_rate", "predictions", "calibration", "coefficients", "intervals"];

fn table_columns(table: &str) -> &'static [&'static str] {
    match table {
        "event_rate" => &["rel_bias", "rel_rmse"],
        "predictions" => &["bias", "rmse"],
        "calibration" => &["cal_slope", "c_index"],
        "coefficients" => &["std_abs_bias", "std_rmse"],
        _ => &["coverage", "power", "width"],
    }
}

/// Renders the summary tables, keyed by file stem.
pub fn render_summary_tables(summaries: &[ScenarioSummary]) -> BTreeMap<&'static str, String> {
    let mut out = BTreeMap::new();
    for table in TABLES {
        let mut s = String::from("n\tevent_rate\teffect\tsigns\tmethod\tused\texcluded_separation\texcluded_single_class\texcluded_fit_failure");
        for c in table_columns(table) {
            let _ = write!(s, "\t{c}");
        }
        s.push('\n');
        for sm in summaries {
            let c = &sm.config;
            for r in &sm.reports {
                let _ = write!(
                    s,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    c.n,
                    sig6(c.event_rate),
                    sig6(c.effect),
                    c.signs.as_str(),
                    r.method,
                    sm.used,
                    sm.excluded_separation,
                    sm.excluded_single_class,
                    sm.excluded_fit_failure
                );
                let vals: Vec<Option<f64>> = match table {
                    "event_rate" => vec![Some(r.event_rate_rel_bias), Some(r.event_rate_rel_rmse)],
                    "predictions" => vec![Some(r.pred_bias), Some(r.pred_rmse)],
                    "calibration" => vec![r.cal_slope, r.c_index],
                    "coefficients" => vec![r.coef_abs_bias, r.coef_rmse],
                    _ => vec![r.ci_coverage, r.ci_power, r.ci_width],
                };
                for v in vals {
                    let _ = write!(s, "\t{}", opt6(v));
                }
                s.push('\n');
            }
        }
        out.insert(table, s);
    }
    out
}

#[derive(Debug, Serialize)]
struct SimulationReport<'a> {
    schema_version: u32,
    scenarios: &'a [ScenarioSummary],
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let text = fs::read_to_string(&a.scenario).map_err(Error::from)?;
    let mut file = SimulationFile::parse(&text)?;
    if let Some(seed) = a.seed {
        file.seed = seed;
    }
    if let Some(m) = &a.methods {
        file.methods = parse_methods(m)?;
    }
    if file.methods.is_empty() {
        return Err(usage("no methods given"));
    }
    let scenarios = file.scenarios()?;
    let mut summaries = Vec::with_capacity(scenarios.len());
    for (k, cfg) in scenarios.iter().enumerate() {
        eprintln!("[{}/{}] {}", k + 1, scenarios.len(), cfg.label());
        summaries.push(run_scenario(cfg, &file.methods)?);
    }
    fs::create_dir_all(&a.out_dir).map_err(Error::from)?;
    match a.format {
        Format::Tsv => {
            for (stem, body) in render_summary_tables(&summaries) {
                fs::write(a.out_dir.join(format!("{stem}.tsv")), body).map_err(Error::from)?;
            }
        }
        Format::Json => {
            let report = SimulationReport { schema_version: SCHEMA_VERSION, scenarios: &summaries };
            let body = serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n";
            fs::write(a.out_dir.join("summary.json"), body).map_err(Error::from)?;
        }
    }
    Ok(())
}

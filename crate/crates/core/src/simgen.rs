//! Simulation scenarios: correlated covariates, calibrated true models and a
//! replication runner that evaluates every requested method.
//!
//! Replication `k` of a scenario draws from a ChaCha8 stream seeded with the
//! scenario seed and stream number `k`, so results do not depend on how
//! replications are scheduled across threads.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    fit_method, fit_ml, flic_from_fl, sample_sd, EstimatorSettings, FitResult, Method,
    RidgeSettings, FIRTH_TAU, WF_TAU,
};
use crate::inference::default_intervals;
use crate::logistic::{linear_predictor, logistic, logit, predict_probabilities, Coefficients, Dataset};
use crate::metrics::{
    aggregate, c_statistic, calibration_slope, event_rate_bias, standardized_errors, EvalReport,
    IntervalOutcome, ReplicationMetrics,
};
use crate::predictions::{predict_ab, predict_au};

pub const N_COVARIATES: usize = 10;
/// Columns (0-based) of the continuous covariates x1, x4, x5, x8.
pub const CONTINUOUS: [usize; 4] = [0, 3, 4, 7];
pub const REFERENCE_SIZE: usize = 1_000_000;
pub const REFERENCE_SEED: u64 = 0x005e_ed0f_2017;
/// Log odds ratio 2.
pub const BINARY_EFFECT: f64 = 0.69;
pub const ORDINAL_EFFECT: f64 = 0.345;
/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "RAREFIT_THREADS";

/// Nonzero correlations between the latent normals, 1-based.
const PAIRS: [(usize, usize, f64); 13] = [
    (1, 2, 0.8),
    (1, 7, 0.3),
    (3, 4, -0.5),
    (3, 5, -0.3),
    (4, 5, 0.5),
    (4, 7, 0.3),
    (4, 8, 0.5),
    (4, 9, 0.3),
    (5, 8, 0.3),
    (5, 9, 0.3),
    (6, 7, -0.3),
    (6, 8, 0.3),
    (8, 9, 0.5),
];

#[derive(Debug, Clone)]
pub struct CovariateRecipe {
    corr: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl CovariateRecipe {
    pub fn from_correlation(corr: DMatrix<f64>) -> Result<Self> {
        if corr.nrows() != N_COVARIATES || corr.ncols() != N_COVARIATES {
            return Err(Error::Dimension(format!("correlation matrix must be {N_COVARIATES}x{N_COVARIATES}")));
        }
        for i in 0..N_COVARIATES {
            if corr[(i, i)] != 1.0 {
                return Err(Error::InvalidArgument(format!("diagonal entry {} is not 1", i + 1)));
            }
            for j in 0..i {
                if corr[(i, j)] != corr[(j, i)] {
                    return Err(Error::InvalidArgument("correlation matrix is not symmetric".into()));
                }
            }
        }
        let chol = corr
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("correlation matrix is not positive definite".into()))?
            .l();
        Ok(Self { corr, chol })
    }

    pub fn standard() -> Self {
        let mut m = DMatrix::identity(N_COVARIATES, N_COVARIATES);
        for (a, b, r) in PAIRS {
            m[(a - 1, b - 1)] = r;
            m[(b - 1, a - 1)] = r;
        }
        Self::from_correlation(m).expect("built-in correlation matrix is positive definite")
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.corr
    }

    fn draw_row<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        let mut u = [0.0; N_COVARIATES];
        for v in u.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mut z = [0.0; N_COVARIATES];
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = (0..=i).map(|k| self.chol[(i, k)] * u[k]).sum();
        }
        transform(&z, out);
    }
}

fn ind(b: bool) -> f64 {
    b as u8 as f64
}

/// Latent normals to covariates, before truncation.
pub fn transform(z: &[f64], x: &mut [f64]) {
    x[0] = (10.0 * z[0] + 55.0).trunc();
    x[1] = ind(z[1] < 0.6);
    x[2] = ind(z[2] >= -1.2) + ind(z[2] >= 0.75);
    x[3] = (100.0 * z[3].exp() - 20.0).max(0.0).trunc();
    x[4] = (80.0 * z[4].exp() - 20.0).max(0.0).trunc();
    x[5] = ind(z[5] < -0.35);
    x[6] = ind(z[6] >= 0.5) + ind(z[6] >= 1.5);
    x[7] = (10.0 * z[7] + 55.0).trunc();
    x[8] = ind(z[8] < 0.0);
    x[9] = ind(z[9] < 0.0);
}

/// Sample quantile with linear interpolation between order statistics
/// (the common "type 7" definition). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut s: Vec<f64> = v.collect();
    s.sort_by(f64::total_cmp);
    s
}

fn truncate_continuous(x: &mut DMatrix<f64>) {
    for &j in &CONTINUOUS {
        let s = sorted(x.column(j).iter().copied());
        let q1 = quantile_sorted(&s, 0.25);
        let q3 = quantile_sorted(&s, 0.75);
        let cap = q3 + 5.0 * (q3 - q1);
        x.column_mut(j).apply(|v| *v = v.min(cap));
    }
}

pub fn generate_with_rng<R: Rng>(recipe: &CovariateRecipe, n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, N_COVARIATES);
    let mut row = [0.0; N_COVARIATES];
    for i in 0..n {
        recipe.draw_row(rng, &mut row);
        for j in 0..N_COVARIATES {
            x[(i, j)] = row[j];
        }
    }
    truncate_continuous(&mut x);
    x
}

/// `n x 10` covariate matrix, truncated per dataset.
pub fn generate_covariates(recipe: &CovariateRecipe, n: usize, seed: u64) -> DMatrix<f64> {
    generate_with_rng(recipe, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Large seeded sample used to calibrate the true model.
pub struct ReferenceSample {
    rows: usize,
    /// Row-major, single precision to halve memory.
    data: Vec<f32>,
}

impl ReferenceSample {
    pub fn generate(recipe: &CovariateRecipe, rows: usize, seed: u64) -> Self {
        let x = generate_covariates(recipe, rows, seed);
        let mut data = Vec::with_capacity(rows * N_COVARIATES);
        for i in 0..rows {
            data.extend(x.row(i).iter().map(|&v| v as f32));
        }
        Self { rows, data }
    }

    /// The standard recipe's sample, generated once per process.
    pub fn standard() -> &'static ReferenceSample {
        static REF: OnceLock<ReferenceSample> = OnceLock::new();
        REF.get_or_init(|| Self::generate(&CovariateRecipe::standard(), REFERENCE_SIZE, REFERENCE_SEED))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(j).step_by(N_COVARIATES).map(|&v| v as f64)
    }

    /// `x_i' slopes` for every row, without intercept.
    pub fn slope_predictor(&self, slopes: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(N_COVARIATES)
            .map(|r| r.iter().zip(slopes).map(|(&x, b)| x as f64 * b).sum())
            .collect()
    }
}

/// `ln 2 / (q_{5/6} - q_{1/6})`.
pub fn sextile_slope(values: impl Iterator<Item = f64>) -> Result<f64> {
    let s = sorted(values);
    if s.is_empty() {
        return Err(Error::InvalidData("empty reference column".into()));
    }
    let spread = quantile_sorted(&s, 5.0 / 6.0) - quantile_sorted(&s, 1.0 / 6.0);
    if spread.is_nan() || spread <= 0.0 {
        return Err(Error::InvalidData("zero sextile spread".into()));
    }
    Ok(std::f64::consts::LN_2 / spread)
}

/// Unit-effect slopes of x1, x4, x5 and x8.
pub fn calibrate_continuous_coefs(reference: &ReferenceSample) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (o, &j) in out.iter_mut().zip(&CONTINUOUS) {
        *o = sextile_slope(reference.column(j))?;
    }
    Ok(out)
}

/// Intercept giving mean probability `target` over the linear predictors
/// `eta` (which exclude the intercept).
pub fn intercept_for(eta: &[f64], target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!("target rate {target} outside (0, 1)")));
    }
    if eta.iter().all(|&e| e == 0.0) {
        return Ok(logit(target));
    }
    let mean = |b: f64| eta.iter().map(|&e| logistic(b + e)).sum::<f64>() / eta.len() as f64;
    let (mut lo, mut hi) = (-40.0, 40.0);
    if mean(lo) > target || mean(hi) < target {
        return Err(Error::InvalidArgument("intercept bracket failed".into()));
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn calibrate_intercept(reference: &ReferenceSample, slopes: &[f64], target: f64) -> Result<f64> {
    if slopes.len() != N_COVARIATES {
        return Err(Error::Dimension(format!("expected {N_COVARIATES} slopes")));
    }
    if slopes.iter().all(|&b| b == 0.0) {
        return intercept_for(&[0.0], target);
    }
    intercept_for(&reference.slope_predictor(slopes), target)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignPattern {
    AllPositive,
    /// Slopes of x6..x10 negated.
    Mixed,
}

impl SignPattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            SignPattern::AllPositive => "all-positive",
            SignPattern::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrueModel {
    pub beta: Coefficients,
}

impl TrueModel {
    pub fn new(effect: f64, signs: SignPattern, target: f64, reference: &ReferenceSample) -> Result<Self> {
        let cont = calibrate_continuous_coefs(reference)?;
        let mut slopes = [0.0; N_COVARIATES];
        for (&j, c) in CONTINUOUS.iter().zip(cont) {
            slopes[j] = c;
        }
        for j in [1, 5, 8, 9] {
            slopes[j] = BINARY_EFFECT;
        }
        for j in [2, 6] {
            slopes[j] = ORDINAL_EFFECT;
        }
        for (j, s) in slopes.iter_mut().enumerate() {
            *s *= effect;
            if signs == SignPattern::Mixed && j >= 5 {
                *s = -*s;
            }
        }
        let b0 = calibrate_intercept(reference, &slopes, target)?;
        let beta = DVector::from_iterator(N_COVARIATES + 1, std::iter::once(b0).chain(slopes));
        Ok(Self { beta })
    }
}

fn default_level() -> f64 {
    0.95
}

fn default_tau() -> f64 {
    WF_TAU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub event_rate: f64,
    pub effect: f64,
    pub signs: SignPattern,
    pub replications: usize,
    pub seed: u64,
    /// Compute confidence intervals (profile intervals are costly).
    #[serde(default)]
    pub intervals: bool,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

impl ScenarioConfig {
    pub fn new(n: usize, event_rate: f64, effect: f64, signs: SignPattern, replications: usize, seed: u64) -> Self {
        Self { n, event_rate, effect, signs, replications, seed, intervals: false, level: 0.95, tau: WF_TAU }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.event_rate > 0.0 && self.event_rate < 1.0) {
            return bad(format!("event rate {} outside (0, 1)", self.event_rate));
        }
        if self.n as f64 * self.event_rate < 20.0 {
            return bad(format!(
                "expected number of events {} is below 20",
                self.n as f64 * self.event_rate
            ));
        }
        if !(self.effect >= 0.0 && self.effect.is_finite()) {
            return bad(format!("effect size {} must be a nonnegative number", self.effect));
        }
        if self.effect == 0.0 && self.signs == SignPattern::Mixed {
            return bad("effect size 0 admits only the all-positive sign pattern".into());
        }
        if self.replications == 0 {
            return bad("replications must be positive".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level {} outside (0, 1)", self.level));
        }
        if !(self.tau > 0.0 && self.tau <= 0.5) {
            return bad(format!("tau {} outside (0, 0.5]", self.tau));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("N={} pi={} a={} {}", self.n, self.event_rate, self.effect, self.signs.as_str())
    }
}

/// The 45 scenarios: valid `(N, pi)` pairs crossed with effect sizes and
/// sign patterns, effect 0 counted once. Scenario `k` uses seed `seed + k`.
pub fn standard_grid(replications: usize, seed: u64) -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for n in [500, 1400, 3000] {
        for rate in [0.01, 0.02, 0.05, 0.10] {
            if n as f64 * rate < 20.0 {
                continue;
            }
            let combos = [
                (0.0, SignPattern::AllPositive),
                (0.5, SignPattern::AllPositive),
                (0.5, SignPattern::Mixed),
                (1.0, SignPattern::AllPositive),
                (1.0, SignPattern::Mixed),
            ];
            for (effect, signs) in combos {
                let k = out.len() as u64;
                out.push(ScenarioConfig::new(n, rate, effect, signs, replications, seed.wrapping_add(k)));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exclusion {
    Separation,
    SingleClass,
    FitFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub config: ScenarioConfig,
    pub true_beta: Vec<f64>,
    pub used: usize,
    pub excluded_separation: usize,
    pub excluded_single_class: usize,
    pub excluded_fit_failure: usize,
    pub reports: Vec<EvalReport>,
}

/// One replication's data.
pub struct Replication {
    pub dataset: Dataset,
    pub pi_true: Vec<f64>,
    pub y_new: Vec<f64>,
}

fn names() -> Vec<String> {
    std::iter::once("(Intercept)".to_string())
        .chain((1..=N_COVARIATES).map(|j| format!("x{j}")))
        .collect()
}

/// Draws replication `rep`. Returns `Err(Exclusion::SingleClass)` when the
/// outcome has one class only.
pub fn draw_replication(
    recipe: &CovariateRecipe,
    truth: &TrueModel,
    n: usize,
    seed: u64,
    rep: u64,
) -> std::result::Result<Replication, Exclusion> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    let x = generate_with_rng(recipe, n, &mut rng);
    let b = &truth.beta;
    let pi_true: Vec<f64> = (0..n)
        .map(|i| logistic(b[0] + (0..N_COVARIATES).map(|j| x[(i, j)] * b[j + 1]).sum::<f64>()))
        .collect();
    let y: Vec<f64> = pi_true.iter().map(|&p| ind(rng.random::<f64>() < p)).collect();
    let y_new: Vec<f64> = pi_true.iter().map(|&p| ind(rng.random::<f64>() < p)).collect();
    let events = y.iter().sum::<f64>();
    if events == 0.0 || events == n as f64 {
        return Err(Exclusion::SingleClass);
    }
    let dataset = Dataset::from_covariates(y, &x)
        .and_then(|d| d.with_names(names()))
        .map_err(|_| Exclusion::FitFailure)?;
    Ok(Replication { dataset, pi_true, y_new })
}

fn metrics_for(
    rep: &Replication,
    truth: &TrueModel,
    sds: &[f64],
    pi_hat: &[f64],
    eta_hat: &[f64],
    fit: Option<&FitResult>,
    cfg: &ScenarioConfig,
) -> Result<ReplicationMetrics> {
    let y: Vec<f64> = rep.dataset.y().iter().copied().collect();
    let (event_rate_rel_bias, _) = event_rate_bias(pi_hat, &y)?;
    let n = pi_hat.len() as f64;
    let diffs = pi_hat.iter().zip(&rep.pi_true).map(|(a, b)| a - b);
    let pred_bias = diffs.clone().sum::<f64>() / n;
    let pred_mse = diffs.map(|d| d * d).sum::<f64>() / n;
    let std_coef_errors = match fit {
        Some(f) => Some(standardized_errors(&f.beta, &truth.beta, sds)?),
        None => None,
    };
    let intervals = match fit {
        Some(f) if cfg.intervals => {
            let set = default_intervals(&rep.dataset, f, cfg.level)?;
            Some(
                set.intervals
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(j, iv)| IntervalOutcome {
                        covers_truth: iv.contains(truth.beta[j]),
                        excludes_zero: iv.excludes_zero,
                        width: iv.width(),
                    })
                    .collect(),
            )
        }
        _ => None,
    };
    Ok(ReplicationMetrics {
        event_rate_rel_bias,
        pred_bias,
        pred_mse,
        std_coef_errors,
        cal_slope: calibration_slope(eta_hat, &rep.y_new).ok(),
        c_index: c_statistic(pi_hat, &rep.y_new).ok(),
        intervals,
    })
}

/// Fits `methods` on one replication and evaluates them.
pub fn evaluate_replication(
    rep: &Replication,
    truth: &TrueModel,
    methods: &[Method],
    cfg: &ScenarioConfig,
    settings: &EstimatorSettings,
) -> std::result::Result<Vec<ReplicationMetrics>, Exclusion> {
    let ds = &rep.dataset;
    let ml = fit_ml(ds, settings).map_err(|_| Exclusion::FitFailure)?;
    if ml.extras.separation {
        return Err(Exclusion::Separation);
    }
    let sds: Vec<f64> = (1..ds.n_params())
        .map(|j| sample_sd(&ds.x().column(j).iter().copied().collect::<Vec<_>>()))
        .collect();
    let needs_fl = methods.iter().any(|m| matches!(m, Method::Fl | Method::Flic | Method::Ab | Method::Au));
    let fl = if needs_fl {
        Some(crate::estimators::fit_firth(ds, FIRTH_TAU, settings).map_err(|_| Exclusion::FitFailure)?)
    } else {
        None
    };
    let ridge = RidgeSettings::default();
    let mut out = Vec::with_capacity(methods.len());
    for &m in methods {
        let res = (|| -> Result<ReplicationMetrics> {
            if m.is_prediction_only() {
                let fl = fl.as_ref().expect("FL fitted for correctors");
                let p = if m == Method::Ab { predict_ab(ds, fl)? } else { predict_au(ds, fl)? };
                let eta: Vec<f64> = p.pi.iter().map(|&v| logit(v.clamp(1e-10, 1.0 - 1e-10))).collect();
                return metrics_for(rep, truth, &sds, &p.pi, &eta, None, cfg);
            }
            let fit = match m {
                Method::Ml => ml.clone(),
                Method::Fl => fl.clone().expect("FL fitted"),
                Method::Flic => flic_from_fl(ds, fl.as_ref().expect("FL fitted"), settings)?,
                _ => fit_method(ds, m, cfg.tau, &ridge, settings)?,
            };
            if !fit.converged {
                return Err(Error::NoConvergence { method: m.to_string(), iterations: fit.iterations });
            }
            let eta: Vec<f64> = linear_predictor(ds, &fit.beta)?.iter().copied().collect();
            let pi: Vec<f64> = predict_probabilities(ds, &fit.beta)?.iter().copied().collect();
            metrics_for(rep, truth, &sds, &pi, &eta, Some(&fit), cfg)
        })();
        out.push(res.map_err(|_| Exclusion::FitFailure)?);
    }
    Ok(out)
}

/// Worker count from `RAREFIT_THREADS`, else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&k| k > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |k| k.get()))
}

pub fn run_scenario(cfg: &ScenarioConfig, methods: &[Method]) -> Result<ScenarioSummary> {
    run_scenario_with_workers(cfg, methods, worker_count())
}

pub fn run_scenario_with_workers(
    cfg: &ScenarioConfig,
    methods: &[Method],
    workers: usize,
) -> Result<ScenarioSummary> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    let recipe = CovariateRecipe::standard();
    let truth = TrueModel::new(cfg.effect, cfg.signs, cfg.event_rate, ReferenceSample::standard())?;
    let settings = EstimatorSettings::default();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let outcomes: Vec<std::result::Result<Vec<ReplicationMetrics>, Exclusion>> = pool.install(|| {
        (0..cfg.replications as u64)
            .into_par_iter()
            .map(|k| {
                let rep = draw_replication(&recipe, &truth, cfg.n, cfg.seed, k)?;
                evaluate_replication(&rep, &truth, methods, cfg, &settings)
            })
            .collect()
    });

    let mut per_method: Vec<Vec<ReplicationMetrics>> = vec![Vec::new(); methods.len()];
    let (mut sep, mut single, mut fail) = (0, 0, 0);
    for o in outcomes {
        match o {
            Ok(ms) => {
                for (acc, m) in per_method.iter_mut().zip(ms) {
                    acc.push(m);
                }
            }
            Err(Exclusion::Separation) => sep += 1,
            Err(Exclusion::SingleClass) => single += 1,
            Err(Exclusion::FitFailure) => fail += 1,
        }
    }
    let used = per_method[0].len();
    if used == 0 {
        return Err(Error::InvalidData(format!("every replication of {} was excluded", cfg.label())));
    }
    let reports = methods
        .iter()
        .zip(&per_method)
        .map(|(&m, reps)| aggregate(m, reps))
        .collect::<Result<_>>()?;
    Ok(ScenarioSummary {
        config: cfg.clone(),
        true_beta: truth.beta.iter().copied().collect(),
        used,
        excluded_separation: sep,
        excluded_single_class: single,
        excluded_fit_failure: fail,
        reports,
    })
}

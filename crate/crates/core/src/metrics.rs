//! Evaluation measures for simulated replications.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{fit_ml, EstimatorSettings, Method};
use crate::logistic::{Coefficients, Dataset};

fn check_outcomes(pi: &[f64], y: &[f64]) -> Result<()> {
    if pi.len() != y.len() {
        return Err(Error::Dimension(format!("{} predictions for {} outcomes", pi.len(), y.len())));
    }
    if pi.is_empty() {
        return Err(Error::InvalidData("no rows".into()));
    }
    Ok(())
}

/// Concordance probability via Mann-Whitney ranks; ties count one half.
pub fn c_statistic(pi: &[f64], y: &[f64]) -> Result<f64> {
    check_outcomes(pi, y)?;
    let n1 = y.iter().filter(|&&v| v == 1.0).count();
    let n0 = y.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::InvalidData("c-statistic needs both outcome classes".into()));
    }
    let mut idx: Vec<usize> = (0..pi.len()).collect();
    idx.sort_by(|&a, &b| pi[a].total_cmp(&pi[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && pi[idx[end]] == pi[idx[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their average
        let avg = 0.5 * ((start + 1 + end) as f64);
        let events = idx[start..end].iter().filter(|&&i| y[i] == 1.0).count();
        rank_sum += avg * events as f64;
        start = end;
    }
    let u = rank_sum - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(u / (n1 as f64 * n0 as f64))
}

/// Slope of an ML logistic regression of `y_new` on `eta` with its own
/// intercept.
pub fn calibration_slope(eta: &[f64], y_new: &[f64]) -> Result<f64> {
    check_outcomes(eta, y_new)?;
    let (lo, hi) = eta
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let spread = hi - lo;
    if spread.is_nan() || spread <= 1e-12 * hi.abs().max(lo.abs()).max(1.0) {
        return Err(Error::InvalidData("linear predictor is constant".into()));
    }
    let x = DMatrix::from_column_slice(eta.len(), 1, eta);
    let ds = Dataset::from_covariates(y_new.to_vec(), &x)?;
    let fit = fit_ml(&ds, &EstimatorSettings::default())?;
    if !fit.converged {
        return Err(Error::NoConvergence { method: "calibration slope".into(), iterations: fit.iterations });
    }
    Ok(fit.beta[1])
}

/// Relative bias of the mean prediction against the observed event rate,
/// and the ratio of the two.
pub fn event_rate_bias(pi: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_outcomes(pi, y)?;
    let n = y.len() as f64;
    let observed = y.iter().sum::<f64>() / n;
    if observed == 0.0 {
        return Err(Error::InvalidData("no observed events".into()));
    }
    let predicted = pi.iter().sum::<f64>() / n;
    Ok(((predicted - observed) / observed, predicted / observed))
}

/// Bias, variance and RMSE of repeated estimates of one quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub bias: f64,
    /// Population variance (denominator n).
    pub variance: f64,
    pub rmse: f64,
}

impl ErrorSummary {
    /// Summarizes `errors`, the estimates minus the truth.
    pub fn from_errors(errors: &[f64]) -> Self {
        let n = errors.len() as f64;
        let bias = errors.iter().sum::<f64>() / n;
        let variance = errors.iter().map(|e| (e - bias).powi(2)).sum::<f64>() / n;
        let mse = errors.iter().map(|e| e * e).sum::<f64>() / n;
        Self { bias, variance, rmse: mse.sqrt() }
    }
}

/// Per-slope standardized errors averaged over slopes: returns the mean of
/// `|bias_j|` and the mean of `rmse_j`. `errors[k][j]` is replication `k`,
/// slope `j`.
fn slope_summary(errors: &[Vec<f64>]) -> (f64, f64) {
    let p = errors[0].len();
    if p == 0 {
        return (0.0, 0.0);
    }
    let (mut b, mut r) = (0.0, 0.0);
    for j in 0..p {
        let col: Vec<f64> = errors.iter().map(|e| e[j]).collect();
        let s = ErrorSummary::from_errors(&col);
        b += s.bias.abs();
        r += s.rmse;
    }
    (b / p as f64, r / p as f64)
}

/// Standardized slope errors `(beta_hat_j - beta_j) * sd_j` of one fit.
pub fn standardized_errors(estimate: &Coefficients, truth: &Coefficients, sds: &[f64]) -> Result<Vec<f64>> {
    if estimate.len() != truth.len() || sds.len() + 1 != truth.len() {
        return Err(Error::Dimension("coefficient and SD lengths disagree".into()));
    }
    Ok((1..truth.len()).map(|j| (estimate[j] - truth[j]) * sds[j - 1]).collect())
}

/// Absolute bias and RMSE of standardized coefficients, averaged over the
/// slopes. `sds[k]` holds the covariate SDs of replication `k`. Values are
/// on the raw scale; tables conventionally show them times 1000.
pub fn standardized_coef_summary(
    estimates: &[Coefficients],
    truth: &Coefficients,
    sds: &[Vec<f64>],
) -> Result<(f64, f64)> {
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("no replications".into()));
    }
    if estimates.len() != sds.len() {
        return Err(Error::Dimension(format!("{} fits but {} SD sets", estimates.len(), sds.len())));
    }
    let errors = estimates
        .iter()
        .zip(sds)
        .map(|(e, s)| standardized_errors(e, truth, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(slope_summary(&errors))
}

/// Per-slope interval outcome within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalOutcome {
    pub covers_truth: bool,
    pub excludes_zero: bool,
    pub width: f64,
}

/// Everything measured for one method in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationMetrics {
    pub event_rate_rel_bias: f64,
    /// Mean over rows of `pi_hat - pi_true`.
    pub pred_bias: f64,
    /// Mean over rows of `(pi_hat - pi_true)^2`.
    pub pred_mse: f64,
    pub std_coef_errors: Option<Vec<f64>>,
    pub cal_slope: Option<f64>,
    pub c_index: Option<f64>,
    pub intervals: Option<Vec<IntervalOutcome>>,
}

/// Aggregate over replications for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub replications: usize,
    pub event_rate_rel_bias: f64,
    pub event_rate_rel_rmse: f64,
    pub pred_bias: f64,
    pub pred_rmse: f64,
    pub coef_abs_bias: Option<f64>,
    pub coef_rmse: Option<f64>,
    pub cal_slope: Option<f64>,
    pub c_index: Option<f64>,
    /// Averaged over slopes.
    pub ci_coverage: Option<f64>,
    pub ci_power: Option<f64>,
    pub ci_width: Option<f64>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn aggregate(method: Method, reps: &[ReplicationMetrics]) -> Result<EvalReport> {
    if reps.is_empty() {
        return Err(Error::InvalidArgument("no replications to aggregate".into()));
    }
    let er: Vec<f64> = reps.iter().map(|r| r.event_rate_rel_bias).collect();
    let er = ErrorSummary::from_errors(&er);
    let pred_bias = mean(reps.iter().map(|r| r.pred_bias)).unwrap();
    let pred_rmse = mean(reps.iter().map(|r| r.pred_mse)).unwrap().sqrt();

    let coef: Option<Vec<Vec<f64>>> = reps.iter().map(|r| r.std_coef_errors.clone()).collect();
    let (coef_abs_bias, coef_rmse) = match coef {
        Some(c) => {
            let (b, r) = slope_summary(&c);
            (Some(b), Some(r))
        }
        None => (None, None),
    };

    let ivs: Vec<&Vec<IntervalOutcome>> = reps.iter().filter_map(|r| r.intervals.as_ref()).collect();
    let flat = || ivs.iter().flat_map(|v| v.iter());
    let frac = |f: fn(&IntervalOutcome) -> bool| mean(flat().map(|o| f(o) as u8 as f64));

    Ok(EvalReport {
        method,
        replications: reps.len(),
        event_rate_rel_bias: er.bias,
        event_rate_rel_rmse: er.rmse,
        pred_bias,
        pred_rmse,
        coef_abs_bias,
        coef_rmse,
        cal_slope: mean(reps.iter().filter_map(|r| r.cal_slope)),
        c_index: mean(reps.iter().filter_map(|r| r.c_index)),
        ci_coverage: frac(|o| o.covers_truth),
        ci_power: frac(|o| o.excludes_zero),
        ci_width: mean(flat().map(|o| o.width)),
    })
}

//! Coefficient-producing fits: ML, Firth-type (FL and weakened WF), FLIC,
//! FLAC, log-F(1,1), Cauchy priors and ridge with AIC-tuned penalty.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logistic::{
    fisher_information, hat_diagonals, log_likelihood, spd_inverse, Coefficients, Dataset,
};
use crate::solver::{
    default_start, maximize, no_convergence, CauchyPrior, Jeffreys, LogLik, Objective, Ridge,
};

/// ML iterations stop and flag separation once a coefficient passes this.
pub const SEPARATION_BOUND: f64 = 25.0;

/// Firth's weight on the log-determinant penalty.
pub const FIRTH_TAU: f64 = 0.5;

/// Default weakened-Firth weight.
pub const WF_TAU: f64 = 0.1;

pub const CAUCHY_SLOPE_SCALE: f64 = 2.5;
pub const CAUCHY_INTERCEPT_SCALE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ml,
    Wf,
    Fl,
    Flic,
    Flac,
    Lf,
    Cp,
    Au,
    Ab,
    Rr,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Ml,
        Method::Wf,
        Method::Fl,
        Method::Flic,
        Method::Flac,
        Method::Lf,
        Method::Cp,
        Method::Au,
        Method::Ab,
        Method::Rr,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Ml => "ml",
            Method::Wf => "wf",
            Method::Fl => "fl",
            Method::Flic => "flic",
            Method::Flac => "flac",
            Method::Lf => "lf",
            Method::Cp => "cp",
            Method::Au => "au",
            Method::Ab => "ab",
            Method::Rr => "rr",
        }
    }

    /// AB and AU only post-process FL predictions.
    pub fn is_prediction_only(&self) -> bool {
        matches!(self, Method::Ab | Method::Au)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSettings {
    pub max_iter: usize,
    /// Sup-norm tolerance on the (modified) score.
    pub tol: f64,
    /// Sup-norm cap on a single Newton step.
    pub max_step: f64,
    pub step_halvings: usize,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-8, max_step: 5.0, step_halvings: 25 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSettings {
    pub lambda_grid: Vec<f64>,
    pub fixed_lambda: Option<f64>,
}

impl Default for RidgeSettings {
    fn default() -> Self {
        let n = 60;
        let grid = (0..n)
            .map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / (n - 1) as f64))
            .collect();
        Self { lambda_grid: grid, fixed_lambda: None }
    }
}

impl RidgeSettings {
    pub fn fixed(lambda: f64) -> Self {
        Self { lambda_grid: vec![lambda], fixed_lambda: Some(lambda) }
    }

    fn validate(&self) -> Result<()> {
        if let Some(l) = self.fixed_lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidArgument(format!("ridge lambda {l} must be positive")));
            }
            return Ok(());
        }
        if self.lambda_grid.is_empty()
            || self.lambda_grid.iter().any(|l| !(*l > 0.0 && l.is_finite()))
            || self.lambda_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidArgument(
                "ridge grid must be positive and strictly ascending".into(),
            ));
        }
        Ok(())
    }
}

/// Method-specific scalars carried alongside a fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitExtras {
    pub tau: Option<f64>,
    pub lambda: Option<f64>,
    pub df_e: Option<f64>,
    /// Selected ridge penalty sits at an end of the grid.
    pub lambda_at_boundary: bool,
    pub flic_intercept: Option<f64>,
    pub flic_intercept_var: Option<f64>,
    /// Coefficient of the original/pseudo indicator in the FLAC fit.
    pub flac_indicator: Option<f64>,
    pub separation: bool,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta: Coefficients,
    /// Inverse negative Hessian of the fitted objective. For FLIC the
    /// intercept/slope covariances are NaN: only the offset-model intercept
    /// variance and the FL slope block are available.
    pub cov: DMatrix<f64>,
    /// Unpenalized log-likelihood on the original data.
    pub loglik: f64,
    /// Value of the maximized objective.
    pub penloglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: Method,
    pub extras: FitExtras,
}

impl FitResult {
    pub fn std_errors(&self) -> DVector<f64> {
        self.cov.diagonal().map(|v| v.sqrt())
    }
}

fn nan_matrix(q: usize) -> DMatrix<f64> {
    DMatrix::from_element(q, q, f64::NAN)
}

pub fn fit_ml(ds: &Dataset, s: &EstimatorSettings) -> Result<FitResult> {
    ds.check_fittable()?;
    let out = maximize(&LogLik { ds }, &default_start(ds), s, None, Some(SEPARATION_BOUND))?;
    let cov = if out.separated {
        nan_matrix(ds.n_params())
    } else {
        spd_inverse(&fisher_information(ds, &out.beta)?).unwrap_or_else(|_| nan_matrix(ds.n_params()))
    };
    Ok(FitResult {
        loglik: out.value,
        penloglik: out.value,
        beta: out.beta,
        cov,
        iterations: out.iterations,
        converged: out.converged,
        method: Method::Ml,
        extras: FitExtras { separation: out.separated, ..Default::default() },
    })
}

/// Jeffreys-penalized fit `l + tau log det I`. `tau = 0.5` is FL, smaller
/// values give the weakened variant.
pub fn fit_firth(ds: &Dataset, tau: f64, s: &EstimatorSettings) -> Result<FitResult> {
    if !(tau > 0.0 && tau <= 0.5) {
        return Err(Error::InvalidArgument(format!("tau {tau} outside (0, 0.5]")));
    }
    ds.check_rank()?;
    let method = if tau == FIRTH_TAU { Method::Fl } else { Method::Wf };
    let obj = Jeffreys { ds, tau };
    let out = maximize(&obj, &default_start(ds), s, None, None)?;
    if !out.converged {
        return Err(no_convergence(method.as_str(), out.iterations));
    }
    let cov = spd_inverse(&obj.neg_hessian(&out.beta)?)
        .or_else(|_| spd_inverse(&fisher_information(ds, &out.beta)?))?;
    Ok(FitResult {
        loglik: log_likelihood(ds, &out.beta)?,
        penloglik: out.value,
        beta: out.beta,
        cov,
        iterations: out.iterations,
        converged: true,
        method,
        extras: FitExtras { tau: Some(tau), ..Default::default() },
    })
}

/// Linear predictor without the intercept term (offset included).
pub(crate) fn slope_predictor(ds: &Dataset, beta: &Coefficients) -> DVector<f64> {
    let q = ds.n_params();
    let mut eta = ds.x().columns(1, q - 1) * beta.rows(1, q - 1);
    if let Some(off) = ds.offset() {
        eta += off;
    }
    eta
}

/// Intercept-only ML fit with `offset` held fixed. Returns the intercept and
/// its model-based variance.
pub(crate) fn offset_intercept(
    ds: &Dataset,
    offset: DVector<f64>,
    s: &EstimatorSettings,
) -> Result<(f64, f64, usize)> {
    let n = ds.n_rows();
    let one = Dataset::from_parts(
        ds.y().clone(),
        DMatrix::from_element(n, 1, 1.0),
        ds.weights().clone(),
        Some(offset),
        vec![ds.names()[0].clone()],
    );
    one.check_fittable()?;
    let out = maximize(&LogLik { ds: &one }, &DVector::zeros(1), s, None, None)?;
    if !out.converged {
        return Err(no_convergence("flic intercept", out.iterations));
    }
    let info = fisher_information(&one, &out.beta)?;
    Ok((out.beta[0], 1.0 / info[(0, 0)], out.iterations))
}

pub fn fit_flic(ds: &Dataset, s: &EstimatorSettings) -> Result<FitResult> {
    let fl = fit_firth(ds, FIRTH_TAU, s)?;
    flic_from_fl(ds, &fl, s)
}

pub(crate) fn flic_from_fl(ds: &Dataset, fl: &FitResult, s: &EstimatorSettings) -> Result<FitResult> {
    let eta = slope_predictor(ds, &fl.beta);
    let (gamma0, var0, iters) = offset_intercept(ds, eta, s)?;
    let mut beta = fl.beta.clone();
    beta[0] = gamma0;
    let q = beta.len();
    let mut cov = fl.cov.clone();
    for j in 0..q {
        cov[(0, j)] = f64::NAN;
        cov[(j, 0)] = f64::NAN;
    }
    cov[(0, 0)] = var0;
    let loglik = log_likelihood(ds, &beta)?;
    Ok(FitResult {
        beta,
        cov,
        loglik,
        penloglik: loglik,
        iterations: fl.iterations + iters,
        converged: true,
        method: Method::Flic,
        extras: FitExtras {
            flic_intercept: Some(gamma0),
            flic_intercept_var: Some(var0),
            ..Default::default()
        },
    })
}

/// Original rows stacked with two mirrored pseudo-copies weighted `h_i / 2`.
#[derive(Debug, Clone)]
pub struct AugmentedDataset {
    /// `3N` rows with the original design columns.
    pub rows: Dataset,
    /// 0 for original rows, 1 for pseudo rows.
    pub g: DVector<f64>,
}

impl AugmentedDataset {
    /// The stacked rows with `g` appended as the last design column.
    pub fn with_indicator(&self) -> Dataset {
        let x = self.rows.x();
        let q = x.ncols();
        let mut xg = x.clone().insert_column(q, 0.0);
        xg.set_column(q, &self.g);
        let mut names = self.rows.names().to_vec();
        names.push("g".into());
        self.rows.with_design(xg, names)
    }
}

pub fn build_flac_augmented(ds: &Dataset, fl: &FitResult) -> Result<AugmentedDataset> {
    let h = hat_diagonals(ds, &fl.beta)?;
    Ok(augment_with_hat(ds, &h))
}

pub(crate) fn augment_with_hat(ds: &Dataset, h: &DVector<f64>) -> AugmentedDataset {
    let n = ds.n_rows();
    let q = ds.n_params();
    let mut x = DMatrix::zeros(3 * n, q);
    for b in 0..3 {
        x.rows_mut(b * n, n).copy_from(ds.x());
    }
    let y = DVector::from_fn(3 * n, |i, _| {
        let yi = ds.y()[i % n];
        if i >= 2 * n {
            1.0 - yi
        } else {
            yi
        }
    });
    let w = DVector::from_fn(3 * n, |i, _| if i < n { ds.weights()[i] } else { 0.5 * h[i % n] });
    let offset = ds.offset().map(|o| DVector::from_fn(3 * n, |i, _| o[i % n]));
    let g = DVector::from_fn(3 * n, |i, _| if i < n { 0.0 } else { 1.0 });
    AugmentedDataset { rows: Dataset::from_parts(y, x, w, offset, ds.names().to_vec()), g }
}

pub fn fit_flac(ds: &Dataset, s: &EstimatorSettings) -> Result<FitResult> {
    let fl = fit_firth(ds, FIRTH_TAU, s)?;
    let aug = build_flac_augmented(ds, &fl)?;
    let full = aug.with_indicator();
    let out = maximize(&LogLik { ds: &full }, &default_start(&full), s, None, None)?;
    if !out.converged {
        return Err(no_convergence("flac", out.iterations));
    }
    let q = ds.n_params();
    let cov_full = spd_inverse(&fisher_information(&full, &out.beta)?)?;
    let beta = out.beta.rows(0, q).into_owned();
    Ok(FitResult {
        loglik: log_likelihood(ds, &beta)?,
        penloglik: out.value,
        cov: cov_full.view((0, 0), (q, q)).into_owned(),
        extras: FitExtras { flac_indicator: Some(out.beta[q]), ..Default::default() },
        beta,
        iterations: fl.iterations + out.iterations,
        converged: true,
        method: Method::Flac,
    })
}

/// Original rows plus, for every covariate, two half-weight pseudo rows with
/// that covariate at 1, everything else (intercept included) at 0, and
/// outcomes 1 and 0.
pub(crate) fn logf_augmented(ds: &Dataset) -> Dataset {
    let n = ds.n_rows();
    let q = ds.n_params();
    let extra = 2 * (q - 1);
    let mut x = DMatrix::zeros(n + extra, q);
    x.rows_mut(0, n).copy_from(ds.x());
    let mut y = DVector::zeros(n + extra);
    y.rows_mut(0, n).copy_from(ds.y());
    let mut w = DVector::from_element(n + extra, 0.5);
    w.rows_mut(0, n).copy_from(ds.weights());
    for j in 1..q {
        let r = n + 2 * (j - 1);
        x[(r, j)] = 1.0;
        x[(r + 1, j)] = 1.0;
        y[r] = 1.0;
    }
    let offset = ds.offset().map(|o| {
        let mut v = DVector::zeros(n + extra);
        v.rows_mut(0, n).copy_from(o);
        v
    });
    Dataset::from_parts(y, x, w, offset, ds.names().to_vec())
}

pub fn fit_logf(ds: &Dataset, s: &EstimatorSettings) -> Result<FitResult> {
    ds.check_fittable()?;
    let aug = logf_augmented(ds);
    let out = maximize(&LogLik { ds: &aug }, &default_start(ds), s, None, None)?;
    if !out.converged {
        return Err(no_convergence("lf", out.iterations));
    }
    Ok(FitResult {
        loglik: log_likelihood(ds, &out.beta)?,
        penloglik: out.value,
        cov: spd_inverse(&fisher_information(&aug, &out.beta)?)?,
        beta: out.beta,
        iterations: out.iterations,
        converged: true,
        method: Method::Lf,
        extras: FitExtras::default(),
    })
}

/// Affine reparametrization `x'_j = (x_j - center_j) / scale_j` of the
/// covariate columns. Coefficients map back through `beta = T beta'`.
#[derive(Debug, Clone)]
pub(crate) struct ColumnTransform {
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl ColumnTransform {
    fn new(ds: &Dataset, scale_of: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let q = ds.n_params();
        let mut center = vec![0.0; q];
        let mut scale = vec![1.0; q];
        for j in 1..q {
            let col: Vec<f64> = ds.x().column(j).iter().copied().collect();
            center[j] = col.iter().sum::<f64>() / col.len() as f64;
            scale[j] = scale_of(&col);
            if !(scale[j] > 0.0 && scale[j].is_finite()) {
                return Err(Error::RankDeficient { column: ds.names()[j].clone() });
            }
        }
        Ok(Self { center, scale })
    }

    fn apply(&self, ds: &Dataset) -> Dataset {
        let mut x = ds.x().clone();
        for j in 1..x.ncols() {
            let (c, s) = (self.center[j], self.scale[j]);
            x.column_mut(j).apply(|v| *v = (*v - c) / s);
        }
        ds.with_design(x, ds.names().to_vec())
    }

    fn matrix(&self) -> DMatrix<f64> {
        let q = self.scale.len();
        let mut t = DMatrix::identity(q, q);
        for j in 1..q {
            t[(j, j)] = 1.0 / self.scale[j];
            t[(0, j)] = -self.center[j] / self.scale[j];
        }
        t
    }
}

pub(crate) fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Two distinct observed values.
pub(crate) fn is_binary(v: &[f64]) -> bool {
    let first = v[0];
    match v.iter().find(|x| **x != first) {
        None => false,
        Some(&second) => v.iter().all(|x| *x == first || *x == second),
    }
}

fn cauchy_scale(col: &[f64]) -> f64 {
    if is_binary(col) {
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
        hi - lo
    } else {
        2.0 * sample_sd(col)
    }
}

pub fn fit_cauchy(ds: &Dataset, s: &EstimatorSettings) -> Result<FitResult> {
    ds.check_fittable()?;
    let tr = ColumnTransform::new(ds, cauchy_scale)?;
    let z = tr.apply(ds);
    let mut scales = vec![CAUCHY_SLOPE_SCALE; ds.n_params()];
    scales[0] = CAUCHY_INTERCEPT_SCALE;
    let obj = CauchyPrior { ds: &z, scales };
    let out = maximize(&obj, &default_start(&z), s, None, None)?;
    if !out.converged {
        return Err(no_convergence("cp", out.iterations));
    }
    let t = tr.matrix();
    let cov_z = spd_inverse(&obj.neg_hessian(&out.beta)?)?;
    let beta = &t * &out.beta;
    Ok(FitResult {
        loglik: log_likelihood(ds, &beta)?,
        penloglik: out.value,
        cov: &t * cov_z * t.transpose(),
        beta,
        iterations: out.iterations,
        converged: true,
        method: Method::Cp,
        extras: FitExtras::default(),
    })
}

/// `trace(H_unpen H_pen^{-1})` for the ridge objective at `beta`.
pub(crate) fn ridge_df(ds: &Dataset, beta: &DVector<f64>, lambda: f64) -> Result<f64> {
    let obj = Ridge { ds, lambda };
    let info = fisher_information(ds, beta)?;
    let pen = spd_inverse(&obj.neg_hessian(beta)?)?;
    Ok((info * pen).trace())
}

pub fn fit_ridge(ds: &Dataset, rs: &RidgeSettings, s: &EstimatorSettings) -> Result<FitResult> {
    ds.check_fittable()?;
    rs.validate()?;
    let tr = ColumnTransform::new(ds, sample_sd)?;
    let z = tr.apply(ds);
    let grid: Vec<f64> = match rs.fixed_lambda {
        Some(l) => vec![l],
        None => rs.lambda_grid.clone(),
    };

    struct Candidate {
        beta: DVector<f64>,
        value: f64,
        aic: f64,
        df: f64,
        iterations: usize,
    }

    // Fit from the heaviest penalty down so each fit warm-starts near zero
    // slopes; a non-converged grid point is skipped.
    let mut fits: Vec<Option<Candidate>> = Vec::with_capacity(grid.len());
    let mut start = default_start(&z);
    for &lambda in grid.iter().rev() {
        let obj = Ridge { ds: &z, lambda };
        let out = maximize(&obj, &start, s, None, None)?;
        if !out.converged {
            fits.push(None);
            continue;
        }
        let l = log_likelihood(&z, &out.beta)?;
        let df = ridge_df(&z, &out.beta, lambda)?;
        start = out.beta.clone();
        fits.push(Some(Candidate {
            aic: -2.0 * l + 2.0 * df,
            df,
            value: out.value,
            beta: out.beta,
            iterations: out.iterations,
        }));
    }
    fits.reverse();

    let mut best: Option<usize> = None;
    for (i, c) in fits.iter().enumerate() {
        if let Some(c) = c {
            // ascending lambda with strict improvement keeps the smaller one on ties
            if best.is_none_or(|b| c.aic < fits[b].as_ref().unwrap().aic) {
                best = Some(i);
            }
        }
    }
    let idx = best.ok_or_else(|| no_convergence("rr", s.max_iter))?;
    let chosen = fits[idx].as_ref().unwrap();
    let lambda = grid[idx];
    let obj = Ridge { ds: &z, lambda };
    let t = tr.matrix();
    let cov_z = spd_inverse(&obj.neg_hessian(&chosen.beta)?)?;
    let beta = &t * &chosen.beta;
    let total_iterations = fits.iter().flatten().map(|c| c.iterations).sum();
    Ok(FitResult {
        loglik: log_likelihood(ds, &beta)?,
        penloglik: chosen.value,
        cov: &t * cov_z * t.transpose(),
        beta,
        iterations: total_iterations,
        converged: true,
        method: Method::Rr,
        extras: FitExtras {
            lambda: Some(lambda),
            df_e: Some(chosen.df),
            lambda_at_boundary: rs.fixed_lambda.is_none() && (idx == 0 || idx + 1 == grid.len()),
            ..Default::default()
        },
    })
}

/// Dispatches a coefficient-producing method. `tau` applies to WF only.
pub fn fit_method(
    ds: &Dataset,
    method: Method,
    tau: f64,
    ridge: &RidgeSettings,
    s: &EstimatorSettings,
) -> Result<FitResult> {
    match method {
        Method::Ml => fit_ml(ds, s),
        Method::Fl => fit_firth(ds, FIRTH_TAU, s),
        Method::Wf => {
            let mut f = fit_firth(ds, tau, s)?;
            f.method = Method::Wf;
            Ok(f)
        }
        Method::Flic => fit_flic(ds, s),
        Method::Flac => fit_flac(ds, s),
        Method::Lf => fit_logf(ds, s),
        Method::Cp => fit_cauchy(ds, s),
        Method::Rr => fit_ridge(ds, ridge, s),
        Method::Ab | Method::Au => Err(Error::InvalidArgument(format!(
            "{method} produces predictions only"
        ))),
    }
}

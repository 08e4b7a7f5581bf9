//! Confidence intervals: Wald from a covariance estimate, profile
//! (penalized) likelihood by bracketing and bisection, and the FLIC
//! intercept interval from the offset model.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::{
    build_flac_augmented, fit_firth, logf_augmented, EstimatorSettings, FitResult, Method,
    FIRTH_TAU,
};
use crate::logistic::Dataset;
use crate::solver::{maximize, no_convergence, Jeffreys, LogLik, Objective};

/// Tolerance on the likelihood-ratio statistic at a profile bound.
pub const PROFILE_TOL: f64 = 1e-6;
/// Outward bracketing steps, each one Wald standard error.
pub const PROFILE_MAX_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMethod {
    Wald,
    Profile,
    FlicIntercept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: IntervalMethod,
    pub level: f64,
    pub excludes_zero: bool,
    /// The profile never crossed the threshold on this side; the bound is
    /// reported as infinite.
    pub lower_open: bool,
    pub upper_open: bool,
}

impl Interval {
    fn closed(estimate: f64, lower: f64, upper: f64, method: IntervalMethod, level: f64) -> Self {
        Self {
            estimate,
            lower,
            upper,
            method,
            level,
            excludes_zero: lower > 0.0 || upper < 0.0,
            lower_open: false,
            upper_open: false,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    pub level: f64,
    pub intervals: Vec<Interval>,
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("confidence level {level} outside (0, 1)")))
    }
}

/// Two-sided standard normal quantile for `level`.
pub fn normal_quantile(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 * (1.0 + level))
}

/// `chi^2_1` quantile at `level`.
pub fn chi2_1_quantile(level: f64) -> f64 {
    normal_quantile(level).powi(2)
}

fn wald_interval(estimate: f64, var: f64, level: f64) -> Result<Interval> {
    if var.is_nan() || var < 0.0 {
        return Err(Error::InvalidArgument(format!("variance {var} is not a nonnegative number")));
    }
    let half = normal_quantile(level) * var.sqrt();
    Ok(Interval::closed(estimate, estimate - half, estimate + half, IntervalMethod::Wald, level))
}

pub fn wald_ci(fit: &FitResult, level: f64) -> Result<IntervalSet> {
    check_level(level)?;
    let intervals = (0..fit.beta.len())
        .map(|r| wald_interval(fit.beta[r], fit.cov[(r, r)], level))
        .collect::<Result<_>>()?;
    Ok(IntervalSet { level, intervals })
}

pub fn flic_intercept_ci(flic: &FitResult, level: f64) -> Result<Interval> {
    check_level(level)?;
    let (g, v) = match (flic.extras.flic_intercept, flic.extras.flic_intercept_var) {
        (Some(g), Some(v)) => (g, v),
        _ => return Err(Error::InvalidArgument("fit carries no FLIC intercept".into())),
    };
    let mut iv = wald_interval(g, v, level)?;
    iv.method = IntervalMethod::FlicIntercept;
    Ok(iv)
}

/// The objective a fit maximized, re-expressed for profiling.
enum ProfileTarget {
    Plain { ds: Dataset, tau: f64 },
    Augmented { ds: Dataset },
}

impl ProfileTarget {
    fn objective(&self) -> Box<dyn Objective + '_> {
        match self {
            ProfileTarget::Plain { ds, tau } if *tau > 0.0 => Box::new(Jeffreys { ds, tau: *tau }),
            ProfileTarget::Plain { ds, .. } => Box::new(LogLik { ds }),
            ProfileTarget::Augmented { ds } => Box::new(LogLik { ds }),
        }
    }
}

/// Profile likelihood interval for coefficient `r` under the objective that
/// produced `fit`. Default estimator settings are used for inner fits.
pub fn profile_ci(ds: &Dataset, fit: &FitResult, r: usize, level: f64) -> Result<Interval> {
    profile_ci_with(ds, fit, r, level, &EstimatorSettings::default())
}

pub fn profile_ci_with(
    ds: &Dataset,
    fit: &FitResult,
    r: usize,
    level: f64,
    s: &EstimatorSettings,
) -> Result<Interval> {
    check_level(level)?;
    if r >= fit.beta.len() {
        return Err(Error::Dimension(format!("coefficient index {r} out of range")));
    }
    if !fit.converged {
        return Err(Error::InvalidArgument("profile interval needs a converged fit".into()));
    }
    let (target, beta_hat) = match fit.method {
        Method::Ml => (ProfileTarget::Plain { ds: ds.clone(), tau: 0.0 }, fit.beta.clone()),
        Method::Fl | Method::Wf => {
            let tau = fit.extras.tau.unwrap_or(FIRTH_TAU);
            (ProfileTarget::Plain { ds: ds.clone(), tau }, fit.beta.clone())
        }
        Method::Flic => {
            if r == 0 {
                return flic_intercept_ci(fit, level);
            }
            let fl = fit_firth(ds, FIRTH_TAU, s)?;
            (ProfileTarget::Plain { ds: ds.clone(), tau: FIRTH_TAU }, fl.beta)
        }
        Method::Flac => {
            let fl = fit_firth(ds, FIRTH_TAU, s)?;
            let aug = build_flac_augmented(ds, &fl)?.with_indicator();
            let g = fit
                .extras
                .flac_indicator
                .ok_or_else(|| Error::InvalidArgument("FLAC fit lacks its indicator".into()))?;
            let full = DVector::from_iterator(
                fit.beta.len() + 1,
                fit.beta.iter().copied().chain(std::iter::once(g)),
            );
            (ProfileTarget::Augmented { ds: aug }, full)
        }
        Method::Lf => (ProfileTarget::Augmented { ds: logf_augmented(ds) }, fit.beta.clone()),
        m => {
            return Err(Error::Unsupported(format!(
                "profile intervals are not defined for {m}; use Wald"
            )))
        }
    };
    let obj = target.objective();
    let max_value = obj.value(&beta_hat)?;
    let threshold = chi2_1_quantile(level);
    let se = fit.cov[(r, r)].sqrt();
    let step = if se.is_finite() && se > 0.0 { se } else { 1.0 };

    let lr = |b: f64, warm: &DVector<f64>| -> Result<(f64, DVector<f64>)> {
        let out = maximize(obj.as_ref(), warm, s, Some((r, b)), None)?;
        if !out.converged {
            return Err(no_convergence("profile", out.iterations));
        }
        Ok((2.0 * (max_value - out.value), out.beta))
    };

    let mut bounds = [0.0; 2];
    let mut open = [false; 2];
    for (side, dir) in [(0usize, -1.0), (1usize, 1.0)] {
        let est = beta_hat[r];
        let mut inside = (est, beta_hat.clone());
        let mut outside = None;
        for k in 1..=PROFILE_MAX_STEPS {
            let b = est + dir * step * k as f64;
            let (stat, sol) = lr(b, &inside.1)?;
            if stat >= threshold {
                outside = Some(b);
                break;
            }
            inside = (b, sol);
        }
        let Some(mut out_b) = outside else {
            open[side] = true;
            bounds[side] = dir * f64::INFINITY;
            continue;
        };
        let mut in_b = inside.0;
        let mut warm = inside.1;
        let mut root = out_b;
        for _ in 0..200 {
            let mid = 0.5 * (in_b + out_b);
            let (stat, sol) = lr(mid, &warm)?;
            root = mid;
            if (stat - threshold).abs() < PROFILE_TOL {
                break;
            }
            if stat < threshold {
                in_b = mid;
                warm = sol;
            } else {
                out_b = mid;
            }
        }
        bounds[side] = root;
    }

    let mut iv = Interval::closed(fit.beta[r], bounds[0], bounds[1], IntervalMethod::Profile, level);
    iv.lower_open = open[0];
    iv.upper_open = open[1];
    Ok(iv)
}

/// Likelihood-ratio statistic `2 (l*_max - max_{beta_r = b} l*)` for the
/// objective behind an ML/FL/WF fit. Exposed for checking profile bounds.
pub fn profile_statistic(
    ds: &Dataset,
    fit: &FitResult,
    r: usize,
    b: f64,
) -> Result<f64> {
    let tau = match fit.method {
        Method::Ml => 0.0,
        Method::Fl | Method::Wf => fit.extras.tau.unwrap_or(FIRTH_TAU),
        m => return Err(Error::Unsupported(format!("profile statistic for {m}"))),
    };
    let target = ProfileTarget::Plain { ds: ds.clone(), tau };
    let obj = target.objective();
    let max_value = obj.value(&fit.beta)?;
    let out = maximize(obj.as_ref(), &fit.beta, &EstimatorSettings::default(), Some((r, b)), None)?;
    Ok(2.0 * (max_value - out.value))
}

/// Intervals of the kind conventionally paired with each method: Wald for
/// ML, CP and RR; profile for WF, FL, FLAC and LF; FLIC combines FL profile
/// intervals for slopes with the offset-model intercept interval.
pub fn default_intervals(ds: &Dataset, fit: &FitResult, level: f64) -> Result<IntervalSet> {
    match fit.method {
        Method::Ml | Method::Cp | Method::Rr => wald_ci(fit, level),
        Method::Wf | Method::Fl | Method::Flic | Method::Flac | Method::Lf => {
            check_level(level)?;
            let intervals = (0..fit.beta.len())
                .map(|r| profile_ci(ds, fit, r, level))
                .collect::<Result<_>>()?;
            Ok(IntervalSet { level, intervals })
        }
        m => Err(Error::Unsupported(format!("{m} has no coefficient intervals"))),
    }
}

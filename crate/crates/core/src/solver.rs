//! Damped Newton ascent shared by every estimator.
//!
//! An objective supplies its value, gradient and a positive definite
//! curvature matrix (the exact negative Hessian or a Fisher-type surrogate).
//! Steps are capped in sup-norm and halved until the objective does not
//! decrease. One coordinate may be held fixed, which is how profile
//! likelihoods are maximized.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::EstimatorSettings;
use crate::logistic::{
    jeffreys_neg_hessian_at, log_likelihood, loglik_from_eta, linear_predictor, modified_score,
    spd_cholesky, weighted_gram, Dataset, WorkingState,
};

pub(crate) struct Evaluation {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub curvature: DMatrix<f64>,
}

pub(crate) trait Objective {
    fn value(&self, beta: &DVector<f64>) -> Result<f64>;
    fn evaluate(&self, beta: &DVector<f64>) -> Result<Evaluation>;
    /// Exact negative Hessian, used for covariance estimates.
    fn neg_hessian(&self, beta: &DVector<f64>) -> Result<DMatrix<f64>>;
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub beta: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub separated: bool,
}

/// Maximizes `obj` from `start`. With `fixed = Some((r, b))` coordinate `r`
/// is pinned to `b`. With `separation_bound = Some(m)` the iteration stops
/// and flags separation once `max |beta_j|` exceeds `m` before the gradient
/// has vanished.
pub(crate) fn maximize<O: Objective + ?Sized>(
    obj: &O,
    start: &DVector<f64>,
    settings: &EstimatorSettings,
    fixed: Option<(usize, f64)>,
    separation_bound: Option<f64>,
) -> Result<NewtonOutcome> {
    let q = start.len();
    let free: Vec<usize> = (0..q).filter(|j| fixed.is_none_or(|(r, _)| r != *j)).collect();
    let mut beta = start.clone();
    if let Some((r, b)) = fixed {
        beta[r] = b;
    }
    let mut eval = obj.evaluate(&beta)?;
    let mut iterations = 0;
    let mut converged = false;
    let mut separated = false;

    loop {
        let g = DVector::from_iterator(free.len(), free.iter().map(|&j| eval.gradient[j]));
        if g.amax() < settings.tol {
            converged = true;
            break;
        }
        if free.is_empty() || iterations >= settings.max_iter {
            break;
        }
        if let Some(bound) = separation_bound {
            if beta.amax() > bound {
                separated = true;
                break;
            }
        }
        let c = DMatrix::from_fn(free.len(), free.len(), |a, b| eval.curvature[(free[a], free[b])]);
        let mut step = spd_cholesky(&c)?.solve(&g);
        let m = step.amax();
        if m > settings.max_step {
            step *= settings.max_step / m;
        }
        let slack = 1e-12 * eval.value.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.step_halvings {
            let mut cand = beta.clone();
            for (k, &j) in free.iter().enumerate() {
                cand[j] += t * step[k];
            }
            if let Ok(v) = obj.value(&cand) {
                if v.is_finite() && v >= eval.value - slack {
                    accepted = Some(cand);
                    break;
                }
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some(cand) => {
                beta = cand;
                eval = obj.evaluate(&beta)?;
            }
            None => break,
        }
    }

    Ok(NewtonOutcome { beta, value: eval.value, iterations, converged, separated })
}

/// Weighted log-likelihood (offset honored through the dataset).
pub(crate) struct LogLik<'a> {
    pub ds: &'a Dataset,
}

impl Objective for LogLik<'_> {
    fn value(&self, beta: &DVector<f64>) -> Result<f64> {
        log_likelihood(self.ds, beta)
    }

    fn evaluate(&self, beta: &DVector<f64>) -> Result<Evaluation> {
        let ds = self.ds;
        let eta = linear_predictor(ds, beta)?;
        let value = loglik_from_eta(ds, &eta);
        let pi = eta.map(crate::logistic::logistic);
        let w = ds.weights();
        let y = ds.y();
        let resid = DVector::from_fn(ds.n_rows(), |i, _| w[i] * (y[i] - pi[i]));
        let wd = DVector::from_fn(ds.n_rows(), |i, _| w[i] * pi[i] * (1.0 - pi[i]));
        Ok(Evaluation {
            value,
            gradient: ds.x().tr_mul(&resid),
            curvature: weighted_gram(ds.x(), &wd),
        })
    }

    fn neg_hessian(&self, beta: &DVector<f64>) -> Result<DMatrix<f64>> {
        crate::logistic::fisher_information(self.ds, beta)
    }
}

/// `l + tau log det I`. Iterates with the exact negative Hessian when it is
/// positive definite and the Fisher information otherwise.
pub(crate) struct Jeffreys<'a> {
    pub ds: &'a Dataset,
    pub tau: f64,
}

impl Objective for Jeffreys<'_> {
    fn value(&self, beta: &DVector<f64>) -> Result<f64> {
        crate::logistic::jeffreys_penalized_loglik(self.ds, beta, self.tau)
    }

    fn evaluate(&self, beta: &DVector<f64>) -> Result<Evaluation> {
        let st = WorkingState::new(self.ds, beta)?;
        let value = log_likelihood(self.ds, beta)? + self.tau * st.log_det_information();
        let gradient = modified_score(self.ds, &st, self.tau);
        let exact = jeffreys_neg_hessian_at(self.ds, &st, self.tau);
        let curvature = if spd_cholesky(&exact).is_ok() { exact } else { st.information };
        Ok(Evaluation { value, gradient, curvature })
    }

    fn neg_hessian(&self, beta: &DVector<f64>) -> Result<DMatrix<f64>> {
        let st = WorkingState::new(self.ds, beta)?;
        Ok(jeffreys_neg_hessian_at(self.ds, &st, self.tau))
    }
}

/// `l - sum_j log(1 + (beta_j / s_j)^2)`: independent Cauchy priors with
/// per-coefficient scale. Newton curvature uses the majorizing weight
/// `2 / (s^2 + b^2)`, which keeps it positive definite away from the mode.
pub(crate) struct CauchyPrior<'a> {
    pub ds: &'a Dataset,
    pub scales: Vec<f64>,
}

impl CauchyPrior<'_> {
    fn penalty(&self, beta: &DVector<f64>) -> f64 {
        self.scales
            .iter()
            .zip(beta.iter())
            .map(|(s, b)| (b / s).powi(2).ln_1p())
            .sum()
    }
}

impl Objective for CauchyPrior<'_> {
    fn value(&self, beta: &DVector<f64>) -> Result<f64> {
        Ok(log_likelihood(self.ds, beta)? - self.penalty(beta))
    }

    fn evaluate(&self, beta: &DVector<f64>) -> Result<Evaluation> {
        let mut e = LogLik { ds: self.ds }.evaluate(beta)?;
        e.value -= self.penalty(beta);
        for (j, s) in self.scales.iter().enumerate() {
            let b = beta[j];
            let d = s * s + b * b;
            e.gradient[j] -= 2.0 * b / d;
            e.curvature[(j, j)] += 2.0 / d;
        }
        Ok(e)
    }

    fn neg_hessian(&self, beta: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut h = crate::logistic::fisher_information(self.ds, beta)?;
        for (j, s) in self.scales.iter().enumerate() {
            let b = beta[j];
            let d = s * s + b * b;
            h[(j, j)] += 2.0 * (s * s - b * b) / (d * d);
        }
        Ok(h)
    }
}

/// `l - lambda * sum_{j>=1} beta_j^2`.
pub(crate) struct Ridge<'a> {
    pub ds: &'a Dataset,
    pub lambda: f64,
}

impl Ridge<'_> {
    fn penalty(&self, beta: &DVector<f64>) -> f64 {
        self.lambda * beta.rows(1, beta.len() - 1).norm_squared()
    }
}

impl Objective for Ridge<'_> {
    fn value(&self, beta: &DVector<f64>) -> Result<f64> {
        Ok(log_likelihood(self.ds, beta)? - self.penalty(beta))
    }

    fn evaluate(&self, beta: &DVector<f64>) -> Result<Evaluation> {
        let mut e = LogLik { ds: self.ds }.evaluate(beta)?;
        e.value -= self.penalty(beta);
        for j in 1..beta.len() {
            e.gradient[j] -= 2.0 * self.lambda * beta[j];
            e.curvature[(j, j)] += 2.0 * self.lambda;
        }
        Ok(e)
    }

    fn neg_hessian(&self, beta: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut h = crate::logistic::fisher_information(self.ds, beta)?;
        for j in 1..beta.len() {
            h[(j, j)] += 2.0 * self.lambda;
        }
        Ok(h)
    }
}

/// Starting point: intercept at the logit of the weighted event rate.
pub(crate) fn default_start(ds: &Dataset) -> DVector<f64> {
    let mut b = DVector::zeros(ds.n_params());
    let rate = ds.event_rate();
    if rate > 0.0 && rate < 1.0 && ds.offset().is_none() {
        b[0] = crate::logistic::logit(rate);
    }
    b
}

pub(crate) fn no_convergence(method: &str, iterations: usize) -> Error {
    Error::NoConvergence { method: method.to_string(), iterations }
}

/// Objectives available for direct evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Penalty {
    None,
    /// `tau log det I`.
    Jeffreys(f64),
    /// log-F(1,1) prior on every slope.
    LogF,
    /// Cauchy priors with the given scale per coefficient, on the scale of
    /// the supplied design.
    Cauchy(Vec<f64>),
    /// `lambda * sum of squared slopes`.
    Ridge(f64),
}

/// Value, gradient and exact negative Hessian of a penalized log-likelihood.
pub fn objective_derivatives(
    ds: &Dataset,
    penalty: &Penalty,
    beta: &DVector<f64>,
) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    fn parts<O: Objective>(o: &O, beta: &DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let e = o.evaluate(beta)?;
        Ok((e.value, e.gradient, o.neg_hessian(beta)?))
    }
    if beta.len() != ds.n_params() {
        return Err(Error::Dimension(format!("{} coefficients for {} columns", beta.len(), ds.n_params())));
    }
    match penalty {
        Penalty::None => parts(&LogLik { ds }, beta),
        Penalty::Jeffreys(tau) => parts(&Jeffreys { ds, tau: *tau }, beta),
        Penalty::LogF => {
            let aug = crate::estimators::logf_augmented(ds);
            parts(&LogLik { ds: &aug }, beta)
        }
        Penalty::Cauchy(scales) => {
            if scales.len() != beta.len() {
                return Err(Error::Dimension("one Cauchy scale per coefficient".into()));
            }
            parts(&CauchyPrior { ds, scales: scales.clone() }, beta)
        }
        Penalty::Ridge(lambda) => parts(&Ridge { ds, lambda: *lambda }, beta),
    }
}

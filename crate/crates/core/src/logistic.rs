//! Binomial/logit kernel: data container, probabilities, log-likelihood,
//! score, Fisher information, hat diagonals and the Jeffreys-penalized
//! objective with its exact derivatives.
//!
//! Everything here is a pure function of `(Dataset, beta)`. Rows carry a
//! nonnegative weight and an optional fixed offset on the linear predictor.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Coefficient vector, index 0 is the intercept.
pub type Coefficients = DVector<f64>;

/// Relative pivot tolerance for the rank check at fit entry.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    w: DVector<f64>,
    offset: Option<DVector<f64>>,
    names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from an outcome vector and a full design matrix whose
    /// first column is the all-ones intercept. Weights default to one.
    pub fn new(y: Vec<f64>, x: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n {
            return Err(Error::Dimension(format!(
                "{} outcomes but design matrix has {} rows",
                n,
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::Dimension("design matrix has no columns".into()));
        }
        if let Some(v) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
            return Err(Error::InvalidData(format!("outcome value {v} is not 0 or 1")));
        }
        if x.column(0).iter().any(|v| *v != 1.0) {
            return Err(Error::InvalidData("column 0 of the design matrix must be all ones".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("design matrix contains non-finite values".into()));
        }
        let mut names = vec!["(Intercept)".to_string()];
        names.extend((1..x.ncols()).map(|j| format!("x{j}")));
        Ok(Self {
            y: DVector::from_vec(y),
            w: DVector::from_element(n, 1.0),
            x,
            offset: None,
            names,
        })
    }

    /// Prepends an intercept column to an `N x p` covariate matrix.
    pub fn from_covariates(y: Vec<f64>, covariates: &DMatrix<f64>) -> Result<Self> {
        let n = covariates.nrows();
        let mut x = DMatrix::from_element(n, covariates.ncols() + 1, 1.0);
        x.columns_mut(1, covariates.ncols()).copy_from(covariates);
        Self::new(y, x)
    }

    pub fn with_weights(mut self, w: Vec<f64>) -> Result<Self> {
        if w.len() != self.y.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} rows",
                w.len(),
                self.y.len()
            )));
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidData("weights must be finite and nonnegative".into()));
        }
        self.w = DVector::from_vec(w);
        Ok(self)
    }

    pub fn with_offset(mut self, offset: Vec<f64>) -> Result<Self> {
        if offset.len() != self.y.len() {
            return Err(Error::Dimension(format!(
                "{} offsets for {} rows",
                offset.len(),
                self.y.len()
            )));
        }
        self.offset = Some(DVector::from_vec(offset));
        Ok(self)
    }

    /// Column names, intercept included. Length must equal the column count.
    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.x.ncols() {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                names.len(),
                self.x.ncols()
            )));
        }
        self.names = names;
        Ok(self)
    }

    /// Pseudo-data constructor: skips the intercept-column and outcome checks.
    pub(crate) fn from_parts(
        y: DVector<f64>,
        x: DMatrix<f64>,
        w: DVector<f64>,
        offset: Option<DVector<f64>>,
        names: Vec<String>,
    ) -> Self {
        debug_assert_eq!(y.len(), x.nrows());
        debug_assert_eq!(w.len(), x.nrows());
        debug_assert_eq!(names.len(), x.ncols());
        Self { y, x, w, offset, names }
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn offset(&self) -> Option<&DVector<f64>> {
        self.offset.as_ref()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    /// Number of coefficients, `p + 1`.
    pub fn n_params(&self) -> usize {
        self.x.ncols()
    }

    /// Weighted event count `k`.
    pub fn event_count(&self) -> f64 {
        self.y.dot(&self.w)
    }

    pub fn total_weight(&self) -> f64 {
        self.w.sum()
    }

    pub fn event_rate(&self) -> f64 {
        self.event_count() / self.total_weight()
    }

    /// Same rows with a different design matrix (offset and weights kept).
    pub(crate) fn with_design(&self, x: DMatrix<f64>, names: Vec<String>) -> Self {
        Self::from_parts(self.y.clone(), x, self.w.clone(), self.offset.clone(), names)
    }

    /// Detects linear dependence among the design columns (restricted to rows
    /// with positive weight) by an unpivoted Cholesky of the Gram matrix.
    /// A pivot below `RANK_TOL` times the column's own squared norm names the
    /// offending column.
    pub fn check_rank(&self) -> Result<()> {
        let q = self.n_params();
        let present = self.w.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let gram = weighted_gram(&self.x, &present);
        let mut l = DMatrix::<f64>::zeros(q, q);
        for k in 0..q {
            let mut d = gram[(k, k)];
            for j in 0..k {
                d -= l[(k, j)] * l[(k, j)];
            }
            if gram[(k, k)] <= 0.0 || d <= RANK_TOL * gram[(k, k)] {
                return Err(Error::RankDeficient { column: self.names[k].clone() });
            }
            let lkk = d.sqrt();
            l[(k, k)] = lkk;
            for i in (k + 1)..q {
                let mut s = gram[(i, k)];
                for j in 0..k {
                    s -= l[(i, j)] * l[(k, j)];
                }
                l[(i, k)] = s / lkk;
            }
        }
        Ok(())
    }

    /// Checks the invariants an ML fit needs: full rank and both outcome
    /// classes present with positive weight.
    pub(crate) fn check_fittable(&self) -> Result<()> {
        let has = |cls: f64| (0..self.n_rows()).any(|i| self.y[i] == cls && self.w[i] > 0.0);
        if !has(0.0) || !has(1.0) {
            return Err(Error::InvalidData(
                "both outcome classes need at least one row with positive weight".into(),
            ));
        }
        self.check_rank()
    }
}

/// Overflow-safe logistic function. Never returns exactly 0 or 1 for
/// moderate arguments; for `eta` below about -745 it underflows to the
/// smallest subnormal instead of zero.
pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        if e == 0.0 {
            f64::from_bits(1)
        } else {
            e / (1.0 + e)
        }
    }
}

/// `log(1 + exp(x))` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn check_beta(ds: &Dataset, beta: &Coefficients) -> Result<()> {
    if beta.len() != ds.n_params() {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} design columns",
            beta.len(),
            ds.n_params()
        )));
    }
    Ok(())
}

pub fn linear_predictor(ds: &Dataset, beta: &Coefficients) -> Result<DVector<f64>> {
    check_beta(ds, beta)?;
    let mut eta = &ds.x * beta;
    if let Some(off) = &ds.offset {
        eta += off;
    }
    Ok(eta)
}

pub fn predict_probabilities(ds: &Dataset, beta: &Coefficients) -> Result<DVector<f64>> {
    Ok(linear_predictor(ds, beta)?.map(logistic))
}

pub fn log_likelihood(ds: &Dataset, beta: &Coefficients) -> Result<f64> {
    let eta = linear_predictor(ds, beta)?;
    Ok(loglik_from_eta(ds, &eta))
}

pub(crate) fn loglik_from_eta(ds: &Dataset, eta: &DVector<f64>) -> f64 {
    // y log(pi) + (1-y) log(1-pi) = y*eta - log(1 + e^eta)
    let mut l = 0.0;
    for i in 0..ds.n_rows() {
        let w = ds.w[i];
        if w != 0.0 {
            l += w * (ds.y[i] * eta[i] - softplus(eta[i]));
        }
    }
    l
}

pub fn score(ds: &Dataset, beta: &Coefficients) -> Result<DVector<f64>> {
    let pi = predict_probabilities(ds, beta)?;
    let resid = DVector::from_fn(ds.n_rows(), |i, _| ds.w[i] * (ds.y[i] - pi[i]));
    Ok(ds.x.tr_mul(&resid))
}

/// `X' diag(v) X`.
pub(crate) fn weighted_gram(x: &DMatrix<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let mut xv = x.clone();
    for mut col in xv.column_iter_mut() {
        col.component_mul_assign(v);
    }
    let mut g = x.tr_mul(&xv);
    // exact symmetry
    let q = g.nrows();
    for r in 0..q {
        for s in (r + 1)..q {
            let m = 0.5 * (g[(r, s)] + g[(s, r)]);
            g[(r, s)] = m;
            g[(s, r)] = m;
        }
    }
    g
}

pub fn fisher_information(ds: &Dataset, beta: &Coefficients) -> Result<DMatrix<f64>> {
    let pi = predict_probabilities(ds, beta)?;
    let wd = DVector::from_fn(ds.n_rows(), |i, _| ds.w[i] * pi[i] * (1.0 - pi[i]));
    Ok(weighted_gram(&ds.x, &wd))
}

/// Per-row quantities at one coefficient vector.
#[derive(Debug, Clone)]
pub struct WorkingState {
    pub pi: DVector<f64>,
    /// `w_i * pi_i * (1 - pi_i)`
    pub w_diag: DVector<f64>,
    pub h: DVector<f64>,
    pub information: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl WorkingState {
    pub fn new(ds: &Dataset, beta: &Coefficients) -> Result<Self> {
        let pi = predict_probabilities(ds, beta)?;
        let w_diag = DVector::from_fn(ds.n_rows(), |i, _| ds.w[i] * pi[i] * (1.0 - pi[i]));
        let information = weighted_gram(&ds.x, &w_diag);
        let chol = spd_cholesky(&information)?;
        // h_i = W_i * x_i' I^{-1} x_i, via L^{-1} x_i
        let z = chol.l().solve_lower_triangular(&ds.x.transpose()).ok_or(Error::Singular)?;
        let h = DVector::from_fn(ds.n_rows(), |i, _| w_diag[i] * z.column(i).norm_squared());
        Ok(Self { pi, w_diag, h, information, chol })
    }

    pub fn log_det_information(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn information_inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Cholesky that reports a non-positive pivot as `Error::Singular`.
pub(crate) fn spd_cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    let chol = Cholesky::new(m.clone()).ok_or(Error::Singular)?;
    if chol.l_dirty().diagonal().iter().any(|d| !d.is_finite() || *d <= 0.0) {
        return Err(Error::Singular);
    }
    Ok(chol)
}

pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(spd_cholesky(m)?.inverse())
}

pub fn hat_diagonals(ds: &Dataset, beta: &Coefficients) -> Result<DVector<f64>> {
    Ok(WorkingState::new(ds, beta)?.h)
}

/// `l(beta) + tau * log det I(beta)`.
pub fn jeffreys_penalized_loglik(ds: &Dataset, beta: &Coefficients, tau: f64) -> Result<f64> {
    let l = log_likelihood(ds, beta)?;
    if tau == 0.0 {
        return Ok(l);
    }
    let info = fisher_information(ds, beta)?;
    let chol = spd_cholesky(&info)?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok(l + tau * logdet)
}

/// Gradient of the Jeffreys-penalized objective:
/// `sum_i (w_i (y_i - pi_i) + 2 tau h_i (1/2 - pi_i)) x_i`.
pub fn jeffreys_score(ds: &Dataset, beta: &Coefficients, tau: f64) -> Result<DVector<f64>> {
    let st = WorkingState::new(ds, beta)?;
    Ok(modified_score(ds, &st, tau))
}

pub(crate) fn modified_score(ds: &Dataset, st: &WorkingState, tau: f64) -> DVector<f64> {
    let r = DVector::from_fn(ds.n_rows(), |i, _| {
        ds.w[i] * (ds.y[i] - st.pi[i]) + 2.0 * tau * st.h[i] * (0.5 - st.pi[i])
    });
    ds.x.tr_mul(&r)
}

/// Exact negative Hessian of `l + tau log det I`:
/// `I - tau * [ tr(C d2I/drds) - tr(C dI/dr C dI/ds) ]` with `C = I^{-1}`.
pub fn jeffreys_neg_hessian(ds: &Dataset, beta: &Coefficients, tau: f64) -> Result<DMatrix<f64>> {
    let st = WorkingState::new(ds, beta)?;
    Ok(jeffreys_neg_hessian_at(ds, &st, tau))
}

pub(crate) fn jeffreys_neg_hessian_at(ds: &Dataset, st: &WorkingState, tau: f64) -> DMatrix<f64> {
    let mut out = st.information.clone();
    if tau == 0.0 {
        return out;
    }
    let n = ds.n_rows();
    let q = ds.n_params();
    let c = st.information_inverse();
    // q_i = x_i' C x_i = h_i / (w_i pi_i (1-pi_i)); recompute directly to
    // stay defined for zero-weight rows.
    let xc = &ds.x * &c;
    let quad = DVector::from_fn(n, |i, _| xc.row(i).dot(&ds.x.row(i)));
    let a = DVector::from_fn(n, |i, _| {
        let p = st.pi[i];
        ds.w[i] * p * (1.0 - p) * (1.0 - 2.0 * p)
    });
    let b = DVector::from_fn(n, |i, _| {
        let p = st.pi[i];
        ds.w[i] * p * (1.0 - p) * (1.0 - 6.0 * p + 6.0 * p * p)
    });
    // M_r = C * X' diag(a .* x_r) X
    let m: Vec<DMatrix<f64>> = (0..q)
        .map(|r| {
            let v = a.component_mul(&ds.x.column(r));
            &c * weighted_gram(&ds.x, &v)
        })
        .collect();
    for r in 0..q {
        for s in r..q {
            let mut second = 0.0;
            for i in 0..n {
                second += b[i] * ds.x[(i, r)] * ds.x[(i, s)] * quad[i];
            }
            let cross = m[r].component_mul(&m[s].transpose()).sum();
            let d = tau * (second - cross);
            out[(r, s)] -= d;
            if r != s {
                out[(s, r)] -= d;
            }
        }
    }
    out
}

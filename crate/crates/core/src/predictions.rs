//! Post-hoc correctors of Firth-type predictions.
//!
//! Both shift the FL prediction by `C_i = (1/2 - pi_i) h_i`, with the hat
//! diagonal taken at the FL estimate: AB adds it, AU subtracts it.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{FitResult, Method};
use crate::logistic::{Dataset, WorkingState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub pi: Vec<f64>,
    pub method: Method,
    /// Set for AU rows that fall outside `[0, 1]`. The value itself is kept.
    pub clipped: Vec<bool>,
}

impl PredictionSet {
    pub fn mean(&self) -> f64 {
        self.pi.iter().sum::<f64>() / self.pi.len() as f64
    }
}

/// `C_i` for every row, with the FL predictions they apply to.
pub fn correction_terms(ds: &Dataset, fl: &FitResult) -> Result<(DVector<f64>, DVector<f64>)> {
    if fl.method != Method::Fl {
        return Err(Error::InvalidArgument(format!(
            "prediction correction needs an FL fit, got {}",
            fl.method
        )));
    }
    let st = WorkingState::new(ds, &fl.beta)?;
    let c = DVector::from_fn(ds.n_rows(), |i, _| (0.5 - st.pi[i]) * st.h[i]);
    Ok((st.pi, c))
}

pub fn predict_ab(ds: &Dataset, fl: &FitResult) -> Result<PredictionSet> {
    let (pi, c) = correction_terms(ds, fl)?;
    Ok(PredictionSet {
        pi: (pi + c).iter().copied().collect(),
        method: Method::Ab,
        clipped: vec![false; ds.n_rows()],
    })
}

pub fn predict_au(ds: &Dataset, fl: &FitResult) -> Result<PredictionSet> {
    let (pi, c) = correction_terms(ds, fl)?;
    Ok(au_from_parts(&pi, &c))
}

pub(crate) fn au_from_parts(pi: &DVector<f64>, c: &DVector<f64>) -> PredictionSet {
    let v: Vec<f64> = (pi - c).iter().copied().collect();
    let clipped = v.iter().map(|p| !(0.0..=1.0).contains(p)).collect();
    PredictionSet { pi: v, method: Method::Au, clipped }
}

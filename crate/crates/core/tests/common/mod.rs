#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rarefit::estimators::{fit_ml, EstimatorSettings};
use rarefit::logistic::logistic;
use rarefit::Dataset;

/// Logistic data with `p` standard normal covariates.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize, intercept: f64) -> Dataset {
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let eta = intercept + (0..p).map(|j| x[(i, j)] * b[j]).sum::<f64>();
            (rng.random::<f64>() < logistic(eta)) as u8 as f64
        })
        .collect();
    Dataset::from_covariates(y, &x).unwrap()
}

/// Datasets on which ML converges (no separation), both classes present.
pub fn regular_datasets(seed: u64, count: usize, n: usize, p: usize, intercept: f64) -> Vec<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let ds = random_dataset(&mut rng, n, p, intercept);
        let events = ds.event_count();
        if events < 2.0 || events > n as f64 - 2.0 {
            continue;
        }
        match fit_ml(&ds, &EstimatorSettings::default()) {
            Ok(f) if f.converged && !f.extras.separation => out.push(ds),
            _ => {}
        }
    }
    out
}

pub fn random_beta(rng: &mut ChaCha8Rng, q: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(q, |_, _| rng.random_range(-scale..scale))
}

pub fn mean(v: &DVector<f64>) -> f64 {
    v.sum() / v.len() as f64
}

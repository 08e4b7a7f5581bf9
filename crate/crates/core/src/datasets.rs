//! Small canonical datasets used in examples and tests.

use nalgebra::DMatrix;

use crate::logistic::Dataset;

/// Single binary covariate; cell counts given as
/// `(events at x=0, non-events at x=0, events at x=1, non-events at x=1)`.
/// Rows are ordered by `x`, non-events first within each group.
pub fn two_by_two_counts(events0: usize, controls0: usize, events1: usize, controls1: usize) -> Dataset {
    let mut y = Vec::new();
    let mut x = Vec::new();
    for (xv, events, controls) in [(0.0, events0, controls0), (1.0, events1, controls1)] {
        y.extend(std::iter::repeat_n(0.0, controls));
        y.extend(std::iter::repeat_n(1.0, events));
        x.extend(std::iter::repeat_n(xv, controls + events));
    }
    let n = y.len();
    Dataset::from_covariates(y, &DMatrix::from_column_slice(n, 1, &x))
        .expect("valid 2x2 table")
        .with_names(vec!["(Intercept)".into(), "x".into()])
        .expect("two columns")
}

/// 105 rows: 5 of 100 events at `x = 0`, 1 of 5 at `x = 1`.
pub fn two_by_two() -> Dataset {
    two_by_two_counts(5, 95, 1, 4)
}

/// `y = 1{x > 0}` on eight points: completely separated.
pub fn separated() -> Dataset {
    let x = [-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0];
    let y = x.iter().map(|v| if *v > 0.0 { 1.0 } else { 0.0 }).collect();
    Dataset::from_covariates(y, &DMatrix::from_column_slice(8, 1, &x))
        .expect("valid data")
        .with_names(vec!["(Intercept)".into(), "x".into()])
        .expect("two columns")
}

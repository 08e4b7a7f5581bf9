//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line.

mod common;

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rarefit::estimators::{
    build_flac_augmented, fit_cauchy, fit_firth, fit_flac, fit_flic, fit_logf, fit_ml, fit_ridge,
    EstimatorSettings, FitResult,
};
use rarefit::inference::default_intervals;
use rarefit::logistic::{hat_diagonals, predict_probabilities};
use rarefit::metrics::EvalReport;
use rarefit::predictions::{predict_ab, predict_au};
use rarefit::simgen::{run_scenario, ScenarioConfig, ScenarioSummary, SignPattern};
use rarefit::{datasets, objective_derivatives, Dataset, Method, Penalty, RidgeSettings};

fn report(n: u32, ok: bool, detail: &str) {
    println!("criterion {n}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn s() -> EstimatorSettings {
    EstimatorSettings::default()
}

fn two_probs(ds: &Dataset, fit: &FitResult) -> (f64, f64) {
    let p = predict_probabilities(ds, &fit.beta).unwrap();
    (p[0], p[ds.n_rows() - 1])
}

#[test]
fn criterion_1_two_by_two_example() {
    let start = Instant::now();
    let ds = datasets::two_by_two();
    let ml = two_probs(&ds, &fit_ml(&ds, &s()).unwrap());
    let fl_fit = fit_firth(&ds, 0.5, &s()).unwrap();
    let fl = two_probs(&ds, &fl_fit);
    let fl_avg = predict_probabilities(&ds, &fl_fit.beta).unwrap().mean();
    let flic = two_probs(&ds, &fit_flic(&ds, &s()).unwrap());
    let flac = two_probs(&ds, &fit_flac(&ds, &s()).unwrap());
    let elapsed = start.elapsed().as_secs_f64();

    // one unit in the fourth decimal: the reported values are truncated
    let close = |a: f64, b: f64| (a - b).abs() < 1e-4;
    let checks = [
        close(ml.0, 0.05) && close(ml.1, 0.20),
        close(fl.0, 0.0544) && close(fl.1, 0.25),
        close(fl_avg, 0.0638),
        ((fl_avg / ds.event_rate() - 1.0) - 0.116).abs() < 1e-3,
        close(flic.0, 0.0486) && close(flic.1, 0.2282),
        close(flac.0, 0.0516) && close(flac.1, 0.1683),
        elapsed < 1.0,
    ];
    let detail = format!(
        "ML {:.4}/{:.4}, FL {:.4}/{:.4} avg {:.4}, FLIC {:.4}/{:.4}, FLAC {:.4}/{:.4}, {:.3}s",
        ml.0, ml.1, fl.0, fl.1, fl_avg, flic.0, flic.1, flac.0, flac.1, elapsed
    );
    report(1, checks.iter().all(|&c| c), &detail);
}

#[test]
fn criterion_2_score_identities() {
    let sets = common::regular_datasets(2, 50, 120, 3, -1.5);
    let mut worst = 0.0f64;
    let mut worst_ab = 0.0f64;
    for ds in &sets {
        let rate = ds.event_rate();
        let fl = fit_firth(ds, 0.5, &s()).unwrap();
        let mut means = vec![];
        for fit in [
            fit_ml(ds, &s()).unwrap(),
            fit_flic(ds, &s()).unwrap(),
            fit_flac(ds, &s()).unwrap(),
            fit_logf(ds, &s()).unwrap(),
            fit_ridge(ds, &RidgeSettings::default(), &s()).unwrap(),
        ] {
            means.push(predict_probabilities(ds, &fit.beta).unwrap().mean());
        }
        means.push(predict_au(ds, &fl).unwrap().mean());
        for m in means {
            worst = worst.max((m - rate).abs());
        }
        let fl_bias = predict_probabilities(ds, &fl.beta).unwrap().mean() - rate;
        let ab_bias = predict_ab(ds, &fl).unwrap().mean() - rate;
        worst_ab = worst_ab.max((ab_bias - 2.0 * fl_bias).abs());
    }
    report(
        2,
        worst < 1e-8 && worst_ab < 1e-8,
        &format!("max |mean - rate| {worst:.2e}, max |AB - 2 FL| {worst_ab:.2e}, 50 datasets"),
    );
}

#[test]
fn criterion_3_firth_equivalences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_table = 0.0f64;
    for _ in 0..30 {
        let c: Vec<usize> = (0..4).map(|_| rng.random_range(0..25)).collect();
        let (e0, n0, e1, n1) = (c[0], c[1] + 1, c[2] + 1, c[3]);
        let ds = datasets::two_by_two_counts(e0, n0, e1, n1);
        let fl = fit_firth(&ds, 0.5, &s()).unwrap();
        let y = vec![1.0, 0.0, 1.0, 0.0];
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let w = [e0, n0, e1, n1].iter().map(|&k| k as f64 + 0.5).collect();
        let half = Dataset::new(y, x).unwrap().with_weights(w).unwrap();
        let ml = fit_ml(&half, &s()).unwrap();
        worst_table = worst_table.max((&fl.beta - &ml.beta).amax());
    }

    let mut worst_avg = 0.0f64;
    let mut worst_h = 0.0f64;
    for ds in common::regular_datasets(33, 20, 80, 4, -1.0) {
        let fl = fit_firth(&ds, 0.5, &s()).unwrap();
        let q = ds.n_params() as f64;
        let h = hat_diagonals(&ds, &fl.beta).unwrap();
        worst_h = worst_h.max((h.sum() - q).abs());
        let aug = build_flac_augmented(&ds, &fl).unwrap().rows;
        let avg = aug.event_count() / aug.total_weight();
        let expect = (ds.event_count() + q / 2.0) / (ds.n_rows() as f64 + q);
        worst_avg = worst_avg.max((avg - expect).abs());
    }
    report(
        3,
        worst_table < 1e-8 && worst_avg < 1e-8 && worst_h < 1e-8,
        &format!("2x2 sup-norm {worst_table:.2e}, augmented mean {worst_avg:.2e}, sum h {worst_h:.2e}"),
    );
}

const TABLE_METHODS: [Method; 7] =
    [Method::Ml, Method::Wf, Method::Fl, Method::Flac, Method::Cp, Method::Rr, Method::Ab];

fn table_scenario() -> &'static ScenarioSummary {
    static RUN: OnceLock<ScenarioSummary> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = ScenarioConfig::new(500, 0.05, 0.5, SignPattern::Mixed, 200, 20_170_405);
        run_scenario(&cfg, &TABLE_METHODS).unwrap()
    })
}

fn get(sm: &ScenarioSummary, m: Method) -> &EvalReport {
    sm.reports.iter().find(|r| r.method == m).unwrap()
}

#[test]
fn criterion_4_event_rate_bias_table() {
    let start = Instant::now();
    let sm = table_scenario();
    let targets = [(Method::Wf, 3.7), (Method::Fl, 18.2), (Method::Cp, 0.2), (Method::Ab, 36.4)];
    let mut ok = true;
    let mut parts = vec![];
    for (m, t) in targets {
        let v = 100.0 * get(sm, m).event_rate_rel_bias;
        ok &= (v - t).abs() <= 3.0;
        parts.push(format!("{m} {v:.1} (target {t})"));
    }
    parts.push(format!("{} reps used, {} separated", sm.used, sm.excluded_separation));
    parts.push(format!("{:.0}s", start.elapsed().as_secs_f64()));
    report(4, ok, &parts.join(", "));
}

#[test]
fn criterion_5_coefficient_rmse_ordering() {
    let sm = table_scenario();
    let r = |m| get(sm, m).coef_rmse.unwrap();
    let (rr, flac, fl, wf, ml) = (r(Method::Rr), r(Method::Flac), r(Method::Fl), r(Method::Wf), r(Method::Ml));
    report(
        5,
        rr < flac && flac <= fl && fl < wf && wf <= ml,
        &format!(
            "x1000: RR {:.0} FLAC {:.0} FL {:.0} WF {:.0} ML {:.0}",
            1000.0 * rr,
            1000.0 * flac,
            1000.0 * fl,
            1000.0 * wf,
            1000.0 * ml
        ),
    );
}

fn central_differences(
    ds: &Dataset,
    pen: &Penalty,
    beta: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let q = beta.len();
    let mut g = DVector::zeros(q);
    let mut h = DMatrix::zeros(q, q);
    for j in 0..q {
        let step = 1e-5 * beta[j].abs().max(1.0);
        let mut up = beta.clone();
        let mut dn = beta.clone();
        up[j] += step;
        dn[j] -= step;
        let (fu, gu, _) = objective_derivatives(ds, pen, &up).unwrap();
        let (fd, gd, _) = objective_derivatives(ds, pen, &dn).unwrap();
        g[j] = (fu - fd) / (2.0 * step);
        h.set_column(j, &(-(gu - gd) / (2.0 * step)));
    }
    (g, h)
}

fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-2)
}

#[test]
fn criterion_6_derivative_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(15..40);
        let p = rng.random_range(1..4);
        let ds = common::random_dataset(&mut rng, n, p, -0.5);
        let beta = common::random_beta(&mut rng, p + 1, 1.0);
        let scales: Vec<f64> = (0..=p).map(|j| if j == 0 { 10.0 } else { 2.5 }).collect();
        for pen in [
            Penalty::None,
            Penalty::Jeffreys(0.5),
            Penalty::Jeffreys(0.1),
            Penalty::LogF,
            Penalty::Cauchy(scales),
            Penalty::Ridge(rng.random_range(0.01..5.0)),
        ] {
            let (_, g, h) = objective_derivatives(&ds, &pen, &beta).unwrap();
            let (fg, fh) = central_differences(&ds, &pen, &beta);
            let gs = g.amax();
            let hs = h.amax();
            for j in 0..g.len() {
                worst = worst.max(rel_err(g[j], fg[j], gs));
                for k in 0..g.len() {
                    worst = worst.max(rel_err(h[(j, k)], fh[(j, k)], hs));
                }
            }
        }
    }
    report(6, worst < 1e-4, &format!("max relative error {worst:.2e} over 20 instances x 6 objectives"));
}

#[test]
fn criterion_7_separation() {
    let ds = datasets::separated();
    let ml = fit_ml(&ds, &s()).unwrap();
    let mut ok = !ml.converged && ml.extras.separation;
    let mut parts = vec![format!("ML converged={} separation={}", ml.converged, ml.extras.separation)];
    let fits = [
        fit_firth(&ds, 0.5, &s()),
        fit_flac(&ds, &s()),
        fit_logf(&ds, &s()),
        fit_cauchy(&ds, &s()),
        fit_ridge(&ds, &RidgeSettings::default(), &s()),
    ];
    for fit in fits {
        let fit = fit.unwrap();
        let finite = fit.converged && fit.beta.iter().all(|b| b.is_finite());
        let ivs = default_intervals(&ds, &fit, 0.95).unwrap();
        let bounded = ivs.intervals.iter().all(|i| {
            i.lower.is_finite() && i.upper.is_finite() && !i.lower_open && !i.upper_open
        });
        ok &= finite && bounded;
        parts.push(format!(
            "{} slope {:.3} [{:.3}, {:.3}]",
            fit.method, fit.beta[1], ivs.intervals[1].lower, ivs.intervals[1].upper
        ));
    }
    report(7, ok, &parts.join("; "));
}

#[test]
fn criterion_8_calibration_slope_direction() {
    let methods = [
        Method::Ml,
        Method::Wf,
        Method::Fl,
        Method::Flic,
        Method::Flac,
        Method::Lf,
        Method::Cp,
        Method::Rr,
    ];
    let cfg = ScenarioConfig::new(500, 0.05, 1.0, SignPattern::Mixed, 200, 20_170_406);
    let sm = run_scenario(&cfg, &methods).unwrap();
    let mut ok = true;
    let mut parts = vec![];
    for r in &sm.reports {
        let slope = r.cal_slope.unwrap();
        ok &= if r.method == Method::Rr { slope > 1.0 } else { slope < 1.0 };
        parts.push(format!("{} {slope:.3}", r.method));
    }
    report(8, ok, &parts.join(", "));
}

fn simulate(dir: &Path, scenario: &Path, threads: &str) {
    let status = Command::new(env!("CARGO_BIN_EXE_rarefit"))
        .args(["simulate", "--scenario"])
        .arg(scenario)
        .arg("--out-dir")
        .arg(dir)
        .env("RAREFIT_THREADS", threads)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn criterion_9_determinism_across_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = tmp.path().join("scenario.toml");
    std::fs::write(
        &scenario,
        "seed = 99\nreplications = 12\n\n[[scenarios]]\nn = 500\nevent_rate = 0.05\neffect = 0.5\nsigns = \"mixed\"\n",
    )
    .unwrap();
    let one = tmp.path().join("one");
    let four = tmp.path().join("four");
    simulate(&one, &scenario, "1");
    simulate(&four, &scenario, "4");
    let mut files: Vec<_> = std::fs::read_dir(&one).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    let identical = !files.is_empty()
        && files.iter().all(|f| std::fs::read(one.join(f)).unwrap() == std::fs::read(four.join(f)).unwrap());
    report(9, identical, &format!("{} summary files compared, 1 vs 4 workers", files.len()));
}

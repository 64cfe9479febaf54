//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use nalgebra::DMatrix;
use preqscore_core::experiment::{
    normal_draws, replicate_rng, run, ExperimentConfig, ExperimentKind, OutlierModel, RunOptions,
    Transform, Truth,
};
use preqscore_core::prequential::prequential_scores;
use preqscore_core::score::{check_propriety, simplex_grid};
use preqscore_core::{
    ar_process, delta_trace, flat_prior_location_model, iid_gaussian_model, innovations_recursion,
    ma_process, rescale_rule, score_from_decision_problem, select, select_among, DecisionProblem,
    Error, Rule,
};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn experiment(
    kind: ExperimentKind,
    seed: u64,
    edit: impl FnOnce(&mut ExperimentConfig),
) -> Result<preqscore_core::experiment::ExperimentReport, String> {
    let mut c = ExperimentConfig::new(kind);
    c.base_seed = seed;
    edit(&mut c);
    run(&c, &RunOptions::default()).map_err(|e| format!("{kind}: {e}"))
}

fn failed_assertions(r: &preqscore_core::experiment::ExperimentReport) -> Vec<String> {
    r.assertions
        .iter()
        .filter(|(_, ok)| !**ok)
        .map(|(k, _)| k.clone())
        .collect()
}

/// Mean per-step deltas within 3 SE of ½(ξ-1-log ξ) and τ_Q⁻²(ξ+ξ⁻¹-2), 10⁶ draws per cell.
fn expectation_formulas() -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, xi) in [0.25, 0.5, 2.0, 4.0].into_iter().enumerate() {
        for (j, tq) in [0.5, 1.0, 2.0].into_iter().enumerate() {
            let r = experiment(
                ExperimentKind::VarianceExpectation,
                1000 + 10 * i as u64 + j as u64,
                |c| {
                    c.xi = xi;
                    c.tau_q2 = tq;
                    c.n = 10_000;
                    c.replicates = 100;
                },
            )?;
            for key in ["log_delta", "hyvarinen_delta"] {
                let a = &r.aggregates[key];
                let z = a["abs_error"].as_f64().unwrap() / a["se"].as_f64().unwrap();
                worst = worst.max(z);
            }
            check(
                r.passed(),
                format!("xi={xi} tau_q2={tq}: {:?}", failed_assertions(&r)),
            )?;
        }
    }
    Ok(format!(
        "12 cells x 2 rules, largest |mean - theory| = {worst:.2} SE"
    ))
}

/// Hyvärinen per-step = (2/σ²)·log per-step to 1e-12.
fn constant_multiple() -> Outcome {
    let mut worst: f64 = 0.0;
    for sigma2 in [0.25, 1.0, 4.0] {
        let r = experiment(ExperimentKind::MeanLinkage, 7, |c| {
            c.tau_q2 = sigma2;
            c.n = 10_000;
            c.replicates = 5;
        })?;
        worst = worst.max(
            r.aggregates["max_per_step_relative_deviation"]
                .as_f64()
                .unwrap(),
        );
        check(
            r.passed(),
            format!("sigma2={sigma2}: {:?}", failed_assertions(&r)),
        )?;
    }
    Ok(format!(
        "sigma2 in {{0.25, 1, 4}}, max relative deviation {worst:.1e}"
    ))
}

/// True model selected in ≥ 99% of 500 replicates at n = 5000, frequencies non-decreasing.
fn consistency() -> Outcome {
    let mut detail = Vec::new();
    for truth in [Truth::P, Truth::Q] {
        let r = experiment(ExperimentKind::Consistency, 99, |c| {
            c.xi = 2.0;
            c.n = 5000;
            c.replicates = 500;
            c.truth = truth;
            c.n_grid = vec![50, 500, 5000];
        })?;
        check(
            r.passed(),
            format!("{truth:?} true: {:?}", failed_assertions(&r)),
        )?;
        for rule in ["log", "hyvarinen"] {
            let f: Vec<String> = r.aggregates[format!("{rule}_true_model_frequency").as_str()]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| format!("{}", v["frequency"]))
                .collect();
            detail.push(format!("{truth:?}/{rule} [{}]", f.join(",")));
        }
    }
    Ok(detail.join(" "))
}

fn cholesky_variances(gammas: &[f64]) -> Vec<f64> {
    let n = gammas.len();
    let l = DMatrix::from_fn(n, n, |i, j| gammas[i.abs_diff(j)])
        .cholesky()
        .expect("positive definite")
        .l();
    (0..n).map(|i| l[(i, i)] * l[(i, i)]).collect()
}

/// AR(p) constancy for i > p, Cholesky agreement to i = 200, MA(1) monotone limit.
fn conditional_variances() -> Outcome {
    for (phi, s) in [
        (vec![0.5], 1.0),
        (vec![0.6, -0.3], 1.0),
        (vec![0.4, 0.2, -0.25], 0.7),
    ] {
        let p = phi.len();
        let spec = ar_process(&phi, s).map_err(|e| e.to_string())?;
        let v: Vec<f64> = innovations_recursion(&spec, 200)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|s| s.conditional_variance)
            .collect();
        let oracle = cholesky_variances(&spec.gammas(200));
        for i in 0..200 {
            check(
                (v[i] - oracle[i]).abs() <= 1e-10 * oracle[i],
                format!("AR({p}) i={} vs Cholesky", i + 1),
            )?;
            if i >= p {
                check(
                    (v[i] - s).abs() <= 1e-10 * s,
                    format!("AR({p}) not constant at i={}", i + 1),
                )?;
            }
        }
        check(
            v[..p].iter().all(|&x| x > s * (1.0 + 1e-10)),
            format!("AR({p}) constant before p"),
        )?;
    }
    // θ = 0.99: strictly decreasing over the full range
    let v: Vec<f64> = innovations_recursion(&ma_process(&[0.99], 1.0).unwrap(), 500)
        .unwrap()
        .iter()
        .map(|s| s.conditional_variance)
        .collect();
    check(
        v.windows(2).all(|w| w[1] < w[0]),
        "MA(1) theta=0.99 not strictly decreasing",
    )?;
    check(
        v[499] - 1.0 < 1e-6 && v[499] > 1.0,
        "MA(1) theta=0.99 limit",
    )?;
    let slow = v[499] - 1.0;
    // θ = 0.5: strict wherever the decrement is representable, limit reached
    let v: Vec<f64> = innovations_recursion(&ma_process(&[0.5], 1.0).unwrap(), 500)
        .unwrap()
        .iter()
        .map(|s| s.conditional_variance)
        .collect();
    check(v[0] == 1.25, "MA(1) v_1")?;
    for w in v.windows(2) {
        check(w[1] <= w[0], "MA(1) theta=0.5 increased")?;
        if w[0] - 1.0 > 4.0 * f64::EPSILON {
            check(w[1] < w[0], "MA(1) theta=0.5 stalled above resolution")?;
        }
    }
    check((v[499] - 1.0).abs() < 1e-6, "MA(1) theta=0.5 limit")?;
    Ok(format!("AR(1..3) constant for i > p and match Cholesky to i=200; MA(1) v_500 - 1 = {slow:.2e} (theta 0.99)"))
}

/// One additive outlier changes summands {k, k+1} under AR(1) and {k} under iid models.
fn outlier_locality() -> Outcome {
    let ar = experiment(ExperimentKind::OutlierLocality, 5, |c| c.outlier_index = 50)?;
    check(ar.passed(), format!("AR(1): {:?}", failed_assertions(&ar)))?;
    let iid = experiment(ExperimentKind::OutlierLocality, 5, |c| {
        c.outlier_index = 50;
        c.outlier_model = OutlierModel::Iid;
    })?;
    check(iid.passed(), format!("iid: {:?}", failed_assertions(&iid)))?;
    let changed = |r: &preqscore_core::experiment::ExperimentReport, rule: &str| {
        r.aggregates[format!("{rule}_outlier").as_str()]["changed_summands_rep0"].to_string()
    };
    check(
        changed(&ar, "hyvarinen") == "[50,51]" && changed(&ar, "log") == "[50,51]",
        "AR(1) changed set",
    )?;
    check(
        changed(&iid, "hyvarinen") == "[50]" && changed(&iid, "log") == "[50]",
        "iid changed set",
    )?;
    Ok("AR(1) changed {50, 51} of 100; iid changed {50}".into())
}

/// Rescaling, unit change and reparametrisation.
fn invariances() -> Outcome {
    // (a) λ > 0 never changes a selection at cut-off 0
    let models: Vec<_> = [(0.0, 1.0), (0.3, 1.0), (0.0, 2.0), (-0.2, 0.6)]
        .iter()
        .map(|&(m, v)| iid_gaussian_model(m, v).unwrap())
        .collect();
    let mut checked = 0;
    for seed in 0..20u64 {
        let data = normal_draws(
            &mut replicate_rng(seed, 0),
            50 + seed as usize * 10,
            0.1,
            1.2,
        );
        for rule in [Rule::log(), Rule::hyvarinen()] {
            let pair = select(
                &delta_trace(&models[0], &models[1], &data, rule).unwrap(),
                0.0,
            )
            .unwrap()
            .chosen;
            let multi = select_among(&models, &data, rule).unwrap().index;
            for lambda in [1e-6, 2.0, 1e6] {
                let r = rescale_rule(rule, lambda).unwrap();
                check(
                    select(&delta_trace(&models[0], &models[1], &data, r).unwrap(), 0.0)
                        .unwrap()
                        .chosen
                        == pair,
                    format!("pair selection changed at lambda={lambda}"),
                )?;
                check(
                    select_among(&models, &data, r).unwrap().index == multi,
                    format!("argmin changed at lambda={lambda}"),
                )?;
                checked += 1;
            }
        }
    }
    // (b) unit change
    let mut unit = Vec::new();
    for c in [10.0, 1e-9, 3.086e16] {
        let r = experiment(ExperimentKind::UnitChange, 11, |cfg| cfg.unit_scale = c)?;
        check(
            r.passed(),
            format!("unit change c={c}: {:?}", failed_assertions(&r)),
        )?;
        unit.push(
            r.aggregates["max_hyvarinen_relative_deviation"]
                .as_f64()
                .unwrap(),
        );
    }
    // (c) g(x) = x³ + x
    let r = experiment(ExperimentKind::Reparametrisation, 13, |c| {
        c.transform = Transform::Cubic
    })?;
    check(
        r.passed(),
        format!("reparametrisation: {:?}", failed_assertions(&r)),
    )?;
    Ok(format!(
        "(a) {checked} rescaled selections unchanged; (b) max Hyvarinen deviation {:.1e}; (c) log dev {:.1e}, Hyvarinen differing fraction {}",
        unit.iter().cloned().fold(0.0, f64::max),
        r.aggregates["max_log_delta_deviation"].as_f64().unwrap(),
        r.aggregates["hyvarinen_differing_fraction"]
    ))
}

/// Decision-induced scores are proper on a 0.1 simplex grid; the linear score is not.
fn propriety() -> Outcome {
    let mut rng = replicate_rng(31, 0);
    for m in 0..20 {
        let states = 2 + m % 2;
        let actions = 1 + m % 5 + m / 5;
        let loss: Vec<Vec<f64>> = (0..states)
            .map(|_| {
                (0..actions)
                    .map(|_| rng.random_range(-10.0..10.0))
                    .collect()
            })
            .collect();
        let dp = DecisionProblem::new(loss).map_err(|e| e.to_string())?;
        let grid = simplex_grid::<f64>(states, 10);
        let report = check_propriety(
            |x, q| score_from_decision_problem(&dp, q, x).unwrap().value,
            &grid,
        );
        check(
            report.is_proper(),
            format!("matrix {m}: {} violations", report.violations.len()),
        )?;
    }
    let grid = simplex_grid::<f64>(3, 10);
    let linear = check_propriety(|x, q: &[f64]| -q[x], &grid);
    check(!linear.is_proper(), "linear score reported proper")?;
    Ok(format!(
        "20 loss matrices: 0 violations; linear score: {} violations",
        linear.violations.len()
    ))
}

/// Flat-prior location model: Hyvärinen finite from observation 1, log score fails there.
fn improper_prior() -> Outcome {
    let m = flat_prior_location_model(1.0).unwrap();
    let data = normal_draws(&mut replicate_rng(17, 0), 100, 0.5, 1.0);
    let h = prequential_scores(&m, &data, &Rule::hyvarinen()).map_err(|e| e.to_string())?;
    check(h[0] == 0.0, format!("first summand {}", h[0]))?;
    check(
        h.iter().all(|v| v.is_finite()),
        "non-finite Hyvarinen summand",
    )?;
    let err = prequential_scores(&m, &data, &Rule::log()).unwrap_err();
    check(
        err == Error::AtObservation {
            index: 1,
            source: Box::new(Error::ImproperPredictive),
        },
        format!("log rule gave {err:?}"),
    )?;
    Ok(format!(
        "Hyvarinen total over 100 obs = {:.4}; log rule: {err}",
        h.iter().sum::<f64>()
    ))
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

/// Same config and seed through the CLI: byte-identical outputs for any thread count.
fn reproducibility() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_preqscore");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [&[&str]; 4] = [
        &[
            "variance-expectation",
            "--xi",
            "2",
            "--tauq2",
            "1",
            "--n",
            "1000",
            "--reps",
            "100",
            "--seed",
            "42",
            "--keep-reps",
        ],
        &[
            "consistency",
            "--n",
            "1000",
            "--reps",
            "64",
            "--seed",
            "3",
            "--truth",
            "q",
        ],
        &[
            "outlier-locality",
            "--reps",
            "8",
            "--seed",
            "9",
            "--keep-reps",
        ],
        &["multi-model", "--n", "300", "--reps", "40", "--seed", "1"],
    ];
    let mut files = 0;
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (k, threads) in ["1", "4", "4"].iter().enumerate() {
            let out = tmp.path().join(format!("{i}_{k}"));
            let status = Command::new(bin)
                .arg("experiment")
                .args(*args)
                .args(["--threads", threads, "--out"])
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            check(
                status.status.code() == Some(0),
                format!("{} exited {:?}", args[0], status.status.code()),
            )?;
            outputs.push(dir_contents(&out));
        }
        check(
            outputs[0] == outputs[1] && outputs[1] == outputs[2],
            format!("{} outputs differ", args[0]),
        )?;
        check(
            outputs[0].contains_key("summary.json") && outputs[0].contains_key("trace.csv"),
            "missing outputs",
        )?;
        files += outputs[0].len();
    }
    Ok(format!(
        "4 experiments x 3 runs (1, 4, 4 threads): {files} files byte-identical"
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("expectation formulas", expectation_formulas),
        ("constant-multiple linkage", constant_multiple),
        ("consistency", consistency),
        ("AR(p)/MA(1) conditional variances", conditional_variances),
        ("outlier locality", outlier_locality),
        ("invariances", invariances),
        ("propriety", propriety),
        ("improper-prior viability", improper_prior),
        ("reproducibility", reproducibility),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failures += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}

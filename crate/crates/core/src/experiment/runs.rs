use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::seeds::{normal_draws, replicate_rng};
use super::stats::Moments;
use super::transform::{Transform, TransformedDensity};
use super::{
    choice_label, summarize, ExperimentConfig, ExperimentKind, ExperimentReport, OutlierModel,
    ReplicateRecord, RuleOutcome, RunOptions, Truth,
};
use crate::error::{Error, Result};
use crate::models::{iid_gaussian_model, process_model, PredictiveModel};
use crate::prequential::{decide, delta_trace, select_among, Choice, DeltaTrace};
use crate::process::{ar_process, sample_path_with};
use crate::score::{hyvarinen_score_generic, GaussianPredictive, LogDensity, Rule, RuleId};

type Model = PredictiveModel<f64>;

const RULES: [RuleId; 2] = [RuleId::Log, RuleId::Hyvarinen];

/// Expected per-step log-score delta `½(ξ - 1 - log ξ)` when the larger-variance model is true.
pub fn log_delta_expectation(xi: f64) -> f64 {
    0.5 * (xi - 1.0 - xi.ln())
}

/// Expected per-step Hyvärinen delta `τ_Q⁻² (ξ + ξ⁻¹ - 2)`.
pub fn hyvarinen_delta_expectation(xi: f64, tau_q2: f64) -> f64 {
    (xi + 1.0 / xi - 2.0) / tau_q2
}

/// Runs the experiment named in `cfg`.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::VarianceExpectation => run_variance_expectation(cfg, opts),
        ExperimentKind::MeanLinkage => run_mean_linkage(cfg, opts),
        ExperimentKind::Consistency => run_consistency(cfg, opts),
        ExperimentKind::OutlierLocality => run_outlier_locality(cfg, opts),
        ExperimentKind::UnitChange => run_unit_change(cfg, opts),
        ExperimentKind::Reparametrisation => run_reparametrisation(cfg, opts),
        ExperimentKind::MultiModel => run_multi_model(cfg, opts),
    }
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment != kind {
        return Err(Error::Config(format!(
            "config is for `{}`, not `{kind}`",
            cfg.experiment
        )));
    }
    cfg.validate()
}

/// Output of a single replicate.
struct Rep<E> {
    record: ReplicateRecord,
    /// (file stem without replicate prefix, trace)
    traces: Vec<(String, DeltaTrace<f64>)>,
    extra: E,
}

fn run_replicates<E, F>(cfg: &ExperimentConfig, opts: &RunOptions, f: F) -> Result<Vec<Rep<E>>>
where
    E: Send,
    F: Fn(usize, &mut ChaCha8Rng, bool) -> Result<Rep<E>> + Sync + Send,
{
    let keep = opts.keep_reps;
    let job = || {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_rng(cfg.base_seed, r);
                f(r, &mut rng, keep || r == 0)
            })
            .collect::<Result<Vec<_>>>()
    };
    match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

fn trace_stem(prefix: &str, rule: RuleId) -> String {
    match rule {
        RuleId::Hyvarinen => prefix.to_string(),
        other => format!("{prefix}_{}", other.name()),
    }
}

fn outcome(trace: &DeltaTrace<f64>, horizon: usize, cutoff: f64) -> RuleOutcome {
    let d_n = trace.cumulative[horizon - 1];
    let choice = decide(d_n, cutoff);
    RuleOutcome {
        rule: trace.rule.id,
        horizon,
        d_n,
        chosen: choice_label(choice, &trace.model_a, &trace.model_b),
        correct: choice == Choice::ModelA,
        tie: choice == Choice::Tie,
        deltas: Moments::from_slice(&trace.per_step[..horizon]),
    }
}

fn finish<E>(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    reps: Vec<Rep<E>>,
    aggregates: BTreeMap<String, Value>,
    assertions: BTreeMap<String, bool>,
) -> ExperimentReport {
    let mut traces = Vec::new();
    let mut replicate_traces = Vec::new();
    let mut records = Vec::with_capacity(reps.len());
    for rep in reps {
        let r = rep.record.replicate;
        for (stem, t) in rep.traces {
            if r == 0 {
                traces.push((stem.clone(), t.clone()));
            }
            if !opts.keep_reps {
                continue;
            }
            if let Some(rest) = stem.strip_prefix("trace") {
                replicate_traces.push((format!("rep_{r}{rest}"), t));
            }
        }
        records.push(rep.record);
    }
    let summaries = summarize(&records);
    ExperimentReport {
        config: cfg.clone(),
        records,
        summaries,
        aggregates,
        assertions,
        traces,
        replicate_traces,
    }
}

fn record(cfg: &ExperimentConfig, r: usize, outcomes: Vec<RuleOutcome>) -> ReplicateRecord {
    ReplicateRecord {
        replicate: r,
        base_seed: cfg.base_seed,
        outcomes,
    }
}

fn variance_pair(cfg: &ExperimentConfig) -> Result<(Model, Model)> {
    Ok((
        iid_gaussian_model(0.0, cfg.xi * cfg.tau_q2)?.with_id("P"),
        iid_gaussian_model(0.0, cfg.tau_q2)?.with_id("Q"),
    ))
}

/// Per-step delta means versus `½(ξ-1-log ξ)` and `τ_Q⁻²(ξ+ξ⁻¹-2)`.
pub fn run_variance_expectation(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    expect_kind(cfg, ExperimentKind::VarianceExpectation)?;
    let (p, q) = variance_pair(cfg)?;
    let tau_p2 = cfg.xi * cfg.tau_q2;
    let reps = run_replicates(cfg, opts, |r, rng, keep| {
        let data = normal_draws(rng, cfg.n, 0.0, tau_p2);
        let mut outcomes = Vec::new();
        let mut traces = Vec::new();
        for id in RULES {
            let t = delta_trace(&p, &q, &data, Rule::new(id))?;
            outcomes.push(outcome(&t, cfg.n, cfg.cutoff));
            if keep {
                traces.push((trace_stem("trace", id), t));
            }
        }
        Ok(Rep {
            record: record(cfg, r, outcomes),
            traces,
            extra: (),
        })
    })?;
    let mut report = finish(cfg, opts, reps, BTreeMap::new(), BTreeMap::new());
    for id in RULES {
        let theory = match id {
            RuleId::Log => log_delta_expectation(cfg.xi),
            _ => hyvarinen_delta_expectation(cfg.xi, cfg.tau_q2),
        };
        let s = report
            .summary(id, cfg.n)
            .expect("summary for every rule")
            .clone();
        let err = (s.mean_delta - theory).abs();
        report.aggregates.insert(
            format!("{id}_delta"),
            json!({ "theory": theory, "mean": s.mean_delta, "se": s.se_delta, "abs_error": err }),
        );
        report
            .assertions
            .insert(format!("{id}_mean_within_3se"), err <= 3.0 * s.se_delta);
    }
    Ok(report)
}

struct LinkageCheck {
    max_step_dev: f64,
    cumulative_dev: f64,
    same_selection: bool,
}

/// Equal variances, different means: Hyvärinen deltas are `2/σ²` times the log deltas.
pub fn run_mean_linkage(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    expect_kind(cfg, ExperimentKind::MeanLinkage)?;
    let sigma2 = cfg.tau_q2;
    let a = iid_gaussian_model(0.0, sigma2)?.with_id("A");
    let b = iid_gaussian_model(cfg.mean_shift, sigma2)?.with_id("B");
    let ratio = 2.0 / sigma2;
    let reps = run_replicates(cfg, opts, |r, rng, keep| {
        let data = normal_draws(rng, cfg.n, 0.0, sigma2);
        let log = delta_trace(&a, &b, &data, Rule::log())?;
        let hyv = delta_trace(&a, &b, &data, Rule::hyvarinen())?;
        let max_step_dev = hyv
            .per_step
            .iter()
            .zip(&log.per_step)
            .map(|(&h, &l)| (h - ratio * l).abs() / h.abs().max(1.0))
            .fold(0.0, f64::max);
        let abs_total: f64 = hyv.per_step.iter().map(|h| h.abs()).sum();
        let (h_n, l_n) = (hyv.cumulative[cfg.n - 1], log.cumulative[cfg.n - 1]);
        let extra = LinkageCheck {
            max_step_dev,
            cumulative_dev: (h_n - ratio * l_n).abs() / abs_total.max(1.0),
            same_selection: decide(h_n, 0.0) == decide(l_n, 0.0),
        };
        let outcomes = vec![
            outcome(&log, cfg.n, cfg.cutoff),
            outcome(&hyv, cfg.n, cfg.cutoff),
        ];
        let traces = if keep {
            vec![("trace_log".to_string(), log), ("trace".to_string(), hyv)]
        } else {
            Vec::new()
        };
        Ok(Rep {
            record: record(cfg, r, outcomes),
            traces,
            extra,
        })
    })?;
    let max_step = reps
        .iter()
        .map(|r| r.extra.max_step_dev)
        .fold(0.0, f64::max);
    let max_cum = reps
        .iter()
        .map(|r| r.extra.cumulative_dev)
        .fold(0.0, f64::max);
    let same = reps.iter().all(|r| r.extra.same_selection);
    let mut aggregates = BTreeMap::new();
    aggregates.insert("ratio".into(), json!(ratio));
    aggregates.insert("max_per_step_relative_deviation".into(), json!(max_step));
    aggregates.insert("max_cumulative_relative_deviation".into(), json!(max_cum));
    let mut assertions = BTreeMap::new();
    assertions.insert("per_step_constant_multiple".into(), max_step <= 1e-12);
    assertions.insert("cumulative_constant_multiple".into(), max_cum <= 1e-12);
    assertions.insert("identical_selection_at_cutoff_0".into(), same);
    Ok(finish(cfg, opts, reps, aggregates, assertions))
}

/// Selection frequency of the data-generating model across horizons.
pub fn run_consistency(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    expect_kind(cfg, ExperimentKind::Consistency)?;
    let (p, q) = variance_pair(cfg)?;
    let (truth, other, truth_var) = match cfg.truth {
        Truth::P => (&p, &q, cfg.xi * cfg.tau_q2),
        Truth::Q => (&q, &p, cfg.tau_q2),
    };
    let horizons = cfg.horizons();
    let reps = run_replicates(cfg, opts, |r, rng, keep| {
        let data = normal_draws(rng, cfg.n, 0.0, truth_var);
        let mut outcomes = Vec::new();
        let mut traces = Vec::new();
        for id in RULES {
            let t = delta_trace(truth, other, &data, Rule::new(id))?;
            outcomes.extend(horizons.iter().map(|&h| outcome(&t, h, cfg.cutoff)));
            if keep {
                traces.push((trace_stem("trace", id), t));
            }
        }
        Ok(Rep {
            record: record(cfg, r, outcomes),
            traces,
            extra: (),
        })
    })?;
    let mut report = finish(cfg, opts, reps, BTreeMap::new(), BTreeMap::new());
    let n_max = *horizons.last().expect("at least one horizon");
    for id in RULES {
        let freqs: Vec<(f64, f64)> = horizons
            .iter()
            .map(|&h| {
                let s = report.summary(id, h).expect("summary per horizon");
                (s.correct_frequency, s.correct_frequency_se)
            })
            .collect();
        let nondecreasing = freqs
            .windows(2)
            .all(|w| w[1].0 >= w[0].0 - 2.0 * (w[0].1 * w[0].1 + w[1].1 * w[1].1).sqrt());
        let final_freq = freqs.last().expect("nonempty").0;
        report.aggregates.insert(
            format!("{id}_true_model_frequency"),
            json!(horizons
                .iter()
                .zip(&freqs)
                .map(|(h, f)| json!({ "n": h, "frequency": f.0, "se": f.1 }))
                .collect::<Vec<_>>()),
        );
        report.assertions.insert(
            format!("{id}_frequency_at_n{n_max}_ge_0.99"),
            final_freq >= 0.99,
        );
        report.assertions.insert(
            format!("{id}_frequency_nondecreasing_within_2se"),
            nondecreasing,
        );
    }
    report
        .aggregates
        .insert("true_model".into(), json!(truth.id()));
    Ok(report)
}

struct OutlierCheck {
    changed: Vec<Vec<usize>>,
    d_n_shift: Vec<f64>,
}

/// Positions of per-step summands changed by a single additive outlier.
pub fn run_outlier_locality(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    expect_kind(cfg, ExperimentKind::OutlierLocality)?;
    let (phi_a, phi_b) = cfg.ar_phi;
    let (a, b, spec_a, gamma0) = match cfg.outlier_model {
        OutlierModel::Ar1 => {
            let sa = ar_process(&[phi_a], 1.0)?;
            let sb = ar_process(&[phi_b], 1.0)?;
            let g0 = sa.gamma(0);
            (
                process_model(sa.clone()).with_id(format!("ar({phi_a};1)")),
                process_model(sb).with_id(format!("ar({phi_b};1)")),
                Some(sa),
                g0,
            )
        }
        OutlierModel::Iid => (
            iid_gaussian_model(0.0, 1.0)?.with_id("iidnorm(0,1)"),
            iid_gaussian_model(0.0, 2.0)?.with_id("iidnorm(0,2)"),
            None,
            1.0,
        ),
    };
    let k = cfg.outlier_index;
    let magnitude = cfg.outlier_magnitude.unwrap_or(5.0 * gamma0.sqrt());
    let expected: Vec<usize> = if magnitude == 0.0 {
        Vec::new()
    } else {
        match cfg.outlier_model {
            OutlierModel::Ar1 => vec![k, k + 1],
            OutlierModel::Iid => vec![k],
        }
    };
    let reps = run_replicates(cfg, opts, |r, rng, keep| {
        let data = match &spec_a {
            Some(s) => sample_path_with(s, cfg.n, rng)?,
            None => normal_draws(rng, cfg.n, 0.0, 1.0),
        };
        let mut dirty = data.clone();
        dirty[k - 1] += magnitude;
        let mut outcomes = Vec::new();
        let mut traces = Vec::new();
        let mut extra = OutlierCheck {
            changed: Vec::new(),
            d_n_shift: Vec::new(),
        };
        for id in RULES {
            let clean_t = delta_trace(&a, &b, &data, Rule::new(id))?;
            let dirty_t = delta_trace(&a, &b, &dirty, Rule::new(id))?;
            let changed = (1..=cfg.n)
                .filter(|&i| clean_t.per_step[i - 1].to_bits() != dirty_t.per_step[i - 1].to_bits())
                .collect();
            extra.changed.push(changed);
            extra
                .d_n_shift
                .push((dirty_t.cumulative[cfg.n - 1] - clean_t.cumulative[cfg.n - 1]).abs());
            outcomes.push(outcome(&dirty_t, cfg.n, cfg.cutoff));
            if keep {
                traces.push((trace_stem("trace", id), dirty_t));
                traces.push((trace_stem("trace_clean", id), clean_t));
            }
        }
        Ok(Rep {
            record: record(cfg, r, outcomes),
            traces,
            extra,
        })
    })?;
    let mut aggregates = BTreeMap::new();
    let mut assertions = BTreeMap::new();
    aggregates.insert("outlier_magnitude".into(), json!(magnitude));
    aggregates.insert("expected_changed".into(), json!(expected));
    for (j, id) in RULES.iter().enumerate() {
        let all_match = reps.iter().all(|r| r.extra.changed[j] == expected);
        let shift = Moments::from_slice(
            &reps
                .iter()
                .map(|r| r.extra.d_n_shift[j])
                .collect::<Vec<_>>(),
        );
        aggregates.insert(
            format!("{id}_outlier"),
            json!({
                "changed_summands_rep0": reps[0].extra.changed[j],
                "abs_d_n_shift_rep0": reps[0].extra.d_n_shift[j],
                "abs_d_n_shift_mean": shift.mean,
            }),
        );
        assertions.insert(format!("{id}_changed_summands_exact"), all_match);
    }
    Ok(finish(cfg, opts, reps, aggregates, assertions))
}

// |−2/v| + (x−μ)²/v²: size of the terms whose difference is the Hyvärinen score
fn hyvarinen_magnitude(x: f64, mean: f64, var: f64) -> f64 {
    2.0 / var + (x - mean) * (x - mean) / (var * var)
}

struct UnitCheck {
    hyv_dev: f64,
    log_dev: f64,
    same_selection: bool,
}

/// Rescales data and model parameters by `c`.
pub fn run_unit_change(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    expect_kind(cfg, ExperimentKind::UnitChange)?;
    let c = cfg.unit_scale;
    let (va, vb, mb) = (cfg.xi * cfg.tau_q2, cfg.tau_q2, cfg.mean_shift);
    let a = iid_gaussian_model(0.0, va)?.with_id("P");
    let b = iid_gaussian_model(mb, vb)?.with_id("Q");
    let a_s = iid_gaussian_model(0.0, c * c * va)?.with_id("P_scaled");
    let b_s = iid_gaussian_model(c * mb, c * c * vb)?.with_id("Q_scaled");
    let reps = run_replicates(cfg, opts, |r, rng, keep| {
        let data = normal_draws(rng, cfg.n, 0.0, va);
        let scaled: Vec<f64> = data.iter().map(|&x| c * x).collect();
        let mut extra = UnitCheck {
            hyv_dev: 0.0,
            log_dev: 0.0,
            same_selection: true,
        };
        let mut outcomes = Vec::new();
        let mut traces = Vec::new();
        for id in RULES {
            let base = delta_trace(&a, &b, &data, Rule::new(id))?;
            let resc = delta_trace(&a_s, &b_s, &scaled, Rule::new(id))?;
            match id {
                RuleId::Hyvarinen => {
                    for (i, &x) in data.iter().enumerate() {
                        let da = (resc.score_a[i] - base.score_a[i] / (c * c)).abs()
                            / (hyvarinen_magnitude(x, 0.0, va) / (c * c));
                        let db = (resc.score_b[i] - base.score_b[i] / (c * c)).abs()
                            / (hyvarinen_magnitude(x, mb, vb) / (c * c));
                        extra.hyv_dev = extra.hyv_dev.max(da).max(db);
                    }
                }
                _ => {
                    for (d1, d0) in resc.per_step.iter().zip(&base.per_step) {
                        extra.log_dev = extra.log_dev.max((d1 - d0).abs() / d0.abs().max(1.0));
                    }
                }
            }
            let (s0, s1) = (
                decide(base.cumulative[cfg.n - 1], 0.0),
                decide(resc.cumulative[cfg.n - 1], 0.0),
            );
            extra.same_selection &= s0 == s1;
            outcomes.push(outcome(&resc, cfg.n, cfg.cutoff));
            if keep {
                traces.push((trace_stem("trace", id), resc));
                traces.push((trace_stem("trace_base", id), base));
            }
        }
        Ok(Rep {
            record: record(cfg, r, outcomes),
            traces,
            extra,
        })
    })?;
    let hyv_dev = reps.iter().map(|r| r.extra.hyv_dev).fold(0.0, f64::max);
    let log_dev = reps.iter().map(|r| r.extra.log_dev).fold(0.0, f64::max);
    let same = reps.iter().all(|r| r.extra.same_selection);
    let mut aggregates = BTreeMap::new();
    aggregates.insert("hyvarinen_factor".into(), json!(1.0 / (c * c)));
    aggregates.insert("max_hyvarinen_relative_deviation".into(), json!(hyv_dev));
    aggregates.insert("max_log_delta_deviation".into(), json!(log_dev));
    let mut assertions = BTreeMap::new();
    assertions.insert(
        "hyvarinen_scores_scale_by_inverse_square".into(),
        hyv_dev <= 1e-12,
    );
    assertions.insert("log_deltas_unchanged".into(), log_dev <= 1e-10);
    assertions.insert("selections_unchanged_at_cutoff_0".into(), same);
    Ok(finish(cfg, opts, reps, aggregates, assertions))
}

struct ReparamCheck {
    log_dev: f64,
    /// max |δ_y - f·δ_x| / max(1, |f·δ_x|) with f the expected factor (1 or c⁻²)
    hyv_dev: f64,
    hyv_differing: usize,
}

/// Scores the same data on the `x` scale and on `y = g(x)`.
pub fn run_reparametrisation(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    expect_kind(cfg, ExperimentKind::Reparametrisation)?;
    let (p, q) = variance_pair(cfg)?;
    let (va, vb) = (cfg.xi * cfg.tau_q2, cfg.tau_q2);
    let g = cfg.transform;
    let dens_a = TransformedDensity {
        base: GaussianPredictive::new(0.0, va)?,
        transform: g,
    };
    let dens_b = TransformedDensity {
        base: GaussianPredictive::new(0.0, vb)?,
        transform: g,
    };
    let factor = match g {
        Transform::Affine(c) => 1.0 / (c * c),
        _ => 1.0,
    };
    let reps = run_replicates(cfg, opts, |r, rng, keep| {
        let data = normal_draws(rng, cfg.n, 0.0, va);
        g.check_monotone(&data)?;
        let ys: Vec<f64> = data.iter().map(|&x| g.apply(x)).collect();
        let mut extra = ReparamCheck {
            log_dev: 0.0,
            hyv_dev: 0.0,
            hyv_differing: 0,
        };
        let mut outcomes = Vec::new();
        let mut traces = Vec::new();
        for id in RULES {
            let on_x = delta_trace(&p, &q, &data, Rule::new(id))?;
            let score = |d: &TransformedDensity<GaussianPredictive<f64>>,
                         y: f64,
                         i: usize|
             -> Result<f64> {
                match id {
                    RuleId::Log => Ok(-d.logpdf(y)),
                    _ => hyvarinen_score_generic(y, d)
                        .map(|s| s.value)
                        .map_err(|e| e.at(i + 1)),
                }
            };
            let sa = ys
                .iter()
                .enumerate()
                .map(|(i, &y)| score(&dens_a, y, i))
                .collect::<Result<Vec<_>>>()?;
            let sb = ys
                .iter()
                .enumerate()
                .map(|(i, &y)| score(&dens_b, y, i))
                .collect::<Result<Vec<_>>>()?;
            let on_y = DeltaTrace::from_scores(Rule::new(id), "P", "Q", ys.clone(), sa, sb);
            for (dy, dx) in on_y.per_step.iter().zip(&on_x.per_step) {
                match id {
                    RuleId::Log => {
                        extra.log_dev = extra.log_dev.max((dy - dx).abs() / dx.abs().max(1.0))
                    }
                    _ => {
                        let target = factor * dx;
                        extra.hyv_dev = extra
                            .hyv_dev
                            .max((dy - target).abs() / target.abs().max(1.0));
                        if (dy - dx).abs() > 1e-6 * dx.abs().max(1.0) {
                            extra.hyv_differing += 1;
                        }
                    }
                }
            }
            outcomes.push(outcome(&on_y, cfg.n, cfg.cutoff));
            if keep {
                traces.push((trace_stem("trace", id), on_y));
                traces.push((trace_stem("trace_x", id), on_x));
            }
        }
        Ok(Rep {
            record: record(cfg, r, outcomes),
            traces,
            extra,
        })
    })?;
    let log_dev = reps.iter().map(|r| r.extra.log_dev).fold(0.0, f64::max);
    let hyv_dev = reps.iter().map(|r| r.extra.hyv_dev).fold(0.0, f64::max);
    let differing: usize = reps.iter().map(|r| r.extra.hyv_differing).sum();
    let total = cfg.n * cfg.replicates;
    let mut aggregates = BTreeMap::new();
    aggregates.insert("transform".into(), serde_json::to_value(g)?);
    aggregates.insert("max_log_delta_deviation".into(), json!(log_dev));
    aggregates.insert("max_hyvarinen_delta_deviation".into(), json!(hyv_dev));
    aggregates.insert(
        "hyvarinen_differing_fraction".into(),
        json!(differing as f64 / total as f64),
    );
    let mut assertions = BTreeMap::new();
    assertions.insert("log_deltas_invariant".into(), log_dev <= 1e-10);
    match g {
        Transform::Cubic => {
            assertions.insert("hyvarinen_deltas_differ".into(), differing > 0);
        }
        Transform::Identity => {
            assertions.insert("hyvarinen_deltas_invariant".into(), hyv_dev <= 1e-10);
        }
        Transform::Affine(_) => {
            assertions.insert(
                "hyvarinen_deltas_scale_by_inverse_square".into(),
                hyv_dev <= 1e-10,
            );
        }
    }
    Ok(finish(cfg, opts, reps, aggregates, assertions))
}

/// Argmin of cumulative score over Gaussian variance candidates.
pub fn run_multi_model(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    expect_kind(cfg, ExperimentKind::MultiModel)?;
    let models = cfg
        .candidates
        .iter()
        .map(|m| {
            iid_gaussian_model(0.0, m * cfg.tau_q2)
                .map(|g| g.with_id(format!("var={}", m * cfg.tau_q2)))
        })
        .collect::<Result<Vec<_>>>()?;
    let t = cfg.true_candidate;
    let rival = if t + 1 < models.len() { t + 1 } else { t - 1 };
    let true_var = cfg.candidates[t] * cfg.tau_q2;
    let reps = run_replicates(cfg, opts, |r, rng, keep| {
        let data = normal_draws(rng, cfg.n, 0.0, true_var);
        let mut outcomes = Vec::new();
        let mut traces = Vec::new();
        for id in RULES {
            let sel = select_among(&models, &data, Rule::new(id))?;
            let best_wrong = sel
                .cumulative
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != t)
                .map(|(_, &c)| c)
                .fold(f64::INFINITY, f64::min);
            let pair = delta_trace(&models[t], &models[rival], &data, Rule::new(id))?;
            outcomes.push(RuleOutcome {
                rule: id,
                horizon: cfg.n,
                d_n: best_wrong - sel.cumulative[t],
                chosen: sel.id.clone(),
                correct: sel.index == t,
                tie: false,
                deltas: Moments::from_slice(&pair.per_step),
            });
            if keep {
                traces.push((trace_stem("trace", id), pair));
            }
        }
        Ok(Rep {
            record: record(cfg, r, outcomes),
            traces,
            extra: (),
        })
    })?;
    let mut report = finish(cfg, opts, reps, BTreeMap::new(), BTreeMap::new());
    report
        .aggregates
        .insert("true_model".into(), json!(models[t].id()));
    report
        .aggregates
        .insert("delta_rival".into(), json!(models[rival].id()));
    for id in RULES {
        let f = report
            .summary(id, cfg.n)
            .expect("summary per rule")
            .correct_frequency;
        report
            .assertions
            .insert(format!("{id}_true_model_frequency_ge_0.95"), f >= 0.95);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(kind);
        c.replicates = c.replicates.min(20);
        c.base_seed = 11;
        c
    }

    #[test]
    fn theory_values() {
        assert!((log_delta_expectation(2.0) - 0.153_426_4).abs() < 1e-7);
        assert_eq!(hyvarinen_delta_expectation(2.0, 1.0), 0.5);
        assert_eq!(hyvarinen_delta_expectation(4.0, 2.0), 1.125);
        assert_eq!(log_delta_expectation(1.0), 0.0);
        assert_eq!(hyvarinen_delta_expectation(1.0, 3.0), 0.0);
        for xi in [0.25, 0.5, 2.0, 4.0] {
            assert!(log_delta_expectation(xi) > 0.0 && hyvarinen_delta_expectation(xi, 1.0) > 0.0);
        }
    }

    #[test]
    fn rejects_mismatched_kind() {
        let cfg = quick(ExperimentKind::MeanLinkage);
        assert!(run_variance_expectation(&cfg, &RunOptions::default()).is_err());
    }

    #[test]
    fn variance_expectation_xi_one_is_exactly_zero() {
        let mut cfg = quick(ExperimentKind::VarianceExpectation);
        cfg.xi = 1.0;
        cfg.n = 1000;
        let rep = run(&cfg, &RunOptions::default()).unwrap();
        assert!(rep.passed(), "{:?}", rep.assertions);
        for s in &rep.summaries {
            assert_eq!(s.mean_delta, 0.0);
            assert_eq!(s.tie_frequency, 1.0);
        }
    }

    #[test]
    fn mean_linkage_ratios() {
        for sigma2 in [1.0, 4.0] {
            let mut cfg = quick(ExperimentKind::MeanLinkage);
            cfg.tau_q2 = sigma2;
            cfg.n = 500;
            let rep = run(&cfg, &RunOptions::default()).unwrap();
            assert!(rep.passed(), "{:?}", rep.aggregates);
            assert_eq!(rep.aggregates["ratio"], json!(2.0 / sigma2));
        }
    }

    #[test]
    fn outlier_locality_variants() {
        let mut cfg = quick(ExperimentKind::OutlierLocality);
        let rep = run(&cfg, &RunOptions::default()).unwrap();
        assert!(rep.passed(), "{:?}", rep.aggregates);
        assert_eq!(rep.aggregates["expected_changed"], json!([50, 51]));

        cfg.outlier_model = OutlierModel::Iid;
        let rep = run(&cfg, &RunOptions::default()).unwrap();
        assert!(rep.passed());
        assert_eq!(
            rep.aggregates["hyvarinen_outlier"]["changed_summands_rep0"],
            json!([50])
        );

        cfg.outlier_model = OutlierModel::Ar1;
        cfg.outlier_magnitude = Some(0.0);
        let rep = run(&cfg, &RunOptions::default()).unwrap();
        assert!(rep.passed());
        assert_eq!(
            rep.aggregates["log_outlier"]["changed_summands_rep0"],
            json!([])
        );

        cfg.outlier_index = 100;
        assert!(matches!(
            run(&cfg, &RunOptions::default()),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn unit_change_identity_is_bitwise() {
        let mut cfg = quick(ExperimentKind::UnitChange);
        cfg.unit_scale = 1.0;
        cfg.replicates = 2;
        let rep = run(&cfg, &RunOptions::default()).unwrap();
        assert!(rep.passed());
        assert_eq!(
            rep.aggregates["max_hyvarinen_relative_deviation"],
            json!(0.0)
        );
        assert_eq!(rep.aggregates["max_log_delta_deviation"], json!(0.0));
        cfg.unit_scale = 0.0;
        assert!(matches!(
            run(&cfg, &RunOptions::default()),
            Err(Error::NonPositiveScale(_))
        ));
    }

    #[test]
    fn reparametrisation_transform_variants() {
        let mut cfg = quick(ExperimentKind::Reparametrisation);
        cfg.replicates = 3;
        for g in [
            Transform::Identity,
            Transform::Cubic,
            Transform::Affine(7.0),
        ] {
            cfg.transform = g;
            let rep = run(&cfg, &RunOptions::default()).unwrap();
            assert!(rep.passed(), "{g:?}: {:?}", rep.aggregates);
        }
    }

    #[test]
    fn affine_reparametrisation_matches_unit_change_factor() {
        let mut cfg = quick(ExperimentKind::Reparametrisation);
        cfg.replicates = 1;
        cfg.transform = Transform::Affine(3.0);
        let rep = run(&cfg, &RunOptions::default()).unwrap();
        let (_, y) = rep.traces.iter().find(|(s, _)| s == "trace").unwrap();
        let (_, x) = rep.traces.iter().find(|(s, _)| s == "trace_x").unwrap();
        for (dy, dx) in y.per_step.iter().zip(&x.per_step) {
            assert!((dy - dx / 9.0).abs() <= 1e-12 * dx.abs().max(1.0));
        }
    }

    #[test]
    fn multi_model_duplicate_candidates_pick_lowest() {
        let mut cfg = quick(ExperimentKind::MultiModel);
        cfg.candidates = vec![1.0, 1.0, 4.0];
        cfg.true_candidate = 1;
        cfg.replicates = 3;
        let rep = run(&cfg, &RunOptions::default()).unwrap();
        // the duplicate at index 0 always wins the tie
        assert!(rep
            .records
            .iter()
            .flat_map(|r| &r.outcomes)
            .all(|o| !o.correct && o.d_n == 0.0));
    }
}

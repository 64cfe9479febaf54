//! Seeded Monte Carlo experiments.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]: the
//! thread count in [`RunOptions`] only changes how replicates are scheduled,
//! never what they compute.

mod output;
mod runs;
mod seeds;
mod stats;
mod transform;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use output::{read_data_csv, write_report, write_trace_summary};
pub use runs::{
    hyvarinen_delta_expectation, log_delta_expectation, run, run_consistency, run_mean_linkage,
    run_multi_model, run_outlier_locality, run_reparametrisation, run_unit_change,
    run_variance_expectation,
};
pub use seeds::{normal_draws, replicate_rng};
pub use stats::{frequency_se, Moments};
pub use transform::{Transform, TransformedDensity};

use crate::error::{Error, Result};
use crate::prequential::{Choice, DeltaTrace};
use crate::score::RuleId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    VarianceExpectation,
    MeanLinkage,
    Consistency,
    OutlierLocality,
    UnitChange,
    Reparametrisation,
    MultiModel,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::VarianceExpectation,
        ExperimentKind::MeanLinkage,
        ExperimentKind::Consistency,
        ExperimentKind::OutlierLocality,
        ExperimentKind::UnitChange,
        ExperimentKind::Reparametrisation,
        ExperimentKind::MultiModel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::VarianceExpectation => "variance-expectation",
            ExperimentKind::MeanLinkage => "mean-linkage",
            ExperimentKind::Consistency => "consistency",
            ExperimentKind::OutlierLocality => "outlier-locality",
            ExperimentKind::UnitChange => "unit-change",
            ExperimentKind::Reparametrisation => "reparametrisation",
            ExperimentKind::MultiModel => "multi-model",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Which of the two variance models generates the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    P,
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierModel {
    Ar1,
    Iid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub replicates: usize,
    pub base_seed: u64,
    /// Variance ratio τ_P² / τ_Q².
    pub xi: f64,
    /// τ_Q²; also the common variance σ² in the mean-linkage experiment.
    pub tau_q2: f64,
    /// Mean of the second model in the mean-linkage and unit-change experiments.
    pub mean_shift: f64,
    pub truth: Truth,
    pub cutoff: f64,
    /// 1-based position of the additive outlier.
    pub outlier_index: usize,
    /// `None` means 5·√γ(0) of the data-generating model.
    pub outlier_magnitude: Option<f64>,
    pub outlier_model: OutlierModel,
    /// AR(1) coefficients of the two outlier-experiment models.
    pub ar_phi: (f64, f64),
    pub unit_scale: f64,
    pub transform: Transform,
    /// Horizons at which consistency is evaluated; empty means `n/100, n/10, n`.
    pub n_grid: Vec<usize>,
    /// Candidate variances for the multi-model experiment, as multiples of τ_Q².
    pub candidates: Vec<f64>,
    pub true_candidate: usize,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        let (n, replicates) = match experiment {
            ExperimentKind::VarianceExpectation => (10_000, 100),
            ExperimentKind::MeanLinkage => (10_000, 10),
            ExperimentKind::Consistency => (5_000, 500),
            ExperimentKind::OutlierLocality => (100, 1),
            ExperimentKind::UnitChange => (1_000, 20),
            ExperimentKind::Reparametrisation => (1_000, 10),
            ExperimentKind::MultiModel => (2_000, 500),
        };
        Self {
            experiment,
            n,
            replicates,
            base_seed: 0,
            xi: 2.0,
            tau_q2: 1.0,
            mean_shift: 1.0,
            truth: Truth::P,
            cutoff: 0.0,
            outlier_index: 50,
            outlier_magnitude: None,
            outlier_model: OutlierModel::Ar1,
            ar_phi: (0.5, -0.3),
            unit_scale: 10.0,
            transform: Transform::Cubic,
            n_grid: Vec::new(),
            candidates: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            true_candidate: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 1 {
            return bad("n must be at least 1".into());
        }
        if self.replicates < 1 {
            return bad("replicates must be at least 1".into());
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return bad(format!("xi must be positive, got {}", self.xi));
        }
        if !(self.tau_q2 > 0.0 && self.tau_q2.is_finite()) {
            return bad(format!("tau_q2 must be positive, got {}", self.tau_q2));
        }
        if !(self.unit_scale > 0.0 && self.unit_scale.is_finite()) {
            return Err(Error::NonPositiveScale(self.unit_scale));
        }
        if !self.cutoff.is_finite() || !self.mean_shift.is_finite() {
            return bad("cutoff and mean_shift must be finite".into());
        }
        if let Transform::Affine(c) = self.transform {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::NonMonotoneTransform(0.0));
            }
        }
        if self.experiment == ExperimentKind::OutlierLocality
            && !(1..self.n).contains(&self.outlier_index)
        {
            return Err(Error::IndexOutOfRange {
                index: self.outlier_index,
                len: self.n,
            });
        }
        if self.outlier_magnitude.is_some_and(|m| !m.is_finite()) {
            return bad("outlier magnitude must be finite".into());
        }
        if self.experiment == ExperimentKind::MultiModel {
            if self.candidates.len() < 2 {
                return Err(Error::TooFewModels {
                    needed: 2,
                    got: self.candidates.len(),
                });
            }
            if self.true_candidate >= self.candidates.len() {
                return Err(Error::IndexOutOfRange {
                    index: self.true_candidate,
                    len: self.candidates.len(),
                });
            }
            if self.candidates.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
                return bad("candidate variance multipliers must be positive".into());
            }
        }
        if self.n_grid.iter().any(|&h| h == 0 || h > self.n) {
            return bad(format!("n_grid entries must lie in 1..={}", self.n));
        }
        Ok(())
    }

    /// Consistency horizons, ascending and deduplicated.
    pub fn horizons(&self) -> Vec<usize> {
        let mut h = if self.n_grid.is_empty() {
            vec![(self.n / 100).max(1), (self.n / 10).max(1), self.n]
        } else {
            self.n_grid.clone()
        };
        h.sort_unstable();
        h.dedup();
        h
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Retain the per-replicate traces.
    pub keep_reps: bool,
}

/// One rule's result within one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleOutcome {
    pub rule: RuleId,
    pub horizon: usize,
    /// Cumulative score difference, positive favouring the data-generating model.
    pub d_n: f64,
    pub chosen: String,
    pub correct: bool,
    pub tie: bool,
    /// Moments of the per-step deltas up to `horizon`; in the multi-model
    /// experiment these compare the true candidate with its neighbour.
    pub deltas: Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub base_seed: u64,
    pub outcomes: Vec<RuleOutcome>,
}

/// Aggregate over replicates for one (rule, horizon).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleSummary {
    pub rule: RuleId,
    pub horizon: usize,
    pub replicates: usize,
    pub mean_delta: f64,
    pub se_delta: f64,
    pub correct_frequency: f64,
    pub correct_frequency_se: f64,
    pub tie_frequency: f64,
}

/// Aggregates every (rule, horizon) group, visiting records in replicate
/// order whatever order they are passed in.
pub fn summarize(records: &[ReplicateRecord]) -> Vec<RuleSummary> {
    let mut sorted: Vec<&ReplicateRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.replicate);
    type Group = (RuleId, Moments, usize, usize, usize);
    let mut groups: BTreeMap<(u8, usize), Group> = BTreeMap::new();
    for rec in sorted {
        for o in &rec.outcomes {
            let key = (o.rule as u8, o.horizon);
            let e = groups
                .entry(key)
                .or_insert((o.rule, Moments::default(), 0, 0, 0));
            e.1 = e.1.merge(&o.deltas);
            e.2 += 1;
            e.3 += usize::from(o.correct);
            e.4 += usize::from(o.tie);
        }
    }
    groups
        .into_iter()
        .map(|((_, horizon), (rule, m, reps, correct, ties))| {
            let f = correct as f64 / reps as f64;
            RuleSummary {
                rule,
                horizon,
                replicates: reps,
                mean_delta: m.mean,
                se_delta: m.standard_error(),
                correct_frequency: f,
                correct_frequency_se: frequency_se(f, reps),
                tie_frequency: ties as f64 / reps as f64,
            }
        })
        .collect()
}

/// Output of one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<ReplicateRecord>,
    pub summaries: Vec<RuleSummary>,
    /// Experiment-specific aggregates.
    pub aggregates: BTreeMap<String, serde_json::Value>,
    pub assertions: BTreeMap<String, bool>,
    /// Representative traces from replicate 0, keyed by output file stem.
    pub traces: Vec<(String, DeltaTrace<f64>)>,
    /// Per-replicate traces, when requested.
    pub replicate_traces: Vec<(String, DeltaTrace<f64>)>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.assertions.values().all(|&b| b)
    }

    pub fn summary(&self, rule: RuleId, horizon: usize) -> Option<&RuleSummary> {
        self.summaries
            .iter()
            .find(|s| s.rule == rule && s.horizon == horizon)
    }
}

pub(crate) fn choice_label(choice: Choice, a: &str, b: &str) -> String {
    match choice {
        Choice::ModelA => a.to_string(),
        Choice::ModelB => b.to_string(),
        Choice::Tie => "tie".to_string(),
    }
}

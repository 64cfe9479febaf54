//! Prequential comparison: per-observation score differences between
//! models, their cumulative sums, and cut-off based selection.
//!
//! Orientation: scores are losses and `δ_i = S(x_i, B_i) - S(x_i, A_i)`, so a
//! positive cumulative difference favours model A.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::PredictiveModel;
use crate::real::{CompensatedSum, Real};
use crate::score::Rule;

pub const TRACE_CSV_HEADER: [&str; 6] = ["index", "x", "score_a", "score_b", "delta", "cumulative"];

/// Per-step and cumulative score differences, model B minus model A.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTrace<T> {
    pub rule: Rule<T>,
    pub model_a: String,
    pub model_b: String,
    pub x: Vec<T>,
    pub score_a: Vec<T>,
    pub score_b: Vec<T>,
    pub per_step: Vec<T>,
    /// Compensated running sum of `per_step`.
    pub cumulative: Vec<T>,
}

impl<T: Real> DeltaTrace<T> {
    /// Builds a trace from already computed per-observation scores.
    pub fn from_scores(
        rule: Rule<T>,
        model_a: &str,
        model_b: &str,
        x: Vec<T>,
        score_a: Vec<T>,
        score_b: Vec<T>,
    ) -> Self {
        assert_eq!(score_a.len(), x.len(), "one score per observation");
        assert_eq!(score_b.len(), x.len(), "one score per observation");
        let per_step: Vec<T> = score_b.iter().zip(&score_a).map(|(&b, &a)| b - a).collect();
        let mut acc = CompensatedSum::new();
        let cumulative = per_step
            .iter()
            .map(|&d| {
                acc.add(d);
                acc.value()
            })
            .collect();
        Self {
            rule,
            model_a: model_a.to_string(),
            model_b: model_b.to_string(),
            x,
            score_a,
            score_b,
            per_step,
            cumulative,
        }
    }

    pub fn len(&self) -> usize {
        self.per_step.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_step.is_empty()
    }

    /// `D_n` at the last observation.
    pub fn total(&self) -> Option<T> {
        self.cumulative.last().copied()
    }

    /// Writes the trace with the exact `index,x,score_a,score_b,delta,cumulative` header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(TRACE_CSV_HEADER)?;
        for i in 0..self.len() {
            out.write_record([
                (i + 1).to_string(),
                self.x[i].to_string(),
                self.score_a[i].to_string(),
                self.score_b[i].to_string(),
                self.per_step[i].to_string(),
                self.cumulative[i].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Scores every observation under both models.
pub fn delta_trace<T: Real>(
    model_a: &PredictiveModel<T>,
    model_b: &PredictiveModel<T>,
    data: &[T],
    rule: Rule<T>,
) -> Result<DeltaTrace<T>> {
    let score_a = prequential_scores(model_a, data, &rule)?;
    let score_b = prequential_scores(model_b, data, &rule)?;
    Ok(DeltaTrace::from_scores(
        rule,
        model_a.id(),
        model_b.id(),
        data.to_vec(),
        score_a,
        score_b,
    ))
}

/// `S(x_i, predictive given x_{<i})` for every `i`; errors carry the 1-based index.
pub fn prequential_scores<T: Real>(
    model: &PredictiveModel<T>,
    data: &[T],
    rule: &Rule<T>,
) -> Result<Vec<T>> {
    let preds = model.predictives(data)?;
    preds
        .iter()
        .zip(data)
        .enumerate()
        .map(|(i, (p, &x))| p.score(x, rule).map(|s| s.value).map_err(|e| e.at(i + 1)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    ModelA,
    ModelB,
    Tie,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome<T> {
    pub chosen: Choice,
    /// Identifier of the chosen model; `None` on a tie.
    pub chosen_id: Option<String>,
    pub cutoff: T,
    pub d_n: T,
}

/// Picks A if `D_n > cutoff`, B if `D_n < cutoff`, otherwise reports a tie.
pub fn select<T: Real>(trace: &DeltaTrace<T>, cutoff: T) -> Result<SelectionOutcome<T>> {
    let d_n = trace.total().ok_or(Error::EmptyTrace)?;
    let chosen = decide(d_n, cutoff);
    let chosen_id = match chosen {
        Choice::ModelA => Some(trace.model_a.clone()),
        Choice::ModelB => Some(trace.model_b.clone()),
        Choice::Tie => None,
    };
    Ok(SelectionOutcome {
        chosen,
        chosen_id,
        cutoff,
        d_n,
    })
}

pub fn decide<T: Real>(d_n: T, cutoff: T) -> Choice {
    if d_n > cutoff {
        Choice::ModelA
    } else if d_n < cutoff {
        Choice::ModelB
    } else {
        Choice::Tie
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiSelection<T> {
    pub index: usize,
    pub id: String,
    /// Cumulative score of every candidate, in list order.
    pub cumulative: Vec<T>,
}

/// Model with the smallest cumulative prequential score; ties go to the lowest index.
pub fn select_among<T: Real>(
    models: &[PredictiveModel<T>],
    data: &[T],
    rule: Rule<T>,
) -> Result<MultiSelection<T>> {
    if models.len() < 2 {
        return Err(Error::TooFewModels {
            needed: 2,
            got: models.len(),
        });
    }
    let cumulative = models
        .iter()
        .map(|m| {
            let scores = prequential_scores(m, data, &rule)?;
            Ok(crate::real::compensated_sum(&scores))
        })
        .collect::<Result<Vec<T>>>()?;
    let mut best = 0;
    for (i, &c) in cumulative.iter().enumerate().skip(1) {
        if c < cumulative[best] {
            best = i;
        }
    }
    Ok(MultiSelection {
        index: best,
        id: models[best].id().to_string(),
        cumulative,
    })
}

/// Multiplies every score of `rule` by `lambda > 0`.
///
/// Selection at cut-off 0 is unchanged; with cut-off `c` the rescaled
/// selection equals the unscaled one at `c / lambda`.
pub fn rescale_rule<T: Real>(rule: Rule<T>, lambda: T) -> Result<Rule<T>> {
    rule.rescaled(lambda)
}

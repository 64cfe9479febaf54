//! Scoring rules induced by finite decision problems, and a brute-force
//! propriety checker over a grid of distributions.

use crate::error::{Error, Result};
use crate::real::Real;

use super::{RuleId, ScoreValue};

/// Finite decision problem with loss `loss[state][action]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionProblem<T> {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    loss: Vec<Vec<T>>,
}

impl<T: Real> DecisionProblem<T> {
    /// Labels states `s0, s1, …` and actions `a0, a1, …`.
    pub fn new(loss: Vec<Vec<T>>) -> Result<Self> {
        let n_actions = loss.first().map_or(0, Vec::len);
        let states = (0..loss.len()).map(|i| format!("s{i}")).collect();
        let actions = (0..n_actions).map(|j| format!("a{j}")).collect();
        Self::with_labels(states, actions, loss)
    }

    pub fn with_labels(
        states: Vec<String>,
        actions: Vec<String>,
        loss: Vec<Vec<T>>,
    ) -> Result<Self> {
        if states.is_empty() || actions.is_empty() {
            return Err(Error::Config(
                "decision problem needs at least one state and one action".into(),
            ));
        }
        if loss.len() != states.len() {
            return Err(Error::DimensionMismatch {
                expected: states.len(),
                got: loss.len(),
            });
        }
        for row in &loss {
            if row.len() != actions.len() {
                return Err(Error::DimensionMismatch {
                    expected: actions.len(),
                    got: row.len(),
                });
            }
            if row.iter().any(|l| !l.is_finite()) {
                return Err(Error::Config(
                    "loss must be finite for every (state, action)".into(),
                ));
            }
        }
        Ok(Self {
            states,
            actions,
            loss,
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn loss(&self, state: usize, action: usize) -> T {
        self.loss[state][action]
    }

    pub fn expected_loss(&self, q: &[T], action: usize) -> T {
        q.iter()
            .zip(&self.loss)
            .map(|(&p, row)| p * row[action])
            .sum()
    }

    /// Action minimizing expected loss under `q`; ties go to the lowest index.
    pub fn bayes_act(&self, q: &[T]) -> Result<usize> {
        validate_distribution(q, self.n_states())?;
        let mut best = 0;
        let mut best_loss = self.expected_loss(q, 0);
        for a in 1..self.actions.len() {
            let l = self.expected_loss(q, a);
            if l < best_loss {
                best = a;
                best_loss = l;
            }
        }
        Ok(best)
    }
}

pub(crate) fn validate_distribution<T: Real>(q: &[T], n_states: usize) -> Result<()> {
    if q.len() != n_states {
        return Err(Error::InvalidDistribution(format!(
            "expected {n_states} probabilities, got {}",
            q.len()
        )));
    }
    if let Some(p) = q.iter().find(|p| !(**p >= T::zero()) || !p.is_finite()) {
        return Err(Error::InvalidDistribution(format!(
            "entry {p} is not a finite nonnegative number"
        )));
    }
    let tol = T::lit(1e-12).max(T::epsilon() * T::from_count(4 * n_states));
    let total: T = q.iter().copied().sum();
    if (total - T::one()).abs() > tol {
        return Err(Error::InvalidDistribution(format!(
            "probabilities sum to {total}"
        )));
    }
    Ok(())
}

/// `S(x, Q) = L(x, a_Q)` with `a_Q` the Bayes act under `Q`.
pub fn score_from_decision_problem<T: Real>(
    dp: &DecisionProblem<T>,
    q: &[T],
    x: usize,
) -> Result<ScoreValue<T>> {
    if x >= dp.n_states() {
        return Err(Error::IndexOutOfRange {
            index: x,
            len: dp.n_states(),
        });
    }
    let act = dp.bayes_act(q)?;
    Ok(ScoreValue::unit(dp.loss(x, act), RuleId::DecisionInduced))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation<T> {
    /// Index of the true distribution in the grid.
    pub truth: usize,
    /// Index of the quoted distribution that beat honest quoting.
    pub quoted: usize,
    pub honest_expected: T,
    pub quoted_expected: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProprietyReport<T> {
    pub grid_size: usize,
    pub violations: Vec<Violation<T>>,
}

impl<T> ProprietyReport<T> {
    pub fn is_proper(&self) -> bool {
        self.violations.is_empty()
    }
}

// E_P S(X, Q), skipping states with P(x) = 0 so that infinite scores on
// impossible states do not produce 0·∞.
fn expected_score<T: Real>(score: &impl Fn(usize, &[T]) -> T, p: &[T], q: &[T]) -> T {
    p.iter()
        .enumerate()
        .filter(|(_, &px)| px > T::zero())
        .map(|(x, &px)| px * score(x, q))
        .sum()
}

/// Lists every ordered pair `(P, Q)` of grid points with
/// `E_P S(X, P) > E_P S(X, Q) + 1e-12`.
pub fn check_propriety<T: Real>(
    score: impl Fn(usize, &[T]) -> T,
    grid: &[Vec<T>],
) -> ProprietyReport<T> {
    let slack = T::lit(1e-12);
    let mut violations = Vec::new();
    for (i, p) in grid.iter().enumerate() {
        let honest = expected_score(&score, p, p);
        for (j, q) in grid.iter().enumerate() {
            if i == j {
                continue;
            }
            let quoted = expected_score(&score, p, q);
            if honest > quoted + slack {
                violations.push(Violation {
                    truth: i,
                    quoted: j,
                    honest_expected: honest,
                    quoted_expected: quoted,
                });
            }
        }
    }
    ProprietyReport {
        grid_size: grid.len(),
        violations,
    }
}

/// All probability vectors on `dim` states whose entries are multiples of `1/steps`.
pub fn simplex_grid<T: Real>(dim: usize, steps: usize) -> Vec<Vec<T>> {
    fn rec(dim: usize, remaining: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == dim {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=remaining {
            prefix.push(k);
            rec(dim, remaining - k, prefix, out);
            prefix.pop();
        }
    }
    if dim == 0 {
        return Vec::new();
    }
    let mut counts = Vec::new();
    rec(dim, steps, &mut Vec::with_capacity(dim), &mut counts);
    let denom = T::from_count(steps);
    counts
        .into_iter()
        .map(|c| c.into_iter().map(|k| T::from_count(k) / denom).collect())
        .collect()
}

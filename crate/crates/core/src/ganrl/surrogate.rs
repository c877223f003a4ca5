//! Score oracle standing between the refinement loop and any detector.
//!
//! The handle owns closures, not the model, so refinement code cannot name
//! the model type, downcast it, or reach its parameters; the only
//! information that crosses the boundary is score vectors. Every scored or
//! differentiated row increments the query counter, which makes the
//! information flow auditable after the fact.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::models::Classifier;
use crate::numkit::{DenseMatrix, Scalar};

type ScoreFn<'a, S> = dyn Fn(&DenseMatrix<S>) -> Result<Vec<S>> + Send + Sync + 'a;
type GradFn<'a, S> = dyn Fn(&DenseMatrix<S>, &[u8]) -> Result<DenseMatrix<S>> + Send + Sync + 'a;

pub struct SurrogateHandle<'a, S: Scalar> {
    score_fn: Box<ScoreFn<'a, S>>,
    grad_fn: Option<Box<GradFn<'a, S>>>,
    queries: AtomicU64,
    budget: Option<u64>,
}

impl<'a, S: Scalar> SurrogateHandle<'a, S> {
    /// Wraps raw closures. Prefer [`attach_target_as_surrogate`] or
    /// [`attach_differentiable_surrogate`] for trained models.
    pub fn new(
        score_fn: Box<ScoreFn<'a, S>>,
        grad_fn: Option<Box<GradFn<'a, S>>>,
    ) -> Self {
        SurrogateHandle {
            score_fn,
            grad_fn,
            queries: AtomicU64::new(0),
            budget: None,
        }
    }

    /// Caps the total number of rows this handle will ever score.
    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    /// Rows scored or differentiated so far.
    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::SeqCst)
    }

    pub fn is_differentiable(&self) -> bool {
        self.grad_fn.is_some()
    }

    fn spend(&self, rows: usize) -> Result<()> {
        let spent = self.queries.fetch_add(rows as u64, Ordering::SeqCst) + rows as u64;
        if let Some(budget) = self.budget {
            if spent > budget {
                return Err(Error::QueryBudget { queries: spent });
            }
        }
        Ok(())
    }

    /// Scores a batch, charging one query per row.
    ///
    /// Scores outside [0,1] are a protocol violation: the refinement loop
    /// thresholds them as probabilities, so garbage here would silently
    /// corrupt rewards.
    pub fn score(&self, x: &DenseMatrix<S>) -> Result<Vec<S>> {
        self.spend(x.rows())?;
        let scores = (self.score_fn)(x)?;
        if scores.len() != x.rows() {
            return Err(Error::Protocol(format!(
                "surrogate returned {} scores for {} rows",
                scores.len(),
                x.rows()
            )));
        }
        if let Some(bad) = scores
            .iter()
            .find(|s| !(**s >= S::zero() && **s <= S::one()))
        {
            return Err(Error::Protocol(format!(
                "surrogate score {bad} is outside [0,1]"
            )));
        }
        Ok(scores)
    }

    /// Input gradient of the surrogate's BCE loss, charging one query per
    /// row. Only available when the handle was built as differentiable.
    pub fn input_gradient(&self, x: &DenseMatrix<S>, y: &[u8]) -> Result<DenseMatrix<S>> {
        let Some(grad_fn) = &self.grad_fn else {
            return Err(Error::NotDifferentiable {
                family: "score-only surrogate",
            });
        };
        self.spend(x.rows())?;
        grad_fn(x, y)
    }
}

/// Gray-box attachment: the returned handle can score batches and nothing
/// else, no matter what the underlying family exposes.
pub fn attach_target_as_surrogate<'a, S: Scalar>(
    model: &'a dyn Classifier<S>,
) -> SurrogateHandle<'a, S> {
    SurrogateHandle::new(Box::new(move |x| model.predict_proba(x)), None)
}

/// White-box attachment for differentiable stand-ins: scores plus input
/// gradients, both metered.
pub fn attach_differentiable_surrogate<'a, S: Scalar>(
    model: &'a dyn Classifier<S>,
) -> SurrogateHandle<'a, S> {
    SurrogateHandle::new(
        Box::new(move |x| model.predict_proba(x)),
        Some(Box::new(move |x, y| model.input_gradient(x, y))),
    )
}

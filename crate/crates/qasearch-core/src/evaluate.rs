//! Budgeted cross-validation scoring shared by every search arm.
//!
//! All arms of a benchmark run score circuits through one [`CvEvaluator`]
//! per arm, which pins the fold plan, the model and the kernel width, counts
//! every scoring request against the arm's budget, and memoizes scores by
//! canonical circuit string. The feature cache underneath is shared across
//! evaluators, so re-scoring a known circuit under a new gamma never
//! re-runs the simulator.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::circuit::{DataCircuit, ExpandOptions};
use crate::data::TrainView;
use crate::error::{Error, Result};
use crate::learners::{cross_validate, FoldPlan, ModelSpec};
use crate::pqk::FeatureCache;

/// One scoring request, in request order.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EvalRecord {
    pub circuit: String,
    pub gate_count: usize,
    /// `None` when the evaluation failed (degenerate folds and the like).
    pub score: Option<f64>,
}

pub struct CvEvaluator {
    train: TrainView,
    folds: FoldPlan,
    model: ModelSpec,
    gamma: f64,
    opts: ExpandOptions,
    cache: Arc<FeatureCache>,
    memo: Mutex<HashMap<String, Option<f64>>>,
    records: Mutex<Vec<EvalRecord>>,
    requests: AtomicU64,
    budget: Option<u64>,
}

impl CvEvaluator {
    pub fn new(
        train: TrainView,
        folds: FoldPlan,
        model: ModelSpec,
        gamma: f64,
        opts: ExpandOptions,
        cache: Arc<FeatureCache>,
        budget: Option<u64>,
    ) -> Result<Self> {
        if folds.len() != train.x.nrows() {
            return Err(Error::invalid_argument(format!(
                "fold plan covers {} samples but training set has {}",
                folds.len(),
                train.x.nrows()
            )));
        }
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::invalid_argument(format!("bad gamma {gamma}")));
        }
        Ok(CvEvaluator {
            train,
            folds,
            model,
            gamma,
            opts,
            cache,
            memo: Mutex::new(HashMap::new()),
            records: Mutex::new(Vec::new()),
            requests: AtomicU64::new(0),
            budget,
        })
    }

    pub fn train(&self) -> &TrainView {
        &self.train
    }

    pub fn folds(&self) -> &FoldPlan {
        &self.folds
    }

    pub fn model(&self) -> ModelSpec {
        self.model
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn expand_options(&self) -> &ExpandOptions {
        &self.opts
    }

    pub fn cache(&self) -> &Arc<FeatureCache> {
        &self.cache
    }

    /// Scoring requests so far (memo hits included).
    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn remaining(&self) -> Option<u64> {
        self.budget.map(|b| b.saturating_sub(self.requests()))
    }

    pub fn budget_exhausted(&self) -> bool {
        self.remaining() == Some(0)
    }

    /// All scoring requests in order; the audit trail behind top-k selection.
    pub fn records(&self) -> Vec<EvalRecord> {
        self.records.lock().unwrap().clone()
    }

    /// Cross-validation score for `circuit`, against the arm budget.
    ///
    /// Every request counts toward the budget whether or not it is served
    /// from the memo. Evaluation failures are memoized as `None` and
    /// surfaced as `ScoringFailed`.
    pub fn evaluate(&self, circuit: &dyn DataCircuit) -> Result<f64> {
        if self.budget_exhausted() {
            return Err(Error::BudgetExhausted);
        }
        self.requests.fetch_add(1, Ordering::Relaxed);
        let key = circuit.canonical_string();

        let memoized = self.memo.lock().unwrap().get(&key).copied();
        let score = match memoized {
            Some(score) => score,
            None => {
                let score = self.compute(circuit)?;
                self.memo.lock().unwrap().insert(key.clone(), score);
                score
            }
        };
        self.records.lock().unwrap().push(EvalRecord {
            circuit: key.clone(),
            gate_count: circuit.gate_count(),
            score,
        });
        score.ok_or_else(|| Error::ScoringFailed(format!("evaluation of {key} was degenerate")))
    }

    fn compute(&self, circuit: &dyn DataCircuit) -> Result<Option<f64>> {
        let features = self.cache.get_or_compute(
            circuit,
            &self.train.cache_id,
            self.train.x.view(),
            &self.opts,
        )?;
        match cross_validate(
            features.values.view(),
            &self.train.y,
            &self.folds,
            self.model,
            self.gamma,
        ) {
            Ok(score) => Ok(Some(score)),
            Err(Error::ScoringFailed(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{EncodingCircuit, LayerAction};
    use crate::data::make_synthetic_quantum_regression;

    fn evaluator(budget: Option<u64>) -> CvEvaluator {
        let ds = make_synthetic_quantum_regression(30, 10, 2, 5).unwrap();
        let train = ds.train_view();
        let folds = FoldPlan::new(30, 5, 7).unwrap();
        CvEvaluator::new(
            train,
            folds,
            ModelSpec::Krr { lambda: 1e-4 },
            1.0,
            ExpandOptions::default(),
            Arc::new(FeatureCache::in_memory(64)),
            budget,
        )
        .unwrap()
    }

    #[test]
    fn memo_serves_repeat_requests_without_simulation() {
        let ev = evaluator(None);
        let c = EncodingCircuit::from_layers(2, vec![LayerAction::RxData, LayerAction::Cx]).unwrap();
        let a = ev.evaluate(&c).unwrap();
        let points = ev.cache().computed_points();
        let b = ev.evaluate(&c).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(ev.cache().computed_points(), points, "no new simulation");
        assert_eq!(ev.requests(), 2, "memo hits still count as requests");
        assert_eq!(ev.records().len(), 2);
    }

    #[test]
    fn budget_is_enforced() {
        let ev = evaluator(Some(2));
        let c1 = EncodingCircuit::from_layers(2, vec![LayerAction::RxData]).unwrap();
        let c2 = EncodingCircuit::from_layers(2, vec![LayerAction::RyData]).unwrap();
        let c3 = EncodingCircuit::from_layers(2, vec![LayerAction::RzData]).unwrap();
        ev.evaluate(&c1).unwrap();
        ev.evaluate(&c2).unwrap();
        assert!(matches!(ev.evaluate(&c3), Err(Error::BudgetExhausted)));
        assert_eq!(ev.remaining(), Some(0));
    }

    #[test]
    fn scores_are_deterministic() {
        let a = {
            let ev = evaluator(None);
            let c = EncodingCircuit::from_layers(2, vec![LayerAction::RyData, LayerAction::Cz])
                .unwrap();
            ev.evaluate(&c).unwrap()
        };
        let b = {
            let ev = evaluator(None);
            let c = EncodingCircuit::from_layers(2, vec![LayerAction::RyData, LayerAction::Cz])
                .unwrap();
            ev.evaluate(&c).unwrap()
        };
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

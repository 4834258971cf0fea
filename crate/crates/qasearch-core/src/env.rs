//! The circuit-construction environment driving the agent.
//!
//! Each episode builds one layered encoding circuit. Every step appends the
//! chosen layer and pays a tiered reward derived from the cross-validation
//! score: surpassing the best score ever seen pays most, matching it pays
//! half, improving on the episode's own best pays a little, stagnation
//! costs a little, and circuits without any data encoding cost a lot (and
//! skip the evaluation entirely). Episodes end at the depth cap. Resets
//! start from an empty circuit, or with 20% probability from a random
//! half-depth prefix that contains at least one data-encoding layer.

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{DataCircuit, EncodingCircuit, LayerAction, ACTION_COUNT};
use crate::error::{Error, Result};
use crate::evaluate::CvEvaluator;
use crate::muzero::{EnvStep, Environment};

/// Reward magnitudes; the ordering is the contract, the values are knobs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RewardTable {
    pub global_surpass: f64,
    pub global_match: f64,
    pub episode_improve: f64,
    pub no_improve: f64,
    pub no_encoding: f64,
    pub match_tolerance: f64,
}

impl Default for RewardTable {
    fn default() -> Self {
        RewardTable {
            global_surpass: 1.0,
            global_match: 0.5,
            episode_improve: 0.1,
            no_improve: -0.02,
            no_encoding: -1.0,
            match_tolerance: 1e-6,
        }
    }
}

impl RewardTable {
    pub fn validate(&self) -> Result<()> {
        let ordered = self.global_surpass > self.global_match
            && self.global_match > self.episode_improve
            && self.episode_improve > 0.0
            && 0.0 > self.no_improve
            && self.no_improve > self.no_encoding;
        if !ordered || self.match_tolerance <= 0.0 {
            return Err(Error::Config(
                "reward table must satisfy surpass > match > improve > 0 > no-improve > no-encoding"
                    .into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardTier {
    GlobalSurpass,
    GlobalMatch,
    EpisodeImprove,
    NoImprove,
    NoEncoding,
    InvalidScore,
}

/// Monotone shared maximum of all valid CV scores, lock-free.
#[derive(Debug)]
pub struct GlobalBest {
    bits: AtomicU64,
}

impl GlobalBest {
    pub fn new() -> Self {
        GlobalBest {
            bits: AtomicU64::new(f64::NEG_INFINITY.to_bits()),
        }
    }

    pub fn get(&self) -> f64 {
        f64::from_bits(self.bits.load(Ordering::Acquire))
    }

    /// Compare-and-swap max; returns the value that was current before.
    pub fn update_max(&self, candidate: f64) -> f64 {
        let mut current = self.bits.load(Ordering::Acquire);
        loop {
            let current_val = f64::from_bits(current);
            if candidate <= current_val {
                return current_val;
            }
            match self.bits.compare_exchange_weak(
                current,
                candidate.to_bits(),
                Ordering::AcqRel,
                Ordering::Acquire,
            ) {
                Ok(_) => return current_val,
                Err(actual) => current = actual,
            }
        }
    }
}

impl Default for GlobalBest {
    fn default() -> Self {
        Self::new()
    }
}

/// Tier selection and best-score bookkeeping for one evaluated step.
///
/// Returns the reward, the tier, and the updated `(episode_best,
/// global_best)` pair. `cv = None` marks a failed evaluation, which is
/// penalized like stagnation but never updates the bests.
pub fn compute_reward(
    cv: Option<f64>,
    episode_best: f64,
    global_best: f64,
    table: &RewardTable,
) -> (f64, RewardTier, f64, f64) {
    let Some(cv) = cv.filter(|v| v.is_finite()) else {
        return (table.no_improve, RewardTier::InvalidScore, episode_best, global_best);
    };
    if cv > global_best + table.match_tolerance {
        (
            table.global_surpass,
            RewardTier::GlobalSurpass,
            episode_best.max(cv),
            cv,
        )
    } else if (cv - global_best).abs() <= table.match_tolerance {
        (
            table.global_match,
            RewardTier::GlobalMatch,
            episode_best.max(cv),
            global_best,
        )
    } else if cv > episode_best {
        (
            table.episode_improve,
            RewardTier::EpisodeImprove,
            cv,
            global_best,
        )
    } else {
        (table.no_improve, RewardTier::NoImprove, episode_best, global_best)
    }
}

/// Append-only evaluation audit log, one JSON line per evaluated step.
pub struct AuditLog {
    writer: Mutex<Box<dyn Write + Send>>,
}

impl AuditLog {
    pub fn to_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        Ok(AuditLog {
            writer: Mutex::new(Box::new(std::io::BufWriter::new(file))),
        })
    }

    fn record(&self, circuit: &str, cv: Option<f64>, tier: RewardTier) {
        let line = serde_json::json!({
            "circuit": circuit,
            "cv_score": cv,
            "reward_tier": tier,
            "timestamp": std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
        });
        let mut w = self.writer.lock().unwrap();
        let _ = writeln!(w, "{line}");
        let _ = w.flush();
    }
}

/// The RL environment over layered encoding circuits.
pub struct SearchEnv {
    evaluator: Arc<CvEvaluator>,
    circuit: EncodingCircuit,
    episode_best: f64,
    global_best: Arc<GlobalBest>,
    table: RewardTable,
    max_depth: usize,
    restart_probability: f64,
    rng: ChaCha8Rng,
    audit: Option<Arc<AuditLog>>,
    done: bool,
}

impl SearchEnv {
    pub fn new(
        evaluator: Arc<CvEvaluator>,
        global_best: Arc<GlobalBest>,
        table: RewardTable,
        max_depth: usize,
        seed: u64,
    ) -> Result<Self> {
        table.validate()?;
        if max_depth == 0 {
            return Err(Error::invalid_argument("max_depth must be positive"));
        }
        let num_qubits = evaluator.train().x.ncols();
        Ok(SearchEnv {
            circuit: EncodingCircuit::new(num_qubits)?,
            evaluator,
            episode_best: f64::NEG_INFINITY,
            global_best,
            table,
            max_depth,
            restart_probability: 0.2,
            rng: ChaCha8Rng::seed_from_u64(seed),
            audit: None,
            done: true,
        })
    }

    pub fn with_audit(mut self, audit: Arc<AuditLog>) -> Self {
        self.audit = Some(audit);
        self
    }

    #[cfg(test)]
    pub(crate) fn set_restart_probability(&mut self, p: f64) {
        self.restart_probability = p;
    }

    pub fn global_best(&self) -> f64 {
        self.global_best.get()
    }

    pub fn circuit(&self) -> &EncodingCircuit {
        &self.circuit
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    fn fresh_circuit(&mut self) -> Result<EncodingCircuit> {
        let q = self.evaluator.train().x.ncols();
        if self.rng.random_bool(self.restart_probability) {
            // Random restart: half-depth prefix with at least one
            // data-encoding layer.
            let prefix_len = self.max_depth / 2;
            loop {
                let layers: Vec<LayerAction> = (0..prefix_len)
                    .map(|_| {
                        LayerAction::from_id(self.rng.random_range(0..ACTION_COUNT as u8))
                            .expect("id in range")
                    })
                    .collect();
                let circuit = EncodingCircuit::from_layers(q, layers)?;
                if circuit.has_data_encoding() {
                    return Ok(circuit);
                }
            }
        } else {
            EncodingCircuit::new(q)
        }
    }
}

impl Environment for SearchEnv {
    fn obs_dim(&self) -> usize {
        self.max_depth * ACTION_COUNT
    }

    fn action_count(&self) -> usize {
        ACTION_COUNT
    }

    fn reset(&mut self) -> Result<Vec<f64>> {
        self.circuit = self.fresh_circuit()?;
        self.episode_best = f64::NEG_INFINITY;
        self.done = false;
        Ok(self.circuit.encode_observation(self.max_depth))
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        if self.done {
            return Err(Error::InvalidState("step on finished episode".into()));
        }
        let action = LayerAction::from_id(
            u8::try_from(action)
                .map_err(|_| Error::invalid_argument(format!("action {action} out of range")))?,
        )?;
        self.circuit = self.circuit.append_action(action, self.max_depth)?;
        self.done = self.circuit.depth() >= self.max_depth;

        let reward = if !self.circuit.has_data_encoding() {
            // No data dependence: fixed penalty, evaluation skipped.
            if let Some(audit) = &self.audit {
                audit.record(&self.circuit.canonical_string(), None, RewardTier::NoEncoding);
            }
            self.table.no_encoding
        } else {
            let cv = match self.evaluator.evaluate(&self.circuit) {
                Ok(score) => Some(score),
                Err(Error::ScoringFailed(_)) => None,
                Err(e) => return Err(e),
            };
            let (reward, tier, episode_best, global_best) = compute_reward(
                cv,
                self.episode_best,
                self.global_best.get(),
                &self.table,
            );
            self.episode_best = episode_best;
            self.global_best.update_max(global_best);
            if let Some(audit) = &self.audit {
                audit.record(&self.circuit.canonical_string(), cv, tier);
            }
            reward
        };

        Ok(EnvStep {
            observation: self.circuit.encode_observation(self.max_depth),
            reward,
            done: self.done,
        })
    }
}

//! The comparison arms: random layered search, random flexible search,
//! genetic search over flexible circuits, and literature-style reference
//! circuits tuned by kernel-target alignment.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    random_flexible, random_layered, DataCircuit, ExpandOptions, FlexAngle, FlexGate,
    FlexibleCircuit,
};
use crate::data::TrainView;
use crate::error::{Error, Result};
use crate::evaluate::CvEvaluator;
use crate::learners::kernel_target_alignment;
use crate::pqk::{gram_rows, FeatureCache};
use crate::simulator::GateKind;

/// One selected candidate of a search arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    pub method: String,
    pub circuit: String,
    pub cv_score: f64,
    pub gate_count: usize,
    pub seed: u64,
}

/// Distinct circuits from an evaluator's request log, best first. Ties are
/// broken by fewer gates, then lexicographic circuit string.
pub fn top_k_records(
    evaluator: &CvEvaluator,
    k: usize,
    method: &str,
    seed: u64,
) -> Vec<SearchRecord> {
    let mut by_circuit: std::collections::HashMap<String, (f64, usize)> =
        std::collections::HashMap::new();
    for record in evaluator.records() {
        let Some(score) = record.score else { continue };
        by_circuit
            .entry(record.circuit)
            .or_insert((score, record.gate_count));
    }
    let mut entries: Vec<SearchRecord> = by_circuit
        .into_iter()
        .map(|(circuit, (cv_score, gate_count))| SearchRecord {
            method: method.to_string(),
            circuit,
            cv_score,
            gate_count,
            seed,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.cv_score
            .partial_cmp(&a.cv_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.gate_count.cmp(&b.gate_count))
            .then(a.circuit.cmp(&b.circuit))
    });
    entries.truncate(k);
    entries
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomGenerator {
    Layered,
    Flexible,
}

/// Sample `budget` random circuits, score each, return the top `k`.
pub fn random_search(
    generator: RandomGenerator,
    evaluator: &CvEvaluator,
    max_depth: usize,
    budget: u64,
    top_k: usize,
    seed: u64,
) -> Result<Vec<SearchRecord>> {
    let q = evaluator.train().x.ncols();
    let d = q;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let method = match generator {
        RandomGenerator::Layered => "random-layered",
        RandomGenerator::Flexible => "random-flexible",
    };
    for _ in 0..budget {
        let outcome = match generator {
            RandomGenerator::Layered => {
                let c = random_layered(&mut rng, q, 2, max_depth)?;
                evaluator.evaluate(&c)
            }
            RandomGenerator::Flexible => {
                let c = random_flexible(&mut rng, q, d, max_depth * q)?;
                evaluator.evaluate(&c)
            }
        };
        match outcome {
            Ok(_) => {}
            Err(Error::ScoringFailed(_)) => {}
            Err(Error::BudgetExhausted) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(top_k_records(evaluator, top_k, method, seed))
}

/// One gene slot. Decoding mirrors the flexible random generator's gate
/// families; disabled genes contribute nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct Gene {
    pub enabled: bool,
    pub family: u8,
    pub target: u8,
    pub partner_offset: u8,
    pub feature: u8,
    pub use_atan: bool,
    pub angle: f64,
}

impl Gene {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        Gene {
            enabled: rng.random_bool(0.7),
            family: rng.random_range(0..16),
            target: rng.random_range(0..u8::MAX),
            partner_offset: rng.random_range(0..u8::MAX),
            feature: rng.random_range(0..u8::MAX),
            use_atan: rng.random_bool(0.5),
            angle: rng.random_range(0.0..std::f64::consts::TAU),
        }
    }

    fn decode(&self, q: usize, d: usize) -> Option<FlexGate> {
        if !self.enabled {
            return None;
        }
        let family = if q >= 2 { self.family % 16 } else { self.family % 10 };
        let target = self.target as usize % q;
        let feature = self.feature as usize % d;
        let control = if q >= 2 {
            (target + 1 + self.partner_offset as usize % (q - 1).max(1)) % q
        } else {
            0
        };
        let data_angle = if self.use_atan {
            FlexAngle::AtanFeature(feature)
        } else {
            FlexAngle::LinearFeature(feature)
        };
        let gate = match family {
            0..=3 => FlexGate {
                kind: [GateKind::X, GateKind::Y, GateKind::Z, GateKind::H][family as usize],
                target,
                control: None,
                angle: FlexAngle::None,
            },
            4..=6 => FlexGate {
                kind: [GateKind::RX, GateKind::RY, GateKind::RZ][family as usize - 4],
                target,
                control: None,
                angle: data_angle,
            },
            7..=9 => FlexGate {
                kind: [GateKind::RX, GateKind::RY, GateKind::RZ][family as usize - 7],
                target,
                control: None,
                angle: FlexAngle::Literal(self.angle),
            },
            10..=12 => FlexGate {
                kind: [GateKind::CX, GateKind::CY, GateKind::CZ][family as usize - 10],
                target,
                control: Some(control),
                angle: FlexAngle::None,
            },
            _ => FlexGate {
                kind: [GateKind::CRX, GateKind::CRY, GateKind::CRZ][family as usize - 13],
                target,
                control: Some(control),
                angle: FlexAngle::Literal(self.angle),
            },
        };
        Some(gate)
    }
}

/// Fixed-length genome decoding to a flexible circuit; the repair pass
/// guarantees every feature is encoded at least once.
#[derive(Debug, Clone, PartialEq)]
pub struct GaGenome {
    pub genes: Vec<Gene>,
}

impl GaGenome {
    fn random(len: usize, rng: &mut ChaCha8Rng) -> Self {
        GaGenome {
            genes: (0..len).map(|_| Gene::random(rng)).collect(),
        }
    }

    /// Deterministic decode + repair.
    pub fn decode(&self, q: usize, d: usize) -> Result<FlexibleCircuit> {
        let mut gates: Vec<FlexGate> = self.genes.iter().filter_map(|g| g.decode(q, d)).collect();

        // Repair: convert duplicate or non-data slots, then append.
        loop {
            let mut counts = vec![0usize; d];
            for g in &gates {
                if let Some(j) = feature_of(g) {
                    counts[j] += 1;
                }
            }
            let Some(missing) = counts.iter().position(|&c| c == 0) else {
                break;
            };
            let replacement = FlexGate {
                kind: GateKind::RY,
                target: missing % q,
                control: None,
                angle: FlexAngle::LinearFeature(missing),
            };
            let slot = gates.iter().position(|g| match feature_of(g) {
                None => true,
                Some(j) => counts[j] > 1,
            });
            match slot {
                Some(i) => gates[i] = replacement,
                None => gates.push(replacement),
            }
        }
        FlexibleCircuit::new(q, gates)
    }
}

fn feature_of(g: &FlexGate) -> Option<usize> {
    match g.angle {
        FlexAngle::LinearFeature(j) | FlexAngle::AtanFeature(j) => Some(j),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_k: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub genome_len: usize,
}

impl GaConfig {
    /// Defaults sized so `population * generations` matches `budget`.
    pub fn for_budget(budget: u64, genome_len: usize) -> Self {
        let population = 30;
        GaConfig {
            population,
            generations: (budget as usize / population).max(1),
            tournament_k: 3,
            crossover_rate: 0.7,
            mutation_rate: 0.05,
            elitism: 2,
            genome_len,
        }
    }
}

#[derive(Debug)]
pub struct GaOutcome {
    pub records: Vec<SearchRecord>,
    /// Best fitness seen in each generation, for monotonicity checks.
    pub generation_best: Vec<f64>,
}

/// Tournament-selection genetic search with one-point crossover, per-gene
/// mutation and elitism; fitness is the cross-validation score.
pub fn genetic_search(
    cfg: &GaConfig,
    evaluator: &CvEvaluator,
    top_k: usize,
    seed: u64,
) -> Result<GaOutcome> {
    if cfg.population < 4 {
        return Err(Error::invalid_argument("population must be at least 4"));
    }
    if cfg.elitism >= cfg.population {
        return Err(Error::invalid_argument("elitism must be below population"));
    }
    let q = evaluator.train().x.ncols();
    let d = q;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let fitness_of = |genome: &GaGenome, evaluator: &CvEvaluator| -> Result<f64> {
        let circuit = genome.decode(q, d)?;
        match evaluator.evaluate(&circuit) {
            Ok(score) => Ok(score),
            Err(Error::ScoringFailed(_)) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    };

    let mut population: Vec<GaGenome> = (0..cfg.population)
        .map(|_| GaGenome::random(cfg.genome_len, &mut rng))
        .collect();
    let mut fitness = Vec::with_capacity(cfg.population);
    let mut generation_best = Vec::new();
    let mut exhausted = false;
    for genome in &population {
        match fitness_of(genome, evaluator) {
            Ok(f) => fitness.push(f),
            Err(Error::BudgetExhausted) => {
                exhausted = true;
                fitness.push(f64::NEG_INFINITY);
            }
            Err(e) => return Err(e),
        }
    }
    generation_best.push(fitness.iter().cloned().fold(f64::NEG_INFINITY, f64::max));

    for _gen in 1..cfg.generations {
        if exhausted {
            break;
        }
        // Elites by fitness, deterministic tie-break on index.
        let mut order: Vec<usize> = (0..cfg.population).collect();
        order.sort_by(|&a, &b| {
            fitness[b]
                .partial_cmp(&fitness[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut next: Vec<GaGenome> = order[..cfg.elitism]
            .iter()
            .map(|&i| population[i].clone())
            .collect();

        while next.len() < cfg.population {
            let mother = tournament(&population, &fitness, cfg.tournament_k, &mut rng);
            let father = tournament(&population, &fitness, cfg.tournament_k, &mut rng);
            let mut child = if rng.random_bool(cfg.crossover_rate) {
                let point = rng.random_range(1..cfg.genome_len);
                let mut genes = population[mother].genes[..point].to_vec();
                genes.extend_from_slice(&population[father].genes[point..]);
                GaGenome { genes }
            } else {
                population[mother].clone()
            };
            for gene in &mut child.genes {
                if rng.random_bool(cfg.mutation_rate) {
                    *gene = Gene::random(&mut rng);
                }
            }
            next.push(child);
        }

        population = next;
        fitness.clear();
        for genome in &population {
            match fitness_of(genome, evaluator) {
                Ok(f) => fitness.push(f),
                Err(Error::BudgetExhausted) => {
                    exhausted = true;
                    fitness.push(f64::NEG_INFINITY);
                }
                Err(e) => return Err(e),
            }
        }
        generation_best.push(fitness.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }

    Ok(GaOutcome {
        records: top_k_records(evaluator, top_k, "ga", seed),
        generation_best,
    })
}

fn tournament(
    population: &[GaGenome],
    fitness: &[f64],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> usize {
    let mut best = rng.random_range(0..population.len());
    for _ in 1..k {
        let challenger = rng.random_range(0..population.len());
        if fitness[challenger] > fitness[best] {
            best = challenger;
        }
    }
    best
}

/// The four literature-style reference templates. These are documented
/// reconstructions of common published designs, not exact replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceTemplate {
    /// Per layer: trainable Ry wall, CX ring, Rz data re-uploading.
    HubregtsenTrainable,
    /// Per layer: H wall, Rz data wall, linear CX chain; no parameters.
    PetersFixed,
    /// Per layer: Ry wall carrying data plus a trainable shift, trainable
    /// Rz wall, linear CX chain.
    HaugYzCx,
    /// Per layer: H wall, Rz(2x) wall, ZZ-interaction phases on chain pairs.
    HavlicekZz,
}

impl ReferenceTemplate {
    pub const ALL: [ReferenceTemplate; 4] = [
        ReferenceTemplate::HubregtsenTrainable,
        ReferenceTemplate::PetersFixed,
        ReferenceTemplate::HaugYzCx,
        ReferenceTemplate::HavlicekZz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReferenceTemplate::HubregtsenTrainable => "hubregtsen",
            ReferenceTemplate::PetersFixed => "peters",
            ReferenceTemplate::HaugYzCx => "haug-yz-cx",
            ReferenceTemplate::HavlicekZz => "havlicek-zz",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == name)
            .ok_or_else(|| Error::invalid_argument(format!("unknown reference template {name:?}")))
    }

    pub fn param_count(self, q: usize, layers: usize) -> usize {
        match self {
            ReferenceTemplate::HubregtsenTrainable => q * layers,
            ReferenceTemplate::PetersFixed | ReferenceTemplate::HavlicekZz => 0,
            ReferenceTemplate::HaugYzCx => 2 * q * layers,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCircuit {
    pub template: ReferenceTemplate,
    pub num_qubits: usize,
    pub layers: usize,
    pub theta: Vec<f64>,
}

impl ReferenceCircuit {
    pub fn new(template: ReferenceTemplate, q: usize, layers: usize) -> Result<Self> {
        if q == 0 || layers == 0 {
            return Err(Error::invalid_argument(
                "reference circuits need q >= 1 and layers >= 1",
            ));
        }
        Ok(ReferenceCircuit {
            template,
            num_qubits: q,
            layers,
            theta: vec![0.0; template.param_count(q, layers)],
        })
    }

    pub fn with_theta(mut self, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != self.template.param_count(self.num_qubits, self.layers) {
            return Err(Error::invalid_argument(format!(
                "expected {} parameters, got {}",
                self.template.param_count(self.num_qubits, self.layers),
                theta.len()
            )));
        }
        self.theta = theta;
        Ok(self)
    }

    pub fn param_count(&self) -> usize {
        self.theta.len()
    }

    fn ring(&self, out: &mut Vec<crate::simulator::GateOp>) {
        let q = self.num_qubits;
        if q < 2 {
            return;
        }
        for i in 0..q {
            out.push(crate::simulator::GateOp::controlled(
                GateKind::CX,
                i,
                (i + 1) % q,
            ));
        }
    }

    fn chain(&self, out: &mut Vec<crate::simulator::GateOp>) {
        for i in 0..self.num_qubits.saturating_sub(1) {
            out.push(crate::simulator::GateOp::controlled(GateKind::CX, i, i + 1));
        }
    }
}

impl DataCircuit for ReferenceCircuit {
    fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    fn expand(&self, x: &[f64], _opts: &ExpandOptions) -> Result<Vec<crate::simulator::GateOp>> {
        use crate::simulator::GateOp;
        let q = self.num_qubits;
        if x.len() != q {
            return Err(Error::invalid_argument(format!(
                "feature vector length {} does not match {q} qubits",
                x.len()
            )));
        }
        let mut out = Vec::with_capacity(self.gate_count());
        for l in 0..self.layers {
            match self.template {
                ReferenceTemplate::HubregtsenTrainable => {
                    for k in 0..q {
                        out.push(GateOp::rotation(GateKind::RY, self.theta[l * q + k], k));
                    }
                    self.ring(&mut out);
                    for k in 0..q {
                        out.push(GateOp::rotation(GateKind::RZ, x[k], k));
                    }
                }
                ReferenceTemplate::PetersFixed => {
                    for k in 0..q {
                        out.push(GateOp::single(GateKind::H, k));
                    }
                    for k in 0..q {
                        out.push(GateOp::rotation(GateKind::RZ, x[k], k));
                    }
                    self.chain(&mut out);
                }
                ReferenceTemplate::HaugYzCx => {
                    let base = 2 * l * q;
                    for k in 0..q {
                        out.push(GateOp::rotation(
                            GateKind::RY,
                            self.theta[base + k] + x[k],
                            k,
                        ));
                    }
                    for k in 0..q {
                        out.push(GateOp::rotation(GateKind::RZ, self.theta[base + q + k], k));
                    }
                    self.chain(&mut out);
                }
                ReferenceTemplate::HavlicekZz => {
                    for k in 0..q {
                        out.push(GateOp::single(GateKind::H, k));
                    }
                    for k in 0..q {
                        out.push(GateOp::rotation(GateKind::RZ, 2.0 * x[k], k));
                    }
                    // exp(-i x_i x_{i+1} Z Z) realized as CX . RZ(2 x_i x_{i+1}) . CX.
                    for i in 0..q.saturating_sub(1) {
                        out.push(GateOp::controlled(GateKind::CX, i, i + 1));
                        out.push(GateOp::rotation(GateKind::RZ, 2.0 * x[i] * x[i + 1], i + 1));
                        out.push(GateOp::controlled(GateKind::CX, i, i + 1));
                    }
                }
            }
        }
        Ok(out)
    }

    fn has_data_encoding(&self) -> bool {
        true
    }

    fn canonical_string(&self) -> String {
        let mut s = format!(
            "R:{}:q={}:L={}",
            self.template.name(),
            self.num_qubits,
            self.layers
        );
        if !self.theta.is_empty() {
            s.push_str(":theta=");
            for (i, t) in self.theta.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                s.push_str(&format!("{t}"));
            }
        }
        s
    }

    fn gate_count(&self) -> usize {
        let q = self.num_qubits;
        let per_layer = match self.template {
            ReferenceTemplate::HubregtsenTrainable => q + if q >= 2 { q } else { 0 } + q,
            ReferenceTemplate::PetersFixed => q + q + q.saturating_sub(1),
            ReferenceTemplate::HaugYzCx => q + q + q.saturating_sub(1),
            ReferenceTemplate::HavlicekZz => q + q + 3 * q.saturating_sub(1),
        };
        per_layer * self.layers
    }
}

#[derive(Debug, Clone)]
pub struct KtaOutcome {
    pub circuit: ReferenceCircuit,
    pub initial_ta: f64,
    pub best_ta: f64,
    pub evaluations: u64,
    pub budget_exhausted: bool,
}

/// Maximize kernel-target alignment over the circuit's variational
/// parameters by Nelder-Mead with random restarts. Zero-parameter circuits
/// are returned unchanged with their alignment value.
pub fn optimize_kta(
    circuit: &ReferenceCircuit,
    train: &TrainView,
    gamma: f64,
    opts: &ExpandOptions,
    cache: &Arc<FeatureCache>,
    budget: u64,
    restarts: usize,
    seed: u64,
) -> Result<KtaOutcome> {
    let evaluations = std::cell::Cell::new(0u64);
    let exhausted = std::cell::Cell::new(false);
    let mut objective = |theta: &[f64]| -> Result<Option<f64>> {
        if evaluations.get() >= budget {
            exhausted.set(true);
            return Ok(None);
        }
        evaluations.set(evaluations.get() + 1);
        let candidate = circuit.clone().with_theta(theta.to_vec())?;
        let features = cache.get_or_compute(&candidate, &train.cache_id, train.x.view(), opts)?;
        let k = gram_rows(features.values.view(), features.values.view(), gamma)?;
        match kernel_target_alignment(k.view(), &train.y) {
            Ok(ta) => Ok(Some(ta)),
            Err(Error::UndefinedAlignment(_)) => Ok(Some(f64::NEG_INFINITY)),
            Err(e) => Err(e),
        }
    };

    let initial_ta = objective(&circuit.theta)?
        .ok_or_else(|| Error::invalid_argument("KTA budget must allow one evaluation"))?;
    let mut best_theta = circuit.theta.clone();
    let mut best_ta = initial_ta;

    let p = circuit.param_count();
    if p > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for restart in 0..restarts {
            let start: Vec<f64> = if restart == 0 {
                circuit.theta.clone()
            } else {
                (0..p)
                    .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                    .collect()
            };
            let (theta, ta) = nelder_mead_max(&start, &mut objective)?;
            if ta > best_ta {
                best_ta = ta;
                best_theta = theta;
            }
            if exhausted.get() {
                break;
            }
        }
    }

    Ok(KtaOutcome {
        circuit: circuit.clone().with_theta(best_theta)?,
        initial_ta,
        best_ta,
        evaluations: evaluations.get(),
        budget_exhausted: exhausted.get(),
    })
}

/// Nelder-Mead ascent on `objective`; stops on budget exhaustion (objective
/// returns `None`), simplex collapse, or an iteration cap.
fn nelder_mead_max(
    start: &[f64],
    objective: &mut impl FnMut(&[f64]) -> Result<Option<f64>>,
) -> Result<(Vec<f64>, f64)> {
    let p = start.len();
    let step = 0.5;
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..p {
        let mut v = start.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values = Vec::with_capacity(p + 1);
    for v in &simplex {
        match objective(v)? {
            Some(val) => values.push(val),
            None => {
                // Ran out of budget during initialization; report the best
                // point evaluated so far.
                let best = argmax(&values);
                return Ok((simplex[best].clone(), values[best]));
            }
        }
    }

    for _iter in 0..200 {
        // Sort descending by value (maximization).
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[0] - values[p];
        if spread.abs() < 1e-10 {
            break;
        }

        let centroid: Vec<f64> = (0..p)
            .map(|j| simplex[..p].iter().map(|v| v[j]).sum::<f64>() / p as f64)
            .collect();
        let worst = simplex[p].clone();
        let reflect: Vec<f64> = (0..p).map(|j| centroid[j] + (centroid[j] - worst[j])).collect();
        let Some(f_reflect) = objective(&reflect)? else {
            break;
        };

        if f_reflect > values[0] {
            let expand: Vec<f64> = (0..p)
                .map(|j| centroid[j] + 2.0 * (centroid[j] - worst[j]))
                .collect();
            let Some(f_expand) = objective(&expand)? else {
                simplex[p] = reflect;
                values[p] = f_reflect;
                break;
            };
            if f_expand > f_reflect {
                simplex[p] = expand;
                values[p] = f_expand;
            } else {
                simplex[p] = reflect;
                values[p] = f_reflect;
            }
        } else if f_reflect > values[p - 1] {
            simplex[p] = reflect;
            values[p] = f_reflect;
        } else {
            let contract: Vec<f64> = (0..p)
                .map(|j| centroid[j] + 0.5 * (worst[j] - centroid[j]))
                .collect();
            let Some(f_contract) = objective(&contract)? else {
                break;
            };
            if f_contract > values[p] {
                simplex[p] = contract;
                values[p] = f_contract;
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].clone();
                let mut broke = false;
                for i in 1..=p {
                    for j in 0..p {
                        simplex[i][j] = best[j] + 0.5 * (simplex[i][j] - best[j]);
                    }
                    match objective(&simplex[i])? {
                        Some(v) => values[i] = v,
                        None => {
                            broke = true;
                            break;
                        }
                    }
                }
                if broke {
                    break;
                }
            }
        }
    }

    let best = argmax(&values);
    Ok((simplex[best].clone(), values[best]))
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

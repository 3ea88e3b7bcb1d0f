//! Synthetic populations of model-driven voters.
//!
//! Each voter draws a decision model from the population mix and plays a
//! number of rounds. Every round gets a fresh permutation of the utility
//! scheme, a target scenario and poll size, and a poll with strictly ordered
//! scores drawn by rejection sampling from a multinomial with uniformly
//! random shares.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stratvote_core::behavior::{relabel, Scenario};
use stratvote_core::fit::decide_record;
use stratvote_core::pivot::sample_multinomial;
use stratvote_core::seed;
use stratvote_core::{Candidate, DecisionConfig, Family, Model, Poll, Utility, VoteRecord};
use thiserror::Error;

use crate::data::{DataError, Dataset};

const MIX_TOLERANCE: f64 = 1e-6;
const MAX_POLL_ATTEMPTS: u32 = 10_000;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("no strictly ordered poll found for n = {n} with {m} candidates")]
    InfeasiblePoll { n: u64, m: usize },
    #[error(transparent)]
    Decide(#[from] stratvote_core::DecideError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationEntry {
    pub weight: f64,
    /// Each voter of this entry follows one of these, chosen uniformly.
    pub models: Vec<Model>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PollSizeWeight {
    pub n: u64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub num_voters: usize,
    pub rounds_per_voter: u32,
    pub population: Vec<PopulationEntry>,
    pub poll_sizes: Vec<PollSizeWeight>,
    /// Weights of scenarios A..F; only used with three candidates.
    pub scenario_weights: Vec<f64>,
    pub utilities: Vec<f64>,
    /// Probability of replacing the model's action by a uniform one.
    pub noise: f64,
    pub decision: DecisionConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            num_voters: 100,
            rounds_per_voter: 20,
            population: vec![PopulationEntry {
                weight: 1.0,
                models: vec![Model::Truth],
            }],
            poll_sizes: [8, 100, 1000, 10_000]
                .iter()
                .map(|&n| PollSizeWeight { n, weight: 0.25 })
                .collect(),
            scenario_weights: vec![1.0 / 6.0; 6],
            utilities: vec![10.0, 5.0, 0.0],
            noise: 0.0,
            decision: crate::eval::default_decision_config(),
        }
    }
}

fn check_mix(name: &str, weights: impl Iterator<Item = f64>) -> Result<(), GenerateError> {
    let w: Vec<f64> = weights.collect();
    if w.is_empty() {
        return Err(GenerateError::Config(format!("{name} is empty")));
    }
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(GenerateError::Config(format!(
            "{name} has a negative weight"
        )));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > MIX_TOLERANCE {
        return Err(GenerateError::Config(format!(
            "{name} weights sum to {sum}, not 1"
        )));
    }
    Ok(())
}

impl GeneratorConfig {
    pub fn num_candidates(&self) -> usize {
        self.utilities.len()
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        let bad = |m: &str| Err(GenerateError::Config(m.to_string()));
        if self.num_voters == 0 {
            return bad("num_voters must be positive");
        }
        if self.rounds_per_voter == 0 {
            return bad("rounds_per_voter must be positive");
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad("noise must lie in [0, 1]");
        }
        let m = self.num_candidates();
        Utility::new(self.utilities.clone())
            .map_err(|e| GenerateError::Config(format!("utilities: {e}")))?;
        if m < 2 {
            return bad("at least two candidates are needed");
        }
        check_mix("population", self.population.iter().map(|e| e.weight))?;
        check_mix("poll_sizes", self.poll_sizes.iter().map(|p| p.weight))?;
        if m == 3 {
            if self.scenario_weights.len() != 6 {
                return bad("scenario_weights needs one weight per scenario A..F");
            }
            check_mix("scenario_weights", self.scenario_weights.iter().copied())?;
        }
        for entry in &self.population {
            if entry.models.is_empty() {
                return bad("population entry without models");
            }
            for model in &entry.models {
                if model.family() == Family::NeuralNet {
                    return bad("NN voters cannot be simulated");
                }
                model.validate(m)?;
            }
        }
        Ok(())
    }
}

fn weighted_index(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let mut x = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = i;
            if x < w {
                return i;
            }
            x -= w;
        }
    }
    last
}

/// Scores in descending order, all distinct, summing to `n`.
fn strict_scores(
    rng: &mut ChaCha8Rng,
    n: u64,
    m: usize,
    attempts: &mut u64,
) -> Result<Vec<u64>, GenerateError> {
    let mut counts = vec![0u64; m];
    for _ in 0..MAX_POLL_ATTEMPTS {
        *attempts += 1;
        let raw: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
        sample_multinomial(rng, n, &probs, &mut counts);
        let mut sorted = counts.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        if sorted.windows(2).all(|w| w[0] > w[1]) {
            return Ok(sorted);
        }
    }
    Err(GenerateError::InfeasiblePoll { n, m })
}

/// A generated dataset with each voter's generating model.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub dataset: Dataset,
    pub voter_models: BTreeMap<String, Model>,
}

pub fn voter_id(index: usize) -> String {
    format!("v{:04}", index + 1)
}

pub fn generate_synthetic(
    cfg: &GeneratorConfig,
    master_seed: u64,
) -> Result<Generated, GenerateError> {
    cfg.validate()?;
    let m = cfg.num_candidates();
    let mut decision = cfg.decision;
    decision.cv.seed = master_seed;
    let mut records = Vec::with_capacity(cfg.num_voters * cfg.rounds_per_voter as usize);
    let mut voter_models = BTreeMap::new();
    let mut attempts = 0u64;
    for v in 0..cfg.num_voters {
        let id = voter_id(v);
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(
            master_seed,
            &[seed::hash_bytes(b"voter"), v as u64],
        ));
        let entry =
            &cfg.population[weighted_index(&mut rng, cfg.population.iter().map(|e| e.weight))];
        let model = entry.models[rng.random_range(0..entry.models.len())];
        voter_models.insert(id.clone(), model);
        for round in 1..=cfg.rounds_per_voter {
            let mut values = cfg.utilities.clone();
            values.shuffle(&mut rng);
            let utilities = Utility::new(values).expect("validated utilities");
            let n =
                cfg.poll_sizes[weighted_index(&mut rng, cfg.poll_sizes.iter().map(|p| p.weight))].n;
            let sorted = strict_scores(&mut rng, n, m, &mut attempts)?;
            let mut scores = vec![0u64; m];
            match (m, relabel(&utilities)) {
                (3, Ok(ranks)) => {
                    let sc = Scenario::ALL
                        [weighted_index(&mut rng, cfg.scenario_weights.iter().copied())];
                    for (pos, &rank) in sc.rank_order().iter().enumerate() {
                        scores[ranks[rank].0] = sorted[pos];
                    }
                }
                _ => {
                    let mut order: Vec<usize> = (0..m).collect();
                    order.shuffle(&mut rng);
                    for (pos, &c) in order.iter().enumerate() {
                        scores[c] = sorted[pos];
                    }
                }
            }
            let mut rec = VoteRecord {
                voter_id: id.clone(),
                round,
                poll: Poll::new(scores).expect("m >= 2"),
                utilities,
                action: Candidate(0),
            };
            rec.action = decide_record(&model, &rec, &decision)?;
            if cfg.noise > 0.0 && rng.random::<f64>() < cfg.noise {
                rec.action = Candidate(rng.random_range(0..m));
            }
            records.push(rec);
        }
    }
    let mut dataset = Dataset::new(records, "synthetic")?;
    dataset.manifest.seed = Some(master_seed);
    dataset.manifest.poll_acceptance_rate = Some(dataset.records.len() as f64 / attempts as f64);
    dataset.manifest.generator = Some(serde_json::to_value(cfg).expect("config serializes"));
    Ok(Generated {
        dataset,
        voter_models,
    })
}

/// One realization of the actual scores behind a poll: `n` votes drawn with
/// the poll shares as probabilities.
pub fn sample_actual_scores(poll: &Poll, seed: u64) -> Poll {
    let total: u64 = poll.scores().iter().sum();
    if total == 0 {
        return poll.clone();
    }
    let probs: Vec<f64> = poll
        .scores()
        .iter()
        .map(|&s| s as f64 / total as f64)
        .collect();
    let mut out = vec![0u64; poll.num_candidates()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_multinomial(&mut rng, total, &probs, &mut out);
    Poll::with_n(out, poll.n()).expect("same candidate count")
}

//! Leave-one-out and upper-bound evaluation of decision-model families.
//!
//! Every voter is fitted separately. Work is spread over voters, results
//! are collected in voter order and all sums run sequentially in that order,
//! so reports do not depend on the number of worker threads.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stratvote_core::behavior::{
    classify_scenario, find_inconsistent, is_unjustified, profile, Scenario, TypeThresholds,
    VoterProfile,
};
use stratvote_core::fit::{DecisionTable, ParameterGrid};
use stratvote_core::metrics::{metrics_from_confusion, ConfusionMatrix, Metrics};
use stratvote_core::nn::{self, Sample, TrainConfig};
use stratvote_core::pivot::CvConfig;
use stratvote_core::seed;
use stratvote_core::{Candidate, DecideError, DecisionConfig, Family, Model, VoteRecord};
use thiserror::Error;

use crate::data::Dataset;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty dataset")]
    Empty,
    #[error("{family}: {source}")]
    Decide {
        family: Family,
        #[source]
        source: DecideError,
    },
    #[error("NN: {0}")]
    Network(#[from] nn::NnError),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Loo,
    Upper,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Loo => "loo",
            Mode::Upper => "upper",
        }
    }
}

/// Decision constants used by evaluation and generation: three-candidate
/// pivot tables are always computed exactly.
pub fn default_decision_config() -> DecisionConfig {
    DecisionConfig {
        cv: CvConfig {
            exact_budget: 1_000_000_000,
            ..CvConfig::default()
        },
        ..DecisionConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub decision: DecisionConfig,
    pub thresholds: TypeThresholds,
    pub nn: TrainConfig,
    /// Voter-grouped folds for the network.
    pub nn_folds: usize,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            decision: default_decision_config(),
            thresholds: TypeThresholds::default(),
            nn: TrainConfig::default(),
            nn_folds: 10,
            seed: 0,
            jobs: 1,
        }
    }
}

impl EvalConfig {
    fn decision_with_seed(&self) -> DecisionConfig {
        let mut d = self.decision;
        d.cv.seed = self.seed;
        d
    }
}

pub const POLL_BUCKETS: [&str; 4] = ["n<10", "n~100", "n~1000", "n~10000"];

/// Poll-size bucket with boundaries at 10, 550 and 5500.
pub fn poll_size_bucket(n: u64) -> &'static str {
    match n {
        0..=9 => POLL_BUCKETS[0],
        10..=549 => POLL_BUCKETS[1],
        550..=5499 => POLL_BUCKETS[2],
        _ => POLL_BUCKETS[3],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub voter_id: String,
    pub round: u32,
    pub actual: Candidate,
    pub predicted: Candidate,
}

/// Confusion matrix over preference ranks and its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub label: String,
    pub samples: u64,
    pub confusion: ConfusionMatrix,
    pub metrics: Option<Metrics>,
}

impl Slice {
    fn new(label: &str, m: usize) -> Self {
        Self {
            label: label.to_string(),
            samples: 0,
            confusion: ConfusionMatrix::new(m),
            metrics: None,
        }
    }

    fn add(&mut self, actual: usize, predicted: usize) {
        self.confusion.add(actual, predicted);
        self.samples += 1;
    }

    fn finish(&mut self) {
        self.metrics = metrics_from_confusion(&self.confusion).ok();
    }

    pub fn weighted_f(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.weighted_f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoterCategory {
    Unjustified,
    Inconsistent,
    Other,
}

impl VoterCategory {
    pub fn name(self) -> &'static str {
        match self {
            VoterCategory::Unjustified => "unjustified",
            VoterCategory::Inconsistent => "inconsistent",
            VoterCategory::Other => "other",
        }
    }

    fn of(p: &VoterProfile) -> Self {
        if p.is_unjustified_voter() {
            VoterCategory::Unjustified
        } else if p.inconsistent {
            VoterCategory::Inconsistent
        } else {
            VoterCategory::Other
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoterScore {
    pub voter_id: String,
    pub records: usize,
    pub category: VoterCategory,
    pub f_measure: f64,
    pub accuracy: f64,
}

/// How each prediction of one scenario fared. A wrong prediction of an
/// unjustified action counts as unjustified even when it is also inconsistent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub scenario: String,
    pub correct: u64,
    pub unjustified: u64,
    pub inconsistent: u64,
    pub unexplained: u64,
}

impl ErrorCounts {
    fn named(scenario: &str) -> Self {
        Self {
            scenario: scenario.to_string(),
            ..Self::default()
        }
    }

    pub fn total(&self) -> u64 {
        self.correct + self.unjustified + self.inconsistent + self.unexplained
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedParameters {
    pub voter_id: String,
    /// Most common poll-size bucket among the voter's records.
    pub bucket: String,
    pub model: Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub family: Family,
    pub mode: Mode,
    pub records: usize,
    pub voters: usize,
    /// Voters predicted with the default grid point for lack of training data.
    pub defaulted_voters: Vec<String>,
    pub overall: Slice,
    /// Scenarios A..F then `unclassified` for polls or utilities with ties.
    pub scenarios: Vec<Slice>,
    pub poll_sizes: Vec<Slice>,
    pub per_voter: Vec<VoterScore>,
    pub errors: Vec<ErrorCounts>,
    pub parameters: Vec<FittedParameters>,
    pub predictions: Vec<Prediction>,
}

pub const UNCLASSIFIED: &str = "unclassified";

/// Per-voter output of the fitting stage.
struct VoterResult {
    predicted: Vec<Candidate>,
    defaulted: bool,
    fitted: Option<Model>,
}

fn fit_voter(
    grid: &ParameterGrid,
    records: &[VoteRecord],
    mode: Mode,
    cfg: &DecisionConfig,
) -> Result<VoterResult, DecideError> {
    let table = DecisionTable::build(grid, records, cfg)?;
    let n = records.len();
    let predicted = (0..n)
        .map(|i| {
            let point = match mode {
                Mode::Loo => table.best_point_without(i),
                Mode::Upper => table.best_point(),
            };
            table.decision(i, point)
        })
        .collect();
    Ok(VoterResult {
        predicted,
        defaulted: mode == Mode::Loo && n == 1,
        fitted: Some(grid.points()[table.best_point()]),
    })
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, EvalError> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()?)
}

fn grouped(ds: &Dataset) -> Vec<Vec<VoteRecord>> {
    ds.by_voter()
        .into_values()
        .map(|v| v.into_iter().cloned().collect())
        .collect()
}

/// Evaluates one family over the whole dataset.
pub fn evaluate(
    family: Family,
    ds: &Dataset,
    mode: Mode,
    cfg: &EvalConfig,
) -> Result<EvaluationReport, EvalError> {
    if ds.records.is_empty() {
        return Err(EvalError::Empty);
    }
    let voters = grouped(ds);
    let results: Vec<VoterResult> = if family == Family::NeuralNet {
        evaluate_network(&voters, mode, cfg)?
    } else {
        let grid = ParameterGrid::default_for(family, ds.num_candidates())
            .map_err(|source| EvalError::Decide { family, source })?;
        let decision = cfg.decision_with_seed();
        pool(cfg.jobs)?
            .install(|| {
                voters
                    .par_iter()
                    .map(|recs| fit_voter(&grid, recs, mode, &decision))
                    .collect::<Result<Vec<_>, _>>()
            })
            .map_err(|source| EvalError::Decide { family, source })?
    };
    Ok(assemble(
        family,
        mode,
        ds.num_candidates(),
        &voters,
        &results,
        cfg,
    ))
}

pub fn loo_evaluate(
    family: Family,
    ds: &Dataset,
    cfg: &EvalConfig,
) -> Result<EvaluationReport, EvalError> {
    evaluate(family, ds, Mode::Loo, cfg)
}

pub fn upper_bound_evaluate(
    family: Family,
    ds: &Dataset,
    cfg: &EvalConfig,
) -> Result<EvaluationReport, EvalError> {
    evaluate(family, ds, Mode::Upper, cfg)
}

/// Network predictions. Folds group whole voters; features of a record use
/// the profile of the voter's other records in leave-one-out mode.
fn evaluate_network(
    voters: &[Vec<VoteRecord>],
    mode: Mode,
    cfg: &EvalConfig,
) -> Result<Vec<VoterResult>, EvalError> {
    let features: Vec<Vec<Vec<f64>>> = voters
        .iter()
        .map(|recs| {
            (0..recs.len())
                .map(|i| {
                    let prof = match mode {
                        Mode::Loo => {
                            let rest: Vec<VoteRecord> = recs
                                .iter()
                                .enumerate()
                                .filter(|&(j, _)| j != i)
                                .map(|(_, r)| r.clone())
                                .collect();
                            profile(&rest, &cfg.thresholds)
                        }
                        Mode::Upper => profile(recs, &cfg.thresholds),
                    };
                    nn::extract_features(&recs[i], &prof).map(|f| f.0)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let samples_of = |vs: &mut dyn Iterator<Item = usize>| -> Vec<Sample> {
        vs.flat_map(|v| {
            voters[v].iter().zip(&features[v]).map(|(r, f)| Sample {
                features: f.clone(),
                label: nn::label_of(r),
            })
        })
        .collect()
    };
    let folds = match mode {
        Mode::Loo => cfg.nn_folds.clamp(2, voters.len().max(2)),
        Mode::Upper => 1,
    };
    let fold_of = |v: usize| v % folds;
    let networks: Vec<nn::Network> = pool(cfg.jobs)?.install(|| {
        (0..folds)
            .into_par_iter()
            .map(|k| {
                let train: Vec<Sample> = match mode {
                    Mode::Loo => samples_of(&mut (0..voters.len()).filter(|&v| fold_of(v) != k)),
                    Mode::Upper => samples_of(&mut (0..voters.len())),
                };
                let tc = TrainConfig {
                    seed: seed::derive(cfg.seed, &[seed::hash_bytes(b"nn"), k as u64]),
                    ..cfg.nn
                };
                nn::train(&train, &tc).map(|o| o.network)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    voters
        .iter()
        .enumerate()
        .map(|(v, recs)| {
            let net = &networks[fold_of(v)];
            let predicted = recs
                .iter()
                .zip(&features[v])
                .map(|(r, f)| {
                    let rank = nn::predict_class(net, f)?;
                    Ok(r.utilities.preference_order()[rank])
                })
                .collect::<Result<Vec<_>, EvalError>>()?;
            Ok(VoterResult {
                predicted,
                defaulted: false,
                fitted: None,
            })
        })
        .collect()
}

fn modal_bucket(recs: &[VoteRecord]) -> &'static str {
    let mut counts = [0usize; 4];
    for r in recs {
        let b = poll_size_bucket(r.poll.n());
        counts[POLL_BUCKETS
            .iter()
            .position(|&x| x == b)
            .expect("known bucket")] += 1;
    }
    let mut best = 0;
    for i in 1..4 {
        if counts[i] > counts[best] {
            best = i;
        }
    }
    POLL_BUCKETS[best]
}

fn assemble(
    family: Family,
    mode: Mode,
    m: usize,
    voters: &[Vec<VoteRecord>],
    results: &[VoterResult],
    cfg: &EvalConfig,
) -> EvaluationReport {
    let mut overall = Slice::new("total", m);
    let mut scenarios: Vec<Slice> = Scenario::ALL
        .iter()
        .map(|s| Slice::new(s.label(), m))
        .chain(std::iter::once(Slice::new(UNCLASSIFIED, m)))
        .collect();
    let mut errors: Vec<ErrorCounts> = scenarios
        .iter()
        .map(|s| ErrorCounts::named(&s.label))
        .collect();
    let mut poll_sizes: Vec<Slice> = POLL_BUCKETS.iter().map(|b| Slice::new(b, m)).collect();
    let mut per_voter = Vec::with_capacity(voters.len());
    let mut predictions = Vec::new();
    let mut parameters = Vec::new();
    let mut defaulted_voters = Vec::new();
    let has_parameters = !matches!(
        family,
        Family::Truth | Family::BestResponse | Family::NeuralNet
    );

    for (recs, res) in voters.iter().zip(results) {
        let id = recs[0].voter_id.clone();
        if res.defaulted {
            defaulted_voters.push(id.clone());
        }
        if has_parameters {
            if let Some(model) = res.fitted {
                parameters.push(FittedParameters {
                    voter_id: id.clone(),
                    bucket: modal_bucket(recs).to_string(),
                    model,
                });
            }
        }
        let inconsistent = find_inconsistent(recs);
        let mut own = Slice::new(&id, m);
        for (i, (r, &pred)) in recs.iter().zip(&res.predicted).enumerate() {
            let actual = r.utilities.rank_of(r.action);
            let predicted = r.utilities.rank_of(pred);
            let s_index = classify_scenario(&r.utilities, &r.poll)
                .map(Scenario::index)
                .unwrap_or(Scenario::ALL.len());
            overall.add(actual, predicted);
            own.add(actual, predicted);
            scenarios[s_index].add(actual, predicted);
            let b = POLL_BUCKETS
                .iter()
                .position(|&x| x == poll_size_bucket(r.poll.n()))
                .expect("known bucket");
            poll_sizes[b].add(actual, predicted);
            let e = &mut errors[s_index];
            if pred == r.action {
                e.correct += 1;
            } else if is_unjustified(&r.utilities, &r.poll, r.action) {
                e.unjustified += 1;
            } else if inconsistent.contains(&i) {
                e.inconsistent += 1;
            } else {
                e.unexplained += 1;
            }
            predictions.push(Prediction {
                voter_id: id.clone(),
                round: r.round,
                actual: r.action,
                predicted: pred,
            });
        }
        own.finish();
        let prof = profile(recs, &cfg.thresholds);
        let metrics = own.metrics.expect("voter has records");
        per_voter.push(VoterScore {
            voter_id: id,
            records: recs.len(),
            category: VoterCategory::of(&prof),
            f_measure: metrics.weighted_f,
            accuracy: metrics.accuracy,
        });
    }
    overall.finish();
    scenarios.iter_mut().for_each(Slice::finish);
    poll_sizes.iter_mut().for_each(Slice::finish);
    EvaluationReport {
        family,
        mode,
        records: overall.samples as usize,
        voters: voters.len(),
        defaulted_voters,
        overall,
        scenarios,
        poll_sizes,
        per_voter,
        errors,
        parameters,
        predictions,
    }
}

/// Fits every voter on all of their records.
pub fn fit_all(
    family: Family,
    ds: &Dataset,
    cfg: &EvalConfig,
) -> Result<BTreeMap<String, Model>, EvalError> {
    let report = upper_bound_evaluate(family, ds, cfg)?;
    Ok(report
        .parameters
        .into_iter()
        .map(|p| (p.voter_id, p.model))
        .collect())
}

//! Black-box baseline: a single-hidden-layer feed-forward classifier over
//! hand-built record and voter features.
//!
//! Classes are preference ranks (`Q`, `Q'`, `Q''`), so a prediction is mapped
//! back to a candidate through the voter's utilities.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::{classify_scenario, AbstractAction, Scenario, VoterProfile, VoterType};
use crate::election::Candidate;
use crate::models::preference_triple;
use crate::record::VoteRecord;

/// Number of entries produced by [`extract_features`].
pub const FEATURE_LEN: usize = 27;
pub const NUM_CLASSES: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("features are defined for 3 candidates, got {0}")]
    NotThreeCandidates(usize),
    #[error("expected {expected} features, got {got}")]
    FeatureLength { expected: usize, got: usize },
    #[error("label {0} is not a class")]
    BadLabel(usize),
    #[error("loss became non-finite at epoch {epoch} (last finite loss {last})")]
    NonFiniteLoss { epoch: usize, last: f64 },
    #[error("no training samples")]
    NoSamples,
}

/// Feature layout, in order, with `Q`, `Q'`, `Q''` the voter's preference
/// ranks and `n` the poll size:
///
/// | slots | content |
/// |---|---|
/// | 0..3 | poll share of `Q`, `Q'`, `Q''` |
/// | 3..6 | gaps `Q-Q'`, `Q-Q''`, `Q'-Q''` over `n` |
/// | 6..9 | utilities of `Q`, `Q'`, `Q''` over the largest utility |
/// | 9 | leader score minus `Q` score, over `n` |
/// | 10..16 | scenario one-hot A..F (all zero when the poll has ties) |
/// | 16..20 | A-ratios: truthful, compromise, leader-second, leader-last |
/// | 20..24 | presence flags of those ratios |
/// | 24..27 | voter type one-hot TRT, LB, OTHER |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Builds the feature vector of `record`. `profile` must come from the
/// voter's training records only.
pub fn extract_features(
    record: &VoteRecord,
    profile: &VoterProfile,
) -> Result<FeatureVector, NnError> {
    let m = record.num_candidates();
    if m != 3 {
        return Err(NnError::NotThreeCandidates(m));
    }
    let s = &record.poll;
    let u = &record.utilities;
    let q = preference_triple(u);
    let n = s.n();
    let norm = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
    let sc = |c: Candidate| s.score(c) as f64;

    let mut f = Vec::with_capacity(FEATURE_LEN);
    f.extend(q.iter().map(|&c| norm(sc(c))));
    f.push(norm(sc(q[0]) - sc(q[1])));
    f.push(norm(sc(q[0]) - sc(q[2])));
    f.push(norm(sc(q[1]) - sc(q[2])));
    let umax = u.of(q[0]);
    f.extend(
        q.iter()
            .map(|&c| if umax > 0.0 { u.of(c) / umax } else { 0.0 }),
    );
    f.push(norm(s.max_score() as f64 - sc(q[0])));

    let scenario = classify_scenario(u, s).ok();
    f.extend(
        Scenario::ALL
            .iter()
            .map(|&sc| if scenario == Some(sc) { 1.0 } else { 0.0 }),
    );
    let ratios: Vec<Option<f64>> = AbstractAction::ALL
        .iter()
        .map(|&a| profile.ratios.get(a).ratio())
        .collect();
    f.extend(ratios.iter().map(|r| r.unwrap_or(0.0)));
    f.extend(ratios.iter().map(|r| if r.is_some() { 1.0 } else { 0.0 }));
    f.extend(
        VoterType::ALL
            .iter()
            .map(|&t| if profile.voter_type == t { 1.0 } else { 0.0 }),
    );
    debug_assert_eq!(f.len(), FEATURE_LEN);
    Ok(FeatureVector(f))
}

/// Class label of a record: the preference rank of the vote.
pub fn label_of(record: &VoteRecord) -> usize {
    let q = preference_triple(&record.utilities);
    q.iter().position(|&c| c == record.action).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 3,
            epochs: 500,
            learning_rate: 0.1,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Sigmoid hidden layer, softmax output. Weight matrices are row-major with
/// one row per receiving unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| libm::exp(v - zmax)).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

impl Network {
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Self {
            inputs,
            hidden,
            outputs,
            w1: vec![0.0; hidden * inputs],
            b1: vec![0.0; hidden],
            w2: vec![0.0; outputs * hidden],
            b2: vec![0.0; outputs],
        }
    }

    /// Weights drawn uniformly from [-0.5, 0.5].
    pub fn random(inputs: usize, hidden: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros(inputs, hidden, outputs);
        for p in net.params_mut() {
            *p = rng.random_range(-0.5..=0.5);
        }
        net
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn param(&self, i: usize) -> f64 {
        *self.params().nth(i).expect("parameter index in range")
    }

    pub fn set_param(&mut self, i: usize, v: f64) {
        *self.params_mut().nth(i).expect("parameter index in range") = v;
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        if x.len() != self.inputs {
            return Err(NnError::FeatureLength {
                expected: self.inputs,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.inputs..(j + 1) * self.inputs];
                sigmoid(self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            })
            .collect()
    }

    fn output_probs(&self, h: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = (0..self.outputs)
            .map(|k| {
                let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
                self.b2[k] + row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        softmax(&z)
    }

    /// Softmax class probabilities.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(x)?;
        Ok(self.output_probs(&self.hidden_activations(x)))
    }

    /// Mean cross-entropy plus `l2 / 2` times the squared weights (biases
    /// are not penalized).
    pub fn loss(&self, data: &[Sample], l2: f64) -> Result<f64, NnError> {
        if data.is_empty() {
            return Err(NnError::NoSamples);
        }
        let mut total = 0.0;
        for s in data {
            check_label(s.label, self.outputs)?;
            let p = self.forward(&s.features)?;
            total -= libm::log(p[s.label]);
        }
        let reg: f64 = self.w1.iter().chain(&self.w2).map(|w| w * w).sum();
        Ok(total / data.len() as f64 + 0.5 * l2 * reg)
    }

    /// Gradient of [`Network::loss`] by backpropagation, in the same shape
    /// as the network.
    pub fn gradient(&self, data: &[Sample], l2: f64) -> Result<Network, NnError> {
        if data.is_empty() {
            return Err(NnError::NoSamples);
        }
        let mut g = Network::zeros(self.inputs, self.hidden, self.outputs);
        let scale = 1.0 / data.len() as f64;
        for s in data {
            check_label(s.label, self.outputs)?;
            self.check_input(&s.features)?;
            let h = self.hidden_activations(&s.features);
            let p = self.output_probs(&h);
            let dz: Vec<f64> = (0..self.outputs)
                .map(|k| p[k] - if k == s.label { 1.0 } else { 0.0 })
                .collect();
            for k in 0..self.outputs {
                g.b2[k] += scale * dz[k];
                for j in 0..self.hidden {
                    g.w2[k * self.hidden + j] += scale * dz[k] * h[j];
                }
            }
            for j in 0..self.hidden {
                let back: f64 = (0..self.outputs)
                    .map(|k| dz[k] * self.w2[k * self.hidden + j])
                    .sum();
                let da = back * h[j] * (1.0 - h[j]);
                g.b1[j] += scale * da;
                for (i, x) in s.features.iter().enumerate() {
                    g.w1[j * self.inputs + i] += scale * da * x;
                }
            }
        }
        for (gw, w) in g.w1.iter_mut().zip(&self.w1) {
            *gw += l2 * w;
        }
        for (gw, w) in g.w2.iter_mut().zip(&self.w2) {
            *gw += l2 * w;
        }
        Ok(g)
    }
}

fn check_label(label: usize, outputs: usize) -> Result<(), NnError> {
    if label >= outputs {
        Err(NnError::BadLabel(label))
    } else {
        Ok(())
    }
}

/// Training run with the loss after each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub network: Network,
    pub losses: Vec<f64>,
}

/// Full-batch gradient descent on cross-entropy from a seeded random
/// initialization.
pub fn train(data: &[Sample], cfg: &TrainConfig) -> Result<TrainOutcome, NnError> {
    let first = data.first().ok_or(NnError::NoSamples)?;
    let mut net = Network::random(first.features.len(), cfg.hidden, NUM_CLASSES, cfg.seed);
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut last = net.loss(data, cfg.l2)?;
    for epoch in 0..cfg.epochs {
        let g = net.gradient(data, cfg.l2)?;
        for (p, d) in net.params_mut().zip(g.params()) {
            *p -= cfg.learning_rate * d;
        }
        let loss = net.loss(data, cfg.l2)?;
        if !loss.is_finite() {
            return Err(NnError::NonFiniteLoss { epoch, last });
        }
        losses.push(loss);
        last = loss;
    }
    Ok(TrainOutcome {
        network: net,
        losses,
    })
}

/// Most probable class; ties go to the lowest index.
pub fn predict_class(net: &Network, features: &[f64]) -> Result<usize, NnError> {
    let p = net.forward(features)?;
    let mut best = 0;
    for k in 1..p.len() {
        if p[k] > p[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Predicted vote of `record` as a candidate.
pub fn predict(
    net: &Network,
    record: &VoteRecord,
    profile: &VoterProfile,
) -> Result<Candidate, NnError> {
    let f = extract_features(record, profile)?;
    let rank = predict_class(net, f.values())?;
    Ok(preference_triple(&record.utilities)[rank])
}

/// Largest relative difference between the backpropagated gradient and a
/// fourth-order central finite difference with step `h`.
pub fn gradient_check(net: &Network, data: &[Sample], l2: f64, h: f64) -> Result<f64, NnError> {
    let g = net.gradient(data, l2)?;
    let analytic: Vec<f64> = g.params().copied().collect();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = net.param(i);
        let mut at = |d: f64| {
            probe.set_param(i, orig + d);
            probe.loss(data, l2)
        };
        let numeric = (at(-2.0 * h)? - 8.0 * at(-h)? + 8.0 * at(h)? - at(2.0 * h)?) / (12.0 * h);
        probe.set_param(i, orig);
        let denom = libm::fmax(libm::fabs(a) + libm::fabs(numeric), 1e-7);
        worst = worst.max(libm::fabs(a - numeric) / denom);
    }
    Ok(worst)
}

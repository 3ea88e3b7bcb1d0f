//! The decision-model catalogue.
//!
//! Every model is a deterministic function from a voter's utilities and the
//! poll they see to the candidate they vote for. Tie-breaking is fixed
//! throughout: higher utility first, then lower candidate index, unless a
//! model documents otherwise.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::election::{
    outcome_with_vote, winner_set_utility, Candidate, ElectionError, Poll, Utility,
};
use crate::pivot::{self, CvConfig, PivotError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecideError {
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("the TMG model is defined for 3 candidates, got {0}")]
    TmgNeedsThreeCandidates(usize),
    #[error("NN descriptors need a trained network; use the nn module")]
    NeedsTrainedNetwork,
    #[error(transparent)]
    Pivot(#[from] PivotError),
}

/// Model families, named as in reports and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "TRUTH")]
    Truth,
    #[serde(rename = "BR")]
    BestResponse,
    #[serde(rename = "PRAG")]
    Pragmatist,
    #[serde(rename = "CV")]
    CalculusOfVoting,
    #[serde(rename = "LD")]
    LocalDominance,
    #[serde(rename = "LDLB")]
    LeaderBiasedLd,
    #[serde(rename = "TMG")]
    Tmg,
    #[serde(rename = "AU")]
    AttainabilityUtility,
    #[serde(rename = "NN")]
    NeuralNet,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::Truth,
        Family::BestResponse,
        Family::Pragmatist,
        Family::CalculusOfVoting,
        Family::LocalDominance,
        Family::LeaderBiasedLd,
        Family::Tmg,
        Family::AttainabilityUtility,
        Family::NeuralNet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Truth => "TRUTH",
            Family::BestResponse => "BR",
            Family::Pragmatist => "PRAG",
            Family::CalculusOfVoting => "CV",
            Family::LocalDominance => "LD",
            Family::LeaderBiasedLd => "LDLB",
            Family::Tmg => "TMG",
            Family::AttainabilityUtility => "AU",
            Family::NeuralNet => "NN",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.name() == upper || (upper == "LD+LB" && *f == Family::LeaderBiasedLd))
            .ok_or_else(|| alloc::format!("unknown model family `{s}`"))
    }
}

/// Voter types of the type-based (TMG) model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TmgType {
    /// Always truthful.
    #[serde(rename = "TRT")]
    Trt,
    /// Compromises to the second preference when the favorite polls last.
    #[serde(rename = "CMP")]
    Cmp,
    /// Like CMP, and also votes the second preference when it leads the poll.
    #[serde(rename = "LB")]
    Lb,
}

impl TmgType {
    pub const ALL: [TmgType; 3] = [TmgType::Trt, TmgType::Cmp, TmgType::Lb];

    pub fn name(self) -> &'static str {
        match self {
            TmgType::Trt => "TRT",
            TmgType::Cmp => "CMP",
            TmgType::Lb => "LB",
        }
    }
}

impl FromStr for TmgType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TRT" => Ok(TmgType::Trt),
            "CMP" => Ok(TmgType::Cmp),
            "LB" => Ok(TmgType::Lb),
            _ => Err(alloc::format!("unknown voter type `{s}`")),
        }
    }
}

/// Believed electorate size for the calculus-of-voting model: either a fixed
/// value or "the poll's own participant count".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Eta {
    Fixed(u64),
    PollSize,
}

impl Eta {
    pub fn resolve(self, poll: &Poll) -> u64 {
        match self {
            Eta::Fixed(e) => e,
            Eta::PollSize => poll.n().max(1),
        }
    }
}

impl fmt::Display for Eta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Eta::Fixed(e) => write!(f, "{e}"),
            Eta::PollSize => f.write_str("n"),
        }
    }
}

impl FromStr for Eta {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("n") {
            return Ok(Eta::PollSize);
        }
        s.parse::<u64>()
            .map(Eta::Fixed)
            .map_err(|_| alloc::format!("eta must be a positive integer or `n`, got `{s}`"))
    }
}

impl Serialize for Eta {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Eta::Fixed(e) => serializer.serialize_u64(*e),
            Eta::PollSize => serializer.serialize_str("n"),
        }
    }
}

impl<'de> Deserialize<'de> for Eta {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(e) => Ok(Eta::Fixed(e)),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A model family together with its voter-specific parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum Model {
    #[serde(rename = "TRUTH")]
    Truth,
    #[serde(rename = "BR")]
    BestResponse,
    #[serde(rename = "PRAG")]
    Pragmatist { k: usize },
    #[serde(rename = "CV")]
    CalculusOfVoting { eta: Eta },
    #[serde(rename = "LD")]
    LocalDominance { r: f64 },
    #[serde(rename = "LDLB")]
    LeaderBiasedLd { r: f64 },
    #[serde(rename = "TMG")]
    Tmg {
        #[serde(rename = "type")]
        voter_type: TmgType,
    },
    #[serde(rename = "AU")]
    AttainabilityUtility { alpha: f64, beta: f64 },
    #[serde(rename = "NN")]
    NeuralNet,
}

impl Model {
    pub fn family(&self) -> Family {
        match self {
            Model::Truth => Family::Truth,
            Model::BestResponse => Family::BestResponse,
            Model::Pragmatist { .. } => Family::Pragmatist,
            Model::CalculusOfVoting { .. } => Family::CalculusOfVoting,
            Model::LocalDominance { .. } => Family::LocalDominance,
            Model::LeaderBiasedLd { .. } => Family::LeaderBiasedLd,
            Model::Tmg { .. } => Family::Tmg,
            Model::AttainabilityUtility { .. } => Family::AttainabilityUtility,
            Model::NeuralNet => Family::NeuralNet,
        }
    }

    /// Checks parameter ranges for an election with `m` candidates.
    pub fn validate(&self, m: usize) -> Result<(), DecideError> {
        let bad = |msg: String| Err(DecideError::InvalidParameter(msg));
        match *self {
            Model::Pragmatist { k } if k == 0 || k > m => {
                bad(alloc::format!("k = {k} outside [1, {m}]"))
            }
            Model::CalculusOfVoting { eta: Eta::Fixed(0) } => bad("eta must be >= 1".to_string()),
            Model::LocalDominance { r } | Model::LeaderBiasedLd { r }
                if !(0.0..=1.0).contains(&r) =>
            {
                bad(alloc::format!("r = {r} outside [0, 1]"))
            }
            Model::Tmg { .. } if m != 3 => Err(DecideError::TmgNeedsThreeCandidates(m)),
            Model::AttainabilityUtility { alpha, beta } => {
                if !(0.0..=2.0).contains(&alpha) {
                    bad(alloc::format!("alpha = {alpha} outside [0, 2]"))
                } else if !(beta >= 0.0 && beta.is_finite()) {
                    bad(alloc::format!("beta = {beta} must be finite and >= 0"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Pragmatist { k } => write!(f, "PRAG(k={k})"),
            Model::CalculusOfVoting { eta } => write!(f, "CV(eta={eta})"),
            Model::LocalDominance { r } => write!(f, "LD(r={r})"),
            Model::LeaderBiasedLd { r } => write!(f, "LDLB(r={r})"),
            Model::Tmg { voter_type } => write!(f, "TMG({})", voter_type.name()),
            Model::AttainabilityUtility { alpha, beta } => {
                write!(f, "AU(alpha={alpha},beta={beta})")
            }
            other => f.write_str(other.family().name()),
        }
    }
}

/// Constants of the attainability-utility heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuConfig {
    pub epsilon: f64,
}

impl Default for AuConfig {
    fn default() -> Self {
        Self { epsilon: 0.001 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DecisionConfig {
    pub au: AuConfig,
    pub cv: CvConfig,
}

/// Picks the candidate with the largest key; ties go to higher utility, then
/// lower index.
pub(crate) fn argmax_by_key(
    u: &Utility,
    candidates: impl IntoIterator<Item = Candidate>,
    key: impl Fn(Candidate) -> f64,
) -> Candidate {
    let mut best: Option<(Candidate, f64)> = None;
    for c in candidates {
        let k = key(c);
        best = match best {
            None => Some((c, k)),
            Some((b, bk)) => {
                if k > bk || (k == bk && u.of(c) > u.of(b)) {
                    Some((c, k))
                } else {
                    Some((b, bk))
                }
            }
        };
    }
    best.expect("at least one candidate").0
}

fn most_preferred(u: &Utility, candidates: impl IntoIterator<Item = Candidate>) -> Candidate {
    argmax_by_key(u, candidates, |_| 0.0)
}

pub fn decide_truth(u: &Utility) -> Candidate {
    u.favorite()
}

/// Best response to the poll taken as the exact votes of everyone else.
pub fn decide_best_response(u: &Utility, s: &Poll) -> Candidate {
    argmax_by_key(u, s.candidates(), |c| {
        winner_set_utility(u, &outcome_with_vote(s, c))
    })
}

/// The `k` highest-scoring candidates; score ties at the cut keep lower indices.
pub fn top_k(s: &Poll, k: usize) -> Vec<Candidate> {
    let mut order: Vec<Candidate> = s.candidates().collect();
    order.sort_by(|a, b| s.score(*b).cmp(&s.score(*a)).then(a.0.cmp(&b.0)));
    order.truncate(k);
    order
}

pub fn decide_pragmatist(u: &Utility, s: &Poll, k: usize) -> Candidate {
    most_preferred(u, top_k(s, k))
}

/// Favorite, second and last preference of a three-candidate voter.
pub fn preference_triple(u: &Utility) -> [Candidate; 3] {
    let order = u.preference_order();
    [order[0], order[1], order[2]]
}

pub fn decide_tmg(u: &Utility, s: &Poll, voter_type: TmgType) -> Result<Candidate, DecideError> {
    let m = s.num_candidates();
    if m != 3 || u.num_candidates() != 3 {
        return Err(DecideError::TmgNeedsThreeCandidates(m));
    }
    let [q, q2, q3] = preference_triple(u);
    let favorite_last = s.score(q) < s.score(q2) && s.score(q) < s.score(q3);
    let second_leads = s.score(q2) > s.score(q) && s.score(q2) > s.score(q3);
    Ok(match voter_type {
        TmgType::Trt => q,
        TmgType::Cmp if favorite_last => q2,
        TmgType::Cmp => q,
        TmgType::Lb if second_leads || favorite_last => q2,
        TmgType::Lb => q,
    })
}

// Absorbs rounding in 2*r*n so that grid values such as r = 0.05 hit
// integer boundaries exactly.
const LD_SLACK: f64 = 1e-9;

/// Candidates that may still win when every score can move by up to `r * n`.
pub fn possible_winners(s: &Poll, r: f64) -> Vec<Candidate> {
    let max = s.max_score();
    let reach = 2.0 * r * s.n() as f64 + LD_SLACK;
    s.candidates()
        .filter(|&c| (max - s.score(c)) as f64 <= reach)
        .collect()
}

/// Undominated candidates under local dominance with uncertainty `r`.
pub fn undominated_set(u: &Utility, s: &Poll, r: f64) -> Vec<Candidate> {
    let mut w = possible_winners(s, r);
    if w.len() < 2 {
        return s.candidates().collect();
    }
    // least preferred; equal utilities resolve to the higher index
    let mut worst = 0;
    for (i, &c) in w.iter().enumerate() {
        if u.of(c) <= u.of(w[worst]) {
            worst = i;
        }
    }
    w.remove(worst);
    w
}

pub fn decide_ld(u: &Utility, s: &Poll, r: f64) -> Candidate {
    most_preferred(u, undominated_set(u, s, r))
}

/// Local dominance with leader bias: votes the sole possible winner when
/// there is only one.
pub fn decide_ld_lb(u: &Utility, s: &Poll, r: f64) -> Candidate {
    let w = possible_winners(s, r);
    if w.len() == 1 {
        w[0]
    } else {
        decide_ld(u, s, r)
    }
}

/// Logistic attainability of `c`, centered at the uniform share `1/m`.
pub fn attainability(c: Candidate, s: &Poll, beta: f64) -> f64 {
    let gap = s.share(c) - 1.0 / s.num_candidates() as f64;
    1.0 / (1.0 + libm::exp(-beta * gap))
}

/// Weighted geometric combination of utility and attainability.
pub fn au_score(u: &Utility, s: &Poll, c: Candidate, alpha: f64, beta: f64, cfg: &AuConfig) -> f64 {
    let eps = cfg.epsilon;
    libm::pow(eps + u.of(c), alpha) * libm::pow(eps + attainability(c, s, beta), 2.0 - alpha)
}

pub fn decide_au(u: &Utility, s: &Poll, alpha: f64, beta: f64, cfg: &AuConfig) -> Candidate {
    argmax_by_key(u, s.candidates(), |c| au_score(u, s, c, alpha, beta, cfg))
}

/// Dispatches `model` with default constants.
pub fn decide(model: &Model, u: &Utility, s: &Poll) -> Result<Candidate, DecideError> {
    decide_with(model, u, s, &DecisionConfig::default())
}

pub fn decide_with(
    model: &Model,
    u: &Utility,
    s: &Poll,
    cfg: &DecisionConfig,
) -> Result<Candidate, DecideError> {
    u.ensure_matches(s)?;
    model.validate(s.num_candidates())?;
    Ok(match *model {
        Model::Truth => decide_truth(u),
        Model::BestResponse => decide_best_response(u, s),
        Model::Pragmatist { k } => decide_pragmatist(u, s, k),
        Model::CalculusOfVoting { eta } => pivot::decide_cv(u, s, eta.resolve(s), &cfg.cv)?,
        Model::LocalDominance { r } => decide_ld(u, s, r),
        Model::LeaderBiasedLd { r } => decide_ld_lb(u, s, r),
        Model::Tmg { voter_type } => decide_tmg(u, s, voter_type)?,
        Model::AttainabilityUtility { alpha, beta } => decide_au(u, s, alpha, beta, &cfg.au),
        Model::NeuralNet => return Err(DecideError::NeedsTrainedNetwork),
    })
}

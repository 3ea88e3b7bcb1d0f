//! Candidates, polls, utilities and the Plurality rule.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElectionError {
    #[error("an election needs at least 2 candidates, got {0}")]
    TooFewCandidates(usize),
    #[error("utility for candidate {index} is {value}; utilities must be finite and non-negative")]
    InvalidUtility { index: usize, value: f64 },
    #[error("poll has {poll} candidates but utilities have {utility}")]
    LengthMismatch { poll: usize, utility: usize },
    #[error("candidate index {index} out of range for {m} candidates")]
    CandidateOutOfRange { index: usize, m: usize },
}

/// A candidate, identified by its zero-based index. Displayed 1-based as `q1`, `q2`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Candidate(pub usize);

impl Candidate {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0 + 1)
    }
}

/// Poll scores shown to a voter, together with the participant count `n`.
///
/// `n` normally equals the score sum. It is stored separately so that
/// ingested data can keep a reported participant count that differs from
/// the displayed (rounded) scores.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Poll {
    scores: Vec<u64>,
    n: u64,
}

impl Poll {
    pub fn new(scores: Vec<u64>) -> Result<Self, ElectionError> {
        let n = scores.iter().sum();
        Self::with_n(scores, n)
    }

    pub fn with_n(scores: Vec<u64>, n: u64) -> Result<Self, ElectionError> {
        if scores.len() < 2 {
            return Err(ElectionError::TooFewCandidates(scores.len()));
        }
        Ok(Self { scores, n })
    }

    #[inline]
    pub fn scores(&self) -> &[u64] {
        &self.scores
    }

    #[inline]
    pub fn score(&self, c: Candidate) -> u64 {
        self.scores[c.0]
    }

    #[inline]
    pub fn n(&self) -> u64 {
        self.n
    }

    #[inline]
    pub fn num_candidates(&self) -> usize {
        self.scores.len()
    }

    pub fn candidates(&self) -> impl Iterator<Item = Candidate> {
        (0..self.scores.len()).map(Candidate)
    }

    pub fn max_score(&self) -> u64 {
        self.scores.iter().copied().max().unwrap_or(0)
    }

    /// Normalized score `s(c) / n`; zero when `n` is zero.
    pub fn share(&self, c: Candidate) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.scores[c.0] as f64 / self.n as f64
        }
    }

    /// The candidate with the highest score, lowest index on ties.
    pub fn leader(&self) -> Candidate {
        let mut best = 0;
        for (i, &s) in self.scores.iter().enumerate() {
            if s > self.scores[best] {
                best = i;
            }
        }
        Candidate(best)
    }

    pub fn check_candidate(&self, c: Candidate) -> Result<(), ElectionError> {
        if c.0 < self.scores.len() {
            Ok(())
        } else {
            Err(ElectionError::CandidateOutOfRange {
                index: c.0,
                m: self.scores.len(),
            })
        }
    }
}

/// Cardinal utilities over candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Utility {
    values: Vec<f64>,
}

impl Utility {
    pub fn new(values: Vec<f64>) -> Result<Self, ElectionError> {
        if values.len() < 2 {
            return Err(ElectionError::TooFewCandidates(values.len()));
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(ElectionError::InvalidUtility { index, value });
        }
        Ok(Self { values })
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn of(&self, c: Candidate) -> f64 {
        self.values[c.0]
    }

    #[inline]
    pub fn num_candidates(&self) -> usize {
        self.values.len()
    }

    /// Candidates ordered from most to least preferred; equal utilities keep
    /// index order.
    pub fn preference_order(&self) -> Vec<Candidate> {
        let mut order: Vec<Candidate> = (0..self.values.len()).map(Candidate).collect();
        order.sort_by(|a, b| {
            self.values[b.0]
                .partial_cmp(&self.values[a.0])
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        order
    }

    /// Position of `c` in [`Utility::preference_order`] (0 = most preferred).
    pub fn rank_of(&self, c: Candidate) -> usize {
        self.preference_order()
            .iter()
            .position(|&x| x == c)
            .expect("candidate in range")
    }

    /// Most preferred candidate, lowest index on ties.
    pub fn favorite(&self) -> Candidate {
        self.preference_order()[0]
    }

    pub fn ensure_matches(&self, poll: &Poll) -> Result<(), ElectionError> {
        if self.values.len() == poll.num_candidates() {
            Ok(())
        } else {
            Err(ElectionError::LengthMismatch {
                poll: poll.num_candidates(),
                utility: self.values.len(),
            })
        }
    }
}

impl TryFrom<Vec<f64>> for Utility {
    type Error = ElectionError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Utility::new(values)
    }
}

impl From<Utility> for Vec<f64> {
    fn from(u: Utility) -> Self {
        u.values
    }
}

/// A non-empty set of co-winners, kept sorted by index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WinnerSet(Vec<Candidate>);

impl WinnerSet {
    pub fn members(&self) -> &[Candidate] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, c: Candidate) -> bool {
        self.0.binary_search(&c).is_ok()
    }
}

fn argmax_set(scores: &[u64]) -> WinnerSet {
    let max = scores.iter().copied().max().unwrap_or(0);
    WinnerSet(
        scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == max)
            .map(|(i, _)| Candidate(i))
            .collect(),
    )
}

/// All candidates attaining the maximal score.
pub fn plurality_winners(poll: &Poll) -> WinnerSet {
    argmax_set(&poll.scores)
}

/// Plurality outcome once one extra vote is cast for `c`.
pub fn outcome_with_vote(poll: &Poll, c: Candidate) -> WinnerSet {
    let sc = poll.scores[c.0] + 1;
    let max_other = poll
        .scores
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != c.0)
        .map(|(_, &s)| s)
        .max()
        .unwrap_or(0);
    if sc > max_other {
        return WinnerSet(vec![c]);
    }
    let mut scores = poll.scores.clone();
    scores[c.0] = sc;
    argmax_set(&scores)
}

/// Mean utility of the members of `w`.
pub fn winner_set_utility(u: &Utility, w: &WinnerSet) -> f64 {
    let total: f64 = w.0.iter().map(|&c| u.of(c)).sum();
    total / w.0.len() as f64
}

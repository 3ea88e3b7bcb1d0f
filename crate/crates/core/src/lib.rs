//! Decision models for a single voter facing a Plurality election with poll
//! information.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the pure
//! algorithmic pieces: election primitives, the decision-model catalogue,
//! pivot probabilities for the calculus of voting, behavioral classification,
//! confusion-matrix metrics, grid fitting and a small feed-forward classifier.
//! File formats, the synthetic generator and the evaluation harness live in
//! the `stratvote` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

pub mod behavior;
pub mod election;
pub mod fit;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod pivot;
pub mod record;
pub mod seed;

pub use election::{
    outcome_with_vote, plurality_winners, winner_set_utility, Candidate, ElectionError, Poll,
    Utility, WinnerSet,
};
pub use models::{decide, decide_with, DecideError, DecisionConfig, Eta, Family, Model, TmgType};
pub use record::VoteRecord;

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::election::{Candidate, Poll, Utility};

/// One observed decision: what a voter saw and what they voted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub voter_id: String,
    pub round: u32,
    pub poll: Poll,
    pub utilities: Utility,
    pub action: Candidate,
}

impl VoteRecord {
    pub fn num_candidates(&self) -> usize {
        self.poll.num_candidates()
    }
}

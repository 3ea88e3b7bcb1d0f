//! Behavioral classification of three-candidate records and voters.
//!
//! Candidates are relabeled by preference as `Q` (favorite), `Q'` and `Q''`.
//! A scenario is the strict order of those three in the poll.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::election::{Candidate, Poll, Utility};
use crate::models::preference_triple;
use crate::record::VoteRecord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BehaviorError {
    #[error("scenarios are defined for 3 candidates, got {0}")]
    NotThreeCandidates(usize),
    #[error("utilities are not strictly ordered")]
    TiedUtilities,
    #[error("poll scores of two candidates are tied")]
    TiedPoll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::A,
        Scenario::B,
        Scenario::C,
        Scenario::D,
        Scenario::E,
        Scenario::F,
    ];

    /// Poll order of the preference ranks, highest score first.
    pub fn rank_order(self) -> [usize; 3] {
        match self {
            Scenario::A => [0, 1, 2],
            Scenario::B => [0, 2, 1],
            Scenario::C => [1, 0, 2],
            Scenario::D => [2, 0, 1],
            Scenario::E => [1, 2, 0],
            Scenario::F => [2, 1, 0],
        }
    }

    pub fn from_rank_order(order: [usize; 3]) -> Option<Self> {
        Self::ALL.iter().copied().find(|s| s.rank_order() == order)
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::A => "Q > Q' > Q''",
            Scenario::B => "Q > Q'' > Q'",
            Scenario::C => "Q' > Q > Q''",
            Scenario::D => "Q'' > Q > Q'",
            Scenario::E => "Q' > Q'' > Q",
            Scenario::F => "Q'' > Q' > Q",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        ["A", "B", "C", "D", "E", "F"][self as usize]
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// `Q`, `Q'`, `Q''` for a voter with strictly ordered utilities.
pub fn relabel(u: &Utility) -> Result<[Candidate; 3], BehaviorError> {
    if u.num_candidates() != 3 {
        return Err(BehaviorError::NotThreeCandidates(u.num_candidates()));
    }
    let t = preference_triple(u);
    if u.of(t[0]) > u.of(t[1]) && u.of(t[1]) > u.of(t[2]) {
        Ok(t)
    } else {
        Err(BehaviorError::TiedUtilities)
    }
}

pub fn classify_scenario(u: &Utility, s: &Poll) -> Result<Scenario, BehaviorError> {
    if s.num_candidates() != 3 {
        return Err(BehaviorError::NotThreeCandidates(s.num_candidates()));
    }
    let ranks = relabel(u)?;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s.score(ranks[b]).cmp(&s.score(ranks[a])));
    let sc = |i: usize| s.score(ranks[order[i]]);
    if sc(0) == sc(1) || sc(1) == sc(2) {
        return Err(BehaviorError::TiedPoll);
    }
    Ok(Scenario::from_rank_order(order).expect("every permutation is a scenario"))
}

/// True when some more-preferred candidate polls at least as well as `a`.
pub fn is_unjustified(u: &Utility, s: &Poll, a: Candidate) -> bool {
    s.candidates()
        .any(|b| u.of(b) > u.of(a) && s.score(b) >= s.score(a))
}

/// Indices of records contradicted by another record of the same voter: a
/// different vote cast at a poll where the chosen candidate stood weakly
/// better and everyone else weakly worse.
pub fn find_inconsistent(records: &[VoteRecord]) -> Vec<usize> {
    let mut flagged = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let a = r.action;
        let hit = records.iter().enumerate().any(|(j, other)| {
            if i == j || other.action == a || other.num_candidates() != r.num_candidates() {
                return false;
            }
            let (s, t) = (&r.poll, &other.poll);
            t.score(a) >= s.score(a)
                && s.candidates()
                    .filter(|&c| c != a)
                    .all(|c| t.score(c) <= s.score(c))
        });
        if hit {
            flagged.push(i);
        }
    }
    flagged
}

/// Abstract actions whose availability depends on the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AbstractAction {
    /// Vote `Q`; available in every scenario.
    Truthful,
    /// Vote `Q'` while `Q` polls last (E, F).
    Compromise,
    /// Vote `Q'` while it leads and `Q` is not last (C).
    LeaderSecond,
    /// Vote `Q''` while it leads (D, F).
    LeaderLast,
}

impl AbstractAction {
    pub const ALL: [AbstractAction; 4] = [
        AbstractAction::Truthful,
        AbstractAction::Compromise,
        AbstractAction::LeaderSecond,
        AbstractAction::LeaderLast,
    ];

    pub fn available_in(self, scenario: Scenario) -> bool {
        use Scenario::*;
        match self {
            AbstractAction::Truthful => true,
            AbstractAction::Compromise => matches!(scenario, E | F),
            AbstractAction::LeaderSecond => scenario == C,
            AbstractAction::LeaderLast => matches!(scenario, D | F),
        }
    }

    /// Preference rank voted by this action.
    pub fn rank(self) -> usize {
        match self {
            AbstractAction::Truthful => 0,
            AbstractAction::Compromise | AbstractAction::LeaderSecond => 1,
            AbstractAction::LeaderLast => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RatioCount {
    pub selected: u32,
    pub available: u32,
}

impl RatioCount {
    /// `None` when the action was never available.
    pub fn ratio(&self) -> Option<f64> {
        (self.available > 0).then(|| f64::from(self.selected) / f64::from(self.available))
    }
}

/// Selected/available counts for every [`AbstractAction`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionRatios {
    pub truthful: RatioCount,
    pub compromise: RatioCount,
    pub leader_second: RatioCount,
    pub leader_last: RatioCount,
}

impl ActionRatios {
    pub fn get(&self, action: AbstractAction) -> &RatioCount {
        match action {
            AbstractAction::Truthful => &self.truthful,
            AbstractAction::Compromise => &self.compromise,
            AbstractAction::LeaderSecond => &self.leader_second,
            AbstractAction::LeaderLast => &self.leader_last,
        }
    }

    fn get_mut(&mut self, action: AbstractAction) -> &mut RatioCount {
        match action {
            AbstractAction::Truthful => &mut self.truthful,
            AbstractAction::Compromise => &mut self.compromise,
            AbstractAction::LeaderSecond => &mut self.leader_second,
            AbstractAction::LeaderLast => &mut self.leader_last,
        }
    }
}

/// Counts abstract actions over the classifiable records (three candidates,
/// strict utilities and a strict poll); other records are skipped.
pub fn action_ratios<'a>(records: impl IntoIterator<Item = &'a VoteRecord>) -> ActionRatios {
    let mut out = ActionRatios::default();
    for r in records {
        let Ok(scenario) = classify_scenario(&r.utilities, &r.poll) else {
            continue;
        };
        let rank = r.utilities.rank_of(r.action);
        for action in AbstractAction::ALL {
            if action.available_in(scenario) {
                let slot = out.get_mut(action);
                slot.available += 1;
                if action.rank() == rank {
                    slot.selected += 1;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VoterType {
    #[serde(rename = "TRT")]
    Trt,
    #[serde(rename = "LB")]
    Lb,
    #[serde(rename = "OTHER")]
    Other,
}

impl VoterType {
    pub const ALL: [VoterType; 3] = [VoterType::Trt, VoterType::Lb, VoterType::Other];

    pub fn name(self) -> &'static str {
        match self {
            VoterType::Trt => "TRT",
            VoterType::Lb => "LB",
            VoterType::Other => "OTHER",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeThresholds {
    pub truthful: f64,
    pub leader: f64,
}

impl Default for TypeThresholds {
    fn default() -> Self {
        Self {
            truthful: 0.9,
            leader: 0.5,
        }
    }
}

pub fn voter_type(ratios: &ActionRatios, th: &TypeThresholds) -> VoterType {
    if ratios.truthful.ratio().is_some_and(|r| r > th.truthful) {
        VoterType::Trt
    } else if ratios.leader_second.ratio().is_some_and(|r| r > th.leader) {
        VoterType::Lb
    } else {
        VoterType::Other
    }
}

/// Voters with at least this many unjustified actions count as unjustified.
pub const UNJUSTIFIED_VOTER_MIN: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoterProfile {
    pub voter_id: String,
    pub voter_type: VoterType,
    pub ratios: ActionRatios,
    pub unjustified_count: u32,
    pub inconsistent: bool,
}

impl VoterProfile {
    pub fn is_unjustified_voter(&self) -> bool {
        self.unjustified_count >= UNJUSTIFIED_VOTER_MIN
    }
}

/// Profile of one voter from their records.
pub fn profile(records: &[VoteRecord], th: &TypeThresholds) -> VoterProfile {
    let ratios = action_ratios(records);
    VoterProfile {
        voter_id: records
            .first()
            .map(|r| r.voter_id.clone())
            .unwrap_or_default(),
        voter_type: voter_type(&ratios, th),
        ratios,
        unjustified_count: records
            .iter()
            .filter(|r| is_unjustified(&r.utilities, &r.poll, r.action))
            .count() as u32,
        inconsistent: !find_inconsistent(records).is_empty(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::decide_truth;
    use proptest::prelude::*;

    fn u(v: &[f64]) -> Utility {
        Utility::new(v.to_vec()).unwrap()
    }

    fn p(v: &[u64]) -> Poll {
        Poll::new(v.to_vec()).unwrap()
    }

    fn rec(round: u32, s: &[u64], a: usize) -> VoteRecord {
        VoteRecord {
            voter_id: "v".into(),
            round,
            poll: p(s),
            utilities: u(&[10.0, 5.0, 0.0]),
            action: Candidate(a),
        }
    }

    #[test]
    fn scenario_examples() {
        let uu = u(&[10.0, 5.0, 0.0]);
        assert_eq!(
            classify_scenario(&uu, &p(&[80, 50, 30])).unwrap(),
            Scenario::A
        );
        assert_eq!(
            classify_scenario(&uu, &p(&[50, 80, 30])).unwrap(),
            Scenario::C
        );
        assert_eq!(
            classify_scenario(&uu, &p(&[30, 50, 80])).unwrap(),
            Scenario::F
        );
        assert_eq!(
            classify_scenario(&uu, &p(&[80, 30, 50])).unwrap(),
            Scenario::B
        );
        assert_eq!(
            classify_scenario(&uu, &p(&[50, 30, 80])).unwrap(),
            Scenario::D
        );
        assert_eq!(
            classify_scenario(&uu, &p(&[30, 80, 50])).unwrap(),
            Scenario::E
        );
        // relabeling follows utilities, not indices
        let perm = u(&[0.0, 10.0, 5.0]);
        assert_eq!(
            classify_scenario(&perm, &p(&[30, 50, 80])).unwrap(),
            Scenario::C
        );
        assert_eq!(
            classify_scenario(&uu, &p(&[50, 50, 30])),
            Err(BehaviorError::TiedPoll)
        );
        assert_eq!(
            classify_scenario(&u(&[5.0, 5.0, 0.0]), &p(&[1, 2, 3])),
            Err(BehaviorError::TiedUtilities)
        );
        assert_eq!(
            classify_scenario(&u(&[1.0, 2.0, 3.0, 4.0]), &p(&[1, 2, 3, 4])),
            Err(BehaviorError::NotThreeCandidates(4))
        );
    }

    #[test]
    fn unjustified_examples() {
        let uu = u(&[10.0, 5.0, 0.0]);
        assert!(is_unjustified(&uu, &p(&[60, 50, 40]), Candidate(2)));
        assert!(!is_unjustified(&uu, &p(&[60, 50, 40]), Candidate(0)));
        assert!(!is_unjustified(&uu, &p(&[30, 50, 80]), Candidate(1)));
        // tied with a more preferred candidate counts as dominated
        assert!(is_unjustified(&uu, &p(&[50, 50, 40]), Candidate(1)));
    }

    #[test]
    fn inconsistency_examples() {
        let recs = vec![rec(1, &[50, 60, 40], 0), rec(2, &[55, 60, 40], 1)];
        // q2 kept its score while q1 gained, so the second record is flagged too
        assert_eq!(find_inconsistent(&recs), vec![0, 1]);
        let strict = vec![rec(1, &[50, 60, 40], 0), rec(2, &[55, 58, 35], 1)];
        assert_eq!(find_inconsistent(&strict), vec![0]);
        let same = vec![rec(1, &[50, 60, 40], 0), rec(2, &[55, 60, 40], 0)];
        assert!(find_inconsistent(&same).is_empty());
        assert!(find_inconsistent(&recs[..1]).is_empty());
    }

    #[test]
    fn ratio_examples() {
        let truthful: Vec<_> = (0..10)
            .map(|i| rec(i, &[30 + i as u64, 50, 80], 0))
            .collect();
        let r = action_ratios(&truthful);
        assert_eq!(r.truthful.ratio(), Some(1.0));
        assert_eq!(r.leader_second.ratio(), None);

        // three compromises out of six E/F rounds
        let mut recs = Vec::new();
        for i in 0..6u32 {
            let s: &[u64] = if i % 2 == 0 {
                &[10, 50, 30]
            } else {
                &[10, 30, 50]
            };
            recs.push(rec(i, s, if i < 3 { 1 } else { 0 }));
        }
        assert_eq!(action_ratios(&recs).compromise.ratio(), Some(0.5));
    }

    #[test]
    fn type_examples() {
        let th = TypeThresholds::default();
        let truthful: Vec<_> = (0..10)
            .map(|i| rec(i, &[30 + i as u64, 50, 80], 0))
            .collect();
        assert_eq!(profile(&truthful, &th).voter_type, VoterType::Trt);

        // leader whenever Q' leads (C, E), truthful otherwise
        let lb = vec![
            rec(0, &[50, 80, 30], 1),
            rec(1, &[50, 80, 20], 1),
            rec(2, &[10, 80, 30], 1),
            rec(3, &[80, 50, 30], 0),
            rec(4, &[50, 30, 80], 0),
        ];
        assert_eq!(profile(&lb, &th).voter_type, VoterType::Lb);

        let mixed = vec![
            rec(0, &[50, 80, 30], 0),
            rec(1, &[80, 50, 30], 2),
            rec(2, &[10, 30, 80], 1),
            rec(3, &[80, 50, 30], 0),
        ];
        assert_eq!(profile(&mixed, &th).voter_type, VoterType::Other);
    }

    #[test]
    fn profile_counts() {
        let recs = vec![
            rec(0, &[60, 50, 40], 2),
            rec(1, &[60, 50, 40], 1),
            rec(2, &[30, 50, 80], 1),
        ];
        let prof = profile(&recs, &TypeThresholds::default());
        assert_eq!(prof.unjustified_count, 2);
        assert!(prof.is_unjustified_voter());
    }

    proptest! {
        #[test]
        fn strict_polls_always_classify(
            perm in Just([0usize, 1, 2]).prop_shuffle(),
            a in 0u64..50, b in 1u64..50, c in 1u64..50,
        ) {
            let scores = [a, a + b, a + b + c];
            let mut poll = [0u64; 3];
            for (i, &pi) in perm.iter().enumerate() {
                poll[pi] = scores[i];
            }
            let uu = u(&[10.0, 5.0, 0.0]);
            let sc = classify_scenario(&uu, &p(&poll)).unwrap();
            let expected = {
                let mut order = [0usize, 1, 2];
                order.sort_by(|&x, &y| poll[y].cmp(&poll[x]));
                order
            };
            prop_assert_eq!(sc.rank_order(), expected);
        }

        #[test]
        fn truthful_vote_is_justified(sv in prop::collection::vec(0u64..30, 3)) {
            let uu = u(&[10.0, 5.0, 0.0]);
            let s = p(&sv);
            prop_assert!(!is_unjustified(&uu, &s, decide_truth(&uu)));
            // Q'' is unjustified unless it strictly outpolls everyone
            let q3 = Candidate(2);
            let strictly_leads = sv[2] > sv[0] && sv[2] > sv[1];
            prop_assert_eq!(is_unjustified(&uu, &s, q3), !strictly_leads);
        }

        #[test]
        fn inconsistency_ignores_order(
            polls in prop::collection::vec((prop::collection::vec(0u64..6, 3), 0usize..3), 1..7),
            rot in 0usize..7,
        ) {
            let recs: Vec<_> = polls.iter().enumerate().map(|(i, (s, a))| rec(i as u32, s, *a)).collect();
            let flagged: Vec<u32> = find_inconsistent(&recs).iter().map(|&i| recs[i].round).collect();
            let mut rotated = recs.clone();
            rotated.rotate_left(rot % recs.len());
            let mut flagged_rot: Vec<u32> = find_inconsistent(&rotated).iter().map(|&i| rotated[i].round).collect();
            flagged_rot.sort();
            let mut f = flagged.clone();
            f.sort();
            prop_assert_eq!(f, flagged_rot);
        }
    }
}

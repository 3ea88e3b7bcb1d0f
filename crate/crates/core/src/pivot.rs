//! Pivot probabilities and the calculus-of-voting decision.
//!
//! The voter believes the actual scores are `eta` votes drawn from a
//! multinomial whose probabilities are the poll shares. `P(x, y)` is the
//! probability that a vote for `y` turns `y` into a joint or unique winner
//! against `x`. Only the two two-way events are counted:
//!
//! * `x` is the unique winner and `y` trails it by exactly one vote, or
//! * `x` and `y` are the only co-winners.
//!
//! Events involving three or more tied candidates contribute nothing.
//!
//! The exact path never enumerates score vectors. It sums over the
//! two leading scores and folds the remaining candidates into a dynamic
//! program over conditional binomials, all in log space. Its admissibility
//! is still gated by the number of score compositions so that callers get a
//! predictable switch to the Monte-Carlo estimator.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::election::{Candidate, Poll, Utility};
use crate::models::argmax_by_key;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PivotError {
    #[error("believed electorate size must be at least 1")]
    ZeroEta,
    #[error("exact enumeration needs {compositions} compositions, over the budget of {budget}")]
    BudgetExceeded { compositions: u128, budget: u64 },
    #[error("pivot probability needs two distinct candidates")]
    SameCandidate,
    #[error("candidate index {index} out of range for {m} candidates")]
    CandidateOutOfRange { index: usize, m: usize },
    #[error("Monte-Carlo estimation needs at least one sample")]
    NoSamples,
}

/// How [`decide_cv`] computes pivot probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvConfig {
    /// Largest composition count `C(eta + m - 1, m - 1)` handled exactly.
    pub exact_budget: u64,
    pub mc_samples: u64,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            exact_budget: 10_000_000,
            mc_samples: 1_000_000,
            seed: 0,
        }
    }
}

/// Multinomial belief over actual scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    eta: u64,
    probs: Vec<f64>,
}

impl Belief {
    /// Vote probabilities are the poll's score shares. A poll with no votes
    /// at all carries no information and yields the uniform distribution.
    pub fn from_poll(poll: &Poll, eta: u64) -> Result<Self, PivotError> {
        if eta == 0 {
            return Err(PivotError::ZeroEta);
        }
        let total: u64 = poll.scores().iter().sum();
        let m = poll.num_candidates();
        let probs = if total == 0 {
            vec![1.0 / m as f64; m]
        } else {
            poll.scores()
                .iter()
                .map(|&s| s as f64 / total as f64)
                .collect()
        };
        Ok(Self { eta, probs })
    }

    pub fn eta(&self) -> u64 {
        self.eta
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_candidates(&self) -> usize {
        self.probs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PivotMethod {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

/// `P(x, y)` for every ordered pair, row `x`, column `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotTable {
    m: usize,
    entries: Vec<f64>,
    method: PivotMethod,
}

impl PivotTable {
    pub fn get(&self, x: Candidate, y: Candidate) -> f64 {
        self.entries[x.0 * self.m + y.0]
    }

    pub fn num_candidates(&self) -> usize {
        self.m
    }

    pub fn method(&self) -> PivotMethod {
        self.method
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().sum()
    }
}

/// `C(eta + m - 1, m - 1)`, saturating at `u128::MAX`.
pub fn composition_count(eta: u64, m: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 1..m as u128 {
        // C(eta+i, i) = C(eta+i-1, i-1) * (eta+i) / i, exact at every step
        c = match c.checked_mul(eta as u128 + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    c
}

fn ln_factorials(upto: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(upto as usize + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..=upto {
        acc += libm::log(k as f64);
        table.push(acc);
    }
    table
}

/// `k * ln(p)` with the convention `0 * ln(0) = 0`.
#[inline]
fn ln_pow(p: f64, k: u64) -> f64 {
    if k == 0 {
        0.0
    } else if p <= 0.0 {
        f64::NEG_INFINITY
    } else {
        k as f64 * libm::log(p)
    }
}

#[inline]
fn ln_binom_pmf(lnf: &[f64], r: u64, j: u64, q: f64) -> f64 {
    lnf[r as usize] - lnf[j as usize] - lnf[(r - j) as usize]
        + ln_pow(q, j)
        + ln_pow(1.0 - q, r - j)
}

/// Probability that `total` votes spread over `probs` (which sum to 1) leave
/// every candidate with fewer than `limit` votes.
fn all_below(probs: &[f64], total: u64, limit: u64, lnf: &[f64]) -> f64 {
    match probs.len() {
        0 => (total == 0) as u8 as f64,
        1 => (total < limit) as u8 as f64,
        k => {
            if total >= limit.saturating_mul(k as u64) {
                return 0.0;
            }
            // tail[i] = probability mass of candidates i.. ; conditional
            // binomial split of candidate i against the rest of the tail
            let mut tail = vec![0.0; k + 1];
            for i in (0..k).rev() {
                tail[i] = tail[i + 1] + probs[i];
            }
            let n = total as usize;
            // g[r]: candidates i.. all below limit given r votes among them
            let mut g: Vec<f64> = (0..=n).map(|r| ((r as u64) < limit) as u8 as f64).collect();
            for i in (0..k - 1).rev() {
                let q = if tail[i] > 0.0 {
                    (probs[i] / tail[i]).min(1.0)
                } else {
                    0.0
                };
                let rows: Vec<usize> = if i == 0 { vec![n] } else { (0..=n).collect() };
                let mut next = vec![0.0; n + 1];
                for r in rows {
                    let mut acc = 0.0;
                    for j in 0..=r.min(limit as usize - 1) {
                        let rest = g[r - j];
                        if rest > 0.0 {
                            acc += libm::exp(ln_binom_pmf(lnf, r as u64, j as u64, q)) * rest;
                        }
                    }
                    next[r] = acc;
                }
                g = next;
            }
            g[n]
        }
    }
}

fn exact_pair(belief: &Belief, x: usize, y: usize, lnf: &[f64]) -> f64 {
    let eta = belief.eta;
    let p = &belief.probs;
    let others: Vec<f64> = (0..p.len())
        .filter(|&c| c != x && c != y)
        .map(|c| p[c])
        .collect();
    let rest_mass: f64 = others.iter().sum();
    let rest: Vec<f64> = if rest_mass > 0.0 {
        others.iter().map(|q| q / rest_mass).collect()
    } else {
        others.clone()
    };
    let ln_eta = lnf[eta as usize];
    let term = |a: u64, b: u64, r: u64, limit: u64| -> f64 {
        let ln = ln_eta - lnf[a as usize] - lnf[b as usize] - lnf[r as usize]
            + ln_pow(p[x], a)
            + ln_pow(p[y], b)
            + ln_pow(rest_mass, r);
        if ln == f64::NEG_INFINITY {
            return 0.0;
        }
        let below = all_below(&rest, r, limit, lnf);
        if below == 0.0 {
            0.0
        } else {
            libm::exp(ln) * below
        }
    };
    let mut total = 0.0;
    // x leads y by one, everyone else at most y's score
    let mut t = 0;
    while 2 * t < eta {
        total += term(t + 1, t, eta - 2 * t - 1, t + 1);
        t += 1;
    }
    // x and y tied on top, everyone else strictly below
    let mut t = 1;
    while 2 * t <= eta {
        total += term(t, t, eta - 2 * t, t);
        t += 1;
    }
    total.clamp(0.0, 1.0)
}

fn check_pair(m: usize, x: Candidate, y: Candidate) -> Result<(), PivotError> {
    for c in [x, y] {
        if c.0 >= m {
            return Err(PivotError::CandidateOutOfRange { index: c.0, m });
        }
    }
    if x == y {
        return Err(PivotError::SameCandidate);
    }
    Ok(())
}

fn check_budget(belief: &Belief, budget: u64) -> Result<(), PivotError> {
    let compositions = composition_count(belief.eta, belief.num_candidates());
    if compositions > budget as u128 {
        Err(PivotError::BudgetExceeded {
            compositions,
            budget,
        })
    } else {
        Ok(())
    }
}

/// Exact `P(x, y)` under a multinomial belief of `eta` voters.
pub fn pivot_prob_exact(
    poll: &Poll,
    eta: u64,
    x: Candidate,
    y: Candidate,
    budget: u64,
) -> Result<f64, PivotError> {
    let belief = Belief::from_poll(poll, eta)?;
    check_pair(belief.num_candidates(), x, y)?;
    check_budget(&belief, budget)?;
    let lnf = ln_factorials(eta);
    Ok(exact_pair(&belief, x.0, y.0, &lnf))
}

pub fn pivot_table_exact(belief: &Belief, budget: u64) -> Result<PivotTable, PivotError> {
    check_budget(belief, budget)?;
    let m = belief.num_candidates();
    let lnf = ln_factorials(belief.eta);
    let mut entries = vec![0.0; m * m];
    for x in 0..m {
        for y in 0..m {
            if x != y {
                entries[x * m + y] = exact_pair(belief, x, y, &lnf);
            }
        }
    }
    Ok(PivotTable {
        m,
        entries,
        method: PivotMethod::Exact,
    })
}

/// Draws `total` votes from a multinomial over `probs` into `out`, using one
/// conditional binomial per candidate.
pub fn sample_multinomial<R: Rng + ?Sized>(
    rng: &mut R,
    total: u64,
    probs: &[f64],
    out: &mut [u64],
) {
    let mut remaining = total;
    let mut mass: f64 = probs.iter().sum();
    let last = probs.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        if i == last || remaining == 0 {
            out[i] = if i == last { remaining } else { 0 };
            remaining -= out[i];
            continue;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = if q <= 0.0 {
            0
        } else if q >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q)
                .expect("valid binomial parameters")
                .sample(rng)
        };
        out[i] = k;
        remaining -= k;
        mass -= p;
    }
}

/// Monte-Carlo estimate of every `P(x, y)` from one shared stream of draws.
pub fn pivot_table_mc(belief: &Belief, samples: u64, seed: u64) -> Result<PivotTable, PivotError> {
    if samples == 0 {
        return Err(PivotError::NoSamples);
    }
    let m = belief.num_candidates();
    let mut hits = vec![0u64; m * m];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; m];
    for _ in 0..samples {
        sample_multinomial(&mut rng, belief.eta, &belief.probs, &mut counts);
        let max = *counts.iter().max().expect("m >= 2");
        let mut leaders = [usize::MAX; 2];
        let mut n_leaders = 0;
        for (c, &v) in counts.iter().enumerate() {
            if v == max {
                if n_leaders < 2 {
                    leaders[n_leaders] = c;
                }
                n_leaders += 1;
            }
        }
        match n_leaders {
            1 if max > 0 => {
                let x = leaders[0];
                for (y, &v) in counts.iter().enumerate() {
                    if v + 1 == max {
                        hits[x * m + y] += 1;
                    }
                }
            }
            2 => {
                let (a, b) = (leaders[0], leaders[1]);
                hits[a * m + b] += 1;
                hits[b * m + a] += 1;
            }
            _ => {}
        }
    }
    Ok(PivotTable {
        m,
        entries: hits.iter().map(|&h| h as f64 / samples as f64).collect(),
        method: PivotMethod::MonteCarlo { samples, seed },
    })
}

/// Monte-Carlo estimate of a single `P(x, y)`; identical to the `(x, y)`
/// entry of [`pivot_table_mc`] with the same seed.
pub fn pivot_prob_mc(
    poll: &Poll,
    eta: u64,
    x: Candidate,
    y: Candidate,
    samples: u64,
    seed: u64,
) -> Result<f64, PivotError> {
    let belief = Belief::from_poll(poll, eta)?;
    check_pair(belief.num_candidates(), x, y)?;
    Ok(pivot_table_mc(&belief, samples, seed)?.get(x, y))
}

/// Exact table when within budget, Monte-Carlo otherwise.
pub fn pivot_table(belief: &Belief, cfg: &CvConfig) -> Result<PivotTable, PivotError> {
    match pivot_table_exact(belief, cfg.exact_budget) {
        Err(PivotError::BudgetExceeded { .. }) => pivot_table_mc(belief, cfg.mc_samples, cfg.seed),
        other => other,
    }
}

/// Expected gain of each vote: `sum over c' != c of P(c', c) * (u(c) - u(c'))`.
pub fn cv_gain_scores(u: &Utility, table: &PivotTable) -> Vec<f64> {
    let m = table.num_candidates();
    (0..m)
        .map(|c| {
            (0..m)
                .filter(|&o| o != c)
                .map(|o| {
                    table.get(Candidate(o), Candidate(c))
                        * (u.of(Candidate(c)) - u.of(Candidate(o)))
                })
                .sum()
        })
        .collect()
}

/// Relative tolerance under which two expected gains count as tied.
pub const GAIN_TIE_TOLERANCE: f64 = 1e-12;

/// Rounds gains onto a grid fine enough to keep real differences but coarse
/// enough that summation-order noise compares equal.
pub(crate) fn snap_gains(gains: &[f64], scale: f64) -> Vec<f64> {
    let quantum = GAIN_TIE_TOLERANCE * scale.max(1.0);
    gains.iter().map(|g| libm::round(g / quantum)).collect()
}

pub fn decide_cv(u: &Utility, s: &Poll, eta: u64, cfg: &CvConfig) -> Result<Candidate, PivotError> {
    let belief = Belief::from_poll(s, eta)?;
    let table = pivot_table(&belief, cfg)?;
    let gains = cv_gain_scores(u, &table);
    let scale = u.values().iter().cloned().fold(0.0, f64::max);
    let snapped = snap_gains(&gains, scale);
    Ok(argmax_by_key(u, s.candidates(), |c| snapped[c.0]))
}

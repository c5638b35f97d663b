//! The tightness criterion: does a finite set `A` absorb all but `ε` of every
//! row's mass?
//!
//! ```text
//! sup_{x∈X} Σ_{y∉A} p(x,y) < ε                                 (criterion)
//! sup_{x∈X} Σ_{y∉A} p^(n)(x,y) < ε   for every n ≥ 1           (consequence)
//! ```
//!
//! A certified `(A, ε)` forces positive recurrence, which is what the bounds
//! module then quantifies. Certification over an infinite state space is only
//! claimed when the family's structure allows it: the nearest-neighbour chain
//! has uniform rows beyond any finite window, which here cuts the other way —
//! every finite `A` leaves some row entirely outside, so the criterion is
//! structurally refuted rather than merely unverified.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{
    evolve_distribution, ChainError, Family, Kernel, MassVector, StateId, TruncationPolicy,
};

#[derive(Debug, Error)]
pub enum TightnessError {
    #[error("the set A must be non-empty")]
    EmptySet,
    #[error("epsilon {0} outside the open interval (0, 1)")]
    BadEpsilon(f64),
    #[error("budget must be at least 1")]
    BadBudget,
    #[error(
        "precondition not certified: tail_sup(A) = {value} is not below epsilon = {epsilon}"
    )]
    NotCertified { value: f64, epsilon: f64 },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// A verified instance of the criterion: `tail_sup(A) = achieved_tail < epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessCertificate {
    pub set: BTreeSet<StateId>,
    pub epsilon: f64,
    pub achieved_tail: f64,
    /// True iff `achieved_tail` is the supremum over *all* states, not just
    /// the explored ones. Certificates require this.
    pub exhaustive: bool,
    pub states_explored: usize,
}

/// Outcome of the greedy search for a tight set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TightSearch {
    Found(TightnessCertificate),
    NotFound {
        /// Best (smallest) tail supremum any candidate set achieved.
        best_tail: f64,
        best_set_size: usize,
        states_explored: usize,
        /// True when the family structure proves no finite set can work.
        structurally_refuted: bool,
        reason: String,
    },
}

impl TightSearch {
    pub fn certificate(&self) -> Option<&TightnessCertificate> {
        match self {
            TightSearch::Found(c) => Some(c),
            TightSearch::NotFound { .. } => None,
        }
    }
}

/// One-step tail mass of a single row against `A`.
fn row_tail(k: &Kernel, x: StateId, a: &BTreeSet<StateId>) -> Result<f64, ChainError> {
    let row = k.row(x)?;
    let in_a: f64 = row
        .entries()
        .iter()
        .filter(|(y, _)| a.contains(y))
        .map(|(_, w)| w)
        .sum();
    Ok((1.0 - in_a).clamp(0.0, 1.0))
}

/// `sup_x Σ_{y∉A} p(x,y)`, with a flag saying whether the supremum is over
/// the whole state space.
///
/// Finite chains are enumerated exhaustively (`budget` is ignored). For the
/// nearest-neighbour chain the supremum is certified structurally: every
/// state beyond `max(A) + 1` has both neighbours outside `A`, so the sup is
/// exactly 1 no matter how `A` was chosen.
pub fn tail_sup(
    k: &Kernel,
    a: &BTreeSet<StateId>,
    budget: usize,
) -> Result<(f64, bool), TightnessError> {
    if a.is_empty() {
        return Err(TightnessError::EmptySet);
    }
    if budget == 0 {
        return Err(TightnessError::BadBudget);
    }
    match k.family() {
        Family::Finite(rows) => {
            let mut sup: f64 = 0.0;
            for i in 0..rows.len() {
                sup = sup.max(row_tail(k, StateId(i), a)?);
            }
            Ok((sup, true))
        }
        Family::PaperBd { .. } => {
            // Rows 0..=max(A)+1 are the only ones that can touch A; the row
            // at max(A)+2 already has tail exactly 1, which caps the sup.
            let horizon = a.iter().next_back().unwrap().0 + 2;
            let mut sup: f64 = 0.0;
            for i in 0..=horizon {
                sup = sup.max(row_tail(k, StateId(i), a)?);
            }
            Ok((sup, true))
        }
    }
}

/// Greedy search for a finite `A` with `tail_sup(A) < epsilon`: repeatedly
/// add the state that most reduces the tail supremum. `budget` caps the size
/// of `A`.
pub fn find_tight_set(
    k: &Kernel,
    epsilon: f64,
    budget: usize,
) -> Result<TightSearch, TightnessError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(TightnessError::BadEpsilon(epsilon));
    }
    if budget == 0 {
        return Err(TightnessError::BadBudget);
    }

    if let Family::PaperBd { .. } = k.family() {
        return Ok(TightSearch::NotFound {
            best_tail: 1.0,
            best_set_size: 0,
            states_explored: 0,
            structurally_refuted: true,
            reason: "every finite set A leaves some state with both neighbours outside A, \
                     so sup_x of the tail is exactly 1 for any choice of A"
                .into(),
        });
    }

    let n = k.state_count().expect("finite by the match above");
    let mut a: BTreeSet<StateId> = BTreeSet::new();
    let mut best_tail = 1.0; // tail of the empty set: everything escapes
    while a.len() < n && a.len() < budget {
        // Try each remaining state; keep the one that minimizes the sup.
        let mut best: Option<(f64, StateId)> = None;
        let candidates: Vec<StateId> = (0..n).map(StateId).filter(|s| !a.contains(s)).collect();
        for cand in candidates {
            a.insert(cand);
            let (tail, _) = tail_sup(k, &a, budget)?;
            a.remove(&cand);
            let better = match best {
                None => true,
                Some((t, _)) => tail < t,
            };
            if better {
                best = Some((tail, cand));
            }
        }
        let (tail, winner) = best.expect("loop guard ensures a candidate exists");
        a.insert(winner);
        best_tail = tail;
        if tail < epsilon {
            return Ok(TightSearch::Found(TightnessCertificate {
                set: a,
                epsilon,
                achieved_tail: tail,
                exhaustive: true,
                states_explored: n,
            }));
        }
    }
    Ok(TightSearch::NotFound {
        best_tail,
        best_set_size: a.len(),
        states_explored: n,
        structurally_refuted: false,
        reason: format!(
            "greedy search exhausted its budget of {budget} states with best tail {best_tail}"
        ),
    })
}

/// One row of the n-step verification table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NStepCheck {
    pub n: usize,
    /// Upper bound on `sup_x Σ_{y∉A} p^(n)(x,y)` — truncation defect counts
    /// against the pass.
    pub value: f64,
    pub pass: bool,
}

/// Verifies the n-step consequence of a certified `(A, ε)` for `n = 1..=n_max`:
/// the tail supremum stays below ε at every horizon. Refuses to run if the
/// one-step criterion itself isn't certified.
pub fn n_step_tail_check(
    k: &Kernel,
    a: &BTreeSet<StateId>,
    epsilon: f64,
    n_max: usize,
    policy: &TruncationPolicy,
) -> Result<Vec<NStepCheck>, TightnessError> {
    let (value, exhaustive) = tail_sup(k, a, usize::MAX)?;
    if !(exhaustive && value < epsilon) {
        return Err(TightnessError::NotCertified { value, epsilon });
    }
    let n_states = k
        .state_count()
        .expect("certified tail_sup implies a finite chain here");
    policy.validate()?;

    let mut worst = vec![0.0f64; n_max + 1];
    for x in (0..n_states).map(StateId) {
        let mut nu = MassVector::dirac(x);
        for w in worst.iter_mut().skip(1) {
            nu = evolve_distribution(k, &nu, policy)?;
            let in_a: f64 = a.iter().map(|&y| nu.get(y)).sum();
            *w = (*w).max((1.0 - in_a).clamp(0.0, 1.0));
        }
    }
    Ok((1..=n_max)
        .map(|n| NStepCheck {
            n,
            value: worst[n],
            pass: worst[n] < epsilon,
        })
        .collect())
}

/// Default ε grid for the compactness sweep, coarse to demanding.
pub fn default_epsilon_grid() -> Vec<f64> {
    vec![0.5, 0.2, 0.1, 0.05, 0.01]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EpsilonOutcome {
    Satisfied {
        set: Vec<StateId>,
        achieved_tail: f64,
    },
    Refuted {
        reason: String,
    },
    Inconclusive {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonEntry {
    pub epsilon: f64,
    pub outcome: EpsilonOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CompactnessVerdict {
    /// The criterion held for every ε down to this one.
    SatisfiedDownTo { epsilon: f64 },
    /// A structural argument rules out every finite set at this ε (and hence
    /// at every smaller one).
    Refuted { epsilon: f64 },
    Inconclusive,
}

impl std::fmt::Display for CompactnessVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CompactnessVerdict::SatisfiedDownTo { epsilon } => {
                write!(f, "criterion satisfied down to epsilon = {epsilon}")
            }
            CompactnessVerdict::Refuted { epsilon } => {
                write!(f, "criterion refuted at epsilon = {epsilon}")
            }
            CompactnessVerdict::Inconclusive => f.write_str("inconclusive within budget"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub entries: Vec<EpsilonEntry>,
    pub verdict: CompactnessVerdict,
}

/// Runs [`find_tight_set`] over a grid of ε values and condenses the results.
pub fn compactness_verdict(
    k: &Kernel,
    epsilon_grid: &[f64],
    budget: usize,
) -> Result<CompactnessReport, TightnessError> {
    let mut entries = Vec::with_capacity(epsilon_grid.len());
    for &epsilon in epsilon_grid {
        let outcome = match find_tight_set(k, epsilon, budget)? {
            TightSearch::Found(cert) => EpsilonOutcome::Satisfied {
                set: cert.set.iter().copied().collect(),
                achieved_tail: cert.achieved_tail,
            },
            TightSearch::NotFound {
                structurally_refuted: true,
                reason,
                ..
            } => EpsilonOutcome::Refuted { reason },
            TightSearch::NotFound { reason, .. } => EpsilonOutcome::Inconclusive { reason },
        };
        entries.push(EpsilonEntry { epsilon, outcome });
    }

    let refuted_at = entries
        .iter()
        .filter(|e| matches!(e.outcome, EpsilonOutcome::Refuted { .. }))
        .map(|e| e.epsilon)
        .fold(None, |acc: Option<f64>, eps| {
            Some(acc.map_or(eps, |a| a.max(eps)))
        });
    let satisfied_down_to = entries
        .iter()
        .filter(|e| matches!(e.outcome, EpsilonOutcome::Satisfied { .. }))
        .map(|e| e.epsilon)
        .fold(None, |acc: Option<f64>, eps| {
            Some(acc.map_or(eps, |a| a.min(eps)))
        });
    let verdict = if let Some(epsilon) = refuted_at {
        CompactnessVerdict::Refuted { epsilon }
    } else if let Some(epsilon) = satisfied_down_to {
        CompactnessVerdict::SatisfiedDownTo { epsilon }
    } else {
        CompactnessVerdict::Inconclusive
    };
    Ok(CompactnessReport { entries, verdict })
}

//! Quantitative consequences of a tightness certificate, checked numerically.
//!
//! With `(A, ε)` certified (see [`crate::tightness`]) the return and hitting
//! times obey
//!
//! ```text
//! 1 ≥ Σ_{x∈A} 1/τ̄_x ≥ 1 − ε          min_{x∈A} τ̄_x ≤ card(A)/(1−ε)
//! P(T_A ≥ n | Z_0 = x) ≤ ε^{n−1}      E[T_A | Z_0 = x] ≤ 1/(1−ε)
//! ```
//!
//! and when the chain is reversible with measure `m`, a hypothesis local to
//! one state and one horizon — `Σ_{y∉A} p^(n)(x,y) ≤ ε` — already forces
//!
//! ```text
//! p^(2n)(x,x) ≥ (1−ε)² m(x)/m(A)      G(x,x|z) ≥ (1−ε)²/(1−z²) · m(x)/m(A)
//! ```
//!
//! (the Green bound needs the hypothesis uniformly in n), with `m ∝ 1/τ̄` on
//! finite chains. Every check here is one-sided about truncation: partial
//! sums under-report return mass and Green coefficients, so a reported
//! violation is a real one, while a truncation-induced near-miss downgrades
//! to inconclusive instead of failing.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{
    evolve_distribution, ChainError, Family, Kernel, MassVector, StateId, TruncationPolicy,
};
use crate::classify::{mean_return_time, stationary_measure_finite, ClassifyError};
use crate::linalg;
use crate::passage::{green_series, PassageError};
use crate::tightness::{tail_sup, TightnessCertificate, TightnessError};

/// Relative detailed-balance residual allowed on any explored edge.
pub const BALANCE_TOL: f64 = 1e-9;
/// How far along the spine the measure of the unbounded chain is tabulated.
/// Tabulation also stops early if the recursion would overflow or underflow.
pub const MEASURE_HORIZON: usize = 2048;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("chain is not irreducible")]
    Reducible,
    #[error("operation requires a finite chain")]
    NotFinite,
    #[error("the set A must be non-empty")]
    EmptySet,
    #[error("horizon must be at least 1")]
    BadHorizon,
    #[error("z = {0} outside [0, 1)")]
    BadZ(f64),
    #[error("state {0} lies beyond the tabulated horizon of the reversibility measure")]
    BeyondHorizon(StateId),
    #[error("certificate does not cover the requested set")]
    CertificateMismatch,
    #[error("certificate invalid: tail_sup = {value} is not certified below epsilon = {epsilon}")]
    BadCertificate { value: f64, epsilon: f64 },
    #[error(
        "measure violates detailed balance at ({x}, {y}): {lhs} vs {rhs} (residual {residual})"
    )]
    MeasureMismatch {
        x: StateId,
        y: StateId,
        lhs: f64,
        rhs: f64,
        residual: f64,
    },
    #[error("stationary probability of state {0} is not positive; cannot form return times")]
    DegenerateStationary(StateId),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Passage(#[from] PassageError),
    #[error(transparent)]
    Tightness(#[from] TightnessError),
}

/// Three-valued outcome of a single numerical bound check. `Fail` is only
/// reported when the violation survives the one-sidedness of truncation;
/// anything a truncated quantity could explain away is `Inconclusive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundOutcome {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for BoundOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundOutcome::Pass => "pass",
            BoundOutcome::Fail => "FAIL",
            BoundOutcome::Inconclusive => "inconclusive",
        })
    }
}

/// A positive measure with `m(x) p(x,y) = m(y) p(y,x)` on every explored
/// edge, anchored at `m(anchor) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversibilityMeasure {
    pub anchor: StateId,
    m: BTreeMap<StateId, f64>,
    /// Largest relative detailed-balance residual seen while building.
    pub max_residual: f64,
}

impl ReversibilityMeasure {
    pub fn get(&self, x: StateId) -> Option<f64> {
        self.m.get(&x).copied()
    }

    pub fn require(&self, x: StateId) -> Result<f64, BoundsError> {
        self.get(x).ok_or(BoundsError::BeyondHorizon(x))
    }

    /// `m(A) = Σ_{y∈A} m(y)`.
    pub fn of_set(&self, a: &BTreeSet<StateId>) -> Result<f64, BoundsError> {
        if a.is_empty() {
            return Err(BoundsError::EmptySet);
        }
        a.iter().map(|&y| self.require(y)).sum()
    }

    pub fn states(&self) -> impl Iterator<Item = (StateId, f64)> + '_ {
        self.m.iter().map(|(&x, &v)| (x, v))
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Reversibility {
    Reversible { measure: ReversibilityMeasure },
    NotReversible { witness: String },
}

impl Reversibility {
    pub fn measure(&self) -> Option<&ReversibilityMeasure> {
        match self {
            Reversibility::Reversible { measure } => Some(measure),
            Reversibility::NotReversible { .. } => None,
        }
    }
}

fn balance_residual(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0)
}

/// Solves detailed balance for `m`, or reports why none exists.
///
/// The unbounded nearest-neighbour chain is reversible by construction; its
/// measure is tabulated along the spine (`m(0)=1`, `m(1)=1/p`, ratio
/// `(1−p)/p` afterwards) until [`MEASURE_HORIZON`] or the edge of f64 range.
/// Finite chains get the general treatment: propagate `m` over a spanning
/// tree of the support graph, then verify every edge — any inconsistent
/// cycle or one-way transition is a witness of non-reversibility.
pub fn compute_reversibility_measure(k: &Kernel) -> Result<Reversibility, BoundsError> {
    match k.family() {
        Family::PaperBd { p } => {
            let mut m = BTreeMap::new();
            let mut value = 1.0;
            m.insert(StateId(0), value);
            for x in 1..=MEASURE_HORIZON {
                // m(x) p(x, x+1) = m(x+1) p(x+1, x), so each step multiplies
                // by the up/down ratio of the edge below.
                value *= if x == 1 { 1.0 / p } else { (1.0 - p) / p };
                if !value.is_finite() || value < f64::MIN_POSITIVE {
                    break;
                }
                m.insert(StateId(x), value);
            }
            Ok(Reversibility::Reversible {
                measure: ReversibilityMeasure {
                    anchor: StateId(0),
                    m,
                    max_residual: 0.0,
                },
            })
        }
        Family::Finite(rows) => {
            if !linalg::is_strongly_connected(k)? {
                return Err(BoundsError::Reducible);
            }
            let n = rows.len();

            // Reversibility needs symmetric support: a one-way transition
            // forces 0 = m(x)p(x,y) > 0.
            for x in 0..n {
                for &(y, w) in k.row(StateId(x))?.entries() {
                    if y.0 != x && w > 0.0 && k.row(y)?.weight(StateId(x)) == 0.0 {
                        return Ok(Reversibility::NotReversible {
                            witness: format!(
                                "p({x},{y}) = {w} but p({y},{x}) = 0: detailed balance \
                                 would force a positive quantity to vanish"
                            ),
                        });
                    }
                }
            }

            // Propagate m over a BFS tree from state 0.
            let mut m: Vec<Option<f64>> = vec![None; n];
            m[0] = Some(1.0);
            let mut queue = VecDeque::from([StateId(0)]);
            while let Some(x) = queue.pop_front() {
                let mx = m[x.0].expect("queued states are assigned");
                for &(y, w) in k.row(x)?.entries() {
                    if y != x && w > 0.0 && m[y.0].is_none() {
                        m[y.0] = Some(mx * w / k.row(y)?.weight(x));
                        queue.push_back(y);
                    }
                }
            }
            // Strong connectivity plus symmetric support makes the support
            // graph connected, so every state was reached.
            let m: Vec<f64> = m
                .into_iter()
                .map(|v| v.expect("support graph is connected"))
                .collect();

            // Cross-check every edge; tree edges are exact, the rest carry
            // Kolmogorov's cycle condition.
            let mut max_residual: f64 = 0.0;
            for x in 0..n {
                for &(y, w) in k.row(StateId(x))?.entries() {
                    if y.0 <= x || w == 0.0 {
                        continue;
                    }
                    let lhs = m[x] * w;
                    let rhs = m[y.0] * k.row(y)?.weight(StateId(x));
                    let residual = balance_residual(lhs, rhs);
                    if residual > BALANCE_TOL {
                        return Ok(Reversibility::NotReversible {
                            witness: format!(
                                "cycle condition fails on edge ({x},{y}): \
                                 m(x)p(x,y) = {lhs} vs m(y)p(y,x) = {rhs}"
                            ),
                        });
                    }
                    max_residual = max_residual.max(residual);
                }
            }
            Ok(Reversibility::Reversible {
                measure: ReversibilityMeasure {
                    anchor: StateId(0),
                    m: m.into_iter()
                        .enumerate()
                        .map(|(i, v)| (StateId(i), v))
                        .collect(),
                    max_residual,
                },
            })
        }
    }
}

/// Re-verifies that `m` balances `k` on every edge the tabulation covers.
/// Guards the Lemma entry points against a measure computed for some other
/// chain.
fn verify_measure(k: &Kernel, m: &ReversibilityMeasure) -> Result<(), BoundsError> {
    for (x, mx) in m.states() {
        for &(y, w) in k.row(x)?.entries() {
            if y == x || w == 0.0 {
                continue;
            }
            let Some(my) = m.get(y) else {
                // Edge leads past the tabulated horizon; the edges within
                // the horizon are enough of a fingerprint.
                continue;
            };
            let lhs = mx * w;
            let rhs = my * k.row(y)?.weight(x);
            let residual = balance_residual(lhs, rhs);
            if residual > BALANCE_TOL {
                return Err(BoundsError::MeasureMismatch {
                    x,
                    y,
                    lhs,
                    rhs,
                    residual,
                });
            }
        }
    }
    Ok(())
}

fn revalidate(k: &Kernel, cert: &TightnessCertificate) -> Result<(), BoundsError> {
    let (value, exhaustive) = tail_sup(k, &cert.set, usize::MAX)?;
    if !(exhaustive && value < cert.epsilon) {
        return Err(BoundsError::BadCertificate {
            value,
            epsilon: cert.epsilon,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateReturn {
    pub state: StateId,
    /// Partial mean return time `Σ_{n≤N} n f^(n)` — a lower bound for τ̄.
    pub tau: f64,
    pub converged: bool,
}

/// Both return-time inequalities that a certificate guarantees, with the
/// numbers behind each verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnTimeBounds {
    pub set: Vec<StateId>,
    pub epsilon: f64,
    pub per_state: Vec<StateReturn>,
    /// `Σ_{x∈A} 1/τ̄_x` using the partial τ̄'s; an over-estimate of the true
    /// sum, so falling below `1−ε` is a certified violation.
    pub recip_sum: f64,
    /// The window `[1−ε, 1]` the true sum must land in.
    pub recip_low: f64,
    pub recip_high: f64,
    pub recip_outcome: BoundOutcome,
    pub min_tau: f64,
    /// `card(A)/(1−ε)`.
    pub min_tau_cap: f64,
    pub min_tau_outcome: BoundOutcome,
}

/// Checks `1 ≥ Σ_{x∈A} 1/τ̄_x ≥ 1−ε` and `min τ̄ ≤ card(A)/(1−ε)` for a
/// certified `(A, ε)`, computing each τ̄ to `order` terms.
///
/// Truncation cuts one way — partial τ̄'s under-shoot — so the verdicts are
/// sided accordingly: the reciprocal sum can only certify a violation from
/// below, the minimum only from above, and unconverged values downgrade a
/// would-be pass to inconclusive.
pub fn check_return_time_bounds(
    k: &Kernel,
    cert: &TightnessCertificate,
    order: usize,
    policy: &TruncationPolicy,
) -> Result<ReturnTimeBounds, BoundsError> {
    revalidate(k, cert)?;
    let epsilon = cert.epsilon;

    let mut per_state = Vec::with_capacity(cert.set.len());
    for &x in &cert.set {
        let (tau, converged) = mean_return_time(k, x, order, policy)?;
        per_state.push(StateReturn {
            state: x,
            tau,
            converged,
        });
    }
    let all_converged = per_state.iter().all(|s| s.converged);
    let recip_sum: f64 = per_state
        .iter()
        .map(|s| if s.tau > 0.0 { 1.0 / s.tau } else { f64::INFINITY })
        .sum();
    let min_tau = per_state.iter().map(|s| s.tau).fold(f64::INFINITY, f64::min);
    let min_tau_cap = cert.set.len() as f64 / (1.0 - epsilon);

    let recip_outcome = if recip_sum < (1.0 - epsilon) - 1e-9 {
        BoundOutcome::Fail
    } else if !all_converged {
        BoundOutcome::Inconclusive
    } else if recip_sum <= 1.0 + 1e-6 {
        BoundOutcome::Pass
    } else {
        BoundOutcome::Fail
    };
    let min_tau_outcome = if min_tau > min_tau_cap * (1.0 + 1e-6) {
        // Each partial τ̄ only grows toward its limit, so the true minimum
        // is above the cap as well.
        BoundOutcome::Fail
    } else if per_state
        .iter()
        .any(|s| s.converged && s.tau <= min_tau_cap * (1.0 + 1e-6))
    {
        BoundOutcome::Pass
    } else {
        BoundOutcome::Inconclusive
    };

    Ok(ReturnTimeBounds {
        set: cert.set.iter().copied().collect(),
        epsilon,
        per_state,
        recip_sum,
        recip_low: 1.0 - epsilon,
        recip_high: 1.0,
        recip_outcome,
        min_tau,
        min_tau_cap,
        min_tau_outcome,
    })
}

/// Results of holding the hitting-time law against its certified bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingBoundChecks {
    pub epsilon: f64,
    /// `max_n survival(n) − ε^{n−1}(1+1e-9)`; non-positive means every
    /// survival bound held.
    pub worst_survival_excess: f64,
    pub worst_n: usize,
    pub survival_ok: bool,
    /// `Σ_{n≤N} P(T_A ≥ n) + ε^N/(1−ε)` — a certified upper bound on E[T_A].
    pub expectation_upper: f64,
    pub expectation_cap: f64,
    pub expectation_ok: bool,
}

/// The law of `T_A = inf{n > 0 : Z_n ∈ A}` started from `x`, truncated at
/// `n_max` with the unresolved remainder in `tail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingTimeDistribution {
    pub set: Vec<StateId>,
    pub source: StateId,
    /// `pmf[n] = P(T_A = n)`; entry 0 is identically 0.
    pmf: Vec<f64>,
    /// `survival[n] = P(T_A ≥ n)`; entries 0 and 1 are identically 1.
    survival: Vec<f64>,
    /// `P(T_A > n_max)`, including any truncation defect.
    pub tail: f64,
    /// `Σ_{n≤n_max} n·P(T_A = n)`.
    pub expectation_partial: f64,
    /// `(partial, partial + n_max·tail)`: the second entry adds the unseen
    /// mass at the earliest times it could still arrive.
    pub expectation_interval: (f64, f64),
    pub bound_checks: Option<HittingBoundChecks>,
}

impl HittingTimeDistribution {
    pub fn n_max(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn pmf(&self, n: usize) -> f64 {
        self.pmf.get(n).copied().unwrap_or(0.0)
    }

    pub fn pmf_slice(&self) -> &[f64] {
        &self.pmf
    }

    /// `P(T_A ≥ n)`; beyond the horizon this falls back to the tail.
    pub fn survival(&self, n: usize) -> f64 {
        if n <= 1 {
            1.0
        } else {
            self.survival.get(n).copied().unwrap_or(self.tail)
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum::<f64>() + self.tail
    }
}

/// Exact forward computation of the hitting-time law: evolve the start mass
/// and peel off whatever lands in `A` at each step. When a certificate for
/// `(A, ε)` is supplied, the geometric survival bound and the expectation cap
/// are checked and reported.
pub fn hitting_time_distribution(
    k: &Kernel,
    a: &BTreeSet<StateId>,
    x: StateId,
    n_max: usize,
    policy: &TruncationPolicy,
    cert: Option<&TightnessCertificate>,
) -> Result<HittingTimeDistribution, BoundsError> {
    if a.is_empty() {
        return Err(BoundsError::EmptySet);
    }
    if n_max < 1 {
        return Err(BoundsError::BadHorizon);
    }
    k.check_state(x)?;
    for &y in a {
        k.check_state(y)?;
    }
    if let Some(c) = cert {
        if c.set != *a {
            return Err(BoundsError::CertificateMismatch);
        }
        revalidate(k, c)?;
    }

    let mut pmf = Vec::with_capacity(n_max + 1);
    pmf.push(0.0);
    // Survival is read off the live vector itself rather than as 1 − Σ pmf:
    // the subtraction would cost absolute (ulp-of-1) accuracy exactly where
    // survival is smallest. Truncation defect stays counted as alive, so the
    // value remains an over-estimate and a survival-bound pass stays honest.
    let mut survival = vec![1.0, 1.0];
    let mut alive = MassVector::dirac(x);
    for n in 1..=n_max {
        alive = evolve_distribution(k, &alive, policy)?;
        let absorbed: f64 = a.iter().map(|&y| alive.take(y)).sum();
        pmf.push(absorbed);
        if n < n_max {
            survival.push(alive.total().min(1.0));
        }
    }
    let tail = alive.total().min(1.0);
    let expectation_partial: f64 = pmf.iter().enumerate().map(|(n, &v)| n as f64 * v).sum();
    let expectation_interval = (
        expectation_partial,
        expectation_partial + n_max as f64 * tail,
    );

    let bound_checks = cert.map(|c| {
        let epsilon = c.epsilon;
        let mut worst_excess = f64::NEG_INFINITY;
        let mut worst_n = 1;
        for (n, &s) in survival.iter().enumerate().take(n_max + 1).skip(1) {
            let bound = epsilon.powi(n as i32 - 1) * (1.0 + 1e-9);
            let excess = s - bound;
            if excess > worst_excess {
                worst_excess = excess;
                worst_n = n;
            }
        }
        let sum_survival: f64 = survival[1..].iter().sum();
        let expectation_upper = sum_survival + epsilon.powi(n_max as i32) / (1.0 - epsilon);
        let expectation_cap = (1.0 + 1e-6) / (1.0 - epsilon);
        HittingBoundChecks {
            epsilon,
            worst_survival_excess: worst_excess,
            worst_n,
            survival_ok: worst_excess <= 0.0,
            expectation_upper,
            expectation_cap,
            expectation_ok: expectation_upper <= expectation_cap,
        }
    });

    Ok(HittingTimeDistribution {
        set: a.iter().copied().collect(),
        source: x,
        pmf,
        survival,
        tail,
        expectation_partial,
        expectation_interval,
        bound_checks,
    })
}

/// One instance of the reversible two-step lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaBound {
    pub x: StateId,
    pub n: usize,
    pub set: Vec<StateId>,
    /// `Σ_{y∉A} p^(n)(x,y)` as computed (truncation defect included), which
    /// is the ε the hypothesis is instantiated with.
    pub epsilon_n: f64,
    pub m_x: f64,
    pub m_a: f64,
    /// `p^(2n)(x,x)` — itself a lower bound under truncation.
    pub lhs: f64,
    /// `(1−ε_n)² · m(x)/m(A)`.
    pub rhs: f64,
    pub pass: bool,
}

/// Checks `p^(2n)(x,x) ≥ (1−ε_n)² m(x)/m(A)` where `ε_n` is the mass that
/// `p^(n)(x,·)` puts outside `A`.
///
/// Both sides are computed from one evolution run: the outside-`A` mass at
/// step `n` instantiates the hypothesis, the mass back at `x` at step `2n`
/// is the left side. Truncation lowers the left side and raises `ε_n`, so a
/// reported failure survives it.
pub fn reversible_lower_bound(
    k: &Kernel,
    m: &ReversibilityMeasure,
    a: &BTreeSet<StateId>,
    x: StateId,
    n: usize,
    policy: &TruncationPolicy,
) -> Result<LemmaBound, BoundsError> {
    if a.is_empty() {
        return Err(BoundsError::EmptySet);
    }
    if n < 1 {
        return Err(BoundsError::BadHorizon);
    }
    k.check_state(x)?;
    verify_measure(k, m)?;
    let m_x = m.require(x)?;
    let m_a = m.of_set(a)?;

    let mut nu = MassVector::dirac(x);
    for _ in 0..n {
        nu = evolve_distribution(k, &nu, policy)?;
    }
    let in_a: f64 = a.iter().map(|&y| nu.get(y)).sum();
    let epsilon_n = (1.0 - in_a).clamp(0.0, 1.0);
    for _ in 0..n {
        nu = evolve_distribution(k, &nu, policy)?;
    }
    let lhs = nu.get(x);
    let rhs = (1.0 - epsilon_n).powi(2) * m_x / m_a;

    Ok(LemmaBound {
        x,
        n,
        set: a.iter().copied().collect(),
        epsilon_n,
        m_x,
        m_a,
        lhs,
        rhs,
        pass: lhs >= rhs - 1e-12,
    })
}

/// One instance of the Green-function lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenBound {
    pub x: StateId,
    pub set: Vec<StateId>,
    pub z: f64,
    pub order: usize,
    /// Uniform ε: the largest outside-`A` mass of `p^(n)(x,·)` over `n ≤ N`.
    pub epsilon: f64,
    /// Truncated `G(x,x|z)` — a lower bound on the true value.
    pub lhs: f64,
    /// `(1−ε)²/(1−z²) · m(x)/m(A)`.
    pub rhs: f64,
    /// `z^{N+1}/(1−z)`: the most the truncation can be hiding.
    pub tail_allowance: f64,
    pub outcome: BoundOutcome,
}

/// Checks `G(x,x|z) ≥ (1−ε)²/(1−z²) · m(x)/m(A)` with ε taken uniformly
/// over all horizons up to the series order.
///
/// The left side is a truncated series, so a shortfall smaller than the
/// worst-case remainder `z^{N+1}/(1−z)` is reported inconclusive rather
/// than failed.
pub fn green_lower_bound(
    k: &Kernel,
    m: &ReversibilityMeasure,
    a: &BTreeSet<StateId>,
    x: StateId,
    z: f64,
    order: usize,
    policy: &TruncationPolicy,
) -> Result<GreenBound, BoundsError> {
    if a.is_empty() {
        return Err(BoundsError::EmptySet);
    }
    if order < 1 {
        return Err(BoundsError::BadHorizon);
    }
    if !(0.0..1.0).contains(&z) {
        return Err(BoundsError::BadZ(z));
    }
    k.check_state(x)?;
    verify_measure(k, m)?;
    let m_x = m.require(x)?;
    let m_a = m.of_set(a)?;

    let mut epsilon: f64 = 0.0;
    let mut nu = MassVector::dirac(x);
    for _ in 1..=order {
        nu = evolve_distribution(k, &nu, policy)?;
        let in_a: f64 = a.iter().map(|&y| nu.get(y)).sum();
        epsilon = epsilon.max((1.0 - in_a).clamp(0.0, 1.0));
    }

    let lhs = green_series(k, x, x, order, policy)?.eval(z);
    let rhs = (1.0 - epsilon).powi(2) / (1.0 - z * z) * m_x / m_a;
    let tail_allowance = z.powi(order as i32 + 1) / (1.0 - z);
    let outcome = if lhs >= rhs - 1e-9 {
        BoundOutcome::Pass
    } else if lhs + tail_allowance >= rhs - 1e-9 {
        BoundOutcome::Inconclusive
    } else {
        BoundOutcome::Fail
    };

    Ok(GreenBound {
        x,
        set: a.iter().copied().collect(),
        z,
        order,
        epsilon,
        lhs,
        rhs,
        tail_allowance,
        outcome,
    })
}

/// Verdict on `m(x) ∝ 1/τ̄_x` over a whole finite chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionalityReport {
    pub states_checked: usize,
    /// Extremes of `c_x = m(x)·τ̄_x` and where they occur.
    pub c_min: f64,
    pub c_min_state: StateId,
    pub c_max: f64,
    pub c_max_state: StateId,
    pub ratio: f64,
    pub pass: bool,
}

/// Checks that `c_x = m(x)·τ̄_x` is constant across the chain, with τ̄ taken
/// from the stationary distribution (`τ̄_x = 1/π(x)`) so that the two sides
/// come from independent computations: `m` from detailed balance along
/// edges, π from a dense linear solve.
pub fn check_m_tau_proportionality(
    k: &Kernel,
    m: &ReversibilityMeasure,
) -> Result<ProportionalityReport, BoundsError> {
    let n = k.state_count().ok_or(BoundsError::NotFinite)?;
    verify_measure(k, m)?;
    let pi = stationary_measure_finite(k)?;

    let mut c_min = f64::INFINITY;
    let mut c_max = f64::NEG_INFINITY;
    let mut c_min_state = StateId(0);
    let mut c_max_state = StateId(0);
    for x in (0..n).map(StateId) {
        let p = pi.get(x);
        if p <= 0.0 {
            return Err(BoundsError::DegenerateStationary(x));
        }
        let c = m.require(x)? / p;
        if c < c_min {
            c_min = c;
            c_min_state = x;
        }
        if c > c_max {
            c_max = c;
            c_max_state = x;
        }
    }
    let ratio = c_max / c_min;
    Ok(ProportionalityReport {
        states_checked: n,
        c_min,
        c_min_state,
        c_max,
        c_max_state,
        ratio,
        pass: ratio <= 1.0 + 1e-6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{make_chain, ChainSpec};
    use crate::tightness::find_tight_set;
    use approx::assert_abs_diff_eq;

    fn set(ids: &[usize]) -> BTreeSet<StateId> {
        ids.iter().map(|&i| StateId(i)).collect()
    }

    fn measure_of(k: &Kernel) -> ReversibilityMeasure {
        match compute_reversibility_measure(k).unwrap() {
            Reversibility::Reversible { measure } => measure,
            Reversibility::NotReversible { witness } => {
                panic!("expected a reversible chain, got witness: {witness}")
            }
        }
    }

    /// Finite analogue of the downward-biased nearest-neighbour walk:
    /// `p(0,1) = 1`, down-rate `q` and up-rate `1−q` inside, lazy top.
    fn truncated_bd(q_down: f64, states: usize) -> Kernel {
        let l = states - 1;
        let mut up = vec![1.0 - q_down; l];
        up[0] = 1.0;
        make_chain(&ChainSpec::BirthDeath {
            up,
            down: vec![q_down; l],
        })
        .unwrap()
    }

    #[test]
    fn symmetric_two_state_measures_are_flat() {
        for spec in [ChainSpec::Swap, ChainSpec::Lazy { p: 0.5 }] {
            let k = make_chain(&spec).unwrap();
            let m = measure_of(&k);
            assert_eq!(m.get(StateId(0)), Some(1.0));
            assert_eq!(m.get(StateId(1)), Some(1.0));
            assert!(m.max_residual <= BALANCE_TOL);
        }
    }

    #[test]
    fn spine_measure_matches_the_recursion() {
        let k = make_chain(&ChainSpec::PaperBd { p: 0.7 }).unwrap();
        let m = measure_of(&k);
        assert_eq!(m.get(StateId(0)), Some(1.0));
        assert_abs_diff_eq!(m.require(StateId(1)).unwrap(), 1.0 / 0.7, epsilon = 1e-12);
        for x in 1..60 {
            let ratio = m.require(StateId(x + 1)).unwrap() / m.require(StateId(x)).unwrap();
            assert_abs_diff_eq!(ratio, 0.3 / 0.7, epsilon = 1e-12);
            // Detailed balance on the spine edge (x, x+1).
            let lhs = m.require(StateId(x)).unwrap() * k.row(StateId(x)).unwrap().weight(StateId(x + 1));
            let rhs = m.require(StateId(x + 1)).unwrap() * k.row(StateId(x + 1)).unwrap().weight(StateId(x));
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12 * lhs.abs().max(1.0));
        }
        // Growing-measure direction stops tabulating before overflowing.
        let k = make_chain(&ChainSpec::PaperBd { p: 0.25 }).unwrap();
        let m = measure_of(&k);
        assert!(m.len() < MEASURE_HORIZON + 1);
        assert!(m.states().all(|(_, v)| v.is_finite() && v > 0.0));
    }

    #[test]
    fn truncated_bd_is_reversible_with_the_same_spine() {
        let k = truncated_bd(0.7, 6);
        let m = measure_of(&k);
        assert_abs_diff_eq!(m.require(StateId(1)).unwrap(), 1.0 / 0.7, epsilon = 1e-12);
        for x in 1..5 {
            let ratio = m.require(StateId(x + 1)).unwrap() / m.require(StateId(x)).unwrap();
            assert_abs_diff_eq!(ratio, 0.3 / 0.7, epsilon = 1e-12);
        }
        assert!(m.max_residual <= BALANCE_TOL);
    }

    #[test]
    fn one_way_cycles_are_rejected_with_a_witness() {
        let cycle = make_chain(&ChainSpec::Finite {
            rows: vec![
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0],
            ],
        })
        .unwrap();
        match compute_reversibility_measure(&cycle).unwrap() {
            Reversibility::NotReversible { witness } => {
                assert!(witness.contains("p(0,1)"), "witness was: {witness}")
            }
            Reversibility::Reversible { .. } => panic!("a strict cycle is not reversible"),
        }

        let funnel = make_chain(&ChainSpec::Funnel { eps: 0.2, m: 5 }).unwrap();
        assert!(matches!(
            compute_reversibility_measure(&funnel).unwrap(),
            Reversibility::NotReversible { .. }
        ));

        let reducible = make_chain(&ChainSpec::Finite {
            rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        })
        .unwrap();
        assert!(matches!(
            compute_reversibility_measure(&reducible),
            Err(BoundsError::Reducible)
        ));
    }

    #[test]
    fn return_time_bounds_on_the_funnel() {
        let k = make_chain(&ChainSpec::Funnel { eps: 0.2, m: 50 }).unwrap();
        let policy = TruncationPolicy::default();
        let cert = find_tight_set(&k, 0.25, 64)
            .unwrap()
            .certificate()
            .cloned()
            .unwrap();
        let report = check_return_time_bounds(&k, &cert, 64, &policy).unwrap();
        assert_eq!(report.per_state.len(), 1);
        assert_abs_diff_eq!(report.per_state[0].tau, 1.25, epsilon = 1e-9);
        assert!(report.per_state[0].converged);
        assert_abs_diff_eq!(report.recip_sum, 0.8, epsilon = 1e-9);
        assert_eq!(report.recip_outcome, BoundOutcome::Pass);
        assert_abs_diff_eq!(report.min_tau_cap, 1.0 / 0.75, epsilon = 1e-12);
        assert_eq!(report.min_tau_outcome, BoundOutcome::Pass);
    }

    #[test]
    fn return_time_bounds_at_the_boundary_epsilon() {
        // ε barely above the achieved tail: Σ 1/τ̄ = 1−ε up to 1e-9 — the
        // equality case still passes.
        let k = make_chain(&ChainSpec::Funnel { eps: 0.2, m: 50 }).unwrap();
        let policy = TruncationPolicy::default();
        let cert = find_tight_set(&k, 0.2 + 1e-9, 64)
            .unwrap()
            .certificate()
            .cloned()
            .unwrap();
        let report = check_return_time_bounds(&k, &cert, 64, &policy).unwrap();
        assert_eq!(report.recip_outcome, BoundOutcome::Pass);
        assert_abs_diff_eq!(report.recip_sum, report.recip_low, epsilon = 1e-8);
    }

    #[test]
    fn return_time_bounds_on_the_full_two_state_space() {
        let k = make_chain(&ChainSpec::Swap).unwrap();
        let policy = TruncationPolicy::default();
        let cert = find_tight_set(&k, 0.5, 8).unwrap().certificate().cloned().unwrap();
        let report = check_return_time_bounds(&k, &cert, 32, &policy).unwrap();
        assert_abs_diff_eq!(report.recip_sum, 1.0, epsilon = 1e-12);
        assert_eq!(report.recip_outcome, BoundOutcome::Pass);
        assert_abs_diff_eq!(report.min_tau, 2.0, epsilon = 1e-12);
        assert_eq!(report.min_tau_outcome, BoundOutcome::Pass);
    }

    #[test]
    fn stale_certificates_are_rejected() {
        let k = make_chain(&ChainSpec::Funnel { eps: 0.2, m: 50 }).unwrap();
        let bogus = TightnessCertificate {
            set: set(&[1]),
            epsilon: 0.5,
            achieved_tail: 0.1,
            exhaustive: true,
            states_explored: 51,
        };
        assert!(matches!(
            check_return_time_bounds(&k, &bogus, 32, &TruncationPolicy::default()),
            Err(BoundsError::BadCertificate { .. })
        ));
    }

    #[test]
    fn funnel_hitting_law_is_geometric_and_meets_bounds_with_equality() {
        let k = make_chain(&ChainSpec::Funnel { eps: 0.2, m: 50 }).unwrap();
        let policy = TruncationPolicy::default();
        let cert = find_tight_set(&k, 0.2 + 1e-9, 64)
            .unwrap()
            .certificate()
            .cloned()
            .unwrap();
        let dist =
            hitting_time_distribution(&k, &set(&[0]), StateId(5), 48, &policy, Some(&cert))
                .unwrap();
        for n in 1..=10usize {
            let geometric = 0.2f64.powi(n as i32 - 1);
            assert_abs_diff_eq!(dist.pmf(n), 0.8 * geometric, epsilon = 1e-12);
            assert_abs_diff_eq!(dist.survival(n), geometric, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(dist.total_mass(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(dist.expectation_partial, 1.25, epsilon = 1e-9);
        let checks = dist.bound_checks.unwrap();
        assert!(checks.survival_ok);
        assert!(checks.expectation_ok);
        assert_abs_diff_eq!(checks.expectation_upper, 1.25, epsilon = 1e-9);
    }

    #[test]
    fn trivial_and_drifting_hitting_laws() {
        let s = make_chain(&ChainSpec::Swap).unwrap();
        let policy = TruncationPolicy::default();
        let d = hitting_time_distribution(&s, &set(&[1]), StateId(0), 8, &policy, None).unwrap();
        assert_eq!(d.pmf(1), 1.0);
        assert_eq!(d.tail, 0.0);
        assert_abs_diff_eq!(d.expectation_partial, 1.0, epsilon = 1e-15);

        // Downward-biased nearest-neighbour walk from 1: P(T_{0}=1) = 0.7,
        // mean hitting time 1/(2p−1) = 2.5.
        let k = make_chain(&ChainSpec::PaperBd { p: 0.7 }).unwrap();
        let d = hitting_time_distribution(&k, &set(&[0]), StateId(1), 512, &policy, None).unwrap();
        assert_abs_diff_eq!(d.pmf(1), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(d.expectation_partial, 2.5, epsilon = 1e-9);
        assert!(d.tail < 1e-12);
        assert_abs_diff_eq!(d.total_mass(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn hitting_law_keeps_unit_mass_under_lossy_truncation() {
        let k = make_chain(&ChainSpec::PaperBd { p: 0.5 }).unwrap();
        let policy = TruncationPolicy {
            max_states: 8,
            mass_floor: 1e-6,
        };
        let d = hitting_time_distribution(&k, &set(&[0]), StateId(3), 64, &policy, None).unwrap();
        assert_abs_diff_eq!(d.total_mass(), 1.0, epsilon = 1e-9);
        assert!(d.tail > 0.0);
        assert!(d.expectation_interval.0 <= d.expectation_interval.1);
    }

    #[test]
    fn certificate_must_match_the_requested_set() {
        let k = make_chain(&ChainSpec::Funnel { eps: 0.2, m: 10 }).unwrap();
        let cert = find_tight_set(&k, 0.25, 16).unwrap().certificate().cloned().unwrap();
        let err = hitting_time_distribution(
            &k,
            &set(&[0, 1]),
            StateId(2),
            16,
            &TruncationPolicy::default(),
            Some(&cert),
        );
        assert!(matches!(err, Err(BoundsError::CertificateMismatch)));
    }

    #[test]
    fn lemma_bound_on_tiny_symmetric_chains() {
        let policy = TruncationPolicy::default();

        let s = make_chain(&ChainSpec::Swap).unwrap();
        let m = measure_of(&s);
        let b = reversible_lower_bound(&s, &m, &set(&[0, 1]), StateId(0), 1, &policy).unwrap();
        assert_eq!(b.epsilon_n, 0.0);
        assert_abs_diff_eq!(b.rhs, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.lhs, 1.0, epsilon = 1e-15);
        assert!(b.pass);

        let l = make_chain(&ChainSpec::Lazy { p: 0.5 }).unwrap();
        let m = measure_of(&l);
        let b = reversible_lower_bound(&l, &m, &set(&[0]), StateId(0), 1, &policy).unwrap();
        assert_abs_diff_eq!(b.epsilon_n, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.rhs, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(b.lhs, 0.5, epsilon = 1e-15);
        assert!(b.pass);
    }

    #[test]
    fn lemma_bound_sweep_on_the_nearest_neighbour_chain() {
        let k = make_chain(&ChainSpec::PaperBd { p: 0.7 }).unwrap();
        let m = measure_of(&k);
        let policy = TruncationPolicy::default();
        for n in 1..=10 {
            let b =
                reversible_lower_bound(&k, &m, &set(&[0, 1, 2]), StateId(0), n, &policy).unwrap();
            assert!(b.pass, "n = {n}: lhs {} < rhs {}", b.lhs, b.rhs);
        }
    }

    #[test]
    fn foreign_measures_are_refused() {
        let funnel = make_chain(&ChainSpec::Funnel { eps: 0.2, m: 5 }).unwrap();
        let m = measure_of(&make_chain(&ChainSpec::Swap).unwrap());
        let err = reversible_lower_bound(
            &funnel,
            &m,
            &set(&[0]),
            StateId(0),
            1,
            &TruncationPolicy::default(),
        );
        assert!(matches!(err, Err(BoundsError::MeasureMismatch { .. })));
    }

    #[test]
    fn green_bound_passes_with_closed_forms() {
        let policy = TruncationPolicy::default();

        let s = make_chain(&ChainSpec::Swap).unwrap();
        let m = measure_of(&s);
        let g = green_lower_bound(&s, &m, &set(&[0, 1]), StateId(0), 0.5, 64, &policy).unwrap();
        assert_eq!(g.epsilon, 0.0);
        assert_abs_diff_eq!(g.lhs, 1.0 / 0.75, epsilon = 1e-9);
        assert_abs_diff_eq!(g.rhs, 0.5 / 0.75, epsilon = 1e-12);
        assert_eq!(g.outcome, BoundOutcome::Pass);

        let l = make_chain(&ChainSpec::Lazy { p: 0.5 }).unwrap();
        let m = measure_of(&l);
        let g = green_lower_bound(&l, &m, &set(&[0, 1]), StateId(0), 0.9, 512, &policy).unwrap();
        assert_abs_diff_eq!(g.lhs, 5.5, epsilon = 1e-6);
        assert_abs_diff_eq!(g.rhs, 0.5 / (1.0 - 0.81), epsilon = 1e-12);
        assert_eq!(g.outcome, BoundOutcome::Pass);

        // z = 0 degenerates to c₀ = 1 against a right side that cannot
        // exceed 1.
        let g = green_lower_bound(&s, &m, &set(&[0]), StateId(0), 0.0, 8, &policy).unwrap();
        assert_eq!(g.lhs, 1.0);
        assert!(g.rhs <= 1.0);
        assert_eq!(g.outcome, BoundOutcome::Pass);
    }

    #[test]
    fn green_bound_downgrades_truncation_shortfall_to_inconclusive() {
        // Order 16 at z = 0.999 sees only a sliver of G, far below the right
        // side, but the geometric remainder allowance covers the gap.
        let s = make_chain(&ChainSpec::Swap).unwrap();
        let m = measure_of(&s);
        let g = green_lower_bound(
            &s,
            &m,
            &set(&[0, 1]),
            StateId(0),
            0.999,
            16,
            &TruncationPolicy::default(),
        )
        .unwrap();
        assert!(g.lhs < g.rhs - 1e-9);
        assert_eq!(g.outcome, BoundOutcome::Inconclusive);
    }

    #[test]
    fn m_tau_constant_across_reversible_chains() {
        for k in [
            make_chain(&ChainSpec::Swap).unwrap(),
            make_chain(&ChainSpec::Lazy { p: 0.5 }).unwrap(),
            make_chain(&ChainSpec::Lazy { p: 0.25 }).unwrap(),
            truncated_bd(0.7, 100),
        ] {
            let m = measure_of(&k);
            let report = check_m_tau_proportionality(&k, &m).unwrap();
            assert!(
                report.pass,
                "{}: ratio {} (c in [{}, {}])",
                k.name(),
                report.ratio,
                report.c_min,
                report.c_max
            );
        }

        // The flat two-state cases pin the constant itself: c ≡ Σ m = 2.
        let s = make_chain(&ChainSpec::Swap).unwrap();
        let m = measure_of(&s);
        let report = check_m_tau_proportionality(&s, &m).unwrap();
        assert_abs_diff_eq!(report.c_min, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.c_max, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn m_tau_requires_a_finite_chain() {
        let k = make_chain(&ChainSpec::PaperBd { p: 0.7 }).unwrap();
        let m = measure_of(&k);
        assert!(matches!(
            check_m_tau_proportionality(&k, &m),
            Err(BoundsError::NotFinite)
        ));
    }
}

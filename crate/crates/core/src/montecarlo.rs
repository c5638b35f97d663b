//! Seeded trajectory simulation, used to cross-examine the exact modules.
//!
//! Reproducibility contract: all randomness comes from ChaCha8 keyed by the
//! user seed, with the stream index splitting work deterministically —
//! stream 0 drives single-trajectory operations, trial `t` of a multi-trial
//! estimator runs on stream `t + 1`. Identical inputs therefore give
//! bit-identical outputs regardless of how trials are scheduled, and each
//! step is sampled by inverse CDF over the row's entry order, so fixtures
//! survive refactors that don't touch row construction.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainError, Kernel, StateId};
use crate::tightness::{tail_sup, TightnessCertificate, TightnessError};

#[derive(Debug, Error)]
pub enum McError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("cap must be at least 1")]
    BadCap,
    #[error("steps must be at least 1")]
    NoSteps,
    #[error("the set A must be non-empty")]
    EmptySet,
    #[error("certificate does not cover the requested set")]
    CertificateMismatch,
    #[error("certificate invalid: tail_sup = {value} is not certified below epsilon = {epsilon}")]
    BadCertificate { value: f64, epsilon: f64 },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Tightness(#[from] TightnessError),
}

/// One sampled trajectory, including its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub chain: String,
    pub seed: u64,
    /// `states[0]` is the start; `states[n]` is `Z_n`.
    pub states: Vec<StateId>,
}

/// A sample mean with a 95% normal confidence half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub half_width: f64,
    /// Number of observations behind `mean`.
    pub trials: usize,
}

impl EstimateWithCI {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let half_width = if n > 1 {
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.96 * (var / n as f64).sqrt()
        } else {
            0.0
        };
        EstimateWithCI {
            mean,
            half_width,
            trials: n,
        }
    }

    /// Does `value` land within `k` estimated standard errors of the mean?
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k / 1.96 * self.half_width
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One transition sampled by inverse CDF in row-entry order.
fn step(k: &Kernel, x: StateId, rng: &mut ChaCha8Rng) -> Result<StateId, McError> {
    let row = k.row(x)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(y, w) in row.entries() {
        acc += w;
        if u < acc {
            return Ok(y);
        }
    }
    // Rounding can leave acc a hair under 1; the tail belongs to the last
    // entry.
    Ok(row.entries().last().expect("rows are non-empty").0)
}

/// Samples `Z_0..Z_steps` starting from `x0`, deterministically in
/// `(chain, x0, steps, seed)`.
pub fn simulate_path(k: &Kernel, x0: StateId, steps: usize, seed: u64) -> Result<Path, McError> {
    k.check_state(x0)?;
    let mut rng = rng_for(seed, 0);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0);
    let mut x = x0;
    for _ in 0..steps {
        x = step(k, x, &mut rng)?;
        states.push(x);
    }
    Ok(Path {
        chain: k.name().to_string(),
        seed,
        states,
    })
}

/// Return-time samples with censoring at `cap` made explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnTimeEstimate {
    /// Mean over the *uncensored* samples only. Dropping the censored runs
    /// discards the largest outcomes, so this is a lower bound in
    /// expectation — exactly the honest direction for transient chains.
    pub estimate: EstimateWithCI,
    pub censored: usize,
    pub cap: usize,
}

/// Samples `T_x = inf{n ≥ 1 : Z_n = x}` over independent trials, each on its
/// own RNG stream. Walks that have not returned after `cap` steps are
/// censored and counted, never silently averaged in. If every trial is
/// censored the mean degrades to `cap` itself (a certified lower bound) with
/// zero observations' worth of spread.
pub fn estimate_return_time(
    k: &Kernel,
    x: StateId,
    trials: usize,
    cap: usize,
    seed: u64,
) -> Result<ReturnTimeEstimate, McError> {
    if trials < 1 {
        return Err(McError::NoTrials);
    }
    if cap < 1 {
        return Err(McError::BadCap);
    }
    k.check_state(x)?;

    let mut samples = Vec::with_capacity(trials);
    let mut censored = 0usize;
    for t in 0..trials {
        let mut rng = rng_for(seed, t as u64 + 1);
        let mut z = x;
        let mut returned = false;
        for n in 1..=cap {
            z = step(k, z, &mut rng)?;
            if z == x {
                samples.push(n as f64);
                returned = true;
                break;
            }
        }
        if !returned {
            censored += 1;
        }
    }

    let estimate = if samples.is_empty() {
        EstimateWithCI {
            mean: cap as f64,
            half_width: 0.0,
            trials,
        }
    } else {
        EstimateWithCI::from_samples(&samples)
    };
    Ok(ReturnTimeEstimate {
        estimate,
        censored,
        cap,
    })
}

/// The ergodic average `(1/n) Σ_{i=1..n} 1{Z_i ∈ A}` along one trajectory.
///
/// The half-width uses the binomial variance of the endpoint frequency; on
/// chains with slow mixing the serial correlation makes it optimistic, which
/// the statistical tests account for by aggregating over seeds.
pub fn occupation_fraction(
    k: &Kernel,
    a: &BTreeSet<StateId>,
    x0: StateId,
    steps: usize,
    seed: u64,
) -> Result<EstimateWithCI, McError> {
    if steps < 1 {
        return Err(McError::NoSteps);
    }
    if a.is_empty() {
        return Err(McError::EmptySet);
    }
    let path = simulate_path(k, x0, steps, seed)?;
    let hits = path.states[1..].iter().filter(|z| a.contains(z)).count();
    let mean = hits as f64 / steps as f64;
    let half_width = 1.96 * (mean * (1.0 - mean) / steps as f64).sqrt();
    Ok(EstimateWithCI {
        mean,
        half_width,
        trials: steps,
    })
}

/// Verdict of holding an empirical survival curve against `ε^{n−1}` plus
/// three binomial standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McBoundChecks {
    pub epsilon: f64,
    /// `max_n P̂(T_A ≥ n) − (ε^{n−1} + 3σ_n)`, `σ_n = √(b(1−b)/trials)` at
    /// `b = ε^{n−1}`.
    pub worst_excess: f64,
    pub worst_n: usize,
    pub ok: bool,
}

/// Empirical law of the first entrance time into `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub set: Vec<StateId>,
    pub source: StateId,
    pub trials: usize,
    pub cap: usize,
    /// `survival[n] = P̂(T_A ≥ n)`; entries 0 and 1 equal 1.
    survival: Vec<f64>,
    /// Mean of the uncensored samples (lower bound in expectation, as with
    /// [`ReturnTimeEstimate`]); `cap` itself when everything censored.
    pub sample_mean: f64,
    pub censored: usize,
    pub bound_checks: Option<McBoundChecks>,
}

impl SurvivalCurve {
    pub fn survival(&self, n: usize) -> f64 {
        if n <= 1 {
            1.0
        } else {
            self.survival.get(n).copied().unwrap_or(0.0)
        }
    }

    pub fn survival_slice(&self) -> &[f64] {
        &self.survival
    }
}

/// Samples `T_A` from `x0` over independent trials and tabulates the
/// empirical survival function. With a certificate, every point of the curve
/// is checked against the geometric bound plus binomial noise.
pub fn hitting_time_samples(
    k: &Kernel,
    a: &BTreeSet<StateId>,
    x0: StateId,
    trials: usize,
    cap: usize,
    seed: u64,
    cert: Option<&TightnessCertificate>,
) -> Result<SurvivalCurve, McError> {
    if trials < 1 {
        return Err(McError::NoTrials);
    }
    if cap < 1 {
        return Err(McError::BadCap);
    }
    if a.is_empty() {
        return Err(McError::EmptySet);
    }
    k.check_state(x0)?;
    if let Some(c) = cert {
        if c.set != *a {
            return Err(McError::CertificateMismatch);
        }
        let (value, exhaustive) = tail_sup(k, a, usize::MAX)?;
        if !(exhaustive && value < c.epsilon) {
            return Err(McError::BadCertificate {
                value,
                epsilon: c.epsilon,
            });
        }
    }

    // at_least[n] counts trials with T_A ≥ n.
    let mut at_least = vec![0usize; cap + 1];
    let mut samples = Vec::new();
    let mut censored = 0usize;
    for t in 0..trials {
        let mut rng = rng_for(seed, t as u64 + 1);
        let mut z = x0;
        let mut hit_at = None;
        for n in 1..=cap {
            z = step(k, z, &mut rng)?;
            if a.contains(&z) {
                hit_at = Some(n);
                break;
            }
        }
        match hit_at {
            Some(n) => samples.push(n),
            None => censored += 1,
        }
        // T ≥ n holds for every n up to the hit time itself (or throughout
        // when censored), so indices 0..=T get the increment.
        let covered = hit_at.map_or(cap + 1, |t| t + 1);
        for slot in at_least.iter_mut().take(covered) {
            *slot += 1;
        }
    }
    let survival: Vec<f64> = at_least
        .iter()
        .map(|&c| c as f64 / trials as f64)
        .collect();
    let sample_mean = if samples.is_empty() {
        cap as f64
    } else {
        samples.iter().sum::<usize>() as f64 / samples.len() as f64
    };

    let bound_checks = cert.map(|c| {
        let epsilon = c.epsilon;
        let mut worst_excess = f64::NEG_INFINITY;
        let mut worst_n = 1;
        for (n, &s) in survival.iter().enumerate().take(cap + 1).skip(1) {
            let b = epsilon.powi(n as i32 - 1);
            let sigma = (b * (1.0 - b) / trials as f64).sqrt();
            let excess = s - (b + 3.0 * sigma);
            if excess > worst_excess {
                worst_excess = excess;
                worst_n = n;
            }
        }
        McBoundChecks {
            epsilon,
            worst_excess,
            worst_n,
            ok: worst_excess <= 0.0,
        }
    });

    Ok(SurvivalCurve {
        set: a.iter().copied().collect(),
        source: x0,
        trials,
        cap,
        survival,
        sample_mean,
        censored,
        bound_checks,
    })
}

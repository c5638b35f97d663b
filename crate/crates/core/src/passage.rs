//! First-return probabilities and the generating functions built from them.
//!
//! `f^(n)(x,y)` is the probability of reaching `y` for the first time at step
//! `n` (with `f^(0) = 0` by convention). It satisfies the taboo recursion
//!
//! ```text
//! f^(1)(x,y) = p(x,y),    f^(n)(x,y) = Σ_{z≠y} p(x,z) f^(n−1)(z,y),
//! ```
//!
//! computed here forward over mass vectors with `y` masked out: stable, and
//! exact whenever the truncation defect stays zero. The series route
//! `F = (G − δ)/G` is kept as an independent cross-check, not a dependency —
//! the identity `G(x,y|z) = δ_{xy} + F(x,y|z)·G(y,y|z)` becomes a test.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{
    evolve_distribution, ChainError, Kernel, MassVector, StateId, TruncationPolicy,
};
use crate::series::{SeriesError, TruncatedSeries};

#[derive(Debug, Error)]
pub enum PassageError {
    #[error("series order must be at least 1")]
    OrderTooSmall,
    #[error("Green series used as divisor must have constant term 1, got {0}")]
    BadGreenConstantTerm(f64),
    #[error("parameter {name} = {value} outside {domain}")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// First-return/first-passage probabilities `f^(n)(x,y)` for `n = 0..=N`,
/// with running cumulative sums.
///
/// Under truncation the entries are certified lower bounds; `defect` is the
/// mass the taboo walk lost to the policy along the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstReturnTable {
    pub source: StateId,
    pub target: StateId,
    /// `f[n] = f^(n)`; `f[0] = 0` by convention.
    f: Vec<f64>,
    /// `cumulative[n] = Σ_{m≤n} f^(m)` — non-decreasing, ≤ 1.
    cumulative: Vec<f64>,
    defect: f64,
}

impl FirstReturnTable {
    pub fn order(&self) -> usize {
        self.f.len() - 1
    }

    /// `f^(n)`; zero beyond the computed order.
    pub fn f(&self, n: usize) -> f64 {
        self.f.get(n).copied().unwrap_or(0.0)
    }

    pub fn f_slice(&self) -> &[f64] {
        &self.f
    }

    pub fn cumulative(&self, n: usize) -> f64 {
        let i = n.min(self.cumulative.len() - 1);
        self.cumulative[i]
    }

    /// `Σ_{n≤N} f^(n)` — the partial total, a lower bound for `F(x,y|1)`.
    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn defect(&self) -> f64 {
        self.defect
    }

    /// The truncated first-passage series `F(x,y|z)` with these coefficients.
    pub fn f_series(&self) -> TruncatedSeries {
        TruncatedSeries::from_coeffs(self.f.clone())
    }

    /// `Σ_{n≤N} n·f^(n)` — partial mean passage time, a lower bound for τ̄.
    pub fn tau_partial(&self) -> f64 {
        self.f
            .iter()
            .enumerate()
            .map(|(n, &v)| n as f64 * v)
            .sum()
    }
}

/// Computes `f^(n)(x,y)` for `n = 1..=order` by the forward taboo recursion:
/// evolve the mass that has avoided `y` so far, peel off what lands on `y`.
pub fn first_return_probs(
    k: &Kernel,
    x: StateId,
    y: StateId,
    order: usize,
    policy: &TruncationPolicy,
) -> Result<FirstReturnTable, PassageError> {
    if order < 1 {
        return Err(PassageError::OrderTooSmall);
    }
    k.check_state(x)?;
    k.check_state(y)?;
    policy.validate()?;

    let mut f = Vec::with_capacity(order + 1);
    f.push(0.0);

    // One step from x: what lands on y is f^(1), the rest is the surviving
    // taboo mass.
    let mut alive = evolve_distribution(k, &MassVector::dirac(x), policy)?;
    f.push(alive.take(y));

    for _ in 2..=order {
        alive = evolve_distribution(k, &alive, policy)?;
        f.push(alive.take(y));
    }

    let mut cumulative = Vec::with_capacity(order + 1);
    let mut acc = 0.0;
    for &v in &f {
        acc += v;
        cumulative.push(acc);
    }
    Ok(FirstReturnTable {
        source: x,
        target: y,
        f,
        cumulative,
        defect: alive.defect(),
    })
}

/// The truncated Green function `G(x,y|z) = Σ_{n≤N} p^(n)(x,y) zⁿ`,
/// with `c_0 = δ_{xy}`.
pub fn green_series(
    k: &Kernel,
    x: StateId,
    y: StateId,
    order: usize,
    policy: &TruncationPolicy,
) -> Result<TruncatedSeries, PassageError> {
    k.check_state(x)?;
    k.check_state(y)?;
    policy.validate()?;
    let mut coeffs = Vec::with_capacity(order + 1);
    let mut nu = MassVector::dirac(x);
    coeffs.push(nu.get(y));
    for _ in 1..=order {
        nu = evolve_distribution(k, &nu, policy)?;
        coeffs.push(nu.get(y));
    }
    Ok(TruncatedSeries::from_coeffs(coeffs))
}

/// Recovers `F = (G_{xy} − δ_{xy}) / G_{yy}` by series division.
///
/// This inverts the renewal identity `G(x,y|z) = δ_{xy} + F(x,y|z) G(y,y|z)`;
/// it must agree with [`first_return_probs`] coefficient-by-coefficient.
pub fn f_series_from_g(
    gxy: &TruncatedSeries,
    gyy: &TruncatedSeries,
    x_equals_y: bool,
) -> Result<TruncatedSeries, PassageError> {
    let c0 = gyy.coeff(0);
    if (c0 - 1.0).abs() > 1e-9 {
        return Err(PassageError::BadGreenConstantTerm(c0));
    }
    let numerator = if x_equals_y {
        gxy.sub(&TruncatedSeries::one(gxy.order()))
    } else {
        gxy.clone()
    };
    Ok(numerator.div(gyy)?)
}

/// The closed form for the nearest-neighbour chain's return function:
/// `F(0,0|z) = 2pz² / (1 + √(1 − 4z²p(1−p)))`.
///
/// At `z = 1` this is `p/(1−p)` for `p < 1/2` (transient) and `1` for
/// `p ≥ 1/2` (recurrent).
pub fn closed_form_f00(p: f64, z: f64) -> Result<f64, PassageError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(PassageError::OutOfDomain {
            name: "p",
            value: p,
            domain: "(0, 1)",
        });
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(PassageError::OutOfDomain {
            name: "z",
            value: z,
            domain: "[0, 1]",
        });
    }
    // The discriminant is ≥ 0 on the whole domain (4p(1−p) ≤ 1); the max
    // guards the z = 1, p = 1/2 corner against a −1e-17 from rounding.
    let disc = (1.0 - 4.0 * z * z * p * (1.0 - p)).max(0.0);
    Ok(2.0 * p * z * z / (1.0 + disc.sqrt()))
}

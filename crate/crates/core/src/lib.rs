//! Analysis toolkit for Markov chains on countable state spaces.
//!
//! The guiding question: when does a chain keep essentially all of its mass
//! inside some finite window? Concretely, for a finite set `A` and
//! `ε ∈ (0,1)`,
//!
//! ```text
//! sup_{x∈X} Σ_{y∉A} p(x,y) < ε
//! ```
//!
//! certifying such a pair forces positive recurrence and comes with explicit
//! quantitative consequences for return and hitting times, all of which this
//! crate computes and checks numerically:
//!
//! * [`chain`] — kernels, row distributions, mass vectors, and the built-in
//!   chain families, with truncation that turns lost mass into an explicit
//!   defect instead of silent error;
//! * [`series`] — truncated power series and Abelian `z → 1⁻` limits, the
//!   workhorses behind generating functions;
//! * [`passage`] — first-passage/return probabilities `f^(n)`, Green
//!   functions `G(x,y|z)`, and the renewal identity connecting them;
//! * [`classify`] — transient / positive-recurrent / null-recurrent verdicts
//!   with the numeric evidence attached;
//! * [`tightness`] — the criterion above: verified certificates, greedy
//!   search for a witnessing set, and structural refutations;
//! * [`bounds`] — the return-time window `1 ≥ Σ_{x∈A} 1/τ̄_x ≥ 1−ε`, hitting
//!   tails `P(T_A ≥ n) ≤ ε^{n−1}`, reversible two-step and Green-function
//!   lower bounds, and the `m ∝ 1/τ̄` proportionality check;
//! * [`montecarlo`] — seeded, reproducible simulation that cross-checks the
//!   exact computations.
//!
//! Numerical honesty is the house style: truncated sums are treated as the
//! one-sided bounds they are, so checks either certify, certify a violation,
//! or say "inconclusive" — they never let rounding or truncation masquerade
//! as a result.

pub mod bounds;
pub mod chain;
pub mod classify;
mod linalg;
pub mod montecarlo;
pub mod passage;
pub mod series;
pub mod tightness;

pub use chain::{make_chain, ChainSpec, Kernel, MassVector, StateId, TruncationPolicy};
pub use classify::{classify, stationary_measure_finite, Verdict};
pub use passage::{closed_form_f00, first_return_probs, green_series};
pub use series::{abelian_limit, TruncatedSeries};
pub use tightness::{compactness_verdict, find_tight_set, tail_sup, TightnessCertificate};

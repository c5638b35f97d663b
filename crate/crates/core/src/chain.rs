//! Countable-state chains: the stochastic kernel `P`, sparse distributions,
//! bounded test functions, and the truncation bookkeeping that keeps every
//! quantity derived from an infinite chain a certified one-sided bound.
//!
//! The kernel acts on bounded functions as `(Pf)(x) = Σ_y p(x,y) f(y)` and on
//! distributions (the preadjoint) as `(νP)(y) = Σ_x ν(x) p(x,y)`; the latter
//! is mass-preserving, which is what [`evolve_distribution`] checks its
//! truncation accounting against.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Row sums may deviate from 1 by at most this much before a kernel is
/// rejected as non-stochastic. Inputs inside the tolerance are renormalized
/// to unit sum so that downstream mass accounting holds to ~1e-15 per step
/// instead of leaking the input's rounding slack.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Mass-preservation slack for a single distribution evolution step.
pub const MASS_TOL: f64 = 1e-12;

/// Canonical label of a state within a chain's (stable) enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for StateId {
    fn from(index: usize) -> Self {
        StateId(index)
    }
}

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("state {0} out of range: chain has {1} states")]
    StateOutOfRange(StateId, usize),
    #[error("row weights sum to {sum:.12e}, outside 1 ± {STOCHASTIC_TOL:e}")]
    RowNotStochastic { sum: f64 },
    #[error("duplicate target state {target} in row")]
    DuplicateTarget { target: StateId },
    #[error("weight {weight} at target {target} outside (0, 1]")]
    WeightOutOfRange { target: StateId, weight: f64 },
    #[error("row is empty")]
    EmptyRow,
    #[error("field `{field}`: {message}")]
    InvalidSpec { field: &'static str, message: String },
    #[error("truncation policy: {0}")]
    InvalidPolicy(String),
    #[error("non-finite value {value} in bounded function at {at}")]
    NonFiniteFunction { value: f64, at: String },
}

impl ChainError {
    fn spec(field: &'static str, message: impl Into<String>) -> Self {
        ChainError::InvalidSpec {
            field,
            message: message.into(),
        }
    }
}

/// One row `p(x, ·)` of the kernel: the outgoing distribution of a state.
///
/// Entry order is part of the contract — simulation samples by inverse CDF
/// over this order, so it must be stable. All constructors emit entries in
/// ascending target order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDistribution {
    entries: Vec<(StateId, f64)>,
}

impl RowDistribution {
    /// Validates positivity, uniqueness and stochasticity (sum within
    /// [`STOCHASTIC_TOL`] of 1), then renormalizes to exact unit sum.
    pub fn new(entries: Vec<(StateId, f64)>) -> Result<Self, ChainError> {
        if entries.is_empty() {
            return Err(ChainError::EmptyRow);
        }
        let mut seen = BTreeSet::new();
        let mut sum = 0.0;
        for &(target, weight) in &entries {
            if !(weight > 0.0 && weight <= 1.0) || !weight.is_finite() {
                return Err(ChainError::WeightOutOfRange { target, weight });
            }
            if !seen.insert(target) {
                return Err(ChainError::DuplicateTarget { target });
            }
            sum += weight;
        }
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(ChainError::RowNotStochastic { sum });
        }
        let entries = entries.into_iter().map(|(t, w)| (t, w / sum)).collect();
        Ok(RowDistribution { entries })
    }

    pub fn entries(&self) -> &[(StateId, f64)] {
        &self.entries
    }

    /// Weight on a specific target (0 if absent).
    pub fn weight(&self, target: StateId) -> f64 {
        self.entries
            .iter()
            .find(|(t, _)| *t == target)
            .map_or(0.0, |(_, w)| *w)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Declarative chain description; the JSON wire format of the toolkit.
///
/// ```json
/// {"type": "finite", "rows": [[0.0, 1.0], [1.0, 0.0]]}
/// {"type": "paper_bd", "p": 0.7}
/// {"type": "birth_death", "up": [1.0, 0.3], "down": [0.7, 0.7]}
/// {"type": "funnel", "eps": 0.2, "M": 50}
/// {"type": "swap"}
/// {"type": "lazy", "p": 0.5}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChainSpec {
    /// Explicit row-major stochastic matrix.
    Finite { rows: Vec<Vec<f64>> },
    /// The nearest-neighbour chain on ℕ with `p(0,1) = 1`, `p(n,n+1) = 1−p`,
    /// `p(n+1,n) = p`. Infinite state space.
    PaperBd { p: f64 },
    /// General birth–death chain on `{0..=L}` with `L = up.len()`:
    /// `p(i,i+1) = up[i]`, `p(i+1,i) = down[i]`, remainder as a self-loop.
    BirthDeath { up: Vec<f64>, down: Vec<f64> },
    /// States `{0..=M}`: `p(x,x+1) = eps` for `x < M`, `p(M,M) = eps`,
    /// `p(x,0) = 1−eps`. Every row drops mass `1−eps` onto state 0.
    Funnel {
        eps: f64,
        #[serde(rename = "M")]
        m: usize,
    },
    /// Two states exchanging deterministically.
    Swap,
    /// Two states, stay with probability `p`, move with `1−p`.
    Lazy { p: f64 },
}

fn check_unit_interval(field: &'static str, v: f64) -> Result<(), ChainError> {
    if !(v > 0.0 && v < 1.0) || !v.is_finite() {
        return Err(ChainError::spec(
            field,
            format!("{v} is outside the open interval (0, 1)"),
        ));
    }
    Ok(())
}

/// Internal family representation: every built-in family except `paper_bd`
/// has a finite state space and gets its rows prebuilt and validated once.
#[derive(Debug, Clone)]
pub(crate) enum Family {
    Finite(Vec<RowDistribution>),
    PaperBd { p: f64 },
}

/// A stochastic kernel: enumerable state space plus a pure row oracle.
#[derive(Debug, Clone)]
pub struct Kernel {
    family: Family,
    spec: ChainSpec,
    name: String,
}

impl Kernel {
    /// Number of states, or `None` for an unbounded state space.
    pub fn state_count(&self) -> Option<usize> {
        match &self.family {
            Family::Finite(rows) => Some(rows.len()),
            Family::PaperBd { .. } => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.state_count().is_some()
    }

    /// The outgoing distribution of `x`. Pure: same input, same output.
    pub fn row(&self, x: StateId) -> Result<RowDistribution, ChainError> {
        match &self.family {
            Family::Finite(rows) => rows
                .get(x.0)
                .cloned()
                .ok_or(ChainError::StateOutOfRange(x, rows.len())),
            Family::PaperBd { p } => {
                // Rows are tiny; rebuilding skips the renormalization since
                // the nominal weights already sum to 1 after `new`.
                if x.0 == 0 {
                    RowDistribution::new(vec![(StateId(1), 1.0)])
                } else {
                    RowDistribution::new(vec![(StateId(x.0 - 1), *p), (StateId(x.0 + 1), 1.0 - *p)])
                }
            }
        }
    }

    /// Human-readable family name and parameters.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// The declarative spec this kernel was built from (for report embedding).
    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    pub(crate) fn family(&self) -> &Family {
        &self.family
    }

    /// Errors unless `x` is a valid state.
    pub fn check_state(&self, x: StateId) -> Result<(), ChainError> {
        match self.state_count() {
            Some(n) if x.0 >= n => Err(ChainError::StateOutOfRange(x, n)),
            _ => Ok(()),
        }
    }
}

/// Builds a validated kernel from a declarative spec.
pub fn make_chain(spec: &ChainSpec) -> Result<Kernel, ChainError> {
    let (family, name) = match spec {
        ChainSpec::Finite { rows } => {
            if rows.is_empty() {
                return Err(ChainError::spec("rows", "matrix must be non-empty"));
            }
            let n = rows.len();
            let mut built = Vec::with_capacity(n);
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(ChainError::spec(
                        "rows",
                        format!("row {i} has length {}, expected {n}", row.len()),
                    ));
                }
                let entries: Vec<_> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w != 0.0)
                    .map(|(j, &w)| (StateId(j), w))
                    .collect();
                built.push(RowDistribution::new(entries).map_err(|e| {
                    ChainError::spec("rows", format!("row {i}: {e}"))
                })?);
            }
            (Family::Finite(built), format!("finite({n} states)"))
        }
        ChainSpec::PaperBd { p } => {
            check_unit_interval("p", *p)?;
            (Family::PaperBd { p: *p }, format!("paper_bd(p={p})"))
        }
        ChainSpec::BirthDeath { up, down } => {
            if up.is_empty() || up.len() != down.len() {
                return Err(ChainError::spec(
                    "up",
                    format!(
                        "`up` and `down` must be non-empty and equally long (got {} and {})",
                        up.len(),
                        down.len()
                    ),
                ));
            }
            let l = up.len();
            let mut built = Vec::with_capacity(l + 1);
            for i in 0..=l {
                let mut entries = Vec::new();
                let mut out = 0.0;
                if i > 0 {
                    let d = down[i - 1];
                    if !(0.0..=1.0).contains(&d) {
                        return Err(ChainError::spec("down", format!("down[{}] = {d}", i - 1)));
                    }
                    if d > 0.0 {
                        entries.push((StateId(i - 1), d));
                    }
                    out += d;
                }
                let stay_slot = entries.len();
                if i < l {
                    let u = up[i];
                    if !(0.0..=1.0).contains(&u) {
                        return Err(ChainError::spec("up", format!("up[{i}] = {u}")));
                    }
                    if u > 0.0 {
                        entries.push((StateId(i + 1), u));
                    }
                    out += u;
                }
                let stay = 1.0 - out;
                if stay < -STOCHASTIC_TOL {
                    return Err(ChainError::spec(
                        "up",
                        format!("rates out of state {i} sum to {out}, exceeding 1"),
                    ));
                }
                if stay > 0.0 {
                    entries.insert(stay_slot, (StateId(i), stay));
                }
                built.push(RowDistribution::new(entries).map_err(|e| {
                    ChainError::spec("up", format!("state {i}: {e}"))
                })?);
            }
            (
                Family::Finite(built),
                format!("birth_death({} states)", l + 1),
            )
        }
        ChainSpec::Funnel { eps, m } => {
            check_unit_interval("eps", *eps)?;
            if *m < 1 {
                return Err(ChainError::spec("M", "must be at least 1"));
            }
            let mut built = Vec::with_capacity(m + 1);
            for x in 0..=*m {
                let entries = if x == 0 {
                    vec![(StateId(0), 1.0 - eps), (StateId(1), *eps)]
                } else if x < *m {
                    vec![(StateId(0), 1.0 - eps), (StateId(x + 1), *eps)]
                } else {
                    vec![(StateId(0), 1.0 - eps), (StateId(*m), *eps)]
                };
                built.push(RowDistribution::new(entries)?);
            }
            (Family::Finite(built), format!("funnel(eps={eps}, M={m})"))
        }
        ChainSpec::Swap => {
            let built = vec![
                RowDistribution::new(vec![(StateId(1), 1.0)])?,
                RowDistribution::new(vec![(StateId(0), 1.0)])?,
            ];
            (Family::Finite(built), "swap".to_string())
        }
        ChainSpec::Lazy { p } => {
            check_unit_interval("p", *p)?;
            let built = vec![
                RowDistribution::new(vec![(StateId(0), *p), (StateId(1), 1.0 - p)])?,
                RowDistribution::new(vec![(StateId(0), 1.0 - p), (StateId(1), *p)])?,
            ];
            (Family::Finite(built), format!("lazy(p={p})"))
        }
    };
    Ok(Kernel {
        family,
        spec: spec.clone(),
        name,
    })
}

/// Caps on state-space exploration. `mass_floor` sweeps small entries into
/// the defect (certified loss); `max_states` keeps only the heaviest states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub max_states: usize,
    pub mass_floor: f64,
}

impl Default for TruncationPolicy {
    /// Exact on every built-in test chain: the floor is off and the state cap
    /// is far beyond what any bounded-horizon analysis can populate.
    fn default() -> Self {
        TruncationPolicy {
            max_states: 10_000,
            mass_floor: 0.0,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<(), ChainError> {
        if self.max_states < 1 {
            return Err(ChainError::InvalidPolicy(
                "max_states must be at least 1".into(),
            ));
        }
        if !(0.0..=1e-3).contains(&self.mass_floor) {
            return Err(ChainError::InvalidPolicy(format!(
                "mass_floor {} outside [0, 1e-3]",
                self.mass_floor
            )));
        }
        Ok(())
    }
}

/// Sparse sub-probability distribution with an explicit truncation defect.
///
/// Invariant: `mass() + defect ∈ [0, 1 + 1e-9]`; the defect only ever grows,
/// so every entry is a certified lower bound for the untruncated value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassVector {
    entries: BTreeMap<StateId, f64>,
    defect: f64,
}

impl MassVector {
    pub fn new() -> Self {
        MassVector {
            entries: BTreeMap::new(),
            defect: 0.0,
        }
    }

    /// Point mass at `x`.
    pub fn dirac(x: StateId) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(x, 1.0);
        MassVector {
            entries,
            defect: 0.0,
        }
    }

    pub fn get(&self, x: StateId) -> f64 {
        self.entries.get(&x).copied().unwrap_or(0.0)
    }

    pub fn add(&mut self, x: StateId, mass: f64) {
        if mass != 0.0 {
            *self.entries.entry(x).or_insert(0.0) += mass;
        }
    }

    /// Sum of the explicit entries (excludes the defect).
    pub fn mass(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn defect(&self) -> f64 {
        self.defect
    }

    pub fn add_defect(&mut self, d: f64) {
        self.defect += d;
    }

    /// Entries plus defect — conserved by evolution.
    pub fn total(&self) -> f64 {
        self.mass() + self.defect
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// Removes and returns the mass at `x` (used by taboo recursions that
    /// absorb a target state).
    pub fn take(&mut self, x: StateId) -> f64 {
        self.entries.remove(&x).unwrap_or(0.0)
    }

    /// Enforces the policy: sweeps sub-floor entries, then drops the lightest
    /// states beyond `max_states` (ties keep the smaller id), all into defect.
    pub fn enforce(&mut self, policy: &TruncationPolicy) {
        if policy.mass_floor > 0.0 {
            let doomed: Vec<StateId> = self
                .entries
                .iter()
                .filter(|(_, &m)| m < policy.mass_floor)
                .map(|(&k, _)| k)
                .collect();
            for k in doomed {
                self.defect += self.entries.remove(&k).unwrap();
            }
        }
        if self.entries.len() > policy.max_states {
            let mut by_mass: Vec<(StateId, f64)> = self.iter().collect();
            by_mass.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .expect("masses are finite")
                    .then(a.0.cmp(&b.0))
            });
            for (k, m) in by_mass.drain(policy.max_states..) {
                self.entries.remove(&k);
                self.defect += m;
            }
        }
    }
}

impl Default for MassVector {
    fn default() -> Self {
        Self::new()
    }
}

/// An element of `l∞(X)`: explicit values over a finite support, a default
/// elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedFunction {
    values: BTreeMap<StateId, f64>,
    default: f64,
}

impl BoundedFunction {
    pub fn new(values: BTreeMap<StateId, f64>, default: f64) -> Result<Self, ChainError> {
        if !default.is_finite() {
            return Err(ChainError::NonFiniteFunction {
                value: default,
                at: "default".into(),
            });
        }
        for (&k, &v) in &values {
            if !v.is_finite() {
                return Err(ChainError::NonFiniteFunction {
                    value: v,
                    at: format!("state {k}"),
                });
            }
        }
        Ok(BoundedFunction { values, default })
    }

    pub fn constant(c: f64) -> Result<Self, ChainError> {
        Self::new(BTreeMap::new(), c)
    }

    /// Indicator of a finite set: 1 on the set, 0 elsewhere.
    pub fn indicator<I: IntoIterator<Item = StateId>>(set: I) -> Self {
        let values = set.into_iter().map(|s| (s, 1.0)).collect();
        BoundedFunction {
            values,
            default: 0.0,
        }
    }

    pub fn get(&self, x: StateId) -> f64 {
        self.values.get(&x).copied().unwrap_or(self.default)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .values()
            .fold(self.default.abs(), |acc, v| acc.max(v.abs()))
    }
}

/// `(Pf)(x) = Σ_y p(x,y) f(y)` — one application of the Markov operator,
/// read off at a single state.
pub fn apply_operator(k: &Kernel, f: &BoundedFunction, x: StateId) -> Result<f64, ChainError> {
    let row = k.row(x)?;
    Ok(row.entries().iter().map(|&(y, w)| w * f.get(y)).sum())
}

/// One step of the preadjoint: `ν ↦ νP`, with truncation swept into the
/// defect so that entries stay certified lower bounds.
pub fn evolve_distribution(
    k: &Kernel,
    nu: &MassVector,
    policy: &TruncationPolicy,
) -> Result<MassVector, ChainError> {
    policy.validate()?;
    let mut out = MassVector::new();
    out.defect = nu.defect;
    for (x, mass) in nu.iter() {
        let row = k.row(x)?;
        for &(y, w) in row.entries() {
            out.add(y, mass * w);
        }
    }
    out.enforce(policy);
    Ok(out)
}

/// The row `p^(n)(x, ·)` as a mass vector: `n` applications of the preadjoint
/// to the point mass at `x`. Entries are exact when the defect stays 0.
pub fn n_step(
    k: &Kernel,
    x: StateId,
    n: usize,
    policy: &TruncationPolicy,
) -> Result<MassVector, ChainError> {
    k.check_state(x)?;
    let mut nu = MassVector::dirac(x);
    for _ in 0..n {
        nu = evolve_distribution(k, &nu, policy)?;
    }
    Ok(nu)
}

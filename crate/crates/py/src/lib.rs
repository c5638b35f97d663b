//! Python bindings for the walkscope chain-analysis toolkit.
//!
//! Exposes a thin veneer over the core crate: load a chain from the same
//! JSON description the CLI accepts, inspect kernel rows, classify
//! recurrence, search for tight sets, and draw seed-deterministic sample
//! paths. Everything numeric is computed by the Rust core; no arithmetic is
//! reimplemented on this side of the boundary.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use walkscope::classify::{Thresholds, DEFAULT_CLASSIFY_ORDER};
use walkscope::montecarlo::simulate_path;
use walkscope::tightness::TightSearch;
use walkscope::{
    classify, find_tight_set, first_return_probs, make_chain, ChainSpec, Kernel, StateId,
    TruncationPolicy, Verdict,
};

fn to_value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A countable-state Markov chain, loaded from the JSON spec the CLI uses,
/// e.g. `{"type": "paper_bd", "p": 0.7}` or `{"type": "funnel", "eps": 0.2,
/// "M": 50}`.
#[pyclass]
struct Chain {
    kernel: Kernel,
    policy: TruncationPolicy,
}

#[pymethods]
impl Chain {
    #[new]
    fn new(spec_json: &str) -> PyResult<Self> {
        let spec: ChainSpec = serde_json::from_str(spec_json)
            .map_err(|e| PyValueError::new_err(format!("bad chain spec: {e}")))?;
        let kernel = make_chain(&spec).map_err(to_value_err)?;
        Ok(Chain {
            kernel,
            policy: TruncationPolicy::default(),
        })
    }

    /// Number of states, or `None` for chains on all of ℕ.
    #[getter]
    fn state_count(&self) -> Option<usize> {
        self.kernel.state_count()
    }

    #[getter]
    fn name(&self) -> String {
        self.kernel.name().to_owned()
    }

    /// One kernel row, as `[(state, probability), ...]` sorted by state.
    fn row(&self, x: usize) -> PyResult<Vec<(usize, f64)>> {
        let row = self.kernel.row(StateId(x)).map_err(to_value_err)?;
        Ok(row.entries().iter().map(|&(s, p)| (s.0, p)).collect())
    }

    /// First-return probabilities `f^(n)(x,x)` for `n = 0..=order`
    /// (`f[0] = 0` by convention).
    #[pyo3(signature = (x = 0, order = 64))]
    fn first_return(&self, x: usize, order: usize) -> PyResult<Vec<f64>> {
        let table = first_return_probs(&self.kernel, StateId(x), StateId(x), order, &self.policy)
            .map_err(to_value_err)?;
        Ok(table.f_slice().to_vec())
    }

    /// Recurrence classification at state `x`.
    ///
    /// Returns a dict: `verdict` (one of `"Transient"`, `"NullRecurrent"`,
    /// `"PositiveRecurrent"`, `"Inconclusive"`), `return_mass` (best estimate
    /// of the total return probability), `mean_return_time` (`None` unless
    /// the partial sums converged), `tau_converged`, `abelian_tau`, `order`.
    #[pyo3(signature = (x = 0, order = DEFAULT_CLASSIFY_ORDER))]
    fn classify<'py>(&self, py: Python<'py>, x: usize, order: usize) -> PyResult<Bound<'py, PyDict>> {
        let report = classify(
            &self.kernel,
            StateId(x),
            order,
            &self.policy,
            &Thresholds::default(),
        )
        .map_err(to_value_err)?;
        let out = PyDict::new(py);
        out.set_item("verdict", report.verdict.to_string())?;
        out.set_item("return_mass", report.f1_refined)?;
        // The partial sums Σ n·f^(n) converge for transient chains too (to
        // the mean over returning paths only); they estimate τ̄ only when the
        // verdict says the full mean exists.
        out.set_item(
            "mean_return_time",
            (report.verdict == Verdict::PositiveRecurrent).then_some(report.tau_estimate),
        )?;
        out.set_item("tau_converged", report.tau_converged)?;
        out.set_item("abelian_tau", report.abelian_tau.value)?;
        out.set_item("order", report.order_used)?;
        Ok(out)
    }

    /// Greedy search for a finite set `A` whose worst single-step escape
    /// probability is below `epsilon`. Returns `(sorted_states, tail)` on
    /// success, `None` when no such set exists within the budget.
    #[pyo3(signature = (epsilon, budget = 4096))]
    fn tight_set(&self, epsilon: f64, budget: usize) -> PyResult<Option<(Vec<usize>, f64)>> {
        match find_tight_set(&self.kernel, epsilon, budget).map_err(to_value_err)? {
            TightSearch::Found(cert) => Ok(Some((
                cert.set.iter().map(|s| s.0).collect(),
                cert.achieved_tail,
            ))),
            TightSearch::NotFound { .. } => Ok(None),
        }
    }

    /// Sample path `Z_0..Z_steps`. Identical `(start, steps, seed)` always
    /// produce the identical path, across processes and platforms.
    #[pyo3(signature = (start = 0, steps = 1000, seed = 0))]
    fn simulate(&self, start: usize, steps: usize, seed: u64) -> PyResult<Vec<usize>> {
        let path =
            simulate_path(&self.kernel, StateId(start), steps, seed).map_err(to_value_err)?;
        Ok(path.states.into_iter().map(|s| s.0).collect())
    }

    fn __repr__(&self) -> String {
        match self.kernel.state_count() {
            Some(n) => format!("Chain({}, {} states)", self.kernel.name(), n),
            None => format!("Chain({}, infinite)", self.kernel.name()),
        }
    }
}

/// Closed-form `F(0,0|z)` for the reflecting nearest-neighbour walk with
/// down-probability `p`: the generating function of the first-return time,
/// `(1 - sqrt(1 - 4p(1-p)z²)) / (2(1-p))`.
#[pyfunction]
fn closed_form_f00(p: f64, z: f64) -> PyResult<f64> {
    walkscope::closed_form_f00(p, z).map_err(to_value_err)
}

#[pymodule]
fn walkscope_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Chain>()?;
    m.add_function(wrap_pyfunction!(closed_form_f00, m)?)?;
    Ok(())
}

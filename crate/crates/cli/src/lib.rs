//! Command-line front end for the walkscope library.
//!
//! Five subcommands map onto the library's analysis surfaces — `classify`,
//! `tightness`, `bounds`, `simulate`, `series` — each writing a JSON report
//! (with the fully resolved configuration embedded, so reports are
//! self-contained and replayable) plus plottable CSV where it makes sense.
//!
//! Exit codes separate three very different situations:
//!
//! * `0` — the analysis ran; this includes "the criterion is refuted" and
//!   "inconclusive", which are findings, not failures;
//! * `1` — a bound that is guaranteed for a certified `(A, ε)` pair was
//!   violated numerically: a bug signal, never expected on valid input;
//! * `2` — the input was invalid (malformed chain file, bad flag value),
//!   with a diagnostic naming the offending field.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use walkscope::bounds::{
    check_return_time_bounds, compute_reversibility_measure, green_lower_bound,
    hitting_time_distribution, reversible_lower_bound, BoundOutcome, BoundsError, LemmaBound,
    Reversibility,
};
use walkscope::chain::{make_chain, ChainError, ChainSpec, Kernel, StateId, TruncationPolicy};
use walkscope::classify::{classify, ClassifyError, Thresholds, DEFAULT_CLASSIFY_ORDER};
use walkscope::montecarlo::{
    estimate_return_time, hitting_time_samples, occupation_fraction, simulate_path, McError,
};
use walkscope::passage::{first_return_probs, green_series, PassageError};
use walkscope::tightness::{
    compactness_verdict, default_epsilon_grid, find_tight_set, n_step_tail_check, tail_sup,
    TightSearch, TightnessCertificate, TightnessError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BOUND_VIOLATION: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: not a valid chain spec: {message}", path.display())]
    BadChainFile { path: PathBuf, message: String },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Tightness(#[from] TightnessError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Passage(#[from] PassageError),
    #[error(transparent)]
    MonteCarlo(#[from] McError),
    #[error("serializing report: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Parser)]
#[command(
    name = "walkscope",
    version,
    about = "Analyze countable-state Markov chains: recurrence, tightness, bounds, simulation"
)]
struct Cli {
    /// Directory to write reports and CSV files into.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a chain as transient / null / positive recurrent.
    Classify(ClassifyArgs),
    /// Check the finite-window tightness criterion (verify a set, search for
    /// one, or sweep the default ε grid).
    Tightness(TightnessArgs),
    /// Verify every quantitative bound a certified (A, ε) pair guarantees.
    Bounds(BoundsArgs),
    /// Seeded Monte Carlo: trajectories, return times, occupation, survival.
    Simulate(SimulateArgs),
    /// Export first-passage and n-step series as CSV.
    Series(SeriesArgs),
}

#[derive(Args)]
struct ClassifyArgs {
    /// Path to a JSON chain spec.
    #[arg(long)]
    chain: PathBuf,
    /// State whose return behaviour decides the verdict.
    #[arg(long, default_value_t = 0)]
    state: usize,
    /// Series order for the classification evidence.
    #[arg(long, short = 'N', default_value_t = DEFAULT_CLASSIFY_ORDER)]
    order: usize,
}

#[derive(Args)]
struct TightnessArgs {
    /// Path to a JSON chain spec.
    #[arg(long)]
    chain: PathBuf,
    /// Escape-mass threshold ε ∈ (0,1). Omit (together with --set) to sweep
    /// the default grid.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Explicit candidate set A as comma-separated state indices; verified
    /// as-is instead of searching.
    #[arg(long)]
    set: Option<String>,
    /// Cap on states explored by the search.
    #[arg(long, default_value_t = 4096)]
    budget: usize,
}

#[derive(Args)]
struct BoundsArgs {
    /// Path to a JSON chain spec.
    #[arg(long)]
    chain: PathBuf,
    /// The finite set A as comma-separated state indices.
    #[arg(long)]
    set: String,
    /// The ε the certificate is claimed for.
    #[arg(long)]
    epsilon: f64,
    /// Start state for hitting-time and reversible checks.
    #[arg(long, default_value_t = 0)]
    state: usize,
    /// Series order for mean return times and the Green function.
    #[arg(long, short = 'N', default_value_t = 512)]
    order: usize,
    /// Horizon for the hitting-time distribution.
    #[arg(long, default_value_t = 64)]
    nmax: usize,
    /// Evaluation point for the Green-function bound, in [0,1).
    #[arg(long, default_value_t = 0.9)]
    z: f64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Path to a JSON chain spec.
    #[arg(long)]
    chain: PathBuf,
    /// Target set A for occupation and hitting statistics.
    #[arg(long, default_value = "0")]
    set: String,
    /// Start state.
    #[arg(long, default_value_t = 0)]
    state: usize,
    /// Independent return-time trials.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Trajectory length for the occupation trace.
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    /// Censoring horizon for per-trial hitting/return times.
    #[arg(long, default_value_t = 10_000)]
    cap: usize,
    /// RNG seed; identical seeds reproduce identical reports.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SeriesArgs {
    /// Path to a JSON chain spec.
    #[arg(long)]
    chain: PathBuf,
    /// Source state x.
    #[arg(long, default_value_t = 0)]
    state: usize,
    /// Target state y (defaults to the source: first-return series).
    #[arg(long)]
    target: Option<usize>,
    /// Highest step count exported.
    #[arg(long, short = 'N', default_value_t = 64)]
    order: usize,
}

/// A fully resolved run: the chain spec inlined (not the path), every flag
/// explicit. This is what reports embed, so a report alone suffices to
/// reproduce its numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Classify {
        chain: ChainSpec,
        state: usize,
        order: usize,
    },
    Tightness {
        chain: ChainSpec,
        epsilon: Option<f64>,
        set: Option<Vec<usize>>,
        budget: usize,
    },
    Bounds {
        chain: ChainSpec,
        set: Vec<usize>,
        epsilon: f64,
        state: usize,
        order: usize,
        nmax: usize,
        z: f64,
    },
    Simulate {
        chain: ChainSpec,
        set: Vec<usize>,
        state: usize,
        trials: usize,
        steps: usize,
        cap: usize,
        seed: u64,
    },
    Series {
        chain: ChainSpec,
        state: usize,
        target: usize,
        order: usize,
    },
}

/// What a run produced: the exit code and the report document that was
/// written to disk (config embedded under `"config"`, findings under
/// `"result"`).
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: Value,
    pub report_path: PathBuf,
}

pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap reports usage errors as 2 and --help/--version as 0,
            // which matches the exit-code contract.
            let _ = e.print();
            return e.exit_code();
        }
    };
    let config = match resolve(cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    match run(&config, &cli.out) {
        Ok(outcome) => outcome.exit_code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

/// Turn parsed flags into a self-contained [`RunConfig`], reading and
/// validating the chain file.
fn resolve(command: Command) -> Result<RunConfig, CliError> {
    Ok(match command {
        Command::Classify(a) => RunConfig::Classify {
            chain: load_spec(&a.chain)?,
            state: a.state,
            order: a.order,
        },
        Command::Tightness(a) => RunConfig::Tightness {
            chain: load_spec(&a.chain)?,
            epsilon: a.epsilon,
            set: a.set.as_deref().map(parse_set).transpose()?,
            budget: a.budget,
        },
        Command::Bounds(a) => RunConfig::Bounds {
            chain: load_spec(&a.chain)?,
            set: parse_set(&a.set)?,
            epsilon: a.epsilon,
            state: a.state,
            order: a.order,
            nmax: a.nmax,
            z: a.z,
        },
        Command::Simulate(a) => RunConfig::Simulate {
            chain: load_spec(&a.chain)?,
            set: parse_set(&a.set)?,
            state: a.state,
            trials: a.trials,
            steps: a.steps,
            cap: a.cap,
            seed: a.seed,
        },
        Command::Series(a) => RunConfig::Series {
            chain: load_spec(&a.chain)?,
            state: a.state,
            target: a.target.unwrap_or(a.state),
            order: a.order,
        },
    })
}

/// Execute a resolved configuration, writing the report (and any CSV
/// companions) into `out_dir`.
pub fn run(config: &RunConfig, out_dir: &FsPath) -> Result<RunOutcome, CliError> {
    let (name, exit_code, result) = match config {
        RunConfig::Classify { chain, state, order } => run_classify(chain, *state, *order)?,
        RunConfig::Tightness {
            chain,
            epsilon,
            set,
            budget,
        } => run_tightness(chain, *epsilon, set.as_deref(), *budget)?,
        RunConfig::Bounds {
            chain,
            set,
            epsilon,
            state,
            order,
            nmax,
            z,
        } => run_bounds(chain, set, *epsilon, *state, *order, *nmax, *z, out_dir)?,
        RunConfig::Simulate {
            chain,
            set,
            state,
            trials,
            steps,
            cap,
            seed,
        } => run_simulate(chain, set, *state, *trials, *steps, *cap, *seed, out_dir)?,
        RunConfig::Series {
            chain,
            state,
            target,
            order,
        } => run_series(chain, *state, *target, *order, out_dir)?,
    };
    let report = json!({ "config": config, "result": result });
    let report_path = write_text(
        out_dir,
        &format!("{name}.json"),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    println!("report: {}", report_path.display());
    Ok(RunOutcome {
        exit_code,
        report,
        report_path,
    })
}

fn run_classify(spec: &ChainSpec, state: usize, order: usize) -> Result<Runner, CliError> {
    let k = make_chain(spec)?;
    let report = classify(
        &k,
        StateId(state),
        order,
        &TruncationPolicy::default(),
        &Thresholds::default(),
    )?;
    println!("{} — classify from state {state}", k.name());
    println!("verdict: {}", report.verdict);
    println!(
        "  return mass F = {:.9} (partial {:.9}), mean return τ̄ = {:.9} ({})",
        report.f1_refined,
        report.f1_estimate,
        report.tau_estimate,
        if report.tau_converged {
            "converged"
        } else {
            "not converged"
        }
    );
    if !report.notes.is_empty() {
        println!("  notes: {}", report.notes);
    }
    Ok(("classify", EXIT_OK, serde_json::to_value(&report)?))
}

fn run_tightness(
    spec: &ChainSpec,
    epsilon: Option<f64>,
    set: Option<&[usize]>,
    budget: usize,
) -> Result<Runner, CliError> {
    let k = make_chain(spec)?;
    let result = match (set, epsilon) {
        (Some(_), None) => {
            return Err(CliError::Invalid {
                field: "--epsilon",
                message: "required when --set is given".into(),
            })
        }
        (Some(indices), Some(eps)) => {
            let a = to_state_set(indices, &k)?;
            let (tail, exhaustive) = tail_sup(&k, &a, budget)?;
            let certified = exhaustive && tail < eps;
            let n_step = if certified {
                Some(n_step_tail_check(
                    &k,
                    &a,
                    eps,
                    16,
                    &TruncationPolicy::default(),
                )?)
            } else {
                None
            };
            println!("{} — verify A = {indices:?} at ε = {eps}", k.name());
            println!(
                "tail sup = {tail:.9} ({}) → {}",
                if exhaustive { "exhaustive" } else { "partial" },
                if certified { "certified" } else { "not certified" }
            );
            json!({
                "mode": "verify",
                "tail": tail,
                "exhaustive": exhaustive,
                "certified": certified,
                "n_step_checks": n_step,
            })
        }
        (None, Some(eps)) => {
            let search = find_tight_set(&k, eps, budget)?;
            println!("{} — search at ε = {eps}", k.name());
            match &search {
                TightSearch::Found(cert) => println!(
                    "found A with {} states, tail sup = {:.9}",
                    cert.set.len(),
                    cert.achieved_tail
                ),
                TightSearch::NotFound {
                    structurally_refuted,
                    reason,
                    ..
                } => println!(
                    "not found ({}): {reason}",
                    if *structurally_refuted {
                        "refuted"
                    } else {
                        "budget exhausted"
                    }
                ),
            }
            json!({ "mode": "search", "search": search })
        }
        (None, None) => {
            let report = compactness_verdict(&k, &default_epsilon_grid(), budget)?;
            println!("{} — ε-grid sweep", k.name());
            println!("{}", report.verdict);
            json!({ "mode": "sweep", "sweep": report })
        }
    };
    Ok(("tightness", EXIT_OK, result))
}

#[allow(clippy::too_many_arguments)]
fn run_bounds(
    spec: &ChainSpec,
    set: &[usize],
    epsilon: f64,
    state: usize,
    order: usize,
    nmax: usize,
    z: f64,
    out_dir: &FsPath,
) -> Result<Runner, CliError> {
    let policy = TruncationPolicy::default();
    let k = make_chain(spec)?;
    let a = to_state_set(set, &k)?;
    k.check_state(StateId(state)).map_err(CliError::Chain)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CliError::Invalid {
            field: "--epsilon",
            message: format!("{epsilon} is outside the open interval (0, 1)"),
        });
    }

    let (tail, exhaustive) = tail_sup(&k, &a, usize::MAX)?;
    if !(exhaustive && tail < epsilon) {
        println!("{} — (A = {set:?}, ε = {epsilon}) is not certified", k.name());
        println!(
            "tail sup = {tail:.9} ({}); the bound suite only applies under the criterion",
            if exhaustive { "exhaustive" } else { "partial" }
        );
        let result = json!({
            "certified": false,
            "tail": tail,
            "exhaustive": exhaustive,
        });
        return Ok(("bounds", EXIT_OK, result));
    }
    let cert = TightnessCertificate {
        set: a.clone(),
        epsilon,
        achieved_tail: tail,
        exhaustive,
        states_explored: k
            .state_count()
            .unwrap_or_else(|| a.iter().map(|s| s.0).max().unwrap_or(0) + 2),
    };

    let rt = check_return_time_bounds(&k, &cert, order, &policy)?;
    let hitting = hitting_time_distribution(&k, &a, StateId(state), nmax, &policy, Some(&cert))?;
    let hchecks = hitting
        .bound_checks
        .clone()
        .expect("certificate was supplied");

    let mut table = vec![
        TableRow {
            check: "return_reciprocal_sum",
            outcome: rt.recip_outcome,
            observed: rt.recip_sum,
            lower: Some(rt.recip_low),
            upper: Some(rt.recip_high),
        },
        TableRow {
            check: "return_min_tau",
            outcome: rt.min_tau_outcome,
            observed: rt.min_tau,
            lower: None,
            upper: Some(rt.min_tau_cap),
        },
        TableRow {
            check: "hitting_survival",
            outcome: outcome_of(hchecks.survival_ok),
            observed: hchecks.worst_survival_excess,
            lower: None,
            upper: Some(0.0),
        },
        TableRow {
            check: "hitting_expectation",
            outcome: outcome_of(hchecks.expectation_ok),
            observed: hchecks.expectation_upper,
            lower: None,
            upper: Some(hchecks.expectation_cap),
        },
    ];

    let mut notes: Vec<String> = Vec::new();
    let mut lemma: Vec<LemmaBound> = Vec::new();
    let mut green = None;
    let mut proportionality = None;
    let reversibility = compute_reversibility_measure(&k)?;
    match &reversibility {
        Reversibility::Reversible { measure } => {
            for n in 1..=nmax.min(32) {
                lemma.push(reversible_lower_bound(&k, measure, &a, StateId(state), n, &policy)?);
            }
            let worst = lemma
                .iter()
                .min_by(|u, v| (u.lhs - u.rhs).total_cmp(&(v.lhs - v.rhs)))
                .expect("nmax ≥ 1");
            table.push(TableRow {
                check: "reversible_two_step",
                outcome: outcome_of(lemma.iter().all(|b| b.pass)),
                observed: worst.lhs - worst.rhs,
                lower: Some(-1e-12),
                upper: None,
            });

            let g = green_lower_bound(&k, measure, &a, StateId(state), z, order, &policy)?;
            table.push(TableRow {
                check: "green_function",
                outcome: g.outcome,
                observed: g.lhs,
                lower: Some(g.rhs),
                upper: None,
            });
            green = Some(g);

            match walkscope::bounds::check_m_tau_proportionality(&k, measure) {
                Ok(p) => {
                    table.push(TableRow {
                        check: "m_tau_proportionality",
                        outcome: outcome_of(p.pass),
                        observed: p.ratio,
                        lower: None,
                        upper: Some(1.0 + 1e-6),
                    });
                    proportionality = Some(p);
                }
                Err(e) => notes.push(format!("m ∝ 1/τ̄ check skipped: {e}")),
            }
        }
        Reversibility::NotReversible { witness } => {
            notes.push(format!(
                "reversible-measure checks skipped: no detailed-balance measure ({witness:?})"
            ));
        }
    }

    let violation = table.iter().any(|r| r.outcome == BoundOutcome::Fail);

    println!("{} — bound suite for A = {set:?}, ε = {epsilon}", k.name());
    for row in &table {
        println!(
            "  {:<24} {:<12} observed {:+.9e}{}",
            row.check,
            row.outcome.to_string(),
            row.observed,
            match (row.lower, row.upper) {
                (Some(lo), Some(hi)) => format!("  window [{lo:.9}, {hi:.9}]"),
                (Some(lo), None) => format!("  ≥ {lo:.9e}"),
                (None, Some(hi)) => format!("  ≤ {hi:.9}"),
                (None, None) => String::new(),
            }
        );
    }
    for note in &notes {
        println!("  note: {note}");
    }

    let mut csv = String::from("check,outcome,observed,lower,upper\n");
    for row in &table {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            row.check,
            row.outcome,
            row.observed,
            row.lower.map(|v| v.to_string()).unwrap_or_default(),
            row.upper.map(|v| v.to_string()).unwrap_or_default(),
        );
    }
    let table_path = write_text(out_dir, "bounds_table.csv", &csv)?;

    let mut survival_csv = String::from("n,survival,geometric_bound\n");
    for n in 1..=hitting.n_max() {
        let _ = writeln!(
            survival_csv,
            "{n},{},{}",
            hitting.survival(n),
            epsilon.powi(n as i32 - 1)
        );
    }
    let survival_path = write_text(out_dir, "bounds_survival.csv", &survival_csv)?;
    println!(
        "tables: {}, {}",
        table_path.display(),
        survival_path.display()
    );

    let result = json!({
        "certified": true,
        "certificate": cert,
        "table": table,
        "return_time": rt,
        "hitting": hitting,
        "lemma": lemma,
        "green": green,
        "proportionality": proportionality,
        "notes": notes,
        "violation": violation,
    });
    let exit = if violation { EXIT_BOUND_VIOLATION } else { EXIT_OK };
    Ok(("bounds", exit, result))
}

#[allow(clippy::too_many_arguments)]
fn run_simulate(
    spec: &ChainSpec,
    set: &[usize],
    state: usize,
    trials: usize,
    steps: usize,
    cap: usize,
    seed: u64,
    out_dir: &FsPath,
) -> Result<Runner, CliError> {
    let k = make_chain(spec)?;
    let a = to_state_set(set, &k)?;
    let x0 = StateId(state);

    let path = simulate_path(&k, x0, steps, seed)?;
    let occupation = occupation_fraction(&k, &a, x0, steps, seed)?;
    let return_time = estimate_return_time(&k, x0, trials, cap, seed)?;
    let survival = hitting_time_samples(&k, &a, x0, trials, cap, seed, None)?;

    // Running occupation fraction, decimated to at most 1000 rows. The trace
    // comes from the same stream the aggregate estimate uses, so its last
    // row equals the reported mean exactly.
    let stride = steps.div_ceil(1000).max(1);
    let mut occ_csv = String::from("step,fraction\n");
    let mut inside = 0usize;
    for (i, &s) in path.states.iter().enumerate().skip(1) {
        if a.contains(&s) {
            inside += 1;
        }
        if i % stride == 0 || i == steps {
            let _ = writeln!(occ_csv, "{i},{}", inside as f64 / i as f64);
        }
    }
    let occ_path = write_text(out_dir, "occupation.csv", &occ_csv)?;

    // Empirical survival curve, trimmed once it reaches zero.
    let slice = survival.survival_slice();
    let last = slice
        .iter()
        .rposition(|&v| v > 0.0)
        .map_or(1, |i| (i + 1).min(slice.len() - 1));
    let mut surv_csv = String::from("n,survival\n");
    for (n, &v) in slice.iter().enumerate().take(last + 1).skip(1) {
        let _ = writeln!(surv_csv, "{n},{v}");
    }
    let surv_path = write_text(out_dir, "survival.csv", &surv_csv)?;

    println!(
        "{} — simulate from state {state}, A = {set:?}, seed {seed}",
        k.name()
    );
    println!(
        "  return time: {:.6} ± {:.6} ({} trials, {} censored at {cap})",
        return_time.estimate.mean, return_time.estimate.half_width, trials, return_time.censored
    );
    println!(
        "  occupation of A over {steps} steps: {:.6} ± {:.6}",
        occupation.mean, occupation.half_width
    );
    println!(
        "  hitting T_A: sample mean {:.6} ({} censored)",
        survival.sample_mean, survival.censored
    );
    println!("traces: {}, {}", occ_path.display(), surv_path.display());

    let result = json!({
        "return_time": return_time,
        "occupation": occupation,
        "survival": survival,
    });
    Ok(("simulate", EXIT_OK, result))
}

fn run_series(
    spec: &ChainSpec,
    state: usize,
    target: usize,
    order: usize,
    out_dir: &FsPath,
) -> Result<Runner, CliError> {
    let policy = TruncationPolicy::default();
    let k = make_chain(spec)?;
    let x = StateId(state);
    let y = StateId(target);
    let table = first_return_probs(&k, x, y, order, &policy)?;
    let green = green_series(&k, x, y, order, &policy)?;

    let mut csv = String::from("n,p,f,cum_f\n");
    for n in 0..=order {
        let _ = writeln!(
            csv,
            "{n},{},{},{}",
            green.coeff(n),
            table.f(n),
            table.cumulative(n)
        );
    }
    let csv_path = write_text(out_dir, "series.csv", &csv)?;

    println!("{} — series for ({state} → {target}), order {order}", k.name());
    println!(
        "  Σ f^(n) = {:.9} (defect {:.3e}), partial τ̄ = {:.9}",
        table.total(),
        table.defect(),
        table.tau_partial()
    );
    println!("series: {}", csv_path.display());

    let result = json!({
        "f_total": table.total(),
        "f_defect": table.defect(),
        "tau_partial": table.tau_partial(),
        "order": order,
    });
    Ok(("series", EXIT_OK, result))
}

/// (report name, exit code, result document).
type Runner = (&'static str, i32, Value);

#[derive(Debug, Clone, Serialize)]
struct TableRow {
    check: &'static str,
    outcome: BoundOutcome,
    observed: f64,
    lower: Option<f64>,
    upper: Option<f64>,
}

fn outcome_of(ok: bool) -> BoundOutcome {
    if ok {
        BoundOutcome::Pass
    } else {
        BoundOutcome::Fail
    }
}

fn load_spec(path: &FsPath) -> Result<ChainSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::BadChainFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// "0,3,17" → sorted, deduplicated state indices.
fn parse_set(text: &str) -> Result<Vec<usize>, CliError> {
    let mut out = BTreeSet::new();
    for part in text.split(',') {
        let part = part.trim();
        let index: usize = part.parse().map_err(|_| CliError::Invalid {
            field: "--set",
            message: format!("`{part}` is not a state index"),
        })?;
        out.insert(index);
    }
    Ok(out.into_iter().collect())
}

fn to_state_set(indices: &[usize], k: &Kernel) -> Result<BTreeSet<StateId>, CliError> {
    if indices.is_empty() {
        return Err(CliError::Invalid {
            field: "--set",
            message: "the set must not be empty".into(),
        });
    }
    let mut a = BTreeSet::new();
    for &i in indices {
        let s = StateId(i);
        k.check_state(s).map_err(|_| CliError::Invalid {
            field: "--set",
            message: format!("state {i} is out of range for this chain"),
        })?;
        a.insert(s);
    }
    Ok(a)
}

fn write_text(out_dir: &FsPath, name: &str, content: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let path = out_dir.join(name);
    fs::write(&path, content).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

//! Shared fixtures and independent oracles for the integration suites.
//!
//! Everything here deliberately avoids the library's own machinery: matrix
//! powers are plain triple loops, first-return probabilities come from
//! literal path enumeration, and the nearest-neighbour return series has its
//! own combinatorial recursion. Agreement between these and the library is
//! the point of the tests.

#![allow(dead_code)] // each integration target uses a different subset

use std::collections::BTreeSet;

use rand::Rng;
use walkscope::chain::{make_chain, ChainSpec, Kernel, StateId};

pub fn set(ids: &[usize]) -> BTreeSet<StateId> {
    ids.iter().map(|&i| StateId(i)).collect()
}

/// Finite analogue of the downward-biased nearest-neighbour walk: reflection
/// at 0 (`p(0,1) = 1`), down-rate `q` and up-rate `1−q` inside, lazy top.
pub fn truncated_bd(q_down: f64, states: usize) -> Kernel {
    let l = states - 1;
    let mut up = vec![1.0 - q_down; l];
    up[0] = 1.0;
    make_chain(&ChainSpec::BirthDeath {
        up,
        down: vec![q_down; l],
    })
    .unwrap()
}

/// A dense, aperiodic, strictly positive 6-state chain (fixed by hand so the
/// path-enumeration oracle has a worst-case branching factor to chew on).
pub fn dense6() -> Kernel {
    let rows = vec![
        vec![0.30, 0.10, 0.15, 0.20, 0.05, 0.20],
        vec![0.05, 0.25, 0.25, 0.15, 0.20, 0.10],
        vec![0.10, 0.10, 0.40, 0.10, 0.10, 0.20],
        vec![0.20, 0.05, 0.05, 0.30, 0.25, 0.15],
        vec![0.15, 0.20, 0.10, 0.05, 0.35, 0.15],
        vec![0.25, 0.15, 0.10, 0.20, 0.10, 0.20],
    ];
    make_chain(&ChainSpec::Finite { rows }).unwrap()
}

/// The finite test fleet: every finite chain the acceptance suite sweeps.
pub fn finite_fleet() -> Vec<Kernel> {
    vec![
        make_chain(&ChainSpec::Swap).unwrap(),
        make_chain(&ChainSpec::Lazy { p: 0.25 }).unwrap(),
        make_chain(&ChainSpec::Lazy { p: 0.5 }).unwrap(),
        make_chain(&ChainSpec::Lazy { p: 0.75 }).unwrap(),
        make_chain(&ChainSpec::Funnel { eps: 0.2, m: 50 }).unwrap(),
        make_chain(&ChainSpec::Funnel { eps: 0.3, m: 5 }).unwrap(),
        make_chain(&ChainSpec::Funnel { eps: 0.05, m: 12 }).unwrap(),
        truncated_bd(0.7, 200),
        dense6(),
    ]
}

/// A random strictly positive row-stochastic chain (strict positivity keeps
/// it irreducible and aperiodic by construction).
pub fn random_chain(rng: &mut impl Rng, states: usize) -> Kernel {
    let rows = (0..states)
        .map(|_| {
            let raw: Vec<f64> = (0..states).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        })
        .collect();
    make_chain(&ChainSpec::Finite { rows }).unwrap()
}

/// Row-major dense copy of a finite kernel.
pub fn dense_matrix(k: &Kernel) -> Vec<Vec<f64>> {
    let n = k.state_count().expect("oracle needs a finite chain");
    (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            for &(y, w) in k.row(StateId(i)).unwrap().entries() {
                row[y.0] += w;
            }
            row
        })
        .collect()
}

pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// `p, p², …, p^max_n` (index 0 holds the identity).
pub fn matrix_powers(p: &[Vec<f64>], max_n: usize) -> Vec<Vec<Vec<f64>>> {
    let n = p.len();
    let mut id = vec![vec![0.0; n]; n];
    for (i, row) in id.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut powers = Vec::with_capacity(max_n + 1);
    powers.push(id);
    for m in 1..=max_n {
        powers.push(mat_mul(&powers[m - 1], p));
    }
    powers
}

/// First-return/passage probability by exhaustive path enumeration: total
/// weight of the paths `x → … → y` of length exactly `n` that avoid `y`
/// strictly in between. Rows are extracted up front; the recursion itself
/// touches no kernel machinery.
pub fn f_by_paths(k: &Kernel, x: StateId, y: StateId, n: usize) -> f64 {
    fn rec(rows: &[Vec<(usize, f64)>], y: usize, cur: usize, remaining: usize, weight: f64) -> f64 {
        let mut total = 0.0;
        for &(s, w) in &rows[cur] {
            if remaining == 1 {
                if s == y {
                    total += weight * w;
                }
            } else if s != y {
                total += rec(rows, y, s, remaining - 1, weight * w);
            }
        }
        total
    }
    assert!(n >= 1, "first passage takes at least one step");
    let states = k.state_count().expect("oracle needs a finite chain");
    let rows: Vec<Vec<(usize, f64)>> = (0..states)
        .map(|i| {
            k.row(StateId(i))
                .unwrap()
                .entries()
                .iter()
                .map(|&(s, w)| (s.0, w))
                .collect()
        })
        .collect();
    rec(&rows, y.0, x.0, n, 1.0)
}

/// Return-probability coefficients for the nearest-neighbour chain with
/// down-rate `p`: `f^(2n)(0,0) = C_{n−1} pⁿ (1−p)^{n−1}` via the Catalan
/// ratio recursion `C_n / C_{n−1} = 2(2n−1)/(n+1)`, which never forms the
/// huge Catalan numbers themselves. Index = step count; odd entries are 0.
pub fn paper_bd_return_oracle(p: f64, max_step: usize) -> Vec<f64> {
    let mut f = vec![0.0; max_step + 1];
    if max_step < 2 {
        return f;
    }
    let mut a = p; // f^(2·1)
    f[2] = a;
    let mut n = 1usize;
    while 2 * (n + 1) <= max_step {
        a *= 2.0 * (2.0 * n as f64 - 1.0) / (n as f64 + 1.0) * p * (1.0 - p);
        n += 1;
        f[2 * n] = a;
    }
    f
}

//! Dense linear-algebra helpers for finite chains (oracle-grade routes that
//! back the series machinery): stationary solves, absorption probabilities,
//! and reachability checks.

use nalgebra::{DMatrix, DVector};

use crate::chain::{ChainError, Kernel, StateId};

/// Hard cap on dense work: n² doubles of storage and an O(n³) factorization.
/// Every built-in finite chain is far below this.
pub(crate) const DENSE_LIMIT: usize = 4096;

/// The full transition matrix of a finite kernel.
pub(crate) fn dense_matrix(k: &Kernel) -> Result<DMatrix<f64>, ChainError> {
    let n = k
        .state_count()
        .expect("dense_matrix requires a finite kernel");
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        for &(y, w) in k.row(StateId(i))?.entries() {
            p[(i, y.0)] = w;
        }
    }
    Ok(p)
}

/// Solves πP = π, Σπ = 1 by LU on (Pᵀ − I) with the normalization equation
/// in the FIRST row. The row position matters: with the constraint first,
/// elimination walks down the transition structure and preserves
/// componentwise relative accuracy even when π spans dozens of orders of
/// magnitude (deep birth–death truncations); with it last, the small
/// components drown in absolute error.
pub(crate) fn stationary_dense(p: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(0, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[0] = 1.0;
    a.lu().solve(&b)
}

/// Probability of ever hitting `target`, from every state, by solving the
/// absorbed system `(I − Q) h = P·e_target` over the non-target states.
pub(crate) fn hit_probabilities(
    k: &Kernel,
    target: StateId,
) -> Result<Option<Vec<f64>>, ChainError> {
    let n = k
        .state_count()
        .expect("hit_probabilities requires a finite kernel");
    // Index map: non-target states → 0..n-1 compressed.
    let others: Vec<usize> = (0..n).filter(|&i| i != target.0).collect();
    let pos = |i: usize| others.iter().position(|&o| o == i);
    let m = others.len();
    let mut a = DMatrix::identity(m, m);
    let mut b = DVector::zeros(m);
    for (r, &i) in others.iter().enumerate() {
        for &(y, w) in k.row(StateId(i))?.entries() {
            if y == target {
                b[r] += w;
            } else if let Some(c) = pos(y.0) {
                a[(r, c)] -= w;
            }
        }
    }
    let Some(h) = a.lu().solve(&b) else {
        return Ok(None);
    };
    let mut full = vec![0.0; n];
    full[target.0] = 1.0;
    for (r, &i) in others.iter().enumerate() {
        full[i] = h[r];
    }
    Ok(Some(full))
}

/// Strong connectivity of the support graph (finite kernels): every state
/// reachable from 0 and 0 reachable from every state.
pub(crate) fn is_strongly_connected(k: &Kernel) -> Result<bool, ChainError> {
    let n = k
        .state_count()
        .expect("is_strongly_connected requires a finite kernel");
    if n == 0 {
        return Ok(false);
    }
    let mut forward = vec![Vec::new(); n];
    let mut backward = vec![Vec::new(); n];
    for (i, fwd) in forward.iter_mut().enumerate() {
        for &(y, _) in k.row(StateId(i))?.entries() {
            fwd.push(y.0);
            backward[y.0].push(i);
        }
    }
    Ok(reaches_all(&forward, 0) && reaches_all(&backward, 0))
}

fn reaches_all(adj: &[Vec<usize>], start: usize) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == adj.len()
}

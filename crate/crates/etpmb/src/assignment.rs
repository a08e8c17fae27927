//! Rectangular minimum-cost assignment by shortest augmenting paths.
//!
//! Used for the fusion map between PMB components and for the GOSPA metric.
//! Forbidden pairs are passed as `f64::INFINITY` and handled through a large
//! finite sentinel so the augmenting-path search stays total.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Sentinel standing in for forbidden (infinite) entries.
pub const FORBIDDEN_SENTINEL: f64 = 1e18;

/// Cost matrix for the assignment problem; entries in `[0, +inf]`.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    pub costs: DMatrix<f64>,
}

impl CostMatrix {
    pub fn new(costs: DMatrix<f64>) -> Self {
        assert!(costs.nrows() >= 1 && costs.ncols() >= 1, "empty cost matrix");
        Self { costs }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let m = rows[0].len();
        Self::new(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }
}

/// Solution of the assignment problem: pairs `(row, column)` covering
/// `min(nrows, ncols)` rows, sorted by row, and the total cost of the
/// selected entries.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

/// Finds a minimum-cost injective assignment of rows to columns.
///
/// Rectangular matrices are handled by solving the transposed problem when
/// there are more rows than columns. Returns an error when no full
/// assignment of finite cost exists.
pub fn solve(c: &CostMatrix) -> Result<Assignment> {
    let (n, m) = (c.costs.nrows(), c.costs.ncols());
    let pairs = if n <= m {
        solve_rows_le_cols(&c.costs)
    } else {
        let t = c.costs.transpose();
        let mut pairs: Vec<(usize, usize)> = solve_rows_le_cols(&t)
            .into_iter()
            .map(|(row, col)| (col, row))
            .collect();
        pairs.sort_unstable();
        pairs
    };
    let mut total_cost = 0.0;
    for &(i, j) in &pairs {
        let v = c.costs[(i, j)];
        if !v.is_finite() || v >= FORBIDDEN_SENTINEL / 2.0 {
            return Err(Error::InfeasibleAssignment);
        }
        total_cost += v;
    }
    Ok(Assignment { pairs, total_cost })
}

/// Shortest-augmenting-path assignment for `n <= m`, with one virtual
/// column acting as the unmatched root.
fn solve_rows_le_cols(cost: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = cost.nrows();
    let m = cost.ncols();
    debug_assert!(n <= m);
    let at = |i: usize, j: usize| -> f64 {
        let v = cost[(i, j)];
        if v.is_finite() {
            v.min(FORBIDDEN_SENTINEL)
        } else {
            FORBIDDEN_SENTINEL
        }
    };

    // row_of[j] = row currently assigned to column j; index m is virtual.
    let mut row_of: Vec<Option<usize>> = vec![None; m + 1];
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; m + 1];

    for start_row in 0..n {
        let mut j_cur = m;
        row_of[m] = Some(start_row);
        let mut min_to = vec![f64::INFINITY; m + 1];
        let mut prev = vec![usize::MAX; m + 1];
        let mut in_tree = vec![false; m + 1];

        while let Some(i_cur) = row_of[j_cur] {
            in_tree[j_cur] = true;
            let mut delta = f64::INFINITY;
            let mut j_next = m;
            for j in 0..m {
                if in_tree[j] {
                    continue;
                }
                let reduced = at(i_cur, j) - u[i_cur] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    prev[j] = j_cur;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j_next = j;
                }
            }
            for j in 0..=m {
                if in_tree[j] {
                    if let Some(i) = row_of[j] {
                        u[i] += delta;
                    }
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j_cur = j_next;
        }

        // Augment along the alternating path back to the virtual column.
        while j_cur != m {
            let j_prev = prev[j_cur];
            row_of[j_cur] = row_of[j_prev];
            j_cur = j_prev;
        }
    }

    let mut pairs: Vec<(usize, usize)> = row_of[..m]
        .iter()
        .enumerate()
        .filter_map(|(j, r)| r.map(|i| (i, j)))
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Brute-force reference: enumerates all injective assignments. Exponential,
/// only suitable for small problems; kept public for oracle-style tests.
pub fn brute_force(c: &CostMatrix) -> Option<(Vec<(usize, usize)>, f64)> {
    let (n, m) = (c.costs.nrows(), c.costs.ncols());
    let k = n.min(m);
    let mut best: Option<(Vec<(usize, usize)>, f64)> = None;
    // Enumerate over which side is smaller to keep the permutation count at
    // max(n, m) choose k times k!.
    let mut cols: Vec<usize> = (0..m).collect();
    let mut rows: Vec<usize> = (0..n).collect();
    fn rec(
        c: &DMatrix<f64>,
        rows: &[usize],
        cols: &mut Vec<usize>,
        depth: usize,
        k: usize,
        acc: f64,
        chosen: &mut Vec<(usize, usize)>,
        best: &mut Option<(Vec<(usize, usize)>, f64)>,
        row_major: bool,
    ) {
        if depth == k {
            if best.as_ref().map_or(true, |(_, b)| acc < *b) {
                let mut pairs = chosen.clone();
                pairs.sort_unstable();
                *best = Some((pairs, acc));
            }
            return;
        }
        for idx in depth..cols.len() {
            cols.swap(depth, idx);
            let (i, j) = if row_major {
                (rows[depth], cols[depth])
            } else {
                (cols[depth], rows[depth])
            };
            let v = c[(i, j)];
            if v.is_finite() && v < FORBIDDEN_SENTINEL / 2.0 {
                chosen.push((i, j));
                rec(c, rows, cols, depth + 1, k, acc + v, chosen, best, row_major);
                chosen.pop();
            }
            cols.swap(depth, idx);
        }
    }
    if n <= m {
        rec(&c.costs, &rows, &mut cols, 0, k, 0.0, &mut Vec::new(), &mut best, true);
    } else {
        rec(&c.costs, &cols, &mut rows, 0, k, 0.0, &mut Vec::new(), &mut best, false);
    }
    best
}

//! Maximum product matching via shortest augmenting paths on the assignment
//! problem with costs `ln(colmax_j) - ln|a_ij|`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use log::warn;

use crate::error::{Error, Result};
use crate::sparsemat::{ScalingVector, SymSparseMatrix};

const NONE: usize = usize::MAX;

/// A row-to-column matching of the full symmetric matrix together with the
/// scaling factors derived from the optimal assignment duals.
///
/// Factors are held as natural logarithms; `r_i |a_ij| c_j <= 1` for every
/// entry, with equality on matched entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    sigma: Vec<usize>,
    log_row: Vec<f64>,
    log_col: Vec<f64>,
    matched_log_abs: Vec<f64>,
    log_product: f64,
    tight_unmatched_fraction: f64,
}

impl Matching {
    /// Assembles a matching from its parts. `sigma` must be a permutation;
    /// `matched_log_abs[i]` is `ln|a_{i sigma(i)}|`.
    pub fn from_parts(
        sigma: Vec<usize>,
        log_row: Vec<f64>,
        log_col: Vec<f64>,
        matched_log_abs: Vec<f64>,
    ) -> Result<Self> {
        let n = sigma.len();
        for len in [log_row.len(), log_col.len(), matched_log_abs.len()] {
            crate::sparsemat::check_len(n, len)?;
        }
        let mut seen = vec![false; n];
        for &j in &sigma {
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidPermutation(format!("sigma is not a bijection: {sigma:?}")));
            }
        }
        let log_product = matched_log_abs.iter().sum();
        Ok(Self { sigma, log_row, log_col, matched_log_abs, log_product, tight_unmatched_fraction: 1.0 })
    }

    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    /// `sigma[i]` is the column matched to row `i`.
    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    pub fn log_row_scaling(&self) -> &[f64] {
        &self.log_row
    }

    pub fn log_col_scaling(&self) -> &[f64] {
        &self.log_col
    }

    pub fn row_scaling(&self) -> Vec<f64> {
        self.log_row.iter().map(|x| x.exp()).collect()
    }

    pub fn col_scaling(&self) -> Vec<f64> {
        self.log_col.iter().map(|x| x.exp()).collect()
    }

    /// `ln|a_{i sigma(i)}|` per row.
    pub fn matched_log_abs(&self) -> &[f64] {
        &self.matched_log_abs
    }

    /// `sum_i ln|a_{i sigma(i)}|`.
    pub fn log_product(&self) -> f64 {
        self.log_product
    }

    /// Fraction of unmatched entries whose reduced cost is zero, i.e. that
    /// could be swapped into an equally good matching.
    pub fn tight_unmatched_fraction(&self) -> f64 {
        self.tight_unmatched_fraction
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapKey(f64, usize);

impl Eq for HeapKey {}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Finds `sigma` maximizing `prod_i |a_{i sigma(i)}|` over the full symmetric
/// matrix, treating it as unsymmetric. Stored zeros are not matchable.
pub fn max_product_matching(a: &SymSparseMatrix) -> Result<Matching> {
    let n = a.n();
    let mut log_colmax = vec![f64::NEG_INFINITY; n];
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, j, v) in a.iter() {
        if v == 0.0 {
            continue;
        }
        let l = v.abs().ln();
        adj[i].push((j, l));
        log_colmax[j] = log_colmax[j].max(l);
        if i != j {
            adj[j].push((i, l));
            log_colmax[i] = log_colmax[i].max(l);
        }
    }
    // Store costs in place of the log magnitudes.
    for row in adj.iter_mut() {
        row.sort_by_key(|&(j, _)| j);
        for (j, c) in row.iter_mut() {
            *c = log_colmax[*j] - *c;
        }
    }
    if adj.iter().any(Vec::is_empty) {
        return Err(Error::StructurallySingular);
    }

    // Column duals start at zero (each column has a zero-cost entry), row
    // duals at the row minimum: all reduced costs are nonnegative.
    let mut v = vec![0.0f64; n];
    let mut u: Vec<f64> = adj.iter().map(|row| row.iter().map(|&(_, c)| c).fold(f64::INFINITY, f64::min)).collect();

    let mut col4row = vec![NONE; n];
    let mut row4col = vec![NONE; n];
    for i in 0..n {
        for &(j, c) in &adj[i] {
            if row4col[j] == NONE && c - u[i] - v[j] == 0.0 {
                row4col[j] = i;
                col4row[i] = j;
                break;
            }
        }
    }

    let mut dist = vec![f64::INFINITY; n];
    let mut path = vec![NONE; n];
    let mut done = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut scanned_rows: Vec<usize> = Vec::new();
    let mut scanned_cols: Vec<usize> = Vec::new();
    let mut heap: BinaryHeap<Reverse<HeapKey>> = BinaryHeap::new();

    for root in 0..n {
        if col4row[root] != NONE {
            continue;
        }
        heap.clear();
        scanned_rows.clear();
        scanned_cols.clear();
        let mut i = root;
        let mut min_val = 0.0;
        let sink = loop {
            scanned_rows.push(i);
            for &(j, c) in &adj[i] {
                if done[j] {
                    continue;
                }
                let r = min_val + c - u[i] - v[j];
                if r < dist[j] {
                    if dist[j] == f64::INFINITY {
                        touched.push(j);
                    }
                    dist[j] = r;
                    path[j] = i;
                    heap.push(Reverse(HeapKey(r, j)));
                }
            }
            let j = loop {
                match heap.pop() {
                    None => return Err(Error::StructurallySingular),
                    Some(Reverse(HeapKey(d, j))) if !done[j] && d == dist[j] => break j,
                    Some(_) => {}
                }
            };
            min_val = dist[j];
            done[j] = true;
            scanned_cols.push(j);
            if row4col[j] == NONE {
                break j;
            }
            i = row4col[j];
        };

        u[root] += min_val;
        for &r in &scanned_rows[1..] {
            u[r] += min_val - dist[col4row[r]];
        }
        for &j in &scanned_cols {
            v[j] -= min_val - dist[j];
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            let prev = std::mem::replace(&mut col4row[r], j);
            if r == root {
                break;
            }
            j = prev;
        }

        for &j in &touched {
            dist[j] = f64::INFINITY;
            path[j] = NONE;
            done[j] = false;
        }
        touched.clear();
    }

    let mut matched_log_abs = vec![0.0; n];
    let mut tight = 0usize;
    let mut unmatched = 0usize;
    for i in 0..n {
        for &(j, c) in &adj[i] {
            if j == col4row[i] {
                matched_log_abs[i] = log_colmax[j] - c;
            } else {
                unmatched += 1;
                if (c - u[i] - v[j]).abs() <= 1e-12 * (1.0 + c.abs()) {
                    tight += 1;
                }
            }
        }
    }
    let tight_unmatched_fraction = if unmatched == 0 { 1.0 } else { tight as f64 / unmatched as f64 };
    if tight_unmatched_fraction < 0.01 {
        warn!(
            "matching scaling: only {:.2}% of unmatched entries are tight; the scaling may be poor",
            100.0 * tight_unmatched_fraction
        );
    }

    let log_col: Vec<f64> = (0..n).map(|j| v[j] - log_colmax[j]).collect();
    let log_product = matched_log_abs.iter().sum();
    Ok(Matching { sigma: col4row, log_row: u, log_col, matched_log_abs, log_product, tight_unmatched_fraction })
}

/// Symmetric scaling `s_i = sqrt(r_i c_i)` from a matching's row and column
/// factors.
pub fn symmetrize_matching_scaling(m: &Matching) -> ScalingVector {
    let e: Vec<f64> = m.log_row.iter().zip(&m.log_col).map(|(r, c)| 0.5 * (r + c)).collect();
    ScalingVector::from_exponents(&e).expect("matching duals are finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_dominant_matches_diagonal() {
        let a = SymSparseMatrix::from_dense(3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]).unwrap();
        let m = max_product_matching(&a).unwrap();
        assert_eq!(m.sigma(), &[0, 1, 2]);
        assert!((m.log_product() - 24f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn anti_diagonal() {
        let a = SymSparseMatrix::from_triplets(2, [(1, 0, 3.0)]).unwrap();
        let m = max_product_matching(&a).unwrap();
        assert_eq!(m.sigma(), &[1, 0]);
        assert!((m.log_product() - 9f64.ln()).abs() < 1e-14);
        let s = symmetrize_matching_scaling(&m);
        assert!((s.as_slice()[0] * s.as_slice()[1] - 1.0 / 3.0).abs() < 1e-15);
        let scaled = a.scaled(&s).unwrap();
        assert!((scaled.get(1, 0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_gives_unit_factors() {
        let m = max_product_matching(&SymSparseMatrix::identity(4)).unwrap();
        assert_eq!(m.sigma(), &[0, 1, 2, 3]);
        assert_eq!(m.row_scaling(), vec![1.0; 4]);
        assert_eq!(m.col_scaling(), vec![1.0; 4]);
    }

    #[test]
    fn unit_factors_symmetrize_to_identity() {
        let m = Matching::from_parts(vec![1, 0, 2], vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]).unwrap();
        assert_eq!(symmetrize_matching_scaling(&m), ScalingVector::identity(3));
    }

    #[test]
    fn from_parts_rejects_non_bijection() {
        assert!(Matching::from_parts(vec![0, 0], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn structurally_singular() {
        // Row 0 and row 1 both only touch column 2.
        let a = SymSparseMatrix::from_triplets(3, [(2, 0, 1.0), (2, 1, 1.0)]).unwrap();
        assert!(matches!(max_product_matching(&a), Err(Error::StructurallySingular)));
        // Stored zero is not matchable.
        let a = SymSparseMatrix::from_triplets(2, [(0, 0, 1.0), (1, 1, 0.0)]).unwrap();
        assert!(matches!(max_product_matching(&a), Err(Error::StructurallySingular)));
    }

    #[test]
    fn scaled_entries_bounded_for_extreme_magnitudes() {
        let a = SymSparseMatrix::from_triplets(
            3,
            [(0, 0, 1e-300), (1, 0, 1e300), (1, 1, 1e-280), (2, 1, 1.0), (2, 2, 1e250)],
        )
        .unwrap();
        let m = max_product_matching(&a).unwrap();
        let r = m.log_row_scaling();
        let c = m.log_col_scaling();
        let full = |i: usize, j: usize| a.get(i, j);
        for (i, ri) in r.iter().enumerate() {
            for (j, cj) in c.iter().enumerate() {
                let v = full(i, j);
                if v != 0.0 {
                    let l = ri + v.abs().ln() + cj;
                    assert!(l <= 1e-10, "({i},{j}) -> {l}");
                    if m.sigma()[i] == j {
                        assert!(l.abs() <= 1e-10);
                    }
                }
            }
        }
        let s = symmetrize_matching_scaling(&m);
        assert!(s.as_slice().iter().all(|x| x.is_finite() && *x > 0.0));
    }
}

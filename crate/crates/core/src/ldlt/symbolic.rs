use std::collections::BTreeSet;

use crate::error::Result;
use crate::ordering::Permutation;
use crate::sparsemat::{check_len, SymSparseMatrix};

/// Analyse-phase output: the structure of `L` for `P A P^T` assuming no
/// pivots are delayed.
#[derive(Debug, Clone)]
pub struct SymbolicFactor {
    order: Permutation,
    parent: Vec<Option<usize>>,
    col_counts: Vec<usize>,
    predicted_nnz: usize,
    predicted_flops: u64,
}

impl SymbolicFactor {
    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &Permutation {
        &self.order
    }

    /// Elimination tree over pivot positions.
    pub fn parent(&self) -> &[Option<usize>] {
        &self.parent
    }

    /// Strictly-subdiagonal entry count of each column of `L`.
    pub fn col_counts(&self) -> &[usize] {
        &self.col_counts
    }

    /// Entries of `L` including the unit diagonal.
    pub fn predicted_nnz(&self) -> usize {
        self.predicted_nnz
    }

    pub fn predicted_flops(&self) -> u64 {
        self.predicted_flops
    }
}

/// Multiply-add count of eliminating a 1x1 pivot whose column has `c`
/// off-diagonal entries: the reciprocal, `c` multipliers and the
/// `c(c+1)/2` lower-triangle updates.
pub(crate) fn flops_one_by_one(c: usize) -> u64 {
    let c = c as u64;
    1 + c + c * (c + 1) / 2
}

/// 2x2 analogue: block inverse, `c` 2-vector multipliers and `c(c+1)/2`
/// rank-2 updates.
pub(crate) fn flops_two_by_two(c: usize) -> u64 {
    let c = c as u64;
    4 + 4 * c + c * (c + 1)
}

/// Symbolic factorization of `P A P^T` with `P` given by `order`.
pub fn analyse(a: &SymSparseMatrix, order: &Permutation) -> Result<SymbolicFactor> {
    let n = a.n();
    check_len(n, order.len())?;
    let pos = order.inverse();

    let mut below: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.iter() {
        if i != j {
            let (p, q) = (pos[i], pos[j]);
            let (lo, hi) = if p < q { (p, q) } else { (q, p) };
            below[lo].push(hi);
        }
    }

    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut structs: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut parent = vec![None; n];
    let mut col_counts = vec![0usize; n];
    for k in 0..n {
        let mut s: BTreeSet<usize> = below[k].iter().copied().collect();
        for &c in &children[k] {
            s.extend(structs[c].iter().copied().filter(|&r| r != k));
        }
        // Children structures are no longer needed once merged.
        for c in std::mem::take(&mut children[k]) {
            structs[c] = Vec::new();
        }
        if let Some(&p) = s.iter().next() {
            parent[k] = Some(p);
            children[p].push(k);
        }
        col_counts[k] = s.len();
        structs[k] = s.into_iter().collect();
    }

    let predicted_nnz = n + col_counts.iter().sum::<usize>();
    let predicted_flops = col_counts.iter().map(|&c| flops_one_by_one(c)).sum();
    Ok(SymbolicFactor { order: order.clone(), parent, col_counts, predicted_nnz, predicted_flops })
}

//! Fill-reducing orderings.
//!
//! [`min_degree_order`] is an exact greedy minimum-degree elimination on the
//! elimination graph. [`matching_based_order`] compresses matched index pairs
//! into supervariables before ordering, so every accepted pair ends up
//! adjacent and available as a 2x2 pivot.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::scaling::{max_product_matching, symmetrize_matching_scaling, Matching};
use crate::sparsemat::{ScalingVector, SymSparseMatrix};

/// `perm[new] = old`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    perm: Vec<usize>,
    inv: Vec<usize>,
}

impl Permutation {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut inv = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || inv[old] != usize::MAX {
                return Err(Error::InvalidPermutation(format!("{old} is out of range or repeated")));
            }
            inv[old] = new;
        }
        Ok(Self { perm, inv })
    }

    pub fn identity(n: usize) -> Self {
        Self { perm: (0..n).collect(), inv: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// New position to original index.
    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    /// Original index to new position.
    pub fn inverse(&self) -> &[usize] {
        &self.inv
    }

    pub fn position_of(&self, original: usize) -> usize {
        self.inv[original]
    }
}

/// Greedy minimum-degree order; ties go to the lowest index.
pub fn min_degree_order(a: &SymSparseMatrix) -> Permutation {
    let adj: Vec<BTreeSet<usize>> = a.adjacency().into_iter().map(|l| l.into_iter().collect()).collect();
    Permutation::new(min_degree_on_graph(adj)).expect("elimination visits every node once")
}

fn min_degree_on_graph(mut adj: Vec<BTreeSet<usize>>) -> Vec<usize> {
    let n = adj.len();
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
    let mut order = Vec::with_capacity(n);
    while let Some((_, v)) = queue.pop_first() {
        order.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &w in &nbrs {
            queue.remove(&(adj[w].len(), w));
            adj[w].remove(&v);
        }
        for (k, &w) in nbrs.iter().enumerate() {
            for &x in &nbrs[k + 1..] {
                adj[w].insert(x);
                adj[x].insert(w);
            }
        }
        for &w in &nbrs {
            queue.insert((adj[w].len(), w));
        }
    }
    order
}

/// Disjoint index pairs plus the indices left unpaired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairList {
    pub pairs: Vec<(usize, usize)>,
    pub singletons: Vec<usize>,
}

/// Selects disjoint 2x2 pivot pairs from the non-trivial matched entries,
/// strongest matched value first (ties by lowest index). Each pair is
/// reported as `(low, high)`.
pub fn matching_pairs(m: &Matching) -> PairList {
    let n = m.n();
    let sigma = m.sigma();
    let mut candidates: Vec<(usize, usize, f64)> = (0..n)
        .filter(|&i| sigma[i] != i)
        .map(|i| {
            let (lo, hi) = if i < sigma[i] { (i, sigma[i]) } else { (sigma[i], i) };
            (lo, hi, m.matched_log_abs()[i])
        })
        .collect();
    candidates.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(b.2.total_cmp(&a.2)));
    candidates.dedup_by_key(|c| (c.0, c.1));
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));

    let mut used = vec![false; n];
    let mut pairs = Vec::new();
    for (lo, hi, _) in candidates {
        if !used[lo] && !used[hi] {
            used[lo] = true;
            used[hi] = true;
            pairs.push((lo, hi));
        }
    }
    let singletons = (0..n).filter(|&k| !used[k]).collect();
    PairList { pairs, singletons }
}

#[derive(Debug, Clone)]
pub struct MatchingOrder {
    pub order: Permutation,
    pub scaling: ScalingVector,
    pub pairs: PairList,
}

/// Matching-based ordering: pairs from [`matching_pairs`] become
/// supervariables, the compressed graph is ordered by minimum degree, and
/// each pair is expanded in place (lower index first).
pub fn matching_based_order(a: &SymSparseMatrix) -> Result<(Permutation, ScalingVector)> {
    matching_based_order_detailed(a).map(|m| (m.order, m.scaling))
}

pub fn matching_based_order_detailed(a: &SymSparseMatrix) -> Result<MatchingOrder> {
    let matching = max_product_matching(a)?;
    let pairs = matching_pairs(&matching);
    let order = compressed_order(a, &pairs);
    Ok(MatchingOrder { order, scaling: symmetrize_matching_scaling(&matching), pairs })
}

fn compressed_order(a: &SymSparseMatrix, pairs: &PairList) -> Permutation {
    let n = a.n();
    // Supervariables numbered by their smallest member.
    let mut groups: Vec<Vec<usize>> =
        pairs.pairs.iter().map(|&(i, j)| vec![i, j]).chain(pairs.singletons.iter().map(|&k| vec![k])).collect();
    groups.sort_by_key(|g| g[0]);
    let mut node_of = vec![0usize; n];
    for (g, members) in groups.iter().enumerate() {
        for &k in members {
            node_of[k] = g;
        }
    }
    let mut adj = vec![BTreeSet::new(); groups.len()];
    for (i, j, _) in a.iter() {
        let (gi, gj) = (node_of[i], node_of[j]);
        if gi != gj {
            adj[gi].insert(gj);
            adj[gj].insert(gi);
        }
    }
    let perm = min_degree_on_graph(adj).into_iter().flat_map(|g| groups[g].clone()).collect();
    Permutation::new(perm).expect("groups partition the index set")
}

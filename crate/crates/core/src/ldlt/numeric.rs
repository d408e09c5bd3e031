use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use super::symbolic::{flops_one_by_one, flops_two_by_two, SymbolicFactor};
use crate::error::{Error, Result};
use crate::ordering::Permutation;
use crate::sparsemat::{check_len, ScalingVector, SymSparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorOptions {
    /// Threshold pivoting parameter in `[0, 0.5]`.
    pub u: f64,
    /// A pivot is treated as zero when its magnitude is at most
    /// `static_small` times the largest magnitude its row has carried.
    pub static_small: f64,
    pub record_stats: bool,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self { u: 1e-8, static_small: 1e-12, record_stats: false }
    }
}

impl FactorOptions {
    pub fn with_u(u: f64) -> Self {
        Self { u, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.u) {
            return Err(Error::InvalidArgument(format!("pivot threshold u = {} outside [0, 0.5]", self.u)));
        }
        if !(self.static_small >= 0.0) {
            return Err(Error::InvalidArgument("static_small must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `(positive, negative, zero)` eigenvalue counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Inertia {
    pub fn new(positive: usize, negative: usize, zero: usize) -> Self {
        Self { positive, negative, zero }
    }
}

impl std::fmt::Display for Inertia {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.positive, self.negative, self.zero)
    }
}

/// One diagonal block of `D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PivotBlock {
    One(f64),
    /// `[[a, b], [b, c]]`.
    Two {
        a: f64,
        b: f64,
        c: f64,
    },
    /// A numerically zero 1x1 pivot.
    Zero,
}

/// Per-factorization statistics record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorStats {
    pub u_used: f64,
    pub inertia: Inertia,
    pub num_delayed: usize,
    pub num_two_by_two: usize,
    pub flops: u64,
    pub predicted_flops: u64,
    pub predicted_nnz: usize,
    pub actual_nnz: usize,
}

/// Numerical factors `P (S A S) P^T = L D L^T`.
#[derive(Debug, Clone)]
pub struct Factors {
    pub(super) perm: Permutation,
    pub(super) l_ptr: Vec<usize>,
    pub(super) l_rows: Vec<usize>,
    pub(super) l_vals: Vec<f64>,
    /// `(first step, block)` in elimination order.
    pub(super) blocks: Vec<(usize, PivotBlock)>,
    pub(super) scaling: Option<ScalingVector>,
    pub(super) inertia: Inertia,
    pub(super) num_delayed: usize,
    pub(super) flops: u64,
    pub(super) u_used: f64,
    pub(super) predicted_nnz: usize,
    pub(super) predicted_flops: u64,
}

impl Factors {
    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    /// Number of distinct columns whose elimination was deferred at least
    /// once.
    pub fn num_delayed(&self) -> usize {
        self.num_delayed
    }

    pub fn flops(&self) -> u64 {
        self.flops
    }

    pub fn u_used(&self) -> f64 {
        self.u_used
    }

    /// Pivot order actually used: step to original index.
    pub fn effective_perm(&self) -> &Permutation {
        &self.perm
    }

    pub fn blocks(&self) -> &[(usize, PivotBlock)] {
        &self.blocks
    }

    pub fn scaling(&self) -> Option<&ScalingVector> {
        self.scaling.as_ref()
    }

    pub fn num_two_by_two(&self) -> usize {
        self.blocks.iter().filter(|(_, b)| matches!(b, PivotBlock::Two { .. })).count()
    }

    /// Entries of `L` including the unit diagonal.
    pub fn nnz(&self) -> usize {
        self.n() + self.l_vals.len()
    }

    /// Column `step` of `L` below the diagonal, row indices in step space.
    pub fn l_column(&self, step: usize) -> (&[usize], &[f64]) {
        let r = self.l_ptr[step]..self.l_ptr[step + 1];
        (&self.l_rows[r.clone()], &self.l_vals[r])
    }

    pub fn stats(&self) -> FactorStats {
        FactorStats {
            u_used: self.u_used,
            inertia: self.inertia,
            num_delayed: self.num_delayed,
            num_two_by_two: self.num_two_by_two(),
            flops: self.flops,
            predicted_flops: self.predicted_flops,
            predicted_nnz: self.predicted_nnz,
            actual_nnz: self.nnz(),
        }
    }
}

/// Active submatrix during elimination: full symmetric adjacency maps over
/// pivot positions, diagonal included.
struct Workspace {
    cols: Vec<BTreeMap<usize, f64>>,
    /// Largest magnitude each row has carried; the reference for zero tests.
    reference: Vec<f64>,
    static_small: f64,
}

impl Workspace {
    fn diag(&self, k: usize) -> f64 {
        self.cols[k].get(&k).copied().unwrap_or(0.0)
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.cols[i].get(&j).copied().unwrap_or(0.0)
    }

    /// Largest off-diagonal magnitude in column `k`, skipping `skip`.
    fn col_max(&self, k: usize, skip: usize) -> f64 {
        self.cols[k].iter().filter(|(&i, _)| i != k && i != skip).fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    fn zero_tol(&self, k: usize) -> f64 {
        self.static_small * self.reference[k]
    }

    fn update(&mut self, i: usize, j: usize, delta: f64) {
        let v = self.cols[i].entry(j).or_insert(0.0);
        *v -= delta;
        let nv = *v;
        if i != j {
            *self.cols[j].entry(i).or_insert(0.0) = nv;
        } else {
            self.reference[i] = self.reference[i].max(nv.abs());
        }
    }

    /// Detaches column `k` from the active submatrix, returning its
    /// off-diagonal entries (restricted to active rows, ascending).
    fn detach(&mut self, k: usize) -> Vec<(usize, f64)> {
        let col = std::mem::take(&mut self.cols[k]);
        let out: Vec<(usize, f64)> = col.into_iter().filter(|&(i, _)| i != k).collect();
        for &(i, _) in &out {
            self.cols[i].remove(&k);
        }
        out
    }

    /// `|E^-1| (gamma_k, gamma_m)^T` growth bound of a 2x2 block, or `None`
    /// when the block is numerically singular.
    fn block_growth(&self, k: usize, m: usize) -> Option<(f64, [f64; 3])> {
        let (a, b, c) = (self.diag(k), self.entry(k, m), self.diag(m));
        let det = a * c - b * b;
        let scale = (a * c).abs() + b * b;
        if !(det.abs() > self.static_small * scale) || det == 0.0 {
            return None;
        }
        let gk = self.col_max(k, m);
        let gm = self.col_max(m, k);
        let g1 = (c.abs() * gk + b.abs() * gm) / det.abs();
        let g2 = (b.abs() * gk + a.abs() * gm) / det.abs();
        Some((g1.max(g2), [a, b, c]))
    }
}

struct Elimination {
    steps: Vec<usize>,
    l_cols: Vec<Vec<(usize, f64)>>,
    blocks: Vec<(usize, PivotBlock)>,
    flops: u64,
}

impl Elimination {
    fn one(&mut self, ws: &mut Workspace, k: usize, d: f64) -> Result<()> {
        let col = ws.detach(k);
        let step = self.steps.len();
        let l: Vec<(usize, f64)> = col.iter().map(|&(i, v)| (i, v / d)).collect();
        if l.iter().any(|(_, x)| !x.is_finite()) {
            return Err(Error::NonFiniteFactor(step));
        }
        for (p, &(i, li)) in l.iter().enumerate() {
            for &(j, vj) in &col[p..] {
                ws.update(i, j, li * vj);
            }
        }
        self.flops += flops_one_by_one(col.len());
        self.steps.push(k);
        self.l_cols.push(l);
        self.blocks.push((step, PivotBlock::One(d)));
        Ok(())
    }

    fn zero(&mut self, ws: &mut Workspace, k: usize) {
        ws.detach(k);
        self.flops += 1;
        self.blocks.push((self.steps.len(), PivotBlock::Zero));
        self.steps.push(k);
        self.l_cols.push(Vec::new());
    }

    fn two(&mut self, ws: &mut Workspace, k: usize, m: usize, [a, b, c]: [f64; 3]) -> Result<()> {
        let ck = ws.detach(k);
        let cm = ws.detach(m);
        let mut rows: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
        for &(i, v) in &ck {
            if i != m {
                rows.entry(i).or_insert((0.0, 0.0)).0 = v;
            }
        }
        for &(i, v) in &cm {
            if i != k {
                rows.entry(i).or_insert((0.0, 0.0)).1 = v;
            }
        }
        let step = self.steps.len();
        let det = a * c - b * b;
        let rows: Vec<(usize, f64, f64)> = rows.into_iter().map(|(i, (wk, wm))| (i, wk, wm)).collect();
        // [l_k, l_m] = [w_k, w_m] E^{-1}
        let l: Vec<(usize, f64, f64)> =
            rows.iter().map(|&(i, wk, wm)| (i, (c * wk - b * wm) / det, (a * wm - b * wk) / det)).collect();
        if l.iter().any(|&(_, x, y)| !(x.is_finite() && y.is_finite())) {
            return Err(Error::NonFiniteFactor(step));
        }
        for (p, &(i, lk, lm)) in l.iter().enumerate() {
            for &(j, wk, wm) in &rows[p..] {
                ws.update(i, j, lk * wk + lm * wm);
            }
        }
        self.flops += flops_two_by_two(rows.len());
        self.steps.push(k);
        self.steps.push(m);
        self.l_cols.push(l.iter().map(|&(i, x, _)| (i, x)).collect());
        self.l_cols.push(l.iter().map(|&(i, _, y)| (i, y)).collect());
        self.blocks.push((step, PivotBlock::Two { a, b, c }));
        Ok(())
    }
}

/// Threshold-pivoted `LDL^T` of `A` (or `S A S` when a scaling is given),
/// following the analyse order.
///
/// A 1x1 pivot `d` is accepted when `|d| >= u * max_i |a_ik|`; otherwise a
/// 2x2 pivot with the next candidate in the queue is tried under the test
/// `|E^-1| (gamma_k, gamma_m)^T <= 1/u`. A column failing both is moved to
/// the back of the queue. If every remaining column fails in turn, the most
/// stable available pivot is taken unconditionally.
pub fn factorize(
    a: &SymSparseMatrix,
    sf: &SymbolicFactor,
    opts: &FactorOptions,
    scaling: Option<&ScalingVector>,
) -> Result<Factors> {
    opts.validate()?;
    let n = a.n();
    check_len(n, sf.n())?;
    if let Some(s) = scaling {
        check_len(n, s.len())?;
    }
    let pos = sf.order().inverse();
    let sv = scaling.map(ScalingVector::as_slice);

    let mut ws = Workspace { cols: vec![BTreeMap::new(); n], reference: vec![0.0; n], static_small: opts.static_small };
    for (i, j, v) in a.iter() {
        let v = match sv {
            Some(s) => s[i] * v * s[j],
            None => v,
        };
        let (p, q) = (pos[i], pos[j]);
        ws.cols[p].insert(q, v);
        ws.cols[q].insert(p, v);
        ws.reference[p] = ws.reference[p].max(v.abs());
        ws.reference[q] = ws.reference[q].max(v.abs());
    }

    let u = opts.u;
    let mut queue: VecDeque<usize> = (0..n).collect();
    let mut delayed = vec![false; n];
    let mut num_delayed = 0usize;
    let mut stall = 0usize;
    let mut elim =
        Elimination { steps: Vec::with_capacity(n), l_cols: Vec::with_capacity(n), blocks: Vec::new(), flops: 0 };

    while let Some(k) = queue.pop_front() {
        if stall > queue.len() {
            queue.push_front(k);
            forced_pivot(&mut ws, &mut elim, &mut queue)?;
            stall = 0;
            continue;
        }
        let d = ws.diag(k);
        let gamma = ws.col_max(k, usize::MAX);
        let tol = ws.zero_tol(k);
        if d.abs() <= tol && gamma <= tol {
            elim.zero(&mut ws, k);
            stall = 0;
            continue;
        }
        if d.abs() > tol && d.abs() >= u * gamma {
            elim.one(&mut ws, k, d)?;
            stall = 0;
            continue;
        }
        if let Some(&m) = queue.front() {
            if let Some((growth, block)) = ws.block_growth(k, m) {
                if u * growth <= 1.0 {
                    queue.pop_front();
                    elim.two(&mut ws, k, m, block)?;
                    stall = 0;
                    continue;
                }
            }
        }
        if !delayed[k] {
            delayed[k] = true;
            num_delayed += 1;
        }
        queue.push_back(k);
        stall += 1;
    }

    let Elimination { steps, l_cols, blocks, flops } = elim;
    let mut step_of = vec![0usize; n];
    for (t, &p) in steps.iter().enumerate() {
        step_of[p] = t;
    }
    let mut l_ptr = Vec::with_capacity(n + 1);
    l_ptr.push(0);
    let mut l_rows = Vec::new();
    let mut l_vals = Vec::new();
    for col in l_cols {
        let mut col: Vec<(usize, f64)> = col.into_iter().map(|(p, v)| (step_of[p], v)).collect();
        col.sort_by_key(|&(t, _)| t);
        for (t, v) in col {
            l_rows.push(t);
            l_vals.push(v);
        }
        l_ptr.push(l_rows.len());
    }
    let order = sf.order().as_slice();
    let perm = Permutation::new(steps.iter().map(|&p| order[p]).collect())?;

    Ok(Factors {
        perm,
        l_ptr,
        l_rows,
        l_vals,
        inertia: inertia_of(&blocks),
        blocks,
        scaling: scaling.cloned(),
        num_delayed,
        flops,
        u_used: u,
        predicted_nnz: sf.predicted_nnz(),
        predicted_flops: sf.predicted_flops(),
    })
}

/// Eliminates the most stable pivot among all remaining columns, ignoring
/// the threshold: the best 1x1 ratio `|d| / gamma` or 2x2 block with the
/// largest off-diagonal partner, scored by `1 / growth`.
fn forced_pivot(ws: &mut Workspace, elim: &mut Elimination, queue: &mut VecDeque<usize>) -> Result<()> {
    enum Choice {
        One(usize, f64),
        Two(usize, usize, [f64; 3]),
    }
    let mut best: Option<(f64, Choice)> = None;
    for &k in queue.iter() {
        let d = ws.diag(k);
        let gamma = ws.col_max(k, usize::MAX);
        if d.abs() > ws.zero_tol(k) {
            let score = if gamma == 0.0 { f64::INFINITY } else { d.abs() / gamma };
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, Choice::One(k, d)));
            }
        }
        let partner = ws.cols[k].iter().filter(|(&i, _)| i != k).fold(None::<(usize, f64)>, |acc, (&i, v)| match acc {
            Some((_, m)) if m >= v.abs() => acc,
            _ => Some((i, v.abs())),
        });
        if let Some((m, _)) = partner {
            if let Some((growth, block)) = ws.block_growth(k, m) {
                let score = 1.0 / growth;
                if best.as_ref().is_none_or(|(s, _)| score > *s) {
                    best = Some((score, Choice::Two(k, m, block)));
                }
            }
        }
    }
    match best {
        Some((_, Choice::One(k, d))) => {
            queue.retain(|&x| x != k);
            elim.one(ws, k, d)
        }
        Some((_, Choice::Two(k, m, block))) => {
            queue.retain(|&x| x != k && x != m);
            elim.two(ws, k, m, block)
        }
        None => {
            let k = queue.pop_front().expect("forced pivot on empty queue");
            elim.zero(ws, k);
            Ok(())
        }
    }
}

fn inertia_of(blocks: &[(usize, PivotBlock)]) -> Inertia {
    let mut inertia = Inertia::new(0, 0, 0);
    for (_, b) in blocks {
        match *b {
            PivotBlock::One(d) if d > 0.0 => inertia.positive += 1,
            PivotBlock::One(_) => inertia.negative += 1,
            PivotBlock::Zero => inertia.zero += 1,
            PivotBlock::Two { a, b, c } => {
                let det = a * c - b * b;
                if det < 0.0 {
                    inertia.positive += 1;
                    inertia.negative += 1;
                } else if a + c > 0.0 {
                    inertia.positive += 2;
                } else {
                    inertia.negative += 2;
                }
            }
        }
    }
    inertia
}

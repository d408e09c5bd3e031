//! Augmented (KKT) systems of barrier methods.
//!
//! ```text
//! [ W + Sigma + dw I    J^T  ] [dx]   [bx]
//! [ J                 -dc I  ] [dl] = [bl]
//! ```
//!
//! [`assemble_kkt`] builds the matrix, [`inertia_correct`] picks the shifts
//! `dw`, `dc` so that the inertia is `(n, m, 0)`, and [`AugmentedSolver`]
//! routes every factorization through the scaling [`Controller`]. The
//! [`ipm`] submodule drives a primal barrier method on the toy problems in
//! [`problems`].

pub mod ipm;
pub mod problems;

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::controller::{compute_scaling, Controller, FactorEvent, Policy, Scaler, ScalingAction};
use crate::error::{Error, Result};
use crate::ldlt::{analyse, factorize, refine, FactorOptions, Factors, Inertia, RefineOutcome, SymbolicFactor};
use crate::ordering::min_degree_order;
use crate::sparsemat::{check_len, ScalingVector, SymSparseMatrix};

pub use ipm::{ipm_solve, IpmOptions, IpmResult, IterationRecord};
pub use problems::{NlpProblem, QpProblem};

/// `m x n` matrix in coordinate form; duplicates are summed on assembly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseJacobian {
    pub m: usize,
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseJacobian {
    pub fn new(m: usize, n: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, v) in &entries {
            if i >= m || j >= n {
                return Err(Error::IndexOutOfRange { row: i, col: j, n: m.max(n) });
            }
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { row: i, col: j });
            }
        }
        Ok(Self { m, n, entries })
    }

    /// `J x`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    /// `J^T y`.
    pub fn mul_t(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            x[j] += v * y[i];
        }
        x
    }
}

#[derive(Debug, Clone)]
pub struct KktParts {
    pub w: SymSparseMatrix,
    pub jac: SparseJacobian,
    pub sigma: Vec<f64>,
    pub delta_w: f64,
    pub delta_c: f64,
}

impl KktParts {
    pub fn new(w: SymSparseMatrix, jac: SparseJacobian) -> Self {
        let n = w.n();
        Self { w, jac, sigma: vec![0.0; n], delta_w: 0.0, delta_c: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    pub fn m(&self) -> usize {
        self.jac.m
    }

    fn validate(&self) -> Result<()> {
        let n = self.w.n();
        check_len(n, self.jac.n)?;
        check_len(n, self.sigma.len())?;
        if let Some(i) = self.sigma.iter().position(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma[{i}] = {} is not a finite nonnegative value",
                self.sigma[i]
            )));
        }
        if !(self.delta_w >= 0.0 && self.delta_c >= 0.0) {
            return Err(Error::InvalidArgument("regularization shifts must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktRhs {
    pub bx: Vec<f64>,
    pub blambda: Vec<f64>,
}

impl KktRhs {
    pub fn stacked(&self) -> Vec<f64> {
        self.bx.iter().chain(&self.blambda).copied().collect()
    }

    pub fn split(v: &[f64], n: usize) -> Self {
        Self { bx: v[..n].to_vec(), blambda: v[n..].to_vec() }
    }
}

/// Assembles the `(n+m)`-dimensional augmented matrix. Every diagonal entry
/// is stored, even when zero, so the pattern does not depend on the shifts
/// and one analyse serves a whole run.
pub fn assemble_kkt(parts: &KktParts) -> Result<SymSparseMatrix> {
    parts.validate()?;
    let (n, m) = (parts.n(), parts.m());
    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(parts.w.nnz() + parts.jac.entries.len() + n + m);
    entries.extend(parts.w.iter());
    entries.extend((0..n).map(|i| (i, i, parts.sigma[i] + parts.delta_w)));
    entries.extend(parts.jac.entries.iter().map(|&(i, j, v)| (n + i, j, v)));
    entries.extend((0..m).map(|i| (n + i, n + i, -parts.delta_c)));
    SymSparseMatrix::from_triplets(n + m, entries)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaOptions {
    /// First nonzero `delta_w`.
    pub delta_w_init: f64,
    pub delta_w_growth: f64,
    pub delta_w_max: f64,
    /// `delta_c` used once a zero eigenvalue is detected.
    pub delta_c_bar: f64,
    pub max_retries: usize,
}

impl Default for InertiaOptions {
    fn default() -> Self {
        Self { delta_w_init: 1e-4, delta_w_growth: 10.0, delta_w_max: 1e10, delta_c_bar: 1e-8, max_retries: 30 }
    }
}

/// Per-run counters of an [`AugmentedSolver`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub factorizations: usize,
    pub total_flops: u64,
    pub max_delayed: usize,
    pub total_delayed: usize,
    pub scalings_computed: usize,
    pub refinement_failures: usize,
    pub scaling_time: Duration,
    pub factor_time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub refine_steps: usize,
    pub refine_tol: f64,
    pub static_small: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { refine_steps: 5, refine_tol: 1e-10, static_small: FactorOptions::default().static_small }
    }
}

/// Factorizes a sequence of matrices sharing one pattern, letting a
/// [`Controller`] decide the scaling before every factorization.
pub struct AugmentedSolver {
    controller: Controller,
    opts: SolverOptions,
    pattern: Option<(Vec<usize>, Vec<usize>)>,
    base_symbolic: Option<SymbolicFactor>,
    matching_symbolic: Option<SymbolicFactor>,
    current: Option<Factors>,
    last_u: f64,
    pending: Option<FactorEvent>,
    trace: Vec<FactorEvent>,
    stats: SolverStats,
}

impl AugmentedSolver {
    pub fn new(policy: Policy, opts: SolverOptions) -> Result<Self> {
        let controller = Controller::new(policy)?;
        Ok(Self {
            last_u: controller.u(),
            controller,
            opts,
            pattern: None,
            base_symbolic: None,
            matching_symbolic: None,
            current: None,
            pending: None,
            trace: Vec::new(),
            stats: SolverStats::default(),
        })
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn stats(&self) -> &SolverStats {
        &self.stats
    }

    pub fn factors(&self) -> Option<&Factors> {
        self.current.as_ref()
    }

    /// One event per factorization, in order. The last one is included once
    /// it has been settled by [`finish`](Self::finish) or a later
    /// factorization.
    pub fn trace(&self) -> &[FactorEvent] {
        &self.trace
    }

    fn settle_pending(&mut self) -> Option<FactorEvent> {
        let ev = self.pending.take()?;
        self.trace.push(ev);
        Some(ev)
    }

    /// Closes the run: records the last event and fills the decision log.
    pub fn finish(&mut self) {
        if let Some(ev) = self.settle_pending() {
            self.controller.close(&ev);
        }
    }

    fn base_symbolic(&mut self, k: &SymSparseMatrix) -> Result<SymbolicFactor> {
        let pattern = (k.col_ptr().to_vec(), k.row_indices().to_vec());
        if self.pattern.as_ref() != Some(&pattern) {
            self.base_symbolic = None;
            self.matching_symbolic = None;
            self.pattern = Some(pattern);
        }
        if self.base_symbolic.is_none() {
            self.base_symbolic = Some(analyse(k, &min_degree_order(k))?);
        }
        Ok(self.base_symbolic.clone().expect("just analysed"))
    }

    /// Factorizes `k` and returns its inertia.
    pub fn factorize(&mut self, k: &SymSparseMatrix) -> Result<Inertia> {
        let prev = self.settle_pending();
        let decision = self.controller.decide_next(prev.as_ref());
        let mut base = self.base_symbolic(k)?;

        let scaling: Option<ScalingVector> = match decision.scaling {
            ScalingAction::None => None,
            ScalingAction::Recompute => {
                let t = Instant::now();
                let out = compute_scaling(self.controller.policy().scaler, k);
                self.stats.scaling_time += t.elapsed();
                match out {
                    Ok(out) => {
                        self.stats.scalings_computed += 1;
                        if let Some(order) = &out.order {
                            let t = Instant::now();
                            self.matching_symbolic = Some(analyse(k, order)?);
                            self.stats.scaling_time += t.elapsed();
                        }
                        self.controller.store_scaling(out);
                    }
                    Err(e) => log::warn!("scaling failed, continuing with the previous one: {e}"),
                }
                self.controller.cached_scaling().cloned()
            }
            ScalingAction::Reuse => self.controller.cached_scaling().cloned(),
        };
        if scaling.is_some() && self.controller.policy().scaler == Scaler::MatchingOrder {
            if let Some(sf) = &self.matching_symbolic {
                base = sf.clone();
            }
        }

        let opts = FactorOptions { u: decision.u, static_small: self.opts.static_small, record_stats: true };
        let t = Instant::now();
        let f = factorize(k, &base, &opts, scaling.as_ref())?;
        self.stats.factor_time += t.elapsed();
        self.stats.factorizations += 1;
        self.stats.total_flops += f.flops();
        self.stats.max_delayed = self.stats.max_delayed.max(f.num_delayed());
        self.stats.total_delayed += f.num_delayed();
        log::debug!("factorization {}: {:?}", self.stats.factorizations, f.stats());

        self.last_u = decision.u;
        self.pending = Some(FactorEvent { num_delayed: f.num_delayed(), n: k.n(), ir_converged: true, ir_error: 0.0 });
        let inertia = f.inertia();
        self.current = Some(f);
        Ok(inertia)
    }

    /// Solves with the current factors and iterative refinement. If
    /// refinement fails and the controller responds by changing the threshold
    /// or the scaling, `k` is refactorized once and the solve repeated.
    pub fn solve(&mut self, k: &SymSparseMatrix, b: &[f64]) -> Result<RefineOutcome> {
        let out = self.refine_current(k, b)?;
        if out.converged {
            return Ok(out);
        }
        let before_u = self.last_u;
        self.factorize(k)?;
        let changed = self.last_u != before_u
            || self.controller.log().last().map(|r| r.decision) == Some(ScalingAction::Recompute);
        if !changed {
            return Ok(out);
        }
        let retry = self.refine_current(k, b)?;
        Ok(if retry.backward_error <= out.backward_error || retry.converged { retry } else { out })
    }

    fn refine_current(&mut self, k: &SymSparseMatrix, b: &[f64]) -> Result<RefineOutcome> {
        let f = self.current.as_ref().ok_or_else(|| Error::InvalidArgument("solve called before factorize".into()))?;
        let out = refine(k, f, b, self.opts.refine_steps, self.opts.refine_tol)?;
        if let Some(ev) = self.pending.as_mut() {
            ev.ir_converged &= out.converged;
            ev.ir_error = ev.ir_error.max(out.backward_error);
        }
        if !out.converged {
            self.stats.refinement_failures += 1;
        }
        Ok(out)
    }
}

/// Result of [`inertia_correct`].
#[derive(Debug, Clone)]
pub struct Corrected {
    pub matrix: SymSparseMatrix,
    pub delta_w: f64,
    pub delta_c: f64,
    pub inertia: Inertia,
    pub factorizations: usize,
}

/// Factorizes the augmented matrix, raising `delta_c` on a zero eigenvalue
/// and `delta_w` geometrically otherwise, until the inertia is `(n, m, 0)`.
/// `parts.delta_w` and `parts.delta_c` are ignored: both start at zero.
pub fn inertia_correct(solver: &mut AugmentedSolver, parts: &KktParts, opts: &InertiaOptions) -> Result<Corrected> {
    let (n, m) = (parts.n(), parts.m());
    let target = Inertia::new(n, m, 0);
    let mut p = parts.clone();
    p.delta_w = 0.0;
    p.delta_c = 0.0;
    for attempt in 0..=opts.max_retries {
        let k = assemble_kkt(&p)?;
        let inertia = solver.factorize(&k)?;
        if inertia == target {
            return Ok(Corrected {
                matrix: k,
                delta_w: p.delta_w,
                delta_c: p.delta_c,
                inertia,
                factorizations: attempt + 1,
            });
        }
        if inertia.zero > 0 && p.delta_c == 0.0 && m > 0 {
            p.delta_c = opts.delta_c_bar;
            continue;
        }
        p.delta_w = if p.delta_w == 0.0 { opts.delta_w_init } else { p.delta_w * opts.delta_w_growth };
        if p.delta_w > opts.delta_w_max {
            break;
        }
    }
    Err(Error::InertiaCorrectionFailed(opts.max_retries))
}

/// A solver that never scales.
pub fn plain_solver() -> AugmentedSolver {
    AugmentedSolver::new(Policy::unscaled(), SolverOptions::default()).expect("default policy is valid")
}

use crate::error::{Error, Result};
use crate::sparsemat::{ScalingVector, SymSparseMatrix};

/// Which least-squares problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurtisReidVariant {
    /// Independent row and column exponents, averaged at the end.
    UnsymmetricAveraged,
    /// A single exponent per index.
    Symmetric,
}

#[derive(Debug, Clone, Copy)]
pub struct CurtisReidOptions {
    pub variant: CurtisReidVariant,
    /// Stop when the normal-equations residual drops below `tol` times the
    /// initial residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CurtisReidOptions {
    fn default() -> Self {
        Self { variant: CurtisReidVariant::Symmetric, tol: 1e-8, max_iter: 100 }
    }
}

#[derive(Debug, Clone)]
pub struct CurtisReidReport {
    pub scaling: ScalingVector,
    /// Natural-log exponents `e` with `s = exp(e)`.
    pub exponents: Vec<f64>,
    /// Symmetric objective at the returned exponents.
    pub objective: f64,
    /// Objective with no scaling (`e = 0`).
    pub initial_objective: f64,
    pub iterations: usize,
    /// Final relative residual of the normal equations.
    pub relative_residual: f64,
    /// Objective after each conjugate gradient iterate, starting at `e = 0`.
    /// Recorded in the symmetric variant only (the averaged variant's
    /// iterates live in the row/column space).
    pub objective_history: Vec<f64>,
}

/// `sum over nonzero a_ij of the full symmetric matrix of
/// (ln|a_ij| + e_i + e_j)^2`.
pub fn curtis_reid_objective(a: &SymSparseMatrix, exponents: &[f64]) -> f64 {
    a.iter()
        .filter(|&(_, _, v)| v != 0.0)
        .map(|(i, j, v)| {
            let t = v.abs().ln() + exponents[i] + exponents[j];
            if i == j {
                t * t
            } else {
                2.0 * t * t
            }
        })
        .sum()
}

pub fn curtis_reid_scale(
    a: &SymSparseMatrix,
    variant: CurtisReidVariant,
    tol: f64,
    max_iter: usize,
) -> Result<ScalingVector> {
    curtis_reid(a, &CurtisReidOptions { variant, tol, max_iter }).map(|r| r.scaling)
}

pub fn curtis_reid(a: &SymSparseMatrix, opts: &CurtisReidOptions) -> Result<CurtisReidReport> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let entries: Vec<(usize, usize, f64)> =
        a.iter().filter(|&(_, _, v)| v != 0.0).map(|(i, j, v)| (i, j, v.abs().ln())).collect();
    if entries.is_empty() {
        return Err(Error::AllZero);
    }
    let n = a.n();

    let (exponents, iterations, relative_residual, objective_history) = match opts.variant {
        CurtisReidVariant::Symmetric => {
            let op = SymmetricNormal::new(n, &entries);
            let rhs = op.rhs(&entries);
            let mut history = vec![curtis_reid_objective(a, &vec![0.0; n])];
            let (e, iters, res) = conjugate_gradient(&op, &rhs, opts.tol, opts.max_iter, |e| {
                history.push(curtis_reid_objective(a, e));
            });
            (e, iters, res, history)
        }
        CurtisReidVariant::UnsymmetricAveraged => {
            let op = RowColNormal::new(n, &entries);
            let rhs = op.rhs(&entries);
            let (rc, iters, res) = conjugate_gradient(&op, &rhs, opts.tol, opts.max_iter, |_| {});
            let e: Vec<f64> = (0..n).map(|k| 0.5 * (rc[k] + rc[n + k])).collect();
            (e, iters, res, Vec::new())
        }
    };

    Ok(CurtisReidReport {
        scaling: ScalingVector::from_exponents(&exponents)?,
        objective: curtis_reid_objective(a, &exponents),
        initial_objective: curtis_reid_objective(a, &vec![0.0; n]),
        exponents,
        iterations,
        relative_residual,
        objective_history,
    })
}

trait NormalOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Normal equations of the symmetric problem, halved:
/// `(M e)_k = sum_{j in row k} (e_k + e_j)`, rhs `-sum_j ln|a_kj|`.
struct SymmetricNormal<'a> {
    n: usize,
    entries: &'a [(usize, usize, f64)],
}

impl<'a> SymmetricNormal<'a> {
    fn new(n: usize, entries: &'a [(usize, usize, f64)]) -> Self {
        Self { n, entries }
    }

    fn rhs(&self, entries: &[(usize, usize, f64)]) -> Vec<f64> {
        let mut b = vec![0.0; self.n];
        for &(i, j, rho) in entries {
            b[i] -= rho;
            if i != j {
                b[j] -= rho;
            }
        }
        b
    }
}

impl NormalOperator for SymmetricNormal<'_> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for &(i, j, _) in self.entries {
            if i == j {
                y[i] += 2.0 * x[i];
            } else {
                let t = x[i] + x[j];
                y[i] += t;
                y[j] += t;
            }
        }
    }
}

/// Normal equations in `(r, c)` for `sum (ln|a_ij| + r_i + c_j)^2` over the
/// full pattern, unknowns stacked as `[r; c]`.
struct RowColNormal<'a> {
    n: usize,
    entries: &'a [(usize, usize, f64)],
}

impl<'a> RowColNormal<'a> {
    fn new(n: usize, entries: &'a [(usize, usize, f64)]) -> Self {
        Self { n, entries }
    }

    fn rhs(&self, entries: &[(usize, usize, f64)]) -> Vec<f64> {
        let n = self.n;
        let mut b = vec![0.0; 2 * n];
        for &(i, j, rho) in entries {
            b[i] -= rho;
            b[n + j] -= rho;
            if i != j {
                b[j] -= rho;
                b[n + i] -= rho;
            }
        }
        b
    }
}

impl NormalOperator for RowColNormal<'_> {
    fn dim(&self) -> usize {
        2 * self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        y.fill(0.0);
        let mut visit = |r: usize, c: usize| {
            let t = x[r] + x[n + c];
            y[r] += t;
            y[n + c] += t;
        };
        for &(i, j, _) in self.entries {
            visit(i, j);
            if i != j {
                visit(j, i);
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Plain CG from zero on a positive semidefinite, consistent system.
/// Returns `(x, iterations, final relative residual)`.
fn conjugate_gradient<O: NormalOperator>(
    op: &O,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
    mut on_iterate: impl FnMut(&[f64]),
) -> (Vec<f64>, usize, f64) {
    let dim = op.dim();
    let mut x = vec![0.0; dim];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut q = vec![0.0; dim];
    let rhs_norm = dot(rhs, rhs).sqrt();
    if rhs_norm == 0.0 {
        return (x, 0, 0.0);
    }
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    while iterations < max_iter && rr.sqrt() > tol * rhs_norm {
        op.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            break;
        }
        let alpha = rr / pq;
        for k in 0..dim {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        iterations += 1;
        on_iterate(&x);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..dim {
            p[k] = r[k] + beta * p[k];
        }
    }
    (x, iterations, rr.sqrt() / rhs_norm)
}

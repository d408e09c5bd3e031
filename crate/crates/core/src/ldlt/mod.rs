//! Sparse symmetric indefinite `LDL^T` factorization.
//!
//! [`analyse`] predicts the structure of `L` for a given order. [`factorize`]
//! then eliminates in that order with threshold 1x1/2x2 pivoting; columns that
//! fail the test are delayed to the end of the queue, so the effective order
//! can differ from the analysed one. [`solve`] and [`refine`] work in the
//! original (unscaled, unpermuted) space.

mod numeric;
mod symbolic;

use serde::Serialize;

pub use numeric::{factorize, FactorOptions, FactorStats, Factors, Inertia, PivotBlock};
pub use symbolic::{analyse, SymbolicFactor};

use crate::error::{Error, Result};
use crate::sparsemat::{check_len, norm_inf, SymSparseMatrix};

/// Relative size below which the rhs component hitting a zero pivot is
/// treated as lying in the range of the matrix.
const ZERO_PIVOT_RHS_TOL: f64 = 1e-8;

/// Solves `A x = b` with the factors of `A` (or of `S A S`).
pub fn solve(f: &Factors, b: &[f64]) -> Result<Vec<f64>> {
    let n = f.n();
    check_len(n, b.len())?;
    let perm = f.perm.as_slice();
    let s = f.scaling.as_ref().map(|s| s.as_slice());

    let mut y: Vec<f64> = perm.iter().map(|&i| s.map_or(b[i], |s| s[i] * b[i])).collect();
    let scale = norm_inf(&y);

    for t in 0..n {
        let yt = y[t];
        if yt != 0.0 {
            let (rows, vals) = f.l_column(t);
            for (&r, &l) in rows.iter().zip(vals) {
                y[r] -= l * yt;
            }
        }
    }

    for &(t, block) in &f.blocks {
        match block {
            PivotBlock::One(d) => y[t] /= d,
            PivotBlock::Two { a, b, c } => {
                let det = a * c - b * b;
                let (p, q) = (y[t], y[t + 1]);
                y[t] = (c * p - b * q) / det;
                y[t + 1] = (a * q - b * p) / det;
            }
            PivotBlock::Zero => {
                if y[t].abs() > ZERO_PIVOT_RHS_TOL * scale {
                    return Err(Error::NoSolution);
                }
                y[t] = 0.0;
            }
        }
    }

    for t in (0..n).rev() {
        let (rows, vals) = f.l_column(t);
        let dot: f64 = rows.iter().zip(vals).map(|(&r, &l)| l * y[r]).sum();
        y[t] -= dot;
    }

    let mut x = vec![0.0; n];
    for (t, &i) in perm.iter().enumerate() {
        x[i] = s.map_or(y[t], |s| s[i] * y[t]);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFactor(n));
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineOutcome {
    pub x: Vec<f64>,
    pub backward_error: f64,
    pub converged: bool,
    /// Correction steps applied after the initial solve.
    pub steps: usize,
}

/// `||b - A x||_inf / (||A||_inf ||x||_inf + ||b||_inf)`, zero when the
/// denominator vanishes.
pub fn backward_error(a: &SymSparseMatrix, x: &[f64], b: &[f64]) -> Result<f64> {
    let r = residual(a, x, b)?;
    Ok(backward_error_from(a.norm_inf(), &r, x, b))
}

fn residual(a: &SymSparseMatrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_len(a.n(), b.len())?;
    let ax = a.matvec(x)?;
    Ok(b.iter().zip(ax).map(|(bi, axi)| bi - axi).collect())
}

fn backward_error_from(a_norm: f64, r: &[f64], x: &[f64], b: &[f64]) -> f64 {
    let denom = a_norm * norm_inf(x) + norm_inf(b);
    let num = norm_inf(r);
    if denom == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / denom
    }
}

/// Iterative refinement `x <- x + solve(f, b - A x)` on the unscaled system.
/// Stops once the backward error is at most `tol` or after `max_steps`
/// corrections. Failure to converge is reported, not raised.
pub fn refine(a: &SymSparseMatrix, f: &Factors, b: &[f64], max_steps: usize, tol: f64) -> Result<RefineOutcome> {
    check_len(a.n(), f.n())?;
    check_len(a.n(), b.len())?;
    let a_norm = a.norm_inf();
    let failed = |x: Vec<f64>, steps| RefineOutcome { x, backward_error: f64::INFINITY, converged: false, steps };

    let mut x = match solve(f, b) {
        Ok(x) => x,
        Err(Error::NoSolution | Error::NonFiniteFactor(_)) => return Ok(failed(vec![0.0; a.n()], 0)),
        Err(e) => return Err(e),
    };
    let mut steps = 0;
    loop {
        let r = residual(a, &x, b)?;
        let berr = backward_error_from(a_norm, &r, &x, b);
        if !berr.is_finite() {
            return Ok(failed(x, steps));
        }
        if berr <= tol || steps >= max_steps {
            return Ok(RefineOutcome { x, backward_error: berr, converged: berr <= tol, steps });
        }
        let dx = match solve(f, &r) {
            Ok(dx) => dx,
            Err(Error::NoSolution | Error::NonFiniteFactor(_)) => {
                return Ok(RefineOutcome { x, backward_error: berr, converged: false, steps })
            }
            Err(e) => return Err(e),
        };
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        steps += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordering::{min_degree_order, Permutation};
    use crate::sparsemat::ScalingVector;

    fn factor(a: &SymSparseMatrix, u: f64) -> Factors {
        let sf = analyse(a, &Permutation::identity(a.n())).unwrap();
        factorize(a, &sf, &FactorOptions::with_u(u), None).unwrap()
    }

    fn swap() -> SymSparseMatrix {
        SymSparseMatrix::from_dense(2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn identity_factors() {
        let f = factor(&SymSparseMatrix::identity(3), 1e-8);
        assert_eq!(f.inertia(), Inertia::new(3, 0, 0));
        assert_eq!(f.num_delayed(), 0);
        assert!(f.blocks().iter().all(|(_, b)| *b == PivotBlock::One(1.0)));
        assert_eq!(solve(&f, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn swap_matrix_takes_a_two_by_two() {
        let f = factor(&swap(), 0.01);
        assert_eq!(f.inertia(), Inertia::new(1, 1, 0));
        assert_eq!(f.num_delayed(), 0);
        assert_eq!(f.num_two_by_two(), 1);
        assert_eq!(solve(&f, &[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn tiny_diagonal_fails_one_by_one() {
        let a = SymSparseMatrix::from_dense(2, &[1e-20, 1.0, 1.0, 1e-20]).unwrap();
        let f = factor(&a, 0.5);
        assert_eq!(f.num_two_by_two(), 1);
        assert_eq!(f.inertia(), Inertia::new(1, 1, 0));
    }

    #[test]
    fn threshold_out_of_range() {
        let a = SymSparseMatrix::identity(2);
        let sf = analyse(&a, &Permutation::identity(2)).unwrap();
        assert!(factorize(&a, &sf, &FactorOptions::with_u(0.6), None).is_err());
        assert!(factorize(&a, &sf, &FactorOptions::with_u(-0.1), None).is_err());
    }

    #[test]
    fn delayed_column_is_counted_once() {
        // Column 0 has a tiny diagonal and no 2x2 partner passes with the
        // next queued column (1), so it is delayed behind it.
        let a = SymSparseMatrix::from_dense(3, &[1e-6, 0.0, 1.0, 0.0, 2.0, 0.0, 1.0, 0.0, 3.0]).unwrap();
        let f = factor(&a, 0.1);
        assert_eq!(f.num_delayed(), 1);
        assert_eq!(f.effective_perm().as_slice()[0], 1);
        let x = solve(&f, &[1.0, 2.0, 3.0]).unwrap();
        assert!(backward_error(&a, &x, &[1.0, 2.0, 3.0]).unwrap() < 1e-15);
    }

    #[test]
    fn zero_matrix_is_all_zero_pivots() {
        let a = SymSparseMatrix::from_triplets(3, [(0, 0, 0.0), (1, 1, 0.0), (2, 2, 0.0)]).unwrap();
        let f = factor(&a, 0.1);
        assert_eq!(f.inertia(), Inertia::new(0, 0, 3));
        assert_eq!(solve(&f, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(matches!(solve(&f, &[1.0, 0.0, 0.0]), Err(Error::NoSolution)));
        let r = refine(&a, &f, &[1.0, 0.0, 0.0], 3, 1e-10).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn singular_consistent_system() {
        let a = SymSparseMatrix::from_dense(2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let f = factor(&a, 0.1);
        assert_eq!(f.inertia(), Inertia::new(1, 0, 1));
        assert_eq!(solve(&f, &[2.0, 0.0]).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn scaled_factorization_solves_the_original_system() {
        let a = SymSparseMatrix::from_dense(2, &[4.0, 2.0, 2.0, -3.0]).unwrap();
        let s = ScalingVector::new(vec![0.5, 2.0]).unwrap();
        let sf = analyse(&a, &Permutation::identity(2)).unwrap();
        let f = factorize(&a, &sf, &FactorOptions::default(), Some(&s)).unwrap();
        let b = [1.0, -1.0];
        let x = solve(&f, &b).unwrap();
        assert!(backward_error(&a, &x, &b).unwrap() < 1e-15);
    }

    #[test]
    fn refine_on_identity_needs_no_steps() {
        let a = SymSparseMatrix::identity(4);
        let f = factor(&a, 1e-8);
        let r = refine(&a, &f, &[1.0, -2.0, 3.0, 0.5], 5, 1e-14).unwrap();
        assert!(r.converged);
        assert_eq!(r.steps, 0);
        assert!(r.backward_error <= 1e-16);
    }

    #[test]
    fn refine_with_wrong_factors_fails() {
        let a = SymSparseMatrix::from_dense(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let wrong = SymSparseMatrix::from_dense(2, &[2.0, 1.0, 1.0, -50.0]).unwrap();
        let f = factor(&wrong, 0.1);
        let r = refine(&a, &f, &[1.0, 1.0], 4, 1e-12).unwrap();
        assert!(!r.converged);
        assert_eq!(r.steps, 4);
    }

    #[test]
    fn flops_match_prediction_without_delays() {
        let mut entries: Vec<(usize, usize, f64)> = (0..8).map(|i| (i, i, 10.0)).collect();
        entries.extend((1..8).map(|i| (i, i - 1, 1.0)));
        entries.push((7, 0, 1.0));
        let a = SymSparseMatrix::from_triplets(8, entries).unwrap();
        let order = min_degree_order(&a);
        let sf = analyse(&a, &order).unwrap();
        let f = factorize(&a, &sf, &FactorOptions::default(), None).unwrap();
        assert_eq!(f.num_delayed(), 0);
        assert_eq!(f.flops(), sf.predicted_flops());
        assert_eq!(f.nnz(), sf.predicted_nnz());
        let json = serde_json::to_string(&f.stats()).unwrap();
        assert!(json.contains("\"num_delayed\":0"));
    }
}

use crate::error::{Error, Result};
use crate::sparsemat::{ScalingVector, SymSparseMatrix};

/// Row norm driving the equilibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormChoice {
    Infinity,
    One,
}

/// Stop once every scaled row norm is within this distance of one.
pub const EQUILIBRATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct EquilibrationReport {
    pub scaling: ScalingVector,
    pub iterations: usize,
    pub converged: bool,
    /// `max_i | ||row_i||_p - 1 |` of the returned scaled matrix.
    pub max_deviation: f64,
}

/// Row `p`-norms of `S A S`, computed from the stored triangle.
pub fn row_norms(a: &SymSparseMatrix, s: &[f64], p: NormChoice) -> Vec<f64> {
    row_norm_parts(a, s, p).into_iter().map(|(m, rel)| m * rel).collect()
}

/// Each row norm as `(row max, norm / row max)`. One-norm sums are kept
/// relative to the row maximum so rows of many huge entries cannot overflow.
fn row_norm_parts(a: &SymSparseMatrix, s: &[f64], p: NormChoice) -> Vec<(f64, f64)> {
    let n = a.n();
    let mut maxes = vec![0.0f64; n];
    for (i, j, v) in a.iter() {
        let x = (s[i] * v * s[j]).abs();
        maxes[i] = maxes[i].max(x);
        maxes[j] = maxes[j].max(x);
    }
    let mut rel = vec![1.0f64; n];
    if p == NormChoice::One {
        rel.fill(0.0);
        for (i, j, v) in a.iter() {
            let x = (s[i] * v * s[j]).abs();
            if maxes[i] > 0.0 {
                rel[i] += x / maxes[i];
            }
            if i != j && maxes[j] > 0.0 {
                rel[j] += x / maxes[j];
            }
        }
    }
    maxes.into_iter().zip(rel).collect()
}

fn max_deviation(norms: &[f64]) -> f64 {
    norms.iter().fold(0.0, |m, x| m.max((x - 1.0).abs()))
}

/// Runs up to `steps` symmetric Ruiz updates `s_i <- s_i / sqrt(||row_i||_p)`
/// in place. With `stop = Some(tol)` the loop exits as soon as every row norm
/// is within `tol` of one. Returns the number of updates performed.
fn ruiz_steps(a: &SymSparseMatrix, s: &mut [f64], p: NormChoice, steps: usize, stop: Option<f64>) -> Result<usize> {
    for step in 0..steps {
        let parts = row_norm_parts(a, s, p);
        if let Some(k) = parts.iter().position(|&(m, _)| m == 0.0) {
            return Err(Error::ZeroRow(k));
        }
        if let Some(tol) = stop {
            let dev = parts.iter().fold(0.0f64, |d, &(m, rel)| d.max((m * rel - 1.0).abs()));
            if dev <= tol {
                return Ok(step);
            }
        }
        for (si, &(m, rel)) in s.iter_mut().zip(&parts) {
            *si /= m.sqrt() * rel.sqrt();
        }
    }
    Ok(steps)
}

/// Shrinks `s_i` on every row whose computed maximum exceeds one, so the
/// rounded scaled entries never exceed one.
fn cap_at_one(a: &SymSparseMatrix, s: &mut [f64]) {
    for pass in 0..64 {
        let maxes = row_norms(a, s, NormChoice::Infinity);
        let mut changed = false;
        for (si, &m) in s.iter_mut().zip(&maxes) {
            if m > 1.0 {
                *si = if pass == 0 { *si / m } else { *si * (1.0 - f64::EPSILON) };
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

pub fn equilibrate_with_report(a: &SymSparseMatrix, p: NormChoice, iters: usize) -> Result<EquilibrationReport> {
    if iters == 0 {
        return Err(Error::InvalidArgument("equilibration needs at least one iteration".into()));
    }
    let mut s = vec![1.0; a.n()];
    let iterations = match p {
        NormChoice::One => ruiz_steps(a, &mut s, p, iters, Some(EQUILIBRATION_TOL))?,
        NormChoice::Infinity => {
            // Converge with some slack so the final capping pass, which can
            // only shrink entries, keeps every row within tolerance.
            let k = ruiz_steps(a, &mut s, p, iters, Some(EQUILIBRATION_TOL / 4.0))?;
            cap_at_one(a, &mut s);
            k
        }
    };
    let norms = row_norms(a, &s, p);
    if let Some(k) = norms.iter().position(|&x| x == 0.0) {
        return Err(Error::ZeroRow(k));
    }
    let max_deviation = max_deviation(&norms);
    Ok(EquilibrationReport {
        scaling: ScalingVector::new(s)?,
        iterations,
        converged: max_deviation <= EQUILIBRATION_TOL,
        max_deviation,
    })
}

/// Symmetric equilibration in the chosen norm, at most `iters` updates.
pub fn equilibrate(a: &SymSparseMatrix, p: NormChoice, iters: usize) -> Result<ScalingVector> {
    equilibrate_with_report(a, p, iters).map(|r| r.scaling)
}

/// One infinity-norm update followed by three one-norm updates on the
/// intermediate matrix; the result is the product of both stages.
pub fn combined_equilibrate(a: &SymSparseMatrix) -> Result<ScalingVector> {
    let mut s = vec![1.0; a.n()];
    ruiz_steps(a, &mut s, NormChoice::Infinity, 1, None)?;
    ruiz_steps(a, &mut s, NormChoice::One, 3, None)?;
    ScalingVector::new(s)
}

//! Symmetric sparse storage and the diagonal-scaling algebra shared by every
//! other module.
//!
//! A [`SymSparseMatrix`] keeps only the lower triangle (diagonal included) in
//! compressed-column form with 0-based indices. Products and norms always act
//! on the full symmetric matrix the triangle represents.

mod market;

pub use market::{load_matrix_market, read_matrix_market, save_matrix_market, write_matrix_market};

use crate::error::{Error, Result};

/// Symmetric sparse matrix stored as its lower triangle, column by column.
///
/// Within a column, row indices are strictly increasing. Explicit zeros are
/// kept: they are part of the sparsity pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SymSparseMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymSparseMatrix {
    /// Builds a matrix from coordinate entries.
    ///
    /// An entry given in the upper triangle (`i < j`) is taken as its mirror
    /// `(j, i)`. Duplicate coordinates are summed.
    pub fn from_triplets<I>(n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut coords: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { row: i, col: j, n });
            }
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { row: i, col: j });
            }
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            coords.push((r, c, v));
        }
        coords.sort_by_key(|&(r, c, _)| (c, r));

        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(coords.len());
        let mut values: Vec<f64> = Vec::with_capacity(coords.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in coords {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_idx.push(r);
            values.push(v);
            col_ptr[c + 1] += 1;
        }
        for j in 0..n {
            col_ptr[j + 1] += col_ptr[j];
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let col = col_ptr.partition_point(|&p| p <= k) - 1;
            return Err(Error::NonFiniteEntry { row: row_idx[k], col });
        }
        Ok(Self { n, col_ptr, row_idx, values })
    }

    /// Lower triangle of a dense row-major `n x n` array. Off-diagonal zeros
    /// are dropped; the diagonal is stored only where nonzero.
    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: dense.len() });
        }
        let entries = (0..n).flat_map(|j| (j..n).map(move |i| (i, j))).filter_map(|(i, j)| {
            let v = dense[i * n + j];
            (v != 0.0).then_some((i, j, v))
        });
        Self::from_triplets(n, entries)
    }

    pub fn identity(n: usize) -> Self {
        Self { n, col_ptr: (0..=n).collect(), row_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    /// Order of the matrix.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored lower-triangle entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of lower-triangle column `j`.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    /// Iterates `(row, col, value)` over the stored lower triangle in
    /// column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1]).map(move |p| (self.row_idx[p], j, self.values[p]))
        })
    }

    /// Value at `(i, j)` of the full symmetric matrix (0 when not stored).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let (rows, vals) = self.column(c);
        rows.binary_search(&r).map(|p| vals[p]).unwrap_or(0.0)
    }

    /// Diagonal entries, 0 where absent.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| {
                let (rows, vals) = self.column(j);
                match rows.first() {
                    Some(&r) if r == j => vals[0],
                    _ => 0.0,
                }
            })
            .collect()
    }

    /// Full symmetric matrix as a dense row-major array.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for (i, j, v) in self.iter() {
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
        out
    }

    /// Adjacency lists of the full symmetric pattern, diagonal excluded.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, j, _) in self.iter() {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.n == other.n && self.col_ptr == other.col_ptr && self.row_idx == other.row_idx
    }

    /// Copy with every stored value mapped through `f(row, col, value)`.
    pub fn map_values<F>(&self, mut f: F) -> Self
    where
        F: FnMut(usize, usize, f64) -> f64,
    {
        let mut out = self.clone();
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                out.values[p] = f(self.row_idx[p], j, self.values[p]);
            }
        }
        out
    }

    /// Full symmetric product `A x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.n, x.len())?;
        check_len(self.n, y.len())?;
        y.fill(0.0);
        for (i, j, v) in self.iter() {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
        Ok(())
    }

    /// Absolute row sums of the full matrix.
    pub fn row_abs_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for (i, j, v) in self.iter() {
            sums[i] += v.abs();
            if i != j {
                sums[j] += v.abs();
            }
        }
        sums
    }

    /// Infinity norm (maximum absolute row sum) of the full matrix.
    pub fn norm_inf(&self) -> f64 {
        self.row_abs_sums().into_iter().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `S A S`: entry `(i, j)` becomes `s_i a_ij s_j`; the pattern is kept.
    pub fn scaled(&self, s: &ScalingVector) -> Result<Self> {
        check_len(self.n, s.len())?;
        let s = s.as_slice();
        Ok(self.map_values(|i, j, v| s[i] * v * s[j]))
    }
}

/// `S A S` for a symmetric diagonal scaling `S`.
pub fn apply_symmetric_scaling(a: &SymSparseMatrix, s: &ScalingVector) -> Result<SymSparseMatrix> {
    a.scaled(s)
}

/// Largest `|ln s_i|` a [`ScalingVector`] built from exponents may carry.
pub const MAX_LOG_SCALE: f64 = 700.0;

/// Diagonal of a symmetric scaling matrix; every entry strictly positive and
/// finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingVector(Vec<f64>);

impl ScalingVector {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = s.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidScaling { index, value });
        }
        Ok(Self(s))
    }

    /// Builds `exp(e_i)` from log-domain exponents. Exponents are clamped to
    /// `[-MAX_LOG_SCALE, MAX_LOG_SCALE]`: an optimal scaling of a matrix with
    /// entries near the ends of the floating point range may itself lie
    /// outside it.
    pub fn from_exponents(e: &[f64]) -> Result<Self> {
        Self::new(e.iter().map(|x| x.clamp(-MAX_LOG_SCALE, MAX_LOG_SCALE).exp()).collect())
    }

    pub fn identity(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.iter().map(|s| 1.0 / s).collect())
    }

    /// Elementwise product, i.e. the scaling `S_self S_other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_len(self.len(), other.len())?;
        Self::new(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }

    /// `b_hat = S b`.
    pub fn scale_rhs(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.apply(b)
    }

    /// `y = S z`, recovering the solution of `A y = b` from `(SAS) z = Sb`.
    pub fn unscale_solution(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.apply(z)
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), v.len())?;
        Ok(self.0.iter().zip(v).map(|(s, x)| s * x).collect())
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two_ones() -> SymSparseMatrix {
        SymSparseMatrix::from_triplets(2, [(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap()
    }

    #[test]
    fn duplicates_are_summed_and_upper_entries_mirrored() {
        let a = SymSparseMatrix::from_triplets(2, [(0, 1, 1.0), (1, 0, 2.0), (1, 1, 4.0)]).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(1, 0), 3.0);
        assert_eq!(a.get(0, 1), 3.0);
    }

    #[test]
    fn rejects_out_of_range_and_non_finite() {
        assert!(matches!(SymSparseMatrix::from_triplets(2, [(2, 0, 1.0)]), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(SymSparseMatrix::from_triplets(2, [(1, 0, f64::NAN)]), Err(Error::NonFiniteEntry { .. })));
    }

    #[test]
    fn explicit_zeros_stay_in_pattern() {
        let a = SymSparseMatrix::from_triplets(2, [(1, 0, 0.0)]).unwrap();
        assert_eq!(a.nnz(), 1);
    }

    #[test]
    fn identity_scaling_is_exact() {
        let a = two_by_two_ones();
        assert_eq!(a.scaled(&ScalingVector::identity(2)).unwrap(), a);
    }

    #[test]
    fn scaling_example() {
        let s = ScalingVector::new(vec![2.0, 1.0]).unwrap();
        let b = apply_symmetric_scaling(&two_by_two_ones(), &s).unwrap();
        assert_eq!(b.to_dense(), vec![4.0, 2.0, 2.0, 1.0]);
    }

    #[test]
    fn scaling_round_trip() {
        let a = SymSparseMatrix::from_dense(3, &[3.0, -1.5, 0.0, -1.5, 7.25, 2.0, 0.0, 2.0, 1e-3]).unwrap();
        let s = ScalingVector::new(vec![0.3, 17.0, 1e-4]).unwrap();
        let back = a.scaled(&s).unwrap().scaled(&s.inverse()).unwrap();
        for (x, y) in a.values().iter().zip(back.values()) {
            assert!((x - y).abs() <= 1e-15 * x.abs());
        }
    }

    #[test]
    fn scaling_dimension_mismatch() {
        let err = two_by_two_ones().scaled(&ScalingVector::identity(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 3 }));
    }

    #[test]
    fn matvec_examples() {
        let id = SymSparseMatrix::identity(3);
        assert_eq!(id.matvec(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);

        let off = SymSparseMatrix::from_triplets(2, [(1, 0, 1.0)]).unwrap();
        assert_eq!(off.matvec(&[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);

        let a = SymSparseMatrix::from_dense(2, &[4.0, 2.0, 2.0, 1.0]).unwrap();
        assert_eq!(a.matvec(&[1.0, 1.0]).unwrap(), vec![6.0, 3.0]);

        assert!(a.matvec(&[1.0]).is_err());
    }

    #[test]
    fn rhs_scaling_examples() {
        let s = ScalingVector::identity(2);
        assert_eq!(s.scale_rhs(&[1.0, 5.0]).unwrap(), vec![1.0, 5.0]);
        let s = ScalingVector::new(vec![2.0, 3.0]).unwrap();
        assert_eq!(s.scale_rhs(&[1.0, 1.0]).unwrap(), vec![2.0, 3.0]);
        assert_eq!(s.unscale_solution(&[1.0, 1.0]).unwrap(), vec![2.0, 3.0]);
        assert!(s.scale_rhs(&[1.0]).is_err());
    }

    #[test]
    fn scaling_vector_rejects_nonpositive() {
        assert!(ScalingVector::new(vec![1.0, 0.0]).is_err());
        assert!(ScalingVector::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(ScalingVector::new(vec![-1.0]).is_err());
    }

    #[test]
    fn norms() {
        let a = SymSparseMatrix::from_dense(2, &[4.0, -2.0, -2.0, 1.0]).unwrap();
        assert_eq!(a.row_abs_sums(), vec![6.0, 3.0]);
        assert_eq!(a.norm_inf(), 6.0);
        assert_eq!(a.max_abs(), 4.0);
        assert_eq!(a.diagonal(), vec![4.0, 1.0]);
    }
}

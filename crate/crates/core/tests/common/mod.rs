//! Dense reference implementations and random test matrices shared by the
//! integration tests and the acceptance runner.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symscale::ldlt::Inertia;
use symscale::sparsemat::SymSparseMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dense(a: &SymSparseMatrix) -> DMatrix<f64> {
    let n = a.n();
    DMatrix::from_row_slice(n, n, &a.to_dense())
}

pub fn from_dense(m: &DMatrix<f64>) -> SymSparseMatrix {
    let n = m.nrows();
    let rows: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect();
    SymSparseMatrix::from_dense(n, &rows).unwrap()
}

/// Eigenvalue-sign counts; eigenvalues within `1e-10 * max|lambda|` of zero
/// count as zero.
pub fn eigen_inertia(a: &SymSparseMatrix) -> Inertia {
    let ev = SymmetricEigen::new(dense(a)).eigenvalues;
    let scale = ev.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-10 * scale;
    let mut inertia = Inertia::new(0, 0, 0);
    for &l in ev.iter() {
        if l > tol {
            inertia.positive += 1;
        } else if l < -tol {
            inertia.negative += 1;
        } else {
            inertia.zero += 1;
        }
    }
    inertia
}

/// `min |lambda| / max |lambda|`.
pub fn eigen_gap(a: &SymSparseMatrix) -> f64 {
    let ev = SymmetricEigen::new(dense(a)).eigenvalues;
    let hi = ev.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let lo = ev.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

pub fn dense_solve(a: &SymSparseMatrix, b: &[f64]) -> Vec<f64> {
    let x = dense(a).lu().solve(&DVector::from_column_slice(b)).expect("oracle matrix is nonsingular");
    x.iter().copied().collect()
}

/// Symmetric matrix with a random pattern of the given density, a nonzero
/// diagonal optional, and magnitudes `10^U(-spread, spread)` with random signs.
pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, density: f64, spread: f64, diagonal: bool) -> SymSparseMatrix {
    let mut entries = Vec::new();
    let value = |rng: &mut ChaCha8Rng| {
        let mag = 10f64.powf(rng.gen_range(-spread..=spread));
        if rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    };
    for j in 0..n {
        if diagonal {
            entries.push((j, j, value(rng)));
        }
        for i in j + 1..n {
            if rng.gen_bool(density) {
                entries.push((i, j, value(rng)));
            }
        }
    }
    // A random permutation in the pattern guarantees a perfect matching.
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    for (i, &j) in perm.iter().enumerate() {
        if i != j && !entries.iter().any(|&(r, c, _)| (r, c) == (i.max(j), i.min(j))) {
            entries.push((i.max(j), i.min(j), value(rng)));
        } else if i == j && !diagonal {
            entries.push((i, i, value(rng)));
        }
    }
    SymSparseMatrix::from_triplets(n, entries).unwrap()
}

/// Random symmetric matrix whose eigenvalues are bounded away from zero.
pub fn random_nonsingular(rng: &mut ChaCha8Rng, n: usize, density: f64, spread: f64) -> SymSparseMatrix {
    loop {
        let a = random_mixed(rng, n, density, spread);
        if eigen_gap(&a) > 1e-13 {
            return a;
        }
    }
}

/// Indefinite test matrix with well-separated eigenvalues of both signs:
/// `Q diag(lambda) Q^T` restricted to a random sparsity-free dense form.
pub fn random_indefinite(rng: &mut ChaCha8Rng, n: usize) -> SymSparseMatrix {
    loop {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                if i == j || rng.gen_bool(0.4) {
                    let v = rng.gen_range(-1.0..1.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        // Occasionally zero a block of diagonal entries to force 2x2 pivots.
        if rng.gen_bool(0.5) {
            for k in 0..n / 3 {
                m[(k, k)] = 0.0;
            }
        }
        let a = from_dense(&m);
        let ev = SymmetricEigen::new(m).eigenvalues;
        let pos = ev.iter().any(|&l| l > 0.0);
        let neg = ev.iter().any(|&l| l < 0.0);
        if eigen_gap(&a) > 1e-6 && (n == 1 || (pos && neg)) {
            return a;
        }
    }
}

/// Strictly diagonally dominant symmetric matrix with diagonal signs mixed.
pub fn random_diag_dominant(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SymSparseMatrix {
    let mut off = vec![Vec::new(); n];
    let mut entries = Vec::new();
    for j in 0..n {
        for i in j + 1..n {
            if rng.gen_bool(density) {
                let v = rng.gen_range(-1.0..1.0);
                entries.push((i, j, v));
                off[i].push(v);
                off[j].push(v);
            }
        }
    }
    for (k, row) in off.iter().enumerate() {
        let s: f64 = row.iter().map(|v: &f64| v.abs()).sum();
        let d = s + rng.gen_range(0.5..2.0);
        entries.push((k, k, if rng.gen_bool(0.5) { d } else { -d }));
    }
    SymSparseMatrix::from_triplets(n, entries).unwrap()
}

/// Maximum over all permutations of `sum_i ln|a_{i, sigma(i)}|` on the full
/// symmetric matrix, `None` if every permutation hits a zero.
pub fn brute_force_log_product(a: &SymSparseMatrix) -> Option<f64> {
    let n = a.n();
    let d = a.to_dense();
    let mut best: Option<f64> = None;
    let mut perm: Vec<usize> = (0..n).collect();
    permute(&mut perm, 0, &mut |p| {
        if p.iter().enumerate().all(|(i, &j)| d[i * n + j] != 0.0) {
            let v: f64 = p.iter().enumerate().map(|(i, &j)| d[i * n + j].abs().ln()).sum();
            if best.is_none_or(|b| v > b) {
                best = Some(v);
            }
        }
    });
    best
}

/// Maximum over all permutations of `prod_i |a_{i, sigma(i)}|`, exact when
/// every entry is a power of two.
pub fn brute_force_product(a: &SymSparseMatrix) -> f64 {
    let n = a.n();
    let d = a.to_dense();
    let mut best = 0.0f64;
    let mut perm: Vec<usize> = (0..n).collect();
    permute(&mut perm, 0, &mut |p| {
        let v = p.iter().enumerate().map(|(i, &j)| d[i * n + j].abs()).product::<f64>();
        best = best.max(v);
    });
    best
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// Minimum of `sum over nonzero a_ij (full matrix) of (ln|a_ij| + e_i + e_j)^2`
/// by a dense least-squares solve.
pub fn curtis_reid_oracle(a: &SymSparseMatrix) -> f64 {
    let n = a.n();
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    for (i, j, v) in a.iter() {
        if v != 0.0 {
            rows.push((i, j, v.abs().ln()));
            if i != j {
                rows.push((j, i, v.abs().ln()));
            }
        }
    }
    let mut m = DMatrix::<f64>::zeros(rows.len(), n);
    let mut rhs = DVector::<f64>::zeros(rows.len());
    for (r, &(i, j, l)) in rows.iter().enumerate() {
        m[(r, i)] += 1.0;
        m[(r, j)] += 1.0;
        rhs[r] = -l;
    }
    let e = m.clone().svd(true, true).solve(&rhs, 1e-12).expect("svd solve");
    let res = m * e - rhs;
    res.norm_squared()
}

/// Dense staged equilibration: one infinity-norm step, then three one-norm
/// steps, each applied to the matrix produced by the previous one.
pub fn staged_equilibration_oracle(a: &SymSparseMatrix) -> Vec<f64> {
    let mut b = dense(a);
    let n = b.nrows();
    let mut s = vec![1.0; n];
    let step = |b: &mut DMatrix<f64>, s: &mut Vec<f64>, one: bool| {
        let d: Vec<f64> = (0..n)
            .map(|i| {
                let row = b.row(i);
                let norm = if one { row.iter().map(|v| v.abs()).sum::<f64>() } else { row.amax() };
                1.0 / norm.sqrt()
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] *= d[i] * d[j];
            }
            s[i] *= d[i];
        }
    };
    step(&mut b, &mut s, false);
    for _ in 0..3 {
        step(&mut b, &mut s, true);
    }
    s
}

/// Nonzero count of the Cholesky-style factor of `P A P^T` computed by
/// eliminating the dense boolean pattern.
pub fn dense_symbolic_nnz(a: &SymSparseMatrix, order: &[usize]) -> usize {
    let n = a.n();
    let mut pos = vec![0; n];
    for (k, &i) in order.iter().enumerate() {
        pos[i] = k;
    }
    let mut pat = vec![vec![false; n]; n];
    for (i, j, _) in a.iter() {
        let (p, q) = (pos[i], pos[j]);
        pat[p][q] = true;
        pat[q][p] = true;
    }
    let mut nnz = n;
    for k in 0..n {
        let below: Vec<usize> = (k + 1..n).filter(|&i| pat[i][k]).collect();
        nnz += below.len();
        for &i in &below {
            for &j in &below {
                pat[i][j] = true;
            }
        }
    }
    nnz
}

pub fn backward_error(a: &SymSparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x).unwrap();
    let r = ax.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    let xn = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bn = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    r / (a.norm_inf() * xn + bn)
}

/// `sum_i ln|a_{i, sigma(i)}|` summed in the same order as
/// [`brute_force_log_product`], so equal permutations give equal bits.
pub fn log_product_of(a: &SymSparseMatrix, sigma: &[usize]) -> f64 {
    let n = a.n();
    let d = a.to_dense();
    sigma.iter().enumerate().map(|(i, &j)| d[i * n + j].abs().ln()).sum()
}

/// Random symmetric matrix whose entries are signed powers of two.
pub fn random_power_of_two(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SymSparseMatrix {
    let a = random_mixed(rng, n, density, 1.0);
    a.map_values(|_, _, _| {
        let v = 2f64.powi(rng.gen_range(-20..=20));
        if rng.gen_bool(0.5) {
            v
        } else {
            -v
        }
    })
}

/// [`random_symmetric`] with the diagonal present or absent at random.
pub fn random_mixed(rng: &mut ChaCha8Rng, n: usize, density: f64, spread: f64) -> SymSparseMatrix {
    let diagonal = rng.gen_bool(0.5);
    random_symmetric(rng, n, density, spread, diagonal)
}

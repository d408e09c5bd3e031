mod common;

use proptest::prelude::*;
use symscale::sparsemat::{
    load_matrix_market, read_matrix_market, save_matrix_market, write_matrix_market, ScalingVector, SymSparseMatrix,
};

use common::*;

proptest! {
    #[test]
    fn matvec_matches_dense(seed in any::<u64>(), n in 1usize..25) {
        let mut r = rng(seed);
        let a = random_mixed(&mut r, n, 0.3, 3.0);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let got = a.matvec(&x).unwrap();
        let want = dense(&a) * nalgebra::DVector::from_column_slice(&x);
        for i in 0..n {
            prop_assert!((got[i] - want[i]).abs() <= 1e-12 * (1.0 + want[i].abs()));
        }
    }

    #[test]
    fn matrix_market_round_trip(seed in any::<u64>(), n in 1usize..30) {
        let mut r = rng(seed);
        let a = random_mixed(&mut r, n, 0.2, 8.0);
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let b = read_matrix_market(&buf[..]).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn scaling_is_entrywise(seed in any::<u64>(), n in 1usize..20) {
        let mut r = rng(seed);
        let a = random_mixed(&mut r, n, 0.4, 2.0);
        let s: Vec<f64> = (0..n).map(|i| 0.5 + i as f64).collect();
        let b = a.scaled(&ScalingVector::new(s.clone()).unwrap()).unwrap();
        prop_assert!(a.same_pattern(&b));
        for (i, j, v) in a.iter() {
            prop_assert_eq!(b.get(i, j), s[i] * v * s[j]);
        }
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.mtx");
    let a = SymSparseMatrix::from_triplets(3, [(0, 0, 4.0), (2, 0, -1.5), (1, 1, 1e-300), (2, 2, 2.0)]).unwrap();
    save_matrix_market(&a, &path).unwrap();
    assert_eq!(load_matrix_market(&path).unwrap(), a);
}

#[test]
fn general_file_keeps_lower_triangle() {
    let text = "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.0\n2 1 3.0\n1 2 3.0\n";
    let a = read_matrix_market(text.as_bytes()).unwrap();
    assert_eq!(a.to_dense(), vec![1.0, 3.0, 3.0, 0.0]);
    let bad = "%%MatrixMarket matrix coordinate real general\n2 2 2\n2 1 3.0\n1 2 4.0\n";
    assert!(read_matrix_market(bad.as_bytes()).is_err());
}

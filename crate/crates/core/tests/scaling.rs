mod common;

use proptest::prelude::*;
use symscale::scaling::{
    combined_equilibrate, curtis_reid, curtis_reid_objective, equilibrate, max_product_matching, row_norms,
    symmetrize_matching_scaling, CurtisReidOptions, CurtisReidVariant, NormChoice,
};
use symscale::sparsemat::SymSparseMatrix;

use common::*;

fn sym_opts() -> CurtisReidOptions {
    CurtisReidOptions { variant: CurtisReidVariant::Symmetric, tol: 1e-12, max_iter: 500 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn curtis_reid_history_is_monotone(seed in any::<u64>(), n in 1usize..20) {
        let mut r = rng(seed);
        let a = random_mixed(&mut r, n, 0.3, 6.0);
        let rep = curtis_reid(&a, &sym_opts()).unwrap();
        for w in rep.objective_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
        }
        prop_assert!(rep.objective <= rep.initial_objective);
        let direct = curtis_reid_objective(&a, &rep.exponents);
        prop_assert!((direct - rep.objective).abs() <= 1e-9 * (1.0 + direct));
    }

    #[test]
    fn curtis_reid_matches_least_squares(seed in any::<u64>(), n in 1usize..12) {
        let mut r = rng(seed);
        let a = random_mixed(&mut r, n, 0.4, 8.0);
        let rep = curtis_reid(&a, &sym_opts()).unwrap();
        prop_assert!((rep.objective - curtis_reid_oracle(&a)).abs() <= 1e-6);
    }

    #[test]
    fn curtis_reid_ignores_a_global_constant(seed in any::<u64>(), n in 1usize..15, k in -20i32..20) {
        let mut r = rng(seed);
        let a = random_mixed(&mut r, n, 0.3, 4.0);
        let c = 2f64.powi(k);
        let b = a.map_values(|_, _, v| v * c);
        let sa = a.scaled(&curtis_reid(&a, &sym_opts()).unwrap().scaling).unwrap();
        let sb = b.scaled(&curtis_reid(&b, &sym_opts()).unwrap().scaling).unwrap();
        for ((_, _, x), (_, _, y)) in sa.iter().zip(sb.iter()) {
            prop_assert!((x - y).abs() <= 1e-8 * x.abs());
        }
    }

    #[test]
    fn scalings_stay_positive_at_extreme_magnitudes(seed in any::<u64>(), n in 1usize..12) {
        let mut r = rng(seed);
        let a = random_mixed(&mut r, n, 0.4, 300.0);
        let checks = [
            curtis_reid(&a, &sym_opts()).unwrap().scaling,
            curtis_reid(&a, &CurtisReidOptions { variant: CurtisReidVariant::UnsymmetricAveraged, ..sym_opts() }).unwrap().scaling,
            symmetrize_matching_scaling(&max_product_matching(&a).unwrap()),
            combined_equilibrate(&a).unwrap(),
            equilibrate(&a, NormChoice::Infinity, 50).unwrap(),
        ];
        for s in &checks {
            prop_assert!(s.as_slice().iter().all(|x| x.is_finite() && *x > 0.0));
        }
    }

    #[test]
    fn matching_bounds_hold(seed in any::<u64>(), n in 1usize..40) {
        let mut r = rng(seed);
        let a = random_mixed(&mut r, n, 0.2, 8.0);
        let m = max_product_matching(&a).unwrap();
        let rs = m.row_scaling();
        let cs = m.col_scaling();
        for (i, j, v) in a.iter() {
            prop_assert!(rs[i] * v.abs() * cs[j] <= 1.0 + 1e-10);
            prop_assert!(rs[j] * v.abs() * cs[i] <= 1.0 + 1e-10);
        }
        for (i, &j) in m.sigma().iter().enumerate() {
            prop_assert!((rs[i] * a.get(i, j).abs() * cs[j] - 1.0).abs() <= 1e-10);
        }
        let b = a.scaled(&symmetrize_matching_scaling(&m)).unwrap();
        prop_assert!(b.max_abs() <= 1.0 + 1e-10);
    }

    #[test]
    fn equilibrated_rows_are_at_most_one(seed in any::<u64>(), n in 1usize..30) {
        let mut r = rng(seed);
        let a = random_mixed(&mut r, n, 0.3, 8.0);
        let s = equilibrate(&a, NormChoice::Infinity, 50).unwrap();
        for x in row_norms(&a, s.as_slice(), NormChoice::Infinity) {
            prop_assert!((1.0 - 1e-8..=1.0).contains(&x));
        }
    }

    #[test]
    fn combined_schedule_matches_staged_oracle(seed in any::<u64>(), n in 1usize..25) {
        let mut r = rng(seed);
        let a = random_mixed(&mut r, n, 0.3, 8.0);
        let s = combined_equilibrate(&a).unwrap();
        for (x, o) in s.as_slice().iter().zip(staged_equilibration_oracle(&a)) {
            prop_assert!((x - o).abs() <= 1e-12 * o);
        }
    }
}

#[test]
fn matching_is_optimal_on_small_matrices() {
    let mut r = rng(11);
    for _ in 0..60 {
        let n = 1 + (r.next_u32_helper() % 7) as usize;
        let a = random_mixed(&mut r, n, 0.5, 8.0);
        let m = max_product_matching(&a).unwrap();
        let best = brute_force_log_product(&a).unwrap();
        assert!((log_product_of(&a, m.sigma()) - best).abs() <= 1e-12 * (1.0 + best.abs()));
    }
}

#[test]
fn power_of_two_products_are_exact() {
    let mut r = rng(12);
    for _ in 0..60 {
        let n = 1 + (r.next_u32_helper() % 7) as usize;
        let a = random_power_of_two(&mut r, n, 0.5);
        let m = max_product_matching(&a).unwrap();
        let got: f64 = m.sigma().iter().enumerate().map(|(i, &j)| a.get(i, j).abs()).product();
        assert_eq!(got, brute_force_product(&a));
    }
}

#[test]
fn structurally_singular_matrix_is_rejected() {
    let a = SymSparseMatrix::from_triplets(3, [(0, 0, 1.0), (1, 0, 1.0), (2, 0, 1.0)]).unwrap();
    assert!(max_product_matching(&a).is_err());
}

trait NextU32 {
    fn next_u32_helper(&mut self) -> u32;
}

impl NextU32 for rand_chacha::ChaCha8Rng {
    fn next_u32_helper(&mut self) -> u32 {
        rand::RngCore::next_u32(self)
    }
}

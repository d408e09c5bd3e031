//! Problem interface and the shipped toy set.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `min f(x)` subject to `g(x) = 0` and `x_L <= x <= x_U`. Infinite bounds
/// mark free directions.
pub trait NlpProblem: Send + Sync {
    fn name(&self) -> &str;
    fn n(&self) -> usize;
    fn m(&self) -> usize;
    fn lower(&self) -> Vec<f64>;
    fn upper(&self) -> Vec<f64>;
    fn start(&self) -> Vec<f64>;
    fn objective(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn constraints(&self, x: &[f64]) -> Vec<f64>;
    /// Jacobian of `g` as `(row, col, value)`; the pattern must not depend
    /// on `x`.
    fn jacobian(&self, x: &[f64]) -> Vec<(usize, usize, f64)>;
    /// Lower triangle of `∇²f + Σ λ_i ∇²g_i`; the pattern must not depend on
    /// `x` or `lambda`.
    fn hessian(&self, x: &[f64], lambda: &[f64]) -> Vec<(usize, usize, f64)>;
}

/// `min 1/2 x^T H x + c^T x` subject to `A x = b` and bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpProblem {
    pub name: String,
    pub n: usize,
    /// Lower-triangle (or mirrored) entries of `H`, 0-based.
    #[serde(default)]
    pub hessian: Vec<(usize, usize, f64)>,
    /// Row-major dense `H`, an alternative to `hessian`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hessian_dense: Option<Vec<f64>>,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub jacobian: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub b: Vec<f64>,
    /// `null` means unbounded.
    #[serde(default)]
    pub lower: Vec<Option<f64>>,
    #[serde(default)]
    pub upper: Vec<Option<f64>>,
    #[serde(default)]
    pub x0: Vec<f64>,
}

impl QpProblem {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut p: Self = serde_json::from_str(text)?;
        p.normalize()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fills defaulted vectors, folds a dense Hessian into the lower
    /// triangle and validates the dimensions.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.n;
        if let Some(dense) = self.hessian_dense.take() {
            if dense.len() != n * n {
                return Err(Error::DimensionMismatch { expected: n * n, found: dense.len() });
            }
            for j in 0..n {
                for i in j..n {
                    let v = dense[i * n + j];
                    if v != 0.0 {
                        self.hessian.push((i, j, v));
                    }
                }
            }
        }
        self.hessian = self.hessian.iter().map(|&(i, j, v)| if i >= j { (i, j, v) } else { (j, i, v) }).collect();
        let fill = |v: &mut Vec<Option<f64>>| {
            if v.is_empty() {
                *v = vec![None; n];
            }
        };
        fill(&mut self.lower);
        fill(&mut self.upper);
        if self.c.is_empty() {
            self.c = vec![0.0; n];
        }
        if self.x0.is_empty() {
            self.x0 = vec![0.0; n];
        }
        for (name, len) in
            [("c", self.c.len()), ("lower", self.lower.len()), ("upper", self.upper.len()), ("x0", self.x0.len())]
        {
            if len != n {
                return Err(Error::InvalidArgument(format!("{name} has length {len}, expected {n}")));
            }
        }
        let m = self.b.len();
        for &(i, j, _) in &self.hessian {
            if i >= n {
                return Err(Error::IndexOutOfRange { row: i, col: j, n });
            }
        }
        for &(i, j, _) in &self.jacobian {
            if i >= m || j >= n {
                return Err(Error::IndexOutOfRange { row: i, col: j, n: m.max(n) });
            }
        }
        for k in 0..n {
            if let (Some(l), Some(u)) = (self.lower[k], self.upper[k]) {
                if l > u {
                    return Err(Error::InvalidArgument(format!("bounds of variable {k} are inverted")));
                }
            }
        }
        Ok(())
    }

    fn hx(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.hessian {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
        y
    }
}

impl NlpProblem for QpProblem {
    fn name(&self) -> &str {
        &self.name
    }
    fn n(&self) -> usize {
        self.n
    }
    fn m(&self) -> usize {
        self.b.len()
    }
    fn lower(&self) -> Vec<f64> {
        self.lower.iter().map(|l| l.unwrap_or(f64::NEG_INFINITY)).collect()
    }
    fn upper(&self) -> Vec<f64> {
        self.upper.iter().map(|u| u.unwrap_or(f64::INFINITY)).collect()
    }
    fn start(&self) -> Vec<f64> {
        self.x0.clone()
    }
    fn objective(&self, x: &[f64]) -> f64 {
        let hx = self.hx(x);
        x.iter().zip(&hx).zip(&self.c).map(|((xi, hi), ci)| 0.5 * xi * hi + ci * xi).sum()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.hx(x).iter().zip(&self.c).map(|(h, c)| h + c).collect()
    }
    fn constraints(&self, x: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = self.b.iter().map(|b| -b).collect();
        for &(i, j, v) in &self.jacobian {
            g[i] += v * x[j];
        }
        g
    }
    fn jacobian(&self, _x: &[f64]) -> Vec<(usize, usize, f64)> {
        self.jacobian.clone()
    }
    fn hessian(&self, _x: &[f64], _lambda: &[f64]) -> Vec<(usize, usize, f64)> {
        self.hessian.clone()
    }
}

/// `min x1 + x2` on the circle `x1^2 + x2^2 = 2`; optimum `(-1, -1)`.
#[derive(Debug, Clone)]
pub struct CircleProblem;

impl NlpProblem for CircleProblem {
    fn name(&self) -> &str {
        "circle"
    }
    fn n(&self) -> usize {
        2
    }
    fn m(&self) -> usize {
        1
    }
    fn lower(&self) -> Vec<f64> {
        vec![f64::NEG_INFINITY; 2]
    }
    fn upper(&self) -> Vec<f64> {
        vec![f64::INFINITY; 2]
    }
    fn start(&self) -> Vec<f64> {
        vec![-0.5, -1.5]
    }
    fn objective(&self, x: &[f64]) -> f64 {
        x[0] + x[1]
    }
    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        vec![1.0, 1.0]
    }
    fn constraints(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0] * x[0] + x[1] * x[1] - 2.0]
    }
    fn jacobian(&self, x: &[f64]) -> Vec<(usize, usize, f64)> {
        vec![(0, 0, 2.0 * x[0]), (0, 1, 2.0 * x[1])]
    }
    fn hessian(&self, _x: &[f64], lambda: &[f64]) -> Vec<(usize, usize, f64)> {
        vec![(0, 0, 2.0 * lambda[0]), (1, 1, 2.0 * lambda[0])]
    }
}

/// Two-dimensional Rosenbrock function on the box `[-1.5, 2]^2`; nonconvex
/// at the start, so the Hessian needs shifting early on.
#[derive(Debug, Clone)]
pub struct RosenbrockBox;

impl NlpProblem for RosenbrockBox {
    fn name(&self) -> &str {
        "rosenbrock_box"
    }
    fn n(&self) -> usize {
        2
    }
    fn m(&self) -> usize {
        0
    }
    fn lower(&self) -> Vec<f64> {
        vec![-1.5; 2]
    }
    fn upper(&self) -> Vec<f64> {
        vec![2.0; 2]
    }
    fn start(&self) -> Vec<f64> {
        vec![-1.2, 1.0]
    }
    fn objective(&self, x: &[f64]) -> f64 {
        100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let t = x[1] - x[0] * x[0];
        vec![-400.0 * x[0] * t - 2.0 * (1.0 - x[0]), 200.0 * t]
    }
    fn constraints(&self, _x: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    fn jacobian(&self, _x: &[f64]) -> Vec<(usize, usize, f64)> {
        Vec::new()
    }
    fn hessian(&self, x: &[f64], _lambda: &[f64]) -> Vec<(usize, usize, f64)> {
        vec![(0, 0, 1200.0 * x[0] * x[0] - 400.0 * x[1] + 2.0), (1, 0, -400.0 * x[0]), (1, 1, 200.0)]
    }
}

/// `sum exp(x_i) - 2 x_i` on `[0, 1]^n`; optimum `x_i = ln 2`.
#[derive(Debug, Clone)]
pub struct ExpBox {
    pub n: usize,
}

impl NlpProblem for ExpBox {
    fn name(&self) -> &str {
        "exp_box"
    }
    fn n(&self) -> usize {
        self.n
    }
    fn m(&self) -> usize {
        0
    }
    fn lower(&self) -> Vec<f64> {
        vec![0.0; self.n]
    }
    fn upper(&self) -> Vec<f64> {
        vec![1.0; self.n]
    }
    fn start(&self) -> Vec<f64> {
        vec![0.9; self.n]
    }
    fn objective(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v.exp() - 2.0 * v).sum()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v.exp() - 2.0).collect()
    }
    fn constraints(&self, _x: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    fn jacobian(&self, _x: &[f64]) -> Vec<(usize, usize, f64)> {
        Vec::new()
    }
    fn hessian(&self, x: &[f64], _lambda: &[f64]) -> Vec<(usize, usize, f64)> {
        x.iter().enumerate().map(|(i, v)| (i, i, v.exp())).collect()
    }
}

fn qp(name: &str, n: usize) -> QpProblem {
    QpProblem {
        name: name.to_string(),
        n,
        hessian: Vec::new(),
        hessian_dense: None,
        c: vec![0.0; n],
        jacobian: Vec::new(),
        b: Vec::new(),
        lower: vec![None; n],
        upper: vec![None; n],
        x0: vec![0.0; n],
    }
}

/// `min 1/2 x^2` subject to `x = 1`: `x* = 1`, `lambda* = -1`.
pub fn scalar_equality_qp() -> QpProblem {
    let mut p = qp("scalar_eq", 1);
    p.hessian = vec![(0, 0, 1.0)];
    p.jacobian = vec![(0, 0, 1.0)];
    p.b = vec![1.0];
    p
}

/// `min x` subject to `x >= 0`.
pub fn bound_linear() -> QpProblem {
    let mut p = qp("bound_linear", 1);
    p.c = vec![1.0];
    p.lower = vec![Some(0.0)];
    p.x0 = vec![1.0];
    p
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] = (0..n).map(|k| g[i * n + k] * g[j * n + k]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
        }
    }
    h
}

fn lower_triplets(h: &[f64], n: usize) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::new();
    for j in 0..n {
        for i in j..n {
            t.push((i, j, h[i * n + j]));
        }
    }
    t
}

/// Dense convex equality QP with a random SPD Hessian.
pub fn random_equality_qp(n: usize, m: usize, seed: u64) -> QpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = qp(&format!("eq_qp_{n}x{m}_{seed}"), n);
    p.hessian = lower_triplets(&random_spd(&mut rng, n), n);
    p.c = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for i in 0..m {
        for j in 0..n {
            p.jacobian.push((i, j, rng.gen_range(-1.0..1.0)));
        }
    }
    p.b = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    p
}

/// Projection of a point onto the unit box: `min 1/2 ||x - c||^2`.
pub fn box_projection(n: usize, seed: u64) -> QpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = qp(&format!("box_projection_{n}"), n);
    p.hessian = (0..n).map(|i| (i, i, 1.0)).collect();
    p.c = (0..n).map(|_| -rng.gen_range(-1.0..2.0)).collect();
    p.lower = vec![Some(0.0); n];
    p.upper = vec![Some(1.0); n];
    p.x0 = vec![0.5; n];
    p
}

/// Indefinite Hessian that is positive definite on the constraint null
/// space: `min x0^2 - x1^2 + x2^2` with `x1 - x0 = 1`, `x1 + x2 = 1`.
pub fn saddle_equality_qp() -> QpProblem {
    let mut p = qp("saddle_eq", 3);
    p.hessian = vec![(0, 0, 2.0), (1, 1, -2.0), (2, 2, 2.0)];
    p.jacobian = vec![(0, 0, -1.0), (0, 1, 1.0), (1, 1, 1.0), (1, 2, 1.0)];
    p.b = vec![1.0, 1.0];
    p
}

/// Tridiagonal convex QP on the simplex `{x >= 0, sum x = 1}`.
pub fn chain_simplex(n: usize) -> QpProblem {
    let mut p = qp(&format!("chain_simplex_{n}"), n);
    for i in 0..n {
        p.hessian.push((i, i, 2.0));
        if i + 1 < n {
            p.hessian.push((i + 1, i, -1.0));
        }
    }
    p.c = (0..n).map(|i| ((i as f64) * 0.7).sin()).collect();
    p.jacobian = (0..n).map(|j| (0, j, 1.0)).collect();
    p.b = vec![1.0];
    p.lower = vec![Some(0.0); n];
    p.x0 = vec![1.0 / n as f64; n];
    p
}

/// Equality and bound constraints together, random data.
pub fn mixed_qp(n: usize, m: usize, seed: u64) -> QpProblem {
    let mut p = random_equality_qp(n, m, seed);
    p.name = format!("mixed_qp_{n}x{m}_{seed}");
    p.lower = vec![Some(-1.0); n];
    p.upper = vec![Some(1.0); n];
    // Keep the constraints satisfiable inside the box.
    let x: Vec<f64> = (0..n).map(|j| 0.3 * ((j as f64) + 1.0).cos()).collect();
    p.b = vec![0.0; m];
    for &(i, j, v) in &p.jacobian {
        p.b[i] += v * x[j];
    }
    p
}

/// Small transportation problem with a quadratic regularization.
pub fn transport_qp() -> QpProblem {
    // 2 sources x 3 sinks; x[2*s + t] flow from source s to sink t.
    let (ns, nt) = (2, 3);
    let n = ns * nt;
    let mut p = qp("transport", n);
    p.hessian = (0..n).map(|i| (i, i, 0.1)).collect();
    p.c = vec![4.0, 6.0, 9.0, 5.0, 3.0, 7.0];
    let supply = [5.0, 7.0];
    let demand = [4.0, 5.0];
    for s in 0..ns {
        for t in 0..nt {
            p.jacobian.push((s, s * nt + t, 1.0));
        }
    }
    for t in 0..nt - 1 {
        for s in 0..ns {
            p.jacobian.push((ns + t, s * nt + t, 1.0));
        }
    }
    p.b = supply.iter().chain(&demand).copied().collect();
    p.lower = vec![Some(0.0); n];
    p.x0 = vec![1.0; n];
    p
}

/// Equality-constrained QP whose variables live on scales `d_j` spanning
/// `10^-4 .. 10^4`, so the KKT entries span roughly `10^-8 .. 10^8`.
pub fn ill_scaled_qp(n: usize, m: usize, seed: u64) -> QpProblem {
    let base = mixed_qp(n, m, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(7));
    let d: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(-4.0..4.0))).collect();
    // x = D y with y from the base problem: H' = D H D, c' = D c, A' = A D,
    // bounds divided by d.
    let mut p = base.clone();
    p.name = format!("ill_scaled_{n}x{m}_{seed}");
    p.hessian = base.hessian.iter().map(|&(i, j, v)| (i, j, d[i] * v * d[j])).collect();
    p.c = base.c.iter().zip(&d).map(|(c, di)| c * di).collect();
    p.jacobian = base.jacobian.iter().map(|&(i, j, v)| (i, j, v * d[j])).collect();
    p.lower = base.lower.iter().zip(&d).map(|(l, di)| l.map(|l| l / di)).collect();
    p.upper = base.upper.iter().zip(&d).map(|(u, di)| u.map(|u| u / di)).collect();
    p.x0 = base.x0.iter().zip(&d).map(|(x, di)| x / di).collect();
    p
}

/// The well-scaled toy problems.
pub fn toy_problems() -> Vec<Box<dyn NlpProblem>> {
    vec![
        Box::new(scalar_equality_qp()),
        Box::new(bound_linear()),
        Box::new(random_equality_qp(10, 3, 1)),
        Box::new(box_projection(8, 2)),
        Box::new(saddle_equality_qp()),
        Box::new(chain_simplex(30)),
        Box::new(mixed_qp(12, 4, 3)),
        Box::new(transport_qp()),
        Box::new(CircleProblem),
        Box::new(RosenbrockBox),
        Box::new(ExpBox { n: 5 }),
    ]
}

/// The badly scaled family.
pub fn ill_scaled_family(count: usize) -> Vec<Box<dyn NlpProblem>> {
    (0..count as u64).map(|s| Box::new(ill_scaled_qp(16, 5, 100 + s)) as Box<dyn NlpProblem>).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_dense_hessian() {
        let text = r#"{"name":"t","n":2,"hessian_dense":[2,1,1,3],"c":[1,0],
            "jacobian":[[0,0,1.0],[0,1,1.0]],"b":[1],"lower":[0,null],"upper":[null,null]}"#;
        let p = QpProblem::from_json(text).unwrap();
        assert_eq!(p.hessian, vec![(0, 0, 2.0), (1, 0, 1.0), (1, 1, 3.0)]);
        assert_eq!(p.lower(), vec![0.0, f64::NEG_INFINITY]);
        assert_eq!(p.m(), 1);
        let q = QpProblem::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(QpProblem::from_json(r#"{"name":"t","n":2,"c":[1]}"#).is_err());
        assert!(QpProblem::from_json(r#"{"name":"t","n":1,"lower":[2],"upper":[1]}"#).is_err());
        assert!(QpProblem::from_json(r#"{"name":"t","n":1,"jacobian":[[1,0,1.0]],"b":[0]}"#).is_err());
    }

    #[test]
    fn qp_derivatives() {
        let p = random_equality_qp(4, 2, 9);
        let x = [0.1, -0.2, 0.3, 0.4];
        let g = p.gradient(&x);
        let h = 1e-6;
        for k in 0..4 {
            let mut xp = x;
            xp[k] += h;
            let mut xm = x;
            xm[k] -= h;
            let fd = (p.objective(&xp) - p.objective(&xm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn ill_scaled_entries_are_wide() {
        let p = ill_scaled_qp(16, 5, 100);
        let mags = p.hessian.iter().chain(&p.jacobian).map(|e| e.2.abs()).filter(|v| *v > 0.0);
        let (lo, hi) = mags.fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(v), h.max(v)));
        assert!(hi / lo > 1e8, "{lo} {hi}");
    }
}

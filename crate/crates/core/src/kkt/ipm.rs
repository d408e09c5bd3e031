//! A primal-dual barrier Newton method.
//!
//! Bounds enter through the log barrier and explicit bound multipliers
//! `z_L`, `z_U`, giving the diagonal `Sigma = z_L/(x - l) + z_U/(u - x)`,
//! which equals `mu/(x - l)^2 + mu/(u - x)^2` on the central path. Each
//! iteration solves one augmented system, takes a fraction-to-boundary step
//! and backtracks on the `l1` merit function `phi_mu(x) + nu ||g(x)||_1`.
//! When the first trial point is rejected a second-order correction is tried
//! with the same factors. The barrier parameter follows the monotone rule
//! `mu <- max(mu_min, min(kappa mu, mu^theta))`.

use std::time::Instant;

use serde::Serialize;

use super::problems::NlpProblem;
use super::{inertia_correct, AugmentedSolver, InertiaOptions, KktParts, SolverOptions, SolverStats, SparseJacobian};
use crate::controller::{FactorEvent, Policy};
use crate::error::{Error, Result};
use crate::sparsemat::{norm_inf, SymSparseMatrix};

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    /// Bound on the optimality error.
    pub tol: f64,
    pub max_iter: usize,
    pub mu_init: f64,
    pub mu_min: f64,
    pub kappa_mu: f64,
    pub theta_mu: f64,
    pub kappa_eps: f64,
    pub second_order_correction: bool,
    pub deadline: Option<Instant>,
    pub solver: SolverOptions,
    pub inertia: InertiaOptions,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
            mu_init: 0.1,
            mu_min: 1e-7,
            kappa_mu: 0.2,
            theta_mu: 1.5,
            kappa_eps: 10.0,
            second_order_correction: true,
            deadline: None,
            solver: SolverOptions::default(),
            inertia: InertiaOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub mu: f64,
    pub residual: f64,
    pub alpha: f64,
    pub delta_w: f64,
    pub delta_c: f64,
    pub sigma_max: f64,
    pub factorizations: usize,
}

#[derive(Debug, Clone)]
pub struct IpmResult {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub objective: f64,
    pub trace: Vec<FactorEvent>,
    pub decision_log: String,
    pub records: Vec<IterationRecord>,
    pub stats: SolverStats,
}

/// Slack to a finite bound, `None` for an infinite one.
fn slack(x: f64, bound: f64, upper: bool) -> Option<f64> {
    bound.is_finite().then_some(if upper { bound - x } else { x - bound })
}

struct Eval<'a> {
    p: &'a dyn NlpProblem,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Eval<'_> {
    fn barrier(&self, x: &[f64], mu: f64) -> f64 {
        let mut b = 0.0;
        for (k, &xk) in x.iter().enumerate() {
            for s in [slack(xk, self.lo[k], false), slack(xk, self.hi[k], true)].into_iter().flatten() {
                if s <= 0.0 {
                    return f64::INFINITY;
                }
                b -= mu * s.ln();
            }
        }
        b
    }

    fn merit(&self, x: &[f64], mu: f64, nu: f64) -> f64 {
        let b = self.barrier(x, mu);
        let f = self.p.objective(x);
        if !(b.is_finite() && f.is_finite()) {
            return f64::INFINITY;
        }
        let g1: f64 = self.p.constraints(x).iter().map(|v| v.abs()).sum();
        f + b + nu * g1
    }

    /// Largest step in `(0, 1]` keeping every slack above `(1 - tau)` times
    /// its current value.
    fn max_step(&self, x: &[f64], dx: &[f64], tau: f64) -> f64 {
        let mut alpha = 1.0f64;
        for k in 0..x.len() {
            if self.lo[k].is_finite() && dx[k] < 0.0 {
                alpha = alpha.min(-tau * (x[k] - self.lo[k]) / dx[k]);
            }
            if self.hi[k].is_finite() && dx[k] > 0.0 {
                alpha = alpha.min(tau * (self.hi[k] - x[k]) / dx[k]);
            }
        }
        alpha
    }

    /// `(scaled dual infeasibility, primal infeasibility, scaled
    /// complementarity against mu)`.
    fn errors(&self, it: &Iterate, mu: f64) -> (f64, f64, f64) {
        let x = &it.x;
        let jac = SparseJacobian { m: it.lambda.len(), n: x.len(), entries: self.p.jacobian(x) };
        let jtl = jac.mul_t(&it.lambda);
        let grad = self.p.gradient(x);
        let r: Vec<f64> = (0..x.len()).map(|k| grad[k] + jtl[k] - it.zl[k] + it.zu[k]).collect();
        let count = (it.lambda.len() + 2 * x.len()).max(1) as f64;
        let z1: f64 = it.zl.iter().chain(&it.zu).map(|v| v.abs()).sum();
        let l1: f64 = it.lambda.iter().map(|v| v.abs()).sum();
        let s_d = ((z1 + l1) / count).max(100.0) / 100.0;
        let s_c = (z1 / (2 * x.len()).max(1) as f64).max(100.0) / 100.0;
        let mut compl = 0.0f64;
        for (k, &xk) in x.iter().enumerate() {
            if let Some(s) = slack(xk, self.lo[k], false) {
                compl = compl.max((it.zl[k] * s - mu).abs());
            }
            if let Some(s) = slack(xk, self.hi[k], true) {
                compl = compl.max((it.zu[k] * s - mu).abs());
            }
        }
        (norm_inf(&r) / s_d, norm_inf(&self.p.constraints(x)), compl / s_c)
    }

    /// Bound multiplier steps for the primal direction `dx`.
    fn dual_step(&self, it: &Iterate, dx: &[f64], mu: f64) -> (Vec<f64>, Vec<f64>) {
        let n = dx.len();
        let mut dzl = vec![0.0; n];
        let mut dzu = vec![0.0; n];
        for k in 0..n {
            if let Some(s) = slack(it.x[k], self.lo[k], false) {
                dzl[k] = mu / s - it.zl[k] - it.zl[k] / s * dx[k];
            }
            if let Some(s) = slack(it.x[k], self.hi[k], true) {
                dzu[k] = mu / s - it.zu[k] + it.zu[k] / s * dx[k];
            }
        }
        (dzl, dzu)
    }

    /// Keeps each `z s` within a factor `kappa` of `mu`.
    fn safeguard(&self, it: &mut Iterate, mu: f64) {
        const KAPPA: f64 = 1e10;
        for k in 0..it.x.len() {
            if let Some(s) = slack(it.x[k], self.lo[k], false) {
                it.zl[k] = it.zl[k].clamp(mu / (KAPPA * s), KAPPA * mu / s);
            }
            if let Some(s) = slack(it.x[k], self.hi[k], true) {
                it.zu[k] = it.zu[k].clamp(mu / (KAPPA * s), KAPPA * mu / s);
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Iterate {
    x: Vec<f64>,
    lambda: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
}

/// Largest step in `(0, 1]` keeping `z + alpha dz >= (1 - tau) z`.
fn max_dual_step(z: &[f64], dz: &[f64], tau: f64) -> f64 {
    z.iter().zip(dz).filter(|(_, d)| **d < 0.0).fold(1.0f64, |a, (z, d)| a.min(-tau * z / d))
}

/// Moves the start strictly inside the bounds.
fn push_inside(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for k in 0..x.len() {
        let (l, u) = (lo[k], hi[k]);
        let width = u - l;
        if l.is_finite() {
            let mut p = 1e-2 * l.abs().max(1.0);
            if width.is_finite() {
                p = p.min(1e-2 * width);
            }
            x[k] = x[k].max(l + p);
        }
        if u.is_finite() {
            let mut p = 1e-2 * u.abs().max(1.0);
            if width.is_finite() {
                p = p.min(1e-2 * width);
            }
            x[k] = x[k].min(u - p);
        }
    }
}

/// Solves `p` with every factorization routed through `policy`.
pub fn ipm_solve(p: &dyn NlpProblem, policy: Policy, opts: &IpmOptions) -> Result<IpmResult> {
    let (n, m) = (p.n(), p.m());
    let ev = Eval { p, lo: p.lower(), hi: p.upper() };
    if ev.lo.len() != n || ev.hi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: ev.lo.len().min(ev.hi.len()) });
    }
    let bounded = ev.lo.iter().chain(&ev.hi).any(|b| b.is_finite());

    let mut x = p.start();
    push_inside(&mut x, &ev.lo, &ev.hi);
    let zl = ev.lo.iter().map(|l| if l.is_finite() { 1.0 } else { 0.0 }).collect();
    let zu = ev.hi.iter().map(|u| if u.is_finite() { 1.0 } else { 0.0 }).collect();
    let mut it = Iterate { x, lambda: vec![0.0; m], zl, zu };
    let mut mu = opts.mu_init;
    let mut nu = 1.0f64;
    let mut solver = AugmentedSolver::new(policy, opts.solver)?;
    let mut records = Vec::new();

    for iter in 0..=opts.max_iter {
        if opts.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(Error::TimeLimit);
        }
        let (dual, primal, mut compl) = ev.errors(&it, mu);
        while bounded && mu > opts.mu_min && dual.max(primal).max(compl) <= opts.kappa_eps * mu {
            mu = (opts.kappa_mu * mu).min(mu.powf(opts.theta_mu)).max(opts.mu_min);
            compl = ev.errors(&it, mu).2;
        }
        let residual = dual.max(primal).max(ev.errors(&it, 0.0).2);
        if !residual.is_finite() {
            return Err(Error::NonFiniteFactor(iter));
        }
        if residual <= opts.tol {
            solver.finish();
            return Ok(IpmResult {
                objective: p.objective(&it.x),
                x: it.x,
                lambda: it.lambda,
                iterations: iter,
                residual,
                trace: solver.trace().to_vec(),
                decision_log: solver.controller().log_csv()?,
                records,
                stats: solver.stats().clone(),
            });
        }
        if iter == opts.max_iter {
            break;
        }

        let x = &it.x;
        let w = SymSparseMatrix::from_triplets(n, p.hessian(x, &it.lambda))?;
        let jac = SparseJacobian::new(m, n, p.jacobian(x))?;
        let mut sigma = vec![0.0; n];
        let mut grad_phi = p.gradient(x);
        for k in 0..n {
            if let Some(s) = slack(x[k], ev.lo[k], false) {
                sigma[k] += it.zl[k] / s;
                grad_phi[k] -= mu / s;
            }
            if let Some(s) = slack(x[k], ev.hi[k], true) {
                sigma[k] += it.zu[k] / s;
                grad_phi[k] += mu / s;
            }
        }
        let sigma_max = sigma.iter().fold(0.0f64, |a, &b| a.max(b));
        let g = p.constraints(x);

        let mut parts = KktParts::new(w, jac);
        parts.sigma = sigma;
        let before = solver.stats().factorizations;
        let corrected = inertia_correct(&mut solver, &parts, &opts.inertia)?;
        let k = &corrected.matrix;

        let rhs: Vec<f64> = grad_phi.iter().chain(&g).map(|v| -v).collect();
        let sol = solver.solve(k, &rhs)?.x;
        let (dx, lambda_plus) = sol.split_at(n);

        nu = nu.max(norm_inf(lambda_plus) + 1.0);
        let tau = (1.0 - mu).max(0.99);
        let alpha_max = ev.max_step(x, dx, tau);
        let phi0 = ev.merit(x, mu, nu);
        let g1: f64 = g.iter().map(|v| v.abs()).sum();
        let slope = (grad_phi.iter().zip(dx).map(|(a, b)| a * b).sum::<f64>() - nu * g1).min(0.0);

        // (direction, multiplier target, step length)
        let mut alpha = alpha_max;
        let mut accepted: Option<(Vec<f64>, Vec<f64>, f64)> = None;
        for trial in 0..40 {
            let xt: Vec<f64> = x.iter().zip(dx).map(|(x, d)| x + alpha * d).collect();
            if ev.merit(&xt, mu, nu) <= phi0 + 1e-4 * alpha * slope {
                accepted = Some((dx.to_vec(), lambda_plus.to_vec(), alpha));
                break;
            }
            if trial == 0 && opts.second_order_correction && m > 0 {
                let gt = p.constraints(&xt);
                let c_soc: Vec<f64> = g.iter().zip(&gt).map(|(a, b)| alpha * a + b).collect();
                let rhs: Vec<f64> = grad_phi.iter().chain(&c_soc).map(|v| -v).collect();
                let soc = solver.solve(k, &rhs)?.x;
                let (dxs, ls) = soc.split_at(n);
                let a_soc = ev.max_step(x, dxs, tau);
                let xs: Vec<f64> = x.iter().zip(dxs).map(|(x, d)| x + a_soc * d).collect();
                if ev.merit(&xs, mu, nu) <= phi0 + 1e-4 * alpha * slope {
                    accepted = Some((dxs.to_vec(), ls.to_vec(), a_soc));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let (dir, lam_target, alpha) = accepted.unwrap_or_else(|| {
            log::debug!("{}: line search failed at iteration {iter}, taking a short step", p.name());
            (dx.to_vec(), lambda_plus.to_vec(), alpha)
        });
        let (dzl, dzu) = ev.dual_step(&it, &dir, mu);
        let alpha_z = max_dual_step(&it.zl, &dzl, tau).min(max_dual_step(&it.zu, &dzu, tau));
        for k in 0..n {
            it.x[k] += alpha * dir[k];
            it.zl[k] += alpha_z * dzl[k];
            it.zu[k] += alpha_z * dzu[k];
        }
        for (l, t) in it.lambda.iter_mut().zip(&lam_target) {
            *l += alpha * (t - *l);
        }
        ev.safeguard(&mut it, mu);
        records.push(IterationRecord {
            iter,
            mu,
            residual,
            alpha,
            delta_w: corrected.delta_w,
            delta_c: corrected.delta_c,
            sigma_max,
            factorizations: solver.stats().factorizations - before,
        });
        log::trace!("{} it {iter}: res {residual:.3e} mu {mu:.1e} alpha {alpha:.3}", p.name());
    }
    Err(Error::IterationLimit(opts.max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kkt::problems::{bound_linear, scalar_equality_qp, toy_problems, CircleProblem};

    #[test]
    fn scalar_equality() {
        let r = ipm_solve(&scalar_equality_qp(), Policy::unscaled(), &IpmOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-9);
        assert!((r.lambda[0] + 1.0).abs() < 1e-9);
        assert!(r.residual <= 1e-6);
        assert!(r.trace.len() >= r.iterations);
    }

    #[test]
    fn bound_only_sigma_grows() {
        let r = ipm_solve(&bound_linear(), Policy::unscaled(), &IpmOptions::default()).unwrap();
        assert!(r.x[0] < 1e-6 && r.x[0] > 0.0);
        let s: Vec<f64> = r.records.iter().rev().take(3).map(|r| r.sigma_max).collect();
        assert!(s[0] > s[1] && s[1] > s[2], "{s:?} {:?}", r.records);
    }

    #[test]
    fn circle_needs_correction_then_converges() {
        let r = ipm_solve(&CircleProblem, Policy::unscaled(), &IpmOptions::default()).unwrap();
        assert!((r.x[0] + 1.0).abs() < 1e-6 && (r.x[1] + 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn toy_set_solves_unscaled() {
        for p in toy_problems() {
            let r = ipm_solve(p.as_ref(), Policy::unscaled(), &IpmOptions::default())
                .unwrap_or_else(|e| panic!("{}: {e}", p.name()));
            assert!(r.residual <= 1e-6, "{}", p.name());
        }
    }

    #[test]
    fn deadline_in_the_past() {
        let opts = IpmOptions { deadline: Some(Instant::now()), ..IpmOptions::default() };
        assert!(matches!(ipm_solve(&scalar_equality_qp(), Policy::unscaled(), &opts), Err(Error::TimeLimit)));
    }
}

//! Benchmark harness: runs problems across configurations, then turns the
//! results into performance profiles and reliability figures.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{compute_scaling, Policy, PolicyKind, Scaler, DEFAULT_DELAY_FRACTION, DEFAULT_INITIAL_U};
use crate::error::{Error, Result};
use crate::kkt::{ipm_solve, IpmOptions, NlpProblem};
use crate::ldlt::{analyse, factorize, refine, FactorOptions};
use crate::ordering::min_degree_order;
use crate::sparsemat::SymSparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// `None` runs unscaled.
    pub scaler: Option<Scaler>,
    pub policy: PolicyKind,
    pub u_init: f64,
    pub delay_fraction: f64,
    pub time_limit: Duration,
    pub seed: u64,
    pub force_first: bool,
}

impl RunConfig {
    pub fn new(scaler: Option<Scaler>, policy: PolicyKind) -> Self {
        Self {
            scaler,
            policy,
            u_init: DEFAULT_INITIAL_U,
            delay_fraction: DEFAULT_DELAY_FRACTION,
            time_limit: Duration::from_secs(1000),
            seed: 0,
            force_first: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.time_limit.is_zero() {
            return Err(Error::InvalidArgument("time limit must be positive".into()));
        }
        self.policy().validate()
    }

    pub fn policy(&self) -> Policy {
        let (kind, scaler) = match self.scaler {
            Some(s) => (self.policy, s),
            None => (PolicyKind::None, Scaler::Matching),
        };
        Policy {
            kind,
            scaler,
            delay_fraction: self.delay_fraction,
            force_first: self.force_first,
            initial_u: self.u_init,
        }
    }

    pub fn label(&self) -> String {
        self.policy().label()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Solved,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub config: String,
    pub status: Status,
    /// Why a failed run failed, e.g. `time limit`.
    pub reason: Option<String>,
    pub runtime: f64,
    pub iterations: usize,
    pub factorizations: usize,
    pub total_flops: u64,
    pub max_delayed: usize,
    pub avg_delayed: f64,
    pub scaling_time_fraction: f64,
}

impl RunRecord {
    fn failed(problem: &str, config: &str, reason: String, runtime: f64) -> Self {
        Self {
            problem: problem.to_string(),
            config: config.to_string(),
            status: Status::Failed,
            reason: Some(reason),
            runtime,
            iterations: 0,
            factorizations: 0,
            total_flops: 0,
            max_delayed: 0,
            avg_delayed: 0.0,
            scaling_time_fraction: 0.0,
        }
    }

    pub fn solved(&self) -> bool {
        self.status == Status::Solved
    }

    /// Fields that do not depend on the clock.
    pub fn without_timing(&self) -> Self {
        Self { runtime: 0.0, scaling_time_fraction: 0.0, ..self.clone() }
    }
}

/// Results keyed by `(problem, config)`, with problem and config order kept.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub records: Vec<RunRecord>,
}

impl ResultsTable {
    pub fn problems(&self) -> Vec<String> {
        unique(self.records.iter().map(|r| r.problem.clone()))
    }

    pub fn configs(&self) -> Vec<String> {
        unique(self.records.iter().map(|r| r.config.clone()))
    }

    pub fn get(&self, problem: &str, config: &str) -> Option<&RunRecord> {
        self.records.iter().find(|r| r.problem == problem && r.config == config)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let records = rd.deserialize().collect::<std::result::Result<Vec<RunRecord>, _>>()?;
        Ok(Self { records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
        } else {
            Self::read_csv(file)
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Keeps the problems on which every solved run spent at least
    /// `min_flops` factorization flops per iteration.
    pub fn large_problems(&self, min_flops: f64) -> Self {
        let keep: Vec<String> = self
            .problems()
            .into_iter()
            .filter(|p| {
                self.records
                    .iter()
                    .filter(|r| &r.problem == p && r.solved())
                    .all(|r| r.total_flops as f64 / r.iterations.max(1) as f64 >= min_flops)
            })
            .collect();
        Self { records: self.records.iter().filter(|r| keep.contains(&r.problem)).cloned().collect() }
    }
}

fn unique(it: impl Iterator<Item = String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in it {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Runs one problem under one configuration. Errors and the time limit
/// become failed records.
pub fn run_one(problem: &dyn NlpProblem, cfg: &RunConfig) -> RunRecord {
    let label = cfg.label();
    let start = Instant::now();
    let opts = IpmOptions { deadline: Some(start + cfg.time_limit), ..IpmOptions::default() };
    let result = cfg.validate().and_then(|_| ipm_solve(problem, cfg.policy(), &opts));
    let runtime = start.elapsed().as_secs_f64();
    match result {
        Ok(r) => {
            let s = &r.stats;
            RunRecord {
                problem: problem.name().to_string(),
                config: label,
                status: Status::Solved,
                reason: None,
                runtime,
                iterations: r.iterations,
                factorizations: s.factorizations,
                total_flops: s.total_flops,
                max_delayed: s.max_delayed,
                avg_delayed: s.total_delayed as f64 / s.factorizations.max(1) as f64,
                scaling_time_fraction: time_fraction(s.scaling_time, runtime),
            }
        }
        Err(e) => {
            let reason = match e {
                Error::TimeLimit => "time limit".to_string(),
                other => other.to_string(),
            };
            RunRecord::failed(problem.name(), &label, reason, runtime)
        }
    }
}

fn time_fraction(part: Duration, total: f64) -> f64 {
    if total > 0.0 {
        (part.as_secs_f64() / total).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Every `(problem, config)` pair, `jobs` at a time. Records come back in
/// problem-major order whatever the scheduling.
pub fn run_suite(problems: &[Box<dyn NlpProblem>], configs: &[RunConfig], jobs: usize) -> Result<ResultsTable> {
    if problems.is_empty() || configs.is_empty() {
        return Err(Error::InvalidArgument("run_suite needs at least one problem and one config".into()));
    }
    let tasks: Vec<(usize, usize)> =
        (0..problems.len()).flat_map(|p| (0..configs.len()).map(move |c| (p, c))).collect();
    let slots: Vec<Mutex<Option<RunRecord>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    let next = Mutex::new(0usize);
    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1).min(tasks.len()) {
            scope.spawn(|| loop {
                let t = {
                    let mut guard = next.lock().expect("task counter poisoned");
                    let t = *guard;
                    *guard += 1;
                    t
                };
                let Some(&(p, c)) = tasks.get(t) else { break };
                let rec = run_one(problems[p].as_ref(), &configs[c]);
                log::info!("{} / {}: {:?}", rec.problem, rec.config, rec.status);
                *slots[t].lock().expect("result slot poisoned") = Some(rec);
            });
        }
    });
    let records = slots.into_iter().map(|s| s.into_inner().expect("result slot poisoned").expect("task ran")).collect();
    Ok(ResultsTable { records })
}

/// A linear-system test case for [`run_linear`].
pub struct LinearCase {
    pub name: String,
    pub matrix: SymSparseMatrix,
}

/// One factorize-and-solve per matrix: scaling (if any), minimum-degree or
/// matching-based order, factorization at `u_init`, and refinement on a
/// right-hand side `A x` with `x` drawn from the seed.
pub fn run_linear_one(case: &LinearCase, cfg: &RunConfig) -> RunRecord {
    let label = cfg.label();
    let start = Instant::now();
    let a = &case.matrix;
    let outcome = (|| -> Result<(RunRecord, Duration)> {
        cfg.validate()?;
        let mut scaling_time = Duration::ZERO;
        let (scaling, order) = match cfg.scaler {
            Some(s) if cfg.policy != PolicyKind::None => {
                let t = Instant::now();
                let out = compute_scaling(s, a)?;
                scaling_time = t.elapsed();
                (Some(out.scaling), out.order)
            }
            _ => (None, None),
        };
        let order = order.unwrap_or_else(|| min_degree_order(a));
        let sf = analyse(a, &order)?;
        let f = factorize(a, &sf, &FactorOptions::with_u(cfg.u_init), scaling.as_ref())?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let x: Vec<f64> = (0..a.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.matvec(&x)?;
        let r = refine(a, &f, &b, 5, 1e-10)?;
        if start.elapsed() > cfg.time_limit {
            return Err(Error::TimeLimit);
        }
        let rec = RunRecord {
            problem: case.name.clone(),
            config: label.clone(),
            status: if r.converged { Status::Solved } else { Status::Failed },
            reason: (!r.converged).then(|| format!("backward error {:.2e}", r.backward_error)),
            runtime: 0.0,
            iterations: r.steps,
            factorizations: 1,
            total_flops: f.flops(),
            max_delayed: f.num_delayed(),
            avg_delayed: f.num_delayed() as f64,
            scaling_time_fraction: 0.0,
        };
        Ok((rec, scaling_time))
    })();
    let runtime = start.elapsed().as_secs_f64();
    match outcome {
        Ok((mut rec, st)) => {
            rec.runtime = runtime;
            rec.scaling_time_fraction = time_fraction(st, runtime);
            rec
        }
        Err(Error::TimeLimit) => RunRecord::failed(&case.name, &label, "time limit".into(), runtime),
        Err(e) => RunRecord::failed(&case.name, &label, e.to_string(), runtime),
    }
}

pub fn run_linear(cases: &[LinearCase], configs: &[RunConfig]) -> Result<ResultsTable> {
    if cases.is_empty() || configs.is_empty() {
        return Err(Error::InvalidArgument("run_linear needs at least one matrix and one config".into()));
    }
    let records = cases.iter().flat_map(|c| configs.iter().map(move |cfg| run_linear_one(c, cfg))).collect();
    Ok(ResultsTable { records })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Time,
    Flops,
    /// Average delayed pivots per factorization, shifted by one so that
    /// delay-free runs still give finite ratios.
    Delayed,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "time" => Ok(Self::Time),
            "flops" => Ok(Self::Flops),
            "delayed" => Ok(Self::Delayed),
            _ => Err(Error::InvalidArgument(format!("unknown metric {s:?}"))),
        }
    }
}

impl Metric {
    fn value(self, r: &RunRecord) -> Option<f64> {
        if !r.solved() {
            return None;
        }
        Some(match self {
            Self::Time => r.runtime,
            Self::Flops => r.total_flops as f64,
            Self::Delayed => r.avg_delayed + 1.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileCurve {
    pub config: String,
    /// Performance ratio per problem, `inf` for failures.
    pub ratios: Vec<f64>,
    /// `(tau, rho(tau))` at every jump, starting at `tau = 1`.
    pub points: Vec<(f64, f64)>,
    /// `rho(inf)`: the fraction of problems solved.
    pub asymptote: f64,
}

impl ProfileCurve {
    /// Fraction of problems with ratio at most `tau`.
    pub fn rho(&self, tau: f64) -> f64 {
        if self.ratios.is_empty() {
            return 0.0;
        }
        self.ratios.iter().filter(|&&r| r <= tau).count() as f64 / self.ratios.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileCurves {
    pub metric: Metric,
    pub problems: Vec<String>,
    pub curves: Vec<ProfileCurve>,
}

impl ProfileCurves {
    pub fn curve(&self, config: &str) -> Option<&ProfileCurve> {
        self.curves.iter().find(|c| c.config == config)
    }

    /// Two columns `tau,rho` per config, in long form.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["config", "tau", "rho"])?;
        for c in &self.curves {
            for &(tau, rho) in &c.points {
                w.write_record([c.config.clone(), tau.to_string(), rho.to_string()])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Performance profile: each config's metric divided by the best over
/// configs on the same problem, failures at ratio infinity. A problem no
/// config solved stays in the denominator, so every curve still tends to
/// its solved fraction.
pub fn performance_profile(t: &ResultsTable, metric: Metric) -> Result<ProfileCurves> {
    let configs = t.configs();
    if configs.len() < 2 {
        return Err(Error::InvalidArgument("a performance profile needs at least two configs".into()));
    }
    let problems = t.problems();
    let mut ratios: BTreeMap<&str, Vec<f64>> = configs.iter().map(|c| (c.as_str(), Vec::new())).collect();
    for p in &problems {
        let values: Vec<Option<f64>> = configs.iter().map(|c| t.get(p, c).and_then(|r| metric.value(r))).collect();
        let best = values.iter().flatten().fold(f64::INFINITY, |a, &b| a.min(b));
        if best.is_infinite() {
            log::warn!("no config solved {p}; it counts as a failure for all");
        }
        for (c, v) in configs.iter().zip(values) {
            let r = match v {
                None => f64::INFINITY,
                Some(v) if best == 0.0 => {
                    if v == 0.0 {
                        1.0
                    } else {
                        f64::INFINITY
                    }
                }
                Some(v) => v / best,
            };
            ratios.get_mut(c.as_str()).expect("config registered").push(r);
        }
    }
    let curves = configs
        .iter()
        .map(|c| {
            let rs = ratios.remove(c.as_str()).expect("config registered");
            let mut taus: Vec<f64> = rs.iter().copied().filter(|r| r.is_finite()).collect();
            taus.push(1.0);
            taus.sort_by(f64::total_cmp);
            taus.dedup();
            let mut curve = ProfileCurve { config: c.clone(), ratios: rs, points: Vec::new(), asymptote: 0.0 };
            curve.points = taus.iter().map(|&tau| (tau, curve.rho(tau))).collect();
            curve.asymptote = curve.rho(f64::MAX);
            curve
        })
        .collect();
    Ok(ProfileCurves { metric, problems, curves })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reliability {
    pub config: String,
    pub solved: usize,
    pub total: usize,
    /// Solved percentage.
    pub percent: f64,
}

impl std::fmt::Display for Reliability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {:.1}% ({}/{})", self.config, self.percent, self.solved, self.total)
    }
}

/// Solved count over problem count per config.
pub fn reliability(t: &ResultsTable) -> Result<Vec<Reliability>> {
    if t.records.is_empty() {
        return Err(Error::InvalidArgument("empty results table".into()));
    }
    let problems = t.problems();
    Ok(t.configs()
        .into_iter()
        .map(|c| {
            let solved = problems.iter().filter(|p| t.get(p, &c).is_some_and(RunRecord::solved)).count();
            Reliability {
                percent: 100.0 * solved as f64 / problems.len() as f64,
                config: c,
                solved,
                total: problems.len(),
            }
        })
        .collect())
}

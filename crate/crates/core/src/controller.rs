//! Dynamic scaling heuristics.
//!
//! Before every factorization of a sequence the [`Controller`] decides whether
//! to factorize without scaling, reuse the last scaling, or compute a new one.
//! Triggers are refinement failure (`OD` family) and the delayed-pivot count
//! exceeding `delay_fraction * n` (`HD` family). The `R` variants compute a
//! scaling once per trigger and reuse it afterwards.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ordering::{matching_based_order, Permutation};
use crate::scaling::CurtisReidVariant;
use crate::scaling::{combined_equilibrate, curtis_reid_scale, max_product_matching, symmetrize_matching_scaling};
use crate::sparsemat::{ScalingVector, SymSparseMatrix};

pub const DEFAULT_DELAY_FRACTION: f64 = 0.05;
pub const DEFAULT_INITIAL_U: f64 = 1e-8;
pub const MAX_U: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    None,
    Always,
    OD,
    ODR,
    HD,
    HDR,
    ODHD,
    ODHDR,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 8] = [
        PolicyKind::None,
        PolicyKind::Always,
        PolicyKind::OD,
        PolicyKind::ODR,
        PolicyKind::HD,
        PolicyKind::HDR,
        PolicyKind::ODHD,
        PolicyKind::ODHDR,
    ];

    /// Triggers on refinement failure.
    pub fn on_demand(self) -> bool {
        matches!(self, Self::OD | Self::ODR | Self::ODHD | Self::ODHDR)
    }

    /// Triggers on a high delayed-pivot count.
    pub fn high_delay(self) -> bool {
        matches!(self, Self::HD | Self::HDR | Self::ODHD | Self::ODHDR)
    }

    /// Computes once per trigger and reuses the result.
    pub fn reuses(self) -> bool {
        matches!(self, Self::ODR | Self::HDR | Self::ODHDR)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::None => "none",
            Self::Always => "always",
            Self::OD => "od",
            Self::ODR => "odr",
            Self::HD => "hd",
            Self::HDR => "hdr",
            Self::ODHD => "odhd",
            Self::ODHDR => "odhdr",
        };
        f.write_str(s)
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown policy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scaler {
    CurtisReid,
    CurtisReidSym,
    Matching,
    Equilibrate,
    MatchingOrder,
}

impl Scaler {
    pub const ALL: [Scaler; 5] =
        [Scaler::CurtisReid, Scaler::CurtisReidSym, Scaler::Matching, Scaler::Equilibrate, Scaler::MatchingOrder];
}

impl fmt::Display for Scaler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::CurtisReid => "curtis-reid",
            Self::CurtisReidSym => "curtis-reid-sym",
            Self::Matching => "matching",
            Self::Equilibrate => "equilibrate",
            Self::MatchingOrder => "matching-order",
        };
        f.write_str(s)
    }
}

impl FromStr for Scaler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scaler {s:?}")))
    }
}

/// Output of a scaler: the scaling and, for orderings built from the same
/// matching, the pivot order to analyse with.
#[derive(Debug, Clone)]
pub struct ScalerOutput {
    pub scaling: ScalingVector,
    pub order: Option<Permutation>,
}

/// Runs `scaler` on `a`.
pub fn compute_scaling(scaler: Scaler, a: &SymSparseMatrix) -> Result<ScalerOutput> {
    let scaling = match scaler {
        Scaler::CurtisReid => curtis_reid_scale(a, CurtisReidVariant::UnsymmetricAveraged, 1e-8, 100)?,
        Scaler::CurtisReidSym => curtis_reid_scale(a, CurtisReidVariant::Symmetric, 1e-8, 100)?,
        Scaler::Matching => symmetrize_matching_scaling(&max_product_matching(a)?),
        Scaler::Equilibrate => combined_equilibrate(a)?,
        Scaler::MatchingOrder => {
            let (order, scaling) = matching_based_order(a)?;
            return Ok(ScalerOutput { scaling, order: Some(order) });
        }
    };
    Ok(ScalerOutput { scaling, order: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub kind: PolicyKind,
    pub scaler: Scaler,
    pub delay_fraction: f64,
    /// Scale the very first factorization regardless of triggers.
    pub force_first: bool,
    pub initial_u: f64,
}

impl Policy {
    pub fn new(kind: PolicyKind, scaler: Scaler) -> Self {
        Self { kind, scaler, delay_fraction: DEFAULT_DELAY_FRACTION, force_first: false, initial_u: DEFAULT_INITIAL_U }
    }

    pub fn unscaled() -> Self {
        Self::new(PolicyKind::None, Scaler::Matching)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay_fraction > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "delay fraction must be positive, got {}",
                self.delay_fraction
            )));
        }
        if !(self.initial_u > 0.0 && self.initial_u <= MAX_U) {
            return Err(Error::InvalidArgument(format!("initial threshold {} outside (0, 0.5]", self.initial_u)));
        }
        Ok(())
    }

    /// Short label such as `matching-odhdr`.
    pub fn label(&self) -> String {
        if self.kind == PolicyKind::None {
            "none".to_string()
        } else {
            format!("{}-{}", self.scaler, self.kind)
        }
    }
}

impl Default for Policy {
    /// Matching scaling under the combined reuse heuristic.
    fn default() -> Self {
        Self::new(PolicyKind::ODHDR, Scaler::Matching)
    }
}

/// Outcome of one factorization plus its refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorEvent {
    pub num_delayed: usize,
    pub n: usize,
    pub ir_converged: bool,
    pub ir_error: f64,
}

impl FactorEvent {
    pub fn new(num_delayed: usize, n: usize, ir_converged: bool) -> Self {
        Self { num_delayed, n, ir_converged, ir_error: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingAction {
    None,
    Reuse,
    Recompute,
}

impl fmt::Display for ScalingAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Reuse => "reuse",
            Self::Recompute => "recompute",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub scaling: ScalingAction,
    pub u: f64,
    /// The ordering depends on the new scaling, so analyse must be rerun.
    pub reanalyse: bool,
}

#[derive(Debug, Clone, Default)]
pub struct HeuristicState {
    /// A non-reuse policy has fired and now scales every factorization.
    pub scaling_active: bool,
    /// A recompute has been issued at least once.
    pub scaled_once: bool,
    pub cached_scaling: Option<ScalingVector>,
    pub cached_order: Option<Permutation>,
    pub delay_baseline: Option<usize>,
    /// The next event reports the first factorization with a fresh scaling.
    pub pending_baseline: bool,
    pub u_current: f64,
}

/// `u <- min(max(10^4 u, 10^-4), 0.5)`.
pub fn bump_threshold(u: f64) -> f64 {
    (u * 1e4).clamp(1e-4, MAX_U)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRow {
    pub iter: usize,
    pub decision: ScalingAction,
    pub u: f64,
    pub num_delayed: Option<usize>,
    pub ir_converged: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct Controller {
    policy: Policy,
    state: HeuristicState,
    log: Vec<LogRow>,
}

impl Controller {
    pub fn new(policy: Policy) -> Result<Self> {
        policy.validate()?;
        let state = HeuristicState { u_current: policy.initial_u, ..HeuristicState::default() };
        Ok(Self { policy, state, log: Vec::new() })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn state(&self) -> &HeuristicState {
        &self.state
    }

    pub fn u(&self) -> f64 {
        self.state.u_current
    }

    pub fn log(&self) -> &[LogRow] {
        &self.log
    }

    /// Decision for the next factorization. `event` describes the previous
    /// one and is `None` only for the first factorization of a run.
    pub fn decide_next(&mut self, event: Option<&FactorEvent>) -> Decision {
        let kind = self.policy.kind;
        let action = match event {
            None => {
                if kind == PolicyKind::Always || (kind != PolicyKind::None && self.policy.force_first) {
                    ScalingAction::Recompute
                } else {
                    ScalingAction::None
                }
            }
            Some(ev) => {
                if let Some(last) = self.log.last_mut() {
                    last.num_delayed = Some(ev.num_delayed);
                    last.ir_converged = Some(ev.ir_converged);
                }
                self.react(ev)
            }
        };
        if action == ScalingAction::Recompute {
            self.state.scaled_once = true;
            self.state.pending_baseline = kind.reuses() && kind.high_delay();
        }
        let decision = Decision {
            scaling: action,
            u: self.state.u_current,
            reanalyse: action == ScalingAction::Recompute && self.policy.scaler == Scaler::MatchingOrder,
        };
        self.log.push(LogRow {
            iter: self.log.len(),
            decision: action,
            u: decision.u,
            num_delayed: None,
            ir_converged: None,
        });
        decision
    }

    fn react(&mut self, ev: &FactorEvent) -> ScalingAction {
        let kind = self.policy.kind;
        let failed = !ev.ir_converged;
        if failed && kind.on_demand() {
            self.state.u_current = bump_threshold(self.state.u_current);
        }
        let limit = self.policy.delay_fraction * ev.n as f64;
        match kind {
            PolicyKind::None => ScalingAction::None,
            PolicyKind::Always => ScalingAction::Recompute,
            PolicyKind::OD | PolicyKind::HD | PolicyKind::ODHD => {
                let fired = (kind.on_demand() && failed) || (kind.high_delay() && ev.num_delayed as f64 > limit);
                if fired {
                    self.state.scaling_active = true;
                }
                if self.state.scaling_active {
                    ScalingAction::Recompute
                } else {
                    ScalingAction::None
                }
            }
            PolicyKind::ODR | PolicyKind::HDR | PolicyKind::ODHDR => {
                let mut fired = kind.on_demand() && failed;
                if kind.high_delay() {
                    if self.state.pending_baseline {
                        self.state.delay_baseline = Some(ev.num_delayed);
                        self.state.pending_baseline = false;
                    } else {
                        let extra = ev.num_delayed.saturating_sub(self.state.delay_baseline.unwrap_or(0));
                        fired |= extra as f64 > limit;
                    }
                }
                if fired {
                    ScalingAction::Recompute
                } else if self.state.scaled_once {
                    ScalingAction::Reuse
                } else {
                    ScalingAction::None
                }
            }
        }
    }

    /// Fills the outcome of the last logged factorization.
    pub fn close(&mut self, ev: &FactorEvent) {
        if let Some(last) = self.log.last_mut() {
            last.num_delayed = Some(ev.num_delayed);
            last.ir_converged = Some(ev.ir_converged);
        }
    }

    pub fn store_scaling(&mut self, out: ScalerOutput) {
        self.state.cached_scaling = Some(out.scaling);
        if out.order.is_some() {
            self.state.cached_order = out.order;
        }
    }

    pub fn cached_scaling(&self) -> Option<&ScalingVector> {
        self.state.cached_scaling.as_ref()
    }

    pub fn cached_order(&self) -> Option<&Permutation> {
        self.state.cached_order.as_ref()
    }

    /// Decision log as CSV with header `iter,decision,u,num_delayed,ir_converged`.
    pub fn log_csv(&self) -> Result<String> {
        log_to_csv(&self.log)
    }
}

pub fn log_to_csv(rows: &[LogRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Feeds a scripted trace through a fresh controller. Decision `k` governs
/// factorization `k`, whose outcome is `events[k]`.
pub fn replay(policy: Policy, events: &[FactorEvent]) -> Result<(Vec<Decision>, String)> {
    let mut c = Controller::new(policy)?;
    let mut decisions = Vec::with_capacity(events.len());
    for k in 0..events.len() {
        decisions.push(c.decide_next(if k == 0 { None } else { Some(&events[k - 1]) }));
    }
    if let Some(last) = events.last() {
        c.close(last);
    }
    Ok((decisions, c.log_csv()?))
}

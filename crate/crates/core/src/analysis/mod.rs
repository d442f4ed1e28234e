//! Bound constants, Lyapunov quantities and verifiers.
//!
//! Sample-path inequalities are checked exactly in rational arithmetic
//! (money in cents, queues in shares). In-expectation bounds are checked
//! against ensemble means with a three-standard-error margin.

mod stats;
mod verify;

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketSpec;
use crate::money::{ratio128_to_f64, widen};
use crate::trader::Trajectory;

pub use stats::{
    thm1_rhs, thm2_rhs, time_avg_profit, verify_thm1_profit, verify_thm2_profit, EnsembleStat, MIN_REPLICATIONS,
};
pub use verify::{
    verify_drift_bound, verify_frame_drift, verify_queue_band, verify_shifted_queue, verify_slot_optimality,
    verify_thm3, verify_tslot_lemma, ShiftedAlternative,
};

pub type Exact = Ratio<i128>;

/// `1/2 sum (Q_n - theta_n)^2`, exact.
pub fn lyapunov(queue: &[i64], theta: &[Ratio<i64>]) -> Exact {
    queue
        .iter()
        .zip(theta)
        .map(|(&q, &t)| {
            let d = Ratio::from_integer(q as i128) - widen(t);
            d * d
        })
        .sum::<Exact>()
        / Ratio::from_integer(2)
}

/// `L(Q(t0 + T)) - L(Q(t0))` along a trajectory.
pub fn sample_path_drift(traj: &Trajectory, t0: usize, t: usize) -> Result<Exact> {
    if t == 0 {
        return Err(Error::Range("drift window T must be positive".into()));
    }
    if t0 + t > traj.len() {
        return Err(Error::Range(format!(
            "drift window [{t0}, {}) exceeds trajectory length {}",
            t0 + t,
            traj.len()
        )));
    }
    let theta = traj.params.theta_ratios();
    Ok(lyapunov(queue_at(traj, t0 + t), &theta) - lyapunov(queue_at(traj, t0), &theta))
}

/// `Q(t)` for `t` in `0..=len`.
pub(crate) fn queue_at(traj: &Trajectory, t: usize) -> &[i64] {
    if t == traj.len() {
        traj.records.last().map_or(traj.initial_queue(), |r| &r.queue)
    } else {
        traj.queue_before(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "B_tilde")]
    pub b_tilde: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "T")]
    pub t: usize,
    pub epsilon: f64,
    pub sum_mu_sq: i64,
    pub sum_mu: i64,
}

impl BoundConstants {
    pub fn b_exact(&self) -> Exact {
        Ratio::new(self.sum_mu_sq as i128, 2)
    }

    pub fn b_tilde_exact(&self) -> Exact {
        let t2 = (self.t * self.t) as i128;
        Ratio::new((t2 + 1) * self.sum_mu_sq as i128, 2 * t2)
    }

    pub fn d_exact(&self) -> Exact {
        d_exact(self.sum_mu_sq, self.t)
    }
}

/// `D = (3/2 + 1/(2T^2) + 1/T) sum mu_max^2`.
pub(crate) fn d_exact(sum_mu_sq: i64, t: usize) -> Exact {
    let t = t as i128;
    (Ratio::new(3, 2) + Ratio::new(1, 2 * t * t) + Ratio::new(1, t)) * Ratio::from_integer(sum_mu_sq as i128)
}

pub fn compute_constants(spec: &MarketSpec, t: usize, epsilon: f64) -> Result<BoundConstants> {
    if t == 0 {
        return Err(Error::Range("T must be positive".into()));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Range("epsilon must be a non-negative number".into()));
    }
    let sum_mu_sq: i64 = spec.stocks.iter().map(|s| s.mu_max * s.mu_max).sum();
    let sum_mu: i64 = spec.stocks.iter().map(|s| s.mu_max).sum();
    let tf = t as f64;
    let mut out = BoundConstants {
        b: 0.0,
        b_tilde: 0.0,
        d: 0.0,
        c1: 0.0,
        c2: 1.0 + spec.stocks.iter().map(|s| s.p_max.as_dollars()).sum::<f64>(),
        t,
        epsilon,
        sum_mu_sq,
        sum_mu,
    };
    out.b = ratio128_to_f64(&out.b_exact());
    out.b_tilde = ratio128_to_f64(&out.b_tilde_exact());
    out.d = ratio128_to_f64(&out.d_exact());
    out.c1 = out.d + epsilon / tf * sum_mu as f64;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// The inequality holds but its right-hand side is below zero, so it says nothing.
    VacuousPass,
    Fail,
}

impl Verdict {
    pub fn holds(self) -> bool {
        self != Verdict::Fail
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::VacuousPass => "vacuous-pass",
            Verdict::Fail => "fail",
        })
    }
}

/// Where a check was tightest, or first failed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locus {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stock: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replication: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alternative: Option<usize>,
}

impl Locus {
    pub fn slot(slot: u64) -> Self {
        Locus {
            slot: Some(slot),
            ..Locus::default()
        }
    }

    pub fn frame(frame: usize) -> Self {
        Locus {
            frame: Some(frame),
            ..Locus::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub check: String,
    pub verdict: Verdict,
    /// Worst `rhs - lhs` margin (non-negative when the check holds).
    pub slack: f64,
    /// The same margin as an exact fraction, for the exact checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slack_exact: Option<String>,
    pub locus: Option<Locus>,
    /// Inequalities evaluated.
    pub evaluated: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.verdict.holds()
    }

    /// Combines reports of the same check: the worst verdict and the smallest
    /// slack win, and a failing report keeps its own locus.
    pub fn merge(reports: impl IntoIterator<Item = BoundReport>) -> Option<BoundReport> {
        reports.into_iter().reduce(|a, b| {
            let evaluated = a.evaluated + b.evaluated;
            let verdict = a.verdict.max(b.verdict);
            let mut keep = match (a.verdict == Verdict::Fail, b.verdict == Verdict::Fail) {
                (true, false) => a,
                (false, true) => b,
                _ if b.slack < a.slack => b,
                _ => a,
            };
            keep.verdict = verdict;
            keep.evaluated = evaluated;
            keep
        })
    }

    pub fn with_replication(mut self, replication: usize) -> Self {
        let mut locus = self.locus.unwrap_or_default();
        locus.replication = Some(replication);
        self.locus = Some(locus);
        self
    }
}

/// Running minimum of exact `rhs - lhs` margins; builds a [`BoundReport`].
#[derive(Debug, Clone)]
pub(crate) struct Tracker {
    check: &'static str,
    worst: Option<(Exact, Locus)>,
    failed: Option<(Exact, Locus)>,
    evaluated: usize,
}

impl Tracker {
    pub(crate) fn new(check: &'static str) -> Self {
        Tracker {
            check,
            worst: None,
            failed: None,
            evaluated: 0,
        }
    }

    /// Records `lhs <= rhs` as `margin = rhs - lhs`.
    pub(crate) fn observe(&mut self, margin: Exact, locus: impl FnOnce() -> Locus) {
        self.evaluated += 1;
        let tighter = self.worst.as_ref().is_none_or(|(w, _)| margin < *w);
        if tighter || (margin < Ratio::from_integer(0) && self.failed.is_none()) {
            let locus = locus();
            if margin < Ratio::from_integer(0) && self.failed.is_none() {
                self.failed = Some((margin, locus.clone()));
            }
            if tighter {
                self.worst = Some((margin, locus));
            }
        }
    }

    pub(crate) fn finish(self, detail: Option<String>) -> BoundReport {
        let (verdict, pick) = match (self.failed, self.worst.clone()) {
            (Some(f), _) => (Verdict::Fail, Some(f)),
            (None, w) => (Verdict::Pass, w),
        };
        let slack = self.worst.as_ref().map(|(m, _)| m.clone());
        BoundReport {
            check: self.check.to_string(),
            verdict,
            slack: slack.as_ref().map_or(0.0, ratio128_to_f64),
            slack_exact: slack.map(|m| m.to_string()),
            locus: pick.map(|(_, l)| l),
            evaluated: self.evaluated,
            detail,
        }
    }
}

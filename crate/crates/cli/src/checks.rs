//! Runs the configured checks on trajectories and merges the results.

use anyhow::{bail, Context, Result};
use serde::Serialize;

use lyaptrade::analysis::{
    thm2_rhs, time_avg_profit, verify_drift_bound, verify_frame_drift, verify_queue_band, verify_slot_optimality,
    verify_thm1_profit, verify_thm2_profit, verify_thm3, verify_tslot_lemma,
};
use lyaptrade::money::ratio128_to_f64;
use lyaptrade::oracles::markov_memory_epsilon;
use lyaptrade::prices::stationary_distribution;
use lyaptrade::{
    compute_constants, drift_rebalance, enumerate_actions, lookahead_frames, lookahead_psi, lyapunov, solve_phi_opt,
    validate_decision, BoundConstants, BoundReport, Locus, MarketSpec, Money, PortfolioState, PriceSource, TradeDecision,
    Trajectory, TraderParams, Verdict,
};

use crate::config::CheckName;

/// Longest frame length tried when picking the Markov window automatically.
const MAX_AUTO_FRAME: usize = 200;

/// A check's merged outcome across replications.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: CheckName,
    pub statistical: bool,
    pub report: BoundReport,
}

/// Recorded queues must follow `max(Q - mu + A, 0)`.
fn dynamics_report(traj: &Trajectory) -> BoundReport {
    let failure = traj.dynamics_violation();
    BoundReport {
        check: "dynamics".into(),
        verdict: if failure.is_some() { Verdict::Fail } else { Verdict::Pass },
        slack: if failure.is_some() { -1.0 } else { 0.0 },
        slack_exact: None,
        locus: failure.map(|i| Locus::slot(traj.records[i].slot)),
        evaluated: traj.len(),
        detail: failure.map(|i| format!("slot {} breaks the queue update", traj.records[i].slot)),
    }
}

/// Every feasible action at every slot, as alternatives to the emitted one.
fn feasible_alternatives(traj: &Trajectory) -> Result<Vec<Vec<TradeDecision>>> {
    let spec = &traj.spec;
    (0..traj.len())
        .map(|i| {
            let state = PortfolioState::new(traj.queue_before(i).to_vec());
            let prices = &traj.records[i].prices;
            let mut feasible = Vec::new();
            for a in enumerate_actions(spec, prices)?.actions {
                if validate_decision(spec, prices, &state, &a, true)?.is_empty() {
                    feasible.push(a);
                }
            }
            Ok(feasible)
        })
        .collect()
}

fn frame_lemma_report(traj: &Trajectory, t: usize) -> Result<BoundReport> {
    let frames = traj.len() / t;
    let reports = (0..frames)
        .map(|m| {
            let window: Vec<_> = traj.records[m * t..(m + 1) * t].iter().map(|r| r.prices.clone()).collect();
            let alt = lookahead_psi(&traj.spec, &window)?.decisions;
            let mut rep = verify_tslot_lemma(traj, &alt, m * t)?;
            if let Some(locus) = rep.locus.as_mut() {
                locus.frame = Some(m);
            }
            Ok(rep)
        })
        .collect::<Result<Vec<_>>>()?;
    BoundReport::merge(reports).context("no complete frame in the trajectory")
}

fn lookahead_profit_report(traj: &Trajectory, t: usize) -> Result<BoundReport> {
    let frames = traj.len() / t;
    let prices: Vec<_> = traj.records.iter().map(|r| r.prices.clone()).collect();
    let psi: Vec<Money> = lookahead_frames(&traj.spec, &prices, t, frames)?
        .into_iter()
        .map(|f| f.psi)
        .collect();
    Ok(verify_thm3(traj, &psi, t)?)
}

/// Deterministic check on one trajectory.
pub fn deterministic(check: CheckName, traj: &Trajectory, frame: Option<usize>) -> Result<BoundReport> {
    let t = || frame.context("frame length required");
    Ok(match check {
        CheckName::QueueBand => verify_queue_band(traj),
        CheckName::Dynamics => dynamics_report(traj),
        CheckName::Drift => verify_drift_bound(traj),
        CheckName::FrameDrift => verify_frame_drift(traj, t()?)?,
        CheckName::SlotOptimality => verify_slot_optimality(traj, &feasible_alternatives(traj)?)?,
        CheckName::FrameLemma => frame_lemma_report(traj, t()?)?,
        CheckName::LookaheadProfit => lookahead_profit_report(traj, t()?)?,
        CheckName::IidProfit | CheckName::MarkovProfit => bail!("{} is a statistical check", check.as_str()),
    })
}

/// Inputs of an in-expectation bound, fixed before the runs.
#[derive(Debug, Clone, Serialize)]
pub struct StatisticalPlan {
    pub check: CheckName,
    pub phi_opt: f64,
    pub constants: BoundConstants,
    /// Slots each replication is averaged over.
    pub slots: usize,
    #[serde(rename = "M")]
    pub frames: usize,
    pub l0: f64,
}

impl StatisticalPlan {
    pub fn new(
        check: CheckName,
        spec: &MarketSpec,
        params: &TraderParams,
        source: &PriceSource,
        horizon: usize,
        frame: Option<usize>,
    ) -> Result<Self> {
        let l0 = ratio128_to_f64(&lyapunov(&params.initial_queue, &params.theta_ratios()));
        let v = params.v.to_f64();
        match (check, source) {
            (CheckName::IidProfit, PriceSource::Iid(dist)) => Ok(StatisticalPlan {
                check,
                phi_opt: solve_phi_opt(spec, dist)?.phi_opt,
                constants: compute_constants(spec, 1, 0.0)?,
                slots: horizon,
                frames: horizon,
                l0,
            }),
            (CheckName::MarkovProfit, PriceSource::Markov { model, .. }) => {
                let sol = solve_phi_opt(spec, &stationary_distribution(model)?)?;
                let policy = drift_rebalance(spec, &sol);
                let constants_for = |t: usize| -> Result<BoundConstants> {
                    let eps = markov_memory_epsilon(spec, model, &policy, t)?.epsilon;
                    Ok(compute_constants(spec, t, eps)?)
                };
                let (t, constants) = match frame {
                    Some(t) => (t, constants_for(t)?),
                    None => {
                        // the window length giving the tightest bound
                        let mut best: Option<(f64, usize, BoundConstants)> = None;
                        for t in 1..=horizon.min(MAX_AUTO_FRAME) {
                            let c = constants_for(t)?;
                            let rhs = thm2_rhs(sol.phi_opt, &c, v, horizon / t, l0);
                            if best.as_ref().is_none_or(|b| rhs > b.0) {
                                best = Some((rhs, t, c));
                            }
                        }
                        let (_, t, c) = best.expect("horizon is at least one slot");
                        (t, c)
                    }
                };
                let frames = horizon / t;
                Ok(StatisticalPlan {
                    check,
                    phi_opt: sol.phi_opt,
                    constants,
                    slots: frames * t,
                    frames,
                    l0,
                })
            }
            _ => bail!("{} does not apply to this price source", check.as_str()),
        }
    }

    /// The per-replication statistic: average slot profit over `slots`.
    pub fn sample(&self, traj: &Trajectory) -> Result<f64> {
        Ok(time_avg_profit(traj, self.slots)?)
    }

    pub fn judge(&self, samples: &[f64], v: f64) -> Result<BoundReport> {
        Ok(match self.check {
            CheckName::IidProfit => verify_thm1_profit(samples, self.phi_opt, &self.constants, v, self.l0, self.slots)?,
            _ => verify_thm2_profit(samples, self.phi_opt, &self.constants, v, self.frames, self.l0)?,
        })
    }
}

/// Merges per-replication reports of one check, tagging each with its replication.
pub fn merge_replications(check: CheckName, reports: Vec<BoundReport>) -> Result<CheckOutcome> {
    let report = BoundReport::merge(reports.into_iter().enumerate().map(|(k, r)| r.with_replication(k)))
        .context("no replications to merge")?;
    Ok(CheckOutcome {
        name: check,
        statistical: false,
        report,
    })
}

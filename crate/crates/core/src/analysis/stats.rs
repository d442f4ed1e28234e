//! Ensemble statistics and the in-expectation profit bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trader::Trajectory;

use super::{BoundConstants, BoundReport, Locus, Verdict};

/// Fewest replications accepted by the statistical checks.
pub const MIN_REPLICATIONS: usize = 30;

/// Standard errors subtracted from a bound before comparing the ensemble mean.
const MARGIN_SIGMAS: f64 = 3.0;

/// Two-sided 95% normal quantile for the reported interval.
const CI_Z: f64 = 1.959_963_984_540_054;

/// Average slot profit over the first `t` slots, in dollars. The startup
/// purchase is not a slot profit and is excluded.
pub fn time_avg_profit(traj: &Trajectory, t: usize) -> Result<f64> {
    if t == 0 || t > traj.len() {
        return Err(Error::Range(format!(
            "averaging window of {t} slots on a trajectory of {}",
            traj.len()
        )));
    }
    let total: crate::money::Money = traj.records[..t].iter().map(|r| r.profit).sum();
    Ok(total.as_dollars() / t as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStat {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation across replications.
    pub std_dev: f64,
    /// Standard error of the mean.
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl EnsembleStat {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::StatisticalPower { have: 0, need: 1 });
        }
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std_dev = if n > 1 {
            (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let std_err = std_dev / (n as f64).sqrt();
        Ok(EnsembleStat {
            n,
            mean,
            std_dev,
            std_err,
            ci_low: mean - CI_Z * std_err,
            ci_high: mean + CI_Z * std_err,
        })
    }

    pub fn from_trajectories(runs: &[Trajectory], t: usize) -> Result<Self> {
        let samples = runs.iter().map(|r| time_avg_profit(r, t)).collect::<Result<Vec<_>>>()?;
        Self::from_samples(&samples)
    }
}

/// Right side of the i.i.d. bound: `phi_opt - B/V - L(Q(0)) / (V t)`.
pub fn thm1_rhs(phi_opt: f64, constants: &BoundConstants, v: f64, l0: f64, t: usize) -> f64 {
    phi_opt - constants.b / v - l0 / (v * t as f64)
}

/// Right side of the Markov bound:
/// `phi_opt - C2 eps - C1 T / V - L(Q(0)) / (V M T)`.
pub fn thm2_rhs(phi_opt: f64, constants: &BoundConstants, v: f64, m: usize, l0: f64) -> f64 {
    let t = constants.t as f64;
    phi_opt - constants.c2 * constants.epsilon - constants.c1 * t / v - l0 / (v * m as f64 * t)
}

fn judge(check: &str, samples: &[f64], rhs: f64) -> Result<BoundReport> {
    if samples.len() < MIN_REPLICATIONS {
        return Err(Error::StatisticalPower {
            have: samples.len(),
            need: MIN_REPLICATIONS,
        });
    }
    let stat = EnsembleStat::from_samples(samples)?;
    let margin = MARGIN_SIGMAS * stat.std_err;
    let slack = stat.mean + margin - rhs;
    let verdict = if slack < 0.0 {
        Verdict::Fail
    } else if rhs < 0.0 {
        Verdict::VacuousPass
    } else {
        Verdict::Pass
    };
    // the replication whose average sits furthest below the bound
    let worst = samples
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i);
    Ok(BoundReport {
        check: check.to_string(),
        verdict,
        slack,
        slack_exact: None,
        locus: worst.map(|i| Locus {
            replication: Some(i),
            ..Locus::default()
        }),
        evaluated: samples.len(),
        detail: Some(format!(
            "mean {:.6} (95% CI {:.6}..{:.6}, n = {}), bound {:.6}, margin {:.6}",
            stat.mean, stat.ci_low, stat.ci_high, stat.n, rhs, margin
        )),
    })
}

/// In-expectation bound for i.i.d. prices. `samples` holds one time-average
/// profit over `t` slots per independent replication.
pub fn verify_thm1_profit(
    samples: &[f64],
    phi_opt: f64,
    constants: &BoundConstants,
    v: f64,
    l0: f64,
    t: usize,
) -> Result<BoundReport> {
    judge("iid_profit", samples, thm1_rhs(phi_opt, constants, v, l0, t))
}

/// In-expectation bound for Markov prices over `M` frames of `constants.t`
/// slots with memory deviation `constants.epsilon`.
pub fn verify_thm2_profit(
    samples: &[f64],
    phi_opt: f64,
    constants: &BoundConstants,
    v: f64,
    m: usize,
    l0: f64,
) -> Result<BoundReport> {
    judge("markov_profit", samples, thm2_rhs(phi_opt, constants, v, m, l0))
}

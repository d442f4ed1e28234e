//! Decaying-memory constants of a Markov price chain.
//!
//! For a price-only policy and a window of `T` slots, the memory deviation is
//! the worst gap, over the chain state preceding the window, between the
//! window's conditional average drift (or profit) and its stationary value.
//! Any history fixes a distribution over that state, and the gap of a mixture
//! is at most the worst pure gap, so the maximum over states covers every
//! history.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketSpec;
use crate::prices::{stream_rng, MarkovPriceModel};

use super::PonlySolution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryProfile {
    #[serde(rename = "T")]
    pub t: usize,
    /// `max(drift_deviation, profit_deviation)`.
    pub epsilon: f64,
    /// Worst `|(1/T) sum E[A_n - mu_n | state]|` over stocks and states.
    pub drift_deviation: f64,
    /// Worst `|phi - (1/T) sum E[profit | state]|` in dollars.
    pub profit_deviation: f64,
    /// Chain state attaining the worst deviation.
    pub worst_state: usize,
}

/// Conditional profit and drift of the policy in each chain state.
fn per_state(spec: &MarketSpec, model: &MarkovPriceModel, sol: &PonlySolution) -> Result<Vec<(f64, Vec<f64>)>> {
    model
        .states()
        .iter()
        .map(|p| {
            let k = sol
                .prices
                .iter()
                .position(|q| q == p)
                .ok_or_else(|| Error::structural(format!("policy has no entry for chain price {p:?}")))?;
            Ok(sol.conditional(spec, k))
        })
        .collect()
}

fn profile(t: usize, phi: f64, sums: Vec<(f64, Vec<f64>)>) -> MemoryProfile {
    let mut out = MemoryProfile {
        t,
        epsilon: 0.0,
        drift_deviation: 0.0,
        profit_deviation: 0.0,
        worst_state: 0,
    };
    for (s, (profit, drift)) in sums.into_iter().enumerate() {
        let pd = (phi - profit / t as f64).abs();
        let dd = drift.iter().map(|d| (d / t as f64).abs()).fold(0.0, f64::max);
        out.profit_deviation = out.profit_deviation.max(pd);
        out.drift_deviation = out.drift_deviation.max(dd);
        if pd.max(dd) > out.epsilon {
            out.epsilon = pd.max(dd);
            out.worst_state = s;
        }
    }
    out
}

/// Exact deviation from powers of the transition matrix. The chain steps
/// before each emitted price, so slot `k` of the window is distributed as row
/// `s` of `P^(k+1)`.
pub fn markov_memory_epsilon(
    spec: &MarketSpec,
    model: &MarkovPriceModel,
    sol: &PonlySolution,
    t: usize,
) -> Result<MemoryProfile> {
    if t == 0 {
        return Err(Error::Range("T must be positive".into()));
    }
    let cond = per_state(spec, model, sol)?;
    let phi = sol.policy_profit(spec);
    let m = model.len();
    let p = model.transition();
    let sums = (0..m)
        .map(|s0| {
            let mut dist = vec![0.0; m];
            dist[s0] = 1.0;
            let mut profit = 0.0;
            let mut drift = vec![0.0; spec.n()];
            for _ in 0..t {
                let mut next = vec![0.0; m];
                for (i, &w) in dist.iter().enumerate() {
                    for (j, &pij) in p[i].iter().enumerate() {
                        next[j] += w * pij;
                    }
                }
                dist = next;
                for (j, &w) in dist.iter().enumerate() {
                    profit += w * cond[j].0;
                    for (d, x) in drift.iter_mut().zip(&cond[j].1) {
                        *d += w * x;
                    }
                }
            }
            (profit, drift)
        })
        .collect();
    Ok(profile(t, phi, sums))
}

/// Monte Carlo estimate of the same deviation from `reps` simulated windows per
/// starting state.
pub fn markov_memory_epsilon_mc(
    spec: &MarketSpec,
    model: &MarkovPriceModel,
    sol: &PonlySolution,
    t: usize,
    reps: usize,
    seed: u64,
) -> Result<MemoryProfile> {
    if t == 0 || reps == 0 {
        return Err(Error::Range("T and the replication count must be positive".into()));
    }
    let cond = per_state(spec, model, sol)?;
    let phi = sol.policy_profit(spec);
    let p = model.transition();
    let sums = (0..model.len())
        .map(|s0| {
            let mut rng = stream_rng(seed, s0 as u64);
            let mut profit = 0.0;
            let mut drift = vec![0.0; spec.n()];
            for _ in 0..reps {
                let mut s = s0;
                for _ in 0..t {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut next = p[s].len() - 1;
                    for (j, &w) in p[s].iter().enumerate() {
                        acc += w;
                        if u < acc {
                            next = j;
                            break;
                        }
                    }
                    s = next;
                    profit += cond[s].0;
                    for (d, x) in drift.iter_mut().zip(&cond[s].1) {
                        *d += x;
                    }
                }
            }
            let r = reps as f64;
            (profit / r, drift.into_iter().map(|d| d / r).collect())
        })
        .collect();
    Ok(profile(t, phi, sums))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{BudgetMode, PriceVector, StockSpec};
    use crate::money::Money;
    use crate::oracles::{drift_rebalance, solve_phi_opt};
    use crate::prices::stationary_distribution;

    fn setup(stay: f64) -> (MarketSpec, MarkovPriceModel, PonlySolution) {
        let spec = MarketSpec::new(vec![StockSpec::new(1, Money::from_cents(200))], BudgetMode::Unconstrained).unwrap();
        let model =
            MarkovPriceModel::two_state(PriceVector::from_cents(&[100]), PriceVector::from_cents(&[200]), stay, stay).unwrap();
        let sol = solve_phi_opt(&spec, &stationary_distribution(&model).unwrap()).unwrap();
        let sol = drift_rebalance(&spec, &sol);
        (spec, model, sol)
    }

    #[test]
    fn iid_chain_has_no_memory() {
        let (spec, model, sol) = setup(0.5);
        let prof = markov_memory_epsilon(&spec, &model, &sol, 1).unwrap();
        assert!(prof.epsilon < 1e-12);
    }

    #[test]
    fn symmetric_chain_closed_form() {
        // Buy at $1, sell at $2: profit -1 / +2 and drift +1 / -1 in states 0 / 1,
        // i.e. -1.5 / +1.5 around the stationary profit 0.5. From state s the k-th
        // slot is in state s with probability (1 + r^k)/2, r = 2 stay - 1, so the
        // window averages deviate by g = (1/T) sum_{k=1..T} r^k for the drift and
        // 1.5 g for the profit.
        let stay = 0.7;
        let (spec, model, sol) = setup(stay);
        let r: f64 = 2.0 * stay - 1.0;
        for t in [1usize, 2, 5, 20] {
            let geo: f64 = (1..=t).map(|k| r.powi(k as i32)).sum::<f64>() / t as f64;
            let prof = markov_memory_epsilon(&spec, &model, &sol, t).unwrap();
            assert!((prof.drift_deviation - geo).abs() < 1e-12, "T={t}");
            assert!((prof.profit_deviation - 1.5 * geo).abs() < 1e-12, "T={t}");
            assert!((prof.epsilon - 1.5 * geo).abs() < 1e-12);
        }
    }

    #[test]
    fn monte_carlo_agrees() {
        let (spec, model, sol) = setup(0.8);
        let exact = markov_memory_epsilon(&spec, &model, &sol, 6).unwrap();
        let mc = markov_memory_epsilon_mc(&spec, &model, &sol, 6, 40_000, 1).unwrap();
        assert!((exact.epsilon - mc.epsilon).abs() < 0.02);
    }
}

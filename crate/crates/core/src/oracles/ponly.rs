//! Best stationary price-only policy.
//!
//! A price-only policy picks, for each price vector `p` in the support, a
//! distribution `q(.|p)` over the action set of `p`. Its virtual drift for
//! stock `n` is `sum_p pi(p) sum_a q(a|p) (A_n - mu_n)` and its profit is the
//! same average of the action profits. The best profit over policies with
//! non-negative drift is a linear program over a product of simplices.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::market::{profit_unchecked, MarketSpec, PriceVector, TradeDecision};
use crate::prices::PriceDistribution;

use super::enumerate_actions_with;
use super::simplex::{LpNum, LpProblem};

/// Problems with fewer columns than this are pivoted in exact rationals.
const EXACT_COLUMNS: usize = 10_000;
const MAX_PIVOTS: usize = 1_000_000;
const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub action: TradeDecision,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PonlySolution {
    pub prices: Vec<PriceVector>,
    pub pi: Vec<f64>,
    /// Actions with positive probability, per support price.
    pub policy: Vec<Vec<PolicyEntry>>,
    /// Dollars per slot.
    pub phi_opt: f64,
    /// Exact optimum in dollars when the LP was pivoted in rationals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_opt_exact: Option<String>,
    pub drifts: Vec<f64>,
    pub exact: bool,
    pub pivots: usize,
}

impl PonlySolution {
    /// Expected profit (dollars) and drift per stock when the price is `prices[k]`.
    pub fn conditional(&self, spec: &MarketSpec, k: usize) -> (f64, Vec<f64>) {
        let mut profit = 0.0;
        let mut drift = vec![0.0; spec.n()];
        for e in &self.policy[k] {
            profit += e.prob * profit_unchecked(spec, &self.prices[k], &e.action).as_dollars();
            for (d, net) in drift.iter_mut().zip(e.action.net()) {
                *d += e.prob * net as f64;
            }
        }
        (profit, drift)
    }

    /// Average profit of the stored policy, in dollars per slot.
    pub fn policy_profit(&self, spec: &MarketSpec) -> f64 {
        (0..self.prices.len()).map(|k| self.pi[k] * self.conditional(spec, k).0).sum()
    }

    pub fn policy_drifts(&self, spec: &MarketSpec) -> Vec<f64> {
        let mut out = vec![0.0; spec.n()];
        for k in 0..self.prices.len() {
            for (o, d) in out.iter_mut().zip(self.conditional(spec, k).1) {
                *o += self.pi[k] * d;
            }
        }
        out
    }

    /// Largest deviation of any per-price distribution from summing to one.
    pub fn simplex_residual(&self) -> f64 {
        self.policy
            .iter()
            .map(|row| (row.iter().map(|e| e.prob).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Maximizes average profit over price-only policies with non-negative drift.
pub fn solve_phi_opt(spec: &MarketSpec, dist: &PriceDistribution) -> Result<PonlySolution> {
    solve_phi_opt_with(spec, dist, &Limits::from_env())
}

pub fn solve_phi_opt_with(spec: &MarketSpec, dist: &PriceDistribution, limits: &Limits) -> Result<PonlySolution> {
    dist.validate_for(spec)?;
    let sets = dist
        .support()
        .iter()
        .map(|p| enumerate_actions_with(spec, p, limits))
        .collect::<Result<Vec<_>>>()?;
    let columns: usize = sets.iter().map(|s| s.len()).sum::<usize>() + spec.n();
    if columns < EXACT_COLUMNS {
        solve::<BigRational>(spec, dist, &sets, true)
    } else {
        solve::<f64>(spec, dist, &sets, false)
    }
}

fn solve<T: LpNum + std::fmt::Display>(
    spec: &MarketSpec,
    dist: &PriceDistribution,
    sets: &[super::ActionSet],
    exact: bool,
) -> Result<PonlySolution> {
    let n = spec.n();
    let k_count = sets.len();
    let raw: Vec<T> = dist.probs().iter().map(|&p| T::from_f64(p)).collect();
    let total = raw.iter().fold(T::zero(), |a, b| a + b.clone());
    let pi: Vec<T> = raw.into_iter().map(|p| p / total.clone()).collect();
    let offsets: Vec<usize> = sets
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.len();
            Some(o)
        })
        .collect();
    let action_cols = offsets.last().map_or(0, |o| o + sets[k_count - 1].len());
    let width = action_cols + n;
    let rows = k_count + n;
    let mut a = vec![vec![T::zero(); width]; rows];
    let mut c = vec![T::zero(); width];
    for (k, set) in sets.iter().enumerate() {
        let profits = set.profits(spec);
        for (j, action) in set.actions.iter().enumerate() {
            let col = offsets[k] + j;
            a[k][col] = T::one();
            c[col] = pi[k].clone() * T::from_i64(profits[j].cents());
            for (s, net) in action.net().enumerate() {
                if net != 0 {
                    // sum pi q (mu - A) + slack = 0
                    a[k_count + s][col] = pi[k].clone() * T::from_i64(-net);
                }
            }
        }
    }
    for s in 0..n {
        a[k_count + s][action_cols + s] = T::one();
    }
    let mut b = vec![T::one(); k_count];
    b.extend((0..n).map(|_| T::zero()));
    // the zero decision heads every action set
    let mut basis: Vec<usize> = offsets.clone();
    basis.extend((0..n).map(|s| action_cols + s));
    let sol = LpProblem { a, b, c, basis }.maximize(MAX_PIVOTS)?;

    let policy: Vec<Vec<PolicyEntry>> = sets
        .iter()
        .enumerate()
        .map(|(k, set)| {
            set.actions
                .iter()
                .enumerate()
                .filter_map(|(j, action)| {
                    let q = &sol.x[offsets[k] + j];
                    q.is_pos().then(|| PolicyEntry {
                        action: action.clone(),
                        prob: q.to_f64(),
                    })
                })
                .collect()
        })
        .collect();
    let cents_per_dollar = T::from_i64(100);
    let phi = sol.objective.clone() / cents_per_dollar;
    let mut out = PonlySolution {
        prices: sets.iter().map(|s| s.price.clone()).collect(),
        pi: pi.iter().map(|p| p.to_f64()).collect(),
        policy,
        phi_opt: phi.to_f64(),
        phi_opt_exact: exact.then(|| phi.to_string()),
        drifts: Vec::new(),
        exact,
        pivots: sol.pivots,
    };
    out.drifts = out.policy_drifts(spec);
    if out.phi_opt < -TOL {
        return Err(Error::Numerical {
            message: "price-only optimum is negative".into(),
            residual: out.phi_opt,
        });
    }
    if out.drifts.iter().any(|&d| d < -TOL) || out.simplex_residual() > TOL {
        return Err(Error::Numerical {
            message: "price-only solution violates its constraints".into(),
            residual: out.simplex_residual(),
        });
    }
    Ok(out)
}

fn merge(entries: Vec<PolicyEntry>) -> Vec<PolicyEntry> {
    let mut out: Vec<PolicyEntry> = Vec::with_capacity(entries.len());
    for e in entries {
        if e.prob <= 0.0 {
            continue;
        }
        match out.iter_mut().find(|o| o.action == e.action) {
            Some(o) => o.prob += e.prob,
            None => out.push(e),
        }
    }
    out
}

/// Thins the purchases of every stock with positive drift so its drift
/// becomes zero: each purchase of stock `n` is kept with probability
/// `beta_n / alpha_n` (average sales over average purchases) and dropped
/// otherwise. Dropping purchases never lowers profit.
pub fn drift_rebalance(spec: &MarketSpec, solution: &PonlySolution) -> PonlySolution {
    let mut out = solution.clone();
    for n in 0..spec.n() {
        let mut alpha = 0.0;
        let mut beta = 0.0;
        for (k, row) in out.policy.iter().enumerate() {
            for e in row {
                alpha += out.pi[k] * e.prob * e.action.buys[n] as f64;
                beta += out.pi[k] * e.prob * e.action.sells[n] as f64;
            }
        }
        if alpha - beta <= TOL {
            continue;
        }
        assert!(alpha > 0.0, "positive drift needs purchases");
        let keep = beta / alpha;
        for row in out.policy.iter_mut() {
            let mut next = Vec::with_capacity(row.len() * 2);
            for e in row.drain(..) {
                if e.action.buys[n] > 0 {
                    let mut dropped = e.action.clone();
                    dropped.buys[n] = 0;
                    next.push(PolicyEntry { action: e.action, prob: e.prob * keep });
                    next.push(PolicyEntry { action: dropped, prob: e.prob * (1.0 - keep) });
                } else {
                    next.push(e);
                }
            }
            *row = merge(next);
        }
    }
    out.drifts = out.policy_drifts(spec);
    out.phi_opt = out.policy_profit(spec);
    out.phi_opt_exact = None;
    out
}

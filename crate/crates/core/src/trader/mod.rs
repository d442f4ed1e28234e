//! The per-slot dynamic trading algorithm.
//!
//! Each slot the trader observes its share queues `Q` and the prices `p` and
//! picks sales `mu` and purchases `A` minimizing
//!
//! ```text
//!   sum_n [theta_n - Q_n - V p_n] mu_n + V s_n(mu_n)
//! + sum_n [Q_n - theta_n + V p_n] A_n  + V b_n(A_n)
//! ```
//!
//! which is `-V * profit - sum_n (Q_n - theta_n)(mu_n - A_n)`. Sales decouple
//! per stock; purchases couple through the budget and are handled by one of
//! three solvers (exact knapsack, greedy ratio relaxation, share-count budget).
//!
//! All objective values are integers: money is in cents and the objective is
//! multiplied by a common denominator of `V / 100` and the targets, so ties
//! are exact and resolved deterministically toward smaller trades.

mod backtest;
mod buy;
mod scaling;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::market::{profit_unchecked, MarketSpec, PortfolioState, PriceVector, StockSpec, TradeDecision};
use crate::money::{widen, Money, Rational, CENTS_PER_DOLLAR};

pub use backtest::{
    placeholder_wrap, run_backtest, startup_purchase_cost, Backtest, RunTotals, SlotRecord, Trajectory,
    TrajectorySummary,
};
pub use buy::{buy_decision_exact, buy_decision_greedy, buy_decision_share_budget, buy_objective};
pub use scaling::{scale_spec, scaled_windows_run, ScaledRun, ScalingPlan, WindowStat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuySolver {
    /// Exact minimizer: per-stock when unconstrained, knapsack DP under a money
    /// budget, share-budget solver under a share budget.
    #[default]
    Exact,
    /// Ratio-greedy relaxation that may overshoot the money budget by one share.
    Greedy,
    /// Solver for the share-count budget.
    ShareBudget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraderParams {
    #[serde(rename = "V")]
    pub v: Rational,
    pub theta: Vec<Rational>,
    pub initial_queue: Vec<i64>,
    #[serde(default)]
    pub placeholder: bool,
    #[serde(default)]
    pub buy_solver: BuySolver,
    /// Set when `theta` differs from `V p_max + 2 mu_max`.
    #[serde(default)]
    pub theta_overridden: bool,
}

/// `theta_n = V p_max + 2 mu_max` (V in shares per dollar).
pub fn compute_theta(spec: &MarketSpec, v: Ratio<i64>) -> Vec<Ratio<i64>> {
    spec.stocks.iter().map(|s| stock_theta(s, v)).collect()
}

fn stock_theta(s: &StockSpec, v: Ratio<i64>) -> Ratio<i64> {
    v * Ratio::new(s.p_max.cents(), CENTS_PER_DOLLAR) + Ratio::from_integer(2 * s.mu_max)
}

/// `V p_max` for each stock.
pub(crate) fn v_pmax(spec: &MarketSpec, v: Ratio<i64>) -> Vec<Ratio<i64>> {
    spec.stocks
        .iter()
        .map(|s| v * Ratio::new(s.p_max.cents(), CENTS_PER_DOLLAR))
        .collect()
}

impl TraderParams {
    /// Default parameters: targets from `V`, starting queues at `mu_max`, exact buying.
    pub fn new(spec: &MarketSpec, v: Ratio<i64>) -> Result<Self> {
        if v <= Ratio::from_integer(0) {
            return Err(Error::structural("V must be positive"));
        }
        Ok(TraderParams {
            v: Rational(v),
            theta: compute_theta(spec, v).into_iter().map(Rational).collect(),
            initial_queue: spec.mu_max(),
            placeholder: false,
            buy_solver: BuySolver::Exact,
            theta_overridden: false,
        })
    }

    pub fn with_v_int(spec: &MarketSpec, v: i64) -> Result<Self> {
        TraderParams::new(spec, Ratio::from_integer(v))
    }

    pub fn with_initial_queue(mut self, queue: Vec<i64>) -> Self {
        self.initial_queue = queue;
        self
    }

    pub fn with_solver(mut self, solver: BuySolver) -> Self {
        self.buy_solver = solver;
        self
    }

    /// Replaces the targets; the run no longer carries the queue-band guarantee.
    pub fn with_theta(mut self, theta: Vec<Ratio<i64>>) -> Self {
        self.theta = theta.into_iter().map(Rational).collect();
        self.theta_overridden = true;
        self
    }

    pub fn v(&self) -> Ratio<i64> {
        self.v.0
    }

    pub fn theta_ratios(&self) -> Vec<Ratio<i64>> {
        self.theta.iter().map(|t| t.0).collect()
    }

    pub fn validate(&self, spec: &MarketSpec) -> Result<()> {
        if self.v.0 <= Ratio::from_integer(0) {
            return Err(Error::structural("V must be positive"));
        }
        spec.check_len(self.theta.len(), "theta")?;
        spec.check_len(self.initial_queue.len(), "initial queue")?;
        if self.initial_queue.iter().any(|&q| q < 0) {
            return Err(Error::structural("initial queue must be non-negative"));
        }
        Ok(())
    }

    /// Queue band `[mu_max, V p_max + 3 mu_max]` per stock, exact.
    pub fn queue_band(&self, spec: &MarketSpec) -> Vec<(Ratio<i64>, Ratio<i64>)> {
        v_pmax(spec, self.v.0)
            .into_iter()
            .zip(&spec.stocks)
            .map(|(vp, s)| {
                (
                    Ratio::from_integer(s.mu_max),
                    vp + Ratio::from_integer(3 * s.mu_max),
                )
            })
            .collect()
    }

    /// Default targets and an initial queue inside the band.
    pub fn is_conforming(&self, spec: &MarketSpec) -> bool {
        !self.theta_overridden
            && self.theta_ratios() == compute_theta(spec, self.v.0)
            && self
                .initial_queue
                .iter()
                .zip(self.queue_band(spec))
                .all(|(&q, (lo, hi))| Ratio::from_integer(q) >= lo && Ratio::from_integer(q) <= hi)
    }
}

/// The per-slot objective `-V phi - sum (Q - theta)(mu - A)` in integer units
/// of `1 / scale`.
#[derive(Debug, Clone)]
pub struct SlotObjective {
    scale: i128,
    /// `V * scale / 100`: weight of one cent.
    v_cent: i128,
    /// `theta_n * scale`.
    theta: Vec<i128>,
}

impl SlotObjective {
    pub fn new(params: &TraderParams) -> Self {
        let v = widen(params.v.0);
        let theta: Vec<Ratio<i128>> = params.theta.iter().map(|t| widen(t.0)).collect();
        let mut scale: i128 = (*v.denom()) * CENTS_PER_DOLLAR as i128;
        for t in &theta {
            scale = scale.lcm(t.denom());
        }
        let v_cent = v.numer() * (scale / (v.denom() * CENTS_PER_DOLLAR as i128));
        let theta = theta.iter().map(|t| t.numer() * (scale / t.denom())).collect();
        SlotObjective { scale, v_cent, theta }
    }

    pub fn scale(&self) -> i128 {
        self.scale
    }

    /// Converts an objective value back to exact units.
    pub fn to_ratio(&self, value: i128) -> Ratio<i128> {
        Ratio::new(value, self.scale)
    }

    #[inline]
    pub(crate) fn sell_coef(&self, n: usize, queue: i64, price: Money) -> i128 {
        self.theta[n] - queue as i128 * self.scale - self.v_cent * price.cents() as i128
    }

    #[inline]
    pub(crate) fn buy_coef(&self, n: usize, queue: i64, price: Money) -> i128 {
        queue as i128 * self.scale - self.theta[n] + self.v_cent * price.cents() as i128
    }

    #[inline]
    pub(crate) fn fee(&self, cost: Money) -> i128 {
        self.v_cent * cost.cents() as i128
    }

    #[inline]
    pub fn sell_value(&self, spec: &MarketSpec, n: usize, queue: i64, price: Money, mu: i64) -> i128 {
        self.sell_coef(n, queue, price) * mu as i128 + self.fee(spec.stocks[n].sell_cost.eval(mu))
    }

    #[inline]
    pub fn buy_value(&self, spec: &MarketSpec, n: usize, queue: i64, price: Money, a: i64) -> i128 {
        self.buy_coef(n, queue, price) * a as i128 + self.fee(spec.stocks[n].buy_cost.eval(a))
    }

    /// Full objective of a decision.
    pub fn value(&self, spec: &MarketSpec, queue: &[i64], prices: &PriceVector, d: &TradeDecision) -> i128 {
        (0..spec.n())
            .map(|n| {
                self.sell_value(spec, n, queue[n], prices[n], d.sells[n])
                    + self.buy_value(spec, n, queue[n], prices[n], d.buys[n])
            })
            .sum()
    }
}

/// Sales that each stock may make: within `0..=min(mu_max, Q)` and covering the fee.
pub(crate) fn sell_choices(s: &StockSpec, price: Money, queue: i64) -> impl Iterator<Item = i64> + '_ {
    (0..=s.mu_max.min(queue.max(0))).filter(move |&mu| price.times(mu) >= s.sell_cost.eval(mu))
}

/// A trader bound to one market and parameter set.
#[derive(Debug, Clone)]
pub struct Trader<'a> {
    spec: &'a MarketSpec,
    params: &'a TraderParams,
    objective: SlotObjective,
    limits: Limits,
}

impl<'a> Trader<'a> {
    pub fn new(spec: &'a MarketSpec, params: &'a TraderParams) -> Result<Self> {
        params.validate(spec)?;
        Ok(Trader {
            spec,
            params,
            objective: SlotObjective::new(params),
            limits: Limits::from_env(),
        })
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn objective(&self) -> &SlotObjective {
        &self.objective
    }

    /// Per-stock sale minimizing the sell objective; ties go to the smaller sale.
    pub fn sell(&self, prices: &PriceVector, queue: &[i64]) -> Vec<i64> {
        self.spec
            .stocks
            .iter()
            .enumerate()
            .map(|(n, s)| {
                sell_choices(s, prices[n], queue[n])
                    .min_by_key(|&mu| (self.objective.sell_value(self.spec, n, queue[n], prices[n], mu), mu))
                    .unwrap_or(0)
            })
            .collect()
    }

    pub fn buy(&self, prices: &PriceVector, queue: &[i64]) -> Result<Vec<i64>> {
        buy::dispatch(self.params.buy_solver, &self.objective, self.spec, prices, queue, &self.limits)
    }

    pub fn decide(&self, prices: &PriceVector, queue: &[i64]) -> Result<TradeDecision> {
        self.spec.check_len(prices.len(), "price vector")?;
        self.spec.check_len(queue.len(), "queue")?;
        Ok(TradeDecision {
            sells: self.sell(prices, queue),
            buys: self.buy(prices, queue)?,
        })
    }

    pub fn step(&self, state: &PortfolioState, prices: &PriceVector) -> Result<(TradeDecision, Money, PortfolioState)> {
        let d = self.decide(prices, &state.queue)?;
        let profit = profit_unchecked(self.spec, prices, &d);
        let mut next = crate::market::apply_decision(state, &d);
        next.cumulative_profit += profit;
        Ok((d, profit, next))
    }
}

pub fn sell_decision(params: &TraderParams, spec: &MarketSpec, prices: &PriceVector, queue: &[i64]) -> Result<Vec<i64>> {
    let trader = Trader::new(spec, params)?;
    spec.check_len(prices.len(), "price vector")?;
    spec.check_len(queue.len(), "queue")?;
    Ok(trader.sell(prices, queue))
}

/// One slot: decide, post the slot profit and advance the queues.
pub fn trader_step(
    params: &TraderParams,
    spec: &MarketSpec,
    state: &PortfolioState,
    prices: &PriceVector,
) -> Result<(TradeDecision, Money, PortfolioState)> {
    Trader::new(spec, params)?.step(state, prices)
}

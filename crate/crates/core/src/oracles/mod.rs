//! Exact comparison baselines.
//!
//! - [`enumerate_actions`]: the finite per-price action set, without the
//!   ownership constraint
//! - [`solve_phi_opt`]: best stationary price-only policy, by linear programming
//! - [`lookahead_psi`]: best profit over a known price window that ends with
//!   non-negative net purchases
//! - [`brute_force_slot_min`]: exhaustive per-slot minimizer of the trader's
//!   objective, ownership included

mod lookahead;
mod memory;
mod ponly;
mod simplex;

use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::market::{profit_unchecked, BudgetMode, MarketSpec, PriceVector, TradeDecision};
use crate::money::Money;
use crate::trader::{SlotObjective, TraderParams};

pub use lookahead::{lookahead_frames, lookahead_psi, lookahead_psi_exhaustive, LookaheadResult};
pub use memory::{markov_memory_epsilon, markov_memory_epsilon_mc, MemoryProfile};
pub use ponly::{drift_rebalance, solve_phi_opt, PolicyEntry, PonlySolution};
pub use simplex::{LpNum, LpProblem, LpSolution};

/// All decisions feasible at one price vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSet {
    pub price: PriceVector,
    /// Starts with the zero decision.
    pub actions: Vec<TradeDecision>,
}

impl ActionSet {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn profits(&self, spec: &MarketSpec) -> Vec<Money> {
        self.actions.iter().map(|a| profit_unchecked(spec, &self.price, a)).collect()
    }
}

/// Per-stock `(A, mu)` pairs, optionally capping sales at a held queue.
fn stock_pairs(spec: &MarketSpec, prices: &PriceVector, queue: Option<&[i64]>) -> Vec<Vec<(i64, i64)>> {
    spec.stocks
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let sell_cap = queue.map_or(s.mu_max, |q| s.mu_max.min(q[n].max(0)));
            let sells: Vec<i64> = (0..=sell_cap)
                .filter(|&mu| prices[n].times(mu) >= s.sell_cost.eval(mu))
                .collect();
            sells
                .iter()
                .flat_map(|&mu| (0..=s.mu_max).map(move |a| (a, mu)))
                .collect()
        })
        .collect()
}

fn enumerate(
    spec: &MarketSpec,
    prices: &PriceVector,
    queue: Option<&[i64]>,
    limits: &Limits,
) -> Result<Vec<TradeDecision>> {
    spec.check_prices(prices)?;
    let pairs = stock_pairs(spec, prices, queue);
    let size = pairs
        .iter()
        .try_fold(1u128, |acc, p| acc.checked_mul(p.len() as u128))
        .unwrap_or(u128::MAX);
    if size > limits.actions {
        return Err(Error::Capacity {
            what: "action enumeration",
            required: size,
            cap: limits.actions,
            advice: "reduce mu_max or the number of stocks",
        });
    }
    let n = spec.n();
    let mut out = Vec::with_capacity(size as usize);
    let mut idx = vec![0usize; n];
    loop {
        let buys: Vec<i64> = (0..n).map(|i| pairs[i][idx[i]].0).collect();
        let feasible = match spec.budget {
            BudgetMode::Money(x) => buys.iter().zip(prices.iter()).map(|(&a, p)| p.times(a)).sum::<Money>() <= x,
            BudgetMode::Shares(total) => buys.iter().sum::<i64>() <= total,
            BudgetMode::Unconstrained => true,
        };
        if feasible {
            out.push(TradeDecision::new(buys, (0..n).map(|i| pairs[i][idx[i]].1).collect()));
        }
        let mut i = 0;
        loop {
            if i == n {
                return Ok(out);
            }
            idx[i] += 1;
            if idx[i] < pairs[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Every decision satisfying the trade limits, the fee rule and the budget at
/// `prices`. Sales are not limited by holdings.
pub fn enumerate_actions(spec: &MarketSpec, prices: &PriceVector) -> Result<ActionSet> {
    enumerate_actions_with(spec, prices, &Limits::from_env())
}

pub fn enumerate_actions_with(spec: &MarketSpec, prices: &PriceVector, limits: &Limits) -> Result<ActionSet> {
    Ok(ActionSet {
        price: prices.clone(),
        actions: enumerate(spec, prices, None, limits)?,
    })
}

/// Decisions feasible for a trader holding `queue`.
pub fn enumerate_slot_decisions(
    spec: &MarketSpec,
    prices: &PriceVector,
    queue: &[i64],
    limits: &Limits,
) -> Result<Vec<TradeDecision>> {
    spec.check_len(queue.len(), "queue")?;
    enumerate(spec, prices, Some(queue), limits)
}

/// Exhaustive minimizer of `-V phi - sum (Q - theta)(mu - A)` over every
/// feasible decision, with the trader's tie-break (fewer sales, then fewer
/// purchases, then purchases on lower-indexed stocks).
pub fn brute_force_slot_min(
    params: &TraderParams,
    spec: &MarketSpec,
    prices: &PriceVector,
    queue: &[i64],
) -> Result<TradeDecision> {
    params.validate(spec)?;
    let obj = SlotObjective::new(params);
    enumerate_slot_decisions(spec, prices, queue, &Limits::from_env())?
        .into_iter()
        .min_by_key(|d| {
            (
                obj.value(spec, queue, prices, d),
                d.sells.iter().sum::<i64>(),
                d.buys.iter().sum::<i64>(),
                Reverse(d.buys.clone()),
            )
        })
        .ok_or_else(|| Error::structural("no feasible decision"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{validate_decision, CostFunction, PortfolioState, StockSpec};
    use crate::trader::Trader;
    use rand::{Rng, SeedableRng};

    fn one(mu: i64, p_max: i64, budget: BudgetMode) -> MarketSpec {
        MarketSpec::new(vec![StockSpec::new(mu, Money::from_cents(p_max))], budget).unwrap()
    }

    #[test]
    fn full_grid_without_costs() {
        let spec = one(1, 100, BudgetMode::Unconstrained);
        let set = enumerate_actions(&spec, &PriceVector::from_cents(&[50])).unwrap();
        assert_eq!(set.len(), 4);
        assert!(set.actions[0].is_zero());
    }

    #[test]
    fn large_sell_fee_blocks_all_sales() {
        let mut spec = one(2, 100, BudgetMode::Unconstrained);
        spec.stocks[0].sell_cost = CostFunction::fixed(Money::from_cents(201));
        let set = enumerate_actions(&spec, &PriceVector::from_cents(&[100])).unwrap();
        assert!(set.actions.iter().all(|a| a.sells[0] == 0));
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn zero_budget_blocks_all_purchases() {
        let mut spec = one(2, 100, BudgetMode::Money(Money::from_cents(1)));
        spec.budget = BudgetMode::Money(Money::ZERO);
        let set = enumerate_actions(&spec, &PriceVector::from_cents(&[40])).unwrap();
        assert!(set.actions.iter().all(|a| a.buys[0] == 0));
    }

    #[test]
    fn every_action_is_feasible() {
        let spec = MarketSpec::new(
            vec![
                StockSpec::new(2, Money::from_cents(300)).with_costs(CostFunction::zero(), CostFunction::fixed(Money::from_cents(150))),
                StockSpec::new(3, Money::from_cents(200)),
            ],
            BudgetMode::Money(Money::from_cents(450)),
        )
        .unwrap();
        let p = PriceVector::from_cents(&[100, 150]);
        let set = enumerate_actions(&spec, &p).unwrap();
        let rich = PortfolioState::new(vec![100, 100]);
        for a in &set.actions {
            assert!(validate_decision(&spec, &p, &rich, a, true).unwrap().is_empty());
        }
        // stock 0 can sell only 2 (fee 1.50 > 1.00 for one share); stock 1 any
        let expected = 2 * 3 * 4 * 4;
        let within_budget = set.len();
        assert!(within_budget < expected);
    }

    #[test]
    fn capacity_error() {
        let spec = one(3, 100, BudgetMode::Unconstrained);
        let err = enumerate_actions_with(&spec, &PriceVector::from_cents(&[10]), &Limits::uniform(15)).unwrap_err();
        assert!(matches!(err, Error::Capacity { required: 16, .. }));
    }

    #[test]
    fn brute_force_edge_cases() {
        let mut spec = one(2, 100, BudgetMode::Unconstrained);
        spec.stocks[0].buy_cost = CostFunction::fixed(Money::from_cents(5_000));
        spec.stocks[0].sell_cost = CostFunction::fixed(Money::from_cents(5));
        let params = TraderParams::with_v_int(&spec, 10).unwrap();
        let d = brute_force_slot_min(&params, &spec, &PriceVector::from_cents(&[0]), &[2]).unwrap();
        assert!(d.is_zero());
        // holdings 0 and a buy fee that dominates: the zero decision is the only sensible choice
        let d = brute_force_slot_min(&params, &spec, &PriceVector::from_cents(&[100]), &[0]).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn trader_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..400 {
            let n = rng.gen_range(1..=2);
            let stocks: Vec<StockSpec> = (0..n)
                .map(|_| {
                    let mu = rng.gen_range(1..=3);
                    let p_max = rng.gen_range(1..=400);
                    let fee = |r: &mut rand_chacha::ChaCha8Rng| match r.gen_range(0..3) {
                        0 => CostFunction::zero(),
                        1 => CostFunction::linear(Money::from_cents(r.gen_range(0..20))),
                        _ => CostFunction::fixed(Money::from_cents(r.gen_range(0..200))),
                    };
                    StockSpec::new(mu, Money::from_cents(p_max)).with_costs(fee(&mut rng), fee(&mut rng))
                })
                .collect();
            let budget = match rng.gen_range(0..3) {
                0 => BudgetMode::Unconstrained,
                1 => BudgetMode::Money(Money::from_cents(rng.gen_range(1..800))),
                _ => BudgetMode::Shares(rng.gen_range(1..5)),
            };
            let spec = MarketSpec::new(stocks, budget).unwrap();
            let params = TraderParams::with_v_int(&spec, [1, 5, 40][rng.gen_range(0..3)]).unwrap();
            let trader = Trader::new(&spec, &params).unwrap();
            for _ in 0..10 {
                let p = PriceVector::new(spec.stocks.iter().map(|s| Money::from_cents(rng.gen_range(0..=s.p_max.cents()))).collect());
                let q: Vec<i64> = spec.stocks.iter().map(|_| rng.gen_range(0..40)).collect();
                let mine = trader.decide(&p, &q).unwrap();
                let oracle = brute_force_slot_min(&params, &spec, &p, &q).unwrap();
                let obj = trader.objective();
                assert_eq!(obj.value(&spec, &q, &p, &mine), obj.value(&spec, &q, &p, &oracle));
                assert_eq!(mine, oracle);
            }
        }
    }
}

//! Purchase solvers.
//!
//! Every solver minimizes `sum_n buy_value(n, A_n)` from [`SlotObjective`].
//! The exact solvers order candidate vectors by objective value, then by total
//! shares, then prefer more shares on lower-indexed stocks.

use std::cmp::Ordering;

use num_integer::Integer;

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::market::{BudgetMode, MarketSpec, PriceVector};

use super::{BuySolver, SlotObjective, TraderParams};

/// Objective value and share count; the order on this pair is the solver order.
type Key = (i128, i64);

fn add(a: Key, b: Key) -> Key {
    (a.0 + b.0, a.1 + b.1)
}

pub(crate) fn dispatch(
    solver: BuySolver,
    obj: &SlotObjective,
    spec: &MarketSpec,
    prices: &PriceVector,
    queue: &[i64],
    limits: &Limits,
) -> Result<Vec<i64>> {
    match (solver, &spec.budget) {
        (BuySolver::Exact, BudgetMode::Unconstrained) | (BuySolver::ShareBudget, BudgetMode::Unconstrained) => {
            Ok(per_stock(obj, spec, prices, queue))
        }
        (BuySolver::Exact, BudgetMode::Money(x)) => money_dp(obj, spec, prices, queue, x.cents(), limits),
        (BuySolver::Exact, BudgetMode::Shares(total)) | (BuySolver::ShareBudget, BudgetMode::Shares(total)) => {
            share_budget(obj, spec, prices, queue, *total, limits)
        }
        (BuySolver::ShareBudget, BudgetMode::Money(_)) => Err(Error::structural(
            "the share-budget solver needs a share budget or no budget",
        )),
        (BuySolver::Greedy, budget) => greedy(obj, spec, prices, queue, budget),
    }
}

fn values(obj: &SlotObjective, spec: &MarketSpec, prices: &PriceVector, queue: &[i64], n: usize) -> Vec<i128> {
    (0..=spec.stocks[n].mu_max)
        .map(|a| obj.buy_value(spec, n, queue[n], prices[n], a))
        .collect()
}

/// Sum of the purchase terms of the slot objective for `buys`.
pub fn buy_objective(obj: &SlotObjective, spec: &MarketSpec, prices: &PriceVector, queue: &[i64], buys: &[i64]) -> i128 {
    buys.iter()
        .enumerate()
        .map(|(n, &a)| obj.buy_value(spec, n, queue[n], prices[n], a))
        .sum()
}

/// Independent per-stock minimization; ties go to the smaller purchase.
fn per_stock(obj: &SlotObjective, spec: &MarketSpec, prices: &PriceVector, queue: &[i64]) -> Vec<i64> {
    (0..spec.n())
        .map(|n| {
            let vals = values(obj, spec, prices, queue, n);
            (0..vals.len()).min_by_key(|&a| (vals[a], a)).unwrap_or(0) as i64
        })
        .collect()
}

/// Bounded knapsack where stock `n` spends `weight[n]` per share out of `capacity`.
///
/// `suffix[n][w]` holds the best key over stocks `n..` with at most `w` spent.
/// Reconstruction walks stocks in index order taking the largest count that
/// still reaches the optimum, which favors lower-indexed stocks on ties.
fn knapsack(vals: &[Vec<i128>], weight: &[i64], capacity: i64, limits: &Limits) -> Result<Vec<i64>> {
    let n_stocks = vals.len();
    let width = capacity.max(0) as usize + 1;
    let cells = n_stocks as u128 * width as u128;
    if cells > limits.dp_cells {
        return Err(Error::Capacity {
            what: "budget knapsack table",
            required: cells,
            cap: limits.dp_cells,
            advice: "use the greedy buy solver for budgets of this size",
        });
    }
    let mut suffix: Vec<Vec<Key>> = vec![Vec::new(); n_stocks + 1];
    suffix[n_stocks] = vec![(0, 0); width];
    for n in (0..n_stocks).rev() {
        let next = &suffix[n + 1];
        let wt = weight[n] as usize;
        let table: Vec<Key> = (0..width)
            .map(|w| {
                let mut best = add((vals[n][0], 0), next[w]);
                for (a, &v) in vals[n].iter().enumerate().skip(1) {
                    let used = a * wt;
                    if used > w {
                        break;
                    }
                    let cand = add((v, a as i64), next[w - used]);
                    if cand < best {
                        best = cand;
                    }
                }
                best
            })
            .collect();
        suffix[n] = table;
    }
    let mut w = width - 1;
    let mut out = Vec::with_capacity(n_stocks);
    for n in 0..n_stocks {
        let target = suffix[n][w];
        let wt = weight[n] as usize;
        let a = (0..vals[n].len())
            .rev()
            .find(|&a| a * wt <= w && add((vals[n][a], a as i64), suffix[n + 1][w - a * wt]) == target)
            .expect("knapsack reconstruction follows the table");
        w -= a * wt;
        out.push(a as i64);
    }
    Ok(out)
}

fn money_dp(
    obj: &SlotObjective,
    spec: &MarketSpec,
    prices: &PriceVector,
    queue: &[i64],
    budget: i64,
    limits: &Limits,
) -> Result<Vec<i64>> {
    // The unconstrained minimizer is the unique best key whenever it is affordable.
    let free = per_stock(obj, spec, prices, queue);
    if free.iter().zip(prices.iter()).map(|(&a, p)| a * p.cents()).sum::<i64>() <= budget {
        return Ok(free);
    }
    let vals: Vec<Vec<i128>> = (0..spec.n()).map(|n| values(obj, spec, prices, queue, n)).collect();
    // Spending only moves in multiples of the price gcd, so the table can be
    // rescaled by it without changing which vectors are affordable.
    let g = prices.iter().fold(0i64, |g, p| g.gcd(&p.cents())).max(1);
    let weight: Vec<i64> = prices.iter().map(|p| p.cents() / g).collect();
    let reach: i64 = spec.stocks.iter().zip(&weight).map(|(s, w)| s.mu_max * w).sum();
    knapsack(&vals, &weight, (budget / g).min(reach), limits)
}

fn share_budget(
    obj: &SlotObjective,
    spec: &MarketSpec,
    prices: &PriceVector,
    queue: &[i64],
    total: i64,
    limits: &Limits,
) -> Result<Vec<i64>> {
    let reach: i64 = spec.stocks.iter().map(|s| s.mu_max).sum();
    let total = total.max(0);
    if total >= reach {
        return Ok(per_stock(obj, spec, prices, queue));
    }
    let rates: Option<Vec<_>> = spec.stocks.iter().map(|s| s.buy_cost.linear_rate()).collect();
    match rates {
        Some(rates) => {
            // Constant per-share value: fill the most negative stocks first.
            let per_share: Vec<i128> = (0..spec.n())
                .map(|n| obj.buy_coef(n, queue[n], prices[n]) + obj.fee(rates[n]))
                .collect();
            let mut order: Vec<usize> = (0..spec.n()).filter(|&n| per_share[n] < 0).collect();
            order.sort_by_key(|&n| (per_share[n], n));
            let mut out = vec![0; spec.n()];
            let mut left = total;
            for n in order {
                let take = spec.stocks[n].mu_max.min(left);
                out[n] = take;
                left -= take;
                if left == 0 {
                    break;
                }
            }
            Ok(out)
        }
        None => {
            let vals: Vec<Vec<i128>> = (0..spec.n()).map(|n| values(obj, spec, prices, queue, n)).collect();
            knapsack(&vals, &vec![1; spec.n()], total, limits)
        }
    }
}

/// `a / pa` against `b / pb`, where a zero price with a negative numerator is
/// minus infinity.
fn cmp_ratio(a: i128, pa: i64, b: i128, pb: i64) -> Ordering {
    match (pa == 0, pb == 0) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => (a * pb as i128).cmp(&(b * pa as i128)),
    }
}

/// Adds one share at a time to the stock with the most negative marginal
/// objective per dollar until none is negative or the budget is reached.
fn greedy(
    obj: &SlotObjective,
    spec: &MarketSpec,
    prices: &PriceVector,
    queue: &[i64],
    budget: &BudgetMode,
) -> Result<Vec<i64>> {
    if let Some(n) = spec.stocks.iter().position(|s| !s.buy_cost.is_concave(s.mu_max)) {
        return Err(Error::structural(format!(
            "greedy buying needs concave purchase costs; stock {n} is not concave"
        )));
    }
    let mut out = vec![0i64; spec.n()];
    let mut spent = 0i64;
    let mut shares = 0i64;
    loop {
        match *budget {
            BudgetMode::Money(x) if spent >= x.cents() => break,
            BudgetMode::Shares(total) if shares >= total => break,
            _ => {}
        }
        let mut best: Option<(usize, i128)> = None;
        for (n, s) in spec.stocks.iter().enumerate() {
            if out[n] >= s.mu_max {
                continue;
            }
            let a = out[n];
            let marginal =
                obj.buy_coef(n, queue[n], prices[n]) + obj.fee(s.buy_cost.eval(a + 1)) - obj.fee(s.buy_cost.eval(a));
            if marginal >= 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((m, mv)) => cmp_ratio(marginal, prices[n].cents(), mv, prices[m].cents()) == Ordering::Less,
            };
            if better {
                best = Some((n, marginal));
            }
        }
        let Some((n, _)) = best else { break };
        out[n] += 1;
        shares += 1;
        spent += prices[n].cents();
    }
    Ok(out)
}

pub fn buy_decision_exact(params: &TraderParams, spec: &MarketSpec, prices: &PriceVector, queue: &[i64]) -> Result<Vec<i64>> {
    solve(BuySolver::Exact, params, spec, prices, queue)
}

pub fn buy_decision_greedy(params: &TraderParams, spec: &MarketSpec, prices: &PriceVector, queue: &[i64]) -> Result<Vec<i64>> {
    solve(BuySolver::Greedy, params, spec, prices, queue)
}

pub fn buy_decision_share_budget(
    params: &TraderParams,
    spec: &MarketSpec,
    prices: &PriceVector,
    queue: &[i64],
) -> Result<Vec<i64>> {
    solve(BuySolver::ShareBudget, params, spec, prices, queue)
}

fn solve(solver: BuySolver, params: &TraderParams, spec: &MarketSpec, prices: &PriceVector, queue: &[i64]) -> Result<Vec<i64>> {
    params.validate(spec)?;
    spec.check_len(prices.len(), "price vector")?;
    spec.check_len(queue.len(), "queue")?;
    dispatch(solver, &SlotObjective::new(params), spec, prices, queue, &Limits::from_env())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{CostFunction, StockSpec};
    use crate::money::Money;
    use num_rational::Ratio;

    fn market(stocks: Vec<(i64, i64)>, budget: BudgetMode) -> MarketSpec {
        MarketSpec::new(
            stocks.into_iter().map(|(mu, p)| StockSpec::new(mu, Money::from_cents(p))).collect(),
            budget,
        )
        .unwrap()
    }

    /// Enumerates every purchase vector and keeps the best under the solver order.
    fn brute(obj: &SlotObjective, spec: &MarketSpec, prices: &PriceVector, queue: &[i64]) -> (i128, Vec<i64>) {
        let mut best: Option<(Key, Vec<i64>)> = None;
        let mut a = vec![0i64; spec.n()];
        loop {
            let feasible = match spec.budget {
                BudgetMode::Money(x) => a.iter().zip(prices.iter()).map(|(&k, p)| p.times(k)).sum::<Money>() <= x,
                BudgetMode::Shares(t) => a.iter().sum::<i64>() <= t,
                BudgetMode::Unconstrained => true,
            };
            if feasible {
                let key = (buy_objective(obj, spec, prices, queue, &a), a.iter().sum::<i64>());
                let better = match &best {
                    None => true,
                    Some((k, v)) => key < *k || (key == *k && a > *v),
                };
                if better {
                    best = Some((key, a.clone()));
                }
            }
            let mut i = 0;
            loop {
                if i == a.len() {
                    let (k, v) = best.unwrap();
                    return (k.0, v);
                }
                a[i] += 1;
                if a[i] <= spec.stocks[i].mu_max {
                    break;
                }
                a[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn no_purchase_above_target() {
        let spec = market(vec![(3, 500)], BudgetMode::Unconstrained);
        let params = TraderParams::with_v_int(&spec, 2).unwrap();
        // theta = 16
        for q in 17..30 {
            for p in [0, 100, 500] {
                assert_eq!(buy_decision_exact(&params, &spec, &PriceVector::from_cents(&[p]), &[q]).unwrap(), vec![0]);
            }
        }
    }

    #[test]
    fn fills_up_at_low_queue() {
        let spec = market(vec![(4, 1000)], BudgetMode::Money(Money::from_cents(4 * 700)));
        let params = TraderParams::with_v_int(&spec, 3).unwrap();
        let p = PriceVector::from_cents(&[700]);
        assert_eq!(buy_decision_exact(&params, &spec, &p, &[4]).unwrap(), vec![4]);
        let obj = SlotObjective::new(&params);
        assert_eq!(brute(&obj, &spec, &p, &[4]).1, vec![4]);
    }

    #[test]
    fn zero_budget_buys_nothing_at_positive_price() {
        // a market refuses x = 0, so the solver is driven directly
        let mut spec = market(vec![(5, 1000), (5, 1000)], BudgetMode::Money(Money::from_cents(1)));
        let params = TraderParams::with_v_int(&spec, 1).unwrap();
        let obj = SlotObjective::new(&params);
        let p = PriceVector::from_cents(&[2, 3]);
        assert_eq!(buy_decision_exact(&params, &spec, &p, &[5, 5]).unwrap(), vec![0, 0]);
        spec.budget = BudgetMode::Money(Money::ZERO);
        assert_eq!(dispatch(BuySolver::Exact, &obj, &spec, &p, &[5, 5], &Limits::default()).unwrap(), vec![0, 0]);
    }

    #[test]
    fn exact_matches_enumeration() {
        let mut spec = market(vec![(3, 400), (2, 250), (4, 120)], BudgetMode::Money(Money::from_cents(650)));
        spec.stocks[0].buy_cost = CostFunction::fixed(Money::from_cents(35));
        spec.stocks[2].buy_cost = CostFunction::table(
            [0, 10, 30, 31, 60].iter().map(|&c| Money::from_cents(c)).collect(),
        );
        let params = TraderParams::new(&spec, Ratio::new(5, 2)).unwrap();
        let obj = SlotObjective::new(&params);
        let limits = Limits::default();
        for seed in 0..300i64 {
            let p = PriceVector::from_cents(&[(seed * 91) % 401, (seed * 37) % 251, (seed * 13) % 121]);
            let q = [seed % 13, (seed / 3) % 11, (seed / 7) % 17];
            let got = dispatch(BuySolver::Exact, &obj, &spec, &p, &q, &limits).unwrap();
            let (val, vec) = brute(&obj, &spec, &p, &q);
            assert_eq!(buy_objective(&obj, &spec, &p, &q, &got), val);
            assert_eq!(got, vec, "tie-break differs at seed {seed}");
        }
    }

    #[test]
    fn share_budget_matches_enumeration() {
        for costs in [false, true] {
            let mut spec = market(vec![(3, 400), (2, 250), (4, 120)], BudgetMode::Shares(4));
            if costs {
                spec.stocks[1].buy_cost = CostFunction::fixed(Money::from_cents(50));
            } else {
                spec.stocks[1].buy_cost = CostFunction::linear(Money::from_cents(7));
            }
            let params = TraderParams::with_v_int(&spec, 2).unwrap();
            let obj = SlotObjective::new(&params);
            for seed in 0..200i64 {
                let p = PriceVector::from_cents(&[(seed * 91) % 401, (seed * 37) % 251, (seed * 13) % 121]);
                let q = [seed % 13, (seed / 3) % 9, (seed / 7) % 13];
                let got = dispatch(BuySolver::ShareBudget, &obj, &spec, &p, &q, &Limits::default()).unwrap();
                assert_eq!(got, brute(&obj, &spec, &p, &q).1, "seed {seed} costs {costs}");
            }
        }
    }

    #[test]
    fn share_budget_edges() {
        let spec = market(vec![(2, 100), (3, 100)], BudgetMode::Shares(5));
        let params = TraderParams::with_v_int(&spec, 10).unwrap();
        let p = PriceVector::from_cents(&[50, 20]);
        let q = [2, 3];
        let unconstrained = per_stock(&SlotObjective::new(&params), &spec, &p, &q);
        assert_eq!(buy_decision_share_budget(&params, &spec, &p, &q).unwrap(), unconstrained);
        let mut zero = spec.clone();
        zero.budget = BudgetMode::Shares(0);
        let obj = SlotObjective::new(&params);
        assert_eq!(share_budget(&obj, &zero, &p, &q, 0, &Limits::default()).unwrap(), vec![0, 0]);
        // one share: goes to the stock with the smaller per-share value
        let one = share_budget(&obj, &zero, &p, &q, 1, &Limits::default()).unwrap();
        assert_eq!(one, vec![0, 1]);
    }

    #[test]
    fn greedy_takes_smallest_ratio_first() {
        // theta = 1 + 2 = 3 with V=1, p_max=$1, mu_max=1; build coefficients (-10, -2) by queue choice
        let spec = market(vec![(5, 100), (5, 100)], BudgetMode::Money(Money::from_cents(100)));
        let params = TraderParams::with_v_int(&spec, 1).unwrap();
        // coef = Q - theta + V p = Q - 11 + 1 at p=$1
        let q = [0, 8];
        let p = PriceVector::from_cents(&[100, 100]);
        assert_eq!(buy_decision_greedy(&params, &spec, &p, &q).unwrap(), vec![1, 0]);
    }

    #[test]
    fn greedy_idle_when_no_negative_ratio() {
        let spec = market(vec![(2, 100), (2, 100)], BudgetMode::Money(Money::from_cents(1000)));
        let params = TraderParams::with_v_int(&spec, 1).unwrap();
        let p = PriceVector::from_cents(&[100, 100]);
        assert_eq!(buy_decision_greedy(&params, &spec, &p, &[20, 20]).unwrap(), vec![0, 0]);
    }

    #[test]
    fn greedy_takes_free_shares() {
        let spec = market(vec![(3, 100), (3, 100)], BudgetMode::Money(Money::from_cents(50)));
        let params = TraderParams::with_v_int(&spec, 1).unwrap();
        let p = PriceVector::from_cents(&[0, 40]);
        assert_eq!(buy_decision_greedy(&params, &spec, &p, &[3, 3]).unwrap(), vec![3, 2]);
    }

    #[test]
    fn greedy_rejects_convex_costs() {
        let mut spec = market(vec![(3, 100)], BudgetMode::Money(Money::from_cents(50)));
        spec.stocks[0].buy_cost = CostFunction::table([0, 1, 3, 6].iter().map(|&c| Money::from_cents(c)).collect());
        let params = TraderParams::with_v_int(&spec, 1).unwrap();
        assert!(buy_decision_greedy(&params, &spec, &PriceVector::from_cents(&[10]), &[3]).is_err());
    }

    #[test]
    fn greedy_overshoot_and_dominance_with_linear_costs() {
        let mut spec = market(vec![(3, 400), (2, 250), (4, 120)], BudgetMode::Money(Money::from_cents(500)));
        spec.stocks[0].buy_cost = CostFunction::linear(Money::from_cents(9));
        let params = TraderParams::with_v_int(&spec, 2).unwrap();
        let obj = SlotObjective::new(&params);
        for seed in 0..300i64 {
            let p = PriceVector::from_cents(&[(seed * 91) % 401, (seed * 37) % 251, (seed * 13) % 121]);
            let q = [seed % 13, (seed / 3) % 9, (seed / 7) % 13];
            let g = dispatch(BuySolver::Greedy, &obj, &spec, &p, &q, &Limits::default()).unwrap();
            let spent: i64 = g.iter().zip(p.iter()).map(|(&a, pr)| a * pr.cents()).sum();
            assert!(spent <= 500 + 400);
            let exact = brute(&obj, &spec, &p, &q).0;
            assert!(buy_objective(&obj, &spec, &p, &q, &g) <= exact, "seed {seed}");
        }
    }

    /// With a concave fixed fee the ratio rule can prefer a cheap small gain
    /// over a fee-bearing large one, so greedy ends above the exact minimum.
    #[test]
    fn greedy_can_lose_to_exact_under_fixed_fees() {
        let mut spec = market(vec![(2, 100), (2, 100)], BudgetMode::Money(Money::from_cents(200)));
        spec.stocks[1].buy_cost = CostFunction::fixed(Money::from_cents(950));
        let params = TraderParams::with_v_int(&spec, 1).unwrap().with_theta(vec![
            Ratio::from_integer(4),
            Ratio::from_integer(13),
        ]);
        let obj = SlotObjective::new(&params);
        let p = PriceVector::from_cents(&[100, 100]);
        let q = [2, 2];
        // coefficients: 2 - 4 + 1 = -1 and 2 - 13 + 1 = -10
        let g = dispatch(BuySolver::Greedy, &obj, &spec, &p, &q, &Limits::default()).unwrap();
        let e = dispatch(BuySolver::Exact, &obj, &spec, &p, &q, &Limits::default()).unwrap();
        assert_eq!(g, vec![2, 0]);
        assert_eq!(e, vec![0, 2]);
        assert_eq!(obj.to_ratio(buy_objective(&obj, &spec, &p, &q, &g)), Ratio::from_integer(-2));
        assert_eq!(obj.to_ratio(buy_objective(&obj, &spec, &p, &q, &e)), Ratio::new(-21, 2));
    }

    #[test]
    fn capacity_error_points_to_greedy() {
        // coprime prices and a binding budget leave a table of 2 x 100001 cells
        let spec = market(vec![(1000, 1000), (1000, 1000)], BudgetMode::Money(Money::from_cents(100_000)));
        let params = TraderParams::with_v_int(&spec, 1).unwrap();
        let obj = SlotObjective::new(&params);
        let err = dispatch(
            BuySolver::Exact,
            &obj,
            &spec,
            &PriceVector::from_cents(&[997, 991]),
            &[1000, 1000],
            &Limits::uniform(1000),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
        assert!(err.to_string().contains("greedy"));
    }
}

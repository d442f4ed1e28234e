//! Static market description, per-slot feasibility, profit and queue dynamics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::Money;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostKind {
    Zero,
    /// Charge per share traded.
    Linear { rate: Money },
    /// Flat fee whenever at least one share is traded.
    Fixed { fee: Money },
    /// Explicit cost for 0..=mu_max shares.
    Table { values: Vec<Money> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostFunction {
    #[serde(flatten)]
    pub kind: CostKind,
    /// Declared upper bound on the cost; derived from the function when absent.
    #[serde(default, rename = "max", skip_serializing_if = "Option::is_none")]
    pub declared_max: Option<Money>,
}

impl CostFunction {
    pub fn zero() -> Self {
        CostKind::Zero.into()
    }

    pub fn linear(rate: Money) -> Self {
        CostKind::Linear { rate }.into()
    }

    pub fn fixed(fee: Money) -> Self {
        CostKind::Fixed { fee }.into()
    }

    pub fn table(values: Vec<Money>) -> Self {
        CostKind::Table { values }.into()
    }

    #[inline]
    pub fn eval(&self, shares: i64) -> Money {
        match &self.kind {
            CostKind::Zero => Money::ZERO,
            CostKind::Linear { rate } => rate.times(shares),
            CostKind::Fixed { fee } => {
                if shares > 0 {
                    *fee
                } else {
                    Money::ZERO
                }
            }
            CostKind::Table { values } => values[shares as usize],
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, CostKind::Zero)
    }

    /// Per-share rate when the cost is linear in the share count.
    pub fn linear_rate(&self) -> Option<Money> {
        match &self.kind {
            CostKind::Zero => Some(Money::ZERO),
            CostKind::Linear { rate } => Some(*rate),
            _ => None,
        }
    }

    /// Largest value over `0..=mu_max`, or the declared bound if one was given.
    pub fn bound(&self, mu_max: i64) -> Money {
        self.declared_max
            .unwrap_or_else(|| (0..=mu_max).map(|a| self.eval(a)).max().unwrap_or(Money::ZERO))
    }

    /// Concavity over the integer domain `0..=mu_max` (non-increasing increments).
    pub fn is_concave(&self, mu_max: i64) -> bool {
        match &self.kind {
            CostKind::Zero | CostKind::Linear { .. } | CostKind::Fixed { .. } => true,
            CostKind::Table { .. } => (1..mu_max).all(|a| {
                let left = self.eval(a) - self.eval(a - 1);
                let right = self.eval(a + 1) - self.eval(a);
                right <= left
            }),
        }
    }

    pub fn validate(&self, mu_max: i64, what: &str) -> Result<()> {
        match &self.kind {
            CostKind::Zero => {}
            CostKind::Linear { rate } => {
                if rate.is_negative() {
                    return Err(Error::structural(format!("{what}: negative linear rate")));
                }
            }
            CostKind::Fixed { fee } => {
                if fee.is_negative() {
                    return Err(Error::structural(format!("{what}: negative fixed fee")));
                }
            }
            CostKind::Table { values } => {
                if values.len() as i64 != mu_max + 1 {
                    return Err(Error::structural(format!(
                        "{what}: cost table has {} entries, expected mu_max+1 = {}",
                        values.len(),
                        mu_max + 1
                    )));
                }
                if values[0] != Money::ZERO {
                    return Err(Error::structural(format!("{what}: cost of zero shares must be 0")));
                }
                if values.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::structural(format!("{what}: cost table is decreasing")));
                }
            }
        }
        if let Some(max) = self.declared_max {
            if let Some(a) = (0..=mu_max).find(|&a| self.eval(a) > max) {
                return Err(Error::structural(format!(
                    "{what}: cost {} at {a} shares exceeds declared max {max}",
                    self.eval(a)
                )));
            }
        }
        Ok(())
    }
}

impl From<CostKind> for CostFunction {
    fn from(kind: CostKind) -> Self {
        CostFunction {
            kind,
            declared_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StockSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub mu_max: i64,
    pub p_max: Money,
    #[serde(default = "CostFunction::zero")]
    pub buy_cost: CostFunction,
    #[serde(default = "CostFunction::zero")]
    pub sell_cost: CostFunction,
}

impl StockSpec {
    pub fn new(mu_max: i64, p_max: Money) -> Self {
        StockSpec {
            index: None,
            mu_max,
            p_max,
            buy_cost: CostFunction::zero(),
            sell_cost: CostFunction::zero(),
        }
    }

    pub fn with_costs(mut self, buy: CostFunction, sell: CostFunction) -> Self {
        self.buy_cost = buy;
        self.sell_cost = sell;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value")]
pub enum BudgetMode {
    /// Per-slot cap on money spent on purchases (fees excluded).
    #[serde(rename = "money")]
    Money(Money),
    /// Per-slot cap on the number of shares bought.
    #[serde(rename = "shares")]
    Shares(i64),
    #[serde(rename = "none")]
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub stocks: Vec<StockSpec>,
    pub budget: BudgetMode,
}

impl MarketSpec {
    pub fn new(stocks: Vec<StockSpec>, budget: BudgetMode) -> Result<Self> {
        let spec = MarketSpec { stocks, budget };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: MarketSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.stocks.len()
    }

    pub fn mu_max(&self) -> Vec<i64> {
        self.stocks.iter().map(|s| s.mu_max).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.stocks.is_empty() {
            return Err(Error::structural("market needs at least one stock"));
        }
        for (i, s) in self.stocks.iter().enumerate() {
            if let Some(idx) = s.index {
                if idx != i {
                    return Err(Error::structural(format!(
                        "stock indices must be unique and contiguous: position {i} has index {idx}"
                    )));
                }
            }
            if s.mu_max < 1 {
                return Err(Error::structural(format!("stock {i}: mu_max must be >= 1")));
            }
            if s.p_max <= Money::ZERO {
                return Err(Error::structural(format!("stock {i}: p_max must be > 0")));
            }
            s.buy_cost.validate(s.mu_max, &format!("stock {i} buy cost"))?;
            s.sell_cost.validate(s.mu_max, &format!("stock {i} sell cost"))?;
        }
        match self.budget {
            BudgetMode::Money(x) if x <= Money::ZERO => {
                Err(Error::structural("money budget must be positive"))
            }
            BudgetMode::Shares(a) if a < 1 => Err(Error::structural("share budget must be >= 1")),
            _ => Ok(()),
        }
    }

    pub fn check_prices(&self, prices: &PriceVector) -> Result<()> {
        self.check_len(prices.len(), "price vector")?;
        for (n, (p, s)) in prices.iter().zip(&self.stocks).enumerate() {
            if p.is_negative() || *p > s.p_max {
                return Err(Error::structural(format!(
                    "stock {n}: price {p} outside [0, {}]",
                    s.p_max
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.n() {
            return Err(Error::structural(format!(
                "{what} has length {len}, market has {} stocks",
                self.n()
            )));
        }
        Ok(())
    }

    /// Money needed to buy `mu_max` of every stock at the given prices, fees included.
    pub fn full_purchase_cost(&self, prices: &PriceVector) -> Money {
        self.stocks
            .iter()
            .zip(prices.iter())
            .map(|(s, p)| p.times(s.mu_max) + s.buy_cost.eval(s.mu_max))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceVector(pub Vec<Money>);

impl PriceVector {
    pub fn new(prices: Vec<Money>) -> Self {
        PriceVector(prices)
    }

    pub fn from_cents(cents: &[i64]) -> Self {
        PriceVector(cents.iter().map(|&c| Money::from_cents(c)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Money> {
        self.0.iter()
    }
}

impl std::ops::Index<usize> for PriceVector {
    type Output = Money;
    fn index(&self, i: usize) -> &Money {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TradeDecision {
    pub buys: Vec<i64>,
    pub sells: Vec<i64>,
}

impl TradeDecision {
    pub fn zero(n: usize) -> Self {
        TradeDecision {
            buys: vec![0; n],
            sells: vec![0; n],
        }
    }

    pub fn new(buys: Vec<i64>, sells: Vec<i64>) -> Self {
        TradeDecision { buys, sells }
    }

    pub fn is_zero(&self) -> bool {
        self.buys.iter().chain(&self.sells).all(|&x| x == 0)
    }

    /// Net shares added to each stock (buys minus sells).
    pub fn net(&self) -> impl Iterator<Item = i64> + '_ {
        self.buys.iter().zip(&self.sells).map(|(a, m)| a - m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortfolioState {
    pub queue: Vec<i64>,
    pub cumulative_profit: Money,
    pub slot: u64,
}

impl PortfolioState {
    pub fn new(queue: Vec<i64>) -> Self {
        PortfolioState {
            queue,
            cumulative_profit: Money::ZERO,
            slot: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// Sells within `0..=mu_max`.
    SellLimit,
    /// Sale revenue at least covers the selling fee.
    SaleCoversFee,
    /// Sells do not exceed current holdings.
    Ownership,
    /// Buys within `0..=mu_max`.
    BuyLimit,
    /// Total purchase spend within the money budget.
    MoneyBudget,
    /// Total shares bought within the share budget.
    ShareBudget,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constraint::SellLimit => "sell limit 0 <= mu_n <= mu_max",
            Constraint::SaleCoversFee => "sale covers fee mu_n p_n >= s_n(mu_n)",
            Constraint::Ownership => "ownership mu_n <= Q_n",
            Constraint::BuyLimit => "buy limit 0 <= A_n <= mu_max",
            Constraint::MoneyBudget => "money budget sum A_n p_n <= x",
            Constraint::ShareBudget => "share budget sum A_n <= A_tot",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    /// Offending stock for per-stock constraints.
    pub stock: Option<usize>,
}

/// Lists every violated constraint; an empty list means the decision is feasible.
///
/// Ownership is only checked when `enforce_ownership` is set, since virtual
/// (price-only) policies may sell shares they do not hold.
pub fn validate_decision(
    spec: &MarketSpec,
    prices: &PriceVector,
    state: &PortfolioState,
    d: &TradeDecision,
    enforce_ownership: bool,
) -> Result<Vec<Violation>> {
    spec.check_len(prices.len(), "price vector")?;
    spec.check_len(d.buys.len(), "buy vector")?;
    spec.check_len(d.sells.len(), "sell vector")?;
    if enforce_ownership {
        spec.check_len(state.queue.len(), "queue")?;
    }
    let mut out = Vec::new();
    let mut push = |constraint, stock| out.push(Violation { constraint, stock });
    for (n, s) in spec.stocks.iter().enumerate() {
        let mu = d.sells[n];
        if !(0..=s.mu_max).contains(&mu) {
            push(Constraint::SellLimit, Some(n));
        } else if prices[n].times(mu) < s.sell_cost.eval(mu) {
            push(Constraint::SaleCoversFee, Some(n));
        }
        if enforce_ownership && mu > state.queue[n] {
            push(Constraint::Ownership, Some(n));
        }
        if !(0..=s.mu_max).contains(&d.buys[n]) {
            push(Constraint::BuyLimit, Some(n));
        }
    }
    match spec.budget {
        BudgetMode::Money(x) => {
            let spend: Money = d.buys.iter().zip(prices.iter()).map(|(&a, p)| p.times(a)).sum();
            if spend > x {
                push(Constraint::MoneyBudget, None);
            }
        }
        BudgetMode::Shares(total) => {
            if d.buys.iter().sum::<i64>() > total {
                push(Constraint::ShareBudget, None);
            }
        }
        BudgetMode::Unconstrained => {}
    }
    Ok(out)
}

/// Net profit of one slot: sale revenue less selling fees, minus purchase
/// spend and buying fees.
pub fn slot_profit(spec: &MarketSpec, prices: &PriceVector, d: &TradeDecision) -> Result<Money> {
    spec.check_len(prices.len(), "price vector")?;
    spec.check_len(d.buys.len(), "buy vector")?;
    spec.check_len(d.sells.len(), "sell vector")?;
    Ok(profit_unchecked(spec, prices, d))
}

#[inline]
pub(crate) fn profit_unchecked(spec: &MarketSpec, prices: &PriceVector, d: &TradeDecision) -> Money {
    let mut total = Money::ZERO;
    for (n, s) in spec.stocks.iter().enumerate() {
        total += stock_profit(s, prices[n], d.buys[n], d.sells[n]);
    }
    total
}

#[inline]
pub(crate) fn stock_profit(s: &StockSpec, price: Money, buys: i64, sells: i64) -> Money {
    price.times(sells) - s.sell_cost.eval(sells) - price.times(buys) - s.buy_cost.eval(buys)
}

/// Queue update `Q <- max(Q - mu + A, 0)`; the slot counter advances and the
/// profit ledger is left for the caller to post.
pub fn apply_decision(state: &PortfolioState, d: &TradeDecision) -> PortfolioState {
    let queue = state
        .queue
        .iter()
        .zip(d.net())
        .map(|(q, net)| (q + net).max(0))
        .collect();
    PortfolioState {
        queue,
        cumulative_profit: state.cumulative_profit,
        slot: state.slot + 1,
    }
}

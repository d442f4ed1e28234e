//! Trajectories, backtests and the place-holder stock wrapper.

use std::io::{Read, Write};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::market::{MarketSpec, PortfolioState, PriceVector, TradeDecision};
use crate::money::Money;
use crate::prices::{stream_rng, PriceSource};

use super::{v_pmax, Trader, TraderParams};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub prices: PriceVector,
    pub decision: TradeDecision,
    /// Queue after the decision, `Q(t+1)`.
    pub queue: Vec<i64>,
    pub profit: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub spec: MarketSpec,
    pub params: TraderParams,
    pub records: Vec<SlotRecord>,
    /// Money spent before slot 0 to acquire `mu_max` real shares of every
    /// stock; zero for place-holder runs and runs that start from held shares.
    pub startup_cost: Money,
}

impl Trajectory {
    pub fn new(spec: MarketSpec, params: TraderParams) -> Self {
        Trajectory {
            spec,
            params,
            records: Vec::new(),
            startup_cost: Money::ZERO,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn initial_queue(&self) -> &[i64] {
        &self.params.initial_queue
    }

    /// Queue observed at the start of record `i`.
    pub fn queue_before(&self, i: usize) -> &[i64] {
        if i == 0 {
            &self.params.initial_queue
        } else {
            &self.records[i - 1].queue
        }
    }

    /// Fake shares held on top of the real ones (`mu_max` in place-holder runs).
    pub fn offset(&self) -> Vec<i64> {
        if self.params.placeholder {
            self.spec.mu_max()
        } else {
            vec![0; self.spec.n()]
        }
    }

    /// Real holdings at the start of record `i`.
    pub fn real_queue_before(&self, i: usize) -> Vec<i64> {
        self.queue_before(i).iter().zip(self.offset()).map(|(q, o)| q - o).collect()
    }

    /// Sum of slot profits, excluding any startup purchase.
    pub fn trading_profit(&self) -> Money {
        self.records.iter().map(|r| r.profit).sum()
    }

    /// Trading profit net of the startup purchase.
    pub fn cumulative_profit(&self) -> Money {
        self.trading_profit() - self.startup_cost
    }

    /// Average net profit per slot in dollars.
    pub fn average_profit(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.cumulative_profit().as_dollars() / self.records.len() as f64
        }
    }

    pub fn average_profit_exact(&self) -> Ratio<i128> {
        self.cumulative_profit().to_ratio() / Ratio::from_integer(self.records.len().max(1) as i128)
    }

    fn queue_extreme(&self, pick: fn(i64, i64) -> i64) -> Vec<i64> {
        let mut out = self.params.initial_queue.clone();
        for r in &self.records {
            for (o, &q) in out.iter_mut().zip(&r.queue) {
                *o = pick(*o, q);
            }
        }
        out
    }

    pub fn min_queue(&self) -> Vec<i64> {
        self.queue_extreme(i64::min)
    }

    pub fn max_queue(&self) -> Vec<i64> {
        self.queue_extreme(i64::max)
    }

    /// Smallest `Qhat_n(t) - mu_n(t)` over slots that sell; non-negative means
    /// no fake share was ever sold. `None` when nothing was sold.
    pub fn min_real_sale_slack(&self) -> Vec<Option<i64>> {
        let mut out = vec![None; self.spec.n()];
        for i in 0..self.records.len() {
            let real = self.real_queue_before(i);
            for (n, slot) in out.iter_mut().enumerate() {
                let mu = self.records[i].decision.sells[n];
                if mu > 0 {
                    let slack = real[n] - mu;
                    *slot = Some(slot.map_or(slack, |s: i64| s.min(slack)));
                }
            }
        }
        out
    }

    /// First record whose queue does not follow `max(Q - mu + A, 0)`.
    pub fn dynamics_violation(&self) -> Option<usize> {
        (0..self.records.len()).find(|&i| {
            let before = self.queue_before(i);
            let r = &self.records[i];
            before
                .iter()
                .enumerate()
                .any(|(n, &q)| r.queue[n] != (q - r.decision.sells[n] + r.decision.buys[n]).max(0))
        })
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let n = self.spec.n();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["slot".to_string()];
        for prefix in ["p", "A", "mu", "Q"] {
            header.extend((1..=n).map(|i| format!("{prefix}_{i}")));
        }
        header.push("profit".into());
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.slot.to_string()];
            row.extend(r.prices.iter().map(|p| p.to_string()));
            row.extend(r.decision.buys.iter().map(|a| a.to_string()));
            row.extend(r.decision.sells.iter().map(|m| m.to_string()));
            row.extend(r.queue.iter().map(|q| q.to_string()));
            row.push(r.profit.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads records written by [`Trajectory::write_csv`]. The market and the
    /// parameters (initial queue included) come from the run's configuration;
    /// the startup cost is not part of the file and is left at zero.
    pub fn read_csv(spec: MarketSpec, params: TraderParams, input: impl Read) -> Result<Trajectory> {
        params.validate(&spec)?;
        let n = spec.n();
        let mut reader = csv::Reader::from_reader(input);
        let mut expected = vec!["slot".to_string()];
        for prefix in ["p", "A", "mu", "Q"] {
            expected.extend((1..=n).map(|i| format!("{prefix}_{i}")));
        }
        expected.push("profit".into());
        if reader.headers()?.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
            return Err(Error::Parse {
                row: 0,
                message: format!("header must be `{}`", expected.join(",")),
            });
        }
        let mut traj = Trajectory::new(spec, params);
        for (i, record) in reader.records().enumerate() {
            let row = i + 1;
            let record = record?;
            let bad = |message: String| Error::Parse { row, message };
            if record.len() != expected.len() {
                return Err(bad(format!("expected {} columns, found {}", expected.len(), record.len())));
            }
            let int = |k: usize| -> Result<i64> {
                record[k].trim().parse().map_err(|_| bad(format!("bad integer {:?} in column {}", &record[k], expected[k])))
            };
            let money = |k: usize| Money::parse(record[k].trim()).map_err(|e| bad(e.to_string()));
            let slot = int(0)?;
            if slot != i as i64 {
                return Err(bad(format!("expected slot {i}, found {slot}")));
            }
            let prices = PriceVector((1..=n).map(money).collect::<Result<_>>()?);
            let buys = (n + 1..=2 * n).map(int).collect::<Result<_>>()?;
            let sells = (2 * n + 1..=3 * n).map(int).collect::<Result<_>>()?;
            let queue = (3 * n + 1..=4 * n).map(int).collect::<Result<_>>()?;
            traj.records.push(SlotRecord {
                slot: slot as u64,
                prices,
                decision: TradeDecision::new(buys, sells),
                queue,
                profit: money(4 * n + 1)?,
            });
        }
        Ok(traj)
    }

    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            slots: self.records.len(),
            trading_profit: self.trading_profit(),
            startup_cost: self.startup_cost,
            cumulative_profit: self.cumulative_profit(),
            average_profit: self.average_profit(),
            min_queue: self.min_queue(),
            max_queue: self.max_queue(),
            placeholder: self.params.placeholder,
            conforming: self.params.is_conforming(&self.spec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub slots: usize,
    pub trading_profit: Money,
    pub startup_cost: Money,
    pub cumulative_profit: Money,
    /// Dollars per slot.
    pub average_profit: f64,
    pub min_queue: Vec<i64>,
    pub max_queue: Vec<i64>,
    pub placeholder: bool,
    /// Default targets and an initial queue inside the bounded band.
    pub conforming: bool,
}

/// Cost of buying `mu_max` shares of every stock at `prices`, fees included.
pub fn startup_purchase_cost(spec: &MarketSpec, prices: &PriceVector) -> Money {
    spec.full_purchase_cost(prices)
}

/// A configured simulation run.
#[derive(Debug, Clone)]
pub struct Backtest<'a> {
    spec: &'a MarketSpec,
    params: &'a TraderParams,
    source: &'a PriceSource,
    horizon: usize,
    seed: u64,
    stream: u64,
    startup_purchase: bool,
    limits: Limits,
}

impl<'a> Backtest<'a> {
    pub fn new(spec: &'a MarketSpec, params: &'a TraderParams, source: &'a PriceSource, horizon: usize, seed: u64) -> Self {
        Backtest {
            spec,
            params,
            source,
            horizon,
            seed,
            stream: 0,
            startup_purchase: false,
            limits: Limits::from_env(),
        }
    }

    /// Independent random stream for replication `stream` under the same seed.
    pub fn stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    /// Charge the purchase of the initial `mu_max` shares at the slot-0 prices.
    pub fn with_startup_purchase(mut self, yes: bool) -> Self {
        self.startup_purchase = yes;
        self
    }

    pub fn limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn run(&self) -> Result<Trajectory> {
        let mut traj = Trajectory::new(self.spec.clone(), self.params.clone());
        traj.records.reserve(self.horizon);
        traj.startup_cost = self.drive(|rec| traj.records.push(rec))?;
        Ok(traj)
    }

    /// Runs without keeping the per-slot records, for long ensembles.
    pub fn run_totals(&self) -> Result<RunTotals> {
        let mut totals = RunTotals {
            slots: 0,
            trading_profit: Money::ZERO,
            startup_cost: Money::ZERO,
            min_queue: self.params.initial_queue.clone(),
            max_queue: self.params.initial_queue.clone(),
        };
        totals.startup_cost = self.drive(|rec| {
            totals.slots += 1;
            totals.trading_profit += rec.profit;
            for (n, &q) in rec.queue.iter().enumerate() {
                totals.min_queue[n] = totals.min_queue[n].min(q);
                totals.max_queue[n] = totals.max_queue[n].max(q);
            }
        })?;
        Ok(totals)
    }

    /// Simulates the horizon, handing each slot to `on_slot`; returns the
    /// startup cost.
    fn drive(&self, mut on_slot: impl FnMut(SlotRecord)) -> Result<Money> {
        if self.horizon == 0 {
            return Err(Error::structural("horizon must be at least 1 slot"));
        }
        self.source.validate_for(self.spec)?;
        if let PriceSource::Trace(t) = self.source {
            if t.len() < self.horizon {
                return Err(Error::structural(format!(
                    "trace has {} slots, horizon needs {}",
                    t.len(),
                    self.horizon
                )));
            }
        }
        let trader = Trader::new(self.spec, self.params)?.with_limits(self.limits);
        let mut prices = self.source.stream(stream_rng(self.seed, self.stream));
        let mut startup = Money::ZERO;
        let mut state = PortfolioState::new(self.params.initial_queue.clone());
        for _ in 0..self.horizon {
            let p = prices.next_prices()?;
            self.spec.check_prices(&p)?;
            if self.startup_purchase && state.slot == 0 {
                startup = startup_purchase_cost(self.spec, &p);
            }
            let slot = state.slot;
            let (decision, profit, next) = trader.step(&state, &p)?;
            on_slot(SlotRecord {
                slot,
                prices: p,
                decision,
                queue: next.queue.clone(),
                profit,
            });
            state = next;
        }
        Ok(startup)
    }
}

/// Aggregates of a run whose slots were not stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunTotals {
    pub slots: usize,
    pub trading_profit: Money,
    pub startup_cost: Money,
    pub min_queue: Vec<i64>,
    pub max_queue: Vec<i64>,
}

impl RunTotals {
    /// Average slot profit in dollars, excluding the startup purchase.
    pub fn average_slot_profit(&self) -> f64 {
        self.trading_profit.as_dollars() / self.slots.max(1) as f64
    }
}

/// Simulates `horizon` slots from `source` with replication stream 0.
pub fn run_backtest(
    spec: &MarketSpec,
    params: &TraderParams,
    source: &PriceSource,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    Backtest::new(spec, params, source, horizon, seed).run()
}

/// Reinterprets `params.initial_queue` as real holdings and adds `mu_max` fake
/// shares per stock, which places the augmented queue inside the bounded band.
pub fn placeholder_wrap(params: &TraderParams, spec: &MarketSpec) -> Result<TraderParams> {
    params.validate(spec)?;
    if params.placeholder {
        return Err(Error::structural("parameters already carry place-holder shares"));
    }
    let upper = v_pmax(spec, params.v.0);
    let mut queue = Vec::with_capacity(spec.n());
    for (n, (s, &real)) in spec.stocks.iter().zip(&params.initial_queue).enumerate() {
        let hi = upper[n] + Ratio::from_integer(2 * s.mu_max);
        if real < 0 || Ratio::from_integer(real) > hi {
            return Err(Error::structural(format!(
                "stock {n}: real initial holdings {real} outside [0, {hi}]"
            )));
        }
        queue.push(real + s.mu_max);
    }
    let mut out = params.clone();
    out.initial_queue = queue;
    out.placeholder = true;
    Ok(out)
}

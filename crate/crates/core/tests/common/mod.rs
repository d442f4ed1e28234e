//! Random instance generators shared by the integration and acceptance tests.

#![allow(dead_code)]

use lyaptrade::prices::adversarial_trace;
use lyaptrade::{
    stream_rng, BudgetMode, CostFunction, MarketSpec, MarkovPriceModel, Money, PriceDistribution, PriceSource,
    PriceTrace, PriceVector, SimRng, StockSpec,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn rng(seed: u64, stream: u64) -> SimRng {
    stream_rng(seed, stream)
}

/// Knobs for [`random_spec`].
#[derive(Debug, Clone, Copy)]
pub struct SpecShape {
    pub max_stocks: usize,
    pub max_mu: i64,
    /// Price grid step in cents.
    pub tick: i64,
    pub max_ticks: i64,
    /// Allow fixed fees and non-linear tables.
    pub general_costs: bool,
    pub budgets: bool,
}

impl SpecShape {
    pub const BAND: SpecShape = SpecShape {
        max_stocks: 3,
        max_mu: 3,
        tick: 5,
        max_ticks: 80,
        general_costs: true,
        budgets: true,
    };

    pub const SMALL: SpecShape = SpecShape {
        max_stocks: 2,
        max_mu: 2,
        tick: 10,
        max_ticks: 30,
        general_costs: true,
        budgets: true,
    };
}

fn cost(rng: &mut SimRng, mu: i64, tick: i64, general: bool) -> CostFunction {
    let choice = if general { rng.gen_range(0..4) } else { rng.gen_range(0..2) };
    match choice {
        0 => CostFunction::zero(),
        1 => CostFunction::linear(Money::from_cents(rng.gen_range(0..=tick))),
        2 => CostFunction::fixed(Money::from_cents(rng.gen_range(1..=3 * tick))),
        _ => {
            // concave table: non-increasing increments
            let mut values = vec![Money::ZERO];
            let mut step = rng.gen_range(0..=2 * tick);
            for _ in 0..mu {
                let last = *values.last().unwrap();
                values.push(last + Money::from_cents(step));
                step = rng.gen_range(0..=step);
            }
            CostFunction::table(values)
        }
    }
}

pub fn random_spec(rng: &mut SimRng, shape: SpecShape) -> MarketSpec {
    let n = rng.gen_range(1..=shape.max_stocks);
    let stocks: Vec<StockSpec> = (0..n)
        .map(|_| {
            let mu = rng.gen_range(1..=shape.max_mu);
            let p_max = Money::from_cents(shape.tick * rng.gen_range(2..=shape.max_ticks));
            let buy = cost(rng, mu, shape.tick, shape.general_costs);
            let sell = cost(rng, mu, shape.tick, shape.general_costs);
            StockSpec::new(mu, p_max).with_costs(buy, sell)
        })
        .collect();
    let reach: i64 = stocks.iter().map(|s| s.mu_max * s.p_max.cents()).sum();
    let budget = if !shape.budgets {
        BudgetMode::Unconstrained
    } else {
        match rng.gen_range(0..3) {
            0 => BudgetMode::Unconstrained,
            1 => BudgetMode::Money(Money::from_cents(rng.gen_range(1..=reach.max(1)))),
            _ => BudgetMode::Shares(rng.gen_range(1..=stocks.iter().map(|s| s.mu_max).sum::<i64>())),
        }
    };
    MarketSpec::new(stocks, budget).expect("generated spec is valid")
}

/// A price vector on the market's price grid, each component in `[0, p_max]`.
pub fn random_prices(rng: &mut SimRng, spec: &MarketSpec, tick: i64) -> PriceVector {
    PriceVector(
        spec.stocks
            .iter()
            .map(|s| Money::from_cents(tick * rng.gen_range(0..=s.p_max.cents() / tick)))
            .collect(),
    )
}

pub fn random_trace(rng: &mut SimRng, spec: &MarketSpec, tick: i64, len: usize) -> Vec<PriceVector> {
    (0..len).map(|_| random_prices(rng, spec, tick)).collect()
}

pub fn iid_source(rng: &mut SimRng, spec: &MarketSpec, tick: i64) -> PriceSource {
    let k = rng.gen_range(2..=4);
    let support: Vec<PriceVector> = (0..k).map(|_| random_prices(rng, spec, tick)).collect();
    let mut probs: Vec<f64> = (0..k).map(|_| rng.gen_range(1..=5) as f64).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    PriceSource::Iid(PriceDistribution::new(support, probs).expect("valid distribution"))
}

pub fn markov_source(rng: &mut SimRng, spec: &MarketSpec, tick: i64) -> PriceSource {
    let a = random_prices(rng, spec, tick);
    let b = random_prices(rng, spec, tick);
    let stay = *[0.5, 0.7, 0.9, 0.98].choose(rng).unwrap();
    PriceSource::Markov {
        model: MarkovPriceModel::two_state(a, b, stay, stay).expect("valid chain"),
        initial_state: 0,
    }
}

pub fn adversarial_source(spec: &MarketSpec, len: usize, seed: u64) -> PriceSource {
    PriceSource::Trace(adversarial_trace(spec, len, seed))
}

pub fn trace_source(trace: Vec<PriceVector>) -> PriceSource {
    PriceSource::Trace(PriceTrace::new(trace, "generated"))
}

//! Consecutive windows whose trade sizes grow with past profit.
//!
//! Window `w` runs from zero real holdings with place-holder shares. Its
//! `mu_max` and `V` are the base values times `prod_{i<w} (1 + alpha_i)`, where
//! `alpha_i = beta * max(q_i, 0)` and `q_i` is the time-average profit the base
//! parameters would have earned over window `i` on the same prices.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{CostFunction, CostKind, MarketSpec, PortfolioState, PriceVector};
use crate::money::{Money, Rational};
use crate::prices::{stream_rng, PriceSource};

use super::{Trader, TraderParams};

const FACTOR_RESOLUTION: i64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPlan {
    pub beta: f64,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub windows: usize,
}

impl ScalingPlan {
    pub fn window_len(&self) -> usize {
        self.t * self.m
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::structural("beta must be a non-negative number"));
        }
        if self.t == 0 || self.m == 0 || self.windows == 0 {
            return Err(Error::structural("T, M and the window count must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStat {
    pub window: usize,
    /// Product of `1 + alpha_i` over earlier windows.
    pub scale: f64,
    #[serde(rename = "V")]
    pub v: Rational,
    pub mu_max: Vec<i64>,
    /// Net profit of the scaled run over this window.
    pub profit: Money,
    /// Time-average profit of the base parameters over this window (dollars per slot).
    pub q: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledRun {
    pub plan: ScalingPlan,
    pub windows: Vec<WindowStat>,
}

impl ScaledRun {
    pub fn total_profit(&self) -> Money {
        self.windows.iter().map(|w| w.profit).sum()
    }
}

fn scale_cost(cost: &CostFunction, mu_max: i64) -> CostFunction {
    let kind = match &cost.kind {
        CostKind::Table { values } => {
            let last = *values.last().expect("validated tables are non-empty");
            let mut v: Vec<Money> = values.iter().copied().take(mu_max as usize + 1).collect();
            v.resize(mu_max as usize + 1, last);
            CostKind::Table { values: v }
        }
        other => other.clone(),
    };
    let mut out = CostFunction { kind, declared_max: None };
    if let Some(max) = cost.declared_max {
        out.declared_max = Some(max.max(out.bound(mu_max)));
    }
    out
}

/// Market with every `mu_max` multiplied by `factor` and rounded down (at least 1).
/// Cost tables are extended with their last entry.
pub fn scale_spec(spec: &MarketSpec, factor: f64) -> Result<MarketSpec> {
    let stocks = spec
        .stocks
        .iter()
        .map(|s| {
            let mu = ((s.mu_max as f64 * factor).floor() as i64).max(1);
            let mut out = s.clone();
            out.mu_max = mu;
            out.buy_cost = scale_cost(&s.buy_cost, mu);
            out.sell_cost = scale_cost(&s.sell_cost, mu);
            out
        })
        .collect();
    MarketSpec::new(stocks, spec.budget.clone())
}

fn scale_ratio(factor: f64) -> Result<Ratio<i64>> {
    let scaled = (factor * FACTOR_RESOLUTION as f64).round();
    if !(scaled.is_finite() && scaled < i64::MAX as f64) {
        return Err(Error::Range(format!("scale factor {factor} is too large")));
    }
    Ok(Ratio::new(scaled as i64, FACTOR_RESOLUTION))
}

fn window_params(base: &TraderParams, spec: &MarketSpec, v: Ratio<i64>) -> Result<TraderParams> {
    let mut params = TraderParams::new(spec, v)?;
    params.initial_queue = spec.mu_max();
    params.placeholder = true;
    params.buy_solver = base.buy_solver;
    Ok(params)
}

fn run_window(spec: &MarketSpec, params: &TraderParams, prices: &[PriceVector]) -> Result<Money> {
    let trader = Trader::new(spec, params)?;
    let mut state = PortfolioState::new(params.initial_queue.clone());
    for p in prices {
        let (_, _, next) = trader.step(&state, p)?;
        state = next;
    }
    Ok(state.cumulative_profit)
}

/// Runs `plan.windows` windows of `T * M` slots on one continuous price stream.
pub fn scaled_windows_run(
    spec: &MarketSpec,
    params: &TraderParams,
    plan: ScalingPlan,
    source: &PriceSource,
    seed: u64,
) -> Result<ScaledRun> {
    plan.validate()?;
    params.validate(spec)?;
    source.validate_for(spec)?;
    let len = plan.window_len();
    let base_v = params.v.0;
    let base_params = window_params(params, spec, base_v)?;
    let mut stream = source.stream(stream_rng(seed, 0));
    let mut scale = 1.0f64;
    let mut windows = Vec::with_capacity(plan.windows);
    for w in 0..plan.windows {
        let prices = (0..len)
            .map(|_| {
                let p = stream.next_prices()?;
                spec.check_prices(&p)?;
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;
        let base_profit = run_window(spec, &base_params, &prices)?;
        let q = base_profit.as_dollars() / len as f64;
        let (wspec, v) = if scale == 1.0 {
            (spec.clone(), base_v)
        } else {
            (scale_spec(spec, scale)?, base_v * scale_ratio(scale)?)
        };
        let wparams = window_params(params, &wspec, v)?;
        let profit = if wspec == *spec && v == base_v {
            base_profit
        } else {
            run_window(&wspec, &wparams, &prices)?
        };
        let alpha = plan.beta * q.max(0.0);
        windows.push(WindowStat {
            window: w,
            scale,
            v: Rational(v),
            mu_max: wspec.mu_max(),
            profit,
            q,
            alpha,
        });
        scale *= 1.0 + alpha;
    }
    Ok(ScaledRun { plan, windows })
}

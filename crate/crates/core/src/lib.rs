//! Queue-based stock trading by drift-plus-penalty control.
//!
//! The engine keeps an integer share queue per stock and, every slot, picks
//! sales and purchases that minimize a weighted sum of the queue's distance
//! from its target and the slot's negative profit. Around that trader the
//! crate provides:
//!
//! - [`market`]: market description, feasibility, profit and queue dynamics
//! - [`prices`]: seeded i.i.d., Markov and trace price sources
//! - [`trader`]: the per-slot algorithm, its buy solvers, backtests, place-holder
//!   stock and windowed scaling
//! - [`oracles`]: exact baselines (best price-only policy LP, T-slot lookahead,
//!   brute-force slot minimizer)
//! - [`analysis`]: bound constants and verifiers for the sample-path and
//!   in-expectation performance guarantees

pub mod analysis;
pub mod error;
pub mod limits;
pub mod market;
pub mod money;
pub mod oracles;
pub mod prices;
pub mod trader;

pub use error::{Error, Result};
pub use limits::Limits;
pub use market::{
    apply_decision, slot_profit, validate_decision, BudgetMode, Constraint, CostFunction, CostKind,
    MarketSpec, PortfolioState, PriceVector, StockSpec, TradeDecision, Violation,
};
pub use money::Money;
pub use prices::{
    load_trace, sample_iid, stationary_distribution, step_markov, stream_rng, write_trace, CapPolicy,
    MarkovPriceModel, MemoryParams, PriceDistribution, PriceSource, PriceTrace, SimRng,
};
pub use trader::{
    compute_theta, placeholder_wrap, run_backtest, scaled_windows_run, trader_step, Backtest, BuySolver,
    RunTotals, SlotRecord, Trajectory, TraderParams,
};
pub use oracles::{
    brute_force_slot_min, drift_rebalance, enumerate_actions, lookahead_frames, lookahead_psi,
    markov_memory_epsilon, solve_phi_opt, ActionSet, PonlySolution,
};
pub use analysis::{
    compute_constants, lyapunov, sample_path_drift, BoundConstants, BoundReport, EnsembleStat, Locus,
    Verdict,
};

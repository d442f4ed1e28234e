//! Capacity caps for the exact solvers and search oracles.

use serde::{Deserialize, Serialize};

pub const CAPACITY_ENV: &str = "LYAPTRADE_CAPACITY_CELLS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    /// Cells in the money-budget knapsack table.
    pub dp_cells: u128,
    /// Size of an enumerated per-price action set.
    pub actions: u128,
    /// Nodes visited by the lookahead search.
    pub search_nodes: u128,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            dp_cells: 100_000_000,
            actions: 1_000_000,
            search_nodes: 100_000_000,
        }
    }
}

impl Limits {
    /// Defaults, with every cap replaced by `LYAPTRADE_CAPACITY_CELLS` when set.
    pub fn from_env() -> Self {
        match std::env::var(CAPACITY_ENV).ok().and_then(|v| v.trim().parse::<u128>().ok()) {
            Some(cap) => Limits::uniform(cap),
            None => Limits::default(),
        }
    }

    pub fn uniform(cap: u128) -> Self {
        Limits {
            dp_cells: cap,
            actions: cap,
            search_nodes: cap,
        }
    }
}

//! Best profit over a window of known prices.
//!
//! Each slot picks an action from its price's action set; the total bought of
//! every stock must reach the total sold by the end of the window, so selling
//! short inside the window is allowed.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::market::{MarketSpec, PriceVector, TradeDecision};
use crate::money::Money;

use super::{enumerate_actions_with, ActionSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LookaheadResult {
    pub psi: Money,
    pub decisions: Vec<TradeDecision>,
    /// Search nodes expanded.
    pub nodes: u128,
}

struct Slot {
    actions: Vec<TradeDecision>,
    profits: Vec<i64>,
    nets: Vec<Vec<i64>>,
}

fn slots(spec: &MarketSpec, window: &[PriceVector], limits: &Limits) -> Result<Vec<Slot>> {
    window
        .iter()
        .map(|p| {
            let ActionSet { actions, .. } = enumerate_actions_with(spec, p, limits)?;
            let mut scored: Vec<(i64, TradeDecision)> = actions
                .into_iter()
                .map(|a| (crate::market::profit_unchecked(spec, p, &a).cents(), a))
                .collect();
            // best first; the stable sort keeps the zero decision ahead of equal-profit actions
            scored.sort_by(|a, b| b.0.cmp(&a.0));
            Ok(Slot {
                nets: scored.iter().map(|(_, a)| a.net().collect()).collect(),
                profits: scored.iter().map(|(p, _)| *p).collect(),
                actions: scored.into_iter().map(|(_, a)| a).collect(),
            })
        })
        .collect()
}

struct Search<'a> {
    slots: &'a [Slot],
    /// `bound[t]`: sum of the best single-slot profits from slot `t` on.
    bound: Vec<i64>,
    /// Remaining purchase capacity per stock from slot `t` on.
    capacity: Vec<Vec<i64>>,
    best: i64,
    best_path: Vec<usize>,
    path: Vec<usize>,
    net: Vec<i64>,
    seen: HashMap<(usize, Vec<i64>), i64>,
    nodes: u128,
    cap: u128,
}

impl Search<'_> {
    fn run(&mut self, t: usize, profit: i64) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.cap {
            return Err(Error::Capacity {
                what: "lookahead search",
                required: self.nodes,
                cap: self.cap,
                advice: "use a shorter lookahead window",
            });
        }
        if t == self.slots.len() {
            if self.net.iter().all(|&d| d >= 0) && profit > self.best {
                self.best = profit;
                self.best_path = self.path.clone();
            }
            return Ok(());
        }
        if profit + self.bound[t] <= self.best {
            return Ok(());
        }
        if self.net.iter().zip(&self.capacity[t]).any(|(&d, &c)| d + c < 0) {
            return Ok(());
        }
        // the rest of the window depends only on (t, net): a prefix that reached
        // the same state with at least this profit has already covered it
        match self.seen.get_mut(&(t, self.net.clone())) {
            Some(v) if *v >= profit => return Ok(()),
            Some(v) => *v = profit,
            None => {
                self.seen.insert((t, self.net.clone()), profit);
            }
        }
        let slot = &self.slots[t];
        for i in 0..slot.actions.len() {
            if profit + slot.profits[i] + self.bound[t + 1] <= self.best {
                // actions are sorted by profit, so the rest cannot do better
                break;
            }
            for (d, x) in self.net.iter_mut().zip(&slot.nets[i]) {
                *d += x;
            }
            self.path.push(i);
            let r = self.run(t + 1, profit + slot.profits[i]);
            self.path.pop();
            for (d, x) in self.net.iter_mut().zip(&slot.nets[i]) {
                *d -= x;
            }
            r?;
        }
        Ok(())
    }
}

fn finish(slots: &[Slot], path: &[usize], psi: i64, nodes: u128, n: usize) -> LookaheadResult {
    let decisions = if path.is_empty() {
        vec![TradeDecision::zero(n); slots.len()]
    } else {
        path.iter().zip(slots).map(|(&i, s)| s.actions[i].clone()).collect()
    };
    LookaheadResult {
        psi: Money::from_cents(psi),
        decisions,
        nodes,
    }
}

/// Exact optimum by depth-first branch and bound.
pub fn lookahead_psi(spec: &MarketSpec, window: &[PriceVector]) -> Result<LookaheadResult> {
    lookahead_psi_with(spec, window, &Limits::from_env())
}

pub fn lookahead_psi_with(spec: &MarketSpec, window: &[PriceVector], limits: &Limits) -> Result<LookaheadResult> {
    if window.is_empty() {
        return Err(Error::structural("lookahead window must have at least one slot"));
    }
    let slots = slots(spec, window, limits)?;
    let t = slots.len();
    let mut bound = vec![0i64; t + 1];
    for i in (0..t).rev() {
        bound[i] = bound[i + 1] + slots[i].profits[0].max(0);
    }
    let capacity = (0..=t)
        .map(|i| spec.stocks.iter().map(|s| s.mu_max * (t - i) as i64).collect())
        .collect();
    let mut search = Search {
        slots: &slots,
        bound,
        capacity,
        best: 0,
        best_path: Vec::new(),
        path: Vec::with_capacity(t),
        net: vec![0; spec.n()],
        seen: HashMap::new(),
        nodes: 0,
        cap: limits.search_nodes,
    };
    search.run(0, 0)?;
    Ok(finish(&slots, &search.best_path, search.best, search.nodes, spec.n()))
}

/// Plain enumeration of every action sequence; a test oracle for small windows.
pub fn lookahead_psi_exhaustive(spec: &MarketSpec, window: &[PriceVector], limits: &Limits) -> Result<LookaheadResult> {
    if window.is_empty() {
        return Err(Error::structural("lookahead window must have at least one slot"));
    }
    let slots = slots(spec, window, limits)?;
    let total = slots
        .iter()
        .try_fold(1u128, |acc, s| acc.checked_mul(s.actions.len() as u128))
        .unwrap_or(u128::MAX);
    if total > limits.search_nodes {
        return Err(Error::Capacity {
            what: "exhaustive lookahead",
            required: total,
            cap: limits.search_nodes,
            advice: "use a shorter lookahead window",
        });
    }
    let mut idx = vec![0usize; slots.len()];
    let mut best = 0i64;
    let mut best_path = Vec::new();
    loop {
        let mut net = vec![0i64; spec.n()];
        let mut profit = 0;
        for (s, &i) in slots.iter().zip(&idx) {
            profit += s.profits[i];
            for (d, x) in net.iter_mut().zip(&s.nets[i]) {
                *d += x;
            }
        }
        if net.iter().all(|&d| d >= 0) && profit > best {
            best = profit;
            best_path = idx.clone();
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(finish(&slots, &best_path, best, total, spec.n()));
            }
            idx[k] += 1;
            if idx[k] < slots[k].actions.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// `psi` for frames `[mT, (m+1)T)`, `m = 0..frames`.
pub fn lookahead_frames(spec: &MarketSpec, trace: &[PriceVector], t: usize, frames: usize) -> Result<Vec<LookaheadResult>> {
    if t == 0 {
        return Err(Error::Range("frame length T must be positive".into()));
    }
    if trace.len() < t * frames {
        return Err(Error::Range(format!(
            "trace has {} slots, {frames} frames of {t} need {}",
            trace.len(),
            t * frames
        )));
    }
    let limits = Limits::from_env();
    (0..frames)
        .map(|m| lookahead_psi_with(spec, &trace[m * t..(m + 1) * t], &limits))
        .collect()
}

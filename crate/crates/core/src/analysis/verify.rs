//! Exact sample-path checks on trajectories.

use num_rational::Ratio;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{slot_profit, validate_decision, MarketSpec, PortfolioState, PriceVector, TradeDecision};
use crate::money::{widen, Money};
use crate::trader::{v_pmax, SlotObjective, Trajectory};

use super::{d_exact, lyapunov, queue_at, BoundReport, Exact, Locus, Tracker, Verdict};

fn int(v: i64) -> Exact {
    Ratio::from_integer(v as i128)
}

/// `V * profit` with profit in dollars.
fn v_times(v: Ratio<i64>, profit: Money) -> Exact {
    widen(v) * profit.to_ratio()
}

fn sum_mu_sq(spec: &MarketSpec) -> Exact {
    int(spec.stocks.iter().map(|s| s.mu_max * s.mu_max).sum())
}

/// Rejects an alternative that breaks a decision constraint. Ownership is
/// only enforced when the check needs it.
fn check_alternative(
    spec: &MarketSpec,
    prices: &PriceVector,
    queue: &[i64],
    d: &TradeDecision,
    slot: usize,
    ownership: bool,
) -> Result<()> {
    let state = PortfolioState::new(queue.to_vec());
    if let Some(v) = validate_decision(spec, prices, &state, d, ownership)?.into_iter().next() {
        let constraint = match v.stock {
            Some(n) => format!("{} (stock {n})", v.constraint),
            None => v.constraint.to_string(),
        };
        return Err(Error::InfeasibleAlternative {
            slot: slot as u64,
            constraint,
        });
    }
    Ok(())
}

fn check_window(traj: &Trajectory, t0: usize, t: usize) -> Result<()> {
    if t == 0 {
        return Err(Error::Range("window length T must be positive".into()));
    }
    if t0 + t > traj.len() {
        return Err(Error::Range(format!(
            "window [{t0}, {}) exceeds trajectory length {}",
            t0 + t,
            traj.len()
        )));
    }
    Ok(())
}

/// Queue band and the two threshold events that keep queues inside it.
///
/// Every `Q_n(t)` must lie in `[theta_n - V p_max - mu_max, theta_n + mu_max]`
/// (which is `[mu_max, V p_max + 3 mu_max]` for the default targets), no
/// sale may happen while `Q_n < theta_n - V p_max`, and no purchase while
/// `Q_n > theta_n`.
pub fn verify_queue_band(traj: &Trajectory) -> BoundReport {
    let spec = &traj.spec;
    let theta: Vec<Exact> = traj.params.theta_ratios().into_iter().map(widen).collect();
    let vp: Vec<Exact> = v_pmax(spec, traj.params.v()).into_iter().map(widen).collect();
    let mut tr = Tracker::new("queue_band");
    let mut clause: Option<String> = None;
    for t in 0..=traj.len() {
        let queue = queue_at(traj, t);
        for (n, s) in spec.stocks.iter().enumerate() {
            let q = int(queue[n]);
            let lo = theta[n] - vp[n] - int(s.mu_max);
            let hi = theta[n] + int(s.mu_max);
            let margin = (q - lo).min(hi - q);
            if margin.is_negative() && clause.is_none() {
                clause = Some(format!("Q_{n}({t}) = {} outside [{lo}, {hi}]", queue[n]));
            }
            tr.observe(margin, || Locus {
                stock: Some(n),
                ..Locus::slot(t as u64)
            });
            if t == traj.len() {
                continue;
            }
            let d = &traj.records[t].decision;
            if q < theta[n] - vp[n] && d.sells[n] > 0 {
                clause.get_or_insert_with(|| format!("sold {} of stock {n} below the sell threshold at slot {t}", d.sells[n]));
                tr.observe(int(-d.sells[n]), || Locus {
                    stock: Some(n),
                    ..Locus::slot(t as u64)
                });
            }
            if q > theta[n] && d.buys[n] > 0 {
                clause.get_or_insert_with(|| format!("bought {} of stock {n} above its target at slot {t}", d.buys[n]));
                tr.observe(int(-d.buys[n]), || Locus {
                    stock: Some(n),
                    ..Locus::slot(t as u64)
                });
            }
        }
    }
    tr.finish(clause)
}

/// Per-slot optimality: at every slot the emitted decision attains an
/// objective `-V phi - sum (Q - theta)(mu - A)` no larger than any supplied
/// alternative. `alternatives[t]` lists the alternatives for slot `t`; each
/// must satisfy every decision constraint, ownership included.
pub fn verify_slot_optimality(traj: &Trajectory, alternatives: &[Vec<TradeDecision>]) -> Result<BoundReport> {
    if alternatives.len() != traj.len() {
        return Err(Error::structural(format!(
            "{} alternative lists for a trajectory of {} slots",
            alternatives.len(),
            traj.len()
        )));
    }
    let spec = &traj.spec;
    let obj = SlotObjective::new(&traj.params);
    let mut tr = Tracker::new("slot_optimality");
    for (t, (rec, alts)) in traj.records.iter().zip(alternatives).enumerate() {
        let queue = traj.queue_before(t);
        let emitted = obj.value(spec, queue, &rec.prices, &rec.decision);
        for (k, alt) in alts.iter().enumerate() {
            check_alternative(spec, &rec.prices, queue, alt, t, true)?;
            let other = obj.value(spec, queue, &rec.prices, alt);
            tr.observe(obj.to_ratio(other - emitted), || Locus {
                alternative: Some(k),
                ..Locus::slot(t as u64)
            });
        }
    }
    Ok(tr.finish(None))
}

/// The `T`-slot bound
///
/// ```text
/// L(Q(t0+T)) - L(Q(t0)) - V sum phi(tau)
///   <= D T^2 - V sum phi*(tau) + sum_n |Q_n(t0) - theta_n| sum_tau (mu*_n - A*_n)
/// ```
///
/// for an alternative sequence starting at `t0` (its length is `T`). The
/// alternatives must respect the sale, fee, purchase and budget constraints;
/// ownership is not required.
pub fn verify_tslot_lemma(traj: &Trajectory, alt_sequence: &[TradeDecision], t0: usize) -> Result<BoundReport> {
    let t = alt_sequence.len();
    check_window(traj, t0, t)?;
    let spec = &traj.spec;
    let v = traj.params.v();
    let theta: Vec<Exact> = traj.params.theta_ratios().into_iter().map(widen).collect();
    let q0 = traj.queue_before(t0);
    let mut emitted = Money::ZERO;
    let mut alt_profit = Money::ZERO;
    let mut alt_net = vec![0i64; spec.n()];
    for (k, alt) in alt_sequence.iter().enumerate() {
        let rec = &traj.records[t0 + k];
        check_alternative(spec, &rec.prices, traj.queue_before(t0 + k), alt, t0 + k, false)?;
        emitted += rec.profit;
        alt_profit += slot_profit(spec, &rec.prices, alt)?;
        for (a, (&mu, &buy)) in alt_net.iter_mut().zip(alt.sells.iter().zip(&alt.buys)) {
            *a += mu - buy;
        }
    }
    let drift = lyapunov(queue_at(traj, t0 + t), &traj.params.theta_ratios()) - lyapunov(q0, &traj.params.theta_ratios());
    let lhs = drift - v_times(v, emitted);
    let tt = Ratio::from_integer((t * t) as i128);
    let rhs = d_exact(spec.stocks.iter().map(|s| s.mu_max * s.mu_max).sum(), t) * tt - v_times(v, alt_profit)
        + (0..spec.n())
            .map(|n| (int(q0[n]) - theta[n]).abs() * int(alt_net[n]))
            .sum::<Exact>();
    let mut tr = Tracker::new("tslot_lemma");
    tr.observe(rhs - lhs, || Locus::slot(t0 as u64));
    Ok(tr.finish(None))
}

/// Deterministic frame bound: with `M` frames of `T` slots and the lookahead
/// value `psi[m]` of each frame,
///
/// ```text
/// (1/MT) sum phi >= (1/MT) sum psi - D T / V - L(Q(0)) / (M T V)
/// ```
///
/// Slack is in dollars per slot. The verdict is vacuous-pass when the right
/// side is negative.
pub fn verify_thm3(traj: &Trajectory, psi: &[Money], t: usize) -> Result<BoundReport> {
    let m = psi.len();
    if m == 0 {
        return Err(Error::Range("at least one frame is required".into()));
    }
    check_window(traj, 0, m * t)?;
    let spec = &traj.spec;
    let v = widen(traj.params.v());
    let mt = Ratio::from_integer((m * t) as i128);
    let earned: Money = traj.records[..m * t].iter().map(|r| r.profit).sum();
    let psi_total: Money = psi.iter().copied().sum();
    let lhs = earned.to_ratio() / mt;
    let l0 = lyapunov(traj.initial_queue(), &traj.params.theta_ratios());
    let d = d_exact(spec.stocks.iter().map(|s| s.mu_max * s.mu_max).sum(), t);
    let rhs = psi_total.to_ratio() / mt - d * Ratio::from_integer(t as i128) / v - l0 / (mt * v);
    let mut tr = Tracker::new("frame_performance");
    tr.observe(lhs - rhs, || Locus::frame(0));
    let mut report = tr.finish(Some(format!(
        "average profit {:.6} vs bound {:.6} per slot",
        crate::money::ratio128_to_f64(&lhs),
        crate::money::ratio128_to_f64(&rhs)
    )));
    if report.verdict == Verdict::Pass && rhs.is_negative() {
        report.verdict = Verdict::VacuousPass;
    }
    report.locus = None;
    Ok(report)
}

/// One-slot drift bound at every slot:
/// `L(Q(t+1)) - L(Q(t)) <= 1/2 sum (mu - A)^2 - sum (Q - theta)(mu - A)`.
pub fn verify_drift_bound(traj: &Trajectory) -> BoundReport {
    let theta = traj.params.theta_ratios();
    let wide: Vec<Exact> = theta.iter().copied().map(widen).collect();
    let mut tr = Tracker::new("one_slot_drift");
    let mut prev = lyapunov(traj.initial_queue(), &theta);
    for (t, rec) in traj.records.iter().enumerate() {
        let q = traj.queue_before(t);
        let next = lyapunov(&rec.queue, &theta);
        let mut rhs = Ratio::from_integer(0);
        for (n, net) in rec.decision.sells.iter().zip(&rec.decision.buys).map(|(m, a)| m - a).enumerate() {
            rhs += Ratio::new((net * net) as i128, 2) - (int(q[n]) - wide[n]) * int(net);
        }
        tr.observe(rhs - (next - prev), || Locus::slot(t as u64));
        prev = next;
    }
    tr.finish(None)
}

/// Frame drift bound on every frame `[kT, (k+1)T)`:
/// `L(Q(t0+T)) - L(Q(t0)) <= T^2 B~ - sum_n (Q_n(t0) - theta_n) sum_tau (mu_n - A_n)`.
pub fn verify_frame_drift(traj: &Trajectory, t: usize) -> Result<BoundReport> {
    check_window(traj, 0, t)?;
    let theta = traj.params.theta_ratios();
    let wide: Vec<Exact> = theta.iter().copied().map(widen).collect();
    let t2 = (t * t) as i128;
    let tb = Ratio::new(t2 + 1, 2 * t2) * sum_mu_sq(&traj.spec) * Ratio::from_integer(t2);
    let mut tr = Tracker::new("frame_drift");
    for k in 0..traj.len() / t {
        let t0 = k * t;
        let q0 = traj.queue_before(t0);
        let mut net = vec![0i64; traj.spec.n()];
        for rec in &traj.records[t0..t0 + t] {
            for (x, y) in net.iter_mut().zip(rec.decision.net()) {
                *x -= y;
            }
        }
        let drift = lyapunov(queue_at(traj, t0 + t), &theta) - lyapunov(q0, &theta);
        let rhs = tb - (0..net.len()).map(|n| (int(q0[n]) - wide[n]) * int(net[n])).sum::<Exact>();
        tr.observe(rhs - drift, || Locus {
            slot: Some(t0 as u64),
            ..Locus::frame(k)
        });
    }
    Ok(tr.finish(None))
}

/// An alternative decision for slot `tau`, compared using the queue of an
/// earlier slot `t0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftedAlternative {
    pub t0: usize,
    pub tau: usize,
    pub decision: TradeDecision,
}

/// Shifted-queue bound for each item:
///
/// ```text
/// -V phi(tau) - sum (Q(t0) - theta)(mu(tau) - A(tau))
///   <= 2 (tau - t0) sum mu_max^2 - V phi*(tau) - sum (Q(t0) - theta)(mu* - A*)
/// ```
pub fn verify_shifted_queue(traj: &Trajectory, items: &[ShiftedAlternative]) -> Result<BoundReport> {
    let spec = &traj.spec;
    let obj = SlotObjective::new(&traj.params);
    let two_mu_sq = sum_mu_sq(spec) * Ratio::from_integer(2);
    let mut tr = Tracker::new("shifted_queue");
    for (k, it) in items.iter().enumerate() {
        if it.tau < it.t0 || it.tau >= traj.len() {
            return Err(Error::Range(format!(
                "slot pair (t0 = {}, tau = {}) is not ordered inside the trajectory",
                it.t0, it.tau
            )));
        }
        let rec = &traj.records[it.tau];
        check_alternative(spec, &rec.prices, traj.queue_before(it.tau), &it.decision, it.tau, false)?;
        let q0 = traj.queue_before(it.t0);
        let lhs = obj.to_ratio(obj.value(spec, q0, &rec.prices, &rec.decision));
        let rhs = two_mu_sq * Ratio::from_integer((it.tau - it.t0) as i128)
            + obj.to_ratio(obj.value(spec, q0, &rec.prices, &it.decision));
        tr.observe(rhs - lhs, || Locus {
            alternative: Some(k),
            ..Locus::slot(it.tau as u64)
        });
    }
    Ok(tr.finish(None))
}

//! Acceptance suite: one PASS/FAIL line per criterion AC-1..AC-9.
//!
//! Runs as a plain binary (no test harness) and exits non-zero when any
//! criterion fails. Every random choice derives from a fixed seed.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use common::{adversarial_source, iid_source, markov_source, random_prices, random_spec, random_trace, rng, trace_source, SpecShape};
use lyaptrade::analysis::{
    compute_constants, lyapunov, thm2_rhs, verify_queue_band, verify_slot_optimality, verify_thm1_profit,
    verify_thm2_profit, verify_thm3, verify_tslot_lemma, EnsembleStat, Verdict,
};
use lyaptrade::oracles::{
    brute_force_slot_min, drift_rebalance, enumerate_actions, enumerate_slot_decisions, lookahead_frames,
    lookahead_psi, markov_memory_epsilon, markov_memory_epsilon_mc, solve_phi_opt,
};
use lyaptrade::prices::stationary_distribution;
use lyaptrade::trader::{buy_decision_exact, buy_decision_greedy, buy_objective, SlotObjective};
use lyaptrade::{
    placeholder_wrap, Backtest, BudgetMode, Limits, MarketSpec, MarkovPriceModel, Money,
    PriceDistribution, PriceSource, PriceVector, StockSpec, TradeDecision, TraderParams,
};

const SEED: u64 = 0x5EED_2011;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// AC-1 and AC-7: queue band on random runs, then the same runs with the
// place-holder stock
// ---------------------------------------------------------------------------

const BAND_SPECS: u64 = 200;
const BAND_SLOTS: usize = 10_000;

struct BandRun {
    band_ok: Result<(), String>,
    placeholder_ok: Result<(), String>,
}

fn band_case(i: u64) -> BandRun {
    let mut r = rng(SEED, 1_000 + i);
    let spec = random_spec(&mut r, SpecShape::BAND);
    let v = [5, 50, 500][(i % 3) as usize];
    let sources = [
        ("iid", iid_source(&mut r, &spec, SpecShape::BAND.tick)),
        ("markov", markov_source(&mut r, &spec, SpecShape::BAND.tick)),
        ("adversarial", adversarial_source(&spec, BAND_SLOTS, SEED ^ i)),
    ];
    let mut out = BandRun {
        band_ok: Ok(()),
        placeholder_ok: Ok(()),
    };
    for (name, source) in &sources {
        let tag = format!("spec {i} (V={v}, {name})");
        let params = TraderParams::with_v_int(&spec, v).expect("valid params");
        let base = match Backtest::new(&spec, &params, source, BAND_SLOTS, SEED + i)
            .with_startup_purchase(true)
            .run()
        {
            Ok(t) => t,
            Err(e) => {
                out.band_ok = Err(format!("{tag}: {e}"));
                return out;
            }
        };
        if out.band_ok.is_ok() {
            let report = verify_queue_band(&base);
            if report.verdict != Verdict::Pass {
                out.band_ok = Err(format!("{tag}: {:?} at {:?}: {:?}", report.verdict, report.locus, report.detail));
            }
        }
        if out.placeholder_ok.is_ok() {
            out.placeholder_ok = placeholder_case(&spec, &params, source, &base, i).map_err(|e| format!("{tag}: {e}"));
        }
    }
    out
}

fn placeholder_case(
    spec: &MarketSpec,
    params: &TraderParams,
    source: &PriceSource,
    base: &lyaptrade::Trajectory,
    i: u64,
) -> Result<(), String> {
    let wrapped = placeholder_wrap(&params.clone().with_initial_queue(vec![0; spec.n()]), spec).map_err(err)?;
    let ph = Backtest::new(spec, &wrapped, source, BAND_SLOTS, SEED + i).run().map_err(err)?;
    for t in 0..=ph.len() {
        let real: Vec<i64> = if t == ph.len() {
            ph.records[t - 1].queue.iter().zip(ph.offset()).map(|(q, o)| q - o).collect()
        } else {
            ph.real_queue_before(t)
        };
        ensure(real.iter().all(|&q| q >= 0), || format!("real holdings {real:?} negative at slot {t}"))?;
    }
    for (n, slack) in ph.min_real_sale_slack().into_iter().enumerate() {
        ensure(slack.is_none_or(|s| s >= 0), || format!("stock {n} sold beyond real holdings (slack {slack:?})"))?;
    }
    ensure(
        ph.cumulative_profit() == base.cumulative_profit() + base.startup_cost,
        || {
            format!(
                "place-holder profit {} != {} + startup {}",
                ph.cumulative_profit(),
                base.cumulative_profit(),
                base.startup_cost
            )
        },
    )
}

fn band_and_placeholder() -> (Outcome, Outcome) {
    let runs: Vec<BandRun> = (0..BAND_SPECS).into_par_iter().map(band_case).collect();
    let runs_total = BAND_SPECS as usize * 3;
    let band = runs
        .iter()
        .find_map(|r| r.band_ok.clone().err())
        .map_or_else(|| Ok(format!("{runs_total} runs x {BAND_SLOTS} slots inside the band")), Err);
    let ph = runs
        .iter()
        .find_map(|r| r.placeholder_ok.clone().err())
        .map_or_else(
            || Ok(format!("{runs_total} place-holder runs: no fake share sold, profit matches exactly")),
            Err,
        );
    (band, ph)
}

// ---------------------------------------------------------------------------
// AC-2: i.i.d. profit bound at desk scale
// ---------------------------------------------------------------------------

fn desk_spec() -> MarketSpec {
    MarketSpec::new(vec![StockSpec::new(1, Money::from_dollars(2))], BudgetMode::Unconstrained).unwrap()
}

fn ac2() -> Outcome {
    const RUNS: u64 = 100;
    const SLOTS: usize = 100_000;
    let spec = desk_spec();
    let dist = PriceDistribution::uniform(vec![PriceVector::from_cents(&[100]), PriceVector::from_cents(&[200])])
        .map_err(err)?;
    let sol = solve_phi_opt(&spec, &dist).map_err(err)?;
    ensure(sol.phi_opt_exact.as_deref() == Some("1/2"), || format!("phi_opt = {:?}", sol.phi_opt_exact))?;
    let params = TraderParams::with_v_int(&spec, 50).map_err(err)?;
    let constants = compute_constants(&spec, 1, 0.0).map_err(err)?;
    ensure(constants.b == 0.5, || format!("B = {}", constants.b))?;
    let l0 = lyaptrade::money::ratio128_to_f64(&lyapunov(&params.initial_queue, &params.theta_ratios()));
    let source = PriceSource::Iid(dist);
    let samples: Vec<f64> = (0..RUNS)
        .into_par_iter()
        .map(|k| {
            Backtest::new(&spec, &params, &source, SLOTS, SEED)
                .stream(k)
                .run_totals()
                .map(|t| t.average_slot_profit())
        })
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let report = verify_thm1_profit(&samples, sol.phi_opt, &constants, 50.0, l0, SLOTS).map_err(err)?;
    let stat = EnsembleStat::from_samples(&samples).map_err(err)?;
    ensure(report.verdict == Verdict::Pass, || format!("{:?}: {:?}", report.verdict, report.detail))?;
    // the rounded threshold is slightly above the exact bound; clear it too
    ensure(stat.mean + 3.0 * stat.std_err >= 0.489, || format!("mean {} below 0.489 - 3 sigma", stat.mean))?;
    Ok(format!(
        "mean {:.5} +- {:.5} (3 sigma) over {RUNS} x {SLOTS} slots; bound {:.5}",
        stat.mean,
        3.0 * stat.std_err,
        0.49 - l0 / (50.0 * SLOTS as f64)
    ))
}

// ---------------------------------------------------------------------------
// AC-3: per-slot optimality against exhaustive alternatives
// ---------------------------------------------------------------------------

fn ac3() -> Outcome {
    const INSTANCES: u64 = 50;
    const SLOTS: usize = 1_000;
    let limits = Limits::default();
    let checked: Vec<usize> = (0..INSTANCES)
        .into_par_iter()
        .map(|i| -> Result<usize, String> {
            let mut r = rng(SEED, 3_000 + i);
            let spec = random_spec(&mut r, SpecShape::SMALL);
            let v = [5, 50, 500][r.gen_range(0..3)];
            let params = TraderParams::with_v_int(&spec, v).map_err(err)?;
            let source = iid_source(&mut r, &spec, SpecShape::SMALL.tick);
            let traj = Backtest::new(&spec, &params, &source, SLOTS, SEED + i).run().map_err(err)?;
            let alts: Vec<Vec<TradeDecision>> = (0..SLOTS)
                .map(|t| enumerate_slot_decisions(&spec, &traj.records[t].prices, traj.queue_before(t), &limits))
                .collect::<Result<_, _>>()
                .map_err(err)?;
            let report = verify_slot_optimality(&traj, &alts).map_err(err)?;
            ensure(report.verdict == Verdict::Pass, || format!("instance {i}: {report:?}"))?;
            let obj = SlotObjective::new(&params);
            for (t, rec) in traj.records.iter().enumerate() {
                let q = traj.queue_before(t);
                let brute = brute_force_slot_min(&params, &spec, &rec.prices, q).map_err(err)?;
                let (a, b) = (obj.value(&spec, q, &rec.prices, &rec.decision), obj.value(&spec, q, &rec.prices, &brute));
                ensure(a == b, || format!("instance {i} slot {t}: trader {a} vs brute force {b}"))?;
            }
            Ok(report.evaluated)
        })
        .collect::<Result<_, _>>()?;
    Ok(format!(
        "{INSTANCES} instances x {SLOTS} slots, {} alternative comparisons, brute-force objective matched",
        checked.iter().sum::<usize>()
    ))
}

// ---------------------------------------------------------------------------
// AC-4: deterministic frame bound against the lookahead oracle
// ---------------------------------------------------------------------------

fn ac4() -> Outcome {
    const TRACES: u64 = 20;
    const T: usize = 4;
    const M: usize = 25;
    let results: Vec<Vec<(i64, Verdict, f64)>> = (0..TRACES)
        .into_par_iter()
        .map(|i| -> Result<_, String> {
            let mut r = rng(SEED, 4_000 + i);
            let spec = random_spec(&mut r, SpecShape::SMALL);
            let trace = random_trace(&mut r, &spec, SpecShape::SMALL.tick, T * M);
            let psi: Vec<Money> = lookahead_frames(&spec, &trace, T, M)
                .map_err(err)?
                .into_iter()
                .map(|f| f.psi)
                .collect();
            let source = trace_source(trace);
            [10, 100]
                .iter()
                .map(|&v| {
                    let params = TraderParams::with_v_int(&spec, v).map_err(err)?;
                    let traj = Backtest::new(&spec, &params, &source, T * M, SEED).run().map_err(err)?;
                    let rep = verify_thm3(&traj, &psi, T).map_err(err)?;
                    ensure(rep.holds(), || format!("trace {i}, V={v}: {rep:?}"))?;
                    Ok((v, rep.verdict, rep.slack))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let flat: Vec<_> = results.into_iter().flatten().collect();
    let vacuous = flat.iter().filter(|x| x.1 == Verdict::VacuousPass).count();
    Ok(format!("{} trace/V pairs hold exactly ({vacuous} vacuous)", flat.len()))
}

// ---------------------------------------------------------------------------
// AC-5: T-slot sample-path inequality
// ---------------------------------------------------------------------------

fn ac5() -> Outcome {
    const TUPLES: u64 = 1_000;
    const LEN: usize = 60;
    let kinds: Vec<&str> = (0..TUPLES)
        .into_par_iter()
        .map(|i| -> Result<&str, String> {
            let mut r = rng(SEED, 5_000 + i);
            let spec = random_spec(&mut r, SpecShape::SMALL);
            let v = [5, 50, 500][r.gen_range(0..3)];
            let params = TraderParams::with_v_int(&spec, v).map_err(err)?;
            let trace = random_trace(&mut r, &spec, SpecShape::SMALL.tick, LEN);
            let traj = Backtest::new(&spec, &params, &trace_source(trace), LEN, SEED).run().map_err(err)?;
            let t = r.gen_range(1..=8usize);
            let t0 = r.gen_range(0..=LEN - t);
            let prices: Vec<PriceVector> = traj.records[t0..t0 + t].iter().map(|x| x.prices.clone()).collect();
            let (kind, alt) = match i % 3 {
                0 if t <= 5 => ("lookahead", lookahead_psi(&spec, &prices).map_err(err)?.decisions),
                1 => ("zero", vec![TradeDecision::zero(spec.n()); t]),
                _ => {
                    let alt = prices
                        .iter()
                        .map(|p| {
                            let set = enumerate_actions(&spec, p).map_err(err)?;
                            Ok(set.actions[r.gen_range(0..set.len())].clone())
                        })
                        .collect::<Result<Vec<_>, String>>()?;
                    ("random", alt)
                }
            };
            let rep = verify_tslot_lemma(&traj, &alt, t0).map_err(err)?;
            ensure(rep.verdict == Verdict::Pass, || format!("tuple {i} ({kind}, t0={t0}, T={t}): {rep:?}"))?;
            Ok(kind)
        })
        .collect::<Result<_, _>>()?;
    let count = |k: &str| kinds.iter().filter(|&&x| x == k).count();
    Ok(format!(
        "{TUPLES} tuples hold exactly ({} lookahead, {} zero, {} random alternatives)",
        count("lookahead"),
        count("zero"),
        count("random")
    ))
}

// ---------------------------------------------------------------------------
// AC-6: greedy purchase relaxation
// ---------------------------------------------------------------------------

fn ac6() -> Outcome {
    const INSTANCES: u64 = 1_000;
    let shape = SpecShape {
        general_costs: false,
        budgets: false,
        ..SpecShape::BAND
    };
    let max_overshoot: Vec<i64> = (0..INSTANCES)
        .into_par_iter()
        .map(|i| -> Result<i64, String> {
            let mut r = rng(SEED, 6_000 + i);
            let base = random_spec(&mut r, shape);
            let reach: i64 = base.stocks.iter().map(|s| s.mu_max * s.p_max.cents()).sum();
            let x = r.gen_range(1..=reach);
            let spec = MarketSpec::new(base.stocks, BudgetMode::Money(Money::from_cents(x))).map_err(err)?;
            let v = [5, 50, 500][r.gen_range(0..3)];
            let params = TraderParams::with_v_int(&spec, v).map_err(err)?;
            let band = params.queue_band(&spec);
            let queue: Vec<i64> = band
                .iter()
                .map(|(lo, hi)| r.gen_range(lo.to_integer()..=hi.to_integer()))
                .collect();
            let prices = random_prices(&mut r, &spec, shape.tick);
            let greedy = buy_decision_greedy(&params, &spec, &prices, &queue).map_err(err)?;
            let exact = buy_decision_exact(&params, &spec, &prices, &queue).map_err(err)?;
            let obj = SlotObjective::new(&params);
            let (g, e) = (
                buy_objective(&obj, &spec, &prices, &queue, &greedy),
                buy_objective(&obj, &spec, &prices, &queue, &exact),
            );
            ensure(g <= e, || format!("instance {i}: greedy {g} above exact {e}"))?;
            let spend: i64 = greedy.iter().zip(prices.iter()).map(|(&a, p)| a * p.cents()).sum();
            let cap = spec.stocks.iter().map(|s| s.p_max.cents()).max().unwrap_or(0);
            ensure(spend - x <= cap, || format!("instance {i}: overshoot {} > {cap}", spend - x))?;
            Ok(spend - x)
        })
        .collect::<Result<_, _>>()?;
    Ok(format!(
        "{INSTANCES} instances: greedy objective <= exact, largest overshoot {} cents",
        max_overshoot.iter().max().copied().unwrap_or(0).max(0)
    ))
}

// ---------------------------------------------------------------------------
// AC-8: best price-only policy against convex combinations of pure policies
// ---------------------------------------------------------------------------

/// Solves the square system `a w = b` by Gaussian elimination with partial
/// pivoting; `None` when singular.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for i in 0..k {
            if i != c {
                let f = a[i][c] / a[c][c];
                for j in c..k {
                    a[i][j] -= f * a[c][j];
                }
                b[i] -= f * b[c];
            }
        }
    }
    Some((0..k).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Best average profit over mixtures of deterministic price-to-action maps
/// whose average drift is non-negative in every stock. A basic optimal
/// mixture uses at most `N + 1` maps with the remaining constraints tight,
/// so every such support and tight set is tried.
fn mixture_oracle(spec: &MarketSpec, dist: &PriceDistribution) -> Result<f64, String> {
    const TOL: f64 = 1e-9;
    let n = spec.n();
    let sets: Vec<_> = dist.support().iter().map(|p| enumerate_actions(spec, p)).collect::<Result<_, _>>().map_err(err)?;
    // (profit, drift) of every deterministic map, deduplicated
    let mut points: Vec<(f64, Vec<f64>)> = vec![(0.0, vec![0.0; n])];
    for (k, set) in sets.iter().enumerate() {
        let pi = dist.probs()[k];
        let profits = set.profits(spec);
        let mut next = Vec::with_capacity(points.len() * set.len());
        for (phi, d) in &points {
            for (a, action) in set.actions.iter().enumerate() {
                let mut d2 = d.clone();
                for (x, net) in d2.iter_mut().zip(action.net()) {
                    *x += pi * net as f64;
                }
                next.push((phi + pi * profits[a].as_dollars(), d2));
            }
        }
        next.sort_by(|a, b| a.partial_cmp(b).unwrap());
        next.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12 && a.1.iter().zip(&b.1).all(|(x, y)| (x - y).abs() < 1e-12));
        // keep only the most profitable map for each drift vector
        next.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.total_cmp(&a.0)));
        next.dedup_by(|a, b| a.1.iter().zip(&b.1).all(|(x, y)| (x - y).abs() < 1e-12));
        points = next;
    }
    let mut best = f64::NEG_INFINITY;
    for size in 1..=n + 1 {
        let tights = combinations(n, size - 1);
        for support in combinations(points.len(), size) {
            for tight in &tights {
                let mut a = vec![vec![1.0; size]];
                let mut b = vec![1.0];
                for &c in tight {
                    a.push(support.iter().map(|&s| points[s].1[c]).collect());
                    b.push(0.0);
                }
                let Some(w) = solve_small(a, b) else { continue };
                if w.iter().any(|&x| x < -TOL) {
                    continue;
                }
                let drift_ok = (0..n).all(|c| support.iter().zip(&w).map(|(&s, x)| x * points[s].1[c]).sum::<f64>() >= -TOL);
                if drift_ok {
                    best = best.max(support.iter().zip(&w).map(|(&s, x)| x * points[s].0).sum());
                }
            }
        }
    }
    Ok(best)
}

fn ac8() -> Outcome {
    const INSTANCES: u64 = 20;
    let gaps: Vec<f64> = (0..INSTANCES)
        .into_par_iter()
        .map(|i| -> Result<f64, String> {
            let mut r = rng(SEED, 8_000 + i);
            let shape = if i % 2 == 0 {
                SpecShape {
                    max_stocks: 1,
                    ..SpecShape::SMALL
                }
            } else {
                SpecShape {
                    max_stocks: 2,
                    max_mu: 1,
                    ..SpecShape::SMALL
                }
            };
            let spec = random_spec(&mut r, shape);
            let k = if spec.n() == 1 { r.gen_range(2..=3) } else { 2 };
            let support: Vec<PriceVector> = (0..k).map(|_| random_prices(&mut r, &spec, shape.tick)).collect();
            let probs: Vec<f64> = match k {
                2 => vec![0.25, 0.75],
                _ => vec![0.5, 0.25, 0.25],
            };
            let dist = PriceDistribution::new(support, probs).map_err(err)?;
            let sol = solve_phi_opt(&spec, &dist).map_err(err)?;
            let oracle = mixture_oracle(&spec, &dist)?;
            let gap = (sol.phi_opt - oracle).abs();
            ensure(gap <= 1e-9, || format!("instance {i}: LP {} vs mixtures {oracle}", sol.phi_opt))?;
            let reb = drift_rebalance(&spec, &sol);
            let drift = reb.policy_drifts(&spec);
            ensure(drift.iter().all(|d| d.abs() <= 1e-9), || format!("instance {i}: rebalanced drift {drift:?}"))?;
            let phi = reb.policy_profit(&spec);
            ensure((phi - sol.phi_opt).abs() <= 1e-9, || {
                format!("instance {i}: rebalancing moved profit {} -> {phi}", sol.phi_opt)
            })?;
            Ok(gap)
        })
        .collect::<Result<_, _>>()?;
    Ok(format!(
        "{INSTANCES} instances: LP within {:.1e} of the mixture oracle; rebalanced drift 0, profit unchanged",
        gaps.iter().copied().fold(0.0, f64::max)
    ))
}

// ---------------------------------------------------------------------------
// AC-9: Markov profit bound
// ---------------------------------------------------------------------------

fn ac9() -> Outcome {
    const M: usize = 200;
    const RUNS: u64 = 100;
    let spec = desk_spec();
    let model = MarkovPriceModel::two_state(PriceVector::from_cents(&[100]), PriceVector::from_cents(&[200]), 0.7, 0.7)
        .map_err(err)?;
    let sol = solve_phi_opt(&spec, &stationary_distribution(&model).map_err(err)?).map_err(err)?;
    let policy = drift_rebalance(&spec, &sol);
    let source = PriceSource::Markov {
        model: model.clone(),
        initial_state: 0,
    };
    let mut v: i64 = 500;
    let mut notes = Vec::new();
    loop {
        let params = TraderParams::with_v_int(&spec, v).map_err(err)?;
        let l0 = lyaptrade::money::ratio128_to_f64(&lyapunov(&params.initial_queue, &params.theta_ratios()));
        // pick the window length that makes the bound tightest
        let mut best: Option<(f64, usize, f64)> = None;
        for t in 1..=200 {
            let eps = markov_memory_epsilon(&spec, &model, &policy, t).map_err(err)?.epsilon;
            let c = compute_constants(&spec, t, eps).map_err(err)?;
            let rhs = thm2_rhs(sol.phi_opt, &c, v as f64, M, l0);
            if best.is_none_or(|b| rhs > b.0) {
                best = Some((rhs, t, eps));
            }
        }
        let (rhs, t, eps) = best.expect("non-empty scan");
        let mc = markov_memory_epsilon_mc(&spec, &model, &policy, t, 20_000, SEED).map_err(err)?;
        ensure((mc.epsilon - eps).abs() < 0.02, || format!("Monte Carlo epsilon {} vs exact {eps}", mc.epsilon))?;
        let constants = compute_constants(&spec, t, eps).map_err(err)?;
        let samples: Vec<f64> = (0..RUNS)
            .into_par_iter()
            .map(|k| {
                Backtest::new(&spec, &params, &source, M * t, SEED)
                    .stream(k)
                    .run_totals()
                    .map(|x| x.average_slot_profit())
            })
            .collect::<Result<_, _>>()
            .map_err(err)?;
        let report = verify_thm2_profit(&samples, sol.phi_opt, &constants, v as f64, M, l0).map_err(err)?;
        match report.verdict {
            Verdict::Fail => return Err(format!("V={v}, T={t}, eps={eps:.4}: {:?}", report.detail)),
            Verdict::VacuousPass => {
                notes.push(format!("V={v} vacuous (bound {rhs:.4})"));
                ensure(v < 1 << 20, || "bound stayed vacuous".into())?;
                v *= 2;
            }
            Verdict::Pass => {
                notes.push(format!(
                    "V={v}, T={t}, eps={eps:.4} (Monte Carlo {:.4}): {}",
                    mc.epsilon,
                    report.detail.unwrap_or_default()
                ));
                return Ok(notes.join("; "));
            }
        }
    }
}

fn main() -> ExitCode {
    // Capacity overrides from the environment would change what is tested.
    std::env::remove_var(lyaptrade::limits::CAPACITY_ENV);
    let mut failed = 0;
    let mut line = |id: &str, outcome: Outcome, took: Duration| {
        let secs = took.as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {id}: {msg} [{secs:.1}s]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {id}: {msg} [{secs:.1}s]");
            }
        }
    };
    let clock = Instant::now();
    let (band, placeholder) = band_and_placeholder();
    let band_time = clock.elapsed();
    line("AC-1", band, band_time);
    let timed = |f: fn() -> Outcome| {
        let start = Instant::now();
        let out = f();
        (out, start.elapsed())
    };
    let (o, d) = timed(ac2);
    line("AC-2", o, d);
    let (o, d) = timed(ac3);
    line("AC-3", o, d);
    let (o, d) = timed(ac4);
    line("AC-4", o, d);
    let (o, d) = timed(ac5);
    line("AC-5", o, d);
    let (o, d) = timed(ac6);
    line("AC-6", o, d);
    line("AC-7", placeholder, band_time);
    let (o, d) = timed(ac8);
    line("AC-8", o, d);
    let (o, d) = timed(ac9);
    line("AC-9", o, d);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

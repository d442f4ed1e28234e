//! Subcommand implementations. Each returns the summary document and the
//! overall status; the caller persists the bundle and maps the status to an
//! exit code.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use lyaptrade::oracles::{markov_memory_epsilon, LookaheadResult, MemoryProfile};
use lyaptrade::prices::stationary_distribution;
use lyaptrade::trader::{ScaledRun, ScalingPlan, TrajectorySummary};
use lyaptrade::{
    compute_constants, drift_rebalance, load_trace, lookahead_frames, scaled_windows_run, solve_phi_opt, write_trace,
    Backtest, BoundConstants, BoundReport, BudgetMode, CapPolicy, EnsembleStat, MarketSpec, Money, PonlySolution,
    PriceSource, PriceTrace, PriceVector, StockSpec, Trajectory, Verdict,
};

use crate::checks::{self, CheckOutcome, StatisticalPlan};
use crate::config::{CheckName, ConfigError, OracleConfig, Resolved};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Overall result of a command, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    StatisticalFail,
    DeterministicFail,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::DeterministicFail => 2,
            Status::StatisticalFail => 3,
        }
    }

    fn of(outcomes: &[CheckOutcome]) -> Status {
        outcomes
            .iter()
            .filter(|o| o.report.verdict == Verdict::Fail)
            .map(|o| {
                if o.statistical {
                    Status::StatisticalFail
                } else {
                    Status::DeterministicFail
                }
            })
            .max()
            .unwrap_or(Status::Pass)
    }
}

/// A summary document plus the files that go next to it.
pub struct Bundle {
    pub summary: serde_json::Value,
    pub status: Status,
    /// Relative path and contents of each extra file.
    pub files: Vec<(PathBuf, Vec<u8>)>,
}

impl Bundle {
    /// Pretty JSON with a trailing newline. Contains no timestamps, so equal
    /// inputs give equal bytes.
    pub fn summary_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(&self.summary).expect("summary serializes");
        out.push(b'\n');
        out
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (rel, bytes) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        let path = dir.join("summary.json");
        fs::write(&path, self.summary_bytes()).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Options shared by the commands that run the trader.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Test hook: break the queue record of this slot in replication 0.
    pub inject_corruption: Option<u64>,
}

fn to_json(value: impl Serialize) -> serde_json::Value {
    serde_json::to_value(value).expect("summary serializes")
}

fn check_list(r: &Resolved) -> Vec<CheckName> {
    let mut list = r.config.verify.clone();
    if !list.contains(&CheckName::Dynamics) {
        list.push(CheckName::Dynamics);
    }
    list
}

fn trajectory_csv(traj: &Trajectory) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    Ok(buf)
}

fn corrupt(traj: &mut Trajectory, slot: u64) -> Result<()> {
    let rec = traj
        .records
        .iter_mut()
        .find(|r| r.slot == slot)
        .with_context(|| format!("no slot {slot} to corrupt"))?;
    rec.queue[0] = -1;
    Ok(())
}

#[derive(Serialize)]
struct QueueStats {
    min: Vec<i64>,
    max: Vec<i64>,
}

#[derive(Serialize)]
struct ReplicationSummary {
    replication: usize,
    #[serde(flatten)]
    summary: TrajectorySummary,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    version: &'static str,
    command: &'static str,
    config: serde_json::Value,
    market: &'a MarketSpec,
    trader: &'a lyaptrade::TraderParams,
    constants: BoundConstants,
    /// Average slot profit per replication in dollars, startup purchase excluded.
    profit: EnsembleStat,
    queue: QueueStats,
    replications: Vec<ReplicationSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    statistical_plans: Vec<StatisticalPlan>,
    checks: Vec<CheckOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    injected_corruption: Option<u64>,
    status: Status,
    exit_code: u8,
}

/// Per-replication work: the summary, the deterministic reports (one per
/// check in list order) and one sample per statistical plan.
struct Analyzed {
    summary: TrajectorySummary,
    reports: Vec<BoundReport>,
    samples: Vec<f64>,
    csv: Option<Vec<u8>>,
}

fn analyze(
    traj: &Trajectory,
    checks: &[CheckName],
    frame: Option<usize>,
    plans: &[StatisticalPlan],
    keep_csv: bool,
) -> Result<Analyzed> {
    let reports = checks
        .iter()
        .filter(|c| !c.is_statistical())
        .map(|&c| checks::deterministic(c, traj, frame).with_context(|| format!("check {}", c.as_str())))
        .collect::<Result<Vec<_>>>()?;
    let samples = plans.iter().map(|p| p.sample(traj)).collect::<Result<Vec<_>>>()?;
    Ok(Analyzed {
        summary: traj.summary(),
        reports,
        samples,
        csv: if keep_csv { Some(trajectory_csv(traj)?) } else { None },
    })
}

fn plans_for(r: &Resolved, checks: &[CheckName], horizon: usize) -> Result<Vec<StatisticalPlan>> {
    checks
        .iter()
        .filter(|c| c.is_statistical())
        .map(|&c| StatisticalPlan::new(c, &r.market, &r.params, &r.source, horizon, r.frame_len()))
        .collect()
}

/// Merges per-replication results into the check outcomes.
fn outcomes(checks: &[CheckName], plans: &[StatisticalPlan], runs: &[Analyzed], v: f64) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let deterministic: Vec<CheckName> = checks.iter().copied().filter(|c| !c.is_statistical()).collect();
    for (i, &c) in deterministic.iter().enumerate() {
        out.push(checks::merge_replications(c, runs.iter().map(|a| a.reports[i].clone()).collect())?);
    }
    for (i, plan) in plans.iter().enumerate() {
        let samples: Vec<f64> = runs.iter().map(|a| a.samples[i]).collect();
        out.push(CheckOutcome {
            name: plan.check,
            statistical: true,
            report: plan.judge(&samples, v)?,
        });
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    command: &'static str,
    r: &Resolved,
    checks: &[CheckName],
    plans: Vec<StatisticalPlan>,
    runs: Vec<Analyzed>,
    names: Vec<String>,
    opts: RunOptions,
) -> Result<Bundle> {
    let v = r.params.v.to_f64();
    let outcomes = outcomes(checks, &plans, &runs, v)?;
    let status = Status::of(&outcomes);
    let n = r.market.n();
    let mut queue = QueueStats {
        min: vec![i64::MAX; n],
        max: vec![i64::MIN; n],
    };
    for a in &runs {
        for k in 0..n {
            queue.min[k] = queue.min[k].min(a.summary.min_queue[k]);
            queue.max[k] = queue.max[k].max(a.summary.max_queue[k]);
        }
    }
    let per_slot: Vec<f64> = runs
        .iter()
        .map(|a| a.summary.trading_profit.as_dollars() / a.summary.slots as f64)
        .collect();
    let profit = EnsembleStat::from_samples(&per_slot)?;
    let mut files = Vec::new();
    let mut replications = Vec::with_capacity(runs.len());
    for (k, a) in runs.into_iter().enumerate() {
        if let Some(csv) = a.csv {
            files.push((PathBuf::from("trajectories").join(&names[k]), csv));
        }
        replications.push(ReplicationSummary {
            replication: k,
            summary: a.summary,
        });
    }
    let summary = RunSummary {
        version: VERSION,
        command,
        config: r.config.echo(),
        market: &r.market,
        trader: &r.params,
        constants: compute_constants(&r.market, r.frame_len().unwrap_or(1), 0.0)?,
        profit,
        queue,
        replications,
        statistical_plans: plans,
        checks: outcomes,
        injected_corruption: opts.inject_corruption,
        status,
        exit_code: status.exit_code(),
    };
    Ok(Bundle {
        summary: to_json(summary),
        status,
        files,
    })
}

fn replication_name(k: usize) -> String {
    format!("replication_{k:04}.csv")
}

/// Single or ensemble backtest with the configured checks. Replication `k`
/// draws prices from random stream `k` of the seed, so results do not depend
/// on the worker count.
pub fn run(r: &Resolved, opts: RunOptions) -> Result<Bundle> {
    let cfg = &r.config;
    let checks = check_list(r);
    let plans = plans_for(r, &checks, cfg.horizon)?;
    let frame = r.frame_len();
    let keep_csv = cfg.output.trajectories;
    let runs = (0..cfg.replications)
        .into_par_iter()
        .map(|k| {
            let mut traj = Backtest::new(&r.market, &r.params, &r.source, cfg.horizon, cfg.seed)
                .stream(k as u64)
                .with_startup_purchase(cfg.trader.charges_startup())
                .run()?;
            if k == 0 {
                if let Some(slot) = opts.inject_corruption {
                    corrupt(&mut traj, slot)?;
                }
            }
            analyze(&traj, &checks, frame, &plans, keep_csv).with_context(|| format!("replication {k}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let names = (0..runs.len()).map(replication_name).collect();
    summarize("run", r, &checks, plans, runs, names, opts)
}

/// Checks stored trajectories (CSV files, or directories of them) against
/// the configuration they were produced under.
pub fn verify(r: &Resolved, inputs: &[PathBuf]) -> Result<Bundle> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            found.retain(|p| p.extension().is_some_and(|x| x == "csv"));
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        bail!("no trajectory files to verify");
    }
    let trajectories = files
        .iter()
        .map(|path| {
            let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Trajectory::read_csv(r.market.clone(), r.params.clone(), BufReader::new(file))
                .with_context(|| format!("reading {}", path.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let horizon = trajectories.iter().map(Trajectory::len).min().unwrap_or(0);
    if horizon == 0 {
        bail!("a trajectory file has no slots");
    }
    let checks = check_list(r);
    let plans = plans_for(r, &checks, horizon)?;
    let frame = r.frame_len();
    let runs = trajectories
        .par_iter()
        .map(|traj| analyze(traj, &checks, frame, &plans, false))
        .collect::<Result<Vec<_>>>()?;
    let names = files.iter().map(|p| p.display().to_string()).collect();
    let mut bundle = summarize("verify", r, &checks, plans, runs, names, RunOptions::default())?;
    bundle.summary["inputs"] = to_json(files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>());
    Ok(bundle)
}

#[derive(Serialize)]
struct PhiOptSummary {
    version: &'static str,
    command: &'static str,
    config: serde_json::Value,
    mode: &'static str,
    solution: PonlySolution,
    /// Same profit with every stock's average net purchase moved to zero.
    rebalanced: PonlySolution,
    #[serde(skip_serializing_if = "Option::is_none")]
    memory: Option<MemoryProfile>,
}

#[derive(Serialize)]
struct FrameEntry {
    frame: usize,
    first_slot: usize,
    #[serde(flatten)]
    result: LookaheadResult,
}

#[derive(Serialize)]
struct LookaheadSummary {
    version: &'static str,
    command: &'static str,
    config: serde_json::Value,
    mode: &'static str,
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "M")]
    frames: usize,
    psi_total: Money,
    /// Dollars per slot.
    psi_average: f64,
    frame_results: Vec<FrameEntry>,
}

/// The first `len` prices of replication 0.
fn realized_prices(r: &Resolved, len: usize) -> Result<Vec<PriceVector>> {
    let mut stream = r.source.stream(lyaptrade::stream_rng(r.config.seed, 0));
    (0..len).map(|_| Ok(stream.next_prices()?)).collect()
}

/// Best price-only policy (i.i.d. or stationary Markov prices), or per-frame
/// lookahead optima over the first `horizon` prices.
pub fn oracle(r: &Resolved, mode: OracleConfig) -> Result<Bundle> {
    let config = r.config.echo();
    match mode {
        OracleConfig::PhiOpt => {
            let (dist, model) = match &r.source {
                PriceSource::Iid(d) => (d.clone(), None),
                PriceSource::Markov { model, .. } => (stationary_distribution(model)?, Some(model)),
                PriceSource::Trace(_) => {
                    return Err(ConfigError::new("/source", "phi_opt needs an iid or markov price source").into())
                }
            };
            let solution = solve_phi_opt(&r.market, &dist)?;
            let rebalanced = drift_rebalance(&r.market, &solution);
            let memory = match (model, r.frame_len()) {
                (Some(m), Some(t)) => Some(markov_memory_epsilon(&r.market, m, &rebalanced, t)?),
                _ => None,
            };
            let summary = PhiOptSummary {
                version: VERSION,
                command: "oracle",
                config,
                mode: "phi_opt",
                solution,
                rebalanced,
                memory,
            };
            Ok(Bundle {
                summary: to_json(summary),
                status: Status::Pass,
                files: Vec::new(),
            })
        }
        OracleConfig::Lookahead { t } => {
            if t == 0 || t > r.config.horizon {
                return Err(ConfigError::new("/oracle/T", "lookahead window must be between 1 and the horizon").into());
            }
            let frames = r.config.horizon / t;
            let prices = realized_prices(r, frames * t)?;
            let results = lookahead_frames(&r.market, &prices, t, frames)?;
            let psi_total: Money = results.iter().map(|f| f.psi).sum();
            let mut csv = String::from("frame,first_slot,psi\n");
            for (m, f) in results.iter().enumerate() {
                csv.push_str(&format!("{m},{},{}\n", m * t, f.psi));
            }
            let summary = LookaheadSummary {
                version: VERSION,
                command: "oracle",
                config,
                mode: "lookahead",
                t,
                frames,
                psi_total,
                psi_average: psi_total.as_dollars() / (frames * t) as f64,
                frame_results: results
                    .into_iter()
                    .enumerate()
                    .map(|(m, result)| FrameEntry {
                        frame: m,
                        first_slot: m * t,
                        result,
                    })
                    .collect(),
            };
            Ok(Bundle {
                summary: to_json(summary),
                status: Status::Pass,
                files: vec![(PathBuf::from("frames.csv"), csv.into_bytes())],
            })
        }
    }
}

#[derive(Serialize)]
struct ScaledSummary {
    version: &'static str,
    command: &'static str,
    config: serde_json::Value,
    #[serde(flatten)]
    run: ScaledRun,
    total_profit: Money,
    /// Scale the next window would use.
    final_scale: f64,
}

/// Windows whose trade sizes grow with past profit; the wealth curve goes to
/// `wealth.csv`.
pub fn scaled(r: &Resolved, plan: ScalingPlan) -> Result<Bundle> {
    plan.validate().map_err(|e| ConfigError::new("/scaled", e.to_string()))?;
    let run = scaled_windows_run(&r.market, &r.params, plan, &r.source, r.config.seed)?;
    let mut csv = String::from("window,first_slot,scale,alpha,q,profit,cumulative_profit\n");
    let mut cumulative = Money::ZERO;
    for w in &run.windows {
        cumulative += w.profit;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            w.window,
            w.window * plan.window_len(),
            w.scale,
            w.alpha,
            w.q,
            w.profit,
            cumulative
        ));
    }
    let final_scale = run.windows.last().map_or(1.0, |w| w.scale * (1.0 + w.alpha));
    let summary = ScaledSummary {
        version: VERSION,
        command: "scaled",
        config: r.config.echo(),
        total_profit: run.total_profit(),
        run,
        final_scale,
    };
    Ok(Bundle {
        summary: to_json(summary),
        status: Status::Pass,
        files: vec![(PathBuf::from("wealth.csv"), csv.into_bytes())],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TraceFormat {
    Csv,
    Json,
}

fn trace_format(path: &Path) -> Result<TraceFormat> {
    match path.extension().and_then(|x| x.to_str()) {
        Some("csv") => Ok(TraceFormat::Csv),
        Some("json") => Ok(TraceFormat::Json),
        _ => bail!("{}: expected a .csv or .json file", path.display()),
    }
}

/// A market that accepts any non-negative price for `n` stocks, used when no
/// configuration constrains the trace.
fn open_market(n: usize) -> Result<MarketSpec> {
    if n == 0 {
        bail!("trace has no price columns");
    }
    Ok(MarketSpec::new(
        vec![StockSpec::new(1, Money::from_cents(1)); n],
        BudgetMode::Unconstrained,
    )?)
}

fn csv_columns(path: &Path) -> Result<usize> {
    let mut header = String::new();
    BufReader::new(fs::File::open(path)?).read_line(&mut header)?;
    Ok(header.trim().split(',').count().saturating_sub(1))
}

#[derive(Serialize)]
struct ConvertSummary {
    version: &'static str,
    command: &'static str,
    input: String,
    output: String,
    slots: usize,
    stocks: usize,
    /// Per-stock price caps after loading.
    caps: Vec<Money>,
}

/// Converts a price trace between the canonical CSV and JSON forms,
/// validating it against `market` when one is given.
pub fn trace_convert(
    input: &Path,
    output: &Path,
    market: Option<&MarketSpec>,
    cap_policy: CapPolicy,
) -> Result<serde_json::Value> {
    let file = fs::File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let (trace, caps) = match trace_format(input)? {
        TraceFormat::Csv => {
            let loaded = match market {
                Some(m) => load_trace(BufReader::new(file), m, cap_policy)?,
                None => load_trace(BufReader::new(file), &open_market(csv_columns(input)?)?, CapPolicy::AutoExpand)?,
            };
            (loaded.trace, loaded.caps)
        }
        TraceFormat::Json => {
            let trace: PriceTrace = serde_json::from_reader(BufReader::new(file))
                .with_context(|| format!("parsing {}", input.display()))?;
            let caps = json_caps(&trace, market, cap_policy)?;
            (trace, caps)
        }
    };
    let out = fs::File::create(output).with_context(|| format!("creating {}", output.display()))?;
    let mut out = BufWriter::new(out);
    match trace_format(output)? {
        TraceFormat::Csv => write_trace(&trace, &mut out)?,
        TraceFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &trace)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(to_json(ConvertSummary {
        version: VERSION,
        command: "trace-convert",
        input: input.display().to_string(),
        output: output.display().to_string(),
        slots: trace.len(),
        stocks: trace.sequence.first().map_or(0, PriceVector::len),
        caps,
    }))
}

/// Caps of a JSON trace: the market's caps, raised to the observed maxima
/// under auto-expansion. A trace without a market is checked for shape only.
fn json_caps(trace: &PriceTrace, market: Option<&MarketSpec>, policy: CapPolicy) -> Result<Vec<Money>> {
    let n = trace.sequence.first().map_or(0, PriceVector::len);
    if trace.sequence.iter().any(|p| p.len() != n) {
        bail!("price vectors differ in length");
    }
    let (mut caps, policy) = match market {
        None => (vec![Money::ZERO; n], CapPolicy::AutoExpand),
        Some(m) => {
            if m.n() != n {
                bail!("trace has {n} stocks, market has {}", m.n());
            }
            (m.stocks.iter().map(|s| s.p_max).collect(), policy)
        }
    };
    for (slot, p) in trace.sequence.iter().enumerate() {
        for (k, &x) in p.iter().enumerate() {
            if x.is_negative() {
                bail!("slot {slot}: negative price {x} for stock {}", k + 1);
            }
            if x > caps[k] {
                match policy {
                    CapPolicy::Reject => bail!("slot {slot}: price {x} exceeds cap {} for stock {}", caps[k], k + 1),
                    CapPolicy::AutoExpand => caps[k] = x,
                }
            }
        }
    }
    Ok(caps)
}

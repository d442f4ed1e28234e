//! `lyaptrade`: run, verify and inspect queue-based trading experiments.
//!
//! Exit codes: 0 all checks pass, 2 a deterministic check failed, 3 a
//! statistical check failed, 4 a solver capacity cap was hit, 5 the
//! configuration or command line is invalid, 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lyaptrade::trader::ScalingPlan;
use lyaptrade::CapPolicy;
use lyaptrade_cli::config::OracleConfig;
use lyaptrade_cli::{commands, error_exit_code, error_hint, exit, Bundle, ConfigError, ExperimentConfig, Resolved, RunOptions};

#[derive(Parser, Debug)]
#[command(name = "lyaptrade", version, about = "Queue-based stock trading experiments with exact verification")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Result directory; the summary goes to stdout when neither this nor
    /// output.dir is set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for replications (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Backtest (or ensemble) with the configured checks.
    Run {
        /// Test hook: corrupt the recorded queue at this slot of replication 0.
        #[arg(long, hide = true)]
        inject_corruption: Option<u64>,
    },
    /// Best price-only policy or per-frame lookahead optimum.
    Oracle {
        #[arg(long, value_enum)]
        mode: Option<OracleMode>,
        /// Lookahead window length.
        #[arg(long = "window")]
        window: Option<usize>,
    },
    /// Check stored trajectory CSV files (or directories of them).
    Verify {
        #[arg(long = "trajectory", required = true)]
        trajectories: Vec<PathBuf>,
    },
    /// Consecutive windows whose trade sizes grow with past profit.
    Scaled(ScaledArgs),
    /// Convert a price trace between CSV and JSON.
    TraceConvert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "reject")]
        cap_policy: CapArg,
    },
}

#[derive(Args, Debug)]
struct ScaledArgs {
    /// Growth rate of the trade-size scale per unit of window profit.
    #[arg(long)]
    beta: Option<f64>,
    /// Frame length T.
    #[arg(long = "frame-len")]
    frame_len: Option<usize>,
    /// Frames per window M.
    #[arg(long)]
    frames: Option<usize>,
    /// Number of consecutive windows.
    #[arg(long)]
    windows: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OracleMode {
    PhiOpt,
    Lookahead,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CapArg {
    Reject,
    AutoExpand,
}

impl From<CapArg> for CapPolicy {
    fn from(c: CapArg) -> Self {
        match c {
            CapArg::Reject => CapPolicy::Reject,
            CapArg::AutoExpand => CapPolicy::AutoExpand,
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| ConfigError::new("", "--config <path> is required for this command"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn resolve(cli: &Cli, cfg: ExperimentConfig) -> Result<Resolved> {
    let base = cli
        .config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    Ok(Resolved::new(cfg, &base)?)
}

fn oracle_mode(cfg: &ExperimentConfig, mode: Option<OracleMode>, window: Option<usize>) -> Result<OracleConfig> {
    let configured_window = match cfg.oracle {
        Some(OracleConfig::Lookahead { t }) => Some(t),
        _ => None,
    };
    Ok(match (mode, window) {
        (Some(OracleMode::PhiOpt), _) => OracleConfig::PhiOpt,
        (Some(OracleMode::Lookahead), w) | (None, w @ Some(_)) => OracleConfig::Lookahead {
            t: w.or(configured_window)
                .or(cfg.frame.map(|f| f.t))
                .ok_or_else(|| ConfigError::new("/oracle/T", "lookahead needs --window or a configured window"))?,
        },
        (None, None) => cfg.oracle.unwrap_or(OracleConfig::PhiOpt),
    })
}

fn scaling_plan(cfg: &ExperimentConfig, a: &ScaledArgs) -> Result<ScalingPlan> {
    let base = cfg.scaled;
    let pick = |flag: Option<usize>, conf: Option<usize>, what: &str| {
        flag.or(conf)
            .ok_or_else(|| ConfigError::new(format!("/scaled/{what}"), format!("{what} is required")))
    };
    Ok(ScalingPlan {
        beta: a
            .beta
            .or(base.map(|p| p.beta))
            .ok_or_else(|| ConfigError::new("/scaled/beta", "beta is required"))?,
        t: pick(a.frame_len, base.map(|p| p.t), "T")?,
        m: pick(a.frames, base.map(|p| p.m), "M")?,
        windows: pick(a.windows, base.map(|p| p.windows), "windows")?,
    })
}

/// Writes the bundle, or prints the summary when there is nowhere to write.
fn emit(bundle: &Bundle, dir: Option<&Path>) -> Result<()> {
    match dir {
        Some(dir) => {
            bundle.write_to(dir)?;
            eprintln!("{}: {:?}", dir.join("summary.json").display(), bundle.status);
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bundle.summary_bytes())?;
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<u8> {
    if let Command::TraceConvert {
        input,
        output,
        cap_policy,
    } = &cli.command
    {
        let market = match &cli.config {
            Some(_) => Some(load(cli)?.market),
            None => None,
        };
        let summary = commands::trace_convert(input, output, market.as_ref(), (*cap_policy).into())?;
        println!("{}", serde_json::to_string_pretty(&summary)?);
        return Ok(exit::OK);
    }
    let mut cfg = load(cli)?;
    let out_dir = cli.out.clone().or_else(|| cfg.output.dir.clone());
    let bundle = match &cli.command {
        Command::Run { inject_corruption } => {
            let r = resolve(cli, cfg)?;
            commands::run(
                &r,
                RunOptions {
                    inject_corruption: *inject_corruption,
                },
            )?
        }
        Command::Oracle { mode, window } => {
            let mode = oracle_mode(&cfg, *mode, *window)?;
            cfg.oracle = Some(mode);
            let r = resolve(cli, cfg)?;
            commands::oracle(&r, mode)?
        }
        Command::Verify { trajectories } => {
            let r = resolve(cli, cfg)?;
            commands::verify(&r, trajectories)?
        }
        Command::Scaled(args) => {
            let plan = scaling_plan(&cfg, args)?;
            cfg.scaled = Some(plan);
            let r = resolve(cli, cfg)?;
            commands::scaled(&r, plan)?
        }
        Command::TraceConvert { .. } => unreachable!("handled above"),
    };
    emit(&bundle, out_dir.as_deref())?;
    Ok(bundle.status.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        pool = pool.num_threads(jobs.max(1));
    }
    let result = pool
        .build()
        .context("starting the worker pool")
        .and_then(|pool| pool.install(|| execute(&cli)));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(hint) = error_hint(&e) {
                eprintln!("{hint}");
            }
            ExitCode::from(error_exit_code(&e))
        }
    }
}

//! Experiment configuration: loading with located errors, validation and
//! resolution into engine types.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lyaptrade::trader::ScalingPlan;
use lyaptrade::{
    load_trace, placeholder_wrap, BuySolver, CapPolicy, MarketSpec, MarkovPriceModel, PriceDistribution,
    PriceSource, TraderParams,
};
use lyaptrade::money::Rational;

/// A configuration problem, located by a JSON pointer into the document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "config error at {at}: {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Converts a serde path such as `market.stocks[0].mu_max` into a JSON pointer.
fn pointer_from_path(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    out
}

/// Checks the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    /// Queues stay in `[mu_max, V p_max + 3 mu_max]` (general threshold band otherwise).
    QueueBand,
    /// Recorded queues follow `max(Q - mu + A, 0)`.
    Dynamics,
    /// One-slot Lyapunov drift bound.
    Drift,
    /// Drift bound over frames of `frame.T` slots.
    FrameDrift,
    /// Emitted decision minimizes the slot objective among feasible actions.
    SlotOptimality,
    /// Frame inequality against the lookahead decisions of each frame.
    FrameLemma,
    /// Deterministic profit bound against the frame lookahead optimum.
    LookaheadProfit,
    /// In-expectation profit bound for i.i.d. prices.
    IidProfit,
    /// In-expectation profit bound for Markov prices.
    MarkovProfit,
}

impl CheckName {
    pub fn is_statistical(self) -> bool {
        matches!(self, CheckName::IidProfit | CheckName::MarkovProfit)
    }

    pub fn needs_frame(self) -> bool {
        matches!(self, CheckName::FrameDrift | CheckName::FrameLemma | CheckName::LookaheadProfit)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::QueueBand => "queue_band",
            CheckName::Dynamics => "dynamics",
            CheckName::Drift => "drift",
            CheckName::FrameDrift => "frame_drift",
            CheckName::SlotOptimality => "slot_optimality",
            CheckName::FrameLemma => "frame_lemma",
            CheckName::LookaheadProfit => "lookahead_profit",
            CheckName::IidProfit => "iid_profit",
            CheckName::MarkovProfit => "markov_profit",
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_replications() -> usize {
    1
}

fn default_checks() -> Vec<CheckName> {
    vec![CheckName::QueueBand, CheckName::Dynamics]
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_exact(s: &BuySolver) -> bool {
    *s == BuySolver::Exact
}

/// Trader section; everything except `V` has a default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraderConfig {
    #[serde(rename = "V")]
    pub v: Rational,
    /// Queue targets; defaults to `V p_max + 2 mu_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<Rational>>,
    /// Starting shares; defaults to `mu_max`, or to zero real shares with a
    /// place-holder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_queue: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub placeholder: bool,
    #[serde(default, skip_serializing_if = "is_exact")]
    pub buy_solver: BuySolver,
    /// Charge the initial `mu_max` shares at the first prices. Ignored with a
    /// place-holder, which exists to avoid that purchase.
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub startup_purchase: bool,
}

impl TraderConfig {
    pub fn resolve(&self, spec: &MarketSpec) -> Result<TraderParams, ConfigError> {
        let at = |e: lyaptrade::Error| ConfigError::new("/trader", e.to_string());
        let mut params = TraderParams::new(spec, self.v.0).map_err(at)?;
        if let Some(theta) = &self.theta {
            params = params.with_theta(theta.iter().map(|t| t.0).collect());
        }
        params = params.with_solver(self.buy_solver);
        if self.placeholder {
            let real = self.initial_queue.clone().unwrap_or_else(|| vec![0; spec.n()]);
            params = placeholder_wrap(&params.with_initial_queue(real), spec).map_err(at)?;
        } else if let Some(q) = &self.initial_queue {
            params = params.with_initial_queue(q.clone());
        }
        params.validate(spec).map_err(at)?;
        Ok(params)
    }

    pub fn charges_startup(&self) -> bool {
        self.startup_purchase && !self.placeholder
    }
}

/// Where prices come from. Trace paths are relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceConfig {
    Iid(PriceDistribution),
    Markov {
        model: MarkovPriceModel,
        #[serde(default)]
        initial_state: usize,
    },
    Trace {
        path: PathBuf,
        #[serde(default)]
        cap_policy: CapPolicy,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    #[serde(rename = "T")]
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleConfig {
    PhiOpt,
    Lookahead {
        #[serde(rename = "T")]
        t: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Result directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Write one CSV per replication next to the summary.
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub trajectories: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            trajectories: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub market: MarketSpec,
    pub trader: TraderConfig,
    pub source: SourceConfig,
    pub horizon: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_checks")]
    pub verify: Vec<CheckName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaled: Option<ScalingPlan>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// Parses and validates a document. Errors carry the JSON pointer of the
    /// offending value.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = pointer_from_path(e.path());
            ConfigError::new(pointer, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Canonical JSON form; reloading it gives an equal config.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.market
            .validate()
            .map_err(|e| ConfigError::new("/market", e.to_string()))?;
        self.trader.resolve(&self.market)?;
        if self.horizon == 0 {
            return Err(ConfigError::new("/horizon", "horizon must be at least 1 slot"));
        }
        if self.replications == 0 {
            return Err(ConfigError::new("/replications", "at least one replication is required"));
        }
        if let Some(frame) = self.frame {
            if frame.t == 0 {
                return Err(ConfigError::new("/frame/T", "frame length must be positive"));
            }
            if frame.t > self.horizon {
                return Err(ConfigError::new("/frame/T", "frame is longer than the horizon"));
            }
        }
        for (i, check) in self.verify.iter().enumerate() {
            if check.needs_frame() && self.frame.is_none() {
                return Err(ConfigError::new(
                    format!("/verify/{i}"),
                    format!("check {} needs a frame length at /frame/T", check.as_str()),
                ));
            }
            let source_ok = match check {
                CheckName::IidProfit => matches!(self.source, SourceConfig::Iid(_)),
                CheckName::MarkovProfit => matches!(self.source, SourceConfig::Markov { .. }),
                _ => true,
            };
            if !source_ok {
                return Err(ConfigError::new(
                    format!("/verify/{i}"),
                    format!("check {} does not apply to this price source", check.as_str()),
                ));
            }
        }
        match &self.source {
            SourceConfig::Iid(d) => d
                .validate_for(&self.market)
                .map_err(|e| ConfigError::new("/source", e.to_string()))?,
            SourceConfig::Markov { model, initial_state } => {
                if *initial_state >= model.len() {
                    return Err(ConfigError::new("/source/initial_state", "no such chain state"));
                }
                model
                    .validate_for(&self.market)
                    .map_err(|e| ConfigError::new("/source/model", e.to_string()))?
            }
            SourceConfig::Trace { .. } => {}
        }
        if let Some(OracleConfig::Lookahead { t }) = self.oracle {
            if t == 0 {
                return Err(ConfigError::new("/oracle/T", "lookahead window must be positive"));
            }
        }
        if let Some(plan) = &self.scaled {
            plan.validate().map_err(|e| ConfigError::new("/scaled", e.to_string()))?;
        }
        Ok(())
    }
}

/// A config with its price source loaded and parameters resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    /// The market after any cap expansion by the trace loader.
    pub market: MarketSpec,
    pub params: TraderParams,
    pub source: PriceSource,
}

impl Resolved {
    /// `base` is the directory relative trace paths are resolved against.
    pub fn new(config: ExperimentConfig, base: &Path) -> Result<Self, ConfigError> {
        let mut market = config.market.clone();
        let source = match &config.source {
            SourceConfig::Iid(d) => PriceSource::Iid(d.clone()),
            SourceConfig::Markov { model, initial_state } => PriceSource::Markov {
                model: model.clone(),
                initial_state: *initial_state,
            },
            SourceConfig::Trace { path, cap_policy } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                let file = fs::File::open(&full)
                    .map_err(|e| ConfigError::new("/source/path", format!("cannot open {}: {e}", full.display())))?;
                let loaded = load_trace(std::io::BufReader::new(file), &market, *cap_policy)
                    .map_err(|e| ConfigError::new("/source/path", format!("{}: {e}", full.display())))?;
                if loaded.trace.len() < config.horizon {
                    return Err(ConfigError::new(
                        "/horizon",
                        format!("trace has {} slots, horizon needs {}", loaded.trace.len(), config.horizon),
                    ));
                }
                for (s, cap) in market.stocks.iter_mut().zip(loaded.caps) {
                    s.p_max = cap;
                }
                PriceSource::Trace(loaded.trace)
            }
        };
        let params = config.trader.resolve(&market)?;
        Ok(Resolved {
            config,
            market,
            params,
            source,
        })
    }

    pub fn frame_len(&self) -> Option<usize> {
        self.config.frame.map(|f| f.t)
    }
}

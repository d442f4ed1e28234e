//! Price vector processes: finite-support i.i.d. draws, Markov-modulated
//! chains, CSV trace replay and a queue-agnostic adversarial trace generator.
//!
//! All randomness flows through [`SimRng`], a ChaCha8 stream cipher keyed by
//! `(seed, stream)`. Replication `r` of an experiment uses stream `r`, so
//! replications can be run on any number of workers and still reproduce
//! bit-for-bit.

use std::collections::VecDeque;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{MarketSpec, PriceVector};
use crate::money::Money;

/// Identifier recorded in result bundles; bump when the draw order changes.
pub const RNG_ALGORITHM: &str = "chacha8-stream/v1";

pub type SimRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionDoc", into = "DistributionDoc")]
pub struct PriceDistribution {
    support: Vec<PriceVector>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DistributionDoc {
    support: Vec<PriceVector>,
    probs: Vec<f64>,
}

impl TryFrom<DistributionDoc> for PriceDistribution {
    type Error = Error;
    fn try_from(doc: DistributionDoc) -> Result<Self> {
        PriceDistribution::new(doc.support, doc.probs)
    }
}

impl From<PriceDistribution> for DistributionDoc {
    fn from(d: PriceDistribution) -> Self {
        DistributionDoc {
            support: d.support,
            probs: d.probs,
        }
    }
}

impl PriceDistribution {
    /// Builds a distribution, normalizing the weights to sum to one.
    pub fn new(support: Vec<PriceVector>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(Error::structural(format!(
                "distribution needs matching non-empty support ({}) and probs ({})",
                support.len(),
                probs.len()
            )));
        }
        let dim = support[0].len();
        if support.iter().any(|p| p.len() != dim) {
            return Err(Error::structural("support vectors differ in length"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::structural("probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::structural("probabilities sum to zero"));
        }
        // weights that already sum to one are kept bit for bit, so a
        // serialized distribution reloads to an equal value
        let probs: Vec<f64> = if (total - 1.0).abs() <= PROB_TOL {
            probs
        } else {
            probs.iter().map(|p| p / total).collect()
        };
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(PriceDistribution {
            support,
            probs,
            cumulative,
        })
    }

    pub fn uniform(support: Vec<PriceVector>) -> Result<Self> {
        let k = support.len();
        PriceDistribution::new(support, vec![1.0; k])
    }

    pub fn support(&self) -> &[PriceVector] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn validate_for(&self, spec: &MarketSpec) -> Result<()> {
        self.support.iter().try_for_each(|p| spec.check_prices(p))
    }
}

/// Draws one support element.
pub fn sample_iid(dist: &PriceDistribution, rng: &mut impl Rng) -> PriceVector {
    dist.support[sample_index(&dist.cumulative, &dist.probs, rng)].clone()
}

fn sample_index(cumulative: &[f64], probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let k = cumulative.partition_point(|&c| c <= u);
    if k < cumulative.len() {
        k
    } else {
        // u landed past the rounded total; fall back to the last positive entry
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarkovDoc", into = "MarkovDoc")]
pub struct MarkovPriceModel {
    states: Vec<PriceVector>,
    transition: Vec<Vec<f64>>,
    cumulative: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct MarkovDoc {
    states: Vec<PriceVector>,
    transition: Vec<Vec<f64>>,
}

impl TryFrom<MarkovDoc> for MarkovPriceModel {
    type Error = Error;
    fn try_from(doc: MarkovDoc) -> Result<Self> {
        MarkovPriceModel::new(doc.states, doc.transition)
    }
}

impl From<MarkovPriceModel> for MarkovDoc {
    fn from(m: MarkovPriceModel) -> Self {
        MarkovDoc {
            states: m.states,
            transition: m.transition,
        }
    }
}

impl MarkovPriceModel {
    /// State ids are positions in `states`. Rejects rows that are not
    /// stochastic and chains that are not irreducible.
    pub fn new(states: Vec<PriceVector>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let k = states.len();
        if k == 0 || transition.len() != k {
            return Err(Error::structural("transition matrix must be square over the states"));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != k {
                return Err(Error::structural(format!("transition row {i} has wrong length")));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::structural(format!("transition row {i} has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::structural(format!("transition row {i} sums to {sum}")));
            }
        }
        if !is_irreducible(&transition) {
            return Err(Error::structural("Markov chain is not irreducible"));
        }
        let cumulative = transition
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(MarkovPriceModel {
            states,
            transition,
            cumulative,
        })
    }

    /// Two-state chain that stays put with the given probabilities.
    pub fn two_state(a: PriceVector, b: PriceVector, stay_a: f64, stay_b: f64) -> Result<Self> {
        MarkovPriceModel::new(vec![a, b], vec![vec![stay_a, 1.0 - stay_a], vec![1.0 - stay_b, stay_b]])
    }

    pub fn states(&self) -> &[PriceVector] {
        &self.states
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn validate_for(&self, spec: &MarketSpec) -> Result<()> {
        self.states.iter().try_for_each(|p| spec.check_prices(p))
    }
}

/// Every state reaches every other state (forward and backward closure from 0).
fn is_irreducible(transition: &[Vec<f64>]) -> bool {
    let k = transition.len();
    let closure = |forward: bool| {
        let mut seen = vec![false; k];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for j in 0..k {
                let p = if forward { transition[i][j] } else { transition[j][i] };
                if p > 0.0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    closure(true) && closure(false)
}

/// Moves the chain one step and emits the new state's price.
pub fn step_markov(
    model: &MarkovPriceModel,
    state: usize,
    rng: &mut impl Rng,
) -> Result<(usize, PriceVector)> {
    let cumulative = model
        .cumulative
        .get(state)
        .ok_or_else(|| Error::structural(format!("unknown Markov state {state}")))?;
    let next = sample_index(cumulative, &model.transition[state], rng);
    Ok((next, model.states[next].clone()))
}

/// Per-state stationary probabilities, solved from `pi P = pi`, `sum pi = 1`.
pub fn stationary_vector(model: &MarkovPriceModel) -> Result<Vec<f64>> {
    let k = model.len();
    let p = DMatrix::from_fn(k, k, |i, j| model.transition[i][j]);
    let mut a = p.transpose() - DMatrix::identity(k, k);
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(k);
    b[k - 1] = 1.0;
    let pi = a.lu().solve(&b).ok_or_else(|| Error::Numerical {
        message: "stationary system is singular".into(),
        residual: f64::INFINITY,
    })?;
    let moved = p.transpose() * &pi;
    let residual = (moved - &pi)
        .amax()
        .max((pi.sum() - 1.0).abs());
    if !residual.is_finite() || residual > 1e-10 || pi.iter().any(|&x| x < -1e-12) {
        return Err(Error::Numerical {
            message: "stationary solve is ill-conditioned".into(),
            residual,
        });
    }
    Ok(pi.iter().map(|&x| x.max(0.0)).collect())
}

/// Stationary distribution over prices; states sharing a price vector are merged.
pub fn stationary_distribution(model: &MarkovPriceModel) -> Result<PriceDistribution> {
    let pi = stationary_vector(model)?;
    let mut support: Vec<PriceVector> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    for (state, p) in model.states.iter().zip(pi) {
        match support.iter().position(|s| s == state) {
            Some(i) => probs[i] += p,
            None => {
                support.push(state.clone());
                probs.push(p);
            }
        }
    }
    PriceDistribution::new(support, probs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceTrace {
    pub sequence: Vec<PriceVector>,
    pub source: String,
}

impl PriceTrace {
    pub fn new(sequence: Vec<PriceVector>, source: impl Into<String>) -> Self {
        PriceTrace {
            sequence,
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    pub fn validate_for(&self, spec: &MarketSpec) -> Result<()> {
        self.sequence.iter().try_for_each(|p| spec.check_prices(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapPolicy {
    #[default]
    Reject,
    /// Raise each stock's price cap to the largest observed price.
    AutoExpand,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedTrace {
    pub trace: PriceTrace,
    /// Per-stock price caps after loading (raised under `AutoExpand`).
    pub caps: Vec<Money>,
}

/// Reads a `slot,p_1,...,p_N` CSV. Row numbers in errors count data rows from 1.
pub fn load_trace(input: impl Read, spec: &MarketSpec, cap_policy: CapPolicy) -> Result<LoadedTrace> {
    let n = spec.n();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let expected: Vec<String> = std::iter::once("slot".to_string())
        .chain((1..=n).map(|i| format!("p_{i}")))
        .collect();
    if headers.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse {
            row: 0,
            message: format!("header must be `{}`", expected.join(",")),
        });
    }
    let mut caps: Vec<Money> = spec.stocks.iter().map(|s| s.p_max).collect();
    let mut sequence = Vec::new();
    let mut last_slot: Option<u64> = None;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != n + 1 {
            return Err(Error::Parse {
                row,
                message: format!("expected {} columns, found {}", n + 1, record.len()),
            });
        }
        let slot: u64 = record[0].trim().parse().map_err(|_| Error::Parse {
            row,
            message: format!("bad slot {:?}", &record[0]),
        })?;
        let ok = match last_slot {
            None => slot == 0,
            Some(prev) => slot > prev,
        };
        if !ok {
            return Err(Error::Parse {
                row,
                message: format!("slots must start at 0 and increase; got {slot}"),
            });
        }
        last_slot = Some(slot);
        let mut prices = Vec::with_capacity(n);
        for (k, field) in record.iter().skip(1).enumerate() {
            let p = Money::parse(field).map_err(|e| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            if p.is_negative() {
                return Err(Error::Parse {
                    row,
                    message: format!("negative price {p} for stock {}", k + 1),
                });
            }
            if p > caps[k] {
                match cap_policy {
                    CapPolicy::Reject => {
                        return Err(Error::Parse {
                            row,
                            message: format!("price {p} exceeds cap {} for stock {}", caps[k], k + 1),
                        })
                    }
                    CapPolicy::AutoExpand => caps[k] = p,
                }
            }
            prices.push(p);
        }
        sequence.push(PriceVector(prices));
    }
    Ok(LoadedTrace {
        trace: PriceTrace::new(sequence, "csv"),
        caps,
    })
}

/// Writes the canonical trace CSV (slots from 0, two fraction digits).
pub fn write_trace(trace: &PriceTrace, out: impl Write) -> Result<()> {
    let n = trace.sequence.first().map_or(0, |p| p.len());
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = std::iter::once("slot".to_string())
        .chain((1..=n).map(|i| format!("p_{i}")))
        .collect();
    w.write_record(&header)?;
    for (slot, p) in trace.sequence.iter().enumerate() {
        let row: Vec<String> = std::iter::once(slot.to_string())
            .chain(p.iter().map(Money::to_string))
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Trace of long runs at price zero, long runs at the cap and bursts of
/// zero/cap alternation, chosen independently per stock. Drives the queues
/// toward both edges of their operating band.
pub fn adversarial_trace(spec: &MarketSpec, len: usize, seed: u64) -> PriceTrace {
    let mut rng = stream_rng(seed, 0xAD5E);
    let mut columns: Vec<Vec<Money>> = Vec::with_capacity(spec.n());
    for s in &spec.stocks {
        let mut col = Vec::with_capacity(len);
        while col.len() < len {
            let run = rng.gen_range(1..=400usize).min(len - col.len());
            match rng.gen_range(0..3) {
                0 => col.extend(std::iter::repeat(Money::ZERO).take(run)),
                1 => col.extend(std::iter::repeat(s.p_max).take(run)),
                _ => col.extend((0..run).map(|i| if i % 2 == 0 { Money::ZERO } else { s.p_max })),
            }
        }
        columns.push(col);
    }
    let sequence = (0..len)
        .map(|t| PriceVector(columns.iter().map(|c| c[t]).collect()))
        .collect();
    PriceTrace::new(sequence, format!("adversarial(seed={seed})"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriceSource {
    Iid(PriceDistribution),
    Markov {
        model: MarkovPriceModel,
        #[serde(default)]
        initial_state: usize,
    },
    Trace(PriceTrace),
}

impl PriceSource {
    pub fn validate_for(&self, spec: &MarketSpec) -> Result<()> {
        match self {
            PriceSource::Iid(d) => d.validate_for(spec),
            PriceSource::Markov { model, initial_state } => {
                if *initial_state >= model.len() {
                    return Err(Error::structural(format!("unknown Markov state {initial_state}")));
                }
                model.validate_for(spec)
            }
            PriceSource::Trace(t) => t.validate_for(spec),
        }
    }

    pub fn stream(&self, rng: SimRng) -> PriceStream<'_> {
        let state = match self {
            PriceSource::Markov { initial_state, .. } => *initial_state,
            _ => 0,
        };
        PriceStream {
            source: self,
            rng,
            position: 0,
            state,
        }
    }
}

/// Price sequence drawn from a [`PriceSource`]. A Markov stream steps the chain
/// before emitting, so slot 0 already carries one transition from the initial
/// state.
pub struct PriceStream<'a> {
    source: &'a PriceSource,
    rng: SimRng,
    position: usize,
    state: usize,
}

impl PriceStream<'_> {
    pub fn next_prices(&mut self) -> Result<PriceVector> {
        let p = match self.source {
            PriceSource::Iid(d) => sample_iid(d, &mut self.rng),
            PriceSource::Markov { model, .. } => {
                let (next, p) = step_markov(model, self.state, &mut self.rng)?;
                self.state = next;
                p
            }
            PriceSource::Trace(t) => t.sequence.get(self.position).cloned().ok_or_else(|| {
                Error::structural(format!("trace exhausted after {} slots", t.len()))
            })?,
        };
        self.position += 1;
        Ok(p)
    }

    pub fn markov_state(&self) -> usize {
        self.state
    }
}

/// Decaying-memory pair supplied by the user for non-i.i.d. experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryParams {
    pub epsilon: f64,
    #[serde(rename = "T")]
    pub t: usize,
}

impl MemoryParams {
    pub fn new(epsilon: f64, t: usize) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) || t == 0 {
            return Err(Error::structural("memory parameters need epsilon >= 0 and T >= 1"));
        }
        Ok(MemoryParams { epsilon, t })
    }
}

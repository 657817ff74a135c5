//! Transaction generation and block packing.
//!
//! Two techniques are supported. Under the full technique every node keeps its
//! own pool, transactions arrive as a Poisson stream and are propagated to
//! peers, and each transaction is tracked until it is included. Under the
//! light technique a single shared pool is reset and refilled with fresh
//! transactions after every block, and nothing is tracked individually.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::engine::{EngineError, EventPayload, EventQueue, RandomSource, SimTime};
use crate::model::{Block, BlockId, NodeId, PoolEntry, Transaction, TxGas, TxId};

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("unrecognised sampler `{0}` (expected const:X, exp:MEAN or hist:PATH)")]
    Syntax(String),
    #[error("invalid number `{0}`")]
    Number(String),
    #[error("cannot read histogram {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("histogram line {line}: {reason}")]
    HistogramLine { line: usize, reason: String },
    #[error("histogram probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
    #[error("exponential mean must be positive, got {0}")]
    Mean(f64),
}

/// Empirical distribution over a finite set of values.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    values: Vec<f64>,
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Histogram {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self, SamplerError> {
        let sum: f64 = pairs.iter().map(|p| p.1).sum();
        if pairs.is_empty() || (sum - 1.0).abs() > 1e-9 {
            return Err(SamplerError::ProbabilitySum(sum));
        }
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(pairs.len());
        for (_, p) in &pairs {
            acc += p;
            cumulative.push(acc);
        }
        let (values, probabilities) = pairs.into_iter().unzip();
        Ok(Self {
            values,
            probabilities,
            cumulative,
        })
    }

    /// Parses `value probability` rows separated by whitespace or a comma.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, SamplerError> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let bad = |reason: &str| SamplerError::HistogramLine {
                line: i + 1,
                reason: reason.to_string(),
            };
            if cols.len() != 2 {
                return Err(bad("expected two columns"));
            }
            let value: f64 = cols[0].parse().map_err(|_| bad("value is not a number"))?;
            let prob: f64 = cols[1].parse().map_err(|_| bad("probability is not a number"))?;
            if !(0.0..=1.0).contains(&prob) {
                return Err(bad("probability outside [0, 1]"));
            }
            pairs.push((value, prob));
        }
        Self::new(pairs)
    }

    pub fn load(path: &Path) -> Result<Self, SamplerError> {
        let text = fs::read_to_string(path).map_err(|e| SamplerError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probabilities)
            .map(|(v, p)| v * p)
            .sum()
    }

    fn sample(&self, rng: &mut RandomSource) -> f64 {
        let u = rng.unit();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.values[idx.min(self.values.len() - 1)]
    }
}

/// Source of transaction sizes or prices.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    Const(f64),
    Exp(f64),
    Hist(Histogram),
}

impl Sampler {
    pub fn sample(&self, rng: &mut RandomSource) -> f64 {
        match self {
            Sampler::Const(v) => *v,
            Sampler::Exp(mean) => rng
                .exponential(*mean)
                .expect("exponential mean validated at construction"),
            Sampler::Hist(h) => h.sample(rng),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Sampler::Const(v) | Sampler::Exp(v) => *v,
            Sampler::Hist(h) => h.mean(),
        }
    }

    /// Smallest value the sampler can produce.
    pub fn min_value(&self) -> f64 {
        match self {
            Sampler::Const(v) => *v,
            Sampler::Exp(_) => 0.0,
            Sampler::Hist(h) => h.values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Parses `const:X`, `exp:MEAN` or `hist:PATH`; relative histogram paths
    /// resolve against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, SamplerError> {
        let text = text.trim();
        let (kind, arg) = text
            .split_once(':')
            .ok_or_else(|| SamplerError::Syntax(text.to_string()))?;
        let number = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| SamplerError::Number(s.trim().to_string()))
        };
        match kind.trim().to_ascii_lowercase().as_str() {
            "const" => Ok(Sampler::Const(number(arg)?)),
            "exp" => {
                let mean = number(arg)?;
                if mean <= 0.0 {
                    return Err(SamplerError::Mean(mean));
                }
                Ok(Sampler::Exp(mean))
            }
            "hist" => {
                let path = Path::new(arg.trim());
                let path = match base {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.to_path_buf(),
                };
                Ok(Sampler::Hist(Histogram::load(&path)?))
            }
            _ => Err(SamplerError::Syntax(text.to_string())),
        }
    }
}

impl FromStr for Sampler {
    type Err = SamplerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Sampler::parse(s, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Technique {
    Full,
    #[default]
    Light,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadParams {
    pub has_trans: bool,
    pub technique: Technique,
    /// Transactions per second.
    pub tx_rate: f64,
    /// Size in MB, or used gas when `gas_metered`.
    pub tx_size: Sampler,
    /// Price per unit of size (per MB, or per gas unit).
    pub tx_price: Sampler,
    pub tx_delay: f64,
    pub gas_metered: bool,
}

impl WorkloadParams {
    pub fn full_mode(&self) -> bool {
        self.has_trans && self.technique == Technique::Full
    }

    pub fn light_mode(&self) -> bool {
        self.has_trans && self.technique == Technique::Light
    }

    /// Draws size and price and derives the fee.
    fn draw_terms(&self, rng: &mut RandomSource) -> (f64, f64, Option<TxGas>) {
        let size = self.tx_size.sample(rng);
        let price = self.tx_price.sample(rng);
        let gas = self.gas_metered.then_some(TxGas {
            limit: size,
            used: size,
            price,
        });
        (size, size * price, gas)
    }

    /// Rough block capacity in transactions, from the mean transaction size.
    pub fn capacity_in_tx(&self, capacity: f64) -> usize {
        let mean = self.tx_size.mean();
        if mean <= 0.0 {
            return 0;
        }
        ((capacity / mean).floor() as usize).max(1)
    }
}

/// Every transaction created in a full-technique run, plus the blocks that
/// include each one.
#[derive(Debug, Default, Clone)]
pub struct TxRegistry {
    txs: Vec<Transaction>,
    inclusions: Vec<Vec<BlockId>>,
}

impl TxRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    pub fn get(&self, id: TxId) -> &Transaction {
        &self.txs[id.0 as usize]
    }

    pub fn insert(&mut self, mut tx: Transaction) -> TxId {
        let id = TxId(self.txs.len() as u64);
        tx.id = id;
        self.txs.push(tx);
        self.inclusions.push(Vec::new());
        id
    }

    pub fn record_inclusion(&mut self, tx: TxId, block: BlockId) {
        self.inclusions[tx.0 as usize].push(block);
    }

    pub fn inclusions(&self, tx: TxId) -> &[BlockId] {
        &self.inclusions[tx.0 as usize]
    }

    pub fn entry(&self, id: TxId) -> PoolEntry {
        let tx = self.get(id);
        PoolEntry {
            fee: tx.fee,
            size: tx.size,
            id,
        }
    }
}

/// Creates the next transaction of the Poisson stream and schedules its
/// `TxCreate` event. Returns `None` when the stream is disabled.
pub fn schedule_next_tx(
    params: &WorkloadParams,
    registry: &mut TxRegistry,
    node_count: usize,
    at: SimTime,
    queue: &mut EventQueue,
    rng: &mut RandomSource,
) -> Result<Option<TxId>, EngineError> {
    if !params.full_mode() || params.tx_rate <= 0.0 || node_count == 0 {
        return Ok(None);
    }
    let time = at + rng.exponential(1.0 / params.tx_rate)?;
    let submitter = NodeId(rng.index(node_count) as u32);
    let recipient = if node_count > 1 {
        let r = rng.index(node_count - 1) as u32;
        NodeId(if r >= submitter.0 { r + 1 } else { r })
    } else {
        submitter
    };
    let (size, fee, gas) = params.draw_terms(rng);
    let id = registry.insert(Transaction {
        id: TxId(0),
        timestamp: time,
        submitter,
        recipient,
        value: 0.0,
        size,
        fee,
        gas,
    });
    queue.schedule(time, submitter, EventPayload::TxCreate { tx: id })?;
    Ok(Some(id))
}

/// Shared pool of the light technique.
#[derive(Debug, Clone, Default)]
pub struct SharedPool {
    pub entries: Vec<PoolEntry>,
    pub refilled_at: SimTime,
    next_id: u64,
}

impl SharedPool {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Number of transactions placed in the shared pool at each refill: the
/// arrivals expected over one block interval, capped at two blocks' worth.
pub fn refill_size(params: &WorkloadParams, block_interval: f64, capacity_tx: usize) -> usize {
    if !params.light_mode() || params.tx_rate <= 0.0 {
        return 0;
    }
    let arrivals = (params.tx_rate * block_interval).ceil();
    let cap = 2 * capacity_tx;
    if arrivals >= cap as f64 {
        cap
    } else {
        arrivals as usize
    }
}

/// Resets the shared pool and fills it with fresh transactions.
pub fn refill_shared_pool(
    pool: &mut SharedPool,
    params: &WorkloadParams,
    block_interval: f64,
    capacity_tx: usize,
    now: SimTime,
    rng: &mut RandomSource,
) {
    let n = refill_size(params, block_interval, capacity_tx);
    pool.entries.clear();
    pool.refilled_at = now;
    for _ in 0..n {
        let (size, fee, _) = params.draw_terms(rng);
        pool.entries.push(PoolEntry {
            fee,
            size,
            id: TxId(pool.next_id),
        });
        pool.next_id += 1;
    }
}

/// Greedy packing over candidates already ordered by fee. A candidate that
/// does not fit is skipped and the scan continues; the scan stops once the
/// remaining room is below `size_floor`.
pub fn pack_sorted<I>(candidates: I, capacity: f64, size_floor: f64) -> Vec<PoolEntry>
where
    I: IntoIterator<Item = PoolEntry>,
{
    let mut used = 0.0;
    let mut picked = Vec::new();
    for entry in candidates {
        if used + entry.size <= capacity {
            used += entry.size;
            picked.push(entry);
        }
        let room = capacity - used;
        if room <= 0.0 || (size_floor > 0.0 && room < size_floor) {
            break;
        }
    }
    picked
}

/// Sorts by fee (descending, ties by lower id) and packs greedily under
/// `capacity`.
pub fn select_for_block(pool: &[PoolEntry], capacity: f64) -> Vec<PoolEntry> {
    let mut sorted = pool.to_vec();
    sorted.sort();
    pack_sorted(sorted, capacity, 0.0)
}

/// Seconds from creation to inclusion.
pub fn tx_latency(tx: &Transaction, including: &Block) -> f64 {
    including.timestamp - tx.timestamp
}

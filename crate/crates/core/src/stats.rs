//! Per-run metrics and cross-run aggregation.

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::engine::RunOutcome;
use crate::incentives::RewardLedger;
use crate::model::NodeId;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub run_index: usize,
    pub seed: u64,
    pub blocks_created: u64,
    pub blocks_included: u64,
    pub stale_rate: f64,
    pub throughput: f64,
    /// Mean creation-to-inclusion time over main-chain transactions; only
    /// tracked with the full technique.
    pub mean_tx_latency: Option<f64>,
    /// Fraction of main-chain blocks per miner, indexed by node id.
    pub miner_shares: Vec<f64>,
    pub reward_shares: Vec<f64>,
    pub ledger: RewardLedger,
    pub elapsed: f64,
    pub wall_clock: f64,
}

impl RunReport {
    pub fn blocks_per_day(&self) -> f64 {
        if self.elapsed > 0.0 {
            self.blocks_included as f64 * SECONDS_PER_DAY / self.elapsed
        } else {
            0.0
        }
    }
}

/// `(created - included) / created`, with 0/0 taken as 0.
pub fn stale_rate(created: u64, included: u64) -> f64 {
    if created == 0 {
        0.0
    } else {
        created.saturating_sub(included) as f64 / created as f64
    }
}

fn normalise(values: Vec<f64>) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        values.into_iter().map(|v| v / total).collect()
    } else {
        values
    }
}

pub fn summarize_run(outcome: &RunOutcome, run_index: usize, wall_clock: f64) -> RunReport {
    let world = &outcome.world;
    let n = world.node_count();
    let mut blocks = vec![0.0; n];
    let mut txs = 0usize;
    let mut latency_sum = 0.0;
    let mut latency_count = 0usize;
    for &id in outcome.main_chain.iter().skip(1) {
        let block = world.registry.block(id);
        if let Some(slot) = blocks.get_mut(block.miner.index()) {
            *slot += 1.0;
        }
        txs += block.tx_count;
        for &tx in &block.transactions {
            latency_sum += crate::workload::tx_latency(world.txs.get(tx), block);
            latency_count += 1;
        }
    }
    let included = outcome.main_chain.len().saturating_sub(1) as u64;
    let created = world.counters.blocks_created;
    let rewards = (0..n)
        .map(|i| outcome.ledger.get(NodeId(i as u32)).total())
        .collect();
    RunReport {
        run_index,
        seed: outcome.seed,
        blocks_created: created,
        blocks_included: included,
        stale_rate: stale_rate(created, included),
        throughput: if outcome.elapsed > 0.0 {
            txs as f64 / outcome.elapsed
        } else {
            0.0
        },
        mean_tx_latency: (latency_count > 0).then(|| latency_sum / latency_count as f64),
        miner_shares: normalise(blocks),
        reward_shares: normalise(rewards),
        ledger: outcome.ledger.clone(),
        elapsed: outcome.elapsed,
        wall_clock,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("cannot aggregate an empty set of runs")]
    Empty,
}

/// Mean and 95% Student-t half-width of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub runs: usize,
}

impl Estimate {
    pub fn from_values(values: &[f64]) -> Result<Self, StatsError> {
        let n = values.len();
        if n == 0 {
            return Err(StatsError::Empty);
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Ok(Self { mean, half_width: 0.0, runs: 1 });
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("degrees of freedom are positive")
            .inverse_cdf(0.975);
        Ok(Self {
            mean,
            half_width: t * var.sqrt() / (n as f64).sqrt(),
            runs: n,
        })
    }

    pub fn contains(&self, value: f64) -> bool {
        (value - self.mean).abs() <= self.half_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub blocks_created: Estimate,
    pub blocks_included: Estimate,
    pub blocks_per_day: Estimate,
    pub stale_rate: Estimate,
    pub throughput: Estimate,
    pub mean_tx_latency: Option<Estimate>,
    pub miner_shares: Vec<Estimate>,
    pub reward_shares: Vec<Estimate>,
    pub wall_clock: Estimate,
}

pub fn aggregate(reports: &[RunReport]) -> Result<Aggregate, StatsError> {
    let first = reports.first().ok_or(StatsError::Empty)?;
    let metric = |f: &dyn Fn(&RunReport) -> f64| {
        let values: Vec<f64> = reports.iter().map(f).collect();
        Estimate::from_values(&values)
    };
    let latencies: Vec<f64> = reports.iter().filter_map(|r| r.mean_tx_latency).collect();
    let per_miner = |get: fn(&RunReport) -> &Vec<f64>| {
        (0..get(first).len())
            .map(|i| metric(&|r| get(r).get(i).copied().unwrap_or(0.0)))
            .collect::<Result<Vec<_>, _>>()
    };
    Ok(Aggregate {
        blocks_created: metric(&|r| r.blocks_created as f64)?,
        blocks_included: metric(&|r| r.blocks_included as f64)?,
        blocks_per_day: metric(&|r| r.blocks_per_day())?,
        stale_rate: metric(&|r| r.stale_rate)?,
        throughput: metric(&|r| r.throughput)?,
        mean_tx_latency: Estimate::from_values(&latencies).ok(),
        miner_shares: per_miner(|r| &r.miner_shares)?,
        reward_shares: per_miner(|r| &r.reward_shares)?,
        wall_clock: metric(&|r| r.wall_clock)?,
    })
}

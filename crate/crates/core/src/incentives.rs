//! End-of-run reward distribution.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{BlockId, BlockRegistry, NodeId, NodeState, Transaction};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    pub block_reward: f64,
    pub uncle_generations: u64,
    /// Share of the block reward paid to the includer per referenced uncle.
    pub inclusion_reward_fraction: f64,
    pub uncles_enabled: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("uncle at depth {uncle} cannot be referenced at depth {block} within {generations} generations")]
    OutsideWindow {
        uncle: u64,
        block: u64,
        generations: u64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MinerRewards {
    pub block_rewards: f64,
    pub tx_fees: f64,
    pub uncle_rewards: f64,
    pub inclusion_rewards: f64,
}

impl MinerRewards {
    pub fn total(&self) -> f64 {
        self.block_rewards + self.tx_fees + self.uncle_rewards + self.inclusion_rewards
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewardLedger {
    pub miners: BTreeMap<NodeId, MinerRewards>,
}

impl RewardLedger {
    pub fn total(&self) -> f64 {
        self.miners.values().map(MinerRewards::total).sum()
    }

    pub fn get(&self, miner: NodeId) -> MinerRewards {
        self.miners.get(&miner).copied().unwrap_or_default()
    }
}

/// Fee paid by a transaction: used gas times gas price when gas-metered,
/// the pre-computed size-times-price fee otherwise.
pub fn tx_fee(tx: &Transaction) -> f64 {
    match tx.gas {
        Some(gas) => gas.used * gas.price,
        None => tx.fee,
    }
}

/// Reward for the miner of an uncle at `uncle_depth` referenced by a block at
/// `block_depth`: `(D_u + G + 1 - D_b) * R / (G + 1)`.
///
/// Only references with `block_depth - generations <= uncle_depth < block_depth`
/// are accepted.
pub fn uncle_reward(
    uncle_depth: u64,
    generations: u64,
    block_depth: u64,
    block_reward: f64,
) -> Result<f64, RewardError> {
    let in_window =
        uncle_depth < block_depth && block_depth <= uncle_depth.saturating_add(generations);
    if !in_window {
        return Err(RewardError::OutsideWindow {
            uncle: uncle_depth,
            block: block_depth,
            generations,
        });
    }
    let steps = (uncle_depth + generations + 1 - block_depth) as f64;
    Ok(steps * block_reward / (generations + 1) as f64)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    sum: f64,
    carry: f64,
}

impl Accumulator {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Default)]
struct MinerAccumulators {
    block_rewards: Accumulator,
    tx_fees: Accumulator,
    uncle_rewards: Accumulator,
    inclusion_rewards: Accumulator,
}

/// Pays every non-genesis main-chain block its reward and fees, and every
/// referenced uncle its share. Node balances are credited with the same
/// amounts recorded in the returned ledger.
pub fn distribute(
    main_chain: &[BlockId],
    registry: &BlockRegistry,
    params: &RewardParams,
    nodes: &mut [NodeState],
) -> Result<RewardLedger, RewardError> {
    let mut acc: BTreeMap<NodeId, MinerAccumulators> = BTreeMap::new();
    for &id in main_chain {
        let block = registry.block(id);
        if block.is_genesis() {
            continue;
        }
        let miner = acc.entry(block.miner).or_default();
        miner.block_rewards.add(params.block_reward);
        miner.tx_fees.add(block.total_fee);
        if !params.uncles_enabled {
            continue;
        }
        for &uncle_id in &block.uncles {
            let uncle = registry.block(uncle_id);
            let reward = uncle_reward(
                uncle.depth,
                params.uncle_generations,
                block.depth,
                params.block_reward,
            )?;
            acc.entry(uncle.miner).or_default().uncle_rewards.add(reward);
            acc.entry(block.miner)
                .or_default()
                .inclusion_rewards
                .add(params.inclusion_reward_fraction * params.block_reward);
        }
    }
    let mut ledger = RewardLedger::default();
    for (miner, a) in acc {
        let rewards = MinerRewards {
            block_rewards: a.block_rewards.value(),
            tx_fees: a.tx_fees.value(),
            uncle_rewards: a.uncle_rewards.value(),
            inclusion_rewards: a.inclusion_rewards.value(),
        };
        if let Some(node) = nodes.get_mut(miner.index()) {
            node.balance += rewards.total();
        }
        ledger.miners.insert(miner, rewards);
    }
    Ok(ledger)
}

#![allow(dead_code)]

use std::collections::HashSet;

use chainsim::engine::RunOutcome;
use chainsim::model::{BlockId, BlockRegistry};

/// Checks that `chain` is a well-formed path from genesis: consecutive
/// depths, correct parent links and increasing timestamps.
pub fn check_chain(registry: &BlockRegistry, chain: &[BlockId]) -> Result<(), String> {
    let first = chain.first().ok_or("empty chain")?;
    if *first != BlockId::GENESIS {
        return Err(format!("chain starts at {first:?}"));
    }
    for (i, pair) in chain.windows(2).enumerate() {
        let (parent, child) = (registry.block(pair[0]), registry.block(pair[1]));
        if child.previous != Some(parent.id) {
            return Err(format!("block {:?} at {} does not link to {:?}", child.id, i + 1, parent.id));
        }
        if child.depth != i as u64 + 1 {
            return Err(format!("block {:?} has depth {} at index {}", child.id, child.depth, i + 1));
        }
        if child.timestamp <= parent.timestamp {
            return Err(format!("block {:?} is not later than its parent", child.id));
        }
    }
    Ok(())
}

/// Structural checks on a finished run: every node chain and the main chain
/// are valid paths, the main chain is the deepest, uncles are referenced at
/// most once, off-chain and within `window`, and no tracked transaction is
/// included twice on the main chain.
pub fn check_run(outcome: &RunOutcome, window: u64) -> Result<(), String> {
    let world = &outcome.world;
    check_chain(&world.registry, &outcome.main_chain)?;
    for node in &world.nodes {
        check_chain(&world.registry, &node.chain).map_err(|e| format!("node {}: {e}", node.id))?;
        if node.chain.len() > outcome.main_chain.len() {
            return Err(format!("node {} holds a deeper chain than the main chain", node.id));
        }
    }
    let on_main: HashSet<BlockId> = outcome.main_chain.iter().copied().collect();
    let mut referenced = HashSet::new();
    let mut txs = HashSet::new();
    for &id in &outcome.main_chain {
        let block = world.registry.block(id);
        for &u in &block.uncles {
            let uncle = world.registry.block(u);
            if on_main.contains(&u) {
                return Err(format!("uncle {u:?} is on the main chain"));
            }
            if !referenced.insert(u) {
                return Err(format!("uncle {u:?} referenced twice"));
            }
            if uncle.depth >= block.depth || uncle.depth + window < block.depth {
                return Err(format!(
                    "uncle at depth {} referenced from depth {}",
                    uncle.depth, block.depth
                ));
            }
        }
        for &tx in &block.transactions {
            if !txs.insert(tx) {
                return Err(format!("transaction {tx:?} included twice"));
            }
        }
        if block.transactions.len() > block.tx_count {
            return Err(format!("block {id:?} lists more transactions than it counts"));
        }
    }
    Ok(())
}

/// Reward total recomputed from the main chain alone, summed in sorted
/// order of magnitude over exact integer multiples where possible.
pub fn expected_reward_total(
    outcome: &RunOutcome,
    block_reward: f64,
    generations: u64,
    inclusion_fraction: f64,
    uncles: bool,
) -> f64 {
    let reg = &outcome.world.registry;
    let blocks = outcome.main_chain.len() as u64 - 1;
    // uncle rewards in units of block_reward / (generations + 1)
    let mut uncle_slices = 0u64;
    let mut uncle_count = 0u64;
    let mut fees: Vec<f64> = Vec::new();
    for &id in outcome.main_chain.iter().skip(1) {
        let b = reg.block(id);
        fees.push(b.total_fee);
        if uncles {
            for &u in &b.uncles {
                uncle_slices += generations + 1 - (b.depth - reg.block(u).depth);
                uncle_count += 1;
            }
        }
    }
    fees.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let fee_total: f64 = fees.iter().sum();
    blocks as f64 * block_reward
        + uncle_slices as f64 * block_reward / (generations + 1) as f64
        + uncle_count as f64 * inclusion_fraction * block_reward
        + fee_total
}

pub fn parallelism() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

//! Domain records: nodes, blocks, transactions and the per-run block registry.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::workload::{SharedPool, TxRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    /// Miner id recorded on the genesis block.
    pub const SYSTEM: NodeId = NodeId(u32::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub u64);

impl BlockId {
    pub const GENESIS: BlockId = BlockId(0);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxId(pub u64);

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("block {0:?} is not in the registry")]
    UnknownBlock(BlockId),
    #[error("ancestry of block {head:?} is broken at {missing:?}")]
    BrokenAncestry { head: BlockId, missing: BlockId },
}

/// Gas accounting carried by transactions under a gas-metered preset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxGas {
    pub limit: f64,
    pub used: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transaction {
    pub id: TxId,
    pub timestamp: f64,
    pub submitter: NodeId,
    pub recipient: NodeId,
    /// Carried but never transferred.
    pub value: f64,
    /// Size in the block-capacity unit of the preset (MB, or gas units when
    /// blocks are gas-limited).
    pub size: f64,
    pub fee: f64,
    pub gas: Option<TxGas>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockGas {
    pub limit: f64,
    pub used: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub depth: u64,
    pub id: BlockId,
    pub previous: Option<BlockId>,
    pub timestamp: f64,
    /// Sum of included transaction sizes.
    pub size: f64,
    pub miner: NodeId,
    /// Tracked transactions (full technique only; empty under the light technique).
    pub transactions: Vec<TxId>,
    /// Number of included transactions, tracked or not.
    pub tx_count: usize,
    /// Sum of included transaction fees.
    pub total_fee: f64,
    pub uncles: Vec<BlockId>,
    pub gas: Option<BlockGas>,
}

impl Block {
    pub fn genesis() -> Self {
        Block {
            depth: 0,
            id: BlockId::GENESIS,
            previous: None,
            timestamp: 0.0,
            size: 0.0,
            miner: NodeId::SYSTEM,
            transactions: Vec::new(),
            tx_count: 0,
            total_fee: 0.0,
            uncles: Vec::new(),
            gas: None,
        }
    }

    pub fn is_genesis(&self) -> bool {
        self.previous.is_none()
    }
}

/// Every block created during a run, indexed by id. Ids are dense and start
/// with genesis at 0.
#[derive(Debug, Clone)]
pub struct BlockRegistry {
    blocks: Vec<Block>,
}

impl Default for BlockRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockRegistry {
    pub fn new() -> Self {
        Self {
            blocks: vec![Block::genesis()],
        }
    }

    pub fn next_id(&self) -> BlockId {
        BlockId(self.blocks.len() as u64)
    }

    /// Stores a block under the next free id, overwriting `block.id`.
    pub fn insert(&mut self, mut block: Block) -> BlockId {
        let id = self.next_id();
        block.id = id;
        self.blocks.push(block);
        id
    }

    pub fn get(&self, id: BlockId) -> Option<&Block> {
        self.blocks.get(id.0 as usize)
    }

    /// Panics on unknown ids; callers only hold ids handed out by `insert`.
    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter()
    }
}

/// Genesis-to-`head` path obtained by following `previous` links.
pub fn rebuild_chain(registry: &BlockRegistry, head: BlockId) -> Result<Vec<BlockId>, ModelError> {
    let mut block = registry.get(head).ok_or(ModelError::UnknownBlock(head))?;
    let mut path = Vec::with_capacity(block.depth as usize + 1);
    path.push(block.id);
    while let Some(prev) = block.previous {
        block = registry
            .get(prev)
            .ok_or(ModelError::BrokenAncestry { head, missing: prev })?;
        path.push(block.id);
    }
    path.reverse();
    Ok(path)
}

/// Pending transaction keyed for fee-descending iteration (ties by lower id).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolEntry {
    pub fee: f64,
    pub size: f64,
    pub id: TxId,
}

impl Eq for PoolEntry {}

impl PartialOrd for PoolEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PoolEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fee
            .total_cmp(&self.fee)
            .then_with(|| self.id.cmp(&other.id))
    }
}

/// A node's pending transactions (full technique).
pub type TxPool = BTreeSet<PoolEntry>;

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub balance: f64,
    /// Fraction of network hash power; zero for non-miners.
    pub hash_power: f64,
    pub stake: f64,
    /// Block ids from genesis to tip; the index is the depth.
    pub chain: Vec<BlockId>,
    pub pool: TxPool,
    /// Stale blocks this node may still reference as uncles.
    pub uncle_chain: Vec<BlockId>,
    /// Sequence number of this miner's live creation event.
    pub pending_create: Option<u64>,
}

impl NodeState {
    pub fn new(id: NodeId, hash_power: f64, stake: f64) -> Self {
        Self {
            id,
            balance: 0.0,
            hash_power,
            stake,
            chain: vec![BlockId::GENESIS],
            pool: TxPool::new(),
            uncle_chain: Vec::new(),
            pending_create: None,
        }
    }

    pub fn tip_id(&self) -> BlockId {
        *self.chain.last().expect("local chain always holds genesis")
    }

    pub fn tip_depth(&self) -> u64 {
        (self.chain.len() - 1) as u64
    }

    pub fn tip<'r>(&self, registry: &'r BlockRegistry) -> &'r Block {
        registry.block(self.tip_id())
    }

    /// Whether `block` lies on this node's local chain.
    pub fn has_on_chain(&self, block: &Block) -> bool {
        self.chain.get(block.depth as usize) == Some(&block.id)
    }
}

/// Mutable state of one run: every node, every block and every tracked
/// transaction.
#[derive(Debug, Clone)]
pub struct World {
    pub nodes: Vec<NodeState>,
    pub registry: BlockRegistry,
    pub txs: TxRegistry,
    pub shared_pool: SharedPool,
    /// Normalised selection weight per node (hash power or stake share).
    pub weights: Vec<f64>,
    pub counters: Counters,
}

/// Run diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub blocks_created: u64,
    /// Creation events that fired on an outdated tip.
    pub stale_creations: u64,
    /// Creation events replaced by a restart before they fired.
    pub superseded_creations: u64,
    pub reorgs: u64,
}

impl World {
    pub fn new(nodes: Vec<NodeState>, weights: Vec<f64>) -> Self {
        Self {
            nodes,
            registry: BlockRegistry::new(),
            txs: TxRegistry::new(),
            shared_pool: SharedPool::new(),
            weights,
            counters: Counters::default(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    pub(crate) fn child(reg: &mut BlockRegistry, parent: BlockId, miner: u32) -> BlockId {
        let p = reg.block(parent).clone();
        reg.insert(Block {
            depth: p.depth + 1,
            previous: Some(parent),
            timestamp: p.timestamp + 1.0,
            miner: NodeId(miner),
            ..Block::genesis()
        })
    }

    #[test]
    fn fresh_node_tip_is_genesis() {
        let reg = BlockRegistry::new();
        let n = NodeState::new(NodeId(0), 1.0, 0.0);
        assert_eq!(n.tip(&reg).depth, 0);
        assert!(n.tip(&reg).is_genesis());
    }

    #[test]
    fn tip_is_last_block() {
        let mut reg = BlockRegistry::new();
        let b1 = child(&mut reg, BlockId::GENESIS, 0);
        let b2 = child(&mut reg, b1, 0);
        let mut n = NodeState::new(NodeId(0), 1.0, 0.0);
        n.chain = vec![BlockId::GENESIS, b1, b2];
        assert_eq!(n.tip_id(), b2);
        assert_eq!(n.tip_depth(), 2);
    }

    #[test]
    fn rebuild_genesis_and_linear() {
        let mut reg = BlockRegistry::new();
        assert_eq!(rebuild_chain(&reg, BlockId::GENESIS).unwrap(), vec![BlockId::GENESIS]);
        let mut ids = vec![BlockId::GENESIS];
        for _ in 0..4 {
            let next = child(&mut reg, *ids.last().unwrap(), 0);
            ids.push(next);
        }
        let path = rebuild_chain(&reg, ids[4]).unwrap();
        assert_eq!(path.len(), 5);
        assert_eq!(path, ids);
    }

    /// Oracle: enumerate every root-to-leaf path by DFS over child lists and
    /// pick the one ending at `head`.
    fn enumerate_paths(reg: &BlockRegistry) -> Vec<Vec<BlockId>> {
        let mut children: HashMap<BlockId, Vec<BlockId>> = HashMap::new();
        for b in reg.iter() {
            if let Some(p) = b.previous {
                children.entry(p).or_default().push(b.id);
            }
        }
        let mut out = Vec::new();
        let mut stack = vec![vec![BlockId::GENESIS]];
        while let Some(path) = stack.pop() {
            let last = *path.last().unwrap();
            out.push(path.clone());
            for c in children.get(&last).into_iter().flatten() {
                let mut p = path.clone();
                p.push(*c);
                stack.push(p);
            }
        }
        out
    }

    #[test]
    fn rebuild_on_forked_registry_matches_enumeration() {
        // g -> a1 -> a2 ; g -> b1 -> b2 -> b3
        let mut reg = BlockRegistry::new();
        let a1 = child(&mut reg, BlockId::GENESIS, 0);
        let b1 = child(&mut reg, BlockId::GENESIS, 1);
        let a2 = child(&mut reg, a1, 0);
        let b2 = child(&mut reg, b1, 1);
        let b3 = child(&mut reg, b2, 1);
        let paths = enumerate_paths(&reg);
        for head in [a2, b3, b2, a1] {
            let expected = paths.iter().find(|p| *p.last().unwrap() == head).unwrap();
            assert_eq!(&rebuild_chain(&reg, head).unwrap(), expected);
        }
        let path = rebuild_chain(&reg, b3).unwrap();
        assert!(!path.contains(&a1) && !path.contains(&a2));
    }

    #[test]
    fn unknown_head_is_error() {
        let reg = BlockRegistry::new();
        assert_eq!(
            rebuild_chain(&reg, BlockId(9)),
            Err(ModelError::UnknownBlock(BlockId(9)))
        );
    }

    #[test]
    fn broken_ancestry_is_error() {
        let mut reg = BlockRegistry::new();
        let orphan = reg.insert(Block {
            depth: 2,
            previous: Some(BlockId(77)),
            miner: NodeId(0),
            ..Block::genesis()
        });
        assert!(matches!(
            rebuild_chain(&reg, orphan),
            Err(ModelError::BrokenAncestry { .. })
        ));
    }

    #[test]
    fn pool_orders_by_fee_then_id() {
        let mut pool = TxPool::new();
        for (id, fee) in [(3, 5.0), (1, 9.0), (2, 5.0), (4, 1.0)] {
            pool.insert(PoolEntry { fee, size: 1.0, id: TxId(id) });
        }
        let ids: Vec<u64> = pool.iter().map(|e| e.id.0).collect();
        assert_eq!(ids, vec![1, 2, 3, 4]);
    }
}

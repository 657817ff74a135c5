//! Miner selection, block generation and block reception.
//!
//! Proof of work is modelled as a race: every miner holds one pending
//! creation event drawn from an exponential with mean `B_interval / h_i`,
//! recording the depth of the tip it builds on. Whenever a miner's tip
//! changes it restarts the race with a fresh draw; an event that fires on an
//! outdated tip is discarded. Forks come from propagation delay. Nodes
//! resolve them with the longest-chain rule, and the first block seen at a
//! given depth wins.

use thiserror::Error;

use crate::engine::{EngineError, Event, EventPayload, Scheduler, SimTime};
use crate::model::{Block, BlockGas, BlockId, BlockRegistry, NodeId, NodeState, World};
use crate::network::{broadcast_block, DelayModel};
use crate::workload::{pack_sorted, refill_shared_pool, TxRegistry, WorkloadParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForkRule {
    #[default]
    LongestChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Selector {
    /// Exponential race weighted by hash power.
    #[default]
    PowRace,
    /// Same race weighted by stake.
    StakeProportional,
    /// One block every `B_interval`, miners taking turns by id.
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UncleOrder {
    #[default]
    OldestFirst,
    NewestFirst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncleParams {
    pub max_per_block: usize,
    /// Generations within which an uncle can still be referenced.
    pub window: u64,
    pub enabled: bool,
    pub order: UncleOrder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusParams {
    pub block_interval: f64,
    pub fork_rule: ForkRule,
    pub selector: Selector,
    pub uncles: Option<UncleParams>,
}

impl ConsensusParams {
    pub fn active_uncles(&self) -> Option<&UncleParams> {
        self.uncles.as_ref().filter(|u| u.enabled)
    }
}

#[derive(Debug, Error)]
pub enum ConsensusError {
    #[error("node {0} has zero selection weight and cannot mine")]
    ZeroWeight(NodeId),
    #[error("no node can mine under the configured selector")]
    NoMiners,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// What a node did with a received block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainAction {
    Appended,
    Replaced,
    DiscardedShorter,
    StoredAsUncle,
}

impl ChainAction {
    pub fn changed_tip(self) -> bool {
        matches!(self, ChainAction::Appended | ChainAction::Replaced)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CreateOutcome {
    Created(BlockId),
    /// The miner's tip moved since the event was scheduled.
    Stale,
    /// A restart replaced this event before it fired.
    Superseded,
}

/// Everything block generation needs besides the world and the scheduler.
#[derive(Debug, Clone)]
pub struct Protocol {
    pub consensus: ConsensusParams,
    pub workload: WorkloadParams,
    pub delays: DelayModel,
    /// Block capacity in MB, or gas units when gas-metered.
    pub block_capacity: f64,
}

impl Protocol {
    pub fn capacity_in_tx(&self) -> usize {
        self.workload.capacity_in_tx(self.block_capacity)
    }

    /// Miners in id order under the configured selector.
    pub fn miners(&self, world: &World) -> Vec<NodeId> {
        world
            .nodes
            .iter()
            .filter(|n| world.weights[n.id.index()] > 0.0)
            .map(|n| n.id)
            .collect()
    }

    /// Schedules the miner's next `BlockCreate`, superseding any pending one.
    pub fn schedule_next_creation(
        &self,
        world: &mut World,
        miner: NodeId,
        at: SimTime,
        sched: &mut Scheduler,
    ) -> Result<u64, ConsensusError> {
        let weight = world.weights[miner.index()];
        if weight <= 0.0 {
            return Err(ConsensusError::ZeroWeight(miner));
        }
        let wait = match self.consensus.selector {
            Selector::PowRace | Selector::StakeProportional => {
                sched.rng.exponential(self.consensus.block_interval / weight)?
            }
            Selector::RoundRobin => self.consensus.block_interval,
        };
        let node = &mut world.nodes[miner.index()];
        let seq = sched.queue.schedule(
            at + wait,
            miner,
            EventPayload::BlockCreate {
                parent_depth: node.tip_depth(),
            },
        )?;
        node.pending_create = Some(seq);
        Ok(seq)
    }

    /// Schedules the initial creation events: one per miner for the races,
    /// a single slot for the first miner under round robin.
    pub fn start(&self, world: &mut World, sched: &mut Scheduler) -> Result<(), ConsensusError> {
        let miners = self.miners(world);
        if miners.is_empty() {
            return Err(ConsensusError::NoMiners);
        }
        match self.consensus.selector {
            Selector::RoundRobin => {
                self.schedule_next_creation(world, miners[0], 0.0, sched)?;
            }
            _ => {
                for m in miners {
                    self.schedule_next_creation(world, m, 0.0, sched)?;
                }
            }
        }
        Ok(())
    }

    fn next_round_robin(&self, world: &World, after: NodeId) -> NodeId {
        let miners = self.miners(world);
        miners
            .iter()
            .copied()
            .find(|m| *m > after)
            .unwrap_or(miners[0])
    }

    /// Handles a fired `BlockCreate` for `event.node`.
    pub fn on_block_create(
        &self,
        world: &mut World,
        event: &Event,
        sched: &mut Scheduler,
    ) -> Result<CreateOutcome, ConsensusError> {
        let EventPayload::BlockCreate { parent_depth } = event.payload else {
            unreachable!("on_block_create dispatched with {:?}", event.kind());
        };
        let miner = event.node;
        let round_robin = self.consensus.selector == Selector::RoundRobin;
        if !round_robin {
            let node = &world.nodes[miner.index()];
            if node.pending_create != Some(event.seq) {
                world.counters.superseded_creations += 1;
                return Ok(CreateOutcome::Superseded);
            }
            if node.tip_depth() != parent_depth {
                world.counters.stale_creations += 1;
                self.schedule_next_creation(world, miner, event.time, sched)?;
                return Ok(CreateOutcome::Stale);
            }
        }

        let id = self.build_block(world, miner, event.time, sched)?;
        world.counters.blocks_created += 1;
        broadcast_block(
            &self.delays,
            world.node_count(),
            miner,
            id,
            event.time,
            &mut sched.queue,
            &mut sched.rng,
        )?;
        let next = if round_robin {
            self.next_round_robin(world, miner)
        } else {
            miner
        };
        self.schedule_next_creation(world, next, event.time, sched)?;
        Ok(CreateOutcome::Created(id))
    }

    /// Packs transactions and uncles on top of the miner's tip, registers the
    /// block and appends it to the miner's chain.
    fn build_block(
        &self,
        world: &mut World,
        miner: NodeId,
        now: SimTime,
        sched: &mut Scheduler,
    ) -> Result<BlockId, ConsensusError> {
        let capacity = self.block_capacity;
        let size_floor = self.workload.tx_size.min_value();
        let World {
            nodes,
            registry,
            txs,
            shared_pool,
            ..
        } = world;
        let node = &mut nodes[miner.index()];
        let tip = node.tip(registry).clone();

        let (picked, tracked) = if self.workload.light_mode() {
            let mut candidates = shared_pool.entries.clone();
            candidates.sort();
            (pack_sorted(candidates, capacity, size_floor), false)
        } else if self.workload.full_mode() {
            (
                pack_sorted(node.pool.iter().copied(), capacity, size_floor),
                true,
            )
        } else {
            (Vec::new(), false)
        };

        let uncles = match self.consensus.active_uncles() {
            Some(params) => eligible_uncles(node, registry, tip.depth + 1, params),
            None => Vec::new(),
        };

        let size: f64 = picked.iter().map(|e| e.size).sum();
        let block = Block {
            depth: tip.depth + 1,
            id: registry.next_id(),
            previous: Some(tip.id),
            timestamp: now,
            size,
            miner,
            transactions: if tracked {
                picked.iter().map(|e| e.id).collect()
            } else {
                Vec::new()
            },
            tx_count: picked.len(),
            total_fee: picked.iter().map(|e| e.fee).sum(),
            uncles,
            gas: self.workload.gas_metered.then_some(BlockGas {
                limit: capacity,
                used: size,
            }),
        };
        let id = registry.insert(block);
        node.chain.push(id);
        if tracked {
            for entry in &picked {
                node.pool.remove(entry);
                txs.record_inclusion(entry.id, id);
            }
        }
        let included = &registry.block(id).uncles;
        node.uncle_chain.retain(|u| !included.contains(u));

        if self.workload.light_mode() {
            refill_shared_pool(
                shared_pool,
                &self.workload,
                self.consensus.block_interval,
                self.capacity_in_tx(),
                now,
                &mut sched.tx_rng,
            );
        }
        Ok(id)
    }

    /// Handles a fired `BlockReceive`; a miner whose tip changed restarts its
    /// race on the new tip.
    pub fn on_block_receive(
        &self,
        world: &mut World,
        node: NodeId,
        block: BlockId,
        at: SimTime,
        sched: &mut Scheduler,
    ) -> Result<ChainAction, ConsensusError> {
        let tracked = self.workload.full_mode().then_some(&world.txs);
        let action = receive_block(
            &mut world.nodes[node.index()],
            block,
            &world.registry,
            tracked,
            self.consensus.active_uncles(),
        );
        if action == ChainAction::Replaced {
            world.counters.reorgs += 1;
        }
        let races = self.consensus.selector != Selector::RoundRobin;
        if races && action.changed_tip() && world.weights[node.index()] > 0.0 {
            self.schedule_next_creation(world, node, at, sched)?;
        }
        Ok(action)
    }
}

/// Whether `uncle` is already referenced by a block on the node's chain.
fn referenced_on_chain(node: &NodeState, registry: &BlockRegistry, uncle: &Block) -> bool {
    node.chain
        .iter()
        .skip(uncle.depth as usize + 1)
        .any(|b| registry.block(*b).uncles.contains(&uncle.id))
}

/// Applies the longest-chain rule to `block` at `node`.
///
/// A child of the tip is appended. A deeper block on another branch replaces
/// the local chain from the fork point. Anything else is discarded, or kept
/// as an uncle candidate when uncles are enabled. On adoption the adopted
/// blocks' transactions leave the pool and their uncles leave the uncle
/// chain; blocks abandoned by a reorganisation become uncle candidates.
pub fn receive_block(
    node: &mut NodeState,
    block_id: BlockId,
    registry: &BlockRegistry,
    txs: Option<&TxRegistry>,
    uncles: Option<&UncleParams>,
) -> ChainAction {
    let block = registry.block(block_id);
    let tip_depth = node.tip_depth();

    let (action, adopted_from, abandoned) = if block.previous == Some(node.tip_id()) {
        node.chain.push(block_id);
        (ChainAction::Appended, block.depth as usize, Vec::new())
    } else if block.depth > tip_depth {
        let mut branch = Vec::new();
        let mut cur = block;
        while !node.has_on_chain(cur) {
            branch.push(cur.id);
            cur = registry.block(cur.previous.expect("genesis is on every chain"));
        }
        let fork = cur.depth as usize + 1;
        let abandoned: Vec<BlockId> = node.chain.drain(fork..).collect();
        node.chain.extend(branch.into_iter().rev());
        (ChainAction::Replaced, fork, abandoned)
    } else {
        let keep = uncles.is_some()
            && !node.has_on_chain(block)
            && !node.uncle_chain.contains(&block_id)
            && !referenced_on_chain(node, registry, block);
        if keep {
            node.uncle_chain.push(block_id);
            return ChainAction::StoredAsUncle;
        }
        return ChainAction::DiscardedShorter;
    };

    for &id in &node.chain[adopted_from..] {
        let adopted = registry.block(id);
        if let Some(txs) = txs {
            for &tx in &adopted.transactions {
                node.pool.remove(&txs.entry(tx));
            }
        }
        node.uncle_chain.retain(|u| !adopted.uncles.contains(u));
    }

    if let Some(params) = uncles {
        for id in abandoned {
            let b = registry.block(id);
            if !node.uncle_chain.contains(&id) && !referenced_on_chain(node, registry, b) {
                node.uncle_chain.push(id);
            }
        }
        // Drop candidates that can no longer be referenced by the next block.
        let next = node.tip_depth() + 1;
        let mut candidates = std::mem::take(&mut node.uncle_chain);
        candidates.retain(|u| {
            let b = registry.block(*u);
            b.depth + params.window >= next && !node.has_on_chain(b)
        });
        node.uncle_chain = candidates;
    }
    action
}

/// Uncle candidates a block at `next_depth` built on the node's chain may
/// reference: within the window, off the chain, not yet referenced by the
/// chain, at most `max_per_block` of them.
pub fn eligible_uncles(
    node: &NodeState,
    registry: &BlockRegistry,
    next_depth: u64,
    params: &UncleParams,
) -> Vec<BlockId> {
    let lowest = next_depth.saturating_sub(params.window);
    let mut eligible: Vec<&Block> = node
        .uncle_chain
        .iter()
        .map(|id| registry.block(*id))
        .filter(|b| b.depth >= lowest && b.depth < next_depth)
        .filter(|b| !node.has_on_chain(b))
        .filter(|b| !referenced_on_chain(node, registry, b))
        .collect();
    match params.order {
        UncleOrder::OldestFirst => eligible.sort_by_key(|b| (b.depth, b.id)),
        UncleOrder::NewestFirst => {
            eligible.sort_by_key(|b| (std::cmp::Reverse(b.depth), b.id))
        }
    }
    eligible
        .into_iter()
        .take(params.max_per_block)
        .map(|b| b.id)
        .collect()
}

/// The global view at the end of a run: the deepest local chain, ties going
/// to the lowest node id.
pub fn main_chain(nodes: &[NodeState]) -> &[BlockId] {
    let best = nodes
        .iter()
        .reduce(|best, n| if n.tip_depth() > best.tip_depth() { n } else { best })
        .expect("at least one node");
    &best.chain
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EventKind;
    use crate::model::{PoolEntry, TxId};
    use crate::network::DelayMode;
    use crate::workload::{Sampler, Technique};

    fn add(reg: &mut BlockRegistry, parent: BlockId, miner: u32) -> BlockId {
        let p = reg.block(parent).clone();
        reg.insert(Block {
            depth: p.depth + 1,
            previous: Some(parent),
            timestamp: p.timestamp + 1.0,
            miner: NodeId(miner),
            ..Block::genesis()
        })
    }

    fn uncle_params() -> UncleParams {
        UncleParams {
            max_per_block: 2,
            window: 7,
            enabled: true,
            order: UncleOrder::OldestFirst,
        }
    }

    fn protocol(selector: Selector, delay: f64) -> Protocol {
        Protocol {
            consensus: ConsensusParams {
                block_interval: 600.0,
                fork_rule: ForkRule::LongestChain,
                selector,
                uncles: None,
            },
            workload: WorkloadParams {
                has_trans: false,
                technique: Technique::Light,
                tx_rate: 0.0,
                tx_size: Sampler::Const(1.0),
                tx_price: Sampler::Const(1.0),
                tx_delay: 0.0,
                gas_metered: false,
            },
            delays: DelayModel {
                block_delay: delay,
                tx_delay: 0.0,
                mode: DelayMode::Constant,
            },
            block_capacity: 2.0,
        }
    }

    fn world(weights: &[f64]) -> World {
        let nodes = weights
            .iter()
            .enumerate()
            .map(|(i, w)| NodeState::new(NodeId(i as u32), *w, 0.0))
            .collect();
        World::new(nodes, weights.to_vec())
    }

    #[test]
    fn appended_child_of_tip() {
        let mut reg = BlockRegistry::new();
        let mut prev = BlockId::GENESIS;
        let mut node = NodeState::new(NodeId(0), 0.0, 0.0);
        for _ in 0..3 {
            prev = add(&mut reg, prev, 1);
            node.chain.push(prev);
        }
        let b4 = add(&mut reg, prev, 1);
        assert_eq!(receive_block(&mut node, b4, &reg, None, None), ChainAction::Appended);
        assert_eq!(node.tip_id(), b4);
    }

    #[test]
    fn deeper_branch_replaces_chain() {
        // branch A: g a1 a2 a3 ; branch B: g b1 .. b5
        let mut reg = BlockRegistry::new();
        let mut a = vec![BlockId::GENESIS];
        for _ in 0..3 {
            let next = add(&mut reg, *a.last().unwrap(), 0);
            a.push(next);
        }
        let mut b = vec![BlockId::GENESIS];
        for _ in 0..5 {
            let next = add(&mut reg, *b.last().unwrap(), 1);
            b.push(next);
        }
        let mut node = NodeState::new(NodeId(0), 0.0, 0.0);
        node.chain = a.clone();
        let action = receive_block(&mut node, b[5], &reg, None, None);
        assert_eq!(action, ChainAction::Replaced);
        assert_eq!(node.chain, crate::model::rebuild_chain(&reg, b[5]).unwrap());
        assert_eq!(node.chain, b);
    }

    #[test]
    fn shorter_block_discarded_or_kept_as_uncle() {
        let mut reg = BlockRegistry::new();
        let mut main = vec![BlockId::GENESIS];
        for _ in 0..5 {
            let next = add(&mut reg, *main.last().unwrap(), 0);
            main.push(next);
        }
        let side = add(&mut reg, main[3], 1); // depth 4
        let mut node = NodeState::new(NodeId(0), 0.0, 0.0);
        node.chain = main.clone();
        assert_eq!(
            receive_block(&mut node.clone(), side, &reg, None, None),
            ChainAction::DiscardedShorter
        );
        let params = uncle_params();
        assert_eq!(
            receive_block(&mut node, side, &reg, None, Some(&params)),
            ChainAction::StoredAsUncle
        );
        assert_eq!(node.uncle_chain, vec![side]);
        assert_eq!(node.chain, main);
    }

    #[test]
    fn equal_depth_block_loses_to_first_seen() {
        let mut reg = BlockRegistry::new();
        let a = add(&mut reg, BlockId::GENESIS, 0);
        let b = add(&mut reg, BlockId::GENESIS, 1);
        let mut node = NodeState::new(NodeId(2), 0.0, 0.0);
        assert_eq!(receive_block(&mut node, a, &reg, None, None), ChainAction::Appended);
        assert_eq!(receive_block(&mut node, b, &reg, None, None), ChainAction::DiscardedShorter);
        assert_eq!(node.tip_id(), a);
    }

    #[test]
    fn reorg_moves_abandoned_blocks_to_uncles_and_clears_pool() {
        let mut reg = BlockRegistry::new();
        let mut txs = TxRegistry::new();
        let tx = txs.insert(crate::model::Transaction {
            id: TxId(0),
            timestamp: 0.0,
            submitter: NodeId(0),
            recipient: NodeId(1),
            value: 0.0,
            size: 1.0,
            fee: 1.0,
            gas: None,
        });
        let a1 = add(&mut reg, BlockId::GENESIS, 0);
        let b1 = add(&mut reg, BlockId::GENESIS, 1);
        let b2 = reg.insert(Block {
            depth: 2,
            previous: Some(b1),
            timestamp: 2.0,
            miner: NodeId(1),
            transactions: vec![tx],
            tx_count: 1,
            uncles: vec![],
            ..Block::genesis()
        });
        let mut node = NodeState::new(NodeId(0), 1.0, 0.0);
        node.chain.push(a1);
        node.pool.insert(txs.entry(tx));
        let params = uncle_params();
        let action = receive_block(&mut node, b2, &reg, Some(&txs), Some(&params));
        assert_eq!(action, ChainAction::Replaced);
        assert!(node.pool.is_empty());
        assert_eq!(node.uncle_chain, vec![a1]);
    }

    #[test]
    fn uncle_window_boundaries() {
        let mut reg = BlockRegistry::new();
        let mut main = vec![BlockId::GENESIS];
        for _ in 0..17 {
            let next = add(&mut reg, *main.last().unwrap(), 0);
            main.push(next);
        }
        let uncle = add(&mut reg, main[9], 1); // depth 10
        assert_eq!(reg.block(uncle).depth, 10);
        let mut node = NodeState::new(NodeId(0), 1.0, 0.0);
        node.chain = main[..17].to_vec(); // tip depth 16
        node.uncle_chain.push(uncle);
        let p = uncle_params();
        assert_eq!(eligible_uncles(&node, &reg, 17, &p), vec![uncle]);
        node.chain = main.clone(); // tip depth 17
        assert!(eligible_uncles(&node, &reg, 18, &p).is_empty());
    }

    #[test]
    fn at_most_max_uncles_oldest_first() {
        let mut reg = BlockRegistry::new();
        let mut main = vec![BlockId::GENESIS];
        for _ in 0..6 {
            let next = add(&mut reg, *main.last().unwrap(), 0);
            main.push(next);
        }
        let u5 = add(&mut reg, main[4], 1);
        let u3 = add(&mut reg, main[2], 2);
        let u4 = add(&mut reg, main[3], 3);
        let mut node = NodeState::new(NodeId(0), 1.0, 0.0);
        node.chain = main;
        node.uncle_chain = vec![u5, u3, u4];
        let p = uncle_params();
        assert_eq!(eligible_uncles(&node, &reg, 7, &p), vec![u3, u4]);
        let newest = UncleParams {
            order: UncleOrder::NewestFirst,
            ..p
        };
        assert_eq!(eligible_uncles(&node, &reg, 7, &newest), vec![u5, u4]);
    }

    #[test]
    fn referenced_uncle_not_eligible_again() {
        let mut reg = BlockRegistry::new();
        let a1 = add(&mut reg, BlockId::GENESIS, 0);
        let u1 = add(&mut reg, BlockId::GENESIS, 1);
        let a2 = reg.insert(Block {
            depth: 2,
            previous: Some(a1),
            timestamp: 2.0,
            miner: NodeId(0),
            uncles: vec![u1],
            ..Block::genesis()
        });
        let mut node = NodeState::new(NodeId(0), 1.0, 0.0);
        node.chain = vec![BlockId::GENESIS, a1, a2];
        node.uncle_chain = vec![u1];
        assert!(eligible_uncles(&node, &reg, 3, &uncle_params()).is_empty());
    }

    #[test]
    fn main_chain_tie_goes_to_lowest_id() {
        let mut reg = BlockRegistry::new();
        let mut nodes: Vec<NodeState> =
            (0..3).map(|i| NodeState::new(NodeId(i), 0.0, 0.0)).collect();
        for (node, depth) in [(2usize, 9), (0, 10), (1, 10)] {
            let mut prev = BlockId::GENESIS;
            for _ in 0..depth {
                prev = add(&mut reg, prev, node as u32);
                nodes[node].chain.push(prev);
            }
        }
        assert_eq!(main_chain(&nodes), nodes[0].chain.as_slice());
    }

    #[test]
    fn stale_event_is_discarded_and_rescheduled() {
        let proto = protocol(Selector::PowRace, 0.0);
        let mut w = world(&[1.0]);
        let mut sched = Scheduler::new(1);
        let mut prev = BlockId::GENESIS;
        for _ in 0..4 {
            prev = add(&mut w.registry, prev, 0);
            w.nodes[0].chain.push(prev);
        }
        proto.schedule_next_creation(&mut w, NodeId(0), 0.0, &mut sched).unwrap();
        // tip advances 4 -> 5 behind the pending event's back
        let b5 = add(&mut w.registry, prev, 0);
        w.nodes[0].chain.push(b5);
        let ev = sched.queue.next_event().unwrap();
        let out = proto.on_block_create(&mut w, &ev, &mut sched).unwrap();
        assert_eq!(out, CreateOutcome::Stale);
        assert_eq!(sched.queue.len(), 1);
        let fresh = sched.queue.next_event().unwrap();
        assert_eq!(fresh.kind(), EventKind::BlockCreate);
        assert_eq!(fresh.payload, EventPayload::BlockCreate { parent_depth: 5 });
    }

    #[test]
    fn empty_block_when_transactions_disabled() {
        let proto = protocol(Selector::PowRace, 0.0);
        let mut w = world(&[1.0]);
        let mut sched = Scheduler::new(1);
        proto.start(&mut w, &mut sched).unwrap();
        let ev = sched.queue.next_event().unwrap();
        let CreateOutcome::Created(id) = proto.on_block_create(&mut w, &ev, &mut sched).unwrap()
        else {
            panic!("expected a block");
        };
        let b = w.registry.block(id);
        assert_eq!(b.depth, 1);
        assert_eq!(b.tx_count, 0);
        assert_eq!(b.previous, Some(BlockId::GENESIS));
    }

    #[test]
    fn full_mode_block_takes_highest_fees() {
        let mut proto = protocol(Selector::PowRace, 0.0);
        proto.workload.has_trans = true;
        proto.workload.technique = Technique::Full;
        let mut w = world(&[1.0]);
        let mut sched = Scheduler::new(1);
        for fee in [5.0, 3.0, 9.0] {
            let id = w.txs.insert(crate::model::Transaction {
                id: TxId(0),
                timestamp: 0.0,
                submitter: NodeId(0),
                recipient: NodeId(0),
                value: 0.0,
                size: 1.0,
                fee,
                gas: None,
            });
            w.nodes[0].pool.insert(w.txs.entry(id));
        }
        proto.start(&mut w, &mut sched).unwrap();
        let ev = sched.queue.next_event().unwrap();
        let CreateOutcome::Created(id) = proto.on_block_create(&mut w, &ev, &mut sched).unwrap()
        else {
            panic!("expected a block");
        };
        let fees: Vec<f64> = w
            .registry
            .block(id)
            .transactions
            .iter()
            .map(|t| w.txs.get(*t).fee)
            .collect();
        assert_eq!(fees, vec![9.0, 5.0]);
        assert_eq!(
            w.nodes[0].pool.iter().collect::<Vec<_>>(),
            vec![&PoolEntry { fee: 3.0, size: 1.0, id: TxId(1) }]
        );
    }

    #[test]
    fn zero_weight_miner_rejected() {
        let proto = protocol(Selector::PowRace, 0.0);
        let mut w = world(&[1.0, 0.0]);
        let mut sched = Scheduler::new(1);
        assert!(matches!(
            proto.schedule_next_creation(&mut w, NodeId(1), 0.0, &mut sched),
            Err(ConsensusError::ZeroWeight(_))
        ));
    }

    #[test]
    fn single_miner_inter_creation_mean() {
        let proto = protocol(Selector::PowRace, 0.0);
        let mut w = world(&[1.0]);
        let mut sched = Scheduler::new(5);
        let n = 10_000;
        let mut total = 0.0;
        for _ in 0..n {
            let at = sched.clock();
            proto.schedule_next_creation(&mut w, NodeId(0), at, &mut sched).unwrap();
            let ev = sched.queue.next_event().unwrap();
            total += ev.time - at;
        }
        let mean = total / n as f64;
        // 3 sigma on the sample mean: 3 * 600 / 100 = 18
        assert!((mean - 600.0).abs() < 18.0, "mean {mean}");
    }

    #[test]
    fn round_robin_cycles_miners() {
        let proto = protocol(Selector::RoundRobin, 0.0);
        let mut w = world(&[0.5, 0.0, 0.5]);
        let mut sched = Scheduler::new(1);
        proto.start(&mut w, &mut sched).unwrap();
        let mut order = Vec::new();
        for _ in 0..4 {
            let ev = sched.queue.next_event().unwrap();
            assert_eq!(ev.time, 600.0 * (order.len() + 1) as f64);
            if let EventPayload::BlockCreate { .. } = ev.payload {
                proto.on_block_create(&mut w, &ev, &mut sched).unwrap();
                order.push(ev.node.0);
            }
            // drain deliveries
            while sched.queue.peek_time() == Some(ev.time) {
                let r = sched.queue.next_event().unwrap();
                if let EventPayload::BlockReceive { block } = r.payload {
                    proto.on_block_receive(&mut w, r.node, block, r.time, &mut sched).unwrap();
                }
            }
        }
        assert_eq!(order, vec![0, 2, 0, 2]);
    }
}

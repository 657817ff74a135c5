use thiserror::Error;

use super::{EngineError, EventPayload, Scheduler, SimTime};
use crate::consensus::{main_chain, ConsensusError, Protocol};
use crate::incentives::{distribute, RewardError, RewardLedger, RewardParams};
use crate::model::{BlockId, NodeId, NodeState, World};
use crate::network::{broadcast_tx, NetworkError};
use crate::workload::{refill_shared_pool, schedule_next_tx};

/// When a run stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Stop before the first event later than this many seconds.
    Time(SimTime),
    /// Stop once this many blocks have been created.
    Blocks(u64),
}

/// Immutable description of one run, shared by every run of an experiment.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub protocol: Protocol,
    pub rewards: RewardParams,
    pub node_count: usize,
    /// Per-node hash power; zero for nodes that do not mine.
    pub hash_power: Vec<f64>,
    pub stakes: Vec<f64>,
    pub horizon: Horizon,
}

impl Simulation {
    /// Weight each node carries in the block race under the selector.
    pub fn selection_weights(&self) -> Vec<f64> {
        use crate::consensus::Selector;
        match self.protocol.consensus.selector {
            Selector::StakeProportional => {
                let total: f64 = self.stakes.iter().sum();
                self.stakes.iter().map(|s| s / total).collect()
            }
            Selector::PowRace | Selector::RoundRobin => self.hash_power.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

/// Final state of a run.
#[derive(Debug)]
pub struct RunOutcome {
    pub seed: u64,
    pub world: World,
    pub main_chain: Vec<BlockId>,
    pub ledger: RewardLedger,
    /// Simulated seconds covered by the run.
    pub elapsed: SimTime,
    pub events_dispatched: u64,
}

/// Executes one run to its horizon and pays out rewards on the main chain.
pub fn run_loop(sim: &Simulation, seed: u64) -> Result<RunOutcome, RunError> {
    let weights = sim.selection_weights();
    let nodes = (0..sim.node_count)
        .map(|i| {
            NodeState::new(
                NodeId(i as u32),
                sim.hash_power.get(i).copied().unwrap_or(0.0),
                sim.stakes.get(i).copied().unwrap_or(0.0),
            )
        })
        .collect();
    let mut world = World::new(nodes, weights);
    let mut sched = Scheduler::new(seed);
    let proto = &sim.protocol;

    let (time_limit, block_target) = match sim.horizon {
        Horizon::Time(t) => (t, u64::MAX),
        Horizon::Blocks(n) => (f64::INFINITY, n),
    };

    let mut events = 0u64;
    if block_target > 0 {
        proto.start(&mut world, &mut sched)?;
        if proto.workload.light_mode() {
            refill_shared_pool(
                &mut world.shared_pool,
                &proto.workload,
                proto.consensus.block_interval,
                proto.capacity_in_tx(),
                0.0,
                &mut sched.tx_rng,
            );
        }
        let n = world.node_count();
        schedule_next_tx(
            &proto.workload,
            &mut world.txs,
            n,
            0.0,
            &mut sched.queue,
            &mut sched.tx_rng,
        )?;
    }

    while world.counters.blocks_created < block_target {
        match sched.queue.peek_time() {
            Some(t) if t <= time_limit => {}
            _ => break,
        }
        let event = sched.queue.next_event().expect("peeked");
        events += 1;
        match event.payload {
            EventPayload::BlockCreate { .. } => {
                proto.on_block_create(&mut world, &event, &mut sched)?;
            }
            EventPayload::BlockReceive { block } => {
                proto.on_block_receive(&mut world, event.node, block, event.time, &mut sched)?;
            }
            EventPayload::TxCreate { tx } => {
                let entry = world.txs.entry(tx);
                world.nodes[event.node.index()].pool.insert(entry);
                broadcast_tx(
                    &proto.delays,
                    true,
                    world.node_count(),
                    event.node,
                    tx,
                    event.time,
                    &mut sched.queue,
                    &mut sched.tx_rng,
                )?;
                let n = world.node_count();
                schedule_next_tx(
                    &proto.workload,
                    &mut world.txs,
                    n,
                    event.time,
                    &mut sched.queue,
                    &mut sched.tx_rng,
                )?;
            }
            EventPayload::TxReceive { tx } => {
                let node = &world.nodes[event.node.index()];
                let already_included = world
                    .txs
                    .inclusions(tx)
                    .iter()
                    .any(|b| node.has_on_chain(world.registry.block(*b)));
                if !already_included {
                    let entry = world.txs.entry(tx);
                    world.nodes[event.node.index()].pool.insert(entry);
                }
            }
        }
    }

    let elapsed = match sim.horizon {
        Horizon::Time(t) => t,
        Horizon::Blocks(_) => sched.clock(),
    };
    let chain = main_chain(&world.nodes).to_vec();
    let ledger = distribute(&chain, &world.registry, &sim.rewards, &mut world.nodes)?;
    Ok(RunOutcome {
        seed,
        world,
        main_chain: chain,
        ledger,
        elapsed,
        events_dispatched: events,
    })
}

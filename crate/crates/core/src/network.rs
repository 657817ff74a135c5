//! Broadcast abstracted to a propagation delay: every peer receives every
//! block and transaction after a delay, with no topology.

use thiserror::Error;

use crate::engine::{EngineError, EventPayload, EventQueue, RandomSource, SimTime};
use crate::model::{BlockId, NodeId, TxId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelayMode {
    /// Every delivery takes exactly the configured delay.
    #[default]
    Constant,
    /// Each delivery draws an independent exponential delay with the
    /// configured mean.
    ExponentialMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayModel {
    pub block_delay: f64,
    pub tx_delay: f64,
    pub mode: DelayMode,
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("transactions are not propagated under the light technique")]
    LightMode,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl DelayModel {
    fn draw(&self, mean: f64, rng: &mut RandomSource) -> Result<f64, EngineError> {
        match self.mode {
            DelayMode::Constant => Ok(mean),
            DelayMode::ExponentialMean if mean == 0.0 => Ok(0.0),
            DelayMode::ExponentialMean => rng.exponential(mean),
        }
    }

    pub fn block_delay(&self, rng: &mut RandomSource) -> Result<f64, EngineError> {
        self.draw(self.block_delay, rng)
    }

    pub fn tx_delay(&self, rng: &mut RandomSource) -> Result<f64, EngineError> {
        self.draw(self.tx_delay, rng)
    }
}

/// Schedules one `BlockReceive` per node other than `sender`. Returns the
/// number of events scheduled.
pub fn broadcast_block(
    delays: &DelayModel,
    node_count: usize,
    sender: NodeId,
    block: BlockId,
    at: SimTime,
    queue: &mut EventQueue,
    rng: &mut RandomSource,
) -> Result<usize, EngineError> {
    let mut sent = 0;
    for peer in (0..node_count as u32).map(NodeId).filter(|&n| n != sender) {
        let delay = delays.block_delay(rng)?;
        queue.schedule(at + delay, peer, EventPayload::BlockReceive { block })?;
        sent += 1;
    }
    Ok(sent)
}

/// Schedules one `TxReceive` per node other than `sender`.
#[allow(clippy::too_many_arguments)]
pub fn broadcast_tx(
    delays: &DelayModel,
    full_mode: bool,
    node_count: usize,
    sender: NodeId,
    tx: TxId,
    at: SimTime,
    queue: &mut EventQueue,
    rng: &mut RandomSource,
) -> Result<usize, NetworkError> {
    if !full_mode {
        return Err(NetworkError::LightMode);
    }
    let mut sent = 0;
    for peer in (0..node_count as u32).map(NodeId).filter(|&n| n != sender) {
        let delay = delays.tx_delay(rng)?;
        queue.schedule(at + delay, peer, EventPayload::TxReceive { tx })?;
        sent += 1;
    }
    Ok(sent)
}

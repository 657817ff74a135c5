//! Future-event list ordered by `(time, seq)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::model::{BlockId, NodeId, TxId};

use super::EngineError;

/// Simulated time in seconds.
pub type SimTime = f64;

/// What an event does when dispatched, together with the entity it carries.
///
/// Block events carry a block (or, for creation, the depth of the parent the
/// miner intends to build on); transaction events carry a transaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventPayload {
    BlockCreate { parent_depth: u64 },
    BlockReceive { block: BlockId },
    TxCreate { tx: TxId },
    TxReceive { tx: TxId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    BlockCreate,
    BlockReceive,
    TxCreate,
    TxReceive,
}

impl EventPayload {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::BlockCreate { .. } => EventKind::BlockCreate,
            EventPayload::BlockReceive { .. } => EventKind::BlockReceive,
            EventPayload::TxCreate { .. } => EventKind::TxCreate,
            EventPayload::TxReceive { .. } => EventKind::TxReceive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub node: NodeId,
    pub time: SimTime,
    pub payload: EventPayload,
    /// Insertion counter; breaks ties between simultaneous events (FIFO).
    pub seq: u64,
}

impl Event {
    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }
}

/// Heap entry with the ordering inverted so `BinaryHeap` pops the minimum.
#[derive(Debug)]
struct Entry(Event);

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .time
            .total_cmp(&self.0.time)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

/// Pending events plus the simulation clock.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Entry>,
    clock: SimTime,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Time of the next event without removing it.
    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.0.time)
    }

    /// Stores an event and returns its sequence number.
    pub fn schedule(
        &mut self,
        time: SimTime,
        node: NodeId,
        payload: EventPayload,
    ) -> Result<u64, EngineError> {
        if !time.is_finite() || time < self.clock {
            return Err(EngineError::EventInPast {
                time,
                clock: self.clock,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry(Event {
            node,
            time,
            payload,
            seq,
        }));
        Ok(seq)
    }

    /// Removes the earliest event and advances the clock to its time.
    pub fn next_event(&mut self) -> Option<Event> {
        let Entry(event) = self.heap.pop()?;
        self.clock = event.time;
        Some(event)
    }
}

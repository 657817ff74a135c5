//! Event queue, clock, random source and the run loop.

mod queue;
mod random;
mod run;

use thiserror::Error;

pub use queue::{Event, EventKind, EventPayload, EventQueue, SimTime};
pub use random::{exponential_from_unit, sample_exponential, RandomSource};
pub use run::{run_loop, Horizon, RunError, RunOutcome, Simulation};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("event at t={time} scheduled before the clock (t={clock})")]
    EventInPast { time: f64, clock: f64 },
    #[error("exponential mean must be positive and finite, got {0}")]
    NonPositiveMean(f64),
}

/// Queue plus the two random streams of a run: one drives block races and
/// block delays, the other drives the transaction workload. Keeping them
/// apart means enabling transactions does not perturb block timing.
#[derive(Debug)]
pub struct Scheduler {
    pub queue: EventQueue,
    pub rng: RandomSource,
    pub tx_rng: RandomSource,
}

impl Scheduler {
    pub fn new(seed: u64) -> Self {
        Self {
            queue: EventQueue::new(),
            rng: RandomSource::with_stream(seed, 0),
            tx_rng: RandomSource::with_stream(seed, 1),
        }
    }

    pub fn clock(&self) -> SimTime {
        self.queue.clock()
    }
}

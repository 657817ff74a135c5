//! Discrete-event simulator for proof-of-work blockchains.
//!
//! A run advances a single event queue over block creation, block delivery
//! and transaction events. Each node keeps its own chain and resolves forks
//! with the longest-chain rule; rewards are paid on the final main chain.
//!
//! ```no_run
//! use chainsim::cli::SimConfig;
//! use chainsim::engine::run_loop;
//! use chainsim::stats::summarize_run;
//!
//! let cfg = SimConfig::parse("preset = bitcoin\nB_target = 1000\n", None).unwrap();
//! let outcome = run_loop(&cfg.simulation(), 7).unwrap();
//! let report = summarize_run(&outcome, 0, 0.0);
//! println!("stale rate {:.4}", report.stale_rate);
//! ```

pub mod cli;
pub mod consensus;
pub mod engine;
pub mod incentives;
pub mod model;
pub mod network;
pub mod stats;
pub mod workload;

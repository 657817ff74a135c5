//! Run orchestration and report output.

pub mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

pub use config::{ConfigError, MinerSpec, Preset, SimConfig, FIVE_MINERS};

use crate::engine::{run_loop, RunError, Simulation};
use crate::stats::{aggregate, summarize_run, Aggregate, RunReport, StatsError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("simulation failed: {0}")]
    Run(#[from] RunError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("output error: {0}")]
    Io(#[from] io::Error),
    #[error("output error: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OutputOptions {
    pub out_dir: PathBuf,
    pub parallel: usize,
    /// Write measured wall-clock seconds; when off the column holds 0 so
    /// repeated runs produce identical files.
    pub wall_clock: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("."),
            parallel: 1,
            wall_clock: true,
        }
    }
}

/// Runs `runs` independent replications seeded `base_seed + i`, in parallel
/// when `parallel > 1`. Reports come back in run-index order.
pub fn execute_runs(
    sim: &Simulation,
    base_seed: u64,
    runs: usize,
    parallel: usize,
) -> Result<Vec<RunReport>, CliError> {
    let one = |i: usize| -> Result<RunReport, RunError> {
        let start = Instant::now();
        let outcome = run_loop(sim, base_seed.wrapping_add(i as u64))?;
        Ok(summarize_run(&outcome, i, start.elapsed().as_secs_f64()))
    };
    let reports = if parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(parallel).build()?;
        pool.install(|| (0..runs).into_par_iter().map(one).collect::<Result<Vec<_>, _>>())?
    } else {
        (0..runs).map(one).collect::<Result<Vec<_>, _>>()?
    };
    Ok(reports)
}

fn wall(value: f64, opts: &OutputOptions) -> f64 {
    if opts.wall_clock {
        value
    } else {
        0.0
    }
}

pub fn write_runs_csv<W: Write>(
    out: W,
    reports: &[RunReport],
    miners: usize,
    opts: &OutputOptions,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "run_index",
        "seed",
        "blocks_created",
        "blocks_included",
        "stale_rate",
        "throughput_tps",
        "mean_tx_latency_s",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for i in 0..miners {
        header.push(format!("share_{i}"));
        header.push(format!("reward_share_{i}"));
    }
    header.push("wall_clock_s".into());
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![
            r.run_index.to_string(),
            r.seed.to_string(),
            r.blocks_created.to_string(),
            r.blocks_included.to_string(),
            r.stale_rate.to_string(),
            r.throughput.to_string(),
            r.mean_tx_latency.map(|l| l.to_string()).unwrap_or_default(),
        ];
        for i in 0..miners {
            row.push(r.miner_shares.get(i).copied().unwrap_or(0.0).to_string());
            row.push(r.reward_shares.get(i).copied().unwrap_or(0.0).to_string());
        }
        row.push(wall(r.wall_clock, opts).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(
    out: W,
    agg: &Aggregate,
    opts: &OutputOptions,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "mean", "half_width_95", "runs"])?;
    let mut row = |name: &str, e: &crate::stats::Estimate| {
        w.write_record([
            name.to_string(),
            e.mean.to_string(),
            e.half_width.to_string(),
            e.runs.to_string(),
        ])
    };
    row("blocks_created", &agg.blocks_created)?;
    row("blocks_included", &agg.blocks_included)?;
    row("blocks_per_day", &agg.blocks_per_day)?;
    row("stale_rate", &agg.stale_rate)?;
    row("throughput_tps", &agg.throughput)?;
    if let Some(l) = &agg.mean_tx_latency {
        row("mean_tx_latency_s", l)?;
    }
    for (i, e) in agg.miner_shares.iter().enumerate() {
        row(&format!("share_{i}"), e)?;
    }
    for (i, e) in agg.reward_shares.iter().enumerate() {
        row(&format!("reward_share_{i}"), e)?;
    }
    let mut wc = agg.wall_clock;
    if !opts.wall_clock {
        wc.mean = 0.0;
        wc.half_width = 0.0;
    }
    row("wall_clock_s", &wc)?;
    w.flush()?;
    Ok(())
}

pub fn format_summary(cfg: &SimConfig, agg: &Aggregate) -> String {
    let pct = |e: &crate::stats::Estimate| format!("{:.3}% ± {:.3}", 100.0 * e.mean, 100.0 * e.half_width);
    let mut s = format!(
        "runs: {}  B_interval: {} s  B_delay: {} s\n",
        agg.stale_rate.runs, cfg.b_interval, cfg.b_delay
    );
    s += &format!(
        "blocks created: {:.1} ± {:.1}\nblocks included: {:.1} ± {:.1} ({:.1} per day)\n",
        agg.blocks_created.mean,
        agg.blocks_created.half_width,
        agg.blocks_included.mean,
        agg.blocks_included.half_width,
        agg.blocks_per_day.mean
    );
    s += &format!("stale rate: {}\n", pct(&agg.stale_rate));
    s += &format!(
        "throughput: {:.3} ± {:.3} tx/s\n",
        agg.throughput.mean, agg.throughput.half_width
    );
    if let Some(l) = &agg.mean_tx_latency {
        s += &format!("mean tx latency: {:.1} ± {:.1} s\n", l.mean, l.half_width);
    }
    for (i, (b, r)) in agg.miner_shares.iter().zip(&agg.reward_shares).enumerate() {
        s += &format!("miner {i}: blocks {}  rewards {}\n", pct(b), pct(r));
    }
    s
}

/// Files written to temporary names and renamed into place together, so a
/// failure never leaves partial output behind.
struct Staged {
    files: Vec<(PathBuf, PathBuf)>,
}

impl Staged {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn write(
        &mut self,
        dir: &Path,
        name: &str,
        fill: impl FnOnce(&mut fs::File) -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        let tmp = dir.join(format!(".{name}.partial"));
        self.files.push((tmp.clone(), dir.join(name)));
        let mut file = fs::File::create(&tmp)?;
        fill(&mut file)?;
        file.sync_all()?;
        Ok(())
    }

    fn commit(mut self) -> Result<Vec<PathBuf>, CliError> {
        let mut done = Vec::new();
        while !self.files.is_empty() {
            let (tmp, dest) = self.files.remove(0);
            if let Err(e) = fs::rename(&tmp, &dest) {
                let _ = fs::remove_file(&tmp);
                for d in &done {
                    let _ = fs::remove_file(d);
                }
                // remaining temporaries are removed on drop
                return Err(e.into());
            }
            done.push(dest);
        }
        Ok(done)
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        for (tmp, _) in &self.files {
            let _ = fs::remove_file(tmp);
        }
    }
}

#[derive(Debug)]
pub struct RunCommandOutput {
    pub reports: Vec<RunReport>,
    pub aggregate: Aggregate,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Executes every run of `cfg` and writes `runs.csv` and `aggregate.csv`.
pub fn run_command(cfg: &SimConfig, opts: &OutputOptions) -> Result<RunCommandOutput, CliError> {
    let sim = cfg.simulation();
    let reports = execute_runs(&sim, cfg.seed, cfg.runs, opts.parallel)?;
    let agg = aggregate(&reports)?;
    fs::create_dir_all(&opts.out_dir)?;
    let mut staged = Staged::new();
    staged.write(&opts.out_dir, "runs.csv", |f| {
        write_runs_csv(f, &reports, sim.node_count, opts)
    })?;
    staged.write(&opts.out_dir, "aggregate.csv", |f| write_aggregate_csv(f, &agg, opts))?;
    let files = staged.commit()?;
    let summary = format_summary(cfg, &agg);
    Ok(RunCommandOutput {
        reports,
        aggregate: agg,
        files,
        summary,
    })
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub b_interval: f64,
    pub b_delay: f64,
    pub aggregate: Aggregate,
}

/// Parses a comma-separated list of positive numbers.
pub fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let values = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| CliError::Usage(format!("{flag}: invalid value `{}`", s.trim())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(CliError::Usage(format!("{flag}: empty list")));
    }
    Ok(values)
}

/// Runs every (interval, delay) cell of the grid and writes `sweep.csv`.
pub fn sweep_command(
    cfg: &SimConfig,
    intervals: &[f64],
    delays: &[f64],
    opts: &OutputOptions,
) -> Result<Vec<SweepRow>, CliError> {
    if intervals.is_empty() || delays.is_empty() {
        return Err(CliError::Usage("sweep grid is empty".into()));
    }
    if let Some(bad) = intervals.iter().find(|v| **v <= 0.0) {
        return Err(CliError::Usage(format!("block interval must be positive, got {bad}")));
    }
    let mut rows = Vec::new();
    for &b_interval in intervals {
        for &b_delay in delays {
            let cell = SimConfig {
                b_interval,
                b_delay,
                ..cfg.clone()
            };
            let reports = execute_runs(&cell.simulation(), cell.seed, cell.runs, opts.parallel)?;
            rows.push(SweepRow {
                b_interval,
                b_delay,
                aggregate: aggregate(&reports)?,
            });
        }
    }
    fs::create_dir_all(&opts.out_dir)?;
    let miners = cfg.node_count();
    let mut staged = Staged::new();
    staged.write(&opts.out_dir, "sweep.csv", |f| write_sweep_csv(f, &rows, miners, opts))?;
    staged.commit()?;
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(
    out: W,
    rows: &[SweepRow],
    miners: usize,
    opts: &OutputOptions,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["b_interval", "b_delay", "stale_rate", "throughput_tps"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..miners).map(|i| format!("share_{i}")));
    header.push("wall_clock_s".into());
    w.write_record(&header)?;
    for r in rows {
        let a = &r.aggregate;
        let mut row = vec![
            r.b_interval.to_string(),
            r.b_delay.to_string(),
            a.stale_rate.mean.to_string(),
            a.throughput.mean.to_string(),
        ];
        row.extend(
            (0..miners).map(|i| a.miner_shares.get(i).map(|e| e.mean).unwrap_or(0.0).to_string()),
        );
        row.push(wall(a.wall_clock.mean, opts).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

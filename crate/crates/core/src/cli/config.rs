//! Flat `key = value` configuration with presets.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::consensus::{ConsensusParams, ForkRule, Protocol, Selector, UncleOrder, UncleParams};
use crate::engine::{Horizon, Simulation};
use crate::incentives::RewardParams;
use crate::network::{DelayMode, DelayModel};
use crate::workload::{Sampler, Technique, WorkloadParams};

/// Hash-power split used by the presets and the sweep grid: 40/30/15/10/5.
pub const FIVE_MINERS: [f64; 5] = [0.40, 0.30, 0.15, 0.10, 0.05];

pub const ONE_MONTH: f64 = 30.0 * 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Bitcoin,
    Ethereum,
    Custom,
}

#[derive(Debug, Error, PartialEq)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinerSpec {
    pub id: u32,
    pub hash_power: f64,
    pub stake: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub preset: Preset,
    pub b_interval: f64,
    pub b_size: f64,
    pub b_delay: f64,
    pub b_reward: f64,
    pub delay_mode: DelayMode,
    pub has_trans: bool,
    pub t_technique: Technique,
    pub t_n: f64,
    pub t_delay: f64,
    pub t_fee: Sampler,
    pub t_size: Sampler,
    pub gas: bool,
    pub n_n: usize,
    pub miners: Vec<MinerSpec>,
    pub selector: Selector,
    pub uncles: bool,
    pub u_max: usize,
    pub g_uncle: u64,
    pub uncle_inclusion_reward: f64,
    pub uncle_order: UncleOrder,
    pub horizon: Horizon,
    pub runs: usize,
    pub seed: u64,
}

fn miners_from(fractions: &[f64]) -> Vec<MinerSpec> {
    fractions
        .iter()
        .enumerate()
        .map(|(i, f)| MinerSpec {
            id: i as u32,
            hash_power: *f,
            stake: *f,
        })
        .collect()
}

impl SimConfig {
    pub fn bitcoin() -> Self {
        Self {
            preset: Preset::Bitcoin,
            b_interval: 596.0,
            b_size: 0.83,
            b_delay: 0.42,
            b_reward: 12.5,
            delay_mode: DelayMode::Constant,
            has_trans: true,
            t_technique: Technique::Light,
            t_n: 3.0,
            t_delay: 0.42,
            // price per MB; 546 B at 0.05 BTC/MB is about 2.7e-5 BTC
            t_fee: Sampler::Const(0.05),
            t_size: Sampler::Const(0.000546),
            gas: false,
            n_n: FIVE_MINERS.len(),
            miners: miners_from(&FIVE_MINERS),
            selector: Selector::PowRace,
            uncles: false,
            u_max: 2,
            g_uncle: 7,
            uncle_inclusion_reward: 1.0 / 32.0,
            uncle_order: UncleOrder::OldestFirst,
            horizon: Horizon::Time(ONE_MONTH),
            runs: 1,
            seed: 0,
        }
    }

    pub fn ethereum() -> Self {
        Self {
            preset: Preset::Ethereum,
            b_interval: 12.42,
            b_size: 7_997_148.0,
            b_delay: 2.3,
            b_reward: 3.0,
            t_n: 7.0,
            t_delay: 2.3,
            // gas price in ETH (20 gwei)
            t_fee: Sampler::Const(2e-8),
            // gas used per transaction; placeholder until a fitted histogram
            // is supplied with `T_size = hist:PATH`
            t_size: Sampler::Exp(60_000.0),
            gas: true,
            uncles: true,
            ..Self::bitcoin()
        }
    }

    /// Defaults for a custom configuration; the block interval, size and delay
    /// still have to be given.
    pub fn custom() -> Self {
        Self {
            preset: Preset::Custom,
            has_trans: false,
            ..Self::bitcoin()
        }
    }

    pub fn from_preset(preset: Preset) -> Self {
        match preset {
            Preset::Bitcoin => Self::bitcoin(),
            Preset::Ethereum => Self::ethereum(),
            Preset::Custom => Self::custom(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::global(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    /// Parses configuration text. Relative histogram paths resolve against
    /// `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(ConfigError::at(line, "empty key"));
            }
            if let Some((prev, _, _)) = entries.iter().find(|(_, k, _)| *k == key) {
                return Err(ConfigError::at(line, format!("`{key}` already set on line {prev}")));
            }
            entries.push((line, key, value.trim().to_string()));
        }

        let preset = match entries.iter().find(|(_, k, _)| k == "preset") {
            Some((line, _, v)) => match v.to_ascii_lowercase().as_str() {
                "bitcoin" => Preset::Bitcoin,
                "ethereum" => Preset::Ethereum,
                "custom" => Preset::Custom,
                other => return Err(ConfigError::at(*line, format!("unknown preset `{other}`"))),
            },
            None => Preset::Custom,
        };
        let mut cfg = Self::from_preset(preset);
        let mut miners_line = None;
        let mut stakes = None;
        let mut n_n_set = false;
        let mut horizon_line = None;

        for (line, key, value) in &entries {
            let line = *line;
            let v = value.as_str();
            match key.as_str() {
                "preset" => {}
                "b_interval" => cfg.b_interval = positive(line, key, v)?,
                "b_size" => cfg.b_size = positive(line, key, v)?,
                "b_delay" => cfg.b_delay = non_negative(line, key, v)?,
                "b_reward" => cfg.b_reward = non_negative(line, key, v)?,
                "delay_mode" => {
                    cfg.delay_mode = match v.to_ascii_lowercase().as_str() {
                        "constant" | "const" => DelayMode::Constant,
                        "exponential" | "exp" => DelayMode::ExponentialMean,
                        _ => return Err(ConfigError::at(line, format!("unknown delay_mode `{v}`"))),
                    }
                }
                "hastrans" => cfg.has_trans = boolean(line, key, v)?,
                "t_technique" => {
                    cfg.t_technique = match v.to_ascii_lowercase().as_str() {
                        "full" => Technique::Full,
                        "light" => Technique::Light,
                        _ => return Err(ConfigError::at(line, format!("unknown T_technique `{v}`"))),
                    }
                }
                "t_n" => cfg.t_n = non_negative(line, key, v)?,
                "t_delay" => cfg.t_delay = non_negative(line, key, v)?,
                "t_fee" => cfg.t_fee = sampler(line, v, base)?,
                "t_size" => {
                    let s = sampler(line, v, base)?;
                    if s.mean() <= 0.0 || s.min_value() < 0.0 {
                        return Err(ConfigError::at(line, "T_size must be positive"));
                    }
                    cfg.t_size = s;
                }
                "gas" => cfg.gas = boolean(line, key, v)?,
                "n_n" => {
                    cfg.n_n = integer(line, key, v)? as usize;
                    n_n_set = true;
                }
                "miners" => {
                    cfg.miners = miners_from(&fraction_list(line, key, v)?);
                    miners_line = Some(line);
                }
                "stakes" => stakes = Some((line, fraction_list(line, key, v)?)),
                "selector" => {
                    cfg.selector = match v.to_ascii_lowercase().as_str() {
                        "pow" => Selector::PowRace,
                        "stake" | "pos" => Selector::StakeProportional,
                        "roundrobin" | "round_robin" => Selector::RoundRobin,
                        _ => return Err(ConfigError::at(line, format!("unknown selector `{v}`"))),
                    }
                }
                "uncles" => cfg.uncles = boolean(line, key, v)?,
                "u_max" => cfg.u_max = integer(line, key, v)? as usize,
                "g_uncle" => cfg.g_uncle = integer(line, key, v)?,
                "uncle_inclusion_reward" => cfg.uncle_inclusion_reward = non_negative(line, key, v)?,
                "uncle_order" => {
                    cfg.uncle_order = match v.to_ascii_lowercase().as_str() {
                        "oldest" => UncleOrder::OldestFirst,
                        "newest" => UncleOrder::NewestFirst,
                        _ => return Err(ConfigError::at(line, format!("unknown uncle_order `{v}`"))),
                    }
                }
                "sim_time" | "b_target" => {
                    if let Some(prev) = horizon_line {
                        return Err(ConfigError::at(
                            line,
                            format!("Sim_time and B_target are exclusive (other set on line {prev})"),
                        ));
                    }
                    horizon_line = Some(line);
                    cfg.horizon = if key == "sim_time" {
                        Horizon::Time(non_negative(line, key, v)?)
                    } else {
                        Horizon::Blocks(integer(line, key, v)?)
                    };
                }
                "runs" => {
                    cfg.runs = integer(line, key, v)? as usize;
                    if cfg.runs == 0 {
                        return Err(ConfigError::at(line, "Runs must be at least 1"));
                    }
                }
                "seed" => cfg.seed = integer(line, key, v)?,
                _ => return Err(ConfigError::at(line, format!("unknown key `{key}`"))),
            }
        }

        if preset == Preset::Custom {
            for required in ["b_interval", "b_size", "b_delay"] {
                if !entries.iter().any(|(_, k, _)| k == required) {
                    return Err(ConfigError::global(format!(
                        "missing required key `{required}` for a custom configuration"
                    )));
                }
            }
        }

        if miners_line.is_some() && !n_n_set {
            cfg.n_n = cfg.miners.len();
        }
        let sum: f64 = cfg.miners.iter().map(|m| m.hash_power).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(located(miners_line, format!("miner fractions sum to {sum}, expected 1")));
        }
        if let Some((line, s)) = stakes {
            if s.len() != cfg.miners.len() {
                return Err(ConfigError::at(
                    line,
                    format!("{} stakes given for {} miners", s.len(), cfg.miners.len()),
                ));
            }
            for (m, stake) in cfg.miners.iter_mut().zip(s) {
                m.stake = stake;
            }
            if cfg.miners.iter().all(|m| m.stake == 0.0) {
                return Err(ConfigError::at(line, "stakes must not all be zero"));
            }
        }
        if cfg.n_n < cfg.miners.len() {
            return Err(located(
                miners_line,
                format!("N_n = {} is smaller than the {} configured miners", cfg.n_n, cfg.miners.len()),
            ));
        }
        if cfg.uncles && cfg.g_uncle == 0 {
            return Err(ConfigError::global("G_uncle must be at least 1 when uncles are enabled"));
        }
        if cfg.uncle_inclusion_reward >= 1.0 {
            return Err(ConfigError::global("uncle_inclusion_reward must be below 1"));
        }
        if cfg.has_trans && cfg.t_size.mean() > cfg.b_size {
            return Err(ConfigError::global("mean T_size exceeds B_size"));
        }
        Ok(cfg)
    }

    pub fn node_count(&self) -> usize {
        self.n_n.max(self.miners.len())
    }

    pub fn simulation(&self) -> Simulation {
        let n = self.node_count();
        let mut hash_power = vec![0.0; n];
        let mut stakes = vec![0.0; n];
        for m in &self.miners {
            hash_power[m.id as usize] = m.hash_power;
            stakes[m.id as usize] = m.stake;
        }
        let uncles = UncleParams {
            max_per_block: self.u_max,
            window: self.g_uncle,
            enabled: self.uncles,
            order: self.uncle_order,
        };
        Simulation {
            protocol: Protocol {
                consensus: ConsensusParams {
                    block_interval: self.b_interval,
                    fork_rule: ForkRule::LongestChain,
                    selector: self.selector,
                    uncles: Some(uncles),
                },
                workload: WorkloadParams {
                    has_trans: self.has_trans,
                    technique: self.t_technique,
                    tx_rate: self.t_n,
                    tx_size: self.t_size.clone(),
                    tx_price: self.t_fee.clone(),
                    tx_delay: self.t_delay,
                    gas_metered: self.gas,
                },
                delays: DelayModel {
                    block_delay: self.b_delay,
                    tx_delay: self.t_delay,
                    mode: self.delay_mode,
                },
                block_capacity: self.b_size,
            },
            rewards: RewardParams {
                block_reward: self.b_reward,
                uncle_generations: self.g_uncle,
                inclusion_reward_fraction: self.uncle_inclusion_reward,
                uncles_enabled: self.uncles,
            },
            node_count: n,
            hash_power,
            stakes,
            horizon: self.horizon,
        }
    }
}

fn located(line: Option<usize>, message: String) -> ConfigError {
    ConfigError { line, message }
}

fn number(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ConfigError::at(line, format!("`{key}` expects a number, got `{v}`")))
}

fn positive(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    let x = number(line, key, v)?;
    if x <= 0.0 {
        return Err(ConfigError::at(line, format!("`{key}` must be positive, got {x}")));
    }
    Ok(x)
}

fn non_negative(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    let x = number(line, key, v)?;
    if x < 0.0 {
        return Err(ConfigError::at(line, format!("`{key}` must not be negative, got {x}")));
    }
    Ok(x)
}

fn integer(line: usize, key: &str, v: &str) -> Result<u64, ConfigError> {
    v.parse::<u64>()
        .map_err(|_| ConfigError::at(line, format!("`{key}` expects a non-negative integer, got `{v}`")))
}

fn boolean(line: usize, key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(ConfigError::at(line, format!("`{key}` expects true or false, got `{v}`"))),
    }
}

fn fraction_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    let values = v
        .split(',')
        .map(|s| non_negative(line, key, s.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(ConfigError::at(line, format!("`{key}` is empty")));
    }
    Ok(values)
}

fn sampler(line: usize, v: &str, base: Option<&Path>) -> Result<Sampler, ConfigError> {
    Sampler::parse(v, base).map_err(|e| ConfigError::at(line, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitcoin_preset_defaults() {
        let cfg = SimConfig::parse("preset = bitcoin\n", None).unwrap();
        assert_eq!(cfg.b_interval, 596.0);
        assert_eq!(cfg.b_delay, 0.42);
        assert_eq!(cfg.b_size, 0.83);
        assert_eq!(cfg.t_size, Sampler::Const(0.000546));
        assert_eq!(cfg.miners.len(), 5);
    }

    #[test]
    fn ethereum_preset_defaults() {
        let cfg = SimConfig::parse("PRESET = Ethereum", None).unwrap();
        assert_eq!(cfg.b_interval, 12.42);
        assert_eq!(cfg.b_delay, 2.3);
        assert_eq!(cfg.b_size, 7_997_148.0);
        assert!(cfg.uncles && cfg.gas);
        assert_eq!((cfg.u_max, cfg.g_uncle), (2, 7));
    }

    #[test]
    fn overrides_and_case_insensitive_keys() {
        let text = "# grid cell\npreset = bitcoin\nb_INTERVAL = 60  # ten times faster\nB_target = 100\nRuns=3\n";
        let cfg = SimConfig::parse(text, None).unwrap();
        assert_eq!(cfg.b_interval, 60.0);
        assert_eq!(cfg.horizon, Horizon::Blocks(100));
        assert_eq!(cfg.runs, 3);
    }

    #[test]
    fn fraction_sum_rejected_with_line() {
        let err = SimConfig::parse("preset = bitcoin\nminers = 0.6, 0.5\n", None).unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.to_string().starts_with("line 2:"), "{err}");
    }

    #[test]
    fn line_numbered_errors() {
        let err = SimConfig::parse("preset = bitcoin\n\nfoo = 1\n", None).unwrap_err();
        assert_eq!(err.line, Some(3));
        let err = SimConfig::parse("preset = bitcoin\nB_interval = 0\n", None).unwrap_err();
        assert_eq!(err.line, Some(2));
        let err = SimConfig::parse("preset = bitcoin\nB_interval = -4\n", None).unwrap_err();
        assert_eq!(err.line, Some(2));
        let err = SimConfig::parse("preset = bitcoin\nnonsense\n", None).unwrap_err();
        assert_eq!(err.line, Some(2));
        let err = SimConfig::parse("B_interval = 1\nB_interval = 2\n", None).unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn custom_requires_block_parameters() {
        let err = SimConfig::parse("B_interval = 600\nB_delay = 1\n", None).unwrap_err();
        assert!(err.message.contains("b_size"), "{err}");
        let cfg = SimConfig::parse("B_interval = 600\nB_delay = 1\nB_size = 1\n", None).unwrap();
        assert!(!cfg.has_trans);
    }

    #[test]
    fn miners_and_extra_nodes() {
        let cfg = SimConfig::parse(
            "preset = bitcoin\nminers = 0.5, 0.5\nN_n = 4\nstakes = 1, 3\n",
            None,
        )
        .unwrap();
        let sim = cfg.simulation();
        assert_eq!(sim.node_count, 4);
        assert_eq!(sim.hash_power, vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(sim.stakes, vec![1.0, 3.0, 0.0, 0.0]);
        let err = SimConfig::parse("preset = bitcoin\nminers = 0.5, 0.5\nN_n = 1\n", None).unwrap_err();
        assert!(err.message.contains("N_n"));
    }

    #[test]
    fn uncle_settings_validated() {
        let err = SimConfig::parse("preset = ethereum\nG_uncle = 0\n", None).unwrap_err();
        assert!(err.message.contains("G_uncle"));
        assert!(SimConfig::parse("preset = bitcoin\nG_uncle = 0\n", None).is_ok());
        assert!(SimConfig::parse("preset = ethereum\nuncle_inclusion_reward = 1\n", None).is_err());
    }

    #[test]
    fn horizon_keys_exclusive() {
        let err = SimConfig::parse("preset = bitcoin\nSim_time = 5\nB_target = 5\n", None).unwrap_err();
        assert_eq!(err.line, Some(3));
    }
}

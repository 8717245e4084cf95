//! Machine description shared by every module.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad config: {0}")]
    Parse(String),
    #[error("unknown key `{key}`; valid keys: {valid}")]
    UnknownKey { key: String, valid: String },
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// HBM stack geometry, DRAM timing, PIM unit resources and GPU bandwidth.
///
/// Loaded from a TOML file of flat `key = value` pairs; any key left out keeps
/// its default and an unrecognized key is an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineConfig {
    pub stacks: usize,
    pub pseudo_channels_per_stack: usize,
    pub banks_per_pseudo_channel: usize,
    pub rows_per_bank: usize,
    pub row_bytes: usize,
    pub word_bits: usize,
    pub lane_bits: usize,
    pub pim_units_per_pseudo_channel: usize,
    pub rf_registers: usize,
    pub t_rp_ns: f64,
    pub t_ccdl_ns: f64,
    pub t_ras_ns: f64,
    pub t_rcd_ns: f64,
    /// Peak GPU-visible bandwidth of one stack in GB/s (bytes per ns).
    pub gpu_bw_per_stack_gbs: f64,
    /// PIM commands issue at this many times the period of a regular column access.
    pub pim_issue_factor: f64,
    /// Fraction of peak bandwidth the GPU kernels achieve.
    pub gpu_utilization: f64,
    /// Largest transform a single GPU kernel keeps on chip.
    pub lds_max_elements: usize,
    /// Bytes per broadcast scalar carried by a command.
    pub scalar_bytes: usize,
    pub cmd_header_bytes: usize,
    /// Whether the units implement the fused add/subtract command.
    pub maddsub_support: bool,
    /// Smallest and largest transform the planner offloads to PIM.
    pub tile_min: usize,
    pub tile_max: usize,
    pub max_fft_elements: usize,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            stacks: 4,
            pseudo_channels_per_stack: 32,
            banks_per_pseudo_channel: 16,
            rows_per_bank: 1 << 14,
            row_bytes: 1024,
            word_bits: 256,
            lane_bits: 32,
            pim_units_per_pseudo_channel: 8,
            rf_registers: 16,
            t_rp_ns: 15.0,
            t_ccdl_ns: 3.33,
            t_ras_ns: 33.0,
            t_rcd_ns: 15.0,
            gpu_bw_per_stack_gbs: 614.4,
            pim_issue_factor: 2.0,
            gpu_utilization: 1.0,
            lds_max_elements: 1 << 13,
            scalar_bytes: 4,
            cmd_header_bytes: 4,
            maddsub_support: true,
            tile_min: 1 << 5,
            tile_max: 1 << 13,
            max_fft_elements: 1 << 30,
        }
    }
}

impl MachineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: MachineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn keys() -> Vec<String> {
        match toml::Value::try_from(MachineConfig::default()) {
            Ok(toml::Value::Table(t)) => t.keys().cloned().collect(),
            _ => unreachable!("config is a table"),
        }
    }

    /// Returns a copy with one key replaced, parsing `value` with the key's type.
    pub fn with(&self, key: &str, value: &str) -> Result<Self, ConfigError> {
        let mut table = match toml::Value::try_from(self.clone()) {
            Ok(toml::Value::Table(t)) => t,
            _ => unreachable!("config is a table"),
        };
        let bad = |reason: &str| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        };
        let new = match table.get(key) {
            None => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                    valid: Self::keys().join(", "),
                })
            }
            Some(toml::Value::Integer(_)) => {
                toml::Value::Integer(parse_count(value).ok_or_else(|| bad("expected an integer"))?)
            }
            Some(toml::Value::Float(_)) => toml::Value::Float(
                value.trim().parse().map_err(|_| bad("expected a number"))?,
            ),
            Some(toml::Value::Boolean(_)) => toml::Value::Boolean(
                value.trim().parse().map_err(|_| bad("expected true or false"))?,
            ),
            Some(_) => return Err(bad("unsupported type")),
        };
        table.insert(key.to_string(), new);
        let cfg: MachineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        let pow2 = [
            ("rows_per_bank", self.rows_per_bank),
            ("row_bytes", self.row_bytes),
            ("word_bits", self.word_bits),
            ("lane_bits", self.lane_bits),
            ("lds_max_elements", self.lds_max_elements),
            ("tile_min", self.tile_min),
            ("tile_max", self.tile_max),
            ("max_fft_elements", self.max_fft_elements),
        ];
        for (k, v) in pow2 {
            if !v.is_power_of_two() {
                problems.push(format!("{k} must be a power of two"));
            }
        }
        if self.lane_bits != 32 {
            problems.push("lane_bits must be 32 (lanes hold single-precision floats)".into());
        }
        if self.word_bits < self.lane_bits || self.word_bits / self.lane_bits > 64 {
            problems.push("word_bits must hold between 1 and 64 lanes".into());
        }
        if self.row_bytes * 8 < self.word_bits {
            problems.push("a row must hold at least one word".into());
        }
        if self.pim_units_per_pseudo_channel == 0
            || self.pim_units_per_pseudo_channel > self.banks_per_pseudo_channel
        {
            problems.push("pim_units_per_pseudo_channel must be in 1..=banks_per_pseudo_channel".into());
        }
        if self.stacks == 0 || self.pseudo_channels_per_stack == 0 {
            problems.push("stacks and pseudo_channels_per_stack must be positive".into());
        }
        if self.rf_registers < 8 || self.rf_registers > 256 {
            problems.push("rf_registers must be in 8..=256".into());
        }
        if self.lds_max_elements < 2 {
            problems.push("lds_max_elements must be at least 2".into());
        }
        if self.tile_min > self.tile_max {
            problems.push("tile_min must not exceed tile_max".into());
        }
        let positive = [
            ("gpu_bw_per_stack_gbs", self.gpu_bw_per_stack_gbs),
            ("pim_issue_factor", self.pim_issue_factor),
            ("gpu_utilization", self.gpu_utilization),
        ];
        for (k, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{k} must be positive"));
            }
        }
        if self.gpu_utilization > 1.0 {
            problems.push("gpu_utilization must not exceed 1".into());
        }
        for (k, v) in [
            ("t_rp_ns", self.t_rp_ns),
            ("t_ccdl_ns", self.t_ccdl_ns),
            ("t_ras_ns", self.t_ras_ns),
            ("t_rcd_ns", self.t_rcd_ns),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                problems.push(format!("{k} must be non-negative"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems.join("; ")))
        }
    }

    pub fn lanes(&self) -> usize {
        self.word_bits / self.lane_bits
    }

    pub fn word_bytes(&self) -> usize {
        self.word_bits / 8
    }

    pub fn words_per_row(&self) -> usize {
        self.row_bytes / self.word_bytes()
    }

    pub fn total_pseudo_channels(&self) -> usize {
        self.stacks * self.pseudo_channels_per_stack
    }

    pub fn total_units(&self) -> usize {
        self.total_pseudo_channels() * self.pim_units_per_pseudo_channel
    }

    pub fn pseudo_channel_bw_gbs(&self) -> f64 {
        self.gpu_bw_per_stack_gbs / self.pseudo_channels_per_stack as f64
    }

    /// Issue period of one PIM column command.
    pub fn pim_op_period_ns(&self) -> f64 {
        self.pim_issue_factor * self.word_bytes() as f64 / self.pseudo_channel_bw_gbs()
    }

    pub fn row_switch_ns(&self) -> f64 {
        self.t_rp_ns + self.t_rcd_ns
    }

    /// Bandwidth the GPU kernels actually draw from all stacks.
    pub fn gpu_bw_gbs(&self) -> f64 {
        self.stacks as f64 * self.gpu_bw_per_stack_gbs * self.gpu_utilization
    }
}

/// Parses `123`, `2^10` or `1<<10`.
pub fn parse_count(text: &str) -> Option<i64> {
    let t = text.trim();
    if let Some((b, e)) = t.split_once('^') {
        let b: i64 = b.trim().parse().ok()?;
        let e: u32 = e.trim().parse().ok()?;
        return b.checked_pow(e);
    }
    if let Some((b, e)) = t.split_once("<<") {
        let b: i64 = b.trim().parse().ok()?;
        let e: u32 = e.trim().parse().ok()?;
        return b.checked_shl(e);
    }
    t.parse().ok()
}

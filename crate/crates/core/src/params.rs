//! System-model parameters and the two checked requirements.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Timing parameters of one sensor node, all in integer milliseconds.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskParams {
    /// T_S
    pub sensor_period: i64,
    /// C_S
    pub sensor_wcet: i64,
    /// B, the lower bound on a sensor job's response time.
    #[serde(default = "one")]
    pub sensor_bcet: i64,
    /// T_M
    pub misc_period: i64,
    /// C_M
    pub misc_wcet: i64,
    /// N, samples per packet.
    pub buffer_size: i64,
    /// T_tdma
    pub tdma_superframe: i64,
    /// Possible one-packet transmission times.
    #[serde(default = "default_tx")]
    pub packet_tx_times: Vec<i64>,
}

fn one() -> i64 {
    1
}

fn default_tx() -> Vec<i64> {
    vec![5, 6, 7]
}

impl TaskParams {
    /// The evaluation baseline: T_tdma = 10, C_M = 10, T_M = 120, C_S = 2,
    /// N = 3, sampled every 11 ms.
    pub fn baseline() -> Self {
        TaskParams {
            sensor_period: 11,
            sensor_wcet: 2,
            sensor_bcet: 1,
            misc_period: 120,
            misc_wcet: 10,
            buffer_size: 3,
            tdma_superframe: 10,
            packet_tx_times: default_tx(),
        }
    }

    pub fn with_period(&self, sensor_period: i64) -> Self {
        TaskParams {
            sensor_period,
            ..self.clone()
        }
    }

    /// W = C_S + C_M
    pub fn w(&self) -> i64 {
        self.sensor_wcet + self.misc_wcet
    }

    pub fn validate(&self) -> Vec<String> {
        validate(self)
    }

    pub fn from_json(text: &str) -> Result<Self, ParamError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ParamError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Default for TaskParams {
    fn default() -> Self {
        Self::baseline()
    }
}

/// Returns one message per violated invariant.
pub fn validate(p: &TaskParams) -> Vec<String> {
    let mut out = Vec::new();
    let durations = [
        ("sensor_period", p.sensor_period),
        ("sensor_wcet", p.sensor_wcet),
        ("sensor_bcet", p.sensor_bcet),
        ("misc_period", p.misc_period),
        ("misc_wcet", p.misc_wcet),
        ("tdma_superframe", p.tdma_superframe),
    ];
    for (name, v) in durations {
        if v < 1 {
            out.push(format!("{name} must be ≥ 1"));
        }
    }
    if p.buffer_size < 1 {
        out.push("buffer_size must be ≥ 1".to_string());
    }
    if p.sensor_bcet > p.sensor_wcet {
        out.push("bcet exceeds wcet".to_string());
    }
    if p.packet_tx_times.is_empty() {
        out.push("packet_tx_times must not be empty".to_string());
    }
    if p.packet_tx_times.iter().any(|&t| t < 1) {
        out.push("packet_tx_times must be ≥ 1".to_string());
    }
    if p.packet_tx_times.windows(2).any(|w| w[0] >= w[1]) {
        out.push("packet_tx_times must be strictly ascending".to_string());
    }
    out
}

/// Parameters of the B-MAC sender delay.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BmacParams {
    pub t_b1: i64,
    pub t_f1: i64,
    pub t_b2: i64,
    pub t_f2: i64,
    pub t_pkt: i64,
    /// Maximum number of retransmissions.
    pub k: i64,
}

impl BmacParams {
    pub fn validate(&self) -> Vec<String> {
        [
            ("t_b1", self.t_b1),
            ("t_f1", self.t_f1),
            ("t_b2", self.t_b2),
            ("t_f2", self.t_f2),
            ("t_pkt", self.t_pkt),
            ("k", self.k),
        ]
        .into_iter()
        .filter(|(_, v)| *v < 0)
        .map(|(n, _)| format!("{n} must be ≥ 0"))
        .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RequirementId {
    /// Each sample is served before the next one is acquired.
    IntraNodeDeadlines,
    /// A packet leaves the radio before the next packet is ready.
    PacketBeforeNext,
}

impl RequirementId {
    pub const ALL: [RequirementId; 2] = [
        RequirementId::IntraNodeDeadlines,
        RequirementId::PacketBeforeNext,
    ];
}

/// A parameter file. Every task field may be left out; present fields
/// override a base parameter set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamFile {
    pub sensor_period: Option<i64>,
    pub sensor_wcet: Option<i64>,
    pub sensor_bcet: Option<i64>,
    pub misc_period: Option<i64>,
    pub misc_wcet: Option<i64>,
    pub buffer_size: Option<i64>,
    pub tdma_superframe: Option<i64>,
    pub packet_tx_times: Option<Vec<i64>>,
    pub bmac: Option<BmacParams>,
}

impl ParamFile {
    pub fn from_json(text: &str) -> Result<Self, ParamError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ParamError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Fills the fields present in the file over `base`.
    pub fn apply(&self, base: &TaskParams) -> TaskParams {
        let t = self;
        TaskParams {
            sensor_period: t.sensor_period.unwrap_or(base.sensor_period),
            sensor_wcet: t.sensor_wcet.unwrap_or(base.sensor_wcet),
            sensor_bcet: t.sensor_bcet.unwrap_or(base.sensor_bcet),
            misc_period: t.misc_period.unwrap_or(base.misc_period),
            misc_wcet: t.misc_wcet.unwrap_or(base.misc_wcet),
            buffer_size: t.buffer_size.unwrap_or(base.buffer_size),
            tdma_superframe: t.tdma_superframe.unwrap_or(base.tdma_superframe),
            packet_tx_times: t
                .packet_tx_times
                .clone()
                .unwrap_or_else(|| base.packet_tx_times.clone()),
        }
    }
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("cannot read parameter file: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid parameter file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("sampling period must be ≥ 1 ms, got {0}")]
    Period(i64),
}

/// Samples per second for a sampling period: floor(1000 / T_S).
pub fn max_rate_from_period(period_ms: i64) -> Result<i64, ParamError> {
    if period_ms < 1 {
        return Err(ParamError::Period(period_ms));
    }
    Ok(1000 / period_ms)
}

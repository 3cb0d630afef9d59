//! The one-round protocol: every client discretizes its own shard and sends a
//! report, the server aggregates and ranks, and the ranking goes back to all
//! clients.

mod protocol;
mod round;
mod runlog;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use protocol::{read_frame, write_frame, Message, Party, ProtocolMessage, MAX_FRAME_BYTES};
pub use round::{
    run_in_process, run_tcp, serve_tcp, submit_tcp, ClientTask, ReportTask, RoundOutcome,
    RoundSettings, ServerOutcome,
};
pub use runlog::RunLog;

use crate::client::compute_local_report;
use crate::dataset::{discretize, MultiLabelDataset, DEFAULT_BINS};
use crate::error::{Error, Result};
use crate::mlknn::{DEFAULT_K, DEFAULT_SMOOTHING};
use crate::server::AggregationMode;

pub const DEFAULT_TIMEOUT_SECS: f64 = 60.0;

/// How reports travel between clients and the server.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Transport {
    #[default]
    InProcess,
    /// Loopback TCP on `host:port`; port 0 picks a free port.
    Tcp(String),
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transport::InProcess => f.write_str("in-process"),
            Transport::Tcp(addr) => write!(f, "tcp://{addr}"),
        }
    }
}

impl FromStr for Transport {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "in-process" {
            return Ok(Transport::InProcess);
        }
        match s.strip_prefix("tcp://") {
            Some(addr) if addr.rsplit_once(':').is_some_and(|(h, p)| !h.is_empty() && p.parse::<u16>().is_ok()) => {
                Ok(Transport::Tcp(addr.to_string()))
            }
            _ => Err(Error::InvalidArgument(format!(
                "transport {s:?}: expected \"in-process\" or \"tcp://host:port\""
            ))),
        }
    }
}

impl Serialize for Transport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Transport {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Resolved settings for a federated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub num_clients: u32,
    pub bins: u32,
    pub alpha: f64,
    pub seed: u64,
    pub top_k: Vec<usize>,
    pub dataset: Option<PathBuf>,
    pub knn_k: usize,
    pub smoothing: f64,
    pub test_fraction: f64,
    pub transport: Transport,
    pub timeout_secs: f64,
    pub aggregation: AggregationMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            num_clients: 10,
            bins: DEFAULT_BINS,
            alpha: 0.5,
            seed: 42,
            top_k: (1..=10).map(|i| i * 10).collect(),
            dataset: None,
            knn_k: DEFAULT_K,
            smoothing: DEFAULT_SMOOTHING,
            test_fraction: 0.3,
            transport: Transport::InProcess,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            aggregation: AggregationMode::Unweighted,
        }
    }
}

impl RunConfig {
    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.num_clients < 2 {
            return bad(format!("need at least 2 clients, got {}", self.num_clients));
        }
        if self.bins < 2 {
            return bad(format!("need at least 2 bins, got {}", self.bins));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.knn_k == 0 {
            return bad("knn k must be at least 1".into());
        }
        if !(self.smoothing.is_finite() && self.smoothing > 0.0) {
            return bad(format!("smoothing must be positive, got {}", self.smoothing));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test fraction must lie in (0, 1), got {}", self.test_fraction));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return bad(format!("timeout must be positive, got {}", self.timeout_secs));
        }
        if self.top_k.contains(&0) {
            return bad("top-k values must be at least 1".into());
        }
        if self.top_k.windows(2).any(|w| w[0] >= w[1]) {
            return bad("top-k values must be strictly ascending".into());
        }
        Ok(())
    }

    /// Data-dependent checks: every top-k value fits in `num_features`.
    pub fn validate_for(&self, num_features: usize) -> Result<()> {
        self.validate()?;
        if let Some(&k) = self.top_k.iter().find(|&&k| k > num_features) {
            return Err(Error::InvalidArgument(format!(
                "top-k {k} exceeds the {num_features} available features"
            )));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn settings(&self, log: RunLog) -> RoundSettings {
        RoundSettings {
            num_clients: self.num_clients,
            timeout: self.timeout(),
            aggregation: self.aggregation,
            log,
        }
    }
}

/// Client tasks that discretize their shard locally and compute a report.
pub fn shard_tasks(shards: &[MultiLabelDataset], bins: u32) -> Vec<ClientTask> {
    shards
        .iter()
        .enumerate()
        .map(|(id, shard)| {
            let shard = shard.clone();
            ClientTask::new(id as u32, move || {
                compute_local_report(&discretize(&shard, bins)?, id as u32)
            })
        })
        .collect()
}

/// Runs one round over `shards` (client `i` holds `shards[i]`) with the
/// configured transport.
pub fn run_round(config: &RunConfig, shards: &[MultiLabelDataset]) -> Result<ServerOutcome> {
    run_round_logged(config, shards, RunLog::disabled())
}

pub fn run_round_logged(
    config: &RunConfig,
    shards: &[MultiLabelDataset],
    log: RunLog,
) -> Result<ServerOutcome> {
    config.validate()?;
    if shards.len() != config.num_clients as usize {
        return Err(Error::InvalidArgument(format!(
            "{} shards for {} clients",
            shards.len(),
            config.num_clients
        )));
    }
    if let Some(i) = shards.iter().position(|s| s.num_instances() == 0) {
        return Err(Error::InvalidArgument(format!("shard {i} is empty")));
    }
    let settings = config.settings(log);
    let tasks = shard_tasks(shards, config.bins);
    let outcome = match &config.transport {
        Transport::InProcess => run_in_process(&settings, tasks),
        Transport::Tcp(addr) => run_tcp(addr, &settings, tasks)?,
    };
    outcome.into_result()
}

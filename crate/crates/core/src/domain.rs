//! Shared domain types, identifiers, and validation.
//!
//! Every type here is an immutable value with a canonical JSON encoding
//! (snake_case field names) used by the wire protocol and scenario files.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Serde adapter encoding byte fields as base64 strings inside JSON.
pub mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(de)?;
        STANDARD.decode(s.as_bytes()).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("invalid profile field `{field}`: {reason}")]
    InvalidProfile { field: &'static str, reason: String },
}

/// Opaque node identifier, unique within a registry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// Coarse device category. Battery state is tracked for mobiles only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Mobile,
    Cloudlet,
    RemoteCloud,
}

impl fmt::Display for NodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            NodeClass::Mobile => "mobile",
            NodeClass::Cloudlet => "cloudlet",
            NodeClass::RemoteCloud => "remote_cloud",
        })
    }
}

/// Static plus benchmarked description of one compute node.
///
/// `memory_gb` records available memory as a static config value; there is
/// no live sampling. `battery_level_pct` and `charging` are present exactly
/// when the node is mobile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProfile {
    pub node_id: NodeId,
    pub class: NodeClass,
    /// Mean GFLOPS over the two benchmark workloads.
    pub benchmark_gflops: f64,
    pub cpu_clock_ghz: f64,
    pub cpu_cores: u32,
    pub memory_gb: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery_level_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charging: Option<bool>,
}

/// One-way latency plus throughput of a simulated link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub latency_s: f64,
    pub bandwidth_bytes_per_s: f64,
}

impl LinkModel {
    pub fn is_valid(&self) -> bool {
        self.latency_s.is_finite()
            && self.latency_s >= 0.0
            && self.bandwidth_bytes_per_s.is_finite()
            && self.bandwidth_bytes_per_s > 0.0
    }
}

/// Per-node composite score. Offloadees with `score <= 0` are ineligible;
/// the local node always participates regardless of its own score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadingScore {
    pub node_id: NodeId,
    pub score: f64,
    pub eligible: bool,
}

/// Mapping node -> task share percentage, in assignment order.
///
/// Percentages are kept as raw reals and only rounded for display. Shares of
/// a valid plan sum to 100 within 1e-9 and only eligible nodes appear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub shares: indexmap::IndexMap<NodeId, f64>,
}

impl PartitionPlan {
    pub fn new() -> Self {
        Self {
            shares: indexmap::IndexMap::new(),
        }
    }

    pub fn single(node: NodeId) -> Self {
        let mut plan = Self::new();
        plan.shares.insert(node, 100.0);
        plan
    }

    /// Equal split across the given nodes.
    pub fn equal(nodes: &[NodeId]) -> Self {
        let mut plan = Self::new();
        if nodes.is_empty() {
            return plan;
        }
        let share = 100.0 / nodes.len() as f64;
        for n in nodes {
            plan.shares.insert(n.clone(), share);
        }
        plan
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        self.shares.keys().cloned().collect()
    }

    pub fn total_pct(&self) -> f64 {
        self.shares.values().sum()
    }
}

impl Default for PartitionPlan {
    fn default() -> Self {
        Self::new()
    }
}

/// The divisible workload: find every occurrence of `pattern` in `text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTask {
    pub task_id: String,
    #[serde(with = "b64")]
    pub text: Vec<u8>,
    #[serde(with = "b64")]
    pub pattern: Vec<u8>,
}

impl SearchTask {
    pub fn new(task_id: impl Into<String>, text: impl Into<Vec<u8>>, pattern: impl Into<Vec<u8>>) -> Self {
        Self {
            task_id: task_id.into(),
            text: text.into(),
            pattern: pattern.into(),
        }
    }
}

/// One contiguous piece of a `SearchTask`, with enough metadata to rebase
/// local match offsets back into the parent text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubTask {
    pub task_id: String,
    pub chunk_index: u32,
    pub chunk_offset_bytes: u64,
    #[serde(with = "b64")]
    pub chunk: Vec<u8>,
    #[serde(with = "b64")]
    pub pattern: Vec<u8>,
}

/// How a task is placed across nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    /// Search runs entirely on the local node; nothing crosses the network.
    LocalOnly,
    /// The whole text is shipped to one offloadee and searched there.
    FullOffload { target: NodeId },
    /// Equal shares across the local node and every registry offloadee.
    PartialEqual,
    /// Score-driven split between the local node and a single offloadee.
    PartialEngineSingleSite { target: NodeId },
    /// Score-driven split across the local node and every registry offloadee.
    PartialEngineMultiSite,
}

impl fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecutionMode::LocalOnly => write!(f, "local_only"),
            ExecutionMode::FullOffload { target } => write!(f, "full_offload({target})"),
            ExecutionMode::PartialEqual => write!(f, "partial_equal"),
            ExecutionMode::PartialEngineSingleSite { target } => {
                write!(f, "partial_engine_single_site({target})")
            }
            ExecutionMode::PartialEngineMultiSite => write!(f, "partial_engine_multi_site"),
        }
    }
}

/// Per-node transfer/compute timings for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRunRecord {
    pub node_id: NodeId,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub transfer_out_s: f64,
    pub compute_s: f64,
    pub transfer_back_s: f64,
    pub timed_out: bool,
    pub reprocessed_locally: bool,
}

/// Outcome of executing one task in one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub mode: ExecutionMode,
    pub records: Vec<NodeRunRecord>,
    pub total_makespan_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PartitionPlan>,
}

impl ExecutionReport {
    /// Count of subtasks that hit the timeout and fell back to the offloader.
    pub fn timeouts(&self) -> usize {
        self.records.iter().filter(|r| r.timed_out).count()
    }
}

fn finite(field: &'static str, v: f64) -> Result<(), DomainError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(DomainError::InvalidProfile {
            field,
            reason: format!("must be finite, got {v}"),
        })
    }
}

/// Checks every `NodeProfile` invariant, reporting the first violated field.
pub fn validate_profile(p: &NodeProfile) -> Result<(), DomainError> {
    if p.node_id.is_empty() {
        return Err(DomainError::InvalidProfile {
            field: "node_id",
            reason: "must be non-empty".into(),
        });
    }
    finite("benchmark_gflops", p.benchmark_gflops)?;
    if p.benchmark_gflops < 0.0 {
        return Err(DomainError::InvalidProfile {
            field: "benchmark_gflops",
            reason: format!("must be >= 0, got {}", p.benchmark_gflops),
        });
    }
    finite("cpu_clock_ghz", p.cpu_clock_ghz)?;
    if p.cpu_clock_ghz <= 0.0 {
        return Err(DomainError::InvalidProfile {
            field: "cpu_clock_ghz",
            reason: format!("must be > 0, got {}", p.cpu_clock_ghz),
        });
    }
    if p.cpu_cores < 1 {
        return Err(DomainError::InvalidProfile {
            field: "cpu_cores",
            reason: "must be >= 1".into(),
        });
    }
    finite("memory_gb", p.memory_gb)?;
    if p.memory_gb <= 0.0 {
        return Err(DomainError::InvalidProfile {
            field: "memory_gb",
            reason: format!("must be > 0, got {}", p.memory_gb),
        });
    }
    let mobile = p.class == NodeClass::Mobile;
    match (mobile, p.battery_level_pct) {
        (true, None) => {
            return Err(DomainError::InvalidProfile {
                field: "battery_level_pct",
                reason: "required for mobile nodes".into(),
            })
        }
        (false, Some(_)) => {
            return Err(DomainError::InvalidProfile {
                field: "battery_level_pct",
                reason: "only mobile nodes carry battery state".into(),
            })
        }
        (true, Some(bl)) => {
            finite("battery_level_pct", bl)?;
            if !(0.0..=100.0).contains(&bl) {
                return Err(DomainError::InvalidProfile {
                    field: "battery_level_pct",
                    reason: format!("must be in [0, 100], got {bl}"),
                });
            }
        }
        (false, None) => {}
    }
    match (mobile, p.charging) {
        (true, None) => {
            return Err(DomainError::InvalidProfile {
                field: "charging",
                reason: "required for mobile nodes".into(),
            })
        }
        (false, Some(_)) => {
            return Err(DomainError::InvalidProfile {
                field: "charging",
                reason: "only mobile nodes carry charging state".into(),
            })
        }
        _ => {}
    }
    Ok(())
}

/// Profile constructors for the node classes used throughout the tests and
/// the bundled scenarios.
impl NodeProfile {
    pub fn mobile(
        node_id: impl Into<NodeId>,
        benchmark_gflops: f64,
        cpu_clock_ghz: f64,
        cpu_cores: u32,
        memory_gb: f64,
        battery_level_pct: f64,
        charging: bool,
    ) -> Self {
        Self {
            node_id: node_id.into(),
            class: NodeClass::Mobile,
            benchmark_gflops,
            cpu_clock_ghz,
            cpu_cores,
            memory_gb,
            battery_level_pct: Some(battery_level_pct),
            charging: Some(charging),
        }
    }

    pub fn fixed(
        node_id: impl Into<NodeId>,
        class: NodeClass,
        benchmark_gflops: f64,
        cpu_clock_ghz: f64,
        cpu_cores: u32,
        memory_gb: f64,
    ) -> Self {
        debug_assert!(class != NodeClass::Mobile, "mobile profiles need battery state");
        Self {
            node_id: node_id.into(),
            class,
            benchmark_gflops,
            cpu_clock_ghz,
            cpu_cores,
            memory_gb,
            battery_level_pct: None,
            charging: None,
        }
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        Self::new(s)
    }
}

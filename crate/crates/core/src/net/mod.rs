//! Transports and discovery.
//!
//! Two interchangeable paths move subtasks to nodes: an analytic link model
//! for simulated nodes and a framed-TCP transport with a worker daemon for
//! real ones. Both expose the same operation surface; the orchestrator only
//! sees different timing sources.

mod beacon;
mod client;
mod frame;
mod registry;
mod worker;

pub use beacon::{discover_beacons, send_beacon, DEFAULT_BEACON_PORT};
pub use client::{fetch_profile, NodeClient, RecvTiming, RemoteRunner};
pub use frame::{encode_frame, FrameDecoder, Message, MAX_FRAME_BODY};
pub use registry::{discover, NodeAddress, Registry, RegistryEntry, RegistrySource};
pub use worker::{worker_serve, Worker, WorkerConfig};

use std::time::Duration;

use thiserror::Error;

use crate::decision::RttEstimate;
use crate::domain::LinkModel;

/// Default probe payload for RTT estimation.
pub const DEFAULT_PROBE_BYTES: u64 = 1024;

/// Default deadline for probe and discovery requests.
pub const DEFAULT_NET_DEADLINE: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum NetError {
    #[error("frame body of {0} bytes exceeds the {MAX_FRAME_BODY}-byte cap")]
    FrameTooLarge(usize),
    #[error("malformed frame body: {0}")]
    MalformedBody(String),
    #[error("stream ended mid-frame")]
    TruncatedFrame,
    #[error("connection closed")]
    ConnectionClosed,
    #[error("node unreachable at `{0}`: {1}")]
    Unreachable(String, String),
    #[error("request timed out")]
    Timeout,
    #[error("registry parse failed: {0}")]
    Parse(String),
    #[error("i/o failed: {0}")]
    Io(String),
}

impl From<std::io::Error> for NetError {
    fn from(err: std::io::Error) -> Self {
        match err.kind() {
            std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => NetError::Timeout,
            _ => NetError::Io(err.to_string()),
        }
    }
}

/// Analytic cost of moving `bytes` over a link: one-way latency plus the
/// serialization delay.
pub fn transfer_time(bytes: u64, link: &LinkModel) -> f64 {
    link.latency_s + bytes as f64 / link.bandwidth_bytes_per_s
}

/// Analytic round-trip estimate: both latency directions plus probe and
/// task payloads at link bandwidth.
pub fn simulated_rtt(link: &LinkModel, probe_bytes: u64, task_bytes: u64) -> f64 {
    2.0 * link.latency_s + (probe_bytes + task_bytes) as f64 / link.bandwidth_bytes_per_s
}

/// RTT estimate for a registry entry: analytic for simulated nodes, live
/// PING probes for real ones.
pub fn estimate_rtt(
    entry: &RegistryEntry,
    probe_bytes: u64,
    task_bytes: u64,
    deadline: Duration,
) -> Result<RttEstimate, NetError> {
    match &entry.address {
        NodeAddress::Simulated => {
            let link = entry.link.as_ref().ok_or_else(|| {
                NetError::Parse(format!("simulated entry `{}` has no link model", entry.node_id))
            })?;
            Ok(RttEstimate {
                node_id: entry.node_id.clone(),
                rtt_s: simulated_rtt(link, probe_bytes, task_bytes),
            })
        }
        NodeAddress::Socket(addr) => {
            let mut client = NodeClient::connect(addr, deadline)?;
            client.estimate_rtt(entry.node_id.clone(), probe_bytes, task_bytes, deadline)
        }
    }
}

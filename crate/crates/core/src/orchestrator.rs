//! End-to-end task execution: scoring, partitioning, dispatch, timing,
//! timeout fault-tolerance, and report assembly.
//!
//! Two timing sources exist. On the wall clock, subtasks are dispatched over
//! TCP (the local share runs in-process) and the makespan is measured
//! elapsed time. On the simulated clock, every node must be a simulated
//! registry entry; transfer times come from its link model and compute time
//! is `chunk_bytes * cost_per_byte / (benchmark_gflops * 1e9)`.
//!
//! Either way the merged match set is complete: a subtask that does not come
//! back within the timeout is re-executed on the local node and its record
//! is flagged, and late replies are discarded (results merge exactly once
//! per chunk index).

use std::collections::HashMap;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{
    collect_node_scores, partition_task, DecisionError, RttEstimate, ScoreWeights,
};
use crate::domain::{
    ExecutionMode, ExecutionReport, NodeId, NodeProfile, NodeRunRecord, PartitionPlan, SearchTask,
    SubTask,
};
use crate::net::{
    estimate_rtt, transfer_time, Message, NetError, NodeAddress, NodeClient, Registry,
    RegistryEntry, DEFAULT_PROBE_BYTES,
};
use crate::profiler::ProfilerError;
use crate::workload::{kmp_search, merge_results, split_text, MatchSet, WorkloadError};

/// Result payload is modeled as offsets only in simulation.
pub const SIMULATED_RESULT_BYTES_PER_MATCH: u64 = 16;

/// Default simulated workload density, in flops per input byte.
pub const DEFAULT_COST_PER_BYTE: f64 = 100.0;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("mode targets unknown node `{0}`")]
    TargetUnknown(NodeId),
    #[error("mode targets the local node `{0}`")]
    TargetIsLocal(NodeId),
    #[error("simulated clock requires cfg.local_node_id naming a simulated registry entry")]
    MissingLocalNode,
    #[error("no profile for local node `{0}`; set cfg.local_profile or give its registry entry one")]
    MissingLocalProfile(NodeId),
    #[error("clock/transport mismatch: {0}")]
    ClockMismatch(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Profiler(#[from] ProfilerError),
}

/// Timing source for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    Wall,
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrchestratorConfig {
    /// Per-subtask reprocessing deadline, seconds.
    pub timeout_s: f64,
    pub weights: ScoreWeights,
    pub clock: ClockMode,
    pub repetitions: u32,
    /// Identity of the offloader. Required under the simulated clock, where
    /// it must name a simulated registry entry; optional on the wall clock.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_node_id: Option<NodeId>,
    /// Offloader profile for score-driven modes on the wall clock, where no
    /// registry entry describes the local machine.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_profile: Option<NodeProfile>,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            timeout_s: 10.0,
            weights: ScoreWeights::default(),
            clock: ClockMode::Wall,
            repetitions: 1,
            local_node_id: None,
            local_profile: None,
        }
    }
}

/// Report plus the merged matches of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionOutcome {
    pub report: ExecutionReport,
    pub matches: MatchSet,
}

/// Makespan statistics over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mean_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub reports: Vec<ExecutionReport>,
}

/// Executes one task in the given mode and assembles the report.
pub fn execute(
    task: &SearchTask,
    mode: &ExecutionMode,
    registry: &Registry,
    cfg: &OrchestratorConfig,
    cost_per_byte: f64,
) -> Result<ExecutionOutcome, OrchestratorError> {
    validate_config(cfg)?;
    let local_id = resolve_local_id(cfg)?;
    check_targets(mode, registry, &local_id)?;
    let offloadees = participant_offloadees(mode, registry, &local_id);
    let (plan, keep_plan) = build_plan(task, mode, registry, cfg, &local_id, &offloadees)?;
    let order = plan.nodes();
    let subtasks = split_text(task, &plan, &order)?;
    let assignments: Vec<(NodeId, SubTask)> = order.into_iter().zip(subtasks).collect();
    let mut outcome = match cfg.clock {
        ClockMode::Simulated => {
            simulate_run(mode, registry, cfg, cost_per_byte, &local_id, assignments)?
        }
        ClockMode::Wall => wall_run(mode, registry, cfg, &local_id, assignments)?,
    };
    if keep_plan {
        outcome.report.plan = Some(plan);
    }
    Ok(outcome)
}

/// Executes `cfg.repetitions` times and reports mean and extremes of the
/// makespan. Under the simulated clock every repetition is identical.
pub fn run_repeated(
    task: &SearchTask,
    mode: &ExecutionMode,
    registry: &Registry,
    cfg: &OrchestratorConfig,
    cost_per_byte: f64,
) -> Result<RunSummary, OrchestratorError> {
    validate_config(cfg)?;
    let mut reports = Vec::with_capacity(cfg.repetitions as usize);
    for _ in 0..cfg.repetitions {
        let outcome = execute(task, mode, registry, cfg, cost_per_byte)?;
        reports.push(outcome.report);
    }
    let makespans: Vec<f64> = reports.iter().map(|r| r.total_makespan_s).collect();
    let mean_s = makespans.iter().sum::<f64>() / makespans.len() as f64;
    let min_s = makespans.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_s = makespans.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(RunSummary { mean_s, min_s, max_s, reports })
}

fn validate_config(cfg: &OrchestratorConfig) -> Result<(), OrchestratorError> {
    if !(cfg.timeout_s > 0.0 && cfg.timeout_s.is_finite()) {
        return Err(OrchestratorError::InvalidConfig(format!(
            "timeout_s must be positive and finite, got {}",
            cfg.timeout_s
        )));
    }
    if cfg.repetitions < 1 {
        return Err(OrchestratorError::InvalidConfig("repetitions must be >= 1".into()));
    }
    Ok(())
}

fn resolve_local_id(cfg: &OrchestratorConfig) -> Result<NodeId, OrchestratorError> {
    match (&cfg.local_node_id, cfg.clock) {
        (Some(id), _) => Ok(id.clone()),
        (None, ClockMode::Wall) => Ok(NodeId::new("local")),
        (None, ClockMode::Simulated) => Err(OrchestratorError::MissingLocalNode),
    }
}

fn check_targets(
    mode: &ExecutionMode,
    registry: &Registry,
    local_id: &NodeId,
) -> Result<(), OrchestratorError> {
    let target = match mode {
        ExecutionMode::FullOffload { target } => target,
        ExecutionMode::PartialEngineSingleSite { target } => target,
        _ => return Ok(()),
    };
    if registry.get(target).is_none() {
        return Err(OrchestratorError::TargetUnknown(target.clone()));
    }
    if target == local_id {
        return Err(OrchestratorError::TargetIsLocal(target.clone()));
    }
    Ok(())
}

/// The offloadees a mode draws on: the named target, or every registry
/// entry except the local node.
fn participant_offloadees(
    mode: &ExecutionMode,
    registry: &Registry,
    local_id: &NodeId,
) -> Vec<NodeId> {
    match mode {
        ExecutionMode::LocalOnly => vec![],
        ExecutionMode::FullOffload { target } => vec![target.clone()],
        ExecutionMode::PartialEngineSingleSite { target } => vec![target.clone()],
        ExecutionMode::PartialEqual | ExecutionMode::PartialEngineMultiSite => registry
            .entries
            .keys()
            .filter(|id| *id != local_id)
            .cloned()
            .collect(),
    }
}

/// Produces the partition plan for a mode; the bool marks whether the plan
/// belongs in the report (split modes only).
fn build_plan(
    task: &SearchTask,
    mode: &ExecutionMode,
    registry: &Registry,
    cfg: &OrchestratorConfig,
    local_id: &NodeId,
    offloadees: &[NodeId],
) -> Result<(PartitionPlan, bool), OrchestratorError> {
    match mode {
        ExecutionMode::LocalOnly => Ok((PartitionPlan::single(local_id.clone()), false)),
        ExecutionMode::FullOffload { target } => Ok((PartitionPlan::single(target.clone()), false)),
        ExecutionMode::PartialEqual => {
            let mut nodes = vec![local_id.clone()];
            nodes.extend(offloadees.iter().cloned());
            Ok((PartitionPlan::equal(&nodes), true))
        }
        ExecutionMode::PartialEngineSingleSite { .. } | ExecutionMode::PartialEngineMultiSite => {
            let local_profile = local_profile(registry, cfg, local_id)?;
            let mut connected = Vec::with_capacity(offloadees.len());
            for id in offloadees {
                let entry = registry.get(id).expect("participants come from the registry");
                let profile = offloadee_profile(entry, cfg)?;
                let rtt = offloadee_rtt(entry, cfg, task.text.len() as u64)?;
                connected.push((profile, rtt));
            }
            let scores = collect_node_scores(&local_profile, &connected, &cfg.weights)?;
            Ok((partition_task(&scores), true))
        }
    }
}

fn local_profile(
    registry: &Registry,
    cfg: &OrchestratorConfig,
    local_id: &NodeId,
) -> Result<NodeProfile, OrchestratorError> {
    if let Some(profile) = &cfg.local_profile {
        return Ok(profile.clone());
    }
    if let Some(profile) = registry.get(local_id).and_then(|e| e.profile.as_ref()) {
        return Ok(profile.clone());
    }
    Err(OrchestratorError::MissingLocalProfile(local_id.clone()))
}

/// Offloadee profile for scoring: the registry entry's stored profile, or a
/// live PROFILE_REQUEST for real nodes without one. Benchmarks never run
/// implicitly here; an unbenchmarked worker scores with whatever figure it
/// reports.
fn offloadee_profile(
    entry: &RegistryEntry,
    cfg: &OrchestratorConfig,
) -> Result<NodeProfile, OrchestratorError> {
    if let Some(profile) = &entry.profile {
        return Ok(profile.clone());
    }
    match &entry.address {
        NodeAddress::Simulated => Err(NetError::Parse(format!(
            "simulated entry `{}` has no profile",
            entry.node_id
        ))
        .into()),
        NodeAddress::Socket(addr) => {
            let deadline = Duration::from_secs_f64(cfg.timeout_s);
            Ok(crate::net::fetch_profile(addr, deadline)?)
        }
    }
}

fn offloadee_rtt(
    entry: &RegistryEntry,
    cfg: &OrchestratorConfig,
    task_bytes: u64,
) -> Result<RttEstimate, OrchestratorError> {
    let deadline = Duration::from_secs_f64(cfg.timeout_s);
    Ok(estimate_rtt(entry, DEFAULT_PROBE_BYTES, task_bytes, deadline)?)
}

fn simulated_entry<'a>(
    registry: &'a Registry,
    id: &NodeId,
) -> Result<&'a RegistryEntry, OrchestratorError> {
    let entry = registry
        .get(id)
        .ok_or_else(|| OrchestratorError::TargetUnknown(id.clone()))?;
    if !entry.is_simulated() {
        return Err(OrchestratorError::ClockMismatch(format!(
            "node `{id}` is not simulated; the simulated clock cannot dispatch to it"
        )));
    }
    Ok(entry)
}

fn simulated_compute_s(bytes: u64, cost_per_byte: f64, gflops: f64) -> f64 {
    bytes as f64 * cost_per_byte / (gflops * 1e9)
}

/// Analytic execution. The search itself still runs (in-process) so the
/// merged matches are real; only the timings are modeled.
fn simulate_run(
    mode: &ExecutionMode,
    registry: &Registry,
    cfg: &OrchestratorConfig,
    cost_per_byte: f64,
    local_id: &NodeId,
    assignments: Vec<(NodeId, SubTask)>,
) -> Result<ExecutionOutcome, OrchestratorError> {
    let local_entry = simulated_entry(registry, local_id)?;
    let local_gflops = local_entry
        .profile
        .as_ref()
        .expect("simulated entries carry profiles")
        .benchmark_gflops;

    let mut records: Vec<NodeRunRecord> = Vec::with_capacity(assignments.len());
    let mut results: Vec<(SubTask, MatchSet)> = Vec::with_capacity(assignments.len());
    let mut failed_chunk_bytes: Vec<u64> = Vec::new();
    let mut local_busy_s = 0.0;
    let mut remote_max_s = 0.0f64;

    for (node_id, subtask) in assignments {
        let matches = kmp_search(&subtask.chunk, &subtask.pattern)?;
        if node_id == *local_id {
            let compute_s =
                simulated_compute_s(subtask.chunk.len() as u64, cost_per_byte, local_gflops);
            local_busy_s += compute_s;
            records.push(NodeRunRecord {
                node_id,
                bytes_sent: 0,
                bytes_received: 0,
                transfer_out_s: 0.0,
                compute_s,
                transfer_back_s: 0.0,
                timed_out: false,
                reprocessed_locally: false,
            });
            results.push((subtask, matches));
            continue;
        }
        let entry = simulated_entry(registry, &node_id)?;
        let link = entry.link.as_ref().expect("simulated entries carry links");
        let gflops =
            entry.profile.as_ref().expect("simulated entries carry profiles").benchmark_gflops;
        let bytes_out = subtask.chunk.len() as u64;
        let bytes_back = matches.len() as u64 * SIMULATED_RESULT_BYTES_PER_MATCH;
        let transfer_out_s = transfer_time(bytes_out, link);
        let compute_s = simulated_compute_s(bytes_out, cost_per_byte, gflops);
        let transfer_back_s = transfer_time(bytes_back, link);
        let node_total = transfer_out_s + compute_s + transfer_back_s;
        if node_total > cfg.timeout_s {
            // The reply would arrive after the deadline: it is discarded and
            // the chunk reprocessed locally.
            failed_chunk_bytes.push(bytes_out);
            records.push(NodeRunRecord {
                node_id,
                bytes_sent: bytes_out,
                bytes_received: 0,
                transfer_out_s,
                compute_s: 0.0,
                transfer_back_s: 0.0,
                timed_out: true,
                reprocessed_locally: true,
            });
        } else {
            remote_max_s = remote_max_s.max(node_total);
            records.push(NodeRunRecord {
                node_id,
                bytes_sent: bytes_out,
                bytes_received: bytes_back,
                transfer_out_s,
                compute_s,
                transfer_back_s,
                timed_out: false,
                reprocessed_locally: false,
            });
        }
        results.push((subtask, matches));
    }

    let mut makespan = local_busy_s.max(remote_max_s);
    if !failed_chunk_bytes.is_empty() {
        // Reprocessing starts once the timeout fires and the local node has
        // drained its own share; failed chunks then run sequentially.
        let mut finish = cfg.timeout_s.max(local_busy_s);
        for bytes in failed_chunk_bytes {
            finish += simulated_compute_s(bytes, cost_per_byte, local_gflops);
        }
        makespan = makespan.max(finish);
    }

    let matches = merge_results(&results)?;
    Ok(ExecutionOutcome {
        report: ExecutionReport {
            mode: mode.clone(),
            records,
            total_makespan_s: makespan,
            plan: None,
        },
        matches,
    })
}

struct RemoteChunkOutcome {
    offsets: Vec<u64>,
    bytes_sent: u64,
    bytes_received: u64,
    transfer_out_s: f64,
    compute_s: f64,
    transfer_back_s: f64,
}

/// Dispatches one subtask over TCP and waits for its TASK_RESULT.
fn dispatch_remote(
    addr: &str,
    subtask: &SubTask,
    deadline: Duration,
) -> Result<RemoteChunkOutcome, NetError> {
    let mut client = NodeClient::connect(addr, deadline)?;
    let send_start = Instant::now();
    client.send(&Message::TaskAssign { subtask: subtask.clone() })?;
    let transfer_out_s = send_start.elapsed().as_secs_f64();
    let remaining = deadline.saturating_sub(send_start.elapsed());
    let (reply, timing) = client.recv_timed(remaining)?;
    match reply {
        Message::TaskResult { task_id, chunk_index, offsets } => {
            if task_id != subtask.task_id || chunk_index != subtask.chunk_index {
                return Err(NetError::MalformedBody(format!(
                    "result for {task_id}/{chunk_index}, expected {}/{}",
                    subtask.task_id, subtask.chunk_index
                )));
            }
            let (bytes_sent, bytes_received) = client.io_counters();
            Ok(RemoteChunkOutcome {
                offsets,
                bytes_sent,
                bytes_received,
                transfer_out_s,
                compute_s: timing.first_byte_s,
                transfer_back_s: timing.total_s - timing.first_byte_s,
            })
        }
        Message::Error { reason } => Err(NetError::MalformedBody(reason)),
        other => Err(NetError::MalformedBody(format!("expected TASK_RESULT, got {other:?}"))),
    }
}

/// Real execution: remote subtasks dispatch concurrently over TCP while the
/// local share runs on the coordinating thread, and any remote chunk missing
/// at the deadline is reprocessed locally. The timeout never applies to the
/// local share; it covers resource providers only.
fn wall_run(
    mode: &ExecutionMode,
    registry: &Registry,
    cfg: &OrchestratorConfig,
    local_id: &NodeId,
    assignments: Vec<(NodeId, SubTask)>,
) -> Result<ExecutionOutcome, OrchestratorError> {
    let deadline = Duration::from_secs_f64(cfg.timeout_s);
    let started = Instant::now();
    let (tx, rx) = mpsc::channel::<(u32, Result<RemoteChunkOutcome, NetError>)>();
    let mut remote: HashMap<u32, (NodeId, SubTask)> = HashMap::new();
    let mut local_chunks: Vec<SubTask> = Vec::new();

    for (node_id, subtask) in assignments {
        if node_id == *local_id {
            local_chunks.push(subtask);
            continue;
        }
        let entry = registry
            .get(&node_id)
            .ok_or_else(|| OrchestratorError::TargetUnknown(node_id.clone()))?;
        let addr = match &entry.address {
            NodeAddress::Socket(addr) => addr.clone(),
            NodeAddress::Simulated => {
                return Err(OrchestratorError::ClockMismatch(format!(
                    "node `{node_id}` is simulated; the wall clock cannot dispatch to it"
                )))
            }
        };
        let chunk_index = subtask.chunk_index;
        remote.insert(chunk_index, (node_id, subtask.clone()));
        let tx = tx.clone();
        std::thread::spawn(move || {
            let _ = tx.send((chunk_index, dispatch_remote(&addr, &subtask, deadline)));
        });
    }
    drop(tx);

    // The local share runs here, concurrent with the remote dispatches.
    let local_participates = !local_chunks.is_empty();
    let mut local_compute_s = 0.0;
    let mut results: Vec<(SubTask, MatchSet)> = Vec::new();
    for subtask in local_chunks {
        let start = Instant::now();
        let matches = kmp_search(&subtask.chunk, &subtask.pattern)?;
        local_compute_s += start.elapsed().as_secs_f64();
        results.push((subtask, matches));
    }

    // Collect remote deliveries until the deadline. Results that already
    // arrived are drained even when the local share outlived the timeout;
    // whatever comes later lands on a closed channel and is dropped.
    let mut delivered: HashMap<u32, Result<RemoteChunkOutcome, NetError>> = HashMap::new();
    loop {
        while let Ok((chunk_index, delivery)) = rx.try_recv() {
            delivered.entry(chunk_index).or_insert(delivery);
        }
        if delivered.len() == remote.len() {
            break;
        }
        let remaining = deadline.saturating_sub(started.elapsed());
        if remaining.is_zero() {
            break;
        }
        match rx.recv_timeout(remaining) {
            Ok((chunk_index, delivery)) => {
                delivered.entry(chunk_index).or_insert(delivery);
            }
            Err(_) => break,
        }
    }
    drop(rx);

    let mut records: Vec<NodeRunRecord> = Vec::new();
    let mut chunk_indices: Vec<u32> = remote.keys().cloned().collect();
    chunk_indices.sort_unstable();
    for chunk_index in chunk_indices {
        let (node_id, subtask) = remote.remove(&chunk_index).expect("indexed above");
        match delivered.remove(&chunk_index) {
            Some(Ok(outcome)) => {
                records.push(NodeRunRecord {
                    node_id,
                    bytes_sent: outcome.bytes_sent,
                    bytes_received: outcome.bytes_received,
                    transfer_out_s: outcome.transfer_out_s,
                    compute_s: outcome.compute_s,
                    transfer_back_s: outcome.transfer_back_s,
                    timed_out: false,
                    reprocessed_locally: false,
                });
                results.push((subtask, MatchSet::new(outcome.offsets)));
            }
            Some(Err(_)) | None => {
                // Timed out, unreachable, or garbled: fall back locally.
                let start = Instant::now();
                let matches = kmp_search(&subtask.chunk, &subtask.pattern)?;
                local_compute_s += start.elapsed().as_secs_f64();
                records.push(NodeRunRecord {
                    node_id,
                    bytes_sent: 0,
                    bytes_received: 0,
                    transfer_out_s: 0.0,
                    compute_s: 0.0,
                    transfer_back_s: 0.0,
                    timed_out: true,
                    reprocessed_locally: true,
                });
                results.push((subtask, matches));
            }
        }
    }
    if local_participates || local_compute_s > 0.0 {
        records.insert(
            0,
            NodeRunRecord {
                node_id: local_id.clone(),
                bytes_sent: 0,
                bytes_received: 0,
                transfer_out_s: 0.0,
                compute_s: local_compute_s,
                transfer_back_s: 0.0,
                timed_out: false,
                reprocessed_locally: false,
            },
        );
    }

    let matches = merge_results(&results)?;
    let total_makespan_s = started.elapsed().as_secs_f64();
    Ok(ExecutionOutcome {
        report: ExecutionReport { mode: mode.clone(), records, total_makespan_s, plan: None },
        matches,
    })
}

//! Worker daemon: the offloadee side of the framed-TCP transport.
//!
//! Answers PROFILE_REQUEST with the node's profile, BENCH_REQUEST by
//! running profiler workloads (serialized daemon-wide so benchmarks never
//! interfere with each other), PING with an echoing PONG, and TASK_ASSIGN
//! by searching the chunk. Each connection is handled on its own thread
//! with at most one task in flight; a bad frame never takes the accept
//! loop down.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::domain::{NodeProfile, SubTask};
use crate::net::beacon::{send_beacon, DEFAULT_BEACON_PORT};
use crate::net::frame::{encode_frame, FrameDecoder, Message};
use crate::net::NetError;
use crate::profiler::{BenchmarkRunner, LocalRunner, StaticContext};
use crate::workload::kmp_search;

#[derive(Debug, Clone)]
pub struct WorkerConfig {
    /// host:port to listen on; port 0 picks an ephemeral port.
    pub listen: String,
    pub context: StaticContext,
    /// Benchmark figure reported in PROFILE_RESPONSE. Zero means "not yet
    /// benchmarked"; the offloader then drives phase 2 itself.
    pub benchmark_gflops: f64,
    /// When set, HELLO beacons are broadcast to this address about twice a
    /// second.
    pub beacon_target: Option<String>,
}

impl WorkerConfig {
    pub fn new(listen: impl Into<String>, context: StaticContext) -> Self {
        Self { listen: listen.into(), context, benchmark_gflops: 0.0, beacon_target: None }
    }

    pub fn default_beacon_target() -> String {
        format!("255.255.255.255:{DEFAULT_BEACON_PORT}")
    }
}

struct WorkerShared {
    config: WorkerConfig,
    /// Benchmarks are serialized daemon-wide to avoid self-interference.
    bench_gate: Mutex<()>,
}

impl WorkerShared {
    fn profile(&self) -> NodeProfile {
        let ctx = &self.config.context;
        NodeProfile {
            node_id: ctx.node_id.clone(),
            class: ctx.class,
            benchmark_gflops: self.config.benchmark_gflops,
            cpu_clock_ghz: ctx.cpu_clock_ghz,
            cpu_cores: ctx.cpu_cores,
            memory_gb: ctx.memory_gb,
            battery_level_pct: ctx.battery_level_pct,
            charging: ctx.charging,
        }
    }
}

pub struct Worker {
    listener: TcpListener,
    shared: Arc<WorkerShared>,
}

impl Worker {
    pub fn bind(config: WorkerConfig) -> Result<Self, NetError> {
        let listener = TcpListener::bind(&config.listen)?;
        Ok(Self { listener, shared: Arc::new(WorkerShared { config, bench_gate: Mutex::new(()) }) })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, NetError> {
        Ok(self.listener.local_addr()?)
    }

    /// Accept loop; runs until the process exits.
    pub fn run(self) -> Result<(), NetError> {
        if let Some(target) = self.shared.config.beacon_target.clone() {
            let hello = Message::Hello {
                node_id: self.shared.config.context.node_id.clone(),
                class: self.shared.config.context.class,
                port: self.local_addr()?.port(),
            };
            std::thread::spawn(move || loop {
                // Best effort; a dropped beacon only delays discovery.
                let _ = send_beacon(&target, &hello);
                std::thread::sleep(Duration::from_millis(500));
            });
        }
        for stream in self.listener.incoming() {
            match stream {
                Ok(stream) => {
                    let shared = Arc::clone(&self.shared);
                    std::thread::spawn(move || handle_connection(stream, shared));
                }
                Err(_) => continue,
            }
        }
        Ok(())
    }

    /// Binds and runs the accept loop on a background thread; returns the
    /// bound address. Used by tests and by callers embedding a worker.
    pub fn spawn(config: WorkerConfig) -> Result<SocketAddr, NetError> {
        let worker = Worker::bind(config)?;
        let addr = worker.local_addr()?;
        std::thread::spawn(move || {
            let _ = worker.run();
        });
        Ok(addr)
    }
}

/// Binds and serves forever.
pub fn worker_serve(config: WorkerConfig) -> Result<(), NetError> {
    Worker::bind(config)?.run()
}

fn handle_connection(mut stream: TcpStream, shared: Arc<WorkerShared>) {
    stream.set_nodelay(true).ok();
    let mut decoder = FrameDecoder::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        match decoder.next_frame() {
            Ok(Some(msg)) => {
                let reply = handle_message(msg, &shared);
                if write_frame(&mut stream, &reply).is_err() {
                    return;
                }
                continue;
            }
            Ok(None) => {}
            // Malformed JSON inside a well-delimited frame: report and keep
            // the connection; anything else is unrecoverable framing.
            Err(NetError::MalformedBody(reason)) => {
                if write_frame(&mut stream, &Message::Error { reason }).is_err() {
                    return;
                }
                continue;
            }
            Err(_) => return,
        }
        match stream.read(&mut buf) {
            Ok(0) | Err(_) => return,
            Ok(n) => decoder.push(&buf[..n]),
        }
    }
}

fn write_frame(stream: &mut TcpStream, msg: &Message) -> Result<(), NetError> {
    let frame = encode_frame(msg)?;
    stream.write_all(&frame)?;
    Ok(())
}

fn handle_message(msg: Message, shared: &WorkerShared) -> Message {
    match msg {
        Message::Ping { payload } => Message::Pong { payload },
        Message::ProfileRequest => Message::ProfileResponse { profile: shared.profile() },
        Message::BenchRequest { spec, runs } => {
            let _gate = shared.bench_gate.lock().expect("bench gate poisoned");
            match LocalRunner::default().run(&spec, runs, Duration::MAX) {
                Ok(result) => Message::BenchResult { result },
                Err(e) => Message::Error { reason: e.to_string() },
            }
        }
        Message::TaskAssign { subtask } => run_subtask(subtask),
        other => Message::Error { reason: format!("unexpected message: {other:?}") },
    }
}

fn run_subtask(subtask: SubTask) -> Message {
    match kmp_search(&subtask.chunk, &subtask.pattern) {
        Ok(matches) => Message::TaskResult {
            task_id: subtask.task_id,
            chunk_index: subtask.chunk_index,
            offsets: matches.offsets,
        },
        Err(e) => Message::Error { reason: e.to_string() },
    }
}

//! Client side of the framed-TCP transport: one logical request/response
//! stream per node.

use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::decision::RttEstimate;
use crate::domain::{NodeId, NodeProfile};
use crate::net::frame::{encode_frame, FrameDecoder, Message};
use crate::net::NetError;
use crate::profiler::{BenchmarkRunner, ProfilerError, WorkloadResult, WorkloadSpec};

#[derive(Debug)]
pub struct NodeClient {
    stream: TcpStream,
    decoder: FrameDecoder,
    bytes_sent: u64,
    bytes_received: u64,
}

/// Receive-side timing of one reply, in seconds since the receive call.
#[derive(Debug, Clone, Copy)]
pub struct RecvTiming {
    pub first_byte_s: f64,
    pub total_s: f64,
}

impl NodeClient {
    /// Connects with a timeout; failures surface as `Unreachable`.
    pub fn connect(addr: &str, timeout: Duration) -> Result<Self, NetError> {
        let resolved = addr
            .to_socket_addrs()
            .map_err(|e| NetError::Unreachable(addr.into(), e.to_string()))?
            .next()
            .ok_or_else(|| NetError::Unreachable(addr.into(), "no resolved address".into()))?;
        let stream = TcpStream::connect_timeout(&resolved, timeout)
            .map_err(|e| NetError::Unreachable(addr.into(), e.to_string()))?;
        stream.set_nodelay(true).ok();
        Ok(Self { stream, decoder: FrameDecoder::new(), bytes_sent: 0, bytes_received: 0 })
    }

    pub fn send(&mut self, msg: &Message) -> Result<(), NetError> {
        let frame = encode_frame(msg)?;
        self.stream.write_all(&frame)?;
        self.bytes_sent += frame.len() as u64;
        Ok(())
    }

    /// Receives the next frame, waiting at most `deadline`.
    pub fn recv(&mut self, deadline: Duration) -> Result<Message, NetError> {
        self.recv_timed(deadline).map(|(msg, _)| msg)
    }

    /// Like [`recv`](Self::recv), also reporting when the first byte of the
    /// reply arrived relative to the call. The gap to first byte approximates
    /// remote compute time; the rest is return transfer.
    pub fn recv_timed(&mut self, deadline: Duration) -> Result<(Message, RecvTiming), NetError> {
        let start = Instant::now();
        let end = start + deadline;
        let mut first_byte_s = None;
        let mut buf = [0u8; 64 * 1024];
        loop {
            if let Some(msg) = self.decoder.next_frame()? {
                let total_s = start.elapsed().as_secs_f64();
                let first = first_byte_s.unwrap_or(total_s);
                return Ok((msg, RecvTiming { first_byte_s: first, total_s }));
            }
            let remaining = end.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Err(NetError::Timeout);
            }
            self.stream.set_read_timeout(Some(remaining))?;
            match self.stream.read(&mut buf) {
                Ok(0) => {
                    return if self.decoder.pending_bytes() > 0 {
                        Err(NetError::TruncatedFrame)
                    } else {
                        Err(NetError::ConnectionClosed)
                    }
                }
                Ok(n) => {
                    if first_byte_s.is_none() {
                        first_byte_s = Some(start.elapsed().as_secs_f64());
                    }
                    self.bytes_received += n as u64;
                    self.decoder.push(&buf[..n]);
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    pub fn request(&mut self, msg: &Message, deadline: Duration) -> Result<Message, NetError> {
        self.send(msg)?;
        self.recv(deadline)
    }

    /// Total bytes written to and read from the socket so far.
    pub fn io_counters(&self) -> (u64, u64) {
        (self.bytes_sent, self.bytes_received)
    }

    /// One PING/PONG round trip carrying `probe_bytes` of payload.
    pub fn ping_rtt(&mut self, probe_bytes: u64, deadline: Duration) -> Result<f64, NetError> {
        let payload = vec![0xA5u8; probe_bytes as usize];
        let start = Instant::now();
        let reply = self.request(&Message::Ping { payload: payload.clone() }, deadline)?;
        let elapsed = start.elapsed().as_secs_f64();
        match reply {
            Message::Pong { payload: echoed } if echoed == payload => Ok(elapsed),
            Message::Pong { .. } => Err(NetError::MalformedBody("pong payload mismatch".into())),
            other => Err(NetError::MalformedBody(format!("expected PONG, got {other:?}"))),
        }
    }

    /// Median of 3 probe round trips plus the estimated task transfer time.
    ///
    /// Throughput is inferred from the probe itself (payload travels both
    /// directions), so a zero-byte probe contributes no task term.
    pub fn estimate_rtt(
        &mut self,
        node_id: NodeId,
        probe_bytes: u64,
        task_bytes: u64,
        deadline: Duration,
    ) -> Result<RttEstimate, NetError> {
        let mut samples = [
            self.ping_rtt(probe_bytes, deadline)?,
            self.ping_rtt(probe_bytes, deadline)?,
            self.ping_rtt(probe_bytes, deadline)?,
        ];
        samples.sort_by(|a, b| a.total_cmp(b));
        let median = samples[1];
        let task_term = if probe_bytes > 0 && median > 0.0 {
            let throughput = (2 * probe_bytes) as f64 / median;
            task_bytes as f64 / throughput
        } else {
            0.0
        };
        Ok(RttEstimate { node_id, rtt_s: median + task_term })
    }
}

/// Fetches a worker's profile with one PROFILE_REQUEST.
pub fn fetch_profile(addr: &str, deadline: Duration) -> Result<NodeProfile, NetError> {
    let mut client = NodeClient::connect(addr, deadline)?;
    match client.request(&Message::ProfileRequest, deadline)? {
        Message::ProfileResponse { profile } => Ok(profile),
        Message::Error { reason } => Err(NetError::MalformedBody(reason)),
        other => Err(NetError::MalformedBody(format!("expected PROFILE_RESPONSE, got {other:?}"))),
    }
}

/// Benchmark dispatch over the wire: sends BENCH_REQUEST frames and waits
/// for the result within the deadline.
pub struct RemoteRunner {
    client: Mutex<NodeClient>,
}

impl RemoteRunner {
    pub fn new(client: NodeClient) -> Self {
        Self { client: Mutex::new(client) }
    }

    pub fn connect(addr: &str, timeout: Duration) -> Result<Self, NetError> {
        Ok(Self::new(NodeClient::connect(addr, timeout)?))
    }
}

impl BenchmarkRunner for RemoteRunner {
    fn run(
        &self,
        spec: &WorkloadSpec,
        runs: u32,
        deadline: Duration,
    ) -> Result<WorkloadResult, ProfilerError> {
        let mut client = self.client.lock().expect("client lock poisoned");
        let reply = client
            .request(&Message::BenchRequest { spec: spec.clone(), runs }, deadline)
            .map_err(|e| match e {
                NetError::Timeout => ProfilerError::BenchmarkTimeout,
                other => ProfilerError::Transport(other.to_string()),
            })?;
        match reply {
            Message::BenchResult { result } => Ok(result),
            Message::Error { reason } => Err(ProfilerError::Transport(reason)),
            other => Err(ProfilerError::Transport(format!("expected BENCH_RESULT, got {other:?}"))),
        }
    }
}

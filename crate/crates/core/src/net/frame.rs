//! Wire protocol: a 4-byte big-endian unsigned length prefix followed by a
//! UTF-8 JSON body whose `type` field names the message.

use serde::{Deserialize, Serialize};

use crate::domain::{b64, NodeClass, NodeId, NodeProfile, SubTask};
use crate::net::NetError;
use crate::profiler::{WorkloadResult, WorkloadSpec};

/// Frame bodies above this are rejected; larger corpora must be chunked by
/// the partition plan before transmission.
pub const MAX_FRAME_BODY: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Message {
    /// Worker presence beacon (UDP) carrying the TCP service port.
    #[serde(rename = "HELLO")]
    Hello { node_id: NodeId, class: NodeClass, port: u16 },
    #[serde(rename = "PROFILE_REQUEST")]
    ProfileRequest,
    #[serde(rename = "PROFILE_RESPONSE")]
    ProfileResponse { profile: NodeProfile },
    #[serde(rename = "BENCH_REQUEST")]
    BenchRequest { spec: WorkloadSpec, runs: u32 },
    #[serde(rename = "BENCH_RESULT")]
    BenchResult { result: WorkloadResult },
    #[serde(rename = "PING")]
    Ping {
        #[serde(with = "b64")]
        payload: Vec<u8>,
    },
    #[serde(rename = "PONG")]
    Pong {
        #[serde(with = "b64")]
        payload: Vec<u8>,
    },
    #[serde(rename = "TASK_ASSIGN")]
    TaskAssign {
        #[serde(flatten)]
        subtask: SubTask,
    },
    #[serde(rename = "TASK_RESULT")]
    TaskResult { task_id: String, chunk_index: u32, offsets: Vec<u64> },
    #[serde(rename = "ERROR")]
    Error { reason: String },
}

/// Serializes a message into one length-prefixed frame.
pub fn encode_frame(msg: &Message) -> Result<Vec<u8>, NetError> {
    let body = serde_json::to_vec(msg).map_err(|e| NetError::MalformedBody(e.to_string()))?;
    if body.len() > MAX_FRAME_BODY {
        return Err(NetError::FrameTooLarge(body.len()));
    }
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

/// Incremental frame decoder; partial reads resume where they left off.
///
/// A complete frame with unparseable JSON is consumed and reported as
/// [`NetError::MalformedBody`] so the stream stays in sync; an oversized
/// declared length is fatal.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Pops the next complete frame, or `None` when more bytes are needed.
    pub fn next_frame(&mut self) -> Result<Option<Message>, NetError> {
        if self.buf.len() < 4 {
            return Ok(None);
        }
        let declared = u32::from_be_bytes([self.buf[0], self.buf[1], self.buf[2], self.buf[3]]) as usize;
        if declared > MAX_FRAME_BODY {
            return Err(NetError::FrameTooLarge(declared));
        }
        if self.buf.len() < 4 + declared {
            return Ok(None);
        }
        let body: Vec<u8> = self.buf.drain(..4 + declared).skip(4).collect();
        match serde_json::from_slice(&body) {
            Ok(msg) => Ok(Some(msg)),
            Err(e) => Err(NetError::MalformedBody(e.to_string())),
        }
    }

    /// Call at end of stream: leftover bytes mean the peer died mid-frame.
    pub fn finish(&self) -> Result<(), NetError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(NetError::TruncatedFrame)
        }
    }

    pub fn pending_bytes(&self) -> usize {
        self.buf.len()
    }
}

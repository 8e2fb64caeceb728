//! Protocol v1 framing and messages.
//!
//! Every message is an ASCII decimal byte count, a `\n`, then exactly that
//! many bytes of UTF-8 JSON. The JSON object carries a `type` field naming
//! the message.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::hpo::Params;

pub const PROTOCOL_VERSION: u32 = 1;

/// Upper bound on a single payload; larger prefixes are rejected before
/// allocating.
pub const MAX_MESSAGE_BYTES: usize = 256 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainStatus {
    Ok,
    Oom,
    Timeout,
    Crash,
}

impl TrainStatus {
    pub fn name(self) -> &'static str {
        match self {
            TrainStatus::Ok => "ok",
            TrainStatus::Oom => "oom",
            TrainStatus::Timeout => "timeout",
            TrainStatus::Crash => "crash",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRequest {
    pub dataset_path: String,
    pub params: Params,
    pub seed: u64,
    pub max_epochs: u64,
    pub patience: u64,
    pub k: usize,
    pub train_nodes: Vec<usize>,
    pub val_nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResponse {
    pub status: TrainStatus,
    #[serde(default)]
    pub partition: Option<Vec<usize>>,
    #[serde(default)]
    pub epochs_used: u64,
    #[serde(default)]
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl TrainResponse {
    pub fn ok(partition: Vec<usize>, epochs_used: u64, wall_time: f64) -> Self {
        Self {
            status: TrainStatus::Ok,
            partition: Some(partition),
            epochs_used,
            wall_time,
            message: None,
        }
    }

    pub fn failed(status: TrainStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            partition: None,
            epochs_used: 0,
            wall_time: 0.0,
            message: Some(message.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello { protocol: u32, name: String },
    HelloAck { protocol: u32, name: String },
    Train(TrainRequest),
    Result(TrainResponse),
    Error { message: String },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::HelloAck { .. } => "hello_ack",
            Message::Train(_) => "train",
            Message::Result(_) => "result",
            Message::Error { .. } => "error",
        }
    }
}

pub fn write_message<W: Write>(writer: &mut W, message: &Message) -> io::Result<()> {
    let payload = serde_json::to_vec(message)?;
    writeln!(writer, "{}", payload.len())?;
    writer.write_all(&payload)?;
    writer.flush()
}

/// Reads one framed message; `Ok(None)` on a clean end of stream.
pub fn read_message<R: BufRead>(reader: &mut R) -> io::Result<Option<Message>> {
    let mut header = String::new();
    if reader.read_line(&mut header)? == 0 {
        return Ok(None);
    }
    let len: usize = header
        .trim_end_matches(['\n', '\r'])
        .parse()
        .map_err(|_| invalid(format!("bad length prefix {:?}", truncate(&header, 40))))?;
    if len > MAX_MESSAGE_BYTES {
        return Err(invalid(format!("message of {len} bytes exceeds limit")));
    }
    let mut payload = vec![0u8; len];
    reader.read_exact(&mut payload)?;
    serde_json::from_slice(&payload)
        .map(Some)
        .map_err(|e| invalid(format!("bad payload: {e}")))
}

fn invalid(message: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, message)
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

//! Length-prefixed JSON frames.
//!
//! A frame is a 4-byte little-endian payload length followed by that many
//! bytes of UTF-8 JSON. The payload is one [`WireMessage`], an object whose
//! `"type"` field names the variant.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::DatasetSchema;
use crate::engine::{Hit, ScanStats};
use crate::local::LocalConfig;
use crate::metric::{MultiMetricObject, NormalizationStats, WeightVector};

/// Frames larger than this are rejected before allocation.
pub const MAX_FRAME: usize = 256 << 20;

pub mod codes {
    pub const PARSE: &str = "parse";
    pub const UNKNOWN_TAG: &str = "unknown-tag";
    pub const UNOWNED: &str = "unowned";
    pub const NOT_BUILT: &str = "not-built";
    pub const FAILED: &str = "failed";
    pub const UNEXPECTED: &str = "unexpected";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum WireMessage {
    BuildPartition {
        task_id: u64,
        partition: usize,
        schema: DatasetSchema,
        stats: NormalizationStats,
        local: LocalConfig,
        probe_space_cap: usize,
        objects: Vec<MultiMetricObject>,
    },
    RangeTask {
        task_id: u64,
        q: MultiMetricObject,
        weights: WeightVector,
        /// `None` verifies every object of the listed partitions.
        r: Option<f64>,
        partitions: Vec<usize>,
    },
    KnnSampleTask {
        task_id: u64,
        q: MultiMetricObject,
        weights: WeightVector,
        k: usize,
        partitions: Vec<usize>,
    },
    CandidateReply {
        task_id: u64,
        hits: Vec<Hit>,
        stats: ScanStats,
    },
    StatsReply {
        task_id: u64,
        stats: ScanStats,
    },
    Error {
        task_id: u64,
        code: String,
        text: String,
    },
    Shutdown {
        task_id: u64,
    },
}

pub const TAGS: [&str; 7] = [
    "BuildPartition",
    "RangeTask",
    "KnnSampleTask",
    "CandidateReply",
    "StatsReply",
    "Error",
    "Shutdown",
];

impl WireMessage {
    pub fn task_id(&self) -> u64 {
        match self {
            WireMessage::BuildPartition { task_id, .. }
            | WireMessage::RangeTask { task_id, .. }
            | WireMessage::KnnSampleTask { task_id, .. }
            | WireMessage::CandidateReply { task_id, .. }
            | WireMessage::StatsReply { task_id, .. }
            | WireMessage::Error { task_id, .. }
            | WireMessage::Shutdown { task_id } => *task_id,
        }
    }

    pub fn error(task_id: u64, code: &str, text: impl Into<String>) -> Self {
        WireMessage::Error {
            task_id,
            code: code.to_string(),
            text: text.into(),
        }
    }

    pub fn is_terminal_reply(&self) -> bool {
        matches!(
            self,
            WireMessage::CandidateReply { .. } | WireMessage::StatsReply { .. } | WireMessage::Error { .. }
        )
    }
}

/// Why a payload could not be turned into a message. Carries the task id
/// when it could still be read.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeError {
    pub task_id: u64,
    pub code: &'static str,
    pub text: String,
}

impl DecodeError {
    pub fn into_reply(self) -> WireMessage {
        WireMessage::error(self.task_id, self.code, self.text)
    }
}

pub fn encode_payload(msg: &WireMessage) -> Vec<u8> {
    serde_json::to_vec(msg).expect("wire messages always serialize")
}

pub fn decode_payload(payload: &[u8]) -> Result<WireMessage, DecodeError> {
    let value: Value = serde_json::from_slice(payload).map_err(|e| DecodeError {
        task_id: 0,
        code: codes::PARSE,
        text: e.to_string(),
    })?;
    let task_id = value.get("task_id").and_then(Value::as_u64).unwrap_or(0);
    match value.get("type").and_then(Value::as_str) {
        None => Err(DecodeError {
            task_id,
            code: codes::PARSE,
            text: "missing \"type\" field".into(),
        }),
        Some(tag) if !TAGS.contains(&tag) => Err(DecodeError {
            task_id,
            code: codes::UNKNOWN_TAG,
            text: format!("unknown message type {tag:?}"),
        }),
        Some(_) => serde_json::from_value(value).map_err(|e| DecodeError {
            task_id,
            code: codes::PARSE,
            text: e.to_string(),
        }),
    }
}

/// Length prefix plus payload.
pub fn frame(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

pub fn encode_frame(msg: &WireMessage) -> Vec<u8> {
    frame(&encode_payload(msg))
}

pub fn write_frame(w: &mut impl Write, msg: &WireMessage) -> io::Result<()> {
    w.write_all(&encode_frame(msg))?;
    w.flush()
}

/// Read one frame's payload. `Ok(None)` on clean end of stream.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated length prefix")),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_le_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes exceeds limit")));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(Some(payload))
}

//! JSONL trace format: one memory-access record per line.
//!
//! ```text
//! {"seq":1,"op":"w","addr":"0x40020008","width":4,"value":"0x40013804"}
//! {"seq":2,"op":"r","addr":"0x20000100","width":1}
//! ```
//!
//! Addresses and values are `0x`-prefixed lowercase hex. Reads carry no
//! value. Line-oriented on purpose: diagnostics name the offending line.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{AccessKind, MemoryAccessEvent};
use crate::serde_hex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub seq: u64,
    pub op: String,
    #[serde(with = "serde_hex")]
    pub addr: u32,
    pub width: u8,
    #[serde(
        with = "serde_hex::opt",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub value: Option<u32>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TraceRecord {
    pub fn from_event(event: &MemoryAccessEvent) -> Self {
        TraceRecord {
            seq: event.seq,
            op: match event.kind {
                AccessKind::Read => "r",
                AccessKind::Write => "w",
            }
            .to_string(),
            addr: event.addr,
            width: event.width,
            value: match event.kind {
                AccessKind::Read => None,
                AccessKind::Write => Some(event.value),
            },
        }
    }

    pub fn to_event(&self) -> Result<MemoryAccessEvent, String> {
        if !matches!(self.width, 1 | 2 | 4) {
            return Err(format!("invalid width {} (expected 1, 2 or 4)", self.width));
        }
        match self.op.as_str() {
            "r" => {
                if self.value.is_some() {
                    return Err("read record must not carry a value".to_string());
                }
                Ok(MemoryAccessEvent::read(self.seq, self.addr, self.width))
            }
            "w" => {
                let value = self
                    .value
                    .ok_or_else(|| "write record must carry a value".to_string())?;
                if self.width < 4 && u64::from(value) >= 1u64 << (8 * u32::from(self.width)) {
                    return Err(format!(
                        "value {value:#x} does not fit in width {}",
                        self.width
                    ));
                }
                Ok(MemoryAccessEvent::write(
                    self.seq, self.addr, self.width, value,
                ))
            }
            other => Err(format!("invalid op {other:?} (expected \"r\" or \"w\")")),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace record serializes")
    }
}

/// Parses a whole JSONL trace, enforcing strictly increasing seq.
pub fn parse_trace(text: &str) -> Result<Vec<MemoryAccessEvent>, TraceError> {
    let mut events = Vec::new();
    let mut prev_seq: Option<u64> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord =
            serde_json::from_str(line).map_err(|e| TraceError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        let event = record.to_event().map_err(|message| TraceError::Malformed {
            line: line_no,
            message,
        })?;
        if let Some(prev) = prev_seq {
            if event.seq <= prev {
                return Err(TraceError::Malformed {
                    line: line_no,
                    message: format!("seq {} does not increase (previous {prev})", event.seq),
                });
            }
        }
        prev_seq = Some(event.seq);
        events.push(event);
    }
    Ok(events)
}

pub fn write_trace(events: &[MemoryAccessEvent]) -> String {
    let mut out = String::new();
    for ev in events {
        out.push_str(&TraceRecord::from_event(ev).to_json_line());
        out.push('\n');
    }
    out
}

//! Serializable audit record of a whole engine session.
//!
//! Field order is fixed by the struct definitions and channels are ordered
//! by creation, so a report serializes deterministically — byte-identical
//! across runs of the same trace.

use serde::{Deserialize, Serialize};

use crate::channel_tracker::{Direction, DmaChannel, LifecycleState, TerminationReason};
use crate::serde_hex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub profile: String,
    pub session: SessionTotals,
    pub channels: Vec<ChannelRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTotals {
    pub events: u64,
    pub configs_detected: u64,
    pub input_channels: u64,
    pub output_channels: u64,
    /// Channels whose buffer size inference made progress.
    pub buffers_sized: u64,
    /// Channels that stayed candidates: configured, never accessed.
    pub configured_unused: u64,
    pub injections: u64,
    pub bytes_injected: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelRecord {
    #[serde(with = "serde_hex")]
    pub stream_key: u32,
    pub pointers: Vec<PointerRecord>,
    pub direction: String,
    pub state: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub termination_reason: Option<String>,
    pub created_at: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminated_at: Option<u64>,
    pub dest_count: u64,
    pub buffers: Vec<BufferRecord>,
    pub perceived_size: u64,
    pub injections: u64,
    pub bytes_injected: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointerRecord {
    #[serde(with = "serde_hex")]
    pub register: u32,
    #[serde(with = "serde_hex")]
    pub value: u32,
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferRecord {
    #[serde(with = "serde_hex")]
    pub base: u32,
    pub perceived_size: u64,
}

fn direction_str(d: Direction) -> &'static str {
    match d {
        Direction::Undetermined => "undetermined",
        Direction::Input => "input",
        Direction::Output => "output",
    }
}

fn reason_str(r: TerminationReason) -> &'static str {
    match r {
        TerminationReason::Reconfigured => "reconfigured",
        TerminationReason::FirmwareWrite => "firmware_write",
        TerminationReason::SessionEnd => "session_end",
    }
}

impl ChannelReport {
    pub fn build(
        profile: &str,
        events: u64,
        configs_detected: u64,
        channels: &[DmaChannel],
    ) -> Self {
        let records: Vec<ChannelRecord> = channels
            .iter()
            .map(|ch| {
                let (state, reason) = match ch.state {
                    LifecycleState::Candidate => ("candidate", None),
                    LifecycleState::Active => ("active", None),
                    LifecycleState::Terminated(r) => ("terminated", Some(reason_str(r))),
                };
                ChannelRecord {
                    stream_key: ch.stream_key,
                    pointers: ch
                        .pointers
                        .iter()
                        .map(|p| PointerRecord {
                            register: p.register,
                            value: p.value,
                            class: p.class.to_string(),
                        })
                        .collect(),
                    direction: direction_str(ch.direction).to_string(),
                    state: state.to_string(),
                    termination_reason: reason.map(str::to_string),
                    created_at: ch.created_at,
                    terminated_at: ch.terminated_at,
                    dest_count: ch.dest_ptrs.len() as u64,
                    buffers: {
                        let mut b: Vec<BufferRecord> = ch
                            .dest_ptrs
                            .iter()
                            .map(|t| BufferRecord {
                                base: t.base,
                                perceived_size: t.perceived_size,
                            })
                            .collect();
                        b.sort_by_key(|r| r.base);
                        b
                    },
                    perceived_size: ch.perceived_size_total(),
                    injections: ch.injections,
                    bytes_injected: ch.bytes_injected,
                }
            })
            .collect();
        let session = SessionTotals {
            events,
            configs_detected,
            input_channels: records.iter().filter(|r| r.direction == "input").count() as u64,
            output_channels: records.iter().filter(|r| r.direction == "output").count() as u64,
            buffers_sized: records.iter().filter(|r| r.perceived_size > 0).count() as u64,
            configured_unused: records
                .iter()
                .filter(|r| r.direction == "undetermined")
                .count() as u64,
            injections: records.iter().map(|r| r.injections).sum(),
            bytes_injected: records.iter().map(|r| r.bytes_injected).sum(),
        };
        ChannelReport {
            profile: profile.to_string(),
            session,
            channels: records,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_totals() {
        let r = ChannelReport::build("stm32f103", 0, 0, &[]);
        assert_eq!(r.session.input_channels, 0);
        assert_eq!(r.session.injections, 0);
        assert!(r.channels.is_empty());
    }

    #[test]
    fn json_is_deterministic() {
        let r = ChannelReport::build("stm32f103", 3, 1, &[]);
        assert_eq!(r.to_json(), r.to_json());
        let parsed: ChannelReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(parsed, r);
    }
}

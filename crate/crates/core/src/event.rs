use serde::{Deserialize, Serialize};

/// One observed memory access. The engine's sole input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryAccessEvent {
    /// Monotonically increasing within one engine session.
    pub seq: u64,
    pub kind: AccessKind,
    pub addr: u32,
    /// Access width in bytes: 1, 2 or 4.
    pub width: u8,
    /// Low `width` bytes are significant. Zero for reads.
    pub value: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccessKind {
    Read,
    Write,
}

impl MemoryAccessEvent {
    pub fn read(seq: u64, addr: u32, width: u8) -> Self {
        MemoryAccessEvent {
            seq,
            kind: AccessKind::Read,
            addr,
            width,
            value: 0,
        }
    }

    pub fn write(seq: u64, addr: u32, width: u8, value: u32) -> Self {
        MemoryAccessEvent {
            seq,
            kind: AccessKind::Write,
            addr,
            width,
            value,
        }
    }

    /// True when `width` is one of the bus widths an MCU load/store can have.
    pub fn width_is_valid(&self) -> bool {
        matches!(self.width, 1 | 2 | 4)
    }
}

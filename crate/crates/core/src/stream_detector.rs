//! Detects DMA stream configurations in the MMIO write stream.
//!
//! A stream configuration shows up as writes of pointer values to
//! consecutive 4-byte-aligned MMIO registers, 32 bits wide. The detector
//! keeps a shadow of MMIO word state and emits a [`StreamConfiguration`]
//! whenever a write completes or extends a maximal run of pointer-holding
//! words. Runs of three or more pointers are the circular-mode variant
//! (extra destination pointers in one configuration).
//!
//! The filter deliberately drops everything else: narrow writes, unaligned
//! writes, non-pointer values and isolated pointer writes never form a
//! configuration. Groups without a RAM pointer are suppressed too — Flash
//! can never be a transfer destination, so no input channel could exist.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::event::{AccessKind, MemoryAccessEvent};
use crate::memory_map::{AddressClass, MemoryMapProfile};

/// One pointer register inside a detected configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamPointer {
    pub register: u32,
    pub value: u32,
    pub class: AddressClass,
}

/// A detected source/destination pointer group, keyed by the lowest MMIO
/// word address of the run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamConfiguration {
    pub stream_key: u32,
    /// Ordered by register address; length >= 2, >= 3 in circular mode.
    pub pointers: Vec<StreamPointer>,
    pub detected_at: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DetectorError {
    #[error("observe_mmio_write called with non-MMIO address {0:#x}")]
    NotMmio(u32),
    #[error("observe_mmio_write called with a read event (seq {0})")]
    NotWrite(u64),
}

/// Per-branch counters, exposed so tests can assert every filter arm is
/// actually exercised.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct DetectorStats {
    pub writes_observed: u64,
    pub rejected_width: u64,
    pub rejected_unaligned: u64,
    pub rejected_not_pointer: u64,
    pub isolated: u64,
    pub suppressed_no_ram: u64,
    pub duplicate_suppressed: u64,
    pub emitted: u64,
    pub reemitted: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ShadowEntry {
    value: u32,
    seq: u64,
    width: u8,
    /// Word-sized aligned write of a pointer-like value.
    eligible: bool,
}

/// MMIO register shadow plus group-emission state.
pub struct StreamDetector {
    profile: MemoryMapProfile,
    shadow: BTreeMap<u32, ShadowEntry>,
    /// Last emitted group per stream key: (register, value) members.
    emitted: BTreeMap<u32, Vec<(u32, u32)>>,
    pub stats: DetectorStats,
}

impl StreamDetector {
    pub fn new(profile: MemoryMapProfile) -> Self {
        StreamDetector {
            profile,
            shadow: BTreeMap::new(),
            emitted: BTreeMap::new(),
            stats: DetectorStats::default(),
        }
    }

    /// Empties the shadow and emission state. Idempotent.
    pub fn reset(&mut self) {
        self.shadow.clear();
        self.emitted.clear();
    }

    /// Number of shadowed MMIO words, for tests.
    pub fn shadow_len(&self) -> usize {
        self.shadow.len()
    }

    /// Feeds one MMIO write. Returns a configuration when this write
    /// completes or extends a pointer group.
    pub fn observe_mmio_write(
        &mut self,
        event: MemoryAccessEvent,
    ) -> Result<Option<StreamConfiguration>, DetectorError> {
        if self.profile.classify(event.addr) != AddressClass::Mmio {
            return Err(DetectorError::NotMmio(event.addr));
        }
        if event.kind != AccessKind::Write {
            return Err(DetectorError::NotWrite(event.seq));
        }
        self.stats.writes_observed += 1;

        let word = event.addr & !3;
        let aligned = event.addr.is_multiple_of(4);
        let pointer_like = self.profile.is_pointer_like(event.value);
        let eligible = event.width == 4 && aligned && pointer_like;

        self.shadow.insert(
            word,
            ShadowEntry {
                value: event.value,
                seq: event.seq,
                width: event.width,
                eligible,
            },
        );
        self.invalidate_stale(word, event.value, eligible);

        if !eligible {
            if event.width != 4 {
                self.stats.rejected_width += 1;
            } else if !aligned {
                self.stats.rejected_unaligned += 1;
            } else {
                self.stats.rejected_not_pointer += 1;
            }
            return Ok(None);
        }

        let run = self.run_containing(word);
        if run.len() < 2 {
            self.stats.isolated += 1;
            return Ok(None);
        }

        let pointers: Vec<StreamPointer> = run
            .iter()
            .map(|&reg| {
                let value = self.shadow[&reg].value;
                StreamPointer {
                    register: reg,
                    value,
                    class: self.profile.classify(value),
                }
            })
            .collect();
        if !pointers.iter().any(|p| p.class == AddressClass::Ram) {
            self.stats.suppressed_no_ram += 1;
            return Ok(None);
        }

        let key = run[0];
        let members: Vec<(u32, u32)> = pointers.iter().map(|p| (p.register, p.value)).collect();
        if self.emitted.get(&key) == Some(&members) {
            self.stats.duplicate_suppressed += 1;
            return Ok(None);
        }

        // An old emission for a shorter or differently keyed run over these
        // words is superseded now.
        let last = u64::from(key) + 4 * (members.len() as u64 - 1);
        let before = self.emitted.len();
        self.emitted.retain(|&k, m| {
            let k_last = u64::from(k) + 4 * (m.len() as u64 - 1);
            k_last < u64::from(key) || u64::from(k) > last
        });
        if self.emitted.len() < before {
            self.stats.reemitted += 1;
        }
        self.emitted.insert(key, members);
        self.stats.emitted += 1;

        Ok(Some(StreamConfiguration {
            stream_key: key,
            pointers,
            detected_at: event.seq,
        }))
    }

    /// Drops emission records that no longer match the shadow at `word`,
    /// so a later re-formation of the group is emitted again.
    fn invalidate_stale(&mut self, word: u32, value: u32, eligible: bool) {
        self.emitted.retain(|&k, members| {
            let last = u64::from(k) + 4 * (members.len() as u64 - 1);
            if u64::from(word) < u64::from(k) || u64::from(word) > last {
                return true;
            }
            let idx = ((word - k) / 4) as usize;
            eligible && members[idx].1 == value
        });
    }

    /// Maximal run of consecutive eligible words containing `word`,
    /// ascending.
    fn run_containing(&self, word: u32) -> Vec<u32> {
        let mut start = word;
        while start >= 4 {
            match self.shadow.get(&(start - 4)) {
                Some(e) if e.eligible => start -= 4,
                _ => break,
            }
        }
        let mut run = vec![start];
        let mut next = u64::from(start) + 4;
        while next <= u64::from(u32::MAX) {
            match self.shadow.get(&(next as u32)) {
                Some(e) if e.eligible => {
                    run.push(next as u32);
                    next += 4;
                }
                _ => break,
            }
        }
        run
    }
}

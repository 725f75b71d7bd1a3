//! DMA channel lifecycles: creation from stream configurations, direction
//! inference from the first firmware access, incremental buffer-size
//! inference, input injection on reads, and termination.
//!
//! Direction is not known at configuration time. A configuration only says
//! "these pointers were written"; whether the transfer moves data into RAM
//! (input channel) or out of it (output channel) is resolved by watching
//! which way firmware first touches the RAM side: a read means input, a
//! write means output.
//!
//! Buffer bounds are inferred per read: each access carries a *span* of
//! twice its width past the currently perceived end, and a read landing in
//! the span extends the perceived size to cover the read. The double-width
//! span absorbs endianness-conversion access patterns where byte 1 is read
//! before byte 0.

use crate::event::{AccessKind, MemoryAccessEvent};
use crate::input_source::{Exhausted, InputProvider, ShadowRam};
use crate::memory_map::{AddressClass, MemoryMapProfile};
use crate::stream_detector::{StreamConfiguration, StreamPointer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Undetermined,
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    /// A newer configuration referenced the same stream.
    Reconfigured,
    /// Firmware wrote into the channel's buffer.
    FirmwareWrite,
    /// Trace ended while the channel was live.
    SessionEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifecycleState {
    Candidate,
    Active,
    Terminated(TerminationReason),
}

/// Incremental bound estimate for one destination buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferTracker {
    pub base: u32,
    /// Lower-bound estimate of the buffer length, in bytes. Never shrinks.
    pub perceived_size: u64,
}

impl BufferTracker {
    fn new(base: u32) -> Self {
        BufferTracker {
            base,
            perceived_size: 0,
        }
    }

    pub fn contains(&self, addr: u32) -> bool {
        let a = u64::from(addr);
        let b = u64::from(self.base);
        b <= a && a < b + self.perceived_size
    }

    /// One step of the size-inference rule. Returns true when the read
    /// landed in the span and the perceived size grew.
    fn observe_read(&mut self, addr: u32, width: u8) -> bool {
        let a = u64::from(addr);
        let base = u64::from(self.base);
        let span_base = base + self.perceived_size;
        let span_size = 2 * u64::from(width);
        if span_base <= a && a < span_base + span_size {
            self.perceived_size = (a - base) + u64::from(width);
            true
        } else {
            false
        }
    }
}

/// Bytes handed to the emulator in response to one firmware DMA read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectionAction {
    pub addr: u32,
    pub bytes: Vec<u8>,
    /// Stream key of the owning channel.
    pub channel: u32,
    /// `addr` relative to the buffer base.
    pub offset: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifecycleEvent {
    Created { stream_key: u32, at: u64 },
    Terminated { stream_key: u32, reason: TerminationReason, at: u64 },
}

/// Lifecycle record of one channel. Also the snapshot view handed out to
/// reports and tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DmaChannel {
    pub stream_key: u32,
    pub pointers: Vec<StreamPointer>,
    pub source_ptr: Option<StreamPointer>,
    /// One tracker per destination buffer; populated when the channel
    /// activates as an input channel. More than one in circular mode.
    pub dest_ptrs: Vec<BufferTracker>,
    pub direction: Direction,
    pub state: LifecycleState,
    pub created_at: u64,
    pub terminated_at: Option<u64>,
    pub injections: u64,
    pub bytes_injected: u64,
    /// Injected bytes survive here after termination; firmware may keep
    /// using them.
    pub shadow: ShadowRam,
}

impl DmaChannel {
    fn ram_candidates(&self) -> impl Iterator<Item = u32> + '_ {
        self.pointers
            .iter()
            .filter(|p| p.class == AddressClass::Ram)
            .map(|p| p.value)
    }

    fn is_live(&self) -> bool {
        !matches!(self.state, LifecycleState::Terminated(_))
    }

    pub fn perceived_size_total(&self) -> u64 {
        self.dest_ptrs.iter().map(|t| t.perceived_size).sum()
    }
}

/// Lifecycle transition counters, exposed so the scenario suite can assert
/// full coverage.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct TrackerStats {
    pub created: u64,
    pub activated_input: u64,
    pub activated_output: u64,
    pub span_hits: u64,
    pub span_misses: u64,
    pub injections: u64,
    pub terminated_reconfigured: u64,
    pub terminated_firmware_write: u64,
    pub terminated_session_end: u64,
    pub reads_outside: u64,
}

pub struct ChannelTracker {
    profile: MemoryMapProfile,
    channels: Vec<DmaChannel>,
    pub stats: TrackerStats,
}

impl ChannelTracker {
    pub fn new(profile: MemoryMapProfile) -> Self {
        ChannelTracker {
            profile,
            channels: Vec::new(),
            stats: TrackerStats::default(),
        }
    }

    /// Handles a detected (or re-detected) stream configuration. An existing
    /// live channel on the same stream key is terminated first; a fresh
    /// candidate takes its place.
    pub fn on_stream_config(&mut self, cfg: &StreamConfiguration) -> Vec<LifecycleEvent> {
        let mut events = Vec::new();
        if let Some(ch) = self
            .channels
            .iter_mut()
            .find(|c| c.is_live() && c.stream_key == cfg.stream_key)
        {
            terminate(ch, TerminationReason::Reconfigured, cfg.detected_at);
            self.stats.terminated_reconfigured += 1;
            events.push(LifecycleEvent::Terminated {
                stream_key: cfg.stream_key,
                reason: TerminationReason::Reconfigured,
                at: cfg.detected_at,
            });
        }
        self.channels.push(DmaChannel {
            stream_key: cfg.stream_key,
            pointers: cfg.pointers.clone(),
            source_ptr: None,
            dest_ptrs: Vec::new(),
            direction: Direction::Undetermined,
            state: LifecycleState::Candidate,
            created_at: cfg.detected_at,
            terminated_at: None,
            injections: 0,
            bytes_injected: 0,
            shadow: ShadowRam::new(),
        });
        self.stats.created += 1;
        events.push(LifecycleEvent::Created {
            stream_key: cfg.stream_key,
            at: cfg.detected_at,
        });
        events
    }

    /// Feeds one RAM access. Returns an injection when the access is a read
    /// inside an active input channel's perceived buffer.
    pub fn on_ram_access(
        &mut self,
        event: MemoryAccessEvent,
        provider: &mut dyn InputProvider,
    ) -> Result<Option<InjectionAction>, Exhausted> {
        debug_assert_eq!(self.profile.classify(event.addr), AddressClass::Ram);
        match event.kind {
            AccessKind::Write => {
                self.on_ram_write(event);
                Ok(None)
            }
            AccessKind::Read => self.on_ram_read(event, provider),
        }
    }

    fn on_ram_write(&mut self, event: MemoryAccessEvent) {
        let mut matched = false;
        for ch in self.channels.iter_mut().filter(|c| c.is_live()) {
            match (ch.state, ch.direction) {
                (LifecycleState::Active, Direction::Input) => {
                    let hit = ch
                        .dest_ptrs
                        .iter()
                        .any(|t| t.contains(event.addr) || t.base == event.addr);
                    if hit {
                        // The write lands in emulated RAM; keep the shadow
                        // consistent with what firmware will see there.
                        ch.shadow.overwrite(event.addr, event.width, event.value);
                        terminate(ch, TerminationReason::FirmwareWrite, event.seq);
                        self.stats.terminated_firmware_write += 1;
                        matched = true;
                    }
                }
                (LifecycleState::Candidate, _) => {
                    let near = ch
                        .ram_candidates()
                        .any(|p| in_initial_span(p, event.addr, event.width));
                    if near {
                        // Firmware filling the buffer itself: RAM-to-peripheral
                        // transfer. Recorded but never injected.
                        ch.direction = Direction::Output;
                        ch.state = LifecycleState::Active;
                        self.stats.activated_output += 1;
                        matched = true;
                    }
                }
                _ => {}
            }
        }
        if !matched {
            self.stats.reads_outside += 1;
        }
    }

    fn on_ram_read(
        &mut self,
        event: MemoryAccessEvent,
        provider: &mut dyn InputProvider,
    ) -> Result<Option<InjectionAction>, Exhausted> {
        // Pass 1: direction resolution and size inference on every live
        // channel, independent of which one ends up injecting.
        let mut any_hit = false;
        for ch in self.channels.iter_mut().filter(|c| c.is_live()) {
            if ch.state == LifecycleState::Candidate {
                let bound = ch
                    .ram_candidates()
                    .find(|&p| in_initial_span(p, event.addr, event.width));
                if let Some(dest) = bound {
                    activate_input(ch, dest);
                    self.stats.activated_input += 1;
                }
            }
            if ch.state == LifecycleState::Active && ch.direction == Direction::Input {
                for t in &mut ch.dest_ptrs {
                    if t.observe_read(event.addr, event.width) {
                        self.stats.span_hits += 1;
                        any_hit = true;
                    } else if u64::from(event.addr)
                        >= u64::from(t.base) + t.perceived_size + 2 * u64::from(event.width)
                    {
                        // Read beyond the span: the perceived buffer never
                        // grows across the gap.
                        self.stats.span_misses += 1;
                    }
                }
            }
        }

        // Pass 2: injection from the first channel whose perceived buffer
        // covers the read.
        for ch in self.channels.iter_mut().filter(|c| c.is_live()) {
            if ch.state != LifecycleState::Active || ch.direction != Direction::Input {
                continue;
            }
            if let Some(t) = ch.dest_ptrs.iter().find(|t| t.contains(event.addr)) {
                let base = t.base;
                let bytes = ch.shadow.read_through(
                    provider,
                    event.addr,
                    event.width,
                    ch.stream_key,
                    base,
                )?;
                ch.injections += 1;
                ch.bytes_injected += u64::from(event.width);
                self.stats.injections += 1;
                return Ok(Some(InjectionAction {
                    addr: event.addr,
                    bytes,
                    channel: ch.stream_key,
                    offset: event.addr.wrapping_sub(base),
                }));
            }
        }
        if !any_hit {
            self.stats.reads_outside += 1;
        }
        Ok(None)
    }

    /// Terminates every live channel. Called when the trace ends so reports
    /// are complete.
    pub fn session_end(&mut self, seq: u64) -> Vec<LifecycleEvent> {
        let mut events = Vec::new();
        for ch in self.channels.iter_mut().filter(|c| c.is_live()) {
            terminate(ch, TerminationReason::SessionEnd, seq);
            self.stats.terminated_session_end += 1;
            events.push(LifecycleEvent::Terminated {
                stream_key: ch.stream_key,
                reason: TerminationReason::SessionEnd,
                at: seq,
            });
        }
        events
    }

    /// Deep copy of all channels past and present, ordered by creation.
    pub fn snapshot(&self) -> Vec<DmaChannel> {
        self.channels.clone()
    }
}

fn terminate(ch: &mut DmaChannel, reason: TerminationReason, seq: u64) {
    ch.state = LifecycleState::Terminated(reason);
    ch.terminated_at = Some(seq);
}

/// First-access proximity rule: the size-inference span with perceived
/// size zero, so endianness-swapped first reads still bind.
fn in_initial_span(ptr: u32, addr: u32, width: u8) -> bool {
    let p = u64::from(ptr);
    let a = u64::from(addr);
    p <= a && a < p + 2 * u64::from(width)
}

fn activate_input(ch: &mut DmaChannel, first_dest: u32) {
    ch.direction = Direction::Input;
    ch.state = LifecycleState::Active;
    let non_ram_source = ch
        .pointers
        .iter()
        .find(|p| p.class != AddressClass::Ram)
        .copied();
    match non_ram_source {
        Some(src) => {
            // Peripheral- or Flash-sourced transfer: every RAM pointer is a
            // destination (several of them in circular mode).
            ch.source_ptr = Some(src);
            ch.dest_ptrs = ch
                .pointers
                .iter()
                .filter(|p| p.class == AddressClass::Ram)
                .map(|p| BufferTracker::new(p.value))
                .collect();
        }
        None => {
            // Memory-to-memory: the first pointer firmware reads through is
            // the destination, the other one the source.
            ch.source_ptr = ch
                .pointers
                .iter()
                .find(|p| p.value != first_dest)
                .copied();
            ch.dest_ptrs = vec![BufferTracker::new(first_dest)];
        }
    }
}

//! Hardware-independent DMA input channel detection for MCU firmware traces.
//!
//! The engine consumes a stream of memory-access events (the kind an emulator
//! hook would produce), detects DMA stream configurations by watching for
//! pointer pairs written to consecutive MMIO registers, tracks channel
//! lifecycles, infers buffer sizes from firmware reads, and injects
//! analyzer-supplied bytes into the detected buffers.
//!
//! Pipeline: [`memory_map`] classifies addresses, [`stream_detector`] finds
//! stream configurations in MMIO writes, [`channel_tracker`] owns channel
//! lifecycles and buffer-size inference, [`input_source`] supplies the
//! injected bytes, and [`engine`] wires it all together. [`scenario`] and
//! [`trace`] provide synthetic-firmware scripting and JSONL trace replay.

pub mod channel_tracker;
pub mod engine;
pub mod input_source;
pub mod memory_map;
pub mod report;
pub mod scenario;
pub mod serde_hex;
pub mod stream_detector;
pub mod trace;

mod event;

pub use channel_tracker::{
    BufferTracker, ChannelTracker, Direction, DmaChannel, InjectionAction, LifecycleEvent,
    LifecycleState, TerminationReason,
};
pub use engine::{Engine, EngineError, EventOutcome};
pub use event::{AccessKind, MemoryAccessEvent};
pub use input_source::{Exhaustion, InputProvider, ShadowRam, StreamProvider, ZeroProvider};
pub use memory_map::{AddressClass, AddressRange, MemoryMapProfile, ProfileError};
pub use report::ChannelReport;
pub use scenario::{Scenario, ScenarioError, ScenarioReport, ScenarioStep};
pub use stream_detector::{DetectorError, StreamConfiguration, StreamDetector};

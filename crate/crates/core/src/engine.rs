//! Wires the classifier, detector and tracker into one event-driven engine.
//!
//! The engine is the single entry point both the trace replayer and the
//! scenario runner drive: feed it [`MemoryAccessEvent`]s in order, call
//! [`Engine::finish`] at end of trace, then pull a [`ChannelReport`].

use thiserror::Error;

use crate::channel_tracker::{ChannelTracker, DmaChannel, InjectionAction, LifecycleEvent};
use crate::event::{AccessKind, MemoryAccessEvent};
use crate::input_source::{Exhausted, InputProvider};
use crate::memory_map::{AddressClass, MemoryMapProfile};
use crate::report::ChannelReport;
use crate::stream_detector::{DetectorError, StreamConfiguration, StreamDetector};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Exhausted(#[from] Exhausted),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error("event seq {seq} does not increase (previous {prev})")]
    NonMonotonicSeq { seq: u64, prev: u64 },
    #[error("invalid access width {0} (expected 1, 2 or 4)")]
    InvalidWidth(u8),
}

/// Everything one event caused, for callers that audit the run.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct EventOutcome {
    pub config: Option<StreamConfiguration>,
    pub lifecycle: Vec<LifecycleEvent>,
    pub injection: Option<InjectionAction>,
}

pub struct Engine {
    profile: MemoryMapProfile,
    detector: StreamDetector,
    tracker: ChannelTracker,
    provider: Box<dyn InputProvider>,
    configs_detected: u64,
    events_processed: u64,
    last_seq: u64,
    finished: bool,
}

impl Engine {
    pub fn new(profile: MemoryMapProfile, provider: Box<dyn InputProvider>) -> Self {
        Engine {
            detector: StreamDetector::new(profile.clone()),
            tracker: ChannelTracker::new(profile.clone()),
            profile,
            provider,
            configs_detected: 0,
            events_processed: 0,
            last_seq: 0,
            finished: false,
        }
    }

    pub fn profile(&self) -> &MemoryMapProfile {
        &self.profile
    }

    pub fn detector(&self) -> &StreamDetector {
        &self.detector
    }

    pub fn tracker(&self) -> &ChannelTracker {
        &self.tracker
    }

    pub fn configs_detected(&self) -> u64 {
        self.configs_detected
    }

    /// Routes one event: MMIO writes go to the detector, RAM accesses to the
    /// tracker, everything else is plain memory traffic and ignored.
    pub fn process_event(&mut self, event: MemoryAccessEvent) -> Result<EventOutcome, EngineError> {
        if !event.width_is_valid() {
            return Err(EngineError::InvalidWidth(event.width));
        }
        if self.events_processed > 0 && event.seq <= self.last_seq {
            return Err(EngineError::NonMonotonicSeq {
                seq: event.seq,
                prev: self.last_seq,
            });
        }
        self.last_seq = event.seq;
        self.events_processed += 1;

        let mut outcome = EventOutcome::default();
        match (event.kind, self.profile.classify(event.addr)) {
            (AccessKind::Write, AddressClass::Mmio) => {
                if let Some(cfg) = self.detector.observe_mmio_write(event)? {
                    self.configs_detected += 1;
                    outcome.lifecycle = self.tracker.on_stream_config(&cfg);
                    outcome.config = Some(cfg);
                }
            }
            (_, AddressClass::Ram) => {
                outcome.injection = self.tracker.on_ram_access(event, self.provider.as_mut())?;
            }
            _ => {}
        }
        Ok(outcome)
    }

    /// Ends the session: every live channel terminates so the report covers
    /// all of them. Idempotent.
    pub fn finish(&mut self) -> Vec<LifecycleEvent> {
        if self.finished {
            return Vec::new();
        }
        self.finished = true;
        self.tracker.session_end(self.last_seq)
    }

    pub fn snapshot(&self) -> Vec<DmaChannel> {
        self.tracker.snapshot()
    }

    pub fn report(&self) -> ChannelReport {
        ChannelReport::build(
            &self.profile.name,
            self.events_processed,
            self.configs_detected,
            &self.snapshot(),
        )
    }
}

//! Seeded discrete-event Monte-Carlo of the synchronization setup.
//!
//! Topology: two pair sources herald their signal photons through idler
//! detections. Signal-1 either goes straight to the output plane or through
//! the memory, whose storage and retrieval pulses come from the trigger
//! electronics; signal-2 always goes straight to the output plane. The output
//! plane is two detectors (direct), one path split onto both detectors (HBT)
//! or a balanced beamsplitter (HOM).
//!
//! A run is single-threaded and reproducible: identical configuration and
//! seed produce identical tags and logs.

mod beamsplitter;
mod detector;
mod engine;
mod envelope;
mod event;
mod memory;
mod rng;
mod source;
mod trigger;

pub use beamsplitter::{apply_hom_beamsplitter, Beamsplitter, Exit};
pub use detector::{apply_detector, Detector};
pub use engine::{run_sim, run_sim_into, Timing};
pub use envelope::{Envelope, ModeOverlap, ENVELOPE_CLAMP_PS};
pub use event::{EventKind, EventQueue, Payload};
pub use memory::{InputOutcome, MemoryCell};
pub use rng::{stream_rng, Stream};
pub use source::{generate_source_streams, ChannelRates, Emission, PoissonClock};
pub use trigger::{Armed, Gate, TriggerAction, TriggerInput, TriggerState};

use alloc::vec::Vec;

use crate::units::Picos;

/// Time the beamsplitter waits for a partner photon.
pub const BS_HOLD: Picos = Picos::from_ns(20);

/// Detector channel of a time tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Channel {
    Idler1 = 0,
    Idler2 = 1,
    SigA = 2,
    SigB = 3,
}

impl Channel {
    pub const ALL: [Channel; 4] = [
        Channel::Idler1,
        Channel::Idler2,
        Channel::SigA,
        Channel::SigB,
    ];

    pub const fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Channel> {
        Self::ALL.get(code as usize).copied()
    }

    pub const fn name(self) -> &'static str {
        match self {
            Channel::Idler1 => "idler1",
            Channel::Idler2 => "idler2",
            Channel::SigA => "sig_a",
            Channel::SigB => "sig_b",
        }
    }
}

/// One detector click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeTag {
    pub channel: Channel,
    /// Picoseconds since the start of the run.
    pub time: u64,
}

/// Trigger-electronics and memory events, in time order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogEntry {
    Ddg2Accept {
        time: u64,
    },
    Ddg1Accept {
        time: u64,
        ddg2_time: Option<u64>,
    },
    PcStore {
        time: u64,
    },
    PcRetrieve {
        time: u64,
        store_time: u64,
        ddg2_time: Option<u64>,
        ddg1_time: u64,
    },
}

impl LogEntry {
    pub fn time(&self) -> u64 {
        match *self {
            LogEntry::Ddg2Accept { time }
            | LogEntry::Ddg1Accept { time, .. }
            | LogEntry::PcStore { time }
            | LogEntry::PcRetrieve { time, .. } => time,
        }
    }

    /// Signed storage time of a retrieval, in ps.
    pub fn storage_time(&self) -> Option<i64> {
        match *self {
            LogEntry::PcRetrieve {
                time, store_time, ..
            } => Some(time as i64 - store_time as i64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhotonKind {
    Signal,
    OnResonant,
    OffResonant,
    MemoryNoise,
}

impl PhotonKind {
    /// Whether the photon can interfere with a signal photon.
    pub fn interferes(self) -> bool {
        matches!(self, PhotonKind::Signal | PhotonKind::OnResonant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Source,
    Retrieved,
}

/// Which fiber route a photon took, selecting the coupling at the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Direct,
    Memory,
}

/// A photon in flight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Photon {
    /// Wavepacket center at the photon's current location, ps.
    pub center: u64,
    /// Arrival offset drawn from the envelope.
    pub offset: i64,
    pub kind: PhotonKind,
    pub envelope: EnvKind,
    pub route: Route,
}

impl Photon {
    #[inline]
    pub fn time(&self) -> u64 {
        crate::units::shift(self.center, self.offset)
    }
}

/// Receiver of a run's output.
pub trait RecordSink {
    fn tag(&mut self, tag: TimeTag);
    fn log(&mut self, entry: LogEntry);
}

/// Bookkeeping of one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub seed: u64,
    pub duration_ps: u64,
    /// Equals `duration_ps` unless the event cap truncated the run.
    pub effective_duration_ps: u64,
    pub events: u64,
    pub truncated: bool,
    pub counts: [u64; 4],
    /// Photons created on the signal paths, including noise.
    pub photons_generated: u64,
    pub pair_emissions: [u64; 2],
}

impl RunSummary {
    pub fn count(&self, ch: Channel) -> u64 {
        self.counts[ch as usize]
    }

    pub fn effective_duration_s(&self) -> f64 {
        self.effective_duration_ps as f64 * 1e-12
    }
}

/// All tags and log entries of a run, held in memory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TagRecord {
    pub tags: Vec<TimeTag>,
    pub log: Vec<LogEntry>,
    pub summary: RunSummary,
}

impl TagRecord {
    /// Times of one channel, in order.
    pub fn channel(&self, ch: Channel) -> Vec<u64> {
        self.tags
            .iter()
            .filter(|t| t.channel == ch)
            .map(|t| t.time)
            .collect()
    }
}

impl RecordSink for TagRecord {
    fn tag(&mut self, tag: TimeTag) {
        self.tags.push(tag);
    }

    fn log(&mut self, entry: LogEntry) {
        self.log.push(entry);
    }
}

/// Discards everything; useful when only the summary is needed.
#[derive(Debug, Default)]
pub struct NullSink;

impl RecordSink for NullSink {
    fn tag(&mut self, _: TimeTag) {}
    fn log(&mut self, _: LogEntry) {}
}

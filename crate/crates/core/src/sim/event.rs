//! Event queue with deterministic tie-breaking.

use alloc::collections::BinaryHeap;
use core::cmp::Ordering;

use super::{Channel, Photon};

/// Event kinds in processing order for events at the same picosecond.
///
/// Detections come first, then photons reaching a component, then the trigger
/// logic, then Pockels-cell pulses, then the beamsplitter's hold expiry.
/// Emissions are generated outside the queue and always come last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[repr(u8)]
pub enum EventKind {
    Detection = 0,
    PhotonArrival = 1,
    TriggerLogic = 2,
    PcPulse = 3,
    BsResolve = 4,
    Emission = 5,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    /// A click on a detector; idler clicks also feed the trigger logic.
    Detection(Channel),
    /// A signal-path photon reaching the memory input.
    MemoryInput(Photon),
    /// A photon reaching the beamsplitter input `path` (1 or 2).
    BeamsplitterInput {
        path: u8,
        photon: Photon,
    },
    /// DDG-2 retrieval trigger, keyed by the accepting DDG-2 (or DDG-1) time.
    RetrievalTrigger {
        key: u64,
    },
    PcStore,
    PcRetrieve {
        key: u64,
    },
    /// Hold time of the oldest waiting photon on `path` has expired.
    BsResolve {
        path: u8,
    },
}

impl Payload {
    pub fn kind(&self) -> EventKind {
        match self {
            Payload::Detection(_) => EventKind::Detection,
            Payload::MemoryInput(_) | Payload::BeamsplitterInput { .. } => EventKind::PhotonArrival,
            Payload::RetrievalTrigger { .. } => EventKind::TriggerLogic,
            Payload::PcStore | Payload::PcRetrieve { .. } => EventKind::PcPulse,
            Payload::BsResolve { .. } => EventKind::BsResolve,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub time: u64,
    /// Kind priority in the top byte, insertion sequence below.
    order: u64,
    pub payload: Payload,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.order == other.order
    }
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap.
        other
            .time
            .cmp(&self.time)
            .then_with(|| other.order.cmp(&self.order))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: u64, payload: Payload) {
        let order = ((payload.kind() as u64) << 56) | self.seq;
        self.seq += 1;
        self.heap.push(Event {
            time,
            order,
            payload,
        });
    }

    pub fn peek_time(&self) -> Option<u64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_by_time_then_kind_then_sequence() {
        let mut q = EventQueue::new();
        q.push(10, Payload::PcStore);
        q.push(10, Payload::Detection(Channel::SigA));
        q.push(5, Payload::PcStore);
        q.push(10, Payload::Detection(Channel::SigB));
        q.push(10, Payload::RetrievalTrigger { key: 0 });
        let got: alloc::vec::Vec<_> = core::iter::from_fn(|| q.pop())
            .map(|e| (e.time, e.payload))
            .collect();
        assert_eq!(
            got,
            [
                (5, Payload::PcStore),
                (10, Payload::Detection(Channel::SigA)),
                (10, Payload::Detection(Channel::SigB)),
                (10, Payload::RetrievalTrigger { key: 0 }),
                (10, Payload::PcStore),
            ]
        );
    }
}

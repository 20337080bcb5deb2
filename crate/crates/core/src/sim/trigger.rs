//! Trigger electronics: DDG-2 gate, DDG-1 storage trigger, Buffer and the
//! Pockels-cell pulses.
//!
//! In synchronization mode an accepted idler-2 click opens a gate of length
//! `t*` after the insertion delay and schedules a retrieval trigger. An
//! idler-1 click inside the open gate, with DDG-1 idle, schedules the storage
//! pulse and arms the Buffer for that gate; the retrieval trigger reaches
//! PC-2 only through an armed Buffer. Each DDG ignores input while busy.

use alloc::vec::Vec;

use super::LogEntry;
use crate::error::SimError;
use crate::params::{ElectronicsParams, MemoryMode};
use crate::units::shift;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gate {
    pub open: u64,
    pub close: u64,
    pub ddg2_time: u64,
}

/// A memory operation armed in the Buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Armed {
    /// Identifies the retrieval trigger that may fire this operation.
    pub key: u64,
    pub ddg2_time: Option<u64>,
    pub ddg1_time: u64,
    pub store_time: u64,
    pub retrieve_time: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TriggerState {
    pub ddg1_busy_until: u64,
    pub ddg2_busy_until: u64,
    pub last_pc_pulse: Option<u64>,
    pub gate: Option<Gate>,
    pub pending_retrieval: Option<Armed>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerInput {
    Idler1(u64),
    Idler2(u64),
    RetrievalTrigger { time: u64, key: u64 },
    PcRetrieve { time: u64, key: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerAction {
    Log(LogEntry),
    ScheduleRetrievalTrigger {
        at: u64,
        key: u64,
    },
    /// Storage pulse scheduled; the memory learns both pulse times up front.
    ScheduleStore {
        at: u64,
        retrieve_at: u64,
    },
    ScheduleRetrieve {
        at: u64,
        key: u64,
    },
    /// PC-2 fires now on the stored contents.
    Retrieve {
        at: u64,
        store_time: u64,
    },
}

impl TriggerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Advances the state machine by one input.
    pub fn step(
        &mut self,
        input: TriggerInput,
        e: &ElectronicsParams,
        mode: MemoryMode,
        storage_time_ps: i64,
        out: &mut Vec<TriggerAction>,
    ) -> Result<(), SimError> {
        let ins = e.insertion_delay.ps();
        match (mode, input) {
            (MemoryMode::Off, _) => {}
            (MemoryMode::Sync, TriggerInput::Idler2(t)) => {
                if t >= self.ddg2_busy_until {
                    self.ddg2_busy_until = t + e.tau_d2.ps() as u64;
                    let open = shift(t, ins);
                    self.gate = Some(Gate {
                        open,
                        close: open + e.t_star.ps() as u64,
                        ddg2_time: t,
                    });
                    out.push(TriggerAction::Log(LogEntry::Ddg2Accept { time: t }));
                    out.push(TriggerAction::ScheduleRetrievalTrigger {
                        at: shift(t, ins + e.retrieval_delay.ps() + e.retrieval_trim.ps()),
                        key: t,
                    });
                }
            }
            (MemoryMode::Characterize, TriggerInput::Idler2(_)) => {}
            (MemoryMode::Sync, TriggerInput::Idler1(t)) => {
                let Some(gate) = self.gate else { return Ok(()) };
                if t < gate.open || t >= gate.close || t < self.ddg1_busy_until {
                    return Ok(());
                }
                let retrieve_at = shift(
                    gate.ddg2_time,
                    ins + e.retrieval_delay.ps() + e.retrieval_trim.ps(),
                );
                self.accept_idler1(t, Some(gate.ddg2_time), gate.ddg2_time, retrieve_at, e, out)?;
            }
            (MemoryMode::Characterize, TriggerInput::Idler1(t)) => {
                if t < self.ddg1_busy_until {
                    return Ok(());
                }
                let store = shift(t, ins + e.ddg1_delay.ps());
                let retrieve_at = shift(store, storage_time_ps);
                self.accept_idler1(t, None, t, retrieve_at, e, out)?;
                out.push(TriggerAction::ScheduleRetrievalTrigger {
                    at: retrieve_at,
                    key: t,
                });
            }
            (_, TriggerInput::RetrievalTrigger { time, key }) => {
                if matches!(self.pending_retrieval, Some(a) if a.key == key) {
                    out.push(TriggerAction::ScheduleRetrieve { at: time, key });
                }
            }
            (_, TriggerInput::PcRetrieve { time, key }) => {
                if let Some(a) = self.pending_retrieval.filter(|a| a.key == key) {
                    self.pending_retrieval = None;
                    out.push(TriggerAction::Log(LogEntry::PcRetrieve {
                        time,
                        store_time: a.store_time,
                        ddg2_time: a.ddg2_time,
                        ddg1_time: a.ddg1_time,
                    }));
                    out.push(TriggerAction::Retrieve {
                        at: time,
                        store_time: a.store_time,
                    });
                }
            }
        }
        Ok(())
    }

    fn accept_idler1(
        &mut self,
        t: u64,
        ddg2_time: Option<u64>,
        key: u64,
        retrieve_at: u64,
        e: &ElectronicsParams,
        out: &mut Vec<TriggerAction>,
    ) -> Result<(), SimError> {
        let store = shift(t, e.insertion_delay.ps() + e.ddg1_delay.ps());
        if let Some(prev) = self.last_pc_pulse {
            if store < prev + e.pc_min_spacing.ps() as u64 {
                return Err(SimError::SpacingViolation {
                    what: "pc_min_spacing",
                    previous_ps: prev,
                    next_ps: store,
                });
            }
        }
        if self.pending_retrieval.is_some() {
            return Err(SimError::SpacingViolation {
                what: "single pending retrieval",
                previous_ps: self.pending_retrieval.map_or(0, |a| a.store_time),
                next_ps: store,
            });
        }
        self.ddg1_busy_until = t + e.tau_d1.ps() as u64;
        self.last_pc_pulse = Some(store);
        self.pending_retrieval = Some(Armed {
            key,
            ddg2_time,
            ddg1_time: t,
            store_time: store,
            retrieve_time: retrieve_at,
        });
        out.push(TriggerAction::Log(LogEntry::Ddg1Accept {
            time: t,
            ddg2_time,
        }));
        out.push(TriggerAction::ScheduleStore {
            at: store,
            retrieve_at,
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SystemConfig;

    fn run(inputs: &[TriggerInput], mode: MemoryMode) -> Vec<TriggerAction> {
        let e = SystemConfig::reference_defaults().electronics;
        let mut s = TriggerState::new();
        let mut out = Vec::new();
        for &i in inputs {
            s.step(i, &e, mode, 20_000, &mut out).unwrap();
        }
        out
    }

    const NS: u64 = 1000;

    #[test]
    fn nominal_sync_operation() {
        let t2 = 1_000 * NS;
        let t1 = t2 + 50 * NS;
        let mut out = run(
            &[TriggerInput::Idler2(t2), TriggerInput::Idler1(t1)],
            MemoryMode::Sync,
        );
        assert!(out.contains(&TriggerAction::ScheduleStore {
            at: t1 + 37 * NS,
            retrieve_at: t2 + 159 * NS
        }));
        let e = SystemConfig::reference_defaults().electronics;
        let mut s = TriggerState::new();
        out.clear();
        for i in [
            TriggerInput::Idler2(t2),
            TriggerInput::Idler1(t1),
            TriggerInput::RetrievalTrigger {
                time: t2 + 159 * NS,
                key: t2,
            },
            TriggerInput::PcRetrieve {
                time: t2 + 159 * NS,
                key: t2,
            },
        ] {
            s.step(i, &e, MemoryMode::Sync, 0, &mut out).unwrap();
        }
        let stores = out
            .iter()
            .filter(|a| matches!(a, TriggerAction::ScheduleStore { .. }))
            .count();
        let retrieves = out
            .iter()
            .filter(|a| matches!(a, TriggerAction::Retrieve { .. }))
            .count();
        assert_eq!((stores, retrieves), (1, 1));
        assert!(s.pending_retrieval.is_none());
    }

    #[test]
    fn idler1_without_gate_is_ignored() {
        let out = run(&[TriggerInput::Idler1(5 * NS)], MemoryMode::Sync);
        assert!(out.is_empty());
        // Too early and too late for the gate.
        let t2 = 1000 * NS;
        for t1 in [t2 + 10 * NS, t2 + 122 * NS, t2 + 200 * NS] {
            let out = run(
                &[TriggerInput::Idler2(t2), TriggerInput::Idler1(t1)],
                MemoryMode::Sync,
            );
            assert!(
                !out.iter()
                    .any(|a| matches!(a, TriggerAction::ScheduleStore { .. })),
                "{t1}"
            );
        }
    }

    #[test]
    fn retrieval_without_armed_buffer_does_nothing() {
        let t2 = 1000 * NS;
        let out = run(
            &[
                TriggerInput::Idler2(t2),
                TriggerInput::RetrievalTrigger {
                    time: t2 + 159 * NS,
                    key: t2,
                },
            ],
            MemoryMode::Sync,
        );
        assert!(!out
            .iter()
            .any(|a| matches!(a, TriggerAction::ScheduleRetrieve { .. })));
    }

    #[test]
    fn second_idler2_within_dead_time_is_ignored() {
        let out = run(
            &[TriggerInput::Idler2(0), TriggerInput::Idler2(100 * NS)],
            MemoryMode::Sync,
        );
        let accepts = out
            .iter()
            .filter(|a| matches!(a, TriggerAction::Log(LogEntry::Ddg2Accept { .. })))
            .count();
        assert_eq!(accepts, 1);
        let out = run(
            &[TriggerInput::Idler2(0), TriggerInput::Idler2(260 * NS)],
            MemoryMode::Sync,
        );
        assert_eq!(
            out.iter()
                .filter(|a| matches!(a, TriggerAction::Log(LogEntry::Ddg2Accept { .. })))
                .count(),
            2
        );
    }

    #[test]
    fn characterize_mode_uses_fixed_storage_time() {
        let out = run(
            &[
                TriggerInput::Idler1(10 * NS),
                TriggerInput::Idler1(500 * NS),
            ],
            MemoryMode::Characterize,
        );
        assert!(out.contains(&TriggerAction::ScheduleStore {
            at: 47 * NS,
            retrieve_at: 67 * NS
        }));
        assert_eq!(
            out.iter()
                .filter(|a| matches!(a, TriggerAction::ScheduleStore { .. }))
                .count(),
            1
        );
    }
}

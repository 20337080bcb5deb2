//! The memory cell: storage, retrieval, leak-through and noise.
//!
//! Efficiencies here are referred to the photon entering the memory fiber
//! route; the detector in front of the memory output applies the memory-route
//! coupling, so `cell_scale = coupling_direct / coupling_memory` multiplies
//! every module transmission. With it, a photon that would be detected with
//! probability `η_h` through the direct route is detected with `η_h·η(t)`
//! after storage.

use alloc::vec::Vec;
use rand::Rng;

use super::{Photon, PhotonKind};
use crate::params::MemoryParams;

#[derive(Debug, Clone)]
pub struct MemoryCell {
    params: MemoryParams,
    cell_scale: f64,
    half_window: u64,
    /// Scheduled (or most recent) storage pulse and its retrieval pulse.
    store_at: Option<u64>,
    retrieve_at: Option<u64>,
    stored: bool,
    retrieved: bool,
    /// Photons captured by the current storage window.
    contents: Vec<Photon>,
}

/// What happened to a photon arriving at the memory input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputOutcome {
    Captured,
    /// Passes the module; it leaves the output with unchanged timing.
    Transmitted,
    Absorbed,
}

impl MemoryCell {
    pub fn new(params: MemoryParams, cell_scale: f64, control_window_ps: u64) -> Self {
        MemoryCell {
            params,
            cell_scale,
            half_window: control_window_ps / 2,
            store_at: None,
            retrieve_at: None,
            stored: false,
            retrieved: false,
            contents: Vec::new(),
        }
    }

    /// Announces the next operation; resets the cell.
    pub fn arm(&mut self, store_at: u64, retrieve_at: u64) {
        self.store_at = Some(store_at);
        self.retrieve_at = Some(retrieve_at);
        self.stored = false;
        self.retrieved = false;
        self.contents.clear();
    }

    /// The storage control pulse fires.
    pub fn store(&mut self, t: u64) {
        debug_assert_eq!(Some(t), self.store_at);
        self.stored = true;
    }

    pub fn holds(&self) -> usize {
        if self.stored {
            self.contents.len()
        } else {
            0
        }
    }

    fn within(&self, s: u64, pulse: Option<u64>) -> bool {
        pulse.is_some_and(|p| s.abs_diff(p) <= self.half_window)
    }

    /// Off-resonant light passes at any time with the off-resonant transmission.
    pub fn pass_off_resonant<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.random::<f64>() < self.params.t_offres() * self.cell_scale
    }

    /// An on-resonant photon reaches the memory input at time `s`.
    pub fn input<R: Rng + ?Sized>(&mut self, photon: Photon, s: u64, rng: &mut R) -> InputOutcome {
        debug_assert!(photon.kind != PhotonKind::OffResonant);
        if self.within(s, self.store_at) && !self.retrieved {
            self.contents.push(photon);
            return InputOutcome::Captured;
        }
        if self.within(s, self.retrieve_at) {
            if rng.random::<f64>() < self.params.t_retrieval() * self.cell_scale {
                return InputOutcome::Transmitted;
            }
            return InputOutcome::Absorbed;
        }
        InputOutcome::Absorbed
    }

    /// The retrieval control pulse fires at `q`; returns the emitted photons
    /// (kind only; the caller assigns timing from the retrieved envelope).
    ///
    /// Every captured photon is re-emitted with `η(q − store)·cell_scale`;
    /// with probability `ν` one noise photon is added. Before the storage
    /// pulse nothing has been stored yet, and the retrieval emits only noise.
    pub fn retrieve<R: Rng + ?Sized>(&mut self, q: u64, rng: &mut R, out: &mut Vec<PhotonKind>) {
        let store = self.store_at.unwrap_or(q);
        self.retrieved = true;
        if self.stored && q >= store {
            let t_ns = (q - store) as f64 / 1000.0;
            let p = self.params.decay.eval(t_ns) * self.cell_scale;
            for ph in self.contents.drain(..) {
                if rng.random::<f64>() < p {
                    out.push(ph.kind);
                }
            }
            self.stored = false;
        }
        if rng.random::<f64>() < self.params.nu {
            out.push(PhotonKind::MemoryNoise);
        }
    }
}

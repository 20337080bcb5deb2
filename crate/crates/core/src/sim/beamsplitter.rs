//! Balanced beamsplitter with stochastic two-photon coalescence.
//!
//! A photon arriving at one input waits up to the hold time for a partner in
//! the other input. A pair with wavepacket-center separation `Δ` coalesces
//! with probability `μ·M(Δ)` and leaves through one random port; otherwise
//! both photons choose their ports independently. Lone photons go 50/50.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use rand::Rng;

use super::envelope::{Envelope, ModeOverlap};
use super::{Channel, EnvKind, Photon, BS_HOLD};

#[derive(Debug, Clone, Copy)]
struct Waiting {
    photon: Photon,
    paired: bool,
}

/// A photon leaving the beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exit {
    pub port: Channel,
    pub photon: Photon,
}

#[derive(Debug, Clone)]
pub struct Beamsplitter {
    mu: f64,
    /// Overlaps for (source, source), (source, retrieved), (retrieved, retrieved).
    overlaps: [ModeOverlap; 3],
    cut_ps: u64,
    inputs: [VecDeque<Waiting>; 2],
}

fn port(first: bool) -> Channel {
    if first {
        Channel::SigA
    } else {
        Channel::SigB
    }
}

impl Beamsplitter {
    pub fn new(mu: f64, source: &Envelope, retrieved: &Envelope) -> Self {
        let overlaps = [
            ModeOverlap::new(source, source),
            ModeOverlap::new(source, retrieved),
            ModeOverlap::new(retrieved, retrieved),
        ];
        let cut = overlaps.iter().map(|m| m.cutoff_ps()).fold(0.0, f64::max);
        Beamsplitter {
            mu,
            overlaps,
            cut_ps: libm::ceil(cut) as u64,
            inputs: [VecDeque::new(), VecDeque::new()],
        }
    }

    /// Mode overlap of two photons, zero if either is distinguishable.
    pub fn overlap(&self, a: &Photon, b: &Photon) -> f64 {
        if !a.kind.interferes() || !b.kind.interferes() {
            return 0.0;
        }
        let table = match (a.envelope, b.envelope) {
            (EnvKind::Source, EnvKind::Source) => &self.overlaps[0],
            (EnvKind::Retrieved, EnvKind::Retrieved) => &self.overlaps[2],
            _ => &self.overlaps[1],
        };
        table.eval(a.center as f64 - b.center as f64)
    }

    /// A photon reaches input `path` (1 or 2) at its arrival time.
    ///
    /// Returns `true` if the photon waits; the caller must then call
    /// [`Beamsplitter::expire`] for this input after [`BS_HOLD`].
    pub fn arrive<R: Rng + ?Sized>(
        &mut self,
        path: u8,
        photon: Photon,
        rng: &mut R,
        out: &mut Vec<Exit>,
    ) -> bool {
        let me = (path - 1) as usize;
        let other = 1 - me;
        let mut best: Option<(usize, u64)> = None;
        for (i, w) in self.inputs[other].iter().enumerate() {
            if w.paired {
                continue;
            }
            let d = w.photon.center.abs_diff(photon.center);
            if d <= self.cut_ps && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, _)) => {
                let partner = self.inputs[other][i].photon;
                self.inputs[other][i].paired = true;
                self.pair(partner, photon, rng, out);
                false
            }
            None => {
                self.inputs[me].push_back(Waiting {
                    photon,
                    paired: false,
                });
                true
            }
        }
    }

    /// The oldest waiting photon of input `path` reached the hold time.
    pub fn expire<R: Rng + ?Sized>(&mut self, path: u8, rng: &mut R, out: &mut Vec<Exit>) {
        if let Some(w) = self.inputs[(path - 1) as usize].pop_front() {
            if !w.paired {
                out.push(Exit {
                    port: port(rng.random::<bool>()),
                    photon: w.photon,
                });
            }
        }
    }

    fn pair<R: Rng + ?Sized>(&self, a: Photon, b: Photon, rng: &mut R, out: &mut Vec<Exit>) {
        // Fixed number of draws per pair keeps the stream aligned across μ.
        let u: f64 = rng.random();
        let pa: bool = rng.random();
        let pb: bool = rng.random();
        if u < self.mu * self.overlap(&a, &b) {
            out.push(Exit {
                port: port(pa),
                photon: a,
            });
            out.push(Exit {
                port: port(pa),
                photon: b,
            });
        } else {
            out.push(Exit {
                port: port(pa),
                photon: a,
            });
            out.push(Exit {
                port: port(pb),
                photon: b,
            });
        }
    }
}

/// Runs two time-sorted photon streams through a beamsplitter.
///
/// The batch counterpart of the simulator's event-driven use; exits are
/// returned in processing order.
pub fn apply_hom_beamsplitter<R: Rng + ?Sized>(
    sig1: &[Photon],
    sig2: &[Photon],
    bs: &mut Beamsplitter,
    rng: &mut R,
) -> Vec<Exit> {
    let hold = BS_HOLD.ps() as u64;
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut pending: VecDeque<(u64, u8)> = VecDeque::new();
    loop {
        let next1 = sig1.get(i).map(|p| (p.time(), 1u8));
        let next2 = sig2.get(j).map(|p| (p.time(), 2u8));
        let arrival = match (next1, next2) {
            (Some(a), Some(b)) => Some(if b.0 < a.0 { b } else { a }),
            (a, b) => a.or(b),
        };
        let expiry = pending.front().copied();
        match (arrival, expiry) {
            (None, None) => break,
            (Some((t, _)), Some((e, p))) if e <= t => {
                pending.pop_front();
                bs.expire(p, rng, &mut out);
            }
            (None, Some((_, p))) => {
                pending.pop_front();
                bs.expire(p, rng, &mut out);
            }
            (Some((t, path)), _) => {
                let photon = if path == 1 {
                    i += 1;
                    sig1[i - 1]
                } else {
                    j += 1;
                    sig2[j - 1]
                };
                if bs.arrive(path, photon, rng, &mut out) {
                    pending.push_back((t + hold, path));
                }
            }
        }
    }
    out
}

//! The event loop.

use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::beamsplitter::{Beamsplitter, Exit};
use super::detector::Detector;
use super::envelope::Envelope;
use super::event::{EventQueue, Payload};
use super::memory::{InputOutcome, MemoryCell};
use super::rng::{stream_rng, Stream};
use super::source::{ChannelRates, PoissonClock};
use super::trigger::{TriggerAction, TriggerInput, TriggerState};
use super::{
    Channel, EnvKind, Photon, PhotonKind, RecordSink, Route, RunSummary, TagRecord, TimeTag,
    BS_HOLD,
};
use crate::error::{ModelError, SimError};
use crate::params::{MemoryMode, Routing, SystemConfig};
use crate::units::{shift, PS_PER_S};

/// Fixed path delays of the setup, derived from the configuration.
///
/// Emission at `e`: the idler clicks at `e + idler_delay`, signal-1 reaches the
/// memory at `e + memory_input`, and un-stored signal photons reach the
/// output plane at `e + output`. The direct signal-1 route is matched to
/// signal-2, and signal-2 is matched to a photon retrieved by the nominal
/// retrieval trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timing {
    pub idler_delay: i64,
    pub memory_input: i64,
    pub output: i64,
    pub memory_output: i64,
    pub detector: i64,
}

impl Timing {
    pub fn new(c: &SystemConfig) -> Self {
        let e = &c.electronics;
        let s = &c.sim;
        Timing {
            idler_delay: s.idler_delay.ps(),
            memory_input: s.idler_delay.ps() + e.insertion_delay.ps() + e.ddg1_delay.ps(),
            output: s.idler_delay.ps()
                + e.insertion_delay.ps()
                + e.retrieval_delay.ps()
                + s.memory_output_delay.ps(),
            memory_output: s.memory_output_delay.ps(),
            detector: s.detector_delay.ps(),
        }
    }

    /// Nominal delay from an idler click to the click of its un-stored signal.
    pub fn herald_to_signal(&self) -> i64 {
        self.output - self.idler_delay + self.detector
    }
}

struct Rngs {
    source: [ChaCha8Rng; 2],
    on_res: [ChaCha8Rng; 2],
    off_res: [ChaCha8Rng; 2],
    memory: ChaCha8Rng,
    det_idler: [ChaCha8Rng; 2],
    det_sig: [ChaCha8Rng; 2],
    bs: ChaCha8Rng,
}

impl Rngs {
    fn new(seed: u64) -> Self {
        let r = |s| stream_rng(seed, s);
        Rngs {
            source: [r(Stream::Source1), r(Stream::Source2)],
            on_res: [r(Stream::OnRes1), r(Stream::OnRes2)],
            off_res: [r(Stream::OffRes1), r(Stream::OffRes2)],
            memory: r(Stream::Memory),
            det_idler: [r(Stream::DetIdler1), r(Stream::DetIdler2)],
            det_sig: [r(Stream::DetSigA), r(Stream::DetSigB)],
            bs: r(Stream::BeamSplitter),
        }
    }
}

/// Generators outside the queue, in tie-break order.
#[derive(Clone, Copy)]
enum Gen {
    Pair(usize),
    OnRes(usize),
    OffRes(usize),
}

const GENS: [Gen; 6] = [
    Gen::Pair(0),
    Gen::Pair(1),
    Gen::OnRes(0),
    Gen::OnRes(1),
    Gen::OffRes(0),
    Gen::OffRes(1),
];

struct Engine<'c, S: RecordSink> {
    cfg: &'c SystemConfig,
    sink: &'c mut S,
    timing: Timing,
    now: u64,
    queue: EventQueue,
    clocks: [PoissonClock; 6],
    rngs: Rngs,
    rates: [ChannelRates; 2],
    source_env: Envelope,
    retrieved_env: Envelope,
    trigger: TriggerState,
    memory: MemoryCell,
    bs: Option<Beamsplitter>,
    idler_det: Detector,
    sig_det: Detector,
    actions: Vec<TriggerAction>,
    exits: Vec<Exit>,
    kinds: Vec<PhotonKind>,
    summary: RunSummary,
}

fn validate_timing(c: &SystemConfig) -> Result<(), ModelError> {
    let e = &c.electronics;
    match c.sim.mode {
        MemoryMode::Sync => {
            let lag = e.retrieval_delay.ps() + e.retrieval_trim.ps();
            if lag < e.t_star.ps() {
                return Err(ModelError::OutOfRange {
                    name: "electronics.retrieval_delay",
                    value: lag as f64,
                    expected: "retrieval_delay + retrieval_trim >= t_star (retrieval after the gate closes)",
                });
            }
        }
        MemoryMode::Characterize => {
            if c.sim.storage_time >= e.tau_d1 {
                return Err(ModelError::OutOfRange {
                    name: "sim.storage_time",
                    value: c.sim.storage_time.ps() as f64,
                    expected: "< electronics.tau_d1",
                });
            }
        }
        MemoryMode::Off => {}
    }
    Ok(())
}

/// Runs one simulation and collects all output in memory.
pub fn run_sim(config: &SystemConfig, seed: u64, duration_s: f64) -> Result<TagRecord, SimError> {
    let mut rec = TagRecord::default();
    let summary = run_sim_into(config, seed, duration_s, &mut rec)?;
    rec.summary = summary;
    Ok(rec)
}

/// Runs one simulation, streaming tags and log entries into `sink`.
///
/// Emissions stop at `duration_s`; photons already in flight are followed to
/// the end, so the last tags may lie slightly past the duration.
pub fn run_sim_into<S: RecordSink>(
    config: &SystemConfig,
    seed: u64,
    duration_s: f64,
    sink: &mut S,
) -> Result<RunSummary, SimError> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(SimError::NonPositiveDuration);
    }
    config.validate()?;
    validate_timing(config)?;
    let duration_ps = libm::round(duration_s * PS_PER_S as f64) as u64;
    let mut engine = Engine::new(config, seed, sink);
    engine.summary.duration_ps = duration_ps;
    engine.run(duration_ps)?;
    Ok(engine.summary)
}

impl<'c, S: RecordSink> Engine<'c, S> {
    fn new(cfg: &'c SystemConfig, seed: u64, sink: &'c mut S) -> Self {
        let mut rngs = Rngs::new(seed);
        let window = cfg.sim.control_window.ps() as f64;
        let rates = [
            ChannelRates::derive(&cfg.source, &cfg.detector, window, 1),
            ChannelRates::derive(&cfg.source, &cfg.detector, window, 2),
        ];
        let clocks = [
            PoissonClock::new(rates[0].pairs, &mut rngs.source[0]),
            PoissonClock::new(rates[1].pairs, &mut rngs.source[1]),
            PoissonClock::new(rates[0].on_resonant, &mut rngs.on_res[0]),
            PoissonClock::new(rates[1].on_resonant, &mut rngs.on_res[1]),
            PoissonClock::new(rates[0].off_resonant, &mut rngs.off_res[0]),
            PoissonClock::new(rates[1].off_resonant, &mut rngs.off_res[1]),
        ];
        let source_env = Envelope::new(cfg.sim.envelope, cfg.source.pulse_fwhm.ps() as f64);
        let retrieved_env = Envelope::new(cfg.sim.envelope, cfg.sim.retrieved_fwhm.ps() as f64);
        let bs = (cfg.sim.routing == Routing::Hom)
            .then(|| Beamsplitter::new(cfg.sim.indistinguishability, &source_env, &retrieved_env));
        Engine {
            cfg,
            sink,
            timing: Timing::new(cfg),
            now: 0,
            queue: EventQueue::new(),
            clocks,
            rngs,
            rates,
            source_env,
            retrieved_env,
            trigger: TriggerState::new(),
            memory: MemoryCell::new(
                cfg.memory.clone(),
                cfg.detector.coupling_correction(),
                cfg.sim.control_window.ps() as u64,
            ),
            bs,
            idler_det: Detector::lossless(cfg.detector.jitter_sigma_ps),
            sig_det: Detector::from_params(&cfg.detector),
            actions: Vec::new(),
            exits: Vec::new(),
            kinds: Vec::new(),
            summary: RunSummary {
                seed,
                ..RunSummary::default()
            },
        }
    }

    fn memory_in_path(&self) -> bool {
        self.cfg.sim.mode != MemoryMode::Off
    }

    fn run(&mut self, duration_ps: u64) -> Result<(), SimError> {
        let cap = self.cfg.sim.event_cap;
        loop {
            if self.summary.events >= cap {
                self.summary.truncated = true;
                break;
            }
            let mut gen = 0;
            let mut tg = self.clocks[0].peek();
            for (i, c) in self.clocks.iter().enumerate().skip(1) {
                let t = c.peek();
                if t < tg {
                    tg = t;
                    gen = i;
                }
            }
            let emit = tg < duration_ps && self.queue.peek_time().is_none_or(|th| tg < th);
            if emit {
                self.now = tg;
                self.emission(gen)?;
            } else if let Some(ev) = self.queue.pop() {
                debug_assert!(ev.time >= self.now);
                self.now = ev.time;
                self.dispatch(ev.payload)?;
            } else {
                break;
            }
            self.summary.events += 1;
        }
        self.summary.effective_duration_ps = if self.summary.truncated {
            self.now.min(duration_ps)
        } else {
            duration_ps
        };
        Ok(())
    }

    fn push(&mut self, t: u64, p: Payload) {
        self.queue.push(t.max(self.now), p);
    }

    fn emission(&mut self, gen: usize) -> Result<(), SimError> {
        match GENS[gen] {
            Gen::Pair(j) => {
                let e = self.clocks[gen].advance(&mut self.rngs.source[j]);
                self.summary.pair_emissions[j] += 1;
                let jit = self.idler_det.jitter(&mut self.rngs.det_idler[j]);
                let ch = if j == 0 {
                    Channel::Idler1
                } else {
                    Channel::Idler2
                };
                self.push(
                    shift(e + self.timing.idler_delay as u64, jit),
                    Payload::Detection(ch),
                );
                let rng = &mut self.rngs.source[j];
                if rng.random::<f64>() < self.rates[j].signal_probability {
                    let offset = self.source_env.sample(rng);
                    let photon = Photon {
                        center: e,
                        offset,
                        kind: PhotonKind::Signal,
                        envelope: EnvKind::Source,
                        route: Route::Direct,
                    };
                    self.emit_from_source(j, photon);
                }
            }
            Gen::OnRes(j) => {
                let e = self.clocks[gen].advance(&mut self.rngs.on_res[j]);
                let photon = Photon {
                    center: e,
                    offset: 0,
                    kind: PhotonKind::OnResonant,
                    envelope: EnvKind::Source,
                    route: Route::Direct,
                };
                self.emit_from_source(j, photon);
            }
            Gen::OffRes(j) => {
                let e = self.clocks[gen].advance(&mut self.rngs.off_res[j]);
                self.summary.photons_generated += 1;
                let mut photon = Photon {
                    center: e,
                    offset: 0,
                    kind: PhotonKind::OffResonant,
                    envelope: EnvKind::Source,
                    route: Route::Direct,
                };
                if j == 0 && self.memory_in_path() {
                    if self.memory.pass_off_resonant(&mut self.rngs.memory) {
                        photon.center =
                            e + (self.timing.memory_input + self.timing.memory_output) as u64;
                        photon.route = Route::Memory;
                        self.reach_output(1, photon);
                    }
                } else if !(j == 1 && self.cfg.sim.routing == Routing::Hbt) {
                    photon.center = e + self.timing.output as u64;
                    self.reach_output(j as u8 + 1, photon);
                }
            }
        }
        Ok(())
    }

    /// Routes an on-resonant photon leaving source `j` at its emission time.
    fn emit_from_source(&mut self, j: usize, mut photon: Photon) {
        self.summary.photons_generated += 1;
        if j == 0 && self.memory_in_path() {
            photon.center += self.timing.memory_input as u64;
            photon.route = Route::Memory;
            self.push(photon.time(), Payload::MemoryInput(photon));
        } else if j == 1 && self.cfg.sim.routing == Routing::Hbt {
            // Signal path 2 is not connected in the HBT configuration.
        } else {
            photon.center += self.timing.output as u64;
            self.reach_output(j as u8 + 1, photon);
        }
    }

    /// A photon reaches the output plane on signal path `path`.
    fn reach_output(&mut self, path: u8, photon: Photon) {
        match self.cfg.sim.routing {
            Routing::Direct => {
                let ch = if path == 1 {
                    Channel::SigA
                } else {
                    Channel::SigB
                };
                self.detect(ch, photon);
            }
            Routing::Hbt => {
                let ch = if self.rngs.bs.random::<bool>() {
                    Channel::SigA
                } else {
                    Channel::SigB
                };
                self.detect(ch, photon);
            }
            Routing::Hom => self.push(photon.time(), Payload::BeamsplitterInput { path, photon }),
        }
    }

    fn detect(&mut self, ch: Channel, photon: Photon) {
        let coupling = match photon.route {
            Route::Direct => self.cfg.detector.coupling_direct,
            Route::Memory => self.cfg.detector.coupling_memory,
        };
        let k = if ch == Channel::SigA { 0 } else { 1 };
        let arrival = shift(photon.time(), self.timing.detector);
        if let Some(t) = self
            .sig_det
            .detect(arrival, coupling, &mut self.rngs.det_sig[k])
        {
            self.push(t, Payload::Detection(ch));
        }
    }

    fn dispatch(&mut self, payload: Payload) -> Result<(), SimError> {
        let now = self.now;
        match payload {
            Payload::Detection(ch) => {
                self.summary.counts[ch as usize] += 1;
                self.sink.tag(TimeTag {
                    channel: ch,
                    time: now,
                });
                match ch {
                    Channel::Idler1 => self.trigger_step(TriggerInput::Idler1(now))?,
                    Channel::Idler2 => self.trigger_step(TriggerInput::Idler2(now))?,
                    _ => {}
                }
            }
            Payload::MemoryInput(mut photon) => {
                if self.memory.input(photon, now, &mut self.rngs.memory)
                    == InputOutcome::Transmitted
                {
                    photon.center += self.timing.memory_output as u64;
                    self.reach_output(1, photon);
                }
            }
            Payload::BeamsplitterInput { path, photon } => {
                let bs = self.bs.as_mut().expect("beamsplitter routing");
                let mut exits = core::mem::take(&mut self.exits);
                if bs.arrive(path, photon, &mut self.rngs.bs, &mut exits) {
                    self.push(now + BS_HOLD.ps() as u64, Payload::BsResolve { path });
                }
                self.flush_exits(&mut exits);
                self.exits = exits;
            }
            Payload::BsResolve { path } => {
                let bs = self.bs.as_mut().expect("beamsplitter routing");
                let mut exits = core::mem::take(&mut self.exits);
                bs.expire(path, &mut self.rngs.bs, &mut exits);
                self.flush_exits(&mut exits);
                self.exits = exits;
            }
            Payload::RetrievalTrigger { key } => {
                self.trigger_step(TriggerInput::RetrievalTrigger { time: now, key })?
            }
            Payload::PcRetrieve { key } => {
                self.trigger_step(TriggerInput::PcRetrieve { time: now, key })?
            }
            Payload::PcStore => {
                self.sink.log(super::LogEntry::PcStore { time: now });
                self.memory.store(now);
            }
        }
        Ok(())
    }

    fn flush_exits(&mut self, exits: &mut Vec<Exit>) {
        for x in exits.drain(..) {
            self.detect(x.port, x.photon);
        }
    }

    fn trigger_step(&mut self, input: TriggerInput) -> Result<(), SimError> {
        let mut actions = core::mem::take(&mut self.actions);
        self.trigger.step(
            input,
            &self.cfg.electronics,
            self.cfg.sim.mode,
            self.cfg.sim.storage_time.ps(),
            &mut actions,
        )?;
        for a in actions.drain(..) {
            match a {
                TriggerAction::Log(entry) => self.sink.log(entry),
                TriggerAction::ScheduleRetrievalTrigger { at, key } => {
                    self.push(at, Payload::RetrievalTrigger { key })
                }
                TriggerAction::ScheduleStore { at, retrieve_at } => {
                    self.memory.arm(at, retrieve_at);
                    self.push(at, Payload::PcStore);
                }
                TriggerAction::ScheduleRetrieve { at, key } => {
                    self.push(at, Payload::PcRetrieve { key })
                }
                TriggerAction::Retrieve { at, .. } => self.retrieve(at),
            }
        }
        self.actions = actions;
        Ok(())
    }

    fn retrieve(&mut self, at: u64) {
        let mut kinds = core::mem::take(&mut self.kinds);
        self.memory.retrieve(at, &mut self.rngs.memory, &mut kinds);
        for kind in kinds.drain(..) {
            if kind == PhotonKind::MemoryNoise {
                self.summary.photons_generated += 1;
            }
            let offset = self.retrieved_env.sample(&mut self.rngs.memory);
            let photon = Photon {
                center: at + self.timing.memory_output as u64,
                offset,
                kind,
                envelope: EnvKind::Retrieved,
                route: Route::Memory,
            };
            self.reach_output(1, photon);
        }
        self.kinds = kinds;
    }
}

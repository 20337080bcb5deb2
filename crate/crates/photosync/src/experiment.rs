//! Measurement procedures: simulate a configuration and analyze it the way
//! the experiment would.
//!
//! Every procedure is deterministic in its seed. Coincidence windows are
//! located on a short pilot run with a derived seed and then frozen, so the
//! measured run is analyzed in a single streaming pass.

use photosync_core::analysis::{
    temporal_overlap_estimate, Anchor, AnchorTask, BinSpec, Chunked, DecayCurve, DecayPoint,
    DecayTask, ElectronicsRates, G2Counts, G2Task, HistTask, HomScan, HomStocTask, HomSyncTask,
    LogCounts, Offsets, StocTask, SyncTask, TagSet, WindowSpec,
};
use photosync_core::model::{Estimate, RatesReport};
use photosync_core::sim::{run_sim, run_sim_into, Channel, RunSummary, Timing};
use photosync_core::units::Picos;
use photosync_core::{MemoryMode, Routing, SystemConfig};

use crate::{Error, Result};

/// Simulated time of the window-locating pilot runs.
pub const PILOT_SECONDS: f64 = 0.5;
const PILOT_SALT: u64 = 0x5bd1_e995_9e37_79b9;

/// A copy of `cfg` in the given operating mode and routing.
pub fn setup(cfg: &SystemConfig, mode: MemoryMode, routing: Routing) -> SystemConfig {
    let mut c = cfg.clone();
    c.sim.mode = mode;
    c.sim.routing = routing;
    c
}

/// Seed of the `k`-th run of a procedure.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Nominal window offsets of a configuration, used where a pilot histogram has no peak.
pub fn nominal_offsets(cfg: &SystemConfig) -> Offsets {
    let t = Timing::new(cfg);
    Offsets::uniform(t.herald_to_signal(), t.memory_output + t.detector)
}

/// Windows located on a pilot run of `cfg`.
pub fn pilot_windows(cfg: &SystemConfig, seed: u64) -> Result<WindowSpec> {
    let rec = run_sim(cfg, seed ^ PILOT_SALT, PILOT_SECONDS)?;
    let set = TagSet::from_record(&rec);
    Ok(WindowSpec::locate(
        &set.view(),
        nominal_offsets(cfg),
        rec.summary.duration_ps,
    ))
}

/// Result of one streamed run.
#[derive(Debug, Clone)]
pub struct Streamed<T> {
    pub task: T,
    pub log: LogCounts,
    pub summary: RunSummary,
}

/// Simulates and analyzes in one pass, without keeping the tags.
pub fn stream_run<T: AnchorTask>(
    cfg: &SystemConfig,
    seed: u64,
    duration_s: f64,
    task: T,
) -> Result<Streamed<T>> {
    let end = (duration_s * 1e12).round().max(0.0) as u64;
    let mut sink = Chunked::new(task, cfg.electronics.clone(), end);
    let summary = run_sim_into(cfg, seed, duration_s, &mut sink)?;
    if summary.truncated {
        return Err(Error::Truncated {
            events: summary.events,
        });
    }
    let (task, log) = sink.finish();
    Ok(Streamed { task, log, summary })
}

/// Measured rates of one operating point.
#[derive(Debug, Clone)]
pub struct RatesPoint {
    pub report: RatesReport,
    pub stoc_pairs: u64,
    pub sync_pairs: u64,
    pub log: LogCounts,
    pub summaries: [RunSummary; 2],
}

/// Measures `R_stoc` with the memory off and `R_sync` plus the electronics
/// rates with synchronization on, as two independent runs.
pub fn measure_rates(cfg: &SystemConfig, seed: u64, duration_s: f64) -> Result<RatesPoint> {
    let off = setup(cfg, MemoryMode::Off, Routing::Direct);
    let w = pilot_windows(&off, derive_seed(seed, 0))?;
    let stoc = stream_run(&off, derive_seed(seed, 1), duration_s, StocTask::new(w))?;

    let on = setup(cfg, MemoryMode::Sync, Routing::Direct);
    let w = pilot_windows(&on, derive_seed(seed, 2))?;
    let sync = stream_run(&on, derive_seed(seed, 3), duration_s, SyncTask::new(w))?;

    let k = cfg.detector.coupling_correction();
    let r_stoc =
        Estimate::poisson_rate(stoc.task.coincidences, stoc.summary.effective_duration_s());
    let raw = Estimate::poisson_rate(sync.task.coincidences, sync.summary.effective_duration_s());
    let r_sync = Estimate::new(raw.value * k, raw.stderr * k);
    let el = ElectronicsRates::from_counts(
        &sync.log,
        &cfg.electronics,
        sync.summary.effective_duration_s(),
    );
    let report = RatesReport {
        r_stoc: Some(r_stoc),
        r_sync: Some(r_sync),
        zeta: (r_stoc.value > 0.0).then(|| r_sync.ratio(&r_stoc)),
        r_trig2: Some(el.r_trig2),
        r_sync_trials: Some(el.r_sync_trials),
        downtime: Some(el.downtime),
        ..Default::default()
    };
    // Electronics counts come from the synchronized run; spacing checks cover both.
    let mut log = sync.log.clone();
    log.spacing_violations += stoc.log.spacing_violations;
    Ok(RatesPoint {
        report,
        stoc_pairs: stoc.task.coincidences,
        sync_pairs: sync.task.coincidences,
        log,
        summaries: [stoc.summary, sync.summary],
    })
}

/// Heralded g² of photons retrieved after a fixed storage time.
pub fn measure_g2_after_memory(
    cfg: &SystemConfig,
    storage: Picos,
    seed: u64,
    duration_s: f64,
) -> Result<(G2Counts, LogCounts)> {
    let mut c = setup(cfg, MemoryMode::Characterize, Routing::Hbt);
    c.sim.storage_time = storage;
    let w = pilot_windows(&c, derive_seed(seed, 0))?;
    let r = stream_run(&c, derive_seed(seed, 1), duration_s, G2Task::retrieval(w))?;
    Ok((r.task.counts, r.log))
}

/// Heralded g² of the source without the memory.
pub fn measure_source_g2(cfg: &SystemConfig, seed: u64, duration_s: f64) -> Result<G2Counts> {
    let c = setup(cfg, MemoryMode::Off, Routing::Hbt);
    let w = pilot_windows(&c, derive_seed(seed, 0))?;
    Ok(
        stream_run(&c, derive_seed(seed, 1), duration_s, G2Task::idler1(w))?
            .task
            .counts,
    )
}

/// Storage time, in 1/e lifetimes, of the background run of [`measure_decay`].
pub const BACKGROUND_LIFETIMES: f64 = 5.0;

/// Efficiency against storage time, one run per storage time, after
/// subtracting the background measured at [`BACKGROUND_LIFETIMES`].
pub fn measure_decay(
    cfg: &SystemConfig,
    storage_ns: &[f64],
    seed: u64,
    duration_s: f64,
) -> Result<(DecayCurve, LogCounts)> {
    let mut c = setup(cfg, MemoryMode::Characterize, Routing::Direct);
    let offset = pilot_windows(&c, derive_seed(seed, 0))?
        .offsets
        .retrieval_sig_a;
    let mut log = LogCounts::default();
    let mut point = |t: f64, k: u64| -> Result<Option<DecayPoint>> {
        c.sim.storage_time = Picos::from_ns_f64(t);
        let span = c.sim.storage_time.ps() as u64 + 1;
        let task = DecayTask::new(WindowSpec::new(Offsets::default()), offset, span, span);
        let r = stream_run(&c, derive_seed(seed, k), duration_s, task)?;
        log.spacing_violations += r.log.spacing_violations;
        Ok(r.task
            .curve(cfg.source.eta_h1)
            .points
            .first()
            .map(|p| DecayPoint {
                storage_ns: t,
                ..*p
            }))
    };
    // With the memory emptied by decoherence only uncorrelated light lands
    // in the retrieval window.
    let background = point(BACKGROUND_LIFETIMES * cfg.memory.decay.lifetime_ns(), 1)?
        .map_or(Estimate::new(0.0, 0.0), |p| p.efficiency);
    let mut curve = DecayCurve::default();
    for (k, &t) in storage_ns.iter().enumerate() {
        match point(t, 2 + k as u64)? {
            Some(p) => curve.points.push(p),
            None => curve.empty_bins += 1,
        }
    }
    curve.subtract_background(background);
    Ok((curve, log))
}

/// Interference of two heralded sources, binned by idler delay.
pub fn measure_hom_stoc(
    cfg: &SystemConfig,
    seed: u64,
    duration_s: f64,
) -> Result<(HomScan, LogCounts)> {
    let c = setup(cfg, MemoryMode::Off, Routing::Hom);
    let w = pilot_windows(&c, derive_seed(seed, 0))?;
    let r = stream_run(
        &c,
        derive_seed(seed, 1),
        duration_s,
        HomStocTask::standard(w),
    )?;
    Ok((r.task.scan(), r.log))
}

/// Interference of retrieved and second-source photons, one run per
/// retrieval delay.
pub fn measure_hom_sync(
    cfg: &SystemConfig,
    delays_ps: &[i64],
    seed: u64,
    duration_s: f64,
) -> Result<(HomScan, LogCounts)> {
    let mut c = setup(cfg, MemoryMode::Sync, Routing::Hom);
    c.electronics.retrieval_trim = Picos::ZERO;
    let offset = pilot_windows(&c, derive_seed(seed, 0))?
        .offsets
        .idler2_sig_a;
    let mut scan = HomScan::default();
    let mut log = LogCounts::default();
    for (k, &d) in delays_ps.iter().enumerate() {
        c.electronics.retrieval_trim = Picos::from_ps(d);
        let task = HomSyncTask::new(WindowSpec::new(Offsets::default()), offset, d);
        let r = stream_run(&c, derive_seed(seed, 1 + k as u64), duration_s, task)?;
        log.spacing_violations += r.log.spacing_violations;
        scan.points.push(r.task.point());
    }
    Ok((scan, log))
}

/// Temporal overlap of the retrieved-photon and reference-photon arrival
/// histograms, both relative to the idler-2 herald and restricted to the
/// reference window.
pub fn measure_overlap(cfg: &SystemConfig, seed: u64, duration_s: f64) -> Result<Estimate> {
    let c = setup(cfg, MemoryMode::Sync, Routing::Direct);
    let w = pilot_windows(&c, derive_seed(seed, 0))?;
    let center = w.offsets.idler2_sig_b;
    let half = (w.herald_window / 2) as i64;
    let spec = BinSpec {
        bin_width: 100,
        t_min: center - 10_000,
        t_max: center + 10_000,
    };
    let tasks = (
        HistTask::new(Anchor::OpIdler2, Channel::SigA, spec),
        HistTask::new(Anchor::OpIdler2, Channel::SigB, spec),
    );
    let r = stream_run(&c, derive_seed(seed, 1), duration_s, tasks)?;
    let a = r.task.0.hist.restricted(center - half, center + half);
    let b = r.task.1.hist.restricted(center - half, center + half);
    Ok(temporal_overlap_estimate(&a, &b)?)
}

/// Indistinguishability factor reproducing a target two-source visibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuCalibration {
    pub v_at_0: Estimate,
    pub v_at_1: Estimate,
    pub mu: f64,
}

/// The two-source visibility is linear in μ (coalescence is drawn with
/// probability μ·overlap), so two runs at μ = 0 and μ = 1 with common
/// random numbers fix the μ that gives `target`.
pub fn calibrate_mu(
    cfg: &SystemConfig,
    target: f64,
    seed: u64,
    duration_s: f64,
) -> Result<MuCalibration> {
    let mut c = cfg.clone();
    c.sim.indistinguishability = 0.0;
    let v0 = measure_hom_stoc(&c, seed, duration_s)?.0.visibility()?;
    c.sim.indistinguishability = 1.0;
    let v1 = measure_hom_stoc(&c, seed, duration_s)?.0.visibility()?;
    let mu = if v1.value > v0.value {
        ((target - v0.value) / (v1.value - v0.value)).clamp(0.0, 1.0)
    } else {
        cfg.sim.indistinguishability
    };
    Ok(MuCalibration {
        v_at_0: v0,
        v_at_1: v1,
        mu,
    })
}

/// SHA-256 of the PTAG encoding of a run, for determinism checks.
pub fn run_digest(cfg: &SystemConfig, seed: u64, duration_s: f64) -> Result<String> {
    use sha2::{Digest, Sha256};
    let rec = run_sim(cfg, seed, duration_s)?;
    let bytes = crate::tagfile::encode(&rec.tags, crate::tagfile::TagFormat::Ptag)
        .map_err(Error::io("encoding tags"))?;
    let mut h = Sha256::new();
    h.update(&bytes);
    for e in &rec.log {
        h.update(format!("{e:?}").as_bytes());
    }
    Ok(crate::config::hex(&h.finalize()))
}

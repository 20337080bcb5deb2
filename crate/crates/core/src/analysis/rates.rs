//! Pair rates and electronics rates.

use super::{op_range, time_range, AnchorTask, TagSet, TagView, WindowSpec};
use crate::error::AnalysisError;
use crate::model::{Estimate, RatesReport};
use crate::params::ElectronicsParams;
use crate::sim::{Channel, LogEntry};
use crate::units::PS_PER_S;

/// Idler-idler coincidences (within the accidental window) that have a
/// signal click in both herald windows.
#[derive(Debug, Clone)]
pub struct StocTask {
    pub windows: WindowSpec,
    pub idler_pairs: u64,
    pub coincidences: u64,
}

impl StocTask {
    pub fn new(windows: WindowSpec) -> Self {
        StocTask {
            windows,
            idler_pairs: 0,
            coincidences: 0,
        }
    }
}

impl AnchorTask for StocTask {
    fn process(&mut self, view: &TagView<'_>, lo: u64, hi: u64) {
        let i2s = view.channel(Channel::Idler2);
        let sa = view.channel(Channel::SigA);
        let sb = view.channel(Channel::SigB);
        let acc = self.windows.accidental_window;
        let o = self.windows.offsets;
        for &i1 in time_range(view.channel(Channel::Idler1), lo, hi) {
            for &i2 in time_range(i2s, i1.saturating_sub(acc), i1 + acc + 1) {
                self.idler_pairs += 1;
                if self.windows.hit(sa, i1, o.idler1_sig_a)
                    && self.windows.hit(sb, i2, o.idler2_sig_b)
                {
                    self.coincidences += 1;
                }
            }
        }
    }
}

/// Memory operations whose idler-2 herald is followed by a retrieved photon
/// on SigA and a second signal photon on SigB.
#[derive(Debug, Clone)]
pub struct SyncTask {
    pub windows: WindowSpec,
    pub ops: u64,
    pub coincidences: u64,
}

impl SyncTask {
    pub fn new(windows: WindowSpec) -> Self {
        SyncTask {
            windows,
            ops: 0,
            coincidences: 0,
        }
    }
}

impl AnchorTask for SyncTask {
    fn process(&mut self, view: &TagView<'_>, lo: u64, hi: u64) {
        let sa = view.channel(Channel::SigA);
        let sb = view.channel(Channel::SigB);
        let o = self.windows.offsets;
        for op in op_range(view.ops, lo, hi, |o| o.ddg2_time.unwrap_or(o.ddg1_time)) {
            let Some(i2) = op.ddg2_time else { continue };
            self.ops += 1;
            if self.windows.hit(sa, i2, o.idler2_sig_a) && self.windows.hit(sb, i2, o.idler2_sig_b)
            {
                self.coincidences += 1;
            }
        }
    }
}

/// Counts of logged electronics events, with a check of the dead times.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LogCounts {
    pub ddg2: u64,
    pub ddg1: u64,
    pub stores: u64,
    pub retrievals: u64,
    /// Consecutive accepted triggers or storage pulses closer than allowed.
    pub spacing_violations: u64,
    last: [Option<u64>; 3],
}

impl LogCounts {
    /// Counts one entry if it happened before `end_ps`.
    pub fn observe(&mut self, entry: &LogEntry, e: &ElectronicsParams, end_ps: u64) {
        let t = entry.time();
        if t >= end_ps {
            return;
        }
        let (slot, spacing) = match entry {
            LogEntry::Ddg2Accept { .. } => {
                self.ddg2 += 1;
                (0, e.tau_d2)
            }
            LogEntry::Ddg1Accept { .. } => {
                self.ddg1 += 1;
                (1, e.tau_d1)
            }
            LogEntry::PcStore { .. } => {
                self.stores += 1;
                (2, e.pc_min_spacing)
            }
            LogEntry::PcRetrieve { .. } => {
                self.retrievals += 1;
                return;
            }
        };
        if let Some(prev) = self.last[slot] {
            if t < prev || t - prev < spacing.ps() as u64 {
                self.spacing_violations += 1;
            }
        }
        self.last[slot] = Some(t);
    }

    pub fn from_log(log: &[LogEntry], e: &ElectronicsParams, end_ps: u64) -> Self {
        let mut c = LogCounts::default();
        for entry in log {
            c.observe(entry, e, end_ps);
        }
        c
    }
}

/// Trigger rate, trial rate and memory downtime measured from the log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectronicsRates {
    pub r_trig2: Estimate,
    pub r_sync_trials: Estimate,
    pub downtime: Estimate,
}

impl ElectronicsRates {
    pub fn from_counts(c: &LogCounts, e: &ElectronicsParams, duration_s: f64) -> Self {
        let d1 = e.tau_d1.as_secs();
        let d2 = e.tau_d2.as_secs();
        let n1 = c.ddg1 as f64;
        let n2 = c.ddg2 as f64;
        // Idle time is d2 per rejected trigger and d1 per accepted trial;
        // N2 and N1 are treated as Poisson with N1 nested in N2.
        let downtime = ((n2 - n1) * d2 + n1 * d1) / duration_s;
        let var = (d2 / duration_s) * (d2 / duration_s) * n2
            + ((d1 - d2) / duration_s) * ((d1 - d2) / duration_s) * n1;
        ElectronicsRates {
            r_trig2: Estimate::poisson_rate(c.ddg2, duration_s),
            r_sync_trials: Estimate::poisson_rate(c.ddg1, duration_s),
            downtime: Estimate::new(downtime, libm::sqrt(var)),
        }
    }
}

/// What a tag record was taken with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    /// Memory off: stochastic pairs from idler-idler coincidences.
    Stoc,
    /// Memory synchronization: pairs from logged memory operations.
    Sync,
}

/// Pair rate (and, for [`PairMode::Sync`], the electronics rates) of a complete record.
///
/// `correction` multiplies the synchronized rate; it compensates a different
/// detector coupling of the memory path.
pub fn pair_rates(
    set: &TagSet,
    windows: WindowSpec,
    mode: PairMode,
    e: &ElectronicsParams,
    duration_ps: u64,
    correction: f64,
) -> Result<RatesReport, AnalysisError> {
    let dur = duration_ps as f64 / PS_PER_S as f64;
    let mut r = RatesReport::default();
    match mode {
        PairMode::Stoc => {
            let mut t = StocTask::new(windows);
            set.run(&mut t, duration_ps);
            r.r_stoc = Some(Estimate::poisson_rate(t.coincidences, dur));
        }
        PairMode::Sync => {
            if set.ops.is_empty() {
                return Err(AnalysisError::MissingLog);
            }
            let mut t = SyncTask::new(windows);
            set.run(&mut t, duration_ps);
            let raw = Estimate::poisson_rate(t.coincidences, dur);
            r.r_sync = Some(Estimate::new(
                raw.value * correction,
                raw.stderr * correction,
            ));
            let el = ElectronicsRates::from_counts(
                &LogCounts::from_log(&set.log, e, duration_ps),
                e,
                dur,
            );
            r.r_trig2 = Some(el.r_trig2);
            r.r_sync_trials = Some(el.r_sync_trials);
            r.downtime = Some(el.downtime);
        }
    }
    Ok(r)
}

//! Two-photon interference scans and visibility.

use alloc::vec::Vec;

use super::{op_range, time_range, AnchorTask, TagView, WindowSpec};
use crate::error::AnalysisError;
use crate::model::Estimate;
use crate::sim::Channel;

/// Coincidence count at one relative delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomPoint {
    pub delay_ps: i64,
    pub coincidences: u64,
    /// Normalization (number of trials, or 1 for equal-exposure bins).
    pub norm: u64,
}

impl HomPoint {
    pub fn rate(&self) -> Estimate {
        let n = self.norm.max(1) as f64;
        Estimate::new(
            self.coincidences as f64 / n,
            libm::sqrt(self.coincidences as f64) / n,
        )
    }
}

/// Normalized coincidences against delay.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HomScan {
    pub points: Vec<HomPoint>,
}

impl HomScan {
    /// Plateau region used by [`HomScan::visibility`] by default, |delay| in ns.
    pub const PLATEAU_NS: (f64, f64) = (3.0, 5.0);

    /// `1 − C(0)/C_plateau`, with `C(0)` the point nearest zero delay and
    /// `C_plateau` the mean of the points with `lo ≤ |delay| ≤ hi`.
    pub fn visibility_with(&self, lo_ps: i64, hi_ps: i64) -> Result<Estimate, AnalysisError> {
        let center = self
            .points
            .iter()
            .min_by_key(|p| p.delay_ps.unsigned_abs())
            .ok_or(AnalysisError::NoPlateau { lo_ps, hi_ps })?;
        let plateau: Vec<Estimate> = self
            .points
            .iter()
            .filter(|p| (lo_ps..=hi_ps).contains(&p.delay_ps.abs()))
            .map(HomPoint::rate)
            .collect();
        if plateau.is_empty() {
            return Err(AnalysisError::NoPlateau { lo_ps, hi_ps });
        }
        let k = plateau.len() as f64;
        let cp = plateau.iter().map(|e| e.value).sum::<f64>() / k;
        let sp = libm::sqrt(plateau.iter().map(|e| e.stderr * e.stderr).sum::<f64>()) / k;
        if cp == 0.0 {
            return Err(AnalysisError::ZeroCounts("plateau coincidence"));
        }
        let c0 = center.rate();
        // A zero count still carries a one-count uncertainty.
        let s0 = if center.coincidences == 0 {
            1.0 / center.norm.max(1) as f64
        } else {
            c0.stderr
        };
        let q = c0.value / cp;
        let err = libm::hypot(s0 / cp, q * sp / cp);
        Ok(Estimate::new(1.0 - q, err))
    }

    pub fn visibility(&self) -> Result<Estimate, AnalysisError> {
        let (lo, hi) = Self::PLATEAU_NS;
        self.visibility_with((lo * 1000.0) as i64, (hi * 1000.0) as i64)
    }
}

/// Interference between two independent heralded sources.
///
/// Idler-idler pairs are binned by their delay `t_i1 − t_i2`; a pair counts
/// when SigA and SigB each have a click in the herald windows of either
/// pairing (A after idler-1 and B after idler-2, or the reverse).
#[derive(Debug, Clone)]
pub struct HomStocTask {
    pub windows: WindowSpec,
    pub bin_width: u64,
    pub max_delay: u64,
    pub counts: Vec<u64>,
}

impl HomStocTask {
    pub fn new(windows: WindowSpec, bin_width: u64, max_delay: u64) -> Self {
        assert!(bin_width > 0, "bin width must be positive");
        let k = (max_delay / bin_width) as usize;
        HomStocTask {
            windows,
            bin_width,
            max_delay,
            counts: alloc::vec![0; 2 * k + 1],
        }
    }

    /// Defaults: 200 ps bins out to ±6 ns.
    pub fn standard(windows: WindowSpec) -> Self {
        Self::new(windows, 200, 6_000)
    }

    fn half(&self) -> i64 {
        (self.counts.len() / 2) as i64
    }

    pub fn scan(&self) -> HomScan {
        let k = self.half();
        HomScan {
            points: self
                .counts
                .iter()
                .enumerate()
                .map(|(i, &c)| HomPoint {
                    delay_ps: (i as i64 - k) * self.bin_width as i64,
                    coincidences: c,
                    norm: 1,
                })
                .collect(),
        }
    }
}

impl AnchorTask for HomStocTask {
    fn process(&mut self, view: &TagView<'_>, lo: u64, hi: u64) {
        let i2s = view.channel(Channel::Idler2);
        let sa = view.channel(Channel::SigA);
        let sb = view.channel(Channel::SigB);
        let o = self.windows.offsets;
        let w = self.windows;
        let k = self.half();
        let bw = self.bin_width as i64;
        let reach = k as u64 * self.bin_width + self.bin_width / 2;
        for &i1 in time_range(view.channel(Channel::Idler1), lo, hi) {
            for &i2 in time_range(i2s, i1.saturating_sub(reach), i1 + reach + 1) {
                let d = i1 as i64 - i2 as i64;
                let bin = (d + d.signum() * bw / 2) / bw;
                if bin.abs() > k {
                    continue;
                }
                let straight = w.hit(sa, i1, o.idler1_sig_a) && w.hit(sb, i2, o.idler2_sig_b);
                if straight || (w.hit(sa, i2, o.idler2_sig_a) && w.hit(sb, i1, o.idler1_sig_b)) {
                    self.counts[(bin + k) as usize] += 1;
                }
            }
        }
    }
}

/// Interference between a retrieved photon and the photon of the second
/// source, for one run at a fixed retrieval delay.
///
/// Each memory operation with non-negative storage time is a trial. The
/// retrieved photon is expected at `i2 + offset + delay`, the second-source
/// photon at `i2 + offset`; a trial counts when SigA and SigB fire in those
/// two windows, in either assignment.
#[derive(Debug, Clone)]
pub struct HomSyncTask {
    pub windows: WindowSpec,
    pub offset: i64,
    pub delay_ps: i64,
    pub trials: u64,
    pub coincidences: u64,
}

impl HomSyncTask {
    pub fn new(windows: WindowSpec, offset: i64, delay_ps: i64) -> Self {
        HomSyncTask {
            windows,
            offset,
            delay_ps,
            trials: 0,
            coincidences: 0,
        }
    }

    pub fn point(&self) -> HomPoint {
        HomPoint {
            delay_ps: self.delay_ps,
            coincidences: self.coincidences,
            norm: self.trials,
        }
    }
}

impl AnchorTask for HomSyncTask {
    fn process(&mut self, view: &TagView<'_>, lo: u64, hi: u64) {
        let sa = view.channel(Channel::SigA);
        let sb = view.channel(Channel::SigB);
        let w = self.windows;
        let ret = self.offset + self.delay_ps;
        for op in op_range(view.ops, lo, hi, |o| o.ddg2_time.unwrap_or(o.ddg1_time)) {
            let Some(i2) = op.ddg2_time else { continue };
            if op.storage_time_ps() < 0 {
                continue;
            }
            self.trials += 1;
            let straight = w.hit(sa, i2, ret) && w.hit(sb, i2, self.offset);
            if straight || (w.hit(sa, i2, self.offset) && w.hit(sb, i2, ret)) {
                self.coincidences += 1;
            }
        }
    }
}

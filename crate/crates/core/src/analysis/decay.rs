//! End-to-end memory efficiency against storage time.

use alloc::vec::Vec;

use super::{op_range, AnchorTask, TagView, WindowSpec};
use crate::model::Estimate;
use crate::sim::Channel;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecayBin {
    pub ops: u64,
    pub hits: u64,
    pub storage_sum_ps: u64,
}

/// Bins memory operations by storage time and counts the retrieved photons.
///
/// Each operation is a trial; it succeeds when SigA fires in the window
/// `offset` after the retrieval pulse.
#[derive(Debug, Clone)]
pub struct DecayTask {
    pub windows: WindowSpec,
    pub offset: i64,
    pub bin_width_ps: u64,
    pub bins: Vec<DecayBin>,
}

/// One point of a decay curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayPoint {
    /// Mean storage time of the binned operations.
    pub storage_ns: f64,
    pub efficiency: Estimate,
    pub ops: u64,
    pub hits: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecayCurve {
    pub points: Vec<DecayPoint>,
    /// Bins in range without any operation (left out of `points`).
    pub empty_bins: usize,
}

impl DecayCurve {
    pub fn times_ns(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.storage_ns).collect()
    }

    /// Subtracts a storage-independent background efficiency from every
    /// point, adding its error in quadrature.
    pub fn subtract_background(&mut self, b: Estimate) {
        for p in &mut self.points {
            let e = p.efficiency;
            p.efficiency = Estimate::new(e.value - b.value, libm::hypot(e.stderr, b.stderr));
        }
    }
}

impl DecayTask {
    pub fn new(windows: WindowSpec, offset: i64, bin_width_ps: u64, max_storage_ps: u64) -> Self {
        assert!(bin_width_ps > 0, "bin width must be positive");
        let n = (max_storage_ps / bin_width_ps + 1) as usize;
        DecayTask {
            windows,
            offset,
            bin_width_ps,
            bins: alloc::vec![DecayBin::default(); n],
        }
    }

    /// Efficiency per bin: successes / (operations · η_h), where η_h is the
    /// heralding efficiency of the stored photon.
    pub fn curve(&self, eta_h: f64) -> DecayCurve {
        let mut c = DecayCurve::default();
        for b in &self.bins {
            if b.ops == 0 {
                c.empty_bins += 1;
                continue;
            }
            let n = b.ops as f64;
            let p = b.hits as f64 / n;
            let se = libm::sqrt(p * (1.0 - p) / n).max(1.0 / n);
            c.points.push(DecayPoint {
                storage_ns: b.storage_sum_ps as f64 / n / 1000.0,
                efficiency: Estimate::new(p / eta_h, se / eta_h),
                ops: b.ops,
                hits: b.hits,
            });
        }
        c
    }
}

impl AnchorTask for DecayTask {
    fn process(&mut self, view: &TagView<'_>, lo: u64, hi: u64) {
        let sa = view.channel(Channel::SigA);
        for op in op_range(view.ops, lo, hi, |o| o.retrieve_time) {
            let t = op.storage_time_ps();
            if t < 0 {
                continue;
            }
            let i = (t as u64 / self.bin_width_ps) as usize;
            let Some(bin) = self.bins.get_mut(i) else {
                continue;
            };
            bin.ops += 1;
            bin.storage_sum_ps += t as u64;
            bin.hits += self.windows.hit(sa, op.retrieve_time, self.offset) as u64;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Offsets, TagSet};
    use super::*;
    use crate::sim::{LogEntry, TimeTag};

    #[test]
    fn bins_by_storage_time() {
        let w = WindowSpec::new(Offsets::default());
        let retrieve = |time: u64, s: u64| LogEntry::PcRetrieve {
            time,
            store_time: time - s,
            ddg2_time: None,
            ddg1_time: time - s - 1000,
        };
        let log = [
            retrieve(1_000_000, 5_000),
            retrieve(2_000_000, 6_000),
            retrieve(3_000_000, 25_000),
        ];
        let tags = [TimeTag {
            channel: Channel::SigA,
            time: 2_000_100,
        }];
        let set = TagSet::from_parts(&tags, &log);
        let mut t = DecayTask::new(w, 0, 10_000, 40_000);
        set.run(&mut t, u64::MAX);
        let c = t.curve(0.5);
        assert_eq!(c.points.len(), 2);
        assert_eq!(c.empty_bins, 3);
        assert_eq!((c.points[0].ops, c.points[0].hits), (2, 1));
        assert!((c.points[0].storage_ns - 5.5).abs() < 1e-12);
        assert!((c.points[0].efficiency.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn background_subtraction_adds_errors_in_quadrature() {
        let mut c = DecayCurve {
            points: alloc::vec![DecayPoint {
                storage_ns: 10.0,
                efficiency: Estimate::new(0.25, 0.003),
                ops: 1,
                hits: 1,
            }],
            empty_bins: 0,
        };
        c.subtract_background(Estimate::new(0.05, 0.004));
        assert!((c.points[0].efficiency.value - 0.2).abs() < 1e-15);
        assert!((c.points[0].efficiency.stderr - 0.005).abs() < 1e-15);
    }
}

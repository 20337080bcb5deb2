//! Heralded autocorrelation of the signal behind a 50:50 splitter.

use super::{Anchor, AnchorTask, TagView, WindowSpec};
use crate::error::AnalysisError;
use crate::model::Estimate;
use crate::sim::Channel;

/// Herald-window counts of a heralded g² measurement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct G2Counts {
    pub heralds: u64,
    pub a: u64,
    pub b: u64,
    pub ab: u64,
}

impl G2Counts {
    /// `N_ab·N_h / (N_a·N_b)` with a binomial error on `N_ab`.
    pub fn estimate(&self) -> Result<Estimate, AnalysisError> {
        if self.heralds == 0 {
            return Err(AnalysisError::ZeroCounts("herald"));
        }
        if self.a == 0 || self.b == 0 {
            return Err(AnalysisError::ZeroCounts("single-arm coincidence"));
        }
        let h = self.heralds as f64;
        let g = self.ab as f64 * h / (self.a as f64 * self.b as f64);
        let err = if self.ab == 0 {
            // One-count upper scale, so a zero is not reported as exact.
            h / (self.a as f64 * self.b as f64)
        } else {
            let p = self.ab as f64 / h;
            g * libm::sqrt((1.0 - p) / self.ab as f64)
        };
        Ok(Estimate::new(g, err))
    }

    pub fn add(&mut self, o: &G2Counts) {
        self.heralds += o.heralds;
        self.a += o.a;
        self.b += o.b;
        self.ab += o.ab;
    }
}

/// Accumulates [`G2Counts`] over anchors.
#[derive(Debug, Clone)]
pub struct G2Task {
    pub anchor: Anchor,
    pub offset_a: i64,
    pub offset_b: i64,
    pub windows: WindowSpec,
    pub counts: G2Counts,
}

impl G2Task {
    /// Heralded by idler-1 clicks (memory-free source).
    pub fn idler1(windows: WindowSpec) -> Self {
        let o = windows.offsets;
        Self::new(
            Anchor::Tags(Channel::Idler1),
            o.idler1_sig_a,
            o.idler1_sig_b,
            windows,
        )
    }

    /// Heralded by retrieval pulses (light after the memory).
    pub fn retrieval(windows: WindowSpec) -> Self {
        let o = windows.offsets;
        Self::new(
            Anchor::OpRetrieval,
            o.retrieval_sig_a,
            o.retrieval_sig_b,
            windows,
        )
    }

    pub fn new(anchor: Anchor, offset_a: i64, offset_b: i64, windows: WindowSpec) -> Self {
        G2Task {
            anchor,
            offset_a,
            offset_b,
            windows,
            counts: G2Counts::default(),
        }
    }
}

impl AnchorTask for G2Task {
    fn process(&mut self, view: &TagView<'_>, lo: u64, hi: u64) {
        let sa = view.channel(Channel::SigA);
        let sb = view.channel(Channel::SigB);
        for h in self.anchor.times(view, lo, hi) {
            let a = self.windows.hit(sa, h, self.offset_a);
            let b = self.windows.hit(sb, h, self.offset_b);
            self.counts.heralds += 1;
            self.counts.a += a as u64;
            self.counts.b += b as u64;
            self.counts.ab += (a && b) as u64;
        }
    }
}

/// Heralded g² from sorted herald and detector streams.
pub fn g2h_estimate(
    herald: &[u64],
    sig_a: &[u64],
    sig_b: &[u64],
    offset_a: i64,
    offset_b: i64,
    window: u64,
) -> Result<Estimate, AnalysisError> {
    let mut w = WindowSpec::new(super::Offsets::default());
    w.herald_window = window;
    let mut c = G2Counts::default();
    for &h in herald {
        let a = w.hit(sig_a, h, offset_a);
        let b = w.hit(sig_b, h, offset_b);
        c.heralds += 1;
        c.a += a as u64;
        c.b += b as u64;
        c.ab += (a && b) as u64;
    }
    c.estimate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_photons_give_zero() {
        // Every herald has exactly one signal photon, alternating arms.
        let h: Vec<u64> = (0..100).map(|i| i * 100_000).collect();
        let a: Vec<u64> = h.iter().step_by(2).map(|t| t + 1000).collect();
        let b: Vec<u64> = h.iter().skip(1).step_by(2).map(|t| t + 1000).collect();
        let g = g2h_estimate(&h, &a, &b, 1000, 1000, 3500).unwrap();
        assert_eq!(g.value, 0.0);
        assert!(g.stderr > 0.0);
    }

    #[test]
    fn independent_clicks_give_one() {
        // a on multiples of 2, b on multiples of 3 -> N_ab/N_h = 1/6 = (1/2)(1/3).
        let h: Vec<u64> = (0..600).map(|i| i * 100_000).collect();
        let a: Vec<u64> = (0..600)
            .filter(|i| i % 2 == 0)
            .map(|i| i * 100_000 + 500)
            .collect();
        let b: Vec<u64> = (0..600)
            .filter(|i| i % 3 == 0)
            .map(|i| i * 100_000 + 500)
            .collect();
        let g = g2h_estimate(&h, &a, &b, 500, 500, 3500).unwrap();
        assert!((g.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_arm_counts_are_an_error() {
        let h = [0u64, 100_000];
        assert_eq!(
            g2h_estimate(&h, &[], &[10], 0, 0, 3500),
            Err(AnalysisError::ZeroCounts("single-arm coincidence"))
        );
        assert_eq!(
            g2h_estimate(&[], &[1], &[1], 0, 0, 3500),
            Err(AnalysisError::ZeroCounts("herald"))
        );
    }
}

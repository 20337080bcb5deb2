//! Cross-correlation histograms, temporal overlap and window location.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::AnalysisError;
use crate::model::Estimate;

/// Bin geometry of a delay histogram, in ps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinSpec {
    pub bin_width: u64,
    pub t_min: i64,
    pub t_max: i64,
}

impl Default for BinSpec {
    /// 100-ps bins over −20..80 ns.
    fn default() -> Self {
        BinSpec {
            bin_width: 100,
            t_min: -20_000,
            t_max: 80_000,
        }
    }
}

impl BinSpec {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.bin_width == 0 {
            return Err(AnalysisError::BadGeometry("bin width must be positive"));
        }
        if self.t_max <= self.t_min
            || !((self.t_max - self.t_min) as u64).is_multiple_of(self.bin_width)
        {
            return Err(AnalysisError::BadGeometry(
                "range must be a positive multiple of the bin width",
            ));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        ((self.t_max - self.t_min) as u64 / self.bin_width) as usize
    }

    /// Bin index of delay `tau`, if inside `[t_min, t_max)`.
    #[inline]
    pub fn index(&self, tau: i64) -> Option<usize> {
        if tau < self.t_min || tau >= self.t_max {
            return None;
        }
        Some(((tau - self.t_min) as u64 / self.bin_width) as usize)
    }

    pub fn center(&self, i: usize) -> f64 {
        self.t_min as f64 + (i as f64 + 0.5) * self.bin_width as f64
    }
}

/// Binned delay distribution `G(τ)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub spec: BinSpec,
    pub counts: Vec<u64>,
    pub total_pairs: u64,
}

impl Histogram {
    pub fn new(spec: BinSpec) -> Self {
        Histogram {
            spec,
            counts: vec![0; spec.bins()],
            total_pairs: 0,
        }
    }

    #[inline]
    pub fn add(&mut self, tau: i64) {
        if let Some(i) = self.spec.index(tau) {
            self.counts[i] += 1;
            self.total_pairs += 1;
        }
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<(), AnalysisError> {
        if self.spec != other.spec {
            return Err(AnalysisError::GeometryMismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_pairs += other.total_pairs;
        Ok(())
    }

    /// Copy with all bins outside `[lo, hi)` zeroed.
    pub fn restricted(&self, lo: i64, hi: i64) -> Histogram {
        let mut h = self.clone();
        h.total_pairs = 0;
        for (i, c) in h.counts.iter_mut().enumerate() {
            let t = self.spec.center(i);
            if t < lo as f64 || t >= hi as f64 {
                *c = 0;
            }
            h.total_pairs += *c;
        }
        h
    }

    /// Index of the fullest bin (first one on ties).
    pub fn peak(&self) -> Option<usize> {
        let max = *self.counts.iter().max()?;
        if max == 0 {
            return None;
        }
        self.counts.iter().position(|&c| c == max)
    }

    /// Count-weighted mean delay of the bins with centers in `[lo, hi)`.
    pub fn centroid(&self, lo: f64, hi: f64) -> Option<f64> {
        let (mut w, mut s) = (0.0, 0.0);
        for (i, &c) in self.counts.iter().enumerate() {
            let t = self.spec.center(i);
            if t >= lo && t < hi {
                w += c as f64;
                s += c as f64 * t;
            }
        }
        (w > 0.0).then(|| s / w)
    }
}

/// Accumulates `τ = t_b − t_a` over all pairs with `τ` in the histogram range.
///
/// Both streams must be sorted. The sweep keeps a start cursor into `b` that
/// only moves forward, so the cost is linear in the inputs plus the number of
/// pairs inside the range.
pub fn accumulate_cross(hist: &mut Histogram, a: &[u64], b: &[u64]) {
    let spec = hist.spec;
    let mut start = 0usize;
    for &ta in a {
        let lo = ta as i64 + spec.t_min;
        while start < b.len() && (b[start] as i64) < lo {
            start += 1;
        }
        for &tb in &b[start..] {
            let tau = tb as i64 - ta as i64;
            if tau >= spec.t_max {
                break;
            }
            hist.add(tau);
        }
    }
}

/// Cross-correlation histogram of two sorted tag streams.
pub fn cross_correlation(a: &[u64], b: &[u64], spec: BinSpec) -> Result<Histogram, AnalysisError> {
    spec.validate()?;
    let mut h = Histogram::new(spec);
    accumulate_cross(&mut h, a, b);
    Ok(h)
}

/// Bhattacharyya-type overlap `(Σ√(c1·c2))² / (Σc1·Σc2)` of two histograms.
pub fn temporal_overlap(h1: &Histogram, h2: &Histogram) -> Result<f64, AnalysisError> {
    if h1.spec != h2.spec {
        return Err(AnalysisError::GeometryMismatch);
    }
    let s1: f64 = h1.counts.iter().map(|&c| c as f64).sum();
    let s2: f64 = h2.counts.iter().map(|&c| c as f64).sum();
    if s1 == 0.0 || s2 == 0.0 {
        return Err(AnalysisError::ZeroCounts("histogram"));
    }
    let bc: f64 = h1
        .counts
        .iter()
        .zip(&h2.counts)
        .map(|(&a, &b)| libm::sqrt(a as f64 * b as f64))
        .sum();
    Ok((bc * bc / (s1 * s2)).min(1.0))
}

/// [`temporal_overlap`] with a first-order Poisson error from the bin counts.
pub fn temporal_overlap_estimate(
    h1: &Histogram,
    h2: &Histogram,
) -> Result<Estimate, AnalysisError> {
    let i = temporal_overlap(h1, h2)?;
    let s1: f64 = h1.counts.iter().map(|&c| c as f64).sum();
    let s2: f64 = h2.counts.iter().map(|&c| c as f64).sum();
    let bc: f64 = h1
        .counts
        .iter()
        .zip(&h2.counts)
        .map(|(&a, &b)| libm::sqrt(a as f64 * b as f64))
        .sum();
    if bc == 0.0 {
        return Ok(Estimate::new(0.0, 0.0));
    }
    // (∂I/∂c)²·c for each bin count c, written without dividing by c.
    let var: f64 = h1
        .counts
        .iter()
        .zip(&h2.counts)
        .map(|(&a, &b)| {
            let (ra, rb) = (libm::sqrt(a as f64), libm::sqrt(b as f64));
            let da = rb / bc - ra / s1;
            let db = ra / bc - rb / s2;
            da * da + db * db
        })
        .sum();
    Ok(Estimate::new(i, i * libm::sqrt(var)))
}

/// Locates a coincidence window: the centroid of the counts within `width`
/// around the histogram peak, rounded to whole ps.
///
/// Returns `None` unless the peak stands out of the flat background by more
/// than five standard deviations (and at least three counts).
pub fn locate_window(hist: &Histogram, width: u64) -> Option<i64> {
    let i = hist.peak()?;
    let mean = hist.total_pairs as f64 / hist.counts.len() as f64;
    if (hist.counts[i] as f64) < mean + 5.0 * libm::sqrt(mean) + 3.0 {
        return None;
    }
    let peak = hist.spec.center(i);
    let half = width as f64 / 2.0;
    let c = hist.centroid(peak - half, peak + half)?;
    Some(libm::round(c) as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(a: &[u64], b: &[u64], spec: BinSpec) -> Histogram {
        let mut h = Histogram::new(spec);
        for &x in a {
            for &y in b {
                h.add(y as i64 - x as i64);
            }
        }
        h
    }

    #[test]
    fn equal_times_land_in_zero_bin() {
        let h = cross_correlation(&[1_000_000], &[1_000_000], BinSpec::default()).unwrap();
        assert_eq!(h.total_pairs, 1);
        assert_eq!(h.spec.index(0), Some(h.peak().unwrap()));
    }

    #[test]
    fn empty_streams_give_empty_histogram() {
        let h = cross_correlation(&[], &[5], BinSpec::default()).unwrap();
        assert_eq!(h.total_pairs, 0);
        assert_eq!(h.counts.len(), 1000);
    }

    #[test]
    fn rejects_bad_geometry() {
        let s = BinSpec {
            bin_width: 300,
            t_min: 0,
            t_max: 1000,
        };
        assert!(cross_correlation(&[], &[], s).is_err());
    }

    #[test]
    fn overlap_limits() {
        let spec = BinSpec {
            bin_width: 10,
            t_min: 0,
            t_max: 100,
        };
        let mut a = Histogram::new(spec);
        let mut b = Histogram::new(spec);
        for t in [5, 15, 15, 25] {
            a.add(t);
        }
        for t in [55, 65] {
            b.add(t);
        }
        assert_eq!(temporal_overlap(&a, &a).unwrap(), 1.0);
        assert_eq!(temporal_overlap(&a, &b).unwrap(), 0.0);
        let other = Histogram::new(BinSpec::default());
        assert_eq!(
            temporal_overlap(&a, &other),
            Err(AnalysisError::GeometryMismatch)
        );
    }

    #[test]
    fn locates_window_center() {
        let spec = BinSpec::default();
        let mut h = Histogram::new(spec);
        for k in 0..1000i64 {
            h.add(12_345 + (k % 21 - 10) * 40);
        }
        let c = locate_window(&h, 3500).unwrap();
        assert!((c - 12_345).abs() < 60, "{c}");
    }

    proptest! {
        #[test]
        fn merge_sweep_equals_brute_force(
            mut a in proptest::collection::vec(0u64..200_000, 0..300),
            mut b in proptest::collection::vec(0u64..200_000, 0..300),
        ) {
            a.sort_unstable();
            b.sort_unstable();
            let spec = BinSpec::default();
            prop_assert_eq!(cross_correlation(&a, &b, spec).unwrap(), brute(&a, &b, spec));
        }

        #[test]
        fn overlap_is_symmetric_bounded_and_scale_free(
            c1 in proptest::collection::vec(0u64..50, 20),
            c2 in proptest::collection::vec(0u64..50, 20),
            k in 1u64..5,
        ) {
            let spec = BinSpec { bin_width: 10, t_min: 0, t_max: 200 };
            let h = |c: &[u64]| Histogram { spec, counts: c.to_vec(), total_pairs: c.iter().sum() };
            let (h1, h2) = (h(&c1), h(&c2));
            if let (Ok(x), Ok(y)) = (temporal_overlap(&h1, &h2), temporal_overlap(&h2, &h1)) {
                prop_assert!((x - y).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&x));
                let scaled: Vec<u64> = c1.iter().map(|v| v * k).collect();
                let z = temporal_overlap(&h(&scaled), &h2).unwrap();
                prop_assert!((x - z).abs() < 1e-12);
            }
        }
    }
}

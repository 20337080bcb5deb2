//! Single-photon detectors: efficiency and Gaussian timing jitter.

use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::params::DetectorParams;
use crate::units::shift;

/// Jitter draws are clamped to this many standard deviations.
const JITTER_CLAMP_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone, Copy)]
pub struct Detector {
    efficiency: f64,
    jitter_sigma_ps: f64,
}

impl Detector {
    pub fn new(efficiency: f64, jitter_sigma_ps: f64) -> Self {
        Detector {
            efficiency,
            jitter_sigma_ps,
        }
    }

    pub fn from_params(p: &DetectorParams) -> Self {
        Self::new(p.efficiency, p.jitter_sigma_ps)
    }

    /// A detector that clicks for every photon (efficiency already folded into a rate).
    pub fn lossless(jitter_sigma_ps: f64) -> Self {
        Self::new(1.0, jitter_sigma_ps)
    }

    #[inline]
    pub fn jitter<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        if self.jitter_sigma_ps == 0.0 {
            return 0;
        }
        let z: f64 = rng.sample(StandardNormal);
        let z = z.clamp(-JITTER_CLAMP_SIGMAS, JITTER_CLAMP_SIGMAS);
        libm::round(z * self.jitter_sigma_ps) as i64
    }

    /// Click time for a photon arriving at `t`, or `None` if it is lost.
    ///
    /// `coupling` is the transmission of the fiber route in front of the
    /// detector. Exactly one uniform is drawn for the loss decision, and the
    /// jitter draw happens only for kept photons.
    #[inline]
    pub fn detect<R: Rng + ?Sized>(&self, t: u64, coupling: f64, rng: &mut R) -> Option<u64> {
        let p = self.efficiency * coupling;
        if p < 1.0 && rng.random::<f64>() >= p {
            return None;
        }
        Some(shift(t, self.jitter(rng)))
    }
}

/// Applies a detector to a batch of photon arrival times; the output is sorted.
pub fn apply_detector<R: Rng + ?Sized>(
    arrivals: &[u64],
    det: &DetectorParams,
    coupling: f64,
    rng: &mut R,
) -> Vec<u64> {
    let d = Detector::from_params(det);
    let mut out: Vec<u64> = arrivals
        .iter()
        .filter_map(|&t| d.detect(t, coupling, rng))
        .collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rng::{stream_rng, Stream};

    fn params(eff: f64, jitter: f64) -> DetectorParams {
        DetectorParams {
            efficiency: eff,
            jitter_sigma_ps: jitter,
            coupling_memory: 1.0,
            coupling_direct: 1.0,
        }
    }

    #[test]
    fn ideal_detector_is_identity() {
        let input: Vec<u64> = (0..1000).map(|i| i * 7919 % 100_003).collect();
        let mut sorted = input.clone();
        sorted.sort_unstable();
        let mut rng = stream_rng(1, Stream::DetSigA);
        assert_eq!(
            apply_detector(&input, &params(1.0, 0.0), 1.0, &mut rng),
            sorted
        );
    }

    #[test]
    fn efficiency_is_binomial() {
        let n = 1_000_000u64;
        let input: Vec<u64> = (0..n).map(|i| i * 1000).collect();
        let mut rng = stream_rng(2, Stream::DetSigA);
        let kept = apply_detector(&input, &params(0.91, 0.0), 1.0, &mut rng).len() as f64;
        let sd = (n as f64 * 0.91 * 0.09).sqrt();
        assert!((kept - 0.91 * n as f64).abs() < 3.0 * sd);
    }

    #[test]
    fn jitter_has_configured_width() {
        let d = Detector::from_params(&params(1.0, 55.0));
        let mut rng = stream_rng(3, Stream::DetSigB);
        let n = 100_000;
        let mut s2 = 0.0;
        for _ in 0..n {
            let out = d.detect(1_000_000, 1.0, &mut rng).unwrap() as f64 - 1_000_000.0;
            s2 += out * out;
        }
        let sd = (s2 / n as f64).sqrt();
        assert!((sd / 55.0 - 1.0).abs() < 0.05, "{sd}");
    }
}

//! Poisson emission processes of the pair source and its background light.

use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::envelope::Envelope;
use crate::params::{DetectorParams, SourceParams};
use crate::units::PS_PER_S;

/// Homogeneous Poisson process on the picosecond axis.
#[derive(Debug, Clone)]
pub struct PoissonClock {
    mean_gap_ps: f64,
    next: f64,
}

impl PoissonClock {
    pub fn new<R: Rng + ?Sized>(rate_per_s: f64, rng: &mut R) -> Self {
        let mean_gap_ps = if rate_per_s > 0.0 {
            PS_PER_S as f64 / rate_per_s
        } else {
            f64::INFINITY
        };
        let mut c = PoissonClock {
            mean_gap_ps,
            next: 0.0,
        };
        c.next = c.gap(rng);
        c
    }

    fn gap<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.mean_gap_ps.is_finite() {
            let e: f64 = Exp1.sample(rng);
            e * self.mean_gap_ps
        } else {
            f64::INFINITY
        }
    }

    /// Time of the next event, rounded to whole ps (`u64::MAX` if never).
    #[inline]
    pub fn peek(&self) -> u64 {
        if self.next.is_finite() && self.next < u64::MAX as f64 {
            libm::round(self.next) as u64
        } else {
            u64::MAX
        }
    }

    /// Consumes the pending event and draws the next one.
    #[inline]
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u64 {
        let t = self.peek();
        self.next += self.gap(rng);
        t
    }
}

/// Emission rates of one source channel, at the source output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRates {
    /// Pair emissions per second (equal to the detected idler rate).
    pub pairs: f64,
    /// Probability that a pair's signal photon leaves the source into the fiber.
    pub signal_probability: f64,
    /// On-resonant uncorrelated photons per second.
    pub on_resonant: f64,
    /// Off-resonant scattered pump photons per second.
    pub off_resonant: f64,
}

impl ChannelRates {
    /// Derives the emission rates of channel `j` (1 or 2).
    ///
    /// The contaminating light is an uncorrelated background. A rate `B` of
    /// detected background photons adds `B·W/2` coincidences per herald to an
    /// HBT measurement with herald window `W`, so the heralded autocorrelation
    /// becomes `2·B·W/η_h`. The detected background is therefore
    /// `g2·η_h/(2W)`, split by `rho` into the off-resonant share and the
    /// on-resonant share. Signal photons of other pairs already provide `r_j`
    /// of the on-resonant part, so only the remainder is generated.
    ///
    /// A channel with zero pair rate has no pump and emits nothing.
    pub fn derive(
        source: &SourceParams,
        detector: &DetectorParams,
        window_ps: f64,
        channel: u8,
    ) -> Self {
        let (r, eta_h) = match channel {
            1 => (source.r1, source.eta_h1),
            _ => (source.r2, source.eta_h2),
        };
        let path = detector.efficiency * detector.coupling_direct;
        if r == 0.0 {
            return ChannelRates {
                pairs: 0.0,
                signal_probability: eta_h / path,
                on_resonant: 0.0,
                off_resonant: 0.0,
            };
        }
        let window_s = window_ps / PS_PER_S as f64;
        let contamination = source.g2_source * eta_h / (2.0 * window_s);
        let on = ((1.0 - source.rho) * contamination - r).max(0.0);
        let off = source.rho * contamination;
        ChannelRates {
            pairs: r / eta_h,
            signal_probability: eta_h / path,
            on_resonant: on / path,
            off_resonant: off / path,
        }
    }
}

/// One pair emission: emission time and, if the signal photon exists, its
/// envelope offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emission {
    pub time: u64,
    pub signal_offset: Option<i64>,
}

/// Generates all pair emissions of one channel in `[0, duration)`.
///
/// This is the batch form of the generator the simulator runs incrementally.
pub fn generate_source_streams<R: Rng + ?Sized>(
    rates: &ChannelRates,
    envelope: &Envelope,
    duration_ps: u64,
    rng: &mut R,
) -> Vec<Emission> {
    let mut clock = PoissonClock::new(rates.pairs, rng);
    let mut out = Vec::new();
    while clock.peek() < duration_ps {
        let time = clock.advance(rng);
        let signal_offset = if rng.random::<f64>() < rates.signal_probability {
            Some(envelope.sample(rng))
        } else {
            None
        };
        out.push(Emission {
            time,
            signal_offset,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{EnvelopeShape, SystemConfig};
    use crate::sim::rng::{stream_rng, Stream};

    #[test]
    fn idler_rate_matches_within_three_sigma() {
        let c = SystemConfig::reference_defaults();
        let rates = ChannelRates::derive(&c.source, &c.detector, 3500.0, 2);
        assert!((rates.pairs - 305_031.4).abs() < 1.0);
        let env = Envelope::new(EnvelopeShape::Gaussian, 950.0);
        let mut rng = stream_rng(3, Stream::Source2);
        let n = generate_source_streams(&rates, &env, 10 * PS_PER_S as u64, &mut rng).len() as f64;
        let expect = rates.pairs * 10.0;
        assert!((n - expect).abs() < 3.0 * expect.sqrt(), "{n} vs {expect}");
    }

    #[test]
    fn unit_heralding_gives_a_signal_per_idler() {
        let mut c = SystemConfig::reference_defaults();
        c.source.eta_h1 = 1.0;
        c.detector.efficiency = 1.0;
        c.detector.coupling_direct = 1.0;
        let rates = ChannelRates::derive(&c.source, &c.detector, 3500.0, 1);
        let env = Envelope::new(EnvelopeShape::Gaussian, 950.0);
        let mut rng = stream_rng(4, Stream::Source1);
        let em = generate_source_streams(&rates, &env, PS_PER_S as u64 / 10, &mut rng);
        assert!(!em.is_empty());
        assert!(em.iter().all(|e| e.signal_offset.is_some()));
    }

    #[test]
    fn background_split_follows_rho() {
        let c = SystemConfig::reference_defaults();
        let r = ChannelRates::derive(&c.source, &c.detector, 3500.0, 1);
        let path = 0.91 * 0.92;
        let total = 0.0126 * 0.209 / (2.0 * 3.5e-9);
        assert!((r.off_resonant * path - 0.35 * total).abs() < 1e-6);
        assert!((r.on_resonant * path - (0.65 * total - 50_000.0)).abs() < 1e-6);
    }

    #[test]
    fn zero_rate_clock_never_fires() {
        let mut rng = stream_rng(1, Stream::Source1);
        let c = PoissonClock::new(0.0, &mut rng);
        assert_eq!(c.peek(), u64::MAX);
    }
}

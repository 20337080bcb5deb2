//! Temporal intensity envelopes of single photons and their mode overlap.

use alloc::vec::Vec;
use rand::Rng;

use crate::params::EnvelopeShape;

/// Offsets drawn from an envelope are clamped to this many ps around its center.
pub const ENVELOPE_CLAMP_PS: i64 = 8_000;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// A normalized, symmetric intensity profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub shape: EnvelopeShape,
    pub fwhm_ps: f64,
}

impl Envelope {
    pub fn new(shape: EnvelopeShape, fwhm_ps: f64) -> Self {
        Envelope { shape, fwhm_ps }
    }

    /// Gaussian sigma or exponential scale length, in ps.
    pub fn scale(&self) -> f64 {
        match self.shape {
            EnvelopeShape::Gaussian => self.fwhm_ps / FWHM_PER_SIGMA,
            EnvelopeShape::TwoSidedExponential => self.fwhm_ps / (2.0 * core::f64::consts::LN_2),
        }
    }

    /// Intensity density at offset `t` ps; integrates to one.
    pub fn density(&self, t: f64) -> f64 {
        let s = self.scale();
        match self.shape {
            EnvelopeShape::Gaussian => {
                libm::exp(-0.5 * (t / s) * (t / s)) / (s * libm::sqrt(2.0 * core::f64::consts::PI))
            }
            EnvelopeShape::TwoSidedExponential => libm::exp(-libm::fabs(t) / s) / (2.0 * s),
        }
    }

    /// Draws an arrival offset in whole ps.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let s = self.scale();
        let x = match self.shape {
            EnvelopeShape::Gaussian => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                z * s
            }
            EnvelopeShape::TwoSidedExponential => {
                let u: f64 = rng.random::<f64>();
                let e = -libm::log(1.0 - u) * s;
                if rng.random::<bool>() {
                    e
                } else {
                    -e
                }
            }
        };
        (libm::round(x) as i64).clamp(-ENVELOPE_CLAMP_PS, ENVELOPE_CLAMP_PS)
    }
}

/// Tabulated mode overlap `M(Δ) = (∫ √(I₁(t)·I₂(t−Δ)) dt)²` of two envelopes.
///
/// `M(0) = 1` for identical envelopes. The table extends to the cut-off
/// `|Δ|` past which `M` stays below `1e-6`; beyond it `M = 0`.
#[derive(Debug, Clone)]
pub struct ModeOverlap {
    step_ps: f64,
    table: Vec<f64>,
}

impl ModeOverlap {
    pub const CUTOFF: f64 = 1e-6;
    const STEP_PS: f64 = 10.0;
    /// Integration range and grid, in units of the envelope scales.
    const REACH: f64 = 30.0;
    const GRID: f64 = 0.025;

    pub fn new(a: &Envelope, b: &Envelope) -> Self {
        let limit = 2.0 * ENVELOPE_CLAMP_PS as f64;
        let mut table = Vec::new();
        let mut d = 0.0;
        loop {
            let m = Self::integrate(a, b, d);
            table.push(m);
            if m < Self::CUTOFF || d > limit {
                break;
            }
            d += Self::STEP_PS;
        }
        ModeOverlap {
            step_ps: Self::STEP_PS,
            table,
        }
    }

    fn integrate(a: &Envelope, b: &Envelope, delta: f64) -> f64 {
        // Trapezoid rule on a grid far below both widths; the densities are
        // smooth or have a single kink.
        let h = Self::GRID * a.scale().min(b.scale());
        let reach = Self::REACH * a.scale().max(b.scale());
        let lo = delta.min(0.0) - reach;
        let n = ((libm::fabs(delta) + 2.0 * reach) / h) as usize;
        let mut sum = 0.0;
        for i in 0..=n {
            let t = lo + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            sum += w * libm::sqrt(a.density(t) * b.density(t - delta));
        }
        let bc = sum * h;
        bc * bc
    }

    /// Largest `|Δ|` (ps) with non-zero overlap.
    pub fn cutoff_ps(&self) -> f64 {
        (self.table.len() - 1) as f64 * self.step_ps
    }

    pub fn eval(&self, delta_ps: f64) -> f64 {
        let x = libm::fabs(delta_ps) / self.step_ps;
        let i = x as usize;
        if i + 1 >= self.table.len() {
            return 0.0;
        }
        let f = x - i as f64;
        let m = self.table[i] * (1.0 - f) + self.table[i + 1] * f;
        if m < Self::CUTOFF {
            0.0
        } else {
            m
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rng::{stream_rng, Stream};

    #[test]
    fn gaussian_overlap_matches_closed_form() {
        let s = Envelope::new(EnvelopeShape::Gaussian, 950.0);
        let r = Envelope::new(EnvelopeShape::Gaussian, 1476.0);
        let (s1, s2) = (s.scale(), r.scale());
        let ss = s1 * s1 + s2 * s2;
        for &d in &[0.0, 250.0, 730.0, 1500.0] {
            let closed = 2.0 * s1 * s2 / ss * (-d * d / (2.0 * ss)).exp();
            let m = ModeOverlap::new(&s, &r).eval(d);
            assert!((m - closed).abs() < 1e-4, "{d}: {m} vs {closed}");
        }
        let same = ModeOverlap::new(&s, &s);
        assert!((same.eval(0.0) - 1.0).abs() < 1e-6);
        assert!((same.eval(400.0) - (-(400.0f64 * 400.0) / (4.0 * s1 * s1)).exp()).abs() < 1e-4);
        assert_eq!(same.eval(1e6), 0.0);
    }

    #[test]
    fn exponential_envelope_is_normalized() {
        let e = Envelope::new(EnvelopeShape::TwoSidedExponential, 950.0);
        let m = ModeOverlap::new(&e, &e);
        assert!((m.eval(0.0) - 1.0).abs() < 1e-3);
        // FWHM: density at ±fwhm/2 is half the peak.
        assert!((e.density(475.0) / e.density(0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn samples_have_expected_width() {
        let e = Envelope::new(EnvelopeShape::Gaussian, 950.0);
        let mut rng = stream_rng(1, Stream::Source1);
        let n = 200_000;
        let mut s2 = 0.0;
        for _ in 0..n {
            let x = e.sample(&mut rng) as f64;
            s2 += x * x;
        }
        let sd = (s2 / n as f64).sqrt();
        assert!((sd / e.scale() - 1.0).abs() < 0.01, "{sd}");
    }
}

//! Parameter sets of the source, memory, electronics and detectors.
//!
//! Every value is an effective parameter: atomic-physics details enter only
//! through efficiencies, transmissions and noise rates.

use crate::error::ModelError;
use crate::units::Picos;

fn check(
    cond: bool,
    name: &'static str,
    value: f64,
    expected: &'static str,
) -> Result<(), ModelError> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::OutOfRange {
            name,
            value,
            expected,
        })
    }
}

fn unit_interval_open_low(name: &'static str, v: f64) -> Result<(), ModelError> {
    check(v > 0.0 && v <= 1.0, name, v, "0 < x <= 1")
}

/// Photon-pair source, expressed through detected quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceParams {
    /// Detected heralded-photon rate of channel 1 (counts/s).
    pub r1: f64,
    /// Detected heralded-photon rate of channel 2 (counts/s).
    pub r2: f64,
    /// Detected heralding efficiency of channel 1, `r1 / R_idler1`.
    pub eta_h1: f64,
    /// Detected heralding efficiency of channel 2, `r2 / R_idler2`.
    pub eta_h2: f64,
    /// Conditional autocorrelation of the un-stored signal photons.
    pub g2_source: f64,
    /// Probability that a contaminating photon is off-resonant pump scatter.
    pub rho: f64,
    /// Temporal FWHM of the signal photons.
    pub pulse_fwhm: Picos,
}

impl SourceParams {
    /// Channel-2 rate used when a configuration leaves it unspecified.
    pub const DEFAULT_R2_RATIO: f64 = 0.97;

    pub fn validate(&self) -> Result<(), ModelError> {
        check(
            self.r1.is_finite() && self.r1 >= 0.0,
            "source.r1",
            self.r1,
            "finite and >= 0",
        )?;
        check(
            self.r2.is_finite() && self.r2 >= 0.0,
            "source.r2",
            self.r2,
            "finite and >= 0",
        )?;
        unit_interval_open_low("source.eta_h1", self.eta_h1)?;
        unit_interval_open_low("source.eta_h2", self.eta_h2)?;
        check(
            self.g2_source.is_finite() && self.g2_source >= 0.0,
            "source.g2",
            self.g2_source,
            ">= 0",
        )?;
        check(
            (0.0..=1.0).contains(&self.rho),
            "source.rho",
            self.rho,
            "0 <= rho <= 1",
        )?;
        check(
            self.pulse_fwhm.ps() > 0,
            "source.pulse_fwhm",
            self.pulse_fwhm.ps() as f64,
            "> 0 ps",
        )
    }

    /// Detected idler rate of channel `j` (1 or 2).
    pub fn idler_rate(&self, channel: u8) -> f64 {
        match channel {
            1 => self.r1 / self.eta_h1,
            _ => self.r2 / self.eta_h2,
        }
    }
}

/// End-to-end memory efficiency `η(t) = η0·exp(−t²/2τσ² − t/τγ)`.
///
/// Either decay time may be `f64::INFINITY` (pure exponential or pure
/// Gaussian decay), but not both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayModel {
    pub eta0: f64,
    /// Inhomogeneous (Gaussian) decay time in ns.
    pub tau_sigma_ns: f64,
    /// Homogeneous (exponential) decay time in ns.
    pub tau_gamma_ns: f64,
}

impl DecayModel {
    pub fn new(eta0: f64, tau_sigma_ns: f64, tau_gamma_ns: f64) -> Result<Self, ModelError> {
        let m = DecayModel {
            eta0,
            tau_sigma_ns,
            tau_gamma_ns,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        unit_interval_open_low("memory.eta0", self.eta0)?;
        check(
            self.tau_sigma_ns > 0.0 && !self.tau_sigma_ns.is_nan(),
            "memory.tau_sigma",
            self.tau_sigma_ns,
            "> 0 ns",
        )?;
        check(
            self.tau_gamma_ns > 0.0 && !self.tau_gamma_ns.is_nan(),
            "memory.tau_gamma",
            self.tau_gamma_ns,
            "> 0 ns",
        )?;
        check(
            self.tau_sigma_ns.is_finite() || self.tau_gamma_ns.is_finite(),
            "memory.tau_gamma",
            self.tau_gamma_ns,
            "at least one finite decay time",
        )
    }

    /// Decay exponent `t²/2τσ² + t/τγ` for `t` in ns.
    #[inline]
    pub fn exponent(&self, t_ns: f64) -> f64 {
        let gauss = if self.tau_sigma_ns.is_finite() {
            t_ns * t_ns / (2.0 * self.tau_sigma_ns * self.tau_sigma_ns)
        } else {
            0.0
        };
        let homo = if self.tau_gamma_ns.is_finite() {
            t_ns / self.tau_gamma_ns
        } else {
            0.0
        };
        gauss + homo
    }

    /// `η(t)` without the sign check; `t` in ns.
    #[inline]
    pub fn eval(&self, t_ns: f64) -> f64 {
        self.eta0 * libm::exp(-self.exponent(t_ns))
    }

    /// The 1/e lifetime, found by solving the quadratic in the exponent.
    pub fn lifetime_ns(&self) -> f64 {
        let a = if self.tau_sigma_ns.is_finite() {
            1.0 / (2.0 * self.tau_sigma_ns * self.tau_sigma_ns)
        } else {
            0.0
        };
        let b = if self.tau_gamma_ns.is_finite() {
            1.0 / self.tau_gamma_ns
        } else {
            0.0
        };
        if a == 0.0 {
            return 1.0 / b;
        }
        (-b + libm::sqrt(b * b + 4.0 * a)) / (2.0 * a)
    }
}

/// Memory module parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryParams {
    pub decay: DecayModel,
    /// Overall transmission `T` of the memory module, fiber to fiber.
    pub transmission: f64,
    /// Noise photons emitted per memory operation.
    pub nu: f64,
    /// Transmission of off-resonant light, as a fraction of `T`.
    pub t_offres_factor: f64,
    /// Leak-through of on-resonant light during retrieval, as a fraction of `T`.
    pub t_retrieval_factor: f64,
}

impl MemoryParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.decay.validate()?;
        unit_interval_open_low("memory.transmission", self.transmission)?;
        check(
            self.nu.is_finite() && self.nu >= 0.0,
            "memory.nu",
            self.nu,
            ">= 0",
        )?;
        check(
            (0.0..=1.0).contains(&self.t_offres_factor),
            "memory.t_offres_factor",
            self.t_offres_factor,
            "0 <= x <= 1",
        )?;
        check(
            self.t_retrieval_factor >= 0.0 && self.t_retrieval_factor <= self.t_offres_factor,
            "memory.t_retrieval_factor",
            self.t_retrieval_factor,
            "0 <= x <= t_offres_factor",
        )?;
        check(
            self.decay.eta0 <= self.transmission,
            "memory.eta0",
            self.decay.eta0,
            "<= memory.transmission",
        )
    }

    pub fn t_retrieval(&self) -> f64 {
        self.t_retrieval_factor * self.transmission
    }

    pub fn t_offres(&self) -> f64 {
        self.t_offres_factor * self.transmission
    }
}

/// Trigger electronics: two delay generators, a logic buffer and two Pockels cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectronicsParams {
    /// Idler-idler acceptance window (gate length).
    pub t_star: Picos,
    /// DDG-1 trigger acceptance downtime.
    pub tau_d1: Picos,
    /// DDG-2 trigger acceptance downtime.
    pub tau_d2: Picos,
    /// Minimal time between memory operations allowed by the Pockels cells.
    pub pc_min_spacing: Picos,
    /// DDG insertion delay.
    pub insertion_delay: Picos,
    /// DDG-1 delay from its trigger output to the PC-1 storage pulse.
    pub ddg1_delay: Picos,
    /// DDG-2 delay from gate opening to the PC-2 retrieval trigger.
    pub retrieval_delay: Picos,
    /// Fine retrieval offset, 10 ps granularity.
    pub retrieval_trim: Picos,
}

impl ElectronicsParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        check(
            self.t_star.ps() > 0,
            "electronics.t_star",
            self.t_star.ps() as f64,
            "> 0",
        )?;
        check(
            self.tau_d1 >= self.pc_min_spacing,
            "electronics.tau_d1",
            self.tau_d1.ps() as f64,
            ">= electronics.pc_min_spacing",
        )?;
        check(
            self.tau_d2.ps() > 0,
            "electronics.tau_d2",
            self.tau_d2.ps() as f64,
            "> 0",
        )?;
        check(
            self.pc_min_spacing.ps() >= 0,
            "electronics.pc_min_spacing",
            self.pc_min_spacing.ps() as f64,
            ">= 0",
        )?;
        check(
            self.insertion_delay.ps() >= 0,
            "electronics.insertion_delay",
            self.insertion_delay.ps() as f64,
            ">= 0",
        )?;
        check(
            self.ddg1_delay.ps() >= 0,
            "electronics.ddg1_delay",
            self.ddg1_delay.ps() as f64,
            ">= 0",
        )?;
        check(
            self.retrieval_delay.ps() >= 0,
            "electronics.retrieval_delay",
            self.retrieval_delay.ps() as f64,
            ">= 0",
        )?;
        check(
            self.retrieval_trim.ps() % 10 == 0,
            "electronics.retrieval_trim",
            self.retrieval_trim.ps() as f64,
            "a multiple of 10 ps",
        )
    }
}

/// Single-photon detectors and the two signal-1 fiber routes.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    pub efficiency: f64,
    /// Gaussian timing jitter, standard deviation in ps.
    pub jitter_sigma_ps: f64,
    /// Mating-sleeve transmission into the memory input fiber.
    pub coupling_memory: f64,
    /// Mating-sleeve transmission into the direct detector fiber.
    pub coupling_direct: f64,
}

impl DetectorParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        unit_interval_open_low("detector.efficiency", self.efficiency)?;
        unit_interval_open_low("detector.coupling_memory", self.coupling_memory)?;
        unit_interval_open_low("detector.coupling_direct", self.coupling_direct)?;
        check(
            self.jitter_sigma_ps.is_finite() && self.jitter_sigma_ps >= 0.0,
            "detector.jitter",
            self.jitter_sigma_ps,
            ">= 0 ps",
        )
    }

    /// Ratio that refers memory-route efficiencies to the direct-route coupling.
    pub fn coupling_correction(&self) -> f64 {
        self.coupling_direct / self.coupling_memory
    }
}

/// Analysis constants that enter the closed-form chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Full width `δt` of the accidental idler-idler coincidence window.
    pub coincidence_window: Picos,
    /// Storage time at which the report's g² is evaluated.
    pub g2_reference: Picos,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        check(
            self.coincidence_window.ps() > 0,
            "analysis.coincidence_window",
            self.coincidence_window.ps() as f64,
            "> 0",
        )?;
        check(
            self.g2_reference.ps() >= 0,
            "analysis.g2_reference",
            self.g2_reference.ps() as f64,
            ">= 0",
        )
    }
}

/// How the memory is operated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryMode {
    /// Signal-1 bypasses the memory and goes to the detectors directly.
    Off,
    /// Idler-2 gates idler-1; retrieval is triggered by idler-2 (synchronization).
    Sync,
    /// Every accepted idler-1 triggers a store and a retrieval after a fixed storage time.
    Characterize,
}

/// Where the two signal paths end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Routing {
    /// Signal path 1 to `sig_a`, signal path 2 to `sig_b`.
    Direct,
    /// Signal path 1 split 50/50 onto `sig_a`/`sig_b`; signal path 2 unused.
    Hbt,
    /// Both signal paths enter a balanced beamsplitter.
    Hom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeShape {
    Gaussian,
    TwoSidedExponential,
}

/// Simulator-only settings: topology, timing and envelopes.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub mode: MemoryMode,
    pub routing: Routing,
    pub envelope: EnvelopeShape,
    /// FWHM of the retrieved photon envelope.
    pub retrieved_fwhm: Picos,
    /// Static indistinguishability factor μ multiplying the mode overlap.
    pub indistinguishability: f64,
    /// Fixed storage time in [`MemoryMode::Characterize`].
    pub storage_time: Picos,
    /// Width of the control-pulse acceptance window around each PC pulse.
    pub control_window: Picos,
    /// Idler emission to idler detection.
    pub idler_delay: Picos,
    /// Memory output to the output plane (beamsplitter or detector fiber).
    pub memory_output_delay: Picos,
    /// Output plane to detector click; must exceed the beamsplitter hold time.
    pub detector_delay: Picos,
    /// Processing stops after this many events.
    pub event_cap: u64,
}

impl SimParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        check(
            self.retrieved_fwhm.ps() > 0,
            "sim.retrieved_fwhm",
            self.retrieved_fwhm.ps() as f64,
            "> 0",
        )?;
        check(
            (0.0..=1.0).contains(&self.indistinguishability),
            "sim.indistinguishability",
            self.indistinguishability,
            "0 <= mu <= 1",
        )?;
        check(
            self.storage_time.ps() >= 0,
            "sim.storage_time",
            self.storage_time.ps() as f64,
            ">= 0",
        )?;
        check(
            self.control_window.ps() > 0,
            "sim.control_window",
            self.control_window.ps() as f64,
            "> 0",
        )?;
        check(
            self.idler_delay.ps() >= 0 && self.memory_output_delay.ps() >= 0,
            "sim.idler_delay",
            self.idler_delay.ps() as f64,
            ">= 0",
        )?;
        check(
            self.detector_delay >= crate::sim::BS_HOLD + Picos::from_ns(1),
            "sim.detector_delay",
            self.detector_delay.ps() as f64,
            "> beamsplitter hold time + 1 ns",
        )?;
        check(
            self.event_cap > 0,
            "sim.event_cap",
            self.event_cap as f64,
            "> 0",
        )
    }
}

/// Complete parameter set of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub source: SourceParams,
    pub memory: MemoryParams,
    pub electronics: ElectronicsParams,
    pub detector: DetectorParams,
    pub model: ModelParams,
    pub sim: SimParams,
}

impl SystemConfig {
    /// Parameters of the published experiment at its lowest pump power.
    ///
    /// The decay times are the solution of the two-constraint calibration
    /// (`η0 = 0.262`, 1/e time 114 ns, mean efficiency 0.196 over 100 ns).
    pub fn reference_defaults() -> Self {
        SystemConfig {
            source: SourceParams {
                r1: 50_000.0,
                r2: 48_500.0,
                eta_h1: 0.209,
                eta_h2: 0.159,
                g2_source: 0.0126,
                rho: 0.35,
                pulse_fwhm: Picos::from_ps(950),
            },
            memory: MemoryParams {
                decay: DecayModel {
                    eta0: 0.262,
                    tau_sigma_ns: 98.620_047_143,
                    tau_gamma_ns: 343.489_406_838,
                },
                transmission: 0.68,
                nu: 1.7e-5,
                t_offres_factor: 0.9,
                t_retrieval_factor: 0.1,
            },
            electronics: ElectronicsParams {
                t_star: Picos::from_ns(100),
                tau_d1: Picos::from_ns(1525),
                tau_d2: Picos::from_ns(260),
                pc_min_spacing: Picos::from_ns(1500),
                insertion_delay: Picos::from_ns(22),
                ddg1_delay: Picos::from_ns(15),
                retrieval_delay: Picos::from_ns(137),
                retrieval_trim: Picos::ZERO,
            },
            detector: DetectorParams {
                efficiency: 0.91,
                jitter_sigma_ps: 55.0,
                coupling_memory: 0.98,
                coupling_direct: 0.92,
            },
            model: ModelParams {
                coincidence_window: Picos::from_ps(600),
                g2_reference: Picos::from_ns(20),
            },
            sim: SimParams {
                mode: MemoryMode::Sync,
                routing: Routing::Direct,
                envelope: EnvelopeShape::Gaussian,
                retrieved_fwhm: Picos::from_ps(1476),
                indistinguishability: 0.90,
                storage_time: Picos::from_ns(20),
                control_window: Picos::from_ps(3500),
                idler_delay: Picos::from_ns(10),
                memory_output_delay: Picos::from_ns(20),
                detector_delay: Picos::from_ns(25),
                event_cap: 4_000_000_000,
            },
        }
    }

    /// Validates the parameters used by the closed-form model.
    pub fn validate_model(&self) -> Result<(), ModelError> {
        self.source.validate()?;
        self.memory.validate()?;
        self.electronics.validate()?;
        self.detector.validate()?;
        self.model.validate()
    }

    /// Validates everything, including the simulator's extra constraints.
    pub fn validate(&self) -> Result<(), ModelError> {
        self.validate_model()?;
        self.sim.validate()?;
        check(
            self.memory.nu <= 1.0,
            "memory.nu",
            self.memory.nu,
            "<= 1 in the simulator",
        )?;
        let direct = self.detector.efficiency * self.detector.coupling_direct;
        for (name, eta_h) in [
            ("source.eta_h1", self.source.eta_h1),
            ("source.eta_h2", self.source.eta_h2),
        ] {
            check(
                eta_h <= direct,
                name,
                eta_h,
                "<= detector.efficiency * detector.coupling_direct",
            )?;
        }
        let k = self.detector.coupling_correction();
        check(
            self.memory.transmission * self.memory.t_offres_factor * k <= 1.0,
            "memory.t_offres_factor",
            self.memory.t_offres_factor,
            "module transmission referred to the memory coupling must stay <= 1",
        )?;
        check(
            self.memory.decay.eta0 * k <= 1.0,
            "memory.eta0",
            self.memory.decay.eta0,
            "module efficiency referred to the memory coupling must stay <= 1",
        )
    }

    /// Sets `r1` and scales `r2` to keep the channel ratio.
    pub fn with_r1(&self, r1: f64) -> Self {
        let mut c = self.clone();
        let ratio = if self.source.r1 > 0.0 {
            self.source.r2 / self.source.r1
        } else {
            SourceParams::DEFAULT_R2_RATIO
        };
        c.source.r1 = r1;
        c.source.r2 = r1 * ratio;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_defaults_are_valid() {
        SystemConfig::reference_defaults().validate().unwrap();
    }

    #[test]
    fn lifetime_of_defaults_is_114_ns() {
        let d = SystemConfig::reference_defaults().memory.decay;
        assert!(
            (d.lifetime_ns() - 114.0).abs() < 1e-6,
            "{}",
            d.lifetime_ns()
        );
        let pure = DecayModel::new(0.3, f64::INFINITY, 50.0).unwrap();
        assert!((pure.lifetime_ns() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_values() {
        let mut c = SystemConfig::reference_defaults();
        c.source.rho = 1.5;
        assert!(c.validate().is_err());

        let mut c = SystemConfig::reference_defaults();
        c.memory.decay.eta0 = 0.9;
        assert!(matches!(
            c.validate(),
            Err(ModelError::OutOfRange {
                name: "memory.eta0",
                ..
            })
        ));

        let mut c = SystemConfig::reference_defaults();
        c.electronics.retrieval_trim = Picos::from_ps(15);
        assert!(c.validate().is_err());

        let mut c = SystemConfig::reference_defaults();
        c.electronics.tau_d1 = Picos::from_ns(1000);
        assert!(c.validate().is_err());

        assert!(DecayModel::new(0.2, f64::INFINITY, f64::INFINITY).is_err());
    }

    #[test]
    fn with_r1_keeps_channel_ratio() {
        let c = SystemConfig::reference_defaults().with_r1(440_000.0);
        assert!((c.source.r2 - 426_800.0).abs() < 1e-6);
    }
}

//! Closed-form rates, efficiencies, downtime, noise and SNR.
//!
//! Rates are in counts (or triggers) per second, durations in seconds unless a
//! name says otherwise. [`full_chain`] composes the equations for one
//! configuration.

use crate::error::ModelError;
use crate::params::{DecayModel, MemoryParams, SourceParams, SystemConfig};
use crate::quad::adaptive_simpson;

/// Absolute tolerance of the η̄ quadrature.
pub const AVG_EFFICIENCY_TOL: f64 = 1e-6;

/// `η(t)` for a storage time `t_ns >= 0`.
pub fn memory_efficiency(t_ns: f64, decay: &DecayModel) -> Result<f64, ModelError> {
    if !(t_ns >= 0.0) {
        return Err(ModelError::NegativeTime(t_ns));
    }
    Ok(decay.eval(t_ns))
}

/// Mean of `η(t)` over `[0, t*]`, the efficiency seen by uniformly
/// distributed storage times.
pub fn avg_memory_efficiency(decay: &DecayModel, t_star_ns: f64) -> Result<f64, ModelError> {
    if !(t_star_ns > 0.0) {
        return Err(ModelError::OutOfRange {
            name: "t_star",
            value: t_star_ns,
            expected: "> 0 ns",
        });
    }
    let integral = adaptive_simpson(
        |t| decay.eval(t),
        0.0,
        t_star_ns,
        AVG_EFFICIENCY_TOL * t_star_ns,
    );
    Ok(integral / t_star_ns)
}

/// Accidental coincidence rate of two independent heralded sources.
pub fn stoc_rate(r1: f64, r2: f64, delta_t: f64) -> f64 {
    r1 * r2 * delta_t
}

/// DDG-2 trigger rate after its non-paralyzable dead time.
pub fn trig2_rate(r_idler2: f64, tau_d2: f64) -> f64 {
    r_idler2 / (1.0 + r_idler2 * tau_d2)
}

/// Probability that an idler-1 falls into one gate of length `t*` (first order).
pub fn p_trig1(r1: f64, eta_h1: f64, t_star: f64) -> Result<f64, ModelError> {
    if !(eta_h1 > 0.0) {
        return Err(ModelError::OutOfRange {
            name: "eta_h1",
            value: eta_h1,
            expected: "> 0",
        });
    }
    Ok(r1 / eta_h1 * t_star)
}

/// Rate of accepted synchronization attempts (memory operations).
pub fn sync_trials_rate(
    r_trig2: f64,
    r1: f64,
    eta_h1: f64,
    t_star: f64,
    tau_d1: f64,
) -> Result<f64, ModelError> {
    let x = r_trig2 * p_trig1(r1, eta_h1, t_star)?;
    Ok(x / (1.0 + x * tau_d1))
}

/// Fraction of time in which the trigger logic cannot start a new operation.
pub fn memory_downtime(
    r_trig2: f64,
    r_sync_trials: f64,
    tau_d1: f64,
    tau_d2: f64,
) -> Result<f64, ModelError> {
    if r_sync_trials > r_trig2 {
        return Err(ModelError::TrialsExceedTriggers {
            trials: r_sync_trials,
            trig2: r_trig2,
        });
    }
    let d = (r_trig2 - r_sync_trials) * tau_d2 + r_sync_trials * tau_d1;
    if d > 1.0 {
        return Err(ModelError::DowntimeAboveOne(d));
    }
    Ok(d)
}

/// Detected synchronized coincidence rate.
pub fn sync_rate(r_sync_trials: f64, eta_h1: f64, eta_h2: f64, eta_bar: f64) -> f64 {
    r_sync_trials * eta_h1 * eta_h2 * eta_bar
}

/// Heralded autocorrelation of a photon stored for `t_ns`.
///
/// Three contaminations survive the memory: on-resonant noise that is stored
/// like the signal, on-resonant noise leaking through during retrieval, and
/// off-resonant pump scatter passing the module. The last two do not decay, so
/// they are enhanced by `1/η(t)` relative to the retrieved signal.
pub fn g2_after_memory(
    t_ns: f64,
    source: &SourceParams,
    memory: &MemoryParams,
) -> Result<f64, ModelError> {
    let eta = memory_efficiency(t_ns, &memory.decay)?;
    if !(eta > 0.0) {
        return Err(ModelError::ZeroEfficiency(t_ns));
    }
    let rho = source.rho;
    Ok(source.g2_source
        * ((1.0 - rho) + (1.0 - rho) * memory.t_retrieval() / eta + rho * memory.t_offres() / eta))
}

/// Short-time signal-to-noise ratio of the memory.
pub fn snr(eta_h: f64, eta0: f64, nu: f64) -> Result<f64, ModelError> {
    if !(nu > 0.0) {
        return Err(ModelError::OutOfRange {
            name: "nu",
            value: nu,
            expected: "> 0",
        });
    }
    Ok(eta_h * eta0 / nu)
}

/// Memory efficiency with the passive module transmission removed.
pub fn internal_efficiency(eta_e2e: f64, transmission: f64) -> Result<f64, ModelError> {
    if !(transmission > 0.0 && transmission <= 1.0) {
        return Err(ModelError::OutOfRange {
            name: "transmission",
            value: transmission,
            expected: "0 < T <= 1",
        });
    }
    let v = eta_e2e / transmission;
    if v > 1.0 {
        return Err(ModelError::InternalEfficiencyAboveOne(v));
    }
    Ok(v)
}

/// A value with its one-sigma statistical uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub const fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }

    pub const fn new(value: f64, stderr: f64) -> Self {
        Estimate { value, stderr }
    }

    /// Counting estimate of a rate: `n / duration` with Poisson error. Zero
    /// counts carry the one-count error rather than none.
    pub fn poisson_rate(n: u64, duration_s: f64) -> Self {
        let n = n as f64;
        Estimate {
            value: n / duration_s,
            stderr: libm::sqrt(n.max(1.0)) / duration_s,
        }
    }

    /// Number of standard errors between `self` and `other`, both errors combined.
    pub fn z_score(&self, other: f64) -> f64 {
        let d = self.value - other;
        if self.stderr == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            libm::fabs(d) / self.stderr
        }
    }

    /// Quotient with first-order error propagation for independent operands.
    pub fn ratio(&self, den: &Estimate) -> Estimate {
        if den.value == 0.0 {
            return Estimate::exact(0.0);
        }
        let q = self.value / den.value;
        let rel = if self.value == 0.0 {
            den.stderr / den.value
        } else {
            libm::hypot(self.stderr / self.value, den.stderr / den.value)
        };
        Estimate::new(q, libm::fabs(q) * rel)
    }
}

/// Derived metrics of one operating point, analytic or measured.
///
/// Fields are `None` when the producing computation does not determine them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RatesReport {
    pub r_stoc: Option<Estimate>,
    pub r_sync: Option<Estimate>,
    pub zeta: Option<Estimate>,
    pub r_trig2: Option<Estimate>,
    pub r_sync_trials: Option<Estimate>,
    pub downtime: Option<Estimate>,
    pub g2_h: Option<Estimate>,
    pub hom_visibility: Option<Estimate>,
    pub overlap_i: Option<Estimate>,
}

impl RatesReport {
    /// Named fields in a fixed order, for tabular output.
    pub fn entries(&self) -> [(&'static str, Option<Estimate>); 9] {
        [
            ("r_stoc", self.r_stoc),
            ("r_sync", self.r_sync),
            ("zeta", self.zeta),
            ("r_trig2", self.r_trig2),
            ("r_sync_trials", self.r_sync_trials),
            ("downtime", self.downtime),
            ("g2_h", self.g2_h),
            ("hom_visibility", self.hom_visibility),
            ("overlap_i", self.overlap_i),
        ]
    }
}

/// Intermediate quantities of [`full_chain`], kept for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainDetail {
    pub r_idler2: f64,
    pub p_trig1: f64,
    pub eta_bar: f64,
    /// `η̄` referred to the direct-route coupling, as entered in `R_sync`.
    pub eta_bar_eff: f64,
}

/// Evaluates the analytic chain for one configuration.
///
/// The average memory efficiency is multiplied by the ratio of the direct and
/// memory-route fiber couplings, because the heralding efficiency `η_h1` is
/// measured through the direct route while `η` is measured through the
/// memory route.
pub fn full_chain(config: &SystemConfig) -> Result<RatesReport, ModelError> {
    full_chain_detail(config).map(|(r, _)| r)
}

pub fn full_chain_detail(config: &SystemConfig) -> Result<(RatesReport, ChainDetail), ModelError> {
    config.validate_model()?;
    let s = &config.source;
    let e = &config.electronics;
    let t_star = e.t_star.as_secs();
    let tau_d1 = e.tau_d1.as_secs();
    let tau_d2 = e.tau_d2.as_secs();

    let r_stoc = stoc_rate(s.r1, s.r2, config.model.coincidence_window.as_secs());
    let r_idler2 = s.idler_rate(2);
    let r_trig2 = trig2_rate(r_idler2, tau_d2);
    let p = p_trig1(s.r1, s.eta_h1, t_star)?;
    let trials = sync_trials_rate(r_trig2, s.r1, s.eta_h1, t_star, tau_d1)?;
    let downtime = memory_downtime(r_trig2, trials, tau_d1, tau_d2)?;
    let eta_bar = avg_memory_efficiency(&config.memory.decay, e.t_star.as_ns())?;
    let eta_bar_eff = eta_bar * config.detector.coupling_correction();
    let r_sync = sync_rate(trials, s.eta_h1, s.eta_h2, eta_bar_eff);
    let zeta = if r_stoc > 0.0 { r_sync / r_stoc } else { 0.0 };
    let g2 = g2_after_memory(config.model.g2_reference.as_ns(), s, &config.memory)?;

    let report = RatesReport {
        r_stoc: Some(Estimate::exact(r_stoc)),
        r_sync: Some(Estimate::exact(r_sync)),
        zeta: Some(Estimate::exact(zeta)),
        r_trig2: Some(Estimate::exact(r_trig2)),
        r_sync_trials: Some(Estimate::exact(trials)),
        downtime: Some(Estimate::exact(downtime)),
        g2_h: Some(Estimate::exact(g2)),
        hom_visibility: None,
        overlap_i: None,
    };
    let detail = ChainDetail {
        r_idler2,
        p_trig1: p,
        eta_bar,
        eta_bar_eff,
    };
    Ok((report, detail))
}

//! Fit of the retrieval-leakage transmission to g² against storage time.

use alloc::vec::Vec;

use super::{check_points, levenberg_marquardt, DataPoint, FitResult, Problem, Transform};
use crate::error::FitError;
use crate::params::DecayModel;

/// g² points of one source setting with the parameters held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct G2Dataset {
    pub points: Vec<DataPoint>,
    pub g2_source: f64,
    pub rho: f64,
    pub decay: DecayModel,
    /// Passive module transmission `T`.
    pub transmission: f64,
    /// Off-resonant transmission as a fraction of `T`.
    pub t_offres_factor: f64,
}

impl G2Dataset {
    /// Model value and its derivative with respect to the retrieval factor.
    fn model(&self, t_ns: f64, factor: f64) -> (f64, f64) {
        let eta = self.decay.eval(t_ns);
        let t = self.transmission;
        let d = self.g2_source * (1.0 - self.rho) * t / eta;
        let base = self.g2_source * ((1.0 - self.rho) + self.rho * self.t_offres_factor * t / eta);
        (base + d * factor, d)
    }
}

struct G2Problem<'a> {
    sets: &'a [G2Dataset],
    n: usize,
}

impl Problem for G2Problem<'_> {
    fn transforms(&self) -> &[Transform] {
        &[Transform::Identity]
    }

    fn n_points(&self) -> usize {
        self.n
    }

    fn eval(&self, p: &[f64], r: &mut [f64], jac: &mut [f64]) {
        let mut i = 0;
        for s in self.sets {
            for d in &s.points {
                let (f, df) = s.model(d.t_ns, p[0]);
                r[i] = (f - d.value) / d.stderr;
                jac[i] = df / d.stderr;
                i += 1;
            }
        }
    }
}

/// χ² of all datasets at a retrieval factor.
pub fn g2_chi2(sets: &[G2Dataset], factor: f64) -> f64 {
    sets.iter()
        .flat_map(|s| {
            s.points.iter().map(move |d| {
                let z = (s.model(d.t_ns, factor).0 - d.value) / d.stderr;
                z * z
            })
        })
        .sum()
}

/// Fits one retrieval-leakage factor shared by all datasets.
pub fn fit_g2_transmission(sets: &[G2Dataset]) -> Result<FitResult, FitError> {
    let all: Vec<DataPoint> = sets.iter().flat_map(|s| s.points.iter().copied()).collect();
    check_points(&all, 2)?;
    for s in sets {
        s.decay.validate()?;
    }
    Ok(levenberg_marquardt(
        &G2Problem { sets, n: all.len() },
        &["t_retrieval_factor"],
        &[0.0],
    ))
}

#[cfg(test)]
mod tests {
    use super::super::numeric_gradient;
    use super::*;
    use crate::model::g2_after_memory;
    use crate::params::SystemConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn dataset(rho: f64, factor: f64, noise: f64, seed: u64) -> G2Dataset {
        let cfg = SystemConfig::reference_defaults();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = G2Dataset {
            points: Vec::new(),
            g2_source: 0.0126,
            rho,
            decay: cfg.memory.decay,
            transmission: cfg.memory.transmission,
            t_offres_factor: 0.9,
        };
        s.points = (0..10)
            .map(|i| {
                let t = 10.0 + 20.0 * i as f64;
                let v = s.model(t, factor).0;
                let z: f64 = StandardNormal.sample(&mut rng);
                DataPoint::new(t, v * (1.0 + noise * z), v * noise.max(0.01))
            })
            .collect();
        s
    }

    #[test]
    fn model_agrees_with_the_closed_form() {
        let cfg = SystemConfig::reference_defaults();
        let s = dataset(cfg.source.rho, cfg.memory.t_retrieval_factor, 0.0, 0);
        let want = g2_after_memory(20.0, &cfg.source, &cfg.memory).unwrap();
        assert!((s.model(20.0, cfg.memory.t_retrieval_factor).0 - want).abs() < 1e-15);
    }

    #[test]
    fn recovers_a_shared_factor() {
        let sets = [dataset(0.35, 0.1, 0.05, 1), dataset(0.1, 0.1, 0.05, 2)];
        let r = fit_g2_transmission(&sets).unwrap();
        assert!(r.converged);
        assert!(r.estimate(0).z_score(0.1) < 3.0, "{r:?}");
        assert_eq!(r.dof, 19);
        let g = numeric_gradient(|p| g2_chi2(&sets, p[0]), &r.values, 1e-6);
        assert!(g[0].abs() < 1e-6, "{g:?}");
    }

    #[test]
    fn zero_factor_is_returned_as_zero() {
        let r = fit_g2_transmission(&[dataset(0.35, 0.0, 0.0, 3)]).unwrap();
        assert!(r.values[0].abs() < 1e-9 + 3.0 * r.stderr(0), "{r:?}");
        assert!(r.values[0].abs() < 1e-9);
    }
}

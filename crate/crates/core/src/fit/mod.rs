//! Weighted least-squares fits of the decay and noise models, and the
//! calibration of a decay model from two published constraints.
//!
//! Fits run a damped Gauss-Newton (Levenberg-Marquardt) iteration on
//! internally unconstrained parameters: positive quantities enter through
//! their logarithm, fractions through their logit. Covariances are reported
//! for the natural parameters, from the inverse of `JᵀJ` at the optimum
//! (the data uncertainties are taken at face value, not rescaled by χ²/dof).

pub mod decay;
pub mod g2;
mod linalg;

pub use decay::{calibrate_decay, decay_chi2, fit_decay};
pub use g2::{fit_g2_transmission, g2_chi2, G2Dataset};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::FitError;
use crate::model::Estimate;

/// Maximum number of iterations.
pub const MAX_ITERATIONS: usize = 200;
/// Convergence threshold on the relative decrease of χ².
pub const REL_TOL: f64 = 1e-10;
/// Extra iterations taken after the χ² criterion is met.
const POLISH_STEPS: usize = 5;

/// A measured value with its one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPoint {
    pub t_ns: f64,
    pub value: f64,
    pub stderr: f64,
}

impl DataPoint {
    pub const fn new(t_ns: f64, value: f64, stderr: f64) -> Self {
        DataPoint {
            t_ns,
            value,
            stderr,
        }
    }
}

/// Outcome of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<&'static str>,
    pub values: Vec<f64>,
    /// Row-major covariance of `values`.
    pub covariance: Vec<f64>,
    pub chi2: f64,
    pub dof: i64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn n_params(&self) -> usize {
        self.values.len()
    }

    pub fn stderr(&self, i: usize) -> f64 {
        libm::sqrt(self.covariance[i * self.n_params() + i])
    }

    pub fn estimate(&self, i: usize) -> Estimate {
        Estimate::new(self.values[i], self.stderr(i))
    }

    pub fn get(&self, name: &str) -> Option<Estimate> {
        self.names
            .iter()
            .position(|n| *n == name)
            .map(|i| self.estimate(i))
    }
}

/// Maps an unconstrained internal parameter to its natural value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Transform {
    Identity,
    /// Positive parameter: `p = exp(q)`.
    Log,
    /// Fraction in (0, 1): `p = 1/(1+exp(−q))`.
    Logit,
}

impl Transform {
    fn to_natural(self, q: f64) -> f64 {
        match self {
            Transform::Identity => q,
            Transform::Log => libm::exp(q),
            Transform::Logit => 1.0 / (1.0 + libm::exp(-q)),
        }
    }

    fn to_internal(self, p: f64) -> f64 {
        match self {
            Transform::Identity => p,
            Transform::Log => libm::log(p),
            Transform::Logit => libm::log(p / (1.0 - p)),
        }
    }

    /// `dp/dq` at natural value `p`.
    fn derivative(self, p: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::Log => p,
            Transform::Logit => p * (1.0 - p),
        }
    }
}

/// A weighted least-squares problem in natural parameters.
pub(crate) trait Problem {
    fn transforms(&self) -> &[Transform];
    fn n_points(&self) -> usize;
    /// Fills the weighted residuals `(f − y)/σ` and, row-major, their
    /// derivatives with respect to the natural parameters.
    fn eval(&self, p: &[f64], r: &mut [f64], jac: &mut [f64]);
}

fn chi2_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Checks data points: finite values and positive uncertainties.
pub(crate) fn check_points(points: &[DataPoint], need: usize) -> Result<(), FitError> {
    if points.len() < need {
        return Err(FitError::TooFewPoints {
            need,
            got: points.len(),
        });
    }
    for (i, p) in points.iter().enumerate() {
        if !(p.t_ns.is_finite() && p.value.is_finite()) {
            return Err(FitError::NonFinite(i));
        }
        if !(p.stderr > 0.0 && p.stderr.is_finite()) {
            return Err(FitError::BadUncertainty(i));
        }
    }
    Ok(())
}

/// Levenberg-Marquardt minimization of χ² from the natural start `p0`.
pub(crate) fn levenberg_marquardt<P: Problem>(
    problem: &P,
    names: &[&'static str],
    p0: &[f64],
) -> FitResult {
    let tr = problem.transforms();
    let n = tr.len();
    let m = problem.n_points();
    let natural =
        |q: &[f64]| -> Vec<f64> { q.iter().zip(tr).map(|(&q, t)| t.to_natural(q)).collect() };
    // Residuals and the Jacobian with respect to the internal parameters.
    let eval = |q: &[f64], r: &mut [f64], jac: &mut [f64]| {
        let p = natural(q);
        problem.eval(&p, r, jac);
        for row in jac.chunks_exact_mut(n) {
            for k in 0..n {
                row[k] *= tr[k].derivative(p[k]);
            }
        }
    };

    let mut q: Vec<f64> = p0.iter().zip(tr).map(|(&p, t)| t.to_internal(p)).collect();
    let mut r = vec![0.0; m];
    let mut jac = vec![0.0; m * n];
    eval(&q, &mut r, &mut jac);
    let mut chi2 = chi2_of(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut polish = 0;
    let (mut r_try, mut jac_try) = (vec![0.0; m], vec![0.0; m * n]);

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if chi2 == 0.0 {
            converged = true;
            break;
        }
        let (a, g) = linalg::normal_equations(&jac, &r, n);
        let dmax = (0..n).map(|i| a[i * n + i]).fold(0.0f64, f64::max);
        let mut stepped = false;
        while lambda < 1e16 {
            let mut damped = a.clone();
            for i in 0..n {
                damped[i * n + i] += lambda * a[i * n + i].max(1e-12 * dmax).max(1e-300);
            }
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            let Some(delta) = linalg::solve(&damped, &neg) else {
                lambda *= 10.0;
                continue;
            };
            let q_try: Vec<f64> = q.iter().zip(&delta).map(|(a, b)| a + b).collect();
            eval(&q_try, &mut r_try, &mut jac_try);
            let chi2_try = chi2_of(&r_try);
            if chi2_try.is_finite() && chi2_try < chi2 {
                let rel = (chi2 - chi2_try) / chi2;
                q = q_try;
                core::mem::swap(&mut r, &mut r_try);
                core::mem::swap(&mut jac, &mut jac_try);
                chi2 = chi2_try;
                lambda = (lambda / 10.0).max(1e-12);
                stepped = true;
                if rel < REL_TOL {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !stepped {
            // No descent direction left at machine precision.
            converged = true;
            break;
        }
        if converged {
            // Steps near the minimum are nearly free; a few more take the
            // gradient down to rounding level.
            polish += 1;
            if polish > POLISH_STEPS {
                break;
            }
        }
    }

    let p = natural(&q);
    let mut jn = vec![0.0; m * n];
    problem.eval(&p, &mut r, &mut jn);
    let (a, _) = linalg::normal_equations(&jn, &r, n);
    let covariance = linalg::invert(&a, n).unwrap_or_else(|| {
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            c[i * n + i] = f64::INFINITY;
        }
        c
    });
    FitResult {
        names: names.to_vec(),
        values: p,
        covariance,
        chi2: chi2_of(&r),
        dof: m as i64 - n as i64,
        converged,
        iterations,
    }
}

/// Central finite-difference gradient of `f` at `p`, with relative steps.
pub fn numeric_gradient<F: Fn(&[f64]) -> f64>(f: F, p: &[f64], rel_step: f64) -> Vec<f64> {
    let mut x = p.to_vec();
    (0..p.len())
        .map(|i| {
            let h = rel_step * libm::fabs(p[i]).max(1e-8);
            x[i] = p[i] + h;
            let up = f(&x);
            x[i] = p[i] - h;
            let down = f(&x);
            x[i] = p[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! The Monte-Carlo criteria simulate 100 s per sweep point; set
//! `PHOTOSYNC_ACCEPTANCE_SECONDS` to shorten them while developing.

use std::time::Instant;

use photosync::config;
use photosync::reproduce::{self, Check, Options, Report};
use photosync_core::analysis::{
    cross_correlation, g2h_estimate, temporal_overlap, BinSpec, Histogram,
};
use photosync_core::fit::{
    calibrate_decay, decay_chi2, fit_decay, fit_g2_transmission, g2_chi2, numeric_gradient,
    DataPoint, G2Dataset,
};
use photosync_core::model::{
    avg_memory_efficiency, full_chain, g2_after_memory, memory_efficiency, snr, Estimate,
};
use photosync_core::{DecayModel, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

const SWEEP: [f64; 3] = [50e3, 200e3, 440e3];

struct Outcome {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn shipped_config() -> SystemConfig {
    config::parse(include_str!("../default-paper.cfg")).expect("shipped config parses")
}

/// Mean wall time of one call, in ms.
fn time_ms<T>(mut f: impl FnMut() -> T) -> f64 {
    let n = 1000;
    let start = Instant::now();
    for _ in 0..n {
        std::hint::black_box(f());
    }
    start.elapsed().as_secs_f64() * 1e3 / n as f64
}

fn within(x: f64, want: f64, tol: f64) -> bool {
    (x - want).abs() <= tol
}

fn analytic_low(cfg: &SystemConfig) -> Outcome {
    let c = cfg.with_r1(50e3);
    let r = full_chain(&c).unwrap();
    let (stoc, sync, zeta) = (
        r.r_stoc.unwrap().value,
        r.r_sync.unwrap().value,
        r.zeta.unwrap().value,
    );
    let ms = time_ms(|| full_chain(&c));
    let pass = within(stoc, 1.455, 1e-3)
        && within(sync, 44.0, 4.4)
        && within(zeta, 28.6, 1.8)
        && within(zeta, 28.1, 0.1)
        && ms < 1.0;
    Outcome {
        id: 1,
        name: "analytic chain, low rate",
        pass,
        detail: format!("R_stoc {stoc:.4}, R_sync {sync:.2}, zeta {zeta:.2}, {ms:.4} ms"),
    }
}

fn analytic_high(cfg: &SystemConfig) -> Outcome {
    let c = cfg.with_r1(440e3);
    let r = full_chain(&c).unwrap();
    let (stoc, sync, down) = (
        r.r_stoc.unwrap().value,
        r.r_sync.unwrap().value,
        r.downtime.unwrap().value,
    );
    let ms = time_ms(|| full_chain(&c));
    let pass = within(stoc, 113.0, 1.0)
        && within(stoc, 115.0, 0.05 * 115.0)
        && within(sync, 1350.0, 20.0)
        && (1200.0 - 3.0 * 10.0..=1.15 * 1200.0).contains(&sync)
        && within(down, 0.69, 0.01)
        && ms < 1.0;
    Outcome {
        id: 2,
        name: "analytic chain, high rate",
        pass,
        detail: format!("R_stoc {stoc:.2}, R_sync {sync:.1}, downtime {down:.4}, {ms:.4} ms"),
    }
}

fn downtime(cfg: &SystemConfig, mc: &Report) -> Outcome {
    let d = full_chain(&cfg.with_r1(50e3))
        .unwrap()
        .downtime
        .unwrap()
        .value;
    let row = mc.rows.iter().find(|r| r.r1 == 50e3).expect("low-rate row");
    let m = row.mc.report.downtime.unwrap();
    let z = m.z_score(d);
    Outcome {
        id: 3,
        name: "downtime formula",
        pass: within(d, 0.082, 0.005) && z <= 3.0,
        detail: format!(
            "formula {d:.5}, event log {:.5} ± {:.5} (z {z:.1})",
            m.value, m.stderr
        ),
    }
}

fn decay_calibration() -> Outcome {
    let m = calibrate_decay(0.262, 114.0, 0.196, 100.0).unwrap();
    let at_1e = m.eval(114.0) / 0.262 - (-1.0f64).exp();
    let avg = avg_memory_efficiency(&m, 100.0).unwrap();
    let e12 = memory_efficiency(12.0, &m).unwrap();
    let pass = at_1e.abs() <= 1e-6
        && within(avg, 0.196, 1e-6)
        && (0.235..=0.251).contains(&e12)
        && within(e12, 0.243, 0.008);
    Outcome {
        id: 4,
        name: "decay calibration",
        pass,
        detail: format!(
            "tau_sigma {:.3} ns, tau_gamma {:.3} ns, 1/e residual {at_1e:.1e}, mean {avg:.7}, eta(12 ns) {e12:.5}",
            m.tau_sigma_ns, m.tau_gamma_ns
        ),
    }
}

fn g2_chain(cfg: &SystemConfig) -> Outcome {
    let g = |t: f64| g2_after_memory(t, &cfg.source, &cfg.memory).unwrap();
    let g20 = g(20.0);
    let monotone = (0..250).all(|k| g(k as f64 + 1.0) > g(k as f64));
    let pass = within(g20, 0.022, 0.002) && (g20 - 0.023).abs() <= 0.002 + 0.001 && monotone;
    Outcome {
        id: 5,
        name: "g2 chain",
        pass,
        detail: format!("g2(20 ns) {g20:.5}, increasing to 250 ns: {monotone}"),
    }
}

fn snr_check() -> Outcome {
    let s = snr(0.20, 0.262, 1.7e-5).unwrap();
    Outcome {
        id: 6,
        name: "SNR",
        pass: within(s, 3082.0, 1.0) && within(s, 3100.0, 400.0),
        detail: format!("{s:.1}"),
    }
}

fn mc_equivalence(mc: &Report) -> Outcome {
    let mut worst = Vec::new();
    let mut pass = mc.rows.len() == SWEEP.len();
    for r in &mc.rows {
        let a = &r.analytic;
        let m = &r.mc.report;
        for (name, ana, sim) in [
            ("R_stoc", a.r_stoc, m.r_stoc),
            ("R_sync", a.r_sync, m.r_sync),
            ("r_trig2", a.r_trig2, m.r_trig2),
            ("r_sync_trials", a.r_sync_trials, m.r_sync_trials),
            ("downtime", a.downtime, m.downtime),
        ] {
            let z = match (ana, sim) {
                (Some(a), Some(s)) => s.z_score(a.value),
                _ => f64::INFINITY,
            };
            if z > 3.0 {
                pass = false;
                worst.push(format!("{name}@{} z {z:.1}", r.r1));
            }
        }
    }
    Outcome {
        id: 7,
        name: "MC vs analytic",
        pass,
        detail: if worst.is_empty() {
            "all within 3 sigma".into()
        } else {
            worst.join(", ")
        },
    }
}

fn poisson_stream(rng: &mut ChaCha8Rng, rate_hz: f64, duration_s: f64) -> Vec<u64> {
    let gap = Exp::new(rate_hz * 1e-12).unwrap();
    let end = duration_s * 1e12;
    let mut t = 0.0;
    let mut v = Vec::new();
    loop {
        t += gap.sample(rng);
        if t >= end {
            return v;
        }
        v.push(t as u64);
    }
}

fn estimator_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let spec = BinSpec::default();
    let mut cross_ok = true;
    for _ in 0..50 {
        let stream = |rng: &mut ChaCha8Rng| {
            let n = rng.random_range(0..=1000);
            let mut v: Vec<u64> = (0..n).map(|_| rng.random_range(0..2_000_000)).collect();
            v.sort_unstable();
            v
        };
        let (a, b) = (stream(&mut rng), stream(&mut rng));
        let mut brute = Histogram::new(spec);
        for &x in &a {
            for &y in &b {
                brute.add(y as i64 - x as i64);
            }
        }
        cross_ok &= cross_correlation(&a, &b, spec).unwrap() == brute;
    }

    let herald = poisson_stream(&mut rng, 1e6, 1.0);
    let light = poisson_stream(&mut rng, 1e7, 1.0);
    let (mut sa, mut sb) = (Vec::new(), Vec::new());
    for t in light {
        match rng.random_range(0..4) {
            0 => sa.push(t),
            1 => sb.push(t),
            _ => {}
        }
    }
    let g2 = g2h_estimate(&herald, &sa, &sb, 0, 0, 3500).unwrap();

    let mut h = Histogram::new(spec);
    for _ in 0..10_000 {
        h.add(rng.random_range(spec.t_min..spec.t_max));
    }
    let overlap = temporal_overlap(&h, &h).unwrap();
    Outcome {
        id: 8,
        name: "estimator oracles",
        pass: cross_ok && g2.z_score(1.0) <= 3.0 && overlap == 1.0,
        detail: format!(
            "cross-correlation matches brute force: {cross_ok}, g2 {:.4} ± {:.4}, self-overlap {overlap}",
            g2.value, g2.stderr
        ),
    }
}

fn hom(mc: &Report) -> Outcome {
    let checks: Vec<&Check> = mc
        .checks
        .iter()
        .filter(|c| c.name.starts_with("mc_v_") || c.name == "mc_overlap_i")
        .collect();
    let nonclassical = checks
        .iter()
        .filter(|c| c.name.starts_with("mc_v_sync_nonclassical"))
        .count();
    let pass = checks.len() == 3 + SWEEP.len()
        && nonclassical == SWEEP.len()
        && checks.iter().all(|c| c.pass);
    Outcome {
        id: 9,
        name: "HOM visibility and overlap",
        pass,
        detail: checks
            .iter()
            .map(|c| format!("{} {:.3} ± {:.3}", c.name, c.value.value, c.value.stderr))
            .collect::<Vec<_>>()
            .join(", "),
    }
}

/// Counts parameters outside 3σ of the truth, and the worst gradient norm.
struct Recovery {
    excursions: usize,
    checked: usize,
    max_gradient: f64,
    all_converged: bool,
}

impl Recovery {
    /// Excursions expected at 0.27 % are Poisson with a small mean; more than
    /// the 99.9 % quantile of that Poisson count fails.
    fn pass(&self) -> bool {
        let mean = 0.0027 * self.checked as f64;
        let (mut k, mut p, mut cdf) = (0usize, (-mean).exp(), (-mean).exp());
        while cdf < 0.999 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        self.all_converged && self.excursions <= k && self.max_gradient < 1e-6
    }
}

fn decay_recovery() -> Recovery {
    let truth = DecayModel::new(0.262, 98.6, 343.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut r = Recovery {
        excursions: 0,
        checked: 0,
        max_gradient: 0.0,
        all_converged: true,
    };
    for _ in 0..100 {
        let pts: Vec<DataPoint> = (1..=20)
            .map(|k| {
                let t = 12.5 * k as f64;
                let se = 0.001 + 0.02 * truth.eval(t);
                let noise = Normal::new(0.0, se).unwrap().sample(&mut rng);
                DataPoint::new(t, truth.eval(t) + noise, se)
            })
            .collect();
        let fit = fit_decay(&pts).unwrap();
        r.all_converged &= fit.converged;
        for (i, want) in [truth.eta0, truth.tau_sigma_ns, truth.tau_gamma_ns]
            .into_iter()
            .enumerate()
        {
            r.checked += 1;
            r.excursions += (fit.estimate(i).z_score(want) > 3.0) as usize;
        }
        let g = numeric_gradient(
            |p| {
                decay_chi2(
                    &pts,
                    &DecayModel {
                        eta0: p[0],
                        tau_sigma_ns: p[1],
                        tau_gamma_ns: p[2],
                    },
                )
            },
            &fit.values,
            1e-6,
        );
        r.max_gradient = r
            .max_gradient
            .max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    r
}

fn g2_recovery(cfg: &SystemConfig) -> Recovery {
    let truth = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut r = Recovery {
        excursions: 0,
        checked: 0,
        max_gradient: 0.0,
        all_converged: true,
    };
    for _ in 0..100 {
        let sets: Vec<G2Dataset> = [0.2, 0.35, 0.5]
            .into_iter()
            .map(|rho| {
                let mut source = cfg.source.clone();
                source.rho = rho;
                let mut memory = cfg.memory.clone();
                memory.t_retrieval_factor = truth;
                let points = (1..=10)
                    .map(|k| {
                        let t = 20.0 * k as f64;
                        let g = g2_after_memory(t, &source, &memory).unwrap();
                        let se = 0.05 * g;
                        let noise = Normal::new(0.0, se).unwrap().sample(&mut rng);
                        DataPoint::new(t, g + noise, se)
                    })
                    .collect();
                G2Dataset {
                    points,
                    g2_source: source.g2_source,
                    rho,
                    decay: memory.decay,
                    transmission: memory.transmission,
                    t_offres_factor: memory.t_offres_factor,
                }
            })
            .collect();
        let fit = fit_g2_transmission(&sets).unwrap();
        r.all_converged &= fit.converged;
        r.checked += 1;
        r.excursions += (fit.estimate(0).z_score(truth) > 3.0) as usize;
        let g = numeric_gradient(|p| g2_chi2(&sets, p[0]), &fit.values, 1e-6);
        r.max_gradient = r.max_gradient.max(g[0].abs());
    }
    r
}

fn fit_recovery(cfg: &SystemConfig) -> Outcome {
    let d = decay_recovery();
    let g = g2_recovery(cfg);
    Outcome {
        id: 10,
        name: "fit recovery",
        pass: d.pass() && g.pass(),
        detail: format!(
            "decay: {}/{} beyond 3 sigma, max |grad| {:.1e}; g2: {}/{} beyond 3 sigma, max |grad| {:.1e}",
            d.excursions, d.checked, d.max_gradient, g.excursions, g.checked, g.max_gradient
        ),
    }
}

fn invariants(mc: &Report) -> Outcome {
    let get = |n: &str| mc.checks.iter().find(|c| c.name == n);
    let (det, spacing) = (get("determinism"), get("spacing_violations"));
    Outcome {
        id: 11,
        name: "determinism and dead-time invariants",
        pass: det.is_some_and(|c| c.pass) && spacing.is_some_and(|c| c.pass),
        detail: format!(
            "{}; {}",
            det.map_or("determinism not run", |c| &c.note),
            spacing.map_or("spacing not checked", |c| &c.note)
        ),
    }
}

#[test]
fn acceptance_criteria() {
    let cfg = shipped_config();
    let seconds = std::env::var("PHOTOSYNC_ACCEPTANCE_SECONDS")
        .ok()
        .and_then(|s| s.parse::<f64>().ok())
        .unwrap_or(100.0);
    let mc = reproduce::run(&Options {
        config: cfg.clone(),
        sweep: SWEEP.to_vec(),
        seed: 1,
        duration_s: seconds,
        aux_duration_s: seconds / 10.0,
    })
    .expect("Monte-Carlo runs complete");

    let outcomes = [
        analytic_low(&cfg),
        analytic_high(&cfg),
        downtime(&cfg, &mc),
        decay_calibration(),
        g2_chain(&cfg),
        snr_check(),
        mc_equivalence(&mc),
        estimator_oracles(),
        hom(&mc),
        fit_recovery(&cfg),
        invariants(&mc),
    ];
    for o in &outcomes {
        println!(
            "criterion {:>2} {} {}: {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn zero_count_rate_has_unit_error() {
    let e = Estimate::poisson_rate(0, 2.0);
    assert_eq!((e.value, e.stderr), (0.0, 0.5));
}

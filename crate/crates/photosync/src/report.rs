//! CSV outputs. Column order and header names are fixed.

use std::fmt::Write as _;

use photosync_core::analysis::{DecayCurve, Histogram};
use photosync_core::fit::FitResult;
use photosync_core::model::{full_chain_detail, Estimate};
use photosync_core::SystemConfig;

pub const METRICS_HEADER: &str = "metric,value,stderr,n";
pub const HISTOGRAM_HEADER: &str = "tau_ps,counts";
pub const POINTS_HEADER: &str = "t_ns,value,stderr";
pub const FIT_HEADER: &str = "parameter,value,stderr";
pub const MODEL_HEADER: &str =
    "r1_cps,r2_cps,r_stoc,r_sync,zeta,r_trig2,r_sync_trials,downtime,g2_h,p_trig1,eta_bar,status";

/// One row of a metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: Estimate,
    /// Number of counts or trials behind the value.
    pub n: u64,
}

impl Metric {
    pub fn new(name: impl Into<String>, value: Estimate, n: u64) -> Self {
        Metric {
            name: name.into(),
            value,
            n,
        }
    }
}

pub fn metrics_csv(rows: &[Metric]) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for m in rows {
        let _ = writeln!(s, "{},{},{},{}", m.name, m.value.value, m.value.stderr, m.n);
    }
    s
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut s = format!("{HISTOGRAM_HEADER}\n");
    for (i, c) in h.counts.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{}",
            h.spec.t_min + (i as u64 * h.spec.bin_width) as i64,
            c
        );
    }
    s
}

pub fn decay_csv(c: &DecayCurve) -> String {
    let mut s = format!("{POINTS_HEADER}\n");
    for p in &c.points {
        let _ = writeln!(
            s,
            "{},{},{}",
            p.storage_ns, p.efficiency.value, p.efficiency.stderr
        );
    }
    s
}

/// Parses `t_ns,value,stderr` rows (header required).
pub fn parse_points(text: &str) -> Result<Vec<photosync_core::fit::DataPoint>, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == POINTS_HEADER => {}
        _ => return Err(format!("line 1: expected header `{POINTS_HEADER}`")),
    }
    let mut out = Vec::new();
    for (i, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        let nums: Result<Vec<f64>, _> = f.iter().map(|x| x.parse::<f64>()).collect();
        match nums {
            Ok(v) if v.len() == 3 => {
                out.push(photosync_core::fit::DataPoint::new(v[0], v[1], v[2]))
            }
            _ => return Err(format!("line {}: expected three numbers", i + 1)),
        }
    }
    Ok(out)
}

pub fn fit_csv(r: &FitResult) -> String {
    let mut s = format!("{FIT_HEADER}\n");
    for i in 0..r.n_params() {
        let _ = writeln!(s, "{},{},{}", r.names[i], r.values[i], r.stderr(i));
    }
    s
}

pub fn fit_text(r: &FitResult) -> String {
    let mut s = String::new();
    for i in 0..r.n_params() {
        let _ = writeln!(
            s,
            "{:<20} {:>14.6} ± {:.6}",
            r.names[i],
            r.values[i],
            r.stderr(i)
        );
    }
    let _ = writeln!(
        s,
        "chi2 = {:.4}, dof = {}, converged = {}, iterations = {}",
        r.chi2, r.dof, r.converged, r.iterations
    );
    s
}

/// Analytic chain over a set of `r1` values, one row each; infeasible
/// points are reported in the status column.
pub fn model_sweep_csv(base: &SystemConfig, r1s: &[f64]) -> String {
    let mut s = format!("{MODEL_HEADER}\n");
    for &r1 in r1s {
        let cfg = base.with_r1(r1);
        match full_chain_detail(&cfg) {
            Ok((r, d)) => {
                let v = |e: Option<Estimate>| e.map(|e| e.value.to_string()).unwrap_or_default();
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{},ok",
                    cfg.source.r1,
                    cfg.source.r2,
                    v(r.r_stoc),
                    v(r.r_sync),
                    v(r.zeta),
                    v(r.r_trig2),
                    v(r.r_sync_trials),
                    v(r.downtime),
                    v(r.g2_h),
                    d.p_trig1,
                    d.eta_bar
                );
            }
            Err(e) => {
                let _ = writeln!(
                    s,
                    "{},{},,,,,,,,,,\"infeasible: {e}\"",
                    cfg.source.r1, cfg.source.r2
                );
            }
        }
    }
    s
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_sweep_is_monotone_and_flags_infeasible_rows() {
        let cfg = SystemConfig::reference_defaults();
        let csv = model_sweep_csv(&cfg, &linspace(50e3, 440e3, 10));
        let zetas: Vec<f64> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
            .collect();
        assert_eq!(zetas.len(), 10);
        assert!(zetas.windows(2).all(|w| w[1] < w[0]));
        assert!(
            (zetas[0] - 28.1).abs() < 0.2 && (11.0..=12.5).contains(&zetas[9]),
            "{zetas:?}"
        );
        let bad = model_sweep_csv(&cfg, &[1e9]);
        assert!(bad.lines().nth(1).unwrap().contains("infeasible"));
        assert_eq!(model_sweep_csv(&cfg, &[]), format!("{MODEL_HEADER}\n"));
    }

    #[test]
    fn points_round_trip() {
        let pts = parse_points("t_ns,value,stderr\n1,0.2,0.01\n\n2,0.1,0.01\n").unwrap();
        assert_eq!(pts.len(), 2);
        assert!(parse_points("x\n").is_err());
        assert!(parse_points("t_ns,value,stderr\n1,2\n")
            .unwrap_err()
            .starts_with("line 2"));
    }
}

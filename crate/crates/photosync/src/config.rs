//! Flat `key = value` configuration files.
//!
//! A file lists overrides of the built-in reference defaults, one per line;
//! `#` starts a comment. Time values take an optional `ps`, `ns`, `us` or
//! `s` suffix, otherwise they are read in the unit named by the key
//! (`_ps`, `_ns`). [`to_canonical`] writes every key in a fixed order and
//! format; its SHA-256 is the configuration hash.

use std::fmt::Write as _;
use std::path::Path;

use photosync_core::units::Picos;
use photosync_core::{EnvelopeShape, MemoryMode, Routing, SystemConfig};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`: {reason}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        reason: &'static str,
    },
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Float,
    /// f64 in the given unit (ps per unit).
    FloatTime(i64),
    /// Picos, default unit in ps per unit.
    Time(i64),
    Int,
    Mode,
    Routing,
    Envelope,
}

enum Value {
    F(f64),
    T(Picos),
    I(u64),
    M(MemoryMode),
    R(Routing),
    E(EnvelopeShape),
}

struct Key {
    name: &'static str,
    kind: Kind,
    get: fn(&SystemConfig) -> Value,
    set: fn(&mut SystemConfig, Value),
}

const PS: i64 = 1;
const NS: i64 = 1_000;

macro_rules! key {
    ($name:literal, Float, $($f:ident).+) => {
        Key { name: $name, kind: Kind::Float, get: |c| Value::F(c.$($f).+), set: |c, v| if let Value::F(x) = v { c.$($f).+ = x } }
    };
    ($name:literal, FloatTime($u:expr), $($f:ident).+) => {
        Key { name: $name, kind: Kind::FloatTime($u), get: |c| Value::F(c.$($f).+), set: |c, v| if let Value::F(x) = v { c.$($f).+ = x } }
    };
    ($name:literal, Time($u:expr), $($f:ident).+) => {
        Key { name: $name, kind: Kind::Time($u), get: |c| Value::T(c.$($f).+), set: |c, v| if let Value::T(x) = v { c.$($f).+ = x } }
    };
    ($name:literal, Int, $($f:ident).+) => {
        Key { name: $name, kind: Kind::Int, get: |c| Value::I(c.$($f).+), set: |c, v| if let Value::I(x) = v { c.$($f).+ = x } }
    };
    ($name:literal, Mode, $($f:ident).+) => {
        Key { name: $name, kind: Kind::Mode, get: |c| Value::M(c.$($f).+), set: |c, v| if let Value::M(x) = v { c.$($f).+ = x } }
    };
    ($name:literal, Routing, $($f:ident).+) => {
        Key { name: $name, kind: Kind::Routing, get: |c| Value::R(c.$($f).+), set: |c, v| if let Value::R(x) = v { c.$($f).+ = x } }
    };
    ($name:literal, Envelope, $($f:ident).+) => {
        Key { name: $name, kind: Kind::Envelope, get: |c| Value::E(c.$($f).+), set: |c, v| if let Value::E(x) = v { c.$($f).+ = x } }
    };
}

const KEYS: &[Key] = &[
    key!("source.r1_cps", Float, source.r1),
    key!("source.r2_cps", Float, source.r2),
    key!("source.eta_h1", Float, source.eta_h1),
    key!("source.eta_h2", Float, source.eta_h2),
    key!("source.g2", Float, source.g2_source),
    key!("source.rho", Float, source.rho),
    key!("source.pulse_fwhm_ps", Time(PS), source.pulse_fwhm),
    key!("memory.eta0", Float, memory.decay.eta0),
    key!(
        "memory.tau_sigma_ns",
        FloatTime(NS),
        memory.decay.tau_sigma_ns
    ),
    key!(
        "memory.tau_gamma_ns",
        FloatTime(NS),
        memory.decay.tau_gamma_ns
    ),
    key!("memory.transmission", Float, memory.transmission),
    key!("memory.nu", Float, memory.nu),
    key!("memory.t_offres_factor", Float, memory.t_offres_factor),
    key!(
        "memory.t_retrieval_factor",
        Float,
        memory.t_retrieval_factor
    ),
    key!("electronics.t_star_ns", Time(NS), electronics.t_star),
    key!("electronics.tau_d1_ns", Time(NS), electronics.tau_d1),
    key!("electronics.tau_d2_ns", Time(NS), electronics.tau_d2),
    key!(
        "electronics.pc_min_spacing_ns",
        Time(NS),
        electronics.pc_min_spacing
    ),
    key!(
        "electronics.insertion_delay_ns",
        Time(NS),
        electronics.insertion_delay
    ),
    key!(
        "electronics.ddg1_delay_ns",
        Time(NS),
        electronics.ddg1_delay
    ),
    key!(
        "electronics.retrieval_delay_ns",
        Time(NS),
        electronics.retrieval_delay
    ),
    key!(
        "electronics.retrieval_trim_ps",
        Time(PS),
        electronics.retrieval_trim
    ),
    key!("detector.efficiency", Float, detector.efficiency),
    key!(
        "detector.jitter_ps",
        FloatTime(PS),
        detector.jitter_sigma_ps
    ),
    key!("detector.coupling_memory", Float, detector.coupling_memory),
    key!("detector.coupling_direct", Float, detector.coupling_direct),
    key!(
        "analysis.coincidence_window_ps",
        Time(PS),
        model.coincidence_window
    ),
    key!("analysis.g2_reference_ns", Time(NS), model.g2_reference),
    key!("sim.mode", Mode, sim.mode),
    key!("sim.routing", Routing, sim.routing),
    key!("sim.envelope", Envelope, sim.envelope),
    key!("sim.retrieved_fwhm_ps", Time(PS), sim.retrieved_fwhm),
    key!("sim.indistinguishability", Float, sim.indistinguishability),
    key!("sim.storage_time_ns", Time(NS), sim.storage_time),
    key!("sim.control_window_ps", Time(PS), sim.control_window),
    key!("sim.idler_delay_ns", Time(NS), sim.idler_delay),
    key!(
        "sim.memory_output_delay_ns",
        Time(NS),
        sim.memory_output_delay
    ),
    key!("sim.detector_delay_ns", Time(NS), sim.detector_delay),
    key!("sim.event_cap", Int, sim.event_cap),
];

/// Canonical key names, in file order.
pub fn key_names() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|k| k.name)
}

/// Splits a number from an optional time-unit suffix; returns ps per unit.
fn split_unit(v: &str) -> (&str, Option<i64>) {
    for (suffix, scale) in [
        ("ps", 1),
        ("ns", 1_000),
        ("us", 1_000_000),
        ("µs", 1_000_000),
        ("s", 1_000_000_000_000),
    ] {
        if let Some(num) = v.strip_suffix(suffix) {
            return (num.trim_end(), Some(scale));
        }
    }
    (v, None)
}

fn parse_value(kind: Kind, raw: &str) -> Result<Value, &'static str> {
    let bad_number = "not a number";
    match kind {
        Kind::Float => raw.parse::<f64>().map(Value::F).map_err(|_| bad_number),
        Kind::FloatTime(unit) => {
            let (num, scale) = split_unit(raw);
            let x: f64 = num.parse().map_err(|_| bad_number)?;
            Ok(Value::F(x * scale.unwrap_or(unit) as f64 / unit as f64))
        }
        Kind::Time(unit) => {
            let (num, scale) = split_unit(raw);
            let x: f64 = num.parse().map_err(|_| bad_number)?;
            let ps = x * scale.unwrap_or(unit) as f64;
            if !ps.is_finite() || ps.abs() > 9.0e18 {
                return Err("time out of range");
            }
            if (ps - ps.round()).abs() > 1e-6 * ps.abs().max(1.0) {
                return Err("not a whole number of ps");
            }
            Ok(Value::T(Picos::from_ps(ps.round() as i64)))
        }
        Kind::Int => raw
            .replace('_', "")
            .parse::<u64>()
            .map(Value::I)
            .map_err(|_| "not a non-negative integer"),
        Kind::Mode => match raw {
            "off" => Ok(Value::M(MemoryMode::Off)),
            "sync" => Ok(Value::M(MemoryMode::Sync)),
            "characterize" => Ok(Value::M(MemoryMode::Characterize)),
            _ => Err("expected off, sync or characterize"),
        },
        Kind::Routing => match raw {
            "direct" => Ok(Value::R(Routing::Direct)),
            "hbt" => Ok(Value::R(Routing::Hbt)),
            "hom" => Ok(Value::R(Routing::Hom)),
            _ => Err("expected direct, hbt or hom"),
        },
        Kind::Envelope => match raw {
            "gaussian" => Ok(Value::E(EnvelopeShape::Gaussian)),
            "two-sided-exponential" => Ok(Value::E(EnvelopeShape::TwoSidedExponential)),
            _ => Err("expected gaussian or two-sided-exponential"),
        },
    }
}

fn format_value(kind: Kind, v: Value) -> String {
    match (kind, v) {
        (_, Value::F(x)) => format!("{x}"),
        (Kind::Time(unit), Value::T(t)) => {
            if t.ps() % unit == 0 {
                format!("{}", t.ps() / unit)
            } else {
                format!("{} ps", t.ps())
            }
        }
        (_, Value::T(t)) => format!("{} ps", t.ps()),
        (_, Value::I(i)) => format!("{i}"),
        (_, Value::M(m)) => match m {
            MemoryMode::Off => "off",
            MemoryMode::Sync => "sync",
            MemoryMode::Characterize => "characterize",
        }
        .into(),
        (_, Value::R(r)) => match r {
            Routing::Direct => "direct",
            Routing::Hbt => "hbt",
            Routing::Hom => "hom",
        }
        .into(),
        (_, Value::E(e)) => match e {
            EnvelopeShape::Gaussian => "gaussian",
            EnvelopeShape::TwoSidedExponential => "two-sided-exponential",
        }
        .into(),
    }
}

/// Applies the `key = value` lines of `text` on top of `base`.
pub fn apply(base: &SystemConfig, text: &str) -> Result<SystemConfig, ConfigError> {
    let mut cfg = base.clone();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or(ConfigError::Syntax { line })?;
        let (k, v) = (k.trim(), v.trim());
        let key = KEYS
            .iter()
            .find(|e| e.name == k)
            .ok_or_else(|| ConfigError::UnknownKey {
                line,
                key: k.to_string(),
            })?;
        if !seen.insert(key.name) {
            return Err(ConfigError::Duplicate {
                line,
                key: k.to_string(),
            });
        }
        let value = parse_value(key.kind, v).map_err(|reason| ConfigError::BadValue {
            line,
            key: k.to_string(),
            value: v.to_string(),
            reason,
        })?;
        (key.set)(&mut cfg, value);
    }
    Ok(cfg)
}

/// Parses a configuration file's text over the reference defaults.
pub fn parse(text: &str) -> Result<SystemConfig, ConfigError> {
    apply(&SystemConfig::reference_defaults(), text)
}

pub fn load(path: &Path) -> Result<SystemConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse(&text)
}

/// Every key in canonical order and format.
pub fn to_canonical(cfg: &SystemConfig) -> String {
    let mut s = String::new();
    for k in KEYS {
        let _ = writeln!(s, "{} = {}", k.name, format_value(k.kind, (k.get)(cfg)));
    }
    s
}

/// Hex SHA-256 of the canonical serialization.
pub fn config_hash(cfg: &SystemConfig) -> String {
    let digest = Sha256::digest(to_canonical(cfg).as_bytes());
    hex(&digest)
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shipped_file_is_the_default() {
        let text = include_str!("../default-paper.cfg");
        assert_eq!(parse(text).unwrap(), SystemConfig::reference_defaults());
    }

    #[test]
    fn canonical_round_trips() {
        let cfg = SystemConfig::reference_defaults();
        let text = to_canonical(&cfg);
        assert_eq!(parse(&text).unwrap(), cfg);
        assert_eq!(text.lines().count(), KEYS.len());
    }

    #[test]
    fn units_and_comments() {
        let cfg = parse("# header\nelectronics.t_star_ns = 0.1 us  # gate\nsim.control_window_ps = 3.5ns\nmemory.tau_gamma_ns = inf\n").unwrap();
        assert_eq!(cfg.electronics.t_star, Picos::from_ns(100));
        assert_eq!(cfg.sim.control_window, Picos::from_ps(3500));
        assert!(cfg.memory.decay.tau_gamma_ns.is_infinite());
    }

    #[test]
    fn errors_name_the_line() {
        assert_eq!(parse("a\n"), Err(ConfigError::Syntax { line: 1 }));
        assert!(matches!(
            parse("\nfoo = 1"),
            Err(ConfigError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(
            parse("memory.nu = 1\nmemory.nu = 2"),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
        assert!(matches!(
            parse("sim.mode = on"),
            Err(ConfigError::BadValue { line: 1, .. })
        ));
        assert!(matches!(
            parse("source.pulse_fwhm_ps = 0.5"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn hash_tracks_content() {
        let a = SystemConfig::reference_defaults();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.memory.nu *= 100.0;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    proptest! {
        #[test]
        fn floats_round_trip(r1 in 0.0f64..1e7, nu in 0.0f64..1.0, trim in -100_000i64..100_000) {
            let mut c = SystemConfig::reference_defaults();
            c.source.r1 = r1;
            c.memory.nu = nu;
            c.electronics.retrieval_trim = Picos::from_ps(trim);
            prop_assert_eq!(parse(&to_canonical(&c)).unwrap(), c);
        }
    }
}

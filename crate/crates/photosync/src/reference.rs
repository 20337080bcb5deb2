//! Published reference values, versioned.
//!
//! The values are transcribed once and never recomputed; `source` names
//! where in the publication each one is reported.

/// Bumped whenever a value or citation changes.
pub const TABLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub key: &'static str,
    pub value: f64,
    /// One-sigma error as published, when given.
    pub stderr: Option<f64>,
    pub source: &'static str,
}

pub const REFERENCES: &[Reference] = &[
    Reference {
        key: "zeta_low_rate",
        value: 28.6,
        stderr: Some(1.8),
        source: "rate enhancement at the lowest single-photon rate",
    },
    Reference {
        key: "r_sync_low_rate",
        value: 44.0,
        stderr: None,
        source: "synchronized pair rate at 50 kcps (rate-enhancement figure)",
    },
    Reference {
        key: "r_stoc_high_rate",
        value: 115.0,
        stderr: None,
        source: "accidental pair rate at 440 kcps (rate-enhancement figure)",
    },
    Reference {
        key: "r_sync_high_rate",
        value: 1200.0,
        stderr: Some(10.0),
        source: "highest synchronized pair rate",
    },
    Reference {
        key: "eta0",
        value: 0.262,
        stderr: Some(0.005),
        source: "fitted zero-time end-to-end memory efficiency",
    },
    Reference {
        key: "lifetime_ns",
        value: 114.0,
        stderr: Some(2.0),
        source: "fitted 1/e memory lifetime",
    },
    Reference {
        key: "g2_after_memory",
        value: 0.023,
        stderr: Some(0.001),
        source: "heralded g2 of retrieved photons after 20 ns",
    },
    Reference {
        key: "g2_source",
        value: 0.0126,
        stderr: Some(0.0002),
        source: "heralded g2 of the un-stored signal",
    },
    Reference {
        key: "snr",
        value: 3100.0,
        stderr: Some(400.0),
        source: "short-time signal-to-noise ratio of the memory",
    },
    Reference {
        key: "eta_h_snr",
        value: 0.20,
        stderr: None,
        source: "source heralding efficiency used for the signal-to-noise ratio",
    },
    Reference {
        key: "v_stoc",
        value: 0.88,
        stderr: Some(0.02),
        source: "HOM visibility of accidental pairs without the memory",
    },
    Reference {
        key: "v_sync",
        value: 0.76,
        stderr: Some(0.02),
        source: "HOM visibility of synchronized pairs",
    },
    Reference {
        key: "overlap_i",
        value: 0.91,
        stderr: None,
        source: "supplement, temporal overlap of retrieved and reference photons",
    },
];

/// Looks up a reference value.
///
/// # Panics
/// If `key` is not in [`REFERENCES`].
pub fn get(key: &str) -> &'static Reference {
    REFERENCES
        .iter()
        .find(|r| r.key == key)
        .unwrap_or_else(|| panic!("no reference value `{key}`"))
}

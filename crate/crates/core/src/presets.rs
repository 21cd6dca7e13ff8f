//! Tabulated parameter sets for the two characterized high-pressure sites and
//! an ambient-pressure reference emitter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::LifetimeModel;
use crate::photodynamics::PhotoRateParams;
use crate::strain::HamiltonianCouplings;

/// A value with its quoted uncertainty. `error` is `None` where none is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quoted {
    pub value: f64,
    pub error: Option<f64>,
}

const fn q(value: f64, error: f64) -> Quoted {
    Quoted {
        value,
        error: Some(error),
    }
}

const fn exact(value: f64) -> Quoted {
    Quoted { value, error: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SitePreset {
    pub name: &'static str,
    /// Ground-state zero-field splitting (GHz), from the resonance position.
    pub d_gs_ghz: f64,
    pub tau_bright_ns: Quoted,
    pub tau_dark_ns: Quoted,
    pub d_es_ghz: Quoted,
    pub e1_es_ghz: Quoted,
    pub e2_es_ghz: Quoted,
    pub k_r_mhz: Quoted,
    pub k_isc0_mhz: Quoted,
    pub k_isc1_mhz: Quoted,
    pub q0: Quoted,
}

pub const SITE_I: SitePreset = SitePreset {
    name: "site-I",
    d_gs_ghz: 3.79,
    tau_bright_ns: q(6.12, 0.02),
    tau_dark_ns: q(2.05, 0.01),
    d_es_ghz: q(0.85, 0.01),
    e1_es_ghz: q(0.09, 0.01),
    e2_es_ghz: q(0.16, 0.02),
    k_r_mhz: q(132.0, 2.0),
    k_isc0_mhz: q(32.0, 2.0),
    k_isc1_mhz: q(357.0, 3.0),
    q0: q(0.39, 0.01),
};

pub const SITE_IV: SitePreset = SitePreset {
    name: "site-IV",
    d_gs_ghz: 3.79,
    tau_bright_ns: q(6.59, 0.03),
    tau_dark_ns: q(2.32, 0.03),
    d_es_ghz: q(0.80, 0.06),
    e1_es_ghz: q(0.25, 0.04),
    e2_es_ghz: q(1.19, 0.03),
    k_r_mhz: q(150.0, 1.0),
    k_isc0_mhz: q(2.0, 1.0),
    k_isc1_mhz: q(282.0, 6.0),
    q0: q(0.21, 0.01),
};

pub const AMBIENT: SitePreset = SitePreset {
    name: "ambient",
    d_gs_ghz: 2.87,
    tau_bright_ns: exact(13.7),
    tau_dark_ns: exact(8.6),
    d_es_ghz: exact(1.4),
    e1_es_ghz: exact(0.0),
    e2_es_ghz: exact(0.0),
    k_r_mhz: q(67.7, 3.4),
    k_isc0_mhz: q(6.4, 2.3),
    k_isc1_mhz: q(50.7, 4.4),
    q0: q(0.54, 0.22),
};

pub const ALL: [SitePreset; 3] = [SITE_I, SITE_IV, AMBIENT];

/// Per-pulse excitation probability used when a preset drives a simulation.
/// Not part of the tabulated data.
pub const DEFAULT_ETA: f64 = 0.15;
pub const DEFAULT_MW_RATE_MHZ: f64 = 5.0;
pub const DEFAULT_LINEWIDTH_MHZ: f64 = 20.0;

impl SitePreset {
    /// Looks up a preset by name. Accepts `I`, `site-I`, `site_iv`, `ambient`
    /// and similar spellings.
    pub fn by_name(name: &str) -> Result<Self> {
        let n = name.trim().to_ascii_lowercase().replace('_', "-");
        let n = n.strip_prefix("site-").unwrap_or(&n);
        match n {
            "i" | "1" => Ok(SITE_I),
            "iv" | "4" => Ok(SITE_IV),
            "ambient" | "amb" => Ok(AMBIENT),
            _ => Err(Error::InvalidParameter(format!(
                "unknown preset `{name}` (expected site-I, site-IV or ambient)"
            ))),
        }
    }

    /// Excited-state couplings with real, positive phases.
    pub fn es_couplings(&self) -> HamiltonianCouplings {
        HamiltonianCouplings::from_moduli(self.d_es_ghz.value, self.e1_es_ghz.value, self.e2_es_ghz.value)
    }

    /// Unstrained ground-state Hamiltonian at the observed splitting.
    pub fn gs_couplings(&self) -> HamiltonianCouplings {
        HamiltonianCouplings::unstrained(self.d_gs_ghz)
    }

    pub fn lifetime_model(&self) -> LifetimeModel {
        LifetimeModel {
            k_r: self.k_r_mhz.value,
            k_isc0: self.k_isc0_mhz.value,
            k_isc1: self.k_isc1_mhz.value,
        }
    }

    pub fn rates(&self, eta: f64) -> Result<PhotoRateParams> {
        PhotoRateParams::new(eta, self.lifetime_model(), self.q0.value)
    }

    /// `(name, value, error, unit)` rows for listing.
    pub fn rows(&self) -> Vec<(&'static str, Quoted, &'static str)> {
        vec![
            ("d_gs", exact(self.d_gs_ghz), "GHz"),
            ("tau_bright", self.tau_bright_ns, "ns"),
            ("tau_dark", self.tau_dark_ns, "ns"),
            ("d_es", self.d_es_ghz, "GHz"),
            ("e1_es", self.e1_es_ghz, "GHz"),
            ("e2_es", self.e2_es_ghz, "GHz"),
            ("k_r", self.k_r_mhz, "MHz"),
            ("k_isc0", self.k_isc0_mhz, "MHz"),
            ("k_isc1", self.k_isc1_mhz, "MHz"),
            ("q0", self.q0, ""),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        assert_eq!(SitePreset::by_name("I").unwrap(), SITE_I);
        assert_eq!(SitePreset::by_name("site-IV").unwrap(), SITE_IV);
        assert_eq!(SitePreset::by_name("site_iv").unwrap(), SITE_IV);
        assert_eq!(SitePreset::by_name("ambient").unwrap(), AMBIENT);
        assert!(SitePreset::by_name("II").is_err());
    }

    #[test]
    fn tabulated_values() {
        assert_eq!(AMBIENT.k_r_mhz.value, 67.7);
        assert_eq!(AMBIENT.q0.value, 0.54);
        assert_eq!(SITE_I.d_es_ghz.value, 0.85);
        assert_eq!(SITE_IV.q0.value, 0.21);
        for p in ALL {
            p.lifetime_model().validate().unwrap();
            p.rates(DEFAULT_ETA).unwrap();
        }
    }
}

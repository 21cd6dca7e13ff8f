//! Run configuration: a JSON document validated against a published schema
//! (unknown keys are rejected), then resolved against an optional site preset
//! into concrete simulation inputs.

use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hamiltonian::{FieldSweep, LifetimeModel, GAMMA_E_MHZ_PER_G};
use crate::mapping::{LogisticRamp, DEFAULT_PSF_FWHM_UM};
use crate::photodynamics::{ContrastMode, PhotoRateParams, Preparation, ResonancePair};
use crate::presets::{SitePreset, DEFAULT_ETA, DEFAULT_LINEWIDTH_MHZ, DEFAULT_MW_RATE_MHZ};
use crate::strain::{CouplingModel, HamiltonianCouplings, StressTensor};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Site preset supplying any value not set below.
    pub preset: Option<String>,
    pub coupling_model: Option<ManifoldModels>,
    /// Stress in the NV frame, `[xx, yy, zz, xy, xz, yz]` in GPa.
    pub stress: Option<[f64; 6]>,
    /// Hamiltonian terms given directly; these take precedence over
    /// `coupling_model` + `stress`.
    pub couplings: Option<ManifoldCouplings>,
    pub gamma_e_mhz_per_g: Option<f64>,
    pub photodynamics: Option<PhotodynamicsSection>,
    pub odmr: Option<OdmrSection>,
    pub decay: Option<DecaySection>,
    pub pulses: Option<PulsesSection>,
    pub sweep: Option<FieldSweep>,
    pub map: Option<MapSection>,
    pub fit: Option<FitSection>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ManifoldModels {
    pub ground: Option<CouplingModel>,
    pub excited: Option<CouplingModel>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ManifoldCouplings {
    pub ground: Option<CouplingSpec>,
    pub excited: Option<CouplingSpec>,
}

/// Hamiltonian terms in GHz; phases in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub d_ghz: f64,
    #[serde(default)]
    pub e1_ghz: f64,
    #[serde(default)]
    pub e1_phase_rad: f64,
    #[serde(default)]
    pub e2_ghz: f64,
    #[serde(default)]
    pub e2_phase_rad: f64,
}

impl CouplingSpec {
    pub fn couplings(&self) -> HamiltonianCouplings {
        HamiltonianCouplings::with_phases(self.d_ghz, self.e1_ghz, self.e1_phase_rad, self.e2_ghz, self.e2_phase_rad)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PhotodynamicsSection {
    pub eta: Option<f64>,
    pub k_r_mhz: Option<f64>,
    pub k_isc0_mhz: Option<f64>,
    pub k_isc1_mhz: Option<f64>,
    pub q0: Option<f64>,
    pub tau_singlet_ns: Option<f64>,
    pub pulse_spacing_ns: Option<f64>,
    pub mw_rate_mhz: Option<f64>,
    pub linewidth_mhz: Option<f64>,
    /// Continuous-wave pump rate; when set, contrast uses the CW model.
    pub cw_pump_rate_mhz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OdmrSection {
    pub bz_gauss: f64,
    pub f_start_ghz: f64,
    pub f_stop_ghz: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    pub bz_gauss: f64,
    pub preparation: PreparationSpec,
    pub t_stop_ns: f64,
    pub steps: usize,
    /// Peak counts for Poisson noise; noiseless when absent.
    pub peak_counts: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PulsesSection {
    pub bz_gauss: Vec<f64>,
    pub preparations: Vec<PreparationSpec>,
    pub pulses: usize,
    /// Gaussian noise on P4, as a fraction of P4.
    #[serde(default)]
    pub relative_noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum PreparationSpec {
    Optical,
    SwappedPlus,
    SwappedMinus,
    Thermal,
}

impl PreparationSpec {
    pub fn preparation(self) -> Preparation {
        match self {
            Self::Optical => Preparation::Optical,
            Self::SwappedPlus => Preparation::Swapped(ResonancePair::Plus),
            Self::SwappedMinus => Preparation::Swapped(ResonancePair::Minus),
            Self::Thermal => Preparation::Thermal,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Optical => "optical",
            Self::SwappedPlus => "swapped-plus",
            Self::SwappedMinus => "swapped-minus",
            Self::Thermal => "thermal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "optical" => Ok(Self::Optical),
            "swapped-plus" => Ok(Self::SwappedPlus),
            "swapped-minus" => Ok(Self::SwappedMinus),
            "thermal" => Ok(Self::Thermal),
            other => Err(Error::InvalidParameter(format!("unknown preparation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RampSpec {
    pub baseline: [f64; 6],
    pub ramp: [f64; 6],
    pub x0_um: f64,
    pub width_um: f64,
}

impl RampSpec {
    pub fn ramp(&self) -> LogisticRamp {
        LogisticRamp {
            baseline: StressTensor::from_array(self.baseline),
            ramp: StressTensor::from_array(self.ramp),
            x0_um: self.x0_um,
            width_um: self.width_um,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    pub start_um: f64,
    pub stop_um: f64,
    pub steps: usize,
    /// Parametric profile; ignored when a profile CSV is given on the command line.
    pub ramp: Option<RampSpec>,
    #[serde(default)]
    pub bz_gauss: f64,
    pub psf_fwhm_um: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub max_iterations: Option<usize>,
    pub balance_datasets: Option<bool>,
    pub initial_es: Option<[f64; 3]>,
    pub initial_rates: Option<[f64; 4]>,
    /// Fixed lifetimes `(τ4, τ5, τ6)` for population fits.
    pub decay_lifetimes_ns: Option<[f64; 3]>,
    /// Lifetime constraint for the pulse-dynamics fit,
    /// `[τ_bright, err, τ_dark, err]`; defaults to the preset values.
    pub lifetime_constraint_ns: Option<[f64; 4]>,
}

/// Fully resolved inputs. This is what gets hashed and written next to every
/// output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub tool_version: String,
    pub preset: Option<String>,
    pub gs: HamiltonianCouplings,
    pub es: HamiltonianCouplings,
    pub es_model: Option<CouplingModel>,
    pub gamma_e_mhz_per_g: f64,
    pub rates: PhotoRateParams,
    pub mw_rate_mhz: f64,
    pub linewidth_mhz: f64,
    pub contrast_mode: ContrastMode,
    pub odmr: OdmrSection,
    pub decay: DecaySection,
    pub pulses: PulsesSection,
    pub sweep: FieldSweep,
    pub map: Option<MapSection>,
    pub fit: FitSection,
    pub lifetime_constraint_ns: Option<[f64; 4]>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

pub const DEFAULT_SEED: u64 = 0x5eed;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(RunConfig)).expect("schema serializes")
    }

    /// Fills unset values from `preset` (which overrides the config's own
    /// `preset` key) and checks ranges.
    pub fn resolve(&self, preset: Option<&str>) -> Result<ResolvedConfig> {
        let preset_name = preset.map(str::to_owned).or_else(|| self.preset.clone());
        let site = preset_name.as_deref().map(SitePreset::by_name).transpose()?;
        let stress = self.stress.map(StressTensor::from_array).unwrap_or_default();
        let models = self.coupling_model.clone().unwrap_or_default();
        let direct = self.couplings.clone().unwrap_or_default();

        let es = match (direct.excited, models.excited, site) {
            (Some(c), _, _) => c.couplings(),
            (None, Some(m), _) => m.couple(&stress)?,
            (None, None, Some(p)) => p.es_couplings(),
            _ => {
                return Err(Error::InvalidParameter(
                    "excited-state couplings need a preset, `couplings.excited` or `coupling_model.excited`".into(),
                ))
            }
        };
        let gs = match (direct.ground, models.ground, site) {
            (Some(c), _, _) => c.couplings(),
            (None, Some(m), _) => m.couple(&stress)?,
            (None, None, Some(p)) => p.gs_couplings(),
            (None, None, None) => HamiltonianCouplings::unstrained(2.87),
        };
        if !(es.is_finite() && gs.is_finite()) {
            return Err(Error::NonFinite("couplings"));
        }

        let ph = self.photodynamics.clone().unwrap_or_default();
        let pick = |v: Option<f64>, from_site: Option<f64>, name: &str| {
            v.or(from_site)
                .ok_or_else(|| Error::InvalidParameter(format!("photodynamics.{name} is required without a preset")))
        };
        let lm = LifetimeModel::new(
            pick(ph.k_r_mhz, site.map(|p| p.k_r_mhz.value), "k_r_mhz")?,
            pick(ph.k_isc0_mhz, site.map(|p| p.k_isc0_mhz.value), "k_isc0_mhz")?,
            pick(ph.k_isc1_mhz, site.map(|p| p.k_isc1_mhz.value), "k_isc1_mhz")?,
        )?;
        let mut rates = PhotoRateParams::new(
            ph.eta.unwrap_or(DEFAULT_ETA),
            lm,
            pick(ph.q0, site.map(|p| p.q0.value), "q0")?,
        )?;
        if let Some(t) = ph.tau_singlet_ns {
            rates.tau_singlet_ns = t;
        }
        if let Some(t) = ph.pulse_spacing_ns {
            rates.pulse_spacing_ns = t;
        }
        rates.validate()?;
        let mw_rate_mhz = ph.mw_rate_mhz.unwrap_or(DEFAULT_MW_RATE_MHZ);
        let linewidth_mhz = ph.linewidth_mhz.unwrap_or(DEFAULT_LINEWIDTH_MHZ);
        if !(mw_rate_mhz.is_finite() && mw_rate_mhz >= 0.0) {
            return Err(Error::InvalidParameter("mw_rate_mhz must be >= 0".into()));
        }
        if !(linewidth_mhz.is_finite() && linewidth_mhz > 0.0) {
            return Err(Error::InvalidParameter("linewidth_mhz must be positive".into()));
        }
        let contrast_mode = match ph.cw_pump_rate_mhz {
            Some(p) if p.is_finite() && p > 0.0 => ContrastMode::Cw { pump_rate_mhz: p },
            Some(_) => return Err(Error::InvalidParameter("cw_pump_rate_mhz must be positive".into())),
            None => ContrastMode::PulseTrain,
        };

        let gamma = self.gamma_e_mhz_per_g.unwrap_or(GAMMA_E_MHZ_PER_G);
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter("gamma_e_mhz_per_g must be positive".into()));
        }

        let d_gs = gs.d;
        let odmr = self.odmr.unwrap_or(OdmrSection {
            bz_gauss: 0.0,
            f_start_ghz: d_gs - 0.3,
            f_stop_ghz: d_gs + 0.3,
            steps: 601,
        });
        check_grid(odmr.steps, odmr.f_start_ghz, odmr.f_stop_ghz, "odmr")?;
        let decay = self.decay.unwrap_or(DecaySection {
            bz_gauss: 0.0,
            preparation: PreparationSpec::Optical,
            t_stop_ns: 60.0,
            steps: 601,
            peak_counts: None,
        });
        check_grid(decay.steps, 0.0, decay.t_stop_ns, "decay")?;
        let pulses = self.pulses.clone().unwrap_or(PulsesSection {
            bz_gauss: vec![0.0],
            preparations: vec![PreparationSpec::Optical],
            pulses: 50,
            relative_noise: 0.0,
        });
        if pulses.bz_gauss.iter().any(|b| !b.is_finite()) || pulses.preparations.is_empty() || pulses.bz_gauss.is_empty() {
            return Err(Error::InvalidParameter("pulses needs finite fields and at least one preparation".into()));
        }
        if !(pulses.relative_noise.is_finite() && pulses.relative_noise >= 0.0) {
            return Err(Error::InvalidParameter("pulses.relative_noise must be >= 0".into()));
        }
        let sweep = self.sweep.unwrap_or(FieldSweep {
            start_g: 0.0,
            stop_g: 800.0,
            steps: 161,
        });
        check_grid(sweep.steps, sweep.start_g, sweep.stop_g, "sweep")?;
        if let Some(m) = &self.map {
            check_grid(m.steps, m.start_um, m.stop_um, "map")?;
            if m.stop_um <= m.start_um {
                return Err(Error::InvalidParameter("map.stop_um must exceed map.start_um".into()));
            }
            if m.psf_fwhm_um.is_some_and(|p| !(p.is_finite() && p >= 0.0)) {
                return Err(Error::InvalidParameter("map.psf_fwhm_um must be >= 0".into()));
            }
            if m.ramp.is_some_and(|r| !(r.width_um > 0.0)) {
                return Err(Error::InvalidParameter("map.ramp.width_um must be positive".into()));
            }
        }
        let fit = self.fit.clone().unwrap_or_default();
        let lifetime_constraint_ns = fit.lifetime_constraint_ns.or_else(|| {
            site.and_then(|p| {
                Some([
                    p.tau_bright_ns.value,
                    p.tau_bright_ns.error?,
                    p.tau_dark_ns.value,
                    p.tau_dark_ns.error?,
                ])
            })
        });

        Ok(ResolvedConfig {
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            preset: site.map(|p| p.name.to_owned()),
            gs,
            es,
            es_model: models.excited,
            gamma_e_mhz_per_g: gamma,
            rates,
            mw_rate_mhz,
            linewidth_mhz,
            contrast_mode,
            odmr,
            decay,
            pulses,
            sweep,
            map: self.map.clone().map(|mut m| {
                m.psf_fwhm_um.get_or_insert(DEFAULT_PSF_FWHM_UM);
                m
            }),
            fit,
            lifetime_constraint_ns,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
        })
    }
}

fn check_grid(steps: usize, start: f64, stop: f64, name: &str) -> Result<()> {
    if steps < 2 || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{name}: need finite bounds and at least 2 steps"
        )));
    }
    Ok(())
}

impl ResolvedConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form, without the output directory
    /// so relocated runs hash the same.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let digest = Sha256::digest(serde_json::to_vec(&c).expect("config serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_needs_a_source() {
        let c = RunConfig::default();
        assert!(matches!(c.resolve(None), Err(Error::InvalidParameter(_))));
        let r = c.resolve(Some("I")).unwrap();
        assert_eq!(r.rates.k_r, 132.0);
        assert_eq!(r.es.moduli(), [0.85, 0.09, 0.16]);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"seed": 1, "colour": 2}"#).is_err());
        assert!(RunConfig::from_json(r#"{"photodynamics": {"k_r": 1}}"#).is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let c = RunConfig::from_json(
            r#"{"preset": "site-IV", "photodynamics": {"q0": 0.5, "eta": 0.3},
                "couplings": {"excited": {"d_ghz": 1.0, "e2_ghz": 0.2}}}"#,
        )
        .unwrap();
        let r = c.resolve(None).unwrap();
        assert_eq!(r.rates.q0, 0.5);
        assert_eq!(r.rates.eta, 0.3);
        assert_eq!(r.rates.k_r, 150.0);
        assert_eq!(r.es.moduli(), [1.0, 0.0, 0.2]);
        assert_eq!(r.lifetime_constraint_ns, Some([6.59, 0.03, 2.32, 0.03]));
    }

    #[test]
    fn coupling_model_with_stress() {
        let c = RunConfig::from_json(
            r#"{"preset": "I", "stress": [0, 0, 10, 0, 0, 0],
                "coupling_model": {"excited": {"g41": 0, "g43": 5, "g15": 0, "g16": 0, "g25": 0, "g26": 0, "d0_ghz": 1.4}}}"#,
        )
        .unwrap();
        let r = c.resolve(None).unwrap();
        assert!((r.es.d - 1.45).abs() < 1e-12);
    }

    #[test]
    fn range_errors() {
        let c = RunConfig::from_json(r#"{"photodynamics": {"eta": 1.5}}"#).unwrap();
        assert!(c.resolve(Some("I")).is_err());
        let c = RunConfig::from_json(r#"{"sweep": {"start_g": 0, "stop_g": 1, "steps": 1}}"#).unwrap();
        assert!(c.resolve(Some("I")).is_err());
    }

    #[test]
    fn hash_is_stable() {
        let a = RunConfig::default().resolve(Some("IV")).unwrap();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("/elsewhere");
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn schema_lists_sections() {
        let s = RunConfig::schema().to_string();
        for key in ["coupling_model", "photodynamics", "k_isc1_mhz", "g26", "output_dir"] {
            assert!(s.contains(key), "{key}");
        }
    }
}

//! One-dimensional strain profiles, the contrast they produce, and the
//! location and width of the contrast sign reversal.
//!
//! Positions are in µm. The point-spread function is a Gaussian of given
//! FWHM; near the ends of the profile the kernel is renormalized over the
//! samples that exist, and each sample is weighted by its share of the grid
//! (trapezoid weights), so uneven grids are handled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{build, eigensolve, GAMMA_E_MHZ_PER_G};
use crate::photodynamics::{driven_contrast, ContrastMode, PhotoRateParams, ResonancePair};
use crate::strain::{couple, CouplingModel, HamiltonianCouplings, StressTensor};

pub const DEFAULT_PSF_FWHM_UM: f64 = 0.55;

/// Logistic ramp `baseline + ramp / (1 + exp(-(x - x0) / width))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticRamp {
    pub baseline: StressTensor,
    pub ramp: StressTensor,
    pub x0_um: f64,
    pub width_um: f64,
}

impl LogisticRamp {
    pub fn fraction(&self, x_um: f64) -> f64 {
        1.0 / (1.0 + (-(x_um - self.x0_um) / self.width_um).exp())
    }

    pub fn stress(&self, x_um: f64) -> StressTensor {
        self.baseline + self.ramp * self.fraction(x_um)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrainProfile {
    positions: Vec<f64>,
    stress: Vec<StressTensor>,
}

impl StrainProfile {
    pub fn new(positions: Vec<f64>, stress: Vec<StressTensor>) -> Result<Self> {
        if positions.len() != stress.len() {
            return Err(Error::InvalidParameter("positions and tensors differ in length".into()));
        }
        if positions.is_empty() {
            return Err(Error::InsufficientData("empty profile".into()));
        }
        if positions.iter().any(|x| !x.is_finite()) || stress.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("strain profile"));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("positions must be strictly increasing".into()));
        }
        Ok(Self { positions, stress })
    }

    pub fn uniform(positions: Vec<f64>, stress: StressTensor) -> Result<Self> {
        let n = positions.len();
        Self::new(positions, vec![stress; n])
    }

    pub fn logistic(positions: Vec<f64>, ramp: &LogisticRamp) -> Result<Self> {
        if !(ramp.width_um > 0.0) {
            return Err(Error::InvalidParameter("ramp width must be positive".into()));
        }
        let stress = positions.iter().map(|&x| ramp.stress(x)).collect();
        Self::new(positions, stress)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn stress(&self) -> &[StressTensor] {
        &self.stress
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Coupling moduli `(|D|, |E1|, |E2|)` along a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingProfile {
    pub positions: Vec<f64>,
    pub couplings: Vec<HamiltonianCouplings>,
}

impl CouplingProfile {
    pub fn moduli(&self) -> Vec<[f64; 3]> {
        self.couplings.iter().map(|c| c.moduli()).collect()
    }
}

pub fn profile_couplings(profile: &StrainProfile, model: &CouplingModel) -> Result<CouplingProfile> {
    let couplings = profile
        .stress
        .par_iter()
        .map(|s| couple(s, model))
        .collect::<Result<Vec<_>>>()?;
    Ok(CouplingProfile {
        positions: profile.positions.clone(),
        couplings,
    })
}

/// How the contrast is read out at each position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastSettings {
    pub bz_gauss: f64,
    pub mw_rate_mhz: f64,
    pub mode: ContrastMode,
    /// Ground-state pairs driven by the microwave; both at zero field.
    pub pairs: Vec<ResonancePair>,
    pub gamma_e_mhz_per_g: f64,
}

impl ContrastSettings {
    pub fn new(bz_gauss: f64, mw_rate_mhz: f64) -> Self {
        Self {
            bz_gauss,
            mw_rate_mhz,
            mode: ContrastMode::PulseTrain,
            pairs: vec![ResonancePair::Plus, ResonancePair::Minus],
            gamma_e_mhz_per_g: GAMMA_E_MHZ_PER_G,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastProfile {
    pub positions: Vec<f64>,
    pub raw: Vec<f64>,
    pub convolved: Vec<f64>,
    pub psf_fwhm_um: f64,
}

/// Contrast of each set of excited-state couplings along the profile.
pub fn contrast_along(
    couplings: &CouplingProfile,
    rates: &PhotoRateParams,
    settings: &ContrastSettings,
    psf_fwhm_um: f64,
) -> Result<ContrastProfile> {
    if !(psf_fwhm_um.is_finite() && psf_fwhm_um >= 0.0) {
        return Err(Error::InvalidParameter("PSF FWHM must be >= 0".into()));
    }
    let raw = couplings
        .couplings
        .par_iter()
        .map(|k| {
            let sol = eigensolve(&build(*k, settings.bz_gauss).with_gamma(settings.gamma_e_mhz_per_g));
            driven_contrast(&sol, rates, settings.mw_rate_mhz, &settings.pairs, settings.mode)
        })
        .collect::<Result<Vec<_>>>()?;
    let convolved = convolve_psf(&couplings.positions, &raw, psf_fwhm_um);
    Ok(ContrastProfile {
        positions: couplings.positions.clone(),
        raw,
        convolved,
        psf_fwhm_um,
    })
}

pub fn profile_contrast(
    profile: &StrainProfile,
    model: &CouplingModel,
    rates: &PhotoRateParams,
    settings: &ContrastSettings,
    psf_fwhm_um: f64,
) -> Result<ContrastProfile> {
    contrast_along(&profile_couplings(profile, model)?, rates, settings, psf_fwhm_um)
}

fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let lo = if i == 0 { x[0] } else { 0.5 * (x[i - 1] + x[i]) };
            let hi = if i == n - 1 { x[n - 1] } else { 0.5 * (x[i] + x[i + 1]) };
            hi - lo
        })
        .collect()
}

/// Gaussian blur with a kernel renormalized at each output point.
pub fn convolve_psf(x: &[f64], y: &[f64], fwhm: f64) -> Vec<f64> {
    if fwhm == 0.0 || x.len() < 2 {
        return y.to_vec();
    }
    let sigma = fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
    let w = trapezoid_weights(x);
    let (lo, hi) = (min(y), max(y));
    x.iter()
        .map(|&xi| {
            let (mut num, mut den) = (0.0, 0.0);
            for k in 0..x.len() {
                let u = (x[k] - xi) / sigma;
                if u.abs() > 8.0 {
                    continue;
                }
                let kw = (-0.5 * u * u).exp() * w[k];
                num += kw * y[k];
                den += kw;
            }
            // rounding can push a weighted mean just outside [lo, hi]
            (num / den).clamp(lo, hi)
        })
        .collect()
}

fn min(y: &[f64]) -> f64 {
    y.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(y: &[f64]) -> f64 {
    y.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reversal {
    /// First zero crossing.
    pub x_rev_um: f64,
    /// Distance between the ∓50 % plateau levels around `x_rev_um`; `None`
    /// when a level is never reached.
    pub width_um: Option<f64>,
    pub crossings_um: Vec<f64>,
    pub ambiguous: bool,
    pub plateaus: (f64, f64),
}

fn interp_level(x: &[f64], y: &[f64], i: usize, level: f64) -> f64 {
    let (y0, y1) = (y[i] - level, y[i + 1] - level);
    if y1 == y0 {
        return x[i];
    }
    x[i] + (x[i + 1] - x[i]) * y0 / (y0 - y1)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Zero crossings of `y(x)` by linear interpolation, with the transition
/// width measured between the points where the signal reaches half of each
/// plateau (median of the outer 20 % on either side).
pub fn find_reversal(x: &[f64], y: &[f64]) -> Result<Reversal> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter("positions and contrast differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("need at least two samples".into()));
    }
    if y.iter().chain(x).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("contrast profile"));
    }

    let nonzero: Vec<usize> = (0..y.len()).filter(|&i| y[i] != 0.0).collect();
    let mut crossings = Vec::new();
    let mut first_seg = None;
    for w in nonzero.windows(2) {
        let (a, b) = (w[0], w[1]);
        if y[a].signum() == y[b].signum() {
            continue;
        }
        let xc = if b == a + 1 {
            interp_level(x, y, a, 0.0)
        } else {
            0.5 * (x[a + 1] + x[b - 1])
        };
        if first_seg.is_none() {
            first_seg = Some((a, b));
        }
        crossings.push(xc);
    }
    let (a, b) = first_seg.ok_or(Error::NoReversal)?;

    let n = x.len();
    let k = ((0.2 * n as f64).ceil() as usize).max(1);
    let left = median(&y[..k]);
    let right = median(&y[n - k..]);

    let lo_level = 0.5 * left;
    let hi_level = 0.5 * right;
    // walk outward from the crossing until each half level is passed
    let x_lo = (0..=a)
        .rev()
        .find(|&i| i + 1 < n && (y[i] - lo_level) * (y[i + 1] - lo_level) <= 0.0 && y[i] != y[i + 1])
        .map(|i| interp_level(x, y, i, lo_level));
    let x_hi = (b.saturating_sub(1)..n - 1)
        .find(|&i| (y[i] - hi_level) * (y[i + 1] - hi_level) <= 0.0 && y[i] != y[i + 1])
        .map(|i| interp_level(x, y, i, hi_level));
    let width_um = match (x_lo, x_hi) {
        (Some(l), Some(h)) if left.signum() != right.signum() => Some((h - l).abs()),
        _ => None,
    };

    Ok(Reversal {
        x_rev_um: crossings[0],
        width_um,
        ambiguous: crossings.len() > 1,
        crossings_um: crossings,
        plateaus: (left, right),
    })
}

impl ContrastProfile {
    pub fn reversal_raw(&self) -> Result<Reversal> {
        find_reversal(&self.positions, &self.raw)
    }

    pub fn reversal_convolved(&self) -> Result<Reversal> {
        find_reversal(&self.positions, &self.convolved)
    }
}

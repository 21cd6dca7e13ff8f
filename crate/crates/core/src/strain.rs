//! Stress tensors in the NV frame and their coupling to the spin Hamiltonian.
//!
//! Stress is in GPa, coupling constants in MHz/GPa and Hamiltonian terms in
//! GHz. The NV frame has `z` along the symmetry axis `[111]`, `x` along
//! `[-1 1 0]` and `y` along `[-1 -1 2]`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric 3x3 stress tensor (GPa). Only the six independent components
/// are stored, so symmetry holds by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StressTensor {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl StressTensor {
    pub const ZERO: StressTensor = StressTensor {
        xx: 0.0,
        yy: 0.0,
        zz: 0.0,
        xy: 0.0,
        xz: 0.0,
        yz: 0.0,
    };

    pub fn new(xx: f64, yy: f64, zz: f64, xy: f64, xz: f64, yz: f64) -> Self {
        Self { xx, yy, zz, xy, xz, yz }
    }

    pub fn hydrostatic(p: f64) -> Self {
        Self::new(p, p, p, 0.0, 0.0, 0.0)
    }

    pub fn diagonal(xx: f64, yy: f64, zz: f64) -> Self {
        Self::new(xx, yy, zz, 0.0, 0.0, 0.0)
    }

    /// Components in the order `[xx, yy, zz, xy, xz, yz]`.
    pub fn from_array(c: [f64; 6]) -> Self {
        Self::new(c[0], c[1], c[2], c[3], c[4], c[5])
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.xx, self.yy, self.zz, self.xy, self.xz, self.yz]
    }

    /// Symmetrizes `m` as `(m + mᵀ) / 2`.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let s = (m + m.transpose()) * 0.5;
        Self::new(s[(0, 0)], s[(1, 1)], s[(2, 2)], s[(0, 1)], s[(0, 2)], s[(1, 2)])
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.xx, self.xy, self.xz, //
            self.xy, self.yy, self.yz, //
            self.xz, self.yz, self.zz,
        )
    }

    /// In-plane mean normal stress `(σxx + σyy) / 2`.
    pub fn mean_in_plane(&self) -> f64 {
        0.5 * (self.xx + self.yy)
    }

    /// In-plane deviatoric normal stress `(σxx - σyy) / 2`.
    pub fn deviatoric_in_plane(&self) -> f64 {
        0.5 * (self.xx - self.yy)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("stress tensor"))
        }
    }

    /// Principal invariants `(I1, I2, I3)`.
    pub fn invariants(&self) -> [f64; 3] {
        let i1 = self.xx + self.yy + self.zz;
        let i2 = self.xx * self.yy + self.yy * self.zz + self.zz * self.xx
            - self.xy * self.xy
            - self.xz * self.xz
            - self.yz * self.yz;
        let i3 = self.to_matrix().determinant();
        [i1, i2, i3]
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Add for StressTensor {
    type Output = StressTensor;
    fn add(self, o: StressTensor) -> StressTensor {
        StressTensor::new(
            self.xx + o.xx,
            self.yy + o.yy,
            self.zz + o.zz,
            self.xy + o.xy,
            self.xz + o.xz,
            self.yz + o.yz,
        )
    }
}

impl Sub for StressTensor {
    type Output = StressTensor;
    fn sub(self, o: StressTensor) -> StressTensor {
        self + (-o)
    }
}

impl Neg for StressTensor {
    type Output = StressTensor;
    fn neg(self) -> StressTensor {
        self * -1.0
    }
}

impl Mul<f64> for StressTensor {
    type Output = StressTensor;
    fn mul(self, s: f64) -> StressTensor {
        StressTensor::new(
            self.xx * s,
            self.yy * s,
            self.zz * s,
            self.xy * s,
            self.xz * s,
            self.yz * s,
        )
    }
}

/// Split of a stress tensor into the part that keeps the trigonal symmetry of
/// the defect and the part that breaks it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressDecomposition {
    /// `diag(σm, σm, σzz)`
    pub preserving: StressTensor,
    /// In-plane deviatoric plus shear components; `zz` and the in-plane mean are zero.
    pub breaking: StressTensor,
}

impl StressDecomposition {
    pub fn reassemble(&self) -> StressTensor {
        self.preserving + self.breaking
    }
}

pub fn decompose(stress: &StressTensor) -> Result<StressDecomposition> {
    stress.check_finite()?;
    let m = stress.mean_in_plane();
    let preserving = StressTensor::diagonal(m, m, stress.zz);
    let breaking = StressTensor::new(
        stress.xx - m,
        stress.yy - m,
        0.0,
        stress.xy,
        stress.xz,
        stress.yz,
    );
    Ok(StressDecomposition {
        preserving,
        breaking,
    })
}

/// Spin-stress coupling constants for one spin manifold (ground or excited).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CouplingModel {
    /// MHz/GPa, couples the in-plane mean stress to D.
    pub g41: f64,
    /// MHz/GPa, couples the axial stress to D.
    pub g43: f64,
    pub g15: f64,
    pub g16: f64,
    pub g25: f64,
    pub g26: f64,
    /// Zero-stress zero-field splitting (GHz).
    pub d0_ghz: f64,
}

impl CouplingModel {
    pub fn validate(&self) -> Result<()> {
        let g = [self.g41, self.g43, self.g15, self.g16, self.g25, self.g26];
        if !g.iter().all(|v| v.is_finite()) || !self.d0_ghz.is_finite() {
            return Err(Error::NonFinite("coupling model"));
        }
        if self.d0_ghz <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "d0_ghz must be positive, got {}",
                self.d0_ghz
            )));
        }
        Ok(())
    }

    /// Model with every coupling constant zero.
    pub fn decoupled(d0_ghz: f64) -> Self {
        Self {
            g41: 0.0,
            g43: 0.0,
            g15: 0.0,
            g16: 0.0,
            g25: 0.0,
            g26: 0.0,
            d0_ghz,
        }
    }

    pub fn couple(&self, stress: &StressTensor) -> Result<HamiltonianCouplings> {
        couple(stress, self)
    }
}

/// Diagonal splitting `D` and the off-diagonal strain terms `E1`, `E2` (GHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianCouplings {
    pub d: f64,
    pub e1: Complex64,
    pub e2: Complex64,
}

impl HamiltonianCouplings {
    pub fn new(d: f64, e1: Complex64, e2: Complex64) -> Self {
        Self { d, e1, e2 }
    }

    /// Real-positive off-diagonal terms.
    pub fn from_moduli(d: f64, e1: f64, e2: f64) -> Self {
        Self::new(d, Complex64::new(e1, 0.0), Complex64::new(e2, 0.0))
    }

    pub fn with_phases(d: f64, e1: f64, e1_phase: f64, e2: f64, e2_phase: f64) -> Self {
        Self::new(
            d,
            Complex64::from_polar(e1, e1_phase),
            Complex64::from_polar(e2, e2_phase),
        )
    }

    pub fn unstrained(d: f64) -> Self {
        Self::from_moduli(d, 0.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.d.is_finite() && self.e1.is_finite() && self.e2.is_finite()
    }

    /// `(|D|, |E1|, |E2|)`
    pub fn moduli(&self) -> [f64; 3] {
        [self.d.abs(), self.e1.norm(), self.e2.norm()]
    }
}

const MHZ_TO_GHZ: f64 = 1e-3;

pub fn couple(stress: &StressTensor, model: &CouplingModel) -> Result<HamiltonianCouplings> {
    stress.check_finite()?;
    model.validate()?;
    let sm = stress.mean_in_plane();
    let sd = stress.deviatoric_in_plane();
    let d = model.d0_ghz + (model.g41 * sm + model.g43 * stress.zz) * MHZ_TO_GHZ;
    let e1 = Complex64::new(
        model.g26 * stress.xz - model.g25 * sd,
        -(model.g26 * stress.yz + model.g25 * stress.xy),
    ) * MHZ_TO_GHZ;
    let e2 = Complex64::new(
        model.g16 * stress.xz - model.g15 * sd,
        -(model.g16 * stress.yz + model.g15 * stress.xy),
    ) * MHZ_TO_GHZ;
    Ok(HamiltonianCouplings { d, e1, e2 })
}

/// Rotation taking cubic-crystal coordinates to the NV frame. Rows are the NV
/// frame axes expressed in the cubic frame.
pub fn nv_frame_rotation() -> Matrix3<f64> {
    let s2 = 2f64.sqrt();
    let s3 = 3f64.sqrt();
    let s6 = 6f64.sqrt();
    Matrix3::new(
        -1.0 / s2, 1.0 / s2, 0.0, //
        -1.0 / s6, -1.0 / s6, 2.0 / s6, //
        1.0 / s3, 1.0 / s3, 1.0 / s3,
    )
}

/// Expresses a cubic-frame stress tensor in the NV frame, `R σ Rᵀ`.
pub fn rotate_to_nv_frame(lab: &StressTensor) -> StressTensor {
    let r = nv_frame_rotation();
    StressTensor::from_matrix(&(r * lab.to_matrix() * r.transpose()))
}

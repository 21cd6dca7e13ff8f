//! Forward and inverse modeling of strain-coupled spin-1 emitters
//! (nitrogen-vacancy centers in diamond).
//!
//! The pieces, bottom up:
//!
//! - [`strain`]: stress tensors in the NV frame, their symmetry
//!   decomposition and the map to Hamiltonian couplings `D`, `E1`, `E2`.
//! - [`hamiltonian`]: the spin-1 Hamiltonian versus axial field, its
//!   eigenstates, transition frequencies and mixing-weighted lifetimes.
//! - [`photodynamics`]: the seven-level optical cycle under pulsed and
//!   continuous excitation, fluorescence decays and ODMR contrast.
//! - [`inference`]: damped least-squares fits that recover populations,
//!   lifetimes, strain terms and transition rates from data.
//! - [`mapping`]: contrast along a strain profile, optical blurring and
//!   location of the polarization-reversal point.
//! - [`presets`], [`config`], [`io`] and [`cli`]: tabulated site
//!   parameters, run configuration, CSV/JSON formats and the command layer
//!   behind the `nvstrain` binary.

pub mod cli;
pub mod config;
pub mod error;
pub mod hamiltonian;
pub mod inference;
pub mod io;
pub mod mapping;
pub mod photodynamics;
pub mod presets;
pub mod strain;

pub use error::{Error, Result};
pub use hamiltonian::{
    build, effective_lifetimes, eigensolve, transition_frequencies, EigenSolution, LifetimeModel, SpinHamiltonian,
};
pub use photodynamics::{
    cw_contrast, decay_curve, excite_pulse, odmr_spectrum, pulse_step, relax, steady_state, ContrastMode,
    PhotoRateParams, PopulationState, ResonancePair,
};
pub use strain::{couple, decompose, rotate_to_nv_frame, CouplingModel, HamiltonianCouplings, StressTensor};

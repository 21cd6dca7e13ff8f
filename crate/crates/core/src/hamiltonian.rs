//! Spin-1 Hamiltonian with strain and axial Zeeman terms.
//!
//! Basis order is `(|+1⟩, |0⟩, |−1⟩)`:
//!
//! ```text
//! H = | D + γB   E1    E2     |
//!     | E1*      0     -E1    |
//!     | E2*      -E1*  D - γB |
//! ```
//!
//! Energies are in GHz, fields in gauss and rates in MHz. Lifetimes come out
//! in ns (`τ = 1000 / Γ`).

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strain::HamiltonianCouplings;

/// Electron gyromagnetic ratio (MHz/G).
pub const GAMMA_E_MHZ_PER_G: f64 = 2.8025;

/// Index of `|+1⟩` in the spin basis.
pub const PLUS: usize = 0;
/// Index of `|0⟩` in the spin basis.
pub const ZERO: usize = 1;
/// Index of `|−1⟩` in the spin basis.
pub const MINUS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinHamiltonian {
    pub couplings: HamiltonianCouplings,
    pub bz_gauss: f64,
    pub gamma_e_mhz_per_g: f64,
}

impl SpinHamiltonian {
    pub fn new(couplings: HamiltonianCouplings, bz_gauss: f64) -> Self {
        Self {
            couplings,
            bz_gauss,
            gamma_e_mhz_per_g: GAMMA_E_MHZ_PER_G,
        }
    }

    pub fn with_gamma(mut self, gamma_e_mhz_per_g: f64) -> Self {
        self.gamma_e_mhz_per_g = gamma_e_mhz_per_g;
        self
    }

    /// Zeeman shift `γB` in GHz.
    pub fn zeeman_ghz(&self) -> f64 {
        self.gamma_e_mhz_per_g * self.bz_gauss * 1e-3
    }

    pub fn matrix(&self) -> Matrix3<Complex64> {
        let HamiltonianCouplings { d, e1, e2 } = self.couplings;
        let z = self.zeeman_ghz();
        let c = |x: f64| Complex64::new(x, 0.0);
        Matrix3::new(
            c(d + z), e1, e2, //
            e1.conj(), c(0.0), -e1, //
            e2.conj(), -e1.conj(), c(d - z),
        )
    }
}

pub fn build(couplings: HamiltonianCouplings, bz_gauss: f64) -> SpinHamiltonian {
    SpinHamiltonian::new(couplings, bz_gauss)
}

/// Eigen-decomposition of a spin Hamiltonian.
///
/// Eigenpairs are sorted by ascending energy; exact ties are ordered by
/// descending `|0⟩` weight. Each eigenvector is phased so that its largest
/// component is real and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    energies: [f64; 3],
    vectors: Matrix3<Complex64>,
    mixing: [f64; 3],
}

impl EigenSolution {
    pub fn from_matrix(h: &Matrix3<Complex64>) -> Self {
        let scale = h.norm().max(1.0);
        let eig = SymmetricEigen::new(*h);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let weight = |j: usize| eig.eigenvectors[(ZERO, j)].norm_sqr();
        let tie = 1e-12 * scale;
        for _ in 0..2 {
            for i in 0..2 {
                let (a, b) = (order[i], order[i + 1]);
                if (eig.eigenvalues[b] - eig.eigenvalues[a]).abs() <= tie && weight(b) > weight(a) {
                    order.swap(i, i + 1);
                }
            }
        }

        let mut vectors = Matrix3::zeros();
        let mut energies = [0.0; 3];
        let mut mixing = [0.0; 3];
        for (k, &j) in order.iter().enumerate() {
            let mut v: Vector3<Complex64> = eig.eigenvectors.column(j).into_owned();
            let v_norm = v.norm();
            v /= Complex64::new(v_norm, 0.0);
            let lead = (0..3)
                .max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm()))
                .unwrap();
            let phase = v[lead] / v[lead].norm();
            v /= phase;
            energies[k] = eig.eigenvalues[j];
            mixing[k] = v[ZERO].norm_sqr();
            vectors.set_column(k, &v);
        }
        Self {
            energies,
            vectors,
            mixing,
        }
    }

    /// Energies in ascending order (GHz).
    pub fn energies(&self) -> [f64; 3] {
        self.energies
    }

    /// Eigenvectors as columns, in the order of [`energies`](Self::energies).
    pub fn vectors(&self) -> &Matrix3<Complex64> {
        &self.vectors
    }

    pub fn eigenvector(&self, j: usize) -> Vector3<Complex64> {
        self.vectors.column(j).into_owned()
    }

    /// `|0⟩` weight `|⟨0|ψj⟩|²` of each eigenstate.
    pub fn mixing(&self) -> [f64; 3] {
        self.mixing
    }

    /// `|⟨g|ψj⟩|²` for spin basis state `g` and eigenstate `j`.
    pub fn overlap(&self, g: usize, j: usize) -> f64 {
        self.vectors[(g, j)].norm_sqr()
    }

    /// Full overlap table, `table[g][j] = |⟨g|ψj⟩|²`. Rows and columns both sum to one.
    pub fn overlaps(&self) -> [[f64; 3]; 3] {
        let mut t = [[0.0; 3]; 3];
        for (g, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.overlap(g, j);
            }
        }
        t
    }

    /// Eigen indices of the labelled states `|4⟩, |5⟩, |6⟩`: descending `|0⟩`
    /// weight, ties broken by ascending energy. `|4⟩` is the bright state.
    pub fn labels(&self) -> [usize; 3] {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| {
            self.mixing[b]
                .total_cmp(&self.mixing[a])
                .then(self.energies[a].total_cmp(&self.energies[b]))
        });
        idx
    }

    pub fn bright_index(&self) -> usize {
        self.labels()[0]
    }

    /// Splitting of the two states other than the bright state (GHz). With no
    /// `E1` this is `2|E2|` at zero field.
    pub fn upper_pair_splitting(&self) -> f64 {
        let [_, a, b] = self.labels();
        (self.energies[a] - self.energies[b]).abs()
    }

    /// `V Λ V†`
    pub fn reconstruct(&self) -> Matrix3<Complex64> {
        let lambda = Matrix3::from_diagonal(&Vector3::from_iterator(
            self.energies.iter().map(|&e| Complex64::new(e, 0.0)),
        ));
        self.vectors * lambda * self.vectors.adjoint()
    }
}

pub fn eigensolve(h: &SpinHamiltonian) -> EigenSolution {
    EigenSolution::from_matrix(&h.matrix())
}

/// Energy difference between two eigenstates, `upper` above `lower`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub frequency_ghz: f64,
    pub lower: usize,
    pub upper: usize,
}

/// All three pairwise eigenvalue differences.
pub fn transition_frequencies(sol: &EigenSolution) -> Vec<Transition> {
    let e = sol.energies();
    [(0, 1), (0, 2), (1, 2)]
        .into_iter()
        .map(|(lower, upper)| Transition {
            frequency_ghz: e[upper] - e[lower],
            lower,
            upper,
        })
        .collect()
}

/// Radiative and spin-dependent intersystem-crossing rates (MHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeModel {
    pub k_r: f64,
    pub k_isc0: f64,
    pub k_isc1: f64,
}

impl LifetimeModel {
    pub fn new(k_r: f64, k_isc0: f64, k_isc1: f64) -> Result<Self> {
        let lm = Self { k_r, k_isc0, k_isc1 };
        lm.validate()?;
        Ok(lm)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k_r", self.k_r), ("k_isc0", self.k_isc0), ("k_isc1", self.k_isc1)] {
            if !v.is_finite() {
                return Err(Error::NonFinite("lifetime model"));
            }
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// ISC rate of a state with `|0⟩` weight `m`.
    pub fn isc_rate(&self, m: f64) -> f64 {
        m * self.k_isc0 + (1.0 - m) * self.k_isc1
    }

    pub fn total_rate(&self, m: f64) -> f64 {
        self.k_r + self.isc_rate(m)
    }

    /// Lifetimes of the pure `|0⟩` and `|±1⟩` states (ns).
    pub fn pure_lifetimes(&self) -> (f64, f64) {
        (1000.0 / self.total_rate(1.0), 1000.0 / self.total_rate(0.0))
    }
}

/// Mixing-weighted lifetimes (ns) in eigen order.
pub fn effective_lifetimes(sol: &EigenSolution, lm: &LifetimeModel) -> Result<[f64; 3]> {
    lm.validate()?;
    let mut tau = [0.0; 3];
    for (j, &m) in sol.mixing().iter().enumerate() {
        let gamma = lm.total_rate(m);
        if gamma <= 0.0 {
            return Err(Error::InfiniteLifetime { state: j });
        }
        tau[j] = 1000.0 / gamma;
    }
    Ok(tau)
}

/// Evenly spaced field samples, both ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FieldSweep {
    pub start_g: f64,
    pub stop_g: f64,
    pub steps: usize,
}

impl FieldSweep {
    pub fn fields(&self) -> Vec<f64> {
        linspace(self.start_g, self.stop_g, self.steps)
    }
}

/// `n` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// One field point of an eigen sweep, with states in `|4⟩, |5⟩, |6⟩` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub bz_gauss: f64,
    pub energies: [f64; 3],
    pub mixing: [f64; 3],
    pub lifetimes_ns: [f64; 3],
}

impl SweepPoint {
    pub fn at(couplings: &HamiltonianCouplings, lm: &LifetimeModel, bz_gauss: f64) -> Result<Self> {
        let sol = eigensolve(&build(*couplings, bz_gauss));
        let tau = effective_lifetimes(&sol, lm)?;
        let (e, m) = (sol.energies(), sol.mixing());
        let l = sol.labels();
        Ok(Self {
            bz_gauss,
            energies: l.map(|j| e[j]),
            mixing: l.map(|j| m[j]),
            lifetimes_ns: l.map(|j| tau[j]),
        })
    }
}

pub fn field_sweep(
    couplings: &HamiltonianCouplings,
    lm: &LifetimeModel,
    sweep: &FieldSweep,
) -> Result<Vec<SweepPoint>> {
    sweep
        .fields()
        .into_par_iter()
        .map(|b| SweepPoint::at(couplings, lm, b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn unstrained_zero_field_matrix() {
        let h = build(HamiltonianCouplings::unstrained(2.87), 0.0).matrix();
        let expect = Matrix3::from_diagonal(&Vector3::new(c(2.87), c(0.0), c(2.87)));
        assert_eq!(h, expect);
    }

    #[test]
    fn zeeman_only_matrix() {
        let h = build(HamiltonianCouplings::unstrained(1.4), 100.0);
        let z = 0.28025;
        let m = h.matrix();
        assert_abs_diff_eq!(m[(0, 0)].re, 1.4 + z, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(2, 2)].re, 1.4 - z, epsilon = 1e-15);
        assert_eq!(m[(1, 1)], c(0.0));
    }

    #[test]
    fn site_iv_matrix_layout() {
        let m = build(HamiltonianCouplings::from_moduli(0.80, 0.25, 1.19), 0.0).matrix();
        assert_eq!(m[(0, 1)], c(0.25));
        assert_eq!(m[(1, 0)], c(0.25));
        assert_eq!(m[(1, 2)], c(-0.25));
        assert_eq!(m[(2, 1)], c(-0.25));
        assert_eq!(m[(0, 2)], c(1.19));
        assert_eq!(m[(2, 0)], c(1.19));
        assert_eq!(m, m.adjoint());
    }

    #[test]
    fn complex_terms_are_hermitian() {
        let k = HamiltonianCouplings::with_phases(0.9, 0.3, 0.7, 0.5, -2.1);
        let m = build(k, 37.0).matrix();
        assert_abs_diff_eq!((m - m.adjoint()).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.trace().re, 1.8, epsilon = 1e-15);
    }

    #[test]
    fn unstrained_eigensolution() {
        let sol = eigensolve(&build(HamiltonianCouplings::unstrained(2.87), 0.0));
        let e = sol.energies();
        assert_abs_diff_eq!(e[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1], 2.87, epsilon = 1e-12);
        assert_abs_diff_eq!(e[2], 2.87, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.mixing()[0], 1.0, epsilon = 1e-12);
        assert_eq!(sol.bright_index(), 0);
    }

    #[test]
    fn e2_only_splitting_is_twice_e2() {
        let sol = eigensolve(&build(HamiltonianCouplings::from_moduli(0.80, 0.0, 1.19), 0.0));
        assert_abs_diff_eq!(sol.upper_pair_splitting(), 2.38, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_tie_puts_bright_first() {
        // |0⟩ at 0 and ±1 at D = 0: three-fold degeneracy.
        let sol = eigensolve(&build(HamiltonianCouplings::unstrained(0.0), 0.0));
        assert_abs_diff_eq!(sol.mixing()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ground_state_transitions() {
        let sol = eigensolve(&build(HamiltonianCouplings::unstrained(3.79), 0.0));
        let t = transition_frequencies(&sol);
        assert_eq!(t.len(), 3);
        let resonant: Vec<f64> = t
            .iter()
            .filter(|t| t.frequency_ghz > 1e-9)
            .map(|t| t.frequency_ghz)
            .collect();
        assert_eq!(resonant.len(), 2);
        for f in resonant {
            assert_abs_diff_eq!(f, 3.79, epsilon = 1e-12);
        }

        let sol = eigensolve(&build(HamiltonianCouplings::unstrained(2.87), 100.0));
        let mut f: Vec<f64> = transition_frequencies(&sol)
            .iter()
            .filter(|t| t.lower == 0)
            .map(|t| t.frequency_ghz)
            .collect();
        f.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(f[0], 2.87 - 0.28025, epsilon = 1e-12);
        assert_abs_diff_eq!(f[1], 2.87 + 0.28025, epsilon = 1e-12);
    }

    #[test]
    fn pure_state_lifetimes() {
        let sol = eigensolve(&build(HamiltonianCouplings::unstrained(0.85), 0.0));
        let site1 = LifetimeModel::new(132.0, 32.0, 357.0).unwrap();
        let tau = effective_lifetimes(&sol, &site1).unwrap();
        assert_abs_diff_eq!(tau[sol.bright_index()], 1000.0 / 164.0, epsilon = 1e-12);

        let site4 = LifetimeModel::new(150.0, 2.0, 282.0).unwrap();
        let tau = effective_lifetimes(&sol, &site4).unwrap();
        let dark = sol.labels()[1];
        assert_abs_diff_eq!(tau[dark], 1000.0 / 432.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_rates_rejected() {
        let sol = eigensolve(&build(HamiltonianCouplings::unstrained(0.85), 0.0));
        let lm = LifetimeModel::new(0.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            effective_lifetimes(&sol, &lm),
            Err(Error::InfiniteLifetime { .. })
        ));
        assert!(LifetimeModel::new(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn sweep_endpoints() {
        let s = FieldSweep {
            start_g: 0.0,
            stop_g: 800.0,
            steps: 5,
        };
        assert_eq!(s.fields(), vec![0.0, 200.0, 400.0, 600.0, 800.0]);
        let lm = LifetimeModel::new(150.0, 2.0, 282.0).unwrap();
        let pts = field_sweep(&HamiltonianCouplings::from_moduli(0.8, 0.25, 1.19), &lm, &s).unwrap();
        assert_eq!(pts.len(), 5);
        assert!(pts.iter().all(|p| p.lifetimes_ns[0] >= p.lifetimes_ns[1]));
    }
}

//! Seven-level optical cycle: ground triplet, excited triplet and a
//! metastable singlet.
//!
//! Ground populations are kept in the spin basis `(|+1⟩, |0⟩, |−1⟩)`; excited
//! populations are kept per excited eigenstate, in the order of the
//! [`EigenSolution`]. Optical excitation and radiative decay both conserve
//! spin, so they move population with the weights `|⟨g|ψj⟩|²`. Intersystem
//! crossing out of eigenstate `j` runs at `mj·k_isc0 + (1 − mj)·k_isc1`; the
//! singlet returns a fraction `q0` to `|0⟩` and `(1 − q0)/2` to each of `|±1⟩`.
//!
//! Under a pulse train the ground manifold evolves by a fixed 3x3
//! column-stochastic map (excite, then relax completely). The singlet is
//! assumed to empty between pulses, so its lifetime only enters the
//! continuous-wave model.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{transition_frequencies, EigenSolution, LifetimeModel, MINUS, PLUS, ZERO};

const POP_TOL: f64 = 1e-9;

/// Parameters of the optical cycle. Rates in MHz, times in ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotoRateParams {
    /// Probability that a single laser pulse promotes a ground-state spin.
    pub eta: f64,
    pub k_r: f64,
    pub k_isc0: f64,
    pub k_isc1: f64,
    /// Fraction of singlet decay returning to `|0⟩`.
    pub q0: f64,
    pub tau_singlet_ns: f64,
    pub pulse_spacing_ns: f64,
}

impl PhotoRateParams {
    pub const DEFAULT_TAU_SINGLET_NS: f64 = 250.0;
    pub const DEFAULT_PULSE_SPACING_NS: f64 = 1000.0;

    pub fn new(eta: f64, lifetimes: LifetimeModel, q0: f64) -> Result<Self> {
        let p = Self {
            eta,
            k_r: lifetimes.k_r,
            k_isc0: lifetimes.k_isc0,
            k_isc1: lifetimes.k_isc1,
            q0,
            tau_singlet_ns: Self::DEFAULT_TAU_SINGLET_NS,
            pulse_spacing_ns: Self::DEFAULT_PULSE_SPACING_NS,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.eta,
            self.k_r,
            self.k_isc0,
            self.k_isc1,
            self.q0,
            self.tau_singlet_ns,
            self.pulse_spacing_ns,
        ];
        if !all.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("photodynamics parameters"));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.q0) {
            return Err(Error::InvalidParameter(format!("q0 must lie in [0, 1], got {}", self.q0)));
        }
        self.lifetime_model().validate()?;
        if self.tau_singlet_ns <= 0.0 || self.pulse_spacing_ns <= 0.0 {
            return Err(Error::InvalidParameter(
                "tau_singlet_ns and pulse_spacing_ns must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn lifetime_model(&self) -> LifetimeModel {
        LifetimeModel {
            k_r: self.k_r,
            k_isc0: self.k_isc0,
            k_isc1: self.k_isc1,
        }
    }

    /// Singlet decay branching onto `(|+1⟩, |0⟩, |−1⟩)`.
    pub fn singlet_branching(&self) -> [f64; 3] {
        let side = 0.5 * (1.0 - self.q0);
        [side, self.q0, side]
    }
}

/// Populations of all seven levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    /// `(|+1⟩, |0⟩, |−1⟩)` of the ground triplet.
    pub ground: [f64; 3],
    /// Excited eigenstates, in eigen order.
    pub excited: [f64; 3],
    pub singlet: f64,
}

impl PopulationState {
    pub fn ground_state(p_plus: f64, p0: f64, p_minus: f64) -> Result<Self> {
        let s = Self {
            ground: [p_plus, p0, p_minus],
            excited: [0.0; 3],
            singlet: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_ground(ground: [f64; 3]) -> Result<Self> {
        Self::ground_state(ground[PLUS], ground[ZERO], ground[MINUS])
    }

    pub fn thermal() -> Self {
        let third = 1.0 / 3.0;
        Self {
            ground: [third; 3],
            excited: [0.0; 3],
            singlet: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.ground.iter().sum::<f64>() + self.excited.iter().sum::<f64>() + self.singlet
    }

    pub fn p0(&self) -> f64 {
        self.ground[ZERO]
    }

    pub fn p_plus(&self) -> f64 {
        self.ground[PLUS]
    }

    pub fn p_minus(&self) -> f64 {
        self.ground[MINUS]
    }

    pub fn is_ground_manifold(&self) -> bool {
        self.excited.iter().all(|p| p.abs() <= 1e-14) && self.singlet.abs() <= 1e-14
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.ground.iter().chain(&self.excited).chain(std::iter::once(&self.singlet));
        for &p in all {
            if !p.is_finite() {
                return Err(Error::NonFinite("population"));
            }
            if !(-POP_TOL..=1.0 + POP_TOL).contains(&p) {
                return Err(Error::InvalidParameter(format!("population {p} outside [0, 1]")));
            }
        }
        let total = self.total();
        if (total - 1.0).abs() > POP_TOL {
            return Err(Error::NotNormalized(total));
        }
        Ok(())
    }
}

/// Promotes a fraction `eta` of the ground manifold into the excited eigenstates.
pub fn excite_pulse(state: &PopulationState, sol: &EigenSolution, eta: f64) -> Result<PopulationState> {
    if !state.is_ground_manifold() {
        return Err(Error::NotGroundManifold);
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("eta must lie in [0, 1], got {eta}")));
    }
    let a = sol.overlaps();
    let mut out = *state;
    for (j, pj) in out.excited.iter_mut().enumerate() {
        *pj = eta * (0..3).map(|g| state.ground[g] * a[g][j]).sum::<f64>();
    }
    for p in out.ground.iter_mut() {
        *p *= 1.0 - eta;
    }
    Ok(out)
}

/// Returns all excited and singlet population to the ground manifold.
pub fn relax(state: &PopulationState, sol: &EigenSolution, rates: &PhotoRateParams) -> Result<PopulationState> {
    let a = sol.overlaps();
    let m = sol.mixing();
    let lm = rates.lifetime_model();
    let branch = rates.singlet_branching();

    let mut ground = state.ground;
    let mut to_singlet = state.singlet;
    for j in 0..3 {
        let pj = state.excited[j];
        if pj == 0.0 {
            continue;
        }
        let gamma = lm.total_rate(m[j]);
        if gamma <= 0.0 {
            return Err(Error::InfiniteLifetime { state: j });
        }
        let radiative = pj * rates.k_r / gamma;
        for (h, g) in ground.iter_mut().enumerate() {
            *g += radiative * a[h][j];
        }
        to_singlet += pj * lm.isc_rate(m[j]) / gamma;
    }
    for (g, b) in ground.iter_mut().zip(branch) {
        *g += to_singlet * b;
    }
    Ok(PopulationState {
        ground,
        excited: [0.0; 3],
        singlet: 0.0,
    })
}

pub fn pulse_step(ground: &PopulationState, sol: &EigenSolution, rates: &PhotoRateParams) -> Result<PopulationState> {
    relax(&excite_pulse(ground, sol, rates.eta)?, sol, rates)
}

/// The per-pulse ground-manifold map, `p_next = M p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseMap {
    pub matrix: Matrix3<f64>,
}

impl PulseMap {
    pub fn new(sol: &EigenSolution, rates: &PhotoRateParams) -> Result<Self> {
        rates.validate()?;
        let mut matrix = Matrix3::zeros();
        for g in 0..3 {
            let mut basis = [0.0; 3];
            basis[g] = 1.0;
            let start = PopulationState::from_ground(basis)?;
            let next = pulse_step(&start, sol, rates)?;
            matrix.set_column(g, &Vector3::from(next.ground));
        }
        Ok(Self { matrix })
    }

    pub fn apply(&self, ground: &[f64; 3]) -> [f64; 3] {
        let v = self.matrix * Vector3::from(*ground);
        [v[0], v[1], v[2]]
    }

    /// Second-largest eigenvalue modulus; governs geometric convergence.
    pub fn slem(&self) -> f64 {
        let mut mods: Vec<f64> = self.matrix.complex_eigenvalues().iter().map(|z| z.norm()).collect();
        mods.sort_by(|a, b| b.total_cmp(a));
        mods[1]
    }

    /// Unique stationary distribution.
    pub fn stationary(&self) -> Result<[f64; 3]> {
        stationary_of(&self.matrix)
    }
}

fn stationary_of(m: &Matrix3<f64>) -> Result<[f64; 3]> {
    let a = m - Matrix3::identity();
    let svd = a.svd(true, true);
    let mut sv: Vec<(usize, f64)> = svd.singular_values.iter().copied().enumerate().collect();
    sv.sort_by(|x, y| x.1.total_cmp(&y.1));
    if sv[1].1 <= 1e-12 {
        return Err(Error::DegenerateDynamics);
    }
    let v_t = svd.v_t.expect("requested");
    let v = v_t.row(sv[0].0);
    let sum: f64 = v.iter().sum();
    if sum.abs() < 1e-300 {
        return Err(Error::DegenerateDynamics);
    }
    let mut p = [v[0] / sum, v[1] / sum, v[2] / sum];
    for x in p.iter_mut() {
        if *x < 0.0 && *x > -1e-12 {
            *x = 0.0;
        }
    }
    let s: f64 = p.iter().sum();
    Ok(p.map(|x| x / s))
}

/// Fraction of each excited eigenstate produced by a pulse acting on `ground`.
pub fn excited_fractions(ground: &[f64; 3], sol: &EigenSolution) -> [f64; 3] {
    let a = sol.overlaps();
    let mut out = [0.0; 3];
    for (j, o) in out.iter_mut().enumerate() {
        *o = (0..3).map(|g| ground[g] * a[g][j]).sum();
    }
    out
}

/// Bright-state population `P4` that a probe pulse would read out from `ground`.
pub fn bright_fraction(ground: &[f64; 3], sol: &EigenSolution) -> f64 {
    excited_fractions(ground, sol)[sol.bright_index()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub ground: PopulationState,
    /// Excited fractions right after a pulse, eigen order, summing to one.
    pub post_pulse: [f64; 3],
    /// Bright-state share of `post_pulse`.
    pub p4: f64,
    /// Second-largest eigenvalue modulus of the pulse map.
    pub slem: f64,
}

pub fn steady_state(sol: &EigenSolution, rates: &PhotoRateParams) -> Result<SteadyState> {
    if rates.eta <= 0.0 {
        return Err(Error::InvalidParameter("steady state needs eta > 0".into()));
    }
    let map = PulseMap::new(sol, rates)?;
    let ground = map.stationary()?;
    let post_pulse = excited_fractions(&ground, sol);
    Ok(SteadyState {
        ground: PopulationState::from_ground(ground)?,
        post_pulse,
        p4: post_pulse[sol.bright_index()],
        slem: map.slem(),
    })
}

/// Microwave-addressed ground pair: `|0⟩ ↔ |+1⟩` or `|0⟩ ↔ |−1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResonancePair {
    Plus,
    Minus,
}

impl ResonancePair {
    pub fn partner(&self) -> usize {
        match self {
            ResonancePair::Plus => PLUS,
            ResonancePair::Minus => MINUS,
        }
    }
}

/// Spin preparations used for pulse-train trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preparation {
    /// Optically initialized (pulse-train steady state).
    Optical,
    /// Optical initialization followed by a π pulse on the given pair.
    Swapped(ResonancePair),
    Thermal,
}

pub fn prepare(prep: Preparation, sol: &EigenSolution, rates: &PhotoRateParams) -> Result<[f64; 3]> {
    match prep {
        Preparation::Thermal => Ok([1.0 / 3.0; 3]),
        Preparation::Optical => Ok(steady_state(sol, rates)?.ground.ground),
        Preparation::Swapped(pair) => {
            let mut p = steady_state(sol, rates)?.ground.ground;
            p.swap(ZERO, pair.partner());
            Ok(p)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub index: usize,
    pub ground: [f64; 3],
    pub p4: f64,
}

/// Ground state and probe readout before each of `pulses` pulses, plus the
/// final state (`pulses + 1` records, record 0 is the initial state).
pub fn pulse_train(
    initial: [f64; 3],
    sol: &EigenSolution,
    rates: &PhotoRateParams,
    pulses: usize,
) -> Result<Vec<PulseRecord>> {
    PopulationState::from_ground(initial)?;
    let map = PulseMap::new(sol, rates)?;
    let mut p = initial;
    let mut out = Vec::with_capacity(pulses + 1);
    for index in 0..=pulses {
        if index > 0 {
            p = map.apply(&p);
        }
        out.push(PulseRecord {
            index,
            ground: p,
            p4: bright_fraction(&p, sol),
        });
    }
    Ok(out)
}

/// Multi-exponential fluorescence decay sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub t_ns: Vec<f64>,
    pub intensity: Vec<f64>,
    pub populations: [f64; 3],
    pub lifetimes_ns: [f64; 3],
}

impl DecayCurve {
    /// Poisson-distributed counts with mean `peak_counts · I(t) / I(0)`.
    pub fn poisson_counts<R: Rng + ?Sized>(&self, peak_counts: f64, rng: &mut R) -> Vec<f64> {
        let i0 = decay_shape(&self.populations, &self.lifetimes_ns, 0.0);
        self.t_ns
            .iter()
            .map(|&t| {
                let mean = peak_counts * decay_shape(&self.populations, &self.lifetimes_ns, t) / i0;
                match Poisson::new(mean) {
                    Ok(d) => d.sample(rng),
                    Err(_) => 0.0,
                }
            })
            .collect()
    }
}

pub(crate) fn decay_shape(p: &[f64; 3], tau: &[f64; 3], t: f64) -> f64 {
    p.iter().zip(tau).map(|(p, tau)| p * (-t / tau).exp()).sum()
}

/// `I(t) = A Σ Pj exp(-t/τj)`.
pub fn decay_curve(populations: [f64; 3], lifetimes_ns: [f64; 3], t_ns: &[f64], amplitude: f64) -> Result<DecayCurve> {
    let total: f64 = populations.iter().sum();
    if populations.iter().any(|p| !p.is_finite() || *p < 0.0) || (total - 1.0).abs() > POP_TOL {
        return Err(Error::NotNormalized(total));
    }
    if lifetimes_ns.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidParameter("lifetimes must be positive".into()));
    }
    let intensity = t_ns
        .iter()
        .map(|&t| amplitude * decay_shape(&populations, &lifetimes_ns, t))
        .collect();
    Ok(DecayCurve {
        t_ns: t_ns.to_vec(),
        intensity,
        populations,
        lifetimes_ns,
    })
}

/// How the fluorescence baseline for a contrast measurement is established.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ContrastMode {
    /// Pulse-train steady state; the microwave acts between pulses.
    #[default]
    PulseTrain,
    /// Continuous excitation at the given pump rate, solved on all seven levels.
    Cw { pump_rate_mhz: f64 },
}

/// Relative fluorescence change `(I_on - I_off) / I_off` when the microwave
/// exchanges population across `pair`. Negative when the spin is polarized
/// into `|0⟩`.
pub fn cw_contrast(
    sol_es: &EigenSolution,
    rates: &PhotoRateParams,
    mw_rate_mhz: f64,
    pair: ResonancePair,
    mode: ContrastMode,
) -> Result<f64> {
    driven_contrast(sol_es, rates, mw_rate_mhz, &[pair], mode)
}

/// Contrast with every pair in `pairs` driven at once.
pub fn driven_contrast(
    sol_es: &EigenSolution,
    rates: &PhotoRateParams,
    mw_rate_mhz: f64,
    pairs: &[ResonancePair],
    mode: ContrastMode,
) -> Result<f64> {
    if !(mw_rate_mhz.is_finite() && mw_rate_mhz >= 0.0) {
        return Err(Error::InvalidParameter(format!("mw_rate must be >= 0, got {mw_rate_mhz}")));
    }
    if mw_rate_mhz == 0.0 || pairs.is_empty() {
        return Ok(0.0);
    }
    let (off, on) = match mode {
        ContrastMode::PulseTrain => {
            let off = pulse_fluorescence(sol_es, rates, 0.0, pairs)?;
            let on = pulse_fluorescence(sol_es, rates, mw_rate_mhz, pairs)?;
            (off, on)
        }
        ContrastMode::Cw { pump_rate_mhz } => {
            let off = cw_fluorescence(sol_es, rates, pump_rate_mhz, 0.0, pairs)?;
            let on = cw_fluorescence(sol_es, rates, pump_rate_mhz, mw_rate_mhz, pairs)?;
            (off, on)
        }
    };
    Ok((on - off) / off)
}

fn exchange_generator(mw_rate_mhz: f64, pairs: &[ResonancePair]) -> Matrix3<f64> {
    let mut g = Matrix3::zeros();
    for pair in pairs {
        let b = pair.partner();
        g[(ZERO, b)] += mw_rate_mhz;
        g[(b, ZERO)] += mw_rate_mhz;
        g[(ZERO, ZERO)] -= mw_rate_mhz;
        g[(b, b)] -= mw_rate_mhz;
    }
    g
}

/// Photons per pulse (per unit `eta`) at the pulse-train steady state.
fn pulse_fluorescence(
    sol: &EigenSolution,
    rates: &PhotoRateParams,
    mw_rate_mhz: f64,
    pairs: &[ResonancePair],
) -> Result<f64> {
    let map = PulseMap::new(sol, rates)?;
    let exchange = (exchange_generator(mw_rate_mhz, pairs) * (rates.pulse_spacing_ns * 1e-3)).exp();
    let p = stationary_of(&(exchange * map.matrix))?;
    Ok(radiative_yield(&p, sol, rates))
}

fn radiative_yield(ground: &[f64; 3], sol: &EigenSolution, rates: &PhotoRateParams) -> f64 {
    let lm = rates.lifetime_model();
    let m = sol.mixing();
    excited_fractions(ground, sol)
        .iter()
        .zip(m)
        .map(|(pj, mj)| pj * rates.k_r / lm.total_rate(mj))
        .sum()
}

/// Steady-state photon rate under continuous excitation (MHz per emitter).
fn cw_fluorescence(
    sol: &EigenSolution,
    rates: &PhotoRateParams,
    pump_rate_mhz: f64,
    mw_rate_mhz: f64,
    pairs: &[ResonancePair],
) -> Result<f64> {
    Ok(rates.k_r * cw_steady_state(sol, rates, pump_rate_mhz, mw_rate_mhz, pairs)?.excited.iter().sum::<f64>())
}

type Generator = SMatrix<f64, 7, 7>;

/// Continuous-wave steady state of the seven-level rate equations under
/// optical pumping and an incoherent microwave exchange on `pairs`.
pub fn cw_steady_state(
    sol: &EigenSolution,
    rates: &PhotoRateParams,
    pump_rate_mhz: f64,
    mw_rate_mhz: f64,
    pairs: &[ResonancePair],
) -> Result<PopulationState> {
    rates.validate()?;
    if !(pump_rate_mhz.is_finite() && pump_rate_mhz > 0.0) {
        return Err(Error::InvalidParameter("pump rate must be positive".into()));
    }
    let a = sol.overlaps();
    let m = sol.mixing();
    let lm = rates.lifetime_model();
    let branch = rates.singlet_branching();
    const S: usize = 6;

    let mut l = Generator::zeros();
    let mut flow = |from: usize, to: usize, rate: f64| {
        l[(to, from)] += rate;
        l[(from, from)] -= rate;
    };
    for g in 0..3 {
        for j in 0..3 {
            flow(g, 3 + j, pump_rate_mhz * a[g][j]);
            flow(3 + j, g, rates.k_r * a[g][j]);
        }
    }
    for j in 0..3 {
        flow(3 + j, S, lm.isc_rate(m[j]));
    }
    for (h, b) in branch.iter().enumerate() {
        flow(S, h, b / rates.tau_singlet_ns * 1e3);
    }
    let ex = exchange_generator(mw_rate_mhz, pairs);
    for i in 0..3 {
        for j in 0..3 {
            l[(i, j)] += ex[(i, j)];
        }
    }

    let svd = l.svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    if sv[1] <= 1e-12 * sv[6].max(1.0) {
        return Err(Error::DegenerateDynamics);
    }
    let mut a_mat = l;
    for c in 0..7 {
        a_mat[(6, c)] = 1.0;
    }
    let mut rhs = SVector::<f64, 7>::zeros();
    rhs[6] = 1.0;
    let p = a_mat.lu().solve(&rhs).ok_or(Error::DegenerateDynamics)?;
    Ok(PopulationState {
        ground: [p[0], p[1], p[2]],
        excited: [p[3], p[4], p[5]],
        singlet: p[6],
    })
}

/// One ground-state resonance contributing to a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub frequency_ghz: f64,
    pub contrast: f64,
    pub pairs: Vec<ResonancePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrSpectrum {
    pub f_ghz: Vec<f64>,
    pub contrast: Vec<f64>,
    pub resonances: Vec<Resonance>,
}

/// Lorentzian with unit peak and full width `fwhm`.
pub fn lorentzian(detuning: f64, fwhm: f64) -> f64 {
    let hw = 0.5 * fwhm;
    hw * hw / (detuning * detuning + hw * hw)
}

/// Ground-state resonances from the `|0⟩`-like level, each tagged with the
/// spin pair it drives. Coincident lines are merged and driven together.
pub fn ground_resonances(sol_gs: &EigenSolution) -> Vec<(f64, Vec<ResonancePair>)> {
    let bright = sol_gs.bright_index();
    let mut lines: Vec<(f64, Vec<ResonancePair>)> = Vec::new();
    for t in transition_frequencies(sol_gs) {
        let other = if t.lower == bright {
            t.upper
        } else if t.upper == bright {
            t.lower
        } else {
            continue;
        };
        let pair = if sol_gs.overlap(PLUS, other) >= sol_gs.overlap(MINUS, other) {
            ResonancePair::Plus
        } else {
            ResonancePair::Minus
        };
        let f = t.frequency_ghz.abs();
        match lines.iter_mut().find(|(g, _)| (g - f).abs() <= 1e-9) {
            Some((_, pairs)) => {
                if !pairs.contains(&pair) {
                    pairs.push(pair);
                } else {
                    // degenerate partner with the same dominant component
                    let flipped = match pair {
                        ResonancePair::Plus => ResonancePair::Minus,
                        ResonancePair::Minus => ResonancePair::Plus,
                    };
                    pairs.push(flipped);
                }
            }
            None => lines.push((f, vec![pair])),
        }
    }
    lines.sort_by(|a, b| a.0.total_cmp(&b.0));
    lines
}

/// Contrast versus microwave frequency: Lorentzian lines at the ground-state
/// resonances, each weighted by its driven contrast.
pub fn odmr_spectrum(
    sol_gs: &EigenSolution,
    sol_es: &EigenSolution,
    rates: &PhotoRateParams,
    mw_rate_mhz: f64,
    mode: ContrastMode,
    f_ghz: &[f64],
    linewidth_mhz: f64,
) -> Result<OdmrSpectrum> {
    if !(linewidth_mhz.is_finite() && linewidth_mhz > 0.0) {
        return Err(Error::InvalidParameter("linewidth must be positive".into()));
    }
    if f_ghz.iter().any(|f| !f.is_finite()) {
        return Err(Error::NonFinite("microwave sweep"));
    }
    let resonances = ground_resonances(sol_gs)
        .into_iter()
        .map(|(frequency_ghz, pairs)| {
            let contrast = driven_contrast(sol_es, rates, mw_rate_mhz, &pairs, mode)?;
            Ok(Resonance {
                frequency_ghz,
                contrast,
                pairs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fwhm = linewidth_mhz * 1e-3;
    let contrast = f_ghz
        .iter()
        .map(|&f| {
            resonances
                .iter()
                .map(|r| r.contrast * lorentzian(f - r.frequency_ghz, fwhm))
                .sum()
        })
        .collect();
    Ok(OdmrSpectrum {
        f_ghz: f_ghz.to_vec(),
        contrast,
        resonances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build, eigensolve};
    use crate::strain::HamiltonianCouplings;
    use approx::assert_abs_diff_eq;

    fn pure() -> EigenSolution {
        eigensolve(&build(HamiltonianCouplings::unstrained(0.85), 0.0))
    }

    fn rates(eta: f64, k_r: f64, k0: f64, k1: f64, q0: f64) -> PhotoRateParams {
        PhotoRateParams::new(eta, LifetimeModel::new(k_r, k0, k1).unwrap(), q0).unwrap()
    }

    fn excited_only(sol: &EigenSolution, label: usize) -> PopulationState {
        let mut s = PopulationState::thermal();
        s.ground = [0.0; 3];
        s.excited[sol.labels()[label]] = 1.0;
        s
    }

    #[test]
    fn eta_zero_leaves_state() {
        let s = PopulationState::ground_state(0.2, 0.5, 0.3).unwrap();
        assert_eq!(excite_pulse(&s, &pure(), 0.0).unwrap(), s);
    }

    #[test]
    fn pure_zero_goes_to_bright() {
        let sol = pure();
        let s = PopulationState::ground_state(0.0, 1.0, 0.0).unwrap();
        let e = excite_pulse(&s, &sol, 1.0).unwrap();
        assert_abs_diff_eq!(e.excited[sol.bright_index()], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn thermal_excitation_is_uniform() {
        let sol = eigensolve(&build(HamiltonianCouplings::from_moduli(0.80, 0.25, 1.19), 0.0));
        let e = excite_pulse(&PopulationState::thermal(), &sol, 1.0).unwrap();
        for p in e.excited {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn excitation_requires_empty_excited_manifold() {
        let sol = pure();
        let s = excited_only(&sol, 0);
        assert_eq!(excite_pulse(&s, &sol, 0.5), Err(Error::NotGroundManifold));
    }

    #[test]
    fn closed_cycle_returns_to_zero() {
        let sol = pure();
        let r = rates(0.5, 132.0, 0.0, 357.0, 0.39);
        let out = relax(&excited_only(&sol, 0), &sol, &r).unwrap();
        assert_abs_diff_eq!(out.p0(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn pure_isc_path_follows_branching() {
        let sol = pure();
        let r = rates(0.5, 0.0, 32.0, 357.0, 0.39);
        let out = relax(&excited_only(&sol, 1), &sol, &r).unwrap();
        assert_abs_diff_eq!(out.p0(), 0.39, epsilon = 1e-15);
        assert_abs_diff_eq!(out.p_plus() + out.p_minus(), 0.61, epsilon = 1e-15);
        assert_abs_diff_eq!(out.p_plus(), out.p_minus(), epsilon = 1e-15);
    }

    #[test]
    fn two_step_branching_for_bright_state() {
        let sol = pure();
        let r = rates(0.5, 132.0, 32.0, 357.0, 0.39);
        let out = relax(&excited_only(&sol, 0), &sol, &r).unwrap();
        assert_abs_diff_eq!(out.p0(), 132.0 / 164.0 + 32.0 / 164.0 * 0.39, epsilon = 1e-15);
    }

    #[test]
    fn relax_keeps_singlet_population() {
        let sol = pure();
        let r = rates(0.5, 132.0, 32.0, 357.0, 0.39);
        let mut s = PopulationState::thermal();
        s.ground = [0.0; 3];
        s.singlet = 1.0;
        let out = relax(&s, &sol, &r).unwrap();
        assert_abs_diff_eq!(out.p0(), 0.39, epsilon = 1e-15);
    }

    #[test]
    fn eta_zero_map_is_identity() {
        let map = PulseMap::new(&pure(), &rates(0.0, 132.0, 32.0, 357.0, 0.39)).unwrap();
        assert_abs_diff_eq!((map.matrix - Matrix3::identity()).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn unselective_rates_fix_uniform_state() {
        let sol = eigensolve(&build(HamiltonianCouplings::from_moduli(0.85, 0.09, 0.16), 0.0));
        let r = rates(0.3, 100.0, 80.0, 80.0, 1.0 / 3.0);
        let map = PulseMap::new(&sol, &r).unwrap();
        let p = map.apply(&[1.0 / 3.0; 3]);
        for x in p {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-14);
        }
        let ss = steady_state(&sol, &r).unwrap();
        for x in ss.ground.ground {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_dynamics_reported() {
        // Radiative-only decay of pure states: every ground state is a fixed point.
        let r = rates(0.5, 100.0, 0.0, 0.0, 0.5);
        assert_eq!(steady_state(&pure(), &r).unwrap_err(), Error::DegenerateDynamics);
    }

    #[test]
    fn single_exponential_curve() {
        let t = [0.0, 1.0, 5.0];
        let c = decay_curve([1.0, 0.0, 0.0], [6.0, 2.0, 2.0], &t, 2.0).unwrap();
        for (t, i) in t.iter().zip(&c.intensity) {
            assert_abs_diff_eq!(*i, 2.0 * (-t / 6.0).exp(), epsilon = 1e-15);
        }
        assert!(decay_curve([0.6, 0.6, 0.0], [6.0, 2.0, 2.0], &t, 1.0).is_err());
        assert!(decay_curve([1.0, 0.0, 0.0], [0.0, 2.0, 2.0], &t, 1.0).is_err());
    }

    #[test]
    fn no_microwave_no_contrast() {
        let sol = eigensolve(&build(HamiltonianCouplings::from_moduli(0.85, 0.09, 0.16), 0.0));
        let r = rates(0.3, 132.0, 32.0, 357.0, 0.39);
        let c = cw_contrast(&sol, &r, 0.0, ResonancePair::Plus, ContrastMode::PulseTrain).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn cw_mode_conserves_population() {
        let sol = eigensolve(&build(HamiltonianCouplings::from_moduli(0.85, 0.09, 0.16), 30.0));
        let r = rates(0.3, 132.0, 32.0, 357.0, 0.39);
        let s = cw_steady_state(&sol, &r, 20.0, 5.0, &[ResonancePair::Plus]).unwrap();
        assert_abs_diff_eq!(s.total(), 1.0, epsilon = 1e-12);
        assert!(s.singlet > 0.0);
    }

    #[test]
    fn empty_window_gives_flat_spectrum() {
        let gs = eigensolve(&build(HamiltonianCouplings::unstrained(2.87), 0.0));
        let es = eigensolve(&build(HamiltonianCouplings::from_moduli(0.85, 0.09, 0.16), 0.0));
        let r = rates(0.3, 132.0, 32.0, 357.0, 0.39);
        let f: Vec<f64> = (0..50).map(|i| 10.0 + 0.01 * i as f64).collect();
        let s = odmr_spectrum(&gs, &es, &r, 10.0, ContrastMode::PulseTrain, &f, 10.0).unwrap();
        assert!(s.contrast.iter().all(|c| c.abs() < 1e-6));
        assert!(odmr_spectrum(&gs, &es, &r, 10.0, ContrastMode::PulseTrain, &f, 0.0).is_err());
    }

    #[test]
    fn degenerate_ground_lines_merge() {
        let gs = eigensolve(&build(HamiltonianCouplings::unstrained(3.79), 0.0));
        let lines = ground_resonances(&gs);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].1.len(), 2);
        let gs = eigensolve(&build(HamiltonianCouplings::unstrained(3.79), 50.0));
        let lines = ground_resonances(&gs);
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].1, vec![ResonancePair::Minus]);
        assert_eq!(lines[1].1, vec![ResonancePair::Plus]);
    }
}

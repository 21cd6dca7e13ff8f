//! Fluorescence-decay fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lm::{Bounds, FitResult, LeastSquaresProblem, LevenbergMarquardt};
use crate::error::{Error, Result};

const MAX_CONDITION: f64 = 1e8;
const SAME_LIFETIME: f64 = 1e-9;

/// Sampled decay trace with optional inverse-variance weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayData {
    pub t_ns: Vec<f64>,
    pub counts: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

impl DecayData {
    pub fn new(t_ns: Vec<f64>, counts: Vec<f64>) -> Self {
        Self {
            t_ns,
            counts,
            weights: None,
        }
    }

    /// Poisson weights `1 / max(counts, 1)`.
    pub fn with_poisson_weights(mut self) -> Self {
        self.weights = Some(self.counts.iter().map(|c| 1.0 / c.max(1.0)).collect());
        self
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    fn check(&self, min_span: f64) -> Result<()> {
        if self.t_ns.len() != self.counts.len() {
            return Err(Error::InvalidParameter("time and count columns differ in length".into()));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.counts.len() || w.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
            }
        }
        if self.t_ns.len() < 10 {
            return Err(Error::InsufficientData(format!(
                "decay fit needs at least 10 points, got {}",
                self.t_ns.len()
            )));
        }
        if self.t_ns.iter().chain(&self.counts).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("decay data"));
        }
        let (lo, hi) = self
            .t_ns
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
        if hi - lo < min_span {
            return Err(Error::InsufficientData(format!(
                "time span {:.3} ns shorter than required {:.3} ns",
                hi - lo,
                min_span
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Normalized populations, same order as the supplied lifetimes.
    pub populations: [f64; 3],
    pub amplitude: f64,
    pub residual_norm: f64,
    pub condition_number: f64,
}

/// Populations of a tri-exponential decay with known lifetimes.
///
/// Solves non-negative least squares for the component amplitudes `A·Pj`,
/// then normalizes. Lifetimes that coincide cannot be told apart; their
/// shared amplitude is split evenly.
pub fn fit_decay(data: &DecayData, lifetimes_ns: [f64; 3]) -> Result<DecayFit> {
    if lifetimes_ns.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidParameter("lifetimes must be positive".into()));
    }
    let tau_max = lifetimes_ns.iter().cloned().fold(0.0, f64::max);
    data.check(3.0 * tau_max)?;

    // group identical lifetimes
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for (j, &tau) in lifetimes_ns.iter().enumerate() {
        match groups
            .iter_mut()
            .find(|(t, _)| ((t - tau) / tau).abs() <= SAME_LIFETIME)
        {
            Some((_, members)) => members.push(j),
            None => groups.push((tau, vec![j])),
        }
    }

    let n = data.t_ns.len();
    let k = groups.len();
    let mut x = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let sw = data.weight(i).sqrt();
        y[i] = sw * data.counts[i];
        for (c, (tau, _)) in groups.iter().enumerate() {
            x[(i, c)] = sw * (-data.t_ns[i] / tau).exp();
        }
    }
    let sv = x.clone().svd(false, false).singular_values;
    let condition_number = sv.max() / sv.min();
    if !(condition_number <= MAX_CONDITION) {
        return Err(Error::IllConditioned {
            cond: condition_number,
        });
    }

    let (coef, residual_norm) = nnls_small(&x, &y)?;
    let amplitude: f64 = coef.iter().sum();
    if amplitude <= 0.0 {
        return Err(Error::InsufficientData("no positive decay signal".into()));
    }
    let mut populations = [0.0; 3];
    for (c, (_, members)) in groups.iter().enumerate() {
        for &j in members {
            populations[j] = coef[c] / amplitude / members.len() as f64;
        }
    }
    Ok(DecayFit {
        populations,
        amplitude,
        residual_norm,
        condition_number,
    })
}

/// Exact non-negative least squares for a handful of columns: the optimum is
/// the unconstrained solution on its own support, so every support is tried.
fn nnls_small(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(Vec<f64>, f64)> {
    let k = x.ncols();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0u32..(1 << k) {
        let cols: Vec<usize> = (0..k).filter(|c| mask & (1 << c) != 0).collect();
        let mut coef = vec![0.0; k];
        if !cols.is_empty() {
            let sub = x.select_columns(&cols);
            let sol = match sub.clone().svd(true, true).solve(y, 1e-14) {
                Ok(s) => s,
                Err(_) => continue,
            };
            if sol.iter().any(|c| *c < 0.0) {
                continue;
            }
            for (c, v) in cols.iter().zip(sol.iter()) {
                coef[*c] = *v;
            }
        }
        let r = x * DVector::from_column_slice(&coef) - y;
        let norm = r.norm();
        if best.as_ref().map_or(true, |(_, b)| norm < *b) {
            best = Some((coef, norm));
        }
    }
    best.ok_or(Error::InsufficientData("empty design".into()))
}

/// Lifetimes from a thermalized decay, `I(t) = A/3 (e^{−t/τb} + 2 e^{−t/τd})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalFit {
    pub tau_bright_ns: f64,
    pub tau_dark_ns: f64,
    pub amplitude: f64,
    pub fit: FitResult,
}

impl ThermalFit {
    /// Lifetimes in `(τ4, τ5, τ6)` order with the dark pair tied.
    pub fn lifetimes(&self) -> [f64; 3] {
        [self.tau_bright_ns, self.tau_dark_ns, self.tau_dark_ns]
    }
}

pub(crate) struct ThermalProblem<'a> {
    pub data: &'a DecayData,
}

impl ThermalProblem<'_> {
    fn model(p: &[f64], t: f64) -> f64 {
        p[0] / 3.0 * ((-t / p[1]).exp() + 2.0 * (-t / p[2]).exp())
    }
}

impl LeastSquaresProblem for ThermalProblem<'_> {
    fn num_params(&self) -> usize {
        3
    }

    fn residuals(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .data
            .t_ns
            .iter()
            .zip(&self.data.counts)
            .enumerate()
            .map(|(i, (&t, &y))| self.data.weight(i).sqrt() * (Self::model(p, t) - y))
            .collect())
    }

    fn jacobian(&self, p: &[f64]) -> Option<Result<DMatrix<f64>>> {
        let n = self.data.t_ns.len();
        let mut j = DMatrix::zeros(n, 3);
        for (i, &t) in self.data.t_ns.iter().enumerate() {
            let sw = self.data.weight(i).sqrt();
            let eb = (-t / p[1]).exp();
            let ed = (-t / p[2]).exp();
            j[(i, 0)] = sw * (eb + 2.0 * ed) / 3.0;
            j[(i, 1)] = sw * p[0] / 3.0 * eb * t / (p[1] * p[1]);
            j[(i, 2)] = sw * 2.0 * p[0] / 3.0 * ed * t / (p[2] * p[2]);
        }
        Some(Ok(j))
    }
}

fn log_slope(t: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, y)| **y > 0.0)
        .map(|(t, y)| (*t, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn fit_thermal_lifetimes(data: &DecayData, lm: &LevenbergMarquardt) -> Result<ThermalFit> {
    data.check(0.0)?;
    let n = data.t_ns.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| data.t_ns[a].total_cmp(&data.t_ns[b]));
    let t: Vec<f64> = order.iter().map(|&i| data.t_ns[i]).collect();
    let y: Vec<f64> = order.iter().map(|&i| data.counts[i]).collect();

    let tail = n / 2;
    let tau_b0 = log_slope(&t[tail..], &y[tail..])
        .filter(|s| *s < 0.0)
        .map(|s| -1.0 / s)
        .unwrap_or_else(|| (t[n - 1] - t[0]) / 3.0)
        .max(1e-3);
    let y0 = y[0].max(f64::MIN_POSITIVE);
    let tmax = t[n - 1].max(tau_b0);

    let bounds = Bounds::new(vec![0.0, 1e-3, 1e-3], vec![f64::INFINITY, 100.0 * tmax, 100.0 * tmax]);
    let problem = ThermalProblem { data };
    let mut best: Option<FitResult> = None;
    for ratio in [0.2, 0.35, 0.6] {
        let start = [y0, tau_b0, tau_b0 * ratio];
        let fit = lm.minimize(&problem, &start, &bounds)?;
        if best.as_ref().map_or(true, |b| fit.residual_norm < b.residual_norm) {
            best = Some(fit);
        }
    }
    let fit = best.expect("at least one start");
    if !fit.converged {
        return Err(Error::NonConvergence {
            iterations: fit.iterations,
        });
    }
    let (mut tb, mut td) = (fit.params[1], fit.params[2]);
    if tb < td {
        std::mem::swap(&mut tb, &mut td);
    }
    if fit.rank_deficient || (tb - td).abs() <= 1e-3 * tb {
        return Err(Error::NonIdentifiable(format!(
            "bright and dark lifetimes coincide ({tb:.4} ns vs {td:.4} ns)"
        )));
    }
    Ok(ThermalFit {
        tau_bright_ns: tb,
        tau_dark_ns: td,
        amplitude: fit.params[0],
        fit,
    })
}

//! Bounded damped least squares (Levenberg–Marquardt) and finite-difference
//! Jacobians.
//!
//! The objective is `½‖r(p)‖²`. A trial step solves
//! `(JᵀJ + λ·diag(JᵀJ)) δ = −Jᵀr` and is projected onto the bounds. Accepted
//! steps halve `λ`; rejected steps multiply it by ten, so the objective never
//! increases between accepted iterates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A residual vector `r(p)` with an optional analytic Jacobian.
pub trait LeastSquaresProblem {
    fn num_params(&self) -> usize;

    fn residuals(&self, params: &[f64]) -> Result<Vec<f64>>;

    /// Analytic `∂r/∂p`, if the problem provides one.
    fn jacobian(&self, _params: &[f64]) -> Option<Result<DMatrix<f64>>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn unbounded(n: usize) -> Self {
        Self::new(vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }

    pub fn clamp(&self, p: &mut [f64]) {
        for (i, x) in p.iter_mut().enumerate() {
            *x = x.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .enumerate()
            .all(|(i, x)| *x >= self.lower[i] && *x <= self.upper[i])
    }

    fn at_bound(&self, p: &[f64]) -> Vec<bool> {
        p.iter()
            .enumerate()
            .map(|(i, x)| {
                let tol = 1e-9 * (1.0 + x.abs());
                (x - self.lower[i]).abs() <= tol || (self.upper[i] - x).abs() <= tol
            })
            .collect()
    }
}

/// Per-parameter step `h = max(relative·|p|, absolute_floor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub relative: f64,
    pub absolute_floor: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            relative: f64::EPSILON.cbrt(),
            absolute_floor: 1e-8,
        }
    }
}

/// Central-difference Jacobian. Near a bound the step is shrunk to stay
/// feasible; exactly on a bound it falls back to a one-sided difference.
pub fn finite_difference_jacobian<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    params: &[f64],
    bounds: Option<&Bounds>,
    policy: StepPolicy,
) -> Result<DMatrix<f64>> {
    let r0 = problem.residuals(params)?;
    let mut jac = DMatrix::zeros(r0.len(), params.len());
    let mut p = params.to_vec();
    for i in 0..params.len() {
        let x = params[i];
        let h = (policy.relative * x.abs()).max(policy.absolute_floor);
        let (room_lo, room_hi) = match bounds {
            Some(b) => (x - b.lower[i], b.upper[i] - x),
            None => (f64::INFINITY, f64::INFINITY),
        };
        let (lo, hi) = if room_lo >= h && room_hi >= h {
            (x - h, x + h)
        } else if room_lo.min(room_hi) > 0.0 {
            let s = room_lo.min(room_hi);
            (x - s, x + s)
        } else if room_hi >= h {
            (x, x + h)
        } else {
            (x - h.min(room_lo), x)
        };
        p[i] = hi;
        let r_hi = problem.residuals(&p)?;
        p[i] = lo;
        let r_lo = problem.residuals(&p)?;
        p[i] = x;
        let width = hi - lo;
        for (row, (a, b)) in r_hi.iter().zip(&r_lo).enumerate() {
            jac[(row, i)] = (a - b) / width;
        }
    }
    Ok(jac)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevenbergMarquardt {
    pub max_iterations: usize,
    /// Stop when an accepted step changes the objective by less than this fraction.
    pub ftol: f64,
    /// Stop when the accepted step is shorter than this (relative to `‖p‖`).
    pub xtol: f64,
    pub initial_damping: f64,
    pub step: StepPolicy,
}

impl Default for LevenbergMarquardt {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            ftol: 1e-10,
            xtol: 1e-12,
            initial_damping: 1e-3,
            step: StepPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Standard errors from `s²(JᵀJ)⁺` at the optimum, `s² = ‖r‖²/(n − p)`.
    pub std_errors: Vec<f64>,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub at_bound: Vec<bool>,
    /// Jacobian rank below the parameter count at the optimum.
    pub rank_deficient: bool,
    pub condition_number: f64,
    /// Objective after each accepted step, starting with the initial value.
    pub cost_history: Vec<f64>,
}

impl FitResult {
    pub fn cost(&self) -> f64 {
        0.5 * self.residual_norm * self.residual_norm
    }
}

fn half_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

impl LevenbergMarquardt {
    pub fn jacobian<P: LeastSquaresProblem + ?Sized>(
        &self,
        problem: &P,
        params: &[f64],
        bounds: &Bounds,
    ) -> Result<DMatrix<f64>> {
        match problem.jacobian(params) {
            Some(j) => j,
            None => finite_difference_jacobian(problem, params, Some(bounds), self.step),
        }
    }

    pub fn minimize<P: LeastSquaresProblem + ?Sized>(
        &self,
        problem: &P,
        initial: &[f64],
        bounds: &Bounds,
    ) -> Result<FitResult> {
        let n = problem.num_params();
        if initial.len() != n || bounds.lower.len() != n {
            return Err(Error::InvalidParameter("parameter vector has the wrong length".into()));
        }
        let mut p = initial.to_vec();
        bounds.clamp(&mut p);
        let mut r = problem.residuals(&p)?;
        if r.len() < n {
            return Err(Error::InsufficientData(format!(
                "{} residuals for {} parameters",
                r.len(),
                n
            )));
        }
        let mut cost = half_sq(&r);
        let mut history = vec![cost];
        let mut lambda = self.initial_damping;
        let mut converged = false;
        let mut iterations = 0;

        while iterations < self.max_iterations && !converged {
            iterations += 1;
            if cost <= f64::MIN_POSITIVE {
                converged = true;
                break;
            }
            let jac = self.jacobian(problem, &p, bounds)?;
            let rv = DVector::from_column_slice(&r);
            let jtj = jac.transpose() * &jac;
            let grad = jac.transpose() * rv;
            let diag_max = jtj.diagonal().max();
            if grad.amax() <= 1e-15 * (1.0 + cost) {
                converged = true;
                break;
            }

            let mut accepted = false;
            while lambda < 1e16 {
                let mut a = jtj.clone();
                for i in 0..n {
                    a[(i, i)] += lambda * jtj[(i, i)].max(1e-12 * diag_max).max(1e-300);
                }
                let delta = match a.cholesky() {
                    Some(ch) => ch.solve(&(-&grad)),
                    None => {
                        lambda *= 10.0;
                        continue;
                    }
                };
                let mut trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(x, d)| x + d).collect();
                bounds.clamp(&mut trial);
                let step_norm = p
                    .iter()
                    .zip(&trial)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let p_norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                let r_trial = match problem.residuals(&trial) {
                    Ok(rt) if rt.iter().all(|x| x.is_finite()) => rt,
                    _ => {
                        lambda *= 10.0;
                        continue;
                    }
                };
                let cost_trial = half_sq(&r_trial);
                if cost_trial < cost {
                    let rel_change = (cost - cost_trial) / cost;
                    p = trial;
                    r = r_trial;
                    cost = cost_trial;
                    history.push(cost);
                    lambda = (lambda * 0.5).max(1e-15);
                    accepted = true;
                    if rel_change < self.ftol || step_norm < self.xtol * (p_norm + self.xtol) {
                        converged = true;
                    }
                    break;
                }
                if step_norm < self.xtol * (p_norm + self.xtol) {
                    // no representable improvement left
                    converged = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !accepted && !converged {
                // Damping saturated without finding descent: stationary point.
                converged = true;
            }
        }

        let jac = self.jacobian(problem, &p, bounds)?;
        let (std_errors, rank_deficient, condition_number) = covariance_summary(&jac, &r);
        Ok(FitResult {
            at_bound: bounds.at_bound(&p),
            params: p,
            std_errors,
            residual_norm: (2.0 * cost).sqrt(),
            converged,
            iterations,
            rank_deficient,
            condition_number,
            cost_history: history,
        })
    }
}

/// Standard errors, rank deficiency and condition number from the Jacobian
/// at the optimum.
pub fn covariance_summary(jac: &DMatrix<f64>, residuals: &[f64]) -> (Vec<f64>, bool, f64) {
    let (m, n) = jac.shape();
    let svd = jac.clone().svd(false, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    let cutoff = 1e-10 * smax;
    let rank_deficient = smax <= 0.0 || smin <= cutoff;
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    let dof = m.saturating_sub(n).max(1) as f64;
    let s2 = residuals.iter().map(|x| x * x).sum::<f64>() / dof;
    let v_t = svd.v_t.expect("requested");
    let mut cov = DMatrix::zeros(n, n);
    for (k, &sk) in s.iter().enumerate() {
        if sk > cutoff {
            let v = v_t.row(k).transpose();
            cov += (&v * v.transpose()) / (sk * sk);
        }
    }
    let errs = (0..n).map(|i| (s2 * cov[(i, i)]).max(0.0).sqrt()).collect();
    (errs, rank_deficient, condition_number)
}

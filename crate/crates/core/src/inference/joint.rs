//! Joint fit of excited-state transition frequencies and lifetimes versus
//! axial field for `(|D|, |E1|, |E2|)`.
//!
//! `E1` and `E2` are held real and positive; only the moduli are free. Each
//! measured frequency is compared with the nearest of the three model
//! transitions at its field. Lifetimes are compared label by label
//! (`τ4 ≥ τ5 ≥ τ6` by `|0⟩` weight). When `balance_datasets` is set, each
//! block of weighted residuals is scaled by `1/√n_block` so both data sets
//! carry equal weight regardless of their size.

use serde::{Deserialize, Serialize};

use super::lm::{Bounds, FitResult, LeastSquaresProblem, LevenbergMarquardt};
use super::Estimate;
use crate::error::{Error, Result};
use crate::hamiltonian::{
    build, effective_lifetimes, eigensolve, transition_frequencies, LifetimeModel, GAMMA_E_MHZ_PER_G,
};
use crate::strain::HamiltonianCouplings;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdmrPoint {
    pub bz_gauss: f64,
    pub f_ghz: f64,
    pub f_err_ghz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimePoint {
    pub bz_gauss: f64,
    /// `(τ4, τ5, τ6)`
    pub tau_ns: [f64; 3],
    pub tau_err_ns: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JointEsData {
    pub odmr: Vec<OdmrPoint>,
    pub lifetimes: Vec<LifetimePoint>,
}

impl JointEsData {
    /// Noiseless data from the forward model at the given fields. Frequency
    /// and lifetime uncertainties are `rel_err` times the value.
    pub fn synthetic(
        couplings: &HamiltonianCouplings,
        lifetimes: &LifetimeModel,
        fields: &[f64],
        rel_err: f64,
        gamma_e: f64,
    ) -> Result<Self> {
        let mut data = Self::default();
        for &bz in fields {
            let sol = eigensolve(&build(*couplings, bz).with_gamma(gamma_e));
            for t in transition_frequencies(&sol) {
                data.odmr.push(OdmrPoint {
                    bz_gauss: bz,
                    f_ghz: t.frequency_ghz,
                    f_err_ghz: rel_err * t.frequency_ghz.abs().max(1e-3),
                });
            }
            let tau = effective_lifetimes(&sol, lifetimes)?;
            let l = sol.labels();
            let tau_ns = l.map(|j| tau[j]);
            data.lifetimes.push(LifetimePoint {
                bz_gauss: bz,
                tau_ns,
                tau_err_ns: tau_ns.map(|t| rel_err * t),
            });
        }
        Ok(data)
    }

    fn distinct_fields(&self) -> usize {
        let mut f: Vec<f64> = self
            .odmr
            .iter()
            .map(|p| p.bz_gauss)
            .chain(self.lifetimes.iter().map(|p| p.bz_gauss))
            .collect();
        f.sort_by(f64::total_cmp);
        f.dedup();
        f.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointEsOptions {
    pub balance_datasets: bool,
    pub gamma_e_mhz_per_g: f64,
    /// Starting `(|D|, |E1|, |E2|)`; a coarse grid search is used when absent.
    pub initial: Option<[f64; 3]>,
    pub lm: LevenbergMarquardt,
}

impl Default for JointEsOptions {
    fn default() -> Self {
        Self {
            balance_datasets: true,
            gamma_e_mhz_per_g: GAMMA_E_MHZ_PER_G,
            initial: None,
            lm: LevenbergMarquardt::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEsFit {
    pub d: Estimate,
    pub e1: Estimate,
    pub e2: Estimate,
    pub fit: FitResult,
}

impl JointEsFit {
    pub fn couplings(&self) -> HamiltonianCouplings {
        HamiltonianCouplings::from_moduli(self.d.value, self.e1.value, self.e2.value)
    }
}

struct JointProblem<'a> {
    data: &'a JointEsData,
    lifetimes: &'a LifetimeModel,
    gamma_e: f64,
    odmr_scale: f64,
    tau_scale: f64,
    /// Distinct fields, and for each data point the index of its field.
    fields: Vec<f64>,
    odmr_field: Vec<usize>,
    tau_field: Vec<usize>,
}

impl<'a> JointProblem<'a> {
    fn new(data: &'a JointEsData, lifetimes: &'a LifetimeModel, gamma_e: f64, scales: (f64, f64)) -> Self {
        let mut fields: Vec<f64> = Vec::new();
        let mut index_of = |b: f64| match fields.iter().position(|f| *f == b) {
            Some(i) => i,
            None => {
                fields.push(b);
                fields.len() - 1
            }
        };
        let odmr_field = data.odmr.iter().map(|p| index_of(p.bz_gauss)).collect();
        let tau_field = data.lifetimes.iter().map(|p| index_of(p.bz_gauss)).collect();
        Self {
            data,
            lifetimes,
            gamma_e,
            odmr_scale: scales.0,
            tau_scale: scales.1,
            fields,
            odmr_field,
            tau_field,
        }
    }
}

impl LeastSquaresProblem for JointProblem<'_> {
    fn num_params(&self) -> usize {
        3
    }

    fn residuals(&self, p: &[f64]) -> Result<Vec<f64>> {
        let couplings = HamiltonianCouplings::from_moduli(p[0], p[1], p[2]);
        let sols: Vec<_> = self
            .fields
            .iter()
            .map(|&bz| eigensolve(&build(couplings, bz).with_gamma(self.gamma_e)))
            .collect();
        let mut r = Vec::with_capacity(self.data.odmr.len() + 3 * self.data.lifetimes.len());
        for (pt, &fi) in self.data.odmr.iter().zip(&self.odmr_field) {
            let sol = &sols[fi];
            let nearest = transition_frequencies(sol)
                .iter()
                .map(|t| t.frequency_ghz)
                .min_by(|a, b| (a - pt.f_ghz).abs().total_cmp(&(b - pt.f_ghz).abs()))
                .expect("three transitions");
            r.push(self.odmr_scale * (nearest - pt.f_ghz) / pt.f_err_ghz);
        }
        for (pt, &fi) in self.data.lifetimes.iter().zip(&self.tau_field) {
            let sol = &sols[fi];
            let tau = effective_lifetimes(sol, self.lifetimes)?;
            let l = sol.labels();
            for k in 0..3 {
                r.push(self.tau_scale * (tau[l[k]] - pt.tau_ns[k]) / pt.tau_err_ns[k]);
            }
        }
        Ok(r)
    }
}

fn validate(data: &JointEsData) -> Result<()> {
    if data.distinct_fields() < 3 {
        return Err(Error::InsufficientData("joint fit needs at least 3 field points".into()));
    }
    let ok_odmr = data
        .odmr
        .iter()
        .all(|p| p.bz_gauss.is_finite() && p.f_ghz.is_finite() && p.f_err_ghz > 0.0);
    let ok_tau = data.lifetimes.iter().all(|p| {
        p.bz_gauss.is_finite() && p.tau_ns.iter().all(|t| t.is_finite()) && p.tau_err_ns.iter().all(|e| *e > 0.0)
    });
    if !(ok_odmr && ok_tau) {
        return Err(Error::InvalidParameter(
            "data must be finite with positive uncertainties".into(),
        ));
    }
    Ok(())
}

pub fn fit_joint_es(data: &JointEsData, lifetimes: &LifetimeModel, options: &JointEsOptions) -> Result<JointEsFit> {
    validate(data)?;
    lifetimes.validate()?;
    let (odmr_scale, tau_scale) = if options.balance_datasets {
        let inv = |n: usize| if n == 0 { 1.0 } else { 1.0 / (n as f64).sqrt() };
        (inv(data.odmr.len()), inv(3 * data.lifetimes.len()))
    } else {
        (1.0, 1.0)
    };
    let problem = JointProblem::new(data, lifetimes, options.gamma_e_mhz_per_g, (odmr_scale, tau_scale));
    let bounds = Bounds::new(vec![0.0; 3], vec![20.0; 3]);

    let starts = match options.initial {
        Some(p) => vec![p],
        None => grid_starts(&problem, 3)?,
    };
    let mut best: Option<FitResult> = None;
    for s in starts {
        let fit = options.lm.minimize(&problem, &s, &bounds)?;
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
    Ok(JointEsFit {
        d: Estimate::from_fit(&fit, 0),
        e1: Estimate::from_fit(&fit, 1),
        e2: Estimate::from_fit(&fit, 2),
        fit,
    })
}

fn grid_starts(problem: &JointProblem<'_>, keep: usize) -> Result<Vec<[f64; 3]>> {
    let mut scored = Vec::new();
    for i in 0..15 {
        let d = 0.2 + 0.2 * i as f64;
        for &e1 in &[0.02, 0.06, 0.12, 0.25, 0.45] {
            for &e2 in &[0.05, 0.15, 0.35, 0.7, 1.1, 1.6, 2.2] {
                let p = [d, e1, e2];
                if let Ok(r) = problem.residuals(&p) {
                    let c: f64 = r.iter().map(|x| x * x).sum();
                    if c.is_finite() {
                        scored.push((c, p));
                    }
                }
            }
        }
    }
    if scored.is_empty() {
        return Err(Error::NonConvergence { iterations: 0 });
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(scored.into_iter().take(keep).map(|(_, p)| p).collect())
}

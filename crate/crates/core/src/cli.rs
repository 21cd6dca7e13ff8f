//! Command layer behind the `nvstrain` binary.
//!
//! Exit codes: 0 success, 2 bad configuration or input layout, 3 numerical
//! failure or non-convergence, 4 file-system failure. For a given config and
//! seed every output is byte-identical across runs.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::config::{ResolvedConfig, RunConfig};
use crate::error::{Error, Result};
use crate::hamiltonian::{build, effective_lifetimes, eigensolve, linspace, transition_frequencies, SweepPoint};
use crate::inference::{
    fit_decay, fit_joint_es, fit_pulse_dynamics, fit_thermal_lifetimes, JointEsData, JointEsOptions,
    LevenbergMarquardt, LifetimeConstraint, OdmrPoint, PulseDynamicsOptions,
};
use crate::io::{self, Header, PulseRow};
use crate::mapping::{profile_contrast, profile_couplings, ContrastSettings, StrainProfile, DEFAULT_PSF_FWHM_UM};
use crate::photodynamics::{decay_curve, excited_fractions, odmr_spectrum, prepare, pulse_train};
use crate::presets;

#[derive(Debug, Parser)]
#[command(name = "nvstrain", version, about = "Strain-coupled NV center simulation and fitting")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// RNG seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Fill unset values from a preset: site-I, site-IV or ambient.
    #[arg(long, global = true)]
    pub site_preset: Option<String>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic data from the forward model.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Fit model parameters to data files.
    #[command(subcommand)]
    Fit(FitCommand),
    /// List the built-in parameter presets.
    Presets,
    /// Print the JSON schema of the run configuration.
    Schema,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// ODMR spectrum (f_ghz, contrast).
    Odmr,
    /// Fluorescence decay after one pulse (t_ns, counts).
    Decay,
    /// Bright-state population along pulse trains.
    Pulses {
        /// Number of pulses; overrides the config.
        #[arg(long)]
        pulses: Option<usize>,
    },
    /// Excited-state energies, mixing and lifetimes versus axial field.
    SweepBz,
    /// Couplings and contrast along a strain profile.
    Map {
        /// Profile CSV (x_um, sxx, syy, szz, sxy, sxz, syz); otherwise the
        /// config's logistic ramp is used.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum FitCommand {
    /// Populations from a decay with fixed lifetimes.
    Decay(DataArg),
    /// Bright and dark lifetimes from a thermalized decay.
    Thermal(DataArg),
    /// Excited-state |D|, |E1|, |E2| from transition frequencies and lifetimes.
    JointEs {
        #[arg(long)]
        odmr: PathBuf,
        #[arg(long)]
        lifetimes: PathBuf,
    },
    /// Transition rates and singlet branching from pulse trains.
    PulseDynamics(DataArg),
}

#[derive(Debug, Args)]
pub struct DataArg {
    #[arg(long)]
    pub data: PathBuf,
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Schema(_) | Error::InvalidParameter(_) | Error::InsufficientData(_) => 2,
        Error::Io(_) => 4,
        _ => 3,
    }
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command and returns the files it wrote.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Presets => {
            print!("{}", presets_listing());
            return Ok(Vec::new());
        }
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&RunConfig::schema()).expect("schema"));
            return Ok(Vec::new());
        }
        _ => {}
    }
    let ctx = Context::new(cli)?;
    let mut written = match &cli.command {
        Command::Simulate(s) => simulate(&ctx, s)?,
        Command::Fit(f) => fit(&ctx, f)?,
        Command::Presets | Command::Schema => unreachable!(),
    };
    let path = ctx.out.join("config.resolved.json");
    io::write_json(&path, &ctx.cfg)?;
    written.push(path);
    Ok(written)
}

struct Context {
    cfg: ResolvedConfig,
    header: Header,
    out: PathBuf,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let raw = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let mut cfg = raw.resolve(cli.site_preset.as_deref())?;
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        if let Some(o) = &cli.out {
            cfg.output_dir = o.clone();
        }
        let header = Header::new(cfg.hash());
        let out = cfg.output_dir.clone();
        Ok(Self { cfg, header, out })
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed)
    }

    fn table(&self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.out.join(name);
        io::write_table(&path, &self.header, columns, rows)?;
        Ok(path)
    }

    fn report<T: Serialize>(&self, name: &str, command: &str, result: &T) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Report<'a, T> {
            tool_version: &'a str,
            config_hash: &'a str,
            command: &'a str,
            result: &'a T,
            config: &'a ResolvedConfig,
        }
        let path = self.out.join(name);
        io::write_json(
            &path,
            &Report {
                tool_version: &self.header.version,
                config_hash: &self.header.config_hash,
                command,
                result,
                config: &self.cfg,
            },
        )?;
        Ok(path)
    }

    fn lm(&self) -> LevenbergMarquardt {
        let mut lm = LevenbergMarquardt::default();
        if let Some(n) = self.cfg.fit.max_iterations {
            lm.max_iterations = n;
        }
        lm
    }

    /// Effective lifetimes `(τ4, τ5, τ6)` at a field.
    fn labelled_lifetimes(&self, bz: f64) -> Result<[f64; 3]> {
        let sol = eigensolve(&build(self.cfg.es, bz).with_gamma(self.cfg.gamma_e_mhz_per_g));
        let tau = effective_lifetimes(&sol, &self.cfg.rates.lifetime_model())?;
        Ok(sol.labels().map(|j| tau[j]))
    }
}

fn simulate(ctx: &Context, cmd: &SimulateCommand) -> Result<Vec<PathBuf>> {
    let c = &ctx.cfg;
    let gamma = c.gamma_e_mhz_per_g;
    match cmd {
        SimulateCommand::Odmr => {
            let o = c.odmr;
            let sol_gs = eigensolve(&build(c.gs, o.bz_gauss).with_gamma(gamma));
            let sol_es = eigensolve(&build(c.es, o.bz_gauss).with_gamma(gamma));
            let f = linspace(o.f_start_ghz, o.f_stop_ghz, o.steps);
            let s = odmr_spectrum(&sol_gs, &sol_es, &c.rates, c.mw_rate_mhz, c.contrast_mode, &f, c.linewidth_mhz)?;
            Ok(vec![ctx.table("odmr.csv", &io::SPECTRUM_COLUMNS, &io::spectrum_rows(&s.f_ghz, &s.contrast))?])
        }
        SimulateCommand::Decay => {
            let d = c.decay;
            let sol = eigensolve(&build(c.es, d.bz_gauss).with_gamma(gamma));
            let ground = prepare(d.preparation.preparation(), &sol, &c.rates)?;
            let p = excited_fractions(&ground, &sol);
            let tau = effective_lifetimes(&sol, &c.rates.lifetime_model())?;
            let l = sol.labels();
            let t = linspace(0.0, d.t_stop_ns, d.steps);
            let peak = d.peak_counts.unwrap_or(1e4);
            let curve = decay_curve(l.map(|j| p[j]), l.map(|j| tau[j]), &t, peak)?;
            let counts = match d.peak_counts {
                Some(pk) => curve.poisson_counts(pk, &mut ctx.rng()),
                None => curve.intensity.clone(),
            };
            Ok(vec![ctx.table("decay.csv", &io::DECAY_COLUMNS, &io::decay_rows(&t, &counts))?])
        }
        SimulateCommand::Pulses { pulses } => {
            let n = pulses.unwrap_or(c.pulses.pulses);
            let noise = c.pulses.relative_noise;
            let mut rng = ctx.rng();
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            let mut rows = Vec::new();
            let mut traj = 0;
            for &bz in &c.pulses.bz_gauss {
                let sol = eigensolve(&build(c.es, bz).with_gamma(gamma));
                for &prep in &c.pulses.preparations {
                    let init = prepare(prep.preparation(), &sol, &c.rates)?;
                    for rec in pulse_train(init, &sol, &c.rates, n)? {
                        let (p4, p4_err) = if noise > 0.0 {
                            let err = noise * rec.p4.max(0.01);
                            (rec.p4 + err * normal.sample(&mut rng), err)
                        } else {
                            (rec.p4, 0.01)
                        };
                        rows.push(PulseRow {
                            trajectory: traj,
                            bz_gauss: bz,
                            prep,
                            pulse_index: rec.index,
                            ground: rec.ground,
                            p4,
                            p4_err,
                        });
                    }
                    traj += 1;
                }
            }
            Ok(vec![ctx.table("pulses.csv", &io::PULSE_COLUMNS, &io::pulse_rows(&rows))?])
        }
        SimulateCommand::SweepBz => {
            let points = c
                .sweep
                .fields()
                .iter()
                .map(|&b| sweep_point(c, b))
                .collect::<Result<Vec<_>>>()?;
            let mut odmr = Vec::new();
            for &b in &c.sweep.fields() {
                let sol = eigensolve(&build(c.es, b).with_gamma(gamma));
                for t in transition_frequencies(&sol) {
                    odmr.push(OdmrPoint {
                        bz_gauss: b,
                        f_ghz: t.frequency_ghz,
                        f_err_ghz: 0.01,
                    });
                }
            }
            Ok(vec![
                ctx.table("sweep.csv", &io::SWEEP_COLUMNS, &io::sweep_rows(&points))?,
                ctx.table("es_odmr.csv", &io::ODMR_COLUMNS, &io::odmr_rows(&odmr))?,
            ])
        }
        SimulateCommand::Map { profile } => {
            let model = c.es_model.ok_or_else(|| {
                Error::InvalidParameter("map needs `coupling_model.excited` in the config".into())
            })?;
            let section = c.map.as_ref();
            let profile = match (profile, section.and_then(|m| m.ramp)) {
                (Some(p), _) => io::read_profile(&io::read_table(p)?)?,
                (None, Some(r)) => {
                    let m = section.expect("ramp implies section");
                    StrainProfile::logistic(linspace(m.start_um, m.stop_um, m.steps), &r.ramp())?
                }
                (None, None) => {
                    return Err(Error::InvalidParameter(
                        "map needs a --profile CSV or `map.ramp` in the config".into(),
                    ))
                }
            };
            let mut settings = ContrastSettings::new(section.map_or(0.0, |m| m.bz_gauss), c.mw_rate_mhz);
            settings.mode = c.contrast_mode;
            settings.gamma_e_mhz_per_g = gamma;
            let psf = section.and_then(|m| m.psf_fwhm_um).unwrap_or(DEFAULT_PSF_FWHM_UM);
            let couplings = profile_couplings(&profile, &model)?;
            let contrast = profile_contrast(&profile, &model, &c.rates, &settings, psf)?;
            Ok(vec![ctx.table("map.csv", &io::MAP_COLUMNS, &io::map_rows(&couplings, &contrast))?])
        }
    }
}

fn sweep_point(c: &ResolvedConfig, bz: f64) -> Result<SweepPoint> {
    let sol = eigensolve(&build(c.es, bz).with_gamma(c.gamma_e_mhz_per_g));
    let tau = effective_lifetimes(&sol, &c.rates.lifetime_model())?;
    let (e, m) = (sol.energies(), sol.mixing());
    let l = sol.labels();
    Ok(SweepPoint {
        bz_gauss: bz,
        energies: l.map(|j| e[j]),
        mixing: l.map(|j| m[j]),
        lifetimes_ns: l.map(|j| tau[j]),
    })
}

fn fit(ctx: &Context, cmd: &FitCommand) -> Result<Vec<PathBuf>> {
    let c = &ctx.cfg;
    match cmd {
        FitCommand::Decay(a) => {
            let data = io::read_decay(&io::read_table(&a.data)?)?;
            let tau = match c.fit.decay_lifetimes_ns {
                Some(t) => t,
                None => ctx.labelled_lifetimes(c.decay.bz_gauss)?,
            };
            let fit = fit_decay(&data, tau)?;
            #[derive(Serialize)]
            struct Out {
                lifetimes_ns: [f64; 3],
                populations: [f64; 3],
                amplitude: f64,
                residual_norm: f64,
                condition_number: f64,
            }
            let out = Out {
                lifetimes_ns: tau,
                populations: fit.populations,
                amplitude: fit.amplitude,
                residual_norm: fit.residual_norm,
                condition_number: fit.condition_number,
            };
            Ok(vec![ctx.report("fit_decay.json", "fit decay", &out)?])
        }
        FitCommand::Thermal(a) => {
            let data = io::read_decay(&io::read_table(&a.data)?)?;
            let fit = fit_thermal_lifetimes(&data, &ctx.lm())?;
            Ok(vec![ctx.report("fit_thermal.json", "fit thermal", &fit)?])
        }
        FitCommand::JointEs { odmr, lifetimes } => {
            let data = JointEsData {
                odmr: io::read_odmr(&io::read_table(odmr)?)?,
                lifetimes: io::read_lifetimes(&io::read_table(lifetimes)?)?,
            };
            let options = JointEsOptions {
                balance_datasets: c.fit.balance_datasets.unwrap_or(true),
                gamma_e_mhz_per_g: c.gamma_e_mhz_per_g,
                initial: c.fit.initial_es,
                lm: ctx.lm(),
            };
            let fit = fit_joint_es(&data, &c.rates.lifetime_model(), &options)?;
            Ok(vec![ctx.report("fit_joint_es.json", "fit joint-es", &fit)?])
        }
        FitCommand::PulseDynamics(a) => {
            let trajectories = io::read_pulses(&io::read_table(&a.data)?)?;
            let [tb, tbe, td, tde] = c.lifetime_constraint_ns.ok_or_else(|| {
                Error::InvalidParameter("pulse-dynamics needs `fit.lifetime_constraint_ns` or a preset".into())
            })?;
            let constraint = LifetimeConstraint {
                tau_bright_ns: tb,
                tau_bright_err_ns: tbe,
                tau_dark_ns: td,
                tau_dark_err_ns: tde,
            };
            let mut options = PulseDynamicsOptions::new(c.rates.eta);
            options.gamma_e_mhz_per_g = c.gamma_e_mhz_per_g;
            options.initial = c.fit.initial_rates;
            options.lm = ctx.lm();
            let fit = fit_pulse_dynamics(&trajectories, &c.es, &constraint, &options)?;
            Ok(vec![ctx.report("fit_pulse_dynamics.json", "fit pulse-dynamics", &fit)?])
        }
    }
}

/// Text listing of every preset with quoted uncertainties.
pub fn presets_listing() -> String {
    let mut s = String::new();
    for p in presets::ALL {
        s.push_str(&format!("{}\n", p.name));
        for (name, q, unit) in p.rows() {
            let err = q.error.map_or(String::new(), |e| format!(" ± {e}"));
            s.push_str(&format!("  {name:<11} {}{err} {unit}\n", q.value));
        }
    }
    s.push_str(&format!(
        "simulation defaults (not tabulated): eta {}, mw_rate {} MHz, linewidth {} MHz\n",
        presets::DEFAULT_ETA,
        presets::DEFAULT_MW_RATE_MHZ,
        presets::DEFAULT_LINEWIDTH_MHZ
    ));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Schema("x".into())), 2);
        assert_eq!(exit_code(&Error::Io("x".into())), 4);
        assert_eq!(exit_code(&Error::NonConvergence { iterations: 3 }), 3);
        assert_eq!(exit_code(&Error::DegenerateDynamics), 3);
    }

    #[test]
    fn listing_has_all_presets() {
        let s = presets_listing();
        for n in ["site-I", "site-IV", "ambient", "67.7", "0.54", "0.85", "0.21"] {
            assert!(s.contains(n), "{n}");
        }
    }
}

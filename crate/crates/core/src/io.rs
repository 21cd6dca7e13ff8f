//! CSV and JSON exchange formats.
//!
//! Every file starts with `#` comment lines naming the tool version and the
//! SHA-256 of the resolved configuration. Units are part of the column names
//! (`t_ns`, `bz_G`, `f_ghz`); a column present with the right stem but another
//! unit is reported as a unit mismatch rather than a missing column.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::PreparationSpec;
use crate::error::{Error, Result};
use crate::hamiltonian::SweepPoint;
use crate::inference::{DecayData, LifetimePoint, OdmrPoint, Trajectory};
use crate::mapping::{ContrastProfile, CouplingProfile, StrainProfile};
use crate::strain::StressTensor;

/// Provenance written at the top of each output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub version: String,
    pub config_hash: String,
}

impl Header {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config_hash: config_hash.into(),
        }
    }

    fn lines(&self) -> String {
        format!("# nvstrain {}\n# config_sha256 {}\n", self.version, self.config_hash)
    }
}

/// Column-oriented table of numbers and labels, as read from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub header: Option<Header>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// 1-based line in the source text.
    pub line: u64,
    pub fields: Vec<String>,
}

impl Table {
    fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Index of a required column, or a schema error naming the problem.
    pub fn require(&self, name: &str) -> Result<usize> {
        if let Some(i) = self.index(name) {
            return Ok(i);
        }
        let want = stem(name);
        if let Some(other) = self.columns.iter().find(|c| !want.is_empty() && stem(c) == want) {
            return Err(Error::Schema(format!("unit mismatch: expected column `{name}`, found `{other}`")));
        }
        Err(Error::Schema(format!("missing column `{name}`")))
    }

    pub fn f64_at(&self, row: &Row, col: usize) -> Result<f64> {
        let s = row.fields[col].trim();
        let v: f64 = s.parse().map_err(|_| {
            Error::Schema(format!(
                "line {}: column `{}` is not a number: `{s}`",
                row.line, self.columns[col]
            ))
        })?;
        if !v.is_finite() {
            return Err(Error::Schema(format!(
                "line {}: column `{}` is not finite",
                row.line, self.columns[col]
            )));
        }
        Ok(v)
    }

    fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.require(name)?;
        self.rows.iter().map(|r| self.f64_at(r, i)).collect()
    }

    fn optional_column(&self, name: &str) -> Result<Option<Vec<f64>>> {
        match self.index(name) {
            Some(i) => Ok(Some(self.rows.iter().map(|r| self.f64_at(r, i)).collect::<Result<_>>()?)),
            None => Ok(None),
        }
    }
}

fn stem(name: &str) -> &str {
    name.rsplit_once('_').map_or("", |(s, _)| s)
}

pub fn parse_table(text: &str) -> Result<Table> {
    let header = parse_header(text);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let columns: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    if columns.is_empty() || columns.iter().all(String::is_empty) {
        return Err(Error::Schema("empty file: no header row".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| match e.position() {
            Some(p) => Error::Schema(format!("line {}: {e}", p.line())),
            None => Error::Schema(e.to_string()),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(Row {
            line,
            fields: rec.iter().map(str::to_owned).collect(),
        });
    }
    if rows.is_empty() {
        return Err(Error::Schema("no data rows".into()));
    }
    Ok(Table { columns, rows, header })
}

fn parse_header(text: &str) -> Option<Header> {
    let mut version = None;
    let mut hash = None;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim();
        if let Some(v) = body.strip_prefix("nvstrain ") {
            version = Some(v.trim().to_owned());
        } else if let Some(h) = body.strip_prefix("config_sha256 ") {
            hash = Some(h.trim().to_owned());
        }
    }
    Some(Header {
        version: version?,
        config_hash: hash?,
    })
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_table(&text).map_err(|e| match e {
        Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Renders a table with the provenance header. Floats use the shortest
/// representation that round-trips.
pub fn render_table(header: &Header, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(columns).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8");
    header.lines() + &body
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_table(path: &Path, header: &Header, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_text(path, &render_table(header, columns, rows))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    write_text(path, &s)
}

fn num(v: f64) -> String {
    format!("{v}")
}

// ---- decay ----

pub const DECAY_COLUMNS: [&str; 2] = ["t_ns", "counts"];

pub fn decay_rows(t_ns: &[f64], counts: &[f64]) -> Vec<Vec<String>> {
    t_ns.iter().zip(counts).map(|(t, c)| vec![num(*t), num(*c)]).collect()
}

pub fn read_decay(table: &Table) -> Result<DecayData> {
    let t = table.column("t_ns")?;
    let c = table.column("counts")?;
    Ok(DecayData::new(t, c))
}

// ---- pulse trains ----

pub const PULSE_COLUMNS: [&str; 9] = [
    "trajectory",
    "bz_G",
    "prep",
    "pulse_index",
    "p0",
    "p_plus",
    "p_minus",
    "p4",
    "p4_err",
];

/// One output row of a pulse train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseRow {
    pub trajectory: usize,
    pub bz_gauss: f64,
    pub prep: PreparationSpec,
    pub pulse_index: usize,
    /// `(p_plus, p0, p_minus)`
    pub ground: [f64; 3],
    pub p4: f64,
    pub p4_err: f64,
}

pub fn pulse_rows(rows: &[PulseRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.trajectory.to_string(),
                num(r.bz_gauss),
                r.prep.label().to_owned(),
                r.pulse_index.to_string(),
                num(r.ground[1]),
                num(r.ground[0]),
                num(r.ground[2]),
                num(r.p4),
                num(r.p4_err),
            ]
        })
        .collect()
}

/// Groups rows into trajectories. `trajectory`, `bz_G` and `prep` are
/// optional; without them the file holds a single optical trajectory at zero
/// field. Pulse indices must run 0, 1, 2, ... within each trajectory.
pub fn read_pulses(table: &Table) -> Result<Vec<Trajectory>> {
    let idx = table.require("pulse_index")?;
    let p4 = table.require("p4")?;
    let err = table.require("p4_err")?;
    let traj = table.index("trajectory");
    let bz = table.index("bz_G");
    let prep = table.index("prep");
    if bz.is_none() {
        if let Some(other) = table.columns.iter().find(|c| stem(c) == "bz") {
            return Err(Error::Schema(format!("unit mismatch: expected column `bz_G`, found `{other}`")));
        }
    }

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Trajectory> = HashMap::new();
    for row in &table.rows {
        let key = traj.map_or_else(|| "0".to_owned(), |i| row.fields[i].trim().to_owned());
        let b = bz.map(|i| table.f64_at(row, i)).transpose()?.unwrap_or(0.0);
        let p = match prep {
            Some(i) => PreparationSpec::parse(&row.fields[i])
                .map_err(|e| Error::Schema(format!("line {}: {e}", row.line)))?,
            None => PreparationSpec::Optical,
        };
        let k = table.f64_at(row, idx)?;
        let e = table.f64_at(row, err)?;
        if e <= 0.0 {
            return Err(Error::Schema(format!("line {}: p4_err must be positive", row.line)));
        }
        let t = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            Trajectory {
                bz_gauss: b,
                preparation: p.preparation(),
                p4: Vec::new(),
                p4_err: Vec::new(),
            }
        });
        if k != t.p4.len() as f64 {
            return Err(Error::Schema(format!(
                "line {}: pulse_index {k} out of sequence (expected {})",
                row.line,
                t.p4.len()
            )));
        }
        if t.bz_gauss != b || t.preparation != p.preparation() {
            return Err(Error::Schema(format!(
                "line {}: field or preparation changes within trajectory `{key}`",
                row.line
            )));
        }
        t.p4.push(table.f64_at(row, p4)?);
        t.p4_err.push(e);
    }
    Ok(order.into_iter().map(|k| groups.remove(&k).expect("grouped")).collect())
}

// ---- spectra ----

pub const SPECTRUM_COLUMNS: [&str; 2] = ["f_ghz", "contrast"];

pub fn spectrum_rows(f_ghz: &[f64], contrast: &[f64]) -> Vec<Vec<String>> {
    f_ghz.iter().zip(contrast).map(|(f, c)| vec![num(*f), num(*c)]).collect()
}

pub fn read_spectrum(table: &Table) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((table.column("f_ghz")?, table.column("contrast")?))
}

// ---- field sweeps ----

pub const SWEEP_COLUMNS: [&str; 10] = [
    "bz_G", "e4_ghz", "e5_ghz", "e6_ghz", "m4", "m5", "m6", "tau4_ns", "tau5_ns", "tau6_ns",
];

pub fn sweep_rows(points: &[SweepPoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|p| {
            let mut r = vec![num(p.bz_gauss)];
            r.extend(p.energies.iter().map(|v| num(*v)));
            r.extend(p.mixing.iter().map(|v| num(*v)));
            r.extend(p.lifetimes_ns.iter().map(|v| num(*v)));
            r
        })
        .collect()
}

pub const ODMR_COLUMNS: [&str; 3] = ["bz_G", "f_ghz", "f_err_ghz"];

pub fn odmr_rows(points: &[OdmrPoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|p| vec![num(p.bz_gauss), num(p.f_ghz), num(p.f_err_ghz)])
        .collect()
}

/// Frequencies versus field. Without `f_err_ghz` every point gets unit weight.
pub fn read_odmr(table: &Table) -> Result<Vec<OdmrPoint>> {
    let bz = table.column("bz_G")?;
    let f = table.column("f_ghz")?;
    let err = table.optional_column("f_err_ghz")?;
    let mut out = Vec::with_capacity(bz.len());
    for i in 0..bz.len() {
        let e = err.as_ref().map_or(1.0, |e| e[i]);
        if e <= 0.0 {
            return Err(Error::Schema(format!("line {}: f_err_ghz must be positive", table.rows[i].line)));
        }
        out.push(OdmrPoint {
            bz_gauss: bz[i],
            f_ghz: f[i],
            f_err_ghz: e,
        });
    }
    Ok(out)
}

pub const LIFETIME_ERR_COLUMNS: [&str; 3] = ["tau4_err_ns", "tau5_err_ns", "tau6_err_ns"];

pub fn lifetime_rows(points: &[LifetimePoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|p| {
            let mut r = vec![num(p.bz_gauss)];
            r.extend(p.tau_ns.iter().map(|v| num(*v)));
            r.extend(p.tau_err_ns.iter().map(|v| num(*v)));
            r
        })
        .collect()
}

/// Lifetimes versus field; error columns are optional (unit weights).
pub fn read_lifetimes(table: &Table) -> Result<Vec<LifetimePoint>> {
    let bz = table.column("bz_G")?;
    let tau = [table.column("tau4_ns")?, table.column("tau5_ns")?, table.column("tau6_ns")?];
    let mut errs = Vec::new();
    for name in LIFETIME_ERR_COLUMNS {
        errs.push(table.optional_column(name)?);
    }
    let mut out = Vec::with_capacity(bz.len());
    for i in 0..bz.len() {
        let tau_err_ns = [0, 1, 2].map(|k| errs[k].as_ref().map_or(1.0, |e| e[i]));
        if tau_err_ns.iter().any(|e| *e <= 0.0) {
            return Err(Error::Schema(format!("line {}: lifetime errors must be positive", table.rows[i].line)));
        }
        out.push(LifetimePoint {
            bz_gauss: bz[i],
            tau_ns: [tau[0][i], tau[1][i], tau[2][i]],
            tau_err_ns,
        });
    }
    Ok(out)
}

// ---- spatial maps ----

pub const PROFILE_COLUMNS: [&str; 7] = ["x_um", "sxx", "syy", "szz", "sxy", "sxz", "syz"];
pub const MAP_COLUMNS: [&str; 6] = ["x_um", "d_ghz", "e1_ghz", "e2_ghz", "contrast_raw", "contrast_psf"];

pub fn read_profile(table: &Table) -> Result<StrainProfile> {
    let x = table.column("x_um")?;
    let comps: Vec<Vec<f64>> = PROFILE_COLUMNS[1..]
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<_>>()?;
    let stress = (0..x.len())
        .map(|i| StressTensor::new(comps[0][i], comps[1][i], comps[2][i], comps[3][i], comps[4][i], comps[5][i]))
        .collect();
    StrainProfile::new(x, stress).map_err(|e| Error::Schema(e.to_string()))
}

pub fn profile_rows(profile: &StrainProfile) -> Vec<Vec<String>> {
    profile
        .positions()
        .iter()
        .zip(profile.stress())
        .map(|(x, s)| {
            let mut r = vec![num(*x)];
            r.extend(s.to_array().iter().map(|v| num(*v)));
            r
        })
        .collect()
}

pub fn map_rows(couplings: &CouplingProfile, contrast: &ContrastProfile) -> Vec<Vec<String>> {
    couplings
        .moduli()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            vec![
                num(couplings.positions[i]),
                num(m[0]),
                num(m[1]),
                num(m[2]),
                num(contrast.raw[i]),
                num(contrast.convolved[i]),
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> Header {
        Header::new("ab12")
    }

    #[test]
    fn decay_round_trip() {
        let t: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
        let c: Vec<f64> = t.iter().map(|x| 1000.0 * (-x / 3.0_f64).exp()).collect();
        let text = render_table(&header(), &DECAY_COLUMNS, &decay_rows(&t, &c));
        let table = parse_table(&text).unwrap();
        assert_eq!(table.header, Some(header()));
        let d = read_decay(&table).unwrap();
        assert_eq!(d.t_ns, t);
        assert_eq!(d.counts, c);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(parse_table(""), Err(Error::Schema(_))));
        assert!(matches!(parse_table("# only a comment\n"), Err(Error::Schema(_))));
        assert!(matches!(parse_table("t_ns,counts\n"), Err(Error::Schema(_))));
    }

    #[test]
    fn bad_row_reports_line() {
        let text = "# nvstrain 0.1.0\n# config_sha256 x\nt_ns,counts\n0,1\n0.5,abc\n";
        let table = parse_table(text).unwrap();
        let err = read_decay(&table).unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = parse_table("t_ns,counts\n0,1\n1,2,3\n").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn unit_mismatch() {
        let table = parse_table("t_us,counts\n0,1\n").unwrap();
        let err = read_decay(&table).unwrap_err().to_string();
        assert!(err.contains("unit mismatch"), "{err}");
        let table = parse_table("bz_mT,f_ghz\n0,1\n").unwrap();
        assert!(read_odmr(&table).unwrap_err().to_string().contains("unit mismatch"));
    }

    #[test]
    fn pulses_group_by_trajectory() {
        let rows = vec![
            PulseRow {
                trajectory: 0,
                bz_gauss: 0.0,
                prep: PreparationSpec::Optical,
                pulse_index: 0,
                ground: [0.2, 0.6, 0.2],
                p4: 0.6,
                p4_err: 0.01,
            },
            PulseRow {
                trajectory: 0,
                bz_gauss: 0.0,
                prep: PreparationSpec::Optical,
                pulse_index: 1,
                ground: [0.2, 0.6, 0.2],
                p4: 0.61,
                p4_err: 0.01,
            },
            PulseRow {
                trajectory: 1,
                bz_gauss: 150.0,
                prep: PreparationSpec::SwappedMinus,
                pulse_index: 0,
                ground: [0.2, 0.2, 0.6],
                p4: 0.2,
                p4_err: 0.01,
            },
        ];
        let text = render_table(&header(), &PULSE_COLUMNS, &pulse_rows(&rows));
        let trajs = read_pulses(&parse_table(&text).unwrap()).unwrap();
        assert_eq!(trajs.len(), 2);
        assert_eq!(trajs[0].p4, vec![0.6, 0.61]);
        assert_eq!(trajs[1].bz_gauss, 150.0);
        assert_eq!(trajs[1].preparation, PreparationSpec::SwappedMinus.preparation());
    }

    #[test]
    fn minimal_pulse_columns() {
        let t = parse_table("pulse_index,p4,p4_err\n0,0.5,0.01\n1,0.55,0.01\n").unwrap();
        let trajs = read_pulses(&t).unwrap();
        assert_eq!(trajs.len(), 1);
        assert_eq!(trajs[0].p4.len(), 2);
        let t = parse_table("pulse_index,p4,p4_err\n0,0.5,0.01\n2,0.55,0.01\n").unwrap();
        assert!(read_pulses(&t).unwrap_err().to_string().contains("line 3"));
    }

    #[test]
    fn lifetimes_without_errors() {
        let t = parse_table("bz_G,tau4_ns,tau5_ns,tau6_ns\n0,6,2,2\n").unwrap();
        let l = read_lifetimes(&t).unwrap();
        assert_eq!(l[0].tau_err_ns, [1.0; 3]);
    }
}

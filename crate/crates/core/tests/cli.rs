use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use tempfile::TempDir;

use nvstrain::cli::run;
use nvstrain::io::{read_table, Table};
use nvstrain::presets::{SITE_I, SITE_IV};
use nvstrain::*;

fn nv(args: &[&str]) -> i32 {
    run(std::iter::once("nvstrain").chain(args.iter().copied()))
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

fn config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_owned()
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn column(t: &Table, name: &str) -> Vec<f64> {
    let i = t.columns.iter().position(|c| c == name).unwrap();
    t.rows.iter().map(|r| r.fields[i].parse().unwrap()).collect()
}

fn value(v: &Value, keys: &[&str]) -> f64 {
    keys.iter().fold(v, |v, k| &v[*k]).as_f64().unwrap()
}

#[test]
fn decay_round_trip() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(nv(&["simulate", "decay", "--site-preset", "site-I", "--out", out]), 0);
    let data = path(tmp.path(), "decay.csv");
    assert_eq!(nv(&["fit", "decay", "--data", &data, "--site-preset", "site-I", "--out", out]), 0);

    let sol = eigensolve(&build(SITE_I.es_couplings(), 0.0));
    let p4 = steady_state(&sol, &SITE_I.rates(presets::DEFAULT_ETA).unwrap()).unwrap().p4;
    let r = report(tmp.path(), "fit_decay.json");
    let fitted = r["result"]["populations"][0].as_f64().unwrap();
    assert!((fitted - p4).abs() <= 1e-6, "{fitted} vs {p4}");
    assert!(p4 > 0.5);
}

#[test]
fn thermal_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        r#"{"preset": "site-IV",
            "couplings": {"excited": {"d_ghz": 1.4, "e1_ghz": 0.0, "e2_ghz": 0.0}},
            "decay": {"bz_gauss": 0.0, "preparation": "thermal", "t_stop_ns": 40.0, "steps": 401}}"#,
    );
    let out = tmp.path().to_str().unwrap();
    assert_eq!(nv(&["simulate", "decay", "--config", &cfg, "--out", out]), 0);
    let data = path(tmp.path(), "decay.csv");
    assert_eq!(nv(&["fit", "thermal", "--data", &data, "--config", &cfg, "--out", out]), 0);
    let r = report(tmp.path(), "fit_thermal.json");
    let (tb, td) = SITE_IV.lifetime_model().pure_lifetimes();
    assert!((value(&r, &["result", "tau_bright_ns"]) - tb).abs() <= 1e-4);
    assert!((value(&r, &["result", "tau_dark_ns"]) - td).abs() <= 1e-4);
}

#[test]
fn joint_es_round_trip_site_iv() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(nv(&["simulate", "sweep-bz", "--site-preset", "site-IV", "--out", out]), 0);
    let (odmr, life) = (path(tmp.path(), "es_odmr.csv"), path(tmp.path(), "sweep.csv"));
    let code = nv(&["fit", "joint-es", "--odmr", &odmr, "--lifetimes", &life, "--site-preset", "site-IV", "--out", out]);
    assert_eq!(code, 0);
    let r = report(tmp.path(), "fit_joint_es.json");
    assert!((value(&r, &["result", "e2", "value"]) - 1.19).abs() <= 1e-4);
    assert!((value(&r, &["result", "e1", "value"]) - 0.25).abs() <= 1e-4);
    assert!((value(&r, &["result", "d", "value"]) - 0.80).abs() <= 1e-4);
}

#[test]
fn pulse_dynamics_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        r#"{"preset": "site-I",
            "pulses": {"bz_gauss": [0.0, 800.0],
                       "preparations": ["optical", "swapped-plus", "thermal"],
                       "pulses": 40}}"#,
    );
    let out = tmp.path().to_str().unwrap();
    assert_eq!(nv(&["simulate", "pulses", "--config", &cfg, "--out", out]), 0);
    let data = path(tmp.path(), "pulses.csv");
    assert_eq!(nv(&["fit", "pulse-dynamics", "--data", &data, "--config", &cfg, "--out", out]), 0);
    let r = report(tmp.path(), "fit_pulse_dynamics.json");
    for (key, truth) in [("k_r", 132.0), ("k_isc0", 32.0), ("k_isc1", 357.0), ("q0", 0.39)] {
        let v = value(&r, &["result", key, "value"]);
        assert!(((v - truth) / truth).abs() <= 0.05, "{key}: {v} vs {truth}");
    }
}

#[test]
fn zero_pulses_echo_the_prepared_state() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(nv(&["simulate", "pulses", "--pulses", "0", "--site-preset", "site-I", "--out", out]), 0);
    let t = read_table(&tmp.path().join("pulses.csv")).unwrap();
    assert_eq!(t.rows.len(), 1);
    let sol = eigensolve(&build(SITE_I.es_couplings(), 0.0));
    let ss = steady_state(&sol, &SITE_I.rates(presets::DEFAULT_ETA).unwrap()).unwrap();
    assert_eq!(column(&t, "pulse_index"), vec![0.0]);
    assert!((column(&t, "p0")[0] - ss.ground.p0()).abs() <= 1e-12);
    assert!((column(&t, "p4")[0] - ss.p4).abs() <= 1e-12);
}

#[test]
fn site_iv_sweep_approaches_pure_states() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(nv(&["simulate", "sweep-bz", "--site-preset", "site-IV", "--out", out]), 0);
    let t = read_table(&tmp.path().join("sweep.csv")).unwrap();
    let (m4, tau4) = (column(&t, "m4"), column(&t, "tau4_ns"));
    let n = m4.len();
    assert_eq!(n, 161);
    // beyond the anti-crossing the bright state purifies steadily
    let tail = n / 2;
    assert!(m4[tail..].windows(2).all(|w| w[1] >= w[0]));
    assert!(tau4[tail..].windows(2).all(|w| w[1] >= w[0]));
    let (tb, _) = SITE_IV.lifetime_model().pure_lifetimes();
    assert!(tau4[n - 1] < tb && tau4[n - 1] > tau4[0]);
}

#[test]
fn site_i_odmr_has_a_negative_dip() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(nv(&["simulate", "odmr", "--site-preset", "site-I", "--out", out]), 0);
    let t = read_table(&tmp.path().join("odmr.csv")).unwrap();
    let (f, c) = (column(&t, "f_ghz"), column(&t, "contrast"));
    let i = (0..c.len()).min_by(|&a, &b| c[a].total_cmp(&c[b])).unwrap();
    assert!(c[i] < 0.0);
    assert!((f[i] - 3.79).abs() <= 1e-3);
    assert!(c[0].abs() < 0.01 * c[i].abs());
}

#[test]
fn same_seed_gives_identical_files() {
    let cfg_dir = TempDir::new().unwrap();
    let cfg = config(
        cfg_dir.path(),
        r#"{"preset": "site-I",
            "pulses": {"bz_gauss": [0.0], "preparations": ["optical", "thermal"], "pulses": 20, "relative_noise": 0.02},
            "decay": {"bz_gauss": 0.0, "preparation": "optical", "t_stop_ns": 60.0, "steps": 301, "peak_counts": 1e4}}"#,
    );
    let dirs: Vec<TempDir> = (0..3).map(|_| TempDir::new().unwrap()).collect();
    for (d, seed) in dirs.iter().zip(["7", "7", "8"]) {
        let out = d.path().to_str().unwrap();
        assert_eq!(nv(&["simulate", "pulses", "--config", &cfg, "--seed", seed, "--out", out]), 0);
        assert_eq!(nv(&["simulate", "decay", "--config", &cfg, "--seed", seed, "--out", out]), 0);
    }
    let read = |d: &TempDir, f: &str| fs::read(d.path().join(f)).unwrap();
    for f in ["pulses.csv", "decay.csv"] {
        assert_eq!(read(&dirs[0], f), read(&dirs[1], f), "{f}");
        assert_ne!(read(&dirs[0], f), read(&dirs[2], f), "{f}");
    }
}

#[test]
fn outputs_carry_version_and_config_hash() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(nv(&["simulate", "sweep-bz", "--site-preset", "site-I", "--out", out]), 0);
    let text = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("# nvstrain {}", env!("CARGO_PKG_VERSION")));
    let hash = lines.next().unwrap().strip_prefix("# config_sha256 ").unwrap().to_owned();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    let other = read_table(&tmp.path().join("es_odmr.csv")).unwrap();
    assert_eq!(other.header.unwrap().config_hash, hash);
    let resolved: Value = report(tmp.path(), "config.resolved.json");
    assert_eq!(resolved["preset"], "site-I");

    // a different configuration hashes differently
    let tmp2 = TempDir::new().unwrap();
    assert_eq!(nv(&["simulate", "sweep-bz", "--site-preset", "site-IV", "--out", tmp2.path().to_str().unwrap()]), 0);
    let h2 = read_table(&tmp2.path().join("sweep.csv")).unwrap().header.unwrap().config_hash;
    assert_ne!(h2, hash);
}

#[test]
fn fit_reports_embed_the_config() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(nv(&["simulate", "decay", "--site-preset", "site-IV", "--out", out]), 0);
    let data = path(tmp.path(), "decay.csv");
    assert_eq!(nv(&["fit", "decay", "--data", &data, "--site-preset", "site-IV", "--out", out]), 0);
    let r = report(tmp.path(), "fit_decay.json");
    assert_eq!(r["command"], "fit decay");
    assert_eq!(r["config"]["preset"], "site-IV");
    assert!(r["config_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn empty_data_file_is_a_schema_error() {
    let tmp = TempDir::new().unwrap();
    let empty = path(tmp.path(), "empty.csv");
    fs::write(&empty, "").unwrap();
    let out = path(tmp.path(), "out");
    assert_eq!(nv(&["fit", "decay", "--data", &empty, "--site-preset", "site-I", "--out", &out]), 2);
    fs::write(&empty, "# nvstrain 0.1.0\nt_ns,counts\n").unwrap();
    assert_eq!(nv(&["fit", "decay", "--data", &empty, "--site-preset", "site-I", "--out", &out]), 2);
}

#[test]
fn wrong_units_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let data = path(tmp.path(), "decay.csv");
    let rows: String = (0..50).map(|i| format!("{},{}\n", i, 100.0 * (-(i as f64) / 6.0).exp())).collect();
    fs::write(&data, format!("t_us,counts\n{rows}")).unwrap();
    let out = path(tmp.path(), "out");
    assert_eq!(nv(&["fit", "decay", "--data", &data, "--site-preset", "site-I", "--out", &out]), 2);
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), r#"{"preset": "site-I", "photodynamics": {"etaa": 0.2}}"#);
    let out = path(tmp.path(), "out");
    assert_eq!(nv(&["simulate", "odmr", "--config", &cfg, "--out", &out]), 2);
    assert!(!Path::new(&out).exists());
}

#[test]
fn missing_required_parameters_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let out = path(tmp.path(), "out");
    assert_eq!(nv(&["simulate", "odmr", "--out", &out]), 2);
    assert_eq!(nv(&["simulate", "odmr", "--site-preset", "site-X", "--out", &out]), 2);
    assert_eq!(nv(&["simulate", "bogus"]), 2);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out: PathBuf = blocker.join("sub");
    assert_eq!(nv(&["simulate", "odmr", "--site-preset", "site-I", "--out", out.to_str().unwrap()]), 4);
    let missing = path(tmp.path(), "nope.csv");
    assert_eq!(nv(&["fit", "decay", "--data", &missing, "--site-preset", "site-I", "--out", tmp.path().to_str().unwrap()]), 4);
}

#[test]
fn map_from_profile_file() {
    let tmp = TempDir::new().unwrap();
    let profile = path(tmp.path(), "profile.csv");
    let mut text = String::from("x_um,sxx,syy,szz,sxy,sxz,syz\n");
    for i in 0..41 {
        let x = 5.0 + 0.125 * i as f64;
        let s = if x < 7.5 { 0.0 } else { 1.0 };
        text += &format!("{x},0,0,1,0,{s},0\n");
    }
    fs::write(&profile, text).unwrap();
    let cfg = config(
        tmp.path(),
        r#"{"preset": "site-I",
            "coupling_model": {"excited": {"g41": 0, "g43": 100, "g15": 0, "g16": 200, "g25": 0, "g26": 50, "d0_ghz": 1.4}},
            "map": {"start_um": 5.0, "stop_um": 10.0, "steps": 41, "bz_gauss": 0.0, "psf_fwhm_um": 0.3}}"#,
    );
    let out = tmp.path().to_str().unwrap();
    assert_eq!(nv(&["simulate", "map", "--profile", &profile, "--config", &cfg, "--out", out]), 0);
    let t = read_table(&tmp.path().join("map.csv")).unwrap();
    let (d, e1, e2) = (column(&t, "d_ghz"), column(&t, "e1_ghz"), column(&t, "e2_ghz"));
    assert!(d.iter().all(|v| (v - 1.5).abs() <= 1e-12));
    assert_eq!(e1[0], 0.0);
    assert!((e1[40] - 0.05).abs() <= 1e-12 && (e2[40] - 0.2).abs() <= 1e-12);
    let (raw, psf) = (column(&t, "contrast_raw"), column(&t, "contrast_psf"));
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(psf.iter().all(|v| *v >= lo && *v <= hi));
}

#[test]
fn schema_and_presets_commands() {
    assert_eq!(nv(&["schema"]), 0);
    assert_eq!(nv(&["presets"]), 0);
}

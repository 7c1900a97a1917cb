mod common;

use std::f64::consts::PI;
use std::path::Path;

use blochwave::config::BandOutput;
use blochwave::export::{read_field_csv, BandRow};
use blochwave::pipeline::{delta_sweep, run_band, run_solve, run_validate};
use blochwave::{GridSpec, J2Policy, Material, Medium, RunConfig, Source};

use common::*;

fn read_bands(path: &Path) -> Vec<BandRow> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.deserialize().collect::<Result<_, _>>().unwrap()
}

fn files(dir: &Path, names: &[&str]) -> Vec<Vec<u8>> {
    names.iter().map(|n| std::fs::read(dir.join(n)).unwrap()).collect()
}

#[test]
fn zero_source_gives_zero_field() {
    let cfg = RunConfig { source: Source::None, ..interface_config() };
    let dir = tempfile::tempdir().unwrap();
    let report = run_solve(&cfg, dir.path()).unwrap();
    assert_eq!(report.max_abs_u, 0.0);
    let rows = read_field_csv(&dir.path().join("field.csv")).unwrap();
    assert_eq!(rows.len(), report.n_nodes);
    assert!(rows.iter().all(|r| r.re_u == 0.0 && r.im_u == 0.0 && r.abs_u == 0.0));
}

#[test]
fn homogeneous_bands_match_lattice() {
    let mut cfg = homogeneous_config();
    cfg.geometry = GridSpec::new(1.0, 2, 1, 1, 16, 16).unwrap();
    cfg.outputs.band = BandOutput { mesh: 4, n_bands: 3, group_velocity: false };
    let dir = tempfile::tempdir().unwrap();
    let summary = run_band(&cfg, dir.path()).unwrap();
    let rows = read_bands(&dir.path().join("bands.csv"));
    assert_eq!(rows.len(), summary.band_rows);
    assert_eq!(rows.len(), 2 * 16 * 3);
    for row in &rows {
        let mut exact: Vec<f64> = (-2..=2)
            .flat_map(|a| (-2..=2).map(move |b| [a as f64, b as f64]))
            .map(|k| 4.0 * PI * PI * ((row.j1 + k[0]).powi(2) + (row.j2 + k[1]).powi(2)))
            .collect();
        exact.sort_by(f64::total_cmp);
        let want = exact[row.m];
        assert!((row.mu - want).abs() <= 2e-2 * want.max(1.0), "{row:?} vs {want}");
    }
}

#[test]
fn single_strip_period_gives_one_line() {
    let mut cfg = interface_config();
    cfg.geometry = GridSpec::new(1.0, 2, 1, 1, 8, 8).unwrap();
    cfg.outputs.band = BandOutput { mesh: 2, n_bands: 1, group_velocity: false };
    let dir = tempfile::tempdir().unwrap();
    let summary = run_band(&cfg, dir.path()).unwrap();
    assert!(summary.selected_plus > 0, "crystal level set at omega = 1.85 is empty");
    let rows = read_bands(&dir.path().join("selected.csv"));
    assert_eq!(rows.len(), summary.selected_plus + summary.selected_minus);
    assert!(rows.iter().all(|r| r.j2 == 0.0));
    assert!(rows.iter().any(|r| r.side == "+") && rows.iter().any(|r| r.side == "-"));
}

#[test]
fn identical_configs_write_identical_files() {
    let cfg = interface_config();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_solve(&cfg, a.path()).unwrap();
    run_solve(&cfg, b.path()).unwrap();
    let names = ["field.csv", "report.json", "selected.csv"];
    assert_eq!(files(a.path(), &names), files(b.path(), &names));
}

#[test]
fn plane_wave_without_interface_is_transmitted() {
    let cfg = no_interface_config();
    let dir = tempfile::tempdir().unwrap();
    let rt = run_validate(&cfg, dir.path()).unwrap();
    assert!(rt.alpha_refl < 1e-2, "{rt:?}");
    assert!((rt.alpha_out - 1.0).abs() < 1e-2, "{rt:?}");
    assert_eq!(rt.r_ref, 0.0);
    assert_eq!(rt.j_out_ref, rt.j_in);
    let text = std::fs::read_to_string(dir.path().join("rt.json")).unwrap();
    assert!(text.contains("\"R_ref\"") && text.contains("\"T_ref\""));
}

#[test]
fn sweep_rows_follow_deltas() {
    let cfg = no_interface_config();
    let rows = delta_sweep(&cfg, &[1e-3]).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].delta, 1e-3);
    assert!(rows[0].err_r < 1e-2, "{:?}", rows[0]);
    assert!(delta_sweep(&cfg, &[1e-3, 1e-2]).unwrap_err().is_config());
}

#[test]
fn zero_amplitude_gives_zero_coefficients() {
    let mut cfg = no_interface_config();
    cfg.source = Source::Incoming { j_in: [1.269, 1.346], d: 1.0, amplitude: 0.0, half_step: true };
    let dir = tempfile::tempdir().unwrap();
    let rt = run_validate(&cfg, dir.path()).unwrap();
    assert_eq!(rt.alpha_refl, 0.0);
    assert_eq!(rt.alpha_out, 0.0);
}

#[test]
fn incoming_wave_needs_unit_left_medium() {
    let mut cfg = no_interface_config();
    cfg.medium = Medium::uniform(Material::constant(2.0));
    assert!(cfg.validate().unwrap_err().is_config());
    cfg = no_interface_config();
    cfg.j2_policy = J2Policy::Incoming { lines: 0 };
    assert!(run_validate(&cfg, tempfile::tempdir().unwrap().path()).unwrap_err().is_config());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}

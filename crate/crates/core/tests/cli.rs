use std::path::Path;
use std::process::{Command, Output};

use ramsey_beats::analysis::GridSearchResult;
use ramsey_beats::io::{read_curves, read_json, read_psd, read_surface, read_trace, ResultBundle, RunConfig, Table};
use ramsey_beats::noise::fit_psd_slope;

const SMALL: &str = r#"{
  "schedule": {"n_tr": 41, "shots_per_point": 16, "n_curves": 10, "levels": ["23"]},
  "noise": {"c_alpha_seeds": 2},
  "fit": {"alpha_grid": [1.5, 2.0], "a_grid": [0.1, 0.5], "seeds": [3]}
}"#;

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ramsey-beats"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("config.json"), config).unwrap();
    dir
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn noise_gen_writes_deterministic_files() {
    let dir = setup(
        r#"{"noise": {"alpha": 2, "n_samples": 65536, "c_alpha_seeds": 2}, "schedule": {"n_curves": 1, "levels": ["23"]}}"#,
    );
    for out in ["a", "b"] {
        let o = bin(dir.path(), &["--config", "config.json", "--out", out, "noise-gen"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["noise.csv", "psd.csv"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let trace = read_trace(&Table::read(&dir.path().join("a/noise.csv")).unwrap()).unwrap();
    assert_eq!(trace.len(), 65536);
    let psd = read_psd(&Table::read(&dir.path().join("a/psd.csv")).unwrap()).unwrap();
    let slope = fit_psd_slope(&psd, 12.5, 125.0).unwrap();
    assert!((slope - 2.0).abs() < 0.3, "{slope}");
    let bundle: ResultBundle = read_json(&dir.path().join("a/noise-gen.json")).unwrap();
    assert_eq!(bundle.files, ["noise.csv", "psd.csv", "noise-gen.json"]);
}

#[test]
fn negative_alpha_names_the_field() {
    let dir = setup(r#"{"noise": {"alpha": -1}}"#);
    let o = bin(dir.path(), &["--config", "config.json", "noise-gen"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("noise.alpha"), "{}", stderr(&o));
}

#[test]
fn simulate_then_fit_pipeline() {
    let dir = setup(SMALL);
    let o = bin(dir.path(), &["--config", "config.json", "--seed", "5", "--out", "run", "simulate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let curves = dir.path().join("run/curves.csv");
    let text = std::fs::read_to_string(&curves).unwrap();
    assert!(text.starts_with("# generator: ramsey-beats"));
    assert!(text.contains("# seed: 5"));
    let set = read_curves(&Table::read(&curves).unwrap()).unwrap();
    assert_eq!((set.n_curves(), set.n_points()), (10, 41));
    for f in ["overlay.csv", "average.csv", "envelope.csv"] {
        let head = std::fs::read_to_string(dir.path().join("run").join(f)).unwrap();
        assert!(head.contains("# config_sha256: "), "{f}");
    }

    let o = bin(dir.path(), &["--config", "config.json", "--out", "run", "fit-t2", "run/curves.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bundle: ResultBundle = read_json(&dir.path().join("run/fit-t2.json")).unwrap();
    let corrected = &bundle.fits["corrected"];
    assert!(corrected.t2 > 2e-6 && corrected.t2 < 8e-6, "{}", corrected.t2);
    assert!(bundle.fits.contains_key("canonical"));

    let o = bin(dir.path(), &["--config", "config.json", "--out", "run", "fit-psd", "run/curves.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cells = read_surface(&Table::read(&dir.path().join("run/surface.csv")).unwrap()).unwrap();
    assert_eq!(cells.len(), 4);
    let bundle: ResultBundle = read_json(&dir.path().join("run/fit-psd.json")).unwrap();
    let grid: GridSearchResult = bundle.grid_search.unwrap();
    assert_eq!(grid.cells(), cells);
}

#[test]
fn single_cell_grid_passes_through() {
    let config = SMALL.replace(r#""alpha_grid": [1.5, 2.0], "a_grid": [0.1, 0.5]"#, r#""alpha_grid": [2.0], "a_grid": [0.3]"#);
    let dir = setup(&config);
    assert!(bin(dir.path(), &["--config", "config.json", "simulate"]).status.success());
    let o = bin(dir.path(), &["--config", "config.json", "fit-psd", "curves.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bundle: ResultBundle = read_json(&dir.path().join("fit-psd.json")).unwrap();
    let best = bundle.grid_search.unwrap().best;
    assert_eq!((best.alpha, best.a), (2.0, 0.3));
}

#[test]
fn empty_grid_is_a_usage_error() {
    let dir = setup(r#"{"fit": {"a_grid": []}}"#);
    let o = bin(dir.path(), &["--config", "config.json", "fit-psd", "missing.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fit.a_grid"));
}

#[test]
fn malformed_curves_report_line_number() {
    let dir = setup("{}");
    std::fs::write(
        dir.path().join("bad.csv"),
        "# level: 23\n# omega_r_hz: 750000\ncurve,t_r_us,population\n0,0,1\n0,0.1,0.9\n1,0,x\n",
    )
    .unwrap();
    let o = bin(dir.path(), &["fit-t2", "bad.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 6"), "{}", stderr(&o));
}

#[test]
fn numerical_failure_exits_with_three() {
    let dir = setup("{}");
    // a flat curve set has no decaying envelope to fit
    let mut text = String::from("# level: 23\n# omega_r_hz: 750000\ncurve,t_r_us,population\n");
    for c in 0..3 {
        for i in 0..40 {
            text.push_str(&format!("{c},{},0.5\n", f64::from(i) * 0.25));
        }
    }
    std::fs::write(dir.path().join("flat.csv"), text).unwrap();
    let o = bin(dir.path(), &["fit-t2", "flat.csv"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = setup("{}");
    assert_eq!(bin(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn provenance_hash_follows_the_config() {
    let dir = setup(SMALL);
    let changed = SMALL.replace(r#""seeds": [3]"#, r#""seeds": [4]"#);
    std::fs::write(dir.path().join("changed.json"), &changed).unwrap();
    let hash_of = |cfg: &str, out: &str| {
        let o = bin(dir.path(), &["--config", cfg, "--out", out, "simulate"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let t = Table::read(&dir.path().join(out).join("curves.csv")).unwrap();
        t.provenance.get("config_sha256").unwrap().to_string()
    };
    let h1 = hash_of("config.json", "x");
    assert_eq!(h1, hash_of("config.json", "y"));
    assert_ne!(h1, hash_of("changed.json", "z"));
    assert_eq!(h1, RunConfig::from_json(SMALL).unwrap().sha256());
}

use proptest::prelude::*;

use ramsey_beats::analysis::SurfaceCell;
use ramsey_beats::io::{
    read_curves, read_json, read_psd, read_surface, read_trace, write_curves, write_json, write_psd, write_surface,
    write_trace, Provenance, RunConfig, Table,
};
use ramsey_beats::lindblad::QuditParams;
use ramsey_beats::model::Transition;
use ramsey_beats::noise::{periodogram, NoiseTrace};
use ramsey_beats::schedule::CurveSet;

fn prov() -> Provenance {
    Provenance::new(&RunConfig::default().sha256(), 9, "test")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn curve_sets_reparse_exactly(
        n_tr in 2usize..40,
        tr_max in 1e-7f64..1e-4,
        omega_r in -2e6f64..2e6,
        raw in prop::collection::vec(prop::collection::vec(-0.2f64..1.2, 40), 1..6),
        level in prop::sample::select(Transition::ALL.to_vec()),
    ) {
        let t_r: Vec<f64> = (0..n_tr).map(|i| i as f64 * tr_max / (n_tr - 1) as f64).collect();
        let curves = raw.into_iter().map(|c| c[..n_tr].to_vec()).collect();
        let set = CurveSet { t_r, curves, level, omega_r };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        write_curves(&path, &prov(), &set).unwrap();
        prop_assert_eq!(read_curves(&Table::read(&path).unwrap()).unwrap(), set);
    }

    #[test]
    fn surfaces_reparse_exactly(
        cells in prop::collection::vec(
            (0.0f64..3.0, 1e-3f64..1e2, prop::option::of(1e-9f64..1.0), prop::option::of(-20.0f64..2.0)),
            1..30,
        ),
    ) {
        let cells: Vec<SurfaceCell> = cells
            .into_iter()
            .map(|(alpha, a, amplitude, log_error)| SurfaceCell { alpha, a, amplitude, log_error })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("surface.csv");
        write_surface(&path, &prov(), &cells).unwrap();
        prop_assert_eq!(read_surface(&Table::read(&path).unwrap()).unwrap(), cells);
    }
}

#[test]
fn trace_and_psd_reparse_exactly() {
    let samples: Vec<f64> = (0..512).map(|i| (f64::from(i) * 0.37).sin() * 1e-3 + 1e-9 * f64::from(i)).collect();
    let trace = NoiseTrace::new(samples, 1e3).unwrap();
    let psd = periodogram(&trace).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (tp, pp) = (dir.path().join("noise.csv"), dir.path().join("psd.csv"));
    write_trace(&tp, &prov(), &trace).unwrap();
    write_psd(&pp, &prov(), &psd).unwrap();
    assert_eq!(read_trace(&Table::read(&tp).unwrap()).unwrap(), trace);
    assert_eq!(read_psd(&Table::read(&pp).unwrap()).unwrap(), psd);
}

#[test]
fn json_documents_reparse_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("params.json");
    let params = QuditParams::measured();
    write_json(&path, &params).unwrap();
    assert_eq!(read_json::<QuditParams>(&path).unwrap(), params);

    let mut config = RunConfig::default();
    config.noise.seed = 42;
    config.levels.l12.tr_max = Some(35e-6);
    let text = config.to_json();
    assert_eq!(RunConfig::from_json(&text).unwrap(), config);
}

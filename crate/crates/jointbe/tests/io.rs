use std::collections::BTreeSet;

use jointbe::config::RunConfig;
use jointbe::driver::run_config;
use jointbe::io::*;
use jointbe::minifem::*;
use jointbe::sparse::SparseSym;

fn write(dir: &std::path::Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn small_spec() -> LapJointSpec {
    LapJointSpec {
        material: Material {
            youngs_modulus: 210e9,
            poisson_ratio: 0.3,
            density: 7850.0,
        },
        element: ElementKind::default(),
        overlap: [0.01, 0.01],
        free_length: [0.02, 0.02],
        thickness: [0.004, 0.004],
        element_size: 2.5e-3,
        layers: [1, 1],
        preload_patch: [5e-3, 5e-3],
        far_end: FarEnd::Guided,
    }
}

fn max_rel_diff(a: &SparseSym, b: &SparseSym) -> f64 {
    let scale = a.max_abs();
    let mut d = 0.0f64;
    for (i, j, v) in a.iter() {
        d = d.max((v - b.get(i, j)).abs());
    }
    for (i, j, v) in b.iter() {
        d = d.max((v - a.get(i, j)).abs());
    }
    d / scale
}

#[test]
fn identity_2x2_loads() {
    let text =
        "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 2\n1 1 1.0\n2 2 1.0\n";
    let m = parse_matrix_market(text, "eye.mtx").unwrap();
    assert_eq!(m.dim(), 2);
    assert_eq!(m.to_dense(), SparseSym::identity(2).to_dense());
}

#[test]
fn general_storage_loads() {
    let text = "%%MatrixMarket matrix coordinate real general\n2 2 4\n1 1 2.0\n1 2 -1.0\n2 1 -1.0\n2 2 2.0\n";
    let m = parse_matrix_market(text, "g.mtx").unwrap();
    assert_eq!(m.get(0, 1), -1.0);
    assert_eq!(m.get(1, 0), -1.0);
}

#[test]
fn nan_entry_reports_location() {
    let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n2 2 NaN\n";
    let err = parse_matrix_market(text, "nan.mtx").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("non-finite entry at row 2 col 2"), "{msg}");
    assert!(msg.contains("nan.mtx"), "{msg}");
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn asymmetric_general_rejected() {
    let text = "%%MatrixMarket matrix coordinate real general\n2 2 4\n1 1 2.0\n1 2 -1.0\n2 1 -0.5\n2 2 2.0\n";
    let msg = parse_matrix_market(text, "asym.mtx")
        .unwrap_err()
        .to_string();
    assert!(msg.contains("symmetric"), "{msg}");
}

#[test]
fn upper_triangle_in_symmetric_rejected() {
    let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 2 1.0\n2 2 1.0\n";
    assert!(parse_matrix_market(text, "up.mtx").is_err());
}

#[test]
fn entry_count_mismatch_rejected() {
    let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 1.0\n2 2 1.0\n";
    assert!(parse_matrix_market(text, "short.mtx").is_err());
}

#[test]
fn dof_map_gap_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "dofs.csv",
        "dof,node,direction,x,y,z,interface,sensor,preload\n0,0,0,0,0,0,,false,0\n2,0,1,0,0,0,,false,0\n",
    );
    assert!(read_dof_map(&p).is_err());
}

#[test]
fn fixture_bundle_round_trips() {
    let lj = build_lap_joint(&small_spec()).unwrap();
    let bundle = FeBundle::from_lap_joint(&lj);
    let dir = tempfile::tempdir().unwrap();
    let files = bundle.write(dir.path()).unwrap();
    let back = load_fe_matrices(&files[0], &files[1], &files[2]).unwrap();
    assert!(max_rel_diff(&lj.model.mass, &back.model.mass) <= 1e-15);
    assert!(max_rel_diff(&lj.model.stiffness, &back.model.stiffness) <= 1e-15);
    assert_eq!(back.dofs, bundle.dofs);

    let setup = back.interface_setup(1e-9).unwrap();
    let want: BTreeSet<_> = lj.pairs.iter().copied().collect();
    let got: BTreeSet<_> = setup.pairs.iter().copied().collect();
    assert_eq!(got, want);
    assert_eq!(setup.interface.faces.len(), lj.interface.faces.len());
    let sensors: BTreeSet<_> = setup.sensor_dofs.iter().copied().collect();
    assert_eq!(sensors, lj.sensor_dofs.iter().copied().collect());
}

#[test]
fn external_model_runs_like_fixture() {
    let lj = build_lap_joint(&small_spec()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    FeBundle::from_lap_joint(&lj).write(dir.path()).unwrap();
    let common = "[material]\nyoungs_modulus = 210e9\npoisson_ratio = 0.3\nfriction_coefficient = 0.3\n\n[grid]\npitch = 1e-3\n\n[preload]\nforce = 1500.0\nsteps = 2\n";
    let fixture = format!(
        "{common}\n[fixture]\noverlap = [0.01, 0.01]\nfree_length = [0.02, 0.02]\nthickness = [0.004, 0.004]\nelement_size = 2.5e-3\nlayers = [1, 1]\npreload_patch = [5e-3, 5e-3]\nfar_end = \"guided\"\nmodes = 6\n"
    );
    let external = format!(
        "{common}\n[fe_model]\nmass = \"mass.mtx\"\nstiffness = \"stiffness.mtx\"\ndofs = \"dofs.csv\"\nmodes = 6\nfloating_normal = true\n"
    );
    let a = run_config(&RunConfig::parse(&fixture, "f.cfg").unwrap(), dir.path()).unwrap();
    let b = run_config(&RunConfig::parse(&external, "e.cfg").unwrap(), dir.path()).unwrap();
    let (fa, fb) = (&a.preload.state.force, &b.preload.state.force);
    assert_eq!(fa.len(), fb.len());
    let scale = fa.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = fa
        .iter()
        .zip(fb)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff <= 1e-8 * scale, "relative difference {}", diff / scale);
}

#[test]
fn state_and_step_csvs_round_trip() {
    let text = jointbe::config::bundled("flatpunch.cfg").unwrap();
    let res = run_config(
        &RunConfig::parse(text, "fp.cfg").unwrap(),
        std::path::Path::new("."),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();

    let asm = &res.preload.assembled;
    let rows = state_rows(&asm.system.point_index, &asm.points, &res.preload.state);
    let p = dir.path().join("state.csv");
    write_state_csv(&p, &rows).unwrap();
    assert_eq!(read_state_csv(&p).unwrap(), rows);

    let steps: Vec<StepRow> = res.records.iter().map(StepRow::from).collect();
    let p = dir.path().join("steps.csv");
    write_steps_csv(&p, &steps).unwrap();
    assert_eq!(read_steps_csv(&p).unwrap(), steps);
}

#[test]
fn modal_csv_round_trips() {
    let rows = vec![
        ModalRow {
            mode: 1,
            amplitude_m: 1.25e-7,
            omega_rad_s: 4632.529488921028,
            omega_over_lin: 0.9999999999,
            damping_ratio: 3.0e-5,
        },
        ModalRow {
            mode: 2,
            amplitude_m: 0.1 + 0.2,
            omega_rad_s: f64::MIN_POSITIVE,
            omega_over_lin: 1.0 / 3.0,
            damping_ratio: 0.0,
        },
    ];
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("modal.csv");
    write_modal_csv(&p, &rows).unwrap();
    assert_eq!(read_modal_csv(&p).unwrap(), rows);
}

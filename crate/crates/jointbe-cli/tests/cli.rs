use std::path::Path;
use std::process::{Command, Output};

use jointbe::config::bundled;
use jointbe::io::FeBundle;
use jointbe::minifem::{build_lap_joint, ElementKind, FarEnd, LapJointSpec, Material};

fn jointbe(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jointbe"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_bundle() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("fp.cfg"), bundled("flatpunch.cfg").unwrap()).unwrap();
    let o = jointbe(
        &["run", "fp.cfg", "--out", "res", "--log-level", "warn"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["steps.csv", "preload_state.csv", "manifest.json"] {
        assert!(dir.path().join("res").join(f).is_file(), "{f}");
    }
}

#[test]
fn config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "[grid]\npich = 1.0\n").unwrap();
    let o = jointbe(&["run", "bad.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let e = stderr(&o);
    assert!(e.contains("error[config]") && e.contains("pich"), "{e}");
}

#[test]
fn missing_file_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let o = jointbe(&["run", "absent.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn unknown_suite_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    let o = jointbe(&["verify", "nonsense"], dir.path());
    assert_eq!(o.status.code(), Some(6));
}

#[test]
fn usage_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(jointbe(&["run"], dir.path()).status.code(), Some(2));
}

#[test]
fn synth_surface_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "seed = 3\n[material]\nyoungs_modulus = 210e9\npoisson_ratio = 0.3\nfriction_coefficient = 0.3\n[grid]\npitch = 1e-4\nhalf_width = 1e-3\n[topography.roughness]\nsigma = 1e-7\nlambda_min = 4e-4\nlambda_max = 2e-3\n[indenter]\nshape = \"sphere\"\nradius = 0.05\n[preload]\nforce = 10.0\nsteps = 1\n";
    std::fs::write(dir.path().join("r.cfg"), cfg).unwrap();
    let read = |name: &str| std::fs::read_to_string(dir.path().join(name)).unwrap();
    for (out, seed) in [("a.csv", "5"), ("b.csv", "5"), ("c.csv", "6")] {
        let o = jointbe(
            &["synth-surface", "r.cfg", "--out", out, "--seed", seed],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
    assert!(read("a.csv").starts_with("point_id,x,y,height\n"));
}

#[test]
fn reduce_external_model() {
    let dir = tempfile::tempdir().unwrap();
    let lj = build_lap_joint(&LapJointSpec {
        material: Material {
            youngs_modulus: 210e9,
            poisson_ratio: 0.3,
            density: 7850.0,
        },
        element: ElementKind::default(),
        overlap: [0.01, 0.01],
        free_length: [0.01, 0.01],
        thickness: [0.004, 0.004],
        element_size: 5e-3,
        layers: [1, 1],
        preload_patch: [0.01, 0.01],
        far_end: FarEnd::Clamped,
    })
    .unwrap();
    FeBundle::from_lap_joint(&lj).write(dir.path()).unwrap();
    let o = jointbe(
        &[
            "reduce",
            "--mass",
            "mass.mtx",
            "--stiffness",
            "stiffness.mtx",
            "--dofs",
            "dofs.csv",
            "--modes",
            "4",
            "--out",
            "red",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(dir.path().join("red/reduced.csv")).unwrap();
    let n_rows = table.lines().count() - 1;
    assert_eq!(n_rows, lj.pairs.len() + 4);
    let k = jointbe::io::read_matrix_market(&dir.path().join("red/k_red.mtx")).unwrap();
    assert_eq!(k.dim(), n_rows);
}

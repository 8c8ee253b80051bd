use faer::Mat;
use jointbe::linalg::{gen_sym_eigen, matvec, sym_eigenvalues, SpdFactor};
use jointbe::minifem::*;
use jointbe::rom::{craig_bampton, relative_transform, FeModel};
use proptest::prelude::*;

fn steel() -> Material {
    Material {
        youngs_modulus: 210e9,
        poisson_ratio: 0.3,
        density: 7800.0,
    }
}

fn cantilever(kind: ElementKind) -> BrickMeshSpec {
    BrickMeshSpec {
        origin: [0.0; 3],
        extents: [0.1, 0.01, 0.01],
        counts: [10, 1, 1],
        material: steel(),
        element: kind,
        fixed: vec![FaceConstraint::clamped(Face::XMin)],
        interface: None,
    }
}

fn block_fixture(counts: [usize; 3]) -> FeModel {
    build_brick_model(&BrickMeshSpec {
        origin: [0.0; 3],
        extents: [0.04, 0.02, 0.01],
        counts,
        material: steel(),
        element: ElementKind::default(),
        fixed: vec![FaceConstraint::clamped(Face::XMin)],
        interface: Some(Face::ZMax),
    })
    .unwrap()
}

fn eigenvalues(m: &FeModel) -> Vec<f64> {
    gen_sym_eigen(m.stiffness.to_dense().as_ref(), m.mass.to_dense().as_ref())
        .unwrap()
        .0
}

#[test]
fn cantilever_first_bending_frequency() {
    let (l, b): (f64, f64) = (0.1, 0.01);
    let mat = steel();
    let i = b.powi(4) / 12.0;
    let beta = 1.875_104_068_711_961;
    let exact = beta * beta * (mat.youngs_modulus * i / (mat.density * b * b * l.powi(4))).sqrt();
    let w = eigenvalues(&build_brick_model(&cantilever(ElementKind::IncompatibleModes)).unwrap())
        [0]
    .sqrt();
    assert!((w / exact - 1.0).abs() < 0.10, "{w} vs {exact}");
    // the plain trilinear brick locks in bending
    let w_std =
        eigenvalues(&build_brick_model(&cantilever(ElementKind::Standard)).unwrap())[0].sqrt();
    assert!(w_std > w);
}

#[test]
fn unconstrained_block_has_six_rigid_modes() {
    let mut spec = cantilever(ElementKind::default());
    spec.counts = [3, 2, 2];
    spec.fixed.clear();
    let m = build_brick_model(&spec).unwrap();
    let ev = sym_eigenvalues(m.stiffness.to_dense().as_ref()).unwrap();
    let top = *ev.last().unwrap();
    let zero = ev.iter().filter(|v| v.abs() < 1e-10 * top).count();
    assert_eq!(zero, 6);
}

#[test]
fn single_element_with_one_free_face_is_definite() {
    let spec = BrickMeshSpec {
        counts: [1, 1, 1],
        fixed: [Face::XMin, Face::YMin, Face::YMax, Face::ZMin, Face::ZMax]
            .map(FaceConstraint::clamped)
            .to_vec(),
        ..cantilever(ElementKind::Standard)
    };
    let m = build_brick_model(&spec).unwrap();
    assert_eq!(m.n_dofs(), 0);
    let spec = BrickMeshSpec {
        fixed: vec![FaceConstraint::clamped(Face::XMin)],
        ..spec
    };
    let m = build_brick_model(&spec).unwrap();
    assert_eq!(m.n_dofs(), 12);
    assert!(SpdFactor::new(m.stiffness.to_dense().as_ref(), "K").is_ok());
}

#[test]
fn patch_test_uniform_tension() {
    let (lx, ly, lz) = (0.03, 0.02, 0.015);
    let mat = steel();
    for kind in [ElementKind::Standard, ElementKind::IncompatibleModes] {
        let spec = BrickMeshSpec {
            origin: [0.0; 3],
            extents: [lx, ly, lz],
            counts: [3, 2, 2],
            material: mat,
            element: kind,
            fixed: vec![
                FaceConstraint {
                    face: Face::XMin,
                    directions: [true, false, false],
                },
                FaceConstraint {
                    face: Face::YMin,
                    directions: [false, true, false],
                },
                FaceConstraint {
                    face: Face::ZMin,
                    directions: [false, false, true],
                },
            ],
            interface: None,
        };
        let block = build_brick_block(&spec).unwrap();
        let chol = SpdFactor::new(block.model.stiffness.to_dense().as_ref(), "K").unwrap();
        for p in [1e6, 2e6] {
            let (f, area) = block.face_traction(Face::XMax, [p, 0.0, 0.0], None);
            assert!((area - ly * lz).abs() < 1e-15);
            let u = chol.solve(&f);
            let strain = p / mat.youngs_modulus;
            for (id, x) in block.nodes.iter().enumerate() {
                let exact = [
                    strain * x[0],
                    -mat.poisson_ratio * strain * x[1],
                    -mat.poisson_ratio * strain * x[2],
                ];
                for d in 0..3 {
                    if let Some(dof) = block.node_dofs[id][d] {
                        assert!((u[dof] - exact[d]).abs() < 1e-10 * strain * lx);
                    }
                }
            }
        }
    }
}

#[test]
fn craig_bampton_static_boundary_exactness() {
    let model = block_fixture([6, 3, 2]);
    let red = craig_bampton(&model, 25).unwrap();
    let k = model.stiffness.to_dense();
    let full = SpdFactor::new(k.as_ref(), "K").unwrap();
    let kbb = SpdFactor::new(red.k_bb().as_ref(), "K_bb").unwrap();
    let nb = red.n_boundary();
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    for col in [0, nb / 2, nb - 1] {
        let mut f = vec![0.0; model.n_dofs()];
        f[model.boundary_dofs[col]] = 1.0;
        let q = full.solve(&f);
        let mut fb = vec![0.0; nb];
        fb[col] = 1.0;
        let qb = kbb.solve(&fb);
        for (k, &d) in model.boundary_dofs.iter().enumerate() {
            worst = worst.max((q[d] - qb[k]).abs());
            scale = scale.max(q[d].abs());
        }
    }
    assert!(worst <= 1e-10 * scale, "{worst} vs {scale}");
}

#[test]
fn craig_bampton_structure() {
    let model = block_fixture([6, 3, 2]);
    let red = craig_bampton(&model, 25).unwrap();
    let (nb, nm) = (red.n_boundary(), red.n_modes());
    let kmax = jointbe::linalg::max_abs(red.k_red.as_ref());
    for i in 0..nb {
        for j in 0..nm {
            assert!(red.k_red[(i, nb + j)].abs() <= 1e-10 * kmax);
        }
    }
    for i in 0..nm {
        for j in 0..nm {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((red.m_red[(nb + i, nb + j)] - expect).abs() <= 1e-12);
            let kexp = if i == j { red.omega[i].powi(2) } else { 0.0 };
            assert!((red.k_red[(nb + i, nb + j)] - kexp).abs() <= 1e-9 * red.omega[nm - 1].powi(2));
        }
    }
    assert!(red.omega.windows(2).all(|w| w[0] <= w[1]));
    // fixed-interface residuals
    let inner = model.inner_dofs();
    let kii = model.stiffness.block(&inner, &inner);
    let mii = model.mass.block(&inner, &inner);
    let knorm = jointbe::linalg::max_abs(kii.as_ref());
    for m in 0..nm {
        let th: Vec<f64> = (0..inner.len()).map(|i| red.theta[(i, m)]).collect();
        let kt = matvec(kii.as_ref(), &th);
        let mt = matvec(mii.as_ref(), &th);
        let r = kt.iter().zip(&mt).fold(0.0_f64, |a, (x, y)| {
            a.max((x - red.omega[m].powi(2) * y).abs())
        });
        assert!(r <= 1e-8 * knorm);
    }
}

#[test]
fn craig_bampton_retains_low_frequencies() {
    let model = block_fixture([8, 4, 2]);
    let red = craig_bampton(&model, 25).unwrap();
    let full = eigenvalues(&model);
    let (reduced, _) = gen_sym_eigen(red.k_red.as_ref(), red.m_red.as_ref()).unwrap();
    for k in 0..8 {
        let rel = (reduced[k].sqrt() / full[k].sqrt() - 1.0).abs();
        assert!(rel < 0.005, "mode {k}: {rel}");
    }
}

#[test]
fn craig_bampton_complete_basis_is_exact() {
    let model = block_fixture([3, 2, 1]);
    let n_inner = model.inner_dofs().len();
    let red = craig_bampton(&model, n_inner).unwrap();
    let full = eigenvalues(&model);
    let (reduced, _) = gen_sym_eigen(red.k_red.as_ref(), red.m_red.as_ref()).unwrap();
    assert_eq!(full.len(), reduced.len());
    for (a, b) in full.iter().zip(&reduced) {
        assert!((a - b).abs() <= 1e-9 * a.abs(), "{a} vs {b}");
    }
}

fn fixture_spec(far_end: FarEnd) -> LapJointSpec {
    LapJointSpec {
        material: Material {
            youngs_modulus: 194e9,
            poisson_ratio: 0.2854,
            density: 7861.0,
        },
        element: ElementKind::default(),
        overlap: [0.02, 0.02],
        free_length: [0.04, 0.04],
        thickness: [0.006, 0.006],
        element_size: 0.005,
        layers: [2, 2],
        preload_patch: [0.01, 0.01],
        far_end,
    }
}

#[test]
fn lap_joint_preload_resultant() {
    let lj = build_lap_joint(&fixture_spec(FarEnd::Guided)).unwrap();
    assert_eq!(lj.pairs.len(), 25 * 3);
    assert_eq!(lj.interface.faces.len(), 16);
    let n_a = lj.pairs.iter().map(|p| p.1).max().unwrap();
    let (mut up, mut down) = (0.0, 0.0);
    for (d, &f) in lj.model.preload.iter().enumerate() {
        assert_eq!(lj.model.dof_map[d].direction == 2 || f == 0.0, true);
        if f > 0.0 {
            up += f;
            assert!(d <= n_a);
        } else {
            down += f;
        }
    }
    assert!((up - 1.0).abs() < 1e-10 && (down + 1.0).abs() < 1e-10);
    assert_eq!(lj.sensor_dofs.len(), 3);
}

#[test]
fn lap_joint_rejects_non_conforming_overlap() {
    let mut spec = fixture_spec(FarEnd::Guided);
    spec.overlap[0] = 0.0213;
    assert!(build_lap_joint(&spec).is_err());
}

#[test]
fn lap_joint_floating_mode_is_zero_energy() {
    let lj = build_lap_joint(&fixture_spec(FarEnd::Guided)).unwrap();
    let rel = relative_transform(&lj.model, &lj.pairs).unwrap();
    let red = craig_bampton(&rel, 10).unwrap();
    let phi = lj.floating_modes(&red.boundary_dofs).unwrap();
    let kphi = red.k_bb() * &phi;
    let kmax = jointbe::linalg::max_abs(red.k_bb().as_ref());
    assert!(jointbe::linalg::max_abs(kphi.as_ref()) <= 1e-9 * kmax);
    // the floating mode carries the full preload of B
    let fb: f64 = (0..red.n_boundary())
        .map(|k| phi[(k, 0)] * red.f_red[k])
        .sum();
    assert!((fb + 1.0).abs() < 1e-9);
    assert!(lj.floating_modes(&[]).is_some());
    let clamped = build_lap_joint(&fixture_spec(FarEnd::Clamped)).unwrap();
    assert!(clamped.floating_modes(&red.boundary_dofs).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn relative_transform_preserves_energy(seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let lj = build_lap_joint(&fixture_spec(FarEnd::Clamped)).unwrap();
        let rel = relative_transform(&lj.model, &lj.pairs).unwrap();
        let qn: Vec<f64> = (0..rel.n_dofs()).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut q = qn.clone();
        for &(a, b) in &lj.pairs {
            q[a] = qn[a] + qn[b];
        }
        let e0 = lj.model.stiffness.quad_form(&q);
        let e1 = rel.stiffness.quad_form(&qn);
        prop_assert!((e0 - e1).abs() <= 1e-10 * e0.abs());
        let m0 = lj.model.mass.quad_form(&q);
        let m1 = rel.mass.quad_form(&qn);
        prop_assert!((m0 - m1).abs() <= 1e-10 * m0.abs());
    }
}

#[test]
fn dense_block_helpers_agree() {
    let model = block_fixture([2, 2, 1]);
    let d = model.stiffness.to_dense();
    let b = &model.boundary_dofs;
    let blk = model.stiffness.block(b, b);
    let sel = Mat::from_fn(b.len(), b.len(), |i, j| d[(b[i], b[j])]);
    assert_eq!(blk, sel);
}

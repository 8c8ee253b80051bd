use faer::Mat;
use jointbe::coupling::*;
use jointbe::halfspace::{assemble_compliance, ComplianceMatrix, ElasticHalfSpace};
use jointbe::linalg::{matvec, max_abs, sym_eigenvalues, DMat, SpdFactor};
use jointbe::minifem::*;
use jointbe::rom::{craig_bampton, relative_transform, ReducedModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_joint(far_end: FarEnd) -> (LapJoint, ReducedModel) {
    let spec = LapJointSpec {
        material: Material {
            youngs_modulus: 200e9,
            poisson_ratio: 0.3,
            density: 7800.0,
        },
        element: ElementKind::default(),
        overlap: [0.01, 0.01],
        free_length: [0.01, 0.01],
        thickness: [0.004, 0.004],
        element_size: 0.005,
        layers: [1, 1],
        preload_patch: [0.01, 0.01],
        far_end,
    };
    let lj = build_lap_joint(&spec).unwrap();
    let rel = relative_transform(&lj.model, &lj.pairs).unwrap();
    let red = craig_bampton(&rel, 4).unwrap();
    (lj, red)
}

fn interior_points(lj: &LapJoint, n: usize, seed: u64) -> Vec<[f64; 2]> {
    let r = lj.interface.regular.unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            [
                r.origin[0] + rng.random::<f64>() * r.pitch[0] * r.counts[0] as f64,
                r.origin[1] + rng.random::<f64>() * r.pitch[1] * r.counts[1] as f64,
            ]
        })
        .collect()
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng, shift: f64) -> DMat {
    let a = Mat::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
    let mut s = &a * a.transpose();
    for i in 0..n {
        s[(i, i)] += shift;
    }
    s
}

#[test]
fn point_on_node_takes_full_weight() {
    let (lj, red) = small_joint(FarEnd::Clamped);
    let node = &lj.interface.nodes[4];
    let map = build_coupling(&red, &[node.xy], &lj.interface).unwrap();
    let row = red
        .boundary_dofs
        .iter()
        .position(|&d| d == node.dofs[2])
        .unwrap();
    assert_eq!(map.w_b[(row, 0)], 1.0);
    let col_sum: f64 = (0..red.n_boundary()).map(|i| map.w_b[(i, 0)].abs()).sum();
    assert_eq!(col_sum, 1.0);
}

#[test]
fn face_centre_weights_are_quarters() {
    let (lj, red) = small_joint(FarEnd::Clamped);
    let f = lj.interface.faces[1];
    let c = f.iter().fold([0.0, 0.0], |acc, &n| {
        let p = lj.interface.nodes[n].xy;
        [acc[0] + 0.25 * p[0], acc[1] + 0.25 * p[1]]
    });
    let map = build_coupling(&red, &[c], &lj.interface).unwrap();
    for w in map.weights[0] {
        assert!((w - 0.25).abs() < 1e-15);
    }
}

#[test]
fn orphan_point_is_rejected() {
    let (lj, red) = small_joint(FarEnd::Clamped);
    let err = build_coupling(&red, &[[-1.0, 0.0]], &lj.interface).unwrap_err();
    assert!(err.to_string().contains("outside every interface face"));
}

#[test]
fn rigid_normal_translation_opens_every_point_by_one() {
    let (lj, red) = small_joint(FarEnd::Guided);
    let pts = interior_points(&lj, 40, 3);
    let map = build_coupling(&red, &pts, &lj.interface).unwrap();
    let q = lj.floating_modes(&red.boundary_dofs).unwrap();
    let q: Vec<f64> = (0..q.nrows()).map(|i| q[(i, 0)]).collect();
    let g = matvec(map.w_b.transpose(), &q);
    for j in 0..pts.len() {
        assert!((g[3 * j] - 1.0).abs() < 1e-14);
        assert!(g[3 * j + 1].abs() < 1e-14 && g[3 * j + 2].abs() < 1e-14);
    }
}

#[test]
fn zero_compliance_node_coupling_gives_boundary_flexibility() {
    let (lj, red) = small_joint(FarEnd::Clamped);
    let (map, _, areas) = node_coupling(&red, &lj.interface).unwrap();
    let c = areas.len();
    assert_eq!(3 * c, red.n_boundary());
    let comp = ComplianceMatrix::zeros((0..c).collect(), areas);
    let sys = condense_static(
        &red,
        &map,
        &comp,
        &vec![0.0; c],
        &CondenseOptions::default(),
    )
    .unwrap();
    // W_b is a permutation here, so C* must invert K_bb after reordering
    let kbb = red.k_bb();
    let prod = map.w_b.transpose() * &kbb * &map.w_b * &sys.c_star;
    for i in 0..3 * c {
        for j in 0..3 * c {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((prod[(i, j)] - e).abs() < 1e-8, "{i} {j} {}", prod[(i, j)]);
        }
    }
}

#[test]
fn rigid_structure_keeps_half_space_compliance() {
    let (lj, red) = small_joint(FarEnd::Clamped);
    let r = lj.interface.regular.unwrap();
    let pitch = 0.0025;
    let pts: Vec<[f64; 2]> = (0..16)
        .map(|k| {
            [
                r.origin[0] + pitch * (0.5 + (k % 4) as f64),
                r.origin[1] + pitch * (0.5 + (k / 4) as f64),
            ]
        })
        .collect();
    let hs = ElasticHalfSpace::new(200e9, 0.3).unwrap();
    let comp = assemble_compliance(&pts, (0..16).collect(), [pitch, pitch], &hs, &hs).unwrap();
    let map = build_coupling(&red, &pts, &lj.interface).unwrap();
    let opts = CondenseOptions {
        rigid_structure: true,
        floating: None,
    };
    let sys = condense_static(&red, &map, &comp, &[0.0; 16], &opts).unwrap();
    assert_eq!(sys.c_star, comp.entries);
    assert!(sys
        .imposed_gap(&vec![1.0; red.n_boundary()])
        .iter()
        .all(|&g| g == 0.0));

    let flex = condense_static(&red, &map, &comp, &[0.0; 16], &CondenseOptions::default()).unwrap();
    let diff = &flex.c_star - &comp.entries;
    let ev = sym_eigenvalues(diff.as_ref()).unwrap();
    assert!(ev[0] >= -1e-12 * max_abs(diff.as_ref()));
}

#[test]
fn floating_mode_must_carry_zero_energy() {
    let (lj, red) = small_joint(FarEnd::Clamped);
    let (map, _, areas) = node_coupling(&red, &lj.interface).unwrap();
    let c = areas.len();
    let comp = ComplianceMatrix::zeros((0..c).collect(), areas);
    let opts = CondenseOptions {
        rigid_structure: false,
        floating: lj.floating_modes(&red.boundary_dofs).or_else(|| {
            Some(Mat::from_fn(red.n_boundary(), 1, |i, _| {
                (i % 3 == 2) as u8 as f64
            }))
        }),
    };
    assert!(condense_static(&red, &map, &comp, &vec![0.0; c], &opts).is_err());
}

/// Solves the coupled static system `[K̃_bb, -W_b; W_bᵀ, C] [q_b; λ] = [f_b; g + h]`
/// for prescribed gaps `g` with all points bonded.
fn bonded_block_solve(
    kbb: &DMat,
    w: &DMat,
    c: &DMat,
    f_b: &[f64],
    g: &[f64],
    h: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let (nb, nc) = (kbb.nrows(), c.nrows());
    let n = nb + nc;
    let mut a = Mat::zeros(n, n);
    let mut rhs = vec![0.0; n];
    for i in 0..nb {
        for j in 0..nb {
            a[(i, j)] = kbb[(i, j)];
        }
        for j in 0..nc {
            a[(i, nb + j)] = -w[(i, j)];
            a[(nb + j, i)] = w[(i, j)];
        }
        rhs[i] = f_b[i];
    }
    for i in 0..nc {
        for j in 0..nc {
            a[(nb + i, nb + j)] = c[(i, j)];
        }
        rhs[nb + i] = g[i] + if i % 3 == 0 { h[i / 3] } else { 0.0 };
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)]).collect())
        .collect();
    let x = jointbe::verify::oracles::dense_solve(&rows, &rhs).unwrap();
    (x[..nb].to_vec(), x[nb..].to_vec())
}

#[test]
fn condensed_form_matches_block_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (lj, red) = small_joint(FarEnd::Clamped);
    let pts = interior_points(&lj, 5, 8);
    let map = build_coupling(&red, &pts, &lj.interface).unwrap();
    let csp = random_spd(15, &mut rng, 1.0);
    let scale = 1.0 / max_abs(red.k_bb().as_ref());
    let comp = ComplianceMatrix {
        entries: &csp * faer::Scale(scale),
        point_index: (0..5).collect(),
        element_area: vec![1.0; 5],
    };
    let h: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 1e-6).collect();
    let sys = condense_static(&red, &map, &comp, &h, &CondenseOptions::default()).unwrap();
    let f_b: Vec<f64> = (0..red.n_boundary())
        .map(|_| rng.random::<f64>() - 0.5)
        .collect();
    let g: Vec<f64> = (0..15)
        .map(|_| (rng.random::<f64>() - 0.5) * 1e-6)
        .collect();
    let (q_ref, l_ref) = bonded_block_solve(&red.k_bb(), &map.w_b, &comp.entries, &f_b, &g, &h);

    // condensed: C* λ = g - g_ex
    let g_ex = sys.g_ex(&f_b);
    let rhs: Vec<f64> = g.iter().zip(&g_ex).map(|(a, b)| a - b).collect();
    let lam = SpdFactor::new(sys.c_star.as_ref(), "C*")
        .unwrap()
        .solve(&rhs);
    let q = sys.boundary_displacement(&f_b, &lam, &[]);
    let rel = |a: &[f64], b: &[f64]| {
        let d = a
            .iter()
            .zip(b)
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        d / b.iter().fold(0.0_f64, |m, y| m.max(y.abs()))
    };
    assert!(rel(&lam, &l_ref) <= 1e-10, "{}", rel(&lam, &l_ref));
    assert!(rel(&q, &q_ref) <= 1e-10, "{}", rel(&q, &q_ref));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn series_compliance_dominates(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lj, red0) = small_joint(FarEnd::Clamped);
        let nb = red0.n_boundary();
        let mut red = red0.clone();
        let k = random_spd(nb, &mut rng, 0.5);
        red.k_red = Mat::from_fn(red.dim(), red.dim(), |i, j| {
            if i < nb && j < nb { k[(i, j)] } else { red0.k_red[(i, j)] }
        });
        let pts = interior_points(&lj, 4, seed);
        let map = build_coupling(&red, &pts, &lj.interface).unwrap();
        let comp = ComplianceMatrix {
            entries: random_spd(12, &mut rng, 0.1),
            point_index: (0..4).collect(),
            element_area: vec![1.0; 4],
        };
        let sys = condense_static(&red, &map, &comp, &[0.0; 4], &CondenseOptions::default()).unwrap();
        let diff = &sys.c_star - &comp.entries;
        let ev = sym_eigenvalues(diff.as_ref()).unwrap();
        prop_assert!(ev[0] >= -1e-12 * max_abs(sys.c_star.as_ref()));
        prop_assert!(sym_eigenvalues(sys.c_star.as_ref()).unwrap()[0] > 0.0);
        // virtual work: (W_bᵀ q)·λ = q·(W_b λ)
        let q: Vec<f64> = (0..nb).map(|_| rng.random::<f64>() - 0.5).collect();
        let l: Vec<f64> = (0..12).map(|_| rng.random::<f64>() - 0.5).collect();
        let lhs: f64 = matvec(map.w_b.transpose(), &q).iter().zip(&l).map(|(a, b)| a * b).sum();
        let rhs: f64 = matvec(map.w_b.as_ref(), &l).iter().zip(&q).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn weights_partition_unity(seed in 0u64..10_000) {
        let (lj, red) = small_joint(FarEnd::Clamped);
        let pts = interior_points(&lj, 6, seed);
        let map = build_coupling(&red, &pts, &lj.interface).unwrap();
        for j in 0..pts.len() {
            prop_assert!((map.weights[j].iter().sum::<f64>() - 1.0).abs() < 1e-13);
            for c in 0..3 {
                let s: f64 = (0..red.n_boundary()).map(|i| map.w_b[(i, 3 * j + c)]).sum();
                prop_assert!((s - 1.0).abs() < 1e-13);
            }
        }
    }
}

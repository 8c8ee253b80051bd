use faer::Mat;
use jointbe::contact::*;
use jointbe::linalg::{matvec, sym_eigenvalues, DMat};
use jointbe::verify::oracles::{dense_solve, jenkins_energy, lcp_enumerate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn diag3(cn: f64, ct: f64) -> DMat {
    Mat::from_fn(3, 3, |i, j| {
        if i != j {
            0.0
        } else if i == 0 {
            cn
        } else {
            ct
        }
    })
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMat {
    let a = Mat::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let mut s = &a * a.transpose();
    for i in 0..n {
        s[(i, i)] += 0.5;
    }
    s
}

fn closed_state(c: usize, ln: f64, mu: f64) -> ContactState {
    let mut s = ContactState::initial(&vec![0.0; c], mu, vec![1.0; c], 0);
    for j in 0..c {
        s.force[3 * j] = ln;
    }
    s
}

#[test]
fn predict_single_point_normal_push() {
    let c = diag3(2.0, 3.0);
    let op = ContactOperator {
        c_star: c.as_ref(),
        rigid: None,
    };
    let s = closed_state(1, 1.0, 0.3);
    let p = predict_stick(&s, &op, &[0], &[-0.5, 0.0, 0.0], &[]).unwrap();
    assert!((p.dlam[0] - 0.25).abs() < 1e-15);
    assert_eq!((p.st, p.a), (vec![0], vec![]));
}

#[test]
fn predict_single_point_tangential_overdrive() {
    let c = diag3(2.0, 3.0);
    let op = ContactOperator {
        c_star: c.as_ref(),
        rigid: None,
    };
    let s = closed_state(1, 1.0, 0.3);
    // stick would need |Δλ_t| = 1.5 / 3 = 0.5 > μ λ_n = 0.3
    let p = predict_stick(&s, &op, &[0], &[0.0, 1.5, 0.0], &[]).unwrap();
    assert!((p.dlam[1] + 0.5).abs() < 1e-15);
    assert_eq!((p.st, p.a), (vec![], vec![0]));
}

#[test]
fn zero_increment_predicts_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = random_spd(9, &mut rng);
    let op = ContactOperator {
        c_star: c.as_ref(),
        rigid: None,
    };
    let s = closed_state(3, 1.0, 0.3);
    let p = predict_stick(&s, &op, &[0, 1, 2], &[0.0; 9], &[]).unwrap();
    assert!(p.dlam.iter().all(|&v| v == 0.0));
    assert_eq!(p.st, vec![0, 1, 2]);
}

#[test]
fn delassus_without_stick_is_plain_block() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = random_spd(9, &mut rng);
    let op = ContactOperator {
        c_star: c.as_ref(),
        rigid: None,
    };
    let dg: Vec<f64> = (0..9).map(|i| i as f64 * 0.1 - 0.3).collect();
    let d = build_delassus(&op, &[], &[0, 2], &dg, &[], None).unwrap();
    let idx = [0, 1, 2, 6, 7, 8];
    for (a, &i) in idx.iter().enumerate() {
        assert_eq!(d.c_vec[a], dg[i]);
        for (b, &j) in idx.iter().enumerate() {
            assert_eq!(d.g_mat[(a, b)], c[(i, j)]);
        }
    }
}

#[test]
fn delassus_matches_direct_elimination() {
    // one stick and one active point: eliminating the stick unknowns by hand
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let c = random_spd(6, &mut rng);
    let op = ContactOperator {
        c_star: c.as_ref(),
        rigid: None,
    };
    let dg: Vec<f64> = (0..6).map(|_| rng.random::<f64>() - 0.5).collect();
    let d = build_delassus(&op, &[0], &[1], &dg, &[], None).unwrap();
    // G e_k: solve C_SS y = -C_SA e_k, then C_AS y + C_AA e_k
    let css: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| c[(i, j)]).collect())
        .collect();
    for k in 0..3 {
        let rhs: Vec<f64> = (0..3).map(|i| -c[(i, 3 + k)]).collect();
        let y = dense_solve(&css, &rhs).unwrap();
        for a in 0..3 {
            let g: f64 = c[(3 + a, 3 + k)] + (0..3).map(|i| c[(3 + a, i)] * y[i]).sum::<f64>();
            assert!((d.g_mat[(a, k)] - g).abs() < 1e-12 * g.abs().max(1.0));
        }
    }
    let rhs: Vec<f64> = (0..3).map(|i| -dg[i]).collect();
    let y = dense_solve(&css, &rhs).unwrap();
    for a in 0..3 {
        let cv = dg[3 + a] + (0..3).map(|i| c[(3 + a, i)] * y[i]).sum::<f64>();
        assert!((d.c_vec[a] - cv).abs() < 1e-12);
    }
}

#[test]
fn pjor_matches_enumeration_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let g = random_spd(n, &mut rng);
        let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let gv: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| g[(i, j)]).collect())
            .collect();
        let exact = lcp_enumerate(&gv, &c, 1e-12).expect("unique solution for SPD");
        let res = pjor_solve(
            g.as_ref(),
            &c,
            Cone::Normal,
            &vec![0.0; n],
            &PjorOptions::default(),
        )
        .unwrap();
        for (a, b) in res.x.iter().zip(&exact) {
            assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
    }
}

#[test]
fn zero_increment_leaves_state_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let c = random_spd(12, &mut rng);
    let op = ContactOperator {
        c_star: c.as_ref(),
        rigid: None,
    };
    let s0 = ContactState::initial(&[0.0, -1e-3, 0.0, 0.0], 0.3, vec![1.0; 4], 0);
    let mut dg = vec![0.0; 12];
    for j in 0..4 {
        dg[3 * j] = -0.2;
        dg[3 * j + 1] = 0.05 * j as f64;
    }
    let (s1, _) = step_increment(&s0, &op, &dg, &[], &SolverOptions::default()).unwrap();
    let (s2, _) = step_increment(&s1, &op, &vec![0.0; 12], &[], &SolverOptions::default()).unwrap();
    for (a, b) in s1.force.iter().zip(&s2.force) {
        assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }
    for (a, b) in s1.gap.iter().zip(&s2.gap) {
        assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }
    // slip is a per-increment notion: nothing slips under a zero increment
    for (a, b) in s1.status.iter().zip(&s2.status) {
        let expect = if *a == PointStatus::Sep {
            PointStatus::Sep
        } else {
            PointStatus::Stick
        };
        assert_eq!(*b, expect);
    }
}

/// Rigid flat punch on a stiff uniform foundation: every point closes and sticks.
#[test]
fn flat_normal_ramp_closes_everything() {
    let n = 16;
    let mut c = Mat::from_fn(3 * n, 3 * n, |i, j| if i == j { 1.0 } else { 0.0 });
    for i in 0..n {
        for j in 0..n {
            if i != j {
                c[(3 * i, 3 * j)] = 0.2 / (1.0 + (i as f64 - j as f64).abs());
            }
        }
    }
    let nmat = Mat::from_fn(3 * n, 1, |i, _| if i % 3 == 0 { 1.0 } else { 0.0 });
    let op = ContactOperator {
        c_star: c.as_ref(),
        rigid: Some(nmat.as_ref()),
    };
    let mut s = ContactState::initial(&vec![0.0; n], 0.5, vec![1.0; n], 1);
    for _ in 0..5 {
        let (next, _) = step_increment(
            &s,
            &op,
            &vec![0.0; 3 * n],
            &[2.0],
            &SolverOptions::default(),
        )
        .unwrap();
        s = next;
    }
    assert!((s.total_force()[0] - 10.0).abs() < 1e-10 * 10.0);
    assert!(s.status.iter().all(|&st| st == PointStatus::Stick));
    let mean = 10.0 / n as f64;
    assert!((0..n).all(|j| (s.normal_force(j) - mean).abs() < 0.5 * mean));
}

/// Single point on a tangential spring of stiffness k, preloaded normally,
/// driven through a displacement cycle of amplitude x̂.
fn jenkins_cycle(
    k: f64,
    kn: f64,
    mu: f64,
    preload: f64,
    x_hat: f64,
    steps_per_quarter: usize,
) -> (f64, f64) {
    let c = diag3(1.0 / kn, 1.0 / k);
    let op = ContactOperator {
        c_star: c.as_ref(),
        rigid: None,
    };
    let opts = SolverOptions::default();
    let mut s = ContactState::initial(&[0.0], mu, vec![1.0], 0);
    let (next, _) = step_increment(&s, &op, &[-preload / kn, 0.0, 0.0], &[], &opts).unwrap();
    s = next;
    let fs = mu * s.normal_force(0);
    // initial quarter, then a full cycle, integrating f dx with the trapezoid rule
    let dx = x_hat / steps_per_quarter as f64;
    let mut x = 0.0;
    for _ in 0..steps_per_quarter {
        let (next, _) = step_increment(&s, &op, &[0.0, dx, 0.0], &[], &opts).unwrap();
        s = next;
        x += dx;
    }
    let mut area = 0.0;
    let mut f_prev = -s.force[1];
    for leg in [-1.0, 1.0] {
        for _ in 0..2 * steps_per_quarter {
            let (next, _) = step_increment(&s, &op, &[0.0, leg * dx, 0.0], &[], &opts).unwrap();
            s = next;
            x += leg * dx;
            let f = -s.force[1];
            area += 0.5 * (f + f_prev) * leg * dx;
            f_prev = f;
        }
    }
    assert!((x - x_hat).abs() < 1e-12 * x_hat);
    (area, fs)
}

#[test]
fn jenkins_loop_energy() {
    let (k, x_hat) = (2.0e6, 3.0e-6);
    let (area, fs) = jenkins_cycle(k, 5.0e6, 0.5, 4.0, x_hat, 100);
    let exact = jenkins_energy(fs, k, x_hat);
    assert!((area / exact - 1.0).abs() < 0.01, "{area} vs {exact}");
}

#[test]
fn linear_tie_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let c = random_spd(6, &mut rng);
    let op = ContactOperator {
        c_star: c.as_ref(),
        rigid: None,
    };
    let s = ContactState::initial(&[0.0, -1.0], 0.0, vec![1.0; 2], 0);
    let opts = SolverOptions {
        law: ContactLaw::LinearTie,
        ..Default::default()
    };
    let dg: Vec<f64> = (0..6).map(|i| 0.1 * i as f64).collect();
    let (n1, _) = step_increment(&s, &op, &dg, &[], &opts).unwrap();
    let back = matvec(c.as_ref(), &n1.force);
    for i in 0..6 {
        assert!((back[i] + dg[i]).abs() < 1e-12);
    }
}

fn random_system(seed: u64, c: usize) -> (DMat, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = random_spd(3 * c, &mut rng);
    let h: Vec<f64> = (0..c).map(|_| -rng.random::<f64>() * 0.3).collect();
    (m, h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn schur_of_spd_is_spd(seed in 0u64..1000, split in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_spd(12, &mut rng);
        let op = ContactOperator { c_star: c.as_ref(), rigid: None };
        let st: Vec<usize> = (0..split).collect();
        let a: Vec<usize> = (split..4).collect();
        let d = build_delassus(&op, &st, &a, &vec![0.0; 12], &[], None).unwrap();
        let ev = sym_eigenvalues(d.g_mat.as_ref()).unwrap();
        prop_assert!(ev[0] > 0.0);
    }

    #[test]
    fn converged_steps_satisfy_contact_laws(seed in 0u64..1000, mu in 0.0f64..0.8) {
        let (c, h) = random_system(seed, 5);
        let op = ContactOperator { c_star: c.as_ref(), rigid: None };
        let mut s = ContactState::initial(&h, mu, vec![1.0; 5], 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        for _ in 0..6 {
            let dg: Vec<f64> = (0..15)
                .map(|i| if i % 3 == 0 { -0.1 * rng.random::<f64>() } else { 0.1 * (rng.random::<f64>() - 0.5) })
                .collect();
            let (next, _) = step_increment(&s, &op, &dg, &[], &SolverOptions::default()).unwrap();
            let rep = check_invariants(&s, &next);
            prop_assert!(rep.passes(1e-6), "{rep:?}");
            s = next;
        }
    }

    #[test]
    fn force_controlled_balance(seed in 0u64..1000, mu in 0.1f64..0.8) {
        let (c, h) = random_system(seed, 5);
        let nmat = Mat::from_fn(15, 1, |i, _| if i % 3 == 0 { 1.0 } else { 0.0 });
        let op = ContactOperator { c_star: c.as_ref(), rigid: Some(nmat.as_ref()) };
        let mut s = ContactState::initial(&h, mu, vec![1.0; 5], 1);
        let mut applied = 0.0;
        for k in 0..5 {
            let df = 1.0 + k as f64;
            applied += df;
            let dg: Vec<f64> = (0..15).map(|i| if i % 3 == 1 { 0.01 * k as f64 } else { 0.0 }).collect();
            let (next, _) = step_increment(&s, &op, &dg, &[df], &SolverOptions::default()).unwrap();
            prop_assert!((next.total_force()[0] - applied).abs() <= 1e-8 * applied);
            prop_assert!(check_invariants(&s, &next).passes(1e-6));
            s = next;
        }
    }
}

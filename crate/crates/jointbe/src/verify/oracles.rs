//! Reference solutions that do not share code paths with the solver.

/// Gaussian elimination with partial pivoting on a small dense system.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))?;
        if m[p][k].abs() < 1e-300 {
            return None;
        }
        m.swap(k, p);
        for i in (k + 1)..n {
            let f = m[i][k] / m[k][k];
            for j in k..=n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = ((k + 1)..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (m[k][n] - s) / m[k][k];
    }
    Some(x)
}

/// Normal-only complementarity `x ≥ 0, Gx + c ≥ 0, xᵀ(Gx + c) = 0` by
/// enumerating every open/closed combination.
pub fn lcp_enumerate(g: &[Vec<f64>], c: &[f64], tol: f64) -> Option<Vec<f64>> {
    let n = c.len();
    assert!(n <= 20);
    for mask in 0u32..(1 << n) {
        let closed: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let sub: Vec<Vec<f64>> = closed
            .iter()
            .map(|&i| closed.iter().map(|&j| g[i][j]).collect())
            .collect();
        let rhs: Vec<f64> = closed.iter().map(|&i| -c[i]).collect();
        let xs = if closed.is_empty() {
            Some(vec![])
        } else {
            dense_solve(&sub, &rhs)
        };
        let Some(xs) = xs else { continue };
        let mut x = vec![0.0; n];
        for (k, &i) in closed.iter().enumerate() {
            x[i] = xs[k];
        }
        let ok_x = x.iter().all(|&v| v >= -tol);
        let ok_w = (0..n).all(|i| {
            let w: f64 = (0..n).map(|j| g[i][j] * x[j]).sum::<f64>() + c[i];
            closed.contains(&i) || w >= -tol
        });
        if ok_x && ok_w {
            return Some(x);
        }
    }
    None
}

/// Hertz contact of a sphere of radius `r` on a half-space pair of identical
/// material under load `p`: contact radius and peak pressure.
pub fn hertz(p: f64, r: f64, e: f64, nu: f64) -> (f64, f64) {
    let e_star = e / (2.0 * (1.0 - nu * nu));
    let a = (3.0 * p * r / (4.0 * e_star)).cbrt();
    let p0 = 3.0 * p / (2.0 * std::f64::consts::PI * a * a);
    (a, p0)
}

/// Hertz pressure at radius `rho`.
pub fn hertz_pressure(p0: f64, a: f64, rho: f64) -> f64 {
    if rho >= a {
        0.0
    } else {
        p0 * (1.0 - (rho / a).powi(2)).sqrt()
    }
}

/// Stick radius under tangential load `q` for limit `mu_p = μP`.
pub fn cattaneo_stick_radius(a: f64, q: f64, mu_p: f64) -> f64 {
    a * (1.0 - q / mu_p).cbrt()
}

/// Energy dissipated per cycle by a Jenkins element of stiffness `k` and slip
/// force `fs` driven at displacement amplitude `x_hat`.
pub fn jenkins_energy(fs: f64, k: f64, x_hat: f64) -> f64 {
    if k * x_hat <= fs {
        0.0
    } else {
        4.0 * fs * (x_hat - fs / k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = dense_solve(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn enumeration_scalar() {
        assert_eq!(lcp_enumerate(&[vec![2.0]], &[-4.0], 1e-12), Some(vec![2.0]));
        assert_eq!(lcp_enumerate(&[vec![2.0]], &[4.0], 1e-12), Some(vec![0.0]));
    }

    #[test]
    fn hertz_reference_values() {
        // R = 50 mm, P = 100 N, steel pair
        let (a, p0) = hertz(100.0, 0.05, 194e9, 0.2854);
        let e_star = 194e9 / (2.0 * (1.0 - 0.2854f64.powi(2)));
        assert!((a.powi(3) - 0.75 * 100.0 * 0.05 / e_star).abs() < 1e-20);
        assert!((p0 * 2.0 / 3.0 * std::f64::consts::PI * a * a - 100.0).abs() < 1e-9);
        assert_eq!(cattaneo_stick_radius(1.0, 0.0, 1.0), 1.0);
        assert!((jenkins_energy(1.0, 2.0, 1.0) - 2.0).abs() < 1e-15);
        assert_eq!(jenkins_energy(1.0, 2.0, 0.4), 0.0);
    }
}

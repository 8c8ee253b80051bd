//! Elastic half-space compliance on a regular grid.
//!
//! The closed-form block returned by [`influence_coefficients`] is the combined
//! compliance of a pair of identical half spaces loaded by equal and opposite
//! uniform tractions over a rectangular element of area `ΔA = 2Δx·2Δy`, per
//! unit element force. Each body contributes one half of it.

use std::collections::HashMap;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{DMat, SpdFactor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticHalfSpace {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
}

impl ElasticHalfSpace {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        if !(youngs_modulus > 0.0) || !youngs_modulus.is_finite() {
            return Err(Error::InvalidInput(format!(
                "Young's modulus must be positive, got {youngs_modulus}"
            )));
        }
        if !(0.0..0.5).contains(&poisson_ratio) {
            return Err(Error::InvalidInput(format!(
                "Poisson ratio must lie in [0, 0.5), got {poisson_ratio}"
            )));
        }
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
        })
    }

    /// Plane-strain modulus of the pair, `1/E* = 2(1-ν²)/E`.
    pub fn pair_modulus(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 - self.poisson_ratio.powi(2)))
    }
}

/// Diagonal 3×3 influence block ordered (normal, tangential x, tangential y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluenceBlock {
    pub c_zz: f64,
    pub c_xx: f64,
    pub c_yy: f64,
}

impl InfluenceBlock {
    pub fn diag(&self) -> [f64; 3] {
        [self.c_zz, self.c_xx, self.c_yy]
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            c_zz: s * self.c_zz,
            c_xx: s * self.c_xx,
            c_yy: s * self.c_yy,
        }
    }
}

/// `t + sqrt(a² + t²)` without cancellation for negative `t`.
fn lift(t: f64, a: f64) -> f64 {
    let r = a.hypot(t);
    if t >= 0.0 {
        t + r
    } else {
        a * a / (r - t)
    }
}

/// `a · ln(lift(t1, a) / lift(t2, a))`, with the `a → 0` limit of zero.
fn log_term(a: f64, t1: f64, t2: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let (l1, l2) = (lift(t1, a), lift(t2, a));
    let d = (t1 - t2) * (l1 + l2) / (a.hypot(t1) + a.hypot(t2));
    a * (d / l2).ln_1p()
}

pub fn influence_coefficients(
    dx_bar: f64,
    dy_bar: f64,
    half_dx: f64,
    half_dy: f64,
    hs: &ElasticHalfSpace,
) -> InfluenceBlock {
    debug_assert!(half_dx > 0.0 && half_dy > 0.0);
    let (x, y, dx, dy) = (dx_bar, dy_bar, half_dx, half_dy);
    let nu = hs.poisson_ratio;
    let area = 4.0 * dx * dy;
    let pref = 2.0 * (1.0 - nu * nu) / (area * std::f64::consts::PI * hs.youngs_modulus);

    // ∫∫ y²/r³ dA and ∫∫ x²/r³ dA over the element, respectively
    let xt = log_term(x + dx, y + dy, y - dy) + log_term(x - dx, y - dy, y + dy);
    let yt = log_term(y + dy, x + dx, x - dx) + log_term(y - dy, x - dx, x + dx);

    InfluenceBlock {
        c_zz: pref * (xt + yt),
        c_xx: pref * (xt + yt / (1.0 - nu)),
        c_yy: pref * (xt / (1.0 - nu) + yt),
    }
}

/// Dense compliance over retained grid points, 3 rows per point ordered
/// (normal, t1 = x, t2 = y). Entries relate element forces [N] to gaps [m].
#[derive(Debug, Clone)]
pub struct ComplianceMatrix {
    pub entries: DMat,
    pub point_index: Vec<usize>,
    pub element_area: Vec<f64>,
}

impl ComplianceMatrix {
    pub fn n_points(&self) -> usize {
        self.point_index.len()
    }

    /// Zero compliance, used for node-based contact with a rigid interface layer.
    pub fn zeros(point_index: Vec<usize>, element_area: Vec<f64>) -> Self {
        let n = 3 * point_index.len();
        Self {
            entries: Mat::zeros(n, n),
            point_index,
            element_area,
        }
    }

    pub fn is_zero(&self) -> bool {
        let a = self.entries.as_ref();
        (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)] == 0.0))
    }

    /// Checks positive definiteness by attempting a Cholesky factorization.
    pub fn check_spd(&self) -> Result<()> {
        SpdFactor::new(self.entries.as_ref(), "half-space compliance").map(|_| ())
    }
}

/// Assembles `C = C(1) + C(2)` over lattice points with common pitch.
///
/// `point_index` carries the caller's point IDs through to the result.
pub fn assemble_compliance(
    points: &[[f64; 2]],
    point_index: Vec<usize>,
    pitch: [f64; 2],
    hs1: &ElasticHalfSpace,
    hs2: &ElasticHalfSpace,
) -> Result<ComplianceMatrix> {
    if hs1 != hs2 {
        return Err(Error::InvalidInput(
            "only identical isotropic half-space pairs are supported".into(),
        ));
    }
    if !(pitch[0] > 0.0 && pitch[1] > 0.0) {
        return Err(Error::InvalidInput("grid pitch must be positive".into()));
    }
    if point_index.len() != points.len() {
        return Err(Error::InvalidInput("point index length mismatch".into()));
    }
    let c = points.len();
    let Some(first) = points.first() else {
        return Ok(ComplianceMatrix::zeros(point_index, Vec::new()));
    };

    let mut lattice = Vec::with_capacity(c);
    for p in points {
        let mut ij = [0i64; 2];
        for d in 0..2 {
            let u = (p[d] - first[d]) / pitch[d];
            let r = u.round();
            if (u - r).abs() > 1e-9 * r.abs().max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "point ({}, {}) is not on the lattice of pitch ({}, {})",
                    p[0], p[1], pitch[0], pitch[1]
                )));
            }
            ij[d] = r as i64;
        }
        lattice.push(ij);
    }

    let (hx, hy) = (0.5 * pitch[0], 0.5 * pitch[1]);
    // each body carries one half of the pair's closed-form value
    let half = |hs: &ElasticHalfSpace, di: i64, dj: i64| {
        influence_coefficients(di as f64 * pitch[0], dj as f64 * pitch[1], hx, hy, hs).scaled(0.5)
    };
    let mut table: HashMap<(i64, i64), [f64; 3]> = HashMap::new();
    let mut entries = Mat::zeros(3 * c, 3 * c);
    for (j, pj) in lattice.iter().enumerate() {
        for (l, pl) in lattice.iter().enumerate().skip(j) {
            let key = ((pl[0] - pj[0]).abs(), (pl[1] - pj[1]).abs());
            let blk = *table.entry(key).or_insert_with(|| {
                let a = half(hs1, key.0, key.1).diag();
                let b = half(hs2, key.0, key.1).diag();
                [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
            });
            for d in 0..3 {
                entries[(3 * j + d, 3 * l + d)] = blk[d];
                entries[(3 * l + d, 3 * j + d)] = blk[d];
            }
        }
    }
    let area = 4.0 * hx * hy;
    Ok(ComplianceMatrix {
        entries,
        point_index,
        element_area: vec![area; c],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{asymmetry, matvec};
    use std::f64::consts::PI;

    fn steel() -> ElasticHalfSpace {
        ElasticHalfSpace::new(194e9, 0.2854).unwrap()
    }

    #[test]
    fn rejects_bad_material() {
        assert!(ElasticHalfSpace::new(-1.0, 0.3).is_err());
        assert!(ElasticHalfSpace::new(1.0, 0.5).is_err());
        assert!(ElasticHalfSpace::new(1.0, -0.1).is_err());
    }

    #[test]
    fn self_term_closed_form() {
        let hs = steel();
        let a = 0.125e-3;
        let b = influence_coefficients(0.0, 0.0, a, a, &hs);
        let nu = hs.poisson_ratio;
        let expect =
            4.0 * (1.0 - nu * nu) * (1.0 + 2f64.sqrt()).ln() / (PI * hs.youngs_modulus * a);
        assert!((b.c_zz - expect).abs() <= 1e-12 * expect);
        // x- and y-integrals are equal on a square, so c_xx = c_zz (2 - ν) / (2 (1 - ν))
        let ratio = (2.0 - nu) / (2.0 * (1.0 - nu));
        assert!((b.c_xx - expect * ratio).abs() <= 1e-12 * expect);
        assert_eq!(b.c_xx, b.c_yy);
    }

    #[test]
    fn even_in_separation() {
        let hs = steel();
        let d = 0.7e-3;
        let p = influence_coefficients(d, 0.3e-3, 0.2e-3, 0.1e-3, &hs);
        let m = influence_coefficients(-d, 0.3e-3, 0.2e-3, 0.1e-3, &hs);
        let mm = influence_coefficients(-d, -0.3e-3, 0.2e-3, 0.1e-3, &hs);
        for (a, b) in [(p, m), (p, mm)] {
            for (x, y) in a.diag().iter().zip(b.diag()) {
                assert!((x - y).abs() <= 1e-14 * x.abs());
            }
        }
    }

    #[test]
    fn xy_role_swap() {
        let hs = steel();
        let a = 0.25e-3;
        let (u, v) = (1.3e-3, -0.4e-3);
        let b1 = influence_coefficients(u, v, a, a, &hs);
        let b2 = influence_coefficients(v, u, a, a, &hs);
        assert!((b1.c_xx - b2.c_yy).abs() <= 1e-13 * b1.c_xx);
        assert!((b1.c_zz - b2.c_zz).abs() <= 1e-13 * b1.c_zz);
    }

    #[test]
    fn far_field_matches_point_load() {
        let hs = steel();
        let nu = hs.poisson_ratio;
        let e = hs.youngs_modulus;
        let a = 0.1e-3;
        let r = 20.0 * a;
        let b = influence_coefficients(r, 0.0, a, a, &hs);
        // Boussinesq, both bodies
        let bous = 2.0 * (1.0 - nu * nu) / (PI * e * r);
        assert!((b.c_zz / bous - 1.0).abs() < 0.01);
        // Cerruti along and across the load direction, both bodies
        let along = 2.0 * (1.0 + nu) / (PI * e * r);
        let across = 2.0 * (1.0 + nu) * (1.0 - nu) / (PI * e * r);
        assert!((b.c_xx / along - 1.0).abs() < 0.01);
        assert!((b.c_yy / across - 1.0).abs() < 0.01);
    }

    #[test]
    fn exact_at_negative_offsets() {
        // stable evaluation at large separations where t + sqrt(a² + t²) cancels
        let hs = steel();
        let a = 1e-4;
        let b = influence_coefficients(0.0, -500.0 * a, a, a, &hs);
        let c = influence_coefficients(0.0, 500.0 * a, a, a, &hs);
        assert!(
            (b.c_zz - c.c_zz).abs() <= 1e-12 * c.c_zz,
            "{} vs {}",
            b.c_zz,
            c.c_zz
        );
    }

    fn grid(n: usize, pitch: f64) -> (Vec<[f64; 2]>, Vec<usize>) {
        let pts: Vec<[f64; 2]> = (0..n * n)
            .map(|k| [(k % n) as f64 * pitch + 0.3, (k / n) as f64 * pitch - 0.1])
            .collect();
        (pts, (0..n * n).collect())
    }

    #[test]
    fn single_point_block() {
        let hs = steel();
        let c = assemble_compliance(&[[0.0, 0.0]], vec![7], [2e-4, 2e-4], &hs, &hs).unwrap();
        let b = influence_coefficients(0.0, 0.0, 1e-4, 1e-4, &hs);
        assert_eq!(c.entries[(0, 0)], b.c_zz);
        assert_eq!(c.entries[(1, 1)], b.c_xx);
        assert_eq!(c.entries[(0, 1)], 0.0);
        assert_eq!(c.point_index, vec![7]);
        assert!((c.element_area[0] - 4e-8).abs() < 1e-20);
    }

    #[test]
    fn two_points_symmetric_blocks() {
        let hs = steel();
        let c = assemble_compliance(
            &[[0.0, 0.0], [3e-4, 2e-4]],
            vec![0, 1],
            [1e-4, 1e-4],
            &hs,
            &hs,
        )
        .unwrap();
        for d in 0..3 {
            assert_eq!(c.entries[(d, 3 + d)], c.entries[(3 + d, d)]);
            assert!(c.entries[(d, 3 + d)] > 0.0);
        }
    }

    #[test]
    fn rejects_off_lattice() {
        let hs = steel();
        let r = assemble_compliance(
            &[[0.0, 0.0], [1.5e-4, 0.0]],
            vec![0, 1],
            [1e-4, 1e-4],
            &hs,
            &hs,
        );
        assert!(r.is_err());
        let other = ElasticHalfSpace::new(70e9, 0.33).unwrap();
        assert!(assemble_compliance(&[[0.0, 0.0]], vec![0], [1e-4, 1e-4], &hs, &other).is_err());
    }

    #[test]
    fn ten_by_ten_symmetric_positive_definite() {
        let hs = steel();
        let (pts, ids) = grid(10, 0.25e-3);
        let c = assemble_compliance(&pts, ids, [0.25e-3, 0.25e-3], &hs, &hs).unwrap();
        assert!(asymmetry(c.entries.as_ref()) <= 1e-14);
        c.check_spd().unwrap();
    }

    #[test]
    fn uniform_pressure_peaks_at_center() {
        let hs = steel();
        let n = 9;
        let (pts, ids) = grid(n, 0.5e-3);
        let c = assemble_compliance(&pts, ids, [0.5e-3, 0.5e-3], &hs, &hs).unwrap();
        let mut f = vec![0.0; 3 * n * n];
        for j in 0..n * n {
            f[3 * j] = 1.0;
        }
        let u = matvec(c.entries.as_ref(), &f);
        let center = (n / 2) * n + n / 2;
        for j in 0..n * n {
            assert!(u[3 * j] <= u[3 * center]);
        }
    }
}

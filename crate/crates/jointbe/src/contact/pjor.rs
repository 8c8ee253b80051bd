//! Projected Jacobi over-relaxation for `-(G x + c) ∈ N_C(x)`.

use faer::MatRef;

use crate::error::{Error, Result};
use crate::linalg::{lambda_max, matvec, norm_inf};

pub fn proj_nonneg(xi: f64) -> f64 {
    if xi >= 0.0 {
        xi
    } else {
        0.0
    }
}

/// Projection onto the disk of radius `r`.
pub fn proj_disk(xi: [f64; 2], r: f64) -> [f64; 2] {
    let n = xi[0].hypot(xi[1]);
    if n > r {
        if n == 0.0 {
            return [0.0, 0.0];
        }
        [r * xi[0] / n, r * xi[1] / n]
    } else {
        xi
    }
}

/// Admissible set of one point: unilateral normal only, or normal plus
/// Coulomb disk (3 unknowns per point ordered normal, t1, t2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cone {
    Normal,
    Coulomb { mu: f64 },
}

impl Cone {
    pub fn dim(&self) -> usize {
        match self {
            Cone::Normal => 1,
            Cone::Coulomb { .. } => 3,
        }
    }

    /// Projects one point's unknowns in place.
    pub fn project(&self, x: &mut [f64]) {
        x[0] = proj_nonneg(x[0]);
        if let Cone::Coulomb { mu } = *self {
            let t = proj_disk([x[1], x[2]], mu * x[0]);
            x[1] = t[0];
            x[2] = t[1];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PjorOptions {
    /// Relaxation factor relative to the stability limit of the scaled iteration.
    pub omega: f64,
    /// Relative tolerance on the fixed-point residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Momentum extrapolation with adaptive restart.
    pub accelerated: bool,
}

impl Default for PjorOptions {
    fn default() -> Self {
        Self {
            omega: 1.0,
            tol: 1e-10,
            max_iter: 50_000,
            accelerated: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PjorResult {
    pub x: Vec<f64>,
    /// `G x + c` at the returned iterate.
    pub w: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Per-point step sizes: block-diagonal Frobenius scaling, normalized by the
/// largest eigenvalue of the scaled matrix so that `ω ∈ (0, 2)` is stable.
pub fn step_sizes(g: MatRef<'_, f64>, dim: usize, omega: f64) -> Vec<f64> {
    let m = g.nrows();
    let np = m / dim;
    let mut rho = vec![0.0; np];
    for (p, r) in rho.iter_mut().enumerate() {
        let mut s = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                s += g[(dim * p + a, dim * p + b)].powi(2);
            }
        }
        *r = s.sqrt().max(f64::MIN_POSITIVE);
    }
    let d: Vec<f64> = (0..m).map(|i| 1.0 / rho[i / dim].sqrt()).collect();
    let scaled = faer::Mat::from_fn(m, m, |i, j| d[i] * g[(i, j)] * d[j]);
    let lmax = lambda_max(scaled.as_ref(), 200).max(1.0) * 1.02;
    (0..m).map(|i| omega / (rho[i / dim] * lmax)).collect()
}

pub fn pjor_solve(
    g: MatRef<'_, f64>,
    c: &[f64],
    cone: Cone,
    x0: &[f64],
    opts: &PjorOptions,
) -> Result<PjorResult> {
    let m = c.len();
    let dim = cone.dim();
    assert_eq!(g.nrows(), m);
    assert_eq!(x0.len(), m);
    assert_eq!(m % dim, 0);
    if m == 0 {
        return Ok(PjorResult {
            x: vec![],
            w: vec![],
            iterations: 0,
            residual: 0.0,
        });
    }
    let eps = step_sizes(g, dim, opts.omega);
    let mut x = x0.to_vec();
    for blk in x.chunks_mut(dim) {
        cone.project(blk);
    }
    let ec: Vec<f64> = c.iter().zip(&eps).map(|(a, b)| a * b).collect();
    let scale = norm_inf(&ec).max(norm_inf(&x)).max(f64::MIN_POSITIVE);
    let tol = opts.tol * scale;

    let step = |y: &[f64], out: &mut [f64]| {
        let gy = matvec(g, y);
        for i in 0..m {
            out[i] = y[i] - eps[i] * (gy[i] + c[i]);
        }
        for blk in out.chunks_mut(dim) {
            cone.project(blk);
        }
    };
    let max_diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .fold(0.0_f64, |r, (p, q)| r.max((p - q).abs()))
    };

    let mut next = vec![0.0; m];
    // extrapolated point and momentum weight
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut best = f64::INFINITY;
    let mut window_start = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iter {
        step(&y, &mut next);
        // fixed-point residual at the extrapolated point
        residual = max_diff(&y, &next);
        if opts.accelerated && residual > tol {
            let restart = (0..m)
                .map(|i| (y[i] - next[i]) * (next[i] - x[i]))
                .sum::<f64>()
                > 0.0;
            if restart {
                t = 1.0;
                y.copy_from_slice(&next);
            } else {
                let t1 = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let beta = (t - 1.0) / t1;
                for i in 0..m {
                    y[i] = next[i] + beta * (next[i] - x[i]);
                }
                t = t1;
            }
        } else {
            y.copy_from_slice(&next);
        }
        std::mem::swap(&mut x, &mut next);
        if residual <= tol && opts.accelerated {
            // confirm with a plain step from the returned iterate
            step(&x, &mut next);
            residual = max_diff(&x, &next);
            y.copy_from_slice(&x);
            t = 1.0;
        }
        if residual <= tol {
            let w: Vec<f64> = matvec(g, &x).iter().zip(c).map(|(a, b)| a + b).collect();
            return Ok(PjorResult {
                x,
                w,
                iterations: it + 1,
                residual,
            });
        }
        if !residual.is_finite() {
            return Err(Error::Divergence {
                iterations: it + 1,
                residual,
            });
        }
        best = best.min(residual);
        if it % 50 == 0 {
            if it >= 100 && residual > 1e3 * best && residual > window_start {
                return Err(Error::Divergence {
                    iterations: it + 1,
                    residual,
                });
            }
            window_start = residual;
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

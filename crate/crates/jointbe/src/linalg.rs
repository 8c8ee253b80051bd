//! Thin dense linear-algebra layer over `faer`.

use faer::linalg::solvers::{DenseSolveCore, Llt, Solve};
use faer::{ColRef, Mat, MatMut, MatRef, Side};

use crate::error::{Error, Result};

pub type DMat = Mat<f64>;

/// Cholesky factorization of a symmetric positive definite matrix.
pub struct SpdFactor {
    llt: Llt<f64>,
    n: usize,
}

impl std::fmt::Debug for SpdFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdFactor")
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl SpdFactor {
    pub fn new(a: MatRef<'_, f64>, what: &str) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::InvalidInput(format!("{what}: matrix is not square")));
        }
        let llt = a
            .llt(Side::Lower)
            .map_err(|_| Error::NotPositiveDefinite(what.to_string()))?;
        Ok(Self { llt, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let rhs = MatMut::from_column_major_slice_mut(b, self.n, 1);
        self.llt.solve_in_place(rhs);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_mat(&self, b: MatRef<'_, f64>) -> DMat {
        self.llt.solve(b)
    }

    pub fn inverse(&self) -> DMat {
        self.llt.inverse()
    }

    pub fn factor_l(&self) -> MatRef<'_, f64> {
        self.llt.L()
    }
}

/// Cholesky factorization that splits into independent diagonal blocks when
/// the matrix has no entries coupling different groups.
#[derive(Debug)]
pub enum GroupedFactor {
    Full(SpdFactor),
    Split {
        n: usize,
        blocks: Vec<(Vec<usize>, SpdFactor)>,
    },
}

impl GroupedFactor {
    /// `group[i]` labels row `i`; labels must be `< n_groups`.
    pub fn new(a: MatRef<'_, f64>, group: &[usize], n_groups: usize, what: &str) -> Result<Self> {
        let n = a.nrows();
        let coupled = (0..n).any(|j| (0..n).any(|i| group[i] != group[j] && a[(i, j)] != 0.0));
        if coupled || n_groups < 2 {
            return Ok(Self::Full(SpdFactor::new(a, what)?));
        }
        let mut blocks = Vec::new();
        for g in 0..n_groups {
            let idx: Vec<usize> = (0..n).filter(|&i| group[i] == g).collect();
            if idx.is_empty() {
                continue;
            }
            let f = SpdFactor::new(select(a, &idx, &idx).as_ref(), what)?;
            blocks.push((idx, f));
        }
        Ok(Self::Split { n, blocks })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Self::Full(f) => f.solve(b),
            Self::Split { n, blocks } => {
                let mut x = vec![0.0; *n];
                for (idx, f) in blocks {
                    let part: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
                    for (&i, v) in idx.iter().zip(f.solve(&part)) {
                        x[i] = v;
                    }
                }
                x
            }
        }
    }

    pub fn solve_mat(&self, b: MatRef<'_, f64>) -> DMat {
        match self {
            Self::Full(f) => f.solve_mat(b),
            Self::Split { n, blocks } => {
                let k = b.ncols();
                let cols: Vec<usize> = (0..k).collect();
                let mut x = Mat::zeros(*n, k);
                for (idx, f) in blocks {
                    let part = f.solve_mat(select(b, idx, &cols).as_ref());
                    for (r, &i) in idx.iter().enumerate() {
                        for c in 0..k {
                            x[(i, c)] = part[(r, c)];
                        }
                    }
                }
                x
            }
        }
    }
}

/// Rows/cols subset of a dense matrix.
pub fn select(a: MatRef<'_, f64>, rows: &[usize], cols: &[usize]) -> DMat {
    Mat::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

pub fn matvec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len());
    let y = a * ColRef::from_slice(x);
    y.iter().copied().collect()
}

pub fn matvec_t(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    matvec(a.transpose(), x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: MatRef<'_, f64>) -> f64 {
    let mut m = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

/// max |a_ij - a_ji| / max |a_ij|
pub fn asymmetry(a: MatRef<'_, f64>) -> f64 {
    let n = a.nrows();
    let scale = max_abs(a);
    if scale == 0.0 {
        return 0.0;
    }
    let mut m = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            m = m.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    m / scale
}

pub fn symmetrize(a: &mut DMat) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Eigenvalues (ascending) and eigenvectors of a symmetric matrix.
pub fn sym_eigen(a: MatRef<'_, f64>) -> Result<(Vec<f64>, DMat)> {
    let mut v = raw_eigenvectors(a)?;
    let mut b = v.transpose() * a * &v;
    symmetrize(&mut b);
    jacobi_polish(&mut b, &mut v);
    Ok(sorted_pairs(&b, &v))
}

fn raw_eigenvectors(a: MatRef<'_, f64>) -> Result<DMat> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Singular(format!("symmetric eigensolver failed: {e:?}")))?;
    Ok(evd.U().to_owned())
}

fn sorted_pairs(b: &DMat, v: &DMat) -> (Vec<f64>, DMat) {
    let mut order: Vec<usize> = (0..b.nrows()).collect();
    order.sort_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]));
    let vals = order.iter().map(|&i| b[(i, i)]).collect();
    (
        vals,
        Mat::from_fn(v.nrows(), order.len(), |r, c| v[(r, order[c])]),
    )
}

/// Cyclic Jacobi sweeps on a nearly diagonal symmetric `b`, accumulating rotations into `v`.
fn jacobi_polish(b: &mut DMat, v: &mut DMat) {
    let n = b.nrows();
    let floor = f64::EPSILON * f64::EPSILON * max_abs(b.as_ref());
    for _ in 0..30 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let bpq = b[(p, q)];
                let size = (b[(p, p)] * b[(q, q)]).abs().sqrt().max(floor);
                if bpq.abs() <= 0.25 * f64::EPSILON * size {
                    continue;
                }
                rotated = true;
                let theta = (b[(q, q)] - b[(p, p)]) / (2.0 * bpq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + theta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                rotate_cols(b, p, q, c, s);
                for k in 0..n {
                    let (bpk, bqk) = (b[(p, k)], b[(q, k)]);
                    b[(p, k)] = c * bpk - s * bqk;
                    b[(q, k)] = s * bpk + c * bqk;
                }
                rotate_cols(v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
}

fn rotate_cols(a: &mut DMat, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..a.nrows() {
        let (ap, aq) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = c * ap - s * aq;
        a[(k, q)] = s * ap + c * aq;
    }
}

pub fn sym_eigenvalues(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Singular(format!("symmetric eigensolver failed: {e:?}")))
}

/// Solves `K v = w² M v` for symmetric K and SPD M.
///
/// Eigenvalues ascend; eigenvectors are M-orthonormal.
pub fn gen_sym_eigen(k: MatRef<'_, f64>, m: MatRef<'_, f64>) -> Result<(Vec<f64>, DMat)> {
    let n = k.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let chol = SpdFactor::new(m, "mass matrix")?;
    let l = chol.factor_l();
    // A = L^-1 K L^-T
    let mut x = k.to_owned();
    l.solve_lower_triangular_in_place(x.as_mut());
    let mut a = x.transpose().to_owned();
    l.solve_lower_triangular_in_place(a.as_mut());
    symmetrize(&mut a);
    let (vals, mut v) = sym_eigen(a.as_ref())?;
    l.transpose().solve_upper_triangular_in_place(v.as_mut());
    Ok((vals, v))
}

const INVERSE_STEPS: usize = 6;

/// Lowest `count` eigenpairs of `K v = w² M v` for SPD K and M.
///
/// A full dense solve seeds the subspace; a few inverse-iteration steps, each followed by
/// a Rayleigh-Ritz projection, makes the returned pairs consistent to rounding, so that
/// `VᵀKV = diag(w²)` and `VᵀMV = I`.
pub fn gen_sym_eigen_lowest(
    k: MatRef<'_, f64>,
    m: MatRef<'_, f64>,
    count: usize,
) -> Result<(Vec<f64>, DMat)> {
    let n = k.nrows();
    let count = count.min(n);
    if count == 0 {
        return Ok((Vec::new(), Mat::zeros(n, 0)));
    }
    let mchol = SpdFactor::new(m, "mass matrix")?;
    let l = mchol.factor_l();
    let mut x = k.to_owned();
    l.solve_lower_triangular_in_place(x.as_mut());
    let mut a = x.transpose().to_owned();
    l.solve_lower_triangular_in_place(a.as_mut());
    symmetrize(&mut a);
    // a few spare vectors protect the last requested pair
    let width = (count + count.div_ceil(4).max(4)).min(n);
    let mut v = raw_eigenvectors(a.as_ref())?.subcols(0, width).to_owned();
    l.transpose().solve_upper_triangular_in_place(v.as_mut());
    let kchol = SpdFactor::new(k, "stiffness matrix")?;
    let knorm = max_abs(k);
    let mut out = (Vec::new(), Mat::zeros(n, 0));
    for _ in 0..INVERSE_STEPS {
        let y = kchol.solve_mat((m * &v).as_ref());
        let mut kr = y.transpose() * k * &y;
        let mut mr = y.transpose() * m * &y;
        symmetrize(&mut kr);
        symmetrize(&mut mr);
        let (vals, z) = gen_sym_eigen(kr.as_ref(), mr.as_ref())?;
        v = &y * &z;
        let lead = v.subcols(0, count);
        let res = k * lead
            - m * lead * Mat::from_fn(count, count, |i, j| if i == j { vals[i] } else { 0.0 });
        out = (vals[..count].to_vec(), lead.to_owned());
        if max_abs(res.as_ref()) <= 1e-12 * knorm {
            break;
        }
    }
    Ok(out)
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power iteration.
pub fn lambda_max(a: MatRef<'_, f64>, iters: usize) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64)
        .collect();
    let mut lam = 0.0;
    for _ in 0..iters {
        let nx = norm2(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let y = matvec(a, &x);
        let next = dot(&x, &y);
        x = y;
        if (next - lam).abs() <= 1e-6 * next.abs() {
            lam = next;
            break;
        }
        lam = next;
    }
    lam
}

/// Orthonormal basis of the columns of `a` (modified Gram-Schmidt with rank check).
pub fn orthonormalize(a: MatRef<'_, f64>, tol: f64) -> Result<DMat> {
    let (n, r) = (a.nrows(), a.ncols());
    let mut q = a.to_owned();
    for j in 0..r {
        for p in 0..j {
            let d: f64 = (0..n).map(|i| q[(i, p)] * q[(i, j)]).sum();
            for i in 0..n {
                q[(i, j)] -= d * q[(i, p)];
            }
        }
        let nrm: f64 = (0..n).map(|i| q[(i, j)] * q[(i, j)]).sum::<f64>().sqrt();
        let orig: f64 = (0..n).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt();
        if nrm <= tol * orig.max(f64::MIN_POSITIVE) {
            return Err(Error::Singular("rigid-mode basis is rank deficient".into()));
        }
        for i in 0..n {
            q[(i, j)] /= nrm;
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DMat {
        Mat::from_fn(n, n, |i, j| {
            let d = (i as f64 - j as f64).abs();
            1.0 / (1.0 + d) + if i == j { n as f64 } else { 0.0 }
        })
    }

    #[test]
    fn cholesky_solves() {
        let a = spd(12);
        let f = SpdFactor::new(a.as_ref(), "a").unwrap();
        let b: Vec<f64> = (0..12).map(|i| i as f64 - 3.0).collect();
        let x = f.solve(&b);
        let r = matvec(a.as_ref(), &x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 2.0 });
        assert!(SpdFactor::new(a.as_ref(), "a").is_err());
    }

    #[test]
    fn generalized_eigen_two_dof() {
        // k = [[2,-1],[-1,1]], m = I: w^2 = (3 -+ sqrt5)/2
        let k = Mat::from_fn(2, 2, |i, j| [[2.0, -1.0], [-1.0, 1.0]][i][j]);
        let m = Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let (w, v) = gen_sym_eigen(k.as_ref(), m.as_ref()).unwrap();
        assert!((w[0] - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((w[1] - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
        let vtmv = v.transpose() * &m * &v;
        assert!((vtmv[(0, 0)] - 1.0).abs() < 1e-14 && vtmv[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn power_iteration_matches_eigen() {
        let a = spd(20);
        let lm = lambda_max(a.as_ref(), 500);
        let ev = sym_eigenvalues(a.as_ref()).unwrap();
        assert!((lm - ev[19]).abs() < 1e-4 * ev[19]);
    }
}

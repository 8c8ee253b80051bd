//! Stick-block eliminations: prediction with all closed points sticking and
//! the Schur condensation onto the active set.

use faer::{Mat, MatRef};

use super::{dofs_of, ContactOperator, ContactState};
use crate::error::{Error, Result};
use crate::linalg::{matvec, select, symmetrize, DMat, GroupedFactor, SpdFactor};

/// Factorized stick block, optionally bordered by the rigid-mode constraint
/// `[[C_SS, N_S], [N_Sᵀ, 0]]`.
pub struct StickBlock {
    pub points: Vec<usize>,
    dofs: Vec<usize>,
    chol: Option<GroupedFactor>,
    z: Option<DMat>,
    h: Option<SpdFactor>,
    pub(crate) r: usize,
}

impl StickBlock {
    /// Factorizes the stick block. With `bordered`, the rigid constraint is
    /// included when the stick points control all rigid modes; check
    /// [`StickBlock::controls_rigid`].
    pub fn new(op: &ContactOperator<'_>, points: &[usize], bordered: bool) -> Result<Self> {
        let dofs = dofs_of(points);
        let r = if bordered { op.n_rigid() } else { 0 };
        if dofs.is_empty() {
            return Ok(Self {
                points: points.to_vec(),
                dofs,
                chol: None,
                z: None,
                h: None,
                r,
            });
        }
        let css = select(op.c_star, &dofs, &dofs);
        let comp: Vec<usize> = (0..dofs.len()).map(|k| k % 3).collect();
        let chol = GroupedFactor::new(css.as_ref(), &comp, 3, "stick block of C*")?;
        let (mut z, mut h) = (None, None);
        if r > 0 {
            let nr = op.rigid.expect("rigid columns");
            let ns = select(nr, &dofs, &(0..r).collect::<Vec<_>>());
            let zz = chol.solve_mat(ns.as_ref());
            let mut hh = ns.transpose() * &zz;
            symmetrize(&mut hh);
            if let Ok(f) = SpdFactor::new(hh.as_ref(), "rigid constraint") {
                let l = f.factor_l();
                let piv: Vec<f64> = (0..r).map(|i| l[(i, i)].powi(2)).collect();
                let (lo, hi) = piv
                    .iter()
                    .fold((f64::INFINITY, 0.0_f64), |(a, b), &p| (a.min(p), b.max(p)));
                if lo > 1e-12 * hi {
                    h = Some(f);
                }
            }
            z = Some(zz);
        }
        Ok(Self {
            points: points.to_vec(),
            dofs,
            chol: Some(chol),
            z,
            h,
            r,
        })
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn controls_rigid(&self) -> bool {
        self.r == 0 || self.h.is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    /// Solves the (bordered) stick system for one right-hand side.
    pub fn solve(&self, top: &[f64], bot: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let Some(chol) = &self.chol else {
            return (Vec::new(), vec![0.0; self.r]);
        };
        let u = chol.solve(top);
        match (&self.h, &self.z) {
            (Some(h), Some(z)) => {
                let mut rhs = matvec(z.transpose(), top);
                for (x, b) in rhs.iter_mut().zip(bot) {
                    *x -= b;
                }
                let da = h.solve(&rhs);
                let zda = matvec(z.as_ref(), &da);
                (u.iter().zip(&zda).map(|(a, b)| a - b).collect(), da)
            }
            _ => (u, vec![0.0; self.r]),
        }
    }

    /// Matrix version of [`StickBlock::solve`].
    pub fn solve_mat(&self, top: MatRef<'_, f64>, bot: MatRef<'_, f64>) -> (DMat, DMat) {
        let k = top.ncols();
        let Some(chol) = &self.chol else {
            return (Mat::zeros(0, k), Mat::zeros(self.r, k));
        };
        let u = chol.solve_mat(top);
        match (&self.h, &self.z) {
            (Some(h), Some(z)) => {
                let rhs = z.transpose() * top - bot;
                let da = h.solve_mat(rhs.as_ref());
                let y = &u - z * &da;
                (y, da)
            }
            _ => (u, Mat::zeros(self.r, k)),
        }
    }
}

fn rigid_rows(op: &ContactOperator<'_>, dofs: &[usize]) -> DMat {
    match op.rigid {
        Some(n) => select(n, dofs, &(0..n.ncols()).collect::<Vec<_>>()),
        None => Mat::zeros(dofs.len(), 0),
    }
}

/// Open normal gap that a sticking point must close within the increment.
pub(crate) fn closing_gap(state: &ContactState, dof: usize) -> f64 {
    if dof % 3 == 0 {
        state.gap[dof].max(0.0)
    } else {
        0.0
    }
}

/// Stick prediction over the closed set.
pub struct Prediction {
    pub st: Vec<usize>,
    pub a: Vec<usize>,
    /// Force increment over all points (zero outside the closed set).
    pub dlam: Vec<f64>,
    pub da: Vec<f64>,
    /// Factorization over the whole closed set, reusable when no point is active.
    pub block: Option<StickBlock>,
}

pub fn predict_stick(
    state: &ContactState,
    op: &ContactOperator<'_>,
    cl: &[usize],
    dg_ex: &[f64],
    df: &[f64],
) -> Result<Prediction> {
    predict_with_flags(state, &state.sticking, op, cl, dg_ex, df)
}

/// [`predict_stick`] with explicit stick-candidate flags.
pub(crate) fn predict_with_flags(
    state: &ContactState,
    sticking: &[bool],
    op: &ContactOperator<'_>,
    cl: &[usize],
    dg_ex: &[f64],
    df: &[f64],
) -> Result<Prediction> {
    let c = state.n_points();
    let r = op.n_rigid();
    let mut dlam = vec![0.0; 3 * c];
    if cl.is_empty() {
        return Ok(Prediction {
            st: vec![],
            a: vec![],
            dlam,
            da: vec![0.0; r],
            block: None,
        });
    }
    let block = StickBlock::new(op, cl, true)?;
    if !block.controls_rigid() {
        return Ok(Prediction {
            st: vec![],
            a: cl.to_vec(),
            dlam,
            da: vec![0.0; r],
            block: None,
        });
    }
    let top: Vec<f64> = block
        .dofs()
        .iter()
        .map(|&i| -dg_ex[i] - closing_gap(state, i))
        .collect();
    let (x, da) = block.solve(&top, df);
    for (k, &i) in block.dofs().iter().enumerate() {
        dlam[i] = x[k];
    }
    let mut st = Vec::new();
    let mut a = Vec::new();
    for &j in cl {
        let ln = state.force[3 * j] + dlam[3 * j];
        let lt = (state.force[3 * j + 1] + dlam[3 * j + 1])
            .hypot(state.force[3 * j + 2] + dlam[3 * j + 2]);
        if sticking[j] && ln > 0.0 && lt < state.mu * ln {
            st.push(j);
        } else {
            a.push(j);
        }
    }
    Ok(Prediction {
        st,
        a,
        dlam,
        da,
        block: Some(block),
    })
}

/// Schur condensation onto the active set:
/// `Δg_A = G Δλ_A + c (+ c_rigid Δa when the stick set does not control the rigid modes)`.
pub struct DelassusProblem {
    pub g_mat: DMat,
    pub c_vec: Vec<f64>,
    pub active: Vec<usize>,
    /// `∂c/∂Δa` for an externally prescribed rigid increment (uncontrolled case).
    pub c_rigid: Option<DMat>,
    stick: StickBlock,
    b0_top: Vec<f64>,
    b0_bot: Vec<f64>,
    a_dofs: Vec<usize>,
}

impl DelassusProblem {
    pub fn stick(&self) -> &StickBlock {
        &self.stick
    }

    pub fn rigid_controlled(&self) -> bool {
        self.c_rigid.is_none()
    }

    /// Recovers the stick-point force increments and the rigid increment from
    /// the active increments. `da` is used only in the uncontrolled case.
    pub fn expand(
        &self,
        op: &ContactOperator<'_>,
        dlam_a: &[f64],
        da: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let sd = self.stick.dofs();
        let csa = select(op.c_star, sd, &self.a_dofs);
        let mut top = self.b0_top.clone();
        let t = matvec(csa.as_ref(), dlam_a);
        for (x, v) in top.iter_mut().zip(&t) {
            *x -= v;
        }
        if self.rigid_controlled() {
            let na = rigid_rows(op, &self.a_dofs);
            let mut bot = self.b0_bot.clone();
            let v = matvec(na.transpose(), dlam_a);
            for (x, y) in bot.iter_mut().zip(&v) {
                *x -= y;
            }
            self.stick.solve(&top, &bot)
        } else {
            let ns = rigid_rows(op, sd);
            let v = matvec(ns.as_ref(), da);
            for (x, y) in top.iter_mut().zip(&v) {
                *x -= y;
            }
            let (y, _) = self.stick.solve(&top, &[]);
            (y, da.to_vec())
        }
    }
}

pub fn build_delassus(
    op: &ContactOperator<'_>,
    st: &[usize],
    a: &[usize],
    dg_ex: &[f64],
    df: &[f64],
    reuse: Option<StickBlock>,
) -> Result<DelassusProblem> {
    if a.is_empty() {
        return Err(Error::InvalidInput(
            "Delassus problem needs a non-empty active set".into(),
        ));
    }
    let r = op.n_rigid();
    let a_dofs = dofs_of(a);
    let stick = match reuse {
        Some(b) if b.points == st => b,
        _ => StickBlock::new(op, st, true)?,
    };
    let controlled = !stick.is_empty() && stick.controls_rigid();
    let sd = stick.dofs().to_vec();
    let caa = select(op.c_star, &a_dofs, &a_dofs);
    let na = rigid_rows(op, &a_dofs);
    let b0_top: Vec<f64> = sd.iter().map(|&i| -dg_ex[i]).collect();
    let b0_bot = df.to_vec();
    let mut c_vec: Vec<f64> = a_dofs.iter().map(|&i| dg_ex[i]).collect();

    let (mut g_mat, c_rigid) = if sd.is_empty() {
        (caa, if r > 0 { Some(na) } else { None })
    } else {
        let csa = select(op.c_star, &sd, &a_dofs);
        if controlled {
            let (yt, yb) = stick.solve_mat(csa.as_ref(), na.transpose());
            let g = &caa - csa.transpose() * &yt - &na * &yb;
            let (y0t, y0b) = stick.solve(&b0_top, &b0_bot);
            let v1 = matvec(csa.transpose(), &y0t);
            let v2 = matvec(na.as_ref(), &y0b);
            for k in 0..c_vec.len() {
                c_vec[k] += v1[k] + v2[k];
            }
            (g, None)
        } else {
            let (yt, _) =
                stick.solve_mat(csa.as_ref(), Mat::<f64>::zeros(0, a_dofs.len()).as_ref());
            let g = &caa - csa.transpose() * &yt;
            let (y0t, _) = stick.solve(&b0_top, &[]);
            let v1 = matvec(csa.transpose(), &y0t);
            for k in 0..c_vec.len() {
                c_vec[k] += v1[k];
            }
            let cr = if r > 0 {
                let ns = rigid_rows(op, &sd);
                let (zs, _) = stick.solve_mat(ns.as_ref(), Mat::<f64>::zeros(0, r).as_ref());
                Some(&na - csa.transpose() * &zs)
            } else {
                None
            };
            (g, cr)
        }
    };
    symmetrize(&mut g_mat);
    Ok(DelassusProblem {
        g_mat,
        c_vec,
        active: a.to_vec(),
        c_rigid,
        stick,
        b0_top,
        b0_bot,
        a_dofs,
    })
}

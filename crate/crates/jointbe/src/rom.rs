//! Craig-Bampton reduction with relative interface coordinates.

use std::collections::HashMap;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{gen_sym_eigen_lowest, matvec, symmetrize, DMat, SpdFactor};
use crate::sparse::SparseSym;

/// Node and Cartesian direction (0 = x, 1 = y, 2 = z) of one DOF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofInfo {
    pub node: usize,
    pub direction: usize,
}

#[derive(Debug, Clone)]
pub struct FeModel {
    pub mass: SparseSym,
    pub stiffness: SparseSym,
    /// Ordered boundary DOFs `q_b`.
    pub boundary_dofs: Vec<usize>,
    pub dof_map: Vec<DofInfo>,
    /// Static preload pattern per newton of preload.
    pub preload: Vec<f64>,
}

impl FeModel {
    pub fn n_dofs(&self) -> usize {
        self.stiffness.dim()
    }

    /// DOFs not in the boundary set, ascending.
    pub fn inner_dofs(&self) -> Vec<usize> {
        let mut is_b = vec![false; self.n_dofs()];
        for &d in &self.boundary_dofs {
            is_b[d] = true;
        }
        (0..self.n_dofs()).filter(|&d| !is_b[d]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_dofs();
        if self.mass.dim() != n || self.dof_map.len() != n || self.preload.len() != n {
            return Err(Error::InvalidInput(format!(
                "inconsistent model sizes: K {n}, M {}, DOF map {}, load {}",
                self.mass.dim(),
                self.dof_map.len(),
                self.preload.len()
            )));
        }
        let mut seen = vec![false; n];
        for &d in &self.boundary_dofs {
            if d >= n {
                return Err(Error::InvalidInput(format!(
                    "boundary DOF {d} out of range (n = {n})"
                )));
            }
            if std::mem::replace(&mut seen[d], true) {
                return Err(Error::InvalidInput(format!(
                    "boundary DOF {d} listed twice"
                )));
            }
        }
        for (what, a) in [("stiffness", &self.stiffness), ("mass", &self.mass)] {
            let asym = a.asymmetry();
            if asym > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "{what} matrix is not symmetric (relative asymmetry {asym:e})"
                )));
            }
        }
        Ok(())
    }
}

/// Replaces `q_a` by the relative coordinate `q_a - q_b` for every pair
/// `(dof_a, dof_b)`. The relative DOFs become the boundary set.
pub fn relative_transform(model: &FeModel, pairs: &[(usize, usize)]) -> Result<FeModel> {
    if pairs.is_empty() {
        return Ok(model.clone());
    }
    let n = model.n_dofs();
    let mut partner: Vec<Option<usize>> = vec![None; n];
    let mut used = vec![false; n];
    for &(a, b) in pairs {
        if a >= n || b >= n {
            return Err(Error::InvalidInput(format!(
                "pair ({a}, {b}) out of range (n = {n})"
            )));
        }
        for d in [a, b] {
            if std::mem::replace(&mut used[d], true) {
                return Err(Error::InvalidInput(format!(
                    "DOF {d} appears in more than one pair"
                )));
            }
        }
        partner[a] = Some(b);
    }
    // old q = T q', old_a = new_a + new_b
    let expand = |i: usize| -> ([usize; 2], usize) {
        match partner[i] {
            Some(b) => ([i, b], 2),
            None => ([i, i], 1),
        }
    };
    let congruence = |a: &SparseSym| -> Result<SparseSym> {
        let mut t = Vec::with_capacity(4 * a.nnz());
        for (i, j, v) in a.iter() {
            let (ci, ni) = expand(i);
            let (cj, nj) = expand(j);
            for &k in &ci[..ni] {
                for &l in &cj[..nj] {
                    t.push((k, l, v));
                }
            }
        }
        SparseSym::from_triplets(n, &t)
    };
    let mut preload = model.preload.clone();
    for &(a, b) in pairs {
        preload[b] += model.preload[a];
    }
    Ok(FeModel {
        mass: congruence(&model.mass)?,
        stiffness: congruence(&model.stiffness)?,
        boundary_dofs: pairs.iter().map(|p| p.0).collect(),
        dof_map: model.dof_map.clone(),
        preload,
    })
}

/// Reduced model in coordinates `[q_b; η]`.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub m_red: DMat,
    pub k_red: DMat,
    pub f_red: Vec<f64>,
    /// Constraint modes `Ψ = -K_ii⁻¹ K_ib` (inner × boundary).
    pub psi: DMat,
    /// Mass-normalized fixed-interface modes (inner × modes).
    pub theta: DMat,
    /// Fixed-interface angular frequencies [rad/s], ascending.
    pub omega: Vec<f64>,
    pub boundary_dofs: Vec<usize>,
    pub inner_dofs: Vec<usize>,
    pub n_dofs: usize,
}

impl ReducedModel {
    pub fn n_boundary(&self) -> usize {
        self.boundary_dofs.len()
    }

    pub fn n_modes(&self) -> usize {
        self.theta.ncols()
    }

    pub fn dim(&self) -> usize {
        self.n_boundary() + self.n_modes()
    }

    pub fn k_bb(&self) -> DMat {
        let nb = self.n_boundary();
        self.k_red.as_ref().submatrix(0, 0, nb, nb).to_owned()
    }

    /// `Rᵀ f` for a load over the parent DOFs.
    pub fn reduce_load(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n_dofs);
        let fi: Vec<f64> = self.inner_dofs.iter().map(|&d| f[d]).collect();
        let mut out: Vec<f64> = self.boundary_dofs.iter().map(|&d| f[d]).collect();
        for (x, y) in out.iter_mut().zip(matvec(self.psi.transpose(), &fi)) {
            *x += y;
        }
        out.extend(matvec(self.theta.transpose(), &fi));
        out
    }

    /// Parent-model displacements `R q̃`.
    pub fn expand(&self, q: &[f64]) -> Vec<f64> {
        let nb = self.n_boundary();
        assert_eq!(q.len(), self.dim());
        let mut full = vec![0.0; self.n_dofs];
        for (k, &d) in self.boundary_dofs.iter().enumerate() {
            full[d] = q[k];
        }
        let qi = matvec(self.psi.as_ref(), &q[..nb]);
        let qm = matvec(self.theta.as_ref(), &q[nb..]);
        for (k, &d) in self.inner_dofs.iter().enumerate() {
            full[d] = qi[k] + qm[k];
        }
        full
    }

    /// Rows of `R` for selected parent DOFs.
    pub fn basis_rows(&self, dofs: &[usize]) -> DMat {
        let nb = self.n_boundary();
        let bpos: HashMap<usize, usize> = self
            .boundary_dofs
            .iter()
            .enumerate()
            .map(|(k, &d)| (d, k))
            .collect();
        let ipos: HashMap<usize, usize> = self
            .inner_dofs
            .iter()
            .enumerate()
            .map(|(k, &d)| (d, k))
            .collect();
        Mat::from_fn(dofs.len(), self.dim(), |r, c| {
            let d = dofs[r];
            if let Some(&k) = bpos.get(&d) {
                return if c == k { 1.0 } else { 0.0 };
            }
            let k = ipos[&d];
            if c < nb {
                self.psi[(k, c)]
            } else {
                self.theta[(k, c - nb)]
            }
        })
    }
}

pub fn craig_bampton(model: &FeModel, n_modes: usize) -> Result<ReducedModel> {
    model.validate()?;
    let b = model.boundary_dofs.clone();
    let i = model.inner_dofs();
    if n_modes > i.len() {
        return Err(Error::InvalidInput(format!(
            "{n_modes} fixed-interface modes requested but only {} inner DOFs exist",
            i.len()
        )));
    }
    let (nb, nm) = (b.len(), n_modes);
    let k = &model.stiffness;
    let m = &model.mass;
    let k_ii = k.block(&i, &i);
    let k_ib = k.block(&i, &b);
    let k_bb = k.block(&b, &b);
    let m_ii = m.block(&i, &i);
    let m_ib = m.block(&i, &b);
    let m_bb = m.block(&b, &b);

    let chol = SpdFactor::new(k_ii.as_ref(), "inner stiffness").map_err(|_| {
        Error::Singular(
            "inner stiffness block K_ii is singular: the structure is not constrained once the \
             boundary DOFs are fixed; review the boundary conditions"
                .into(),
        )
    })?;
    let psi = -chol.solve_mat(k_ib.as_ref());

    let (vals, theta) = gen_sym_eigen_lowest(k_ii.as_ref(), m_ii.as_ref(), nm)?;
    let omega: Vec<f64> = vals.iter().map(|&l| l.max(0.0).sqrt()).collect();

    // K R and M R restricted to the inner rows
    let xk = &k_ib + &k_ii * &psi;
    let xm = &m_ib + &m_ii * &psi;
    let mut k_red = Mat::zeros(nb + nm, nb + nm);
    let mut m_red = Mat::zeros(nb + nm, nb + nm);
    let kbb = &k_bb + k_ib.transpose() * &psi + psi.transpose() * &xk;
    let mbb = &m_bb + m_ib.transpose() * &psi + psi.transpose() * &xm;
    let kbe = xk.transpose() * &theta;
    let mbe = xm.transpose() * &theta;
    let kee = theta.transpose() * (&k_ii * &theta);
    let mee = theta.transpose() * (&m_ii * &theta);
    k_red.as_mut().submatrix_mut(0, 0, nb, nb).copy_from(&kbb);
    m_red.as_mut().submatrix_mut(0, 0, nb, nb).copy_from(&mbb);
    k_red.as_mut().submatrix_mut(0, nb, nb, nm).copy_from(&kbe);
    m_red.as_mut().submatrix_mut(0, nb, nb, nm).copy_from(&mbe);
    k_red
        .as_mut()
        .submatrix_mut(nb, 0, nm, nb)
        .copy_from(kbe.transpose());
    m_red
        .as_mut()
        .submatrix_mut(nb, 0, nm, nb)
        .copy_from(mbe.transpose());
    k_red.as_mut().submatrix_mut(nb, nb, nm, nm).copy_from(&kee);
    m_red.as_mut().submatrix_mut(nb, nb, nm, nm).copy_from(&mee);
    symmetrize(&mut k_red);
    symmetrize(&mut m_red);

    let mut red = ReducedModel {
        m_red,
        k_red,
        f_red: Vec::new(),
        psi,
        theta,
        omega,
        boundary_dofs: b,
        inner_dofs: i,
        n_dofs: model.n_dofs(),
    };
    red.f_red = red.reduce_load(&model.preload);
    Ok(red)
}

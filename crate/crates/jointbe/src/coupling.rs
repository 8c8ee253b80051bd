//! FE-BE coupling: the map `W_b` and static condensation onto the contact grid.

use std::collections::HashMap;

use faer::{Mat, MatRef};

use crate::contact::ContactOperator;
use crate::error::{Error, Result};
use crate::halfspace::ComplianceMatrix;
use crate::linalg::{matvec, max_abs, orthonormalize, symmetrize, DMat, GroupedFactor, SpdFactor};
use crate::rom::ReducedModel;

/// Interface node with the model DOFs of its (x, y, z) displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceNode {
    pub xy: [f64; 2],
    pub dofs: [usize; 3],
}

/// Axis-aligned rectangular partition of the interface, faces numbered `u + nu·v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularLayout {
    pub origin: [f64; 2],
    pub pitch: [f64; 2],
    pub counts: [usize; 2],
}

/// Bilinear quadrilateral surface mesh of the FE interface, nodes counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceMesh {
    pub nodes: Vec<InterfaceNode>,
    pub faces: Vec<[usize; 4]>,
    pub regular: Option<RegularLayout>,
}

const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

fn bilinear(xi: [f64; 2]) -> ([f64; 4], [[f64; 2]; 4]) {
    let mut n = [0.0; 4];
    let mut d = [[0.0; 2]; 4];
    for (a, c) in CORNERS.iter().enumerate() {
        n[a] = 0.25 * (1.0 + c[0] * xi[0]) * (1.0 + c[1] * xi[1]);
        d[a] = [
            0.25 * c[0] * (1.0 + c[1] * xi[1]),
            0.25 * c[1] * (1.0 + c[0] * xi[0]),
        ];
    }
    (n, d)
}

impl InterfaceMesh {
    fn face_xy(&self, f: usize) -> [[f64; 2]; 4] {
        std::array::from_fn(|a| self.nodes[self.faces[f][a]].xy)
    }

    /// Inverse bilinear map by Newton iteration; `None` if it fails to converge.
    pub fn local_coords(&self, f: usize, p: [f64; 2]) -> Option<[f64; 2]> {
        let x = self.face_xy(f);
        let mut xi = [0.0, 0.0];
        for _ in 0..50 {
            let (n, d) = bilinear(xi);
            let mut r = [-p[0], -p[1]];
            let mut j = [[0.0; 2]; 2];
            for a in 0..4 {
                for c in 0..2 {
                    r[c] += n[a] * x[a][c];
                    for k in 0..2 {
                        j[c][k] += x[a][c] * d[a][k];
                    }
                }
            }
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() < f64::MIN_POSITIVE {
                return None;
            }
            let dx = [
                (j[1][1] * r[0] - j[0][1] * r[1]) / det,
                (-j[1][0] * r[0] + j[0][0] * r[1]) / det,
            ];
            xi[0] -= dx[0];
            xi[1] -= dx[1];
            if dx[0].abs().max(dx[1].abs()) < 1e-12 {
                return Some(xi);
            }
        }
        None
    }

    /// Lowest-ID face containing `p` (within `tol` metres) and the local coordinates.
    pub fn locate(&self, p: [f64; 2], tol: f64) -> Option<(usize, [f64; 2])> {
        if let Some(r) = self.regular {
            let mut cand = Vec::new();
            let range = |k: usize| -> Vec<usize> {
                let lo = ((p[k] - tol - r.origin[k]) / r.pitch[k]).floor().max(0.0) as i64;
                let hi = ((p[k] + tol - r.origin[k]) / r.pitch[k]).floor() as i64;
                (lo..=hi)
                    .filter(|&u| u >= 0 && (u as usize) < r.counts[k])
                    .map(|u| u as usize)
                    .collect()
            };
            for v in range(1) {
                for u in range(0) {
                    cand.push(u + r.counts[0] * v);
                }
            }
            cand.sort_unstable();
            for f in cand {
                if let Some(xi) = self.inside(f, p, tol) {
                    return Some((f, xi));
                }
            }
            return None;
        }
        (0..self.faces.len()).find_map(|f| self.inside(f, p, tol).map(|xi| (f, xi)))
    }

    fn inside(&self, f: usize, p: [f64; 2], tol: f64) -> Option<[f64; 2]> {
        let x = self.face_xy(f);
        let lo = [0, 1].map(|c| x.iter().map(|q| q[c]).fold(f64::INFINITY, f64::min));
        let hi = [0, 1].map(|c| x.iter().map(|q| q[c]).fold(f64::NEG_INFINITY, f64::max));
        if p[0] < lo[0] - tol || p[0] > hi[0] + tol || p[1] < lo[1] - tol || p[1] > hi[1] + tol {
            return None;
        }
        let xi = self.local_coords(f, p)?;
        let size = (hi[0] - lo[0]).min(hi[1] - lo[1]);
        let slack = 2.0 * tol / size + 1e-12;
        if xi[0].abs() <= 1.0 + slack && xi[1].abs() <= 1.0 + slack {
            Some([xi[0].clamp(-1.0, 1.0), xi[1].clamp(-1.0, 1.0)])
        } else {
            None
        }
    }

    /// Tributary area of every node (a quarter of each adjacent face).
    pub fn nodal_areas(&self) -> Vec<f64> {
        let mut areas = vec![0.0; self.nodes.len()];
        for f in 0..self.faces.len() {
            let x = self.face_xy(f);
            let mut a = 0.0;
            for k in 0..4 {
                let (p, q) = (x[k], x[(k + 1) % 4]);
                a += p[0] * q[1] - q[0] * p[1];
            }
            for &n in &self.faces[f] {
                areas[n] += 0.125 * a.abs();
            }
        }
        areas
    }
}

/// `W_b` (boundary DOFs × 3C) with per-point face assignment and weights.
#[derive(Debug, Clone)]
pub struct CouplingMap {
    pub w_b: DMat,
    pub assignment: Vec<usize>,
    pub weights: Vec<[f64; 4]>,
}

/// Point tolerance for the point-in-face search [m].
pub const LOCATE_TOL: f64 = 1e-9;

fn boundary_positions(boundary_dofs: &[usize]) -> HashMap<usize, usize> {
    boundary_dofs
        .iter()
        .enumerate()
        .map(|(k, &d)| (d, k))
        .collect()
}

fn row_of(pos: &HashMap<usize, usize>, dof: usize) -> Result<usize> {
    pos.get(&dof).copied().ok_or_else(|| {
        Error::InvalidInput(format!(
            "interface DOF {dof} is not a boundary DOF of the reduced model"
        ))
    })
}

/// Contact component `c` (normal, t1, t2) acts along Cartesian direction `(z, x, y)[c]`.
const COMPONENT_DIR: [usize; 3] = [2, 0, 1];

pub fn build_coupling(
    reduced: &ReducedModel,
    points: &[[f64; 2]],
    mesh: &InterfaceMesh,
) -> Result<CouplingMap> {
    let pos = boundary_positions(&reduced.boundary_dofs);
    let mut w = Mat::zeros(reduced.n_boundary(), 3 * points.len());
    let mut assignment = Vec::with_capacity(points.len());
    let mut weights = Vec::with_capacity(points.len());
    for (j, &p) in points.iter().enumerate() {
        let (f, xi) = mesh.locate(p, LOCATE_TOL).ok_or_else(|| {
            Error::InvalidInput(format!(
                "contact point {j} at ({:e}, {:e}) lies outside every interface face",
                p[0], p[1]
            ))
        })?;
        let (n, _) = bilinear(xi);
        for (a, &node) in mesh.faces[f].iter().enumerate() {
            for c in 0..3 {
                let row = row_of(&pos, mesh.nodes[node].dofs[COMPONENT_DIR[c]])?;
                w[(row, 3 * j + c)] += n[a];
            }
        }
        assignment.push(f);
        weights.push(n);
    }
    Ok(CouplingMap {
        w_b: w,
        assignment,
        weights,
    })
}

/// Node-based coupling: one contact point per interface node with its
/// tributary area and identity force directions.
pub fn node_coupling(
    reduced: &ReducedModel,
    mesh: &InterfaceMesh,
) -> Result<(CouplingMap, Vec<[f64; 2]>, Vec<f64>)> {
    let pos = boundary_positions(&reduced.boundary_dofs);
    let c = mesh.nodes.len();
    let mut w = Mat::zeros(reduced.n_boundary(), 3 * c);
    for (j, node) in mesh.nodes.iter().enumerate() {
        for k in 0..3 {
            w[(row_of(&pos, node.dofs[COMPONENT_DIR[k]])?, 3 * j + k)] = 1.0;
        }
    }
    let map = CouplingMap {
        w_b: w,
        assignment: (0..c).collect(),
        weights: vec![[1.0, 0.0, 0.0, 0.0]; c],
    };
    Ok((
        map,
        mesh.nodes.iter().map(|n| n.xy).collect(),
        mesh.nodal_areas(),
    ))
}

#[derive(Debug, Clone, Default)]
pub struct CondenseOptions {
    /// Rigid-structure limit: `C* = C` and no FE response is kept.
    pub rigid_structure: bool,
    /// Zero-energy modes of `K̃_bb` as columns over the boundary DOFs.
    pub floating: Option<DMat>,
}

/// `K̃_bb` pseudo-inverse on the complement of the floating modes.
#[derive(Debug)]
struct BoundaryFlex {
    factor: SpdFactor,
    /// Orthonormalized floating basis and its regularization shift.
    phi_hat: Option<(DMat, f64)>,
}

impl BoundaryFlex {
    fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut x = self.factor.solve(f);
        if let Some((p, s)) = &self.phi_hat {
            let c = matvec(p.transpose(), f);
            let corr = matvec(p.as_ref(), &c);
            for (a, b) in x.iter_mut().zip(corr) {
                *a -= b / s;
            }
        }
        x
    }

    fn apply_mat(&self, f: MatRef<'_, f64>) -> DMat {
        let mut x = self.factor.solve_mat(f);
        if let Some((p, s)) = &self.phi_hat {
            let c = p.transpose() * f;
            x -= (p * c) * faer::Scale(1.0 / s);
        }
        x
    }
}

/// Condensed static system on the contact grid.
#[derive(Debug)]
pub struct CondensedSystem {
    pub c_star: DMat,
    pub point_index: Vec<usize>,
    pub element_area: Vec<f64>,
    /// Composite height per retained point.
    pub h: Vec<f64>,
    pub w_b: DMat,
    /// Declared floating modes `Φ_b` and `N = W_bᵀ Φ_b`.
    pub phi: Option<DMat>,
    pub n_rigid: Option<DMat>,
    flex: Option<BoundaryFlex>,
    /// `K̃_bb⁺ W_b`
    kw: Option<DMat>,
}

pub fn condense_static(
    reduced: &ReducedModel,
    coupling: &CouplingMap,
    compliance: &ComplianceMatrix,
    h: &[f64],
    opts: &CondenseOptions,
) -> Result<CondensedSystem> {
    let nb = reduced.n_boundary();
    let c3 = 3 * compliance.n_points();
    if coupling.w_b.nrows() != nb || coupling.w_b.ncols() != c3 || h.len() != compliance.n_points()
    {
        return Err(Error::InvalidInput(format!(
            "size mismatch: W_b is {}x{}, expected {nb}x{c3}; {} heights for {} points",
            coupling.w_b.nrows(),
            coupling.w_b.ncols(),
            h.len(),
            compliance.n_points()
        )));
    }
    let mut c_star = compliance.entries.clone();
    let (mut flex, mut kw, mut phi, mut n_rigid) = (None, None, None, None);
    if !opts.rigid_structure {
        let kbb = reduced.k_bb();
        let scale = max_abs(kbb.as_ref()).max(f64::MIN_POSITIVE);
        let mut kreg = kbb.clone();
        let mut phi_hat = None;
        if let Some(p) = &opts.floating {
            if p.nrows() != nb {
                return Err(Error::InvalidInput(
                    "floating modes must have one row per boundary DOF".into(),
                ));
            }
            let q = orthonormalize(p.as_ref(), 1e-10)?;
            let leak = max_abs((&kbb * &q).as_ref());
            if leak > 1e-8 * scale {
                return Err(Error::InvalidInput(format!(
                    "declared floating modes are not zero-energy modes of K_bb (relative residual {:e})",
                    leak / scale
                )));
            }
            kreg += (&q * q.transpose()) * faer::Scale(scale);
            phi_hat = Some((q, scale));
            n_rigid = Some(coupling.w_b.transpose() * p);
            phi = Some(p.clone());
        }
        let factor = SpdFactor::new(kreg.as_ref(), "K_bb").map_err(|_| {
            Error::Singular("reduced boundary stiffness K_bb is singular; declare its floating modes or add constraints".into())
        })?;
        let f = BoundaryFlex { factor, phi_hat };
        let kwm = f.apply_mat(coupling.w_b.as_ref());
        c_star += coupling.w_b.transpose() * &kwm;
        flex = Some(f);
        kw = Some(kwm);
    }
    symmetrize(&mut c_star);
    if phi.is_none() && c3 > 0 {
        SpdFactor::new(c_star.as_ref(), "C*")?;
    }
    Ok(CondensedSystem {
        c_star,
        point_index: compliance.point_index.clone(),
        element_area: compliance.element_area.clone(),
        h: h.to_vec(),
        w_b: coupling.w_b.clone(),
        phi,
        n_rigid,
        flex,
        kw,
    })
}

impl CondensedSystem {
    /// Two rigid bodies separated by the half-space compliance only.
    ///
    /// `rigid` holds force-controlled rigid-body modes as columns over the
    /// 3C contact unknowns; their loads are supplied directly by the caller.
    pub fn rigid_bodies(
        compliance: &ComplianceMatrix,
        h: &[f64],
        rigid: Option<DMat>,
    ) -> Result<Self> {
        let c3 = 3 * compliance.n_points();
        if h.len() != compliance.n_points() || rigid.as_ref().is_some_and(|n| n.nrows() != c3) {
            return Err(Error::InvalidInput(
                "rigid-body system size mismatch".into(),
            ));
        }
        let mut c_star = compliance.entries.clone();
        symmetrize(&mut c_star);
        let comp: Vec<usize> = (0..c3).map(|k| k % 3).collect();
        GroupedFactor::new(c_star.as_ref(), &comp, 3, "half-space compliance")?;
        Ok(Self {
            c_star,
            point_index: compliance.point_index.clone(),
            element_area: compliance.element_area.clone(),
            h: h.to_vec(),
            w_b: Mat::zeros(0, c3),
            phi: None,
            n_rigid: rigid,
            flex: None,
            kw: None,
        })
    }

    pub fn n_points(&self) -> usize {
        self.h.len()
    }

    pub fn n_rigid(&self) -> usize {
        self.n_rigid.as_ref().map_or(0, |n| n.ncols())
    }

    pub fn operator(&self) -> ContactOperator<'_> {
        ContactOperator {
            c_star: self.c_star.as_ref(),
            rigid: self.n_rigid.as_ref().map(|n| n.as_ref()),
        }
    }

    /// Load-dependent part of the imposed gap, `W_bᵀ K̃_bb⁺ f_b`, without `-h`.
    pub fn imposed_gap(&self, f_b: &[f64]) -> Vec<f64> {
        match &self.kw {
            Some(kw) => matvec(kw.transpose(), f_b),
            None => vec![0.0; 3 * self.n_points()],
        }
    }

    /// `g_ex = W_bᵀ K̃_bb⁺ f_b - h` (heights on the normal rows).
    pub fn g_ex(&self, f_b: &[f64]) -> Vec<f64> {
        let mut g = self.imposed_gap(f_b);
        for (j, hj) in self.h.iter().enumerate() {
            g[3 * j] -= hj;
        }
        g
    }

    /// Load carried by the floating modes, `-Φ_bᵀ f_b`.
    pub fn rigid_load(&self, f_b: &[f64]) -> Vec<f64> {
        match &self.phi {
            Some(p) => matvec(p.transpose(), f_b).into_iter().map(|v| -v).collect(),
            None => Vec::new(),
        }
    }

    /// Relative residual of `Nᵀ λ = F` for the total rigid-mode load `F`;
    /// zero when no rigid mode is present.
    pub fn rigid_balance(&self, load: &[f64], lambda: &[f64]) -> f64 {
        let Some(n) = &self.n_rigid else {
            return 0.0;
        };
        let mut worst: f64 = 0.0;
        for q in 0..n.ncols() {
            let (mut r, mut s) = (-load[q], load[q].abs());
            for i in 0..n.nrows() {
                r += n[(i, q)] * lambda[i];
                s += (n[(i, q)] * lambda[i]).abs();
            }
            if s > 0.0 {
                worst = worst.max(r.abs() / s);
            }
        }
        worst
    }

    /// Boundary displacements `q_b = K̃_bb⁺ (f_b + W_b λ) + Φ_b a`.
    pub fn boundary_displacement(&self, f_b: &[f64], lambda: &[f64], a: &[f64]) -> Vec<f64> {
        let Some(flex) = &self.flex else {
            return vec![0.0; self.w_b.nrows()];
        };
        let mut rhs = matvec(self.w_b.as_ref(), lambda);
        for (x, f) in rhs.iter_mut().zip(f_b) {
            *x += f;
        }
        let mut q = flex.apply(&rhs);
        if let Some(p) = &self.phi {
            for (x, v) in q.iter_mut().zip(matvec(p.as_ref(), a)) {
                *x += v;
            }
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_mesh(n: usize, h: f64) -> InterfaceMesh {
        let nodes = (0..(n + 1) * (n + 1))
            .map(|k| InterfaceNode {
                xy: [(k % (n + 1)) as f64 * h, (k / (n + 1)) as f64 * h],
                dofs: [3 * k, 3 * k + 1, 3 * k + 2],
            })
            .collect();
        let id = |u: usize, v: usize| u + (n + 1) * v;
        let faces = (0..n * n).map(|f| {
            let (u, v) = (f % n, f / n);
            [id(u, v), id(u + 1, v), id(u + 1, v + 1), id(u, v + 1)]
        });
        InterfaceMesh {
            nodes,
            faces: faces.collect(),
            regular: Some(RegularLayout {
                origin: [0.0, 0.0],
                pitch: [h, h],
                counts: [n, n],
            }),
        }
    }

    #[test]
    fn locate_prefers_lowest_face_on_edges() {
        let mut m = square_mesh(3, 1.0);
        assert_eq!(m.locate([1.0, 0.5], LOCATE_TOL).unwrap().0, 0);
        assert_eq!(m.locate([1.0, 1.0], LOCATE_TOL).unwrap().0, 0);
        assert_eq!(m.locate([2.5, 2.5], LOCATE_TOL).unwrap().0, 8);
        assert!(m.locate([3.1, 0.5], LOCATE_TOL).is_none());
        m.regular = None;
        assert_eq!(m.locate([1.0, 1.0], LOCATE_TOL).unwrap().0, 0);
        assert_eq!(m.locate([2.5, 0.5], LOCATE_TOL).unwrap().0, 2);
    }

    #[test]
    fn nodal_areas_sum_to_total() {
        let m = square_mesh(4, 0.5);
        let a = m.nodal_areas();
        assert!((a.iter().sum::<f64>() - 4.0).abs() < 1e-14);
        assert!((a[0] - 0.0625).abs() < 1e-15);
    }
}

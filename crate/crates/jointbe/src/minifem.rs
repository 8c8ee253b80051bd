//! Small hexahedral FE models: single blocks and a two-block lap joint.

use crate::coupling::{InterfaceMesh, InterfaceNode, RegularLayout};
use crate::error::{Error, Result};
use crate::rom::{DofInfo, FeModel};
use crate::sparse::SparseSym;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub density: f64,
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        if !(self.youngs_modulus > 0.0)
            || !(self.density > 0.0)
            || !(0.0..0.5).contains(&self.poisson_ratio)
        {
            return Err(Error::InvalidInput(format!("invalid material {self:?}")));
        }
        Ok(())
    }
}

/// Element formulation. Both use trilinear 8-node bricks; the incompatible-mode
/// variant adds nine condensed internal bending modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ElementKind {
    Standard,
    #[default]
    IncompatibleModes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl Face {
    fn axis(self) -> usize {
        match self {
            Face::XMin | Face::XMax => 0,
            Face::YMin | Face::YMax => 1,
            Face::ZMin | Face::ZMax => 2,
        }
    }

    fn is_max(self) -> bool {
        matches!(self, Face::XMax | Face::YMax | Face::ZMax)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceConstraint {
    pub face: Face,
    /// Fixed directions (x, y, z).
    pub directions: [bool; 3],
}

impl FaceConstraint {
    pub fn clamped(face: Face) -> Self {
        Self {
            face,
            directions: [true; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrickMeshSpec {
    pub origin: [f64; 3],
    pub extents: [f64; 3],
    pub counts: [usize; 3],
    pub material: Material,
    pub element: ElementKind,
    pub fixed: Vec<FaceConstraint>,
    pub interface: Option<Face>,
}

/// Generated block with its geometry.
#[derive(Debug, Clone)]
pub struct BrickBlock {
    pub model: FeModel,
    pub nodes: Vec<[f64; 3]>,
    pub node_dofs: Vec<[Option<usize>; 3]>,
    pub counts: [usize; 3],
}

const NAT: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

fn shape(xi: [f64; 3]) -> ([f64; 8], [[f64; 3]; 8]) {
    let mut n = [0.0; 8];
    let mut d = [[0.0; 3]; 8];
    for (a, c) in NAT.iter().enumerate() {
        let f = [1.0 + c[0] * xi[0], 1.0 + c[1] * xi[1], 1.0 + c[2] * xi[2]];
        n[a] = 0.125 * f[0] * f[1] * f[2];
        d[a] = [
            0.125 * c[0] * f[1] * f[2],
            0.125 * c[1] * f[0] * f[2],
            0.125 * c[2] * f[0] * f[1],
        ];
    }
    (n, d)
}

/// `J[i][j] = ∂x_j/∂ξ_i`; returns the inverse and determinant.
fn jacobian(coords: &[[f64; 3]; 8], dn: &[[f64; 3]; 8]) -> ([[f64; 3]; 3], f64) {
    let mut j = [[0.0; 3]; 3];
    for a in 0..8 {
        for r in 0..3 {
            for c in 0..3 {
                j[r][c] += dn[a][r] * coords[a][c];
            }
        }
    }
    let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
        - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            inv[r][c] = (j[r1][c1] * j[r2][c2] - j[r1][c2] * j[r2][c1]) / det;
        }
    }
    (inv, det)
}

/// Physical gradient `∂/∂x_j = Σ_i invJ[j][i] ∂/∂ξ_i`.
fn to_physical(inv: &[[f64; 3]; 3], g: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (j, o) in out.iter_mut().enumerate() {
        *o = (0..3).map(|i| inv[j][i] * g[i]).sum();
    }
    out
}

fn elasticity(mat: &Material) -> [[f64; 6]; 6] {
    let (e, nu) = (mat.youngs_modulus, mat.poisson_ratio);
    let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let g = e / (2.0 * (1.0 + nu));
    let mut d = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            d[i][j] = lam;
        }
        d[i][i] = lam + 2.0 * g;
        d[i + 3][i + 3] = g;
    }
    d
}

/// Strain columns (xx, yy, zz, xy, yz, zx) of one vector-valued shape function.
fn b_columns(g: [f64; 3]) -> [[f64; 6]; 3] {
    [
        [g[0], 0.0, 0.0, g[1], 0.0, g[2]],
        [0.0, g[1], 0.0, g[0], g[2], 0.0],
        [0.0, 0.0, g[2], 0.0, g[1], g[0]],
    ]
}

fn btdb(bi: &[f64; 6], d: &[[f64; 6]; 6], bj: &[f64; 6]) -> f64 {
    let mut s = 0.0;
    for p in 0..6 {
        if bi[p] == 0.0 {
            continue;
        }
        let mut t = 0.0;
        for q in 0..6 {
            t += d[p][q] * bj[q];
        }
        s += bi[p] * t;
    }
    s
}

type ElemMat = Vec<[f64; 24]>;

/// Element stiffness and consistent mass, 2×2×2 Gauss.
pub fn hex8_matrices(
    coords: &[[f64; 3]; 8],
    mat: &Material,
    kind: ElementKind,
) -> Result<(ElemMat, ElemMat)> {
    let d = elasticity(mat);
    let gp = 1.0 / 3.0_f64.sqrt();
    let mut k = vec![[0.0; 24]; 24];
    let mut m = vec![[0.0; 24]; 24];
    let mut kci = vec![[0.0; 9]; 24];
    let mut kii = [[0.0; 9]; 9];
    let (_, dn0) = shape([0.0; 3]);
    let (inv0, det0) = jacobian(coords, &dn0);
    for &s0 in &[-gp, gp] {
        for &s1 in &[-gp, gp] {
            for &s2 in &[-gp, gp] {
                let xi = [s0, s1, s2];
                let (n, dn) = shape(xi);
                let (inv, det) = jacobian(coords, &dn);
                if !(det > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "degenerate element (Jacobian determinant {det:e})"
                    )));
                }
                let cols: Vec<[f64; 6]> = (0..8)
                    .flat_map(|a| b_columns(to_physical(&inv, dn[a])))
                    .collect();
                for r in 0..24 {
                    for c in r..24 {
                        let v = btdb(&cols[r], &d, &cols[c]) * det;
                        k[r][c] += v;
                        if r != c {
                            k[c][r] += v;
                        }
                    }
                }
                for a in 0..8 {
                    for b in 0..8 {
                        let v = mat.density * n[a] * n[b] * det;
                        for dir in 0..3 {
                            m[3 * a + dir][3 * b + dir] += v;
                        }
                    }
                }
                if kind == ElementKind::IncompatibleModes {
                    // P_k = 1 - ξ_k², gradients mapped with the centre Jacobian
                    let scale = det0 / det;
                    let inc: Vec<[f64; 6]> = (0..3)
                        .flat_map(|kk| {
                            let mut g = [0.0; 3];
                            g[kk] = -2.0 * xi[kk] * scale;
                            b_columns(to_physical(&inv0, g))
                        })
                        .collect();
                    for r in 0..24 {
                        for c in 0..9 {
                            kci[r][c] += btdb(&cols[r], &d, &inc[c]) * det;
                        }
                    }
                    for r in 0..9 {
                        for c in 0..9 {
                            kii[r][c] += btdb(&inc[r], &d, &inc[c]) * det;
                        }
                    }
                }
            }
        }
    }
    if kind == ElementKind::IncompatibleModes {
        let kinv = invert9(&kii)?;
        for r in 0..24 {
            let mut t = [0.0; 9];
            for (p, tp) in t.iter_mut().enumerate() {
                *tp = (0..9).map(|q| kinv[p][q] * kci[r][q]).sum();
            }
            for c in 0..24 {
                k[r][c] -= (0..9).map(|p| kci[c][p] * t[p]).sum::<f64>();
            }
        }
        for r in 0..24 {
            for c in (r + 1)..24 {
                let v = 0.5 * (k[r][c] + k[c][r]);
                k[r][c] = v;
                k[c][r] = v;
            }
        }
    }
    Ok((k, m))
}

fn invert9(a: &[[f64; 9]; 9]) -> Result<[[f64; 9]; 9]> {
    let mut aug = [[0.0; 18]; 9];
    for i in 0..9 {
        aug[i][..9].copy_from_slice(&a[i]);
        aug[i][9 + i] = 1.0;
    }
    for col in 0..9 {
        let piv = (col..9)
            .max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))
            .expect("non-empty range");
        if aug[piv][col].abs() < 1e-300 {
            return Err(Error::InvalidInput(
                "degenerate element (singular internal modes)".into(),
            ));
        }
        aug.swap(col, piv);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for r in 0..9 {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for c in 0..18 {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    let mut inv = [[0.0; 9]; 9];
    for i in 0..9 {
        inv[i].copy_from_slice(&aug[i][9..]);
    }
    Ok(inv)
}

impl BrickMeshSpec {
    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        if self.counts.iter().any(|&c| c == 0) {
            return Err(Error::InvalidInput(format!(
                "element counts must be >= 1, got {:?}",
                self.counts
            )));
        }
        if self.extents.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "extents must be positive, got {:?}",
                self.extents
            )));
        }
        Ok(())
    }

    fn node_id(&self, i: usize, j: usize, k: usize) -> usize {
        let [ex, ey, _] = self.counts;
        i + (ex + 1) * (j + (ey + 1) * k)
    }

    fn on_face(&self, idx: [usize; 3], face: Face) -> bool {
        let a = face.axis();
        if face.is_max() {
            idx[a] == self.counts[a]
        } else {
            idx[a] == 0
        }
    }
}

pub fn build_brick_model(spec: &BrickMeshSpec) -> Result<FeModel> {
    Ok(build_brick_block(spec)?.model)
}

pub fn build_brick_block(spec: &BrickMeshSpec) -> Result<BrickBlock> {
    spec.validate()?;
    let [ex, ey, ez] = spec.counts;
    let h = [
        spec.extents[0] / ex as f64,
        spec.extents[1] / ey as f64,
        spec.extents[2] / ez as f64,
    ];
    let n_nodes = (ex + 1) * (ey + 1) * (ez + 1);
    let mut nodes = vec![[0.0; 3]; n_nodes];
    let mut fixed = vec![[false; 3]; n_nodes];
    let mut on_interface = vec![false; n_nodes];
    for k in 0..=ez {
        for j in 0..=ey {
            for i in 0..=ex {
                let id = spec.node_id(i, j, k);
                let idx = [i, j, k];
                for a in 0..3 {
                    nodes[id][a] = spec.origin[a] + idx[a] as f64 * h[a];
                }
                for fc in &spec.fixed {
                    if spec.on_face(idx, fc.face) {
                        for a in 0..3 {
                            fixed[id][a] |= fc.directions[a];
                        }
                    }
                }
                if let Some(f) = spec.interface {
                    on_interface[id] = spec.on_face(idx, f);
                }
            }
        }
    }
    let mut node_dofs = vec![[None; 3]; n_nodes];
    let mut dof_map = Vec::new();
    for (id, nd) in node_dofs.iter_mut().enumerate() {
        for a in 0..3 {
            if !fixed[id][a] {
                nd[a] = Some(dof_map.len());
                dof_map.push(DofInfo {
                    node: id,
                    direction: a,
                });
            }
        }
    }
    let n = dof_map.len();
    let mut kt = Vec::new();
    let mut mt = Vec::new();
    for k in 0..ez {
        for j in 0..ey {
            for i in 0..ex {
                let conn = [
                    spec.node_id(i, j, k),
                    spec.node_id(i + 1, j, k),
                    spec.node_id(i + 1, j + 1, k),
                    spec.node_id(i, j + 1, k),
                    spec.node_id(i, j, k + 1),
                    spec.node_id(i + 1, j, k + 1),
                    spec.node_id(i + 1, j + 1, k + 1),
                    spec.node_id(i, j + 1, k + 1),
                ];
                let coords: [[f64; 3]; 8] = std::array::from_fn(|a| nodes[conn[a]]);
                let (ke, me) = hex8_matrices(&coords, &spec.material, spec.element)?;
                let dofs: Vec<Option<usize>> = conn.iter().flat_map(|&c| node_dofs[c]).collect();
                for (r, dr) in dofs.iter().enumerate() {
                    let Some(dr) = *dr else { continue };
                    for (c, dc) in dofs.iter().enumerate() {
                        let Some(dc) = *dc else { continue };
                        kt.push((dr, dc, ke[r][c]));
                        mt.push((dr, dc, me[r][c]));
                    }
                }
            }
        }
    }
    let boundary_dofs = (0..n_nodes)
        .filter(|&id| on_interface[id])
        .flat_map(|id| node_dofs[id].into_iter().flatten())
        .collect();
    let model = FeModel {
        mass: SparseSym::from_triplets(n, &mt)?.symmetrized(),
        stiffness: SparseSym::from_triplets(n, &kt)?.symmetrized(),
        boundary_dofs,
        dof_map,
        preload: vec![0.0; n],
    };
    Ok(BrickBlock {
        model,
        nodes,
        node_dofs,
        counts: spec.counts,
    })
}

impl BrickBlock {
    /// Nodes of a face as `(node, in-plane grid index)`.
    fn face_nodes(&self, face: Face) -> Vec<(usize, [usize; 2])> {
        let [ex, ey, ez] = self.counts;
        let a = face.axis();
        let fixed = if face.is_max() { self.counts[a] } else { 0 };
        let mut out = Vec::new();
        for k in 0..=ez {
            for j in 0..=ey {
                for i in 0..=ex {
                    let idx = [i, j, k];
                    if idx[a] != fixed {
                        continue;
                    }
                    let (u, v) = match a {
                        0 => (j, k),
                        1 => (i, k),
                        _ => (i, j),
                    };
                    out.push((i + (ex + 1) * (j + (ey + 1) * k), [u, v]));
                }
            }
        }
        out
    }

    /// Consistent nodal loads of a uniform traction over the face elements whose
    /// centroid lies in `window` (in-plane `[lo, hi]` per face axis). Returns the
    /// load vector and the loaded area.
    pub fn face_traction(
        &self,
        face: Face,
        traction: [f64; 3],
        window: Option<[[f64; 2]; 2]>,
    ) -> (Vec<f64>, f64) {
        let a = face.axis();
        let (pa, pb) = match a {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let nodes = self.face_nodes(face);
        let nu = self.counts[pa];
        let grid = |u: usize, v: usize| nodes[u + (nu + 1) * v].0;
        let mut f = vec![0.0; self.model.n_dofs()];
        let mut area = 0.0;
        for v in 0..self.counts[pb] {
            for u in 0..nu {
                let corners = [
                    grid(u, v),
                    grid(u + 1, v),
                    grid(u + 1, v + 1),
                    grid(u, v + 1),
                ];
                let p0 = self.nodes[corners[0]];
                let p2 = self.nodes[corners[2]];
                let centre = [0.5 * (p0[pa] + p2[pa]), 0.5 * (p0[pb] + p2[pb])];
                if let Some(w) = window {
                    if centre[0] < w[0][0]
                        || centre[0] > w[0][1]
                        || centre[1] < w[1][0]
                        || centre[1] > w[1][1]
                    {
                        continue;
                    }
                }
                let ae = (p2[pa] - p0[pa]).abs() * (p2[pb] - p0[pb]).abs();
                area += ae;
                for &c in &corners {
                    for d in 0..3 {
                        if let Some(dof) = self.node_dofs[c][d] {
                            f[dof] += 0.25 * ae * traction[d];
                        }
                    }
                }
            }
        }
        (f, area)
    }
}

/// End condition of the upper block's far end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FarEnd {
    /// In-plane fixed, free to move normal to the interface.
    #[default]
    Guided,
    Clamped,
}

/// Two plates overlapping in `[free_length[0], free_length[0] + overlap[0]] × [0, overlap[1]]`.
/// Block A (lower, z ≤ 0) is clamped at x = 0; block B (upper, z ≥ 0) ends at
/// the far end.
#[derive(Debug, Clone, PartialEq)]
pub struct LapJointSpec {
    pub material: Material,
    pub element: ElementKind,
    pub overlap: [f64; 2],
    pub free_length: [f64; 2],
    pub thickness: [f64; 2],
    pub element_size: f64,
    pub layers: [usize; 2],
    /// Size of the preload patch centred on the overlap.
    pub preload_patch: [f64; 2],
    pub far_end: FarEnd,
}

#[derive(Debug, Clone)]
pub struct LapJoint {
    /// Combined model in absolute coordinates; B's DOFs follow A's.
    pub model: FeModel,
    /// `(B dof, A dof)` matched across the interface.
    pub pairs: Vec<(usize, usize)>,
    /// Interface seen from B: after the relative transform its DOFs are relative.
    pub interface: InterfaceMesh,
    pub nodes: Vec<[f64; 3]>,
    /// Sensor DOFs on B's top surface half-way along its free length.
    pub sensor_dofs: Vec<usize>,
    pub far_end: FarEnd,
    /// Overlap centre (x, y).
    pub centre: [f64; 2],
}

fn count_of(len: f64, h: f64, what: &str) -> Result<usize> {
    let c = (len / h).round();
    if c < 1.0 || (c * h - len).abs() > 1e-9 * len.max(h) {
        return Err(Error::InvalidInput(format!(
            "non-conforming lap joint: {what} {len} is not a multiple of the element size {h}"
        )));
    }
    Ok(c as usize)
}

pub fn build_lap_joint(spec: &LapJointSpec) -> Result<LapJoint> {
    let h = spec.element_size;
    if !(h > 0.0) {
        return Err(Error::InvalidInput("element size must be positive".into()));
    }
    let n_ov = count_of(spec.overlap[0], h, "overlap length")?;
    let n_y = count_of(spec.overlap[1], h, "overlap width")?;
    let n_a = count_of(spec.free_length[0], h, "free length of A")?;
    let n_b = count_of(spec.free_length[1], h, "free length of B")?;
    let x_ov = spec.free_length[0];
    let block_a = BrickMeshSpec {
        origin: [0.0, 0.0, -spec.thickness[0]],
        extents: [
            spec.free_length[0] + spec.overlap[0],
            spec.overlap[1],
            spec.thickness[0],
        ],
        counts: [n_a + n_ov, n_y, spec.layers[0]],
        material: spec.material,
        element: spec.element,
        fixed: vec![FaceConstraint::clamped(Face::XMin)],
        interface: None,
    };
    let b_end = match spec.far_end {
        FarEnd::Guided => FaceConstraint {
            face: Face::XMax,
            directions: [true, true, false],
        },
        FarEnd::Clamped => FaceConstraint::clamped(Face::XMax),
    };
    let block_b = BrickMeshSpec {
        origin: [x_ov, 0.0, 0.0],
        extents: [
            spec.overlap[0] + spec.free_length[1],
            spec.overlap[1],
            spec.thickness[1],
        ],
        counts: [n_ov + n_b, n_y, spec.layers[1]],
        material: spec.material,
        element: spec.element,
        fixed: vec![b_end],
        interface: None,
    };
    let a = build_brick_block(&block_a)?;
    let b = build_brick_block(&block_b)?;
    let (na, nna) = (a.model.n_dofs(), a.nodes.len());
    let n = na + b.model.n_dofs();

    fn shift(m: &SparseSym, off: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        m.iter().map(move |(i, j, v)| (i + off, j + off, v))
    }
    let kt: Vec<_> = shift(&a.model.stiffness, 0)
        .chain(shift(&b.model.stiffness, na))
        .collect();
    let mt: Vec<_> = shift(&a.model.mass, 0)
        .chain(shift(&b.model.mass, na))
        .collect();
    let mut dof_map = a.model.dof_map.clone();
    dof_map.extend(b.model.dof_map.iter().map(|d| DofInfo {
        node: d.node + nna,
        direction: d.direction,
    }));
    let mut nodes = a.nodes.clone();
    nodes.extend_from_slice(&b.nodes);

    // matched interface nodes: B bottom face over the overlap against A top face
    let tol = 1e-9 * h;
    let a_top = a.face_nodes(Face::ZMax);
    let b_bot = b.face_nodes(Face::ZMin);
    let nx_b = b.counts[0];
    let mut pairs = Vec::new();
    let mut inodes = Vec::new();
    let mut node_slot = vec![usize::MAX; b.nodes.len()];
    for &(nb, [u, _]) in &b_bot {
        if u > n_ov {
            continue;
        }
        let pb = b.nodes[nb];
        let na_match = a_top
            .iter()
            .find(|&&(na_id, _)| {
                let pa = a.nodes[na_id];
                (pa[0] - pb[0]).abs() <= tol && (pa[1] - pb[1]).abs() <= tol
            })
            .map(|&(na_id, _)| na_id)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "non-conforming lap joint: no A node under B node at ({}, {})",
                    pb[0], pb[1]
                ))
            })?;
        let mut dofs = [0usize; 3];
        for d in 0..3 {
            let (Some(db), Some(da)) = (b.node_dofs[nb][d], a.node_dofs[na_match][d]) else {
                return Err(Error::InvalidInput(
                    "constrained DOF on the lap-joint interface".into(),
                ));
            };
            pairs.push((db + na, da));
            dofs[d] = db + na;
        }
        node_slot[nb] = inodes.len();
        inodes.push(InterfaceNode {
            xy: [pb[0], pb[1]],
            dofs,
        });
    }
    let mut faces = Vec::new();
    for v in 0..n_y {
        for u in 0..n_ov {
            let id = |uu: usize, vv: usize| node_slot[uu + (nx_b + 1) * vv];
            faces.push([id(u, v), id(u + 1, v), id(u + 1, v + 1), id(u, v + 1)]);
        }
    }
    let interface = InterfaceMesh {
        nodes: inodes,
        faces,
        regular: Some(RegularLayout {
            origin: [x_ov, 0.0],
            pitch: [h, h],
            counts: [n_ov, n_y],
        }),
    };

    let centre = [x_ov + 0.5 * spec.overlap[0], 0.5 * spec.overlap[1]];
    let window_xy = [
        [
            centre[0] - 0.5 * spec.preload_patch[0],
            centre[0] + 0.5 * spec.preload_patch[0],
        ],
        [
            centre[1] - 0.5 * spec.preload_patch[1],
            centre[1] + 0.5 * spec.preload_patch[1],
        ],
    ];
    let (fb, area_b) = b.face_traction(Face::ZMax, [0.0, 0.0, -1.0], Some(window_xy));
    let (fa, area_a) = a.face_traction(Face::ZMin, [0.0, 0.0, 1.0], Some(window_xy));
    if area_a == 0.0 || area_b == 0.0 {
        return Err(Error::InvalidInput(
            "preload patch covers no element face".into(),
        ));
    }
    let mut preload = vec![0.0; n];
    for (k, v) in fa.iter().enumerate() {
        preload[k] = v / area_a;
    }
    for (k, v) in fb.iter().enumerate() {
        preload[na + k] = v / area_b;
    }

    let xs = x_ov + spec.overlap[0] + 0.5 * spec.free_length[1];
    let sensor = (0..b.nodes.len())
        .filter(|&i| (b.nodes[i][2] - spec.thickness[1]).abs() <= tol)
        .min_by(|&i, &j| {
            let d = |k: usize| (b.nodes[k][0] - xs).hypot(b.nodes[k][1] - centre[1]);
            d(i).total_cmp(&d(j))
        })
        .expect("B has a top face");
    let sensor_dofs = b.node_dofs[sensor]
        .iter()
        .flatten()
        .map(|d| d + na)
        .collect();

    let model = FeModel {
        mass: SparseSym::from_triplets(n, &mt)?,
        stiffness: SparseSym::from_triplets(n, &kt)?,
        boundary_dofs: Vec::new(),
        dof_map,
        preload,
    };
    Ok(LapJoint {
        model,
        pairs,
        interface,
        nodes,
        sensor_dofs,
        far_end: spec.far_end,
        centre,
    })
}

impl LapJoint {
    /// Rigid modes of B in boundary coordinates after the relative transform,
    /// as columns over `boundary_dofs` (the relative DOFs).
    pub fn floating_modes(&self, boundary_dofs: &[usize]) -> Option<faer::Mat<f64>> {
        match self.far_end {
            FarEnd::Clamped => None,
            FarEnd::Guided => Some(faer::Mat::from_fn(boundary_dofs.len(), 1, |k, _| {
                if self.model.dof_map[boundary_dofs[k]].direction == 2 {
                    1.0
                } else {
                    0.0
                }
            })),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn steel() -> Material {
        Material {
            youngs_modulus: 210e9,
            poisson_ratio: 0.3,
            density: 7800.0,
        }
    }

    #[test]
    fn element_has_six_rigid_modes() {
        for kind in [ElementKind::Standard, ElementKind::IncompatibleModes] {
            let coords: [[f64; 3]; 8] = std::array::from_fn(|a| {
                [NAT[a][0] * 0.01 + 0.2, NAT[a][1] * 0.02, NAT[a][2] * 0.005]
            });
            let (k, m) = hex8_matrices(&coords, &steel(), kind).unwrap();
            let km = faer::Mat::from_fn(24, 24, |i, j| k[i][j]);
            let ev = crate::linalg::sym_eigenvalues(km.as_ref()).unwrap();
            let top = ev[23];
            assert!(ev[..6].iter().all(|v| v.abs() < 1e-10 * top));
            assert!(ev[6] > 1e-6 * top);
            let total: f64 = (0..24)
                .flat_map(|i| (0..24).map(move |j| (i, j)))
                .filter(|(i, j)| i % 3 == 0 && j % 3 == 0)
                .map(|(i, j)| m[i][j])
                .sum();
            assert!((total - 7800.0 * 0.02 * 0.04 * 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_element_rejected() {
        let mut coords: [[f64; 3]; 8] = std::array::from_fn(|a| NAT[a]);
        coords[6] = coords[0];
        coords[5] = coords[0];
        coords[7] = coords[0];
        coords[4] = coords[0];
        assert!(hex8_matrices(&coords, &steel(), ElementKind::Standard).is_err());
    }
}

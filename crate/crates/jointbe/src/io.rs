//! File formats: Matrix Market matrices, DOF maps, result CSVs and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contact::{ContactState, PointStatus};
use crate::coupling::{InterfaceMesh, InterfaceNode, RegularLayout};
use crate::driver::StepRecord;
use crate::error::{Error, Result};
use crate::linalg::DMat;
use crate::minifem::LapJoint;
use crate::qsma::{HysteresisRecord, ModalCurve};
use crate::rom::{DofInfo, FeModel, ReducedModel};
use crate::sparse::SparseSym;
use crate::topography::HeightProfile;

/// Relative asymmetry accepted in a general-storage matrix file.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Float formatting with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Parses a real coordinate Matrix Market file, `symmetric` or `general`.
pub fn parse_matrix_market(text: &str, path: &str) -> Result<SparseSym> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let h: Vec<String> = header
        .split_whitespace()
        .map(|s| s.to_ascii_lowercase())
        .collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" || h[2] != "coordinate" {
        return Err(parse_err(
            path,
            1,
            "expected '%%MatrixMarket matrix coordinate real symmetric|general'",
        ));
    }
    if h[3] != "real" && h[3] != "double" && h[3] != "integer" {
        return Err(parse_err(path, 1, format!("unsupported field '{}'", h[3])));
    }
    let symmetric = match h[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => {
            return Err(parse_err(
                path,
                1,
                format!("unsupported symmetry '{other}'"),
            ))
        }
    };
    let mut size = None;
    let mut trip = Vec::new();
    for (k, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let no = k + 1;
        let f: Vec<&str> = line.split_whitespace().collect();
        let Some((nr, nc, _)) = size else {
            if f.len() != 3 {
                return Err(parse_err(path, no, "expected 'rows cols entries'"));
            }
            let p = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| parse_err(path, no, format!("invalid size field '{s}'")))
            };
            let (r, c, n) = (p(f[0])?, p(f[1])?, p(f[2])?);
            if r != c {
                return Err(parse_err(
                    path,
                    no,
                    format!("matrix is {r}x{c}, not square"),
                ));
            }
            size = Some((r, c, n));
            trip.reserve(n);
            continue;
        };
        if f.len() != 3 {
            return Err(parse_err(path, no, "expected 'row col value'"));
        }
        let idx = |s: &str, n: usize| -> Result<usize> {
            let v = s
                .parse::<usize>()
                .map_err(|_| parse_err(path, no, format!("invalid index '{s}'")))?;
            if v == 0 || v > n {
                return Err(parse_err(path, no, format!("index {v} outside 1..={n}")));
            }
            Ok(v - 1)
        };
        let (i, j) = (idx(f[0], nr)?, idx(f[1], nc)?);
        let v: f64 = f[2]
            .parse()
            .map_err(|_| parse_err(path, no, format!("invalid value '{}'", f[2])))?;
        if !v.is_finite() {
            return Err(parse_err(
                path,
                no,
                format!("non-finite entry at row {} col {}", i + 1, j + 1),
            ));
        }
        if symmetric && j > i {
            return Err(parse_err(
                path,
                no,
                format!(
                    "upper-triangle entry ({}, {}) in symmetric storage",
                    i + 1,
                    j + 1
                ),
            ));
        }
        trip.push((i, j, v));
    }
    let Some((n, _, nnz)) = size else {
        return Err(parse_err(path, 1, "missing size line"));
    };
    if trip.len() != nnz {
        return Err(parse_err(
            path,
            1,
            format!("header announces {nnz} entries, found {}", trip.len()),
        ));
    }
    if symmetric {
        return SparseSym::from_triangle(n, &trip);
    }
    let m = SparseSym::from_triplets(n, &trip)?;
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(parse_err(
            path,
            1,
            format!("matrix is not symmetric (relative asymmetry {asym:e})"),
        ));
    }
    Ok(m.symmetrized())
}

pub fn read_matrix_market(path: &Path) -> Result<SparseSym> {
    parse_matrix_market(&read_text(path)?, &path.display().to_string())
}

/// Symmetric coordinate format, lower triangle.
pub fn format_matrix_market(m: &SparseSym) -> String {
    let lower: Vec<(usize, usize, f64)> = m.iter().filter(|&(i, j, _)| j <= i).collect();
    let mut s = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    s.push_str(&format!("{} {} {}\n", m.dim(), m.dim(), lower.len()));
    for (i, j, v) in lower {
        s.push_str(&format!("{} {} {}\n", i + 1, j + 1, fmt_f64(v)));
    }
    s
}

pub fn write_matrix_market(path: &Path, m: &SparseSym) -> Result<()> {
    write_text(path, &format_matrix_market(m))
}

/// Interface membership of a DOF in a two-body FE model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InterfaceSide {
    #[default]
    None,
    A,
    B,
}

impl TryFrom<String> for InterfaceSide {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "none" => Ok(InterfaceSide::None),
            "a" => Ok(InterfaceSide::A),
            "b" => Ok(InterfaceSide::B),
            other => Err(format!(
                "interface must be 'a', 'b' or empty, got '{other}'"
            )),
        }
    }
}

impl From<InterfaceSide> for String {
    fn from(s: InterfaceSide) -> String {
        match s {
            InterfaceSide::None => String::new(),
            InterfaceSide::A => "a".into(),
            InterfaceSide::B => "b".into(),
        }
    }
}

/// One row of `dofs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofRecord {
    pub dof: usize,
    pub node: usize,
    /// 0 = x, 1 = y, 2 = z.
    pub direction: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub interface: InterfaceSide,
    pub sensor: bool,
    /// Preload pattern per newton.
    pub preload: f64,
}

/// FE model files with their DOF map.
#[derive(Debug, Clone)]
pub struct FeBundle {
    pub model: FeModel,
    pub dofs: Vec<DofRecord>,
}

/// Interface data recovered from a DOF map: matched pairs `(B dof, A dof)`,
/// the interface mesh seen from B and the sensor DOFs.
#[derive(Debug, Clone)]
pub struct InterfaceSetup {
    pub pairs: Vec<(usize, usize)>,
    pub interface: InterfaceMesh,
    pub sensor_dofs: Vec<usize>,
}

pub fn read_dof_map(path: &Path) -> Result<Vec<DofRecord>> {
    let name = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(&name, e))?;
    let mut out = Vec::new();
    for (k, row) in rdr.deserialize().enumerate() {
        let r: DofRecord = row.map_err(|e| csv_err(&name, e))?;
        if r.dof != k {
            return Err(parse_err(
                &name,
                k + 2,
                format!("DOF map gap: expected dof {k}, found {}", r.dof),
            ));
        }
        if r.direction > 2 {
            return Err(parse_err(
                &name,
                k + 2,
                format!("direction {} not in 0..=2", r.direction),
            ));
        }
        out.push(r);
    }
    Ok(out)
}

fn csv_err(path: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_err(path, line, e.to_string())
}

pub fn write_dof_map(path: &Path, dofs: &[DofRecord]) -> Result<()> {
    let name = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(&name, e))?;
    w.write_record([
        "dof",
        "node",
        "direction",
        "x",
        "y",
        "z",
        "interface",
        "sensor",
        "preload",
    ])
    .map_err(|e| csv_err(&name, e))?;
    for d in dofs {
        w.write_record([
            d.dof.to_string(),
            d.node.to_string(),
            d.direction.to_string(),
            fmt_f64(d.x),
            fmt_f64(d.y),
            fmt_f64(d.z),
            String::from(d.interface),
            d.sensor.to_string(),
            fmt_f64(d.preload),
        ])
        .map_err(|e| csv_err(&name, e))?;
    }
    w.flush().map_err(|e| Error::io(name, e))
}

/// Loads mass and stiffness in Matrix Market format plus the DOF map.
pub fn load_fe_matrices(mass: &Path, stiffness: &Path, dofs: &Path) -> Result<FeBundle> {
    let m = read_matrix_market(mass)?;
    let k = read_matrix_market(stiffness)?;
    let map = read_dof_map(dofs)?;
    if m.dim() != k.dim() || map.len() != k.dim() {
        return Err(Error::InvalidInput(format!(
            "FE files disagree: M is {}, K is {}, DOF map has {} rows",
            m.dim(),
            k.dim(),
            map.len()
        )));
    }
    let model = FeModel {
        mass: m,
        stiffness: k,
        boundary_dofs: Vec::new(),
        dof_map: map
            .iter()
            .map(|d| DofInfo {
                node: d.node,
                direction: d.direction,
            })
            .collect(),
        preload: map.iter().map(|d| d.preload).collect(),
    };
    model.validate()?;
    Ok(FeBundle { model, dofs: map })
}

impl FeBundle {
    pub fn from_lap_joint(lj: &LapJoint) -> Self {
        let mut side = vec![InterfaceSide::None; lj.model.n_dofs()];
        for &(b, a) in &lj.pairs {
            side[b] = InterfaceSide::B;
            side[a] = InterfaceSide::A;
        }
        let dofs = lj
            .model
            .dof_map
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let p = lj.nodes[d.node];
                DofRecord {
                    dof: k,
                    node: d.node,
                    direction: d.direction,
                    x: p[0],
                    y: p[1],
                    z: p[2],
                    interface: side[k],
                    sensor: lj.sensor_dofs.contains(&k),
                    preload: lj.model.preload[k],
                }
            })
            .collect();
        Self {
            model: lj.model.clone(),
            dofs,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let files = [
            dir.join("mass.mtx"),
            dir.join("stiffness.mtx"),
            dir.join("dofs.csv"),
        ];
        write_matrix_market(&files[0], &self.model.mass)?;
        write_matrix_market(&files[1], &self.model.stiffness)?;
        write_dof_map(&files[2], &self.dofs)?;
        Ok(files.to_vec())
    }

    /// Matches A and B interface nodes by in-plane position and builds the
    /// interface mesh from B's nodes, which must form a regular lattice.
    pub fn interface_setup(&self, tol: f64) -> Result<InterfaceSetup> {
        // node -> (x, y, dofs by direction)
        let mut nodes: BTreeMap<(InterfaceSide, usize), ([f64; 2], [Option<usize>; 3])> =
            BTreeMap::new();
        for d in &self.dofs {
            if d.interface == InterfaceSide::None {
                continue;
            }
            let e = nodes
                .entry((d.interface, d.node))
                .or_insert(([d.x, d.y], [None; 3]));
            e.1[d.direction] = Some(d.dof);
        }
        let full = |side: InterfaceSide| -> Result<Vec<([f64; 2], [usize; 3])>> {
            nodes
                .iter()
                .filter(|((s, _), _)| *s == side)
                .map(|((_, n), (xy, dofs))| match dofs {
                    [Some(a), Some(b), Some(c)] => Ok((*xy, [*a, *b, *c])),
                    _ => Err(Error::InvalidInput(format!(
                        "interface node {n} does not carry all three directions"
                    ))),
                })
                .collect()
        };
        let a_nodes = full(InterfaceSide::A)?;
        let b_nodes = full(InterfaceSide::B)?;
        if b_nodes.is_empty() || a_nodes.len() != b_nodes.len() {
            return Err(Error::InvalidInput(format!(
                "interface has {} A nodes and {} B nodes",
                a_nodes.len(),
                b_nodes.len()
            )));
        }
        let mut pairs = Vec::new();
        for (xy, bd) in &b_nodes {
            let (_, ad) = a_nodes
                .iter()
                .find(|(p, _)| (p[0] - xy[0]).abs() <= tol && (p[1] - xy[1]).abs() <= tol)
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "no A interface node at ({:e}, {:e})",
                        xy[0], xy[1]
                    ))
                })?;
            for d in 0..3 {
                pairs.push((bd[d], ad[d]));
            }
        }
        let axis = |k: usize| -> Vec<f64> {
            let mut v: Vec<f64> = b_nodes.iter().map(|(p, _)| p[k]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup_by(|a, b| (*a - *b).abs() <= tol);
            v
        };
        let (xs, ys) = (axis(0), axis(1));
        if xs.len() < 2 || ys.len() < 2 || xs.len() * ys.len() != b_nodes.len() {
            return Err(Error::InvalidInput(
                "interface nodes do not form a regular lattice".into(),
            ));
        }
        let pitch = [xs[1] - xs[0], ys[1] - ys[0]];
        let uniform = |v: &[f64], h: f64| v.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= tol);
        if !uniform(&xs, pitch[0]) || !uniform(&ys, pitch[1]) {
            return Err(Error::InvalidInput(
                "interface node spacing is not uniform".into(),
            ));
        }
        let slot = |x: f64, y: f64| {
            let i = ((x - xs[0]) / pitch[0]).round() as usize;
            let j = ((y - ys[0]) / pitch[1]).round() as usize;
            i + xs.len() * j
        };
        let mut inodes = vec![
            InterfaceNode {
                xy: [0.0; 2],
                dofs: [0; 3]
            };
            b_nodes.len()
        ];
        for (xy, bd) in &b_nodes {
            inodes[slot(xy[0], xy[1])] = InterfaceNode { xy: *xy, dofs: *bd };
        }
        let (nx, ny) = (xs.len() - 1, ys.len() - 1);
        let mut faces = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let id = |u: usize, v: usize| u + (nx + 1) * v;
                faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let interface = InterfaceMesh {
            nodes: inodes,
            faces,
            regular: Some(RegularLayout {
                origin: [xs[0], ys[0]],
                pitch,
                counts: [nx, ny],
            }),
        };
        let sensor_dofs = self
            .dofs
            .iter()
            .filter(|d| d.sensor)
            .map(|d| d.dof)
            .collect();
        Ok(InterfaceSetup {
            pairs,
            interface,
            sensor_dofs,
        })
    }
}

/// One row of a contact state dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    pub point_id: usize,
    pub x: f64,
    pub y: f64,
    pub g_n: f64,
    pub g_t1: f64,
    pub g_t2: f64,
    pub lam_n: f64,
    pub lam_t1: f64,
    pub lam_t2: f64,
    pub status: String,
}

pub fn state_rows(point_ids: &[usize], points: &[[f64; 2]], s: &ContactState) -> Vec<StateRow> {
    (0..s.n_points())
        .map(|j| StateRow {
            point_id: point_ids[j],
            x: points[j][0],
            y: points[j][1],
            g_n: s.gap[3 * j],
            g_t1: s.gap[3 * j + 1],
            g_t2: s.gap[3 * j + 2],
            lam_n: s.force[3 * j],
            lam_t1: s.force[3 * j + 1],
            lam_t2: s.force[3 * j + 2],
            status: s.status[j].as_str().to_string(),
        })
        .collect()
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let name = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(&name, e))?;
    w.write_record(header).map_err(|e| csv_err(&name, e))?;
    for r in rows {
        let r: Vec<String> = r.into_iter().collect();
        w.write_record(&r).map_err(|e| csv_err(&name, e))?;
    }
    w.flush().map_err(|e| Error::io(name, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let name = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(&name, e))?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| csv_err(&name, e)))
        .collect()
}

pub fn write_state_csv(path: &Path, rows: &[StateRow]) -> Result<()> {
    write_rows(
        path,
        &[
            "point_id", "x", "y", "g_n", "g_t1", "g_t2", "lam_n", "lam_t1", "lam_t2", "status",
        ],
        rows.iter().map(|r| {
            let mut v = vec![r.point_id.to_string()];
            v.extend(
                [r.x, r.y, r.g_n, r.g_t1, r.g_t2, r.lam_n, r.lam_t1, r.lam_t2]
                    .into_iter()
                    .map(fmt_f64),
            );
            v.push(r.status.clone());
            v
        }),
    )
}

pub fn read_state_csv(path: &Path) -> Result<Vec<StateRow>> {
    let rows: Vec<StateRow> = read_rows(path)?;
    for (k, r) in rows.iter().enumerate() {
        if PointStatus::parse(&r.status).is_none() {
            return Err(parse_err(
                &path.display().to_string(),
                k + 2,
                format!("unknown status '{}'", r.status),
            ));
        }
    }
    Ok(rows)
}

/// One row of the modal curve file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalRow {
    pub mode: usize,
    pub amplitude_m: f64,
    pub omega_rad_s: f64,
    pub omega_over_lin: f64,
    pub damping_ratio: f64,
}

pub fn modal_rows(curves: &[ModalCurve]) -> Vec<ModalRow> {
    curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(|p| ModalRow {
                mode: c.mode,
                amplitude_m: p.amplitude,
                omega_rad_s: p.omega,
                omega_over_lin: p.omega_over_lin,
                damping_ratio: p.damping,
            })
        })
        .collect()
}

pub fn write_modal_csv(path: &Path, rows: &[ModalRow]) -> Result<()> {
    write_rows(
        path,
        &[
            "mode",
            "amplitude_m",
            "omega_rad_s",
            "omega_over_lin",
            "damping_ratio",
        ],
        rows.iter().map(|r| {
            let mut v = vec![r.mode.to_string()];
            v.extend(
                [
                    r.amplitude_m,
                    r.omega_rad_s,
                    r.omega_over_lin,
                    r.damping_ratio,
                ]
                .into_iter()
                .map(fmt_f64),
            );
            v
        }),
    )
}

pub fn read_modal_csv(path: &Path) -> Result<Vec<ModalRow>> {
    read_rows(path)
}

pub fn write_hysteresis_csv(path: &Path, records: &[(usize, &HysteresisRecord)]) -> Result<()> {
    let rows = records.iter().flat_map(|(mode, rec)| {
        [("positive", &rec.positive), ("negative", &rec.negative)]
            .into_iter()
            .flat_map(move |(name, b)| {
                b.alpha.iter().zip(&b.q_mod).map(move |(a, q)| {
                    vec![mode.to_string(), name.to_string(), fmt_f64(*a), fmt_f64(*q)]
                })
            })
    });
    write_rows(path, &["mode", "branch", "alpha", "q_mod"], rows)
}

/// Per-step log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub phase: String,
    pub step: usize,
    pub load: f64,
    pub n_stick: usize,
    pub n_slip: usize,
    pub n_sep: usize,
    pub n_active: usize,
    pub pjor_iterations: usize,
    pub pjor_residual: f64,
    pub retries: usize,
    pub force_n: f64,
    pub force_t1: f64,
    pub force_t2: f64,
    pub balance: f64,
    pub min_normal_force: f64,
    pub min_normal_gap: f64,
    pub max_complementarity: f64,
    pub max_cone_excess: f64,
    pub max_slip_cone_mismatch: f64,
    pub max_dissipation_sign: f64,
    pub wall_s: f64,
}

impl From<&StepRecord> for StepRow {
    fn from(r: &StepRecord) -> Self {
        Self {
            phase: r.phase.clone(),
            step: r.step,
            load: r.load,
            n_stick: r.report.n_stick,
            n_slip: r.report.n_slip,
            n_sep: r.report.n_sep,
            n_active: r.report.n_active,
            pjor_iterations: r.report.pjor_iterations,
            pjor_residual: r.report.pjor_residual,
            retries: r.report.retries,
            force_n: r.total_force[0],
            force_t1: r.total_force[1],
            force_t2: r.total_force[2],
            balance: r.balance,
            min_normal_force: r.invariants.min_normal_force,
            min_normal_gap: r.invariants.min_normal_gap,
            max_complementarity: r.invariants.max_complementarity,
            max_cone_excess: r.invariants.max_cone_excess,
            max_slip_cone_mismatch: r.invariants.max_slip_cone_mismatch,
            max_dissipation_sign: r.invariants.max_dissipation_sign,
            wall_s: r.wall_s,
        }
    }
}

pub fn write_steps_csv(path: &Path, rows: &[StepRow]) -> Result<()> {
    write_rows(
        path,
        &[
            "phase",
            "step",
            "load",
            "n_stick",
            "n_slip",
            "n_sep",
            "n_active",
            "pjor_iterations",
            "pjor_residual",
            "retries",
            "force_n",
            "force_t1",
            "force_t2",
            "balance",
            "min_normal_force",
            "min_normal_gap",
            "max_complementarity",
            "max_cone_excess",
            "max_slip_cone_mismatch",
            "max_dissipation_sign",
            "wall_s",
        ],
        rows.iter().map(|r| {
            let mut v = vec![r.phase.clone(), r.step.to_string(), fmt_f64(r.load)];
            v.extend(
                [r.n_stick, r.n_slip, r.n_sep, r.n_active, r.pjor_iterations]
                    .iter()
                    .map(|x| x.to_string()),
            );
            v.push(fmt_f64(r.pjor_residual));
            v.push(r.retries.to_string());
            v.extend(
                [
                    r.force_n,
                    r.force_t1,
                    r.force_t2,
                    r.balance,
                    r.min_normal_force,
                    r.min_normal_gap,
                    r.max_complementarity,
                    r.max_cone_excess,
                    r.max_slip_cone_mismatch,
                    r.max_dissipation_sign,
                    r.wall_s,
                ]
                .into_iter()
                .map(fmt_f64),
            );
            v
        }),
    )
}

pub fn read_steps_csv(path: &Path) -> Result<Vec<StepRow>> {
    read_rows(path)
}

/// Wall and CPU time of one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub wall_s: f64,
    pub cpu_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
    pub timings: Vec<PhaseTiming>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidInput(format!("manifest serialization: {e}")))?;
        write_text(path, &text)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        serde_json::from_str(&read_text(path)?)
            .map_err(|e| parse_err(&name, e.line(), e.to_string()))
    }
}

/// Sparse copy of a symmetric dense matrix (exact zeros dropped).
pub fn sparse_from_dense(a: &DMat) -> Result<SparseSym> {
    let n = a.nrows();
    let mut t = Vec::new();
    for j in 0..n {
        for i in j..n {
            if a[(i, j)] != 0.0 {
                t.push((i, j, a[(i, j)]));
            }
        }
    }
    SparseSym::from_triangle(n, &t)
}

/// Writes `k_red.mtx`, `m_red.mtx` and `reduced.csv` (one row per reduced
/// coordinate: boundary DOF or fixed-interface mode with its frequency).
pub fn write_reduced(dir: &Path, red: &ReducedModel) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let files = vec![
        dir.join("k_red.mtx"),
        dir.join("m_red.mtx"),
        dir.join("reduced.csv"),
    ];
    write_matrix_market(&files[0], &sparse_from_dense(&red.k_red)?)?;
    write_matrix_market(&files[1], &sparse_from_dense(&red.m_red)?)?;
    let nb = red.n_boundary();
    let rows = (0..red.dim()).map(|k| {
        if k < nb {
            vec![
                k.to_string(),
                "boundary".into(),
                red.boundary_dofs[k].to_string(),
                String::new(),
            ]
        } else {
            let m = k - nb;
            vec![
                k.to_string(),
                "mode".into(),
                (m + 1).to_string(),
                fmt_f64(red.omega[m]),
            ]
        }
    });
    write_rows(
        &files[2],
        &["coordinate", "kind", "index", "omega_rad_s"],
        rows,
    )?;
    Ok(files)
}

/// Grid point heights as `point_id,x,y,height`; excluded points are skipped.
pub fn write_surface_csv(path: &Path, profile: &HeightProfile) -> Result<()> {
    let rows = profile.included().map(|i| {
        let p = profile.grid.point(i);
        vec![
            i.to_string(),
            fmt_f64(p[0]),
            fmt_f64(p[1]),
            fmt_f64(profile.heights[i]),
        ]
    });
    write_rows(path, &["point_id", "x", "y", "height"], rows)
}

//! Quasi-static modal analysis: modal load ramps, Masing loops and
//! amplitude-dependent frequency and damping.

use faer::Mat;
use log::debug;

use crate::contact::{
    check_invariants, dofs_of, step_increment, ContactState, InvariantReport, PointStatus,
    SolverOptions, StepReport,
};
use crate::coupling::CondensedSystem;
use crate::error::{Error, Result};
use crate::halfspace::ComplianceMatrix;
use crate::linalg::{gen_sym_eigen, matvec, max_abs, norm2, select, symmetrize, SpdFactor};
use crate::rom::ReducedModel;

/// Mass-normalized mode of the contact-linearized reduced model.
#[derive(Debug, Clone)]
pub struct ModeShape {
    /// 1-based mode number.
    pub index: usize,
    pub phi: Vec<f64>,
    pub omega: f64,
}

/// Tangent stiffness `K̃ + W_b,cl C_cl⁻¹ W_b,clᵀ` over the reduced coordinates.
///
/// Separated points contribute nothing; every other point is bonded in all
/// three directions.
pub fn tangent_stiffness(
    reduced: &ReducedModel,
    system: &CondensedSystem,
    compliance: &ComplianceMatrix,
    state: &ContactState,
) -> Result<Mat<f64>> {
    let mut k = reduced.k_red.clone();
    let closed: Vec<usize> = (0..state.n_points())
        .filter(|&j| state.status[j] != PointStatus::Sep)
        .collect();
    if closed.is_empty() {
        return Ok(k);
    }
    let dofs = dofs_of(&closed);
    let c_cl = select(compliance.entries.as_ref(), &dofs, &dofs);
    let factor = SpdFactor::new(c_cl.as_ref(), "compliance of the closed points")?;
    let nb = reduced.n_boundary();
    let all_b: Vec<usize> = (0..nb).collect();
    let w_cl = select(system.w_b.as_ref(), &all_b, &dofs);
    let x = factor.solve_mat(w_cl.transpose());
    let add = &w_cl * &x;
    for i in 0..nb {
        for j in 0..nb {
            k[(i, j)] += add[(i, j)];
        }
    }
    symmetrize(&mut k);
    Ok(k)
}

/// Orthonormal basis of the reduced coordinates with zero relative motion
/// at closed points: the rigid-contact limit of the tangent stiffness.
pub fn constrained_basis(
    reduced: &ReducedModel,
    system: &CondensedSystem,
    state: &ContactState,
) -> Mat<f64> {
    let nb = reduced.n_boundary();
    let dim = reduced.dim();
    let closed: Vec<usize> = (0..state.n_points())
        .filter(|&j| state.status[j] != PointStatus::Sep)
        .collect();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for &d in &dofs_of(&closed) {
        let mut v: Vec<f64> = (0..nb).map(|i| system.w_b[(i, d)]).collect();
        gram_schmidt(&mut v, &cols);
        let n = norm2(&v);
        if n > 1e-8 {
            cols.push(v.iter().map(|x| x / n).collect());
        }
    }
    let constrained = cols.len();
    let mut free: Vec<Vec<f64>> = Vec::new();
    for i in 0..nb {
        let mut v = vec![0.0; nb];
        v[i] = 1.0;
        gram_schmidt(&mut v, &cols);
        let n = norm2(&v);
        if n > 1e-8 {
            let u: Vec<f64> = v.iter().map(|x| x / n).collect();
            cols.push(u.clone());
            free.push(u);
        }
    }
    debug_assert_eq!(free.len() + constrained, nb);
    let nf = free.len();
    Mat::from_fn(dim, nf + dim - nb, |i, j| match (i < nb, j < nf) {
        (true, true) => free[j][i],
        (false, false) => f64::from(i - nb == j - nf),
        _ => 0.0,
    })
}

fn gram_schmidt(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= d * y;
            }
        }
    }
}

/// Lowest `n_modes` eigenpairs of the contact-linearized reduced model.
pub fn linearized_modes(
    reduced: &ReducedModel,
    system: &CondensedSystem,
    compliance: &ComplianceMatrix,
    state: &ContactState,
    n_modes: usize,
) -> Result<Vec<ModeShape>> {
    let (k, m, basis) = if compliance.is_zero() {
        let t = constrained_basis(reduced, system, state);
        let k = t.transpose() * &reduced.k_red * &t;
        let m = t.transpose() * &reduced.m_red * &t;
        (k, m, Some(t))
    } else {
        let k = tangent_stiffness(reduced, system, compliance, state)?;
        (k, reduced.m_red.clone(), None)
    };
    let (vals, vecs) = gen_sym_eigen(k.as_ref(), m.as_ref())?;
    let vecs = match &basis {
        Some(t) => t * &vecs,
        None => vecs,
    };
    let scale = max_abs(k.as_ref()) / max_abs(m.as_ref());
    if let Some(&low) = vals.first() {
        if low <= 1e-10 * scale {
            return Err(Error::Singular(format!(
                "linearized model has a rigid-body mode (eigenvalue {low:e}); \
                 no closed contact restrains the structure"
            )));
        }
    }
    Ok((0..n_modes.min(vals.len()))
        .map(|m| ModeShape {
            index: m + 1,
            phi: (0..vecs.nrows()).map(|i| vecs[(i, m)]).collect(),
            omega: vals[m].sqrt(),
        })
        .collect())
}

/// Diagnostics of one converged ramp increment.
#[derive(Debug, Clone, Default)]
pub struct RampStep {
    pub alpha: f64,
    pub report: StepReport,
    pub invariants: InvariantReport,
    /// Relative residual of the rigid-mode force balance.
    pub balance: f64,
}

/// One monotone branch of a modal load ramp, starting at the preload state.
#[derive(Debug, Clone, Default)]
pub struct Branch {
    /// Load scale, starting at 0 and strictly monotone.
    pub alpha: Vec<f64>,
    /// Modal coordinate relative to the preload state.
    pub q_mod: Vec<f64>,
    /// Reduced coordinates relative to the preload state.
    pub q_red: Vec<Vec<f64>>,
    pub steps: Vec<RampStep>,
}

impl Branch {
    fn push(&mut self, alpha: f64, q_mod: f64, q_red: Vec<f64>) {
        self.alpha.push(alpha);
        self.q_mod.push(q_mod);
        self.q_red.push(q_red);
    }

    /// `|α|`-indexed linear interpolation of the modal coordinate.
    pub fn q_at(&self, s: f64) -> Result<f64> {
        let (k, t) = self.locate(s)?;
        Ok(self.q_mod[k] + t * (self.q_mod[k + 1] - self.q_mod[k]))
    }

    pub fn q_red_at(&self, s: f64) -> Result<Vec<f64>> {
        let (k, t) = self.locate(s)?;
        Ok(self.q_red[k]
            .iter()
            .zip(&self.q_red[k + 1])
            .map(|(a, b)| a + t * (b - a))
            .collect())
    }

    pub fn max_scale(&self) -> f64 {
        self.alpha.last().map_or(0.0, |a| a.abs())
    }

    fn locate(&self, s: f64) -> Result<(usize, f64)> {
        let n = self.alpha.len();
        if n < 2 || !(0.0..=self.max_scale() * (1.0 + 1e-12)).contains(&s) {
            return Err(Error::InvalidInput(format!(
                "load scale {s:e} outside the recorded range [0, {:e}]",
                self.max_scale()
            )));
        }
        let k = self.alpha.partition_point(|a| a.abs() <= s).clamp(1, n - 1) - 1;
        let (a0, a1) = (self.alpha[k].abs(), self.alpha[k + 1].abs());
        Ok((k, ((s - a0) / (a1 - a0)).clamp(0.0, 1.0)))
    }
}

/// Initial loading curves in both load directions.
#[derive(Debug, Clone, Default)]
pub struct HysteresisRecord {
    pub positive: Branch,
    pub negative: Branch,
}

impl HysteresisRecord {
    /// Builds a record from an odd-symmetric loading curve `q(α)` sampled at `alpha ≥ 0`.
    pub fn symmetric(alpha: &[f64], q: &[f64]) -> Self {
        let mut rec = Self::default();
        for (&a, &v) in alpha.iter().zip(q) {
            rec.positive.push(a, v, Vec::new());
            rec.negative.push(-a, -v, Vec::new());
        }
        rec
    }

    pub fn max_scale(&self) -> f64 {
        self.positive.max_scale().min(self.negative.max_scale())
    }

    /// Point-symmetric initial loading curve `(q₊(s) − q₋(−s)) / 2`.
    pub fn averaged(&self, s: f64) -> Result<f64> {
        Ok(0.5 * (self.positive.q_at(s)? - self.negative.q_at(s)?))
    }
}

/// Geometric load-scale schedule `0, a_min, ..., a_max` with `steps` nonzero entries.
pub fn geometric_schedule(a_min: f64, a_max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(a_min > 0.0 && a_max >= a_min) || steps == 0 {
        return Err(Error::InvalidInput(format!(
            "invalid load schedule: a_min {a_min:e}, a_max {a_max:e}, {steps} steps"
        )));
    }
    let mut out = vec![0.0];
    if steps == 1 {
        out.push(a_max);
        return Ok(out);
    }
    let r = (a_max / a_min).ln() / (steps - 1) as f64;
    out.extend((0..steps).map(|k| a_min * (r * k as f64).exp()));
    *out.last_mut().unwrap() = a_max;
    Ok(out)
}

/// Static modal load problem around a converged preload state.
pub struct ModalLoadProblem<'a> {
    pub reduced: &'a ReducedModel,
    pub system: &'a CondensedSystem,
    /// Reduced preload `f̃₀`.
    pub preload: &'a [f64],
    pub state: &'a ContactState,
    pub opts: SolverOptions,
}

impl ModalLoadProblem<'_> {
    /// Reduced coordinates for load `f̃` and contact state `s`.
    pub fn reduced_displacement(&self, f: &[f64], s: &ContactState) -> Vec<f64> {
        let nb = self.reduced.n_boundary();
        let mut q = self
            .system
            .boundary_displacement(&f[..nb], &s.force, &s.rigid);
        for m in 0..self.reduced.n_modes() {
            q.push(f[nb + m] / self.reduced.k_red[(nb + m, nb + m)]);
        }
        q
    }

    fn ramp(&self, mode: &ModeShape, schedule: &[f64], sign: f64) -> Result<Branch> {
        let red = self.reduced;
        let nb = red.n_boundary();
        let m_phi = matvec(red.m_red.as_ref(), &mode.phi);
        let load = |alpha: f64| -> Vec<f64> {
            self.preload
                .iter()
                .zip(&m_phi)
                .map(|(f, m)| f + alpha * m)
                .collect()
        };
        let q0 = self.reduced_displacement(self.preload, self.state);
        let modal = |q: &[f64]| -> (f64, Vec<f64>) {
            let dq: Vec<f64> = q.iter().zip(&q0).map(|(a, b)| a - b).collect();
            (dq.iter().zip(&m_phi).map(|(a, b)| a * b).sum(), dq)
        };
        let mut branch = Branch::default();
        branch.push(0.0, 0.0, vec![0.0; q0.len()]);
        let mut state = self.state.clone();
        let mut prev = 0.0;
        for &s in &schedule[1..] {
            let alpha = sign * s;
            let df_b: Vec<f64> = m_phi[..nb].iter().map(|m| m * (alpha - prev)).collect();
            let dg = self.system.imposed_gap(&df_b);
            let df = self.system.rigid_load(&df_b);
            let (next, rep) = step_increment(&state, &self.system.operator(), &dg, &df, &self.opts)
                .map_err(|e| Error::AtLoadScale {
                    alpha,
                    source: Box::new(e),
                })?;
            debug!(
                "mode {} alpha {alpha:e}: stick {} slip {} sep {} pjor {} residual {:e} retries {}",
                mode.index,
                rep.n_stick,
                rep.n_slip,
                rep.n_sep,
                rep.pjor_iterations,
                rep.pjor_residual,
                rep.retries
            );
            let f_b: Vec<f64> = load(alpha)[..nb].to_vec();
            branch.steps.push(RampStep {
                alpha,
                invariants: check_invariants(&state, &next),
                balance: self
                    .system
                    .rigid_balance(&self.system.rigid_load(&f_b), &next.force),
                report: rep,
            });
            state = next;
            prev = alpha;
            let q = self.reduced_displacement(&load(alpha), &state);
            let (qm, dq) = modal(&q);
            branch.push(alpha, qm, dq);
        }
        Ok(branch)
    }

    /// Ramps `f̃ = f̃₀ + M̃ φ α` from 0 to `+s` and, independently, to `-s`
    /// for every `s` in `schedule` (which starts at 0).
    pub fn sweep(&self, mode: &ModeShape, schedule: &[f64]) -> Result<HysteresisRecord> {
        if schedule.first() != Some(&0.0) || schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "load schedule must start at 0 and increase strictly".into(),
            ));
        }
        Ok(HysteresisRecord {
            positive: self.ramp(mode, schedule, 1.0)?,
            negative: self.ramp(mode, schedule, -1.0)?,
        })
    }
}

/// Closed Masing loop through `(±α̂, ±q̂)` sampled with `per_quarter` points
/// per quarter cycle; the first and last samples coincide.
pub fn masing_cycle(
    record: &HysteresisRecord,
    alpha_hat: f64,
    per_quarter: usize,
) -> Result<Vec<(f64, f64)>> {
    if !(alpha_hat > 0.0) || alpha_hat > record.max_scale() * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "amplitude {alpha_hat:e} outside the recorded range (0, {:e}]",
            record.max_scale()
        )));
    }
    let per_quarter = per_quarter.max(1);
    let q_hat = record.averaged(alpha_hat)?;
    let n = 2 * per_quarter;
    let mut loop_pts = Vec::with_capacity(2 * n + 1);
    // descending from the upper reversal point, then ascending back
    for k in 0..n {
        let d = 2.0 * alpha_hat * k as f64 / n as f64;
        loop_pts.push((alpha_hat - d, q_hat - 2.0 * record.averaged(0.5 * d)?));
    }
    for k in 0..n {
        let d = 2.0 * alpha_hat * k as f64 / n as f64;
        loop_pts.push((-alpha_hat + d, -q_hat + 2.0 * record.averaged(0.5 * d)?));
    }
    loop_pts.push(loop_pts[0]);
    Ok(loop_pts)
}

/// Area enclosed by a closed polygon, trapezoidal rule.
pub fn loop_area(points: &[(f64, f64)]) -> f64 {
    let s: f64 = points
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[1].1 + w[0].1))
        .sum();
    s.abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalProperties {
    pub omega: f64,
    pub damping: f64,
    /// Modal amplitude `|q(α̂) − q(−α̂)| / 2`.
    pub q_hat: f64,
    pub dissipated: f64,
}

pub fn modal_properties(
    record: &HysteresisRecord,
    alpha_hat: f64,
    per_quarter: usize,
) -> Result<ModalProperties> {
    let span = (record.positive.q_at(alpha_hat)? - record.negative.q_at(alpha_hat)?).abs();
    if span <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "zero modal displacement span at amplitude {alpha_hat:e}"
        )));
    }
    let omega = (2.0 * alpha_hat / span).sqrt();
    let q_hat = 0.5 * span;
    let dissipated = loop_area(&masing_cycle(record, alpha_hat, per_quarter)?);
    let damping = dissipated / (2.0 * std::f64::consts::PI * (omega * q_hat).powi(2));
    Ok(ModalProperties {
        omega,
        damping,
        q_hat,
        dissipated,
    })
}

/// Euclidean norm of the physical displacement amplitude at observation DOFs.
pub fn observed_amplitude(
    record: &HysteresisRecord,
    basis_rows: &Mat<f64>,
    alpha_hat: f64,
) -> Result<f64> {
    let up = record.positive.q_red_at(alpha_hat)?;
    let down = record.negative.q_red_at(alpha_hat)?;
    let dq: Vec<f64> = up.iter().zip(&down).map(|(a, b)| 0.5 * (a - b)).collect();
    Ok(norm2(&matvec(basis_rows.as_ref(), &dq)))
}

/// One amplitude sample of a modal curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalPoint {
    pub alpha_hat: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub omega_over_lin: f64,
    pub damping: f64,
}

#[derive(Debug, Clone)]
pub struct ModalCurve {
    pub mode: usize,
    pub omega_lin: f64,
    pub points: Vec<ModalPoint>,
}

/// Evaluates frequency, damping and observed amplitude at each `α̂`.
pub fn modal_curve(
    record: &HysteresisRecord,
    mode: &ModeShape,
    amplitudes: &[f64],
    basis_rows: &Mat<f64>,
    per_quarter: usize,
) -> Result<ModalCurve> {
    let mut points = Vec::with_capacity(amplitudes.len());
    for &a in amplitudes {
        let p = modal_properties(record, a, per_quarter)?;
        points.push(ModalPoint {
            alpha_hat: a,
            amplitude: observed_amplitude(record, basis_rows, a)?,
            omega: p.omega,
            omega_over_lin: p.omega / mode.omega,
            damping: p.damping,
        });
    }
    Ok(ModalCurve {
        mode: mode.index,
        omega_lin: mode.omega,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_record_has_no_area() {
        let a: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
        let q: Vec<f64> = a.iter().map(|x| x / 9.0).collect();
        let rec = HysteresisRecord::symmetric(&a, &q);
        let p = modal_properties(&rec, 3.0, 100).unwrap();
        assert!((p.omega - 3.0).abs() < 1e-12);
        assert!(p.damping.abs() < 1e-14);
    }

    #[test]
    fn masing_loop_is_point_symmetric_and_closed() {
        let a: Vec<f64> = (0..=40).map(|k| k as f64 * 0.05).collect();
        let q: Vec<f64> = a.iter().map(|x| x + 0.3 * x * x).collect();
        let rec = HysteresisRecord::symmetric(&a, &q);
        let l = masing_cycle(&rec, 1.5, 50).unwrap();
        assert_eq!(l.first(), l.last());
        let n = 100;
        for k in 0..n {
            let (p, m) = (l[k], l[k + n]);
            assert!((p.0 + m.0).abs() < 1e-12 && (p.1 + m.1).abs() < 1e-12);
        }
        assert!(masing_cycle(&rec, 2.5, 10).is_err());
    }

    #[test]
    fn schedule_is_geometric() {
        let s = geometric_schedule(1.0, 100.0, 3).unwrap();
        assert_eq!(s.len(), 4);
        assert!((s[2] - 10.0).abs() < 1e-12 && s[3] == 100.0);
    }
}

//! End-to-end quasi-static runs: preload with geometric restriction, then
//! modal load sweeps.

mod case;

pub use case::{
    run_case, run_config, set_threads, write_artifacts, CaseOptions, CaseResult, PhaseClock,
};

use std::time::Instant;

use faer::Mat;
use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::contact::{
    check_invariants, step_increment, ContactState, InvariantReport, SolverOptions, StepReport,
};
use crate::coupling::{
    build_coupling, condense_static, node_coupling, CondenseOptions, CondensedSystem, InterfaceMesh,
};
use crate::error::{Error, Result};
use crate::halfspace::{assemble_compliance, ComplianceMatrix, ElasticHalfSpace};
use crate::linalg::{asymmetry, max_abs, DMat, GroupedFactor};
use crate::qsma::{
    geometric_schedule, linearized_modes, modal_curve, HysteresisRecord, ModalCurve,
    ModalLoadProblem, ModeShape,
};
use crate::rom::ReducedModel;
use crate::topography::{geometric_restriction, restriction_boundary, HeightProfile};

/// Second phase of an indenter preload: a tangential force along x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentialPhase {
    pub force: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreloadPlan {
    /// Total normal force [N].
    pub force: f64,
    pub steps: usize,
    pub tangential: Option<TangentialPhase>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictionPolicy {
    /// Depth below the highest point that is kept [m]; `None` keeps every point.
    pub depth_cutoff: Option<f64>,
    pub growth: f64,
    pub max_enlargements: usize,
}

impl Default for RestrictionPolicy {
    fn default() -> Self {
        Self {
            depth_cutoff: None,
            growth: 1.5,
            max_enlargements: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QsmaPlan {
    /// 1-based mode numbers of the contact-linearized model.
    pub modes: Vec<usize>,
    /// Evaluation amplitudes `α̂`, ascending.
    pub amplitudes: Vec<f64>,
    /// Geometric ramp steps between the first and last amplitude.
    pub ramp_steps: usize,
    pub per_quarter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub preload: PreloadPlan,
    pub restriction: RestrictionPolicy,
    pub qsma: Option<QsmaPlan>,
    pub solver: SolverOptions,
}

impl RunPlan {
    pub fn validate(&self) -> Result<()> {
        let p = &self.preload;
        if !(p.force >= 0.0 && p.force.is_finite()) {
            return Err(Error::Config(format!(
                "preload.force must be >= 0, got {}",
                p.force
            )));
        }
        if p.steps == 0 {
            return Err(Error::Config("preload.steps must be >= 1".into()));
        }
        if let Some(t) = p.tangential {
            if t.steps == 0 || !t.force.is_finite() {
                return Err(Error::Config(
                    "preload.tangential_steps must be >= 1 with a finite tangential_force".into(),
                ));
            }
        }
        let r = &self.restriction;
        if r.depth_cutoff.is_some_and(|c| !(c >= 0.0)) || !(r.growth > 1.0) {
            return Err(Error::Config(
                "restriction.depth_cutoff must be >= 0 and restriction.growth > 1".into(),
            ));
        }
        if let Some(q) = &self.qsma {
            if q.modes.is_empty() || q.modes.contains(&0) {
                return Err(Error::Config(
                    "qsma.modes must list 1-based mode numbers".into(),
                ));
            }
            if q.amplitudes.is_empty()
                || !(q.amplitudes[0] > 0.0)
                || q.amplitudes.windows(2).any(|w| w[1] <= w[0])
            {
                return Err(Error::Config(
                    "qsma amplitudes must be positive and strictly ascending".into(),
                ));
            }
            if q.ramp_steps == 0 || q.per_quarter == 0 {
                return Err(Error::Config(
                    "qsma.ramp_steps and qsma.per_quarter must be >= 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Structure behind the contact interface.
#[derive(Debug, Clone)]
pub enum Structure {
    /// Rigid indenter on the half-space pair. The normal (and, with a
    /// tangential phase, the x) rigid motion is force controlled.
    Indenter { tangential: bool },
    /// Reduced FE model. `floating` lists zero-energy boundary modes.
    Reduced {
        reduced: ReducedModel,
        interface: InterfaceMesh,
        floating: Option<DMat>,
        sensor_dofs: Vec<usize>,
        /// One contact point per interface node with zero compliance.
        node_based: bool,
    },
}

#[derive(Debug, Clone)]
pub struct Problem {
    /// Composite height over the contact grid; unused in node-based mode.
    pub profile: HeightProfile,
    /// Composite height at interface nodes for node-based mode.
    pub node_heights: Option<Vec<f64>>,
    pub halfspace: ElasticHalfSpace,
    pub mu: f64,
    pub structure: Structure,
}

/// Condensed system over one retained point set.
#[derive(Debug)]
pub struct Assembled {
    pub system: CondensedSystem,
    pub compliance: ComplianceMatrix,
    pub points: Vec<[f64; 2]>,
}

impl Problem {
    pub fn assemble(&self, retained: &[usize]) -> Result<Assembled> {
        if let Structure::Reduced {
            reduced,
            interface,
            floating,
            node_based: true,
            ..
        } = &self.structure
        {
            let (map, points, areas) = node_coupling(reduced, interface)?;
            let h = self
                .node_heights
                .clone()
                .unwrap_or_else(|| vec![0.0; points.len()]);
            let compliance = ComplianceMatrix::zeros((0..points.len()).collect(), areas);
            let opts = CondenseOptions {
                rigid_structure: false,
                floating: floating.clone(),
            };
            let system = condense_static(reduced, &map, &compliance, &h, &opts)?;
            return Ok(Assembled {
                system,
                compliance,
                points,
            });
        }
        let grid = &self.profile.grid;
        let points: Vec<[f64; 2]> = retained.iter().map(|&i| grid.point(i)).collect();
        let h: Vec<f64> = retained.iter().map(|&i| self.profile.heights[i]).collect();
        let compliance = assemble_compliance(
            &points,
            retained.to_vec(),
            [grid.pitch_x, grid.pitch_y],
            &self.halfspace,
            &self.halfspace,
        )?;
        let system = match &self.structure {
            Structure::Indenter { tangential } => {
                let c = points.len();
                let cols = if *tangential { 2 } else { 1 };
                let n = Mat::from_fn(3 * c, cols, |i, k| if i % 3 == k { 1.0 } else { 0.0 });
                CondensedSystem::rigid_bodies(&compliance, &h, Some(n))?
            }
            Structure::Reduced {
                reduced,
                interface,
                floating,
                ..
            } => {
                let map = build_coupling(reduced, &points, interface)?;
                let opts = CondenseOptions {
                    rigid_structure: false,
                    floating: floating.clone(),
                };
                condense_static(reduced, &map, &compliance, &h, &opts)?
            }
        };
        Ok(Assembled {
            system,
            compliance,
            points,
        })
    }

    fn reduced(&self) -> Option<&ReducedModel> {
        match &self.structure {
            Structure::Reduced { reduced, .. } => Some(reduced),
            Structure::Indenter { .. } => None,
        }
    }

    fn node_based(&self) -> bool {
        matches!(
            self.structure,
            Structure::Reduced {
                node_based: true,
                ..
            }
        )
    }

    /// Gap and rigid-load increments for a load step `(Δnormal, Δtangential)`.
    fn increment(&self, asm: &Assembled, dn: f64, dt: f64) -> (Vec<f64>, Vec<f64>) {
        match self.reduced() {
            None => {
                let mut df = vec![dn];
                if asm.system.n_rigid() > 1 {
                    df.push(dt);
                }
                (vec![0.0; 3 * asm.system.n_points()], df)
            }
            Some(red) => {
                let nb = red.n_boundary();
                let df_b: Vec<f64> = red.f_red[..nb].iter().map(|f| f * dn).collect();
                (asm.system.imposed_gap(&df_b), asm.system.rigid_load(&df_b))
            }
        }
    }
}

/// Per-step log entry of a quasi-static phase.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub phase: String,
    pub step: usize,
    /// Load carried at the end of the step: preload force [N] or modal scale.
    pub load: f64,
    pub report: StepReport,
    pub total_force: [f64; 3],
    pub invariants: InvariantReport,
    /// Relative residual of the rigid-mode force balance.
    pub balance: f64,
    pub wall_s: f64,
}

#[derive(Debug)]
pub struct PreloadResult {
    pub state: ContactState,
    pub assembled: Assembled,
    pub records: Vec<StepRecord>,
    /// Cutoff in effect at convergence.
    pub depth_cutoff: Option<f64>,
    pub enlargements: usize,
    /// Reduced preload `f̃₀` (empty for an indenter).
    pub reduced_load: Vec<f64>,
}

impl PreloadResult {
    /// Total force carried by the contact points.
    pub fn contact_force(&self) -> [f64; 3] {
        self.state.total_force()
    }
}

fn log_step(rec: &StepRecord) {
    info!(
        "{} step {} load {:e}: stick {} slip {} sep {} active {} pjor {} residual {:e} retries {} ({:.3} s)",
        rec.phase,
        rec.step,
        rec.load,
        rec.report.n_stick,
        rec.report.n_slip,
        rec.report.n_sep,
        rec.report.n_active,
        rec.report.pjor_iterations,
        rec.report.pjor_residual,
        rec.report.retries,
        rec.wall_s
    );
}

fn run_phase(
    problem: &Problem,
    asm: &Assembled,
    state: &mut ContactState,
    phase: &str,
    loads: &[(f64, f64)],
    opts: &SolverOptions,
    rigid_total: &mut [f64],
    records: &mut Vec<StepRecord>,
) -> Result<()> {
    let op = asm.system.operator();
    let mut carried = 0.0;
    for (k, &(dn, dt)) in loads.iter().enumerate() {
        let t0 = Instant::now();
        let (dg, df) = problem.increment(asm, dn, dt);
        let (next, report) = step_increment(state, &op, &dg, &df, opts)?;
        carried += dn + dt;
        for (total, d) in rigid_total.iter_mut().zip(&df) {
            *total += d;
        }
        let rec = StepRecord {
            phase: phase.to_string(),
            step: k + 1,
            load: carried,
            report,
            total_force: next.total_force(),
            invariants: check_invariants(state, &next),
            balance: asm.system.rigid_balance(rigid_total, &next.force),
            wall_s: t0.elapsed().as_secs_f64(),
        };
        log_step(&rec);
        records.push(rec);
        *state = next;
    }
    Ok(())
}

/// Steps the preload to its final magnitude, enlarging the geometric
/// restriction whenever a point on its boundary ends up loaded.
pub fn run_preload(plan: &RunPlan, problem: &Problem) -> Result<PreloadResult> {
    plan.validate()?;
    let policy = plan.restriction;
    let mut cutoff = policy.depth_cutoff;
    let mut enlargements = 0;
    loop {
        let retained: Vec<usize> = match cutoff {
            Some(c) if !problem.node_based() => geometric_restriction(&problem.profile, c)?,
            _ => problem.profile.included().collect(),
        };
        info!(
            "preload with {} retained points (cutoff {:?})",
            retained.len(),
            cutoff
        );
        let asm = problem.assemble(&retained)?;
        let mut state = ContactState::initial(
            &asm.system.h,
            problem.mu,
            asm.system.element_area.clone(),
            asm.system.n_rigid(),
        );
        let mut records = Vec::new();
        let mut rigid_total = vec![0.0; asm.system.n_rigid()];
        let p = &plan.preload;
        let dn = p.force / p.steps as f64;
        run_phase(
            problem,
            &asm,
            &mut state,
            "preload",
            &vec![(dn, 0.0); p.steps],
            &plan.solver,
            &mut rigid_total,
            &mut records,
        )?;
        if let Some(t) = p.tangential {
            if asm.system.n_rigid() < 2 {
                return Err(Error::Config(
                    "a tangential preload phase needs an indenter with tangential control".into(),
                ));
            }
            let dt = t.force / t.steps as f64;
            run_phase(
                problem,
                &asm,
                &mut state,
                "tangential",
                &vec![(0.0, dt); t.steps],
                &plan.solver,
                &mut rigid_total,
                &mut records,
            )?;
        }

        let loaded_boundary = if cutoff.is_some() && !problem.node_based() {
            let boundary = restriction_boundary(&problem.profile, &retained);
            let fmax = (0..state.n_points())
                .map(|j| state.normal_force(j))
                .fold(0.0, f64::max);
            let pos: std::collections::HashMap<usize, usize> =
                retained.iter().enumerate().map(|(k, &i)| (i, k)).collect();
            boundary
                .iter()
                .filter(|i| state.normal_force(pos[i]) > 1e-12 * fmax)
                .count()
        } else {
            0
        };
        if loaded_boundary == 0 {
            let reduced_load = problem
                .reduced()
                .map(|r| r.f_red.iter().map(|f| f * p.force).collect())
                .unwrap_or_default();
            return Ok(PreloadResult {
                state,
                assembled: asm,
                records,
                depth_cutoff: cutoff,
                enlargements,
                reduced_load,
            });
        }
        if enlargements == policy.max_enlargements {
            return Err(Error::Restriction(format!(
                "{loaded_boundary} boundary points still loaded after {enlargements} enlargements"
            )));
        }
        enlargements += 1;
        let c = cutoff.expect("cutoff is set") * policy.growth;
        info!("{loaded_boundary} restriction boundary points loaded; enlarging cutoff to {c:e}");
        cutoff = Some(c);
    }
}

/// Modal sweep results for one mode.
#[derive(Debug, Clone)]
pub struct ModalResult {
    pub mode: ModeShape,
    pub record: HysteresisRecord,
    pub curve: ModalCurve,
}

/// Ramp schedule: zero, the geometric ramp over the amplitude range and the
/// amplitudes themselves.
pub fn sweep_schedule(plan: &QsmaPlan) -> Result<Vec<f64>> {
    let (lo, hi) = (
        plan.amplitudes[0],
        *plan.amplitudes.last().expect("amplitudes"),
    );
    let mut s = geometric_schedule(lo, hi, plan.ramp_steps)?;
    s.extend_from_slice(&plan.amplitudes);
    s.sort_by(f64::total_cmp);
    s.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    Ok(s)
}

/// Contact-linearized modes and modal sweeps around the preload state.
pub fn run_qsma(
    plan: &QsmaPlan,
    problem: &Problem,
    pre: &PreloadResult,
    opts: &SolverOptions,
    records: &mut Vec<StepRecord>,
) -> Result<Vec<ModalResult>> {
    let Structure::Reduced {
        reduced,
        sensor_dofs,
        ..
    } = &problem.structure
    else {
        return Err(Error::Config("modal analysis needs an FE structure".into()));
    };
    let n_modes = *plan.modes.iter().max().expect("modes");
    let asm = &pre.assembled;
    let modes = linearized_modes(reduced, &asm.system, &asm.compliance, &pre.state, n_modes)?;
    let schedule = sweep_schedule(plan)?;
    let basis = reduced.basis_rows(sensor_dofs);
    let lp = ModalLoadProblem {
        reduced,
        system: &asm.system,
        preload: &pre.reduced_load,
        state: &pre.state,
        opts: *opts,
    };
    let mut out = Vec::new();
    for &m in &plan.modes {
        let mode = modes
            .get(m - 1)
            .ok_or_else(|| Error::Config(format!("mode {m} exceeds the reduced model size")))?;
        info!("mode {m}: linearized frequency {:.6e} rad/s", mode.omega);
        let t0 = Instant::now();
        let record = lp.sweep(mode, &schedule)?;
        let curve = modal_curve(&record, mode, &plan.amplitudes, &basis, plan.per_quarter)?;
        info!("mode {m}: sweep took {:.3} s", t0.elapsed().as_secs_f64());
        for p in &curve.points {
            debug!(
                "mode {m} amplitude {:e}: omega/omega_lin {:.6} damping {:.3e}",
                p.alpha_hat, p.omega_over_lin, p.damping
            );
        }
        for (dir, branch) in [("pos", &record.positive), ("neg", &record.negative)] {
            for (k, st) in branch.steps.iter().enumerate() {
                let rec = StepRecord {
                    phase: format!("qsma-mode{m}-{dir}"),
                    step: k + 1,
                    load: st.alpha,
                    report: st.report.clone(),
                    total_force: [0.0; 3],
                    invariants: st.invariants.clone(),
                    balance: st.balance,
                    wall_s: 0.0,
                };
                log_step(&rec);
                records.push(rec);
            }
        }
        out.push(ModalResult {
            mode: mode.clone(),
            record,
            curve,
        });
    }
    Ok(out)
}

/// Symmetry and definiteness of the half-space compliance and the
/// condensed operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorReport {
    pub compliance_asymmetry: f64,
    pub compliance_spd: bool,
    pub operator_asymmetry: f64,
    /// `C*` (plus `N Nᵀ` when it carries floating modes) admits a Cholesky factor.
    pub operator_spd: bool,
}

impl OperatorReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.compliance_asymmetry <= tol
            && self.operator_asymmetry <= tol
            && self.compliance_spd
            && self.operator_spd
    }
}

fn factors(a: &DMat) -> bool {
    let comp: Vec<usize> = (0..a.nrows()).map(|k| k % 3).collect();
    GroupedFactor::new(a.as_ref(), &comp, 3, "check").is_ok()
}

pub fn operator_checks(asm: &Assembled) -> OperatorReport {
    let c = &asm.compliance.entries;
    let (compliance_asymmetry, compliance_spd) = if asm.compliance.is_zero() {
        (0.0, true)
    } else {
        (asymmetry(c.as_ref()), factors(c))
    };
    let cs = &asm.system.c_star;
    let shifted = match &asm.system.n_rigid {
        Some(n) if asm.compliance.is_zero() => {
            let s = max_abs(cs.as_ref()).max(f64::MIN_POSITIVE);
            cs + (n * n.transpose()) * faer::Scale(s)
        }
        _ => cs.clone(),
    };
    OperatorReport {
        compliance_asymmetry,
        compliance_spd,
        operator_asymmetry: asymmetry(cs.as_ref()),
        operator_spd: factors(&shifted),
    }
}

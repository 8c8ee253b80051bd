//! One load increment of the active-set strategy.

use faer::linalg::solvers::Solve;
use faer::Mat;

use super::pjor::{pjor_solve, Cone};
use super::stick::{build_delassus, closing_gap, predict_with_flags, DelassusProblem, StickBlock};
use super::{
    classify_sets, dofs_of, ContactLaw, ContactOperator, ContactSets, ContactState, PointStatus,
    SolverOptions,
};
use crate::error::{Error, Result};
use crate::linalg::{matvec, norm_inf, SpdFactor};

#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub retries: usize,
    pub pjor_iterations: usize,
    pub pjor_residual: f64,
    pub n_sep: usize,
    pub n_stick: usize,
    pub n_slip: usize,
    pub n_active: usize,
    pub rigid_outer_iterations: usize,
}

struct SetSolution {
    dlam: Vec<f64>,
    da: Vec<f64>,
    iterations: usize,
    residual: f64,
    outer: usize,
}

fn insert_sorted(v: &mut Vec<usize>, j: usize) {
    if let Err(pos) = v.binary_search(&j) {
        v.insert(pos, j);
    }
}

/// Applies one increment `(Δg_ex, ΔF)` and returns the converged state.
pub fn step_increment(
    state: &ContactState,
    op: &ContactOperator<'_>,
    dg_ex: &[f64],
    df: &[f64],
    opts: &SolverOptions,
) -> Result<(ContactState, StepReport)> {
    let c = state.n_points();
    assert_eq!(dg_ex.len(), 3 * c);
    assert_eq!(df.len(), op.n_rigid());

    if opts.law == ContactLaw::LinearTie {
        let all: Vec<usize> = (0..c).collect();
        let block = StickBlock::new(op, &all, true)?;
        if !block.controls_rigid() {
            return Err(Error::Singular(
                "bonded interface does not restrain the rigid modes".into(),
            ));
        }
        let top: Vec<f64> = dg_ex.iter().map(|v| -v).collect();
        let (dlam, da) = block.solve(&top, df);
        let sol = SetSolution {
            dlam,
            da,
            iterations: 0,
            residual: 0.0,
            outer: 0,
        };
        let sets = ContactSets {
            sep: vec![],
            cl: all.clone(),
            st: all,
            a: vec![],
        };
        return Ok(finish(state, op, dg_ex, df, sol, sets, 0, opts));
    }

    let (mut sep, mut cl) = classify_sets(state);
    let mut flags = state.sticking.clone();
    // moved to the active set by verification; never re-predicted as sticking
    let mut forced = vec![false; c];
    // closed during this increment, and reopened once during re-prediction
    let mut fresh = vec![false; c];
    let mut reopened = vec![false; c];
    let mut retries = 0usize;
    let bump = |retries: &mut usize| {
        *retries += 1;
        if *retries > opts.max_retries {
            Err(Error::RetryBound(opts.max_retries))
        } else {
            Ok(())
        }
    };

    'predict: loop {
        let pred = predict_with_flags(state, &flags, op, &cl, dg_ex, df)?;
        let reopen: Vec<usize> = pred
            .a
            .iter()
            .copied()
            .filter(|&j| {
                fresh[j]
                    && !reopened[j]
                    && !forced[j]
                    && state.force[3 * j] + pred.dlam[3 * j] <= 0.0
            })
            .collect();
        if !reopen.is_empty() && pred.block.as_ref().is_some_and(|b| b.controls_rigid()) {
            for &j in &reopen {
                reopened[j] = true;
                fresh[j] = false;
                insert_sorted(&mut sep, j);
            }
            cl.retain(|j| !reopen.contains(j));
            bump(&mut retries)?;
            continue 'predict;
        }
        let mut st = pred.st;
        let mut a = pred.a;
        for &j in st.iter().filter(|&&j| forced[j]) {
            insert_sorted(&mut a, j);
        }
        st.retain(|&j| !forced[j]);
        let mut block = if a.is_empty() { pred.block } else { None };
        let supported = !st.is_empty()
            && block
                .as_ref()
                .is_some_and(|b| b.r == op.n_rigid() && b.controls_rigid());
        if op.n_rigid() > 0 && a.is_empty() && !supported {
            if sep.iter().any(|&j| !reopened[j]) {
                // the rigid load must find its support among the open points
                for &j in &sep {
                    fresh[j] = true;
                    flags[j] = true;
                    insert_sorted(&mut cl, j);
                }
                sep.clear();
                bump(&mut retries)?;
                continue 'predict;
            }
            a.append(&mut sep);
            a.sort_unstable();
            block = None;
        }
        let guess: Vec<f64> = state
            .force
            .iter()
            .zip(&pred.dlam)
            .map(|(x, d)| x + d)
            .collect();

        loop {
            let sol = solve_sets(state, op, &st, &a, dg_ex, df, block.take(), &guess, opts)?;
            let dg = gap_increment(op, &sol.dlam, &sol.da, dg_ex);
            let (tol_f, tol_g) = tolerances(state, &sol.dlam, &dg, df, opts.verify_tol);

            let mu = state.mu;
            let bad_st: Vec<usize> = st
                .iter()
                .copied()
                .filter(|&j| {
                    let ln = state.force[3 * j] + sol.dlam[3 * j];
                    let lt = (state.force[3 * j + 1] + sol.dlam[3 * j + 1])
                        .hypot(state.force[3 * j + 2] + sol.dlam[3 * j + 2]);
                    ln < -tol_f || lt > mu * ln + tol_f
                })
                .collect();
            let bad_sep: Vec<usize> = sep
                .iter()
                .copied()
                .filter(|&j| state.gap[3 * j] + dg[3 * j] < -tol_g)
                .collect();
            if bad_st.is_empty() && bad_sep.is_empty() {
                let mut cl_all = st.clone();
                for &j in &a {
                    insert_sorted(&mut cl_all, j);
                }
                let sets = ContactSets {
                    sep,
                    cl: cl_all,
                    st,
                    a,
                };
                return Ok(finish(state, op, dg_ex, df, sol, sets, retries, opts));
            }
            bump(&mut retries)?;
            for &j in &bad_st {
                forced[j] = true;
            }
            if bad_sep.iter().any(|&j| !reopened[j]) {
                // newly closing points enter as stick candidates
                for &j in &bad_sep {
                    if reopened[j] {
                        forced[j] = true;
                    } else {
                        fresh[j] = true;
                        flags[j] = true;
                    }
                    insert_sorted(&mut cl, j);
                }
                sep.retain(|j| !bad_sep.contains(j));
                continue 'predict;
            }
            for &j in bad_st.iter().chain(&bad_sep) {
                forced[j] = true;
                insert_sorted(&mut a, j);
                insert_sorted(&mut cl, j);
            }
            st.retain(|j| !bad_st.contains(j));
            sep.retain(|j| !bad_sep.contains(j));
        }
    }
}

fn gap_increment(op: &ContactOperator<'_>, dlam: &[f64], da: &[f64], dg_ex: &[f64]) -> Vec<f64> {
    let mut dg = matvec(op.c_star, dlam);
    for (x, e) in dg.iter_mut().zip(dg_ex) {
        *x += e;
    }
    if let Some(n) = op.rigid {
        let v = matvec(n, da);
        for (x, e) in dg.iter_mut().zip(&v) {
            *x += e;
        }
    }
    dg
}

fn tolerances(state: &ContactState, dlam: &[f64], dg: &[f64], df: &[f64], rel: f64) -> (f64, f64) {
    let new_force: Vec<f64> = state.force.iter().zip(dlam).map(|(a, b)| a + b).collect();
    let fs = norm_inf(&new_force)
        .max(norm_inf(df))
        .max(f64::MIN_POSITIVE);
    let gs = state
        .gap
        .iter()
        .zip(dg)
        .fold(norm_inf(dg), |m, (g, d)| m.max((g + d).abs()))
        .max(f64::MIN_POSITIVE);
    (rel * fs, rel * gs)
}

#[allow(clippy::too_many_arguments)]
fn solve_sets(
    state: &ContactState,
    op: &ContactOperator<'_>,
    st: &[usize],
    a: &[usize],
    dg_ex: &[f64],
    df: &[f64],
    block: Option<StickBlock>,
    guess: &[f64],
    opts: &SolverOptions,
) -> Result<SetSolution> {
    let c = state.n_points();
    let r = op.n_rigid();
    let mut dlam = vec![0.0; 3 * c];
    // sticking points end the increment closed
    let mut dg_st = dg_ex.to_vec();
    for i in dofs_of(st) {
        dg_st[i] += closing_gap(state, i);
    }
    let dg_ex = &dg_st[..];
    if a.is_empty() {
        if st.is_empty() {
            if df.iter().any(|&f| f != 0.0) {
                return Err(Error::Singular(
                    "no closed contact point can carry the rigid-body load".into(),
                ));
            }
            return Ok(SetSolution {
                dlam,
                da: vec![0.0; r],
                iterations: 0,
                residual: 0.0,
                outer: 0,
            });
        }
        let block = match block {
            Some(b) if b.points == st => b,
            _ => StickBlock::new(op, st, true)?,
        };
        if !block.controls_rigid() {
            return Err(Error::Singular(
                "stick set does not restrain the rigid modes".into(),
            ));
        }
        let top: Vec<f64> = block.dofs().iter().map(|&i| -dg_ex[i]).collect();
        let (x, da) = block.solve(&top, df);
        for (k, &i) in block.dofs().iter().enumerate() {
            dlam[i] = x[k];
        }
        return Ok(SetSolution {
            dlam,
            da,
            iterations: 0,
            residual: 0.0,
            outer: 0,
        });
    }

    let prob = build_delassus(op, st, a, dg_ex, df, block)?;
    let a_dofs = dofs_of(a);
    let lam_prev: Vec<f64> = a_dofs.iter().map(|&i| state.force[i]).collect();
    let x0: Vec<f64> = a_dofs.iter().map(|&i| guess[i]).collect();
    let glp = matvec(prob.g_mat.as_ref(), &lam_prev);
    // shift to total forces and position-level normal gaps
    let mut base = prob.c_vec.clone();
    for k in 0..base.len() {
        base[k] -= glp[k];
        if k % 3 == 0 {
            base[k] += state.gap[a_dofs[k]];
        }
    }
    let cone = Cone::Coulomb { mu: state.mu };

    let (x, da, iterations, residual, outer) = if prob.rigid_controlled() {
        let res = pjor_solve(prob.g_mat.as_ref(), &base, cone, &x0, &opts.pjor)?;
        (res.x, vec![0.0; r], res.iterations, res.residual, 0)
    } else {
        rigid_outer_loop(state, op, &prob, &base, &lam_prev, &x0, df, opts)?
    };

    let dlam_a: Vec<f64> = x.iter().zip(&lam_prev).map(|(a, b)| a - b).collect();
    let (dlam_s, da) = prob.expand(op, &dlam_a, &da);
    for (k, &i) in a_dofs.iter().enumerate() {
        dlam[i] = dlam_a[k];
    }
    for (k, &i) in prob.stick().dofs().iter().enumerate() {
        dlam[i] = dlam_s[k];
    }
    Ok(SetSolution {
        dlam,
        da,
        iterations,
        residual,
        outer,
    })
}

/// Broyden iteration on the rigid increment when the stick set cannot carry
/// the rigid-mode constraint.
#[allow(clippy::too_many_arguments)]
fn rigid_outer_loop(
    state: &ContactState,
    op: &ContactOperator<'_>,
    prob: &DelassusProblem,
    base: &[f64],
    lam_prev: &[f64],
    x0: &[f64],
    df: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<f64>, usize, f64, usize)> {
    let r = op.n_rigid();
    let n = op.rigid.expect("rigid columns");
    let cr = prob.c_rigid.as_ref().expect("uncontrolled rigid modes");
    let cone = Cone::Coulomb { mu: state.mu };
    let mut x_warm = x0.to_vec();
    let mut iters = 0usize;

    let eval = |da: &[f64],
                x_warm: &mut Vec<f64>,
                iters: &mut usize|
     -> Result<(Vec<f64>, f64, Vec<f64>)> {
        let shift = matvec(cr.as_ref(), da);
        let cc: Vec<f64> = base.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let res = pjor_solve(prob.g_mat.as_ref(), &cc, cone, x_warm, &opts.pjor)?;
        *iters += res.iterations;
        *x_warm = res.x.clone();
        let dlam_a: Vec<f64> = res.x.iter().zip(lam_prev).map(|(a, b)| a - b).collect();
        let (dlam_s, _) = prob.expand(op, &dlam_a, da);
        let mut resid = vec![0.0; r];
        let a_dofs = dofs_of(&prob.active);
        for (k, &i) in a_dofs.iter().enumerate() {
            for q in 0..r {
                resid[q] += n[(i, q)] * dlam_a[k];
            }
        }
        for (k, &i) in prob.stick().dofs().iter().enumerate() {
            for q in 0..r {
                resid[q] += n[(i, q)] * dlam_s[k];
            }
        }
        for q in 0..r {
            resid[q] -= df[q];
        }
        Ok((resid, res.residual, res.x))
    };

    // initial Jacobian from the fully bonded closed set
    let mut cl = prob.active.clone();
    cl.extend_from_slice(&prob.stick().points);
    cl.sort_unstable();
    let cd = dofs_of(&cl);
    let ccl = crate::linalg::select(op.c_star, &cd, &cd);
    let ncl = crate::linalg::select(n, &cd, &(0..r).collect::<Vec<_>>());
    let f = SpdFactor::new(ccl.as_ref(), "closed block of C*")?;
    let mut jac: Mat<f64> = -(ncl.transpose() * f.solve_mat(ncl.as_ref()));

    let scale = norm_inf(df)
        .max(
            cl.iter()
                .map(|&j| state.force[3 * j].abs())
                .fold(0.0, f64::max),
        )
        .max(f64::MIN_POSITIVE);
    let tol = 10.0 * opts.pjor.tol.max(1e-12) * scale;
    let mut da = vec![0.0; r];
    let (mut resid, mut pres, mut x) = eval(&da, &mut x_warm, &mut iters)?;
    if r == 1 {
        // the balance residual is monotone in a single rigid coordinate:
        // bracket the root, then Illinois false position
        let (mut a0, mut f0) = (0.0, resid[0]);
        if f0.abs() <= tol {
            return Ok((x, da, iters, pres, 0));
        }
        let mut step = -f0 / jac[(0, 0)];
        let mut outer = 0usize;
        let (mut a1, mut f1);
        loop {
            outer += 1;
            a1 = a0 + step;
            let (r1, p1, x1) = eval(&[a1], &mut x_warm, &mut iters)?;
            f1 = r1[0];
            if f1.abs() <= tol {
                return Ok((x1, vec![a1], iters, p1, outer));
            }
            if f1.signum() != f0.signum() {
                break;
            }
            if outer > 60 {
                return Err(Error::NoConvergence {
                    iterations: iters,
                    residual: f1.abs(),
                });
            }
            let slope = (f1 - f0) / step;
            let secant = -f1 / slope;
            step = if slope != 0.0 && secant.signum() == step.signum() {
                secant.max(step).min(4.0 * step).max(step.min(secant))
            } else {
                2.0 * step
            };
            (a0, f0) = (a1, f1);
        }
        let mut side = 0i8;
        for _ in 0..200 {
            outer += 1;
            let a = (a0 * f1 - a1 * f0) / (f1 - f0);
            let (rr, pp, xx) = eval(&[a], &mut x_warm, &mut iters)?;
            let f = rr[0];
            if f.abs() <= tol || (a1 - a0).abs() <= 4.0 * f64::EPSILON * a.abs() {
                return Ok((xx, vec![a], iters, pp, outer));
            }
            if f.signum() == f1.signum() {
                (a1, f1) = (a, f);
                if side == -1 {
                    f0 *= 0.5;
                }
                side = -1;
            } else {
                (a0, f0) = (a, f);
                if side == 1 {
                    f1 *= 0.5;
                }
                side = 1;
            }
        }
        return Err(Error::NoConvergence {
            iterations: iters,
            residual: f0.abs().min(f1.abs()),
        });
    }
    for outer in 0..200 {
        if norm_inf(&resid) <= tol {
            return Ok((x, da, iters, pres, outer));
        }
        let step = jac
            .partial_piv_lu()
            .solve(Mat::from_fn(r, 1, |i, _| -resid[i]).as_ref());
        let s: Vec<f64> = (0..r).map(|i| step[(i, 0)]).collect();
        let trial: Vec<f64> = da.iter().zip(&s).map(|(a, b)| a + b).collect();
        let (r2, p2, x2) = eval(&trial, &mut x_warm, &mut iters)?;
        let y: Vec<f64> = r2.iter().zip(&resid).map(|(a, b)| a - b).collect();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        if norm_inf(&y) <= f64::EPSILON * norm_inf(&resid) {
            // flat region while every point is open: widen the next step
            jac *= faer::Scale(0.5);
        } else if ss > 0.0 {
            let js = matvec(jac.as_ref(), &s);
            for i in 0..r {
                for k in 0..r {
                    jac[(i, k)] += (y[i] - js[i]) * s[k] / ss;
                }
            }
        }
        da = trial;
        resid = r2;
        pres = p2;
        x = x2;
    }
    Err(Error::NoConvergence {
        iterations: iters,
        residual: norm_inf(&resid),
    })
}

fn finish(
    state: &ContactState,
    op: &ContactOperator<'_>,
    dg_ex: &[f64],
    df: &[f64],
    sol: SetSolution,
    sets: ContactSets,
    retries: usize,
    opts: &SolverOptions,
) -> (ContactState, StepReport) {
    let dg = gap_increment(op, &sol.dlam, &sol.da, dg_ex);
    let (tol_f, tol_g) = tolerances(state, &sol.dlam, &dg, df, opts.verify_tol);
    let mut next = state.clone();
    for i in 0..next.force.len() {
        next.force[i] += sol.dlam[i];
        next.gap[i] += dg[i];
    }
    for (x, d) in next.rigid.iter_mut().zip(&sol.da) {
        *x += d;
    }
    let mut in_a = vec![false; state.n_points()];
    for &j in &sets.a {
        in_a[j] = true;
    }
    for j in 0..next.n_points() {
        let ln = next.force[3 * j];
        let slip = dg[3 * j + 1].hypot(dg[3 * j + 2]);
        next.status[j] = if ln <= tol_f && opts.law != ContactLaw::LinearTie {
            PointStatus::Sep
        } else if in_a[j] && slip > tol_g {
            PointStatus::Slip
        } else {
            PointStatus::Stick
        };
        next.sticking[j] = next.status[j] == PointStatus::Stick;
    }
    let report = StepReport {
        retries,
        pjor_iterations: sol.iterations,
        pjor_residual: sol.residual,
        n_sep: next.count(PointStatus::Sep),
        n_stick: next.count(PointStatus::Stick),
        n_slip: next.count(PointStatus::Slip),
        n_active: sets.a.len(),
        rigid_outer_iterations: sol.outer,
    };
    next.sets = sets;
    (next, report)
}

/// Worst-case violations of the contact conditions over one converged increment,
/// normalized by the force and gap scales of the state.
#[derive(Debug, Clone, Default)]
pub struct InvariantReport {
    pub min_normal_force: f64,
    pub min_normal_gap: f64,
    pub max_complementarity: f64,
    pub max_cone_excess: f64,
    pub max_slip_cone_mismatch: f64,
    pub max_dissipation_sign: f64,
}

impl InvariantReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.min_normal_force >= -tol
            && self.min_normal_gap >= -tol
            && self.max_complementarity <= tol
            && self.max_cone_excess <= tol
            && self.max_slip_cone_mismatch <= tol
            && self.max_dissipation_sign <= tol
    }
}

pub fn check_invariants(prev: &ContactState, next: &ContactState) -> InvariantReport {
    let fs = norm_inf(&next.force).max(f64::MIN_POSITIVE);
    let dg: Vec<f64> = next.gap.iter().zip(&prev.gap).map(|(a, b)| a - b).collect();
    let gs = norm_inf(&next.gap)
        .max(norm_inf(&dg))
        .max(norm_inf(&next.rigid))
        .max(f64::MIN_POSITIVE);
    let mu = next.mu;
    let mut rep = InvariantReport {
        min_normal_force: f64::INFINITY,
        min_normal_gap: f64::INFINITY,
        ..Default::default()
    };
    for j in 0..next.n_points() {
        let ln = next.force[3 * j];
        let gn = next.gap[3 * j];
        let lt = [next.force[3 * j + 1], next.force[3 * j + 2]];
        let dgt = [dg[3 * j + 1], dg[3 * j + 2]];
        let nlt = lt[0].hypot(lt[1]);
        let ndg = dgt[0].hypot(dgt[1]);
        rep.min_normal_force = rep.min_normal_force.min(ln / fs);
        rep.min_normal_gap = rep.min_normal_gap.min(gn / gs);
        rep.max_complementarity = rep.max_complementarity.max((ln / fs * gn / gs).abs());
        rep.max_cone_excess = rep.max_cone_excess.max((nlt - mu * ln) / fs);
        if ndg > 1e-6 * gs {
            rep.max_slip_cone_mismatch = rep.max_slip_cone_mismatch.max((nlt - mu * ln).abs() / fs);
            let dot = (lt[0] * dgt[0] + lt[1] * dgt[1]) / (fs * ndg);
            rep.max_dissipation_sign = rep.max_dissipation_sign.max(dot);
        }
    }
    rep
}

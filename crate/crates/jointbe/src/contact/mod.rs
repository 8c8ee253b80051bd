//! Incremental Coulomb-Signorini contact solver on a condensed compliance.
//!
//! Unknowns per point are ordered (normal, t1, t2). Gaps follow
//! `g = C* λ + g_ex + N a`, where the optional columns `N` describe rigid-body
//! modes of the structure that are left floating and force controlled:
//! `Nᵀ λ = F`.

mod increment;
mod pjor;
mod stick;

use faer::MatRef;

pub use increment::{check_invariants, step_increment, InvariantReport, StepReport};
pub use pjor::{pjor_solve, proj_disk, proj_nonneg, step_sizes, Cone, PjorOptions, PjorResult};
pub use stick::{build_delassus, predict_stick, DelassusProblem, Prediction, StickBlock};

/// Condensed operator seen by the contact solver.
#[derive(Clone, Copy)]
pub struct ContactOperator<'a> {
    pub c_star: MatRef<'a, f64>,
    /// `N` (3C × r), or `None` when the structure has no floating modes.
    pub rigid: Option<MatRef<'a, f64>>,
}

impl<'a> ContactOperator<'a> {
    pub fn n_points(&self) -> usize {
        self.c_star.nrows() / 3
    }

    pub fn n_rigid(&self) -> usize {
        self.rigid.map_or(0, |n| n.ncols())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Sep,
    Stick,
    Slip,
}

impl PointStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointStatus::Sep => "sep",
            PointStatus::Stick => "stick",
            PointStatus::Slip => "slip",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sep" => Some(PointStatus::Sep),
            "stick" => Some(PointStatus::Stick),
            "slip" => Some(PointStatus::Slip),
            _ => None,
        }
    }
}

/// How contact points respond to load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactLaw {
    Coulomb,
    /// Every point bonded in all directions; turns the solver into a linear map.
    LinearTie,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContactSets {
    pub sep: Vec<usize>,
    pub cl: Vec<usize>,
    pub st: Vec<usize>,
    pub a: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ContactState {
    pub gap: Vec<f64>,
    pub force: Vec<f64>,
    pub rigid: Vec<f64>,
    /// Tangential gap increment of the last converged increment was zero.
    pub sticking: Vec<bool>,
    pub status: Vec<PointStatus>,
    pub sets: ContactSets,
    pub mu: f64,
    pub element_area: Vec<f64>,
}

impl ContactState {
    /// Unloaded state with normal gaps `-h`.
    pub fn initial(heights: &[f64], mu: f64, element_area: Vec<f64>, n_rigid: usize) -> Self {
        let c = heights.len();
        let mut gap = vec![0.0; 3 * c];
        for (j, h) in heights.iter().enumerate() {
            gap[3 * j] = -h;
        }
        Self {
            gap,
            force: vec![0.0; 3 * c],
            rigid: vec![0.0; n_rigid],
            sticking: vec![true; c],
            status: vec![PointStatus::Sep; c],
            sets: ContactSets::default(),
            mu,
            element_area,
        }
    }

    pub fn n_points(&self) -> usize {
        self.sticking.len()
    }

    pub fn normal_gap(&self, j: usize) -> f64 {
        self.gap[3 * j]
    }

    pub fn normal_force(&self, j: usize) -> f64 {
        self.force[3 * j]
    }

    pub fn tangential_force(&self, j: usize) -> f64 {
        self.force[3 * j + 1].hypot(self.force[3 * j + 2])
    }

    pub fn pressure(&self, j: usize) -> f64 {
        self.force[3 * j] / self.element_area[j]
    }

    pub fn total_force(&self) -> [f64; 3] {
        let mut t = [0.0; 3];
        for j in 0..self.n_points() {
            for d in 0..3 {
                t[d] += self.force[3 * j + d];
            }
        }
        t
    }

    pub fn count(&self, s: PointStatus) -> usize {
        self.status.iter().filter(|&&x| x == s).count()
    }
}

/// Splits points into strictly open, unloaded points and the rest.
pub fn classify_sets(state: &ContactState) -> (Vec<usize>, Vec<usize>) {
    let mut sep = Vec::new();
    let mut cl = Vec::new();
    for j in 0..state.n_points() {
        if state.normal_gap(j) > 0.0 && state.normal_force(j) == 0.0 {
            sep.push(j);
        } else {
            cl.push(j);
        }
    }
    (sep, cl)
}

/// Expands point indices to their three DOF indices.
pub fn dofs_of(points: &[usize]) -> Vec<usize> {
    points
        .iter()
        .flat_map(|&p| [3 * p, 3 * p + 1, 3 * p + 2])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub pjor: PjorOptions,
    pub max_retries: usize,
    pub law: ContactLaw,
    /// Relative tolerance of the post-solve set verification.
    pub verify_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            pjor: PjorOptions::default(),
            max_retries: 100,
            law: ContactLaw::Coulomb,
            verify_tol: 1e-8,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        let mut s = ContactState::initial(&[-1.0, 0.0, -2.0], 0.3, vec![1.0; 3], 0);
        let (sep, cl) = classify_sets(&s);
        assert_eq!(sep, vec![0, 2]);
        // grazing point
        assert_eq!(cl, vec![1]);
        s.gap[0] = 0.0;
        s.force[0] = 2.0;
        let (sep, cl) = classify_sets(&s);
        assert_eq!((sep, cl), (vec![2], vec![0, 1]));
        let open = ContactState::initial(&[-1.0, -1.0], 0.3, vec![1.0; 2], 0);
        assert!(classify_sets(&open).1.is_empty());
    }
}

//! TOML run configuration.
//!
//! Units are SI throughout: metres, newtons, pascals, kg/m³.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contact::{ContactLaw, PjorOptions, SolverOptions};
use crate::driver::{
    PreloadPlan, Problem, QsmaPlan, RestrictionPolicy, RunPlan, Structure, TangentialPhase,
};
use crate::error::{Error, Result};
use crate::halfspace::ElasticHalfSpace;
use crate::io::FeBundle;
use crate::minifem::{build_lap_joint, ElementKind, FarEnd, LapJointSpec, Material};
use crate::rom::{craig_bampton, relative_transform, ReducedModel};
use crate::topography::{
    compose_profiles, synthesize_roughness, BeGrid, HeightProfile, RoughnessSpec,
};

/// Configurations shipped with the crate, by file name.
pub const BUNDLED: [(&str, &str); 4] = [
    ("hertz.cfg", include_str!("../configs/hertz.cfg")),
    ("cattaneo.cfg", include_str!("../configs/cattaneo.cfg")),
    ("flatpunch.cfg", include_str!("../configs/flatpunch.cfg")),
    (
        "lapjoint_form.cfg",
        include_str!("../configs/lapjoint_form.cfg"),
    ),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub material: MaterialSection,
    pub grid: GridSection,
    #[serde(default)]
    pub topography: TopographySection,
    pub indenter: Option<IndenterSection>,
    pub fixture: Option<FixtureSection>,
    pub fe_model: Option<FeModelSection>,
    pub preload: PreloadSection,
    #[serde(default)]
    pub restriction: RestrictionSection,
    pub qsma: Option<QsmaSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Shared by the half-space pair and, for the fixture, the FE plates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    #[serde(default = "MaterialSection::default_density")]
    pub density: f64,
    pub friction_coefficient: f64,
}

impl MaterialSection {
    fn default_density() -> f64 {
        7850.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Boundary-element pitch [m].
    pub pitch: f64,
    /// Half-width of the square grid centred on an indenter [m].
    pub half_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    #[default]
    Flat,
    /// Cosine-squared bump `h cos²(πr / 2R)` centred on the interface.
    Hill,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopographySection {
    #[serde(default)]
    pub form: FormKind,
    pub hill_height: Option<f64>,
    pub hill_radius: Option<f64>,
    pub roughness: Option<RoughnessSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoughnessSection {
    pub sigma: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndenterShape {
    /// Paraboloid of the given radius of curvature.
    Sphere,
    /// Flat circular punch of the given radius.
    FlatPunch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndenterSection {
    pub shape: IndenterShape,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarEndKind {
    #[default]
    Guided,
    Clamped,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementChoice {
    #[default]
    IncompatibleModes,
    Standard,
}

/// Built-in lap joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSection {
    pub overlap: [f64; 2],
    pub free_length: [f64; 2],
    pub thickness: [f64; 2],
    pub element_size: f64,
    pub layers: [usize; 2],
    pub preload_patch: [f64; 2],
    #[serde(default)]
    pub far_end: FarEndKind,
    #[serde(default)]
    pub element: ElementChoice,
    /// Fixed-interface modes kept by the reduction.
    pub modes: usize,
    #[serde(default)]
    pub node_based: bool,
}

/// External FE model; paths are relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeModelSection {
    pub mass: String,
    pub stiffness: String,
    pub dofs: String,
    pub modes: usize,
    /// The upper body floats in the interface normal direction.
    #[serde(default)]
    pub floating_normal: bool,
    #[serde(default)]
    pub node_based: bool,
    #[serde(default = "FeModelSection::default_tol")]
    pub match_tolerance: f64,
}

impl FeModelSection {
    fn default_tol() -> f64 {
        1e-9
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreloadSection {
    /// Total normal force [N].
    pub force: f64,
    pub steps: usize,
    pub tangential_force: Option<f64>,
    pub tangential_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestrictionSection {
    /// Depth below the highest point kept in the contact problem [m].
    pub depth_cutoff: Option<f64>,
    #[serde(default = "RestrictionSection::default_growth")]
    pub growth: f64,
    #[serde(default = "RestrictionSection::default_max")]
    pub max_enlargements: usize,
}

impl RestrictionSection {
    fn default_growth() -> f64 {
        1.5
    }
    fn default_max() -> usize {
        5
    }
}

impl Default for RestrictionSection {
    fn default() -> Self {
        Self {
            depth_cutoff: None,
            growth: Self::default_growth(),
            max_enlargements: Self::default_max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QsmaSection {
    pub modes: Vec<usize>,
    /// Modal load scale range, log-spaced over `amplitude_count` points.
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    pub amplitude_count: usize,
    pub ramp_steps: usize,
    pub per_quarter: usize,
}

impl QsmaSection {
    pub fn amplitudes(&self) -> Vec<f64> {
        let n = self.amplitude_count;
        if n == 1 {
            return vec![self.amplitude_min];
        }
        let r = self.amplitude_max / self.amplitude_min;
        (0..n)
            .map(|k| self.amplitude_min * r.powf(k as f64 / (n - 1) as f64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    #[default]
    Coulomb,
    LinearTie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub relaxation: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub accelerated: bool,
    pub max_retries: usize,
    pub verify_tolerance: f64,
    pub law: LawKind,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            relaxation: d.pjor.omega,
            tolerance: d.pjor.tol,
            max_iterations: d.pjor.max_iter,
            accelerated: d.pjor.accelerated,
            max_retries: d.max_retries,
            verify_tolerance: d.verify_tol,
            law: LawKind::Coulomb,
        }
    }
}

impl SolverSection {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            pjor: PjorOptions {
                omega: self.relaxation,
                tol: self.tolerance,
                max_iter: self.max_iterations,
                accelerated: self.accelerated,
            },
            max_retries: self.max_retries,
            law: match self.law {
                LawKind::Coulomb => ContactLaw::Coulomb,
                LawKind::LinearTie => ContactLaw::LinearTie,
            },
            verify_tol: self.verify_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Output directory, relative to the config file.
    pub directory: String,
    pub states: bool,
    pub hysteresis: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            states: yes(),
            hysteresis: yes(),
        }
    }
}

fn config_err(path: &str, text: &str, e: &toml::de::Error) -> Error {
    let Some(span) = e.span() else {
        return Error::Config(format!("{path}: {}", e.message()));
    };
    let start = span.start.min(text.len());
    let line = text[..start].matches('\n').count() + 1;
    let section = text[..start]
        .lines()
        .chain(text[start..].lines().take(1))
        .filter(|l| l.trim_start().starts_with('['))
        .last()
        .map(|l| format!(" in {}", l.trim()))
        .unwrap_or_default();
    Error::Config(format!("{path} line {line}{section}: {}", e.message()))
}

fn positive(v: f64, field: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{field} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(path, text, &e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Field-level checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        let m = &self.material;
        positive(m.youngs_modulus, "material.youngs_modulus")?;
        positive(m.density, "material.density")?;
        if !(m.poisson_ratio > -1.0 && m.poisson_ratio < 0.5) {
            return Err(Error::Config(format!(
                "material.poisson_ratio must lie in (-1, 0.5), got {}",
                m.poisson_ratio
            )));
        }
        if !(m.friction_coefficient >= 0.0) {
            return Err(Error::Config(
                "material.friction_coefficient must be >= 0".into(),
            ));
        }
        positive(self.grid.pitch, "grid.pitch")?;
        let n_struct = [
            self.indenter.is_some(),
            self.fixture.is_some(),
            self.fe_model.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count();
        if n_struct != 1 {
            return Err(Error::Config(
                "exactly one of [indenter], [fixture] or [fe_model] is required".into(),
            ));
        }
        if let Some(ind) = &self.indenter {
            positive(ind.radius, "indenter.radius")?;
            let hw = self.grid.half_width.ok_or_else(|| {
                Error::Config("grid.half_width is required with [indenter]".into())
            })?;
            positive(hw, "grid.half_width")?;
            if self.qsma.is_some() {
                return Err(Error::Config(
                    "[qsma] needs an FE structure ([fixture] or [fe_model])".into(),
                ));
            }
        } else if self.grid.half_width.is_some() {
            return Err(Error::Config(
                "grid.half_width only applies to [indenter]".into(),
            ));
        }
        if self.topography.form == FormKind::Hill {
            positive(
                self.topography.hill_height.unwrap_or(f64::NAN),
                "topography.hill_height",
            )?;
            positive(
                self.topography.hill_radius.unwrap_or(f64::NAN),
                "topography.hill_radius",
            )?;
        }
        let node_based = self.fixture.as_ref().is_some_and(|f| f.node_based)
            || self.fe_model.as_ref().is_some_and(|f| f.node_based);
        if node_based && self.topography.roughness.is_some() {
            return Err(Error::Config(
                "topography.roughness is not available with node_based".into(),
            ));
        }
        if let Some(f) = &self.fixture {
            if f.modes == 0 {
                return Err(Error::Config("fixture.modes must be >= 1".into()));
            }
        }
        if let Some(f) = &self.fe_model {
            if f.modes == 0 {
                return Err(Error::Config("fe_model.modes must be >= 1".into()));
            }
        }
        let p = &self.preload;
        if p.tangential_force.is_some() != p.tangential_steps.is_some() {
            return Err(Error::Config(
                "preload.tangential_force and preload.tangential_steps go together".into(),
            ));
        }
        if let Some(q) = &self.qsma {
            positive(q.amplitude_min, "qsma.amplitude_min")?;
            if !(q.amplitude_max >= q.amplitude_min) || q.amplitude_count == 0 {
                return Err(Error::Config(
                    "qsma.amplitude_max must be >= amplitude_min and amplitude_count >= 1".into(),
                ));
            }
        }
        self.plan().validate()
    }

    /// sha256 of the canonical JSON form of the parsed configuration.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn plan(&self) -> RunPlan {
        let p = &self.preload;
        RunPlan {
            preload: PreloadPlan {
                force: p.force,
                steps: p.steps,
                tangential: p
                    .tangential_force
                    .zip(p.tangential_steps)
                    .map(|(force, steps)| TangentialPhase { force, steps }),
            },
            restriction: RestrictionPolicy {
                depth_cutoff: self.restriction.depth_cutoff,
                growth: self.restriction.growth,
                max_enlargements: self.restriction.max_enlargements,
            },
            qsma: self.qsma.as_ref().map(|q| QsmaPlan {
                modes: q.modes.clone(),
                amplitudes: q.amplitudes(),
                ramp_steps: q.ramp_steps,
                per_quarter: q.per_quarter,
            }),
            solver: self.solver.options(),
        }
    }

    pub fn halfspace(&self) -> Result<ElasticHalfSpace> {
        ElasticHalfSpace::new(self.material.youngs_modulus, self.material.poisson_ratio)
    }

    fn lap_joint_spec(&self, f: &FixtureSection) -> LapJointSpec {
        LapJointSpec {
            material: Material {
                youngs_modulus: self.material.youngs_modulus,
                poisson_ratio: self.material.poisson_ratio,
                density: self.material.density,
            },
            element: match f.element {
                ElementChoice::IncompatibleModes => ElementKind::IncompatibleModes,
                ElementChoice::Standard => ElementKind::Standard,
            },
            overlap: f.overlap,
            free_length: f.free_length,
            thickness: f.thickness,
            element_size: f.element_size,
            layers: f.layers,
            preload_patch: f.preload_patch,
            far_end: match f.far_end {
                FarEndKind::Guided => FarEnd::Guided,
                FarEndKind::Clamped => FarEnd::Clamped,
            },
        }
    }

    fn roughness_spec(&self) -> Option<RoughnessSpec> {
        self.topography.roughness.as_ref().map(|r| RoughnessSpec {
            sigma: r.sigma,
            lambda_min: r.lambda_min,
            lambda_max: r.lambda_max,
            seed: self.seed,
        })
    }

    /// Form height at `(x, y)` relative to the interface centre.
    fn form_height(&self, x: f64, y: f64, centre: [f64; 2]) -> f64 {
        match self.topography.form {
            FormKind::Flat => 0.0,
            FormKind::Hill => {
                let h = self.topography.hill_height.unwrap_or(0.0);
                let rr = self.topography.hill_radius.unwrap_or(1.0);
                let r = (x - centre[0]).hypot(y - centre[1]);
                if r < rr {
                    h * (std::f64::consts::FRAC_PI_2 * r / rr).cos().powi(2)
                } else {
                    0.0
                }
            }
        }
    }

    /// Composite height over a grid: indenter shape, form and roughness.
    fn profile_on(&self, grid: BeGrid, centre: [f64; 2]) -> Result<HeightProfile> {
        let form = HeightProfile::from_fn(grid, |x, y| {
            let base = self.form_height(x, y, centre);
            match &self.indenter {
                None => Some(base),
                Some(ind) => {
                    let r2 = (x - centre[0]).powi(2) + (y - centre[1]).powi(2);
                    match ind.shape {
                        IndenterShape::Sphere => Some(base - 0.5 * r2 / ind.radius),
                        IndenterShape::FlatPunch => (r2.sqrt() <= ind.radius).then_some(base),
                    }
                }
            }
        });
        match self.roughness_spec() {
            None => compose_profiles(&form, &HeightProfile::flat(grid)),
            Some(spec) => compose_profiles(&form, &synthesize_roughness(&grid, &spec)?),
        }
    }

    fn indenter_grid(&self) -> Result<BeGrid> {
        let pitch = self.grid.pitch;
        let hw = self.grid.half_width.expect("validated");
        let n = 2 * (hw / pitch).ceil() as usize + 1;
        let o = -((n - 1) as f64) * 0.5 * pitch;
        BeGrid::new(n, n, pitch, pitch, [o, o])
    }

    fn fe_path(&self, base: &Path, rel: &str) -> Result<PathBuf> {
        let p = base.join(rel);
        if !p.is_file() {
            return Err(Error::Config(format!(
                "fe_model file {} does not exist",
                p.display()
            )));
        }
        Ok(p)
    }

    fn fe_bundle(&self, base: &Path, f: &FeModelSection) -> Result<FeBundle> {
        crate::io::load_fe_matrices(
            &self.fe_path(base, &f.mass)?,
            &self.fe_path(base, &f.stiffness)?,
            &self.fe_path(base, &f.dofs)?,
        )
    }

    /// Contact grid and composite profile without building the structure.
    pub fn surface(&self, base: &Path) -> Result<HeightProfile> {
        if self.indenter.is_some() {
            return self.profile_on(self.indenter_grid()?, [0.0, 0.0]);
        }
        if let Some(f) = &self.fixture {
            let grid = BeGrid::covering(
                f.free_length[0],
                0.0,
                f.overlap[0],
                f.overlap[1],
                self.grid.pitch,
            )?;
            let centre = [f.free_length[0] + 0.5 * f.overlap[0], 0.5 * f.overlap[1]];
            return self.profile_on(grid, centre);
        }
        let f = self.fe_model.as_ref().expect("validated");
        let setup = self
            .fe_bundle(base, f)?
            .interface_setup(f.match_tolerance)?;
        let (grid, centre) = interface_grid(&setup.interface, self.grid.pitch)?;
        self.profile_on(grid, centre)
    }

    /// Builds the contact problem and the run plan. `base` resolves
    /// relative paths.
    pub fn build(&self, base: &Path) -> Result<(Problem, RunPlan)> {
        let plan = self.plan();
        let halfspace = self.halfspace()?;
        let mu = self.material.friction_coefficient;
        if self.indenter.is_some() {
            let problem = Problem {
                profile: self.profile_on(self.indenter_grid()?, [0.0, 0.0])?,
                node_heights: None,
                halfspace,
                mu,
                structure: Structure::Indenter {
                    tangential: plan.preload.tangential.is_some(),
                },
            };
            return Ok((problem, plan));
        }
        let (reduced, interface, floating, sensor_dofs, node_based, grid, centre) =
            if let Some(f) = &self.fixture {
                let lj = build_lap_joint(&self.lap_joint_spec(f))?;
                let rel = relative_transform(&lj.model, &lj.pairs)?;
                let reduced = craig_bampton(&rel, f.modes)?;
                let floating = lj.floating_modes(&reduced.boundary_dofs);
                let grid = BeGrid::covering(
                    f.free_length[0],
                    0.0,
                    f.overlap[0],
                    f.overlap[1],
                    self.grid.pitch,
                )?;
                (
                    reduced,
                    lj.interface,
                    floating,
                    lj.sensor_dofs,
                    f.node_based,
                    grid,
                    lj.centre,
                )
            } else {
                let f = self.fe_model.as_ref().expect("validated");
                let bundle = self.fe_bundle(base, f)?;
                let setup = bundle.interface_setup(f.match_tolerance)?;
                let rel = relative_transform(&bundle.model, &setup.pairs)?;
                let reduced = craig_bampton(&rel, f.modes)?;
                let floating = f
                    .floating_normal
                    .then(|| normal_floating_mode(&reduced, &bundle));
                let (grid, centre) = interface_grid(&setup.interface, self.grid.pitch)?;
                (
                    reduced,
                    setup.interface,
                    floating,
                    setup.sensor_dofs,
                    f.node_based,
                    grid,
                    centre,
                )
            };
        let profile = self.profile_on(grid, centre)?;
        let node_heights = node_based.then(|| {
            let h: Vec<f64> = interface
                .nodes
                .iter()
                .map(|n| self.form_height(n.xy[0], n.xy[1], centre))
                .collect();
            let top = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            h.iter().map(|v| v - top).collect()
        });
        let problem = Problem {
            profile,
            node_heights,
            halfspace,
            mu,
            structure: Structure::Reduced {
                reduced,
                interface,
                floating,
                sensor_dofs,
                node_based,
            },
        };
        Ok((problem, plan))
    }
}

/// Unit normal translation over the relative boundary DOFs.
fn normal_floating_mode(reduced: &ReducedModel, bundle: &FeBundle) -> faer::Mat<f64> {
    let b = &reduced.boundary_dofs;
    faer::Mat::from_fn(b.len(), 1, |k, _| {
        if bundle.model.dof_map[b[k]].direction == 2 {
            1.0
        } else {
            0.0
        }
    })
}

fn interface_grid(mesh: &crate::coupling::InterfaceMesh, pitch: f64) -> Result<(BeGrid, [f64; 2])> {
    let layout = mesh
        .regular
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("interface mesh is not regular".into()))?;
    let lx = layout.pitch[0] * layout.counts[0] as f64;
    let ly = layout.pitch[1] * layout.counts[1] as f64;
    let grid = BeGrid::covering(layout.origin[0], layout.origin[1], lx, ly, pitch)?;
    Ok((
        grid,
        [layout.origin[0] + 0.5 * lx, layout.origin[1] + 0.5 * ly],
    ))
}

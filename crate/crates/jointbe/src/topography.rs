//! Contact grid, composite height profiles, synthetic roughness and the
//! geometric restriction of the candidate contact set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeGrid {
    pub nx: usize,
    pub ny: usize,
    pub pitch_x: f64,
    pub pitch_y: f64,
    pub origin: [f64; 2],
}

impl BeGrid {
    pub fn new(nx: usize, ny: usize, pitch_x: f64, pitch_y: f64, origin: [f64; 2]) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidInput("grid counts must be at least 1".into()));
        }
        if !(pitch_x > 0.0 && pitch_y > 0.0) {
            return Err(Error::InvalidInput("grid pitch must be positive".into()));
        }
        Ok(Self {
            nx,
            ny,
            pitch_x,
            pitch_y,
            origin,
        })
    }

    /// Grid covering `[x0, x0 + lx] × [y0, y0 + ly]` with points at cell centers.
    pub fn covering(x0: f64, y0: f64, lx: f64, ly: f64, pitch: f64) -> Result<Self> {
        let nx = (lx / pitch).round() as usize;
        let ny = (ly / pitch).round() as usize;
        if ((nx as f64) * pitch - lx).abs() > 1e-9 * lx
            || ((ny as f64) * pitch - ly).abs() > 1e-9 * ly
        {
            return Err(Error::InvalidInput(format!(
                "pitch {pitch} does not divide the area {lx} x {ly}"
            )));
        }
        Self::new(nx, ny, pitch, pitch, [x0 + 0.5 * pitch, y0 + 0.5 * pitch])
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, id: usize) -> [f64; 2] {
        let (ix, iy) = (id % self.nx, id / self.nx);
        [
            self.origin[0] + ix as f64 * self.pitch_x,
            self.origin[1] + iy as f64 * self.pitch_y,
        ]
    }

    pub fn element_area(&self) -> f64 {
        self.pitch_x * self.pitch_y
    }

    /// 4-neighbourhood of a point.
    pub fn neighbours(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        let (ix, iy) = (id % self.nx, id / self.nx);
        let mut out = Vec::with_capacity(4);
        if ix > 0 {
            out.push(id - 1);
        }
        if ix + 1 < self.nx {
            out.push(id + 1);
        }
        if iy > 0 {
            out.push(id - self.nx);
        }
        if iy + 1 < self.ny {
            out.push(id + self.nx);
        }
        out.into_iter()
    }
}

/// Per-point height with an explicit exclusion flag for points outside the interface.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightProfile {
    pub grid: BeGrid,
    pub heights: Vec<f64>,
    pub excluded: Vec<bool>,
}

impl HeightProfile {
    pub fn flat(grid: BeGrid) -> Self {
        Self {
            grid,
            heights: vec![0.0; grid.len()],
            excluded: vec![false; grid.len()],
        }
    }

    /// Builds a profile from a height function; `None` excludes the point.
    pub fn from_fn(grid: BeGrid, f: impl Fn(f64, f64) -> Option<f64>) -> Self {
        let mut p = Self::flat(grid);
        for id in 0..grid.len() {
            let [x, y] = grid.point(id);
            match f(x, y) {
                Some(h) => p.heights[id] = h,
                None => p.excluded[id] = true,
            }
        }
        p
    }

    pub fn included(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.heights.len()).filter(|&i| !self.excluded[i])
    }

    pub fn max_height(&self) -> Option<f64> {
        self.included().map(|i| self.heights[i]).reduce(f64::max)
    }

    pub fn min_height(&self) -> Option<f64> {
        self.included().map(|i| self.heights[i]).reduce(f64::min)
    }

    pub fn peak_to_peak(&self) -> f64 {
        match (self.max_height(), self.min_height()) {
            (Some(a), Some(b)) => a - b,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.heights.len() != self.grid.len() || self.excluded.len() != self.grid.len() {
            return Err(Error::InvalidInput(
                "profile length does not match grid".into(),
            ));
        }
        for i in self.included() {
            if !self.heights[i].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite height at point {i}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoughnessSpec {
    pub sigma: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub seed: u64,
}

/// Band-limited random surface before rescaling, with its sample variance.
#[derive(Debug, Clone)]
pub struct RawRoughness {
    pub heights: Vec<f64>,
    pub variance: f64,
}

fn band_check(grid: &BeGrid, spec: &RoughnessSpec) -> Result<()> {
    if !(spec.sigma >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "roughness sigma must be >= 0, got {}",
            spec.sigma
        )));
    }
    if !(spec.lambda_min > 0.0 && spec.lambda_min < spec.lambda_max) {
        return Err(Error::InvalidInput(format!(
            "roughness band requires 0 < lambda_min < lambda_max, got [{}, {}]",
            spec.lambda_min, spec.lambda_max
        )));
    }
    let nyquist = 2.0 * grid.pitch_x.max(grid.pitch_y);
    if spec.lambda_min < nyquist * (1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!(
            "wavelength lambda_min = {} is not resolvable on the grid (needs >= {})",
            spec.lambda_min, nyquist
        )));
    }
    Ok(())
}

/// Signed frequency index of DFT bin `i` of `n`.
fn signed(i: usize, n: usize) -> f64 {
    if 2 * i > n {
        i as f64 - n as f64
    } else {
        i as f64
    }
}

/// Whether DFT bin (ix, iy) lies in the wavelength band.
pub fn in_band(grid: &BeGrid, spec: &RoughnessSpec, ix: usize, iy: usize) -> bool {
    let kx = signed(ix, grid.nx) / (grid.nx as f64 * grid.pitch_x);
    let ky = signed(iy, grid.ny) / (grid.ny as f64 * grid.pitch_y);
    let k = kx.hypot(ky);
    k > 0.0 && k * spec.lambda_min <= 1.0 + 1e-12 && k * spec.lambda_max >= 1.0 - 1e-12
}

/// In-place 2D DFT of a row-major `nx × ny` field.
pub fn fft2(data: &mut [Complex64], nx: usize, ny: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (fx, fy) = if inverse {
        (planner.plan_fft_inverse(nx), planner.plan_fft_inverse(ny))
    } else {
        (planner.plan_fft_forward(nx), planner.plan_fft_forward(ny))
    };
    for row in data.chunks_mut(nx) {
        fx.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); ny];
    for ix in 0..nx {
        for iy in 0..ny {
            col[iy] = data[ix + nx * iy];
        }
        fy.process(&mut col);
        for iy in 0..ny {
            data[ix + nx * iy] = col[iy];
        }
    }
}

/// Random-phase surface with constant spectral magnitude in the band, not yet
/// rescaled. The magnitude is chosen so the expected variance is `sigma²`.
pub fn synthesize_raw(grid: &BeGrid, spec: &RoughnessSpec) -> Result<RawRoughness> {
    band_check(grid, spec)?;
    let (nx, ny) = (grid.nx, grid.ny);
    let n = nx * ny;
    let bins: Vec<usize> = (0..n)
        .filter(|&b| in_band(grid, spec, b % nx, b / nx))
        .collect();
    if bins.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no wavelength in [{}, {}] fits on the grid; wavelength lambda_max = {} exceeds the grid extent",
            spec.lambda_min, spec.lambda_max, spec.lambda_max
        )));
    }
    let mag = spec.sigma * n as f64 / (bins.len() as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut spec_field = vec![Complex64::new(0.0, 0.0); n];
    for &b in &bins {
        let (ix, iy) = (b % nx, b / nx);
        let m = (nx - ix) % nx + nx * ((ny - iy) % ny);
        if m < b {
            continue;
        }
        if m == b {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            spec_field[b] = Complex64::new(sign * mag, 0.0);
        } else {
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            let z = Complex64::from_polar(mag, phase);
            spec_field[b] = z;
            spec_field[m] = z.conj();
        }
    }
    fft2(&mut spec_field, nx, ny, true);
    let heights: Vec<f64> = spec_field.iter().map(|z| z.re / n as f64).collect();
    let variance = sample_variance(&heights);
    Ok(RawRoughness { heights, variance })
}

/// Population variance (1/N normalization).
pub fn sample_variance(h: &[f64]) -> f64 {
    let n = h.len() as f64;
    let mean = h.iter().sum::<f64>() / n;
    h.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Zero-mean band-limited roughness rescaled to a sample standard deviation of
/// exactly `sigma` (population normalization).
pub fn synthesize_roughness(grid: &BeGrid, spec: &RoughnessSpec) -> Result<HeightProfile> {
    let raw = synthesize_raw(grid, spec)?;
    let mut p = HeightProfile::flat(*grid);
    if spec.sigma == 0.0 {
        return Ok(p);
    }
    let n = raw.heights.len() as f64;
    let mean = raw.heights.iter().sum::<f64>() / n;
    let scale = spec.sigma / raw.variance.sqrt();
    for (h, r) in p.heights.iter_mut().zip(&raw.heights) {
        *h = (r - mean) * scale;
    }
    Ok(p)
}

/// Pointwise sum, shifted so the highest point touches the reference plane.
pub fn compose_profiles(h1: &HeightProfile, h2: &HeightProfile) -> Result<HeightProfile> {
    if h1.grid != h2.grid {
        return Err(Error::InvalidInput(
            "cannot compose profiles on different grids".into(),
        ));
    }
    let mut out = h1.clone();
    for i in 0..out.heights.len() {
        out.excluded[i] = h1.excluded[i] || h2.excluded[i];
        out.heights[i] = if out.excluded[i] {
            0.0
        } else {
            h1.heights[i] + h2.heights[i]
        };
    }
    if let Some(top) = out.max_height() {
        for i in 0..out.heights.len() {
            if !out.excluded[i] {
                out.heights[i] -= top;
            }
        }
    }
    Ok(out)
}

/// Points with height within `depth_cutoff` of the highest peak, row-major.
pub fn geometric_restriction(profile: &HeightProfile, depth_cutoff: f64) -> Result<Vec<usize>> {
    if !(depth_cutoff >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "depth cutoff must be >= 0, got {depth_cutoff}"
        )));
    }
    let top = profile
        .max_height()
        .ok_or_else(|| Error::Restriction("all grid points are excluded".into()))?;
    let keep: Vec<usize> = profile
        .included()
        .filter(|&i| profile.heights[i] >= top - depth_cutoff)
        .collect();
    if keep.is_empty() {
        return Err(Error::Restriction(format!(
            "cutoff {depth_cutoff} retains no point"
        )));
    }
    Ok(keep)
}

/// Retained points adjacent to an included point outside the retained set.
pub fn restriction_boundary(profile: &HeightProfile, retained: &[usize]) -> Vec<usize> {
    let mut inside = vec![false; profile.grid.len()];
    for &i in retained {
        inside[i] = true;
    }
    retained
        .iter()
        .copied()
        .filter(|&i| {
            profile
                .grid
                .neighbours(i)
                .any(|nb| !profile.excluded[nb] && !inside[nb])
        })
        .collect()
}

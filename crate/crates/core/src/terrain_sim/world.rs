//! Procedural height fields.
//!
//! Cell `(col, row)` covers `[origin + col·res, origin + (col+1)·res)` along x
//! and the same along y; its elevation sample sits at the cell center. The
//! continuous surface is the bilinear interpolant of those samples.

use crate::error::{Error, Result};

/// Raster elevation world with an obstacle mask.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major, `height` rows of `width` cells.
    pub elevation: Vec<f32>,
    /// Row-major; `true` marks a vertical obstacle column.
    pub obstacle_mask: Vec<bool>,
    /// Height of every obstacle column above the terrain under it.
    pub obstacle_height: f64,
}

impl HeightField {
    pub fn flat(origin: [f64; 2], resolution: f64, width: usize, height: usize) -> Result<Self> {
        if !(resolution > 0.0) || width == 0 || height == 0 {
            return Err(Error::InvalidSpec(format!(
                "resolution {resolution} and dims {width}x{height} must be positive"
            )));
        }
        Ok(Self {
            origin,
            resolution,
            width,
            height,
            elevation: vec![0.0; width * height],
            obstacle_mask: vec![false; width * height],
            obstacle_height: 2.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) || self.width == 0 || self.height == 0 {
            return Err(Error::InvalidSpec(
                "non-positive resolution or dimensions".into(),
            ));
        }
        let n = self.width * self.height;
        if self.elevation.len() != n || self.obstacle_mask.len() != n {
            return Err(Error::InvalidSpec("grid buffers do not match dims".into()));
        }
        if self.elevation.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidSpec("non-finite elevation".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    /// Cell containing `(x, y)`, or `None` outside the grid.
    #[inline]
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = ((x - self.origin[0]) / self.resolution).floor();
        let fy = ((y - self.origin[1]) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn cell_center(&self, col: usize, row: usize) -> [f64; 2] {
        [
            self.origin[0] + (col as f64 + 0.5) * self.resolution,
            self.origin[1] + (row as f64 + 0.5) * self.resolution,
        ]
    }

    pub fn extent(&self) -> ([f64; 2], [f64; 2]) {
        (
            self.origin,
            [
                self.origin[0] + self.width as f64 * self.resolution,
                self.origin[1] + self.height as f64 * self.resolution,
            ],
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.cell_of(x, y).is_some()
    }

    #[inline]
    pub fn cell_elevation(&self, col: usize, row: usize) -> f64 {
        self.elevation[self.index(col, row)] as f64
    }

    #[inline]
    pub fn is_obstacle(&self, col: usize, row: usize) -> bool {
        self.obstacle_mask[self.index(col, row)]
    }

    /// Bilinear terrain elevation at a world position; clamps to the border samples.
    pub fn elevation_at(&self, x: f64, y: f64) -> f64 {
        let gx = (x - self.origin[0]) / self.resolution - 0.5;
        let gy = (y - self.origin[1]) / self.resolution - 0.5;
        let max_c = (self.width - 1) as f64;
        let max_r = (self.height - 1) as f64;
        let gx = gx.clamp(0.0, max_c);
        let gy = gy.clamp(0.0, max_r);
        let c0 = gx.floor() as usize;
        let r0 = gy.floor() as usize;
        let c1 = (c0 + 1).min(self.width - 1);
        let r1 = (r0 + 1).min(self.height - 1);
        let tx = gx - c0 as f64;
        let ty = gy - r0 as f64;
        let z00 = self.cell_elevation(c0, r0);
        let z10 = self.cell_elevation(c1, r0);
        let z01 = self.cell_elevation(c0, r1);
        let z11 = self.cell_elevation(c1, r1);
        let a = z00 + (z10 - z00) * tx;
        let b = z01 + (z11 - z01) * tx;
        a + (b - a) * ty
    }

    /// Top of whatever is solid at `(x, y)`: terrain, or terrain plus the
    /// obstacle column when the cell is masked.
    pub fn solid_top(&self, x: f64, y: f64) -> Option<f64> {
        let (c, r) = self.cell_of(x, y)?;
        let ground = self.elevation_at(x, y);
        if self.is_obstacle(c, r) {
            Some(ground + self.obstacle_height)
        } else {
            Some(ground)
        }
    }
}

/// Inclusive `[min, max]` range sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { min: v, max: v }
    }

    fn valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min >= 0.0 && self.min <= self.max
    }

    fn sample(&self, rng: &mut SplitMix) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            self.min + (self.max - self.min) * rng.next_f64()
        }
    }
}

/// Randomly placed features of one kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRange {
    pub count: (usize, usize),
    /// Peak height (bumps), depth (potholes) or noise amplitude (rough patches).
    pub amplitude: Range,
    /// Gaussian sigma (bumps, potholes) or disk radius (patches, obstacles).
    pub radius: Range,
}

impl FeatureRange {
    pub const NONE: FeatureRange = FeatureRange {
        count: (0, 0),
        amplitude: Range::fixed(0.0),
        radius: Range::fixed(0.0),
    };
}

/// A feature placed at an explicit location.
#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    /// Anisotropic Gaussian bump; `sigma` is (along yaw, across yaw).
    Bump {
        center: [f64; 2],
        amplitude: f64,
        sigma: [f64; 2],
        yaw: f64,
    },
    Pothole {
        center: [f64; 2],
        depth: f64,
        sigma: f64,
    },
    RoughPatch {
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
    },
    /// Disk of obstacle cells.
    Obstacle { center: [f64; 2], radius: f64 },
    /// Axis-aligned rectangle of obstacle cells.
    ObstacleRect { min: [f64; 2], max: [f64; 2] },
}

/// Everything `generate_world` needs besides the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainRecipe {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    /// Amplitude (m) of the low-frequency base terrain.
    pub base_roughness: f64,
    /// Lattice spacing (m) of the base terrain noise.
    pub base_wavelength: f64,
    pub bumps: FeatureRange,
    pub potholes: FeatureRange,
    pub rough_patches: FeatureRange,
    pub obstacles: FeatureRange,
    pub obstacle_height: f64,
    pub explicit: Vec<Feature>,
}

impl TerrainRecipe {
    /// Featureless flat recipe of the given size.
    pub fn flat(width: usize, height: usize, resolution: f64) -> Self {
        Self {
            origin: [0.0, 0.0],
            resolution,
            width,
            height,
            base_roughness: 0.0,
            base_wavelength: 8.0,
            bumps: FeatureRange::NONE,
            potholes: FeatureRange::NONE,
            rough_patches: FeatureRange::NONE,
            obstacles: FeatureRange::NONE,
            obstacle_height: 2.0,
            explicit: Vec::new(),
        }
    }

    /// Unstructured off-road scene: rolling base, bumps, potholes, rough
    /// patches and scattered obstacles.
    pub fn off_road(width: usize, height: usize, resolution: f64) -> Self {
        Self {
            base_roughness: 0.3,
            base_wavelength: 10.0,
            bumps: FeatureRange {
                count: (6, 10),
                amplitude: Range::new(0.15, 0.6),
                radius: Range::new(0.8, 2.5),
            },
            potholes: FeatureRange {
                count: (3, 6),
                amplitude: Range::new(0.1, 0.3),
                radius: Range::new(0.5, 1.2),
            },
            rough_patches: FeatureRange {
                count: (3, 6),
                amplitude: Range::new(0.03, 0.12),
                radius: Range::new(2.0, 5.0),
            },
            obstacles: FeatureRange {
                count: (10, 16),
                amplitude: Range::fixed(0.0),
                radius: Range::new(0.4, 1.4),
            },
            obstacle_height: 2.5,
            ..Self::flat(width, height, resolution)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "resolution {} must be positive",
                self.resolution
            )));
        }
        if self.width < 32 || self.height < 32 {
            return Err(Error::InvalidSpec(format!(
                "grid {}x{} must be at least 32x32",
                self.width, self.height
            )));
        }
        if !(self.base_roughness >= 0.0) || !(self.base_wavelength > 0.0) {
            return Err(Error::InvalidSpec(
                "base roughness/wavelength out of range".into(),
            ));
        }
        if !(self.obstacle_height > 0.0) {
            return Err(Error::InvalidSpec(
                "obstacle height must be positive".into(),
            ));
        }
        for (name, f) in [
            ("bumps", &self.bumps),
            ("potholes", &self.potholes),
            ("rough_patches", &self.rough_patches),
            ("obstacles", &self.obstacles),
        ] {
            if f.count.0 > f.count.1 || !f.amplitude.valid() || !f.radius.valid() {
                return Err(Error::InvalidSpec(format!(
                    "{name} ranges are not ordered non-negative"
                )));
            }
            if f.count.1 > 0 && f.radius.max <= 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "{name} radius must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// SplitMix64, used for the lattice hash and feature placement. It is tiny,
/// portable and stable across releases, which the world file determinism
/// contract depends on.
pub(crate) struct SplitMix(u64);

impl SplitMix {
    pub(crate) fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub(crate) fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        mix64(self.0)
    }

    /// Uniform in `[0, 1)`.
    pub(crate) fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn range_usize(&mut self, lo: usize, hi: usize) -> usize {
        if lo >= hi {
            lo
        } else {
            lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
        }
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lattice value in `[-1, 1]` for integer coordinates.
fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let h = mix64(seed ^ mix64((ix as u64).wrapping_mul(0x9E37_79B9) ^ mix64(iy as u64)));
    (h >> 11) as f64 * (2.0 / (1u64 << 53) as f64) - 1.0
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Smoothly interpolated value noise with unit lattice spacing.
fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let tx = smoothstep(x - x0);
    let ty = smoothstep(y - y0);
    let (ix, iy) = (x0 as i64, y0 as i64);
    let a = lattice(seed, ix, iy);
    let b = lattice(seed, ix + 1, iy);
    let c = lattice(seed, ix, iy + 1);
    let d = lattice(seed, ix + 1, iy + 1);
    let top = a + (b - a) * tx;
    let bottom = c + (d - c) * tx;
    top + (bottom - top) * ty
}

impl Feature {
    fn elevation(&self, seed: u64, p: [f64; 2]) -> f64 {
        match *self {
            Feature::Bump {
                center,
                amplitude,
                sigma,
                yaw,
            } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let (s, c) = yaw.sin_cos();
                let along = c * dx + s * dy;
                let across = -s * dx + c * dy;
                let e = along * along / (2.0 * sigma[0] * sigma[0])
                    + across * across / (2.0 * sigma[1] * sigma[1]);
                amplitude * (-e).exp()
            }
            Feature::Pothole {
                center,
                depth,
                sigma,
            } => {
                let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                -depth * (-r2 / (2.0 * sigma * sigma)).exp()
            }
            Feature::RoughPatch {
                center,
                radius,
                amplitude,
            } => {
                let r = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
                if r >= radius {
                    return 0.0;
                }
                let falloff = 1.0 - smoothstep(r / radius);
                // ~0.6 m wavelength texture
                amplitude * falloff * value_noise(seed, p[0] / 0.6, p[1] / 0.6)
            }
            Feature::Obstacle { .. } | Feature::ObstacleRect { .. } => 0.0,
        }
    }

    fn marks(&self, p: [f64; 2]) -> bool {
        match *self {
            Feature::Obstacle { center, radius } => {
                (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) <= radius * radius
            }
            Feature::ObstacleRect { min, max } => {
                p[0] >= min[0] && p[0] <= max[0] && p[1] >= min[1] && p[1] <= max[1]
            }
            _ => false,
        }
    }
}

/// Builds a world from a seed and recipe. Deterministic in `(seed, recipe)`.
pub fn generate_world(seed: u64, recipe: &TerrainRecipe) -> Result<HeightField> {
    recipe.validate()?;
    let mut rng = SplitMix::new(seed);
    let (lo, hi) = (
        recipe.origin,
        [
            recipe.origin[0] + recipe.width as f64 * recipe.resolution,
            recipe.origin[1] + recipe.height as f64 * recipe.resolution,
        ],
    );
    let random_point = |rng: &mut SplitMix| {
        [
            lo[0] + (hi[0] - lo[0]) * rng.next_f64(),
            lo[1] + (hi[1] - lo[1]) * rng.next_f64(),
        ]
    };

    let mut features: Vec<(u64, Feature)> = Vec::new();
    let n = rng.range_usize(recipe.bumps.count.0, recipe.bumps.count.1);
    for _ in 0..n {
        let center = random_point(&mut rng);
        let amplitude = recipe.bumps.amplitude.sample(&mut rng);
        let s0 = recipe.bumps.radius.sample(&mut rng);
        let s1 = recipe.bumps.radius.sample(&mut rng);
        let yaw = std::f64::consts::PI * rng.next_f64();
        features.push((
            rng.next_u64(),
            Feature::Bump {
                center,
                amplitude,
                sigma: [s0, s1],
                yaw,
            },
        ));
    }
    let n = rng.range_usize(recipe.potholes.count.0, recipe.potholes.count.1);
    for _ in 0..n {
        let center = random_point(&mut rng);
        let depth = recipe.potholes.amplitude.sample(&mut rng);
        let sigma = recipe.potholes.radius.sample(&mut rng);
        features.push((
            rng.next_u64(),
            Feature::Pothole {
                center,
                depth,
                sigma,
            },
        ));
    }
    let n = rng.range_usize(recipe.rough_patches.count.0, recipe.rough_patches.count.1);
    for _ in 0..n {
        let center = random_point(&mut rng);
        let amplitude = recipe.rough_patches.amplitude.sample(&mut rng);
        let radius = recipe.rough_patches.radius.sample(&mut rng);
        features.push((
            rng.next_u64(),
            Feature::RoughPatch {
                center,
                radius,
                amplitude,
            },
        ));
    }
    let n = rng.range_usize(recipe.obstacles.count.0, recipe.obstacles.count.1);
    for _ in 0..n {
        let center = random_point(&mut rng);
        let radius = recipe.obstacles.radius.sample(&mut rng);
        features.push((rng.next_u64(), Feature::Obstacle { center, radius }));
    }
    for f in &recipe.explicit {
        features.push((rng.next_u64(), f.clone()));
    }
    let base_seed = rng.next_u64();

    let mut world = HeightField {
        origin: recipe.origin,
        resolution: recipe.resolution,
        width: recipe.width,
        height: recipe.height,
        elevation: vec![0.0; recipe.width * recipe.height],
        obstacle_mask: vec![false; recipe.width * recipe.height],
        obstacle_height: recipe.obstacle_height,
    };
    for row in 0..recipe.height {
        for col in 0..recipe.width {
            let p = world.cell_center(col, row);
            let mut z = 0.0;
            if recipe.base_roughness > 0.0 {
                z += recipe.base_roughness
                    * value_noise(
                        base_seed,
                        p[0] / recipe.base_wavelength,
                        p[1] / recipe.base_wavelength,
                    );
            }
            let mut obstacle = false;
            for (fseed, f) in &features {
                z += f.elevation(*fseed, p);
                obstacle |= f.marks(p);
            }
            let i = world.index(col, row);
            world.elevation[i] = z as f32;
            world.obstacle_mask[i] = obstacle;
        }
    }
    Ok(world)
}

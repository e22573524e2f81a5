//! Procedural fibre and fibre-crack phantoms, and relative Gaussian noise.
//!
//! Fibres are a piecewise-constant stripe profile (random widths in
//! `[4, 16]` px, levels 0.5 and 1.0) extended along the main direction.
//! Cracks are zero-valued bars of length `M/4` centred on a ring of radius
//! `M/4`, each oriented along its own polar angle, evenly spread over 360
//! degrees. Everything is clipped to a disk of radius `M/2 - 1`.
//!
//! Pixel values are area averages over a regular grid of subsamples, so
//! oblique edges carry partial-volume values instead of a staircase.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{index_direction, Image, Sinogram};

pub const LOW_LEVEL: f64 = 0.5;
pub const HIGH_LEVEL: f64 = 1.0;
const MIN_STRIPE: f64 = 4.0;
const MAX_STRIPE: f64 = 16.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhantomKind {
    Fibre,
    FibreCrack,
}

impl std::str::FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fibre" => Ok(Self::Fibre),
            "fibre-crack" => Ok(Self::FibreCrack),
            other => Err(Error::Param(format!("unknown phantom kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fibre => "fibre",
            Self::FibreCrack => "fibre-crack",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub size: usize,
    pub kind: PhantomKind,
    pub main_angle_deg: f64,
    /// Number of random stripe widths drawn. `None` draws enough to cover
    /// the disk; a smaller count repeats the drawn profile periodically.
    pub n_stripes: Option<usize>,
    pub crack_count: usize,
    pub crack_width_px: f64,
    pub seed: u64,
    /// Subsamples per pixel along each axis; 1 samples pixel centres only.
    pub supersample: usize,
}

impl PhantomSpec {
    pub fn fibre(size: usize, main_angle_deg: f64, seed: u64) -> Self {
        Self {
            size,
            kind: PhantomKind::Fibre,
            main_angle_deg,
            n_stripes: None,
            crack_count: 0,
            crack_width_px: 3.0,
            seed,
            supersample: 4,
        }
    }

    pub fn fibre_crack(size: usize, main_angle_deg: f64, seed: u64) -> Self {
        Self { kind: PhantomKind::FibreCrack, crack_count: 12, ..Self::fibre(size, main_angle_deg, seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Param("phantom size must be positive".into()));
        }
        if !(0.0..180.0).contains(&self.main_angle_deg) {
            return Err(Error::Param(format!("main angle {} outside [0, 180)", self.main_angle_deg)));
        }
        if self.n_stripes == Some(0) {
            return Err(Error::Param("n_stripes must be positive".into()));
        }
        if self.supersample == 0 {
            return Err(Error::Param("supersample must be at least 1".into()));
        }
        if !(self.crack_width_px > 0.0) {
            return Err(Error::Param("crack width must be positive".into()));
        }
        Ok(())
    }

    fn cracks(&self) -> usize {
        match self.kind {
            PhantomKind::Fibre => 0,
            PhantomKind::FibreCrack => self.crack_count,
        }
    }
}

/// Radius of the phantom support disk.
pub fn support_radius(size: usize) -> f64 {
    (size as f64 / 2.0 - 1.0).max(0.5)
}

pub fn support_mask(size: usize) -> Vec<bool> {
    Image::disk_mask(size, support_radius(size))
}

struct StripeProfile {
    start: f64,
    edges: Vec<f64>,
    first_high: bool,
    period: f64,
}

impl StripeProfile {
    fn new(spec: &PhantomSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let first_high = rng.gen_bool(0.5);
        let half = spec.size as f64 / 2.0 + 1.0;
        let start = -half - rng.gen_range(0.0..MAX_STRIPE);
        let mut edges = Vec::new();
        let mut pos = start;
        loop {
            let limit_reached = match spec.n_stripes {
                Some(n) => edges.len() == n,
                None => pos > half,
            };
            if limit_reached {
                break;
            }
            pos += rng.gen_range(MIN_STRIPE..=MAX_STRIPE);
            edges.push(pos);
        }
        let period = pos - start;
        Self { start, edges, first_high, period }
    }

    fn level(&self, w: f64) -> f64 {
        let offset = (w - self.start).rem_euclid(self.period) + self.start;
        let idx = self.edges.partition_point(|&e| e <= offset);
        let high = (idx % 2 == 0) == self.first_high;
        if high {
            HIGH_LEVEL
        } else {
            LOW_LEVEL
        }
    }
}

fn crack_hit(spec: &PhantomSpec, p1: f64, p2: f64) -> bool {
    let n = spec.cracks();
    let m = spec.size as f64;
    let (ring, half_len, half_width) = (m / 4.0, m / 8.0, spec.crack_width_px / 2.0);
    (0..n).any(|c| {
        let phi = 360.0 * c as f64 / n as f64;
        let (er, ec) = index_direction(phi);
        let (d1, d2) = (p1 - ring * er, p2 - ring * ec);
        let along = d1 * er + d2 * ec;
        let across = -d1 * ec + d2 * er;
        along.abs() <= half_len && across.abs() <= half_width
    })
}

pub fn make_phantom(spec: &PhantomSpec) -> Result<Image> {
    spec.validate()?;
    let m = spec.size;
    let profile = StripeProfile::new(spec);
    let (er, ec) = index_direction(spec.main_angle_deg);
    let r2 = support_radius(m).powi(2);
    let centre = (m as f64 - 1.0) / 2.0;
    let n = spec.supersample;
    let subs: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64 - 0.5).collect();
    let value = |p1: f64, p2: f64| {
        if p1 * p1 + p2 * p2 > r2 || crack_hit(spec, p1, p2) {
            0.0
        } else {
            profile.level(-ec * p1 + er * p2)
        }
    };
    let img = Image::from_fn(m, |i, j| {
        let (p1, p2) = (i as f64 - centre, j as f64 - centre);
        let mut acc = 0.0;
        for &d1 in &subs {
            for &d2 in &subs {
                acc += value(p1 + d1, p2 + d2);
            }
        }
        acc / (n * n) as f64
    });
    Ok(img)
}

/// Pixels covered by cracks (inside the support).
pub fn crack_mask(spec: &PhantomSpec) -> Vec<bool> {
    let m = spec.size;
    let c = (m as f64 - 1.0) / 2.0;
    let support = support_mask(m);
    let mut mask = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            mask.push(support[i * m + j] && crack_hit(spec, i as f64 - c, j as f64 - c));
        }
    }
    mask
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    /// Relative level: the noise has 2-norm `level * ||b||`.
    pub level: f64,
    pub seed: u64,
}

/// Adds i.i.d. Gaussian noise rescaled so that `||e|| = level * ||b||`.
/// A zero sinogram is returned unchanged.
pub fn add_noise(sin: &Sinogram, noise: &NoiseSpec) -> Result<Sinogram> {
    if !(noise.level >= 0.0 && noise.level.is_finite()) {
        return Err(Error::Param(format!("noise level must be nonnegative, got {}", noise.level)));
    }
    let bnorm = sin.norm();
    if noise.level == 0.0 || bnorm == 0.0 {
        return Ok(sin.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let e: Vec<f64> = (0..sin.data().len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let enorm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = noise.level * bnorm / enorm;
    let data = sin.data().iter().zip(&e).map(|(b, e)| b + scale * e).collect();
    Sinogram::from_data(sin.geometry().clone(), data)
}

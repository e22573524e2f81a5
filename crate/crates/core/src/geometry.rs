//! Pixel grids, parallel-beam acquisition geometry and sinograms.
//!
//! Spatial convention: pixel `(i, j)` of an `M x M` image is centred at
//! `p = (i - c, j - c)` with `c = (M - 1) / 2`, pixel pitch 1. Directions
//! are angles measured from the first image axis (row index) towards the
//! second (column index), the same frame in which the discrete gradient
//! `(d/di, d/dj)` is taken. At projection angle `theta` the rays travel along
//! `(cos theta, sin theta)` and the detector coordinate is `s = p . (-sin theta, cos theta)`,
//! so a projection taken at the angle of a stripe pattern integrates along
//! the stripes.

use std::f64::consts::PI;

/// Unit vector of direction `theta_deg`, as `(row component, column component)`.
pub fn index_direction(theta_deg: f64) -> (f64, f64) {
    let (sin, cos) = theta_deg.to_radians().sin_cos();
    (cos, sin)
}

use crate::error::{Error, Result};

/// Square `M x M` image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    size: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(size: usize) -> Self {
        Self { size, data: vec![0.0; size * size] }
    }

    pub fn from_data(size: usize, data: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(Error::Param("image size must be positive".into()));
        }
        if data.len() != size * size {
            return Err(Error::Dimension(format!(
                "image of size {size} needs {} values, got {}",
                size * size,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Param("image values must be finite".into()));
        }
        Ok(Self { size, data })
    }

    pub fn from_fn(size: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                data.push(f(i, j));
            }
        }
        Self { size, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    /// Spatial position of pixel `(i, j)` relative to the image centre.
    pub fn position(&self, i: usize, j: usize) -> (f64, f64) {
        let c = (self.size as f64 - 1.0) / 2.0;
        (i as f64 - c, j as f64 - c)
    }

    /// Mask of pixels whose centre lies within `radius` of the image centre.
    pub fn disk_mask(size: usize, radius: f64) -> Vec<bool> {
        let c = (size as f64 - 1.0) / 2.0;
        let mut mask = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                let (y, x) = (i as f64 - c, j as f64 - c);
                mask.push(y * y + x * x <= radius * radius);
            }
        }
        mask
    }

    pub fn sum(&self, other: &Image) -> Result<Image> {
        if self.size != other.size {
            return Err(Error::Dimension(format!(
                "cannot add images of size {} and {}",
                self.size, other.size
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Image { size: self.size, data })
    }
}

/// Parallel-beam acquisition geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    image_size: usize,
    n_bins: usize,
    det_spacing: f64,
    angles_deg: Vec<f64>,
    /// Angular quadrature weight of each projection in radians. Computed from
    /// the full angle set and carried along when columns are split off, so
    /// reconstructions over disjoint subsets add up to the full one.
    angle_weights: Vec<f64>,
}

impl Geometry {
    pub fn new(image_size: usize, n_bins: usize, det_spacing: f64, angles_deg: Vec<f64>) -> Result<Self> {
        let weights = angular_weights(&angles_deg);
        Self::with_angle_weights(image_size, n_bins, det_spacing, angles_deg, weights)
    }

    /// `n_angles` equispaced angles on `[0, 180)` degrees, detector spacing 1.
    pub fn parallel(image_size: usize, n_bins: usize, n_angles: usize) -> Result<Self> {
        if n_angles == 0 {
            return Err(Error::Param("at least one projection angle is required".into()));
        }
        let angles = (0..n_angles).map(|k| 180.0 * k as f64 / n_angles as f64).collect();
        Self::new(image_size, n_bins, 1.0, angles)
    }

    pub fn with_angle_weights(
        image_size: usize,
        n_bins: usize,
        det_spacing: f64,
        angles_deg: Vec<f64>,
        angle_weights: Vec<f64>,
    ) -> Result<Self> {
        if image_size == 0 {
            return Err(Error::Param("image size must be positive".into()));
        }
        if n_bins == 0 {
            return Err(Error::Param("detector must have at least one bin".into()));
        }
        if !(det_spacing.is_finite() && det_spacing > 0.0) {
            return Err(Error::Param(format!("detector spacing must be positive, got {det_spacing}")));
        }
        if angle_weights.len() != angles_deg.len() {
            return Err(Error::Dimension("one angular weight per angle is required".into()));
        }
        for (k, &a) in angles_deg.iter().enumerate() {
            if !(0.0..180.0).contains(&a) {
                return Err(Error::Param(format!("angle {a} outside [0, 180)")));
            }
            if k > 0 && a <= angles_deg[k - 1] {
                return Err(Error::Param("angles must be strictly increasing".into()));
            }
        }
        Ok(Self { image_size, n_bins, det_spacing, angles_deg, angle_weights })
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_angles(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn det_spacing(&self) -> f64 {
        self.det_spacing
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn angle_weights(&self) -> &[f64] {
        &self.angle_weights
    }

    /// Index of the angle closest to `theta_deg`, measuring distance modulo
    /// 180 degrees. `None` without angles.
    pub fn nearest_angle_index(&self, theta_deg: f64) -> Option<usize> {
        let dist = |a: f64| {
            let d = (a - theta_deg).rem_euclid(180.0);
            d.min(180.0 - d)
        };
        (0..self.n_angles()).min_by(|&i, &j| dist(self.angles_deg[i]).total_cmp(&dist(self.angles_deg[j])))
    }

    /// Number of measurements, `n_bins * n_angles`.
    pub fn len(&self) -> usize {
        self.n_bins * self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Detector coordinate of the centre of bin `t`.
    pub fn bin_position(&self, t: usize) -> f64 {
        (t as f64 - (self.n_bins as f64 - 1.0) / 2.0) * self.det_spacing
    }

    /// Geometry restricted to the given angle indices (ascending). Angular
    /// weights of the parent are kept.
    pub fn subset(&self, indices: &[usize]) -> Result<Geometry> {
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Param("subset indices must be strictly increasing".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&k| k >= self.n_angles()) {
            return Err(Error::Dimension(format!("angle index {bad} out of range")));
        }
        Geometry::with_angle_weights(
            self.image_size,
            self.n_bins,
            self.det_spacing,
            indices.iter().map(|&k| self.angles_deg[k]).collect(),
            indices.iter().map(|&k| self.angle_weights[k]).collect(),
        )
    }

    /// Same detector and angle set, ignoring the angular weights.
    pub fn same_shape(&self, other: &Geometry) -> bool {
        self.image_size == other.image_size
            && self.n_bins == other.n_bins
            && self.det_spacing == other.det_spacing
            && self.angles_deg == other.angles_deg
    }
}

/// Half the angular distance to each neighbour, with angles taken modulo
/// 180 degrees. Weights sum to pi.
fn angular_weights(angles_deg: &[f64]) -> Vec<f64> {
    let n = angles_deg.len();
    match n {
        0 => Vec::new(),
        1 => vec![PI],
        _ => (0..n)
            .map(|k| {
                let prev = if k == 0 { angles_deg[n - 1] - 180.0 } else { angles_deg[k - 1] };
                let next = if k + 1 == n { angles_deg[0] + 180.0 } else { angles_deg[k + 1] };
                0.5 * (next - prev).to_radians()
            })
            .collect(),
    }
}

/// Measurements indexed by `(bin t, angle k)`, stored angle-major:
/// `data[k * n_bins + t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    geometry: Geometry,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(geometry: Geometry) -> Self {
        let data = vec![0.0; geometry.len()];
        Self { geometry, data }
    }

    pub fn from_data(geometry: Geometry, data: Vec<f64>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::Dimension(format!(
                "sinogram needs {} values, got {}",
                geometry.len(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Param("sinogram values must be finite".into()));
        }
        Ok(Self { geometry, data })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Projection at angle index `k`.
    pub fn column(&self, k: usize) -> &[f64] {
        let n = self.geometry.n_bins;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.geometry.n_bins)
    }

    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.data[k * self.geometry.n_bins + t]
    }

    /// Sinogram holding only the given angle indices (ascending).
    pub fn select(&self, indices: &[usize]) -> Result<Sinogram> {
        let geometry = self.geometry.subset(indices)?;
        let data = indices.iter().flat_map(|&k| self.column(k).iter().copied()).collect();
        Ok(Sinogram { geometry, data })
    }

    /// Interleave two sinograms with disjoint angle sets back into one,
    /// ordered by angle.
    pub fn merge(a: &Sinogram, b: &Sinogram) -> Result<Sinogram> {
        let (ga, gb) = (&a.geometry, &b.geometry);
        if ga.image_size != gb.image_size || ga.n_bins != gb.n_bins || ga.det_spacing != gb.det_spacing {
            return Err(Error::Dimension("sinograms have incompatible detectors".into()));
        }
        let (mut ia, mut ib) = (0, 0);
        let mut angles = Vec::with_capacity(ga.n_angles() + gb.n_angles());
        let mut weights = Vec::with_capacity(angles.capacity());
        let mut data = Vec::with_capacity(a.data.len() + b.data.len());
        while ia < ga.n_angles() || ib < gb.n_angles() {
            let take_a = ib == gb.n_angles() || (ia < ga.n_angles() && ga.angles_deg[ia] < gb.angles_deg[ib]);
            let (src, g, k) = if take_a { (a, ga, &mut ia) } else { (b, gb, &mut ib) };
            angles.push(g.angles_deg[*k]);
            weights.push(g.angle_weights[*k]);
            data.extend_from_slice(src.column(*k));
            *k += 1;
        }
        let geometry = Geometry::with_angle_weights(ga.image_size, ga.n_bins, ga.det_spacing, angles, weights)?;
        Ok(Sinogram { geometry, data })
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

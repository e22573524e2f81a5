//! Filtered back-projection.
//!
//! Each projection is convolved with the band-limited ramp kernel of Kak
//! and Slaney (`h[0] = 1/4`, `h[n] = -1/(pi n)^2` for odd `n`, zero
//! otherwise) by FFT on a zero-padded buffer, then smeared back over the
//! image with pixel-driven linear interpolation. Projection `k` contributes
//! with its angular weight `dtheta_k` from the geometry. Because those
//! weights travel with angle subsets, FBP is additive over any partition of
//! the angles.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::{Image, Sinogram};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Filter {
    #[default]
    RamLak,
    /// Ramp times `sinc`, damping the highest frequencies.
    SheppLogan,
}

impl std::str::FromStr for Filter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ram-lak" => Ok(Self::RamLak),
            "shepp-logan" => Ok(Self::SheppLogan),
            other => Err(Error::Param(format!("unknown filter '{other}'"))),
        }
    }
}

impl std::fmt::Display for Filter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::RamLak => "ram-lak",
            Self::SheppLogan => "shepp-logan",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FbpConfig {
    pub filter: Filter,
    /// FFT length as a multiple of the number of bins: 1, 2 or 4. With 1 the
    /// convolution wraps around.
    pub pad_factor: usize,
}

impl Default for FbpConfig {
    fn default() -> Self {
        Self { filter: Filter::RamLak, pad_factor: 2 }
    }
}

impl FbpConfig {
    pub fn validate(&self) -> Result<()> {
        if ![1, 2, 4].contains(&self.pad_factor) {
            return Err(Error::Param(format!("pad factor must be 1, 2 or 4, got {}", self.pad_factor)));
        }
        Ok(())
    }
}

/// Frequency response of the discrete ramp filter on `len` samples, for
/// unit bin spacing.
pub fn filter_response(filter: Filter, len: usize) -> Vec<f64> {
    let mut kernel = vec![Complex::new(0.0, 0.0); len];
    kernel[0].re = 0.25;
    for (n, k) in kernel.iter_mut().enumerate().skip(1) {
        let dist = n.min(len - n);
        if dist % 2 == 1 {
            k.re = -1.0 / (std::f64::consts::PI * dist as f64).powi(2);
        }
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut kernel);
    let mut response: Vec<f64> = kernel.iter().map(|c| c.re).collect();
    if filter == Filter::SheppLogan {
        for (n, r) in response.iter_mut().enumerate().skip(1) {
            let freq = if n <= len / 2 { n as f64 } else { n as f64 - len as f64 } / len as f64;
            let w = std::f64::consts::PI * freq;
            *r *= w.sin() / w;
        }
    }
    response
}

struct RampFilter {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    response: Vec<f64>,
    buf: Vec<Complex<f64>>,
}

impl RampFilter {
    fn new(filter: Filter, len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            response: filter_response(filter, len),
            buf: vec![Complex::new(0.0, 0.0); len],
        }
    }

    /// Filters `col` in place, scaling by `gain`.
    fn apply(&mut self, col: &mut [f64], gain: f64) {
        let len = self.buf.len();
        for (k, b) in self.buf.iter_mut().enumerate() {
            *b = Complex::new(col.get(k).copied().unwrap_or(0.0), 0.0);
        }
        self.forward.process(&mut self.buf);
        for (b, h) in self.buf.iter_mut().zip(&self.response) {
            *b *= *h;
        }
        self.inverse.process(&mut self.buf);
        let norm = gain / len as f64;
        for (c, b) in col.iter_mut().zip(&self.buf) {
            *c = b.re * norm;
        }
    }
}

/// Ramp-filters every projection of `sin`, returning angle-major data.
pub fn filter_sinogram(sin: &Sinogram, cfg: &FbpConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let geom = sin.geometry();
    let nb = geom.n_bins();
    let mut ramp = RampFilter::new(cfg.filter, cfg.pad_factor * nb);
    // The kernel is defined for unit spacing; it scales as 1 / spacing^2 and
    // the discrete convolution carries one factor of spacing.
    let gain = 1.0 / geom.det_spacing();
    let mut out = sin.data().to_vec();
    for col in out.chunks_mut(nb) {
        ramp.apply(col, gain);
    }
    Ok(out)
}

/// Filtered back-projection of `sin` onto the geometry's image grid.
pub fn fbp_reconstruct(sin: &Sinogram, cfg: &FbpConfig) -> Result<Image> {
    let geom = sin.geometry();
    if geom.n_angles() == 0 {
        return Err(Error::EmptyData("filtered back-projection needs at least one angle".into()));
    }
    let filtered = filter_sinogram(sin, cfg)?;
    let m = geom.image_size();
    let nb = geom.n_bins();
    let c = (m as f64 - 1.0) / 2.0;
    let t_mid = (nb as f64 - 1.0) / 2.0;
    let mut img = vec![0.0; m * m];
    for ((col, &deg), &dtheta) in filtered.chunks(nb).zip(geom.angles_deg()).zip(geom.angle_weights()) {
        let (sin_t, cos_t) = deg.to_radians().sin_cos();
        let step = cos_t / geom.det_spacing();
        for (i, row) in img.chunks_mut(m).enumerate() {
            // Bin coordinate of pixel (i, 0); it advances by `step` per column.
            let start = (-(i as f64 - c) * sin_t - c * cos_t) / geom.det_spacing() + t_mid;
            for (j, px) in row.iter_mut().enumerate() {
                let u = start + j as f64 * step;
                let t0 = u.floor();
                let fr = u - t0;
                let t0 = t0 as i64;
                let mut v = 0.0;
                if t0 >= 0 && (t0 as usize) < nb {
                    v += (1.0 - fr) * col[t0 as usize];
                }
                if t0 + 1 >= 0 && ((t0 + 1) as usize) < nb {
                    v += fr * col[(t0 + 1) as usize];
                }
                *px += dtheta * v;
            }
        }
    }
    Image::from_data(m, img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;

    #[test]
    fn ramp_response_shape() {
        for len in [8, 64, 256] {
            let h = filter_response(Filter::RamLak, len);
            assert!(h.iter().all(|&v| v >= -1e-12));
            // h[0] = 1/4 and the odd taps sum to -1/4 in the infinite limit.
            assert!(h[0].abs() < 0.25 / len as f64, "dc {}", h[0]);
            assert!((h[len / 2] - 0.5).abs() < 0.25 / len as f64);
        }
    }

    #[test]
    fn shepp_logan_damps_high_frequencies() {
        let r = filter_response(Filter::RamLak, 64);
        let s = filter_response(Filter::SheppLogan, 64);
        assert_eq!(r[0], s[0]);
        assert!((s[32] - r[32] * 2.0 / std::f64::consts::PI).abs() < 1e-12);
        for k in 1..64 {
            assert!(s[k] <= r[k] + 1e-15);
        }
    }

    #[test]
    fn empty_angle_set_is_rejected() {
        let g = Geometry::new(8, 8, 1.0, vec![]).unwrap();
        let err = fbp_reconstruct(&Sinogram::zeros(g), &FbpConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyData(_)));
    }

    #[test]
    fn bad_pad_factor_is_rejected() {
        let g = Geometry::parallel(8, 8, 4).unwrap();
        let cfg = FbpConfig { pad_factor: 3, ..FbpConfig::default() };
        assert!(matches!(fbp_reconstruct(&Sinogram::zeros(g), &cfg), Err(Error::Param(_))));
    }

    #[test]
    fn filter_names_round_trip() {
        for f in [Filter::RamLak, Filter::SheppLogan] {
            assert_eq!(f.to_string().parse::<Filter>().unwrap(), f);
        }
        assert!("hann".parse::<Filter>().is_err());
    }
}

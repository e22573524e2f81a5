//! Forward-difference gradient, its adjoint, and the TV / DTV functionals.
//!
//! Boundary handling is symmetric: the difference across the last row (for
//! the first axis) and the last column (for the second axis) is zero.

use crate::error::{Error, Result};
use crate::geometry::{index_direction, Image};

/// Per-pixel 2-vector field; `dx` holds differences along the first image
/// axis, `dy` along the second.
#[derive(Clone, Debug, PartialEq)]
pub struct GradField {
    pub size: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl GradField {
    pub fn zeros(size: usize) -> Self {
        Self { size, dx: vec![0.0; size * size], dy: vec![0.0; size * size] }
    }
}

/// Parameters of one directional TV functional: main direction in degrees
/// and anisotropy width `a` in `(0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtvParams {
    theta_deg: f64,
    a: f64,
    /// Main direction in index space (row, column components).
    e_row: f64,
    e_col: f64,
}

impl DtvParams {
    pub fn new(theta_deg: f64, a: f64) -> Result<Self> {
        if !theta_deg.is_finite() {
            return Err(Error::Param("DTV angle must be finite".into()));
        }
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::Param(format!("DTV width a must lie in (0, 1], got {a}")));
        }
        let theta_deg = theta_deg.rem_euclid(360.0);
        // Directions are defined modulo 180 degrees; reducing first makes
        // theta and theta + 180 produce bit-identical weights.
        let (e_row, e_col) = index_direction(theta_deg.rem_euclid(180.0));
        Ok(Self { theta_deg, a, e_row, e_col })
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta_deg
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Same width, direction rotated by 90 degrees.
    pub fn orthogonal(&self) -> Self {
        Self::new(self.theta_deg + 90.0, self.a).expect("valid parameters stay valid")
    }

    /// `W g` with `W = diag(1, a) R_theta`: the gradient component along the
    /// main direction is kept, the component across it is scaled by `a`.
    #[inline]
    pub fn weight(&self, g1: f64, g2: f64) -> (f64, f64) {
        (self.e_row * g1 + self.e_col * g2, self.a * (-self.e_col * g1 + self.e_row * g2))
    }

    /// `W^T w`.
    #[inline]
    pub fn weight_transpose(&self, w1: f64, w2: f64) -> (f64, f64) {
        let aw2 = self.a * w2;
        (self.e_row * w1 - self.e_col * aw2, self.e_col * w1 + self.e_row * aw2)
    }

    /// `W^{-T} q`.
    #[inline]
    pub fn weight_inverse_transpose(&self, q1: f64, q2: f64) -> (f64, f64) {
        (self.e_row * q1 + self.e_col * q2, (-self.e_col * q1 + self.e_row * q2) / self.a)
    }

    /// Weighted norm `|W g|`.
    #[inline]
    pub fn norm(&self, g1: f64, g2: f64) -> f64 {
        let (w1, w2) = self.weight(g1, g2);
        w1.hypot(w2)
    }
}

pub(crate) fn gradient_into(x: &[f64], m: usize, dx: &mut [f64], dy: &mut [f64]) {
    for i in 0..m {
        let row = &x[i * m..(i + 1) * m];
        for j in 0..m {
            let k = i * m + j;
            dx[k] = if i + 1 < m { x[k + m] - row[j] } else { 0.0 };
            dy[k] = if j + 1 < m { row[j + 1] - row[j] } else { 0.0 };
        }
    }
}

/// `out = div p = -grad^T p`.
pub(crate) fn divergence_into(dx: &[f64], dy: &[f64], m: usize, out: &mut [f64]) {
    for i in 0..m {
        for j in 0..m {
            let k = i * m + j;
            let mut v = 0.0;
            if i + 1 < m {
                v += dx[k];
            }
            if i > 0 {
                v -= dx[k - m];
            }
            if j + 1 < m {
                v += dy[k];
            }
            if j > 0 {
                v -= dy[k - 1];
            }
            out[k] = v;
        }
    }
}

pub fn gradient(img: &Image) -> GradField {
    let m = img.size();
    let mut g = GradField::zeros(m);
    gradient_into(img.data(), m, &mut g.dx, &mut g.dy);
    g
}

/// Negative adjoint of [`gradient`].
pub fn divergence(field: &GradField) -> Image {
    let m = field.size;
    let mut out = vec![0.0; m * m];
    divergence_into(&field.dx, &field.dy, m, &mut out);
    Image::from_fn(m, |i, j| out[i * m + j])
}

/// Isotropic total variation, `sum |grad x|_2`.
pub fn tv(img: &Image) -> f64 {
    let g = gradient(img);
    g.dx.iter().zip(&g.dy).map(|(a, b)| a.hypot(*b)).sum()
}

/// Directional total variation, `sum |W (grad x)_ij|_2`.
pub fn dtv(img: &Image, p: &DtvParams) -> f64 {
    let g = gradient(img);
    g.dx.iter().zip(&g.dy).map(|(a, b)| p.norm(*a, *b)).sum()
}

/// Projects every dual vector `q` onto `{ q : |W^{-T} q| <= weight }` by
/// mapping to the weighted frame, clamping to the Euclidean ball and mapping
/// back.
pub fn prox_dtv_dual(field: &GradField, p: &DtvParams, weight: f64) -> GradField {
    let mut out = field.clone();
    for (q1, q2) in out.dx.iter_mut().zip(out.dy.iter_mut()) {
        let (z1, z2) = p.weight_inverse_transpose(*q1, *q2);
        let n = z1.hypot(z2);
        if n > weight {
            let s = weight / n;
            let (r1, r2) = p.weight_transpose(z1 * s, z2 * s);
            *q1 = r1;
            *q2 = r2;
        }
    }
    out
}

/// In-place per-pixel projection onto the Euclidean ball of radius `radius`.
pub(crate) fn project_ball(p1: &mut [f64], p2: &mut [f64], radius: f64) {
    for (a, b) in p1.iter_mut().zip(p2.iter_mut()) {
        let n = a.hypot(*b);
        if n > radius {
            let s = radius / n;
            *a *= s;
            *b *= s;
        }
    }
}

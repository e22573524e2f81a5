//! Matched parallel-beam projector pair.
//!
//! The forward projector is Joseph's method: each ray is stepped along the
//! image axis it is most aligned with, and at every step the image is
//! linearly interpolated along the other axis. The weight of one step is the
//! ray length inside one row (or column), `1 / max(|cos|, |sin|)`. The back
//! projector runs the same loops and scatters instead of gathering, so it is
//! the exact transpose of the forward matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{index_direction, Geometry, Image, Sinogram};
use crate::vecops::{dot, norm, scale};

/// Per-angle stepping parameters. Along stepping line `r` the
/// interpolation coordinate of bin `t` is `offsets[t] + (r - c) * slope`.
#[derive(Clone, Debug)]
struct AngleSweep {
    transposed: bool,
    offsets: Vec<f64>,
    slope: f64,
    weight: f64,
}

/// The discrete Radon transform `A` of a geometry, applied matrix-free.
#[derive(Clone, Debug)]
pub struct RayTransform {
    geometry: Geometry,
    sweeps: Vec<AngleSweep>,
}

impl RayTransform {
    pub fn new(geometry: &Geometry) -> Self {
        let c = (geometry.image_size() as f64 - 1.0) / 2.0;
        let sweeps = geometry
            .angles_deg()
            .iter()
            .map(|&deg| {
                let (d_row, d_col) = index_direction(deg);
                let bins = (0..geometry.n_bins()).map(|t| geometry.bin_position(t));
                if d_row.abs() >= d_col.abs() {
                    AngleSweep {
                        transposed: false,
                        offsets: bins.map(|s| s / d_row + c).collect(),
                        slope: d_col / d_row,
                        weight: 1.0 / d_row.abs(),
                    }
                } else {
                    AngleSweep {
                        transposed: true,
                        offsets: bins.map(|s| -s / d_col + c).collect(),
                        slope: d_row / d_col,
                        weight: 1.0 / d_col.abs(),
                    }
                }
            })
            .collect();
        Self { geometry: geometry.clone(), sweeps }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Number of image pixels (columns of `A`).
    pub fn domain_len(&self) -> usize {
        self.geometry.image_size() * self.geometry.image_size()
    }

    /// Number of measurements (rows of `A`).
    pub fn range_len(&self) -> usize {
        self.geometry.len()
    }

    /// `out = A x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let m = self.geometry.image_size();
        let nb = self.geometry.n_bins();
        assert_eq!(x.len(), m * m);
        assert_eq!(out.len(), self.range_len());
        let xt = if self.sweeps.iter().any(|s| s.transposed) { transpose(x, m) } else { Vec::new() };
        for (sweep, col) in self.sweeps.iter().zip(out.chunks_mut(nb)) {
            let rows = if sweep.transposed { &xt } else { x };
            col.iter_mut().for_each(|v| *v = 0.0);
            forward_sweep(rows, m, sweep, col);
        }
    }

    /// `out = A^T y`.
    pub fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        let m = self.geometry.image_size();
        let nb = self.geometry.n_bins();
        assert_eq!(y.len(), self.range_len());
        assert_eq!(out.len(), m * m);
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut acc_t = if self.sweeps.iter().any(|s| s.transposed) { vec![0.0; m * m] } else { Vec::new() };
        for (sweep, col) in self.sweeps.iter().zip(y.chunks(nb)) {
            let rows = if sweep.transposed { &mut acc_t[..] } else { &mut out[..] };
            back_sweep(col, m, sweep, rows);
        }
        if !acc_t.is_empty() {
            for i in 0..m {
                for j in 0..m {
                    out[i * m + j] += acc_t[j * m + i];
                }
            }
        }
    }

    /// Power-iteration estimate of the spectral norm `||A||_2`.
    pub fn norm_estimate(&self, iters: usize) -> f64 {
        let mut tmp = vec![0.0; self.range_len()];
        power_iteration(random_start(self.domain_len(), 0x5eed), iters, |v, out| {
            self.apply(v, &mut tmp);
            self.apply_adjoint(&tmp, out);
        })
    }
}

fn transpose(x: &[f64], m: usize) -> Vec<f64> {
    let mut t = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            t[j * m + i] = x[i * m + j];
        }
    }
    t
}

/// Integer part and fraction of an interpolation coordinate. Equivalent to
/// `floor` for all values the sweeps produce, without a libm call.
#[inline(always)]
fn split_index(f: f64) -> (isize, f64) {
    let t = f as isize;
    let j0 = if (t as f64) > f { t - 1 } else { t };
    (j0, f - j0 as f64)
}

/// Bins `t` whose coordinate `offsets[t] + shift` lies safely inside
/// `[0, m - 1)`, so both interpolation taps are in the row. Offsets are
/// affine in `t`; the range is shrunk by one bin at each end to absorb
/// rounding, and the bins outside it take the checked path.
#[inline]
fn interior_bins(offsets: &[f64], shift: f64, m: usize) -> (usize, usize) {
    let n = offsets.len();
    if n < 2 {
        return (0, 0);
    }
    let o0 = offsets[0] + shift;
    let d = offsets[1] - offsets[0];
    let top = m as f64 - 1.0;
    let (a, b) = if d == 0.0 {
        if o0 >= 0.0 && o0 < top {
            (0.0, n as f64)
        } else {
            (0.0, 0.0)
        }
    } else {
        let t0 = (0.0 - o0) / d;
        let t1 = (top - o0) / d;
        let (a, b) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
        (a.ceil() + 1.0, b.floor() - 1.0)
    };
    let lo = a.clamp(0.0, n as f64) as usize;
    let hi = b.clamp(0.0, n as f64) as usize;
    if lo < hi {
        (lo, hi)
    } else {
        (0, 0)
    }
}

fn forward_sweep(rows: &[f64], m: usize, sweep: &AngleSweep, col: &mut [f64]) {
    let c = (m as f64 - 1.0) / 2.0;
    let offs = &sweep.offsets[..];
    for (r, row) in rows.chunks_exact(m).enumerate() {
        let shift = (r as f64 - c) * sweep.slope;
        let (lo, hi) = interior_bins(offs, shift, m);
        for t in (0..lo).chain(hi..offs.len()) {
            let (j0, fr) = split_index(offs[t] + shift);
            if j0 >= 0 && (j0 as usize) + 1 < m {
                let j0 = j0 as usize;
                col[t] += (1.0 - fr) * row[j0] + fr * row[j0 + 1];
            } else if j0 == -1 {
                col[t] += fr * row[0];
            } else if j0 >= 0 && j0 as usize == m - 1 {
                col[t] += (1.0 - fr) * row[m - 1];
            }
        }
        for (acc, &off) in col[lo..hi].iter_mut().zip(&offs[lo..hi]) {
            let f = off + shift;
            let j0 = f as i64;
            let fr = f - j0 as f64;
            let pair = &row[j0 as usize..j0 as usize + 2];
            *acc += (1.0 - fr) * pair[0] + fr * pair[1];
        }
    }
    for v in col.iter_mut() {
        *v *= sweep.weight;
    }
}

fn back_sweep(col: &[f64], m: usize, sweep: &AngleSweep, rows: &mut [f64]) {
    let c = (m as f64 - 1.0) / 2.0;
    let offs = &sweep.offsets[..];
    let vals: Vec<f64> = col.iter().map(|v| v * sweep.weight).collect();
    for (r, row) in rows.chunks_exact_mut(m).enumerate() {
        let shift = (r as f64 - c) * sweep.slope;
        let (lo, hi) = interior_bins(offs, shift, m);
        for t in (0..lo).chain(hi..offs.len()) {
            let v = vals[t];
            let (j0, fr) = split_index(offs[t] + shift);
            if j0 >= 0 && (j0 as usize) + 1 < m {
                let j0 = j0 as usize;
                row[j0] += (1.0 - fr) * v;
                row[j0 + 1] += fr * v;
            } else if j0 == -1 {
                row[0] += fr * v;
            } else if j0 >= 0 && j0 as usize == m - 1 {
                row[m - 1] += (1.0 - fr) * v;
            }
        }
        // Two passes over the interior: within one pass the target pixels
        // of successive bins rarely coincide, which keeps the updates
        // independent of each other.
        for (&v, &off) in vals[lo..hi].iter().zip(&offs[lo..hi]) {
            let f = off + shift;
            let j0 = f as i64;
            let fr = f - j0 as f64;
            row[j0 as usize] += (1.0 - fr) * v;
        }
        for (&v, &off) in vals[lo..hi].iter().zip(&offs[lo..hi]) {
            let f = off + shift;
            let j0 = f as i64;
            let fr = f - j0 as f64;
            row[j0 as usize + 1] += fr * v;
        }
    }
}

/// Forward projection `A x`.
pub fn forward_project(img: &Image, geom: &Geometry) -> Result<Sinogram> {
    if img.size() != geom.image_size() {
        return Err(Error::Dimension(format!(
            "image size {} does not match geometry image size {}",
            img.size(),
            geom.image_size()
        )));
    }
    let mut data = vec![0.0; geom.len()];
    RayTransform::new(geom).apply(img.data(), &mut data);
    Sinogram::from_data(geom.clone(), data)
}

/// Back projection `A^T y`, the exact adjoint of [`forward_project`].
pub fn back_project(sin: &Sinogram) -> Image {
    let geom = sin.geometry();
    let m = geom.image_size();
    let mut data = vec![0.0; m * m];
    RayTransform::new(geom).apply_adjoint(sin.data(), &mut data);
    Image::from_fn(m, |i, j| data[i * m + j])
}

/// Estimate of `||A||_2` after `iters` power iterations on `A^T A`.
pub fn operator_norm_estimate(geom: &Geometry, iters: usize) -> f64 {
    RayTransform::new(geom).norm_estimate(iters.max(1))
}

/// Power iteration for the largest eigenvalue of a symmetric positive
/// semidefinite map `B = K^T K`, returning `sqrt(lambda_max)`, i.e. `||K||_2`.
///
/// The returned value is the square root of the last Rayleigh quotient,
/// which is nondecreasing in the iteration count.
pub fn power_iteration(mut v: Vec<f64>, iters: usize, mut apply_normal: impl FnMut(&[f64], &mut [f64])) -> f64 {
    let n = norm(&v);
    if n == 0.0 {
        return 0.0;
    }
    scale(&mut v, 1.0 / n);
    let mut w = vec![0.0; v.len()];
    let mut rayleigh = 0.0;
    for _ in 0..iters.max(1) {
        apply_normal(&v, &mut w);
        rayleigh = dot(&v, &w);
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
    }
    rayleigh.max(0.0).sqrt()
}

/// Deterministic pseudo-random start vector with entries in `[-1, 1)`.
pub(crate) fn random_start(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(m: usize, r: f64) -> Image {
        let mask = Image::disk_mask(m, r);
        Image::from_fn(m, |i, j| if mask[i * m + j] { 1.0 } else { 0.0 })
    }

    /// Disk with pixel values equal to the covered area fraction (8x8
    /// supersampling).
    fn smooth_disk(m: usize, r: f64) -> Image {
        let c = (m as f64 - 1.0) / 2.0;
        Image::from_fn(m, |i, j| {
            let mut hits = 0;
            for a in 0..8 {
                for b in 0..8 {
                    let y = i as f64 - c - 0.5 + (a as f64 + 0.5) / 8.0;
                    let x = j as f64 - c - 0.5 + (b as f64 + 0.5) / 8.0;
                    if x * x + y * y <= r * r {
                        hits += 1;
                    }
                }
            }
            hits as f64 / 64.0
        })
    }

    #[test]
    fn zero_image_projects_to_zero() {
        let g = Geometry::parallel(8, 8, 5).unwrap();
        let s = forward_project(&Image::zeros(8), &g).unwrap();
        assert!(s.data().iter().all(|&v| v == 0.0));
        let b = back_project(&Sinogram::zeros(g));
        assert!(b.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = Geometry::parallel(8, 8, 5).unwrap();
        assert!(matches!(forward_project(&Image::zeros(7), &g), Err(Error::Dimension(_))));
    }

    #[test]
    fn centred_disk_central_ray_is_diameter() {
        let m = 64;
        let r = m as f64 / 4.0;
        let g = Geometry::new(m, m, 1.0, vec![0.0]).unwrap();
        let s = forward_project(&disk(m, r), &g).unwrap();
        // Even bin count: the two central bins straddle the axis at s = +-0.5.
        let expected = 2.0 * (r * r - 0.25).sqrt();
        for t in [m / 2 - 1, m / 2] {
            let rel = (s.get(t, 0) - expected).abs() / expected;
            assert!(rel < 0.02, "bin {t}: {} vs {expected}", s.get(t, 0));
        }
    }

    #[test]
    fn disk_projection_is_nearly_angle_independent() {
        let m = 128;
        let g = Geometry::parallel(m, m, 24).unwrap();
        let s = forward_project(&smooth_disk(m, m as f64 / 4.0), &g).unwrap();
        let peak = s.data().iter().cloned().fold(0.0, f64::max);
        for k in 1..g.n_angles() {
            for t in 0..m {
                assert!((s.get(t, k) - s.get(t, 0)).abs() <= 0.02 * peak);
            }
        }
    }

    #[test]
    fn single_ray_back_projects_onto_its_path() {
        let m = 16;
        let g = Geometry::new(m, m, 1.0, vec![30.0]).unwrap();
        let mut sin = Sinogram::zeros(g.clone());
        sin.data_mut()[5] = 1.0;
        let bp = back_project(&sin);
        // Only pixels touched by the ray are nonzero, and they are exactly the
        // nonzero entries of the corresponding row of A.
        for i in 0..m {
            for j in 0..m {
                let mut e = Image::zeros(m);
                e.data_mut()[i * m + j] = 1.0;
                let row_entry = forward_project(&e, &g).unwrap().get(5, 0);
                assert_eq!(bp.get(i, j), row_entry);
            }
        }
        let support = bp.data().iter().filter(|&&v| v != 0.0).count();
        assert!(support > 0 && support <= 2 * m);
    }

    #[test]
    fn one_by_one_operator_norm_is_the_weight() {
        let g = Geometry::new(1, 1, 1.0, vec![0.0]).unwrap();
        let s = forward_project(&Image::from_data(1, vec![1.0]).unwrap(), &g).unwrap();
        assert_eq!(s.data(), &[1.0]);
        assert!((operator_norm_estimate(&g, 3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn power_iteration_is_sign_invariant() {
        let g = Geometry::parallel(8, 8, 6).unwrap();
        let op = RayTransform::new(&g);
        let mut tmp = vec![0.0; op.range_len()];
        let start = random_start(64, 11);
        let neg: Vec<f64> = start.iter().map(|v| -v).collect();
        let mut normal = |v: &[f64], out: &mut [f64]| {
            op.apply(v, &mut tmp);
            op.apply_adjoint(&tmp, out);
        };
        let a = power_iteration(start, 20, &mut normal);
        let b = power_iteration(neg, 20, &mut normal);
        assert_eq!(a, b);
    }
}

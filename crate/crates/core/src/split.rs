//! Sinogram splitting.
//!
//! The `K + 1` projections centred on the main direction carry the fibre
//! texture; the remaining ones see everything else. Each part is
//! reconstructed on its own, either by limited-angle FBP or by a variational
//! method: DTV for the fibre component `u`, TV plus an l1 term for the crack
//! component `v`, both nonnegative.

use crate::diffops::DtvParams;
use crate::error::{Error, Result};
use crate::fbp::{fbp_reconstruct, FbpConfig};
use crate::geometry::{Image, Sinogram};
use crate::pdhg::{SolveConfig, SolveReport};
use crate::recon::{reconstruct, ReconstructParams, Regularizer};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    /// Angle index of the main direction.
    pub main_index: usize,
    /// Range width; even, at least 2.
    pub k: usize,
}

impl SplitSpec {
    pub fn validate(&self, n_angles: usize) -> Result<()> {
        if self.k < 2 || self.k % 2 == 1 {
            return Err(Error::Param(format!("range width K must be even and at least 2, got {}", self.k)));
        }
        if self.main_index >= n_angles {
            return Err(Error::Param(format!("main index {} out of range for {n_angles} angles", self.main_index)));
        }
        if self.k + 1 > n_angles {
            return Err(Error::Param(format!("K + 1 = {} exceeds the {n_angles} available angles", self.k + 1)));
        }
        if self.k + 1 == n_angles {
            return Err(Error::Param("K + 1 equals the number of angles, leaving the second part empty".into()));
        }
        Ok(())
    }

    /// Indices of the main window in window order, wrapping modulo
    /// `n_angles` (directions repeat every 180 degrees).
    pub fn window(&self, n_angles: usize) -> Result<Vec<usize>> {
        self.validate(n_angles)?;
        let first = self.main_index + n_angles - self.k / 2;
        Ok((0..=self.k).map(|r| (first + r) % n_angles).collect())
    }

    /// Sorted index sets `(theta_1, theta_2)` partitioning `0..n_angles`.
    pub fn partition(&self, n_angles: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut inside = vec![false; n_angles];
        for k in self.window(n_angles)? {
            inside[k] = true;
        }
        let (first, second): (Vec<usize>, Vec<usize>) = (0..n_angles).partition(|&k| inside[k]);
        Ok((first, second))
    }
}

/// Splits `sin` into the main-window projections and the rest.
pub fn split_sinogram(sin: &Sinogram, spec: &SplitSpec) -> Result<(Sinogram, Sinogram)> {
    let (first, second) = spec.partition(sin.geometry().n_angles())?;
    Ok((sin.select(&first)?, sin.select(&second)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitResult {
    /// Fibre component.
    pub u: Image,
    /// Crack component.
    pub v: Image,
    /// Solver reports for `u` and `v`; `None` for FBP.
    pub reports: Option<(SolveReport, SolveReport)>,
}

pub fn split_fbp(sin: &Sinogram, spec: &SplitSpec, cfg: &FbpConfig) -> Result<SplitResult> {
    let (b1, b2) = split_sinogram(sin, spec)?;
    Ok(SplitResult { u: fbp_reconstruct(&b1, cfg)?, v: fbp_reconstruct(&b2, cfg)?, reports: None })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitParams {
    pub lambda_u: f64,
    pub lambda_v: f64,
    /// l1 weight on `v`; must be positive.
    pub beta: f64,
    /// DTV for `u`, usually along the main direction.
    pub dtv: DtvParams,
}

impl SplitParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_u", self.lambda_u), ("lambda_v", self.lambda_v), ("beta", self.beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Param(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

pub fn split_variational(sin: &Sinogram, spec: &SplitSpec, params: &SplitParams, cfg: &SolveConfig) -> Result<SplitResult> {
    params.validate()?;
    let (b1, b2) = split_sinogram(sin, spec)?;
    let pu = ReconstructParams { nonneg: true, ..ReconstructParams::new(Regularizer::Dtv(params.dtv), params.lambda_u) };
    let pv = ReconstructParams { nonneg: true, l1: params.beta, ..ReconstructParams::new(Regularizer::Tv, params.lambda_v) };
    let (u, ru) = reconstruct(&b1, &pu, cfg)?;
    let (v, rv) = reconstruct(&b2, &pv, cfg)?;
    Ok(SplitResult { u, v, reports: Some((ru, rv)) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;

    #[test]
    fn window_wraps_around() {
        let spec = SplitSpec { main_index: 0, k: 4 };
        assert_eq!(spec.window(12).unwrap(), vec![10, 11, 0, 1, 2]);
        let (a, b) = spec.partition(12).unwrap();
        assert_eq!(a, vec![0, 1, 2, 10, 11]);
        assert_eq!(b, (3..10).collect::<Vec<_>>());
        let top = SplitSpec { main_index: 11, k: 2 };
        assert_eq!(top.window(12).unwrap(), vec![10, 11, 0]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        for (m, k) in [(0, 3), (0, 0), (20, 2), (0, 12), (0, 11)] {
            assert!(matches!(SplitSpec { main_index: m, k }.window(12), Err(Error::Param(_))), "{m} {k}");
        }
        assert!(SplitSpec { main_index: 0, k: 10 }.window(12).is_ok());
    }

    #[test]
    fn parts_partition_the_columns() {
        let g = Geometry::parallel(4, 3, 9).unwrap();
        let data: Vec<f64> = (0..27).map(|v| v as f64).collect();
        let sin = Sinogram::from_data(g, data).unwrap();
        let (a, b) = split_sinogram(&sin, &SplitSpec { main_index: 8, k: 2 }).unwrap();
        assert_eq!(a.geometry().angles_deg(), &[0.0, 140.0, 160.0]);
        assert_eq!(a.column(0), sin.column(0));
        assert_eq!(b.geometry().n_angles(), 6);
        assert_eq!(Sinogram::merge(&a, &b).unwrap(), sin);
    }

    #[test]
    fn zero_beta_is_rejected() {
        let p = SplitParams { lambda_u: 1.0, lambda_v: 1.0, beta: 0.0, dtv: DtvParams::new(0.0, 0.15).unwrap() };
        assert!(matches!(p.validate(), Err(Error::Param(_))));
    }
}

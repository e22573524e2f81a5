//! Main-direction estimation from sinogram data.
//!
//! A projection taken along a strongly directional texture integrates along
//! the stripes and keeps their full contrast, while projections at other
//! angles average it out. Each projection is scored by the summed magnitude
//! of its 1-D DFT over the detector, and the best-scoring angle is taken
//! as the main direction.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::Sinogram;

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionEstimate {
    pub theta_deg: f64,
    /// Score of every projection angle, in geometry order.
    pub scores: Vec<f64>,
    pub argmax_index: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DirectionConfig {
    /// Also sum the zero-frequency term. It equals the projection's total
    /// mass, which is the same for every angle, so it only dilutes contrast.
    pub include_dc: bool,
}

/// Per-angle summed DFT magnitudes.
pub fn direction_scores(sin: &Sinogram, cfg: &DirectionConfig) -> Vec<f64> {
    let nb = sin.geometry().n_bins();
    let fft = FftPlanner::new().plan_fft_forward(nb);
    let mut buf = vec![Complex::new(0.0, 0.0); nb];
    let skip = usize::from(!cfg.include_dc);
    sin.columns()
        .map(|col| {
            for (b, &v) in buf.iter_mut().zip(col) {
                *b = Complex::new(v, 0.0);
            }
            fft.process(&mut buf);
            buf.iter().skip(skip).map(|c| c.norm()).sum()
        })
        .collect()
}

/// Angle of the best-scoring projection; ties go to the smallest index.
pub fn estimate_direction(sin: &Sinogram) -> Result<DirectionEstimate> {
    estimate_direction_with(sin, &DirectionConfig::default())
}

pub fn estimate_direction_with(sin: &Sinogram, cfg: &DirectionConfig) -> Result<DirectionEstimate> {
    let geom = sin.geometry();
    if geom.n_angles() == 0 {
        return Err(Error::EmptyData("direction estimation needs at least one angle".into()));
    }
    if geom.n_bins() < 2 {
        return Err(Error::Param("direction estimation needs at least two detector bins".into()));
    }
    let scores = direction_scores(sin, cfg);
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    Ok(DirectionEstimate { theta_deg: geom.angles_deg()[best], scores, argmax_index: best })
}

//! Joint DTV decomposition of one sinogram into a fibre component `u` and a
//! crack component `v`:
//!
//! ```text
//! min_{u >= 0, v}  1/2 ||s (A (u + v) - b)||^2
//!                  + lambda (DTV_{theta, a_u}(u) + alpha DTV_{theta + 90, a_v}(v))
//!                  + beta ||v||_1
//! ```
//!
//! with `s = 1 / ||A||` as in [`crate::recon`]. The primal variable is
//! `[u; v]` and the dual stacks three blocks: the data residual of `u + v`
//! and one weighted gradient per component.

use crate::diffops::{dtv, project_ball, DtvParams};
use crate::error::{Error, Result};
use crate::geometry::{Image, Sinogram};
use crate::metrics::{crack_capture, psnr};
use crate::pdhg::{estimate_operator_norm, pdhg_solve, SaddleProblem, SolveConfig, SolveReport};
use crate::projector::RayTransform;
use crate::recon::{
    fidelity, prox_fidelity_conj, shrink, WeightedGradient, GRAD_NORM_BOUND, NORM_ITERS, NORM_SAFETY, STEP_RATIO_GAIN,
};

/// True iff `a_u < alpha < 1 / a_v`. Outside that interval one of the two
/// weighted norms dominates the other for every gradient, and the model
/// puts everything in a single component.
pub fn validate_alpha(a_u: f64, a_v: f64, alpha: f64) -> bool {
    a_u < alpha && alpha * a_v < 1.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompParams {
    pub lambda: f64,
    pub alpha: f64,
    pub a_u: f64,
    pub a_v: f64,
    pub beta: f64,
    pub theta_deg: f64,
}

impl DecompParams {
    pub const DEFAULT_A_U: f64 = 0.15;
    pub const DEFAULT_A_V: f64 = 0.5;

    /// Default widths.
    pub fn new(lambda: f64, alpha: f64, beta: f64, theta_deg: f64) -> Self {
        Self { lambda, alpha, a_u: Self::DEFAULT_A_U, a_v: Self::DEFAULT_A_V, beta, theta_deg }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("a_u", self.a_u), ("a_v", self.a_v)] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Param(format!("{name} must lie in (0, 1), got {a}")));
            }
        }
        for (name, v) in [("lambda", self.lambda), ("beta", self.beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Param(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.theta_deg.is_finite() {
            return Err(Error::Param("main direction must be finite".into()));
        }
        if !validate_alpha(self.a_u, self.a_v, self.alpha) {
            return Err(Error::Param(format!(
                "alpha = {} outside ({}, {})",
                self.alpha,
                self.a_u,
                1.0 / self.a_v
            )));
        }
        Ok(())
    }

    pub fn fibre_weight(&self) -> Result<DtvParams> {
        DtvParams::new(self.theta_deg, self.a_u)
    }

    /// Weight of the crack term, at the orthogonal direction.
    pub fn crack_weight(&self) -> Result<DtvParams> {
        DtvParams::new(self.theta_deg + 90.0, self.a_v)
    }
}

pub struct DecompositionProblem {
    op: RayTransform,
    /// `s b`.
    b: Vec<f64>,
    params: DecompParams,
    data_scale: f64,
    grad_u: WeightedGradient,
    grad_v: WeightedGradient,
    lip: f64,
    /// Scratch for `u + v`.
    sum: std::cell::RefCell<Vec<f64>>,
}

impl DecompositionProblem {
    pub fn new(sin: &Sinogram, params: &DecompParams) -> Result<Self> {
        params.validate()?;
        let op = RayTransform::new(sin.geometry());
        let m = sin.geometry().image_size();
        let a_norm = op.norm_estimate(NORM_ITERS).max(f64::MIN_POSITIVE);
        let scale = 1.0 / GRAD_NORM_BOUND;
        let mut problem = Self {
            b: sin.data().iter().map(|v| v / a_norm).collect(),
            params: *params,
            data_scale: 1.0 / a_norm,
            grad_u: WeightedGradient { m, weight: params.fibre_weight()?, scale },
            grad_v: WeightedGradient { m, weight: params.crack_weight()?, scale },
            lip: 1.0,
            sum: std::cell::RefCell::new(vec![0.0; m * m]),
            op,
        };
        problem.lip = NORM_SAFETY * estimate_operator_norm(&problem, NORM_ITERS);
        Ok(problem)
    }

    pub fn crack_weight(&self) -> DtvParams {
        self.grad_v.weight
    }

    fn n_pix(&self) -> usize {
        self.op.domain_len()
    }

    fn n_data(&self) -> usize {
        self.op.range_len()
    }
}

impl SaddleProblem for DecompositionProblem {
    fn primal_len(&self) -> usize {
        2 * self.n_pix()
    }

    fn dual_len(&self) -> usize {
        self.n_data() + 4 * self.n_pix()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n_pix();
        let (u, v) = x.split_at(n);
        let (data, rest) = out.split_at_mut(self.n_data());
        let mut sum = self.sum.borrow_mut();
        for ((s, a), b) in sum.iter_mut().zip(u).zip(v) {
            *s = a + b;
        }
        self.op.apply(&sum, data);
        data.iter_mut().for_each(|d| *d *= self.data_scale);
        let (gu, gv) = rest.split_at_mut(2 * n);
        let (gu1, gu2) = gu.split_at_mut(n);
        let (gv1, gv2) = gv.split_at_mut(n);
        self.grad_u.apply(u, gu1, gu2);
        self.grad_v.apply(v, gv1, gv2);
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        let n = self.n_pix();
        let (data, rest) = y.split_at(self.n_data());
        let (ou, ov) = out.split_at_mut(n);
        self.op.apply_adjoint(data, ou);
        ou.iter_mut().for_each(|d| *d *= self.data_scale);
        ov.copy_from_slice(ou);
        let (gu, gv) = rest.split_at(2 * n);
        self.grad_u.adjoint_add(&gu[..n], &gu[n..], ou);
        self.grad_v.adjoint_add(&gv[..n], &gv[n..], ov);
    }

    fn prox_primal(&self, tau: f64, x: &mut [f64]) {
        let (u, v) = x.split_at_mut(self.n_pix());
        u.iter_mut().for_each(|p| *p = p.max(0.0));
        shrink(v, tau * self.params.beta, false);
    }

    fn prox_dual(&self, sigma: f64, y: &mut [f64]) {
        let n = self.n_pix();
        let (data, rest) = y.split_at_mut(self.n_data());
        prox_fidelity_conj(data, &self.b, sigma);
        let (gu, gv) = rest.split_at_mut(2 * n);
        let (gu1, gu2) = gu.split_at_mut(n);
        let (gv1, gv2) = gv.split_at_mut(n);
        project_ball(gu1, gu2, self.params.lambda / self.grad_u.scale);
        project_ball(gv1, gv2, self.params.lambda * self.params.alpha / self.grad_v.scale);
    }

    fn objective(&self, x: &[f64], kx: &[f64]) -> f64 {
        let n = self.n_pix();
        let (data, rest) = kx.split_at(self.n_data());
        let (gu, gv) = rest.split_at(2 * n);
        let p = &self.params;
        fidelity(data, &self.b)
            + p.lambda * self.grad_u.functional(&gu[..n], &gu[n..])
            + p.lambda * p.alpha * self.grad_v.functional(&gv[..n], &gv[n..])
            + p.beta * x[n..].iter().map(|v| v.abs()).sum::<f64>()
    }

    fn operator_norm(&self) -> f64 {
        self.lip
    }

    fn step_ratio(&self) -> f64 {
        STEP_RATIO_GAIN / (self.data_scale * self.data_scale)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub u: Image,
    pub v: Image,
    pub report: SolveReport,
}

impl Decomposition {
    pub fn sum(&self) -> Image {
        self.u.sum(&self.v).expect("components share a size")
    }
}

pub fn decompose(sin: &Sinogram, p: &DecompParams, cfg: &SolveConfig) -> Result<Decomposition> {
    decompose_from(sin, p, cfg, None)
}

/// Decomposition started from `(u0, v0)` instead of zero.
pub fn decompose_from(
    sin: &Sinogram,
    p: &DecompParams,
    cfg: &SolveConfig,
    start: Option<(&Image, &Image)>,
) -> Result<Decomposition> {
    let m = sin.geometry().image_size();
    let mut x0 = vec![0.0; 2 * m * m];
    if let Some((u0, v0)) = start {
        if u0.size() != m || v0.size() != m {
            return Err(Error::Dimension(format!("start images must be {m} x {m}")));
        }
        x0[..m * m].copy_from_slice(u0.data());
        x0[m * m..].copy_from_slice(v0.data());
    }
    let problem = DecompositionProblem::new(sin, p)?;
    let (x, report) = pdhg_solve(&problem, x0, cfg)?;
    let (u, v) = x.split_at(m * m);
    Ok(Decomposition { u: Image::from_data(m, u.to_vec())?, v: Image::from_data(m, v.to_vec())?, report })
}

/// The l1 weight used by [`alpha_sweep`].
pub const SWEEP_BETA: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaRow {
    pub alpha: f64,
    pub psnr: f64,
    /// [`crack_capture`] of `v`.
    pub crack_capture: f64,
    pub report: SolveReport,
}

/// Reference data for scoring a decomposition.
#[derive(Clone, Copy, Debug)]
pub struct GroundTruth<'a> {
    pub image: &'a Image,
    pub crack: &'a [bool],
    pub support: &'a [bool],
}

/// Decomposes `sin` once per `alpha` with `beta` fixed at [`SWEEP_BETA`].
/// Entries run on separate threads.
pub fn alpha_sweep(
    sin: &Sinogram,
    p: &DecompParams,
    alphas: &[f64],
    truth: GroundTruth<'_>,
    cfg: &SolveConfig,
) -> Result<Vec<AlphaRow>> {
    let params: Vec<DecompParams> =
        alphas.iter().map(|&alpha| DecompParams { alpha, beta: SWEEP_BETA, ..*p }).collect();
    for q in &params {
        q.validate()?;
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = params
            .iter()
            .map(|q| {
                scope.spawn(move || -> Result<AlphaRow> {
                    let d = decompose(sin, q, cfg)?;
                    Ok(AlphaRow {
                        alpha: q.alpha,
                        psnr: psnr(&d.sum(), truth.image)?,
                        crack_capture: crack_capture(&d.v, truth.crack, truth.support)?,
                        report: d.report,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    })
}

/// `DTV_{theta, a_u}(u) + alpha DTV_{theta + 90, a_v}(v)`.
pub fn decomposition_regularizer(u: &Image, v: &Image, p: &DecompParams) -> Result<f64> {
    Ok(dtv(u, &p.fibre_weight()?) + p.alpha * dtv(v, &p.crack_weight()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;

    #[test]
    fn alpha_bound() {
        assert!(validate_alpha(0.15, 0.5, 0.7));
        assert!(!validate_alpha(0.15, 0.5, 2.0));
        assert!(!validate_alpha(0.15, 0.5, 0.15));
        assert!(validate_alpha(0.15, 0.5, 1.999));
        assert!(validate_alpha(0.15, 0.5, 0.151));
    }

    #[test]
    fn params_are_checked() {
        let ok = DecompParams::new(0.0038, 0.7, 1e-4, 20.0);
        assert!(ok.validate().is_ok());
        let bad = [
            DecompParams { alpha: 2.0, ..ok },
            DecompParams { alpha: 0.1, ..ok },
            DecompParams { beta: 0.0, ..ok },
            DecompParams { lambda: -1.0, ..ok },
            DecompParams { a_u: 1.0, ..ok },
            DecompParams { a_v: 0.0, ..ok },
        ];
        for p in bad {
            assert!(matches!(p.validate(), Err(Error::Param(_))), "{p:?}");
        }
    }

    #[test]
    fn crack_term_is_orthogonal() {
        let g = Geometry::parallel(8, 8, 6).unwrap();
        let p = DecompParams::new(0.01, 0.7, 1e-4, 20.0);
        let problem = DecompositionProblem::new(&Sinogram::zeros(g), &p).unwrap();
        let w = problem.crack_weight();
        assert_eq!(w.theta_deg(), 110.0);
        assert_eq!(w.a(), 0.5);
    }

    #[test]
    fn zero_data_gives_zero_components() {
        let g = Geometry::parallel(8, 8, 6).unwrap();
        let d = decompose(&Sinogram::zeros(g), &DecompParams::new(0.01, 0.7, 1e-4, 20.0), &SolveConfig::default()).unwrap();
        assert!(d.u.data().iter().chain(d.v.data()).all(|&x| x == 0.0));
        assert_eq!(d.report.objective, 0.0);
    }
}

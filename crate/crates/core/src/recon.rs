//! Regularized least-squares reconstruction
//! `min_x 1/2 ||s (A x - b)||^2 + lambda R(x) + beta ||x||_1  (s.t. x >= 0)`
//! with `R` one of TV or DTV, solved by PDHG.
//!
//! `s = 1 / ||A||` normalizes the data term, so that a given `lambda` means
//! roughly the same amount of regularization at every image size and
//! number of angles.
//!
//! The saddle operator is `K = [s A; c W grad]`, where `W` is the per-pixel
//! DTV weight (identity for TV) and `c = 1 / sqrt(8)` brings the gradient
//! block to unit norm. The fidelity enters through the conjugate of
//! `z -> 1/2 ||z - s b||^2` and the regularizer through a ball projection
//! of radius `lambda / c`.

use crate::diffops::{divergence_into, gradient_into, project_ball, DtvParams};
use crate::error::{Error, Result};
use crate::geometry::{Image, Sinogram};
use crate::pdhg::{estimate_operator_norm, pdhg_solve, SaddleProblem, SolveConfig, SolveReport};
use crate::projector::RayTransform;

/// Gradient norm bound, `||grad||_2 <= sqrt(8)`.
pub(crate) const GRAD_NORM_BOUND: f64 = 2.828_427_124_746_190_3;
pub(crate) const NORM_ITERS: usize = 40;
/// Power iteration slightly underestimates; pad the bound.
pub(crate) const NORM_SAFETY: f64 = 1.01;
/// `tau / sigma` in units of `||A||^2`. Tuned on fibre phantoms of size 64
/// and 128; iteration counts vary by less than 2x over a decade around it,
/// while `tau = sigma` is more than 10x slower.
pub(crate) const STEP_RATIO_GAIN: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularizer {
    None,
    Tv,
    Dtv(DtvParams),
}

impl Regularizer {
    fn weight(&self) -> Option<DtvParams> {
        match self {
            Regularizer::None => None,
            Regularizer::Tv => Some(DtvParams::new(0.0, 1.0).expect("isotropic weight")),
            Regularizer::Dtv(p) => Some(*p),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructParams {
    pub reg: Regularizer,
    pub lambda: f64,
    /// Weight of the `||x||_1` term.
    pub l1: f64,
    pub nonneg: bool,
}

impl ReconstructParams {
    pub fn new(reg: Regularizer, lambda: f64) -> Self {
        Self { reg, lambda, l1: 0.0, nonneg: false }
    }

    fn validate(&self) -> Result<()> {
        if self.reg != Regularizer::None && !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Param(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.l1 >= 0.0 && self.l1.is_finite()) {
            return Err(Error::Param(format!("l1 weight must be nonnegative, got {}", self.l1)));
        }
        Ok(())
    }
}

/// `c W grad`, applied into two dual planes.
#[derive(Clone, Copy, Debug)]
pub(crate) struct WeightedGradient {
    pub m: usize,
    pub weight: DtvParams,
    pub scale: f64,
}

impl WeightedGradient {
    pub fn apply(&self, x: &[f64], out1: &mut [f64], out2: &mut [f64]) {
        gradient_into(x, self.m, out1, out2);
        for (a, b) in out1.iter_mut().zip(out2.iter_mut()) {
            let (w1, w2) = self.weight.weight(*a, *b);
            *a = self.scale * w1;
            *b = self.scale * w2;
        }
    }

    /// `out += (c W grad)^T (y1, y2)`.
    pub fn adjoint_add(&self, y1: &[f64], y2: &[f64], out: &mut [f64]) {
        let mut q1 = vec![0.0; y1.len()];
        let mut q2 = vec![0.0; y2.len()];
        for k in 0..y1.len() {
            let (a, b) = self.weight.weight_transpose(y1[k], y2[k]);
            q1[k] = a;
            q2[k] = b;
        }
        let mut div = vec![0.0; out.len()];
        divergence_into(&q1, &q2, self.m, &mut div);
        for (o, d) in out.iter_mut().zip(&div) {
            *o -= self.scale * d;
        }
    }

    /// `sum |W grad x|` recovered from the scaled dual-space image.
    pub fn functional(&self, kx1: &[f64], kx2: &[f64]) -> f64 {
        kx1.iter().zip(kx2).map(|(a, b)| a.hypot(*b)).sum::<f64>() / self.scale
    }
}

/// Prox of `tau * beta ||x||_1` with optional nonnegativity.
pub(crate) fn shrink(x: &mut [f64], threshold: f64, nonneg: bool) {
    for v in x.iter_mut() {
        *v = if nonneg {
            (*v - threshold).max(0.0)
        } else if *v > threshold {
            *v - threshold
        } else if *v < -threshold {
            *v + threshold
        } else {
            0.0
        };
    }
}

/// Conjugate prox of `z -> 1/2 ||z - b||^2`.
pub(crate) fn prox_fidelity_conj(y: &mut [f64], b: &[f64], sigma: f64) {
    let denom = 1.0 + sigma;
    for (yi, bi) in y.iter_mut().zip(b) {
        *yi = (*yi - sigma * bi) / denom;
    }
}

pub(crate) fn fidelity(kx: &[f64], b: &[f64]) -> f64 {
    0.5 * kx.iter().zip(b).map(|(k, b)| (k - b).powi(2)).sum::<f64>()
}

/// Saddle form of the single-image reconstruction problem.
pub struct ReconstructionProblem {
    op: RayTransform,
    /// `s b`.
    b: Vec<f64>,
    params: ReconstructParams,
    data_scale: f64,
    grad: Option<WeightedGradient>,
    lip: f64,
}

impl ReconstructionProblem {
    pub fn new(sin: &Sinogram, params: &ReconstructParams) -> Result<Self> {
        params.validate()?;
        let op = RayTransform::new(sin.geometry());
        let m = sin.geometry().image_size();
        let a_norm = op.norm_estimate(NORM_ITERS).max(f64::MIN_POSITIVE);
        let grad = params.reg.weight().map(|weight| WeightedGradient { m, weight, scale: 1.0 / GRAD_NORM_BOUND });
        let b = sin.data().iter().map(|v| v / a_norm).collect();
        let mut problem = Self { op, b, params: *params, data_scale: 1.0 / a_norm, grad, lip: 1.0 };
        problem.lip = NORM_SAFETY * estimate_operator_norm(&problem, NORM_ITERS);
        Ok(problem)
    }

    fn n_data(&self) -> usize {
        self.op.range_len()
    }

    fn n_pix(&self) -> usize {
        self.op.domain_len()
    }
}

impl SaddleProblem for ReconstructionProblem {
    fn primal_len(&self) -> usize {
        self.n_pix()
    }

    fn dual_len(&self) -> usize {
        self.n_data() + if self.grad.is_some() { 2 * self.n_pix() } else { 0 }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (data, rest) = out.split_at_mut(self.n_data());
        self.op.apply(x, data);
        data.iter_mut().for_each(|v| *v *= self.data_scale);
        if let Some(g) = &self.grad {
            let (g1, g2) = rest.split_at_mut(self.n_pix());
            g.apply(x, g1, g2);
        }
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        let (data, rest) = y.split_at(self.n_data());
        self.op.apply_adjoint(data, out);
        out.iter_mut().for_each(|v| *v *= self.data_scale);
        if let Some(g) = &self.grad {
            let (g1, g2) = rest.split_at(self.n_pix());
            g.adjoint_add(g1, g2, out);
        }
    }

    fn prox_primal(&self, tau: f64, x: &mut [f64]) {
        if self.params.l1 > 0.0 || self.params.nonneg {
            shrink(x, tau * self.params.l1, self.params.nonneg);
        }
    }

    fn prox_dual(&self, sigma: f64, y: &mut [f64]) {
        let n = self.n_data();
        let (data, rest) = y.split_at_mut(n);
        prox_fidelity_conj(data, &self.b, sigma);
        if let Some(g) = &self.grad {
            let (g1, g2) = rest.split_at_mut(self.n_pix());
            project_ball(g1, g2, self.params.lambda / g.scale);
        }
    }

    fn objective(&self, x: &[f64], kx: &[f64]) -> f64 {
        let (data, rest) = kx.split_at(self.n_data());
        let mut obj = fidelity(data, &self.b);
        if let Some(g) = &self.grad {
            let (g1, g2) = rest.split_at(self.n_pix());
            obj += self.params.lambda * g.functional(g1, g2);
        }
        if self.params.l1 > 0.0 {
            obj += self.params.l1 * x.iter().map(|v| v.abs()).sum::<f64>();
        }
        obj
    }

    fn operator_norm(&self) -> f64 {
        self.lip
    }

    fn step_ratio(&self) -> f64 {
        STEP_RATIO_GAIN / (self.data_scale * self.data_scale)
    }
}

/// Regularized reconstruction from a zero start.
pub fn reconstruct(sin: &Sinogram, params: &ReconstructParams, cfg: &SolveConfig) -> Result<(Image, SolveReport)> {
    reconstruct_from(sin, params, cfg, None)
}

/// Regularized reconstruction from an optional starting image.
pub fn reconstruct_from(
    sin: &Sinogram,
    params: &ReconstructParams,
    cfg: &SolveConfig,
    start: Option<&Image>,
) -> Result<(Image, SolveReport)> {
    let m = sin.geometry().image_size();
    let x0 = match start {
        Some(img) if img.size() != m => {
            return Err(Error::Dimension(format!("start image size {} does not match {m}", img.size())))
        }
        Some(img) => img.data().to_vec(),
        None => vec![0.0; m * m],
    };
    let problem = ReconstructionProblem::new(sin, params)?;
    let (x, report) = pdhg_solve(&problem, x0, cfg)?;
    Ok((Image::from_data(m, x)?, report))
}

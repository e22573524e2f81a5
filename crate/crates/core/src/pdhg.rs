//! First-order primal-dual hybrid gradient solver (Chambolle-Pock) for
//! problems of the form `min_x F(K x) + G(x)`.
//!
//! Iteration, with `sigma tau = (0.99 / L)^2` and `L >= ||K||`:
//!
//! ```text
//! y      <- prox_{sigma F*}(y + sigma K xbar)
//! x_new  <- prox_{tau G}(x - tau K^T y)
//! xbar   <- x_new + theta (x_new - x)
//! ```
//!
//! Only `K xbar` is ever needed, and by linearity it is formed from the two
//! most recent values of `K x`, so each iteration costs one application of
//! `K` and one of `K^T`. The objective is evaluated every `check_every`
//! iterations; the solver stops once its relative change between two
//! consecutive checks drops to `tol`.

use crate::error::{Error, Result};
use crate::projector::{power_iteration, random_start};

/// A convex saddle-point problem `min_x max_y <K x, y> + G(x) - F*(y)`.
///
/// Primal and dual variables are flat vectors whose block layout is owned
/// by the implementor.
pub trait SaddleProblem {
    fn primal_len(&self) -> usize;
    fn dual_len(&self) -> usize;
    /// `out = K x`.
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = K^T y`.
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]);
    /// In place `x <- prox_{tau G}(x)`.
    fn prox_primal(&self, tau: f64, x: &mut [f64]);
    /// In place `y <- prox_{sigma F*}(y)`.
    fn prox_dual(&self, sigma: f64, y: &mut [f64]);
    /// Primal objective `F(K x) + G(x)`, given `x` and `kx = K x`.
    fn objective(&self, x: &[f64], kx: &[f64]) -> f64;
    /// Upper estimate `L` of `||K||_2`.
    fn operator_norm(&self) -> f64;
    /// Preferred primal/dual step ratio `tau / sigma`.
    fn step_ratio(&self) -> f64 {
        1.0
    }
}

/// Power-iteration estimate of `||K||_2` for any saddle problem operator.
pub fn estimate_operator_norm<P: SaddleProblem + ?Sized>(problem: &P, iters: usize) -> f64 {
    let mut tmp = vec![0.0; problem.dual_len()];
    power_iteration(random_start(problem.primal_len(), 0x0b5e55ed), iters, |v, out| {
        problem.apply(v, &mut tmp);
        problem.apply_adjoint(&tmp, out);
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    /// Relative objective change at which the solver stops.
    pub tol: f64,
    pub max_iters: usize,
    /// Objective evaluation cadence, in iterations.
    pub check_every: usize,
    /// Over-relaxation `theta` in `[0, 1]`.
    pub theta_relax: f64,
    /// Step sizes are `step_factor / L`.
    pub step_factor: f64,
    /// Ratio `tau / sigma`, overriding the problem's own suggestion. The
    /// product `sigma tau L^2` stays `step_factor^2` either way.
    pub step_ratio: Option<f64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { tol: 1e-5, max_iters: 5000, check_every: 10, theta_relax: 1.0, step_factor: 0.99, step_ratio: None }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Param(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 || self.check_every == 0 {
            return Err(Error::Param("max_iters and check_every must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.theta_relax) {
            return Err(Error::Param("theta_relax must lie in [0, 1]".into()));
        }
        if !(self.step_factor > 0.0 && self.step_factor <= 1.0) {
            return Err(Error::Param("step_factor must lie in (0, 1]".into()));
        }
        if matches!(self.step_ratio, Some(r) if !(r > 0.0 && r.is_finite())) {
            return Err(Error::Param("step_ratio must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub objective: f64,
    pub rel_change: f64,
    pub converged: bool,
    /// Objective at iteration 0 and at every check.
    pub objective_trace: Vec<f64>,
}

/// Runs PDHG from primal point `x0` and zero dual.
pub fn pdhg_solve<P: SaddleProblem + ?Sized>(problem: &P, x0: Vec<f64>, cfg: &SolveConfig) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    if x0.len() != problem.primal_len() {
        return Err(Error::Dimension(format!(
            "initial point has {} entries, problem expects {}",
            x0.len(),
            problem.primal_len()
        )));
    }
    let lip = problem.operator_norm();
    if !(lip.is_finite() && lip > 0.0) {
        return Err(Error::Param(format!("operator norm bound must be positive, got {lip}")));
    }
    let ratio = cfg.step_ratio.unwrap_or_else(|| problem.step_ratio());
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::Param(format!("step ratio must be positive, got {ratio}")));
    }
    let sigma = cfg.step_factor / lip / ratio.sqrt();
    let tau = cfg.step_factor / lip * ratio.sqrt();
    let theta = cfg.theta_relax;

    let mut x = x0;
    let mut kx = vec![0.0; problem.dual_len()];
    problem.apply(&x, &mut kx);
    let mut kx_bar = kx.clone();
    let mut kx_new = vec![0.0; problem.dual_len()];
    let mut y = vec![0.0; problem.dual_len()];
    let mut kty = vec![0.0; problem.primal_len()];

    let mut prev = problem.objective(&x, &kx);
    if !prev.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let mut report = SolveReport { objective: prev, rel_change: f64::INFINITY, ..Default::default() };
    report.objective_trace.push(prev);

    for it in 1..=cfg.max_iters {
        for (yi, k) in y.iter_mut().zip(&kx_bar) {
            *yi += sigma * k;
        }
        problem.prox_dual(sigma, &mut y);
        problem.apply_adjoint(&y, &mut kty);
        for (xi, g) in x.iter_mut().zip(&kty) {
            *xi -= tau * g;
        }
        problem.prox_primal(tau, &mut x);
        problem.apply(&x, &mut kx_new);
        for ((bar, new), old) in kx_bar.iter_mut().zip(&kx_new).zip(&kx) {
            *bar = new + theta * (new - old);
        }
        std::mem::swap(&mut kx, &mut kx_new);
        report.iterations = it;

        if it % cfg.check_every == 0 || it == cfg.max_iters {
            let obj = problem.objective(&x, &kx);
            if !obj.is_finite() {
                return Err(Error::Divergence { iteration: it });
            }
            let rel = (obj - prev).abs() / obj.abs().max(f64::EPSILON);
            report.objective = obj;
            report.rel_change = rel;
            report.objective_trace.push(obj);
            prev = obj;
            if rel <= cfg.tol {
                report.converged = true;
                break;
            }
        }
    }
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `min_x 1/2 ||x - b||^2 (+ optional x >= 0)` with `K = I`, the
    /// fidelity handled through its conjugate.
    struct Denoise {
        b: Vec<f64>,
        nonneg: bool,
    }

    impl SaddleProblem for Denoise {
        fn primal_len(&self) -> usize {
            self.b.len()
        }
        fn dual_len(&self) -> usize {
            self.b.len()
        }
        fn apply(&self, x: &[f64], out: &mut [f64]) {
            out.copy_from_slice(x);
        }
        fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
            out.copy_from_slice(y);
        }
        fn prox_primal(&self, _tau: f64, x: &mut [f64]) {
            if self.nonneg {
                x.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        fn prox_dual(&self, sigma: f64, y: &mut [f64]) {
            for (yi, bi) in y.iter_mut().zip(&self.b) {
                *yi = (*yi - sigma * bi) / (1.0 + sigma);
            }
        }
        fn objective(&self, _x: &[f64], kx: &[f64]) -> f64 {
            0.5 * kx.iter().zip(&self.b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        }
        fn operator_norm(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn identity_least_squares_recovers_data() {
        let b = vec![1.0, -2.0, 0.5, 3.0];
        let p = Denoise { b: b.clone(), nonneg: false };
        let cfg = SolveConfig { tol: 1e-14, max_iters: 200, ..Default::default() };
        let (x, report) = pdhg_solve(&p, vec![0.0; 4], &cfg).unwrap();
        assert!(report.iterations <= 200);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-6);
        }
    }

    #[test]
    fn nonnegativity_is_exact() {
        let p = Denoise { b: vec![1.0, -2.0, -0.5, 3.0], nonneg: true };
        let (x, _) = pdhg_solve(&p, vec![0.3; 4], &SolveConfig::default()).unwrap();
        assert!(x.iter().all(|&v| v >= 0.0));
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn rejects_bad_config_and_shapes() {
        let p = Denoise { b: vec![1.0], nonneg: false };
        assert!(pdhg_solve(&p, vec![0.0; 2], &SolveConfig::default()).is_err());
        let cfg = SolveConfig { tol: 0.0, ..Default::default() };
        assert!(pdhg_solve(&p, vec![0.0], &cfg).is_err());
    }

    struct Exploding;

    impl SaddleProblem for Exploding {
        fn primal_len(&self) -> usize {
            1
        }
        fn dual_len(&self) -> usize {
            1
        }
        fn apply(&self, x: &[f64], out: &mut [f64]) {
            out[0] = x[0];
        }
        fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
            out[0] = y[0];
        }
        fn prox_primal(&self, _tau: f64, x: &mut [f64]) {
            x[0] = x[0] * 1e120 - 1.0;
        }
        fn prox_dual(&self, _sigma: f64, _y: &mut [f64]) {}
        fn objective(&self, x: &[f64], _kx: &[f64]) -> f64 {
            x[0] * x[0]
        }
        fn operator_norm(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn non_finite_objective_reports_divergence() {
        let cfg = SolveConfig { check_every: 1, ..Default::default() };
        match pdhg_solve(&Exploding, vec![1.0], &cfg) {
            Err(Error::Divergence { iteration }) => assert!(iteration >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}

//! Adam, Riemannian Adam for ball-valued parameters, and central-difference
//! gradient checking.
//!
//! Riemannian Adam rescales the Euclidean gradient by the inverse metric
//! `1/λ_x²`, runs the usual bias-corrected moment updates on the rescaled
//! gradient, and retracts with the exponential map at the current point.
//! Moment buffers are carried over between points as plain coordinates (no
//! parallel transport).

use crate::geometry::{raw, BallPoint};
use thiserror::Error;

pub const DEFAULT_LR: f64 = 0.001;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;

/// Default step for [`finite_difference_check`].
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("shape mismatch: parameter has {param} entries, gradient {grad}, state {state}")]
    ShapeMismatch {
        param: usize,
        grad: usize,
        state: usize,
    },
    #[error("non-finite gradient at index {0}; step rejected")]
    NonFiniteGradient(usize),
    #[error("loss is not finite at perturbed coordinate {0}")]
    NonFiniteLoss(usize),
}

/// Adam moment buffers and hyperparameters for one flat parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            step_count: 0,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            lr,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
        }
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// Advances the moments with `grad` and returns the bias-corrected
    /// direction `m̂ / (√v̂ + ε)`.
    fn direction(&mut self, grad: &[f64]) -> Vec<f64> {
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        self.first_moment
            .iter_mut()
            .zip(self.second_moment.iter_mut())
            .zip(grad)
            .map(|((m, v), &g)| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                (*m / bc1) / ((*v / bc2).sqrt() + eps)
            })
            .collect()
    }
}

/// Riemannian Adam keeps the same buffers; only the update rule differs.
pub type RiemannianAdamState = AdamState;

fn check_step(param: usize, grad: &[f64], state: &AdamState) -> Result<(), OptimError> {
    if param != grad.len() || param != state.len() {
        return Err(OptimError::ShapeMismatch {
            param,
            grad: grad.len(),
            state: state.len(),
        });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(OptimError::NonFiniteGradient(i));
    }
    Ok(())
}

/// One bias-corrected Adam step, in place. A rejected step leaves both the
/// parameter and the state untouched.
pub fn adam_step(param: &mut [f64], grad: &[f64], state: &mut AdamState) -> Result<(), OptimError> {
    check_step(param.len(), grad, state)?;
    let lr = state.lr;
    let dir = state.direction(grad);
    for (p, d) in param.iter_mut().zip(dir) {
        *p -= lr * d;
    }
    Ok(())
}

/// One Riemannian Adam step on raw ball coordinates of curvature `c`.
pub fn riemannian_adam_step_raw(
    param: &mut [f64],
    c: f64,
    euclidean_grad: &[f64],
    state: &mut RiemannianAdamState,
) -> Result<(), OptimError> {
    check_step(param.len(), euclidean_grad, state)?;
    let lambda = raw::conformal_factor(param, c);
    let inv_metric = 1.0 / (lambda * lambda);
    let rgrad: Vec<f64> = euclidean_grad.iter().map(|g| g * inv_metric).collect();
    let lr = state.lr;
    let step: Vec<f64> = state.direction(&rgrad).into_iter().map(|d| -lr * d).collect();
    let mut next = raw::exp_map(param, &step, c);
    raw::project_in_place(&mut next, c);
    if next.iter().all(|v| v.is_finite()) {
        param.copy_from_slice(&next);
    }
    Ok(())
}

/// One Riemannian Adam step on a [`BallPoint`].
pub fn riemannian_adam_step(
    param: &mut BallPoint,
    euclidean_grad: &[f64],
    state: &mut RiemannianAdamState,
) -> Result<(), OptimError> {
    let c = param.curvature();
    let mut coords = param.coords().to_vec();
    riemannian_adam_step_raw(&mut coords, c.get(), euclidean_grad, state)?;
    *param = BallPoint::from_projected(coords, c);
    Ok(())
}

/// Outcome of a central-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdCheck {
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub coordinates: usize,
}

/// Compares `analytic` against central differences of `loss` at `params`.
///
/// Per coordinate the error is `|fd − an| / max(1e−8, |fd| + |an|)`; the
/// maximum over coordinates is reported.
pub fn finite_difference_check<F>(
    mut loss: F,
    params: &[f64],
    analytic: &[f64],
    h: f64,
) -> Result<FdCheck, OptimError>
where
    F: FnMut(&[f64]) -> f64,
{
    if params.len() != analytic.len() {
        return Err(OptimError::ShapeMismatch {
            param: params.len(),
            grad: analytic.len(),
            state: analytic.len(),
        });
    }
    let mut probe = params.to_vec();
    let mut worst = FdCheck {
        max_rel_error: 0.0,
        worst_index: None,
        coordinates: params.len(),
    };
    for i in 0..params.len() {
        probe[i] = params[i] + h;
        let up = loss(&probe);
        probe[i] = params[i] - h;
        let down = loss(&probe);
        probe[i] = params[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(OptimError::NonFiniteLoss(i));
        }
        let fd = (up - down) / (2.0 * h);
        let an = analytic[i];
        let err = (fd - an).abs() / (fd.abs() + an.abs()).max(1e-8);
        if err > worst.max_rel_error || worst.worst_index.is_none() {
            worst.max_rel_error = err;
            worst.worst_index = Some(i);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{grad, Curvature, BALL_EPS};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adam_zero_gradient_keeps_param() {
        let mut p = vec![0.5, -1.0];
        let mut s = AdamState::new(2, 0.001);
        adam_step(&mut p, &[0.0, 0.0], &mut s).unwrap();
        assert_eq!(p, vec![0.5, -1.0]);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        // t = 1: m̂ = g, v̂ = g², so the step is lr·g/(|g| + ε)
        let g = [3.0, -0.02, 1e-3];
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(3, 0.001);
        adam_step(&mut p, &g, &mut s).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            let expected = -0.001 * gi / (gi.abs() + 1e-8);
            assert_abs_diff_eq!(*pi, expected, epsilon = 1e-15);
            assert_abs_diff_eq!(*pi, -0.001 * gi.signum(), epsilon = 1e-7);
        }
    }

    #[test]
    fn adam_constant_gradient_descends() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1, 0.01);
        for _ in 0..100 {
            adam_step(&mut p, &[2.0], &mut s).unwrap();
        }
        assert!(p[0] < -0.5);
        assert_eq!(s.step_count, 100);
    }

    #[test]
    fn adam_rejects_nan_and_shape() {
        let mut p = vec![1.0, 2.0];
        let mut s = AdamState::new(2, 0.1);
        assert_eq!(
            adam_step(&mut p, &[f64::NAN, 0.0], &mut s),
            Err(OptimError::NonFiniteGradient(0))
        );
        assert_eq!(s.step_count, 0);
        assert_eq!(p, vec![1.0, 2.0]);
        assert!(matches!(
            adam_step(&mut p, &[1.0], &mut s),
            Err(OptimError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn riemannian_zero_gradient_and_origin_scaling() {
        let c = Curvature::new(1.0).unwrap();
        let mut x = BallPoint::new(vec![0.3, -0.2], c).unwrap();
        let before = x.clone();
        let mut s = AdamState::new(2, 0.01);
        riemannian_adam_step(&mut x, &[0.0, 0.0], &mut s).unwrap();
        assert_eq!(x, before);

        // at the origin λ = 2, so the first-moment buffer holds (1 − β1)·g/4
        let mut o = BallPoint::origin(2, c);
        let mut s = AdamState::new(2, 0.01);
        riemannian_adam_step(&mut o, &[4.0, 0.0], &mut s).unwrap();
        assert_abs_diff_eq!(s.first_moment[0], 0.1, epsilon = 1e-15);
        // first step is unit-normalized; exp_0 of (−0.01, 0)
        assert_abs_diff_eq!(o.coords()[0], -(0.01f64).tanh(), epsilon = 1e-9);
    }

    #[test]
    fn riemannian_rejects_nan() {
        let c = Curvature::new(1.0).unwrap();
        let mut x = BallPoint::origin(2, c);
        let mut s = AdamState::new(2, 0.01);
        assert!(riemannian_adam_step(&mut x, &[f64::NAN, 1.0], &mut s).is_err());
    }

    #[test]
    fn riemannian_adam_fits_target_point() {
        let c = Curvature::new(1.0).unwrap();
        let target = vec![0.4, -0.3, 0.1];
        let mut x = BallPoint::new(vec![-0.2, 0.3, 0.0], c).unwrap();
        let mut s = AdamState::new(3, 0.01);
        for _ in 0..500 {
            let (_, gx, _) = grad::sq_distance_grad(x.coords(), &target, 1.0);
            riemannian_adam_step(&mut x, &gx, &mut s).unwrap();
        }
        assert!(raw::distance(x.coords(), &target, 1.0) < 1e-3);
    }

    #[test]
    fn riemannian_soak_stays_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &cv in &[0.1, 1.0, 5.0] {
            let c = Curvature::new(cv).unwrap();
            let mut x = BallPoint::origin(4, c);
            let mut s = AdamState::new(4, 0.5);
            for _ in 0..2000 {
                let g: Vec<f64> = (0..4).map(|_| rng.random_range(-1e6..1e6)).collect();
                riemannian_adam_step(&mut x, &g, &mut s).unwrap();
                assert!(cv * raw::norm_sq(x.coords()) < 1.0 - BALL_EPS);
            }
        }
    }

    #[test]
    fn fd_check_quadratic() {
        let p = vec![0.3, -1.2, 2.0];
        let an: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        let r = finite_difference_check(|q| q.iter().map(|v| v * v).sum(), &p, &an, 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-8, "{r:?}");
        let bad = vec![0.6, -2.4, 4.1];
        let r = finite_difference_check(|q| q.iter().map(|v| v * v).sum(), &p, &bad, 1e-5).unwrap();
        assert_eq!(r.worst_index, Some(2));
        assert!(r.max_rel_error > 1e-3);
    }

    #[test]
    fn fd_check_reports_nan() {
        let r = finite_difference_check(|q| q[0].ln(), &[0.0], &[1.0], 1e-5);
        assert_eq!(r, Err(OptimError::NonFiniteLoss(0)));
    }
}

//! The generalized Poincaré ball `{x : c‖x‖² < 1}`.
//!
//! Typed operations ([`mobius_add`], [`exp_map`], [`distance`], ...) validate
//! their inputs and always return points strictly inside the ball, i.e. with
//! `c‖x‖² < 1 − BALL_EPS`. The [`raw`] submodule holds the unchecked slice
//! kernels the probes and optimizers call in their inner loops.

use ndarray::ArrayView2;
use thiserror::Error;

/// Interior margin: every point produced here satisfies `c‖x‖² < 1 − BALL_EPS`.
pub const BALL_EPS: f64 = 1e-5;

/// Upper clamp applied to every `atanh` argument.
pub const ATANH_CLAMP: f64 = 1.0 - 1e-9;

/// `‖Mx‖` at or below this is treated as the zero branch of Möbius matvec.
pub const MATVEC_ZERO_TOL: f64 = 1e-12;

/// Tangent vectors shorter than this leave `exp_map` at its base point.
pub const EXP_ZERO_TOL: f64 = 1e-15;

/// Points closer than this map to the zero tangent vector under `log_map`.
pub const LOG_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("curvature must be finite and > 0, got {0}")]
    InvalidCurvature(f64),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("curvature mismatch: {left} vs {right}")]
    CurvatureMismatch { left: f64, right: f64 },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("point violates the ball interior: c‖x‖² = {0}")]
    OutsideBall(f64),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Magnitude `c` of the (negative) sectional curvature `−c`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Curvature(f64);

impl Curvature {
    pub fn new(c: f64) -> Result<Self> {
        if c.is_finite() && c > 0.0 {
            Ok(Self(c))
        } else {
            Err(GeometryError::InvalidCurvature(c))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn sqrt(self) -> f64 {
        self.0.sqrt()
    }
}

impl Default for Curvature {
    fn default() -> Self {
        Self(1.0)
    }
}

/// A point strictly inside the ball of curvature `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint {
    coords: Vec<f64>,
    c: Curvature,
}

impl BallPoint {
    /// Wraps `coords`, rejecting anything outside the `BALL_EPS` interior.
    pub fn new(coords: Vec<f64>, c: Curvature) -> Result<Self> {
        check_finite(&coords)?;
        let sq = c.get() * raw::norm_sq(&coords);
        if sq >= 1.0 - BALL_EPS {
            return Err(GeometryError::OutsideBall(sq));
        }
        Ok(Self { coords, c })
    }

    pub fn origin(dim: usize, c: Curvature) -> Self {
        Self {
            coords: vec![0.0; dim],
            c,
        }
    }

    /// Trusted constructor for kernel output that has already been projected.
    pub(crate) fn from_projected(coords: Vec<f64>, c: Curvature) -> Self {
        debug_assert!(c.get() * raw::norm_sq(&coords) < 1.0 - BALL_EPS);
        Self { coords, c }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn curvature(&self) -> Curvature {
        self.c
    }

    pub fn norm(&self) -> f64 {
        raw::norm(&self.coords)
    }

    /// Gyro-inverse `−x`.
    pub fn neg(&self) -> Self {
        Self {
            coords: self.coords.iter().map(|v| -v).collect(),
            c: self.c,
        }
    }
}

/// A vector in the tangent space at some base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(Vec<f64>);

impl TangentVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_finite(&coords)?;
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        raw::norm(&self.0)
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(GeometryError::NonFinite)
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { left: a, right: b })
    }
}

fn check_pair(x: &BallPoint, y: &BallPoint) -> Result<()> {
    check_dims(x.dim(), y.dim())?;
    if x.c != y.c {
        return Err(GeometryError::CurvatureMismatch {
            left: x.c.get(),
            right: y.c.get(),
        });
    }
    Ok(())
}

/// Möbius addition `x ⊕_c y`.
pub fn mobius_add(x: &BallPoint, y: &BallPoint) -> Result<BallPoint> {
    check_pair(x, y)?;
    let mut out = raw::mobius_add(&x.coords, &y.coords, x.c.get());
    raw::project_in_place(&mut out, x.c.get());
    Ok(BallPoint::from_projected(out, x.c))
}

/// Möbius matrix-vector product `M ⊗_c x` for a `k' × k` matrix `M`.
pub fn mobius_matvec(m: ArrayView2<'_, f64>, x: &BallPoint) -> Result<BallPoint> {
    check_dims(m.ncols(), x.dim())?;
    if !m.iter().all(|v| v.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let c = x.c.get();
    let mut out = raw::mobius_matvec(m, &x.coords, c);
    raw::project_in_place(&mut out, c);
    Ok(BallPoint::from_projected(out, x.c))
}

/// Exponential map `exp_x(v)`.
pub fn exp_map(x: &BallPoint, v: &TangentVector) -> Result<BallPoint> {
    check_dims(x.dim(), v.dim())?;
    check_finite(&v.0)?;
    let c = x.c.get();
    let mut out = raw::exp_map(&x.coords, &v.0, c);
    raw::project_in_place(&mut out, c);
    check_finite(&out)?;
    Ok(BallPoint::from_projected(out, x.c))
}

/// Logarithmic map `log_x(y)`, the inverse of [`exp_map`].
pub fn log_map(x: &BallPoint, y: &BallPoint) -> Result<TangentVector> {
    check_pair(x, y)?;
    Ok(TangentVector(raw::log_map(&x.coords, &y.coords, x.c.get())))
}

/// Geodesic distance `(2/√c)·atanh(√c‖−x ⊕_c y‖)`.
pub fn distance(x: &BallPoint, y: &BallPoint) -> Result<f64> {
    check_pair(x, y)?;
    Ok(raw::distance(&x.coords, &y.coords, x.c.get()))
}

/// Conformal factor `λ_x = 2 / (1 − c‖x‖²)`.
pub fn conformal_factor(x: &BallPoint) -> f64 {
    raw::conformal_factor(&x.coords, x.c.get())
}

/// Rescales `x` radially into the interior when `c‖x‖² ≥ 1 − BALL_EPS`.
pub fn project_to_ball(x: &[f64], c: Curvature) -> Result<BallPoint> {
    check_finite(x)?;
    let mut out = x.to_vec();
    raw::project_in_place(&mut out, c.get());
    Ok(BallPoint::from_projected(out, c))
}

/// Unchecked kernels over plain slices. Callers guarantee matching lengths
/// and `c > 0`.
pub mod raw {
    use super::{ATANH_CLAMP, BALL_EPS, EXP_ZERO_TOL, LOG_ZERO_TOL, MATVEC_ZERO_TOL};
    use ndarray::ArrayView2;

    #[inline]
    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[inline]
    pub fn norm_sq(a: &[f64]) -> f64 {
        dot(a, a)
    }

    #[inline]
    pub fn norm(a: &[f64]) -> f64 {
        norm_sq(a).sqrt()
    }

    #[inline]
    pub fn atanh_clamped(z: f64) -> f64 {
        z.clamp(0.0, ATANH_CLAMP).atanh()
    }

    #[inline]
    pub fn conformal_factor(x: &[f64], c: f64) -> f64 {
        2.0 / (1.0 - c * norm_sq(x))
    }

    /// Radial clamp into the `BALL_EPS` interior. Returns whether it fired.
    pub fn project_in_place(x: &mut [f64], c: f64) -> bool {
        let limit = 1.0 - BALL_EPS;
        let sq = c * norm_sq(x);
        if sq < limit {
            return false;
        }
        let scale = (limit / sq).sqrt();
        x.iter_mut().for_each(|v| *v *= scale);
        while c * norm_sq(x) >= limit {
            x.iter_mut().for_each(|v| *v *= 1.0 - f64::EPSILON);
        }
        true
    }

    pub fn mobius_add(x: &[f64], y: &[f64], c: f64) -> Vec<f64> {
        let xy = dot(x, y);
        let x2 = norm_sq(x);
        let y2 = norm_sq(y);
        let a = 1.0 + 2.0 * c * xy + c * y2;
        let b = 1.0 - c * x2;
        let den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
        x.iter()
            .zip(y)
            .map(|(xi, yi)| (a * xi + b * yi) / den)
            .collect()
    }

    /// `(−x) ⊕_c y`.
    pub fn mobius_sub(x: &[f64], y: &[f64], c: f64) -> Vec<f64> {
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        mobius_add(&neg, y, c)
    }

    pub fn mobius_matvec(m: ArrayView2<'_, f64>, x: &[f64], c: f64) -> Vec<f64> {
        let mx = matvec(m, x);
        let mx_norm = norm(&mx);
        let x_norm = norm(x);
        if mx_norm <= MATVEC_ZERO_TOL || x_norm == 0.0 {
            return vec![0.0; mx.len()];
        }
        let sc = c.sqrt();
        let z = mx_norm / x_norm * atanh_clamped(sc * x_norm);
        let scale = z.tanh() / (sc * mx_norm);
        mx.into_iter().map(|v| v * scale).collect()
    }

    pub fn matvec(m: ArrayView2<'_, f64>, x: &[f64]) -> Vec<f64> {
        m.rows()
            .into_iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `exp_0(u) = tanh(√c‖u‖)·u/(√c‖u‖)`, unprojected.
    pub fn exp0(u: &[f64], c: f64) -> Vec<f64> {
        let r = norm(u);
        if r < EXP_ZERO_TOL {
            return vec![0.0; u.len()];
        }
        let sr = c.sqrt() * r;
        let g = sr.tanh() / sr;
        u.iter().map(|v| v * g).collect()
    }

    /// `log_0(y) = atanh(√c‖y‖)·y/(√c‖y‖)`.
    pub fn log0(y: &[f64], c: f64) -> Vec<f64> {
        let r = norm(y);
        if r == 0.0 {
            return vec![0.0; y.len()];
        }
        let sc = c.sqrt();
        let g = atanh_clamped(sc * r) / (sc * r);
        y.iter().map(|v| v * g).collect()
    }

    pub fn exp_map(x: &[f64], v: &[f64], c: f64) -> Vec<f64> {
        let vn = norm(v);
        if vn < EXP_ZERO_TOL {
            return x.to_vec();
        }
        let sc = c.sqrt();
        let lambda = conformal_factor(x, c);
        let scale = (sc * lambda * vn / 2.0).tanh() / (sc * vn);
        let mut step: Vec<f64> = v.iter().map(|t| t * scale).collect();
        // tanh saturates to 1 for large arguments; keep the summand in the ball
        project_in_place(&mut step, c);
        mobius_add(x, &step, c)
    }

    pub fn log_map(x: &[f64], y: &[f64], c: f64) -> Vec<f64> {
        let w = mobius_sub(x, y, c);
        let wn = norm(&w);
        let sc = c.sqrt();
        let d = 2.0 / sc * atanh_clamped(sc * wn);
        if d < LOG_ZERO_TOL {
            return vec![0.0; x.len()];
        }
        let lambda = conformal_factor(x, c);
        let scale = 2.0 / (sc * lambda) * atanh_clamped(sc * wn) / wn;
        w.into_iter().map(|v| v * scale).collect()
    }

    pub fn distance(x: &[f64], y: &[f64], c: f64) -> f64 {
        let w = mobius_sub(x, y, c);
        let sc = c.sqrt();
        2.0 / sc * atanh_clamped(sc * norm(&w))
    }

    /// Distance to the origin, `(2/√c)·atanh(√c‖x‖)`.
    pub fn distance_to_origin(x: &[f64], c: f64) -> f64 {
        let sc = c.sqrt();
        2.0 / sc * atanh_clamped(sc * norm(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c1() -> Curvature {
        Curvature::new(1.0).unwrap()
    }

    fn pt(v: &[f64], c: Curvature) -> BallPoint {
        BallPoint::new(v.to_vec(), c).unwrap()
    }

    fn random_point(rng: &mut ChaCha8Rng, dim: usize, c: Curvature, max_norm: f64) -> BallPoint {
        let dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = raw::norm(&dir).max(1e-12);
        let r = rng.random_range(0.0..max_norm) / c.sqrt();
        pt(&dir.iter().map(|v| v / n * r).collect::<Vec<_>>(), c)
    }

    #[test]
    fn curvature_rejects_nonpositive() {
        assert!(Curvature::new(0.0).is_err());
        assert!(Curvature::new(-1.0).is_err());
        assert!(Curvature::new(f64::NAN).is_err());
    }

    #[test]
    fn ball_point_rejects_boundary() {
        assert!(BallPoint::new(vec![1.0, 0.0], c1()).is_err());
        assert!(BallPoint::new(vec![f64::INFINITY], c1()).is_err());
    }

    #[test]
    fn mobius_add_identities() {
        let y = pt(&[0.2, -0.4], c1());
        let zero = BallPoint::origin(2, c1());
        assert_eq!(mobius_add(&zero, &y).unwrap(), y);
        let s = mobius_add(&y.neg(), &y).unwrap();
        assert_abs_diff_eq!(s.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn mobius_add_collinear_matches_scalar_oracle() {
        let x = pt(&[0.3, 0.0], c1());
        let y = pt(&[0.4, 0.0], c1());
        let s = mobius_add(&x, &y).unwrap();
        // tanh(atanh 0.3 + atanh 0.4)
        assert_abs_diff_eq!(s.coords()[0], 0.625, epsilon = 1e-15);
        assert_abs_diff_eq!(s.coords()[1], 0.0);
    }

    #[test]
    fn mobius_add_rejects_mismatch() {
        let x = pt(&[0.1, 0.0], c1());
        let y = pt(&[0.1], c1());
        assert!(matches!(
            mobius_add(&x, &y),
            Err(GeometryError::DimensionMismatch { .. })
        ));
        let z = pt(&[0.1, 0.0], Curvature::new(0.5).unwrap());
        assert!(matches!(
            mobius_add(&x, &z),
            Err(GeometryError::CurvatureMismatch { .. })
        ));
    }

    #[test]
    fn matvec_branches() {
        let x = pt(&[0.3, 0.0], c1());
        let id = Array2::<f64>::eye(2);
        let same = mobius_matvec(id.view(), &x).unwrap();
        assert_abs_diff_eq!(same.coords()[0], 0.3, epsilon = 1e-15);
        assert_eq!(same.coords()[1], 0.0);
        let zero = Array2::<f64>::zeros((3, 2));
        let z = mobius_matvec(zero.view(), &x).unwrap();
        assert_eq!(z.coords(), &[0.0, 0.0, 0.0]);
        let two = array![[2.0, 0.0], [0.0, 2.0]];
        let d = mobius_matvec(two.view(), &x).unwrap();
        // tanh(2·atanh 0.3) = 0.6 / 1.09
        assert_abs_diff_eq!(d.coords()[0], 0.5504587155963304, epsilon = 1e-14);
        assert!(mobius_matvec(Array2::<f64>::eye(3).view(), &x).is_err());
    }

    #[test]
    fn exp_log_special_cases() {
        let zero = BallPoint::origin(2, c1());
        let e = exp_map(&zero, &TangentVector::new(vec![1.0, 0.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(e.coords()[0], 0.7615941559557649, epsilon = 1e-15);
        let back = log_map(&zero, &e).unwrap();
        assert_abs_diff_eq!(back.coords()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(back.coords()[1], 0.0);

        let x = pt(&[0.1, 0.5], c1());
        assert_eq!(exp_map(&x, &TangentVector::zeros(2)).unwrap(), x);
        assert_eq!(log_map(&x, &x).unwrap(), TangentVector::zeros(2));

        let y = pt(&[0.0, 0.6], c1());
        assert_abs_diff_eq!(log_map(&zero, &y).unwrap().norm(), 0.6f64.atanh(), epsilon = 1e-14);
    }

    #[test]
    fn exp_rejects_non_finite() {
        assert!(TangentVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn distance_special_cases() {
        let zero = BallPoint::origin(2, c1());
        let x = pt(&[0.3, 0.4], c1());
        assert_abs_diff_eq!(distance(&x, &x).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(distance(&zero, &x).unwrap(), 1.0986122886681096, epsilon = 1e-14);
    }

    #[test]
    fn conformal_factor_values() {
        assert_eq!(conformal_factor(&BallPoint::origin(3, c1())), 2.0);
        let h = 0.5f64.sqrt();
        assert_abs_diff_eq!(conformal_factor(&pt(&[h, 0.0], c1())), 4.0, epsilon = 1e-12);
        let mut prev = 0.0;
        for r in [0.0, 0.5, 0.9, 0.99, 0.999] {
            let l = conformal_factor(&pt(&[r], c1()));
            assert!(l >= 2.0 && l > prev);
            prev = l;
        }
    }

    #[test]
    fn projection_rules() {
        let inside = project_to_ball(&[0.2, 0.1], c1()).unwrap();
        assert_eq!(inside.coords(), &[0.2, 0.1]);
        let p = project_to_ball(&[2.0, 0.0], c1()).unwrap();
        assert_abs_diff_eq!(raw::norm_sq(p.coords()), 1.0 - BALL_EPS, epsilon = 1e-12);
        assert!(raw::norm_sq(p.coords()) < 1.0 - BALL_EPS);
        assert!(p.coords()[0] > 0.0);
        let b = project_to_ball(&[0.0, 1.0], c1()).unwrap();
        assert!(raw::norm_sq(b.coords()) < 1.0 - BALL_EPS);
        assert!(project_to_ball(&[f64::NAN], c1()).is_err());
        let c = Curvature::new(4.0).unwrap();
        let q = project_to_ball(&[1.0, 1.0], c).unwrap();
        assert!(4.0 * raw::norm_sq(q.coords()) < 1.0 - BALL_EPS);
    }

    #[test]
    fn random_identities_and_metric_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &cv in &[0.1, 0.5, 1.0] {
            let c = Curvature::new(cv).unwrap();
            for _ in 0..300 {
                let x = random_point(&mut rng, 4, c, 0.95);
                let y = random_point(&mut rng, 4, c, 0.95);
                let z = random_point(&mut rng, 4, c, 0.95);
                let dxy = distance(&x, &y).unwrap();
                let dyx = distance(&y, &x).unwrap();
                assert!((dxy - dyx).abs() <= 1e-12 * dxy.max(1.0));
                let dxz = distance(&x, &z).unwrap();
                let dyz = distance(&y, &z).unwrap();
                assert!(dxz <= dxy + dyz + 1e-9);
            }
        }
    }
}

/// Hand-derived vector-Jacobian products for the operations the probes chain
/// together. Each function takes the adjoint of an operation's output and
/// returns (or accumulates) the adjoints of its inputs. Every branch mirrors
/// the corresponding forward kernel in [`raw`], clamps included.
pub mod grad {
    use super::raw::{self, dot, norm, norm_sq};
    use super::{ATANH_CLAMP, BALL_EPS, EXP_ZERO_TOL, MATVEC_ZERO_TOL};
    use ndarray::{ArrayView2, ArrayViewMut2};

    /// Adjoint of `u ↦ exp_0(u)` (unprojected).
    pub fn exp0_vjp(u: &[f64], c: f64, g_out: &[f64]) -> Vec<f64> {
        let r = norm(u);
        let sr = c.sqrt() * r;
        let (g, coef) = if r < EXP_ZERO_TOL {
            (1.0, 0.0)
        } else if sr < 1e-4 {
            (1.0 - sr * sr / 3.0, -2.0 * c / 3.0)
        } else {
            let t = sr.tanh();
            let g = t / sr;
            (g, ((1.0 - t * t) - g) / (r * r))
        };
        let ug = dot(u, g_out);
        g_out
            .iter()
            .zip(u)
            .map(|(gi, ui)| g * gi + coef * ug * ui)
            .collect()
    }

    /// Adjoint of [`raw::project_in_place`] evaluated at the pre-projection
    /// vector `x`.
    pub fn project_vjp(x: &[f64], c: f64, g_out: &[f64]) -> Vec<f64> {
        let limit = 1.0 - BALL_EPS;
        let sq = c * norm_sq(x);
        if sq < limit {
            return g_out.to_vec();
        }
        let n = norm(x);
        let scale = (limit / c).sqrt() / n;
        let xg = dot(x, g_out) / (n * n);
        g_out
            .iter()
            .zip(x)
            .map(|(gi, xi)| scale * (gi - xi * xg))
            .collect()
    }

    /// Adjoint of `(M, x) ↦ M ⊗_c x` (unprojected). Accumulates into `g_m`
    /// and returns the adjoint of `x`.
    pub fn matvec_vjp(
        m: ArrayView2<'_, f64>,
        x: &[f64],
        c: f64,
        g_out: &[f64],
        mut g_m: ArrayViewMut2<'_, f64>,
    ) -> Vec<f64> {
        let mx = raw::matvec(m, x);
        let b = norm(&mx);
        let a = norm(x);
        if b <= MATVEC_ZERO_TOL || a == 0.0 {
            return vec![0.0; x.len()];
        }
        let s = c.sqrt();
        let sa = s * a;
        // atanh(s·a)/a and d/da[atanh(s·a)] − atanh(s·a)/a
        let (atanh_over_a, slope_gap) = if sa < 1e-4 {
            (s * (1.0 + c * a * a / 3.0), 2.0 / 3.0 * s * c * a * a)
        } else {
            let at = raw::atanh_clamped(sa);
            let d_at = if sa < ATANH_CLAMP { s / (1.0 - sa * sa) } else { 0.0 };
            (at / a, d_at - at / a)
        };
        let z = b * atanh_over_a;
        let t = z.tanh();
        let phi = t / s;
        let mg = dot(&mx, g_out) / b;
        let kappa = (1.0 - t * t) / s * mg;
        let g_mx: Vec<f64> = g_out
            .iter()
            .zip(&mx)
            .map(|(gi, mi)| phi / b * (gi - mi / b * mg) + kappa * atanh_over_a * mi / b)
            .collect();
        let g_a = kappa * b / a * slope_gap;

        let mut g_x: Vec<f64> = x.iter().map(|xi| g_a * xi / a).collect();
        for (i, m_row) in m.rows().into_iter().enumerate() {
            let gi = g_mx[i];
            for (j, &m_ij) in m_row.iter().enumerate() {
                g_m[[i, j]] += gi * x[j];
                g_x[j] += m_ij * gi;
            }
        }
        g_x
    }

    /// `δ = γ − 1` of the arcosh form of the distance, together with pieces
    /// shared by both gradient routines.
    struct GammaParts {
        delta: f64,
        coef: f64,
        d2: f64,
        alpha: f64,
        beta: f64,
    }

    fn gamma_parts(x: &[f64], y: &[f64], c: f64) -> GammaParts {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        let alpha = 1.0 - c * norm_sq(x);
        let beta = 1.0 - c * norm_sq(y);
        GammaParts {
            delta: 2.0 * c * d2 / (alpha * beta),
            coef: 4.0 * c / (alpha * beta),
            d2,
            alpha,
            beta,
        }
    }

    fn clamped(x: &[f64], y: &[f64], c: f64) -> bool {
        c.sqrt() * norm(&raw::mobius_sub(x, y, c)) >= ATANH_CLAMP
    }

    /// Gradients of `∂γ/∂x` and `∂γ/∂y`, scaled by `k`.
    fn gamma_grads(x: &[f64], y: &[f64], c: f64, p: &GammaParts, k: f64) -> (Vec<f64>, Vec<f64>) {
        let kx = c * p.d2 / p.alpha;
        let ky = c * p.d2 / p.beta;
        let gx = x
            .iter()
            .zip(y)
            .map(|(a, b)| k * p.coef * ((a - b) + kx * a))
            .collect();
        let gy = x
            .iter()
            .zip(y)
            .map(|(a, b)| k * p.coef * ((b - a) + ky * b))
            .collect();
        (gx, gy)
    }

    /// Squared geodesic distance and its gradients in both arguments.
    pub fn sq_distance_grad(x: &[f64], y: &[f64], c: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let d = raw::distance(x, y, c);
        if clamped(x, y, c) {
            return (d * d, vec![0.0; x.len()], vec![0.0; y.len()]);
        }
        let p = gamma_parts(x, y, c);
        // arcosh(1+δ) / sqrt(δ(2+δ))
        let f = if p.delta < 1e-8 {
            1.0 - p.delta / 3.0
        } else {
            let root = (p.delta * (2.0 + p.delta)).sqrt();
            (p.delta + root).ln_1p() / root
        };
        let (gx, gy) = gamma_grads(x, y, c, &p, 2.0 / c * f);
        (d * d, gx, gy)
    }

    /// Geodesic distance and its gradients; zero subgradient at `x = y`.
    pub fn distance_grad(x: &[f64], y: &[f64], c: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let d = raw::distance(x, y, c);
        let p = gamma_parts(x, y, c);
        if p.delta <= 0.0 || clamped(x, y, c) {
            return (d, vec![0.0; x.len()], vec![0.0; y.len()]);
        }
        let root = (p.delta * (2.0 + p.delta)).sqrt();
        let (gx, gy) = gamma_grads(x, y, c, &p, 1.0 / (c.sqrt() * root));
        (d, gx, gy)
    }
}

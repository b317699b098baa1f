//! The explicit two-regime Bellman function.
//!
//! For `p >= 2`, `q = p/(p-1)` and `delta = q(q-1)/8`,
//!
//! ```text
//! beta(u, v) = u^p + v^q + delta * u^2 v^(2-q)                       if u^p <= v^q
//!            = u^p + v^q + delta * ((2/p) u^p + (2/q - 1) v^q)        if u^p >= v^q
//! ```
//!
//! and `Q(zeta, eta) = beta(|zeta|, |eta|) / 2` on `R x R^n`. `Q` is C^1
//! everywhere and C^2 away from `{v = 0} U {u^p = v^q}`.

mod certify;
mod tau;

pub use certify::{
    certify_derivative_bounds, certify_hessian_bound, certify_size_bound, hessian_sample_points,
    DerivativeBoundSettings, HessianBoundSettings, HessianCertification, SizeBoundSettings,
};
pub use tau::{
    certify_tau, min_eigenvalue, tau_at, TauCertificate, TauSample, TauSearch, TauTable,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Exponents of the Bellman function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BellmanParams<T> {
    p: T,
    q: T,
    delta: T,
}

impl<T: Real> BellmanParams<T> {
    /// Requires a finite `p >= 2`.
    pub fn new(p: T) -> Result<Self> {
        if !(p >= lit(2.0)) || !p.is_finite() {
            return Err(Error::Domain(format!(
                "Bellman exponent must satisfy 2 <= p < inf, got {p}"
            )));
        }
        let q = p / (p - T::one());
        let delta = q * (q - T::one()) / lit(8.0);
        Ok(Self { p, q, delta })
    }

    /// Parameters for an arbitrary exponent in `(1, inf)`: exponents below 2
    /// are replaced by their conjugate, which is what drives the Bellman side
    /// once the roles of the scalar and form arguments are interchanged.
    pub fn for_exponent(p: T) -> Result<Self> {
        if !(p > T::one()) || !p.is_finite() {
            return Err(Error::Domain(format!(
                "exponent must lie in (1, inf), got {p}"
            )));
        }
        if p >= lit(2.0) {
            Self::new(p)
        } else {
            Self::new(p / (p - T::one()))
        }
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn q(&self) -> T {
        self.q
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    /// `max(p, q)`, which is `p` here.
    pub fn pstar(&self) -> T {
        self.p.max(self.q)
    }
}

/// Argument `(zeta, eta)` of `Q`, `eta` in `R^n` with `n >= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BellmanPoint<T: Real> {
    pub zeta: T,
    pub eta: DVector<T>,
}

impl<T: Real> BellmanPoint<T> {
    pub fn new(zeta: T, eta: DVector<T>) -> Self {
        assert!(!eta.is_empty(), "eta must have length >= 1");
        Self { zeta, eta }
    }

    pub fn from_slice(zeta: T, eta: &[T]) -> Self {
        Self::new(zeta, DVector::from_column_slice(eta))
    }

    /// `(|zeta|, |eta|)`.
    pub fn radii(&self) -> (T, T) {
        (self.zeta.abs(), self.eta.norm())
    }

    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    /// The point as a vector in `R^(n+1)`, `zeta` first.
    pub fn to_vector(&self) -> DVector<T> {
        let mut x = DVector::zeros(self.dim() + 1);
        x[0] = self.zeta;
        x.rows_mut(1, self.dim()).copy_from(&self.eta);
        x
    }

    pub fn from_vector(x: &DVector<T>) -> Self {
        Self::new(x[0], x.rows(1, x.len() - 1).into_owned())
    }
}

/// Which piece of `beta` a point `(u, v)` belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionTag {
    /// `u^p < v^q`.
    Lower,
    /// `u^p > v^q`.
    Upper,
    /// `u^p = v^q` up to the boundary tolerance.
    Boundary,
    /// `v = 0` up to the axis tolerance.
    Axis,
}

impl RegionTag {
    pub fn is_singular(self) -> bool {
        matches!(self, RegionTag::Boundary | RegionTag::Axis)
    }
}

/// Relative tolerances defining the fattened singular set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularTolerances {
    /// `|u^p - v^q| <= boundary_tol * (u^p + v^q)` is BOUNDARY.
    pub boundary_tol: f64,
    /// `v <= axis_tol * (1 + u^(p-1))` is AXIS.
    pub axis_tol: f64,
}

impl Default for SingularTolerances {
    fn default() -> Self {
        Self {
            boundary_tol: 1e-8,
            axis_tol: 1e-8,
        }
    }
}

pub fn classify<T: Real>(
    u: T,
    v: T,
    params: &BellmanParams<T>,
    tol: &SingularTolerances,
) -> RegionTag {
    let (p, q) = (params.p, params.q);
    if v <= lit::<T>(tol.axis_tol) * (T::one() + u.powf(p - T::one())) {
        return RegionTag::Axis;
    }
    let up = u.powf(p);
    let vq = v.powf(q);
    if (up - vq).abs() <= lit::<T>(tol.boundary_tol) * (up + vq) {
        RegionTag::Boundary
    } else if up < vq {
        RegionTag::Lower
    } else {
        RegionTag::Upper
    }
}

fn check_nonneg<T: Real>(u: T, v: T) -> Result<()> {
    if u >= T::zero() && v >= T::zero() && u.is_finite() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "beta needs finite u, v >= 0, got ({u}, {v})"
        )))
    }
}

/// `v^(2-q)` with the continuous extension at `v = 0` (0 for `q < 2`, 1 for `q = 2`).
fn v_two_minus_q<T: Real>(v: T, q: T) -> T {
    let e = lit::<T>(2.0) - q;
    if v == T::zero() {
        if e == T::zero() {
            T::one()
        } else {
            T::zero()
        }
    } else {
        v.powf(e)
    }
}

/// Branch selection: the lower formula is used on `u^p <= v^q`, ties included.
fn is_lower<T: Real>(u: T, v: T, params: &BellmanParams<T>) -> bool {
    u.powf(params.p) <= v.powf(params.q)
}

pub fn eval_beta<T: Real>(u: T, v: T, params: &BellmanParams<T>) -> Result<T> {
    check_nonneg(u, v)?;
    let (p, q, delta) = (params.p, params.q, params.delta);
    let up = u.powf(p);
    let vq = v.powf(q);
    let extra = if up <= vq {
        u * u * v_two_minus_q(v, q)
    } else {
        lit::<T>(2.0) / p * up + (lit::<T>(2.0) / q - T::one()) * vq
    };
    Ok(up + vq + delta * extra)
}

#[allow(non_snake_case)]
pub fn eval_Q<T: Real>(pt: &BellmanPoint<T>, params: &BellmanParams<T>) -> T {
    let (u, v) = pt.radii();
    eval_beta(u, v, params).expect("radii are non-negative") * lit(0.5)
}

/// Partial derivatives of `beta` with the region the point was assigned to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaGradient<T> {
    pub du: T,
    pub dv: T,
    pub tag: RegionTag,
}

/// Analytic `(d_u beta, d_v beta)`. Defined on the closed quadrant (one-sided
/// limits on the axes); the tag reports BOUNDARY/AXIS points, where the value
/// is still well defined because `beta` is C^1.
pub fn grad_beta<T: Real>(u: T, v: T, params: &BellmanParams<T>) -> Result<BetaGradient<T>> {
    grad_beta_with(u, v, params, &SingularTolerances::default())
}

pub fn grad_beta_with<T: Real>(
    u: T,
    v: T,
    params: &BellmanParams<T>,
    tol: &SingularTolerances,
) -> Result<BetaGradient<T>> {
    check_nonneg(u, v)?;
    let (du, dv) = grad_beta_raw(u, v, params);
    Ok(BetaGradient {
        du,
        dv,
        tag: classify(u, v, params, tol),
    })
}

pub(crate) fn grad_beta_raw<T: Real>(u: T, v: T, params: &BellmanParams<T>) -> (T, T) {
    let (p, q, delta) = (params.p, params.q, params.delta);
    let two = lit::<T>(2.0);
    if is_lower(u, v, params) {
        let du = p * u.powf(p - T::one()) + two * delta * u * v_two_minus_q(v, q);
        let dv = if v == T::zero() {
            T::zero()
        } else if u == T::zero() {
            q * v.powf(q - T::one())
        } else {
            q * v.powf(q - T::one()) + delta * (two - q) * u * u * v.powf(T::one() - q)
        };
        (du, dv)
    } else {
        let du = (p + two * delta) * u.powf(p - T::one());
        let dv = if v == T::zero() {
            T::zero()
        } else {
            (q + delta * (two - q)) * v.powf(q - T::one())
        };
        (du, dv)
    }
}

/// Second partials of `beta` off the singular set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaHessian<T> {
    pub uu: T,
    pub uv: T,
    pub vv: T,
}

fn hessian_beta_branch<T: Real>(
    u: T,
    v: T,
    params: &BellmanParams<T>,
    lower: bool,
) -> BetaHessian<T> {
    let (p, q, delta) = (params.p, params.q, params.delta);
    let one = T::one();
    let two = lit::<T>(2.0);
    let u_pm2 = if u == T::zero() && p == two {
        one
    } else {
        u.powf(p - two)
    };
    if lower {
        BetaHessian {
            uu: p * (p - one) * u_pm2 + two * delta * v_two_minus_q(v, q),
            uv: two * delta * (two - q) * u * v.powf(one - q),
            vv: q * (q - one) * v.powf(q - two)
                + delta * (two - q) * (one - q) * u * u * v.powf(-q),
        }
    } else {
        BetaHessian {
            uu: (p + two * delta) * (p - one) * u_pm2,
            uv: T::zero(),
            vv: (q + delta * (two - q)) * (q - one) * v.powf(q - two),
        }
    }
}

/// Gradient of `Q` in the coordinates `(zeta, eta_1, ..., eta_n)`.
pub fn grad_q<T: Real>(pt: &BellmanPoint<T>, params: &BellmanParams<T>) -> DVector<T> {
    let (u, v) = pt.radii();
    let (du, dv) = grad_beta_raw(u, v, params);
    let half = lit::<T>(0.5);
    let mut g = DVector::zeros(pt.dim() + 1);
    g[0] = half * du * sign(pt.zeta);
    if v > T::zero() {
        let scale = half * dv / v;
        for i in 0..pt.dim() {
            g[i + 1] = scale * pt.eta[i];
        }
    }
    g
}

fn sign<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Analytic Hessian of `Q` at a point off the fattened singular set.
#[allow(non_snake_case)]
pub fn hessian_Q<T: Real>(pt: &BellmanPoint<T>, params: &BellmanParams<T>) -> Result<DMatrix<T>> {
    hessian_Q_with(pt, params, &SingularTolerances::default())
}

#[allow(non_snake_case)]
pub fn hessian_Q_with<T: Real>(
    pt: &BellmanPoint<T>,
    params: &BellmanParams<T>,
    tol: &SingularTolerances,
) -> Result<DMatrix<T>> {
    let (u, v) = pt.radii();
    let tag = classify(u, v, params, tol);
    if tag.is_singular() {
        return Err(Error::SingularSet {
            u: to_f64(u),
            v: to_f64(v),
            tag,
        });
    }
    Ok(assemble_hessian(pt, params, tag == RegionTag::Lower))
}

/// Hessian assembled from one branch regardless of the tag; used where a
/// one-sided value is wanted on the boundary curve.
pub(crate) fn assemble_hessian<T: Real>(
    pt: &BellmanPoint<T>,
    params: &BellmanParams<T>,
    lower: bool,
) -> DMatrix<T> {
    let (u, v) = pt.radii();
    let n = pt.dim();
    let b = hessian_beta_branch(u, v, params, lower);
    let (_, dv) = grad_beta_raw(u, v, params);
    let half = lit::<T>(0.5);
    let e = &pt.eta / v;
    let s = sign(pt.zeta);
    let mut h = DMatrix::zeros(n + 1, n + 1);
    h[(0, 0)] = half * b.uu;
    for i in 0..n {
        let c = half * b.uv * s * e[i];
        h[(0, i + 1)] = c;
        h[(i + 1, 0)] = c;
        for j in 0..n {
            let radial = e[i] * e[j];
            let kron = if i == j { T::one() } else { T::zero() };
            h[(i + 1, j + 1)] = half * (b.vv * radial + dv / v * (kron - radial));
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(p: f64) -> BellmanParams<f64> {
        BellmanParams::new(p).unwrap()
    }

    #[test]
    fn parameter_invariants() {
        for p in [2.0, 3.0, 5.0, 10.0, 117.5] {
            let b = params(p);
            assert!((b.q() - p / (p - 1.0)).abs() < 1e-15);
            assert!(b.q() > 1.0 && b.q() <= 2.0);
            assert!(b.delta() > 0.0 && b.delta() <= 0.25);
            assert_eq!(b.pstar(), p);
        }
        assert_eq!(params(2.0).delta(), 0.25);
        assert!(BellmanParams::new(1.5).is_err());
        assert!(BellmanParams::new(f64::NAN).is_err());
        assert!(BellmanParams::new(f64::INFINITY).is_err());
    }

    #[test]
    fn conjugate_exponent_rule() {
        let b = BellmanParams::for_exponent(1.5f64).unwrap();
        assert!((b.p() - 3.0).abs() < 1e-14);
        assert!(BellmanParams::for_exponent(1.0).is_err());
    }

    #[test]
    fn beta_examples() {
        assert_eq!(eval_beta(0.0, 0.0, &params(2.0)).unwrap(), 0.0);
        assert!((eval_beta(1.0, 1.0, &params(2.0)).unwrap() - 2.25).abs() < 1e-15);
        assert!((eval_beta(0.0, 1.0, &params(4.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((params(4.0).delta() - 1.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn beta_rejects_negative_and_nan() {
        assert!(eval_beta(-1.0, 1.0, &params(2.0)).is_err());
        assert!(eval_beta(1.0, -0.1, &params(3.0)).is_err());
        assert!(eval_beta(f64::NAN, 1.0, &params(3.0)).is_err());
    }

    #[test]
    fn beta_has_no_nan_corners() {
        for p in [2.0, 2.5, 3.0, 10.0] {
            for &(u, v) in &[(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)] {
                assert!(eval_beta(u, v, &params(p)).unwrap().is_finite());
                let g = grad_beta(u, v, &params(p)).unwrap();
                assert!(g.du.is_finite() && g.dv.is_finite());
            }
        }
    }

    #[test]
    fn q_examples() {
        let b = params(2.0);
        assert_eq!(eval_Q(&BellmanPoint::from_slice(0.0, &[0.0]), &b), 0.0);
        assert!((eval_Q(&BellmanPoint::from_slice(1.0, &[1.0, 0.0]), &b) - 1.125).abs() < 1e-15);
        assert!((eval_Q(&BellmanPoint::from_slice(-1.0, &[0.0, 1.0]), &b) - 1.125).abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let b = params(2.0);
        let g = grad_beta(1.0, 1.0, &b).unwrap();
        assert!((g.du - 2.5).abs() < 1e-15 && (g.dv - 2.0).abs() < 1e-15);
        assert_eq!(g.tag, RegionTag::Boundary);
        let g = grad_beta(0.0, 1.0, &b).unwrap();
        assert_eq!(g.du, 0.0);
        // upper branch at p = 2 is (1 + delta) u^2 + v^2
        let g = grad_beta(2.0, 1.0, &b).unwrap();
        assert!((g.du - 5.0).abs() < 1e-14);
        assert!((g.dv - 2.0).abs() < 1e-14);
        assert_eq!(g.tag, RegionTag::Upper);
    }

    #[test]
    fn hessian_examples() {
        let b = params(2.0);
        let h = hessian_Q(&BellmanPoint::from_slice(0.5, &[1.0]), &b).unwrap();
        assert!((h - DMatrix::from_row_slice(2, 2, &[1.25, 0.0, 0.0, 1.0])).norm() < 1e-14);
        let h = hessian_Q(&BellmanPoint::from_slice(2.0, &[1.0]), &b).unwrap();
        assert!((h - DMatrix::from_row_slice(2, 2, &[1.25, 0.0, 0.0, 1.0])).norm() < 1e-14);
    }

    #[test]
    fn hessian_rejects_singular_set() {
        let b = params(3.0);
        // u^3 = v^1.5 at u = 1, v = 1
        let err = hessian_Q(&BellmanPoint::from_slice(1.0, &[1.0]), &b).unwrap_err();
        assert!(matches!(
            err,
            Error::SingularSet {
                tag: RegionTag::Boundary,
                ..
            }
        ));
        let err = hessian_Q(&BellmanPoint::from_slice(1.0, &[0.0, 0.0]), &b).unwrap_err();
        assert!(matches!(
            err,
            Error::SingularSet {
                tag: RegionTag::Axis,
                ..
            }
        ));
    }

    #[test]
    fn classification() {
        let b = params(3.0);
        let t = SingularTolerances::default();
        assert_eq!(classify(0.5, 1.0, &b, &t), RegionTag::Lower);
        assert_eq!(classify(2.0, 1.0, &b, &t), RegionTag::Upper);
        assert_eq!(classify(1.0, 1.0, &b, &t), RegionTag::Boundary);
        assert_eq!(classify(1.0, 0.0, &b, &t), RegionTag::Axis);
        assert_eq!(classify(0.0, 0.0, &b, &t), RegionTag::Axis);
    }

    #[test]
    fn f32_instantiation() {
        let b = BellmanParams::<f32>::new(2.0).unwrap();
        assert!((eval_beta(1.0f32, 1.0, &b).unwrap() - 2.25).abs() < 1e-6);
        let h = hessian_Q(&BellmanPoint::from_slice(0.5f32, &[1.0]), &b).unwrap();
        assert!((h[(0, 0)] - 1.25).abs() < 1e-6);
    }

    /// Central differences of the analytic gradient of beta at step `h`.
    fn fd_error(u: f64, v: f64, b: &BellmanParams<f64>, h: f64) -> f64 {
        let f = |x: f64, y: f64| eval_beta(x, y, b).unwrap();
        let du = (f(u + h, v) - f(u - h, v)) / (2.0 * h);
        let dv = (f(u, v + h) - f(u, v - h)) / (2.0 * h);
        let g = grad_beta(u, v, b).unwrap();
        (du - g.du).abs().max((dv - g.dv).abs())
    }

    #[test]
    fn gradient_fd_refinement_order() {
        for p in [2.5, 3.0, 5.0] {
            let b = params(p);
            for &(u, v) in &[(0.6, 1.3), (1.4, 0.7)] {
                let e1 = fd_error(u, v, &b, 1e-2);
                let e2 = fd_error(u, v, &b, 5e-3);
                let order = (e1 / e2).log2();
                assert!(order >= 1.9, "p={p} ({u},{v}) order {order}");
            }
        }
    }

    #[test]
    fn hessian_fd_refinement_order() {
        for p in [3.0, 4.5] {
            let b = params(p);
            for eta in [vec![0.9, -0.4], vec![0.1, 0.2]] {
                let pt = BellmanPoint::from_slice(0.8, &eta);
                let h_exact = hessian_Q(&pt, &b).unwrap();
                let err = |h: f64| {
                    let x = pt.to_vector();
                    let n = x.len();
                    let mut m = DMatrix::<f64>::zeros(n, n);
                    for i in 0..n {
                        for j in 0..n {
                            let e = |si: f64, sj: f64| {
                                let mut y = x.clone();
                                y[i] += si * h;
                                y[j] += sj * h;
                                eval_Q(&BellmanPoint::from_vector(&y), &b)
                            };
                            m[(i, j)] = (e(1.0, 1.0) - e(1.0, -1.0) - e(-1.0, 1.0) + e(-1.0, -1.0))
                                / (4.0 * h * h);
                        }
                    }
                    (m - &h_exact).amax()
                };
                let order = (err(2e-3) / err(1e-3)).log2();
                assert!(order >= 1.9, "p={p} eta={eta:?} order {order}");
            }
        }
    }

    #[test]
    fn hessian_is_symmetric_with_radial_off_block() {
        let b = params(3.0);
        let pt = BellmanPoint::from_slice(-0.3, &[0.5, -0.2, 0.7]);
        let h = hessian_Q(&pt, &b).unwrap();
        assert!((&h - h.transpose()).amax() == 0.0);
        let ratio: Vec<f64> = (0..3).map(|i| h[(0, i + 1)] / pt.eta[i]).collect();
        assert!((ratio[0] - ratio[1]).abs() < 1e-14 && (ratio[1] - ratio[2]).abs() < 1e-14);
    }

    #[test]
    fn upper_convexity_in_u() {
        let b = params(5.0);
        for u in [0.5, 1.0, 2.0] {
            let hb = hessian_beta_branch(u, 0.1, &b, false);
            let expected = (1.0 + 2.0 * b.delta() / 5.0) * 5.0 * 4.0 * u.powi(3);
            assert!((hb.uu - expected).abs() < 1e-12 * expected);
            assert!(hb.uu > 0.0);
        }
    }

    proptest! {
        #[test]
        fn c1_matching_on_boundary_curve(p in 2.0f64..12.0, u in 0.05f64..3.0) {
            let b = params(p);
            let v = u.powf(p - 1.0);
            let lower = u.powf(p) + v.powf(b.q()) + b.delta() * u * u * v.powf(2.0 - b.q());
            let upper = (1.0 + 2.0 * b.delta() / p) * u.powf(p) + (1.0 + b.delta() * (2.0 / b.q() - 1.0)) * v.powf(b.q());
            prop_assert!((lower - upper).abs() <= 1e-12 * lower.max(1.0));
            // gradients: lower formulas against upper formulas
            let q = b.q();
            let d = b.delta();
            let du_l = p * u.powf(p - 1.0) + 2.0 * d * u * v.powf(2.0 - q);
            let du_u = (p + 2.0 * d) * u.powf(p - 1.0);
            let dv_l = q * v.powf(q - 1.0) + d * (2.0 - q) * u * u * v.powf(1.0 - q);
            let dv_u = (q + d * (2.0 - q)) * v.powf(q - 1.0);
            prop_assert!((du_l - du_u).abs() <= 1e-10 * du_u.max(1.0));
            prop_assert!((dv_l - dv_u).abs() <= 1e-10 * dv_u.max(1.0));
        }

        #[test]
        fn q_is_biradial(p in 2.0f64..8.0, zeta in -3.0f64..3.0, e0 in -2.0f64..2.0, e1 in -2.0f64..2.0, e2 in -2.0f64..2.0, angle in 0.0f64..6.3) {
            let b = params(p);
            let base = eval_Q(&BellmanPoint::from_slice(zeta, &[e0, e1, e2]), &b);
            let flipped = eval_Q(&BellmanPoint::from_slice(-zeta, &[e0, e1, e2]), &b);
            let (c, s) = (angle.cos(), angle.sin());
            let rotated = eval_Q(&BellmanPoint::from_slice(zeta, &[c * e0 - s * e1, s * e0 + c * e1, e2]), &b);
            prop_assert_eq!(base, flipped);
            prop_assert!((base - rotated).abs() <= 1e-12 * base.max(1.0));
        }

        #[test]
        fn gradient_components_nonnegative(p in 2.0f64..12.0, u in 0.0f64..4.0, v in 0.0f64..4.0) {
            let g = grad_beta(u, v, &params(p)).unwrap();
            prop_assert!(g.du >= 0.0 && g.dv >= 0.0);
        }
    }
}

//! Mollification of the Bellman function.
//!
//! `psi(x) = c * exp(-1/(1-|x|^2))` on the unit ball of `R^(n+1)`,
//! `psi_kappa(x) = kappa^-(n+1) psi(x/kappa)` and `Q_kappa = psi_kappa * Q`.
//! Convolutions use a tensor Gauss-Legendre rule on the cube `[-kappa, kappa]^(n+1)`
//! with the integrand extended by zero outside the ball; the weights
//! `w_k psi_kappa(y_k)` are renormalised to sum to one, so constants are
//! reproduced exactly.

mod certify;

pub use certify::{
    certify_regular_properties, holder_product_check, HolderSettings, RegularSettings,
};

use nalgebra::{DMatrix, DVector};

use crate::bellman::{eval_beta, grad_beta_raw, BellmanParams, BellmanPoint};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::scalar::{lit, Real};

/// Largest supported convolution dimension `n + 1`.
pub const MAX_CONV_DIM: usize = 4;

/// Integrand of the unnormalised mollifier, `exp(-1/(1-r^2))` inside the unit ball.
pub fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// Tensor-product nodes of a 1-D rule in `dim` dimensions, as (point, weight) pairs.
fn tensor_points(nodes: &[f64], weights: &[f64], dim: usize) -> Vec<(Vec<f64>, f64)> {
    let m = nodes.len();
    let total = m.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            let mut x = Vec::with_capacity(dim);
            let mut w = 1.0;
            for _ in 0..dim {
                let k = idx % m;
                idx /= m;
                x.push(nodes[k]);
                w *= weights[k];
            }
            (x, w)
        })
        .collect()
}

fn ball_integral(dim: usize, m: usize) -> f64 {
    let rule = gauss_legendre::<f64>(m);
    tensor_points(&rule.nodes, &rule.weights, dim)
        .iter()
        .map(|(x, w)| w * bump(x.iter().map(|a| a * a).sum()))
        .sum()
}

/// `c_dim = 1 / int_{B^dim} exp(-1/(1-|x|^2)) dx` by tensor Gauss-Legendre with
/// `m` and `2m` nodes per axis; fails if the two differ by more than
/// `quad_tol` relatively. Returns the finer value.
pub fn mollifier_constant(dim: usize, m: usize, quad_tol: f64) -> Result<f64> {
    if dim == 0 || dim > MAX_CONV_DIM {
        return Err(Error::Domain(format!(
            "convolution dimension must be in 1..={MAX_CONV_DIM}, got {dim}"
        )));
    }
    let coarse = ball_integral(dim, m);
    let fine = ball_integral(dim, 2 * m);
    let diff = (fine - coarse).abs() / fine;
    if diff > quad_tol {
        return Err(Error::Quadrature {
            what: format!("mollifier mass in dimension {dim}"),
            diff,
            tol: quad_tol,
        });
    }
    Ok(1.0 / fine)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MollifierSpec {
    /// Dimension of `eta`; the convolution runs in `R^(n+1)`.
    pub n: usize,
    pub kappa: f64,
    pub c_norm: f64,
    /// Gauss-Legendre nodes per axis of the convolution rule.
    pub nodes: usize,
}

impl MollifierSpec {
    /// Computes `c_norm` at `nodes` against `2 * nodes` per axis.
    pub fn new(n: usize, kappa: f64, nodes: usize, quad_tol: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::Domain(format!(
                "kappa must lie in (0, 1), got {kappa}"
            )));
        }
        if n == 0 {
            return Err(Error::Domain("eta dimension must be at least 1".into()));
        }
        let c_norm = mollifier_constant(n + 1, nodes, quad_tol)?;
        Ok(Self {
            n,
            kappa,
            c_norm,
            nodes,
        })
    }

    /// The smallest rule from [`MollifierSpec::LADDER`] whose mass agrees
    /// with the doubled rule to `quad_tol`.
    pub fn adaptive(n: usize, kappa: f64, quad_tol: f64) -> Result<Self> {
        let mut last = None;
        for &m in Self::LADDER {
            match Self::new(n, kappa, m, quad_tol) {
                Ok(spec) => return Ok(spec),
                Err(e @ Error::Quadrature { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("ladder is non-empty"))
    }

    /// Node counts tried by [`MollifierSpec::adaptive`].
    pub const LADDER: &'static [usize] = &[24, 32, 48, 64, 96, 128];

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    /// `psi_kappa(y)` with the computed normalisation.
    pub fn density(&self, y: &[f64]) -> f64 {
        let r2: f64 = y.iter().map(|a| a * a).sum::<f64>() / (self.kappa * self.kappa);
        self.c_norm * bump(r2) / self.kappa.powi(self.dim() as i32)
    }
}

/// Discrete probability measure approximating `psi_kappa(y) dy`.
#[derive(Clone, Debug)]
pub struct ConvolutionRule<T: Real> {
    pub offsets: Vec<DVector<T>>,
    pub weights: Vec<T>,
    /// `sum_k w_k psi_kappa(y_k)` before renormalisation; 1 up to quadrature error.
    pub raw_mass: f64,
}

impl<T: Real> ConvolutionRule<T> {
    pub fn new(spec: &MollifierSpec) -> Self {
        let dim = spec.dim();
        let rule = gauss_legendre::<f64>(spec.nodes).mapped(-spec.kappa, spec.kappa);
        let mut offsets = Vec::new();
        let mut raw = Vec::new();
        for (x, w) in tensor_points(&rule.nodes, &rule.weights, dim) {
            let d = spec.density(&x);
            if d > 0.0 {
                offsets.push(DVector::from_iterator(dim, x.iter().map(|&a| lit::<T>(a))));
                raw.push(w * d);
            }
        }
        let raw_mass: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| lit::<T>(w / raw_mass)).collect();
        Self {
            offsets,
            weights,
            raw_mass,
        }
    }

    /// `sum_k w_k g(y_k)`.
    pub fn average(&self, mut g: impl FnMut(&DVector<T>) -> T) -> T {
        self.offsets
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (y, &w)| acc + w * g(y))
    }
}

/// `(|zeta - y_0|, |eta - y'|)` for `x = (zeta, eta)`.
fn shifted_radii<T: Real>(x: &DVector<T>, y: &DVector<T>) -> (T, T) {
    let mut v2 = T::zero();
    for i in 1..x.len() {
        let d = x[i] - y[i];
        v2 += d * d;
    }
    ((x[0] - y[0]).abs(), v2.sqrt())
}

/// Evaluator of `Q_kappa`, `beta_kappa` and their derivatives.
#[derive(Clone, Debug)]
pub struct MollifiedBellman<T: Real> {
    pub spec: MollifierSpec,
    pub params: BellmanParams<T>,
    pub rule: ConvolutionRule<T>,
}

impl<T: Real> MollifiedBellman<T> {
    pub fn new(spec: MollifierSpec, params: BellmanParams<T>) -> Self {
        let rule = ConvolutionRule::new(&spec);
        Self { spec, params, rule }
    }

    pub fn kappa(&self) -> T {
        lit(self.spec.kappa)
    }

    fn check_dim(&self, pt: &BellmanPoint<T>) {
        assert_eq!(
            pt.dim(),
            self.spec.n,
            "point dimension does not match the mollifier"
        );
    }

    #[allow(non_snake_case)]
    pub fn eval_Q_kappa(&self, pt: &BellmanPoint<T>) -> T {
        self.check_dim(pt);
        let x = pt.to_vector();
        let half = lit::<T>(0.5);
        self.rule.average(|y| {
            let (u, v) = shifted_radii(&x, y);
            eval_beta(u, v, &self.params).expect("radii are non-negative") * half
        })
    }

    /// The point `(u, v e_1)` at which `beta_kappa(u, v) = 2 Q_kappa`.
    pub fn radial_point(&self, u: T, v: T) -> BellmanPoint<T> {
        let mut eta = DVector::zeros(self.spec.n);
        eta[0] = v;
        BellmanPoint::new(u, eta)
    }

    pub fn beta_kappa(&self, u: T, v: T) -> T {
        self.eval_Q_kappa(&self.radial_point(u, v)) * lit(2.0)
    }

    /// `grad Q_kappa = psi_kappa * grad Q`.
    #[allow(non_snake_case)]
    pub fn grad_Q_kappa(&self, pt: &BellmanPoint<T>) -> DVector<T> {
        self.check_dim(pt);
        let x = pt.to_vector();
        let half = lit::<T>(0.5);
        let mut g = DVector::zeros(x.len());
        for (y, &w) in self.rule.offsets.iter().zip(&self.rule.weights) {
            let (u, v) = shifted_radii(&x, y);
            let (du, dv) = grad_beta_raw(u, v, &self.params);
            let z = x[0] - y[0];
            if z != T::zero() {
                g[0] += w * half * du * z.signum();
            }
            if v > T::zero() {
                let s = w * half * dv / v;
                for i in 1..x.len() {
                    g[i] += s * (x[i] - y[i]);
                }
            }
        }
        g
    }

    /// `(d_u beta_kappa, d_v beta_kappa)` at `(u, v)`.
    pub fn grad_beta_kappa(&self, u: T, v: T) -> (T, T) {
        let g = self.grad_Q_kappa(&self.radial_point(u, v));
        (g[0] * lit(2.0), g[1] * lit(2.0))
    }

    /// Central second differences of `Q_kappa` with step `kappa / 16`.
    #[allow(non_snake_case)]
    pub fn hessian_Q_kappa(&self, pt: &BellmanPoint<T>) -> DMatrix<T> {
        self.hessian_Q_kappa_step(pt, self.kappa() / lit(16.0))
    }

    #[allow(non_snake_case)]
    pub fn hessian_Q_kappa_step(&self, pt: &BellmanPoint<T>, h: T) -> DMatrix<T> {
        let x = pt.to_vector();
        let dim = x.len();
        let f = |dx: &[(usize, T)]| {
            let mut y = x.clone();
            for &(i, s) in dx {
                y[i] += s;
            }
            self.eval_Q_kappa(&BellmanPoint::from_vector(&y))
        };
        let center = f(&[]);
        let h2 = h * h;
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = (f(&[(i, h)]) - center * lit(2.0) + f(&[(i, -h)])) / h2;
            for j in 0..i {
                let v = (f(&[(i, h), (j, h)]) - f(&[(i, h), (j, -h)]) - f(&[(i, -h), (j, h)])
                    + f(&[(i, -h), (j, -h)]))
                    / (h2 * lit(4.0));
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }
}

//! Test data and the space-time gradient `|grad-bar u| = sqrt(|grad u|^2 + |d_t u|^2)`.
//!
//! On the circle scalars live on nodes and forms on edges. Everything is
//! compared at edges (cell centres, weight `nu`): the spatial gradient of a
//! scalar is already an edge quantity, its time derivative is averaged from
//! the two adjacent nodes, and the covariant derivative of a form is the
//! centred difference of its edge values. On OU all quantities are
//! synthesised at the Gauss-Hermite nodes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::{Cochain, Field, FormField, ModelOperator, Spectral};

/// Semigroup trajectory `t -> e^(-t sqrt(a^2 + L)) x` in the eigenbasis.
pub struct Evolution<'a> {
    spec: &'a Spectral,
    coeffs: DVector<f64>,
    rates: DVector<f64>,
}

impl<'a> Evolution<'a> {
    pub fn new<C: Cochain>(model: &'a ModelOperator, a: f64, x: &C) -> Self {
        let spec = model.spectral::<C>();
        let coeffs = spec.coefficients(x.values());
        let rates = spec
            .values
            .map(|l| (a * a + model.nonneg_eigenvalue(l)).sqrt());
        Self {
            spec,
            coeffs,
            rates,
        }
    }

    fn synth(&self, c: DMatrix<f64>) -> DMatrix<f64> {
        let mut m = &self.spec.vectors * c;
        for (i, mut row) in m.row_iter_mut().enumerate() {
            row /= self.spec.sqrt_w[i];
        }
        m
    }

    /// Columns `P_t x` for each `t`.
    pub fn values(&self, times: &[f64]) -> DMatrix<f64> {
        let n = self.coeffs.len();
        self.synth(DMatrix::from_fn(n, times.len(), |k, j| {
            self.coeffs[k] * (-times[j] * self.rates[k]).exp()
        }))
    }

    /// Columns `d/dt P_t x`.
    pub fn derivative(&self, times: &[f64]) -> DMatrix<f64> {
        let n = self.coeffs.len();
        self.synth(DMatrix::from_fn(n, times.len(), |k, j| {
            -self.rates[k] * self.coeffs[k] * (-times[j] * self.rates[k]).exp()
        }))
    }

    /// Columns `d^2/dt^2 P_t x = (a^2 + L) P_t x`.
    pub fn second_derivative(&self, times: &[f64]) -> DMatrix<f64> {
        let n = self.coeffs.len();
        self.synth(DMatrix::from_fn(n, times.len(), |k, j| {
            self.rates[k] * self.rates[k] * self.coeffs[k] * (-times[j] * self.rates[k]).exp()
        }))
    }
}

/// Linear maps from cochains to values at the comparison points. `|grad-bar|^2`
/// is the sum of squares of all spatial maps applied to `u` and all time maps
/// applied to `d_t u`.
pub struct Collocator {
    pub weights: DVector<f64>,
    scalar_space: Vec<DMatrix<f64>>,
    scalar_time: Vec<DMatrix<f64>>,
    form_space: Vec<DMatrix<f64>>,
    form_time: Vec<DMatrix<f64>>,
}

impl Collocator {
    pub fn new(model: &ModelOperator) -> Self {
        match &model.collocation {
            None => {
                let n = model.n_scalar();
                let h = model.h.expect("circle models have a grid spacing");
                let avg =
                    DMatrix::from_fn(
                        n,
                        n,
                        |e, i| if i == e || i == (e + 1) % n { 0.5 } else { 0.0 },
                    );
                let centred = DMatrix::from_fn(n, n, |e, j| {
                    if j == (e + 1) % n {
                        0.5 / h
                    } else if j == (e + n - 1) % n {
                        -0.5 / h
                    } else {
                        0.0
                    }
                });
                Self {
                    weights: model.form_measure.clone(),
                    scalar_space: vec![model.d.clone()],
                    scalar_time: vec![avg],
                    form_space: vec![centred],
                    form_time: vec![DMatrix::identity(n, n)],
                }
            }
            Some(c) => {
                let n = model.n_scalar();
                let d = model.form_components;
                let grads: Vec<DMatrix<f64>> =
                    (0..d).map(|i| &c.synth * model.d.rows(i * n, n)).collect();
                let embed = |m: &DMatrix<f64>, j: usize| {
                    let mut out = DMatrix::zeros(m.nrows(), d * n);
                    out.columns_mut(j * n, n).copy_from(m);
                    out
                };
                let mut form_space = Vec::new();
                let mut form_time = Vec::new();
                for j in 0..d {
                    for g in &grads {
                        form_space.push(embed(g, j));
                    }
                    form_time.push(embed(&c.synth, j));
                }
                Self {
                    weights: c.weights.clone(),
                    scalar_space: grads,
                    scalar_time: vec![c.synth.clone()],
                    form_space,
                    form_time,
                }
            }
        }
    }

    fn magnitude(
        space: &[DMatrix<f64>],
        time: &[DMatrix<f64>],
        x: &DMatrix<f64>,
        xt: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let mut acc: Option<DMatrix<f64>> = None;
        for (m, arg) in space
            .iter()
            .map(|m| (m, x))
            .chain(time.iter().map(|m| (m, xt)))
        {
            let y = m * arg;
            let sq = y.component_mul(&y);
            acc = Some(match acc {
                None => sq,
                Some(a) => a + sq,
            });
        }
        acc.expect("at least one map").map(f64::sqrt)
    }

    /// `|grad-bar u|` at the comparison points, one column per time.
    pub fn scalar(&self, u: &DMatrix<f64>, ut: &DMatrix<f64>) -> DMatrix<f64> {
        Self::magnitude(&self.scalar_space, &self.scalar_time, u, ut)
    }

    /// `|grad-bar w|` for a 1-form, one column per time.
    pub fn form(&self, w: &DMatrix<f64>, wt: &DMatrix<f64>) -> DMatrix<f64> {
        Self::magnitude(&self.form_space, &self.form_time, w, wt)
    }
}

/// Node samples of `g` on the circle.
pub fn field_from_fn(model: &ModelOperator, g: impl Fn(f64) -> f64) -> Result<Field> {
    if !model.is_circle() {
        return Err(Error::Model(
            "sampling by angle needs a circle model".into(),
        ));
    }
    Ok(Field::new(DVector::from_iterator(
        model.n_scalar(),
        model.theta.iter().map(|&t| g(t)),
    )))
}

/// The 1-form `g(theta) d theta` sampled at edge midpoints.
pub fn form_from_fn(model: &ModelOperator, g: impl Fn(f64) -> f64) -> Result<FormField> {
    if !model.is_circle() {
        return Err(Error::Model(
            "sampling by angle needs a circle model".into(),
        ));
    }
    let h = model.h.unwrap_or(0.0);
    Ok(FormField::new(DVector::from_iterator(
        model.n_form(),
        model.theta.iter().map(|&t| g(t + h / 2.0)),
    )))
}

/// Random trigonometric polynomial (circle) or Hermite expansion (OU) of
/// degree at most `bandwidth`, coefficient scale `1 / (1 + degree)`.
fn random_modes<R: Rng>(
    model: &ModelOperator,
    bandwidth: usize,
    shift: f64,
    rng: &mut R,
) -> DVector<f64> {
    if model.is_circle() {
        let coeffs: Vec<(f64, f64)> = (0..=bandwidth)
            .map(|k| {
                let s = 1.0 / (1.0 + k as f64);
                (
                    s * rng.sample::<f64, _>(StandardNormal),
                    s * rng.sample::<f64, _>(StandardNormal),
                )
            })
            .collect();
        let h = model.h.unwrap_or(0.0);
        DVector::from_iterator(
            model.n_scalar(),
            model.theta.iter().map(|&t| {
                let x = t + shift * h;
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, (a, b))| a * (k as f64 * x).cos() + b * (k as f64 * x).sin())
                    .sum()
            }),
        )
    } else {
        DVector::from_iterator(
            model.n_scalar(),
            model.modes.iter().map(|m| {
                let deg: usize = m.iter().sum();
                if deg <= bandwidth {
                    rng.sample::<f64, _>(StandardNormal) / (1.0 + deg as f64)
                } else {
                    0.0
                }
            }),
        )
    }
}

pub fn random_field<R: Rng>(model: &ModelOperator, bandwidth: usize, rng: &mut R) -> Field {
    Field::new(random_modes(model, bandwidth, 0.0, rng))
}

pub fn random_form<R: Rng>(model: &ModelOperator, bandwidth: usize, rng: &mut R) -> FormField {
    if model.is_circle() {
        FormField::new(random_modes(model, bandwidth, 0.5, rng))
    } else {
        let parts: Vec<f64> = (0..model.form_components)
            .flat_map(|_| {
                random_modes(model, bandwidth, 0.0, rng)
                    .data
                    .as_vec()
                    .clone()
            })
            .collect();
        FormField::new(DVector::from_vec(parts))
    }
}

//! Weighted model manifolds with exact spectral calculus.
//!
//! Two families are provided: the circle `R/2piZ` with a weight `e^(-phi)`,
//! discretised as a weighted graph, and the Ornstein-Uhlenbeck operator on
//! `R^d` (`d = 1, 2`) truncated to normalised Hermite modes. Both store a
//! gradient `D`, its weighted adjoint `Dstar`, and scalar and 1-form
//! Laplacians that intertwine exactly: `L_form D = D L_scalar`.

mod circle;
mod config;
mod ou;
mod subordination;

pub use circle::{build_circle_model, PhiSpec};
pub use config::{ModelConfig, ModelDump};
pub use ou::{build_ou_model, hermite_normalized};
pub use subordination::{SubordinationRule, SubordinationScheme};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    WeightedCircle,
    OuLine,
    OuTensor(usize),
}

/// Eigendecomposition of an operator that is self-adjoint for a diagonal
/// inner product `W`: `A = W^(-1/2) U diag(values) U^T W^(1/2)`.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
    pub sqrt_w: DVector<f64>,
}

impl Spectral {
    /// Decomposes the symmetric matrix `sym = W^(1/2) A W^(-1/2)`.
    pub fn from_symmetric(sym: DMatrix<f64>, sqrt_w: DVector<f64>) -> Self {
        let sym = (&sym + sym.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        // ascending order makes the null space the leading block
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(order.len(), order.iter().map(|&k| eig.eigenvalues[k]));
        let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |i, j| {
            eig.eigenvectors[(i, order[j])]
        });
        Self {
            values,
            vectors,
            sqrt_w,
        }
    }

    /// Already diagonal operator in an orthonormal basis.
    pub fn diagonal(values: DVector<f64>) -> Self {
        let n = values.len();
        Self {
            values,
            vectors: DMatrix::identity(n, n),
            sqrt_w: DVector::from_element(n, 1.0),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coefficients of `x` in the eigenbasis.
    pub fn coefficients(&self, x: &DVector<f64>) -> DVector<f64> {
        self.vectors.tr_mul(&x.component_mul(&self.sqrt_w))
    }

    pub fn synthesize(&self, c: &DVector<f64>) -> DVector<f64> {
        (&self.vectors * c).component_div(&self.sqrt_w)
    }

    /// `g(A) x`.
    pub fn apply(&self, x: &DVector<f64>, mut g: impl FnMut(f64) -> f64) -> DVector<f64> {
        let mut c = self.coefficients(x);
        for k in 0..c.len() {
            c[k] *= g(self.values[k]);
        }
        self.synthesize(&c)
    }

    /// The matrix of `g(A)`.
    pub fn matrix(&self, mut g: impl FnMut(f64) -> f64) -> DMatrix<f64> {
        let n = self.len();
        let gl = DVector::from_iterator(n, self.values.iter().map(|&l| g(l)));
        let mut left = self.vectors.clone();
        for j in 0..n {
            let s = gl[j];
            left.column_mut(j).scale_mut(s);
        }
        let mut m = left * self.vectors.transpose();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] *= self.sqrt_w[j] / self.sqrt_w[i];
            }
        }
        m
    }
}

/// Pointwise evaluation data for spectral (OU) models: scalar fields are
/// synthesised at tensor Gauss-Hermite nodes.
#[derive(Clone, Debug)]
pub struct Collocation {
    /// Node coordinates, one row per node.
    pub points: DMatrix<f64>,
    /// Probability weights of the nodes.
    pub weights: DVector<f64>,
    /// `synth[(x, alpha)] = h_alpha(x)`.
    pub synth: DMatrix<f64>,
}

/// A discrete weighted manifold. Immutable after construction.
#[derive(Clone, Debug)]
pub struct ModelOperator {
    pub kind: ModelKind,
    pub label: String,
    /// Grid spacing of the circle; `None` for spectral models.
    pub h: Option<f64>,
    /// Grid nodes (circle) or empty.
    pub theta: Vec<f64>,
    /// Weight samples at the nodes (circle) or empty.
    pub phi: Vec<f64>,
    /// Inner-product weights of the scalar space (`e^(-phi_i) h` on the
    /// circle, ones for the orthonormal Hermite basis).
    pub measure: DVector<f64>,
    /// Inner-product weights of the form space.
    pub form_measure: DVector<f64>,
    pub l_scalar: DMatrix<f64>,
    pub l_form: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub dstar: DMatrix<f64>,
    pub eig_scalar: Spectral,
    pub eig_form: Spectral,
    /// Smallest admissible shift including the conservative discretisation margin.
    pub a_min: f64,
    /// Shift bound from the discrete curvature alone.
    pub a_min_bare: f64,
    /// Curvature `Ric_phi` at the scalar nodes (circle) or the constant 1 (OU).
    pub ric: Vec<f64>,
    /// Number of 1-form components per point (the dimension).
    pub form_components: usize,
    pub collocation: Option<Collocation>,
    /// Hermite multi-indices of the scalar modes (OU).
    pub modes: Vec<Vec<usize>>,
    /// Weight the circle was built from, kept for grid refinement studies.
    pub phi_spec: Option<PhiSpec>,
}

/// Degree of a cochain: 0 for functions, 1 for 1-forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Degree {
    Scalar,
    Form,
}

/// Common view of [`Field`] and [`FormField`].
pub trait Cochain: Clone {
    const DEGREE: Degree;
    fn values(&self) -> &DVector<f64>;
    fn from_values(values: DVector<f64>) -> Self;
}

/// Scalar samples (circle nodes) or Hermite coefficients (OU).
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub values: DVector<f64>,
}

/// 1-form samples (circle edges) or component-major Hermite coefficients (OU).
#[derive(Clone, Debug, PartialEq)]
pub struct FormField {
    pub values: DVector<f64>,
}

impl Field {
    pub fn new(values: DVector<f64>) -> Self {
        Self { values }
    }
}

impl FormField {
    pub fn new(values: DVector<f64>) -> Self {
        Self { values }
    }
}

impl Cochain for Field {
    const DEGREE: Degree = Degree::Scalar;
    fn values(&self) -> &DVector<f64> {
        &self.values
    }
    fn from_values(values: DVector<f64>) -> Self {
        Self { values }
    }
}

impl Cochain for FormField {
    const DEGREE: Degree = Degree::Form;
    fn values(&self) -> &DVector<f64> {
        &self.values
    }
    fn from_values(values: DVector<f64>) -> Self {
        Self { values }
    }
}

/// Eigenvalues below this fraction of the largest are treated as zero.
const NULL_REL: f64 = 1e-10;

impl ModelOperator {
    pub fn n_scalar(&self) -> usize {
        self.measure.len()
    }

    pub fn n_form(&self) -> usize {
        self.form_measure.len()
    }

    pub fn is_circle(&self) -> bool {
        self.kind == ModelKind::WeightedCircle
    }

    pub fn spectral<C: Cochain>(&self) -> &Spectral {
        match C::DEGREE {
            Degree::Scalar => &self.eig_scalar,
            Degree::Form => &self.eig_form,
        }
    }

    fn check<C: Cochain>(&self, x: &C) -> Result<()> {
        let expected = match C::DEGREE {
            Degree::Scalar => self.n_scalar(),
            Degree::Form => self.n_form(),
        };
        if x.values().len() == expected {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected,
                got: x.values().len(),
            })
        }
    }

    /// Smallest nonzero scalar eigenvalue.
    pub fn lambda_1(&self) -> f64 {
        let lmax = self.eig_scalar.values.max();
        self.eig_scalar
            .values
            .iter()
            .copied()
            .find(|&l| l > NULL_REL * lmax.max(1.0))
            .unwrap_or(lmax)
    }

    pub fn is_null(&self, lambda: f64) -> bool {
        lambda.abs() <= NULL_REL * self.eig_scalar.values.max().max(1.0)
    }

    /// `lambda` clamped to `[0, inf)`, with roundoff-level eigenvalues of the
    /// null space set to exactly 0 so that `sqrt` does not amplify them.
    pub fn nonneg_eigenvalue(&self, lambda: f64) -> f64 {
        if self.is_null(lambda) {
            0.0
        } else {
            lambda.max(0.0)
        }
    }

    /// `g(L) x` for the Laplacian of the matching degree.
    pub fn apply_fn<C: Cochain>(&self, x: &C, g: impl FnMut(f64) -> f64) -> Result<C> {
        self.check(x)?;
        Ok(C::from_values(self.spectral::<C>().apply(x.values(), g)))
    }

    /// `e^(-tL) x`.
    pub fn heat<C: Cochain>(&self, t: f64, x: &C) -> Result<C> {
        if t < 0.0 {
            return Err(Error::Domain(format!("heat time must be >= 0, got {t}")));
        }
        self.apply_fn(x, |l| (-t * self.nonneg_eigenvalue(l)).exp())
    }

    /// `e^(-t sqrt(a^2 + L)) x` by spectral calculus.
    pub fn poisson<C: Cochain>(&self, a: f64, t: f64, x: &C) -> Result<C> {
        if t < 0.0 {
            return Err(Error::Domain(format!("Poisson time must be >= 0, got {t}")));
        }
        self.apply_fn(x, |l| {
            (-t * (a * a + self.nonneg_eigenvalue(l)).sqrt()).exp()
        })
    }

    /// `d/dt e^(-t sqrt(a^2 + L)) x`.
    pub fn poisson_dt<C: Cochain>(&self, a: f64, t: f64, x: &C) -> Result<C> {
        self.apply_fn(x, |l| {
            let s = (a * a + self.nonneg_eigenvalue(l)).sqrt();
            -s * (-t * s).exp()
        })
    }

    /// Poisson semigroup through the subordination integral of heat operators.
    pub fn poisson_subordinated<C: Cochain>(
        &self,
        a: f64,
        t: f64,
        x: &C,
        rule: &SubordinationRule,
    ) -> Result<C> {
        if t < 0.0 {
            return Err(Error::Domain(format!("Poisson time must be >= 0, got {t}")));
        }
        self.apply_fn(x, |l| rule.multiplier(t, a * a + self.nonneg_eigenvalue(l)))
    }

    pub fn gradient(&self, f: &Field) -> Result<FormField> {
        self.check(f)?;
        Ok(FormField::new(&self.d * &f.values))
    }

    pub fn divergence(&self, w: &FormField) -> Result<Field> {
        self.check(w)?;
        Ok(Field::new(&self.dstar * &w.values))
    }

    /// Relative size of the component of `f` in the null space of `a^2 + L`.
    pub fn null_component(&self, a: f64, f: &Field) -> f64 {
        if a > 0.0 {
            return 0.0;
        }
        let c = self.eig_scalar.coefficients(&f.values);
        let null: f64 = (0..c.len())
            .filter(|&k| self.is_null(self.eig_scalar.values[k]))
            .map(|k| c[k] * c[k])
            .sum();
        (null / c.norm_squared().max(f64::MIN_POSITIVE)).sqrt()
    }

    /// Removes the component of `f` in `N(L)`.
    pub fn project_out_null(&self, f: &Field) -> Field {
        let values = self
            .eig_scalar
            .apply(&f.values, |l| if self.is_null(l) { 0.0 } else { 1.0 });
        Field::new(values)
    }

    /// `R_a f = D (a^2 + L)^(-1/2) f`. For `a = 0` the null component of `f`
    /// must vanish up to `1e-8` relatively.
    pub fn riesz(&self, a: f64, f: &Field) -> Result<FormField> {
        self.check(f)?;
        if a < 0.0 {
            return Err(Error::Domain(format!("shift must be >= 0, got {a}")));
        }
        let size = self.null_component(a, f);
        if size > 1e-8 {
            return Err(Error::NullComponent { size });
        }
        let g = self.eig_scalar.apply(&f.values, |l| {
            if a == 0.0 && self.is_null(l) {
                0.0
            } else {
                1.0 / (a * a + self.nonneg_eigenvalue(l)).sqrt()
            }
        });
        Ok(FormField::new(&self.d * g))
    }

    /// Adjoint of [`ModelOperator::riesz`]: `(a^2 + L)^(-1/2) Dstar w`, null modes dropped at `a = 0`.
    pub fn riesz_adjoint(&self, a: f64, w: &FormField) -> Result<Field> {
        let g = self.divergence(w)?;
        Ok(Field::new(self.eig_scalar.apply(&g.values, |l| {
            if a == 0.0 && self.is_null(l) {
                0.0
            } else {
                1.0 / (a * a + self.nonneg_eigenvalue(l)).sqrt()
            }
        })))
    }

    /// Weighted `L^2` inner products of the cochain spaces.
    pub fn inner<C: Cochain>(&self, x: &C, y: &C) -> f64 {
        let w = match C::DEGREE {
            Degree::Scalar => &self.measure,
            Degree::Form => &self.form_measure,
        };
        x.values()
            .iter()
            .zip(y.values().iter())
            .zip(w.iter())
            .map(|((a, b), m)| a * b * m)
            .sum()
    }

    /// Values of a scalar field at its evaluation points with their weights:
    /// the nodes with `mu` on the circle, Gauss-Hermite nodes for OU.
    pub fn pointwise_scalar(&self, f: &Field) -> (DVector<f64>, DVector<f64>) {
        match &self.collocation {
            None => (f.values.clone(), self.measure.clone()),
            Some(c) => (&c.synth * &f.values, c.weights.clone()),
        }
    }

    /// Components of a form at its evaluation points (edges on the circle,
    /// Gauss-Hermite nodes for OU), with the point weights.
    pub fn pointwise_form(&self, w: &FormField) -> (Vec<DVector<f64>>, DVector<f64>) {
        match &self.collocation {
            None => (vec![w.values.clone()], self.form_measure.clone()),
            Some(c) => {
                let n = self.n_scalar();
                let comps = (0..self.form_components)
                    .map(|i| &c.synth * w.values.rows(i * n, n))
                    .collect();
                (comps, c.weights.clone())
            }
        }
    }

    /// Pointwise norm `|w|` at the form evaluation points.
    pub fn form_magnitude(&self, w: &FormField) -> (DVector<f64>, DVector<f64>) {
        let (comps, weights) = self.pointwise_form(w);
        let mut m = DVector::zeros(weights.len());
        for c in &comps {
            m += c.component_mul(c);
        }
        (m.map(f64::sqrt), weights)
    }

    pub fn lp_norm_field(&self, f: &Field, p: f64) -> Result<f64> {
        self.check(f)?;
        let (v, w) = self.pointwise_scalar(f);
        weighted_lp(&v, &w, p)
    }

    pub fn lp_norm_form(&self, w: &FormField, p: f64) -> Result<f64> {
        self.check(w)?;
        let (v, weights) = self.form_magnitude(w);
        weighted_lp(&v, &weights, p)
    }

    pub fn lp_norm<C: Cochain>(&self, x: &C, p: f64) -> Result<f64> {
        match C::DEGREE {
            Degree::Scalar => self.lp_norm_field(&Field::new(x.values().clone()), p),
            Degree::Form => self.lp_norm_form(&FormField::new(x.values().clone()), p),
        }
    }

    /// Total measure `mu(M)`.
    pub fn total_measure(&self) -> f64 {
        match &self.collocation {
            None => self.measure.sum(),
            Some(c) => c.weights.sum(),
        }
    }

    /// Fraction of `|f|^2` carried by modes with some Hermite index at the
    /// truncation limit; zero on the circle.
    pub fn top_mode_mass(&self, f: &Field) -> f64 {
        if self.modes.is_empty() {
            return 0.0;
        }
        let k = self
            .modes
            .iter()
            .flat_map(|m| m.iter().copied())
            .max()
            .unwrap_or(0);
        let top: f64 = self
            .modes
            .iter()
            .zip(f.values.iter())
            .filter(|(m, _)| m.contains(&k))
            .map(|(_, c)| c * c)
            .sum();
        top / f.values.norm_squared().max(f64::MIN_POSITIVE)
    }

    pub fn check_truncation(&self, f: &Field, tol: f64) -> Result<()> {
        let mass = self.top_mode_mass(f);
        if mass > tol {
            Err(Error::Truncation { mass, tol })
        } else {
            Ok(())
        }
    }

    /// Relative residual of `L_form D - D L_scalar`.
    pub fn intertwining_residual(&self) -> f64 {
        let lhs = &self.l_form * &self.d;
        let rhs = &self.d * &self.l_scalar;
        (&lhs - &rhs).amax() / lhs.amax().max(rhs.amax()).max(f64::MIN_POSITIVE)
    }

    /// Relative residual of `N D - (M Dstar)^T`, i.e. of `<Df, w> = <f, Dstar w>`.
    pub fn adjointness_residual(&self) -> f64 {
        let nd = DMatrix::from_diagonal(&self.form_measure) * &self.d;
        let md = DMatrix::from_diagonal(&self.measure) * &self.dstar;
        (&nd - md.transpose()).amax() / nd.amax().max(f64::MIN_POSITIVE)
    }

    /// Relative residual of `<Lf, f> = |Df|^2` as a matrix identity `M L = D^T N D`.
    pub fn energy_residual(&self) -> f64 {
        let ml = DMatrix::from_diagonal(&self.measure) * &self.l_scalar;
        let dnd = self.d.transpose() * DMatrix::from_diagonal(&self.form_measure) * &self.d;
        (&ml - &dnd).amax() / ml.amax().max(f64::MIN_POSITIVE)
    }
}

/// `(sum_i w_i |v_i|^p)^(1/p)`, or `max |v_i|` for `p = inf`.
pub fn weighted_lp(v: &DVector<f64>, w: &DVector<f64>, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("Lp exponent must be >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(v.amax());
    }
    let s: f64 = v
        .iter()
        .zip(w.iter())
        .map(|(x, m)| m * x.abs().powf(p))
        .sum();
    Ok(s.powf(1.0 / p))
}

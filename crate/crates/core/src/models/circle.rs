//! The weighted circle as a weighted graph.
//!
//! Nodes `theta_i = i h`, `h = 2 pi / N`, node weights `mu_i = e^(-phi_i) h`,
//! edge `i` joins nodes `i` and `i + 1` and carries `nu_i = e^(-(phi_i + phi_(i+1))/2) h`.
//! `D` is the forward difference over `h`, `Dstar = M^-1 D^T N` its exact
//! adjoint, `L_scalar = Dstar D` and `L_form = D Dstar`. In one dimension
//! `d d*` is the whole Hodge Laplacian on 1-forms, so intertwining holds as a
//! matrix identity.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ModelKind, ModelOperator, Spectral};
use crate::error::{Error, Result};

/// The weight `phi` of the measure `e^(-phi) dtheta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PhiSpec {
    Zero,
    Cos {
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Trigonometric polynomial `constant + sum_k cos[k-1] cos(k theta) + sin[k-1] sin(k theta)`.
    Poly {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    /// Periodic samples at the grid nodes; derivatives by finite differences.
    Table {
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl PhiSpec {
    pub fn name(&self) -> String {
        match self {
            PhiSpec::Zero => "zero".into(),
            PhiSpec::Cos { amplitude } if *amplitude == 1.0 => "cos".into(),
            PhiSpec::Cos { amplitude } => format!("{amplitude}cos"),
            PhiSpec::Poly { .. } => "poly".into(),
            PhiSpec::Table { .. } => "table".into(),
        }
    }

    /// Highest Fourier mode, for the resolution check.
    fn degree(&self) -> usize {
        match self {
            PhiSpec::Zero | PhiSpec::Table { .. } => 0,
            PhiSpec::Cos { .. } => 1,
            PhiSpec::Poly { cos, sin, .. } => cos.len().max(sin.len()),
        }
    }

    /// `(phi, phi'')` at `theta` for the analytic variants.
    fn eval(&self, theta: f64) -> Option<(f64, f64)> {
        match self {
            PhiSpec::Zero => Some((0.0, 0.0)),
            PhiSpec::Cos { amplitude } => Some((amplitude * theta.cos(), -amplitude * theta.cos())),
            PhiSpec::Poly { constant, cos, sin } => {
                let mut f = *constant;
                let mut f2 = 0.0;
                for (k, c) in cos.iter().enumerate() {
                    let k = (k + 1) as f64;
                    f += c * (k * theta).cos();
                    f2 -= c * k * k * (k * theta).cos();
                }
                for (k, s) in sin.iter().enumerate() {
                    let k = (k + 1) as f64;
                    f += s * (k * theta).sin();
                    f2 -= s * k * k * (k * theta).sin();
                }
                Some((f, f2))
            }
            PhiSpec::Table { .. } => None,
        }
    }
}

/// Builds the weighted circle with `n >= 8` nodes.
pub fn build_circle_model(n: usize, phi_spec: &PhiSpec) -> Result<ModelOperator> {
    if n < 8 {
        return Err(Error::Model(format!("circle needs N >= 8 nodes, got {n}")));
    }
    if n < 4 * phi_spec.degree() {
        return Err(Error::Model(format!(
            "N = {n} does not resolve weight modes up to {}",
            phi_spec.degree()
        )));
    }
    let h = 2.0 * PI / n as f64;
    let theta: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let (phi, ric): (Vec<f64>, Option<Vec<f64>>) = match phi_spec {
        PhiSpec::Table { values } => {
            if values.len() != n {
                return Err(Error::Model(format!(
                    "phi table has {} samples for N = {n}",
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Model("phi table has non-finite samples".into()));
            }
            (values.clone(), None)
        }
        spec => {
            let (f, f2): (Vec<f64>, Vec<f64>) = theta
                .iter()
                .map(|&t| spec.eval(t).expect("analytic weight"))
                .unzip();
            (f, Some(f2))
        }
    };

    let next = |i: usize| (i + 1) % n;
    let prev = |i: usize| (i + n - 1) % n;
    let mu = DVector::from_iterator(n, phi.iter().map(|p| (-p).exp() * h));
    let nu = DVector::from_iterator(
        n,
        (0..n).map(|i| (-(phi[i] + phi[next(i)]) / 2.0).exp() * h),
    );

    let mut d = DMatrix::zeros(n, n);
    for e in 0..n {
        d[(e, e)] = -1.0 / h;
        d[(e, next(e))] = 1.0 / h;
    }
    let dstar =
        DMatrix::from_diagonal(&mu.map(|m| 1.0 / m)) * d.transpose() * DMatrix::from_diagonal(&nu);
    let l_scalar = &dstar * &d;
    let l_form = &d * &dstar;

    // B = N^(1/2) D M^(-1/2): S_scalar = B^T B, S_form = B B^T
    let sqrt_mu = mu.map(f64::sqrt);
    let sqrt_nu = nu.map(f64::sqrt);
    let b =
        DMatrix::from_diagonal(&sqrt_nu) * &d * DMatrix::from_diagonal(&sqrt_mu.map(|x| 1.0 / x));
    let eig_scalar = Spectral::from_symmetric(b.transpose() * &b, sqrt_mu);
    let eig_form = Spectral::from_symmetric(&b * b.transpose(), sqrt_nu);

    // discrete curvature and the conservative shift bound
    let d2: Vec<f64> = (0..n)
        .map(|i| (phi[next(i)] - 2.0 * phi[i] + phi[prev(i)]) / (h * h))
        .collect();
    let d3_max = (0..n)
        .map(|i| {
            let (p2, p1, m1, m2) = (
                phi[next(next(i))],
                phi[next(i)],
                phi[prev(i)],
                phi[prev(prev(i))],
            );
            ((p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h * h * h)).abs()
        })
        .fold(0.0, f64::max);
    let min_d2 = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let a_min_bare = (-min_d2).max(0.0).sqrt();
    let a_min = (-(min_d2 - h * d3_max)).max(0.0).sqrt();

    Ok(ModelOperator {
        kind: ModelKind::WeightedCircle,
        label: format!("circle[N={n},phi={}]", phi_spec.name()),
        h: Some(h),
        theta,
        phi,
        measure: mu,
        form_measure: nu,
        l_scalar,
        l_form,
        d,
        dstar,
        eig_scalar,
        eig_form,
        a_min,
        a_min_bare,
        ric: ric.unwrap_or(d2),
        form_components: 1,
        collocation: None,
        modes: Vec::new(),
        phi_spec: Some(phi_spec.clone()),
    })
}

impl ModelOperator {
    /// Heat kernel `e^(-tL)` of the circle computed with nonnegative
    /// arithmetic only: `-L` is a Metzler matrix, so with `c >= max L_ii` and
    /// `P = c - L >= 0`, `e^(-tL) = (e^(-sc) e^(sP))^(2^k)` with `s = t / 2^k`
    /// and a truncated Taylor series for `e^(sP)`. Every entry is a sum of
    /// products of nonnegative numbers, so nonnegativity holds in floating point.
    pub fn markov_heat_kernel(&self, t: f64) -> Result<DMatrix<f64>> {
        if !self.is_circle() {
            return Err(Error::Model(
                "positivity-preserving kernel is only built for the circle".into(),
            ));
        }
        let n = self.n_scalar();
        let c = (0..n).map(|i| self.l_scalar[(i, i)]).fold(0.0, f64::max);
        let mut p = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c - self.l_scalar[(i, i)]
            } else {
                -self.l_scalar[(i, j)]
            }
        });
        p.iter_mut().for_each(|x| *x = x.max(0.0));
        let mut k = 0;
        while t * c / 2f64.powi(k) > 0.5 {
            k += 1;
        }
        let s = t / 2f64.powi(k);
        let sp = p * s;
        let mut term = DMatrix::identity(n, n);
        let mut sum = DMatrix::identity(n, n);
        for j in 1..=24 {
            term = &term * &sp / j as f64;
            sum += &term;
        }
        let mut e = sum * (-s * c).exp();
        for _ in 0..k {
            e = &e * &e;
        }
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Field, FormField};

    fn flat(n: usize) -> ModelOperator {
        build_circle_model(n, &PhiSpec::Zero).unwrap()
    }

    #[test]
    fn rejects_small_and_bad_inputs() {
        assert!(build_circle_model(4, &PhiSpec::Zero).is_err());
        assert!(build_circle_model(
            16,
            &PhiSpec::Table {
                values: vec![0.0; 15]
            }
        )
        .is_err());
        assert!(build_circle_model(
            16,
            &PhiSpec::Poly {
                constant: 0.0,
                cos: vec![0.0; 5],
                sin: vec![]
            }
        )
        .is_err());
    }

    #[test]
    fn flat_spectrum_matches_dispersion_relation() {
        let m = flat(128);
        let h = m.h.unwrap();
        let mut expected: Vec<f64> = (0..128)
            .map(|k| 4.0 * (k as f64 * h / 2.0).sin().powi(2) / (h * h))
            .collect();
        expected.sort_by(f64::total_cmp);
        for (got, want) in m.eig_scalar.values.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-9 * want.max(1.0));
        }
        assert!(m.eig_scalar.values[0].abs() < 1e-10);
        assert!((m.eig_scalar.values[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn annihilates_constants() {
        let m = build_circle_model(64, &PhiSpec::Cos { amplitude: 1.0 }).unwrap();
        let ones = DVector::from_element(64, 1.0);
        assert!((&m.l_scalar * ones).amax() < 1e-12);
    }

    #[test]
    fn exact_structure() {
        for spec in [PhiSpec::Zero, PhiSpec::Cos { amplitude: 1.0 }] {
            let m = build_circle_model(64, &spec).unwrap();
            assert!(m.intertwining_residual() < 1e-13);
            assert!(m.adjointness_residual() < 1e-13);
            assert!(m.energy_residual() < 1e-13);
        }
    }

    #[test]
    fn symmetrized_off_diagonals_are_nonpositive() {
        let m = build_circle_model(32, &PhiSpec::Cos { amplitude: 2.0 }).unwrap();
        let sq = m.measure.map(f64::sqrt);
        let s = DMatrix::from_diagonal(&sq)
            * &m.l_scalar
            * DMatrix::from_diagonal(&sq.map(|x| 1.0 / x));
        for i in 0..32 {
            for j in 0..32 {
                if i != j {
                    assert!(s[(i, j)] <= 0.0);
                }
            }
        }
    }

    #[test]
    fn curvature_bound_for_cos() {
        let m = build_circle_model(128, &PhiSpec::Cos { amplitude: 1.0 }).unwrap();
        assert!((m.a_min_bare - 1.0).abs() < 1e-3);
        assert!(m.a_min > 1.0 && m.a_min < 1.0 + m.h.unwrap());
        assert_eq!(flat(64).a_min, 0.0);
    }

    #[test]
    fn heat_and_gradient_on_flat_circle() {
        let m = flat(128);
        let f = Field::new(DVector::from_iterator(128, m.theta.iter().map(|t| t.cos())));
        let g = m.heat(1.0, &f).unwrap();
        let exact = f.values.map(|c| c * (-1.0f64).exp());
        assert!((g.values - exact).amax() < 1e-3);
        // forward difference of sin is cos at the edge midpoint
        let s = Field::new(DVector::from_iterator(128, m.theta.iter().map(|t| t.sin())));
        let ds = m.gradient(&s).unwrap();
        let h = m.h.unwrap();
        for e in 0..128 {
            let mid = (e as f64 + 0.5) * h;
            assert!((ds.values[e] - mid.cos()).abs() < h * h);
            assert!((ds.values[e] - m.theta[e].cos()).abs() < h);
        }
    }

    #[test]
    fn riesz_examples() {
        let m = flat(128);
        let f = Field::new(DVector::from_iterator(128, m.theta.iter().map(|t| t.cos())));
        // (1 + lambda_1)^(-1/2) D cos ~ -sin / sqrt 2 at the edges
        let r = m.riesz(1.0, &f).unwrap();
        let h = m.h.unwrap();
        for e in 0..128 {
            let mid = (e as f64 + 0.5) * h;
            assert!((r.values[e] + mid.sin() / 2f64.sqrt()).abs() < 1e-3);
        }
        let r0 = m.riesz(0.0, &f).unwrap();
        let ratio = m.lp_norm_form(&r0, 2.0).unwrap() / m.lp_norm_field(&f, 2.0).unwrap();
        assert!((ratio - 1.0).abs() < 1e-12);
        let ones = Field::new(DVector::from_element(128, 1.0));
        assert!(matches!(
            m.riesz(0.0, &ones),
            Err(Error::NullComponent { .. })
        ));
    }

    #[test]
    fn norms() {
        let m = flat(128);
        let ones = Field::new(DVector::from_element(128, 1.0));
        assert!((m.lp_norm_field(&ones, 3.0).unwrap() - (2.0 * PI).powf(1.0 / 3.0)).abs() < 1e-12);
        let c = Field::new(DVector::from_iterator(128, m.theta.iter().map(|t| t.cos())));
        assert!((m.lp_norm_field(&c, 2.0).unwrap() - PI.sqrt()).abs() < 1e-6);
        let w = FormField::new(DVector::from_element(128, -2.0));
        assert_eq!(m.lp_norm_form(&w, f64::INFINITY).unwrap(), 2.0);
    }

    #[test]
    fn markov_kernel_is_nonnegative_stochastic_and_matches_spectral() {
        let m = build_circle_model(64, &PhiSpec::Cos { amplitude: 1.0 }).unwrap();
        for t in [0.01, 0.5, 3.0] {
            let k = m.markov_heat_kernel(t).unwrap();
            assert!(k.iter().all(|&x| x >= 0.0));
            for i in 0..64 {
                assert!((k.row(i).sum() - 1.0).abs() < 1e-12);
            }
            let spec = m.eig_scalar.matrix(|l| (-t * l).exp());
            assert!((&k - spec).amax() < 1e-11, "t={t}");
        }
    }
}

//! Ornstein-Uhlenbeck operator on `R^d` in the normalised Hermite basis.
//!
//! `h_alpha(x) = prod_i He_(alpha_i)(x_i) / sqrt(alpha_i!)` is orthonormal for
//! the standard Gaussian measure, `L h_alpha = |alpha| h_alpha`, and
//! `d_i h_alpha = sqrt(alpha_i) h_(alpha - e_i)`. The 1-form Laplacian acts as
//! `L + 1` on each component because `Ric_phi = Hess(|x|^2/2) = I`.

use nalgebra::{DMatrix, DVector};

use super::{Collocation, ModelKind, ModelOperator, Spectral};
use crate::error::{Error, Result};
use crate::quadrature::gauss_hermite;

/// `[h_0(x), ..., h_(k-1)(x)]` by the three-term recurrence.
pub fn hermite_normalized(x: f64, k: usize) -> Vec<f64> {
    let mut h = Vec::with_capacity(k);
    if k > 0 {
        h.push(1.0);
    }
    if k > 1 {
        h.push(x);
    }
    for j in 1..k.saturating_sub(1) {
        let next = (x * h[j] - (j as f64).sqrt() * h[j - 1]) / ((j + 1) as f64).sqrt();
        h.push(next);
    }
    h
}

/// Builds the OU model with `K` modes per axis in dimension `d`.
pub fn build_ou_model(d: usize, k: usize) -> Result<ModelOperator> {
    if !(1..=2).contains(&d) {
        return Err(Error::Model(format!(
            "OU dimension must be 1 or 2, got {d}"
        )));
    }
    if k < 4 {
        return Err(Error::Model(format!(
            "OU needs K >= 4 modes per axis, got {k}"
        )));
    }
    let modes: Vec<Vec<usize>> = if d == 1 {
        (0..k).map(|a| vec![a]).collect()
    } else {
        (0..k)
            .flat_map(|a| (0..k).map(move |b| vec![a, b]))
            .collect()
    };
    let n = modes.len();
    let index = |m: &[usize]| m.iter().fold(0, |acc, &a| acc * k + a);

    let mut dmat = DMatrix::zeros(d * n, n);
    for (col, alpha) in modes.iter().enumerate() {
        for i in 0..d {
            if alpha[i] > 0 {
                let mut beta = alpha.clone();
                beta[i] -= 1;
                dmat[(i * n + index(&beta), col)] = (alpha[i] as f64).sqrt();
            }
        }
    }
    let degrees = DVector::from_iterator(n, modes.iter().map(|m| m.iter().sum::<usize>() as f64));
    let form_degrees =
        DVector::from_iterator(d * n, (0..d).flat_map(|_| degrees.iter().map(|&g| g + 1.0)));
    let l_scalar = DMatrix::from_diagonal(&degrees);
    let l_form = DMatrix::from_diagonal(&form_degrees);

    // tensor Gauss-Hermite collocation, exact for products of two modes
    let rule = gauss_hermite::<f64>(2 * k);
    let m1 = rule.len();
    let npts = m1.pow(d as u32);
    let mut points = DMatrix::zeros(npts, d);
    let mut weights = DVector::zeros(npts);
    let mut synth = DMatrix::zeros(npts, n);
    let table: Vec<Vec<f64>> = rule
        .nodes
        .iter()
        .map(|&x| hermite_normalized(x, k))
        .collect();
    for p in 0..npts {
        let mut rem = p;
        let mut idx = vec![0; d];
        for slot in idx.iter_mut().rev() {
            *slot = rem % m1;
            rem /= m1;
        }
        let mut w = 1.0;
        for (i, &j) in idx.iter().enumerate() {
            points[(p, i)] = rule.nodes[j];
            w *= rule.weights[j];
        }
        weights[p] = w;
        for (col, alpha) in modes.iter().enumerate() {
            synth[(p, col)] = alpha.iter().zip(&idx).map(|(&a, &j)| table[j][a]).product();
        }
    }

    Ok(ModelOperator {
        kind: if d == 1 {
            ModelKind::OuLine
        } else {
            ModelKind::OuTensor(d)
        },
        label: format!("ou[d={d},K={k}]"),
        h: None,
        theta: Vec::new(),
        phi: Vec::new(),
        measure: DVector::from_element(n, 1.0),
        form_measure: DVector::from_element(d * n, 1.0),
        dstar: dmat.transpose(),
        d: dmat,
        l_scalar,
        l_form,
        eig_scalar: Spectral::diagonal(degrees),
        eig_form: Spectral::diagonal(form_degrees),
        a_min: 0.0,
        a_min_bare: 0.0,
        ric: vec![1.0],
        form_components: d,
        collocation: Some(Collocation {
            points,
            weights,
            synth,
        }),
        modes,
        phi_spec: None,
    })
}

impl ModelOperator {
    /// Hermite coefficients of the field whose values at the collocation
    /// nodes are `values` (the discrete `L^2` projection).
    pub fn analyze(&self, values: &DVector<f64>) -> Result<DVector<f64>> {
        let c = self
            .collocation
            .as_ref()
            .ok_or_else(|| Error::Model("model has no collocation".into()))?;
        Ok(c.synth.tr_mul(&values.component_mul(&c.weights)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Field, FormField};

    #[test]
    fn hermite_orthonormality() {
        let rule = gauss_hermite::<f64>(24);
        for a in 0..10 {
            for b in 0..10 {
                let ip = rule.integrate(|x| {
                    let h = hermite_normalized(x, 10);
                    h[a] * h[b]
                });
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-12, "{a} {b} {ip}");
            }
        }
        // He_2 = x^2 - 1, normalised by sqrt 2
        let h = hermite_normalized(1.5, 3);
        assert!((h[2] - (1.5f64 * 1.5 - 1.0) / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn spectrum_and_structure() {
        for (d, k) in [(1, 32), (2, 8)] {
            let m = build_ou_model(d, k).unwrap();
            assert!(m.intertwining_residual() == 0.0);
            assert!(m.adjointness_residual() == 0.0);
            assert!(m.energy_residual() < 1e-15);
            assert_eq!(m.a_min, 0.0);
            assert_eq!(m.lambda_1(), 1.0);
        }
        assert!(build_ou_model(3, 8).is_err());
        assert!(build_ou_model(1, 3).is_err());
    }

    #[test]
    fn degree_one_mode() {
        let m = build_ou_model(1, 16).unwrap();
        let mut c = DVector::zeros(16);
        c[1] = 1.0;
        let h1 = Field::new(c);
        let lh = &m.l_scalar * &h1.values;
        assert_eq!(lh, h1.values);
        // R_0 h_1 = D h_1 = constant 1-form of L^2 norm 1
        let r = m.riesz(0.0, &h1).unwrap();
        assert!((r.values[0] - 1.0).abs() < 1e-15);
        assert!((m.lp_norm_form(&r, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((m.lp_norm_field(&h1, 2.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn riesz_is_an_isometry_on_mean_zero_fields() {
        let m = build_ou_model(2, 6).unwrap();
        let f = Field::new(DVector::from_fn(36, |i, _| {
            if i == 0 {
                0.0
            } else {
                ((i * 7) % 5) as f64 - 2.0
            }
        }));
        let r = m.riesz(0.0, &f).unwrap();
        assert!((r.values.norm() - f.values.norm()).abs() < 1e-12);
    }

    #[test]
    fn synthesis_and_analysis_round_trip() {
        let m = build_ou_model(2, 5).unwrap();
        let f = DVector::from_fn(25, |i, _| (i as f64).sin());
        let (vals, _) = m.pointwise_scalar(&Field::new(f.clone()));
        assert!((m.analyze(&vals).unwrap() - f).amax() < 1e-12);
    }

    #[test]
    fn gaussian_lp_norm_of_x() {
        // E|X|^4 = 3 for a standard normal
        let m = build_ou_model(1, 8).unwrap();
        let mut c = DVector::zeros(8);
        c[1] = 1.0;
        let n4 = m.lp_norm_field(&Field::new(c), 4.0).unwrap();
        assert!((n4 - 3f64.powf(0.25)).abs() < 1e-12);
        let w = FormField::new(DVector::from_element(8, 0.0));
        assert_eq!(m.lp_norm_form(&w, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn truncation_check() {
        let m = build_ou_model(1, 8).unwrap();
        let mut c = DVector::zeros(8);
        c[2] = 1.0;
        assert!(m.check_truncation(&Field::new(c.clone()), 1e-12).is_ok());
        c[7] = 0.1;
        assert!(matches!(
            m.check_truncation(&Field::new(c), 1e-6),
            Err(Error::Truncation { .. })
        ));
    }
}

//! Gauss rules (Golub-Welsch) and a golden-section maximiser.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::scalar::{lit, Real};

/// Nodes and weights of a one-dimensional quadrature rule.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(T) -> T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&x, &w)| acc + w * f(x))
    }

    /// Affine image of a rule on `[-1, 1]` onto `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> GaussRule<T> {
        let half = (b - a) * lit(0.5);
        let mid = (a + b) * lit(0.5);
        GaussRule {
            nodes: self.nodes.iter().map(|&x| mid + half * x).collect(),
            weights: self.weights.iter().map(|&w| w * half).collect(),
        }
    }

    fn from_f64(nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        GaussRule {
            nodes: nodes.into_iter().map(lit).collect(),
            weights: weights.into_iter().map(lit).collect(),
        }
    }
}

/// Golub-Welsch: eigenvalues of the Jacobi matrix are the nodes, squared
/// first eigenvector components times the total mass are the weights.
fn golub_welsch(diag: &[f64], offdiag: &[f64], mass: f64) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jacobi[(i, i)] = diag[i];
        if i + 1 < n {
            jacobi[(i, i + 1)] = offdiag[i];
            jacobi[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], mass * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> GaussRule<T> {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let (mut x, mut w) = golub_welsch(&diag, &off, 2.0);
    // the rule is symmetric; enforce it exactly
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let xs = 0.5 * (x[j] - x[i]);
        let ws = 0.5 * (w[i] + w[j]);
        x[i] = -xs;
        x[j] = xs;
        w[i] = ws;
        w[j] = ws;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    GaussRule::from_f64(x, w)
}

/// Gauss rule for the Gamma(`shape`, 1) probability density
/// `s^(shape-1) e^(-s) / Gamma(shape)` on `(0, inf)`, i.e. the generalized
/// Gauss-Laguerre rule with `alpha = shape - 1`, weights normalised to sum 1.
pub fn gauss_laguerre<T: Real>(n: usize, shape: f64) -> GaussRule<T> {
    assert!(n >= 1 && shape > 0.0);
    let alpha = shape - 1.0;
    let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + alpha + 1.0).collect();
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            (k * (k + alpha)).sqrt()
        })
        .collect();
    let (x, w) = golub_welsch(&diag, &off, 1.0);
    GaussRule::from_f64(x, w)
}

/// Gauss rule for the standard normal density (probabilists' Hermite).
pub fn gauss_hermite<T: Real>(n: usize) -> GaussRule<T> {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    let (mut x, mut w) = golub_welsch(&diag, &off, 1.0);
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let xs = 0.5 * (x[j] - x[i]);
        let ws = 0.5 * (w[i] + w[j]);
        x[i] = -xs;
        x[j] = xs;
        w[i] = ws;
        w[j] = ws;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    GaussRule::from_f64(x, w)
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
///
/// Stops when the bracket is narrower than `rel_width * max(1, |midpoint|)`.
/// Returns the best abscissa seen and its value.
pub fn golden_section_max(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    rel_width: f64,
) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    while hi - lo > rel_width * (0.5 * (lo + hi)).abs().max(1.0) {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
            if f1 > best.1 {
                best = (x1, f1);
            }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
            if f2 > best.1 {
                best = (x2, f2);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre::<f64>(8);
        for k in 0..16 {
            let exact = if k % 2 == 0 {
                2.0 / (k as f64 + 1.0)
            } else {
                0.0
            };
            let got = rule.integrate(|x| x.powi(k));
            assert!((got - exact).abs() < 1e-14, "x^{k}: {got} vs {exact}");
        }
    }

    #[test]
    fn legendre_mapped_interval() {
        let rule = gauss_legendre::<f64>(12).mapped(0.0, std::f64::consts::PI);
        assert!((rule.integrate(f64::sin) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn laguerre_moments_match_gamma_distribution() {
        // E[s^k] under Gamma(1/2, 1) is (1/2)(3/2)...(k - 1/2)
        let rule = gauss_laguerre::<f64>(16, 0.5);
        let mut moment = 1.0;
        for k in 0..20 {
            let got = rule.integrate(|s| s.powi(k));
            assert!(
                (got - moment).abs() < 1e-11 * moment,
                "k={k}: {got} vs {moment}"
            );
            moment *= k as f64 + 0.5;
        }
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn laguerre_standard_weight() {
        let rule = gauss_laguerre::<f64>(10, 1.0);
        // E[s^3] = 3! for Exp(1)
        assert!((rule.integrate(|s| s.powi(3)) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn hermite_moments() {
        let rule = gauss_hermite::<f64>(12);
        assert!((rule.integrate(|x| x * x) - 1.0).abs() < 1e-13);
        assert!((rule.integrate(|x| x.powi(4)) - 3.0).abs() < 1e-12);
        assert!(rule.integrate(|x| x.powi(5)).abs() < 1e-12);
    }

    #[test]
    fn f32_rules_are_usable() {
        let rule = gauss_legendre::<f32>(6);
        assert!((rule.integrate(|x| x * x) - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn golden_section_finds_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 1.3).powi(2) + 2.0, -10.0, 10.0, 1e-9);
        assert!((x - 1.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn golden_section_handles_plateau() {
        let (x, fx) = golden_section_max(|x| (-x).min(0.0), -5.0, 5.0, 1e-8);
        assert_eq!(fx, 0.0);
        assert!(x <= 1e-6);
    }
}

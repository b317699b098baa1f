//! Quadrature for `int_0^inf g(t) t dt` with exponentially decaying `g`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Log-uniform panels on `[t_min, t_max]` with Gauss-Legendre nodes in each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeQuadrature {
    pub t_min: f64,
    pub t_max: f64,
    pub panels: usize,
    pub nodes_per_panel: usize,
}

/// Nodes and weights of a [`TimeQuadrature`], with the probe times used by
/// the truncation estimates.
#[derive(Clone, Debug)]
pub struct TimeGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Estimated mass of `int g(t) t dt` outside `[t_min, t_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    pub head: f64,
    pub tail: f64,
}

impl Truncation {
    pub fn total(&self) -> f64 {
        self.head + self.tail
    }
}

impl TimeQuadrature {
    pub fn new(t_min: f64, t_max: f64, panels: usize, nodes_per_panel: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
            return Err(Error::Domain(format!(
                "time window must satisfy 0 < t_min < t_max, got [{t_min}, {t_max}]"
            )));
        }
        if panels == 0 || nodes_per_panel == 0 {
            return Err(Error::Domain(
                "time quadrature needs at least one panel and node".into(),
            ));
        }
        Ok(Self {
            t_min,
            t_max,
            panels,
            nodes_per_panel,
        })
    }

    /// `[1e-6, 40 / a_eff]` with 32 panels of 8 nodes, `a_eff = sqrt(a^2 + lambda_1)`.
    /// The head beyond `t_min` contributes about `g(0) t_min^2 / 2`.
    pub fn for_decay(a: f64, lambda_1: f64) -> Self {
        let a_eff = (a * a + lambda_1).sqrt().max(1e-3);
        Self {
            t_min: 1e-6,
            t_max: 40.0 / a_eff,
            panels: 32,
            nodes_per_panel: 8,
        }
    }

    /// Same window with twice as many panels.
    pub fn refined(&self) -> Self {
        Self {
            panels: 2 * self.panels,
            ..self.clone()
        }
    }

    pub fn total_nodes(&self) -> usize {
        self.panels * self.nodes_per_panel
    }

    pub fn grid(&self) -> TimeGrid {
        let rule = gauss_legendre::<f64>(self.nodes_per_panel);
        let ratio = (self.t_max / self.t_min).ln() / self.panels as f64;
        let mut nodes = Vec::with_capacity(self.total_nodes());
        let mut weights = Vec::with_capacity(self.total_nodes());
        for k in 0..self.panels {
            let lo = self.t_min * (ratio * k as f64).exp();
            let hi = if k + 1 == self.panels {
                self.t_max
            } else {
                self.t_min * (ratio * (k + 1) as f64).exp()
            };
            let r = rule.mapped(lo, hi);
            nodes.extend(r.nodes);
            weights.extend(r.weights);
        }
        TimeGrid { nodes, weights }
    }

    /// Times at which `g` must also be sampled for [`TimeQuadrature::truncation`].
    pub fn probes(&self) -> [f64; 3] {
        [self.t_min, 0.9 * self.t_max, self.t_max]
    }

    /// Head `g(t_min) t_min^2 / 2` and tail `g(T)(T/r + 1/r^2)` where `r` is
    /// the decay rate of `g` observed on `[0.9T, T]`. A tail that does not
    /// decay is infinite, unless `g(T)` is already at roundoff level relative
    /// to `g(t_min)`, in which case the tail is resolved to 0.
    /// `g_probe` holds `|g|` at [`TimeQuadrature::probes`].
    pub fn truncation(&self, g_probe: [f64; 3]) -> Truncation {
        let head = g_probe[0] * self.t_min * self.t_min / 2.0;
        let (g1, g2) = (g_probe[1], g_probe[2]);
        let floor = 64.0 * f64::EPSILON * g_probe[0];
        let tail = if g2 <= floor {
            0.0
        } else if g1 <= g2 {
            f64::INFINITY
        } else {
            let t = self.t_max;
            let r = (g1 / g2).ln() / (0.1 * t);
            g2 * (t / r + 1.0 / (r * r))
        };
        Truncation { head, tail }
    }
}

impl TimeGrid {
    /// `sum_k w_k t_k g_k`.
    pub fn integrate_t(&self, g: &[f64]) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .zip(g)
            .map(|((t, w), v)| t * w * v)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_moment() {
        // int_0^inf e^(-2ct) t dt = 1 / (4c^2)
        for c in [0.5, 1.0, 3.0] {
            let tq = TimeQuadrature::for_decay(0.0, c * c);
            let grid = tq.grid();
            let g: Vec<f64> = grid.nodes.iter().map(|t| (-2.0 * c * t).exp()).collect();
            let exact = 1.0 / (4.0 * c * c);
            let probes = tq.probes().map(|t| (-2.0 * c * t).exp());
            let tr = tq.truncation(probes);
            // the window misses about t_min^2 / 2 at the head, which the estimate accounts for
            assert!(
                (grid.integrate_t(&g) + tr.head - exact).abs() < 1e-9 * exact,
                "c = {c}"
            );
            assert!(tr.total() < 1e-6 * exact);
            // the estimates bound the true missing mass from above
            let head = tq.t_min * tq.t_min / 2.0;
            assert!(tr.head >= 0.99 * head * (-2.0 * c * tq.t_min).exp());
        }
    }

    #[test]
    fn non_decaying_tail_is_infinite() {
        let tq = TimeQuadrature::new(1e-3, 10.0, 4, 4).unwrap();
        assert!(tq.truncation([1.0, 1.0, 1.0]).tail.is_infinite());
        assert_eq!(tq.truncation([1.0, 0.0, 0.0]).tail, 0.0);
        // flat noise far below the integrand's scale is roundoff, not a tail
        assert_eq!(tq.truncation([1.0, 1e-20, 1e-20]).tail, 0.0);
        assert!(tq.truncation([1.0, 1e-10, 1e-10]).tail.is_infinite());
    }

    #[test]
    fn refinement_and_validation() {
        let tq = TimeQuadrature::for_decay(1.0, 1.0);
        assert_eq!(tq.total_nodes(), 256);
        assert_eq!(tq.refined().total_nodes(), 512);
        assert!(TimeQuadrature::new(0.0, 1.0, 1, 1).is_err());
        assert!(TimeQuadrature::new(1.0, 0.5, 1, 1).is_err());
        let grid = tq.grid();
        assert!(grid.nodes.windows(2).all(|w| w[0] < w[1]));
        let span: f64 = grid.weights.iter().sum();
        assert!((span - (tq.t_max - tq.t_min)).abs() < 1e-12 * tq.t_max);
    }
}

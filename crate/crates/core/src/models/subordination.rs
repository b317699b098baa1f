//! Quadrature for `e^(-t sqrt(mu)) = int_0^inf e^(-t^2 mu / (4s)) dm(s)`,
//! `dm(s) = (pi s)^(-1/2) e^(-s) ds`.

use serde::{Deserialize, Serialize};

use crate::quadrature::{gauss_laguerre, gauss_legendre, GaussRule};

/// How the `dm(s)` integral is discretised.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SubordinationScheme {
    /// Generalized Gauss-Laguerre with weight `s^(-1/2) e^(-s)`. The integrand
    /// `e^(-c/s)` is not polynomial-like near 0, so accuracy saturates around
    /// 1e-2 for `c ~ 1`.
    Laguerre { nodes: usize },
    /// `(0, split]` in the variable `x = sqrt(s)` by Gauss-Legendre on dyadic
    /// panels accumulating at 0, `[split, inf)` by Gauss-Laguerre after a shift.
    Composite {
        tail_nodes: usize,
        panel_nodes: usize,
        panels: usize,
        split: f64,
    },
}

impl Default for SubordinationScheme {
    fn default() -> Self {
        SubordinationScheme::Composite {
            tail_nodes: 32,
            panel_nodes: 16,
            panels: 40,
            split: 4.0,
        }
    }
}

/// Nodes `s_j` and weights `w_j` with `sum_j w_j g(s_j) ~ int g dm`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubordinationRule {
    pub scheme: SubordinationScheme,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SubordinationRule {
    pub fn new(scheme: SubordinationScheme) -> Self {
        let (nodes, weights) = match scheme {
            SubordinationScheme::Laguerre { nodes } => {
                // Gamma(1/2) probability rule: weights already integrate dm
                let r: GaussRule<f64> = gauss_laguerre(nodes, 0.5);
                (r.nodes, r.weights)
            }
            SubordinationScheme::Composite {
                tail_nodes,
                panel_nodes,
                panels,
                split,
            } => {
                let mut s = Vec::new();
                let mut w = Vec::new();
                // head: s = x^2, dm = (2/sqrt(pi)) e^(-x^2) dx on (0, sqrt(split)]
                let gl = gauss_legendre::<f64>(panel_nodes);
                let top = split.sqrt();
                let c = 2.0 / std::f64::consts::PI.sqrt();
                for k in 0..panels {
                    let hi = top * 0.5f64.powi(k as i32);
                    let lo = if k + 1 == panels { 0.0 } else { hi * 0.5 };
                    let r = gl.mapped(lo, hi);
                    for (x, wx) in r.nodes.iter().zip(&r.weights) {
                        s.push(x * x);
                        w.push(wx * c * (-x * x).exp());
                    }
                }
                // tail: s = split + sigma, dm = (pi s)^(-1/2) e^(-split) e^(-sigma) dsigma
                let lag: GaussRule<f64> = gauss_laguerre(tail_nodes, 1.0);
                for (sig, ws) in lag.nodes.iter().zip(&lag.weights) {
                    let sv = split + sig;
                    s.push(sv);
                    w.push(ws * (-split).exp() / (std::f64::consts::PI * sv).sqrt());
                }
                (s, w)
            }
        };
        Self {
            scheme,
            nodes,
            weights,
        }
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum_j w_j exp(-t^2 mu / (4 s_j))`, the subordinated value of
    /// `exp(-t sqrt(mu))` for `mu >= 0`.
    pub fn multiplier(&self, t: f64, mu: f64) -> f64 {
        if t == 0.0 {
            return self.mass();
        }
        let c = t * t * mu / 4.0;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * (-c / s).exp())
            .sum()
    }
}

impl Default for SubordinationRule {
    fn default() -> Self {
        Self::new(SubordinationScheme::default())
    }
}

//! The bilinear embedding and the duality identity behind the Riesz bound.

use serde::Serialize;

use super::fields::{Collocator, Evolution};
use super::time::TimeQuadrature;
use super::Tolerances;
use crate::error::{Error, Result};
use crate::models::{Field, FormField, ModelOperator};
use crate::report::{CheckRecord, Status};

pub const ANCHOR_EMBEDDING: &str =
    "bilinear embedding: int_0^inf int_M |grad P_t f||grad P_t w| dmu t dt <= 3(p*-1) |f|_p |w|_q";
pub const ANCHOR_DUALITY: &str =
    "duality: <R_a f, w> = 4 int_0^inf <d P_t f, d/dt P_t w> t dt (in absolute value)";

pub fn pstar(p: f64) -> f64 {
    p.max(p / (p - 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmbeddingResult {
    pub lhs: f64,
    pub rhs_bound: f64,
    pub ratio: f64,
    pub p: f64,
    pub a: f64,
    pub model: String,
    pub truncation_estimate: f64,
    pub status: Status,
}

impl EmbeddingResult {
    pub fn record(&self, id: &str) -> CheckRecord {
        CheckRecord::new(id, ANCHOR_EMBEDDING, self.rhs_bound - self.lhs, self.status)
            .param("model", &self.model)
            .param_f64("p", self.p)
            .param_f64("a", self.a)
            .value(self.ratio)
            .witness("lhs", self.lhs)
            .witness("rhs_bound", self.rhs_bound)
            .witness("truncation_estimate", self.truncation_estimate)
    }
}

fn check_shift(model: &ModelOperator, a: f64) -> Result<()> {
    if a < model.a_min - 1e-12 {
        return Err(Error::Domain(format!(
            "shift a = {a} is below a_min = {} for {}",
            model.a_min, model.label
        )));
    }
    Ok(())
}

/// `g(t) = sum_x w_x |grad-bar P_t f|(x) |grad-bar P_t w|(x)` at each time.
pub fn embedding_integrand(
    model: &ModelOperator,
    a: f64,
    f: &Field,
    w: &FormField,
    times: &[f64],
) -> Vec<f64> {
    let col = Collocator::new(model);
    let ef = Evolution::new(model, a, f);
    let ew = Evolution::new(model, a, w);
    let gf = col.scalar(&ef.values(times), &ef.derivative(times));
    let gw = col.form(&ew.values(times), &ew.derivative(times));
    (0..times.len())
        .map(|j| {
            gf.column(j)
                .iter()
                .zip(gw.column(j).iter())
                .zip(col.weights.iter())
                .map(|((x, y), m)| m * x * y)
                .sum()
        })
        .collect()
}

/// Evaluates both sides of the embedding. The result is inconclusive when
/// the estimated mass outside the time window reaches `trunc_frac * lhs`.
pub fn bilinear_embedding(
    model: &ModelOperator,
    a: f64,
    p: f64,
    f: &Field,
    w: &FormField,
    tq: &TimeQuadrature,
    tol: &Tolerances,
) -> Result<EmbeddingResult> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("p must lie in (1, inf), got {p}")));
    }
    check_shift(model, a)?;
    let q = p / (p - 1.0);
    let grid = tq.grid();
    let g = embedding_integrand(model, a, f, w, &grid.nodes);
    let lhs = grid.integrate_t(&g);
    let probes = embedding_integrand(model, a, f, w, &tq.probes());
    let truncation_estimate = tq.truncation([probes[0], probes[1], probes[2]]).total();
    let rhs_bound =
        3.0 * (pstar(p) - 1.0) * model.lp_norm_field(f, p)? * model.lp_norm_form(w, q)?;
    let ratio = if rhs_bound > 0.0 {
        lhs / rhs_bound
    } else {
        0.0
    };
    let status = if truncation_estimate > 0.0 && truncation_estimate >= tol.trunc_frac * lhs {
        Status::Inconclusive
    } else {
        Status::from_pass(lhs <= rhs_bound + tol.assert_tol)
    };
    Ok(EmbeddingResult {
        lhs,
        rhs_bound,
        ratio,
        p,
        a,
        model: model.label.clone(),
        truncation_estimate,
        status,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualityResult {
    /// `<R_a f, w>` in the weighted form inner product.
    pub lhs: f64,
    /// The time integral `4 int <d P_t f, d_t P_t w> t dt`.
    pub rhs: f64,
    pub rel_err: f64,
    pub truncation_estimate: f64,
}

impl DualityResult {
    pub fn record(&self, id: &str, model: &str, a: f64, rel_tol: f64) -> CheckRecord {
        let sign = if self.lhs * self.rhs < 0.0 {
            "opposite"
        } else {
            "equal"
        };
        CheckRecord::new(
            id,
            ANCHOR_DUALITY,
            rel_tol - self.rel_err,
            Status::from_pass(self.rel_err <= rel_tol),
        )
        .param("model", model)
        .param_f64("a", a)
        .param_f64("rel_tol", rel_tol)
        .value(self.rel_err)
        .witness("lhs", self.lhs)
        .witness("rhs", self.rhs)
        .witness("truncation_estimate", self.truncation_estimate)
        .note(format!(
            "signs of the two sides are {sign}; the spectral derivation gives rhs = -lhs"
        ))
    }
}

fn duality_integrand(
    model: &ModelOperator,
    a: f64,
    f: &Field,
    w: &FormField,
    times: &[f64],
) -> Vec<f64> {
    let ef = Evolution::new(model, a, f);
    let ew = Evolution::new(model, a, w);
    let df = &model.d * ef.values(times);
    let wt = ew.derivative(times);
    (0..times.len())
        .map(|j| {
            4.0 * df
                .column(j)
                .iter()
                .zip(wt.column(j).iter())
                .zip(model.form_measure.iter())
                .map(|((x, y), m)| m * x * y)
                .sum::<f64>()
        })
        .collect()
}

/// Compares `|<R_a f, w>|` with the absolute value of the time integral.
/// For `a = 0` the null component of `f` must vanish.
pub fn duality_identity(
    model: &ModelOperator,
    a: f64,
    f: &Field,
    w: &FormField,
    tq: &TimeQuadrature,
) -> Result<DualityResult> {
    let r = model.riesz(a, f)?;
    let lhs = model.inner(&r, w);
    let grid = tq.grid();
    let rhs = grid.integrate_t(&duality_integrand(model, a, f, w, &grid.nodes));
    let probes = duality_integrand(model, a, f, w, &tq.probes())
        .iter()
        .map(|x| x.abs())
        .collect::<Vec<_>>();
    let truncation_estimate = tq.truncation([probes[0], probes[1], probes[2]]).total();
    // both sides vanish when they are roundoff relative to the Cauchy-Schwarz scale
    let scale = model.inner(&r, &r).sqrt() * model.inner(w, w).sqrt();
    let negligible = 1e-10 * scale;
    let rel_err = if lhs.abs() <= negligible && rhs.abs() <= negligible {
        0.0
    } else {
        (lhs.abs() - rhs.abs()).abs() / lhs.abs().max(negligible)
    };
    Ok(DualityResult {
        lhs,
        rhs,
        rel_err,
        truncation_estimate,
    })
}

//! Sampling certificates for the size, Hessian and derivative bounds.

use nalgebra::DVector;
use rayon::prelude::*;

use super::tau::{certify_tau, TauSample, TauSearch};
use super::{
    assemble_hessian, classify, eval_beta, grad_beta, BellmanParams, BellmanPoint, RegionTag,
    SingularTolerances,
};
use crate::report::{CertificationReport, CheckRecord, Status};
use crate::sampling::{boundary_curve, unit_vectors, BoxSampler};

pub const ANCHOR_SIZE: &str = "bellman size bound: 0 <= beta(u,v) <= (1+delta)(u^p+v^q)";
pub const ANCHOR_HESSIAN: &str =
    "bellman convexity: Hess Q(xi) >= delta*blockdiag(tau, I/tau), hence H_Q(xi;w) >= 2 delta |w1||w2|";
pub const ANCHOR_DERIVATIVE: &str =
    "bellman derivative bounds: 0 <= d_u beta <= C max(u^(p-1), v), 0 <= d_v beta <= C v^(q-1)";

#[derive(Clone, Debug, PartialEq)]
pub struct SizeBoundSettings {
    pub u_max: f64,
    pub v_max: f64,
    pub samples: usize,
    pub seed: u64,
    pub assert_tol: f64,
}

impl Default for SizeBoundSettings {
    fn default() -> Self {
        Self {
            u_max: 4.0,
            v_max: 4.0,
            samples: 100_000,
            seed: 0,
            assert_tol: 1e-12,
        }
    }
}

/// Checks `0 <= beta` and `beta <= (1+delta)(u^p + v^q)` on box samples and
/// on the boundary curve.
pub fn certify_size_bound(
    params: &BellmanParams<f64>,
    settings: &SizeBoundSettings,
) -> CertificationReport {
    let p = params.p();
    let q = params.q();
    let d = params.delta();
    let mut points =
        BoxSampler::new(settings.u_max, settings.v_max, settings.seed).points(settings.samples);
    points.extend(boundary_curve(p, settings.u_max, settings.v_max, 256));
    points.extend([(0.0, 0.0), (0.0, settings.v_max), (settings.u_max, 0.0)]);

    let margins: Vec<(f64, f64)> = points
        .par_iter()
        .map(|&(u, v)| {
            let b = eval_beta(u, v, params).expect("sampled points are in the quadrant");
            (b, (1.0 + d) * (u.powf(p) + v.powf(q)) - b)
        })
        .collect();

    let mut lower = (f64::INFINITY, 0usize);
    let mut upper = (f64::INFINITY, 0usize);
    let mut violations = 0usize;
    for (k, &(lo, hi)) in margins.iter().enumerate() {
        if lo < lower.0 {
            lower = (lo, k);
        }
        if hi < upper.0 {
            upper = (hi, k);
        }
        if lo < -settings.assert_tol || hi < -settings.assert_tol {
            violations += 1;
        }
    }

    let mut report = CertificationReport::new();
    for (id, (margin, k)) in [
        ("bellman.size.nonneg", lower),
        ("bellman.size.upper", upper),
    ] {
        let (u, v) = points[k];
        report.push(
            CheckRecord::new(
                id,
                ANCHOR_SIZE,
                margin,
                Status::from_pass(margin >= -settings.assert_tol),
            )
            .param_f64("p", p)
            .param("samples", points.len())
            .param_f64("assert_tol", settings.assert_tol)
            .value(violations as f64)
            .witness("u", u)
            .witness("v", v),
        );
    }
    report
}

#[derive(Clone, Debug, PartialEq)]
pub struct HessianBoundSettings {
    pub u_max: f64,
    pub v_max: f64,
    pub samples_per_region: usize,
    /// Dimension of `eta`.
    pub n: usize,
    pub w_per_point: usize,
    pub seed: u64,
    pub assert_tol: f64,
    pub search: TauSearch,
    pub singular: SingularTolerances,
}

impl Default for HessianBoundSettings {
    fn default() -> Self {
        Self {
            u_max: 4.0,
            v_max: 4.0,
            samples_per_region: 10_000,
            n: 2,
            w_per_point: 100,
            seed: 0,
            assert_tol: 1e-9,
            search: TauSearch::default(),
            singular: SingularTolerances::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HessianCertification {
    pub report: CertificationReport,
    /// Certified `tau` at every sampled point, in sampling order.
    pub samples: Vec<TauSample>,
}

/// Sample points `(zeta, eta)` in one region, with `zeta = +-u` and `eta`
/// pointing in a seeded random direction of length `v`.
pub fn hessian_sample_points(
    params: &BellmanParams<f64>,
    settings: &HessianBoundSettings,
    region: RegionTag,
) -> Vec<BellmanPoint<f64>> {
    let seed = settings.seed
        ^ if region == RegionTag::Lower {
            0x4c4f
        } else {
            0x5550
        };
    let sampler = BoxSampler::new(settings.u_max, settings.v_max, seed);
    let uv = sampler.filtered(
        settings.samples_per_region,
        1000 * settings.samples_per_region,
        |u, v| classify(u, v, params, &settings.singular) == region,
    );
    let dirs = unit_vectors(settings.n, uv.len(), seed.wrapping_add(1));
    uv.iter()
        .zip(dirs)
        .enumerate()
        .map(|(k, (&(u, v), e))| {
            let zeta = if k % 2 == 0 { u } else { -u };
            BellmanPoint::new(zeta, DVector::from_vec(e) * v)
        })
        .collect()
}

struct PointOutcome {
    sample: TauSample,
    /// `min_w H_Q(xi; w) - 2 delta |w1||w2|` over the sampled unit `w`.
    w_margin: f64,
}

fn certify_point(
    pt: &BellmanPoint<f64>,
    params: &BellmanParams<f64>,
    settings: &HessianBoundSettings,
    lower: bool,
    index: usize,
) -> PointOutcome {
    let h = assemble_hessian(pt, params, lower);
    let cert = certify_tau(&h, params.delta(), &settings.search);
    let (u, v) = pt.radii();
    let mut w_margin = f64::INFINITY;
    let ws = unit_vectors(
        pt.dim() + 1,
        settings.w_per_point,
        settings.seed.wrapping_mul(31).wrapping_add(index as u64),
    );
    for w in ws {
        let w = DVector::from_vec(w);
        let quad = w.dot(&(&h * &w));
        let w2 = w.rows(1, pt.dim()).norm();
        w_margin = w_margin.min(quad - 2.0 * params.delta() * w[0].abs() * w2);
    }
    PointOutcome {
        sample: TauSample {
            u,
            v,
            tau: cert.tau,
            min_eig: cert.min_eig,
        },
        w_margin,
    }
}

/// Certifies, per sampled point off the fattened singular set, a `tau` with
/// `lambda_min(Hess Q - delta * blockdiag(tau, I/tau)) >= -assert_tol`, and
/// the consequence for sampled directions `w`.
pub fn certify_hessian_bound(
    params: &BellmanParams<f64>,
    settings: &HessianBoundSettings,
) -> HessianCertification {
    let mut report = CertificationReport::new();
    let mut samples = Vec::new();
    for (region, name) in [(RegionTag::Lower, "lower"), (RegionTag::Upper, "upper")] {
        let points = hessian_sample_points(params, settings, region);
        let outcomes: Vec<PointOutcome> = points
            .par_iter()
            .enumerate()
            .map(|(k, pt)| certify_point(pt, params, settings, region == RegionTag::Lower, k))
            .collect();
        let worst_eig = outcomes
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.sample.min_eig.total_cmp(&b.1.sample.min_eig));
        let worst_w = outcomes
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.w_margin.total_cmp(&b.1.w_margin));
        let enough = points.len() == settings.samples_per_region;
        let note = (!enough).then(|| format!("only {} points found in region", points.len()));

        if let (Some((ke, oe)), Some((kw, ow))) = (worst_eig, worst_w) {
            let margin = oe.sample.min_eig;
            let status = Status::from_pass(margin >= -settings.assert_tol && enough);
            let mut rec = CheckRecord::new(
                format!("bellman.hessian.tau.{name}"),
                ANCHOR_HESSIAN,
                margin,
                status,
            )
            .param_f64("p", params.p())
            .param("n", settings.n)
            .param("samples", points.len())
            .value(oe.sample.tau)
            .witness("zeta", points[ke].zeta)
            .witness("u", oe.sample.u)
            .witness("v", oe.sample.v)
            .witness("tau", oe.sample.tau)
            .witness("min_eig", margin);
            if let Some(n) = &note {
                rec = rec.note(n.clone());
            }
            report.push(rec);
            let margin = ow.w_margin;
            report.push(
                CheckRecord::new(
                    format!("bellman.hessian.w.{name}"),
                    ANCHOR_HESSIAN,
                    margin,
                    Status::from_pass(margin >= -settings.assert_tol && enough),
                )
                .param_f64("p", params.p())
                .param("n", settings.n)
                .param("w_per_point", settings.w_per_point)
                .witness("u", ow.sample.u)
                .witness("v", ow.sample.v)
                .witness("index", kw as f64),
            );
        } else {
            report.push(
                CheckRecord::new(
                    format!("bellman.hessian.tau.{name}"),
                    ANCHOR_HESSIAN,
                    f64::NAN,
                    Status::Fail,
                )
                .param_f64("p", params.p())
                .note("no sample points in region"),
            );
        }
        samples.extend(outcomes.into_iter().map(|o| o.sample));
    }
    HessianCertification { report, samples }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeBoundSettings {
    pub u_max: f64,
    pub v_max: f64,
    /// Sample count of the coarsest level; each level quadruples it.
    pub samples: usize,
    pub levels: usize,
    pub seed: u64,
    pub fit_tol: f64,
}

impl Default for DerivativeBoundSettings {
    fn default() -> Self {
        Self {
            u_max: 4.0,
            v_max: 4.0,
            samples: 1000,
            levels: 3,
            seed: 0,
            fit_tol: 1e-3,
        }
    }
}

/// Empirical constants over a sample set: `(C_u, C_v, argmax_u, argmax_v, min partial)`.
fn fit_constants(
    params: &BellmanParams<f64>,
    pts: &[(f64, f64)],
) -> (f64, f64, (f64, f64), (f64, f64), f64) {
    let p = params.p();
    let q = params.q();
    let mut cu = (0.0, (0.0, 0.0));
    let mut cv = (0.0, (0.0, 0.0));
    let mut min_partial = f64::INFINITY;
    for &(u, v) in pts {
        let g = grad_beta(u, v, params).expect("samples lie in the quadrant");
        min_partial = min_partial.min(g.du).min(g.dv);
        let ru = g.du / u.powf(p - 1.0).max(v);
        let rv = g.dv / v.powf(q - 1.0);
        if ru > cu.0 {
            cu = (ru, (u, v));
        }
        if rv > cv.0 {
            cv = (rv, (u, v));
        }
    }
    (cu.0, cv.0, cu.1, cv.1, min_partial)
}

/// Signs of both partials and refinement-stable empirical constants
/// `C_u = sup d_u beta / max(u^(p-1), v)` and `C_v = sup d_v beta / v^(q-1)`.
pub fn certify_derivative_bounds(
    params: &BellmanParams<f64>,
    settings: &DerivativeBoundSettings,
) -> CertificationReport {
    let sampler = BoxSampler::new(settings.u_max, settings.v_max, settings.seed);
    let mut fits = Vec::new();
    let mut count = settings.samples;
    for _ in 0..settings.levels.max(2) {
        let mut pts = sampler.points(count);
        pts.extend(boundary_curve(
            params.p(),
            settings.u_max,
            settings.v_max,
            count / 10 + 1,
        ));
        fits.push((count, fit_constants(params, &pts)));
        count *= 4;
    }
    let (n_fine, (cu, cv, wu, wv, min_partial)) = fits[fits.len() - 1];
    let (_, (cu_prev, cv_prev, ..)) = fits[fits.len() - 2];
    let stable =
        |fine: f64, coarse: f64| fine.is_finite() && fine / coarse < 1.0 + settings.fit_tol;

    let mut report = CertificationReport::new();
    report.push(
        CheckRecord::new(
            "bellman.derivative.sign",
            ANCHOR_DERIVATIVE,
            min_partial,
            Status::from_pass(min_partial >= 0.0),
        )
        .param_f64("p", params.p())
        .param("samples", n_fine),
    );
    for (id, c, prev, w) in [
        ("bellman.derivative.c_u", cu, cu_prev, wu),
        ("bellman.derivative.c_v", cv, cv_prev, wv),
    ] {
        report.push(
            CheckRecord::new(
                id,
                ANCHOR_DERIVATIVE,
                1.0 + settings.fit_tol - c / prev,
                Status::from_pass(stable(c, prev)),
            )
            .param_f64("p", params.p())
            .param("samples", n_fine)
            .param_f64("fit_tol", settings.fit_tol)
            .value(c)
            .witness("u", w.0)
            .witness("v", w.1)
            .witness("coarse", prev),
        );
    }
    report
}

//! Certificates for the mollified Bellman function and the Hölder step.

use nalgebra::DVector;
use rayon::prelude::*;

use super::{ConvolutionRule, MollifiedBellman, MollifierSpec};
use crate::bellman::{certify_tau, TauSearch, TauTable};
use crate::error::Result;
use crate::report::{CertificationReport, CheckRecord, Status};
use crate::sampling::{boundary_curve, unit_vectors, BoxSampler};

pub const ANCHOR_SIZE: &str =
    "mollified size bound: 0 <= beta_k(u,v) <= (1+delta)((u+k)^p+(v+k)^q)";
pub const ANCHOR_HESSIAN: &str =
    "mollified convexity: H_Qk(xi;w) >= delta(tau_k|w1|^2 + |w2|^2/tau_k) for every xi, singular set included";
pub const ANCHOR_DERIVATIVE: &str =
    "mollified derivative bounds: 0 <= d_u beta_k <= C max((u+k)^(p-1), v+k), 0 <= d_v beta_k <= C (v+k)^(q-1)";
pub const ANCHOR_HOLDER: &str = "Holder step: (tau*psi_k)(xi) (tau^-1*psi_k)(xi) >= 1";

#[derive(Clone, Debug, PartialEq)]
pub struct RegularSettings {
    pub u_max: f64,
    pub v_max: f64,
    /// Box samples for the size and Hessian checks.
    pub samples: usize,
    /// Points on the boundary curve `u^p = v^q`.
    pub boundary_samples: usize,
    pub w_per_point: usize,
    pub seed: u64,
    pub assert_tol: f64,
    pub fit_tol: f64,
    pub search: TauSearch,
}

impl Default for RegularSettings {
    fn default() -> Self {
        Self {
            u_max: 2.0,
            v_max: 2.0,
            samples: 200,
            boundary_samples: 32,
            w_per_point: 100,
            seed: 0,
            assert_tol: 1e-9,
            fit_tol: 1e-2,
            search: TauSearch::default(),
        }
    }
}

/// Sample points: box samples, the boundary curve and both axes (origin included).
fn regular_points(p: f64, s: &RegularSettings, count: usize) -> Vec<(f64, f64)> {
    let mut pts = BoxSampler::new(s.u_max, s.v_max, s.seed).points(count);
    pts.extend(boundary_curve(p, s.u_max, s.v_max, s.boundary_samples));
    let axis = 8;
    for k in 0..=axis {
        let t = k as f64 / axis as f64;
        pts.push((t * s.u_max, 0.0));
        if k > 0 {
            pts.push((0.0, t * s.v_max));
        }
    }
    pts
}

struct RegularOutcome {
    u: f64,
    v: f64,
    size_lo: f64,
    size_hi: f64,
    tau: f64,
    min_eig: f64,
    w_margin: f64,
}

/// Checks the shifted size bound, a fresh `tau_kappa` certificate from
/// finite-difference Hessians (singular set included) and the derivative
/// bounds with refinement-stable fitted constants.
pub fn certify_regular_properties(
    m: &MollifiedBellman<f64>,
    s: &RegularSettings,
) -> CertificationReport {
    let p = m.params.p();
    let q = m.params.q();
    let d = m.params.delta();
    let kappa = m.spec.kappa;
    let pts = regular_points(p, s, s.samples);

    let outcomes: Vec<RegularOutcome> = pts
        .par_iter()
        .enumerate()
        .map(|(k, &(u, v))| {
            let b = m.beta_kappa(u, v);
            let bound = (1.0 + d) * ((u + kappa).powf(p) + (v + kappa).powf(q));
            let pt = m.radial_point(u, v);
            let h = m.hessian_Q_kappa(&pt);
            let cert = certify_tau(&h, d, &s.search);
            let mut w_margin = f64::INFINITY;
            for w in unit_vectors(m.spec.dim(), s.w_per_point, s.seed.wrapping_add(k as u64)) {
                let w = DVector::from_vec(w);
                let w2 = w.rows(1, m.spec.n).norm();
                w_margin = w_margin.min(w.dot(&(&h * &w)) - 2.0 * d * w[0].abs() * w2);
            }
            RegularOutcome {
                u,
                v,
                size_lo: b,
                size_hi: bound - b,
                tau: cert.tau,
                min_eig: cert.min_eig,
                w_margin,
            }
        })
        .collect();

    let worst = |f: &dyn Fn(&RegularOutcome) -> f64| {
        outcomes
            .iter()
            .min_by(|a, b| f(a).total_cmp(&f(b)))
            .expect("point set is never empty")
    };
    let base = |id: &str, anchor: &str, margin: f64, tol: f64| {
        CheckRecord::new(id, anchor, margin, Status::from_pass(margin >= -tol))
            .param_f64("p", p)
            .param_f64("kappa", kappa)
            .param("n", m.spec.n)
            .param("samples", pts.len())
    };

    let mut report = CertificationReport::new();
    let o = worst(&|o| o.size_lo);
    report.push(
        base("mollify.size.nonneg", ANCHOR_SIZE, o.size_lo, s.assert_tol)
            .witness("u", o.u)
            .witness("v", o.v),
    );
    let o = worst(&|o| o.size_hi);
    report.push(
        base("mollify.size.upper", ANCHOR_SIZE, o.size_hi, s.assert_tol)
            .witness("u", o.u)
            .witness("v", o.v),
    );
    let o = worst(&|o| o.min_eig);
    report.push(
        base(
            "mollify.hessian.tau",
            ANCHOR_HESSIAN,
            o.min_eig,
            s.assert_tol,
        )
        .value(o.tau)
        .witness("u", o.u)
        .witness("v", o.v)
        .witness("tau", o.tau),
    );
    let o = worst(&|o| o.w_margin);
    report.push(
        base(
            "mollify.hessian.w",
            ANCHOR_HESSIAN,
            o.w_margin,
            s.assert_tol,
        )
        .param("w_per_point", s.w_per_point)
        .witness("u", o.u)
        .witness("v", o.v),
    );

    // derivative bounds: signs on the full set, constants fitted on two levels
    let fit = |pts: &[(f64, f64)]| {
        pts.par_iter()
            .map(|&(u, v)| {
                let (du, dv) = m.grad_beta_kappa(u, v);
                let ru = du / (u + kappa).powf(p - 1.0).max(v + kappa);
                let rv = dv / (v + kappa).powf(q - 1.0);
                (du.min(dv), ru, rv, u, v)
            })
            .collect::<Vec<_>>()
    };
    let coarse = fit(&pts);
    let fine = fit(&regular_points(p, s, 4 * s.samples));
    let min_partial = fine.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    // partial derivatives vanish on the axes by symmetry; allow rounding there
    let sign_tol = s.assert_tol;
    report.push(base(
        "mollify.derivative.sign",
        ANCHOR_DERIVATIVE,
        min_partial,
        sign_tol,
    ));
    let argmax = |rows: &[(f64, f64, f64, f64, f64)],
                  pick: fn(&(f64, f64, f64, f64, f64)) -> f64| {
        *rows
            .iter()
            .max_by(|a, b| pick(a).total_cmp(&pick(b)))
            .expect("non-empty")
    };
    for (id, pick) in [
        (
            "mollify.derivative.c_u",
            (|r: &(f64, f64, f64, f64, f64)| r.1) as fn(&_) -> f64,
        ),
        ("mollify.derivative.c_v", |r: &(f64, f64, f64, f64, f64)| {
            r.2
        }),
    ] {
        let c_f = argmax(&fine, pick);
        let c_c = argmax(&coarse, pick);
        let ratio = pick(&c_f) / pick(&c_c);
        let ok = pick(&c_f).is_finite() && ratio < 1.0 + s.fit_tol;
        report.push(
            CheckRecord::new(
                id,
                ANCHOR_DERIVATIVE,
                1.0 + s.fit_tol - ratio,
                Status::from_pass(ok),
            )
            .param_f64("p", p)
            .param_f64("kappa", kappa)
            .param_f64("fit_tol", s.fit_tol)
            .value(pick(&c_f))
            .witness("u", c_f.3)
            .witness("v", c_f.4)
            .witness("coarse", pick(&c_c)),
        );
    }
    report
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolderSettings {
    pub samples: usize,
    pub seed: u64,
    pub assert_tol: f64,
}

impl Default for HolderSettings {
    fn default() -> Self {
        Self {
            samples: 500,
            seed: 0,
            assert_tol: 1e-6,
        }
    }
}

/// `((tau * psi_kappa)(xi), (tau^-1 * psi_kappa)(xi))` with `tau` read from the table.
pub fn convolved_tau(
    rule: &ConvolutionRule<f64>,
    table: &TauTable,
    u: f64,
    v: f64,
) -> Result<(f64, f64)> {
    let mut a = 0.0;
    let mut b = 0.0;
    for (y, &w) in rule.offsets.iter().zip(&rule.weights) {
        let uu = (u - y[0]).abs();
        let vv = ((v - y[1]).powi(2) + y.rows(2, y.len() - 2).norm_squared()).sqrt();
        let t = table.eval(uu, vv)?;
        a += w * t;
        b += w / t;
    }
    Ok((a, b))
}

/// Convolves a tabulated `tau` and `1/tau` with `psi_kappa` at sample points
/// whose `kappa`-neighbourhood lies inside the table, and checks the product.
pub fn holder_product_check(
    spec: &MollifierSpec,
    table: &TauTable,
    s: &HolderSettings,
) -> Result<CertificationReport> {
    let rule = ConvolutionRule::<f64>::new(spec);
    let k = spec.kappa;
    let mut pts = BoxSampler::new(table.u_max - k, table.v_max - k, s.seed).points(s.samples);
    pts.extend([(0.0, 0.0), (table.u_max - k, table.v_max - k)]);
    let products = pts
        .par_iter()
        .map(|&(u, v)| convolved_tau(&rule, table, u, v).map(|(a, b)| (a * b, u, v)))
        .collect::<Result<Vec<_>>>()?;
    let (prod, u, v) = products
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("non-empty");
    let margin = prod - 1.0;
    let mut report = CertificationReport::new();
    report.push(
        CheckRecord::new(
            "mollify.holder",
            ANCHOR_HOLDER,
            margin,
            Status::from_pass(margin >= -s.assert_tol),
        )
        .param_f64("kappa", k)
        .param("samples", pts.len())
        .param("table", format!("{}x{}", table.nu, table.nv))
        .value(prod)
        .witness("u", u)
        .witness("v", v),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::BellmanParams;

    fn moll(p: f64, kappa: f64) -> MollifiedBellman<f64> {
        MollifiedBellman::new(
            MollifierSpec::new(1, kappa, 48, 1e-4).unwrap(),
            BellmanParams::new(p).unwrap(),
        )
    }

    #[test]
    fn regular_properties_small_run() {
        let s = RegularSettings {
            samples: 24,
            boundary_samples: 6,
            w_per_point: 10,
            ..Default::default()
        };
        for p in [2.0, 3.0] {
            let m = moll(p, 0.2);
            let r = certify_regular_properties(&m, &s);
            assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
        }
    }

    #[test]
    fn fitted_constants_respect_unmollified_sup() {
        // d_u beta_k <= sup of d_u beta over the kappa-ball <= (p + 2 delta) max((u+k)^(p-1), v+k)
        let s = RegularSettings {
            samples: 24,
            boundary_samples: 6,
            w_per_point: 1,
            ..Default::default()
        };
        let m = moll(3.0, 0.1);
        let r = certify_regular_properties(&m, &s);
        let b = &m.params;
        let cu = r.get("mollify.derivative.c_u").unwrap().value.unwrap();
        let cv = r.get("mollify.derivative.c_v").unwrap().value.unwrap();
        assert!(cu <= 3.0 + 2.0 * b.delta() + 1e-9);
        assert!(cv <= b.q() + b.delta() * (2.0 - b.q()) + 1e-9);
    }

    #[test]
    fn size_example_at_one_one() {
        let m = moll(2.0, 0.1);
        assert!(m.beta_kappa(1.0, 1.0) <= 3.025);
    }

    #[test]
    fn constant_tau_gives_unit_product() {
        let spec = MollifierSpec::new(1, 0.1, 32, 1e-3).unwrap();
        let table = TauTable {
            u_max: 1.0,
            v_max: 1.0,
            nu: 4,
            nv: 4,
            tau: vec![3.0; 16],
        };
        let r = holder_product_check(
            &spec,
            &table,
            &HolderSettings {
                samples: 20,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.checks[0].margin.abs() < 1e-13);
    }

    #[test]
    fn exponential_tau_strict_gap_matches_oracle() {
        // tau(u, v) = e^u varies along the first axis; the product is
        // E[e^(u - y0)] E[e^(y0 - u)] = M(1) M(-1) for the y0-marginal of psi_kappa
        let kappa = 0.5;
        let spec = MollifierSpec::new(1, kappa, 48, 1e-4).unwrap();
        let (nu, nv) = (400, 4);
        let u_max = 2.0;
        let tau: Vec<f64> = (0..nu)
            .flat_map(|i| {
                let u = (i as f64 + 0.5) * u_max / nu as f64;
                std::iter::repeat_n(u.exp(), nv)
            })
            .collect();
        let table = TauTable {
            u_max,
            v_max: 1.0,
            nu,
            nv,
            tau,
        };
        let rule = ConvolutionRule::<f64>::new(&spec);
        let (a, b) = convolved_tau(&rule, &table, 1.0, 0.2).unwrap();
        // 1-D oracle: marginal density of y0 is proportional to int exp(-1/(1-r^2)) dy1
        let n = 4000;
        let mut m1 = 0.0;
        let mut m_1 = 0.0;
        let mut mass = 0.0;
        for i in 0..n {
            let y0 = -kappa + (i as f64 + 0.5) * 2.0 * kappa / n as f64;
            let mut g = 0.0;
            for j in 0..n {
                let y1 = -kappa + (j as f64 + 0.5) * 2.0 * kappa / n as f64;
                g += super::super::bump((y0 * y0 + y1 * y1) / (kappa * kappa));
            }
            mass += g;
            m1 += g * (-y0).exp();
            m_1 += g * y0.exp();
        }
        let oracle = (m1 / mass) * (m_1 / mass);
        assert!(oracle > 1.0);
        assert!((a * b - oracle).abs() < 1e-4, "{} vs {oracle}", a * b);
    }

    #[test]
    fn coverage_error() {
        let spec = MollifierSpec::new(1, 0.1, 16, 1e-2).unwrap();
        let table = TauTable {
            u_max: 1.0,
            v_max: 1.0,
            nu: 2,
            nv: 2,
            tau: vec![1.0; 4],
        };
        let rule = ConvolutionRule::<f64>::new(&spec);
        assert!(convolved_tau(&rule, &table, 0.95, 0.5).is_err());
    }
}

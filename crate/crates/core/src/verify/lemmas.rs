//! Semigroup properties of the discrete models: intertwining, positivity,
//! domination, subordination and the Bochner identity.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::fields::{form_from_fn, random_field, random_form};
use crate::error::{Error, Result};
use crate::models::{
    build_circle_model, Field, FormField, ModelOperator, PhiSpec, SubordinationRule,
};
use crate::report::{CertificationReport, CheckRecord, Status};

pub const ANCHOR_INTERTWINING: &str = "intertwining: d L f = L_form d f";
pub const ANCHOR_ADJOINT: &str = "adjointness: <Df, w>_form = <f, Dstar w>";
pub const ANCHOR_ENERGY: &str = "energy identity: <Lf, f> = |Df|^2";
pub const ANCHOR_COMMUTE: &str = "commutation: d P_t f = P_form_t d f";
pub const ANCHOR_JENSEN: &str = "positivity: |P_t f(x)|^r <= P_t |f|^r(x)";
pub const ANCHOR_MARKOV: &str = "Markov kernel: e^(-tL) >= 0 entrywise with unit row sums";
pub const ANCHOR_DOMINATION: &str = "domination: |e^(-tL_form) w| <= e^(t a^2) e^(-tL) |w|";
pub const ANCHOR_FORM_JENSEN: &str = "form positivity: |P_form^a_t w|^r <= P^0_t |w|^r";
pub const ANCHOR_SUBORDINATION: &str =
    "subordination: e^(-t sqrt(a^2+L)) = int e^(-t^2 (a^2+L) / 4s) dm(s)";
pub const ANCHOR_BOCHNER: &str = "Bochner: -L(|w|^2)/2 = |grad w|^2 - <L_form w, w> + Ric(w, w)";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaSettings {
    pub times: Vec<f64>,
    pub exponents: Vec<f64>,
    /// Random fields per time for the positivity check.
    pub samples: usize,
    pub seed: u64,
    /// Grid sizes of the refinement studies.
    pub refinement: Vec<usize>,
    /// Minimal observed decay order of tolerance-based violations.
    pub order_target: f64,
    /// Refinement-order shortfalls fail the check instead of being noted.
    pub strict: bool,
    /// Bound for residuals that vanish by construction.
    pub exact_tol: f64,
}

impl Default for LemmaSettings {
    fn default() -> Self {
        Self {
            times: vec![0.1, 1.0, 10.0],
            exponents: vec![1.0, 2.0, 3.0],
            samples: 8,
            seed: 0,
            refinement: vec![64, 128, 256],
            order_target: 0.9,
            strict: false,
            exact_tol: 1e-12,
        }
    }
}

/// Least-squares slope of `-log(v)` against `log(N)`; `None` when any value
/// is not positive.
pub fn observed_order(ns: &[usize], values: &[f64]) -> Option<f64> {
    if values.len() < 2 || values.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| -v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// Residuals that hold by construction: intertwining, adjointness, energy.
pub fn structural_checks(model: &ModelOperator, tol: f64) -> CertificationReport {
    let mut r = CertificationReport::new();
    for (id, anchor, res) in [
        (
            "models.intertwining",
            ANCHOR_INTERTWINING,
            model.intertwining_residual(),
        ),
        (
            "models.adjointness",
            ANCHOR_ADJOINT,
            model.adjointness_residual(),
        ),
        ("models.energy", ANCHOR_ENERGY, model.energy_residual()),
    ] {
        r.push(
            CheckRecord::new(id, anchor, tol - res, Status::from_pass(res <= tol))
                .param("model", &model.label)
                .param_f64("tol", tol)
                .value(res)
                .note("relative residual"),
        );
    }
    r
}

/// Spectral against subordinated Poisson on random fields, and the total mass of `dm`.
pub fn subordination_check(
    model: &ModelOperator,
    rule: &SubordinationRule,
    a: f64,
    times: &[f64],
    samples: usize,
    seed: u64,
    rel_tol: f64,
) -> Result<CertificationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let f = random_field(model, 8, &mut rng);
        let w = random_form(model, 8, &mut rng);
        for &t in times {
            let e1 = model.poisson(a, t, &f)?;
            let e2 = model.poisson_subordinated(a, t, &f, rule)?;
            worst = worst
                .max((&e1.values - &e2.values).norm() / e1.values.norm().max(f64::MIN_POSITIVE));
            let g1 = model.poisson(a, t, &w)?;
            let g2 = model.poisson_subordinated(a, t, &w, rule)?;
            worst = worst
                .max((&g1.values - &g2.values).norm() / g1.values.norm().max(f64::MIN_POSITIVE));
        }
    }
    let mass_err = (rule.mass() - 1.0).abs();
    let mut r = CertificationReport::new();
    r.push(
        CheckRecord::new(
            "models.subordination.agreement",
            ANCHOR_SUBORDINATION,
            rel_tol - worst,
            Status::from_pass(worst < rel_tol),
        )
        .param("model", &model.label)
        .param_f64("a", a)
        .param("scheme", format!("{:?}", rule.scheme))
        .param("nodes", rule.nodes.len())
        .value(worst),
    );
    r.push(
        CheckRecord::new(
            "models.subordination.mass",
            ANCHOR_SUBORDINATION,
            1e-12 - mass_err,
            Status::from_pass(mass_err <= 1e-12),
        )
        .param("scheme", format!("{:?}", rule.scheme))
        .value(rule.mass()),
    );
    Ok(r)
}

fn node_average(model: &ModelOperator, w: &DVector<f64>) -> DVector<f64> {
    let n = model.n_scalar();
    DVector::from_fn(n, |i, _| 0.5 * (w[(i + n - 1) % n] + w[i]))
}

/// Lemma (c) on a circle model: strict negatives of `P^a_t|f|^r - |P^a_t f|^r`,
/// plus the nonnegative-arithmetic heat kernel.
fn positivity(model: &ModelOperator, a: f64, s: &LemmaSettings) -> Result<CertificationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let n = model.n_scalar();
    let mut violations = 0usize;
    let mut min_gap = f64::INFINITY;
    let mut evaluated = 0usize;
    for &t in &s.times {
        for k in 0..s.samples {
            // alternate smooth and rough data
            let f = if k % 2 == 0 {
                random_field(model, 8, &mut rng)
            } else {
                Field::new(DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)))
            };
            let pf = model.poisson(a, t, &f)?;
            for &r in &s.exponents {
                let fr = Field::new(f.values.map(|x| x.abs().powf(r)));
                let pfr = model.poisson(a, t, &fr)?;
                for i in 0..n {
                    let gap = pfr.values[i] - pf.values[i].abs().powf(r);
                    evaluated += 1;
                    min_gap = min_gap.min(gap);
                    if gap < 0.0 {
                        violations += 1;
                    }
                }
            }
        }
    }
    let mut rep = CertificationReport::new();
    rep.push(
        CheckRecord::new(
            "lemma.c.jensen",
            ANCHOR_JENSEN,
            min_gap,
            Status::from_pass(violations == 0),
        )
        .param("model", &model.label)
        .param_f64("a", a)
        .param("evaluations", evaluated)
        .value(violations as f64)
        .witness("min_gap", min_gap),
    );
    let mut min_entry = f64::INFINITY;
    let mut row_err = 0.0f64;
    for &t in &s.times {
        let k = model.markov_heat_kernel(t)?;
        min_entry = min_entry.min(k.min());
        for row in k.row_iter() {
            row_err = row_err.max((row.sum() - 1.0).abs());
        }
    }
    rep.push(
        CheckRecord::new(
            "lemma.c.markov_kernel",
            ANCHOR_MARKOV,
            min_entry,
            // repeated squaring accumulates roundoff in the row sums
            Status::from_pass(min_entry >= 0.0 && row_err <= 1e-10),
        )
        .param("model", &model.label)
        .value(min_entry)
        .witness("row_sum_error", row_err),
    );
    Ok(rep)
}

/// Violations of lemmas (d) and (e) on one circle: `(d, [e for each r])`,
/// relative to `max |w|`.
pub fn domination_violations(
    model: &ModelOperator,
    a: f64,
    w: &FormField,
    times: &[f64],
    exponents: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let scale = w.values.amax().max(f64::MIN_POSITIVE);
    let abs_w = Field::new(node_average(model, &w.values).abs());
    let mut dom = 0.0f64;
    let mut jensen = vec![0.0f64; exponents.len()];
    for &t in times {
        let lhs = node_average(model, &model.heat(t, w)?.values).abs();
        let rhs = model.heat(t, &abs_w)?.values * (t * a * a).exp();
        dom = dom.max((&lhs - &rhs).max() / scale);
        let pw = node_average(model, &model.poisson(a, t, w)?.values).abs();
        for (k, &r) in exponents.iter().enumerate() {
            let lhs = pw.map(|x| x.powf(r));
            let rhs = model
                .poisson(0.0, t, &Field::new(abs_w.values.map(|x| x.powf(r))))?
                .values;
            jensen[k] = jensen[k].max((&lhs - &rhs).max() / scale.powf(r));
        }
    }
    Ok((
        dom.max(0.0),
        jensen.into_iter().map(|v| v.max(0.0)).collect(),
    ))
}

/// Smooth test form used by the refinement studies.
pub fn reference_form(theta: f64) -> f64 {
    theta.sin() + 0.5 * (2.0 * theta).cos() + 0.3
}

fn refinement_record(
    id: &str,
    anchor: &str,
    ns: &[usize],
    v: &[f64],
    s: &LemmaSettings,
    label: &str,
) -> CheckRecord {
    let finest = *v.last().unwrap_or(&0.0);
    let (status, order, note) = if v.iter().all(|&x| x <= s.exact_tol) {
        (
            Status::Pass,
            f64::NAN,
            "no violations at any resolution".to_string(),
        )
    } else {
        match observed_order(ns, v) {
            Some(o) if o >= s.order_target => {
                (Status::Pass, o, format!("violations decay at order {o:.3}"))
            }
            Some(o) => (
                if s.strict { Status::Fail } else { Status::Pass },
                o,
                format!("observed order {o:.3} below target {}", s.order_target),
            ),
            None => (
                if s.strict { Status::Fail } else { Status::Pass },
                f64::NAN,
                "violations vanish only on part of the refinement".to_string(),
            ),
        }
    };
    let mut r = CheckRecord::new(id, anchor, -finest, status)
        .param("model", label)
        .param("grids", format!("{ns:?}"))
        .value(order)
        .note(note);
    for (n, x) in ns.iter().zip(v) {
        r = r.witness(&format!("violation_N{n}"), *x);
    }
    r
}

/// Lemmas (d) and (e) under grid refinement for the weight `phi`.
pub fn domination_refinement(
    phi: &PhiSpec,
    a: f64,
    s: &LemmaSettings,
) -> Result<CertificationReport> {
    let times = [0.1, 0.5, 1.0, 2.0];
    let exps = [1.0, 2.0];
    let mut dom = Vec::new();
    let mut jen: Vec<Vec<f64>> = vec![Vec::new(); exps.len()];
    for &n in &s.refinement {
        let m = build_circle_model(n, phi)?;
        if a < m.a_min_bare - 1e-12 {
            return Err(Error::Domain(format!(
                "shift a = {a} is below the curvature bound {}",
                m.a_min_bare
            )));
        }
        let w = form_from_fn(&m, reference_form)?;
        let (d, e) = domination_violations(&m, a, &w, &times, &exps)?;
        dom.push(d);
        for (k, v) in e.into_iter().enumerate() {
            jen[k].push(v);
        }
    }
    let label = format!("circle[phi={}]", phi.name());
    let mut rep = CertificationReport::new();
    rep.push(
        refinement_record(
            "lemma.d.domination",
            ANCHOR_DOMINATION,
            &s.refinement,
            &dom,
            s,
            &label,
        )
        .param_f64("a", a),
    );
    for (k, r) in exps.iter().enumerate() {
        rep.push(
            refinement_record(
                &format!("lemma.e.r{r}"),
                ANCHOR_FORM_JENSEN,
                &s.refinement,
                &jen[k],
                s,
                &label,
            )
            .param_f64("a", a),
        );
    }
    Ok(rep)
}

/// Lemma checks (a)-(e). (c)-(e) are run on circle models only.
pub fn lemma_suite(
    model: &ModelOperator,
    a: f64,
    s: &LemmaSettings,
) -> Result<CertificationReport> {
    let mut rep = CertificationReport::new();
    let res = model.intertwining_residual();
    rep.push(
        CheckRecord::new(
            "lemma.a.intertwining",
            ANCHOR_INTERTWINING,
            s.exact_tol - res,
            Status::from_pass(res <= s.exact_tol),
        )
        .param("model", &model.label)
        .value(res),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut worst = 0.0f64;
    for &t in &s.times {
        let f = random_field(model, 8, &mut rng);
        let lhs = model.gradient(&model.poisson(a, t, &f)?)?;
        let rhs = model.poisson(a, t, &model.gradient(&f)?)?;
        worst = worst.max(
            (&lhs.values - &rhs.values).amax()
                / model.gradient(&f)?.values.amax().max(f64::MIN_POSITIVE),
        );
    }
    // the two sides use different eigendecompositions, so roundoff is amplified by |L|
    let tol_b = 1e-10;
    rep.push(
        CheckRecord::new(
            "lemma.b.commutation",
            ANCHOR_COMMUTE,
            tol_b - worst,
            Status::from_pass(worst <= tol_b),
        )
        .param("model", &model.label)
        .param_f64("a", a)
        .value(worst),
    );
    if let (true, Some(phi)) = (model.is_circle(), &model.phi_spec) {
        rep.extend(positivity(model, a, s)?);
        rep.extend(domination_refinement(phi, a, s)?);
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BochnerResult {
    pub max_residual: f64,
    /// Largest term of the identity, for scale.
    pub scale: f64,
}

/// Both sides of the Bochner identity at the circle nodes, with the form
/// averaged to nodes and its derivative taken across each node.
pub fn bochner_check(model: &ModelOperator, w: &FormField) -> Result<BochnerResult> {
    let h = model
        .h
        .ok_or_else(|| Error::Model("the Bochner check runs on circle models".into()))?;
    let n = model.n_scalar();
    let wv = &w.values;
    let wbar = node_average(model, wv);
    let sq = Field::new(wbar.component_mul(&wbar));
    let lhs = (&model.l_scalar * &sq.values) * -0.5;
    let lw = node_average(model, &(&model.l_form * wv));
    let mut max_residual = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n {
        let grad = (wv[i] - wv[(i + n - 1) % n]) / h;
        let terms = [
            grad * grad,
            lw[i] * wbar[i],
            model.ric[i] * wbar[i] * wbar[i],
        ];
        let rhs = terms[0] - terms[1] + terms[2];
        max_residual = max_residual.max((lhs[i] - rhs).abs());
        scale = scale.max(terms.iter().fold(lhs[i].abs(), |m, t| m.max(t.abs())));
    }
    Ok(BochnerResult {
        max_residual,
        scale,
    })
}

/// Bochner residual for `g(theta) d theta` under refinement; the order is
/// expected to be at least 1.
pub fn bochner_refinement(
    phi: &PhiSpec,
    g: impl Fn(f64) -> f64,
    s: &LemmaSettings,
) -> Result<CheckRecord> {
    let mut res = Vec::new();
    for &n in &s.refinement {
        let m = build_circle_model(n, phi)?;
        res.push(bochner_check(&m, &form_from_fn(&m, &g)?)?.max_residual);
    }
    let target = LemmaSettings {
        order_target: 1.0,
        ..s.clone()
    };
    Ok(refinement_record(
        "bochner.residual",
        ANCHOR_BOCHNER,
        &s.refinement,
        &res,
        &target,
        &format!("circle[phi={}]", phi.name()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_ou_model;

    #[test]
    fn order_fit() {
        let ns = [64, 128, 256];
        let v: Vec<f64> = ns.iter().map(|&n| 3.0 / (n as f64).powi(2)).collect();
        assert!((observed_order(&ns, &v).unwrap() - 2.0).abs() < 1e-12);
        assert!(observed_order(&ns, &[1.0, 0.0, 1.0]).is_none());
    }

    #[test]
    fn structure_is_exact() {
        for m in [
            build_circle_model(64, &PhiSpec::Cos { amplitude: 1.0 }).unwrap(),
            build_ou_model(1, 32).unwrap(),
        ] {
            assert!(structural_checks(&m, 1e-12).passed());
        }
    }

    #[test]
    fn subordination_agrees() {
        let m = build_circle_model(64, &PhiSpec::Cos { amplitude: 1.0 }).unwrap();
        let r = subordination_check(
            &m,
            &SubordinationRule::default(),
            1.0,
            &[0.1, 1.0, 5.0],
            3,
            0,
            1e-8,
        )
        .unwrap();
        assert!(r.passed(), "{:?}", r.checks);
    }

    #[test]
    fn positivity_has_no_violations() {
        let m = build_circle_model(64, &PhiSpec::Cos { amplitude: 1.0 }).unwrap();
        let s = LemmaSettings {
            samples: 4,
            refinement: vec![32, 64],
            ..Default::default()
        };
        let r = lemma_suite(&m, 1.0, &s).unwrap();
        let c = r.get("lemma.c.jensen").unwrap();
        assert_eq!(c.value, Some(0.0));
        // one-signed data at r = 1 gives an exact zero gap
        assert!(c.margin >= 0.0, "{c:?}");
        assert!(
            r.get("lemma.c.markov_kernel").unwrap().passed(),
            "{:?}",
            r.get("lemma.c.markov_kernel")
        );
        assert!(r.get("lemma.a.intertwining").unwrap().passed());
        assert!(
            r.get("lemma.b.commutation").unwrap().passed(),
            "{:?}",
            r.get("lemma.b.commutation")
        );
    }

    #[test]
    fn bochner_examples() {
        let m = build_circle_model(64, &PhiSpec::Zero).unwrap();
        let c = form_from_fn(&m, |_| 2.0).unwrap();
        let r = bochner_check(&m, &c).unwrap();
        assert!(r.max_residual < 1e-12);
        let s = LemmaSettings::default();
        for phi in [PhiSpec::Zero, PhiSpec::Cos { amplitude: 1.0 }] {
            let rec = bochner_refinement(&phi, f64::sin, &s).unwrap();
            assert!(rec.value.unwrap() >= 1.0, "{rec:?}");
        }
    }

    #[test]
    fn domination_detects_an_inadmissible_shift() {
        let m = build_circle_model(128, &PhiSpec::Cos { amplitude: 1.0 }).unwrap();
        let w = form_from_fn(&m, reference_form).unwrap();
        let (d, _) = domination_violations(&m, 0.0, &w, &[0.5, 1.0, 2.0], &[1.0]).unwrap();
        assert!(d > 1e-2, "{d}");
        let (d1, e1) = domination_violations(&m, 1.0, &w, &[0.5, 1.0, 2.0], &[1.0]).unwrap();
        assert_eq!((d1, e1[0]), (0.0, 0.0));
    }

    #[test]
    fn domination_study() {
        let s = LemmaSettings::default();
        let s = LemmaSettings { strict: true, ..s };
        let r = domination_refinement(&PhiSpec::Cos { amplitude: 1.0 }, 1.0, &s).unwrap();
        assert!(r.passed());
    }
}

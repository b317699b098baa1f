//! Configuration-driven certification campaigns.
//!
//! A campaign is a list of independent cells (a model, an exponent, a
//! mollifier width) evaluated as a parallel map. Cell reports are merged in
//! cell order, so identical configurations give identical reports.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bellman::{
    certify_derivative_bounds, certify_hessian_bound, certify_size_bound, BellmanParams,
    DerivativeBoundSettings, HessianBoundSettings, SizeBoundSettings, TauSearch, TauTable,
};
use crate::error::{Error, Result};
use crate::models::{ModelConfig, ModelOperator, PhiSpec, SubordinationRule};
use crate::mollify::{
    certify_regular_properties, holder_product_check, HolderSettings, MollifiedBellman,
    MollifierSpec, RegularSettings,
};
use crate::report::{write_plot_csv, CertificationReport, CheckRecord, Status};
use crate::verify::{
    bilinear_embedding, bochner_refinement, constant_audit, constant_function, duality_identity,
    field_from_fn, form_from_fn, lemma_suite, proposition_spot_check, random_field, random_form,
    riesz_norm_search, structural_checks, subordination_check, AscentSettings, LemmaSettings,
    SpotCheckSettings, TimeQuadrature, Tolerances, ANCHOR_DUALITY, ANCHOR_EMBEDDING,
};

/// Exit code of a run whose configuration could not be parsed or validated.
pub const EXIT_SCHEMA: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Campaign {
    CertifyBellman,
    MollifyCheck,
    SemigroupProps,
    Embedding,
    RieszNorm,
    ConstantAudit,
    All,
}

impl Campaign {
    pub const EACH: [Campaign; 6] = [
        Campaign::CertifyBellman,
        Campaign::MollifyCheck,
        Campaign::SemigroupProps,
        Campaign::Embedding,
        Campaign::RieszNorm,
        Campaign::ConstantAudit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Campaign::CertifyBellman => "certify-bellman",
            Campaign::MollifyCheck => "mollify-check",
            Campaign::SemigroupProps => "semigroup-props",
            Campaign::Embedding => "embedding",
            Campaign::RieszNorm => "riesz-norm",
            Campaign::ConstantAudit => "constant-audit",
            Campaign::All => "all",
        }
    }
}

impl fmt::Display for Campaign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Campaign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Campaign::EACH
            .into_iter()
            .chain([Campaign::All])
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown campaign {s:?}")))
    }
}

/// Work budgets. `samples` counts random data pairs per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub samples: usize,
    pub ascent_iters: usize,
    /// Gauss-Legendre nodes per panel of the time quadrature.
    pub time_nodes: usize,
    pub bellman_points: usize,
    pub hessian_points: usize,
    pub mollify_points: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            samples: 50,
            ascent_iters: 200,
            time_nodes: 8,
            bellman_points: 100_000,
            hessian_points: 10_000,
            mollify_points: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub seed: u64,
    pub p_list: Vec<f64>,
    pub models: Vec<ModelConfig>,
    pub kappa_list: Vec<f64>,
    pub tolerances: Tolerances,
    pub budgets: Budgets,
    pub outputs: PathBuf,
    /// Refinement-order shortfalls fail instead of being noted.
    pub strict: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            p_list: vec![2.0, 3.0, 5.0, 10.0],
            models: vec![
                ModelConfig::circle(128, PhiSpec::Zero),
                ModelConfig::circle(128, PhiSpec::Cos { amplitude: 1.0 }),
                ModelConfig::ou(1, 32),
                ModelConfig::ou(2, 12),
            ],
            kappa_list: vec![0.2, 0.1, 0.05],
            tolerances: Tolerances::default(),
            budgets: Budgets::default(),
            outputs: PathBuf::from("bellcert-out"),
            strict: false,
        }
    }
}

impl CampaignConfig {
    /// Parses and validates a JSON configuration; absent fields take defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.p_list.is_empty() {
            return bad("p_list must not be empty".into());
        }
        if let Some(p) = self.p_list.iter().find(|p| !(**p > 1.0 && p.is_finite())) {
            return bad(format!("p_list entries must lie in (1, inf), got {p}"));
        }
        if self.models.is_empty() {
            return bad("models must not be empty".into());
        }
        if let Some(k) = self.kappa_list.iter().find(|k| !(**k > 0.0 && **k < 1.0)) {
            return bad(format!("kappa_list entries must lie in (0, 1), got {k}"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("assert_tol", t.assert_tol),
            ("exact_tol", t.exact_tol),
            ("rel_tol", t.rel_tol),
            ("trunc_frac", t.trunc_frac),
            ("quad_tol", t.quad_tol),
            ("fit_tol", t.fit_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("tolerance {name} must be positive, got {v}"));
            }
        }
        let b = &self.budgets;
        for (name, v) in [
            ("samples", b.samples),
            ("ascent_iters", b.ascent_iters),
            ("time_nodes", b.time_nodes),
            ("bellman_points", b.bellman_points),
            ("hessian_points", b.hessian_points),
            ("mollify_points", b.mollify_points),
        ] {
            if v == 0 {
                return bad(format!("budget {name} must be positive"));
            }
        }
        Ok(())
    }

    fn build_models(&self) -> Result<Vec<ModelOperator>> {
        self.models
            .par_iter()
            .map(|m| m.build().map_err(|e| Error::Config(e.to_string())))
            .collect()
    }

    fn lemma_settings(&self, seed: u64) -> LemmaSettings {
        LemmaSettings {
            seed,
            strict: self.strict,
            exact_tol: self.tolerances.exact_tol,
            ..Default::default()
        }
    }
}

/// A plot-data table written to `plotdata/<name>.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotData {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotData {
    fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CampaignOutcome {
    pub report: CertificationReport,
    pub plots: Vec<PlotData>,
}

impl CampaignOutcome {
    fn merge(mut self, other: CampaignOutcome) -> Self {
        self.report.extend(other.report);
        self.plots.extend(other.plots);
        self
    }

    /// 0 when every check passes, 1 on any failure, 3 when some check is
    /// inconclusive and none failed.
    pub fn exit_code(&self) -> i32 {
        match self.report.status() {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Inconclusive => 3,
        }
    }

    /// Writes `report.csv`, `report.json` and `plotdata/*.csv` under `dir`,
    /// creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("plotdata"))?;
        self.report.write_csv(&dir.join("report.csv"))?;
        self.report.write_json(&dir.join("report.json"))?;
        for plot in &self.plots {
            let header: Vec<&str> = plot.header.iter().map(String::as_str).collect();
            write_plot_csv(
                &dir.join("plotdata").join(format!("{}.csv", plot.name)),
                &header,
                &plot.rows,
            )?;
        }
        Ok(())
    }
}

/// Validates `config` and runs `campaign`. Failures inside a cell become
/// failing records; only configuration problems are returned as errors.
pub fn run(campaign: Campaign, config: &CampaignConfig) -> Result<CampaignOutcome> {
    config.validate()?;
    match campaign {
        Campaign::CertifyBellman => Ok(certify_bellman(config)),
        Campaign::MollifyCheck => Ok(mollify_check(config)),
        Campaign::SemigroupProps => semigroup_props(config),
        Campaign::Embedding => embedding(config),
        Campaign::RieszNorm => riesz_norm(config),
        Campaign::ConstantAudit => Ok(constant(config)),
        Campaign::All => Campaign::EACH
            .into_iter()
            .try_fold(CampaignOutcome::default(), |acc, c| {
                Ok(acc.merge(run(c, config)?))
            }),
    }
}

fn cell_seed(base: u64, cell: usize) -> u64 {
    base.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(cell as u64 + 1))
}

/// Turns a cell error into a failing record so the rest of the campaign still reports.
fn settle(
    id: &str,
    anchor: &str,
    context: &str,
    r: Result<CertificationReport>,
) -> CertificationReport {
    r.unwrap_or_else(|e| {
        let mut rep = CertificationReport::new();
        rep.push(
            CheckRecord::new(id, anchor, f64::NAN, Status::Fail)
                .param("cell", context)
                .note(format!("error: {e}")),
        );
        rep
    })
}

fn concat(parts: Vec<CertificationReport>) -> CertificationReport {
    parts
        .into_iter()
        .fold(CertificationReport::new(), CertificationReport::merge)
}

/// Exponents below 2 run with the conjugate exponent on the Bellman side.
fn bellman_params(p: f64) -> Result<BellmanParams<f64>> {
    BellmanParams::for_exponent(p)
}

fn tag_exponent(mut rep: CertificationReport, p: f64) -> CertificationReport {
    if p < 2.0 {
        for r in &mut rep.checks {
            r.params.insert("input_p".into(), crate::report::fmt_f64(p));
            r.note.get_or_insert_with(|| {
                "p < 2: Bellman side uses the conjugate exponent with scalar and form interchanged".into()
            });
        }
    }
    rep
}

fn certify_bellman(cfg: &CampaignConfig) -> CampaignOutcome {
    let b = &cfg.budgets;
    let t = &cfg.tolerances;
    let parts: Vec<CertificationReport> = cfg
        .p_list
        .par_iter()
        .enumerate()
        .map(|(k, &p)| {
            let seed = cell_seed(cfg.seed, k);
            let rep = bellman_params(p).map(|params| {
                let mut rep = certify_size_bound(
                    &params,
                    &SizeBoundSettings {
                        samples: b.bellman_points,
                        seed,
                        assert_tol: t.exact_tol,
                        ..Default::default()
                    },
                );
                rep.extend(
                    certify_hessian_bound(
                        &params,
                        &HessianBoundSettings {
                            samples_per_region: b.hessian_points,
                            seed,
                            assert_tol: t.assert_tol,
                            ..Default::default()
                        },
                    )
                    .report,
                );
                rep.extend(certify_derivative_bounds(
                    &params,
                    &DerivativeBoundSettings {
                        seed,
                        fit_tol: t.fit_tol,
                        ..Default::default()
                    },
                ));
                rep
            });
            let ctx = format!("p={p}");
            tag_exponent(settle("bellman", "bellman certification", &ctx, rep), p)
        })
        .collect();
    let mut plot = PlotData::new("bellman_constants", &["p", "c_u", "c_v"]);
    for (&p, rep) in cfg.p_list.iter().zip(&parts) {
        let value = |id: &str| rep.get(id).and_then(|r| r.value).unwrap_or(f64::NAN);
        plot.rows.push(vec![
            p,
            value("bellman.derivative.c_u"),
            value("bellman.derivative.c_v"),
        ]);
    }
    CampaignOutcome {
        report: concat(parts),
        plots: vec![plot],
    }
}

fn mollify_check(cfg: &CampaignConfig) -> CampaignOutcome {
    let t = &cfg.tolerances;
    let cells: Vec<(f64, f64)> = cfg
        .kappa_list
        .iter()
        .flat_map(|&k| cfg.p_list.iter().map(move |&p| (k, p)))
        .collect();
    let parts: Vec<CertificationReport> = cells
        .par_iter()
        .enumerate()
        .map(|(i, &(kappa, p))| {
            let seed = cell_seed(cfg.seed, i);
            let rep = (|| {
                let params = bellman_params(p)?;
                let spec = MollifierSpec::adaptive(1, kappa, t.quad_tol)?;
                let m = MollifiedBellman::new(spec.clone(), params);
                let mut rep = certify_regular_properties(
                    &m,
                    &RegularSettings {
                        samples: cfg.budgets.mollify_points,
                        seed,
                        assert_tol: t.assert_tol,
                        fit_tol: t.fit_tol,
                        ..Default::default()
                    },
                );
                let table = TauTable::build(&params, 2.5, 2.5, 50, 50, &TauSearch::default())?;
                rep.extend(holder_product_check(
                    &spec,
                    &table,
                    &HolderSettings {
                        seed,
                        assert_tol: t.assert_tol,
                        ..Default::default()
                    },
                )?);
                for r in &mut rep.checks {
                    r.params
                        .insert("mollifier_nodes".into(), spec.nodes.to_string());
                }
                Ok(rep)
            })();
            let ctx = format!("kappa={kappa}, p={p}");
            tag_exponent(settle("mollify", "mollified certification", &ctx, rep), p)
        })
        .collect();
    CampaignOutcome {
        report: concat(parts),
        plots: Vec::new(),
    }
}

/// Shift used for the lemma checks: 1 on circles (or the bare curvature
/// bound if larger), 0 on OU.
fn lemma_shift(m: &ModelOperator) -> f64 {
    if m.is_circle() {
        m.a_min_bare.max(1.0)
    } else {
        0.0
    }
}

fn semigroup_props(cfg: &CampaignConfig) -> Result<CampaignOutcome> {
    let models = cfg.build_models()?;
    let t = &cfg.tolerances;
    let parts: Vec<CertificationReport> = models
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let seed = cell_seed(cfg.seed, i);
            let a = lemma_shift(m);
            let rep = (|| {
                let mut rep = structural_checks(m, t.exact_tol);
                rep.extend(subordination_check(
                    m,
                    &SubordinationRule::default(),
                    a,
                    &[0.1, 1.0, 10.0],
                    (cfg.budgets.samples / 10).max(1),
                    seed,
                    t.quad_tol,
                )?);
                let settings = cfg.lemma_settings(seed);
                rep.extend(lemma_suite(m, a, &settings)?);
                if let (true, Some(phi)) = (m.is_circle(), &m.phi_spec) {
                    rep.push(bochner_refinement(phi, f64::sin, &settings)?);
                }
                Ok(rep)
            })();
            settle("semigroup", "semigroup properties", &m.label, rep)
        })
        .collect();
    Ok(CampaignOutcome {
        report: concat(parts),
        plots: Vec::new(),
    })
}

fn time_quadrature(cfg: &CampaignConfig, m: &ModelOperator, a: f64) -> TimeQuadrature {
    TimeQuadrature {
        nodes_per_panel: cfg.budgets.time_nodes,
        ..TimeQuadrature::for_decay(a, m.lambda_1())
    }
}

/// Worst status: any failure fails, otherwise any inconclusive is inconclusive.
fn worst(a: Status, b: Status) -> Status {
    match (a, b) {
        (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
        (Status::Inconclusive, _) | (_, Status::Inconclusive) => Status::Inconclusive,
        _ => Status::Pass,
    }
}

/// `samples` random pairs at `a = a_min`, summarised by the largest ratio.
fn embedding_cell(
    cfg: &CampaignConfig,
    m: &ModelOperator,
    p: f64,
    seed: u64,
) -> Result<(CertificationReport, f64)> {
    let a = m.a_min;
    let tq = time_quadrature(cfg, m, a);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut status = Status::Pass;
    let mut max_ratio = 0.0f64;
    let mut max_trunc = 0.0f64;
    let mut arg = 0usize;
    for k in 0..cfg.budgets.samples {
        let f = random_field(m, 6, &mut rng);
        let w = random_form(m, 6, &mut rng);
        let r = bilinear_embedding(m, a, p, &f, &w, &tq, &cfg.tolerances)?;
        status = worst(status, r.status);
        max_trunc = max_trunc.max(r.truncation_estimate / r.lhs.max(f64::MIN_POSITIVE));
        if r.ratio > max_ratio {
            max_ratio = r.ratio;
            arg = k;
        }
    }
    let mut rep = CertificationReport::new();
    rep.push(
        CheckRecord::new(
            "verify.embedding.random",
            ANCHOR_EMBEDDING,
            1.0 - max_ratio,
            status,
        )
        .param("model", &m.label)
        .param_f64("p", p)
        .param_f64("a", a)
        .param("pairs", cfg.budgets.samples)
        .value(max_ratio)
        .witness("pair", arg as f64)
        .witness("max_relative_truncation", max_trunc),
    );
    if m.is_circle() && m.phi_spec == Some(PhiSpec::Zero) {
        let f = field_from_fn(m, f64::cos)?;
        let w = form_from_fn(m, f64::sin)?;
        let a1 = a.max(1.0);
        let r = bilinear_embedding(
            m,
            a1,
            p,
            &f,
            &w,
            &time_quadrature(cfg, m, a1),
            &cfg.tolerances,
        )?;
        rep.push(r.record("verify.embedding.worked"));
    }
    if m.is_circle() {
        let f = field_from_fn(m, |x| x.cos() + 0.3 * (2.0 * x).sin())?;
        let w = form_from_fn(m, |x| x.sin() + 0.2)?;
        let s = SpotCheckSettings::default();
        rep.push(proposition_spot_check(m, a, p, &f, &w, &s)?.record(
            "verify.proposition",
            &m.label,
            a,
            p,
        ));
    }
    Ok((rep, max_ratio))
}

/// Duality on random pairs, the single-mode closed form on the flat circle,
/// and `|<R_a f, w>| <= 4 * LHS` for the same pairs.
fn duality_cell(cfg: &CampaignConfig, m: &ModelOperator, seed: u64) -> Result<CertificationReport> {
    let a = if m.is_circle() { m.a_min.max(1.0) } else { 0.0 };
    let tq = time_quadrature(cfg, m, a);
    let t = &cfg.tolerances;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_rel, mut worst_bound, mut trunc) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..cfg.budgets.samples {
        let mut f = random_field(m, 6, &mut rng);
        if a == 0.0 {
            f = m.project_out_null(&f);
        }
        let w = random_form(m, 6, &mut rng);
        let d = duality_identity(m, a, &f, &w, &tq)?;
        worst_rel = worst_rel.max(d.rel_err);
        trunc = trunc.max(d.truncation_estimate);
        let e = bilinear_embedding(m, a, 2.0, &f, &w, &tq, t)?;
        if e.lhs > 0.0 {
            worst_bound = worst_bound.max(d.lhs.abs() / (4.0 * e.lhs));
        }
    }
    let mut rep = CertificationReport::new();
    rep.push(
        CheckRecord::new(
            "verify.duality.random",
            ANCHOR_DUALITY,
            t.rel_tol - worst_rel,
            Status::from_pass(worst_rel <= t.rel_tol),
        )
        .param("model", &m.label)
        .param_f64("a", a)
        .param("pairs", cfg.budgets.samples)
        .value(worst_rel)
        .witness("truncation_estimate", trunc),
    );
    rep.push(
        CheckRecord::new(
            "verify.duality.bound",
            "duality bound: |<R_a f, w>| <= 4 int_0^inf int_M |grad P_t f||grad P_t w| dmu t dt",
            1.0 - worst_bound,
            Status::from_pass(worst_bound <= 1.0 + t.assert_tol),
        )
        .param("model", &m.label)
        .param_f64("a", a)
        .value(worst_bound),
    );
    if m.is_circle() && m.phi_spec == Some(PhiSpec::Zero) && a == 1.0 {
        let f = field_from_fn(m, f64::cos)?;
        let w = form_from_fn(m, f64::sin)?;
        let d = duality_identity(m, a, &f, &w, &tq)?;
        // sin sampled at edge midpoints is an exact eigenform of the discrete model
        let l1 = m.lambda_1();
        let exact = PI * (l1 / (1.0 + l1)).sqrt();
        let err = (d.rhs.abs() - exact).abs() / exact;
        let tol = 1e-6;
        rep.push(
            d.record("verify.duality.single_mode", &m.label, a, tol)
                .value(d.rhs.abs())
                .witness("discrete_closed_form", exact)
                .witness("continuum_value", PI / 2f64.sqrt())
                .witness("rel_err_closed_form", err)
                .param_f64("closed_form_tol", tol),
        );
        let last = rep.checks.last_mut().expect("just pushed");
        if err > tol {
            last.status = Status::Fail;
            last.margin = last.margin.min(tol - err);
        }
    }
    Ok(rep)
}

fn embedding(cfg: &CampaignConfig) -> Result<CampaignOutcome> {
    let models = cfg.build_models()?;
    let cells: Vec<(usize, f64)> = (0..models.len())
        .flat_map(|i| cfg.p_list.iter().map(move |&p| (i, p)))
        .collect();
    let results: Vec<(CertificationReport, f64)> = cells
        .par_iter()
        .enumerate()
        .map(|(c, &(i, p))| {
            let m = &models[i];
            match embedding_cell(cfg, m, p, cell_seed(cfg.seed, c)) {
                Ok((rep, ratio)) => (tag_exponent(rep, p), ratio),
                Err(e) => {
                    let ctx = format!("{}, p={p}", m.label);
                    (
                        settle("verify.embedding", ANCHOR_EMBEDDING, &ctx, Err(e)),
                        f64::NAN,
                    )
                }
            }
        })
        .collect();
    let duality: Vec<CertificationReport> = models
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let seed = cell_seed(cfg.seed, cells.len() + i);
            settle(
                "verify.duality",
                ANCHOR_DUALITY,
                &m.label,
                duality_cell(cfg, m, seed),
            )
        })
        .collect();
    let mut plot = PlotData::new("embedding_ratio", &["model", "p", "max_ratio"]);
    for (&(i, p), (_, ratio)) in cells.iter().zip(&results) {
        plot.rows.push(vec![i as f64, p, *ratio]);
    }
    let mut report = concat(results.into_iter().map(|r| r.0).collect());
    report.extend(concat(duality));
    Ok(CampaignOutcome {
        report,
        plots: vec![plot],
    })
}

fn riesz_norm(cfg: &CampaignConfig) -> Result<CampaignOutcome> {
    let models = cfg.build_models()?;
    let cells: Vec<(usize, f64)> = (0..models.len())
        .flat_map(|i| cfg.p_list.iter().map(move |&p| (i, p)))
        .collect();
    let results: Vec<Result<crate::verify::RieszSearchResult>> = cells
        .par_iter()
        .enumerate()
        .map(|(c, &(i, p))| {
            let m = &models[i];
            let settings = AscentSettings {
                iterations: cfg.budgets.ascent_iters,
                seed: cell_seed(cfg.seed, c),
                ..Default::default()
            };
            riesz_norm_search(m, m.a_min, p, &settings)
        })
        .collect();
    let mut report = CertificationReport::new();
    let mut plot = PlotData::new("riesz_norm", &["model", "p", "empirical_norm", "ceiling"]);
    for (&(i, p), r) in cells.iter().zip(results) {
        let ctx = format!("{}, p={p}", models[i].label);
        match r {
            Ok(r) => {
                plot.rows
                    .push(vec![i as f64, p, r.empirical_norm, r.ceiling]);
                report.push(r.record("verify.riesz"));
            }
            Err(e) => report.extend(settle(
                "verify.riesz",
                crate::verify::ANCHOR_RIESZ,
                &ctx,
                Err(e),
            )),
        }
    }
    Ok(CampaignOutcome {
        report,
        plots: vec![plot],
    })
}

fn constant(_cfg: &CampaignConfig) -> CampaignOutcome {
    let mut plot = PlotData::new("constant_function", &["s", "g"]);
    for k in 1..=400 {
        let s = k as f64 / 400.0;
        plot.rows.push(vec![s, constant_function(s)]);
    }
    CampaignOutcome {
        report: constant_audit(),
        plots: vec![plot],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CampaignConfig {
        CampaignConfig {
            p_list: vec![1.5, 3.0],
            models: vec![
                ModelConfig::circle(32, PhiSpec::Zero),
                ModelConfig::ou(1, 12),
            ],
            kappa_list: vec![0.2],
            budgets: Budgets {
                samples: 3,
                ascent_iters: 20,
                bellman_points: 500,
                hessian_points: 50,
                mollify_points: 8,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn config_parsing_and_validation() {
        let cfg = CampaignConfig::from_json("{}").unwrap();
        assert_eq!(cfg, CampaignConfig::default());
        let cfg = CampaignConfig::from_json(
            r#"{"seed": 7, "p_list": [2], "models": [{"kind": "circle", "N": 64, "phi": {"type": "cos"}}],
                "tolerances": {"rel_tol": 1e-6}, "budgets": {"samples": 4}}"#,
        )
        .unwrap();
        assert_eq!(
            (cfg.seed, cfg.budgets.samples, cfg.tolerances.rel_tol),
            (7, 4, 1e-6)
        );
        assert_eq!(cfg.tolerances.assert_tol, Tolerances::default().assert_tol);
        for bad in [
            r#"{"p_list": []}"#,
            r#"{"p_list": [1.0]}"#,
            r#"{"kappa_list": [1.5]}"#,
            r#"{"tolerances": {"rel_tol": 0}}"#,
            r#"{"budgets": {"samples": 0}}"#,
            r#"{"models": []}"#,
            r#"{"unknown": 1}"#,
            r#"{"p_list": "2"}"#,
        ] {
            assert!(
                matches!(CampaignConfig::from_json(bad), Err(Error::Config(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn campaign_names_round_trip() {
        for c in Campaign::EACH.into_iter().chain([Campaign::All]) {
            assert_eq!(c.name().parse::<Campaign>().unwrap(), c);
        }
        assert!("bogus".parse::<Campaign>().is_err());
    }

    #[test]
    fn unbuildable_models_are_configuration_errors() {
        let cfg = CampaignConfig {
            models: vec![ModelConfig::ou(3, 8)],
            ..small()
        };
        assert!(matches!(
            run(Campaign::Embedding, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn small_campaigns_pass_and_are_deterministic() {
        let cfg = small();
        for c in [
            Campaign::Embedding,
            Campaign::RieszNorm,
            Campaign::CertifyBellman,
        ] {
            let a = run(c, &cfg).unwrap();
            assert_eq!(
                a.exit_code(),
                0,
                "{c}: {:?}",
                a.report.failures().collect::<Vec<_>>()
            );
            let b = run(c, &cfg).unwrap();
            assert_eq!(a.report.to_json().unwrap(), b.report.to_json().unwrap());
        }
        let other = run(
            Campaign::Embedding,
            &CampaignConfig {
                seed: 1,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_ne!(
            other.report.to_json().unwrap(),
            run(Campaign::Embedding, &cfg)
                .unwrap()
                .report
                .to_json()
                .unwrap()
        );
    }

    #[test]
    fn conjugate_exponents_are_tagged() {
        let out = run(Campaign::CertifyBellman, &small()).unwrap();
        let tagged: Vec<_> = out
            .report
            .checks
            .iter()
            .filter(|r| r.params.contains_key("input_p"))
            .collect();
        assert!(!tagged.is_empty());
        assert!(tagged.iter().all(|r| r.params["p"].starts_with("3.0")));
    }

    #[test]
    fn outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(Campaign::ConstantAudit, &small()).unwrap();
        let target = dir.path().join("nested/out");
        out.write(&target).unwrap();
        for f in [
            "report.csv",
            "report.json",
            "plotdata/constant_function.csv",
        ] {
            assert!(target.join(f).is_file(), "{f}");
        }
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(target.join("report.json")).unwrap()).unwrap();
        assert_eq!(json["checks"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn exit_codes_follow_the_worst_status() {
        let mut out = CampaignOutcome::default();
        assert_eq!(out.exit_code(), 0);
        out.report
            .push(CheckRecord::new("x", "a", 1.0, Status::Inconclusive));
        assert_eq!(out.exit_code(), 3);
        out.report
            .push(CheckRecord::new("y", "a", -1.0, Status::Fail));
        assert_eq!(out.exit_code(), 1);
    }

    #[test]
    fn cell_errors_become_failures() {
        let rep = settle("cell", "anchor", "ctx", Err(Error::Domain("boom".into())));
        assert_eq!(rep.status(), Status::Fail);
        assert!(rep.checks[0].note.as_deref().unwrap().contains("boom"));
    }
}

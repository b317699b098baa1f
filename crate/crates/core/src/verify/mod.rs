//! Numerical verification of the embedding, the Riesz bound and the
//! supporting semigroup lemmas on the discrete models.

mod audit;
mod embedding;
mod fields;
mod lemmas;
mod proposition;
mod riesz;
mod time;

pub use audit::{
    c_q, constant_audit, constant_function, constant_sup, optimal_lambda, ConstantSup,
};
pub use embedding::{
    bilinear_embedding, duality_identity, embedding_integrand, pstar, DualityResult,
    EmbeddingResult, ANCHOR_DUALITY, ANCHOR_EMBEDDING,
};
pub use fields::{field_from_fn, form_from_fn, random_field, random_form, Collocator, Evolution};
pub use lemmas::{
    bochner_check, bochner_refinement, domination_refinement, domination_violations, lemma_suite,
    observed_order, reference_form, structural_checks, subordination_check, BochnerResult,
    LemmaSettings,
};
pub use proposition::{
    proposition_spot_check, SpotCheckResult, SpotCheckSettings, ANCHOR_PROPOSITION,
};
pub use riesz::{riesz_norm_search, AscentSettings, RieszSearchResult, ANCHOR_RIESZ};
pub use time::{TimeGrid, TimeQuadrature, Truncation};

use serde::{Deserialize, Serialize};

/// Tolerances shared by the verification campaigns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub assert_tol: f64,
    /// Bound for quantities that vanish up to roundoff.
    pub exact_tol: f64,
    pub rel_tol: f64,
    /// Admissible truncated fraction of a time integral.
    pub trunc_frac: f64,
    pub quad_tol: f64,
    pub fit_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            assert_tol: 1e-9,
            exact_tol: 1e-12,
            rel_tol: 1e-5,
            trunc_frac: 1e-3,
            quad_tol: 1e-8,
            fit_tol: 1e-2,
        }
    }
}

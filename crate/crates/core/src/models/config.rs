//! JSON model descriptions and debug dumps.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{build_circle_model, build_ou_model, ModelKind, ModelOperator, PhiSpec};
use crate::error::{Error, Result};

/// `{"kind": "circle", "N": 128, "phi": {"type": "cos"}}` or
/// `{"kind": "ou", "K": 32, "d": 1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: String,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiSpec>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
}

impl ModelConfig {
    pub fn circle(n: usize, phi: PhiSpec) -> Self {
        Self {
            kind: "circle".into(),
            n: Some(n),
            phi: Some(phi),
            k: None,
            d: None,
        }
    }

    pub fn ou(d: usize, k: usize) -> Self {
        Self {
            kind: "ou".into(),
            n: None,
            phi: None,
            k: Some(k),
            d: Some(d),
        }
    }

    pub fn build(&self) -> Result<ModelOperator> {
        match self.kind.to_ascii_lowercase().as_str() {
            "circle" | "weighted_circle" => {
                let n = self
                    .n
                    .ok_or_else(|| Error::Config("circle model needs N".into()))?;
                build_circle_model(n, self.phi.as_ref().unwrap_or(&PhiSpec::Zero))
            }
            "ou" | "ou_line" | "ou_tensor" => {
                // N is accepted as the spectral truncation when K is absent
                let k = self
                    .k
                    .or(self.n)
                    .ok_or_else(|| Error::Config("OU model needs K".into()))?;
                build_ou_model(self.d.unwrap_or(1), k)
            }
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Serializable snapshot of a [`ModelOperator`]; matrices are row-major.
#[derive(Clone, Debug, Serialize)]
pub struct ModelDump {
    pub label: String,
    pub kind: ModelKind,
    pub h: Option<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub measure: Vec<f64>,
    pub form_measure: Vec<f64>,
    pub l_scalar: Vec<Vec<f64>>,
    pub l_form: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub dstar: Vec<Vec<f64>>,
    pub eig_scalar: Vec<f64>,
    pub eig_form: Vec<f64>,
    pub a_min: f64,
    pub a_min_bare: f64,
    pub ric: Vec<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl From<&ModelOperator> for ModelDump {
    fn from(m: &ModelOperator) -> Self {
        Self {
            label: m.label.clone(),
            kind: m.kind.clone(),
            h: m.h,
            theta: m.theta.clone(),
            phi: m.phi.clone(),
            measure: m.measure.iter().copied().collect(),
            form_measure: m.form_measure.iter().copied().collect(),
            l_scalar: rows(&m.l_scalar),
            l_form: rows(&m.l_form),
            d: rows(&m.d),
            dstar: rows(&m.dstar),
            eig_scalar: m.eig_scalar.values.iter().copied().collect(),
            eig_form: m.eig_form.values.iter().copied().collect(),
            a_min: m.a_min,
            a_min_bare: m.a_min_bare,
            ric: m.ric.clone(),
        }
    }
}

impl ModelDump {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

//! JSON files: instances, MSSC instances, DrE graphs and solutions.

use crate::costs::{CostModel, CostModelSpec};
use crate::error::{Result, SstError};
use crate::instance::{BatchFamily, BatchSequence, Instance};
use crate::mssc::{MsscInstance, MsscSet};
use crate::set::TestSet;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// A probability as written in a file: a decimal string or a plain number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Probability {
    Text(String),
    Number(f64),
}

impl Probability {
    fn as_text(&self) -> String {
        match self {
            Self::Text(s) => s.clone(),
            Self::Number(x) => x.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub pass_probs: Vec<Probability>,
    pub cost_model: CostModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_family: Option<BatchFamily>,
}

pub struct LoadedInstance {
    pub instance: Instance,
    pub model: Box<dyn CostModel>,
    pub spec: CostModelSpec,
}

impl InstanceFile {
    /// Checks the file and builds the instance with its cost model.
    pub fn load(&self, eps: f64) -> Result<LoadedInstance> {
        if self.pass_probs.len() != self.n {
            return Err(SstError::input(format!(
                "n = {} but pass_probs has {} entries",
                self.n,
                self.pass_probs.len()
            )));
        }
        let texts: Vec<String> = self.pass_probs.iter().map(Probability::as_text).collect();
        let family = self.family()?;
        let instance = Instance::from_decimal_strings(&texts)?.with_family(family)?;
        let model = self.cost_model.build(self.n, eps)?;
        Ok(LoadedInstance {
            instance,
            model,
            spec: self.cost_model.clone(),
        })
    }

    /// The capacitated tree model fixes `max_size`; other models only take `all`.
    fn family(&self) -> Result<BatchFamily> {
        let implied = self.cost_model.family();
        match (self.batch_family, implied) {
            (None, f) | (Some(BatchFamily::All), f @ BatchFamily::All) => Ok(f),
            (Some(given), implied) if given == implied => Ok(given),
            (Some(BatchFamily::MaxSize { k }), BatchFamily::All) => Err(SstError::input(format!(
                "batch_family max_size (k = {k}) is only supported through the \
                 tree_capacitated cost model; {} oracles ignore it",
                self.cost_model.type_name()
            ))),
            (Some(given), implied) => Err(SstError::input(format!(
                "batch_family {given:?} conflicts with the {implied:?} family of the {} cost model",
                self.cost_model.type_name()
            ))),
        }
    }
}

/// Deserializes JSON, naming the offending field and position on failure.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            SstError::input(inner.to_string())
        } else {
            SstError::input(format!("field `{path}`: {inner}"))
        }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SstError::input(format!("cannot read {}: {e}", path.display())))?;
    from_json(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsscFile {
    pub weights: Vec<f64>,
    pub sets: Vec<MsscSet>,
}

impl MsscFile {
    pub fn load(&self) -> Result<MsscInstance> {
        MsscInstance::new(self.weights.clone(), self.sets.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub algorithm: String,
    pub batches: Vec<TestSet>,
    pub batch_cost_bounds: Vec<f64>,
    /// Absent when the true batch costs are beyond exact evaluation.
    pub expected_cost: Option<f64>,
    pub upper_bound: f64,
}

impl SolutionFile {
    pub fn sequence(&self) -> BatchSequence {
        BatchSequence::new(self.batches.clone())
    }
}

/// Rounds to 10 significant digits, the precision of every number we print.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.9e}").parse().unwrap_or(x)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

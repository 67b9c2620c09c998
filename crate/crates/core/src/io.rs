//! JSON model documents.
//!
//! A document is either a full model or a reference to a built-in builder:
//!
//! ```json
//! { "builder": "example-4-1", "params": { "n": 3 } }
//! ```
//!
//! Full models carry `format_version` (currently 1), label lists for states,
//! observations and actions, optional coordinates for each list, nested
//! row-major matrices, `discount`, `cost_mode` (`"D"` or `"P"`) and costs in
//! which `+inf` is written as the string `"inf"`. The JSON schema lives in
//! `docs/model.schema.json`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use serde_path_to_error::{Path as ErrorPath, Segment};

use crate::error::{Error, Result};
use crate::measures::MetricSupport;
use crate::model::{Cost, CostMode, DiscretePomdp, LabeledPoint, ModelParts};
use crate::models;

pub const FORMAT_VERSION: u32 = 1;

fn escape(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

fn json_pointer(path: &ErrorPath) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", escape(key))),
            Segment::Enum { variant } => out.push_str(&format!("/{}", escape(variant))),
            Segment::Unknown => {}
        }
    }
    out
}

/// Deserializes `value`, reporting failures as a JSON pointer under `prefix`.
pub fn deserialize_at<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| Error::Parse {
        pointer: format!("{prefix}{}", json_pointer(e.path())),
        message: e.into_inner().to_string(),
    })
}

/// On-disk form of a [`DiscretePomdp`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: u32,
    pub states: Vec<String>,
    /// Coordinates of each state; defaults to `[index]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_points: Option<Vec<Vec<f64>>>,
    /// Defaults to the one-dimensional Euclidean metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_metric: Option<MetricSupport>,
    pub observations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_points: Option<Vec<Vec<f64>>>,
    pub actions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_points: Option<Vec<Vec<f64>>>,
    /// `transition[a][x][x']`.
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `observation[a][x'][y]`: law of the observation emitted by the next state.
    pub observation: Vec<Vec<Vec<f64>>>,
    /// `initial_observation[x][y]`.
    pub initial_observation: Vec<Vec<f64>>,
    pub prior: Vec<f64>,
    /// `cost[x][a]`; `"inf"` marks an infeasible action.
    pub cost: Vec<Vec<Cost>>,
    pub discount: f64,
    pub cost_mode: CostMode,
    /// Indices of observations that absorb truncated mass.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sink_observations: Vec<usize>,
}

fn expect_len(len: usize, want: usize, pointer: String) -> Result<()> {
    if len == want {
        Ok(())
    } else {
        Err(Error::Parse {
            pointer,
            message: format!("expected {want} entries, found {len}"),
        })
    }
}

fn points(labels: &[String], coords: Option<Vec<Vec<f64>>>, field: &str) -> Result<Vec<LabeledPoint>> {
    match coords {
        None => Ok(labels
            .iter()
            .enumerate()
            .map(|(i, l)| LabeledPoint::new(l.clone(), vec![i as f64]))
            .collect()),
        Some(c) => {
            expect_len(c.len(), labels.len(), format!("/{field}"))?;
            Ok(labels
                .iter()
                .zip(c)
                .map(|(l, p)| LabeledPoint::new(l.clone(), p))
                .collect())
        }
    }
}

impl ModelDocument {
    pub fn from_model(model: &DiscretePomdp) -> Self {
        let p = model.parts();
        let labels = |v: &[LabeledPoint]| v.iter().map(|x| x.label.clone()).collect::<Vec<_>>();
        let coords = |v: &[LabeledPoint]| Some(v.iter().map(|x| x.coords.clone()).collect::<Vec<_>>());
        ModelDocument {
            format_version: FORMAT_VERSION,
            states: labels(&p.states),
            state_points: coords(&p.states),
            state_metric: Some(p.state_metric.clone()),
            observations: labels(&p.observations),
            observation_points: coords(&p.observations),
            actions: labels(&p.actions),
            action_points: coords(&p.actions),
            transition: p.transition.clone(),
            observation: p.observation.clone(),
            initial_observation: p.initial_observation.clone(),
            prior: p.prior.clone(),
            cost: p.cost.clone(),
            discount: p.discount,
            cost_mode: p.cost_mode,
            sink_observations: p.sink_observations.clone(),
        }
    }

    /// Checks every nested length, naming the first offender by pointer.
    fn check_shapes(&self) -> Result<()> {
        let (nx, ny, na) = (self.states.len(), self.observations.len(), self.actions.len());
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Parse {
                pointer: "/format_version".into(),
                message: format!("unsupported version {}, expected {FORMAT_VERSION}", self.format_version),
            });
        }
        for (field, n) in [("states", nx), ("observations", ny), ("actions", na)] {
            if n == 0 {
                return Err(Error::Parse {
                    pointer: format!("/{field}"),
                    message: "must not be empty".into(),
                });
            }
        }
        expect_len(self.transition.len(), na, "/transition".into())?;
        for (a, m) in self.transition.iter().enumerate() {
            expect_len(m.len(), nx, format!("/transition/{a}"))?;
            for (x, row) in m.iter().enumerate() {
                expect_len(row.len(), nx, format!("/transition/{a}/{x}"))?;
            }
        }
        expect_len(self.observation.len(), na, "/observation".into())?;
        for (a, m) in self.observation.iter().enumerate() {
            expect_len(m.len(), nx, format!("/observation/{a}"))?;
            for (x, row) in m.iter().enumerate() {
                expect_len(row.len(), ny, format!("/observation/{a}/{x}"))?;
            }
        }
        expect_len(self.initial_observation.len(), nx, "/initial_observation".into())?;
        for (x, row) in self.initial_observation.iter().enumerate() {
            expect_len(row.len(), ny, format!("/initial_observation/{x}"))?;
        }
        expect_len(self.prior.len(), nx, "/prior".into())?;
        expect_len(self.cost.len(), nx, "/cost".into())?;
        for (x, row) in self.cost.iter().enumerate() {
            expect_len(row.len(), na, format!("/cost/{x}"))?;
        }
        if let Some(i) = self.sink_observations.iter().position(|&y| y >= ny) {
            return Err(Error::Parse {
                pointer: format!("/sink_observations/{i}"),
                message: format!("observation index out of range (have {ny})"),
            });
        }
        Ok(())
    }

    pub fn into_model(self) -> Result<DiscretePomdp> {
        self.check_shapes()?;
        let states = points(&self.states, self.state_points, "state_points")?;
        let observations = points(&self.observations, self.observation_points, "observation_points")?;
        let actions = points(&self.actions, self.action_points, "action_points")?;
        DiscretePomdp::from_parts(ModelParts {
            states,
            state_metric: self.state_metric.unwrap_or(MetricSupport::Euclidean1d),
            observations,
            actions,
            transition: self.transition,
            observation: self.observation,
            initial_observation: self.initial_observation,
            prior: self.prior,
            cost: self.cost,
            discount: self.discount,
            cost_mode: self.cost_mode,
            sink_observations: self.sink_observations,
        })
    }
}

/// Where a model came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSource {
    File { path: String },
    Builder { name: String, params: Value },
}

/// Parses a JSON value that is either a builder reference or a full model.
pub fn model_from_value(value: Value) -> Result<DiscretePomdp> {
    if let Some(obj) = value.as_object() {
        if let Some(name) = obj.get("builder") {
            let name = name.as_str().ok_or_else(|| Error::Parse {
                pointer: "/builder".into(),
                message: "builder name must be a string".into(),
            })?;
            if let Some(key) = obj.keys().find(|k| *k != "builder" && *k != "params") {
                return Err(Error::Parse {
                    pointer: format!("/{}", escape(key)),
                    message: "unknown field in builder document".into(),
                });
            }
            let params = obj.get("params").cloned().unwrap_or(Value::Null);
            return models::build_at(name, &params, "/params");
        }
    }
    deserialize_at::<ModelDocument>(value, "")?.into_model()
}

/// Parses model JSON text.
pub fn model_from_str(text: &str) -> Result<DiscretePomdp> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        pointer: String::new(),
        message: e.to_string(),
    })?;
    model_from_value(value)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DiscretePomdp> {
    model_from_str(&fs::read_to_string(path)?)
}

pub fn model_to_string(model: &DiscretePomdp) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelDocument::from_model(model))?)
}

pub fn save_model(model: &DiscretePomdp, path: impl AsRef<Path>) -> Result<()> {
    let mut text = model_to_string(model)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

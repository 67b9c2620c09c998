//! Built-in model constructors, addressable by name.

mod examples;
mod inventory;
mod kalman;

pub use examples::{
    build_example_4_1, build_example_4_2, build_example_4_3, build_mdmii_8_1, dyadic_density_masses,
    example_4_2_actions, mdmii_state, sin_sq_half_turn, EXAMPLE_DISCOUNT,
};
pub use inventory::{build_inventory, Demand, InventoryMode, InventorySpec};
pub use kalman::{build_kalman, kalman_exact, Gaussian, KalmanSpec};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io::deserialize_at;
use crate::model::DiscretePomdp;

/// One parameter of a builder.
#[derive(Clone, Debug, Serialize)]
pub struct ParamInfo {
    pub name: &'static str,
    pub kind: &'static str,
    pub default: Value,
    pub help: &'static str,
}

/// Description of a builder for `list-models`.
#[derive(Clone, Debug, Serialize)]
pub struct BuilderInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: Vec<ParamInfo>,
}

fn param(name: &'static str, kind: &'static str, default: Value, help: &'static str) -> ParamInfo {
    ParamInfo {
        name,
        kind,
        default,
        help,
    }
}

/// Every builder with its parameters and defaults.
pub fn list_models() -> Vec<BuilderInfo> {
    vec![
        BuilderInfo {
            name: "example-4-1",
            summary: "two frozen states; observation density f_n under action 1/n in state 2",
            params: vec![
                param("n", "integer >= 1", json!(3), "largest density index; actions are 0 and 1/j for j <= n"),
                param("cells", "integer", json!(8), "observation cells on [0, 1]; a multiple of 2^n (default 2^n)"),
            ],
        },
        BuilderInfo {
            name: "example-4-2",
            summary: "two frozen states, two observations, likelihoods |a| and a^2 switching at a = 0",
            params: vec![
                param("k_max", "integer >= 1", json!(10), "action grid {-1/k, 0, 1/k : k <= k_max}"),
                param("actions", "array of numbers in [-1, 1]", Value::Null, "explicit action grid; overrides k_max"),
            ],
        },
        BuilderInfo {
            name: "example-4-3",
            summary: "observations 1/n with sin^2 / cos^2 likelihoods, truncated with a sink observation",
            params: vec![
                param("m_max", "integer >= 1", json!(3), "actions are 0 and 1/m for m <= m_max"),
                param("truncation", "integer in 1..=50", json!(20), "keep blocks k <= K; the sink gets 2^-(K+1)"),
            ],
        },
        BuilderInfo {
            name: "mdmii-8-1",
            summary: "observed cell and frozen hidden label; label 2 moves the cell with density f_n",
            params: vec![
                param("n", "integer >= 1", json!(3), "largest density index"),
                param("cells", "integer", json!(8), "cells on [0, 1]; a multiple of 2^n (default 2^n)"),
            ],
        },
        BuilderInfo {
            name: "inventory",
            summary: "inventory control with transparent and nontransparent containers",
            params: vec![param(
                "(object)",
                "inventory spec",
                serde_json::to_value(InventorySpec::example()).expect("serializable"),
                "levels, cuts, transparent, interior_points?, demand{values,probs}, actions, holding_cost, \
                 backorder_cost, fixed_order_cost?, unit_order_cost?, max_order?, lost_sale_cost?, \
                 mode (backorders|lost-sales), discount, prior?",
            )],
        },
        BuilderInfo {
            name: "kalman",
            summary: "scalar linear-Gaussian system discretised on state and observation grids",
            params: vec![param(
                "(object)",
                "kalman spec",
                serde_json::to_value(KalmanSpec::example()).expect("serializable"),
                "d, b, h, c, state_noise_sd, c1, c2, state_range, state_points, obs_range, obs_points, \
                 actions, discount, prior_mean?, prior_sd?",
            )],
        },
    ]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DyadicParams {
    #[serde(default = "default_n")]
    n: u32,
    cells: Option<usize>,
}

fn default_n() -> u32 {
    3
}

impl DyadicParams {
    fn cells(&self) -> Result<usize> {
        match self.cells {
            Some(c) => Ok(c),
            None if self.n <= 30 => Ok(1usize << self.n),
            None => Err(Error::InvalidArgument(format!("density index {} too large", self.n))),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Example42Params {
    #[serde(default = "default_k_max")]
    k_max: usize,
    actions: Option<Vec<f64>>,
}

fn default_k_max() -> usize {
    10
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Example43Params {
    #[serde(default = "default_m_max")]
    m_max: usize,
    #[serde(default = "default_truncation")]
    truncation: usize,
}

fn default_m_max() -> usize {
    3
}

fn default_truncation() -> usize {
    20
}

fn params_or_empty(params: &Value) -> Value {
    if params.is_null() {
        json!({})
    } else {
        params.clone()
    }
}

fn parse<T: DeserializeOwned>(params: &Value, pointer: &str) -> Result<T> {
    deserialize_at(params_or_empty(params), pointer)
}

/// Builds the named model. `pointer` locates `params` in the enclosing
/// document for error messages.
pub fn build_at(name: &str, params: &Value, pointer: &str) -> Result<DiscretePomdp> {
    match name {
        "example-4-1" => {
            let p: DyadicParams = parse(params, pointer)?;
            build_example_4_1(p.n, p.cells()?)
        }
        "example-4-2" => {
            let p: Example42Params = parse(params, pointer)?;
            let actions = p.actions.unwrap_or_else(|| example_4_2_actions(p.k_max));
            build_example_4_2(&actions)
        }
        "example-4-3" => {
            let p: Example43Params = parse(params, pointer)?;
            build_example_4_3(p.m_max, p.truncation)
        }
        "mdmii-8-1" => {
            let p: DyadicParams = parse(params, pointer)?;
            build_mdmii_8_1(p.n, p.cells()?)
        }
        "inventory" => {
            let spec = if params.is_null() {
                InventorySpec::example()
            } else {
                parse(params, pointer)?
            };
            build_inventory(&spec)
        }
        "kalman" => {
            let spec = if params.is_null() {
                KalmanSpec::example()
            } else {
                parse(params, pointer)?
            };
            build_kalman(&spec)
        }
        other => Err(Error::UnknownBuilder(other.to_string())),
    }
}

/// Builds the named model from JSON parameters (`null` for defaults).
pub fn build(name: &str, params: &Value) -> Result<DiscretePomdp> {
    build_at(name, params, "")
}

//! The finite POMDP tuple, beliefs over its states, and validity checks.

use std::fmt;
use std::ops::Deref;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::measures::MetricSupport;

/// Row sums of stochastic matrices must be within this of one.
pub const ROW_SUM_TOL: f64 = 1e-10;
/// Belief weights must sum to one within this.
pub const BELIEF_SUM_TOL: f64 = 1e-12;

/// Which standing assumption the costs satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostMode {
    /// Costs bounded below, discount in `[0, 1)`.
    D,
    /// Costs nonnegative, discount in `[0, 1]`.
    P,
}

/// One-step cost; `Infinite` marks an action that is not available in a state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cost {
    Finite(f64),
    Infinite,
}

impl Cost {
    pub fn value(self) -> f64 {
        match self {
            Cost::Finite(c) => c,
            Cost::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Cost::Finite(_))
    }

    /// Maps `+inf` to `Infinite` and everything else to `Finite`.
    pub fn from_f64(c: f64) -> Self {
        if c == f64::INFINITY {
            Cost::Infinite
        } else {
            Cost::Finite(c)
        }
    }
}

impl Serialize for Cost {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cost::Finite(c) => s.serialize_f64(*c),
            Cost::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Cost {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct CostVisitor;
        impl Visitor<'_> for CostVisitor {
            type Value = Cost;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a finite number or the string \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Cost, E> {
                if v.is_finite() {
                    Ok(Cost::Finite(v))
                } else {
                    Err(E::custom("non-finite cost must be written as \"inf\""))
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Cost, E> {
                Ok(Cost::Finite(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Cost, E> {
                Ok(Cost::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Cost, E> {
                match v {
                    "inf" | "+inf" => Ok(Cost::Infinite),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }
        d.deserialize_any(CostVisitor)
    }
}

/// A labelled point of a state, observation or action space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub label: String,
    pub coords: Vec<f64>,
}

impl LabeledPoint {
    pub fn new(label: impl Into<String>, coords: Vec<f64>) -> Self {
        LabeledPoint {
            label: label.into(),
            coords,
        }
    }

    /// A point on the real line labelled by its value.
    pub fn scalar(x: f64) -> Self {
        LabeledPoint::new(format!("{x}"), vec![x])
    }
}

/// A probability vector over the states of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidBelief("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidBelief(format!("weight {w} is not a nonnegative number")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > BELIEF_SUM_TOL {
            return Err(Error::InvalidBelief(format!("weights sum to {total}")));
        }
        Ok(Belief(weights))
    }

    /// Rescales nonnegative weights with positive total into a belief.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidBelief("weights must be nonnegative and finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidBelief("weights have zero total mass".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Belief(weights))
    }

    pub fn point_mass(n: usize, state: usize) -> Self {
        let mut w = vec![0.0; n];
        w[state] = 1.0;
        Belief(w)
    }

    pub fn uniform(n: usize) -> Self {
        Belief(vec![1.0 / n as f64; n])
    }

    /// `lambda * a + (1 - lambda) * b`.
    pub fn mix(a: &Belief, b: &Belief, lambda: f64) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch("beliefs over different state sets".into()));
        }
        Belief::normalized(
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| (lambda * x + (1.0 - lambda) * y).max(0.0))
                .collect(),
        )
    }

    /// Indices with positive weight.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, _)| i)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Largest componentwise difference.
    pub fn max_abs_diff(&self, other: &Belief) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Deref for Belief {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Raw components of a [`DiscretePomdp`].
///
/// Indexing conventions: `transition[a][x][x']`, `observation[a][x'][y]`
/// (the observation is emitted by the state the system moves to),
/// `initial_observation[x][y]`, `cost[x][a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParts {
    pub states: Vec<LabeledPoint>,
    pub state_metric: MetricSupport,
    pub observations: Vec<LabeledPoint>,
    pub actions: Vec<LabeledPoint>,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub observation: Vec<Vec<Vec<f64>>>,
    pub initial_observation: Vec<Vec<f64>>,
    pub prior: Vec<f64>,
    pub cost: Vec<Vec<Cost>>,
    pub discount: f64,
    pub cost_mode: CostMode,
    /// Observations that absorb mass cut off by a truncation.
    pub sink_observations: Vec<usize>,
}

/// A POMDP with finitely many states, observations and actions.
///
/// Construction only checks shapes; [`DiscretePomdp::validate`] checks the
/// probabilistic and cost invariants and reports every violation.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePomdp {
    parts: ModelParts,
}

/// One failed check from [`DiscretePomdp::validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationFailure {
    /// Location of the offending entry, e.g. `transition[a=0][x=1]`.
    pub item: String,
    pub message: String,
}

impl fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.item, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub failures: Vec<ValidationFailure>,
    /// Smallest `K >= 0` with `c + K >= 0` on finite entries.
    pub cost_shift: f64,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn into_result(self) -> Result<f64> {
        if self.is_ok() {
            Ok(self.cost_shift)
        } else {
            Err(Error::Validation(
                self.failures.iter().map(ToString::to_string).collect(),
            ))
        }
    }
}

/// A model with nonnegative costs obtained by adding a constant.
#[derive(Clone, Debug)]
pub struct ShiftedModel {
    pub model: DiscretePomdp,
    /// The constant added to every cost.
    pub shift: f64,
    /// `shift / (1 - discount)`: amount by which infinite-horizon values grow.
    pub offset: f64,
}

impl ShiftedModel {
    /// Amount by which `horizon`-step values grow.
    pub fn offset_for_horizon(&self, horizon: usize) -> f64 {
        let a = self.model.discount();
        (0..horizon).map(|t| self.shift * a.powi(t as i32)).sum()
    }
}

impl DiscretePomdp {
    pub fn from_parts(parts: ModelParts) -> Result<Self> {
        let (nx, ny, na) = (parts.states.len(), parts.observations.len(), parts.actions.len());
        let shape = |what: &str, msg: String| Err(Error::InvalidModel(format!("{what}: {msg}")));
        if nx == 0 || ny == 0 || na == 0 {
            return shape("spaces", "states, observations and actions must be nonempty".into());
        }
        let dim = parts.state_metric.dim();
        if let Some(s) = parts.states.iter().find(|s| s.coords.len() != dim) {
            return shape("states", format!("state `{}` does not match the metric dimension {dim}", s.label));
        }
        if parts.transition.len() != na
            || parts.transition.iter().any(|m| m.len() != nx || m.iter().any(|r| r.len() != nx))
        {
            return shape("transition", format!("expected shape [{na}][{nx}][{nx}]"));
        }
        if parts.observation.len() != na
            || parts.observation.iter().any(|m| m.len() != nx || m.iter().any(|r| r.len() != ny))
        {
            return shape("observation", format!("expected shape [{na}][{nx}][{ny}]"));
        }
        if parts.initial_observation.len() != nx
            || parts.initial_observation.iter().any(|r| r.len() != ny)
        {
            return shape("initial_observation", format!("expected shape [{nx}][{ny}]"));
        }
        if parts.prior.len() != nx {
            return shape("prior", format!("expected {nx} entries"));
        }
        if parts.cost.len() != nx || parts.cost.iter().any(|r| r.len() != na) {
            return shape("cost", format!("expected shape [{nx}][{na}]"));
        }
        if let Some(s) = parts.sink_observations.iter().find(|&&s| s >= ny) {
            return shape("sink_observations", format!("index {s} out of range"));
        }
        Ok(DiscretePomdp { parts })
    }

    pub fn parts(&self) -> &ModelParts {
        &self.parts
    }

    pub fn into_parts(self) -> ModelParts {
        self.parts
    }

    pub fn n_states(&self) -> usize {
        self.parts.states.len()
    }

    pub fn n_observations(&self) -> usize {
        self.parts.observations.len()
    }

    pub fn n_actions(&self) -> usize {
        self.parts.actions.len()
    }

    pub fn states(&self) -> &[LabeledPoint] {
        &self.parts.states
    }

    pub fn observations(&self) -> &[LabeledPoint] {
        &self.parts.observations
    }

    pub fn actions(&self) -> &[LabeledPoint] {
        &self.parts.actions
    }

    pub fn state_metric(&self) -> &MetricSupport {
        &self.parts.state_metric
    }

    /// Euclidean metric matching the observation coordinates.
    pub fn observation_metric(&self) -> MetricSupport {
        match self.parts.observations[0].coords.len() {
            1 => MetricSupport::Euclidean1d,
            dim => MetricSupport::EuclideanNd { dim },
        }
    }

    /// Row `P(.|x, a)`.
    pub fn transition_row(&self, a: usize, x: usize) -> &[f64] {
        &self.parts.transition[a][x]
    }

    /// Row `Q(.|a, x')`.
    pub fn observation_row(&self, a: usize, next: usize) -> &[f64] {
        &self.parts.observation[a][next]
    }

    /// Row `Q0(.|x)`.
    pub fn initial_observation_row(&self, x: usize) -> &[f64] {
        &self.parts.initial_observation[x]
    }

    pub fn prior(&self) -> &[f64] {
        &self.parts.prior
    }

    pub fn prior_belief(&self) -> Result<Belief> {
        Belief::normalized(self.parts.prior.clone())
    }

    pub fn cost(&self, x: usize, a: usize) -> Cost {
        self.parts.cost[x][a]
    }

    pub fn discount(&self) -> f64 {
        self.parts.discount
    }

    pub fn cost_mode(&self) -> CostMode {
        self.parts.cost_mode
    }

    pub fn sink_observations(&self) -> &[usize] {
        &self.parts.sink_observations
    }

    pub fn action_index(&self, label: &str) -> Option<usize> {
        self.parts.actions.iter().position(|a| a.label == label)
    }

    pub fn observation_index(&self, label: &str) -> Option<usize> {
        self.parts.observations.iter().position(|y| y.label == label)
    }

    pub(crate) fn check_belief(&self, z: &Belief) -> Result<()> {
        if z.len() != self.n_states() {
            return Err(Error::DimensionMismatch(format!(
                "belief has {} entries, model has {} states",
                z.len(),
                self.n_states()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.n_actions() {
            return Err(Error::InvalidArgument(format!(
                "action index {a} out of range (model has {})",
                self.n_actions()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_observation(&self, y: usize) -> Result<()> {
        if y >= self.n_observations() {
            return Err(Error::InvalidArgument(format!(
                "observation index {y} out of range (model has {})",
                self.n_observations()
            )));
        }
        Ok(())
    }

    /// Checks every invariant and lists each violation.
    pub fn validate(&self) -> ValidationReport {
        let p = &self.parts;
        let mut failures = Vec::new();
        let mut fail = |item: String, message: String| failures.push(ValidationFailure { item, message });

        let check_row = |row: &[f64]| -> Option<String> {
            if let Some(v) = row.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return Some(format!("entry {v} is not a nonnegative number"));
            }
            let s: f64 = row.iter().sum();
            ((s - 1.0).abs() > ROW_SUM_TOL).then(|| format!("row sums to {s}"))
        };

        for (a, m) in p.transition.iter().enumerate() {
            for (x, row) in m.iter().enumerate() {
                if let Some(msg) = check_row(row) {
                    fail(format!("transition[a={a}][x={x}]"), msg);
                }
            }
        }
        for (a, m) in p.observation.iter().enumerate() {
            for (x, row) in m.iter().enumerate() {
                if let Some(msg) = check_row(row) {
                    fail(format!("observation[a={a}][x'={x}]"), msg);
                }
            }
        }
        for (x, row) in p.initial_observation.iter().enumerate() {
            if let Some(msg) = check_row(row) {
                fail(format!("initial_observation[x={x}]"), msg);
            }
        }
        if let Some(msg) = check_row(&p.prior) {
            fail("prior".into(), msg);
        }

        let mut min_cost = f64::INFINITY;
        for (x, row) in p.cost.iter().enumerate() {
            for (a, c) in row.iter().enumerate() {
                if let Cost::Finite(v) = c {
                    if !v.is_finite() {
                        fail(format!("cost[x={x}][a={a}]"), format!("finite cost entry is {v}"));
                    } else {
                        min_cost = min_cost.min(*v);
                    }
                }
            }
            if row.iter().all(|c| !c.is_finite()) {
                fail(format!("cost[x={x}]"), "no action has finite cost".into());
            }
        }

        let alpha = p.discount;
        match p.cost_mode {
            CostMode::D => {
                if !(0.0..1.0).contains(&alpha) {
                    fail("discount".into(), format!("mode D needs discount in [0, 1), got {alpha}"));
                }
            }
            CostMode::P => {
                if !(0.0..=1.0).contains(&alpha) {
                    fail("discount".into(), format!("mode P needs discount in [0, 1], got {alpha}"));
                }
                if min_cost < 0.0 {
                    fail("cost".into(), format!("mode P needs nonnegative costs, minimum is {min_cost}"));
                }
            }
        }

        let cost_shift = if min_cost.is_finite() { (-min_cost).max(0.0) } else { 0.0 };
        ValidationReport { failures, cost_shift }
    }

    /// Adds the cost shift `K` to every finite cost and switches to mode P.
    /// Mode-P models come back unchanged with zero offset.
    pub fn shift_costs(&self) -> ShiftedModel {
        if self.parts.cost_mode == CostMode::P {
            return ShiftedModel {
                model: self.clone(),
                shift: 0.0,
                offset: 0.0,
            };
        }
        let k = self.validate().cost_shift;
        let mut parts = self.parts.clone();
        for row in &mut parts.cost {
            for c in row.iter_mut() {
                if let Cost::Finite(v) = c {
                    *v += k;
                }
            }
        }
        parts.cost_mode = CostMode::P;
        let offset = if k == 0.0 { 0.0 } else { k / (1.0 - parts.discount) };
        ShiftedModel {
            model: DiscretePomdp { parts },
            shift: k,
            offset,
        }
    }
}

//! Periodic-review inventory control where some level ranges are only
//! observed up to the container they fall in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::MetricSupport;
use crate::model::{Cost, CostMode, DiscretePomdp, LabeledPoint, ModelParts};

const ON_GRID_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InventoryMode {
    /// Next level `x + a - D`.
    Backorders,
    /// Next level `max(x + a - D, 0)`.
    LostSales,
}

/// A finite demand law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventorySpec {
    /// Inventory levels, equally spaced and ascending; one of them must be 0.
    pub levels: Vec<f64>,
    /// Finite container boundaries `d_i`, strictly increasing. Container `i`
    /// is `[d_{i-1}, d_i)` with `d_{-1} = -inf` and a last container
    /// `[d_last, +inf)`.
    pub cuts: Vec<f64>,
    /// One flag per container (`cuts.len() + 1` of them).
    pub transparent: Vec<bool>,
    /// Observation point reported for each nontransparent container.
    /// Defaults to the midpoint, or one unit inside an infinite end.
    #[serde(default)]
    pub interior_points: Option<Vec<Option<f64>>>,
    pub demand: Demand,
    /// Order sizes; each must be a multiple of the level spacing.
    pub actions: Vec<f64>,
    pub holding_cost: f64,
    pub backorder_cost: f64,
    #[serde(default)]
    pub fixed_order_cost: f64,
    #[serde(default)]
    pub unit_order_cost: f64,
    /// Orders above this size cost `+inf`.
    #[serde(default)]
    pub max_order: Option<f64>,
    /// Penalty per unit of expected lost demand (lost-sales mode only).
    #[serde(default)]
    pub lost_sale_cost: f64,
    pub mode: InventoryMode,
    pub discount: f64,
    /// Initial level distribution; defaults to a point mass at level 0.
    #[serde(default)]
    pub prior: Option<Vec<f64>>,
}

impl InventorySpec {
    /// A small backorder model: levels `-4..=6`, nontransparent container
    /// `[0.5, inf)`, transparent below.
    pub fn example() -> Self {
        InventorySpec {
            levels: (-4..=6).map(f64::from).collect(),
            cuts: vec![0.5],
            transparent: vec![true, false],
            interior_points: None,
            demand: Demand {
                values: vec![0.0, 1.0, 2.0, 3.0],
                probs: vec![0.2, 0.3, 0.3, 0.2],
            },
            actions: vec![0.0, 1.0, 2.0, 3.0],
            holding_cost: 1.0,
            backorder_cost: 4.0,
            fixed_order_cost: 0.5,
            unit_order_cost: 1.0,
            max_order: Some(3.0),
            lost_sale_cost: 0.0,
            mode: InventoryMode::Backorders,
            discount: 0.9,
            prior: None,
        }
    }

    fn n_containers(&self) -> usize {
        self.cuts.len() + 1
    }

    /// Observation point of a nontransparent container.
    pub fn interior_point(&self, container: usize) -> f64 {
        if let Some(Some(b)) = self.interior_points.as_ref().and_then(|v| v.get(container)) {
            return *b;
        }
        let lo = if container == 0 { None } else { Some(self.cuts[container - 1]) };
        let hi = self.cuts.get(container).copied();
        match (lo, hi) {
            (Some(l), Some(h)) => 0.5 * (l + h),
            (None, Some(h)) => h - 1.0,
            (Some(l), None) => l + 1.0,
            (None, None) => 0.0,
        }
    }

    fn check(&self) -> Result<f64> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.levels.len() < 2 {
            return bad("need at least two inventory levels".into());
        }
        let step = self.levels[1] - self.levels[0];
        if step <= 0.0 {
            return bad("levels must be strictly increasing".into());
        }
        for (i, w) in self.levels.windows(2).enumerate() {
            if ((w[1] - w[0]) - step).abs() > ON_GRID_TOL * step {
                return bad(format!("levels are not equally spaced at index {}", i + 1));
            }
        }
        if !self.levels.iter().any(|l| l.abs() <= ON_GRID_TOL * step) {
            return bad("level 0 must be on the grid".into());
        }
        if self.cuts.windows(2).any(|w| w[1] <= w[0]) || self.cuts.iter().any(|c| !c.is_finite()) {
            return bad("cuts must be finite and strictly increasing".into());
        }
        if self.transparent.len() != self.n_containers() {
            return bad(format!(
                "expected {} transparency flags, got {}",
                self.n_containers(),
                self.transparent.len()
            ));
        }
        if let Some(b) = &self.interior_points {
            if b.len() != self.n_containers() {
                return bad("interior_points needs one entry per container".into());
            }
        }
        let metric = MetricSupport::container(self.cuts.clone())?;
        for c in 0..self.n_containers() {
            if !self.transparent[c] {
                let b = self.interior_point(c);
                if metric.container_index(b) != c || self.cuts.contains(&b) {
                    return bad(format!("interior point {b} is not inside container {c}"));
                }
            }
        }
        let d = &self.demand;
        if d.values.is_empty() || d.values.len() != d.probs.len() {
            return bad("demand values and probs must be nonempty and of equal length".into());
        }
        if d.probs.iter().any(|p| !(*p >= 0.0)) || (d.probs.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
            return bad("demand probabilities must be nonnegative and sum to 1".into());
        }
        let on_grid = |v: f64| ((v / step).round() * step - v).abs() <= ON_GRID_TOL * step.max(1.0);
        if let Some(v) = d.values.iter().find(|v| !on_grid(**v)) {
            return bad(format!("demand value {v} is not a multiple of the level spacing"));
        }
        if self.actions.is_empty() {
            return bad("need at least one action".into());
        }
        if let Some(a) = self.actions.iter().find(|a| !on_grid(**a)) {
            return bad(format!("order size {a} is not a multiple of the level spacing"));
        }
        let costs = [
            self.holding_cost,
            self.backorder_cost,
            self.fixed_order_cost,
            self.unit_order_cost,
            self.lost_sale_cost,
        ];
        if costs.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return bad("cost coefficients must be finite and nonnegative".into());
        }
        Ok(step)
    }

    fn order_cost(&self, a: f64) -> Cost {
        if self.max_order.is_some_and(|m| a > m) {
            return Cost::Infinite;
        }
        let fixed = if a > 0.0 { self.fixed_order_cost } else { 0.0 };
        Cost::Finite(fixed + self.unit_order_cost * a.abs())
    }

    fn stage_cost(&self, x: f64, a: f64) -> Cost {
        let holding = self.holding_cost * x.max(0.0) + self.backorder_cost * (-x).max(0.0);
        let lost = match self.mode {
            InventoryMode::Backorders => 0.0,
            InventoryMode::LostSales => {
                let expected: f64 = self
                    .demand
                    .values
                    .iter()
                    .zip(&self.demand.probs)
                    .map(|(d, p)| p * (d - x - a).max(0.0))
                    .sum();
                self.lost_sale_cost * expected
            }
        };
        match self.order_cost(a) {
            Cost::Finite(c) => Cost::Finite(holding + lost + c),
            Cost::Infinite => Cost::Infinite,
        }
    }
}

/// Builds the partially observed inventory model.
///
/// Levels falling in a transparent container are observed exactly; levels
/// in a nontransparent container all emit that container's interior point.
/// Next levels beyond the grid are clamped to its ends. A next level that
/// has positive probability and sits exactly on a cut is rejected, since
/// which container it belongs to would then depend on the boundary
/// convention.
pub fn build_inventory(spec: &InventorySpec) -> Result<DiscretePomdp> {
    let step = spec.check()?;
    let metric = MetricSupport::container(spec.cuts.clone())?;
    let levels = &spec.levels;
    let nx = levels.len();
    let lo = levels[0];
    let index_of = |v: f64| -> usize {
        let i = ((v - lo) / step).round();
        i.clamp(0.0, (nx - 1) as f64) as usize
    };

    let mut transition = Vec::with_capacity(spec.actions.len());
    for &a in &spec.actions {
        let mut rows = Vec::with_capacity(nx);
        for &x in levels {
            let mut row = vec![0.0; nx];
            for (&d, &p) in spec.demand.values.iter().zip(&spec.demand.probs) {
                if p == 0.0 {
                    continue;
                }
                let mut next = x + a - d;
                if spec.mode == InventoryMode::LostSales {
                    next = next.max(0.0);
                }
                let j = index_of(next);
                if spec.cuts.iter().any(|c| (levels[j] - c).abs() <= ON_GRID_TOL * step) {
                    return Err(Error::InvalidArgument(format!(
                        "level {} is reachable with positive probability and lies on a container boundary",
                        levels[j]
                    )));
                }
                row[j] += p;
            }
            rows.push(row);
        }
        transition.push(rows);
    }

    // Observation alphabet: transparent levels, then one point per
    // nontransparent container that holds a level.
    let mut observations = Vec::new();
    let mut psi = vec![usize::MAX; nx];
    let mut container_obs = vec![usize::MAX; spec.n_containers()];
    for (i, &x) in levels.iter().enumerate() {
        let c = metric.container_index(x);
        if spec.transparent[c] {
            psi[i] = observations.len();
            observations.push(LabeledPoint::new(format!("x={x}"), vec![x]));
        }
    }
    for (i, &x) in levels.iter().enumerate() {
        let c = metric.container_index(x);
        if !spec.transparent[c] {
            if container_obs[c] == usize::MAX {
                container_obs[c] = observations.len();
                let b = spec.interior_point(c);
                observations.push(LabeledPoint::new(format!("b{c}"), vec![b]));
            }
            psi[i] = container_obs[c];
        }
    }
    let ny = observations.len();
    let projection: Vec<Vec<f64>> = psi
        .iter()
        .map(|&y| {
            let mut row = vec![0.0; ny];
            row[y] = 1.0;
            row
        })
        .collect();

    let prior = match &spec.prior {
        Some(p) => p.clone(),
        None => {
            let mut p = vec![0.0; nx];
            p[index_of(0.0)] = 1.0;
            p
        }
    };
    let cost = levels
        .iter()
        .map(|&x| spec.actions.iter().map(|&a| spec.stage_cost(x, a)).collect())
        .collect();

    DiscretePomdp::from_parts(ModelParts {
        states: levels.iter().map(|&x| LabeledPoint::new(format!("{x}"), vec![x])).collect(),
        state_metric: metric,
        observations,
        actions: spec
            .actions
            .iter()
            .map(|&a| LabeledPoint::new(format!("order {a}"), vec![a]))
            .collect(),
        transition,
        observation: vec![projection.clone(); spec.actions.len()],
        initial_observation: projection,
        prior,
        cost,
        discount: spec.discount,
        cost_mode: CostMode::P,
        sink_observations: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{bayes_update, belief_transition, predict};
    use crate::model::Belief;
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_inventory_builds() {
        let m = build_inventory(&InventorySpec::example()).unwrap();
        let report = m.validate();
        assert!(report.is_ok(), "{:?}", report.failures);
        // 5 transparent levels below the cut plus one container point
        assert_eq!(m.n_observations(), 6);
        let over = m.action_index("order 3").unwrap();
        assert!(m.cost(0, over).is_finite());
    }

    #[test]
    fn boundary_atoms_are_rejected() {
        let mut spec = InventorySpec::example();
        spec.cuts = vec![1.0];
        assert!(build_inventory(&spec).is_err());
    }

    #[test]
    fn opaque_container_posterior_is_the_restricted_prediction() {
        let spec = InventorySpec::example();
        let m = build_inventory(&spec).unwrap();
        let z = Belief::point_mass(m.n_states(), 4);
        let a = 2;
        let pred = predict(&m, &z, a).unwrap();
        let b = m.observation_index("b1").unwrap();
        let post = bayes_update(&m, &z, a, b).unwrap();
        let mass: f64 = spec
            .levels
            .iter()
            .zip(&pred)
            .filter(|(x, _)| **x > 0.5)
            .map(|(_, p)| p)
            .sum();
        for (i, x) in spec.levels.iter().enumerate() {
            let expected = if *x > 0.5 { pred[i] / mass } else { 0.0 };
            assert_abs_diff_eq!(post[i], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn transparent_containers_give_point_masses() {
        let mut spec = InventorySpec::example();
        spec.transparent = vec![true, true];
        let m = build_inventory(&spec).unwrap();
        let law = belief_transition(&m, &Belief::point_mass(m.n_states(), 4), 1).unwrap();
        for z in law.support() {
            assert_eq!(z.support().count(), 1);
        }
    }

    #[test]
    fn lost_sales_zero_probability() {
        let mut spec = InventorySpec::example();
        spec.mode = InventoryMode::LostSales;
        spec.levels = (0..=6).map(f64::from).collect();
        spec.lost_sale_cost = 2.0;
        let m = build_inventory(&spec).unwrap();
        assert!(m.validate().is_ok());
        for (ai, a) in spec.actions.iter().enumerate() {
            for (xi, x) in spec.levels.iter().enumerate() {
                let tail: f64 = spec
                    .demand
                    .values
                    .iter()
                    .zip(&spec.demand.probs)
                    .filter(|(d, _)| **d >= x + a)
                    .map(|(_, p)| p)
                    .sum();
                assert_abs_diff_eq!(m.transition_row(ai, xi)[0], tail, epsilon = 1e-15);
            }
        }
    }
}

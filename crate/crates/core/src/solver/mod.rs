//! Dynamic programming on the belief-state MDP.
//!
//! The Bellman operator at a belief `z` is
//!
//! ```text
//! (T V)(z) = min_a { c̄(z, a) + α Σ_y R'(y|z,a) V(H(z, a, y)) }
//! ```
//!
//! with `c̄(z, a) = Σ_x z(x) c(x, a)`. Value functions come in two shapes: a
//! set of alpha vectors (exact for finite horizons) and values on a regular
//! grid over the belief simplex (approximate, any horizon).

mod alpha;
mod grid;
mod simulate;

pub use alpha::{alpha_backup, alpha_solve, AlphaVector, AlphaVectorSet, Pruning};
pub use grid::{value_iterate_grid, BeliefGridValues, GridSolution, SimplexGrid, OVERFLOW_GUARD};
pub use simulate::{simulate_policy, Policy, SimulationEstimate};

use crate::error::Result;
use crate::filter::{joint_update, posterior_or};
use crate::model::{Belief, DiscretePomdp};

/// Tolerance on the Bellman minimum used by greedy action selection.
pub const BELLMAN_TOL: f64 = 1e-9;
/// Default sup-norm stopping tolerance for value iteration.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// A function on beliefs, possibly `+inf`.
pub trait ValueFunction {
    fn value(&self, z: &[f64]) -> f64;
}

/// The same value everywhere.
#[derive(Clone, Copy, Debug)]
pub struct ConstantValue(pub f64);

impl ValueFunction for ConstantValue {
    fn value(&self, _z: &[f64]) -> f64 {
        self.0
    }
}

impl<V: ValueFunction + ?Sized> ValueFunction for &V {
    fn value(&self, z: &[f64]) -> f64 {
        (**self).value(z)
    }
}

/// `Σ_x z(x) c(x, a)` with `0 · inf = 0`.
pub fn lift_cost(model: &DiscretePomdp, z: &Belief, a: usize) -> Result<f64> {
    model.check_belief(z)?;
    model.check_action(a)?;
    Ok(lift_cost_unchecked(model, z, a))
}

pub(crate) fn lift_cost_unchecked(model: &DiscretePomdp, z: &[f64], a: usize) -> f64 {
    z.iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(x, w)| w * model.cost(x, a).value())
        .sum()
}

/// `c̄(z, a) + α Σ_y R'(y|z,a) V(H(z,a,y))` with `0 · inf = 0`.
pub fn q_value(model: &DiscretePomdp, value: &impl ValueFunction, z: &Belief, a: usize) -> Result<f64> {
    let cost = lift_cost(model, z, a)?;
    let alpha = model.discount();
    if alpha == 0.0 || cost == f64::INFINITY {
        return Ok(cost);
    }
    let joint = joint_update(model, z, a)?;
    let marginal = joint.observation_marginal();
    let mut future = 0.0;
    for (y, &m) in marginal.iter().enumerate() {
        if m > 0.0 {
            let post = posterior_or(joint.column(y), z);
            future += m * value.value(&post);
        }
    }
    Ok(cost + alpha * future)
}

/// Q-values of every action at `z`.
pub fn q_values(model: &DiscretePomdp, value: &impl ValueFunction, z: &Belief) -> Result<Vec<f64>> {
    (0..model.n_actions()).map(|a| q_value(model, value, z, a)).collect()
}

/// `(T V)(z)`.
pub fn bellman(model: &DiscretePomdp, value: &impl ValueFunction, z: &Belief) -> Result<f64> {
    Ok(q_values(model, value, z)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Actions whose Q-value is within `tolerance` of the minimum, in index order.
/// Returns every action when `V(z) = +inf`.
pub fn greedy_action_set(
    model: &DiscretePomdp,
    value: &impl ValueFunction,
    z: &Belief,
    tolerance: f64,
) -> Result<Vec<usize>> {
    model.check_belief(z)?;
    if value.value(z) == f64::INFINITY {
        return Ok((0..model.n_actions()).collect());
    }
    let q = q_values(model, value, z)?;
    let best = q.iter().copied().fold(f64::INFINITY, f64::min);
    if best == f64::INFINITY {
        return Ok((0..model.n_actions()).collect());
    }
    Ok(q.iter()
        .enumerate()
        .filter(|(_, v)| **v <= best + tolerance)
        .map(|(a, _)| a)
        .collect())
}

/// `max_z |V(z) - (T V)(z)|` over the sample beliefs (`inf - inf` counts as 0).
pub fn optimality_residual(
    model: &DiscretePomdp,
    value: &impl ValueFunction,
    samples: &[Belief],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for z in samples {
        let lhs = value.value(z);
        let rhs = bellman(model, value, z)?;
        let diff = if lhs == rhs { 0.0 } else { (lhs - rhs).abs() };
        worst = worst.max(diff);
    }
    Ok(worst)
}

/// Stationary policy acting greedily with respect to a value function.
/// Ties go to the lowest action index.
pub struct StationaryIPolicy<'m, V> {
    model: &'m DiscretePomdp,
    value: V,
    tolerance: f64,
}

impl<'m, V: ValueFunction> StationaryIPolicy<'m, V> {
    pub fn new(model: &'m DiscretePomdp, value: V) -> Self {
        StationaryIPolicy {
            model,
            value,
            tolerance: BELLMAN_TOL,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn value_function(&self) -> &V {
        &self.value
    }
}

impl<V: ValueFunction> Policy for StationaryIPolicy<'_, V> {
    fn act(&self, z: &Belief) -> Result<usize> {
        let set = greedy_action_set(self.model, &self.value, z, self.tolerance)?;
        Ok(set[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::tiny;
    use crate::model::CostMode;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lifted_cost_cases() {
        let m = tiny([[0.0, 5.0], [2.0, f64::INFINITY]], 0.5, CostMode::P);
        assert_eq!(lift_cost(&m, &Belief::point_mass(2, 1), 0).unwrap(), 2.0);
        assert_eq!(lift_cost(&m, &Belief::uniform(2), 0).unwrap(), 1.0);
        // infinity times zero weight is zero
        assert_eq!(lift_cost(&m, &Belief::point_mass(2, 0), 1).unwrap(), 5.0);
        assert_eq!(lift_cost(&m, &Belief::uniform(2), 1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn residual_of_zero_function() {
        let m = tiny([[1.0, 2.0], [3.0, 1.0]], 0.5, CostMode::P);
        let r = optimality_residual(&m, &ConstantValue(0.0), &[Belief::point_mass(2, 0)]).unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ties_return_every_action() {
        let m = tiny([[1.0, 1.0], [1.0, 1.0]], 0.0, CostMode::P);
        let set = greedy_action_set(&m, &ConstantValue(0.0), &Belief::uniform(2), BELLMAN_TOL).unwrap();
        assert_eq!(set, vec![0, 1]);
        let inf = greedy_action_set(&m, &ConstantValue(f64::INFINITY), &Belief::uniform(2), BELLMAN_TOL).unwrap();
        assert_eq!(inf, vec![0, 1]);
    }
}

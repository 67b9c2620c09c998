//! Bayes filtering kernels of the belief-state reduction.
//!
//! For a belief `z` and action `a`:
//!
//! ```text
//! R(x', y | z, a) = sum_x z(x) P(x'|x, a) Q(y|a, x')      joint kernel
//! R'(y | z, a)    = sum_x' R(x', y | z, a)                observation marginal
//! H(z, a, y)(x')  = R(x', y | z, a) / R'(y | z, a)         posterior
//! q(. | z, a)     = law of H(z, a, y) for y ~ R'(.|z, a)   belief transition
//! ```
//!
//! When `R'(y|z,a) = 0` the posterior is defined to be `z` itself.

use serde::Serialize;

use crate::error::Result;
use crate::measures::{cluster_points, FiniteMeasure, MetricSupport};
use crate::model::{Belief, DiscretePomdp};

/// Posteriors closer than this componentwise are the same support point.
pub const POSTERIOR_MERGE_TOL: f64 = 1e-12;

/// Joint law of the next state and the next observation.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    n_obs: usize,
    /// Row-major `(x', y)`.
    entries: Vec<f64>,
    /// True when every state in the support of `z` has infinite cost for
    /// the action. The table is still computed.
    pub infeasible: bool,
}

impl JointTable {
    pub fn get(&self, next: usize, y: usize) -> f64 {
        self.entries[next * self.n_obs + y]
    }

    pub fn n_states(&self) -> usize {
        self.entries.len() / self.n_obs
    }

    pub fn n_observations(&self) -> usize {
        self.n_obs
    }

    /// Column sums: `R'(y|z,a)`.
    pub fn observation_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_obs];
        for row in self.entries.chunks(self.n_obs) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// Row sums: the predictive law of the next state.
    pub fn state_marginal(&self) -> Vec<f64> {
        self.entries.chunks(self.n_obs).map(|r| r.iter().sum()).collect()
    }

    /// Column `y`: unnormalised posterior over next states.
    pub fn column(&self, y: usize) -> Vec<f64> {
        self.entries.chunks(self.n_obs).map(|r| r[y]).collect()
    }
}

/// `sum_x z(x) P(.|x, a)`.
pub fn predict(model: &DiscretePomdp, z: &Belief, a: usize) -> Result<Vec<f64>> {
    model.check_belief(z)?;
    model.check_action(a)?;
    let mut pred = vec![0.0; model.n_states()];
    for x in z.support() {
        let w = z[x];
        for (p, t) in pred.iter_mut().zip(model.transition_row(a, x)) {
            *p += w * t;
        }
    }
    Ok(pred)
}

pub fn joint_update(model: &DiscretePomdp, z: &Belief, a: usize) -> Result<JointTable> {
    let pred = predict(model, z, a)?;
    let n_obs = model.n_observations();
    let mut entries = vec![0.0; model.n_states() * n_obs];
    for (next, &w) in pred.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = &mut entries[next * n_obs..(next + 1) * n_obs];
        for (e, q) in row.iter_mut().zip(model.observation_row(a, next)) {
            *e = w * q;
        }
    }
    let infeasible = z.support().all(|x| !model.cost(x, a).is_finite());
    Ok(JointTable {
        n_obs,
        entries,
        infeasible,
    })
}

/// `R'(.|z,a)` as raw weights indexed by observation.
pub fn observation_weights(model: &DiscretePomdp, z: &Belief, a: usize) -> Result<Vec<f64>> {
    let pred = predict(model, z, a)?;
    let mut out = vec![0.0; model.n_observations()];
    for (next, &w) in pred.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, q) in out.iter_mut().zip(model.observation_row(a, next)) {
            *o += w * q;
        }
    }
    Ok(out)
}

/// `R'(.|z,a)` as a measure on the observation points.
pub fn obs_marginal(model: &DiscretePomdp, z: &Belief, a: usize) -> Result<FiniteMeasure> {
    let w = observation_weights(model, z, a)?;
    FiniteMeasure::new(
        model.observation_metric(),
        model.observations().iter().map(|o| o.coords.clone()).collect(),
        w,
    )
}

/// Normalises an unnormalised posterior, falling back to `z` on zero mass.
pub(crate) fn posterior_or(unnorm: Vec<f64>, fallback: &Belief) -> Belief {
    let mass: f64 = unnorm.iter().sum();
    if mass > 0.0 {
        // cannot fail: entries are nonnegative with positive total
        Belief::normalized(unnorm).unwrap_or_else(|_| fallback.clone())
    } else {
        fallback.clone()
    }
}

/// `H(z, a, y)`.
pub fn bayes_update(model: &DiscretePomdp, z: &Belief, a: usize, y: usize) -> Result<Belief> {
    model.check_observation(y)?;
    let pred = predict(model, z, a)?;
    let unnorm: Vec<f64> = pred
        .iter()
        .enumerate()
        .map(|(next, w)| w * model.observation_row(a, next)[y])
        .collect();
    Ok(posterior_or(unnorm, z))
}

/// `H0(p, y)(x) ∝ p(x) Q0(y|x)`; returns `p` when `y` has zero probability.
pub fn initial_posterior(model: &DiscretePomdp, p: &Belief, y: usize) -> Result<Belief> {
    model.check_belief(p)?;
    model.check_observation(y)?;
    let unnorm: Vec<f64> = p
        .iter()
        .enumerate()
        .map(|(x, w)| w * model.initial_observation_row(x)[y])
        .collect();
    Ok(posterior_or(unnorm, p))
}

/// Finitely supported law over beliefs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BeliefDistribution {
    support: Vec<Belief>,
    weights: Vec<f64>,
}

impl BeliefDistribution {
    /// Merges posteriors that agree componentwise within
    /// [`POSTERIOR_MERGE_TOL`]; the first occurrence is kept as representative.
    pub fn from_weighted(points: Vec<(Belief, f64)>) -> Self {
        let refs: Vec<&[f64]> = points.iter().map(|(b, _)| &**b).collect();
        let groups = cluster_points(&refs, POSTERIOR_MERGE_TOL, |a, b| {
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        });
        let total: f64 = points.iter().map(|(_, w)| w).sum();
        let mut support = Vec::with_capacity(groups.len());
        let mut weights = Vec::with_capacity(groups.len());
        for g in groups {
            support.push(points[g[0]].0.clone());
            weights.push(g.iter().map(|&i| points[i].1).sum::<f64>() / total);
        }
        BeliefDistribution { support, weights }
    }

    pub fn support(&self) -> &[Belief] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Belief, f64)> {
        self.support.iter().zip(self.weights.iter().copied())
    }

    /// Mass of the beliefs satisfying `pred`.
    pub fn mass_where(&self, mut pred: impl FnMut(&Belief) -> bool) -> f64 {
        self.iter().filter(|(b, _)| pred(b)).map(|(_, w)| w).sum()
    }

    /// Weight on the support point within tolerance of `z`, if any.
    pub fn weight_of(&self, z: &[f64], tol: f64) -> f64 {
        self.iter()
            .filter(|(b, _)| b.iter().zip(z).all(|(u, v)| (u - v).abs() <= tol))
            .map(|(_, w)| w)
            .sum()
    }

    /// The law as a measure on belief vectors with the Euclidean metric.
    pub fn to_measure(&self) -> Result<FiniteMeasure> {
        let dim = self.support.first().map_or(1, |b| b.len());
        FiniteMeasure::new(
            MetricSupport::EuclideanNd { dim },
            self.support.iter().map(|b| b.to_vec()).collect(),
            self.weights.clone(),
        )
    }
}

/// `q(.|z, a)`: one posterior per observation of positive probability.
pub fn belief_transition(model: &DiscretePomdp, z: &Belief, a: usize) -> Result<BeliefDistribution> {
    let joint = joint_update(model, z, a)?;
    let marginal = joint.observation_marginal();
    let points = marginal
        .iter()
        .enumerate()
        .filter(|(_, m)| **m > 0.0)
        .map(|(y, m)| (posterior_or(joint.column(y), z), *m))
        .collect();
    Ok(BeliefDistribution::from_weighted(points))
}

/// `q0(.|p)`: law of the initial posterior.
pub fn initial_belief(model: &DiscretePomdp, p: &Belief) -> Result<BeliefDistribution> {
    model.check_belief(p)?;
    let ny = model.n_observations();
    let mut points = Vec::new();
    for y in 0..ny {
        let unnorm: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(x, w)| w * model.initial_observation_row(x)[y])
            .collect();
        let mass: f64 = unnorm.iter().sum();
        if mass > 0.0 {
            points.push((posterior_or(unnorm, p), mass));
        }
    }
    Ok(BeliefDistribution::from_weighted(points))
}

//! Shared helpers for the integration tests: random models and brute-force
//! oracles that do not go through the filter.

#![allow(dead_code)]

use beliefmdp::{Belief, Cost, CostMode, DiscretePomdp, LabeledPoint, MetricSupport, ModelParts};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Probability row of length `n`; with probability `sparsity` an entry is
/// zeroed, but at least one entry stays positive.
pub fn random_row(rng: &mut ChaCha8Rng, n: usize, sparsity: f64) -> Vec<f64> {
    let mut row: Vec<f64> = (0..n)
        .map(|_| if rng.gen::<f64>() < sparsity { 0.0 } else { rng.gen::<f64>() + 0.05 })
        .collect();
    if row.iter().all(|v| *v == 0.0) {
        row[rng.gen_range(0..n)] = 1.0;
    }
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= total);
    row
}

pub fn random_belief(rng: &mut ChaCha8Rng, n: usize) -> Belief {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    Belief::normalized(w).unwrap()
}

pub struct ModelShape {
    pub nx: usize,
    pub ny: usize,
    pub na: usize,
    pub mode: CostMode,
    pub discount: f64,
    /// Costs are drawn uniformly from this range.
    pub cost_range: (f64, f64),
    /// Chance that a cost entry is `+inf` (mode P only).
    pub infinite_cost: f64,
    pub sparsity: f64,
}

pub fn random_model(rng: &mut ChaCha8Rng, shape: &ModelShape) -> DiscretePomdp {
    let ModelShape { nx, ny, na, .. } = *shape;
    let labels = |p: &str, n: usize| -> Vec<LabeledPoint> {
        (0..n).map(|i| LabeledPoint::new(format!("{p}{i}"), vec![i as f64])).collect()
    };
    let cost = (0..nx)
        .map(|_| {
            (0..na)
                .map(|_| {
                    if shape.mode == CostMode::P && rng.gen::<f64>() < shape.infinite_cost {
                        Cost::Infinite
                    } else {
                        Cost::Finite(rng.gen_range(shape.cost_range.0..=shape.cost_range.1))
                    }
                })
                .collect()
        })
        .collect();
    DiscretePomdp::from_parts(ModelParts {
        states: labels("x", nx),
        state_metric: MetricSupport::Euclidean1d,
        observations: labels("y", ny),
        actions: labels("a", na),
        transition: (0..na)
            .map(|_| (0..nx).map(|_| random_row(rng, nx, shape.sparsity)).collect())
            .collect(),
        observation: (0..na)
            .map(|_| (0..nx).map(|_| random_row(rng, ny, shape.sparsity)).collect())
            .collect(),
        initial_observation: (0..nx).map(|_| random_row(rng, ny, shape.sparsity)).collect(),
        prior: random_row(rng, nx, shape.sparsity),
        cost,
        discount: shape.discount,
        cost_mode: shape.mode,
        sink_observations: vec![],
    })
    .unwrap()
}

pub fn draw(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    WeightedIndex::new(weights).unwrap().sample(rng)
}

/// `P(x_T = . | y_0, a_0, y_1, ..., a_{T-1}, y_T)` by summing over every
/// state path. Returns `None` when the observations have probability zero.
pub fn enumerate_posterior(
    model: &DiscretePomdp,
    prior: &[f64],
    actions: &[usize],
    observations: &[usize],
) -> Option<Vec<f64>> {
    let nx = model.n_states();
    let t_max = actions.len();
    let mut out = vec![0.0; nx];
    let mut path = vec![0usize; t_max + 1];
    let total_paths = nx.pow(t_max as u32 + 1);
    for code in 0..total_paths {
        let mut c = code;
        for slot in path.iter_mut() {
            *slot = c % nx;
            c /= nx;
        }
        let mut p = prior[path[0]] * model.initial_observation_row(path[0])[observations[0]];
        for t in 0..t_max {
            let a = actions[t];
            p *= model.transition_row(a, path[t])[path[t + 1]] * model.observation_row(a, path[t + 1])[observations[t + 1]];
        }
        out[path[t_max]] += p;
    }
    let total: f64 = out.iter().sum();
    if total == 0.0 {
        return None;
    }
    out.iter_mut().for_each(|v| *v /= total);
    Some(out)
}

/// Optimal expected cost of `horizon = 2` stages from belief `z`, by
/// enumerating every first action and every observation-to-action map.
pub fn two_step_enumeration(model: &DiscretePomdp, z: &[f64]) -> f64 {
    let (nx, ny, na) = (model.n_states(), model.n_observations(), model.n_actions());
    let alpha = model.discount();
    let maps = na.pow(ny as u32);
    let mut best = f64::INFINITY;
    for a0 in 0..na {
        for code in 0..maps {
            let sigma: Vec<usize> = (0..ny).map(|y| (code / na.pow(y as u32)) % na).collect();
            let mut total = 0.0;
            for x0 in 0..nx {
                if z[x0] == 0.0 {
                    continue;
                }
                let mut stage = model.cost(x0, a0).value();
                for x1 in 0..nx {
                    let p = model.transition_row(a0, x0)[x1];
                    for (y, &a1) in sigma.iter().enumerate() {
                        let q = model.observation_row(a0, x1)[y];
                        if p * q > 0.0 {
                            stage += alpha * p * q * model.cost(x1, a1).value();
                        }
                    }
                }
                total += z[x0] * stage;
            }
            best = best.min(total);
        }
    }
    best
}

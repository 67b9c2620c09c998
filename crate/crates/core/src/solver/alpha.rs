use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rayon::prelude::*;
use serde::Serialize;

use super::ValueFunction;
use crate::error::{Error, Result};
use crate::model::DiscretePomdp;

/// A linear function of the belief, tagged with the action that generated it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaVector {
    pub values: Vec<f64>,
    /// `None` for the horizon-0 zero vector.
    pub action: Option<usize>,
}

impl AlphaVector {
    /// `⟨v, z⟩` with `0 · inf = 0`.
    pub fn dot(&self, z: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(z)
            .filter(|(_, w)| **w > 0.0)
            .map(|(v, w)| v * w)
            .sum()
    }

    /// True when `self <= other` in every coordinate.
    fn dominates(&self, other: &AlphaVector) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a <= b)
    }
}

/// Value function `V(z) = min_k ⟨v_k, z⟩` for a finite horizon.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaVectorSet {
    pub vectors: Vec<AlphaVector>,
    pub horizon: usize,
}

impl AlphaVectorSet {
    /// Horizon 0: the zero function.
    pub fn zero(n_states: usize) -> Self {
        AlphaVectorSet {
            vectors: vec![AlphaVector {
                values: vec![0.0; n_states],
                action: None,
            }],
            horizon: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Minimising vector at `z` (first one on ties).
    pub fn best(&self, z: &[f64]) -> &AlphaVector {
        let mut best = &self.vectors[0];
        let mut val = best.dot(z);
        for v in &self.vectors[1..] {
            let d = v.dot(z);
            if d < val {
                val = d;
                best = v;
            }
        }
        best
    }
}

impl ValueFunction for AlphaVectorSet {
    fn value(&self, z: &[f64]) -> f64 {
        self.vectors
            .iter()
            .map(|v| v.dot(z))
            .fold(f64::INFINITY, f64::min)
    }
}

/// How dominated alpha vectors are removed after each cross-sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Pruning {
    /// Drop vectors that are pointwise no better than another vector.
    #[default]
    Pointwise,
    /// Pointwise, then drop finite vectors that are nowhere strictly best
    /// on the simplex (one linear program per vector).
    Exact,
}

fn prune_pointwise(vectors: Vec<AlphaVector>) -> Vec<AlphaVector> {
    let mut kept: Vec<AlphaVector> = Vec::with_capacity(vectors.len());
    'next: for v in vectors {
        for k in &kept {
            if k.dominates(&v) {
                continue 'next;
            }
        }
        kept.retain(|k| !v.dominates(k));
        kept.push(v);
    }
    kept
}

/// Largest margin by which `v` beats every other finite vector somewhere on
/// the simplex.
fn witness_margin(v: &AlphaVector, others: &[&AlphaVector]) -> Result<f64> {
    let n = v.values.len();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let z: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    let delta = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let simplex: Vec<_> = z.iter().map(|&zi| (zi, 1.0)).collect();
    lp.add_constraint(simplex.as_slice(), ComparisonOp::Eq, 1.0);
    for w in others {
        let mut row: Vec<_> = z
            .iter()
            .enumerate()
            .map(|(i, &zi)| (zi, w.values[i] - v.values[i]))
            .collect();
        row.push((delta, -1.0));
        lp.add_constraint(row.as_slice(), ComparisonOp::Ge, 0.0);
    }
    let sol = lp.solve().map_err(|e| Error::Lp(e.to_string()))?;
    Ok(sol.objective())
}

fn prune_exact(vectors: Vec<AlphaVector>) -> Result<Vec<AlphaVector>> {
    let mut kept = prune_pointwise(vectors);
    let mut i = 0;
    while i < kept.len() {
        let v = &kept[i];
        let finite = |w: &AlphaVector| w.values.iter().all(|x| x.is_finite());
        if finite(v) {
            let others: Vec<&AlphaVector> = kept
                .iter()
                .enumerate()
                .filter(|(j, w)| *j != i && finite(w))
                .map(|(_, w)| w)
                .collect();
            if !others.is_empty() && witness_margin(v, &others)? <= 1e-12 {
                kept.remove(i);
                continue;
            }
        }
        i += 1;
    }
    Ok(kept)
}

fn prune(vectors: Vec<AlphaVector>, pruning: Pruning) -> Result<Vec<AlphaVector>> {
    match pruning {
        Pruning::Pointwise => Ok(prune_pointwise(vectors)),
        Pruning::Exact => prune_exact(vectors),
    }
}

/// `α Σ_x' P(x'|x,a) Q(y|a,x') g(x')` as a vector over `x`, with `0 · inf = 0`.
fn project(model: &DiscretePomdp, a: usize, y: usize, g: &[f64]) -> Vec<f64> {
    let alpha = model.discount();
    (0..model.n_states())
        .map(|x| {
            let s: f64 = model
                .transition_row(a, x)
                .iter()
                .enumerate()
                .map(|(next, p)| p * model.observation_row(a, next)[y])
                .zip(g)
                .filter(|(w, _)| *w > 0.0)
                .map(|(w, gv)| w * gv)
                .sum();
            alpha * s
        })
        .collect()
}

fn cross_sum(left: &[AlphaVector], right: &[AlphaVector]) -> Vec<AlphaVector> {
    let mut out = Vec::with_capacity(left.len() * right.len());
    for l in left {
        for r in right {
            out.push(AlphaVector {
                values: l.values.iter().zip(&r.values).map(|(a, b)| a + b).collect(),
                action: l.action,
            });
        }
    }
    out
}

/// One exact backup: the alpha-vector set of horizon `t + 1` from horizon `t`.
///
/// For each action the candidates are `c(., a)` plus, for every observation,
/// one projected vector chosen from `previous`; the cross-sum over
/// observations is pruned as it is built, which is safe because a dominated
/// partial sum stays dominated after adding the same vectors.
pub fn alpha_backup(
    model: &DiscretePomdp,
    previous: &AlphaVectorSet,
    pruning: Pruning,
) -> Result<AlphaVectorSet> {
    let nx = model.n_states();
    if previous.is_empty() || previous.vectors.iter().any(|v| v.values.len() != nx) {
        return Err(Error::DimensionMismatch(format!(
            "alpha vectors must be nonempty with {nx} entries"
        )));
    }
    let per_action: Vec<Result<Vec<AlphaVector>>> = (0..model.n_actions())
        .into_par_iter()
        .map(|a| {
            let cost = AlphaVector {
                values: (0..nx).map(|x| model.cost(x, a).value()).collect(),
                action: Some(a),
            };
            let mut acc = vec![cost];
            if model.discount() == 0.0 {
                return Ok(acc);
            }
            for y in 0..model.n_observations() {
                let projected: Vec<AlphaVector> = previous
                    .vectors
                    .iter()
                    .map(|g| AlphaVector {
                        values: project(model, a, y, &g.values),
                        action: None,
                    })
                    .collect();
                let projected = prune(projected, pruning)?;
                acc = prune(cross_sum(&acc, &projected), pruning)?;
            }
            Ok(acc)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_action {
        all.extend(r?);
    }
    Ok(AlphaVectorSet {
        vectors: prune(all, pruning)?,
        horizon: previous.horizon + 1,
    })
}

/// Applies [`alpha_backup`] `horizon` times starting from the zero function.
pub fn alpha_solve(model: &DiscretePomdp, horizon: usize, pruning: Pruning) -> Result<Vec<AlphaVectorSet>> {
    let mut sets = vec![AlphaVectorSet::zero(model.n_states())];
    for _ in 0..horizon {
        let next = alpha_backup(model, sets.last().unwrap(), pruning)?;
        sets.push(next);
    }
    Ok(sets)
}

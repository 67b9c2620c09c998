use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{lift_cost_unchecked, ValueFunction};
use crate::error::{Error, Result};
use crate::filter::{joint_update, posterior_or};
use crate::model::{Belief, DiscretePomdp};

/// Grid values above this are reported as `+inf`.
pub const OVERFLOW_GUARD: f64 = 1e15;

/// Refuse to build grids with more vertices than this.
const MAX_VERTICES: usize = 5_000_000;

/// The lattice `{ z : r·z ∈ ℕ^n, Σ z = 1 }` with Freudenthal triangulation.
#[derive(Clone, Debug)]
pub struct SimplexGrid {
    n: usize,
    resolution: u32,
    vertices: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

fn compositions(n: usize, r: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == n {
        let used: u32 = prefix.iter().sum();
        prefix.push(r - used);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    let used: u32 = prefix.iter().sum();
    for c in (0..=r - used).rev() {
        prefix.push(c);
        compositions(n, r, prefix, out);
        prefix.pop();
    }
}

impl SimplexGrid {
    /// All beliefs over `n` states whose entries are multiples of `1/r`.
    pub fn new(n: usize, resolution: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("grid needs at least one state".into()));
        }
        if resolution == 0 {
            return Err(Error::InvalidArgument("grid resolution must be at least 1".into()));
        }
        let count = binomial(resolution as usize + n - 1, n - 1);
        match count {
            Some(c) if c <= MAX_VERTICES => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "grid with {n} states at resolution {resolution} exceeds {MAX_VERTICES} vertices"
                )))
            }
        }
        let mut vertices = Vec::new();
        compositions(n, resolution, &mut Vec::with_capacity(n), &mut vertices);
        let index = vertices.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        Ok(SimplexGrid {
            n,
            resolution,
            vertices,
            index,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Integer counts of vertex `i` (they sum to the resolution).
    pub fn counts(&self, i: usize) -> &[u32] {
        &self.vertices[i]
    }

    pub fn vertex(&self, i: usize) -> Belief {
        let r = self.resolution as f64;
        Belief::normalized(self.vertices[i].iter().map(|&c| c as f64 / r).collect())
            .expect("grid vertices are probability vectors")
    }

    pub fn vertices(&self) -> impl Iterator<Item = Belief> + '_ {
        (0..self.len()).map(|i| self.vertex(i))
    }

    /// Index of the vertex with these counts.
    pub fn find(&self, counts: &[u32]) -> Option<usize> {
        self.index.get(counts).copied()
    }

    /// Vertices of the sub-simplex containing `z` with their barycentric
    /// weights. Weights are positive and sum to 1; zero-weight corners are
    /// omitted.
    pub fn interpolate(&self, z: &[f64]) -> Vec<(usize, f64)> {
        let n = self.n;
        let r = self.resolution as f64;
        if n == 1 {
            return vec![(0, 1.0)];
        }
        // Cumulative coordinates x_i = r Σ_{j>=i} z_j, forced monotone.
        let mut x = vec![0.0; n];
        let mut acc = 0.0;
        for i in (1..n).rev() {
            acc += z[i].max(0.0);
            x[i] = (r * acc).min(r);
        }
        x[0] = r;
        for i in (1..n - 1).rev() {
            if x[i] < x[i + 1] {
                x[i] = x[i + 1];
            }
        }
        // Snap roundoff so that lattice points hit exactly one corner.
        for v in x.iter_mut() {
            let near = v.round();
            if (*v - near).abs() < 1e-10 {
                *v = near;
            }
        }
        let base: Vec<i64> = x.iter().map(|v| v.floor() as i64).collect();
        let frac: Vec<f64> = x.iter().zip(&base).map(|(v, b)| v - *b as f64).collect();
        let mut order: Vec<usize> = (1..n).collect();
        order.sort_by(|&i, &j| frac[j].total_cmp(&frac[i]).then(i.cmp(&j)));

        let mut out = Vec::with_capacity(n);
        let mut corner = base.clone();
        let to_counts = |u: &[i64]| -> Vec<u32> {
            (0..n)
                .map(|i| (u[i] - if i + 1 < n { u[i + 1] } else { 0 }) as u32)
                .collect()
        };
        let push = |u: &[i64], w: f64, out: &mut Vec<(usize, f64)>| {
            if w > 0.0 {
                let idx = self
                    .find(&to_counts(u))
                    .expect("triangulation corner lies on the grid");
                out.push((idx, w));
            }
        };
        push(&corner, 1.0 - frac[order[0]], &mut out);
        for k in 1..n {
            let p = order[k - 1];
            corner[p] += 1;
            let next = if k < n - 1 { frac[order[k]] } else { 0.0 };
            push(&corner, frac[p] - next, &mut out);
        }
        out
    }
}

/// Values at the vertices of a [`SimplexGrid`], interpolated in between.
#[derive(Clone, Debug)]
pub struct BeliefGridValues {
    pub grid: SimplexGrid,
    pub values: Vec<f64>,
}

impl BeliefGridValues {
    pub fn constant(grid: SimplexGrid, value: f64) -> Self {
        let values = vec![value; grid.len()];
        BeliefGridValues { grid, values }
    }
}

impl ValueFunction for BeliefGridValues {
    fn value(&self, z: &[f64]) -> f64 {
        self.grid
            .interpolate(z)
            .into_iter()
            .map(|(i, w)| w * self.values[i])
            .sum()
    }
}

/// Result of [`value_iterate_grid`].
#[derive(Clone, Debug)]
pub struct GridSolution {
    pub values: BeliefGridValues,
    /// Sup-norm change per sweep.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
struct ActionStep {
    cost: f64,
    /// Aggregated vertex weights of the successor law.
    successors: Vec<(usize, f64)>,
}

fn precompute(model: &DiscretePomdp, grid: &SimplexGrid) -> Result<Vec<Vec<ActionStep>>> {
    let alpha = model.discount();
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let z = grid.vertex(i);
            (0..model.n_actions())
                .map(|a| {
                    let cost = lift_cost_unchecked(model, &z, a);
                    let mut successors = Vec::new();
                    if alpha > 0.0 && cost.is_finite() {
                        let joint = joint_update(model, &z, a)?;
                        for (y, m) in joint.observation_marginal().into_iter().enumerate() {
                            if m > 0.0 {
                                let post = posterior_or(joint.column(y), &z);
                                for (j, w) in grid.interpolate(&post) {
                                    successors.push((j, m * w));
                                }
                            }
                        }
                        successors.sort_by_key(|s| s.0);
                        successors.dedup_by(|later, earlier| {
                            if later.0 == earlier.0 {
                                earlier.1 += later.1;
                                true
                            } else {
                                false
                            }
                        });
                    }
                    Ok(ActionStep { cost, successors })
                })
                .collect()
        })
        .collect()
}

fn sweep(steps: &[Vec<ActionStep>], values: &[f64], alpha: f64) -> Vec<f64> {
    steps
        .par_iter()
        .map(|actions| {
            let best = actions
                .iter()
                .map(|s| {
                    if !s.cost.is_finite() || alpha == 0.0 {
                        return s.cost;
                    }
                    let future: f64 = s.successors.iter().map(|&(j, w)| w * values[j]).sum();
                    s.cost + alpha * future
                })
                .fold(f64::INFINITY, f64::min);
            if best > OVERFLOW_GUARD {
                f64::INFINITY
            } else {
                best
            }
        })
        .collect()
}

fn sup_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(a, b)| if a == b { 0.0 } else { (a - b).abs() })
        .fold(0.0, f64::max)
}

/// Value iteration from `V ≡ 0` on the grid of resolution `r`.
///
/// Each sweep applies the Bellman operator at every vertex, with successor
/// beliefs replaced by their barycentric corners. Stops once the sup-norm
/// change is at most `epsilon` or after `max_iters` sweeps.
pub fn value_iterate_grid(
    model: &DiscretePomdp,
    resolution: u32,
    max_iters: usize,
    epsilon: f64,
) -> Result<GridSolution> {
    let grid = SimplexGrid::new(model.n_states(), resolution)?;
    let steps = precompute(model, &grid)?;
    let alpha = model.discount();
    let mut values = vec![0.0; grid.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iters {
        let next = sweep(&steps, &values, alpha);
        let delta = sup_change(&values, &next);
        values = next;
        trace.push(delta);
        if delta <= epsilon {
            converged = true;
            break;
        }
    }
    Ok(GridSolution {
        iterations: trace.len(),
        values: BeliefGridValues { grid, values },
        trace,
        converged,
    })
}

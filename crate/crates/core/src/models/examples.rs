//! Small counterexample models with two hidden states that never move.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::measures::MetricSupport;
use crate::model::{Cost, CostMode, DiscretePomdp, LabeledPoint, ModelParts};

/// Discount used by the counterexample builders.
pub const EXAMPLE_DISCOUNT: f64 = 0.9;

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn two_states() -> Vec<LabeledPoint> {
    vec![LabeledPoint::new("1", vec![1.0]), LabeledPoint::new("2", vec![2.0])]
}

/// `c(x, a) = 1{x = 2}` for every action.
fn second_state_cost(n_states: usize, n_actions: usize, is_second: impl Fn(usize) -> bool) -> Vec<Vec<Cost>> {
    (0..n_states)
        .map(|x| vec![Cost::Finite(if is_second(x) { 1.0 } else { 0.0 }); n_actions])
        .collect()
}

/// `{0} ∪ {1/j : j = 1..n}` in that order.
fn reciprocal_actions(n: usize) -> Vec<LabeledPoint> {
    std::iter::once(LabeledPoint::new("0", vec![0.0]))
        .chain((1..=n).map(|j| LabeledPoint::new(format!("1/{j}"), vec![1.0 / j as f64])))
        .collect()
}

/// Cell masses of the measure with density `f_j` on `cells` equal cells of
/// `[0, 1]`: density 0 on even-numbered dyadic intervals of length `2^-j`,
/// 2 on odd-numbered ones. Exact when `2^j` divides `cells`.
pub fn dyadic_density_masses(j: u32, cells: usize) -> Vec<f64> {
    let per = cells >> j;
    (0..cells)
        .map(|c| if (c / per).is_multiple_of(2) { 0.0 } else { 2.0 / cells as f64 })
        .collect()
}

fn check_dyadic(n: u32, cells: usize) -> Result<()> {
    if n == 0 || n > 30 {
        return Err(Error::InvalidArgument(format!("density index n must be in 1..=30, got {n}")));
    }
    if cells == 0 || !cells.is_multiple_of(1usize << n) {
        return Err(Error::InvalidArgument(format!(
            "cells ({cells}) must be a positive multiple of 2^{n}"
        )));
    }
    Ok(())
}

fn cell_points(cells: usize) -> Vec<LabeledPoint> {
    (0..cells)
        .map(|c| LabeledPoint::new(format!("y{c}"), vec![(c as f64 + 0.5) / cells as f64]))
        .collect()
}

/// Two frozen states observed through `[0, 1]` split into `cells` cells.
///
/// Actions are `0` and `1/j` for `j <= n`. State 1 always emits a uniform
/// observation; state 2 does too under action 0 but under `1/j` its
/// observation has density `f_j`. Costs are `1{x = 2}`, mode P.
pub fn build_example_4_1(n: u32, cells: usize) -> Result<DiscretePomdp> {
    check_dyadic(n, cells)?;
    let actions = reciprocal_actions(n as usize);
    let uniform = vec![1.0 / cells as f64; cells];
    let observation = (0..actions.len())
        .map(|a| {
            let second = if a == 0 { uniform.clone() } else { dyadic_density_masses(a as u32, cells) };
            vec![uniform.clone(), second]
        })
        .collect();
    DiscretePomdp::from_parts(ModelParts {
        states: two_states(),
        state_metric: MetricSupport::Euclidean1d,
        observations: cell_points(cells),
        transition: vec![identity(2); actions.len()],
        observation,
        initial_observation: vec![uniform.clone(), uniform],
        prior: vec![0.5, 0.5],
        cost: second_state_cost(2, actions.len(), |x| x == 1),
        actions,
        discount: EXAMPLE_DISCOUNT,
        cost_mode: CostMode::P,
        sink_observations: vec![],
    })
}

/// `{-1/k, 1/k : k = 1..k_max} ∪ {0}`, ascending.
pub fn example_4_2_actions(k_max: usize) -> Vec<f64> {
    let mut a: Vec<f64> = (1..=k_max).map(|k| -1.0 / k as f64).collect();
    a.push(0.0);
    a.extend((1..=k_max).rev().map(|k| 1.0 / k as f64));
    a
}

/// `Q(1|a, 1)`, `Q(1|a, 2)`.
fn example_4_2_q1(a: f64) -> [f64; 2] {
    if a < 0.0 {
        [a.abs(), a * a]
    } else {
        [a * a, a.abs()]
    }
}

/// Two frozen states, two observations, actions in `[-1, 1]`.
///
/// Observation 1 has probability `|a|` (`a < 0`) or `a²` (`a >= 0`) in
/// state 1, and `a²` (`a < 0`) or `|a|` (`a >= 0`) in state 2.
pub fn build_example_4_2(actions: &[f64]) -> Result<DiscretePomdp> {
    if actions.is_empty() {
        return Err(Error::InvalidArgument("action grid is empty".into()));
    }
    if let Some(a) = actions.iter().find(|a| !(-1.0..=1.0).contains(*a)) {
        return Err(Error::InvalidArgument(format!("action {a} outside [-1, 1]")));
    }
    let labels: Vec<LabeledPoint> = actions
        .iter()
        .map(|&a| LabeledPoint::new(format!("{a}"), vec![a]))
        .collect();
    let observation = actions
        .iter()
        .map(|&a| {
            let q = example_4_2_q1(a);
            vec![vec![q[0], 1.0 - q[0]], vec![q[1], 1.0 - q[1]]]
        })
        .collect();
    DiscretePomdp::from_parts(ModelParts {
        states: two_states(),
        state_metric: MetricSupport::Euclidean1d,
        observations: two_states(),
        transition: vec![identity(2); actions.len()],
        observation,
        initial_observation: vec![vec![0.5, 0.5]; 2],
        prior: vec![0.5, 0.5],
        cost: second_state_cost(2, actions.len(), |x| x == 1),
        actions: labels,
        discount: EXAMPLE_DISCOUNT,
        cost_mode: CostMode::P,
        sink_observations: vec![],
    })
}

/// `sin²(π n / 2m)`, exact at the zeros and maxima.
pub fn sin_sq_half_turn(n: usize, m: usize) -> f64 {
    let r = n % (2 * m);
    if r == 0 {
        0.0
    } else if r == m {
        1.0
    } else {
        let s = (PI * r as f64 / (2 * m) as f64).sin();
        s * s
    }
}

/// Observations `0`, `1/n` for `n <= 2 m_max (K + 1)`, and a sink.
///
/// Under action `1/m`, observation `1/n` with `n = 2mk + l` has probability
/// `sin²(πn/2m) / (2^(k+1) m)` in state 1 and the same with `cos²` in
/// state 2. Rows are truncated after block `k = K`; the missing
/// `2^-(K+1)` goes to the sink observation in both states, so the sink is
/// uninformative. Action 0 always yields observation 0.
pub fn build_example_4_3(m_max: usize, truncation: usize) -> Result<DiscretePomdp> {
    if m_max == 0 {
        return Err(Error::InvalidArgument("m_max must be at least 1".into()));
    }
    if truncation == 0 || truncation > 50 {
        return Err(Error::InvalidArgument(format!(
            "truncation K must be in 1..=50, got {truncation}"
        )));
    }
    let n_max = 2 * m_max * (truncation + 1);
    let ny = n_max + 2;
    let sink = ny - 1;
    let mut observations = vec![LabeledPoint::new("0", vec![0.0])];
    observations.extend((1..=n_max).map(|n| LabeledPoint::new(format!("1/{n}"), vec![1.0 / n as f64])));
    observations.push(LabeledPoint::new("sink", vec![-1.0]));

    let actions = reciprocal_actions(m_max);
    let defect = 0.5f64.powi(truncation as i32 + 1);
    let mut observation = Vec::with_capacity(actions.len());
    let mut zero_row = vec![0.0; ny];
    zero_row[0] = 1.0;
    observation.push(vec![zero_row.clone(), zero_row.clone()]);
    for m in 1..=m_max {
        let mut rows = vec![vec![0.0; ny], vec![0.0; ny]];
        for n in 1..=2 * m * (truncation + 1) {
            let k = (n - 1) / (2 * m);
            let weight = 0.5f64.powi(k as i32 + 1) / m as f64;
            let s = sin_sq_half_turn(n, m);
            rows[0][n] = weight * s;
            rows[1][n] = weight * (1.0 - s);
        }
        rows[0][sink] = defect;
        rows[1][sink] = defect;
        observation.push(rows);
    }
    DiscretePomdp::from_parts(ModelParts {
        states: two_states(),
        state_metric: MetricSupport::Euclidean1d,
        observations,
        transition: vec![identity(2); actions.len()],
        observation,
        initial_observation: vec![zero_row.clone(), zero_row],
        prior: vec![0.5, 0.5],
        cost: second_state_cost(2, actions.len(), |x| x == 1),
        actions,
        discount: EXAMPLE_DISCOUNT,
        cost_mode: CostMode::P,
        sink_observations: vec![sink],
    })
}

/// Index of state `(cell, w)` in [`build_mdmii_8_1`], `w ∈ {1, 2}`.
pub fn mdmii_state(cells: usize, cell: usize, w: usize) -> usize {
    (w - 1) * cells + cell
}

/// Observed cell `y` and hidden label `w ∈ {1, 2}`; `w` never changes.
///
/// The next cell is drawn independently of the current one, uniformly
/// unless `w = 2` and the action is `1/j`, in which case it has density
/// `f_j`. The cell is observed exactly. Prior uniform over all states,
/// costs `1{w = 2}`.
pub fn build_mdmii_8_1(n: u32, cells: usize) -> Result<DiscretePomdp> {
    check_dyadic(n, cells)?;
    let nx = 2 * cells;
    let mut states = Vec::with_capacity(nx);
    for w in 1..=2 {
        for c in 0..cells {
            states.push(LabeledPoint::new(
                format!("y{c}/w{w}"),
                vec![(c as f64 + 0.5) / cells as f64, w as f64],
            ));
        }
    }
    let actions = reciprocal_actions(n as usize);
    let uniform = vec![1.0 / cells as f64; cells];
    let transition = (0..actions.len())
        .map(|a| {
            (0..nx)
                .map(|x| {
                    let w = x / cells + 1;
                    let law = if w == 2 && a > 0 { dyadic_density_masses(a as u32, cells) } else { uniform.clone() };
                    let mut row = vec![0.0; nx];
                    row[(w - 1) * cells..w * cells].copy_from_slice(&law);
                    row
                })
                .collect()
        })
        .collect();
    let projection: Vec<Vec<f64>> = (0..nx)
        .map(|x| {
            let mut row = vec![0.0; cells];
            row[x % cells] = 1.0;
            row
        })
        .collect();
    DiscretePomdp::from_parts(ModelParts {
        states,
        state_metric: MetricSupport::EuclideanNd { dim: 2 },
        observations: cell_points(cells),
        transition,
        observation: vec![projection.clone(); actions.len()],
        initial_observation: projection,
        prior: vec![1.0 / nx as f64; nx],
        cost: second_state_cost(nx, actions.len(), |x| x >= cells),
        actions,
        discount: EXAMPLE_DISCOUNT,
        cost_mode: CostMode::P,
        sink_observations: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{bayes_update, belief_transition, joint_update, obs_marginal};
    use crate::measures::tv_distance;
    use crate::model::Belief;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dyadic_masses() {
        assert_eq!(dyadic_density_masses(1, 2), vec![0.0, 1.0]);
        assert_eq!(dyadic_density_masses(2, 8), vec![0.0, 0.0, 0.25, 0.25, 0.0, 0.0, 0.25, 0.25]);
        for j in 1..=5 {
            let s: f64 = dyadic_density_masses(j, 64).iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn example_4_1_kernels() {
        assert!(build_example_4_1(3, 12).is_err());
        for n in 1..=5u32 {
            let m = build_example_4_1(n, 1 << n).unwrap();
            assert!(m.validate().is_ok());
            let uniform = 1.0 / (1u32 << n) as f64;
            for a in 0..m.n_actions() {
                assert!(m.observation_row(a, 0).iter().all(|q| *q == uniform));
            }
            let top = m.n_actions() - 1;
            let p = obs_marginal(&m, &Belief::point_mass(2, 1), top).unwrap();
            let q = obs_marginal(&m, &Belief::point_mass(2, 1), 0).unwrap();
            assert_abs_diff_eq!(tv_distance(&p, &q).unwrap(), 0.5, epsilon = 1e-12);
            let law = belief_transition(&m, &Belief::uniform(2), top).unwrap();
            assert_abs_diff_eq!(law.weight_of(&[1.0 / 3.0, 2.0 / 3.0], 1e-12), 0.75, epsilon = 1e-12);
            assert_abs_diff_eq!(law.weight_of(&[1.0, 0.0], 1e-12), 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn example_4_2_kernels() {
        let m = build_example_4_2(&example_4_2_actions(2)).unwrap();
        assert!(m.validate().is_ok());
        let z = Belief::uniform(2);
        let neg_half = m.action_index("-0.5").unwrap();
        let zero = m.action_index("0").unwrap();
        assert_eq!(m.observation_row(neg_half, 0)[1], 0.5);
        assert_eq!(m.observation_row(zero, 0)[0], 0.0);
        assert_eq!(m.observation_row(zero, 1)[0], 0.0);
        let joint = joint_update(&m, &z, neg_half).unwrap();
        assert_abs_diff_eq!(joint.get(0, 0), 0.25, epsilon = 1e-15);
        let h = bayes_update(&m, &z, neg_half, 0).unwrap();
        assert_abs_diff_eq!(h[0], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn example_4_3_rows() {
        let k = 4;
        let m = build_example_4_3(3, k).unwrap();
        assert!(m.validate().is_ok());
        let sink = m.sink_observations()[0];
        for a in 1..m.n_actions() {
            for x in 0..2 {
                let row = m.observation_row(a, x);
                let body: f64 = row[..sink].iter().sum();
                assert_abs_diff_eq!(body, 1.0 - 0.5f64.powi(k as i32 + 1), epsilon = 1e-14);
            }
        }
        assert_eq!(m.observation_row(0, 0)[0], 1.0);
        assert_eq!(m.observation_row(0, 1)[0], 1.0);
    }

    #[test]
    fn mdmii_posteriors() {
        let cells = 8;
        let m = build_mdmii_8_1(3, cells).unwrap();
        assert!(m.validate().is_ok());
        let z = m.prior_belief().unwrap();
        let f = dyadic_density_masses(2, cells);
        for c in 0..cells {
            let post = bayes_update(&m, &z, 2, c).unwrap();
            let w2: f64 = (0..cells).map(|i| post[mdmii_state(cells, i, 2)]).sum();
            let expected = if f[c] > 0.0 { 2.0 / 3.0 } else { 0.0 };
            assert_abs_diff_eq!(w2, expected, epsilon = 1e-12);
            let still = bayes_update(&m, &z, 0, c).unwrap();
            assert_abs_diff_eq!(still[mdmii_state(cells, c, 2)], 0.5, epsilon = 1e-12);
        }
        let law = belief_transition(&m, &z, 2).unwrap();
        let d = law.mass_where(|b| {
            let w2: f64 = b[cells..].iter().sum();
            (w2 - 2.0 / 3.0).abs() < 1e-9
        });
        assert_abs_diff_eq!(d, 0.75, epsilon = 1e-12);
    }
}

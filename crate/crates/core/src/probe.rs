//! Numeric continuity diagnostics for the observation marginal `R'` and the
//! belief-transition kernel `q`.
//!
//! A probe evaluates a kernel along a sequence of arguments `(z_n, a_n)` and
//! at a target `(z, a)`, and records the distance between the two laws in the
//! chosen mode. The verdict only summarises finite evidence; it never
//! certifies continuity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{belief_transition, joint_update, obs_marginal, posterior_or};
use crate::measures::{interval_family_gap, setwise_gap, tv_distance, wasserstein1, FiniteMeasure, TestSet};
use crate::model::{Belief, DiscretePomdp};
use crate::models::{build_example_4_2, example_4_2_actions};

/// Default threshold below which a tail counts as converged.
pub const DEFAULT_THRESHOLD: f64 = 1e-3;
/// Shortest sequence a probe accepts.
pub const MIN_SEQUENCE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSelector {
    /// `R'(.|z, a)` on the observation points.
    ObsMarginal,
    /// `q(.|z, a)` on belief vectors with the Euclidean metric.
    BeliefTransition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMode {
    /// Wasserstein-1 distance.
    Weak,
    /// Largest gap over a family of test sets.
    Setwise,
    /// Total variation distance.
    Tv,
}

/// Test sets for setwise probes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetFamily {
    /// Every interval of the real line (one-dimensional supports).
    AllIntervals,
    Explicit(Vec<TestSet>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converging,
    Stalled,
    Diverging,
}

/// Text of the decision rule, stored in every report.
pub const VERDICT_RULE: &str = "tail = last max(4, ceil(len/4)) gaps; converging if max(tail) < threshold; \
     diverging if min(tail) > 10 * gap[0]; stalled otherwise";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub kernel: KernelSelector,
    pub mode: ProbeMode,
    /// `g_n`, one per sequence element.
    pub gaps: Vec<f64>,
    /// Mean of the tail window.
    pub limit_estimate: f64,
    pub verdict: Verdict,
    pub threshold: f64,
    pub rule: &'static str,
    /// Set when a setwise probe was given an empty explicit family.
    pub empty_family: bool,
}

/// Applies the verdict rule to a gap sequence.
pub fn verdict(gaps: &[f64], threshold: f64) -> (Verdict, f64) {
    let window = 4.max(gaps.len().div_ceil(4)).min(gaps.len());
    let tail = &gaps[gaps.len() - window..];
    let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let v = if max < threshold {
        Verdict::Converging
    } else if min > 10.0 * gaps[0] {
        Verdict::Diverging
    } else {
        Verdict::Stalled
    };
    (v, mean)
}

fn kernel_law(model: &DiscretePomdp, kernel: KernelSelector, z: &Belief, a: usize) -> Result<FiniteMeasure> {
    match kernel {
        KernelSelector::ObsMarginal => obs_marginal(model, z, a),
        KernelSelector::BeliefTransition => belief_transition(model, z, a)?.to_measure(),
    }
}

fn gap(p: &FiniteMeasure, q: &FiniteMeasure, mode: ProbeMode, sets: Option<&SetFamily>) -> Result<(f64, bool)> {
    match mode {
        ProbeMode::Tv => Ok((tv_distance(p, q)?, false)),
        ProbeMode::Weak => Ok((wasserstein1(p, q)?, false)),
        ProbeMode::Setwise => match sets {
            Some(SetFamily::AllIntervals) => Ok((interval_family_gap(p, q)?, false)),
            Some(SetFamily::Explicit(family)) => {
                let g = setwise_gap(p, q, family)?;
                Ok((g.gap, g.empty_family))
            }
            None => Err(Error::InvalidArgument("setwise probes need a test-set family".into())),
        },
    }
}

/// Distances between `K(.|z_n, a_n)` and `K(.|z, a)` along `sequence`.
pub fn probe_kernel(
    model: &DiscretePomdp,
    kernel: KernelSelector,
    sequence: &[(Belief, usize)],
    target: &(Belief, usize),
    mode: ProbeMode,
    sets: Option<&SetFamily>,
    threshold: f64,
) -> Result<ProbeReport> {
    if sequence.len() < MIN_SEQUENCE {
        return Err(Error::InvalidArgument(format!(
            "probe sequences need at least {MIN_SEQUENCE} elements, got {}",
            sequence.len()
        )));
    }
    if mode == ProbeMode::Setwise && sets.is_none() {
        return Err(Error::InvalidArgument("setwise probes need a test-set family".into()));
    }
    let limit = kernel_law(model, kernel, &target.0, target.1)?;
    let results: Vec<Result<(f64, bool)>> = sequence
        .par_iter()
        .map(|(z, a)| {
            let law = kernel_law(model, kernel, z, *a)?;
            gap(&law, &limit, mode, sets)
        })
        .collect();
    let mut gaps = Vec::with_capacity(results.len());
    let mut empty_family = false;
    for r in results {
        let (g, empty) = r?;
        gaps.push(g);
        empty_family |= empty;
    }
    let (verdict, limit_estimate) = verdict(&gaps, threshold);
    Ok(ProbeReport {
        kernel,
        mode,
        gaps,
        limit_estimate,
        verdict,
        threshold,
        rule: VERDICT_RULE,
        empty_family,
    })
}

/// For each sequence element and each observation `y`, the sup-norm distance
/// between `H(z_n, a_n, y)` and `H(z, a, y)`; `None` where `y` has zero
/// probability under either argument.
pub fn posterior_gaps(
    model: &DiscretePomdp,
    sequence: &[(Belief, usize)],
    target: &(Belief, usize),
) -> Result<Vec<Vec<Option<f64>>>> {
    let posteriors = |z: &Belief, a: usize| -> Result<Vec<Option<Belief>>> {
        let joint = joint_update(model, z, a)?;
        Ok(joint
            .observation_marginal()
            .iter()
            .enumerate()
            .map(|(y, m)| (*m > 0.0).then(|| posterior_or(joint.column(y), z)))
            .collect())
    };
    let limit = posteriors(&target.0, target.1)?;
    sequence
        .iter()
        .map(|(z, a)| {
            let post = posteriors(z, *a)?;
            Ok(post
                .iter()
                .zip(&limit)
                .map(|(p, l)| match (p, l) {
                    (Some(p), Some(l)) => Some(p.max_abs_diff(l)),
                    _ => None,
                })
                .collect())
        })
        .collect()
}

/// `#{l in 1..=2m : sin(πl/2m) >= √3/2}` over `2m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct QMass {
    pub count: u64,
    pub total: u64,
}

impl QMass {
    pub fn value(&self) -> f64 {
        self.count as f64 / self.total as f64
    }
}

/// Mass that `q(.|z, 1/m)` puts on `{z' : z'(1) >= 3/4}` at `z = (1/2, 1/2)`
/// in the `sin²`/`cos²` observation model, in closed form.
///
/// `sin(πl/2m) >= √3/2` with `l/2m ∈ (0, 1]` holds exactly when
/// `1/3 <= l/2m <= 2/3`, which is tested in integers.
pub fn example_4_3_q_mass(m: i64) -> Result<QMass> {
    if m <= 0 {
        return Err(Error::InvalidArgument(format!("m must be positive, got {m}")));
    }
    let m = m as u64;
    let count = (1..=2 * m).filter(|&l| 3 * l >= 2 * m && 3 * l <= 4 * m).count() as u64;
    Ok(QMass { count, total: 2 * m })
}

/// `H(1|z, ∓1/k, 1)` at `z = (1/2, 1/2)` for `k = 1..=k_max`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HLimits {
    /// Values at `a = -1/k`.
    pub left: Vec<f64>,
    /// Values at `a = +1/k`.
    pub right: Vec<f64>,
    pub left_final: f64,
    pub right_final: f64,
}

/// Evaluates the posterior of state 1 after observation 1 on both sides of
/// `a = 0` with [`crate::filter::bayes_update`].
pub fn example_4_2_h_limits(k_max: usize) -> Result<HLimits> {
    if k_max < 2 {
        return Err(Error::InvalidArgument(format!("k_max must be at least 2, got {k_max}")));
    }
    let actions = example_4_2_actions(k_max);
    let model = build_example_4_2(&actions)?;
    let z = Belief::uniform(2);
    // actions are -1/1, ..., -1/k_max, 0, 1/k_max, ..., 1/1
    let h = |a: usize| crate::filter::bayes_update(&model, &z, a, 0).map(|b| b[0]);
    let left = (1..=k_max).map(|k| h(k - 1)).collect::<Result<Vec<_>>>()?;
    let right = (1..=k_max).map(|k| h(2 * k_max + 1 - k)).collect::<Result<Vec<_>>>()?;
    Ok(HLimits {
        left_final: left[k_max - 1],
        right_final: right[k_max - 1],
        left,
        right,
    })
}

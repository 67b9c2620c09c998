use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::{bayes_update, initial_posterior};
use crate::model::{Belief, DiscretePomdp};

/// A rule choosing an action from the current belief.
pub trait Policy {
    fn act(&self, z: &Belief) -> Result<usize>;
}

impl<F: Fn(&Belief) -> Result<usize>> Policy for F {
    fn act(&self, z: &Belief) -> Result<usize> {
        self(z)
    }
}

/// Monte Carlo estimate of an expected discounted cost.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub episodes: usize,
}

fn draw(rng: &mut ChaCha8Rng, weights: &[f64]) -> Result<usize> {
    let dist = WeightedIndex::new(weights)
        .map_err(|e| Error::InvalidModel(format!("cannot sample from row {weights:?}: {e}")))?;
    Ok(dist.sample(rng))
}

/// Runs `episodes` independent episodes of `horizon` steps each.
///
/// Each episode draws `x0 ~ prior` and `y0 ~ Q0(.|x0)`, starts from the
/// initial posterior and then alternates action, cost, transition,
/// observation and Bayes update. All randomness comes from one ChaCha8
/// stream seeded with `seed`.
pub fn simulate_policy(
    model: &DiscretePomdp,
    policy: &impl Policy,
    prior: &Belief,
    horizon: usize,
    episodes: usize,
    seed: u64,
) -> Result<SimulationEstimate> {
    if horizon == 0 || episodes == 0 {
        return Err(Error::InvalidArgument(
            "horizon and episode count must both be at least 1".into(),
        ));
    }
    model.check_belief(prior)?;
    let alpha = model.discount();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut totals = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let mut x = draw(&mut rng, prior)?;
        let y0 = draw(&mut rng, model.initial_observation_row(x))?;
        let mut z = initial_posterior(model, prior, y0)?;
        let mut total = 0.0;
        let mut weight = 1.0;
        for t in 0..horizon {
            let a = policy.act(&z)?;
            model.check_action(a)?;
            let c = model.cost(x, a);
            if !c.is_finite() {
                return Err(Error::InfeasibleAction {
                    episode,
                    t,
                    state: x,
                    action: a,
                });
            }
            total += weight * c.value();
            weight *= alpha;
            x = draw(&mut rng, model.transition_row(a, x))?;
            let y = draw(&mut rng, model.observation_row(a, x))?;
            z = bayes_update(model, &z, a, y)?;
        }
        totals.push(total);
    }
    let n = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / n;
    let std_error = if totals.len() > 1 {
        let var = totals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(SimulationEstimate {
        mean,
        std_error,
        episodes,
    })
}

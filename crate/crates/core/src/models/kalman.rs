//! Scalar linear-Gaussian system on a grid:
//! `x' = d x + b a + ξ`, `y' = h x' + c η` with `ξ ~ N(0, σ²)`, `η ~ N(0, 1)`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::measures::MetricSupport;
use crate::model::{Cost, CostMode, DiscretePomdp, LabeledPoint, ModelParts};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KalmanSpec {
    /// State coefficient `d`.
    pub d: f64,
    /// Control coefficient `b`.
    pub b: f64,
    /// Observation gain `h`.
    pub h: f64,
    /// Observation noise scale `c`, nonzero.
    pub c: f64,
    /// Standard deviation of the state noise.
    pub state_noise_sd: f64,
    /// State cost weight `c1 >= 0` in `c1 x² + c2 a²`.
    pub c1: f64,
    /// Action cost weight `c2 > 0`.
    pub c2: f64,
    /// State grid covers `[-state_range, state_range]`.
    pub state_range: f64,
    pub state_points: usize,
    /// Observation grid covers `[-obs_range, obs_range]`.
    pub obs_range: f64,
    pub obs_points: usize,
    pub actions: Vec<f64>,
    pub discount: f64,
    #[serde(default)]
    pub prior_mean: f64,
    #[serde(default = "one")]
    pub prior_sd: f64,
}

fn one() -> f64 {
    1.0
}

impl KalmanSpec {
    pub fn example() -> Self {
        KalmanSpec {
            d: 0.8,
            b: 1.0,
            h: 1.0,
            c: 0.5,
            state_noise_sd: 0.5,
            c1: 1.0,
            c2: 0.5,
            state_range: 5.0,
            state_points: 41,
            obs_range: 7.0,
            obs_points: 57,
            actions: vec![-1.0, 0.0, 1.0],
            discount: 0.9,
            prior_mean: 0.0,
            prior_sd: 1.0,
        }
    }

    /// Spacing of the state grid.
    pub fn state_spacing(&self) -> f64 {
        2.0 * self.state_range / (self.state_points - 1) as f64
    }

    /// Spacing of the observation grid.
    pub fn obs_spacing(&self) -> f64 {
        2.0 * self.obs_range / (self.obs_points - 1) as f64
    }

    pub fn state_grid(&self) -> Vec<f64> {
        symmetric_grid(self.state_range, self.state_points)
    }

    pub fn obs_grid(&self) -> Vec<f64> {
        symmetric_grid(self.obs_range, self.obs_points)
    }

    /// Index of the observation cell containing `y` (end cells are unbounded).
    pub fn obs_cell(&self, y: f64) -> usize {
        let i = ((y + self.obs_range) / self.obs_spacing()).round();
        i.clamp(0.0, (self.obs_points - 1) as f64) as usize
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.c == 0.0 || !self.c.is_finite() {
            return bad("observation noise scale c must be nonzero");
        }
        if !(self.state_noise_sd > 0.0) {
            return bad("state noise standard deviation must be positive");
        }
        if !(self.c1 >= 0.0) || !(self.c2 > 0.0) {
            return bad("cost weights need c1 >= 0 and c2 > 0");
        }
        if self.state_points < 2 || self.obs_points < 2 {
            return bad("grids need at least two points");
        }
        if self.state_range < 6.0 * self.state_noise_sd {
            return bad("state grid must span at least 6 state-noise standard deviations each side");
        }
        if self.obs_range < 6.0 * self.c.abs() {
            return bad("observation grid must span at least 6 observation-noise standard deviations each side");
        }
        if self.actions.is_empty() {
            return bad("need at least one action");
        }
        if !(self.prior_sd > 0.0) {
            return bad("prior standard deviation must be positive");
        }
        Ok(())
    }
}

fn symmetric_grid(range: f64, points: usize) -> Vec<f64> {
    let step = 2.0 * range / (points - 1) as f64;
    (0..points).map(|i| -range + step * i as f64).collect()
}

/// Masses of `N(mean, sd²)` on the cells around `grid` (outer cells open).
fn cell_masses(grid: &[f64], mean: f64, sd: f64) -> Vec<f64> {
    let normal = Normal::new(mean, sd).expect("positive standard deviation");
    let step = grid[1] - grid[0];
    let n = grid.len();
    let mut row: Vec<f64> = (0..n)
        .map(|i| {
            let upper = if i + 1 == n { 1.0 } else { normal.cdf(grid[i] + 0.5 * step) };
            let lower = if i == 0 { 0.0 } else { normal.cdf(grid[i] - 0.5 * step) };
            (upper - lower).max(0.0)
        })
        .collect();
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= total);
    row
}

/// Builds the gridded model. The initial observation has the same law as
/// later ones, `y0 = h x0 + c η0`, and the prior is the cell-integrated
/// `N(prior_mean, prior_sd²)`.
pub fn build_kalman(spec: &KalmanSpec) -> Result<DiscretePomdp> {
    spec.check()?;
    let xs = spec.state_grid();
    let ys = spec.obs_grid();
    let sd_y = spec.c.abs();
    let obs_rows: Vec<Vec<f64>> = xs.iter().map(|&x| cell_masses(&ys, spec.h * x, sd_y)).collect();
    let transition = spec
        .actions
        .iter()
        .map(|&a| {
            xs.iter()
                .map(|&x| cell_masses(&xs, spec.d * x + spec.b * a, spec.state_noise_sd))
                .collect()
        })
        .collect();
    DiscretePomdp::from_parts(ModelParts {
        states: xs.iter().map(|&x| LabeledPoint::new(format!("{x}"), vec![x])).collect(),
        state_metric: MetricSupport::Euclidean1d,
        observations: ys.iter().map(|&y| LabeledPoint::new(format!("{y}"), vec![y])).collect(),
        actions: spec.actions.iter().map(|&a| LabeledPoint::new(format!("{a}"), vec![a])).collect(),
        transition,
        observation: vec![obs_rows.clone(); spec.actions.len()],
        initial_observation: obs_rows,
        prior: cell_masses(&xs, spec.prior_mean, spec.prior_sd),
        cost: xs
            .iter()
            .map(|&x| {
                spec.actions
                    .iter()
                    .map(|&a| Cost::Finite(spec.c1 * x * x + spec.c2 * a * a))
                    .collect()
            })
            .collect(),
        discount: spec.discount,
        cost_mode: CostMode::P,
        sink_observations: vec![],
    })
}

/// Posterior mean and variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Gaussian {
    pub mean: f64,
    pub var: f64,
}

/// Exact scalar Kalman filter.
///
/// `observations[0]` is the initial observation, applied to the prior
/// without a prediction step; `observations[t + 1]` follows `actions[t]`.
/// Returns the posterior after each observation.
pub fn kalman_exact(
    spec: &KalmanSpec,
    prior_mean: f64,
    prior_var: f64,
    actions: &[f64],
    observations: &[f64],
) -> Result<Vec<Gaussian>> {
    if spec.c == 0.0 {
        return Err(Error::InvalidArgument("observation noise scale c must be nonzero".into()));
    }
    if observations.len() != actions.len() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "expected {} observations for {} actions",
            actions.len() + 1,
            actions.len()
        )));
    }
    let r = spec.c * spec.c;
    let update = |g: Gaussian, y: f64| {
        let gain = g.var * spec.h / (spec.h * spec.h * g.var + r);
        Gaussian {
            mean: g.mean + gain * (y - spec.h * g.mean),
            var: (1.0 - gain * spec.h) * g.var,
        }
    };
    let mut g = update(
        Gaussian {
            mean: prior_mean,
            var: prior_var,
        },
        observations[0],
    );
    let mut out = vec![g];
    for (a, y) in actions.iter().zip(&observations[1..]) {
        g = Gaussian {
            mean: spec.d * g.mean + spec.b * a,
            var: spec.d * spec.d * g.var + spec.state_noise_sd * spec.state_noise_sd,
        };
        g = update(g, *y);
        out.push(g);
    }
    Ok(out)
}

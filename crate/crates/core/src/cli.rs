//! Command-line front end.
//!
//! Every subcommand is a pure function of its arguments and seed. JSON
//! outputs embed the resolved run configuration; infinite values are written
//! as the string `"inf"` in JSON and as `inf` in CSV. CSV floats carry 17
//! significant digits.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::distributions::{Distribution, Open01, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::filter::{bayes_update, initial_posterior};
use crate::io::{deserialize_at, load_model, model_to_string, ModelSource};
use crate::measures::TestSet;
use crate::model::{Belief, DiscretePomdp};
use crate::models::{build, list_models};
use crate::probe::{probe_kernel, KernelSelector, ProbeMode, SetFamily, DEFAULT_THRESHOLD};
use crate::solver::{
    alpha_solve, greedy_action_set, optimality_residual, q_values, simulate_policy, value_iterate_grid,
    Policy, Pruning, StationaryIPolicy, ValueFunction, BELLMAN_TOL, DEFAULT_EPSILON,
};

/// Environment variable read when `--threads` is absent.
pub const THREADS_ENV: &str = "BELIEFMDP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "beliefmdp", version, about = "Solve finite POMDPs through their belief-state MDP")]
pub struct Cli {
    /// Worker threads for parallel sweeps (default: available parallelism).
    /// Results do not depend on this value.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a model by alpha vectors (finite horizon) or grid value iteration.
    #[command(after_help = SOLVE_HELP)]
    Solve(SolveArgs),
    /// Run the Bayes filter along an action sequence.
    #[command(name = "filter-trace", after_help = FILTER_HELP)]
    FilterTrace(FilterArgs),
    /// Measure kernel distances along a sequence of (belief, action) pairs.
    #[command(after_help = PROBE_HELP)]
    Probe(ProbeArgs),
    /// Monte Carlo evaluation of a policy.
    #[command(after_help = SIMULATE_HELP)]
    Simulate(SimulateArgs),
    /// List built-in model builders and their parameters (JSON).
    #[command(name = "list-models")]
    ListModels(OutputArgs),
    /// Check a model and print the validation report (JSON).
    Validate(ValidateArgs),
    /// Write a model (usually from a builder) as a model document.
    Export(ExportArgs),
}

const SOLVE_HELP: &str = "\
Output: JSON (.json or stdout) with the run config, values, greedy actions and Q-values at
the requested beliefs, the Bellman residual and either the alpha vectors or the iteration trace.
With a .csv output the value table is written instead, columns:
  belief_0..belief_{n-1}, value, greedy_action
--trace FILE.csv writes the iteration trace, columns:
  alpha: horizon, vectors          grid: iteration, delta";

const FILTER_HELP: &str = "\
CSV columns: t, action, observation, then one posterior column per state (named by state label).
Row t=0 is the initial posterior; its action column is empty.
Without --observations, hidden states and observations are sampled from the model with --seed.";

const PROBE_HELP: &str = "\
Probe spec (JSON text or file):
  {\"kernel\": \"obs_marginal\" | \"belief_transition\",
   \"mode\": \"weak\" | \"setwise\" | \"tv\",
   \"sequence\": [{\"belief\": B, \"action\": A}, ...] | {\"belief\": B, \"actions\": [A, ...]},
   \"target\": {\"belief\": B, \"action\": A},
   \"sets\": \"all_intervals\" | [test sets],   (setwise only)
   \"threshold\": 0.001}
B is a probability vector, \"uniform\" or \"prior\"; A is an action label or index.
CSV columns: n, gap (n starts at 1). A .json output carries the full report.";

const SIMULATE_HELP: &str = "\
Policies: grid (greedy on grid value iteration), alpha (greedy on the alpha-vector solution of
--plan-horizon steps), fixed (always --action).
Output: JSON with mean, std_error and episodes; a .csv output has columns mean, std_error, episodes.";

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Model document (JSON) path.
    #[arg(long, conflicts_with = "builder", required_unless_present = "builder")]
    pub model: Option<PathBuf>,
    /// Built-in builder name (see list-models).
    #[arg(long)]
    pub builder: Option<String>,
    /// Builder parameters as JSON text, or @FILE.
    #[arg(long, requires = "builder")]
    pub params: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output file; the format follows the extension (.json or .csv). Default: stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Alpha,
    Grid,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "grid")]
    pub method: Method,
    /// Number of backups for the alpha method.
    #[arg(long, default_value_t = 10)]
    pub horizon: usize,
    /// Grid resolution r (vertex coordinates are multiples of 1/r).
    #[arg(long, default_value_t = 20)]
    pub resolution: u32,
    /// Grid convergence threshold on the sup-norm change.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// Seed for the random beliefs used in the residual.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Beliefs to report, as a JSON array of probability vectors or @FILE.
    /// Default: the prior, the uniform belief and every point mass.
    #[arg(long)]
    pub beliefs: Option<String>,
    /// Random beliefs added to the residual check.
    #[arg(long, default_value_t = 100)]
    pub residual_samples: usize,
    /// Alpha method: also prune vectors that are nowhere strictly best (one LP each).
    #[arg(long)]
    pub exact_pruning: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
    /// Iteration trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FilterArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    /// Comma-separated actions (labels or indices).
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    pub actions: Vec<String>,
    /// Comma-separated observations y0, y1, ... (one more than actions).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub observations: Option<Vec<String>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProbeArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    /// Probe spec as JSON text or @FILE.
    #[arg(long)]
    pub spec: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Grid,
    Alpha,
    Fixed,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "grid")]
    pub policy: PolicyKind,
    /// Action for the fixed policy (label or index).
    #[arg(long, required_if_eq("policy", "fixed"), allow_hyphen_values = true)]
    pub action: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub episodes: usize,
    /// Steps per episode.
    #[arg(long, default_value_t = 50)]
    pub horizon: usize,
    /// Backups for the alpha policy.
    #[arg(long, default_value_t = 10)]
    pub plan_horizon: usize,
    #[arg(long, default_value_t = 20)]
    pub resolution: u32,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExportArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}

/// Resolved configuration embedded in every JSON output. The thread count
/// is left out because results do not depend on it.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSource>,
    pub options: Value,
}

fn read_arg(text: &str) -> Result<String> {
    match text.strip_prefix('@') {
        Some(path) => Ok(fs::read_to_string(path)?),
        None => Ok(text.to_string()),
    }
}

fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        pointer: String::new(),
        message: e.to_string(),
    })
}

fn load(args: &ModelArgs) -> Result<(DiscretePomdp, ModelSource)> {
    let (model, source) = match (&args.model, &args.builder) {
        (Some(path), _) => (
            load_model(path)?,
            ModelSource::File {
                path: path.display().to_string(),
            },
        ),
        (None, Some(name)) => {
            let params = match &args.params {
                Some(p) => parse_json(&read_arg(p)?)?,
                None => Value::Null,
            };
            (
                build(name, &params)?,
                ModelSource::Builder {
                    name: name.clone(),
                    params,
                },
            )
        }
        (None, None) => return Err(Error::InvalidArgument("give --model or --builder".into())),
    };
    model.validate().into_result()?;
    Ok((model, source))
}

fn config(command: &'static str, model: Option<ModelSource>, options: &impl Serialize) -> Result<RunConfig> {
    Ok(RunConfig {
        command,
        model,
        options: serde_json::to_value(options)?,
    })
}

/// JSON number, or a string sentinel for non-finite values.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

/// CSV float with 17 significant digits.
pub fn csv_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

fn format_of(path: Option<&Path>, default: Format) -> Result<Format> {
    match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        None if path.is_none() => Ok(default),
        Some("json") => Ok(Format::Json),
        Some("csv") => Ok(Format::Csv),
        _ => Err(Error::InvalidArgument(format!(
            "cannot infer the output format of {}; use .json or .csv",
            path.map(|p| p.display().to_string()).unwrap_or_default()
        ))),
    }
}

fn emit(path: Option<&Path>, text: &str, stdout: &mut Vec<u8>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => stdout.extend_from_slice(text.as_bytes()),
    }
    Ok(())
}

fn pretty(value: &Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Resolves an action given as label or index.
pub fn resolve_action(model: &DiscretePomdp, token: &str) -> Result<usize> {
    model
        .action_index(token)
        .or_else(|| token.parse::<usize>().ok().filter(|&a| a < model.n_actions()))
        .ok_or_else(|| Error::InvalidArgument(format!("unknown action `{token}`")))
}

fn resolve_observation(model: &DiscretePomdp, token: &str) -> Result<usize> {
    model
        .observation_index(token)
        .or_else(|| token.parse::<usize>().ok().filter(|&y| y < model.n_observations()))
        .ok_or_else(|| Error::InvalidArgument(format!("unknown observation `{token}`")))
}

fn default_beliefs(model: &DiscretePomdp) -> Result<Vec<Belief>> {
    let n = model.n_states();
    let mut out = vec![model.prior_belief()?, Belief::uniform(n)];
    out.extend((0..n).map(|x| Belief::point_mass(n, x)));
    Ok(out)
}

fn parse_beliefs(model: &DiscretePomdp, text: &str) -> Result<Vec<Belief>> {
    let raw: Vec<Vec<f64>> = deserialize_at(parse_json(&read_arg(text)?)?, "")?;
    raw.into_iter()
        .enumerate()
        .map(|(i, w)| {
            if w.len() != model.n_states() {
                return Err(Error::Parse {
                    pointer: format!("/{i}"),
                    message: format!("expected {} entries", model.n_states()),
                });
            }
            Belief::new(w).map_err(|e| Error::Parse {
                pointer: format!("/{i}"),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Uniformly distributed point of the simplex.
fn random_belief(rng: &mut ChaCha8Rng, n: usize) -> Belief {
    let e: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = Open01.sample(rng);
            -u.ln()
        })
        .collect();
    Belief::normalized(e).expect("positive weights")
}

fn belief_report(model: &DiscretePomdp, value: &impl ValueFunction, z: &Belief) -> Result<Value> {
    let q = q_values(model, value, z)?;
    let greedy = greedy_action_set(model, value, z, BELLMAN_TOL)?[0];
    Ok(json!({
        "belief": nums(z),
        "value": num(value.value(z)),
        "greedy_action": model.actions()[greedy].label,
        "q_values": nums(&q),
    }))
}

fn value_table(model: &DiscretePomdp, value: &impl ValueFunction, beliefs: &[Belief]) -> Result<String> {
    let mut s = String::new();
    let cols: Vec<String> = (0..model.n_states()).map(|i| format!("belief_{i}")).collect();
    writeln!(s, "{},value,greedy_action", cols.join(",")).unwrap();
    for z in beliefs {
        let greedy = greedy_action_set(model, value, z, BELLMAN_TOL)?[0];
        let row: Vec<String> = z.iter().map(|&w| csv_float(w)).collect();
        writeln!(
            s,
            "{},{},{}",
            row.join(","),
            csv_float(value.value(z)),
            csv_field(&model.actions()[greedy].label)
        )
        .unwrap();
    }
    Ok(s)
}

fn solve(args: &SolveArgs, stdout: &mut Vec<u8>) -> Result<()> {
    let (model, source) = load(&args.model)?;
    let format = format_of(args.out.output.as_deref(), Format::Json)?;
    if let Some(t) = &args.trace {
        if format_of(Some(t), Format::Csv)? != Format::Csv {
            return Err(Error::InvalidArgument("--trace must be a .csv file".into()));
        }
    }
    let beliefs = match &args.beliefs {
        Some(text) => parse_beliefs(&model, text)?,
        None => default_beliefs(&model)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut samples = beliefs.clone();
    samples.extend((0..args.residual_samples).map(|_| random_belief(&mut rng, model.n_states())));
    let cfg = config("solve", Some(source), args)?;
    let mut out = json!({ "config": cfg, "method": args.method });
    let (table, trace);
    match args.method {
        Method::Alpha => {
            let pruning = if args.exact_pruning {
                Pruning::Exact
            } else {
                Pruning::Pointwise
            };
            let sets = alpha_solve(&model, args.horizon, pruning)?;
            let last = sets.last().expect("horizon 0 set");
            let reports = beliefs
                .iter()
                .map(|z| belief_report(&model, last, z))
                .collect::<Result<Vec<_>>>()?;
            out["horizon"] = json!(args.horizon);
            out["vector_counts"] = json!(sets.iter().map(|s| s.len()).collect::<Vec<_>>());
            out["alpha_vectors"] = Value::Array(
                last.vectors
                    .iter()
                    .map(|v| {
                        json!({
                            "action": v.action.map(|a| model.actions()[a].label.clone()),
                            "values": nums(&v.values),
                        })
                    })
                    .collect(),
            );
            out["beliefs"] = Value::Array(reports);
            out["residual"] = num(optimality_residual(&model, last, &samples)?);
            table = value_table(&model, last, &beliefs)?;
            trace = sets.iter().fold(String::from("horizon,vectors\n"), |mut s, set| {
                writeln!(s, "{},{}", set.horizon, set.len()).unwrap();
                s
            });
        }
        Method::Grid => {
            let sol = value_iterate_grid(&model, args.resolution, args.max_iters, args.epsilon)?;
            let v = &sol.values;
            let reports = beliefs
                .iter()
                .map(|z| belief_report(&model, v, z))
                .collect::<Result<Vec<_>>>()?;
            out["resolution"] = json!(args.resolution);
            out["vertices"] = json!(v.grid.len());
            out["iterations"] = json!(sol.iterations);
            out["converged"] = json!(sol.converged);
            out["trace"] = nums(&sol.trace);
            out["beliefs"] = Value::Array(reports);
            out["residual"] = num(optimality_residual(&model, v, &samples)?);
            table = value_table(&model, v, &beliefs)?;
            trace = sol
                .trace
                .iter()
                .enumerate()
                .fold(String::from("iteration,delta\n"), |mut s, (i, d)| {
                    writeln!(s, "{},{}", i + 1, csv_float(*d)).unwrap();
                    s
                });
        }
    }
    out["cost_shift"] = num(model.validate().cost_shift);
    if let Some(t) = &args.trace {
        fs::write(t, &trace)?;
    }
    let text = match format {
        Format::Json => pretty(&out)?,
        Format::Csv => table,
    };
    emit(args.out.output.as_deref(), &text, stdout)
}

fn draw(rng: &mut ChaCha8Rng, weights: &[f64]) -> Result<usize> {
    let dist = WeightedIndex::new(weights)
        .map_err(|e| Error::InvalidModel(format!("cannot sample from {weights:?}: {e}")))?;
    Ok(dist.sample(rng))
}

fn filter_trace(args: &FilterArgs, stdout: &mut Vec<u8>) -> Result<()> {
    let (model, source) = load(&args.model)?;
    let format = format_of(args.out.output.as_deref(), Format::Csv)?;
    let actions = args
        .actions
        .iter()
        .map(|a| resolve_action(&model, a))
        .collect::<Result<Vec<_>>>()?;
    let observations = match &args.observations {
        Some(obs) => {
            if obs.len() != actions.len() + 1 {
                return Err(Error::InvalidArgument(format!(
                    "expected {} observations for {} actions",
                    actions.len() + 1,
                    actions.len()
                )));
            }
            obs.iter()
                .map(|y| resolve_observation(&model, y))
                .collect::<Result<Vec<_>>>()?
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let mut x = draw(&mut rng, model.prior())?;
            let mut ys = vec![draw(&mut rng, model.initial_observation_row(x))?];
            for &a in &actions {
                x = draw(&mut rng, model.transition_row(a, x))?;
                ys.push(draw(&mut rng, model.observation_row(a, x))?);
            }
            ys
        }
    };
    let mut z = initial_posterior(&model, &model.prior_belief()?, observations[0])?;
    let mut rows = vec![(None, observations[0], z.clone())];
    for (&a, &y) in actions.iter().zip(&observations[1..]) {
        z = bayes_update(&model, &z, a, y)?;
        rows.push((Some(a), y, z.clone()));
    }
    let text = match format {
        Format::Csv => {
            let mut s = String::from("t,action,observation");
            for st in model.states() {
                write!(s, ",{}", csv_field(&st.label)).unwrap();
            }
            s.push('\n');
            for (t, (a, y, z)) in rows.iter().enumerate() {
                let a = a.map(|a| csv_field(&model.actions()[a].label)).unwrap_or_default();
                write!(s, "{t},{a},{}", csv_field(&model.observations()[*y].label)).unwrap();
                for w in z.iter() {
                    write!(s, ",{}", csv_float(*w)).unwrap();
                }
                s.push('\n');
            }
            s
        }
        Format::Json => pretty(&json!({
            "config": config("filter-trace", Some(source), args)?,
            "states": model.states().iter().map(|s| s.label.clone()).collect::<Vec<_>>(),
            "steps": rows.iter().enumerate().map(|(t, (a, y, z))| json!({
                "t": t,
                "action": a.map(|a| model.actions()[a].label.clone()),
                "observation": model.observations()[*y].label,
                "posterior": nums(z),
            })).collect::<Vec<_>>(),
        }))?,
    };
    emit(args.out.output.as_deref(), &text, stdout)
}

/// Belief in a probe spec.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum BeliefSpec {
    Vector(Vec<f64>),
    Named(String),
}

/// Action in a probe spec: an index or a label.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ActionSpec {
    Index(usize),
    Label(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub belief: BeliefSpec,
    pub action: ActionSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum SequenceSpec {
    Points(Vec<PointSpec>),
    SharedBelief { belief: BeliefSpec, actions: Vec<ActionSpec> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum SetsSpec {
    Named(String),
    Explicit(Vec<TestSet>),
}

/// Probe definition read by `probe --spec`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub kernel: KernelSelector,
    pub mode: ProbeMode,
    pub sequence: SequenceSpec,
    pub target: PointSpec,
    #[serde(default)]
    pub sets: Option<SetsSpec>,
    #[serde(default)]
    pub threshold: Option<f64>,
}

fn spec_error(pointer: &str, e: Error) -> Error {
    match e {
        Error::Parse { .. } => e,
        other => Error::Parse {
            pointer: pointer.to_string(),
            message: other.to_string(),
        },
    }
}

fn resolve_belief(model: &DiscretePomdp, b: &BeliefSpec, pointer: &str) -> Result<Belief> {
    let z = match b {
        BeliefSpec::Vector(w) if w.len() == model.n_states() => Belief::new(w.clone()),
        BeliefSpec::Vector(w) => Err(Error::DimensionMismatch(format!(
            "belief has {} entries, model has {} states",
            w.len(),
            model.n_states()
        ))),
        BeliefSpec::Named(n) if n == "uniform" => Ok(Belief::uniform(model.n_states())),
        BeliefSpec::Named(n) if n == "prior" => model.prior_belief(),
        BeliefSpec::Named(n) => Err(Error::InvalidArgument(format!("unknown belief `{n}`"))),
    };
    z.map_err(|e| spec_error(pointer, e))
}

fn resolve_spec_action(model: &DiscretePomdp, a: &ActionSpec, pointer: &str) -> Result<usize> {
    let r = match a {
        ActionSpec::Index(i) if *i < model.n_actions() => Ok(*i),
        ActionSpec::Index(i) => Err(Error::InvalidArgument(format!("action index {i} out of range"))),
        ActionSpec::Label(l) => model
            .action_index(l)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown action `{l}`"))),
    };
    r.map_err(|e| spec_error(pointer, e))
}

impl ProbeSpec {
    /// Resolves beliefs and actions against `model`.
    #[allow(clippy::type_complexity)]
    pub fn resolve(
        &self,
        model: &DiscretePomdp,
    ) -> Result<(Vec<(Belief, usize)>, (Belief, usize), Option<SetFamily>)> {
        let sequence = match &self.sequence {
            SequenceSpec::Points(points) => points
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    Ok((
                        resolve_belief(model, &p.belief, &format!("/sequence/{i}/belief"))?,
                        resolve_spec_action(model, &p.action, &format!("/sequence/{i}/action"))?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?,
            SequenceSpec::SharedBelief { belief, actions } => {
                let z = resolve_belief(model, belief, "/sequence/belief")?;
                actions
                    .iter()
                    .enumerate()
                    .map(|(i, a)| Ok((z.clone(), resolve_spec_action(model, a, &format!("/sequence/actions/{i}"))?)))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let target = (
            resolve_belief(model, &self.target.belief, "/target/belief")?,
            resolve_spec_action(model, &self.target.action, "/target/action")?,
        );
        let sets = match &self.sets {
            None => None,
            Some(SetsSpec::Named(n)) if n == "all_intervals" => Some(SetFamily::AllIntervals),
            Some(SetsSpec::Named(n)) => {
                return Err(Error::Parse {
                    pointer: "/sets".into(),
                    message: format!("unknown set family `{n}`"),
                })
            }
            Some(SetsSpec::Explicit(sets)) => Some(SetFamily::Explicit(sets.clone())),
        };
        Ok((sequence, target, sets))
    }
}

fn probe(args: &ProbeArgs, stdout: &mut Vec<u8>) -> Result<()> {
    let (model, source) = load(&args.model)?;
    let format = format_of(args.out.output.as_deref(), Format::Csv)?;
    let raw = parse_json(&read_arg(&args.spec)?)?;
    let spec: ProbeSpec = deserialize_at(raw.clone(), "")?;
    let (sequence, target, sets) = spec.resolve(&model)?;
    let report = probe_kernel(
        &model,
        spec.kernel,
        &sequence,
        &target,
        spec.mode,
        sets.as_ref(),
        spec.threshold.unwrap_or(DEFAULT_THRESHOLD),
    )?;
    let text = match format {
        Format::Csv => report.gaps.iter().enumerate().fold(String::from("n,gap\n"), |mut s, (i, g)| {
            writeln!(s, "{},{}", i + 1, csv_float(*g)).unwrap();
            s
        }),
        Format::Json => {
            let mut cfg = config("probe", Some(source), args)?;
            cfg.options["spec"] = raw;
            let mut body = serde_json::to_value(&report)?;
            body["gaps"] = nums(&report.gaps);
            body["limit_estimate"] = num(report.limit_estimate);
            pretty(&json!({ "config": cfg, "report": body }))?
        }
    };
    emit(args.out.output.as_deref(), &text, stdout)
}

fn simulate(args: &SimulateArgs, stdout: &mut Vec<u8>) -> Result<()> {
    let (model, source) = load(&args.model)?;
    let format = format_of(args.out.output.as_deref(), Format::Json)?;
    let prior = model.prior_belief()?;
    let run = |policy: &dyn Policy| simulate_policy(&model, &policy, &prior, args.horizon, args.episodes, args.seed);
    let estimate = match args.policy {
        PolicyKind::Grid => {
            let sol = value_iterate_grid(&model, args.resolution, args.max_iters, args.epsilon)?;
            run(&StationaryIPolicy::new(&model, sol.values))?
        }
        PolicyKind::Alpha => {
            let mut sets = alpha_solve(&model, args.plan_horizon, Pruning::Pointwise)?;
            run(&StationaryIPolicy::new(&model, sets.pop().expect("nonempty")))?
        }
        PolicyKind::Fixed => {
            let token = args.action.as_deref().unwrap_or_default();
            let a = resolve_action(&model, token)?;
            run(&|_: &Belief| -> Result<usize> { Ok(a) })?
        }
    };
    let text = match format {
        Format::Json => pretty(&json!({
            "config": config("simulate", Some(source), args)?,
            "mean": num(estimate.mean),
            "std_error": num(estimate.std_error),
            "episodes": estimate.episodes,
        }))?,
        Format::Csv => format!(
            "mean,std_error,episodes\n{},{},{}\n",
            csv_float(estimate.mean),
            csv_float(estimate.std_error),
            estimate.episodes
        ),
    };
    emit(args.out.output.as_deref(), &text, stdout)
}

impl Policy for &dyn Policy {
    fn act(&self, z: &Belief) -> Result<usize> {
        (**self).act(z)
    }
}

fn require_json(out: &OutputArgs) -> Result<()> {
    if format_of(out.output.as_deref(), Format::Json)? != Format::Json {
        return Err(Error::InvalidArgument("this command only writes JSON".into()));
    }
    Ok(())
}

/// Runs one parsed invocation, writing to files or `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let mut buf = Vec::new();
    let stdout_buf = &mut buf;
    let work = move || match &cli.command {
        Command::Solve(a) => solve(a, stdout_buf),
        Command::FilterTrace(a) => filter_trace(a, stdout_buf),
        Command::Probe(a) => probe(a, stdout_buf),
        Command::Simulate(a) => simulate(a, stdout_buf),
        Command::ListModels(a) => {
            require_json(a)?;
            let text = pretty(&json!({
                "config": config("list-models", None, a)?,
                "builders": list_models(),
            }))?;
            emit(a.output.as_deref(), &text, stdout_buf)
        }
        Command::Validate(a) => {
            require_json(&a.out)?;
            let (model, source) = match load(&a.model) {
                Err(Error::Validation(failures)) => {
                    return Err(Error::Validation(failures));
                }
                other => other?,
            };
            let report = model.validate();
            let text = pretty(&json!({
                "config": config("validate", Some(source), a)?,
                "ok": report.is_ok(),
                "cost_shift": num(report.cost_shift),
                "failures": report.failures,
            }))?;
            emit(a.out.output.as_deref(), &text, stdout_buf)
        }
        Command::Export(a) => {
            require_json(&a.out)?;
            let (model, _) = load(&a.model)?;
            let mut text = model_to_string(&model)?;
            text.push('\n');
            emit(a.out.output.as_deref(), &text, stdout_buf)
        }
    };
    let threads = match cli.threads {
        Some(0) => return Err(Error::InvalidArgument("--threads must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start thread pool: {e}")))?;
    pool.install(work)?;
    stdout.write_all(&buf)?;
    Ok(())
}

/// Process exit status for an error: 2 for malformed input, 3 for a model
/// that fails validation, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Json(_) => 2,
        Error::Validation(_) => 3,
        _ => 1,
    }
}

/// Structured error written to stderr.
pub fn error_json(e: &Error) -> Value {
    let kind = match e {
        Error::Parse { .. } | Error::Json(_) => "malformed_input",
        Error::Validation(_) => "validation",
        Error::Io(_) => "io",
        Error::UnknownBuilder(_) => "unknown_builder",
        Error::InvalidArgument(_) => "invalid_argument",
        _ => "error",
    };
    let mut body = json!({ "kind": kind, "message": e.to_string(), "exit_code": exit_code(e) });
    match e {
        Error::Parse { pointer, message } => {
            body["pointer"] = json!(pointer);
            body["message"] = json!(message);
        }
        Error::Validation(failures) => body["failures"] = json!(failures),
        _ => {}
    }
    json!({ "error": body })
}

/// Entry point used by the binary; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock).and_then(|_| lock.flush().map_err(Error::from)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> Result<String> {
        let cli = Cli::try_parse_from(std::iter::once("beliefmdp").chain(args.iter().copied())).unwrap();
        let mut out = Vec::new();
        run(&cli, &mut out)?;
        Ok(String::from_utf8(out).unwrap())
    }

    #[test]
    fn csv_floats_round_trip() {
        for x in [1.0 / 3.0, 0.1, 1e-300, 123456.789, 0.0] {
            assert_eq!(csv_float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(csv_float(f64::INFINITY), "inf");
        assert_eq!(num(f64::INFINITY), json!("inf"));
        assert_eq!(csv_field("a,b"), "\"a,b\"");
    }

    #[test]
    fn solve_alpha_smoke() {
        let text = run_args(&["solve", "--builder", "example-4-2", "--params", r#"{"k_max":2}"#, "--method", "alpha", "--horizon", "2"])
            .unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["config"]["command"], "solve");
        assert_eq!(v["config"]["model"]["name"], "example-4-2");
        assert!(!v["alpha_vectors"].as_array().unwrap().is_empty());
        assert_eq!(v["beliefs"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn probe_tv_on_belief_kernel_is_one() {
        let spec = r#"{"kernel":"belief_transition","mode":"tv",
            "sequence":{"belief":"uniform","actions":["1/1","1/2","1/3","1/4","1/5","1/6","1/7","1/8"]},
            "target":{"belief":[0.5,0.5],"action":"0"}}"#;
        let text = run_args(&["probe", "--builder", "example-4-1", "--params", r#"{"n":8}"#, "--spec", spec]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n,gap"));
        let gaps: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert_eq!(gaps.len(), 8);
        assert!(gaps.iter().all(|g| (g - 1.0).abs() < 1e-12));
    }

    #[test]
    fn filter_trace_rows() {
        let text = run_args(&[
            "filter-trace", "--builder", "example-4-2", "--params", r#"{"k_max":2}"#, "--actions", "-0.5,0.5",
            "--observations", "1,1,2",
        ])
        .unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("t,action,observation,"));
    }

    #[test]
    fn error_mapping() {
        let e = run_args(&["solve", "--builder", "example-4-1", "--params", r#"{"n":"x"}"#]).unwrap_err();
        assert_eq!(exit_code(&e), 2);
        assert_eq!(error_json(&e)["error"]["pointer"], "/n");
        assert_eq!(exit_code(&Error::Validation(vec![])), 3);
    }
}

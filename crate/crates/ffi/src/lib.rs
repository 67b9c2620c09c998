//! C ABI over `beliefmdp`.
//!
//! Models, belief distributions and value functions cross the boundary as
//! opaque handles created and freed here. Every function returns a
//! [`BmStatus`]; on failure a message is kept per thread and can be read
//! with [`bm_last_error_message`]. Panics are caught and reported as
//! [`BmStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use beliefmdp::filter::{bayes_update, belief_transition, observation_weights};
use beliefmdp::io::model_from_str;
use beliefmdp::models::build;
use beliefmdp::solver::{
    alpha_solve, greedy_action_set, value_iterate_grid, AlphaVectorSet, BeliefGridValues, Pruning, ValueFunction,
    BELLMAN_TOL,
};
use beliefmdp::{Belief, BeliefDistribution, DiscretePomdp, Error};

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON or a field of the wrong type.
    MalformedInput = 3,
    /// The model fails validation.
    Validation = 4,
    InvalidArgument = 5,
    DimensionMismatch = 6,
    /// An index past the end of a handle's contents.
    OutOfRange = 7,
    Panic = 8,
    Other = 9,
}

/// A validated POMDP.
pub struct BmModel {
    inner: DiscretePomdp,
}

/// A finitely supported law on beliefs.
pub struct BmBeliefDist {
    inner: BeliefDistribution,
}

/// A solved value function.
pub struct BmValueFn {
    inner: Solved,
}

enum Solved {
    Alpha(AlphaVectorSet),
    Grid(BeliefGridValues),
}

impl ValueFunction for Solved {
    fn value(&self, z: &[f64]) -> f64 {
        match self {
            Solved::Alpha(v) => v.value(z),
            Solved::Grid(v) => v.value(z),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(BmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } | Error::Json(_) => BmStatus::MalformedInput,
            Error::Validation(_) => BmStatus::Validation,
            Error::DimensionMismatch(_) => BmStatus::DimensionMismatch,
            Error::InvalidArgument(_) | Error::InvalidBelief(_) | Error::UnknownBuilder(_) => {
                BmStatus::InvalidArgument
            }
            _ => BmStatus::Other,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BmStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BmStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {message}"));
            BmStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(BmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(BmStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn belief_arg(model: &DiscretePomdp, z: *const f64, len: usize) -> Result<Belief, Failure> {
    if z.is_null() {
        return Err(null("belief"));
    }
    if len != model.n_states() {
        return Err(Failure(
            BmStatus::DimensionMismatch,
            format!("belief has {len} entries, model has {} states", model.n_states()),
        ));
    }
    Ok(Belief::new(std::slice::from_raw_parts(z, len).to_vec())?)
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(Failure(
            BmStatus::DimensionMismatch,
            format!("{what} holds {len} values, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn validated(model: DiscretePomdp) -> Result<BmModel, Failure> {
    model.validate().into_result()?;
    Ok(BmModel { inner: model })
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn bm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates a model document (or a `{"builder", "params"}` reference).
#[no_mangle]
pub unsafe extern "C" fn bm_model_from_json(json: *const c_char, out: *mut *mut BmModel) -> BmStatus {
    guard(|| {
        let text = as_str(json, "json")?;
        put(out, validated(model_from_str(text)?)?)
    })
}

/// Builds a named model; `params_json` may be null for the defaults.
#[no_mangle]
pub unsafe extern "C" fn bm_model_build(
    name: *const c_char,
    params_json: *const c_char,
    out: *mut *mut BmModel,
) -> BmStatus {
    guard(|| {
        let name = as_str(name, "name")?;
        let params = if params_json.is_null() {
            serde_json::Value::Null
        } else {
            serde_json::from_str(as_str(params_json, "params_json")?)
                .map_err(|e| Failure(BmStatus::MalformedInput, e.to_string()))?
        };
        put(out, validated(build(name, &params)?)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn bm_model_free(model: *mut BmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes the numbers of states, observations and actions; any output may be null.
#[no_mangle]
pub unsafe extern "C" fn bm_model_dims(
    model: *const BmModel,
    n_states: *mut usize,
    n_observations: *mut usize,
    n_actions: *mut usize,
) -> BmStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner;
        for (p, v) in [(n_states, m.n_states()), (n_observations, m.n_observations()), (n_actions, m.n_actions())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Posterior `H(z, a, y)` written to `out` (`out_len >= n_states`).
#[no_mangle]
pub unsafe extern "C" fn bm_bayes_update(
    model: *const BmModel,
    z: *const f64,
    z_len: usize,
    action: usize,
    observation: usize,
    out: *mut f64,
    out_len: usize,
) -> BmStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner;
        let z = belief_arg(m, z, z_len)?;
        let post = bayes_update(m, &z, action, observation)?;
        out_slice(out, out_len, m.n_states(), "out")?.copy_from_slice(&post);
        Ok(())
    })
}

/// Observation law `R'(.|z, a)` over observation indices (`out_len >= n_observations`).
#[no_mangle]
pub unsafe extern "C" fn bm_observation_marginal(
    model: *const BmModel,
    z: *const f64,
    z_len: usize,
    action: usize,
    out: *mut f64,
    out_len: usize,
) -> BmStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner;
        let z = belief_arg(m, z, z_len)?;
        let weights = observation_weights(m, &z, action)?;
        out_slice(out, out_len, m.n_observations(), "out")?.copy_from_slice(&weights);
        Ok(())
    })
}

/// Law of the next belief after action `a` from `z`.
#[no_mangle]
pub unsafe extern "C" fn bm_belief_transition(
    model: *const BmModel,
    z: *const f64,
    z_len: usize,
    action: usize,
    out: *mut *mut BmBeliefDist,
) -> BmStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner;
        let z = belief_arg(m, z, z_len)?;
        put(out, BmBeliefDist {
            inner: belief_transition(m, &z, action)?,
        })
    })
}

#[no_mangle]
pub unsafe extern "C" fn bm_belief_dist_len(dist: *const BmBeliefDist, len: *mut usize) -> BmStatus {
    guard(|| {
        let d = &as_ref(dist, "dist")?.inner;
        if len.is_null() {
            return Err(null("len"));
        }
        *len = d.len();
        Ok(())
    })
}

/// Support point `index` (written to `belief_out`) and its weight.
#[no_mangle]
pub unsafe extern "C" fn bm_belief_dist_get(
    dist: *const BmBeliefDist,
    index: usize,
    belief_out: *mut f64,
    belief_len: usize,
    weight: *mut f64,
) -> BmStatus {
    guard(|| {
        let d = &as_ref(dist, "dist")?.inner;
        let Some(b) = d.support().get(index) else {
            return Err(Failure(
                BmStatus::OutOfRange,
                format!("index {index} past {} support points", d.len()),
            ));
        };
        out_slice(belief_out, belief_len, b.len(), "belief_out")?.copy_from_slice(b);
        if weight.is_null() {
            return Err(null("weight"));
        }
        *weight = d.weights()[index];
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn bm_belief_dist_free(dist: *mut BmBeliefDist) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Exact `horizon`-step values by alpha vectors. `exact_pruning != 0`
/// additionally removes vectors that are nowhere strictly best.
#[no_mangle]
pub unsafe extern "C" fn bm_solve_alpha(
    model: *const BmModel,
    horizon: usize,
    exact_pruning: i32,
    out: *mut *mut BmValueFn,
) -> BmStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner;
        let pruning = if exact_pruning != 0 {
            Pruning::Exact
        } else {
            Pruning::Pointwise
        };
        let set = alpha_solve(m, horizon, pruning)?.pop().expect("horizon-0 set");
        put(out, BmValueFn {
            inner: Solved::Alpha(set),
        })
    })
}

/// Grid value iteration; `iterations` and `converged` may be null.
#[no_mangle]
pub unsafe extern "C" fn bm_solve_grid(
    model: *const BmModel,
    resolution: u32,
    max_iters: usize,
    epsilon: f64,
    out: *mut *mut BmValueFn,
    iterations: *mut usize,
    converged: *mut i32,
) -> BmStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner;
        let sol = value_iterate_grid(m, resolution, max_iters, epsilon)?;
        if !iterations.is_null() {
            *iterations = sol.iterations;
        }
        if !converged.is_null() {
            *converged = i32::from(sol.converged);
        }
        put(out, BmValueFn {
            inner: Solved::Grid(sol.values),
        })
    })
}

/// `V(z)`; may be `+inf`.
#[no_mangle]
pub unsafe extern "C" fn bm_value_fn_eval(
    model: *const BmModel,
    value_fn: *const BmValueFn,
    z: *const f64,
    z_len: usize,
    value: *mut f64,
) -> BmStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner;
        let v = &as_ref(value_fn, "value_fn")?.inner;
        let z = belief_arg(m, z, z_len)?;
        if value.is_null() {
            return Err(null("value"));
        }
        *value = v.value(&z);
        Ok(())
    })
}

/// Lowest-index action attaining the one-step lookahead minimum at `z`.
#[no_mangle]
pub unsafe extern "C" fn bm_value_fn_greedy(
    model: *const BmModel,
    value_fn: *const BmValueFn,
    z: *const f64,
    z_len: usize,
    action: *mut usize,
) -> BmStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner;
        let v = &as_ref(value_fn, "value_fn")?.inner;
        let z = belief_arg(m, z, z_len)?;
        if action.is_null() {
            return Err(null("action"));
        }
        *action = greedy_action_set(m, v, &z, BELLMAN_TOL)?[0];
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn bm_value_fn_free(value_fn: *mut BmValueFn) {
    if !value_fn.is_null() {
        drop(Box::from_raw(value_fn));
    }
}

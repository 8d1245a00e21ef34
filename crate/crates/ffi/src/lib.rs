//! C interface to `dpskgd`.
//!
//! Three opaque handles cover the whole pipeline: a [`DpskgdProblem`] owns the
//! dataset and its non-private optimum, a [`DpskgdPlan`] holds the calibrated
//! noise, schedule and step sizes for one sampling strategy, and a
//! [`DpskgdRun`] is the output of one seeded run. Every fallible call returns a
//! [`DpskgdStatus`]; on failure [`dpskgd_last_error`] describes what went wrong
//! on the calling thread.
//!
//! Handles are not thread-safe to mutate, but none of the calls below mutate a
//! handle after construction, so sharing them read-only across threads is fine.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dpskgd::bench::{plan_method, run_seed, DistributionSpec, MethodPlan, MethodSpec, Prepared, ScheduleMode};
use dpskgd::erm::{Dataset, LipschitzMap, LossModel, Problem};
use dpskgd::optimizer::{RunResult, Schedule};
use dpskgd::privacy::{calibrate_noise, PrivacyBudget};
use dpskgd::sampling::SamplingDistribution;
use dpskgd::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpskgdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    BudgetOutOfRange = 4,
    /// Quadratic loss has no component-Lipschitz constant, so it cannot be privatized.
    UnboundedLipschitz = 5,
    Diverged = 6,
    NoConvergence = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpskgdLoss {
    Logistic = 0,
    Quadratic = 1,
}

/// Dataset plus its reference optimum.
pub struct DpskgdProblem {
    prepared: Prepared,
}

/// A calibrated method ready to run.
pub struct DpskgdPlan {
    plan: MethodPlan,
}

/// Output of one run.
pub struct DpskgdRun {
    result: RunResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> DpskgdStatus {
    match e {
        Error::DimensionMismatch { .. } => DpskgdStatus::DimensionMismatch,
        Error::BudgetOutOfRange(_) => DpskgdStatus::BudgetOutOfRange,
        Error::UnboundedLipschitz => DpskgdStatus::UnboundedLipschitz,
        Error::Diverged { .. } => DpskgdStatus::Diverged,
        Error::NoConvergence(_) => DpskgdStatus::NoConvergence,
        _ => DpskgdStatus::InvalidArgument,
    }
}

/// Failure inside a call body, before conversion to a status code.
enum Fail {
    Lib(Error),
    Null(&'static str),
    Small { needed: usize, got: usize },
    Arg(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Run `f`, record any error for [`dpskgd_last_error`] and map it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DpskgdStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DpskgdStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("null pointer passed for `{name}`"));
            DpskgdStatus::NullPointer
        }
        Ok(Err(Fail::Small { needed, got })) => {
            set_error(format!("buffer holds {got} values, {needed} needed"));
            DpskgdStatus::BufferTooSmall
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            DpskgdStatus::InvalidArgument
        }
        Err(_) => {
            set_error("internal panic".into());
            DpskgdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn copy_to(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Fail> {
    if len < src.len() {
        return Err(Fail::Small { needed: src.len(), got: len });
    }
    if src.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(Fail::Null("buf"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

fn into_handle<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    unsafe { out.write(Box::into_raw(Box::new(value))) };
    Ok(())
}

/// Message for the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dpskgd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn dpskgd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a problem from an `n × d` design stored column-major in `x`
/// (`x[j*n + i]` is feature `j` of sample `i`) and labels `y` of length `n`.
/// Logistic labels must be ±1. Solves for the reference optimum.
///
/// # Safety
/// `x` must point to `n*d` doubles, `y` to `n` doubles, `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn dpskgd_problem_new(
    loss: DpskgdLoss,
    n: usize,
    d: usize,
    x: *const f64,
    y: *const f64,
    out: *mut *mut DpskgdProblem,
) -> DpskgdStatus {
    guard(|| {
        let len = n.checked_mul(d).ok_or_else(|| Fail::Arg("n * d overflows".into()))?;
        let x = slice(x, len, "x")?;
        let y = slice(y, n, "y")?;
        let model = match loss {
            DpskgdLoss::Logistic => LossModel::Logistic,
            DpskgdLoss::Quadratic => LossModel::Quadratic,
        };
        let data = Dataset::from_columns(n, d, x.to_vec(), y.to_vec())?;
        let prepared = Prepared::from_problem(Problem::new(model, data)?)?;
        into_handle(out, DpskgdProblem { prepared })
    })
}

/// # Safety
/// `problem` must come from [`dpskgd_problem_new`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dpskgd_problem_free(problem: *mut DpskgdProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle; `n` and `d` writable.
#[no_mangle]
pub unsafe extern "C" fn dpskgd_problem_shape(problem: *const DpskgdProblem, n: *mut usize, d: *mut usize) -> DpskgdStatus {
    guard(|| {
        let data = &deref(problem, "problem")?.prepared.problem.data;
        write_out(n, data.n(), "n")?;
        write_out(d, data.d(), "d")
    })
}

/// Copy the reference optimum into `w` (capacity `len`, at least `d`) and its value into `f_star`.
///
/// # Safety
/// `problem` must be a live handle, `w` must hold `len` doubles, `f_star` writable.
#[no_mangle]
pub unsafe extern "C" fn dpskgd_problem_optimum(
    problem: *const DpskgdProblem,
    w: *mut f64,
    len: usize,
    f_star: *mut f64,
) -> DpskgdStatus {
    guard(|| {
        let opt = &deref(problem, "problem")?.prepared.optimum;
        copy_to(&opt.w, w, len)?;
        write_out(f_star, opt.value, "f_star")
    })
}

/// Objective value at `w` of length `len == d`.
///
/// # Safety
/// `problem` must be a live handle, `w` must hold `len` doubles, `value` writable.
#[no_mangle]
pub unsafe extern "C" fn dpskgd_problem_value(
    problem: *const DpskgdProblem,
    w: *const f64,
    len: usize,
    value: *mut f64,
) -> DpskgdStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.prepared.problem;
        let w = dpskgd::linalg::Vector::new(slice(w, len, "w")?.to_vec())?;
        write_out(value, p.value(&w)?, "value")
    })
}

/// Calibrate a method for `problem` under `(epsilon, delta)`.
///
/// `method` names the sampling strategy: `dp-sgd`, `dp-cd-uniform`,
/// `dp-skgd-importance`, `dp-skgd-block`, `block-uniform` or `nice`.
/// `block_size` and `tau` are read only by the block and nice strategies.
/// With `epochs == 0 && steps == 0` the convex schedule is chosen
/// automatically; otherwise both must be positive.
///
/// # Safety
/// `problem` must be a live handle, `method` a nul-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dpskgd_plan_new(
    problem: *const DpskgdProblem,
    method: *const c_char,
    block_size: usize,
    tau: usize,
    epsilon: f64,
    delta: f64,
    epochs: u64,
    steps: u64,
    out: *mut *mut DpskgdPlan,
) -> DpskgdStatus {
    guard(|| {
        let prep = &deref(problem, "problem")?.prepared;
        if method.is_null() {
            return Err(Fail::Null("method"));
        }
        let name = CStr::from_ptr(method).to_str().map_err(|_| Fail::Arg("method is not UTF-8".into()))?;
        let dist = DistributionSpec::parse(name, Some(block_size).filter(|&b| b > 0), Some(tau).filter(|&t| t > 0))?;
        let mode = match (epochs, steps) {
            (0, 0) => ScheduleMode::AutoConvex,
            (t, k) => ScheduleMode::Manual(Schedule::new(t, k)?),
        };
        let spec = MethodSpec { label: name.to_string(), dist };
        let plan = plan_method(prep, &spec, PrivacyBudget::new(epsilon, delta)?, mode, None, None)?;
        into_handle(out, DpskgdPlan { plan })
    })
}

/// # Safety
/// `plan` must come from [`dpskgd_plan_new`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dpskgd_plan_free(plan: *mut DpskgdPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Schedule, audited epsilon and utility bound of a plan. Any output pointer may be null.
///
/// # Safety
/// `plan` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dpskgd_plan_info(
    plan: *const DpskgdPlan,
    epochs: *mut u64,
    steps: *mut u64,
    audited_epsilon: *mut f64,
    utility_bound: *mut f64,
) -> DpskgdStatus {
    guard(|| {
        let p = &deref(plan, "plan")?.plan;
        for (ptr, v) in [(epochs, p.schedule.t), (steps, p.schedule.k)] {
            if !ptr.is_null() {
                ptr.write(v);
            }
        }
        for (ptr, v) in [(audited_epsilon, p.audited_eps), (utility_bound, p.utility_bound)] {
            if !ptr.is_null() {
                ptr.write(v);
            }
        }
        Ok(())
    })
}

/// Run `plan` on `problem` with the given seed. The same inputs give bitwise identical output.
///
/// # Safety
/// `problem` and `plan` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dpskgd_run(
    problem: *const DpskgdProblem,
    plan: *const DpskgdPlan,
    seed: u64,
    out: *mut *mut DpskgdRun,
) -> DpskgdStatus {
    guard(|| {
        let prep = &deref(problem, "problem")?.prepared;
        let plan = &deref(plan, "plan")?.plan;
        let result = run_seed(prep, plan, seed)?;
        into_handle(out, DpskgdRun { result })
    })
}

/// # Safety
/// `run` must come from [`dpskgd_run`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dpskgd_run_free(run: *mut DpskgdRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Copy the private output `w_priv` (length `d`) into `w`.
///
/// # Safety
/// `run` must be a live handle and `w` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dpskgd_run_weights(run: *const DpskgdRun, w: *mut f64, len: usize) -> DpskgdStatus {
    guard(|| copy_to(deref(run, "run")?.result.w_priv.as_slice(), w, len))
}

/// Number of recorded objective values, `T + 1`. Returns 0 for a null handle.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dpskgd_run_objective_len(run: *const DpskgdRun) -> usize {
    run.as_ref().map_or(0, |r| r.result.objective.len())
}

/// Copy `f(w^0), …, f(w^T)` into `values`.
///
/// # Safety
/// `run` must be a live handle and `values` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dpskgd_run_objective(run: *const DpskgdRun, values: *mut f64, len: usize) -> DpskgdStatus {
    guard(|| copy_to(&deref(run, "run")?.result.objective, values, len))
}

/// Total gradient coordinates evaluated during the run.
///
/// # Safety
/// `run` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn dpskgd_run_coord_evals(run: *const DpskgdRun, count: *mut u64) -> DpskgdStatus {
    guard(|| write_out(count, deref(run, "run")?.result.coord_evals, "count"))
}

/// Per-coordinate noise variance `12 L² K T ln(1/δ) / (n² ε²)` for a single
/// Lipschitz constant. Requires `epsilon <= 1` and `delta < 1/3`.
///
/// # Safety
/// `sigma_sq` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dpskgd_calibrate_noise(
    lipschitz: f64,
    epochs: u64,
    steps: u64,
    n: usize,
    epsilon: f64,
    delta: f64,
    sigma_sq: *mut f64,
) -> DpskgdStatus {
    guard(|| {
        let dist = SamplingDistribution::full(1)?;
        let l = LipschitzMap::constant(&dist, lipschitz)?;
        let noise = calibrate_noise(&l, Schedule::new(epochs, steps)?, n, PrivacyBudget::new(epsilon, delta)?)?;
        let v = noise.entries().values().next().copied().ok_or(Error::Empty("noise table"))?;
        write_out(sigma_sq, v, "sigma_sq")
    })
}

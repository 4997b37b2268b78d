//! C ABI over `robust-recourse`.
//!
//! Problems and solutions are opaque handles created and released by this
//! library. Every fallible call returns an [`RrStatus`]; on failure the
//! message is available from [`rr_last_error_message`] on the same thread.
//! The generated header lives in `include/robust_recourse.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use robust_recourse::eval::{Algorithm, SolverSettings};
use robust_recourse::{
    worst_case_glm, FeatureVector, LinearModel, Neighborhood, NormOrder, RecourseError, RecourseProblem,
    RecourseSolution,
};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// Bad norm for the algorithm, or an unknown algorithm code.
    Unsupported = 4,
    NumericFailure = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Algorithm codes accepted by [`rr_solve`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrAlgorithm {
    /// Candidate decomposition, `p = 1`.
    Alg1 = 0,
    /// Coordinate descent, `p = ∞`.
    Alg2 = 1,
    RoarL1 = 2,
    RoarLinf = 3,
}

/// Opaque recourse problem.
pub struct RrProblem(RecourseProblem);

/// Opaque solved recourse.
pub struct RrSolution(RecourseSolution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &RecourseError) -> RrStatus {
    match err {
        RecourseError::DimensionMismatch { .. } => RrStatus::DimensionMismatch,
        RecourseError::UnsupportedNorm { .. } => RrStatus::Unsupported,
        e if e.is_numeric() => RrStatus::NumericFailure,
        _ => RrStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (RrStatus, String)>) -> RrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RrStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside robust-recourse");
            RrStatus::Panic
        }
    }
}

fn lib_err(e: RecourseError) -> (RrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RrStatus, String) {
    (RrStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `ptr` must be null or point to `len` readable doubles.
unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], (RrStatus, String)> {
    if ptr.is_null() {
        if len == 0 {
            return Ok(&[]);
        }
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Last error message of the calling thread, or null if none. The pointer
/// stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn rr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a problem for the GLM `weights`, `intercept` and origin `origin`
/// (both of length `dim`). `p` is the norm order, `INFINITY` for the max
/// norm. On success `*out` receives a handle to release with
/// [`rr_problem_free`].
///
/// # Safety
/// `weights` and `origin` must point to `dim` readable doubles and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn rr_problem_new(
    weights: *const f64,
    intercept: f64,
    origin: *const f64,
    dim: usize,
    p: f64,
    alpha: f64,
    lambda: f64,
    perturb_intercept: bool,
    out: *mut *mut RrProblem,
) -> RrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let w = slice(weights, dim, "weights")?.to_vec();
        let x0 = slice(origin, dim, "origin")?.to_vec();
        let p = NormOrder::finite(p).map_err(lib_err)?;
        let nb = Neighborhood::new(p, alpha)
            .map_err(lib_err)?
            .with_intercept_perturbation(perturb_intercept);
        let model = LinearModel::new(w, intercept).map_err(lib_err)?;
        let origin = FeatureVector::new(x0).map_err(lib_err)?;
        let problem = RecourseProblem::new(origin, model, nb, lambda).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(RrProblem(problem)));
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from [`rr_problem_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rr_problem_free(problem: *mut RrProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Worst-case price `max_θ J(x, θ)` of the recourse `x` (length `dim` of the
/// problem) over the problem's neighborhood.
///
/// # Safety
/// `problem` must be a live handle, `x` must point to `len` readable doubles,
/// and `price` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rr_worst_case_price(
    problem: *const RrProblem,
    x: *const f64,
    len: usize,
    price: *mut f64,
) -> RrStatus {
    guard(|| {
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        if price.is_null() {
            return Err(null("price"));
        }
        let x = FeatureVector::new(slice(x, len, "x")?.to_vec()).map_err(lib_err)?;
        *price = worst_case_glm(&problem.0, &x).map_err(lib_err)?.objective;
        Ok(())
    })
}

/// Solves the problem with the given [`RrAlgorithm`] code under that
/// algorithm's norm (the problem's `p` is replaced). On success `*out`
/// receives a handle to release with [`rr_solution_free`].
///
/// # Safety
/// `problem` must be a live handle and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn rr_solve(problem: *const RrProblem, algorithm: u32, out: *mut *mut RrSolution) -> RrStatus {
    guard(|| {
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let alg = match algorithm {
            0 => Algorithm::Alg1,
            1 => Algorithm::Alg2,
            2 => Algorithm::RoarL1,
            3 => Algorithm::RoarLinf,
            other => return Err((RrStatus::Unsupported, format!("unknown algorithm code {other}"))),
        };
        let sol = alg.solve(&problem.0, &SolverSettings::default()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(RrSolution(sol)));
        Ok(())
    })
}

/// # Safety
/// `solution` must be null or a handle from [`rr_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rr_solution_free(solution: *mut RrSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Number of features of the recourse; 0 for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rr_solution_dim(solution: *const RrSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.0.recourse.dim())
}

/// Certified worst-case price; NaN for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rr_solution_price(solution: *const RrSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.0.price)
}

/// Whether every inner solve met its stopping rule.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rr_solution_converged(solution: *const RrSolution) -> bool {
    solution.as_ref().is_some_and(|s| s.0.converged)
}

/// Copies the recourse into `buf`, which must hold exactly
/// [`rr_solution_dim`] doubles.
///
/// # Safety
/// `solution` must be a live handle and `buf` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn rr_solution_recourse(solution: *const RrSolution, buf: *mut f64, len: usize) -> RrStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        copy_out(s.0.recourse.features(), buf, len)
    })
}

/// Copies the worst-case model as `dim` weights followed by the intercept
/// into `buf`, which must hold `dim + 1` doubles.
///
/// # Safety
/// `solution` must be a live handle and `buf` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn rr_solution_adversarial_model(
    solution: *const RrSolution,
    buf: *mut f64,
    len: usize,
) -> RrStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        copy_out(s.0.adversarial_model.augmented(), buf, len)
    })
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), (RrStatus, String)> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len != src.len() {
        return Err((
            RrStatus::DimensionMismatch,
            format!("buffer holds {len} values, need {}", src.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), buf, len);
    Ok(())
}

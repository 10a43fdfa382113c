//! C ABI over the `nsparse` library.
//!
//! Objects are opaque handles created by `ns_*_new`/`ns_*_init`/`ns_*_load`
//! and released by the matching `ns_*_free`. Every fallible call returns an
//! [`NsStatus`]; on failure [`ns_last_error`] describes the error for the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nsparse::chains::{chain_value, gap_row};
use nsparse::harmonic::{extremal_h, solve_tuning_pair};
use nsparse::snapshot::{load_snapshot, save_snapshot, FieldRole, Snapshot, SnapshotError};
use nsparse::solver::{init_field, InitialCondition, SolverState, Stepper};
use nsparse::sparseness::{z_alpha_check, ScanOptions, SparsenessMode, SparsenessParams};
use nsparse::{MultiIndex, PeriodicField};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Solver = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsSparsenessMode {
    Volumetric = 0,
    OneD = 1,
}

/// Velocity field on the periodic grid.
pub struct NsField {
    inner: PeriodicField,
}

/// Time stepper together with its current state.
pub struct NsSolver {
    stepper: Stepper,
    state: SolverState,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NsNorms {
    pub sup_u: f64,
    pub l2_u: f64,
    pub sup_w: f64,
    pub grad_energy: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NsTuningPair {
    pub lambda: f64,
    pub delta: f64,
    pub h: f64,
    pub constraint_ok: bool,
    pub residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NsZAlpha {
    pub verdict: bool,
    pub rho_star: f64,
    pub fraction_passing: f64,
    pub union_fraction: f64,
    pub resolved: usize,
    pub unresolved: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NsGapRow {
    pub k: u32,
    pub regularity: f64,
    pub apriori: f64,
    pub energy: f64,
    pub gap_ratio: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Failure = (NsStatus, String);

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            NsStatus::Panic
        }
    }
}

fn invalid(e: impl ToString) -> Failure {
    (NsStatus::InvalidArgument, e.to_string())
}

fn null(name: &str) -> Failure {
    (NsStatus::NullPointer, format!("`{name}` is null"))
}

fn snapshot_failure(e: SnapshotError) -> Failure {
    let status = match e {
        SnapshotError::Io(_) => NsStatus::Io,
        _ => NsStatus::Format,
    };
    (status, e.to_string())
}

unsafe fn as_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn as_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn as_path<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p).to_str().map(Path::new).map_err(|_| invalid("path is not UTF-8"))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ns_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Initial condition `kind` (`abc`, `taylor_green`, `kida`,
/// `random_bandlimited`) with default parameters on an `n³` grid.
///
/// # Safety
/// `kind` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_field_init(
    kind: *const c_char,
    n: usize,
    box_length: f64,
    out: *mut *mut NsField,
) -> NsStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        if kind.is_null() {
            return Err(null("kind"));
        }
        let kind = CStr::from_ptr(kind).to_str().map_err(|_| invalid("kind is not UTF-8"))?;
        let ic: InitialCondition = kind.parse().map_err(invalid)?;
        let field = init_field(&ic, n, box_length).map_err(invalid)?;
        *out = Box::into_raw(Box::new(NsField { inner: field }));
        Ok(())
    })
}

/// Field from three component arrays of `n³` doubles each, index
/// `(i₁·n + i₂)·n + i₃`.
///
/// # Safety
/// Each of `u1`, `u2`, `u3` must point to `n³` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn ns_field_from_data(
    n: usize,
    box_length: f64,
    u1: *const f64,
    u2: *const f64,
    u3: *const f64,
    out: *mut *mut NsField,
) -> NsStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        if u1.is_null() || u2.is_null() || u3.is_null() {
            return Err(null("component"));
        }
        let len = n.checked_pow(3).ok_or_else(|| invalid("n overflows"))?;
        let comps = [u1, u2, u3].map(|p| std::slice::from_raw_parts(p, len).to_vec());
        let field = PeriodicField::new(n, box_length, comps).map_err(invalid)?;
        *out = Box::into_raw(Box::new(NsField { inner: field }));
        Ok(())
    })
}

/// # Safety
/// `field` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ns_field_free(field: *mut NsField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Grid size `n`, or 0 for a null handle.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ns_field_n(field: *const NsField) -> usize {
    field.as_ref().map_or(0, |f| f.inner.n())
}

/// Copies component `comp` (0, 1 or 2) into `out`, which holds `len ≥ n³` doubles.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ns_field_copy_component(
    field: *const NsField,
    comp: usize,
    out: *mut f64,
    len: usize,
) -> NsStatus {
    guard(|| {
        let f = &as_ref(field, "field")?.inner;
        if comp > 2 {
            return Err(invalid(format!("component {comp} is not 0, 1 or 2")));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let data = f.component(comp);
        if len < data.len() {
            return Err(invalid(format!("buffer holds {len} values, need {}", data.len())));
        }
        std::slice::from_raw_parts_mut(out, data.len()).copy_from_slice(data);
        Ok(())
    })
}

/// # Safety
/// `field` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ns_field_norms(field: *const NsField, out: *mut NsNorms) -> NsStatus {
    guard(|| {
        let f = &as_ref(field, "field")?.inner;
        let out = as_mut(out, "out")?;
        *out = NsNorms {
            sup_u: f.sup_norm(),
            l2_u: f.energy_l2(),
            sup_w: f.curl().sup_norm(),
            grad_energy: f.gradient_energy(),
        };
        Ok(())
    })
}

/// Sup-norm of `∂^ζ f` for the multi-index `(z1, z2, z3)`.
///
/// # Safety
/// `field` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ns_field_derivative_sup(
    field: *const NsField,
    z1: u32,
    z2: u32,
    z3: u32,
    out: *mut f64,
) -> NsStatus {
    guard(|| {
        let f = &as_ref(field, "field")?.inner;
        let out = as_mut(out, "out")?;
        let d = f.derivative(MultiIndex::new(z1, z2, z3), &Default::default()).map_err(invalid)?;
        *out = d.sup_norm();
        Ok(())
    })
}

/// Writes a velocity snapshot at time `t`.
///
/// # Safety
/// `field` must be a live handle and `path` a nul-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn ns_snapshot_save(field: *const NsField, t: f64, path: *const c_char) -> NsStatus {
    guard(|| {
        let f = as_ref(field, "field")?;
        let path = as_path(path)?;
        let snap = Snapshot { field: f.inner.clone(), t, role: FieldRole::Velocity };
        save_snapshot(&snap, path).map_err(snapshot_failure)
    })
}

/// Reads a snapshot; `out_t` may be null.
///
/// # Safety
/// `path` must be a nul-terminated UTF-8 string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_snapshot_load(path: *const c_char, out: *mut *mut NsField, out_t: *mut f64) -> NsStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let path = as_path(path)?;
        let snap = load_snapshot(path).map_err(snapshot_failure)?;
        if let Some(t) = out_t.as_mut() {
            *t = snap.t;
        }
        *out = Box::into_raw(Box::new(NsField { inner: snap.field }));
        Ok(())
    })
}

/// Solver starting from a copy of `field` at `t = 0` with fixed step `dt`.
///
/// # Safety
/// `field` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ns_solver_new(
    field: *const NsField,
    dt: f64,
    cfl_limit: f64,
    out: *mut *mut NsSolver,
) -> NsStatus {
    guard(|| {
        let f = &as_ref(field, "field")?.inner;
        let out = as_mut(out, "out")?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid(format!("dt = {dt} must be positive")));
        }
        if !(cfl_limit.is_finite() && cfl_limit > 0.0) {
            return Err(invalid(format!("cfl_limit = {cfl_limit} must be positive")));
        }
        let stepper = Stepper::new(f.n(), f.box_length(), cfl_limit);
        let state = SolverState::new(f.clone(), dt);
        *out = Box::into_raw(Box::new(NsSolver { stepper, state }));
        Ok(())
    })
}

/// # Safety
/// `solver` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ns_solver_free(solver: *mut NsSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Advances `steps` steps. On failure the state stays at the last good step.
///
/// # Safety
/// `solver` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ns_solver_step(solver: *mut NsSolver, steps: u64) -> NsStatus {
    guard(|| {
        let s = as_mut(solver, "solver")?;
        for _ in 0..steps {
            s.state = s.stepper.step(&s.state).map_err(|e| (NsStatus::Solver, e.to_string()))?;
        }
        Ok(())
    })
}

/// Current time, or NaN for a null handle.
///
/// # Safety
/// `solver` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ns_solver_time(solver: *const NsSolver) -> f64 {
    solver.as_ref().map_or(f64::NAN, |s| s.state.t)
}

/// New field handle holding a copy of the current velocity.
///
/// # Safety
/// `solver` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ns_solver_field(solver: *const NsSolver, out: *mut *mut NsField) -> NsStatus {
    guard(|| {
        let s = as_ref(solver, "solver")?;
        let out = as_mut(out, "out")?;
        *out = Box::into_raw(Box::new(NsField { inner: s.state.u.clone() }));
        Ok(())
    })
}

/// Harmonic measure of the extremal slit `[-1, -1+λ]` seen from the origin.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_extremal_h(lambda: f64, out: *mut f64) -> NsStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        *out = extremal_h(lambda).map_err(invalid)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_tuning_pair(delta: f64, out: *mut NsTuningPair) -> NsStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let p = solve_tuning_pair(delta).map_err(invalid)?;
        *out = NsTuningPair {
            lambda: p.lambda,
            delta: p.delta,
            h: p.h,
            constraint_ok: p.constraint_ok,
            residual: p.residual,
        };
        Ok(())
    })
}

/// Membership of `∂_{x₁}^k u` in `Z_α(λ, δ; c₀)`, scanning every grid point.
///
/// # Safety
/// `field` and `out` must be valid pointers.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ns_zalpha_check(
    field: *const NsField,
    k: u32,
    lambda: f64,
    delta: f64,
    c0: f64,
    alpha: f64,
    mode: NsSparsenessMode,
    out: *mut NsZAlpha,
) -> NsStatus {
    guard(|| {
        let f = &as_ref(field, "field")?.inner;
        let out = as_mut(out, "out")?;
        let d = f.derivative(MultiIndex::along(0, k), &Default::default()).map_err(invalid)?;
        let mode = match mode {
            NsSparsenessMode::Volumetric => SparsenessMode::Volumetric,
            NsSparsenessMode::OneD => SparsenessMode::OneD,
        };
        let params = SparsenessParams { lambda, delta, c0, alpha };
        let rep = z_alpha_check(&d, &params, mode, &ScanOptions::default()).map_err(invalid)?;
        *out = NsZAlpha {
            verdict: rep.verdict,
            rho_star: rep.rho_star,
            fraction_passing: rep.fraction_passing,
            union_fraction: rep.union_fraction,
            resolved: rep.resolved,
            unresolved: rep.unresolved,
        };
        Ok(())
    })
}

/// Chain value `R(j, c) = (‖D^j u‖_∞ / (c^j j!))^{1/(j+1)}`; NaN on internal failure.
#[no_mangle]
pub extern "C" fn ns_chain_value(j: u32, c: f64, norm: f64) -> f64 {
    catch_unwind(|| chain_value(j, c, norm)).unwrap_or(f64::NAN)
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_gap_row(k: u32, out: *mut NsGapRow) -> NsStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let r = gap_row(k);
        *out =
            NsGapRow { k: r.k, regularity: r.regularity, apriori: r.apriori, energy: r.energy, gap_ratio: r.gap_ratio };
        Ok(())
    })
}

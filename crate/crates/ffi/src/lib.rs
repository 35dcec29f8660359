//! C ABI for the relaxns solver.
//!
//! - Fallible functions return a [`RelaxnsStatus`]; `RELAXNS_STATUS_OK` is zero.
//! - The message of the most recent failure on the calling thread is
//!   available from [`relaxns_last_error_message`].
//! - Grids and solvers are opaque heap handles released with their `_free`
//!   function; passing null to a `_free` function is a no-op.
//! - Field buffers hold physical-space samples, component-major: component
//!   `c` occupies `[c * points, (c + 1) * points)`, and tensor component
//!   `(i, j)` is `c = i * dim + j`. Grid point `(i0, i1, i2)` sits at
//!   `x = (i0, i1, i2) / n` with the last axis fastest.
//!
//! # Safety
//!
//! Pointer arguments must be non-null unless documented otherwise, must
//! point to live, aligned memory of the stated length for the duration of the
//! call, and handles must come from this library and not be used after being
//! freed.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use relaxns::cli::{run_command, Command, Config};
use relaxns::diagnostics::ReferenceSample;
use relaxns::initial_data::taylor_green;
use relaxns::relax::{RelaxParams, RelaxState, StepOptions, Stepper};
use relaxns::spectral::norms::{l2_norm, linf_norm};
use relaxns::spectral::ops::divergence;
use relaxns::spectral::{Field, Grid, Rank};
use relaxns::Error;

/// Result codes. Values from 1 to 18 mirror the library error classes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelaxnsStatus {
    Ok = 0,
    InvalidGrid = 1,
    GridMismatch = 2,
    RankMismatch = 3,
    DimensionMismatch = 4,
    Unsupported = 5,
    InvalidArgument = 6,
    Cfl = 7,
    StepGuard = 8,
    NonFinite = 9,
    TimeWindow = 10,
    ForcingGap = 11,
    InsufficientPoints = 12,
    Certificate = 13,
    Diverged = 14,
    Config = 15,
    CheckFailed = 16,
    Io = 17,
    Json = 18,
    NullPointer = 100,
    InvalidUtf8 = 101,
    BufferSize = 102,
    Panic = 103,
}

impl From<&Error> for RelaxnsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidGrid(_) => RelaxnsStatus::InvalidGrid,
            Error::GridMismatch(_) => RelaxnsStatus::GridMismatch,
            Error::RankMismatch { .. } => RelaxnsStatus::RankMismatch,
            Error::DimensionMismatch(_) => RelaxnsStatus::DimensionMismatch,
            Error::Unsupported(_) => RelaxnsStatus::Unsupported,
            Error::InvalidArgument(_) => RelaxnsStatus::InvalidArgument,
            Error::Cfl { .. } => RelaxnsStatus::Cfl,
            Error::StepGuard { .. } => RelaxnsStatus::StepGuard,
            Error::NonFinite { .. } => RelaxnsStatus::NonFinite,
            Error::TimeWindow { .. } => RelaxnsStatus::TimeWindow,
            Error::ForcingGap(_) => RelaxnsStatus::ForcingGap,
            Error::InsufficientPoints(_) => RelaxnsStatus::InsufficientPoints,
            Error::Certificate(_) => RelaxnsStatus::Certificate,
            Error::Diverged(_) => RelaxnsStatus::Diverged,
            Error::Config(_) => RelaxnsStatus::Config,
            Error::CheckFailed(_) => RelaxnsStatus::CheckFailed,
            Error::Io(_) => RelaxnsStatus::Io,
            Error::Json(_) => RelaxnsStatus::Json,
        }
    }
}

/// Field selector for solver state access.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelaxnsField {
    Pressure = 0,
    Velocity = 1,
    Stress = 2,
}

impl RelaxnsField {
    fn rank(self) -> Rank {
        match self {
            RelaxnsField::Pressure => Rank::Scalar,
            RelaxnsField::Velocity => Rank::Vector,
            RelaxnsField::Stress => Rank::Tensor,
        }
    }
}

/// `L^2` and `L^inf` norms of a solver state.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RelaxnsNorms {
    pub t: f64,
    pub u_l2: f64,
    pub p_l2: f64,
    pub stress_l2: f64,
    pub div_u_l2: f64,
    pub u_linf: f64,
}

/// Periodic grid on the unit torus.
pub struct RelaxnsGrid {
    grid: Arc<Grid>,
}

/// Relaxation-system state with a fixed-step integrator.
pub struct RelaxnsSolver {
    stepper: Stepper,
    state: RelaxState,
}

enum Failure {
    Lib(Error),
    Status(RelaxnsStatus, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> RelaxnsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RelaxnsStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(format!("{}: {e}", e.class()));
            RelaxnsStatus::from(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            RelaxnsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(RelaxnsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(RelaxnsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, want: usize, what: &str) -> FfiResult<&'a [f64]> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != want {
        return Err(Failure::Status(
            RelaxnsStatus::BufferSize,
            format!("{what} needs {want} values, got {len}"),
        ));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out(p: *mut f64, len: usize, values: &[f64], what: &str) -> FfiResult<()> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != values.len() {
        return Err(Failure::Status(
            RelaxnsStatus::BufferSize,
            format!("{what} needs {} values, got {len}", values.len()),
        ));
    }
    std::slice::from_raw_parts_mut(p, len).copy_from_slice(values);
    Ok(())
}

fn field_len(grid: &Grid, which: RelaxnsField) -> usize {
    grid.len() * which.rank().components(grid.dim())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn relaxns_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null after a success.
/// The pointer stays valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn relaxns_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Process exit code the command-line tool uses for `status`.
#[no_mangle]
pub extern "C" fn relaxns_status_exit_code(status: RelaxnsStatus) -> i32 {
    use RelaxnsStatus::*;
    match status {
        Ok => 0,
        Config | Json | InvalidGrid | Unsupported | Certificate | Cfl | StepGuard => 2,
        Diverged | NonFinite => 3,
        Io => 4,
        _ => 1,
    }
}

/// Creates a `dim`-dimensional grid with `n` points per axis.
#[no_mangle]
pub unsafe extern "C" fn relaxns_grid_new(dim: usize, n: usize, out: *mut *mut RelaxnsGrid) -> RelaxnsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = Grid::new(dim, n)?;
        *out = Box::into_raw(Box::new(RelaxnsGrid { grid }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn relaxns_grid_free(grid: *mut RelaxnsGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of grid points, or zero for a null grid.
#[no_mangle]
pub unsafe extern "C" fn relaxns_grid_points(grid: *const RelaxnsGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.grid.len())
}

/// Buffer length of one field on `grid`, or zero for a null grid.
#[no_mangle]
pub unsafe extern "C" fn relaxns_field_len(grid: *const RelaxnsGrid, which: RelaxnsField) -> usize {
    grid.as_ref().map_or(0, |g| field_len(&g.grid, which))
}

/// Samples the Taylor-Green velocity of the given amplitude into `buf`.
#[no_mangle]
pub unsafe extern "C" fn relaxns_taylor_green(
    grid: *const RelaxnsGrid,
    amplitude: f64,
    buf: *mut f64,
    len: usize,
) -> RelaxnsStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        write_out(buf, len, &taylor_green(&g.grid, amplitude).to_physical(), "buf")
    })
}

/// Creates a solver with zero state for relaxation parameters `epsilon`,
/// `delta` and fixed step `dt`.
#[no_mangle]
pub unsafe extern "C" fn relaxns_solver_new(
    grid: *const RelaxnsGrid,
    epsilon: f64,
    delta: f64,
    dt: f64,
    out: *mut *mut RelaxnsSolver,
) -> RelaxnsStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let params = RelaxParams::new(epsilon, delta)?;
        let stepper = Stepper::new(&g.grid, &params, dt, StepOptions::default())?;
        let state = RelaxState::zeros(&g.grid);
        *out = Box::into_raw(Box::new(RelaxnsSolver { stepper, state }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn relaxns_solver_free(solver: *mut RelaxnsSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Replaces one field of the state; time is unchanged.
#[no_mangle]
pub unsafe extern "C" fn relaxns_solver_set_field(
    solver: *mut RelaxnsSolver,
    which: RelaxnsField,
    values: *const f64,
    len: usize,
) -> RelaxnsStatus {
    guard(|| {
        let s = deref_mut(solver, "solver")?;
        let grid = s.state.grid().clone();
        let v = slice_arg(values, len, field_len(&grid, which), "values")?;
        let f = Field::from_physical(&grid, which.rank(), v)?;
        match which {
            RelaxnsField::Pressure => s.state.p = f,
            RelaxnsField::Velocity => s.state.u = f,
            RelaxnsField::Stress => s.state.stress = f,
        }
        Ok(())
    })
}

/// Sets the state from a velocity field, with pressure and stress taken
/// from the Navier-Stokes relations for that velocity, and resets time to 0.
#[no_mangle]
pub unsafe extern "C" fn relaxns_solver_prepare(
    solver: *mut RelaxnsSolver,
    velocity: *const f64,
    len: usize,
) -> RelaxnsStatus {
    guard(|| {
        let s = deref_mut(solver, "solver")?;
        let grid = s.state.grid().clone();
        let v = slice_arg(velocity, len, field_len(&grid, RelaxnsField::Velocity), "velocity")?;
        let r = ReferenceSample::from_velocity(Field::from_physical(&grid, Rank::Vector, v)?, 0.0)?;
        s.state = RelaxState::new(r.p, r.u, r.stress, 0.0)?;
        Ok(())
    })
}

/// Advances the state by `steps` fixed steps. On failure the state is left
/// at the last successful step.
#[no_mangle]
pub unsafe extern "C" fn relaxns_solver_step(solver: *mut RelaxnsSolver, steps: usize) -> RelaxnsStatus {
    guard(|| {
        let s = deref_mut(solver, "solver")?;
        for _ in 0..steps {
            let (next, _) = s.stepper.step(&s.state)?;
            s.state = next;
        }
        Ok(())
    })
}

/// Current time, or NaN for a null solver.
#[no_mangle]
pub unsafe extern "C" fn relaxns_solver_time(solver: *const RelaxnsSolver) -> f64 {
    solver.as_ref().map_or(f64::NAN, |s| s.state.t)
}

/// Copies one field of the state into `buf`.
#[no_mangle]
pub unsafe extern "C" fn relaxns_solver_get_field(
    solver: *const RelaxnsSolver,
    which: RelaxnsField,
    buf: *mut f64,
    len: usize,
) -> RelaxnsStatus {
    guard(|| {
        let s = deref(solver, "solver")?;
        let f = match which {
            RelaxnsField::Pressure => &s.state.p,
            RelaxnsField::Velocity => &s.state.u,
            RelaxnsField::Stress => &s.state.stress,
        };
        write_out(buf, len, &f.to_physical(), "buf")
    })
}

/// Norms of the current state.
#[no_mangle]
pub unsafe extern "C" fn relaxns_solver_norms(solver: *const RelaxnsSolver, out: *mut RelaxnsNorms) -> RelaxnsStatus {
    guard(|| {
        let s = deref(solver, "solver")?;
        let o = deref_mut(out, "out")?;
        let st = &s.state;
        *o = RelaxnsNorms {
            t: st.t,
            u_l2: l2_norm(&st.u),
            p_l2: l2_norm(&st.p),
            stress_l2: l2_norm(&st.stress),
            div_u_l2: l2_norm(&divergence(&st.u)?),
            u_linf: linf_norm(&st.u),
        };
        Ok(())
    })
}

/// Runs a command-line subcommand (`run-ns`, `run-relax`, `run-affine`,
/// `sweep` or `check`) with a JSON configuration, writing artifacts and a
/// manifest into `out_dir`. `config_json` may be null for `check`.
#[no_mangle]
pub unsafe extern "C" fn relaxns_run_command(
    command: *const c_char,
    config_json: *const c_char,
    out_dir: *const c_char,
) -> RelaxnsStatus {
    guard(|| {
        let name = str_arg(command, "command")?;
        let cmd = match name {
            "run-ns" => Command::RunNs,
            "run-relax" => Command::RunRelax,
            "run-affine" => Command::RunAffine,
            "sweep" => Command::Sweep,
            "check" => Command::Check,
            other => {
                return Err(Failure::Status(
                    RelaxnsStatus::InvalidArgument,
                    format!("unknown command {other:?}"),
                ))
            }
        };
        let cfg = if config_json.is_null() && matches!(cmd, Command::Check) {
            Config::default()
        } else {
            Config::from_json(str_arg(config_json, "config_json")?)?
        };
        let dir = str_arg(out_dir, "out_dir")?;
        run_command(&cmd, &cfg, Path::new(dir))?;
        Ok(())
    })
}

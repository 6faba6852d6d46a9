//! C interface to `flatband`.
//!
//! Every function returns an [`FbStatus`]; on failure the message is kept per
//! thread and read back with [`fb_last_error_message`]. Models and lattices
//! are opaque handles released with their `_free` function. Complex arrays
//! cross the boundary as interleaved `re, im` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use flatband::analysis::{self, BZGrid, IntersectionKind, Tolerances};
use flatband::bloch::{self, Momentum};
use flatband::realspace::{self, Boundary, RealLattice};
use flatband::{Error, LatticeModel, ModelKind, Params, Phase};
use num_complex::Complex64;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FbStatus {
    Ok = 0,
    /// Malformed argument: bad UTF-8, unknown name, wrong buffer length.
    InvalidArgument = 1,
    /// Rejected parameters, model or configuration.
    ConfigError = 2,
    /// Solver or propagator failure.
    NumericFailure = 3,
    NullPointer = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FbIntersectionKind {
    Separated = 0,
    IsolatedEp = 1,
    SingleEpRing = 2,
    DoubleEpRing = 3,
    ChiralDegeneratePair = 4,
}

impl From<IntersectionKind> for FbIntersectionKind {
    fn from(k: IntersectionKind) -> Self {
        match k {
            IntersectionKind::Separated => FbIntersectionKind::Separated,
            IntersectionKind::IsolatedEP => FbIntersectionKind::IsolatedEp,
            IntersectionKind::SingleEPRing => FbIntersectionKind::SingleEpRing,
            IntersectionKind::DoubleEPRing => FbIntersectionKind::DoubleEpRing,
            IntersectionKind::ChiralDegeneratePair => FbIntersectionKind::ChiralDegeneratePair,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct FbFlatness {
    pub candidate_re: f64,
    pub candidate_im: f64,
    pub max_deviation: f64,
    /// `|γ − J sin φ|`.
    pub condition_residual: f64,
    pub is_flat: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct FbEvolution {
    pub steps: usize,
    pub max_intensity_drift: f64,
    pub final_norm: f64,
}

/// Opaque model handle.
pub struct FbModel(LatticeModel);

/// Opaque finite-lattice handle.
pub struct FbLattice(RealLattice);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(FbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_numeric() {
            FbStatus::NumericFailure
        } else {
            FbStatus::ConfigError
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(FbStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> Failure {
    Failure(FbStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording the error message and turning panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            FbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FbStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn complex_in(p: *const f64, len: usize, what: &str) -> Result<Vec<Complex64>, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let raw = std::slice::from_raw_parts(p, 2 * len);
    Ok(raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

unsafe fn complex_out(p: *mut f64, len: usize, values: &[Complex64], what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != values.len() {
        return Err(invalid(format!("{what} holds {len} amplitudes, {} needed", values.len())));
    }
    let raw = std::slice::from_raw_parts_mut(p, 2 * len);
    for (c, z) in raw.chunks_exact_mut(2).zip(values) {
        c[0] = z.re;
        c[1] = z.im;
    }
    Ok(())
}

fn c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|_| invalid("string contains NUL"))
}

unsafe fn build(kind: *const c_char, kappa: f64, j: f64, phi: *const c_char, gamma: Option<f64>) -> Result<LatticeModel, Failure> {
    let kind: ModelKind = str_arg(kind, "kind")?.parse().map_err(|e: Error| invalid(e.to_string()))?;
    let phi: Phase = str_arg(phi, "phi")?.parse().map_err(|e: Error| invalid(e.to_string()))?;
    let params = match gamma {
        Some(g) => Params::new(kappa, j, phi, g)?,
        None => Params::flat_band(kappa, j, phi)?,
    };
    Ok(kind.build(params)?)
}

/// The message of the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a named model (`"lieb-extended"`, `"tasaki"`, ...). `phi` is a
/// phase string such as `"pi/3"` or `"1.047"`.
///
/// # Safety
/// `kind` and `phi` must be NUL-terminated strings; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_model_new(
    kind: *const c_char,
    kappa: f64,
    j: f64,
    phi: *const c_char,
    gamma: f64,
    out_model: *mut *mut FbModel,
) -> FbStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = Box::into_raw(Box::new(FbModel(build(kind, kappa, j, phi, Some(gamma))?)));
        Ok(())
    })
}

/// As [`fb_model_new`] with `γ = J sin φ`.
///
/// # Safety
/// See [`fb_model_new`].
#[no_mangle]
pub unsafe extern "C" fn fb_model_new_flatband(
    kind: *const c_char,
    kappa: f64,
    j: f64,
    phi: *const c_char,
    out_model: *mut *mut FbModel,
) -> FbStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = Box::into_raw(Box::new(FbModel(build(kind, kappa, j, phi, None)?)));
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_model_from_json(json: *const c_char, out_model: *mut *mut FbModel) -> FbStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        let model = LatticeModel::from_json(str_arg(json, "json")?)?;
        *slot = Box::into_raw(Box::new(FbModel(model)));
        Ok(())
    })
}

/// Writes a newly allocated JSON string; release it with [`fb_string_free`].
///
/// # Safety
/// `model` must come from this library; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_model_to_json(model: *const FbModel, out_json: *mut *mut c_char) -> FbStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        *slot = c_string(deref(model, "model")?.0.to_json()?)?;
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn fb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `model` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn fb_model_free(model: *mut FbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// The three band energies at `(kx, ky)`, ordered by real then imaginary part.
///
/// # Safety
/// `out_energies` must hold 6 doubles.
#[no_mangle]
pub unsafe extern "C" fn fb_bands(model: *const FbModel, kx: f64, ky: f64, out_energies: *mut f64) -> FbStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        if !(kx.is_finite() && ky.is_finite()) {
            return Err(invalid("momentum must be finite"));
        }
        let bands = bloch::solve_bands(model, Momentum::new(kx, ky))?;
        complex_out(out_energies, 3, &bands.energies, "out_energies")
    })
}

/// # Safety
/// `model` must come from this library; `out_report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_flatness(model: *const FbModel, nx: usize, ny: usize, tol_flat: f64, out_report: *mut FbFlatness) -> FbStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let slot = out(out_report, "out_report")?;
        let r = analysis::flatness(model, BZGrid::new(nx, ny)?, tol_flat)?;
        *slot = FbFlatness {
            candidate_re: r.candidate_energy.re,
            candidate_im: r.candidate_energy.im,
            max_deviation: r.max_deviation,
            condition_residual: r.condition_residual,
            is_flat: r.is_flat,
        };
        Ok(())
    })
}

/// Classifies where the flat band meets the dispersive bands. The degeneracy
/// loci are written to `out_loci` as `kx, ky` pairs, up to `loci_capacity`
/// points; `out_loci_len` receives the full count. Pass a null `out_loci` to
/// query the count alone.
///
/// # Safety
/// `out_loci`, when non-null, must hold `2 * loci_capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn fb_classify(
    model: *const FbModel,
    nx: usize,
    ny: usize,
    tol_e: f64,
    cond_ep: f64,
    tol_flat: f64,
    out_kind: *mut FbIntersectionKind,
    out_loci: *mut f64,
    loci_capacity: usize,
    out_loci_len: *mut usize,
) -> FbStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let kind_slot = out(out_kind, "out_kind")?;
        let len_slot = out(out_loci_len, "out_loci_len")?;
        let tol = Tolerances {
            tol_e,
            cond_ep,
            flat: tol_flat,
        };
        let c = analysis::classify(model, BZGrid::new(nx, ny)?, &tol)?;
        *kind_slot = c.kind.into();
        *len_slot = c.loci.len();
        if !out_loci.is_null() {
            let raw = std::slice::from_raw_parts_mut(out_loci, 2 * loci_capacity);
            for (slot, k) in raw.chunks_exact_mut(2).zip(&c.loci) {
                slot[0] = k.kx;
                slot[1] = k.ky;
            }
        }
        Ok(())
    })
}

/// An `m × n` cell lattice, open or periodic.
///
/// # Safety
/// `model` must come from this library; `out_lattice` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_lattice_new(
    model: *const FbModel,
    m: usize,
    n: usize,
    periodic: bool,
    out_lattice: *mut *mut FbLattice,
) -> FbStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let slot = out(out_lattice, "out_lattice")?;
        let boundary = if periodic { Boundary::Periodic } else { Boundary::Open };
        *slot = Box::into_raw(Box::new(FbLattice(realspace::assemble(model, m, n, boundary)?)));
        Ok(())
    })
}

/// # Safety
/// `lattice` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn fb_lattice_free(lattice: *mut FbLattice) {
    if !lattice.is_null() {
        drop(Box::from_raw(lattice));
    }
}

/// Number of sites, `3 m n`; 0 for a null handle.
///
/// # Safety
/// `lattice` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn fb_lattice_dim(lattice: *const FbLattice) -> usize {
    lattice.as_ref().map_or(0, |l| l.0.dim())
}

/// Single-cell compact localized state in cell `(cm, cn)`. Writes `len`
/// amplitudes (`len` must equal the lattice dimension) and the eigen-residual.
///
/// # Safety
/// `out_state` must hold `2 * len` doubles; `out_residual` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_cls_single(
    model: *const FbModel,
    lattice: *const FbLattice,
    cm: usize,
    cn: usize,
    out_state: *mut f64,
    len: usize,
    out_residual: *mut f64,
) -> FbStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let lattice = &deref(lattice, "lattice")?.0;
        let res = out(out_residual, "out_residual")?;
        let s = realspace::make_cls_single(model, (cm, cn), lattice)?;
        complex_out(out_state, len, &s.amplitudes, "out_state")?;
        *res = s.residual;
        Ok(())
    })
}

/// Three-cell state anchored at `(cm, cn)`, for chiral models.
///
/// # Safety
/// As [`fb_cls_single`].
#[no_mangle]
pub unsafe extern "C" fn fb_cls_three(
    model: *const FbModel,
    lattice: *const FbLattice,
    cm: usize,
    cn: usize,
    out_state: *mut f64,
    len: usize,
    out_residual: *mut f64,
) -> FbStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let lattice = &deref(lattice, "lattice")?.0;
        let res = out(out_residual, "out_residual")?;
        let cells = realspace::cls_cells(model, (cm, cn), lattice)?;
        let s = realspace::make_cls_three(model, &cells, lattice)?;
        complex_out(out_state, len, &s.amplitudes, "out_state")?;
        *res = s.residual;
        Ok(())
    })
}

/// Propagates `state` (length `len`) to `t_end` in steps of `dt`, in place.
///
/// # Safety
/// `state` must hold `2 * len` doubles; `out_report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_evolve(
    lattice: *const FbLattice,
    state: *mut f64,
    len: usize,
    t_end: f64,
    dt: f64,
    out_report: *mut FbEvolution,
) -> FbStatus {
    guard(|| {
        let lattice = &deref(lattice, "lattice")?.0;
        let report = out(out_report, "out_report")?;
        let psi0 = complex_in(state, len, "state")?;
        let trace = realspace::evolve(lattice, &psi0, t_end, dt)?;
        complex_out(state, len, &trace.final_state, "state")?;
        *report = FbEvolution {
            steps: trace.times.len() - 1,
            max_intensity_drift: trace.max_intensity_drift(),
            final_norm: *trace.total_norm.last().expect("initial time recorded"),
        };
        Ok(())
    })
}

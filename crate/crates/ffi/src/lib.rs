//! C ABI over `qdep`.
//!
//! Objects are opaque handles created by `qdep_*_new` functions and released
//! with the matching `qdep_*_free`. Every fallible call returns a
//! `QdepStatus`; on failure the message is available from
//! `qdep_last_error_message` on the same thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use qdep::copula::CheckerboardCopula;
use qdep::dependence::{q_surface, DyadicGrid, QSurface};
use qdep::diagram::{calibrate_barriers, classify, BarrierTable, CellClass, CellIndex, CELLS};
use qdep::global_test::{
    critical_value, null_distribution, p_value, statistic, t_stat, v_stat, NullSample, StatisticKind, TestConfig,
};
use qdep::ranks::{pseudo_observations, PseudoSample, Sample};
use qdep::QdepError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QdepStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidSample = 2,
    InvalidData = 3,
    Domain = 4,
    Configuration = 5,
    NotImplemented = 6,
    Input = 7,
    Cache = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QdepStatisticKind {
    Tn = 0,
    Vn = 1,
    MaxBet = 2,
}

impl From<QdepStatisticKind> for StatisticKind {
    fn from(k: QdepStatisticKind) -> Self {
        match k {
            QdepStatisticKind::Tn => StatisticKind::Tn,
            QdepStatisticKind::Vn => StatisticKind::Vn,
            QdepStatisticKind::MaxBet => StatisticKind::MaxBet,
        }
    }
}

/// Ranked bivariate sample.
pub struct QdepPseudoSample(PseudoSample);

/// `q̄ₙ` on a dyadic grid.
pub struct QdepSurface(QSurface);

/// Monte Carlo null distribution of one statistic.
pub struct QdepNull(NullSample);

/// Per-cell lower and upper barriers of the 10×10 diagram.
pub struct QdepBarriers(BarrierTable);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &QdepError) -> QdepStatus {
    match err {
        QdepError::InvalidSample(_) => QdepStatus::InvalidSample,
        QdepError::InvalidData(_) => QdepStatus::InvalidData,
        QdepError::Domain(_) => QdepStatus::Domain,
        QdepError::Configuration(_) => QdepStatus::Configuration,
        QdepError::NotImplemented(_) => QdepStatus::NotImplemented,
        QdepError::Input(_) => QdepStatus::Input,
        QdepError::Cache(_) => QdepStatus::Cache,
    }
}

fn null_pointer(what: &str) -> QdepStatus {
    set_error(format!("null pointer: {what}"));
    QdepStatus::NullPointer
}

/// Runs `f`, recording its error or panic.
fn guard(f: impl FnOnce() -> Result<(), QdepStatus>) -> QdepStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QdepStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            QdepStatus::Panic
        }
    }
}

fn lift<T>(r: qdep::Result<T>) -> Result<T, QdepStatus> {
    r.map_err(|e| {
        let s = status_of(&e);
        set_error(e.to_string());
        s
    })
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, QdepStatus> {
    p.as_ref().ok_or_else(|| null_pointer(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), QdepStatus> {
    if out.is_null() {
        return Err(null_pointer("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_f64(out: *mut f64, value: f64) -> Result<(), QdepStatus> {
    if out.is_null() {
        return Err(null_pointer("out"));
    }
    *out = value;
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn qdep_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qdep_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Ranks `n` pairs, breaking ties at random from `tie_seed`.
#[no_mangle]
pub unsafe extern "C" fn qdep_pseudo_sample_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    tie_seed: u64,
    out: *mut *mut QdepPseudoSample,
) -> QdepStatus {
    guard(|| {
        if x.is_null() || y.is_null() {
            return Err(null_pointer("x or y"));
        }
        let (xs, ys) = (slice::from_raw_parts(x, n).to_vec(), slice::from_raw_parts(y, n).to_vec());
        let sample = lift(Sample::bivariate(xs, ys))?;
        let pseudo = lift(pseudo_observations(&sample, tie_seed))?;
        put(out, QdepPseudoSample(pseudo))
    })
}

#[no_mangle]
pub unsafe extern "C" fn qdep_pseudo_sample_free(p: *mut QdepPseudoSample) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

#[no_mangle]
pub unsafe extern "C" fn qdep_pseudo_sample_len(p: *const QdepPseudoSample) -> usize {
    p.as_ref().map_or(0, |p| p.0.n())
}

/// `q̄ₙ` on the grid of depth `s` (size `2^(s+1) − 1`).
#[no_mangle]
pub unsafe extern "C" fn qdep_surface_new(
    sample: *const QdepPseudoSample,
    s: u32,
    out: *mut *mut QdepSurface,
) -> QdepStatus {
    guard(|| {
        let p = as_ref(sample, "sample")?;
        let grid = lift(DyadicGrid::new(s))?;
        let surface = lift(q_surface(&CheckerboardCopula::new(&p.0), &grid))?;
        put(out, QdepSurface(surface))
    })
}

#[no_mangle]
pub unsafe extern "C" fn qdep_surface_free(p: *mut QdepSurface) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Grid size `d`; the surface holds `d·d` values.
#[no_mangle]
pub unsafe extern "C" fn qdep_surface_size(p: *const QdepSurface) -> usize {
    p.as_ref().map_or(0, |p| p.0.size())
}

/// Copies the row-major `d·d` values into `buf`, which must hold `len ≥ d·d`.
#[no_mangle]
pub unsafe extern "C" fn qdep_surface_values(p: *const QdepSurface, buf: *mut f64, len: usize) -> QdepStatus {
    guard(|| {
        let s = as_ref(p, "surface")?;
        let v = s.0.values();
        if buf.is_null() {
            return Err(null_pointer("buf"));
        }
        if len < v.len() {
            set_error(format!("buffer holds {len} values, surface has {}", v.len()));
            return Err(QdepStatus::Configuration);
        }
        slice::from_raw_parts_mut(buf, v.len()).copy_from_slice(v);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qdep_surface_t_stat(p: *const QdepSurface, t_frac: f64, out: *mut f64) -> QdepStatus {
    guard(|| {
        let s = as_ref(p, "surface")?;
        let t = lift(t_stat(&s.0, t_frac))?;
        write_f64(out, t)
    })
}

#[no_mangle]
pub unsafe extern "C" fn qdep_surface_v_stat(p: *const QdepSurface, out: *mut f64) -> QdepStatus {
    guard(|| {
        let s = as_ref(p, "surface")?;
        write_f64(out, v_stat(&s.0))
    })
}

/// Simulates the null of `kind` at sample size `n`, grid size `d`.
#[no_mangle]
pub unsafe extern "C" fn qdep_null_new(
    kind: QdepStatisticKind,
    n: usize,
    d: usize,
    t_frac: f64,
    runs: usize,
    seed: u64,
    out: *mut *mut QdepNull,
) -> QdepStatus {
    guard(|| {
        let cfg = lift(TestConfig::new(n, d, t_frac, runs, seed))?;
        let null = lift(null_distribution(&cfg, kind.into()))?;
        put(out, QdepNull(null))
    })
}

#[no_mangle]
pub unsafe extern "C" fn qdep_null_free(p: *mut QdepNull) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

#[no_mangle]
pub unsafe extern "C" fn qdep_null_critical_value(p: *const QdepNull, alpha: f64, out: *mut f64) -> QdepStatus {
    guard(|| {
        let null = as_ref(p, "null")?;
        let c = lift(critical_value(&null.0, alpha))?;
        write_f64(out, c)
    })
}

/// Statistic of `sample` and its Monte Carlo p-value against `null`.
#[no_mangle]
pub unsafe extern "C" fn qdep_test(
    sample: *const QdepPseudoSample,
    null: *const QdepNull,
    stat_out: *mut f64,
    p_out: *mut f64,
) -> QdepStatus {
    guard(|| {
        let p = as_ref(sample, "sample")?;
        let null = as_ref(null, "null")?;
        let stat = lift(statistic(&p.0, &null.0.config, null.0.kind))?;
        write_f64(stat_out, stat)?;
        write_f64(p_out, p_value(stat, &null.0))
    })
}

/// Calibrates diagram barriers at sample size `n`, grid depth `s`.
#[no_mangle]
pub unsafe extern "C" fn qdep_barriers_new(
    n: usize,
    s: u32,
    alpha_side: f64,
    runs: usize,
    seed: u64,
    out: *mut *mut QdepBarriers,
) -> QdepStatus {
    guard(|| {
        let table = lift(calibrate_barriers(n, s, alpha_side, runs, seed))?;
        put(out, QdepBarriers(table))
    })
}

#[no_mangle]
pub unsafe extern "C" fn qdep_barriers_free(p: *mut QdepBarriers) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Classifies the 100 decile cells. `classes` receives 100 entries, cell
/// `(k, l)` at index `(k−1)·10 + (l−1)`, coded 0 white, 1 blue, 2 pink,
/// 3 mixed.
#[no_mangle]
pub unsafe extern "C" fn qdep_classify(
    surface: *const QdepSurface,
    barriers: *const QdepBarriers,
    classes: *mut u8,
) -> QdepStatus {
    guard(|| {
        let s = as_ref(surface, "surface")?;
        let b = as_ref(barriers, "barriers")?;
        if classes.is_null() {
            return Err(null_pointer("classes"));
        }
        let diagram = lift(classify(&s.0, &b.0))?;
        let out = slice::from_raw_parts_mut(classes, CELLS * CELLS);
        for c in CellIndex::all() {
            out[(c.k - 1) * CELLS + (c.l - 1)] = match diagram.class(c) {
                CellClass::White => 0,
                CellClass::Blue => 1,
                CellClass::Pink => 2,
                CellClass::Mixed => 3,
            };
        }
        Ok(())
    })
}

//! C ABI over the dvoretzky library.
//!
//! Objects are opaque handles created from JSON and released with the
//! matching `_free`. Every function returns a status code; on failure the
//! message is available through `dv_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use dvoretzky::cantor::{CantorMeasure, CantorSpec};
use dvoretzky::classify::Classification;
use dvoretzky::density::{DensitySpec, StepDensity};
use dvoretzky::energy::{energy_trajectory, Kernel, Support};
use dvoretzky::kernels::KernelSpec;
use dvoretzky::montecarlo::{run_trial, Target, TrialConfig};
use dvoretzky::seq::{LengthSequence, Rule};

pub const DV_OK: i32 = 0;
pub const DV_ERR_NULL: i32 = 1;
pub const DV_ERR_INVALID_ARGUMENT: i32 = 2;
pub const DV_ERR_PARSE: i32 = 3;
pub const DV_ERR_SEQUENCE: i32 = 4;
pub const DV_ERR_DENSITY: i32 = 5;
pub const DV_ERR_CANTOR: i32 = 6;
pub const DV_ERR_KERNEL: i32 = 7;
pub const DV_ERR_ENERGY: i32 = 8;
pub const DV_ERR_MONTECARLO: i32 = 9;
pub const DV_ERR_PANIC: i32 = 10;

pub const DV_CLASS_DIVERGES: i32 = 0;
pub const DV_CLASS_CONVERGES: i32 = 1;
pub const DV_CLASS_INCONCLUSIVE: i32 = 2;

pub struct DvSequence(LengthSequence);
pub struct DvDensity(StepDensity);
pub struct DvCantor(CantorMeasure);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DvCoverageStats {
    pub covered: bool,
    /// 0 when the target was not covered.
    pub first_cover_time: u64,
    pub uncovered_length: f64,
    pub uncovered_count: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(i32, String);

type Res<T> = Result<T, Failure>;

fn fail<E: std::fmt::Display>(code: i32) -> impl Fn(E) -> Failure {
    move |e| Failure(code, e.to_string())
}

fn guard(f: impl FnOnce() -> Res<()>) -> i32 {
    let out = catch_unwind(AssertUnwindSafe(f));
    let (code, msg) = match out {
        Ok(Ok(())) => (DV_OK, String::new()),
        Ok(Err(Failure(c, m))) => (c, m),
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            (DV_ERR_PANIC, m)
        }
    };
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
    code
}

unsafe fn href<'a, T>(p: *const T) -> Res<&'a T> {
    p.as_ref().ok_or_else(|| Failure(DV_ERR_NULL, "null handle".into()))
}

unsafe fn put<T>(out: *mut T, v: T) -> Res<()> {
    if out.is_null() {
        return Err(Failure(DV_ERR_NULL, "null output pointer".into()));
    }
    out.write(v);
    Ok(())
}

unsafe fn json_arg<T: serde::de::DeserializeOwned>(s: *const c_char) -> Res<T> {
    if s.is_null() {
        return Err(Failure(DV_ERR_NULL, "null string".into()));
    }
    let text = CStr::from_ptr(s).to_str().map_err(fail(DV_ERR_PARSE))?;
    serde_json::from_str(text).map_err(fail(DV_ERR_PARSE))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize) -> Res<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure(DV_ERR_NULL, "null array".into()));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn class_code(c: Classification) -> i32 {
    match c {
        Classification::Diverges => DV_CLASS_DIVERGES,
        Classification::Converges => DV_CLASS_CONVERGES,
        Classification::Inconclusive => DV_CLASS_INCONCLUSIVE,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the last error message of this thread into `buf`, NUL-terminated and
/// truncated to `len`. Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dv_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dv_sequence_from_json(json: *const c_char, out: *mut *mut DvSequence) -> i32 {
    guard(|| {
        let rule: Rule = json_arg(json)?;
        let seq = LengthSequence::new(rule).map_err(fail(DV_ERR_SEQUENCE))?;
        put(out, Box::into_raw(Box::new(DvSequence(seq))))
    })
}

/// # Safety
/// `seq` must be null or a handle from `dv_sequence_from_json`.
#[no_mangle]
pub unsafe extern "C" fn dv_sequence_free(seq: *mut DvSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// # Safety
/// Handles and output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dv_sequence_first_index(seq: *const DvSequence, out: *mut u64) -> i32 {
    guard(|| put(out, href(seq)?.0.first()))
}

/// ℓ_n.
///
/// # Safety
/// Handles and output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dv_sequence_term(seq: *const DvSequence, n: u64, out: *mut f64) -> i32 {
    guard(|| {
        let t = href(seq)?.0.term(n).ok_or_else(|| Failure(DV_ERR_INVALID_ARGUMENT, format!("index {n} is not a term")))?;
        put(out, t)
    })
}

/// L_n.
///
/// # Safety
/// Handles and output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dv_sequence_partial_sum(seq: *const DvSequence, n: u64, out: *mut f64) -> i32 {
    guard(|| put(out, href(seq)?.0.partial_sum(n)))
}

/// Σ (ℓ_n - r)_+.
///
/// # Safety
/// Handles and output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dv_sequence_positive_part_sum(seq: *const DvSequence, r: f64, out: *mut f64) -> i32 {
    guard(|| put(out, href(seq)?.0.positive_part_sum(r).map_err(fail(DV_ERR_SEQUENCE))?))
}

/// Lower estimate of the Hawkes ratio at `horizon`.
///
/// # Safety
/// Handles and output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dv_hawkes_d(seq: *const DvSequence, horizon: u64, out: *mut f64) -> i32 {
    guard(|| put(out, href(seq)?.0.hawkes_d(horizon).map_err(fail(DV_ERR_SEQUENCE))?.running_max))
}

/// ln of the partial Shepp sum and its `DV_CLASS_*` label.
///
/// # Safety
/// Handles and output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dv_shepp_series(
    seq: *const DvSequence,
    a: f64,
    horizon: u64,
    out_log_sum: *mut f64,
    out_class: *mut i32,
) -> i32 {
    guard(|| {
        let r = href(seq)?.0.shepp_series(a, horizon).map_err(fail(DV_ERR_SEQUENCE))?;
        put(out_log_sum, r.log_partial_sum)?;
        put(out_class, class_code(r.classification))
    })
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dv_density_from_json(json: *const c_char, out: *mut *mut DvDensity) -> i32 {
    guard(|| {
        let spec: DensitySpec = json_arg(json)?;
        let d = StepDensity::new(spec).map_err(fail(DV_ERR_DENSITY))?;
        put(out, Box::into_raw(Box::new(DvDensity(d))))
    })
}

/// # Safety
/// `d` must be null or a handle from `dv_density_from_json`.
#[no_mangle]
pub unsafe extern "C" fn dv_density_free(d: *mut DvDensity) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Inverse CDF at u ∈ [0, 1).
///
/// # Safety
/// Handles and output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dv_density_sample(d: *const DvDensity, u: f64, out: *mut f64) -> i32 {
    guard(|| {
        if !(0.0..1.0).contains(&u) {
            return Err(Failure(DV_ERR_INVALID_ARGUMENT, format!("u = {u}")));
        }
        put(out, href(d)?.0.sample_center(u))
    })
}

/// μ_f of the arc centered at `center` with half-length `radius`.
///
/// # Safety
/// Handles and output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dv_density_arc_measure(d: *const DvDensity, center: f64, radius: f64, out: *mut f64) -> i32 {
    guard(|| put(out, href(d)?.0.arc_measure(center, radius)))
}

/// Essential infimum m_f.
///
/// # Safety
/// Handles and output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dv_density_essinf(d: *const DvDensity, out: *mut f64) -> i32 {
    guard(|| put(out, href(d)?.0.essinf_report().m_f))
}

/// (ψ_r * f)(s) for the approximate identity of `seq` at radius r.
///
/// # Safety
/// Handles and output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dv_kernel_convolve(
    seq: *const DvSequence,
    d: *const DvDensity,
    r: f64,
    s: f64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let k = KernelSpec::psi(&href(seq)?.0, r).map_err(fail(DV_ERR_KERNEL))?;
        put(out, k.convolve(&href(d)?.0, s))
    })
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dv_cantor_from_json(json: *const c_char, out: *mut *mut DvCantor) -> i32 {
    guard(|| {
        let spec: CantorSpec = json_arg(json)?;
        let m = CantorMeasure::new(spec).map_err(fail(DV_ERR_CANTOR))?;
        put(out, Box::into_raw(Box::new(DvCantor(m))))
    })
}

/// # Safety
/// `c` must be null or a handle from `dv_cantor_from_json`.
#[no_mangle]
pub unsafe extern "C" fn dv_cantor_free(c: *mut DvCantor) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Interval length δ_k at level k.
///
/// # Safety
/// Handles and output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dv_cantor_delta(c: *const DvCantor, k: u32, out: *mut f64) -> i32 {
    guard(|| put(out, href(c)?.0.delta(k).map_err(fail(DV_ERR_CANTOR))?))
}

/// σ0 of [a, b).
///
/// # Safety
/// Handles and output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dv_cantor_measure(c: *const DvCantor, a: f64, b: f64, out: *mut f64) -> i32 {
    guard(|| put(out, href(c)?.0.measure_interval(a, b)))
}

/// Lower and upper box-dimension estimates over levels lo..=hi.
///
/// # Safety
/// Handles and output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dv_cantor_box_dimension(
    c: *const DvCantor,
    lo: u32,
    hi: u32,
    out_lower: *mut f64,
    out_upper: *mut f64,
) -> i32 {
    guard(|| {
        let b = href(c)?.0.box_dimension(lo..=hi).map_err(fail(DV_ERR_CANTOR))?;
        put(out_lower, b.lower)?;
        put(out_upper, b.upper)
    })
}

/// One covering trial with a finite point target.
///
/// # Safety
/// Handles and output pointers must be valid; `points` must hold `count` values.
#[no_mangle]
pub unsafe extern "C" fn dv_run_trial(
    d: *const DvDensity,
    seq: *const DvSequence,
    n: u64,
    seed: u64,
    points: *const f64,
    count: usize,
    out: *mut DvCoverageStats,
) -> i32 {
    guard(|| {
        let cfg = TrialConfig {
            density: href(d)?.0.clone(),
            seq: href(seq)?.0.clone(),
            n,
            seed,
            target: Target::Points(slice_arg(points, count)?.to_vec()),
        };
        let s = run_trial(&cfg).map_err(fail(DV_ERR_MONTECARLO))?;
        put(
            out,
            DvCoverageStats {
                covered: s.covered,
                first_cover_time: s.first_cover_time.unwrap_or(0),
                uncovered_length: s.uncovered_length,
                uncovered_count: s.uncovered_count as u64,
            },
        )
    })
}

unsafe fn trajectory(
    cantor: *const DvCantor,
    kernel: &Kernel,
    depths: *const u32,
    count: usize,
    out_values: *mut f64,
    out_class: *mut i32,
) -> Res<()> {
    let depths = slice_arg(depths, count)?;
    if out_values.is_null() {
        return Err(Failure(DV_ERR_NULL, "null output pointer".into()));
    }
    let support = match cantor.as_ref() {
        Some(c) => Support::Cantor(&c.0),
        None => Support::Uniform,
    };
    let tr = energy_trajectory(support, kernel, depths).map_err(fail(DV_ERR_ENERGY))?;
    for (i, row) in tr.rows.iter().enumerate() {
        out_values.add(i).write(row.exclude);
    }
    put(out_class, class_code(tr.classification()))
}

/// Riesz energies at each depth (exclusive diagonal) and the trajectory label.
/// A null `cantor` selects the uniform measure.
///
/// # Safety
/// `depths` and `out_values` must hold `count` values.
#[no_mangle]
pub unsafe extern "C" fn dv_energy_riesz(
    cantor: *const DvCantor,
    s: f64,
    depths: *const u32,
    count: usize,
    out_values: *mut f64,
    out_class: *mut i32,
) -> i32 {
    guard(|| trajectory(cantor, &Kernel::Riesz { s }, depths, count, out_values, out_class))
}

/// Φ^(a) energies for the lengths of `seq`. A null `cantor` selects the uniform measure.
///
/// # Safety
/// `depths` and `out_values` must hold `count` values.
#[no_mangle]
pub unsafe extern "C" fn dv_energy_phi(
    cantor: *const DvCantor,
    seq: *const DvSequence,
    a: f64,
    depths: *const u32,
    count: usize,
    out_values: *mut f64,
    out_class: *mut i32,
) -> i32 {
    guard(|| {
        let kernel = Kernel::PhiA { seq: href(seq)?.0.clone(), a };
        trajectory(cantor, &kernel, depths, count, out_values, out_class)
    })
}

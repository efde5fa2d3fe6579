//! C interface to `stripsim`.
//!
//! Images and plans are opaque heap handles created by `*_load`, `*_sample`
//! and friends and released with the matching `*_free`. Every fallible call
//! returns a `StripsimStatus`; on failure a message for the calling thread is
//! available from `stripsim_last_error`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::{c_char, c_int, size_t};
use stripsim::dataset::Engine;
use stripsim::packet::PacketError;
use stripsim::stats::{self, TTestKind};
use stripsim::verify::verify_against_original;
use stripsim::{AttackPlan, BayerPattern, ImageError, PlanError, RgbImage, SamplerConfig, SeverityLevel, StripSpec};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StripsimStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    UnsupportedFormat = 4,
    CorruptFile = 5,
    ImageTooSmall = 6,
    InvalidPlan = 7,
    DimensionMismatch = 8,
    Stats = 9,
    Panic = 10,
}

/// Severity codes accepted where a `uint32_t severity` is expected.
#[repr(C)]
pub enum StripsimSeverity {
    Unattacked = 0,
    Mild = 1,
    Moderate = 2,
    Severe = 3,
}

/// Bayer layout codes accepted where a `uint32_t pattern` is expected.
#[repr(C)]
pub enum StripsimPattern {
    Rggb = 0,
    Grbg = 1,
    Gbrg = 2,
    Bggr = 3,
}

/// t-test variant codes accepted where a `uint32_t kind` is expected.
#[repr(C)]
pub enum StripsimTTestKind {
    Welch = 0,
    Pooled = 1,
    Paired = 2,
}

/// Half-open row range.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StripsimStrip {
    pub start_row: size_t,
    pub end_row: size_t,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StripsimSamplerConfig {
    pub min_strip_height: size_t,
    pub max_strip_height: size_t,
    pub max_placement_attempts: size_t,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StripsimTTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub significant_at_5pct: c_int,
    pub degenerate: c_int,
}

/// Opaque RGB image.
pub struct StripsimImage(RgbImage);

/// Opaque attack plan.
pub struct StripsimPlan(AttackPlan);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl std::fmt::Display) {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).expect("NULs removed"));
}

struct Fail(StripsimStatus, String);

impl From<ImageError> for Fail {
    fn from(e: ImageError) -> Self {
        let status = match e {
            ImageError::NotFound(_) | ImageError::Io(_) => StripsimStatus::Io,
            ImageError::UnsupportedFormat(_) => StripsimStatus::UnsupportedFormat,
            ImageError::CorruptFile(_) => StripsimStatus::CorruptFile,
            _ => StripsimStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

impl From<PlanError> for Fail {
    fn from(e: PlanError) -> Self {
        let status = match e {
            PlanError::ImageTooSmall { .. } => StripsimStatus::ImageTooSmall,
            PlanError::DimensionMismatch { .. } => StripsimStatus::DimensionMismatch,
            PlanError::InvalidConfig(_) => StripsimStatus::InvalidArgument,
            _ => StripsimStatus::InvalidPlan,
        };
        Fail(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(StripsimStatus::InvalidArgument, msg.into())
}

fn null(name: &str) -> Fail {
    Fail(StripsimStatus::NullArgument, format!("{name} is NULL"))
}

/// Runs `f`, turning errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> StripsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StripsimStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            StripsimStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{name} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn in_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: size_t, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn severity(code: u32) -> Result<SeverityLevel, Fail> {
    SeverityLevel::ALL
        .get(code as usize)
        .copied()
        .ok_or_else(|| invalid(format!("unknown severity code {code}")))
}

fn pattern(code: u32) -> Result<BayerPattern, Fail> {
    BayerPattern::ALL
        .get(code as usize)
        .copied()
        .ok_or_else(|| invalid(format!("unknown pattern code {code}")))
}

/// Message for the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn stripsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a PNG or binary PPM.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn stripsim_image_load(path: *const c_char, out: *mut *mut StripsimImage) -> StripsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let img = stripsim::load_image(path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(StripsimImage(img)));
        Ok(())
    })
}

/// Writes PPM for a `.ppm` path, PNG otherwise.
///
/// # Safety
/// `image` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn stripsim_image_save(image: *const StripsimImage, path: *const c_char) -> StripsimStatus {
    guard(|| {
        let img = in_arg(image, "image")?;
        stripsim::save_image(&img.0, path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Copies `width * height * 3` interleaved RGB bytes into a new image.
///
/// # Safety
/// `data` must point to at least `width * height * 3` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn stripsim_image_from_rgb(
    data: *const u8,
    width: size_t,
    height: size_t,
    out: *mut *mut StripsimImage,
) -> StripsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let len = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or_else(|| invalid("image size overflows"))?;
        let bytes = slice_arg(data, len, "data")?;
        let img = RgbImage::from_raw(width, height, bytes.to_vec())?;
        *out = Box::into_raw(Box::new(StripsimImage(img)));
        Ok(())
    })
}

/// # Safety
/// `image` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn stripsim_image_width(image: *const StripsimImage) -> size_t {
    image.as_ref().map_or(0, |i| i.0.width())
}

/// # Safety
/// `image` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn stripsim_image_height(image: *const StripsimImage) -> size_t {
    image.as_ref().map_or(0, |i| i.0.height())
}

/// Borrowed pointer to the interleaved RGB bytes, row-major; valid until the
/// image is freed. `len` (optional) receives the byte count.
///
/// # Safety
/// `image` must be NULL or come from this library; `len` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn stripsim_image_data(image: *const StripsimImage, len: *mut size_t) -> *const u8 {
    let Some(img) = image.as_ref() else {
        return ptr::null();
    };
    if let Some(len) = len.as_mut() {
        *len = img.0.as_bytes().len();
    }
    img.0.as_bytes().as_ptr()
}

/// # Safety
/// `image` must be NULL or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn stripsim_image_free(image: *mut StripsimImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Default sampler bounds.
#[no_mangle]
pub extern "C" fn stripsim_sampler_default() -> StripsimSamplerConfig {
    let d = SamplerConfig::default();
    StripsimSamplerConfig {
        min_strip_height: d.min_strip_height,
        max_strip_height: d.max_strip_height,
        max_placement_attempts: d.max_placement_attempts,
    }
}

/// Draws a random plan. `config` may be NULL for the defaults.
///
/// # Safety
/// `config` must be NULL or readable; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stripsim_plan_sample(
    severity_code: u32,
    width: size_t,
    height: size_t,
    seed: u64,
    config: *const StripsimSamplerConfig,
    out: *mut *mut StripsimPlan,
) -> StripsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = match config.as_ref() {
            Some(c) => SamplerConfig {
                min_strip_height: c.min_strip_height,
                max_strip_height: c.max_strip_height,
                max_placement_attempts: c.max_placement_attempts,
            },
            None => SamplerConfig::default(),
        };
        let plan = stripsim::sample_plan(severity(severity_code)?, width, height, seed, &cfg)?;
        *out = Box::into_raw(Box::new(StripsimPlan(plan)));
        Ok(())
    })
}

/// Builds a plan from explicit strips (geometry checked, count range not).
///
/// # Safety
/// `strips` must point to `count` readable entries (may be NULL if 0).
#[no_mangle]
pub unsafe extern "C" fn stripsim_plan_explicit(
    severity_code: u32,
    seed: u64,
    width: size_t,
    height: size_t,
    strips: *const StripsimStrip,
    count: size_t,
    out: *mut *mut StripsimPlan,
) -> StripsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let strips = slice_arg(strips, count, "strips")?
            .iter()
            .map(|s| StripSpec::new(s.start_row, s.end_row))
            .collect();
        let plan = AttackPlan::explicit(severity(severity_code)?, seed, width, height, strips)?;
        *out = Box::into_raw(Box::new(StripsimPlan(plan)));
        Ok(())
    })
}

/// # Safety
/// `plan` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn stripsim_plan_strip_count(plan: *const StripsimPlan) -> size_t {
    plan.as_ref().map_or(0, |p| p.0.strips.len())
}

/// # Safety
/// `plan` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stripsim_plan_strip(
    plan: *const StripsimPlan,
    index: size_t,
    out: *mut StripsimStrip,
) -> StripsimStatus {
    guard(|| {
        let plan = in_arg(plan, "plan")?;
        let out = out_arg(out, "out")?;
        let s = plan
            .0
            .strips
            .get(index)
            .ok_or_else(|| invalid(format!("strip index {index} out of range")))?;
        *out = StripsimStrip {
            start_row: s.start_row,
            end_row: s.end_row,
        };
        Ok(())
    })
}

/// # Safety
/// `plan` must be NULL or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn stripsim_plan_free(plan: *mut StripsimPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

unsafe fn attack(
    engine: Engine,
    image: *const StripsimImage,
    plan: *const StripsimPlan,
    pattern_code: u32,
    out: *mut *mut StripsimImage,
) -> StripsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let img = in_arg(image, "image")?;
        let plan = in_arg(plan, "plan")?;
        let pattern = pattern(pattern_code)?;
        let result = match engine {
            Engine::Swap => stripsim::apply_swap(&img.0, &plan.0, pattern)?,
            Engine::Packet => stripsim::simulate_packet_loss(&img.0, &plan.0, pattern).map_err(|e| match e {
                PacketError::Plan(p) => Fail::from(p),
                other => Fail(StripsimStatus::InvalidPlan, other.to_string()),
            })?,
        };
        *out = Box::into_raw(Box::new(StripsimImage(result)));
        Ok(())
    })
}

/// Channel-swap attack; the result is a new image.
///
/// # Safety
/// Handles must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stripsim_apply_swap(
    image: *const StripsimImage,
    plan: *const StripsimPlan,
    pattern_code: u32,
    out: *mut *mut StripsimImage,
) -> StripsimStatus {
    attack(Engine::Swap, image, plan, pattern_code, out)
}

/// Row-packet loss model; the result is a new image.
///
/// # Safety
/// Handles must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stripsim_simulate_packet_loss(
    image: *const StripsimImage,
    plan: *const StripsimPlan,
    pattern_code: u32,
    out: *mut *mut StripsimImage,
) -> StripsimStatus {
    attack(Engine::Packet, image, plan, pattern_code, out)
}

/// Sets `*matched` to 1 when the differing rows of the two images line up
/// with the plan's strips, else 0.
///
/// # Safety
/// Handles must come from this library; `matched` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stripsim_verify(
    original: *const StripsimImage,
    attacked: *const StripsimImage,
    plan: *const StripsimPlan,
    matched: *mut c_int,
) -> StripsimStatus {
    guard(|| {
        let matched = out_arg(matched, "matched")?;
        let report = verify_against_original(&in_arg(original, "original")?.0, &in_arg(attacked, "attacked")?.0, &in_arg(plan, "plan")?.0)
            .map_err(|e| Fail(StripsimStatus::DimensionMismatch, e.to_string()))?;
        *matched = c_int::from(report.matched == Some(true));
        Ok(())
    })
}

/// `master_seed ^ fnv1a64(path)`; a NULL path hashes as empty.
///
/// # Safety
/// `path` must be NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn stripsim_derive_seed(master_seed: u64, path: *const c_char) -> u64 {
    if path.is_null() {
        return stripsim::derive_seed(master_seed, "");
    }
    let bytes = CStr::from_ptr(path).to_bytes();
    master_seed ^ stripsim::attack::fnv1a64(bytes)
}

/// Signed percentage change against a positive baseline.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stripsim_degradation(no_attack: f64, attacked: f64, out: *mut f64) -> StripsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = stats::degradation(no_attack, attacked).map_err(|e| Fail(StripsimStatus::Stats, e.to_string()))?;
        Ok(())
    })
}

/// Two-sided t-test of `a` against `b`.
///
/// # Safety
/// `a` and `b` must point to `na` and `nb` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn stripsim_ttest(
    a: *const f64,
    na: size_t,
    b: *const f64,
    nb: size_t,
    kind_code: u32,
    out: *mut StripsimTTestResult,
) -> StripsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let kind = match kind_code {
            0 => TTestKind::Welch,
            1 => TTestKind::Pooled,
            2 => TTestKind::Paired,
            k => return Err(invalid(format!("unknown t-test kind {k}"))),
        };
        let r = stats::ttest_with(slice_arg(a, na, "a")?, slice_arg(b, nb, "b")?, kind)
            .map_err(|e| Fail(StripsimStatus::Stats, e.to_string()))?;
        *out = StripsimTTestResult {
            t_statistic: r.t_statistic,
            degrees_of_freedom: r.degrees_of_freedom,
            p_value: r.p_value,
            significant_at_5pct: c_int::from(r.significant_at_5pct),
            degenerate: c_int::from(r.degenerate),
        };
        Ok(())
    })
}

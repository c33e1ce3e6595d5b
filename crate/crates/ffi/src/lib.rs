//! C ABI over `ned-core`.
//!
//! Models and tracks cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns a
//! [`NedStatus`]; on failure [`ned_last_error`] describes the problem for the
//! calling thread. Output pointers are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ned_core::data::{read_track, write_track};
use ned_core::geometry::estimate_similarity_points;
use ned_core::inference::{extract_style, geometric_median, label_style, translate_track, MergeKernel};
use ned_core::metrics::track_jaw_pcc;
use ned_core::networks::{EmotionLabel, ManipulatorParams};
use ned_core::sequence::{ExpressionTrack, StyleVector};
use ned_core::Error;

/// Values per expression frame.
pub const NED_EXPR_DIM: usize = 51;
/// Values per style vector.
pub const NED_STYLE_DIM: usize = 16;
/// Number of emotion labels accepted by [`ned_style_for_label`].
pub const NED_NUM_EMOTIONS: u32 = 7;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NedStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Io = 4,
    Format = 5,
    Parse = 6,
    Divergence = 7,
    Panic = 8,
}

/// A trained model loaded from a checkpoint.
pub struct NedModel {
    params: ManipulatorParams,
    kernel: MergeKernel,
}

/// An expression track of `frames × NED_EXPR_DIM` values.
pub struct NedTrack(ExpressionTrack);

/// Similarity transform `p ↦ scale · R(rotation) · p + (tx, ty)`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NedSimilarity {
    pub scale: f64,
    pub rotation: f64,
    pub tx: f64,
    pub ty: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(NedStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Shape(_) => NedStatus::Shape,
            Error::Invalid(_) => NedStatus::InvalidArgument,
            Error::Divergence(_) => NedStatus::Divergence,
            Error::Parse { .. } | Error::Json(_) => NedStatus::Parse,
            Error::Format(_) | Error::Image(_) => NedStatus::Format,
            Error::Io(_) => NedStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(NedStatus::NullPointer, format!("{what} is null"))
}

fn bad(msg: impl Into<String>) -> Failure {
    Failure(NedStatus::InvalidArgument, msg.into())
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn run(f: impl FnOnce() -> Result<(), Failure>) -> NedStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NedStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            NedStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| bad(format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

unsafe fn write_style(style: &StyleVector, out: *mut f32) {
    ptr::copy_nonoverlapping(style.as_slice().as_ptr(), out, NED_STYLE_DIM);
}

/// Message describing the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ned_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ned_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint written by the trainer.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ned_model_load(path: *const c_char, out: *mut *mut NedModel) -> NedStatus {
    run(|| {
        let path = path_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let params = ManipulatorParams::load(&path)?;
        let kernel = MergeKernel::default_for(params.window)?;
        *out = boxed(NedModel { params, kernel });
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`ned_model_load`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ned_model_free(model: *mut NedModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Window length the model was trained on, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ned_model_window(model: *const NedModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.window)
}

/// Copies `frames × NED_EXPR_DIM` values into a new track.
///
/// # Safety
/// `data` must point to that many floats and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ned_track_new(data: *const f32, frames: usize, out: *mut *mut NedTrack) -> NedStatus {
    run(|| {
        let len = frames.checked_mul(NED_EXPR_DIM).ok_or_else(|| bad("frame count overflows"))?;
        let data = slice_arg(data, len, "data")?;
        let out = out_arg(out, "out")?;
        *out = boxed(NedTrack(ExpressionTrack::new(data.to_vec())?));
        Ok(())
    })
}

/// Reads a track CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ned_track_read(path: *const c_char, out: *mut *mut NedTrack) -> NedStatus {
    run(|| {
        let path = path_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = boxed(NedTrack(read_track(&path)?));
        Ok(())
    })
}

/// Writes a track CSV.
///
/// # Safety
/// `track` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ned_track_write(track: *const NedTrack, path: *const c_char) -> NedStatus {
    run(|| {
        let track = as_ref(track, "track")?;
        write_track(&path_arg(path, "path")?, &track.0)?;
        Ok(())
    })
}

/// Number of frames, or 0 for a null handle.
///
/// # Safety
/// `track` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ned_track_frames(track: *const NedTrack) -> usize {
    track.as_ref().map_or(0, |t| t.0.len())
}

/// Row-major frame data, valid while the handle lives, or null for a null handle.
///
/// # Safety
/// `track` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ned_track_data(track: *const NedTrack) -> *const f32 {
    track.as_ref().map_or(ptr::null(), |t| t.0.data().as_ptr())
}

/// Releases a track. Null is ignored.
///
/// # Safety
/// `track` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ned_track_free(track: *mut NedTrack) {
    if !track.is_null() {
        drop(Box::from_raw(track));
    }
}

/// Target style for emotion `label` (0 to `NED_NUM_EMOTIONS - 1`) from the mapping
/// network, with the latent code drawn from `seed`. Writes `NED_STYLE_DIM` floats.
///
/// # Safety
/// `model` must be a live handle and `style_out` must hold `NED_STYLE_DIM` floats.
#[no_mangle]
pub unsafe extern "C" fn ned_style_for_label(
    model: *const NedModel,
    label: u32,
    seed: u64,
    style_out: *mut f32,
) -> NedStatus {
    run(|| {
        let model = as_ref(model, "model")?;
        if style_out.is_null() {
            return Err(null("style_out"));
        }
        let style = label_style(&model.params, EmotionLabel::from_index(label as usize)?, seed)?;
        write_style(&style, style_out);
        Ok(())
    })
}

/// Style of a reference track. Writes `NED_STYLE_DIM` floats.
///
/// # Safety
/// `model` and `reference` must be live handles and `style_out` must hold `NED_STYLE_DIM` floats.
#[no_mangle]
pub unsafe extern "C" fn ned_style_from_reference(
    model: *const NedModel,
    reference: *const NedTrack,
    style_out: *mut f32,
) -> NedStatus {
    run(|| {
        let model = as_ref(model, "model")?;
        let reference = as_ref(reference, "reference")?;
        if style_out.is_null() {
            return Err(null("style_out"));
        }
        let style = extract_style(&model.params, &reference.0, model.params.window)?;
        write_style(&style, style_out);
        Ok(())
    })
}

/// Translates `track` toward `style` (`NED_STYLE_DIM` floats) into a new track.
///
/// # Safety
/// Handles must be live, `style` must hold `NED_STYLE_DIM` floats and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ned_translate(
    model: *const NedModel,
    track: *const NedTrack,
    style: *const f32,
    out: *mut *mut NedTrack,
) -> NedStatus {
    run(|| {
        let model = as_ref(model, "model")?;
        let track = as_ref(track, "track")?;
        let style = StyleVector::from_slice(slice_arg(style, NED_STYLE_DIM, "style")?)?;
        let out = out_arg(out, "out")?;
        *out = boxed(NedTrack(translate_track(&model.params, &track.0, &style, &model.kernel)?));
        Ok(())
    })
}

/// Correlation of the jaw channel between two tracks of equal length.
///
/// # Safety
/// Handles must be live and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ned_jaw_pcc(a: *const NedTrack, b: *const NedTrack, out: *mut f64) -> NedStatus {
    run(|| {
        let (a, b) = (as_ref(a, "a")?, as_ref(b, "b")?);
        let out = out_arg(out, "out")?;
        *out = track_jaw_pcc(&a.0, &b.0)?;
        Ok(())
    })
}

/// Geometric median of `count` points of `dim` coordinates stored row-major.
///
/// # Safety
/// `points` must hold `count × dim` doubles and `out` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn ned_geometric_median(
    points: *const f64,
    count: usize,
    dim: usize,
    out: *mut f64,
) -> NedStatus {
    run(|| {
        if dim == 0 {
            return Err(bad("dimension must be positive"));
        }
        let len = count.checked_mul(dim).ok_or_else(|| bad("point buffer overflows"))?;
        let flat = slice_arg(points, len, "points")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let rows: Vec<Vec<f64>> = flat.chunks(dim).map(<[f64]>::to_vec).collect();
        let m = geometric_median(&rows)?;
        ptr::copy_nonoverlapping(m.as_ptr(), out, dim);
        Ok(())
    })
}

/// Least-squares similarity transform taking `src` onto `dst`, each `count` (x, y) pairs.
///
/// # Safety
/// `src` and `dst` must hold `2 × count` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ned_estimate_similarity(
    src: *const f64,
    dst: *const f64,
    count: usize,
    out: *mut NedSimilarity,
) -> NedStatus {
    run(|| {
        let len = count.checked_mul(2).ok_or_else(|| bad("point buffer overflows"))?;
        let pairs = |p, what| -> Result<Vec<[f64; 2]>, Failure> {
            Ok(slice_arg(p, len, what)?.chunks(2).map(|c| [c[0], c[1]]).collect())
        };
        let (src, dst) = (pairs(src, "src")?, pairs(dst, "dst")?);
        let out = out_arg(out, "out")?;
        let t = estimate_similarity_points(&src, &dst)?;
        *out = NedSimilarity {
            scale: t.scale,
            rotation: t.rotation,
            tx: t.tx,
            ty: t.ty,
        };
        Ok(())
    })
}

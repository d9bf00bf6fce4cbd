//! C ABI for inpaint-opt.
//!
//! Images, masks and known data cross the boundary as opaque handles that
//! are created by `*_new`/`*_load`/computing functions and released with the
//! matching `*_free`. Every fallible function returns an [`InpaintStatus`];
//! on failure [`inpaint_last_error`] describes the problem for the calling
//! thread. Output handles are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use inpaint_opt::spatial::{self, NlpeParams, SparsifyParams};
use inpaint_opt::tonal::{self, TonalMethod, TonalParams};
use inpaint_opt::{pnm, Dims, Error, Image, KnownData, Mask, SolverParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InpaintStatus {
    Ok = 0,
    NullPointer = 1,
    Io = 2,
    Format = 3,
    DimensionMismatch = 4,
    EmptyMask = 5,
    InvalidParameter = 6,
    Convergence = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InpaintTonalMethod {
    Lsq = 0,
    Echo = 1,
}

/// Opaque image handle.
pub struct InpaintImage(Image);

/// Opaque binary mask handle.
pub struct InpaintMask(Mask);

/// Opaque handle for mask positions with their stored values.
pub struct InpaintKnown(KnownData);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> InpaintStatus {
    match e {
        Error::Io { .. } => InpaintStatus::Io,
        Error::UnsupportedFormat { .. }
        | Error::MalformedHeader { .. }
        | Error::TruncatedPayload { .. }
        | Error::InvalidSample { .. }
        | Error::InvalidMask { .. }
        | Error::NonBinaryMask
        | Error::TonalFormat { .. }
        | Error::DuplicateCoordinate { .. }
        | Error::CoordinateOutOfRange { .. } => InpaintStatus::Format,
        Error::DimensionMismatch { .. } => InpaintStatus::DimensionMismatch,
        Error::EmptyMask => InpaintStatus::EmptyMask,
        Error::InvalidParameter(_) => InpaintStatus::InvalidParameter,
        Error::Convergence { .. } => InpaintStatus::Convergence,
    }
}

struct Fail(InpaintStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(InpaintStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> InpaintStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => InpaintStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            InpaintStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn path(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(InpaintStatus::InvalidParameter, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

/// Message of the last failure on this thread. The pointer stays valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn inpaint_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates an image from `width * height * channels` interleaved samples.
///
/// # Safety
/// `data` must point to that many readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn inpaint_image_new(
    width: usize,
    height: usize,
    channels: usize,
    data: *const f64,
    out: *mut *mut InpaintImage,
) -> InpaintStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let len = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Fail(InpaintStatus::InvalidParameter, "image size overflows".into()))?;
        let samples = std::slice::from_raw_parts(data, len).to_vec();
        put(out, InpaintImage(Image::new(width, height, channels, samples)?))
    })
}

/// Reads a PGM or PPM file.
///
/// # Safety
/// `file` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn inpaint_image_load(file: *const c_char, out: *mut *mut InpaintImage) -> InpaintStatus {
    guard(|| put(out, InpaintImage(pnm::load_image(path(file)?)?)))
}

/// Writes an 8-bit PGM or PPM file.
///
/// # Safety
/// `img` must be a live handle; `file` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn inpaint_image_save(img: *const InpaintImage, file: *const c_char) -> InpaintStatus {
    guard(|| Ok(pnm::save_image(&get(img, "image")?.0, path(file)?)?))
}

/// Writes width, height and channel count. Any output pointer may be null.
///
/// # Safety
/// `img` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn inpaint_image_shape(
    img: *const InpaintImage,
    width: *mut usize,
    height: *mut usize,
    channels: *mut usize,
) -> InpaintStatus {
    guard(|| {
        let img = &get(img, "image")?.0;
        for (p, v) in [(width, img.width()), (height, img.height()), (channels, img.channels())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copies the interleaved samples into `data`, which holds `len` doubles.
///
/// # Safety
/// `img` must be a live handle; `data` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn inpaint_image_data(img: *const InpaintImage, data: *mut f64, len: usize) -> InpaintStatus {
    guard(|| {
        let img = &get(img, "image")?.0;
        if data.is_null() {
            return Err(null("data"));
        }
        if len != img.data().len() {
            return Err(Error::DimensionMismatch {
                expected: img.data().len().to_string(),
                found: len.to_string(),
            }
            .into());
        }
        ptr::copy_nonoverlapping(img.data().as_ptr(), data, len);
        Ok(())
    })
}

/// # Safety
/// `img` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn inpaint_image_free(img: *mut InpaintImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Reads a {0,255} PGM mask.
///
/// # Safety
/// `file` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn inpaint_mask_load(file: *const c_char, out: *mut *mut InpaintMask) -> InpaintStatus {
    guard(|| put(out, InpaintMask(pnm::load_mask(path(file)?)?)))
}

/// # Safety
/// `mask` must be a live handle; `file` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn inpaint_mask_save(mask: *const InpaintMask, file: *const c_char) -> InpaintStatus {
    guard(|| Ok(pnm::save_mask(&get(mask, "mask")?.0, path(file)?)?))
}

/// Number of mask pixels, or 0 for a null handle.
///
/// # Safety
/// `mask` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn inpaint_mask_count(mask: *const InpaintMask) -> usize {
    mask.as_ref().map_or(0, |m| m.0.count())
}

/// Whether pixel `index` (row-major) is a mask pixel. Out of range reads 0.
///
/// # Safety
/// `mask` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn inpaint_mask_get(mask: *const InpaintMask, index: usize) -> c_int {
    mask.as_ref()
        .filter(|m| index < m.0.dims().len())
        .map_or(0, |m| m.0.is_set(index) as c_int)
}

/// # Safety
/// `mask` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn inpaint_mask_free(mask: *mut InpaintMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// Uniformly random mask with exactly `round(density * width * height)` pixels.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn inpaint_mask_random(
    width: usize,
    height: usize,
    density: f64,
    seed: u64,
    out: *mut *mut InpaintMask,
) -> InpaintStatus {
    guard(|| put(out, InpaintMask(spatial::mask_random(Dims::new(width, height), density, seed)?)))
}

/// Dithered Laplace magnitude mask. `fell_back`, when not null, is set to 1
/// if the image was flat and a random mask was returned instead.
///
/// # Safety
/// `img` must be a live handle; `out` writable; `fell_back` null or writable.
#[no_mangle]
pub unsafe extern "C" fn inpaint_mask_analytic(
    img: *const InpaintImage,
    density: f64,
    seed: u64,
    out: *mut *mut InpaintMask,
    fell_back: *mut c_int,
) -> InpaintStatus {
    guard(|| {
        let r = spatial::mask_analytic(&get(img, "image")?.0, density, seed)?;
        if !fell_back.is_null() {
            *fell_back = r.fell_back as c_int;
        }
        put(out, InpaintMask(r.mask))
    })
}

/// Probabilistic sparsification from the full mask. Pass 0 for `p` or `q`
/// to use the defaults (0.02 and 0.98).
///
/// # Safety
/// `img` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn inpaint_mask_sparsify(
    img: *const InpaintImage,
    density: f64,
    p: f64,
    q: f64,
    seed: u64,
    out: *mut *mut InpaintMask,
) -> InpaintStatus {
    guard(|| {
        let mut params = SparsifyParams::new(density, seed);
        if p != 0.0 {
            params.candidate_fraction = p;
        }
        if q != 0.0 {
            params.return_fraction = q;
        }
        let r = spatial::sparsify(&get(img, "image")?.0, &params, &SolverParams::default())?;
        put(out, InpaintMask(r.mask))
    })
}

/// Nonlocal pixel exchange starting from `mask`.
///
/// # Safety
/// `img` and `mask` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn inpaint_mask_nlpe(
    img: *const InpaintImage,
    mask: *const InpaintMask,
    cycles: usize,
    swap_size: usize,
    seed: u64,
    out: *mut *mut InpaintMask,
) -> InpaintStatus {
    guard(|| {
        let params = NlpeParams {
            cycles,
            swap_size,
            seed,
        };
        let r = spatial::nlpe(
            &get(img, "image")?.0,
            &get(mask, "mask")?.0,
            &params,
            &SolverParams::default(),
        )?;
        put(out, InpaintMask(r.mask))
    })
}

/// Known data holding the image values at the mask pixels.
///
/// # Safety
/// `img` and `mask` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn inpaint_known_from_image(
    img: *const InpaintImage,
    mask: *const InpaintMask,
    out: *mut *mut InpaintKnown,
) -> InpaintStatus {
    guard(|| {
        put(
            out,
            InpaintKnown(KnownData::from_image(&get(img, "image")?.0, &get(mask, "mask")?.0)?),
        )
    })
}

/// Reads a TONAL file.
///
/// # Safety
/// `file` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn inpaint_known_load(file: *const c_char, out: *mut *mut InpaintKnown) -> InpaintStatus {
    guard(|| put(out, InpaintKnown(tonal::load_known(path(file)?)?)))
}

/// Writes a TONAL file.
///
/// # Safety
/// `known` must be a live handle; `file` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn inpaint_known_save(known: *const InpaintKnown, file: *const c_char) -> InpaintStatus {
    guard(|| Ok(tonal::save_known(&get(known, "known data")?.0, path(file)?)?))
}

/// Number of stored pixels, or 0 for a null handle.
///
/// # Safety
/// `known` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn inpaint_known_len(known: *const InpaintKnown) -> usize {
    known.as_ref().map_or(0, |k| k.0.len())
}

/// # Safety
/// `known` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn inpaint_known_free(known: *mut InpaintKnown) {
    if !known.is_null() {
        drop(Box::from_raw(known));
    }
}

/// Tonal optimisation of the values at `mask` with default settings.
/// `method` is an [`InpaintTonalMethod`] value.
///
/// # Safety
/// `img` and `mask` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn inpaint_tonal(
    img: *const InpaintImage,
    mask: *const InpaintMask,
    method: c_int,
    seed: u64,
    out: *mut *mut InpaintKnown,
) -> InpaintStatus {
    guard(|| {
        let params = TonalParams {
            method: match method {
                m if m == InpaintTonalMethod::Lsq as c_int => TonalMethod::Lsq,
                m if m == InpaintTonalMethod::Echo as c_int => TonalMethod::Echo,
                m => return Err(Fail(InpaintStatus::InvalidParameter, format!("unknown tonal method {m}"))),
            },
            seed,
            ..TonalParams::default()
        };
        let r = tonal::optimise(&get(img, "image")?.0, &get(mask, "mask")?.0, &params)?;
        put(out, InpaintKnown(r.known))
    })
}

/// Homogeneous diffusion inpainting. `tolerance` <= 0 selects the default.
///
/// # Safety
/// `known` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn inpaint_solve(
    known: *const InpaintKnown,
    tolerance: f64,
    out: *mut *mut InpaintImage,
) -> InpaintStatus {
    guard(|| {
        let params = if tolerance > 0.0 {
            SolverParams::with_tolerance(tolerance)
        } else {
            SolverParams::default()
        };
        put(out, InpaintImage(inpaint_opt::inpaint(&get(known, "known data")?.0, &params)?))
    })
}

/// PSNR in dB with peak 255; identical images give +infinity.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn inpaint_psnr(a: *const InpaintImage, b: *const InpaintImage, out: *mut f64) -> InpaintStatus {
    guard(|| {
        let v = inpaint_opt::psnr(&get(a, "image")?.0, &get(b, "image")?.0)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = v;
        Ok(())
    })
}

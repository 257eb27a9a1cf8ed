//! C ABI for the semistereo generator.
//!
//! Every fallible function returns an [`SsStatus`]; on failure a message is
//! kept per thread and read with [`ss_last_error`]. Handles are opaque and
//! must be released with their matching `*_free` function. Panics never cross
//! the boundary: they are caught and reported as [`SsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use semistereo::cli::exit_code;
use semistereo::config::Config;
use semistereo::grid::{DisparityMap, Grid, Mask};
use semistereo::io::config_hash;
use semistereo::metrics::{evaluate, DEFAULT_TAUS};
use semistereo::pipeline::Generator;
use semistereo::render::FrameSample;
use semistereo::scene::solve_baseline;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Invalid configuration or missing inputs.
    Config = 2,
    /// A generated or evaluated frame violates an invariant.
    Invariant = 3,
    Io = 4,
    /// An argument is out of range or a buffer is too small.
    InvalidArgument = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Scene, textures and rig built from one configuration.
pub struct SsGenerator {
    inner: Generator,
}

/// One rendered stereo pair with its ground truth.
pub struct SsFrame {
    inner: FrameSample,
}

/// A dense single-channel float map, row-major, top row first.
pub struct SsDisparityMap {
    inner: DisparityMap,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SsRigInfo {
    pub width: u32,
    pub height: u32,
    pub f_px: f64,
    pub baseline_m: f64,
    pub ndisp: f64,
    pub frames: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SsMetrics {
    pub avgerr: f64,
    pub rms: f64,
    /// Percent of pixels with error above 1, 2 and 4 px.
    pub bad_1: f64,
    pub bad_2: f64,
    pub bad_4: f64,
    pub d1_all: f64,
    pub pixel_count: u64,
}

struct Failure {
    status: SsStatus,
    message: String,
}

impl Failure {
    fn new(status: SsStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<semistereo::Error> for Failure {
    fn from(e: semistereo::Error) -> Self {
        let status = match exit_code(&e) {
            2 => SsStatus::Config,
            3 => SsStatus::Invariant,
            _ => SsStatus::Io,
        };
        Failure::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SsStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SsStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            SsStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass pointers obtained from this library or valid C data.
    unsafe { p.as_ref() }.ok_or_else(|| Failure::new(SsStatus::NullPointer, format!("{name} is null")))
}

fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: as above; the caller owns the pointee for the duration of the call.
    unsafe { p.as_mut() }.ok_or_else(|| Failure::new(SsStatus::NullPointer, format!("{name} is null")))
}

fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(SsStatus::NullPointer, format!("{name} is null")));
    }
    // SAFETY: non-null and NUL-terminated per the API contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::new(SsStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

fn slice_in<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(Failure::new(SsStatus::NullPointer, format!("{name} is null")));
    }
    // SAFETY: the caller guarantees `len` readable elements at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn copy_out<T: Copy>(src: &[T], dst: *mut T, len: usize, name: &str) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(Failure::new(SsStatus::NullPointer, format!("{name} is null")));
    }
    if len < src.len() {
        return Err(Failure::new(
            SsStatus::InvalidArgument,
            format!("{name} holds {len} elements, {} needed", src.len()),
        ));
    }
    // SAFETY: `dst` has room for `len >= src.len()` elements and does not
    // overlap memory owned by this library.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len()) };
    Ok(())
}

fn dims(width: u32, height: u32) -> Result<usize, Failure> {
    if width == 0 || height == 0 {
        return Err(Failure::new(
            SsStatus::InvalidArgument,
            "width and height must be positive",
        ));
    }
    Ok(width as usize * height as usize)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ss_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

fn build_generator(text: &str, base_dir: Option<&Path>, out: *mut *mut SsGenerator) -> Result<(), Failure> {
    let out = out_ptr(out, "out")?;
    let cfg = Config::from_toml(text, base_dir)?;
    cfg.validate()?;
    let gen = Generator::new(cfg, config_hash(text.as_bytes(), &[]))?;
    *out = Box::into_raw(Box::new(SsGenerator { inner: gen }));
    Ok(())
}

/// Builds a generator from a bundled preset such as `"middlebury-like"`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_generator_from_preset(name: *const c_char, out: *mut *mut SsGenerator) -> SsStatus {
    guard(|| {
        let name = c_str(name, "name")?;
        let text = semistereo::config::preset_text(name)?;
        build_generator(text, None, out)
    })
}

/// Builds a generator from TOML text. Relative directories in the config
/// resolve against `base_dir`, which may be null.
///
/// # Safety
/// `toml` and a non-null `base_dir` must be NUL-terminated strings; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_generator_from_toml(
    toml: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut SsGenerator,
) -> SsStatus {
    guard(|| {
        let text = c_str(toml, "toml")?;
        let base = if base_dir.is_null() {
            None
        } else {
            Some(PathBuf::from(c_str(base_dir, "base_dir")?))
        };
        build_generator(text, base.as_deref(), out)
    })
}

/// # Safety
/// `gen` must be null or a handle from `ss_generator_from_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_generator_free(gen: *mut SsGenerator) {
    if !gen.is_null() {
        // SAFETY: allocated by `Box::into_raw` in `build_generator`.
        drop(unsafe { Box::from_raw(gen) });
    }
}

/// # Safety
/// `gen` must be a live generator handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_generator_info(gen: *const SsGenerator, out: *mut SsRigInfo) -> SsStatus {
    guard(|| {
        let scene = non_null(gen, "gen")?.inner.scene();
        let rig = &scene.rig;
        *out_ptr(out, "out")? = SsRigInfo {
            width: rig.width_px,
            height: rig.height_px,
            f_px: rig.f_px(),
            baseline_m: rig.baseline_m,
            ndisp: rig.ndisp,
            frames: scene.frames,
        };
        Ok(())
    })
}

/// Renders `frame` into a new frame handle.
///
/// # Safety
/// `gen` must be a live generator handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_generator_render(gen: *const SsGenerator, frame: u32, out: *mut *mut SsFrame) -> SsStatus {
    guard(|| {
        let gen = &non_null(gen, "gen")?.inner;
        let out = out_ptr(out, "out")?;
        if frame >= gen.scene().frames {
            return Err(Failure::new(
                SsStatus::InvalidArgument,
                format!("frame {frame} outside 0..{}", gen.scene().frames),
            ));
        }
        let sample = gen.render_frame(frame)?;
        *out = Box::into_raw(Box::new(SsFrame { inner: sample }));
        Ok(())
    })
}

/// Writes every frame and the manifest under `root` using `workers` threads.
///
/// # Safety
/// `gen` must be a live generator handle and `root` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn ss_generator_generate(gen: *const SsGenerator, root: *const c_char, workers: u32) -> SsStatus {
    guard(|| {
        let gen = &non_null(gen, "gen")?.inner;
        let root = c_str(root, "root")?;
        if workers == 0 {
            return Err(Failure::new(SsStatus::InvalidArgument, "workers must be at least 1"));
        }
        gen.generate(Path::new(root), workers as usize)?;
        Ok(())
    })
}

/// # Safety
/// `frame` must be null or a handle from `ss_generator_render` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_frame_free(frame: *mut SsFrame) {
    if !frame.is_null() {
        // SAFETY: allocated by `Box::into_raw` in `ss_generator_render`.
        drop(unsafe { Box::from_raw(frame) });
    }
}

/// # Safety
/// `frame` must be a live frame handle; `width` and `height` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_frame_size(frame: *const SsFrame, width: *mut u32, height: *mut u32) -> SsStatus {
    guard(|| {
        let s = &non_null(frame, "frame")?.inner;
        *out_ptr(width, "width")? = s.disp_left.width as u32;
        *out_ptr(height, "height")? = s.disp_left.height as u32;
        Ok(())
    })
}

fn flat_rgb(img: &Grid<[u8; 3]>) -> Vec<u8> {
    img.data.iter().flatten().copied().collect()
}

/// Copies the left view as interleaved RGB8 (`3 * width * height` bytes).
///
/// # Safety
/// `frame` must be a live frame handle and `buf` hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ss_frame_copy_left(frame: *const SsFrame, buf: *mut u8, len: usize) -> SsStatus {
    guard(|| copy_out(&flat_rgb(&non_null(frame, "frame")?.inner.left_rgb), buf, len, "buf"))
}

/// Copies the right view as interleaved RGB8 (`3 * width * height` bytes).
///
/// # Safety
/// `frame` must be a live frame handle and `buf` hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ss_frame_copy_right(frame: *const SsFrame, buf: *mut u8, len: usize) -> SsStatus {
    guard(|| copy_out(&flat_rgb(&non_null(frame, "frame")?.inner.right_rgb), buf, len, "buf"))
}

/// Copies the left disparity map (`width * height` floats, pixels).
///
/// # Safety
/// `frame` must be a live frame handle and `buf` hold `len` floats.
#[no_mangle]
pub unsafe extern "C" fn ss_frame_copy_disparity(frame: *const SsFrame, buf: *mut f32, len: usize) -> SsStatus {
    guard(|| copy_out(&non_null(frame, "frame")?.inner.disp_left.data, buf, len, "buf"))
}

/// Copies the occlusion mask (`width * height` bytes, 1 = occluded).
///
/// # Safety
/// `frame` must be a live frame handle and `buf` hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ss_frame_copy_occlusion(frame: *const SsFrame, buf: *mut u8, len: usize) -> SsStatus {
    guard(|| copy_out(&non_null(frame, "frame")?.inner.occlusion.data, buf, len, "buf"))
}

/// Copies the foreground mask (`width * height` bytes, 1 = object).
///
/// # Safety
/// `frame` must be a live frame handle and `buf` hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ss_frame_copy_foreground(frame: *const SsFrame, buf: *mut u8, len: usize) -> SsStatus {
    guard(|| copy_out(&non_null(frame, "frame")?.inner.foreground.data, buf, len, "buf"))
}

/// Writes a `width` x `height` float map as little-endian PFM.
///
/// # Safety
/// `path` must be NUL-terminated and `data` hold `width * height` floats.
#[no_mangle]
pub unsafe extern "C" fn ss_write_pfm(path: *const c_char, data: *const f32, width: u32, height: u32) -> SsStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let n = dims(width, height)?;
        let map = Grid::from_vec(width as usize, height as usize, slice_in(data, n, "data")?.to_vec());
        semistereo::io::write_pfm(&map, Path::new(path))?;
        Ok(())
    })
}

/// Reads a PFM file into a new map handle.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_read_pfm(path: *const c_char, out: *mut *mut SsDisparityMap) -> SsStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let out = out_ptr(out, "out")?;
        let map = semistereo::io::read_pfm(Path::new(path))?;
        *out = Box::into_raw(Box::new(SsDisparityMap { inner: map }));
        Ok(())
    })
}

/// # Safety
/// `map` must be a live map handle; `width` and `height` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_map_size(map: *const SsDisparityMap, width: *mut u32, height: *mut u32) -> SsStatus {
    guard(|| {
        let m = &non_null(map, "map")?.inner;
        *out_ptr(width, "width")? = m.width as u32;
        *out_ptr(height, "height")? = m.height as u32;
        Ok(())
    })
}

/// Borrowed pointer to the map's `width * height` floats, valid until the
/// map is freed. Null if `map` is null.
///
/// # Safety
/// `map` must be null or a live map handle.
#[no_mangle]
pub unsafe extern "C" fn ss_map_data(map: *const SsDisparityMap) -> *const f32 {
    // SAFETY: null or live per the contract.
    unsafe { map.as_ref() }.map_or(ptr::null(), |m| m.inner.data.as_ptr())
}

/// # Safety
/// `map` must be null or a handle from `ss_read_pfm` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_map_free(map: *mut SsDisparityMap) {
    if !map.is_null() {
        // SAFETY: allocated by `Box::into_raw` in `ss_read_pfm`.
        drop(unsafe { Box::from_raw(map) });
    }
}

/// Scores `pred` against `gt`, both `width * height` floats. `mask` may be
/// null (all pixels) or hold `width * height` bytes where nonzero selects.
///
/// # Safety
/// Buffers must have the sizes stated above and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_evaluate(
    pred: *const f32,
    gt: *const f32,
    mask: *const u8,
    width: u32,
    height: u32,
    out: *mut SsMetrics,
) -> SsStatus {
    guard(|| {
        let n = dims(width, height)?;
        let (w, h) = (width as usize, height as usize);
        let pred: DisparityMap = Grid::from_vec(w, h, slice_in(pred, n, "pred")?.to_vec());
        let gt: DisparityMap = Grid::from_vec(w, h, slice_in(gt, n, "gt")?.to_vec());
        let mask: Option<Mask> = if mask.is_null() {
            None
        } else {
            Some(Grid::from_vec(w, h, slice_in(mask, n, "mask")?.to_vec()))
        };
        let r = evaluate(&pred, &gt, mask.as_ref(), &DEFAULT_TAUS)?;
        let bad = |t: f64| r.bad_at(t).unwrap_or(f64::NAN);
        *out_ptr(out, "out")? = SsMetrics {
            avgerr: r.avgerr,
            rms: r.rms,
            bad_1: bad(1.0),
            bad_2: bad(2.0),
            bad_4: bad(4.0),
            d1_all: r.d1_all,
            pixel_count: r.pixel_count,
        };
        Ok(())
    })
}

/// Baseline in meters for which depth `z_min` maps to `max_disp` pixels.
#[no_mangle]
pub extern "C" fn ss_solve_baseline(max_disp: f64, z_min: f64, f_px: f64) -> f64 {
    solve_baseline(max_disp, z_min, f_px)
}

/// Focal length in pixels from focal length and sensor width in millimeters.
#[no_mangle]
pub extern "C" fn ss_f_px(focal_mm: f64, sensor_width_mm: f64, width_px: u32) -> f64 {
    focal_mm * width_px as f64 / sensor_width_mm
}

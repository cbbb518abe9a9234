//! C ABI over `ternlut`.
//!
//! Paths and packed weight streams are opaque handles created and released by this
//! library. Every fallible call returns a [`TlStatus`]; on failure the message is available
//! from [`tl_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ternlut::archsim::{simulate_model, Catalog, ExecMode, HardwareConfig, SimError, Stage, TileSchedule};
use ternlut::lutkernel::{mpgemm_bitserial, mpgemm_ternary, naive_gemm, ActivationMatrix, GemmResult, KernelError};
use ternlut::pathgen::{decode_path, encode_path, generate_path, path_hash, BuildPath, ChunkConfig, LutMode, PathError};
use ternlut::weightcodec::{
    decode_packed, decompose_sign_split, encode_packed, pack_ternary, unpack_ternary, CodecError, PackedWeightStream,
    TernaryMatrix,
};
use ternlut::Matrix;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TlStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Schedule = 3,
    Mismatch = 4,
    Internal = 5,
}

/// LUT flavour for [`tl_path_generate`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TlLutMode {
    Ternary = 0,
    Binary = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TlExecMode {
    Ternary = 0,
    /// Ternary weights split into a +1 plane and a -1 plane over a binary LUT.
    Bitserial = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TlStage {
    Prefill = 0,
    Decode = 1,
}

/// Operation counts of one GEMM call.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TlCensus {
    pub construct_adds: u64,
    pub queries: u64,
    pub merge_adds: u64,
    pub reduce_adds: u64,
}

/// Compiled build path.
pub struct TlPath(BuildPath);

/// Packed ternary weight matrix.
pub struct TlPacked(PackedWeightStream);

/// Heap bytes owned by the library; release with [`tl_bytes_free`].
#[repr(C)]
pub struct TlBytes {
    pub data: *mut u8,
    pub len: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(TlStatus, String);

impl From<PathError> for Failure {
    fn from(e: PathError) -> Self {
        let status = match e {
            PathError::Schedule { .. } => TlStatus::Schedule,
            _ => TlStatus::Validation,
        };
        Failure(status, e.to_string())
    }
}

impl From<CodecError> for Failure {
    fn from(e: CodecError) -> Self {
        Failure(TlStatus::Validation, e.to_string())
    }
}

impl From<KernelError> for Failure {
    fn from(e: KernelError) -> Self {
        Failure(TlStatus::Validation, e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let status = match e {
            SimError::InfeasibleSchedule { .. } => TlStatus::Schedule,
            SimError::Path(PathError::Schedule { .. }) => TlStatus::Schedule,
            _ => TlStatus::Validation,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(TlStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TlStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TlStatus::Internal
        }
    }
}

unsafe fn slice_in<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn checked_len(a: usize, b: usize) -> Result<usize, Failure> {
    a.checked_mul(b)
        .ok_or_else(|| Failure(TlStatus::Validation, "dimensions overflow".into()))
}

/// Message of the last failure on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn tl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Compiles a build path for `c` inputs with reads at least `depth` steps behind writes.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn tl_path_generate(mode: TlLutMode, c: u32, depth: u32, out: *mut *mut TlPath) -> TlStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let mode = match mode {
            TlLutMode::Ternary => LutMode::Ternary,
            TlLutMode::Binary => LutMode::Binary,
        };
        let path = generate_path(&ChunkConfig::new(mode, c as usize, depth as usize)?)?;
        *out = Box::into_raw(Box::new(TlPath(path)));
        Ok(())
    })
}

/// Loads a path from PLTP bytes.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_path_from_bytes(data: *const u8, len: usize, out: *mut *mut TlPath) -> TlStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let bytes = slice_in(data, len, "data")?;
        *out = Box::into_raw(Box::new(TlPath(decode_path(bytes)?)));
        Ok(())
    })
}

/// Serializes a path to PLTP bytes.
///
/// # Safety
/// `path` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_path_to_bytes(path: *const TlPath, out: *mut TlBytes) -> TlStatus {
    guard(|| {
        let path = path.as_ref().ok_or_else(|| null("path"))?;
        let out = out_ptr(out, "out")?;
        *out = into_bytes(encode_path(&path.0));
        Ok(())
    })
}

/// Number of construction steps, or 0 for a null handle.
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tl_path_steps(path: *const TlPath) -> usize {
    path.as_ref().map_or(0, |p| p.0.steps.len())
}

/// Smallest write-to-read distance in steps, or 0 if no step reads a written entry.
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tl_path_min_raw_distance(path: *const TlPath) -> usize {
    path.as_ref().and_then(|p| p.0.min_raw_distance()).unwrap_or(0)
}

/// Identity used to match packed weights with their path.
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tl_path_hash(path: *const TlPath) -> u64 {
    path.as_ref().map_or(0, |p| path_hash(&p.0))
}

/// # Safety
/// `path` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tl_path_free(path: *mut TlPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Packs a row-major `rows`×`cols` matrix of -1/0/1 values.
///
/// # Safety
/// `weights` must point to `rows * cols` values; `path` must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_pack_ternary(
    path: *const TlPath,
    weights: *const i8,
    rows: usize,
    cols: usize,
    out: *mut *mut TlPacked,
) -> TlStatus {
    guard(|| {
        let path = path.as_ref().ok_or_else(|| null("path"))?;
        let out = out_ptr(out, "out")?;
        if rows == 0 || cols == 0 {
            return Err(Failure(TlStatus::Validation, "weight matrix is empty".into()));
        }
        let w = slice_in(weights, checked_len(rows, cols)?, "weights")?;
        let m = TernaryMatrix::new(Matrix::from_vec(rows, cols, w.to_vec()).expect("length matches"))?;
        *out = Box::into_raw(Box::new(TlPacked(pack_ternary(&m, &path.0)?)));
        Ok(())
    })
}

/// Loads packed weights from PLTW bytes.
///
/// # Safety
/// `data` must point to `len` bytes; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_packed_from_bytes(data: *const u8, len: usize, out: *mut *mut TlPacked) -> TlStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let bytes = slice_in(data, len, "data")?;
        *out = Box::into_raw(Box::new(TlPacked(decode_packed(bytes)?)));
        Ok(())
    })
}

/// Serializes packed weights to PLTW bytes.
///
/// # Safety
/// `packed` must be live and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_packed_to_bytes(packed: *const TlPacked, out: *mut TlBytes) -> TlStatus {
    guard(|| {
        let packed = packed.as_ref().ok_or_else(|| null("packed"))?;
        let out = out_ptr(out, "out")?;
        *out = into_bytes(encode_packed(&packed.0));
        Ok(())
    })
}

/// Writes the matrix dimensions of a packed stream.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tl_packed_shape(packed: *const TlPacked, rows: *mut usize, cols: *mut usize) -> TlStatus {
    guard(|| {
        let packed = packed.as_ref().ok_or_else(|| null("packed"))?;
        *out_ptr(rows, "rows")? = packed.0.rows;
        *out_ptr(cols, "cols")? = packed.0.cols;
        Ok(())
    })
}

/// # Safety
/// `packed` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tl_packed_free(packed: *mut TlPacked) {
    if !packed.is_null() {
        drop(Box::from_raw(packed));
    }
}

/// `y = W·x` with W the packed M×K matrix and x a row-major K×N matrix of signed 8-bit-range
/// values. `y` receives M×N row-major results. `census` may be null. With `check` set the
/// result is compared to a naive GEMM and `TL_STATUS_MISMATCH` returned on any difference.
///
/// # Safety
/// `x` must hold `k * n` values, `y` room for `m * n`; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn tl_gemm(
    packed: *const TlPacked,
    path: *const TlPath,
    mode: TlExecMode,
    x: *const i32,
    k: usize,
    n: usize,
    y: *mut i32,
    census: *mut TlCensus,
    check: bool,
) -> TlStatus {
    guard(|| {
        let packed = packed.as_ref().ok_or_else(|| null("packed"))?;
        let path = path.as_ref().ok_or_else(|| null("path"))?;
        let stream = &packed.0;
        if k != stream.cols {
            return Err(Failure(
                TlStatus::Validation,
                format!("activations have {k} rows, weights {} columns", stream.cols),
            ));
        }
        let xs = slice_in(x, checked_len(k, n)?, "x")?;
        let total = checked_len(stream.rows, n)?;
        if y.is_null() && total > 0 {
            return Err(null("y"));
        }
        let x = ActivationMatrix::int8(Matrix::from_vec(k, n, xs.to_vec()).expect("length matches"))?;
        let result: GemmResult = match mode {
            TlExecMode::Ternary => mpgemm_ternary(stream, &x, &path.0)?,
            TlExecMode::Bitserial => {
                let w = unpack_ternary(stream, &path.0)?.matrix;
                let base = ChunkConfig::binary_default();
                let cfg = ChunkConfig::new(LutMode::Binary, base.c(), path.0.config.pipeline_depth())?;
                mpgemm_bitserial(&decompose_sign_split(&w), &x, &generate_path(&cfg)?)?
            }
        };
        if check {
            let w = unpack_ternary(stream, &path.0)?.matrix.as_matrix().map(i32::from);
            if naive_gemm(&w, &x)?.output != result.output {
                return Err(Failure(TlStatus::Mismatch, "LUT GEMM differs from the naive GEMM".into()));
            }
        }
        if total > 0 {
            slice::from_raw_parts_mut(y, total).copy_from_slice(result.output.data());
        }
        if let Some(c) = census.as_mut() {
            *c = TlCensus {
                construct_adds: result.census.construct_adds,
                queries: result.census.queries,
                merge_adds: result.census.merge_adds,
                reduce_adds: result.census.reduce_adds,
            };
        }
        Ok(())
    })
}

/// Simulates every BitLinear kernel of one block of `model` and returns the report as a
/// JSON string (free with [`tl_string_free`]). `config_json` and `schedule_json` may be null
/// for the defaults.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_simulate(
    config_json: *const c_char,
    schedule_json: *const c_char,
    model: *const c_char,
    stage: TlStage,
    mode: TlExecMode,
    out: *mut *mut c_char,
) -> TlStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let text = |p: *const c_char, what: &str| -> Result<Option<String>, Failure> {
            if p.is_null() {
                return Ok(None);
            }
            CStr::from_ptr(p)
                .to_str()
                .map(|s| Some(s.to_owned()))
                .map_err(|_| Failure(TlStatus::Validation, format!("{what} is not UTF-8")))
        };
        let cfg = match text(config_json, "config")? {
            Some(t) => HardwareConfig::from_json(&t)?,
            None => HardwareConfig::default(),
        };
        let mode = match mode {
            TlExecMode::Ternary => ExecMode::Ternary,
            TlExecMode::Bitserial => ExecMode::BitSerial { planes: 2 },
        };
        let schedule = match text(schedule_json, "schedule")? {
            Some(t) => TileSchedule::from_json(&t)?,
            None => TileSchedule::default_for(&cfg, mode),
        };
        let model = text(model, "model")?.ok_or_else(|| null("model"))?;
        let stage = match stage {
            TlStage::Prefill => Stage::Prefill,
            TlStage::Decode => Stage::Decode,
        };
        let report = simulate_model(&cfg, &schedule, &Catalog::default(), &model, stage, mode)?;
        let json = serde_json::to_string(&report).expect("report serializes");
        *out = CString::new(json).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn into_bytes(v: Vec<u8>) -> TlBytes {
    let boxed = v.into_boxed_slice();
    let len = boxed.len();
    TlBytes {
        data: Box::into_raw(boxed) as *mut u8,
        len,
    }
}

/// # Safety
/// `bytes` must have been filled by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tl_bytes_free(bytes: TlBytes) {
    if !bytes.data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(bytes.data, bytes.len)));
    }
}

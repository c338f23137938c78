//! C ABI over the `trsc` simulator.
//!
//! Every function returns a [`TrscStatus`]. On failure the message is kept
//! per thread and can be fetched with [`trsc_last_error`]. Engines are opaque
//! handles created by `trsc_engine_new*` and released with
//! [`trsc_engine_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use trsc::config::load_config;
use trsc::{encode_sn, encode_un, mul_reference, BinaryOperand, CostLedger, Error, MacConfig, MacEngine, Term};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrscStatus {
    Ok = 0,
    NullPointer = 1,
    OutOfRange = 2,
    Config = 3,
    Input = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Engine handle. Not safe to share between threads without locking.
pub struct TrscEngine {
    inner: MacEngine,
}

/// Cost summary of one operation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TrscCost {
    pub cycles: u64,
    pub energy_pj: f64,
    /// Output logic energy.
    pub e_c_pj: f64,
    /// Shift, write, TR and read energy.
    pub e_r_pj: f64,
    /// Adder energy.
    pub e_a_pj: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TrscMulResult {
    pub count: u64,
    pub segments: u64,
    pub cost: TrscCost,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TrscDotResult {
    pub value: i64,
    pub positive: u64,
    pub negative: u64,
    pub segments: u64,
    pub rounds: u64,
    pub cost: TrscCost,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TrscStatus {
    match e {
        Error::WidthOutOfRange(_)
        | Error::ValueOutOfRange { .. }
        | Error::IndexOutOfRange { .. }
        | Error::SegExpOutOfRange { .. } => TrscStatus::OutOfRange,
        Error::Config(_) | Error::BadParallelism(_) => TrscStatus::Config,
        _ => TrscStatus::Input,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (TrscStatus, String)>) -> TrscStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TrscStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            TrscStatus::Panic
        }
    }
}

trait Lift<T> {
    fn lift(self) -> Result<T, (TrscStatus, String)>;
}

impl<T> Lift<T> for trsc::Result<T> {
    fn lift(self) -> Result<T, (TrscStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (TrscStatus, String) {
    (TrscStatus::NullPointer, format!("{what} is null"))
}

fn cost(l: &CostLedger) -> TrscCost {
    TrscCost { cycles: l.cycles(), energy_pj: l.energy_pj(), e_c_pj: l.e_c(), e_r_pj: l.e_r(), e_a_pj: l.e_a() }
}

fn make(cfg: MacConfig, out: *mut *mut TrscEngine) -> Result<(), (TrscStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    let inner = MacEngine::new(cfg).lift()?;
    // SAFETY: checked non-null above; caller provides writable storage.
    unsafe { *out = Box::into_raw(Box::new(TrscEngine { inner })) };
    Ok(())
}

/// Creates an engine with default accounting.
///
/// `parallelism` must be a power of two in 4..=64 and below `2^width`.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn trsc_engine_new(
    width: u32,
    parallelism: u32,
    seed_compressed: bool,
    signed_mode: bool,
    out: *mut *mut TrscEngine,
) -> TrscStatus {
    guard(|| {
        let mut cfg = MacConfig::new(width, parallelism).lift()?;
        cfg.seed_compressed = seed_compressed;
        cfg.signed = signed_mode;
        make(cfg, out)
    })
}

/// Creates an engine from a `key = value` configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn trsc_engine_from_config(
    path: *const c_char,
    out: *mut *mut TrscEngine,
) -> TrscStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (TrscStatus::Input, "path is not UTF-8".to_string()))?;
        let cfg = load_config(Path::new(p)).map_err(|e| match e {
            Error::Io(m) => (TrscStatus::Config, m),
            e => (TrscStatus::Config, e.to_string()),
        })?;
        make(cfg, out)
    })
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `engine` must come from `trsc_engine_new*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn trsc_engine_free(engine: *mut TrscEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Multiplies `a` by `b` through the racetrack pipeline.
///
/// # Safety
/// `engine` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn trsc_multiply(
    engine: *mut TrscEngine,
    a: u32,
    b: u32,
    out: *mut TrscMulResult,
) -> TrscStatus {
    guard(|| {
        let e = engine.as_mut().ok_or_else(|| null("engine"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let w = e.inner.config().width;
        let (x, y) = (BinaryOperand::new(a, w).lift()?, BinaryOperand::new(b, w).lift()?);
        let r = if e.inner.config().seed_compressed {
            e.inner.multiply_seed_compressed(x, y)
        } else {
            e.inner.multiply(x, y)
        }
        .lift()?;
        *out = TrscMulResult { count: r.count, segments: r.segments_emitted, cost: cost(&r.ledger) };
        Ok(())
    })
}

/// Dot product of `len` pairs. `signs` may be null for all-positive terms;
/// otherwise each entry is `1` or `-1` and the engine must be signed.
///
/// # Safety
/// `a` and `b` (and `signs` when non-null) must point to `len` elements.
#[no_mangle]
pub unsafe extern "C" fn trsc_dot_product(
    engine: *mut TrscEngine,
    a: *const u32,
    b: *const u32,
    signs: *const i8,
    len: usize,
    out: *mut TrscDotResult,
) -> TrscStatus {
    guard(|| {
        let e = engine.as_mut().ok_or_else(|| null("engine"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if len > 0 && (a.is_null() || b.is_null()) {
            return Err(null("operand array"));
        }
        let terms: Vec<Term> = (0..len)
            .map(|i| {
                let s = if signs.is_null() { 1 } else { *signs.add(i) };
                Term::signed(*a.add(i), *b.add(i), s)
            })
            .collect();
        let r = e.inner.dot_product(&terms).lift()?;
        *out = TrscDotResult {
            value: r.value,
            positive: r.positive,
            negative: r.negative,
            segments: r.segments_emitted,
            rounds: r.rounds,
            cost: cost(&r.ledger),
        };
        Ok(())
    })
}

/// Same as [`trsc_dot_product`] but on the bit-serial counter baseline.
///
/// # Safety
/// As for [`trsc_dot_product`].
#[no_mangle]
pub unsafe extern "C" fn trsc_baseline_dot(
    engine: *const TrscEngine,
    a: *const u32,
    b: *const u32,
    len: usize,
    out: *mut TrscDotResult,
) -> TrscStatus {
    guard(|| {
        let e = engine.as_ref().ok_or_else(|| null("engine"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if len > 0 && (a.is_null() || b.is_null()) {
            return Err(null("operand array"));
        }
        let terms: Vec<Term> = (0..len).map(|i| Term::new(*a.add(i), *b.add(i))).collect();
        let r = e.inner.baseline_apc_dot(&terms).lift()?;
        *out = TrscDotResult {
            value: r.value,
            positive: r.positive,
            negative: r.negative,
            segments: r.segments_emitted,
            rounds: r.rounds,
            cost: cost(&r.ledger),
        };
        Ok(())
    })
}

/// Writes the `2^width` bits of the SN (or UN when `unary`) of `value` as
/// 0/1 bytes. `buf_len` must be at least `2^width`.
///
/// # Safety
/// `buf` must be valid for `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn trsc_encode(
    width: u32,
    value: u32,
    unary: bool,
    buf: *mut u8,
    buf_len: usize,
) -> TrscStatus {
    guard(|| {
        let op = BinaryOperand::new(value, width).lift()?;
        let bits = if unary { encode_un(op).bits } else { encode_sn(op).bits };
        if buf.is_null() {
            return Err(null("buf"));
        }
        if buf_len < bits.len() {
            return Err((TrscStatus::BufferTooSmall, format!("need {} bytes, got {buf_len}", bits.len())));
        }
        let dst = std::slice::from_raw_parts_mut(buf, bits.len());
        for (d, bit) in dst.iter_mut().zip(bits.iter()) {
            *d = u8::from(bit);
        }
        Ok(())
    })
}

/// Exact `popcount(SN(a) & UN(b))`.
///
/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn trsc_mul_reference(width: u32, a: u32, b: u32, out: *mut u64) -> TrscStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let (x, y) = (BinaryOperand::new(a, width).lift()?, BinaryOperand::new(b, width).lift()?);
        *out = mul_reference(x, y).lift()?;
        Ok(())
    })
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn trsc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn trsc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

//! C ABI over the `vintk` library.
//!
//! Every function returns a [`VntkStatus`]; results come back through out-pointers.
//! On failure a message is kept per thread and can be read with [`vntk_last_error`].
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use vintk::archspace::{builtin_space, count_cost, resolve_genotype, sample_genotype, SearchSpaceDef};
use vintk::harness::kendall_tau;
use vintk::metrics::{fnorm_score, mean_score, ncn_score, vintk_score, GramKind, GramMatrix, Metric};
use vintk::search::{ProbeSpec, Scorer};
use vintk::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VntkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numeric = 3,
    Infeasible = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// A search space definition.
pub struct VntkSpace {
    inner: SearchSpaceDef,
}

/// A symmetric kernel Gram matrix.
pub struct VntkGram {
    inner: GramMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> VntkStatus {
    match e {
        Error::Starvation { .. } => VntkStatus::Infeasible,
        Error::Io(_) => VntkStatus::Io,
        e if e.is_numeric() => VntkStatus::Numeric,
        _ => VntkStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (VntkStatus, String)>) -> VntkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            VntkStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            VntkStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (VntkStatus, String)>;
}

impl<T> IntoFfi<T> for vintk::Result<T> {
    fn ffi(self) -> Result<T, (VntkStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (VntkStatus, String) {
    (VntkStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (VntkStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (VntkStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (VntkStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copies `s` plus a NUL terminator into `buf`; `written` receives the length needed (without NUL).
unsafe fn copy_text(s: &str, buf: *mut c_char, len: usize, written: *mut usize) -> Result<(), (VntkStatus, String)> {
    if let Some(w) = written.as_mut() {
        *w = s.len();
    }
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < s.len() + 1 {
        return Err((
            VntkStatus::BufferTooSmall,
            format!("buffer of {len} bytes cannot hold {} bytes plus terminator", s.len()),
        ));
    }
    ptr::copy_nonoverlapping(s.as_ptr() as *const c_char, buf, s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn vntk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vntk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Looks up a built-in space (`pure-vit`, `hybrid`, `pure-vit-msa-only`, `hybrid-msa-only`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `space` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn vntk_space_new(name: *const c_char, space: *mut *mut VntkSpace) -> VntkStatus {
    guard(|| {
        let slot = out(space, "space")?;
        let inner = builtin_space(text(name, "name")?).ffi()?;
        *slot = Box::into_raw(Box::new(VntkSpace { inner }));
        Ok(())
    })
}

/// # Safety
/// `space` must come from [`vntk_space_new`] and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn vntk_space_free(space: *mut VntkSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// # Safety
/// `space` must be a live handle and `cardinality` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn vntk_space_cardinality(space: *const VntkSpace, cardinality: *mut u64) -> VntkStatus {
    guard(|| {
        let s = space.as_ref().ok_or_else(|| null("space"))?;
        *out(cardinality, "cardinality")? = u64::try_from(s.inner.cardinality()).unwrap_or(u64::MAX);
        Ok(())
    })
}

/// Writes the encoding of a seeded uniform sample into `buf`.
///
/// # Safety
/// `space` must be a live handle; `buf` must hold `len` bytes; `written` may be null.
#[no_mangle]
pub unsafe extern "C" fn vntk_space_sample(
    space: *const VntkSpace,
    seed: u64,
    buf: *mut c_char,
    len: usize,
    written: *mut usize,
) -> VntkStatus {
    guard(|| {
        let s = space.as_ref().ok_or_else(|| null("space"))?;
        copy_text(&sample_genotype(&s.inner, seed).to_string(), buf, len, written)
    })
}

/// Parameter and MAC counts of a genotype at the default input size.
///
/// # Safety
/// `genotype` must be NUL-terminated; both out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn vntk_genotype_cost(genotype: *const c_char, params: *mut u64, macs: *mut u64) -> VntkStatus {
    guard(|| {
        let (_, g) = resolve_genotype(text(genotype, "genotype")?).ffi()?;
        let c = count_cost(&g).ffi()?;
        *out(params, "params")? = c.param_count;
        *out(macs, "macs")? = c.mac_count;
        Ok(())
    })
}

fn scorer(seed: u64, probe_size: usize) -> vintk::Result<Scorer> {
    let probe = ProbeSpec {
        size: probe_size,
        seed,
        ..Default::default()
    };
    Scorer::new(&probe, Default::default(), seed)
}

/// Proxy score of a genotype; `metric` is one of `fnorm`, `mean`, `ncn`, `relu`, `vintk`.
///
/// # Safety
/// String arguments must be NUL-terminated; `value` must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn vntk_score_genotype(
    genotype: *const c_char,
    metric: *const c_char,
    seed: u64,
    probe_size: usize,
    value: *mut f64,
) -> VntkStatus {
    guard(|| {
        let (_, g) = resolve_genotype(text(genotype, "genotype")?).ffi()?;
        let m: Metric = text(metric, "metric")?.parse().ffi()?;
        let slot = out(value, "value")?;
        *slot = scorer(seed, probe_size).ffi()?.score(&g, m).ffi()?.value;
        Ok(())
    })
}

/// Empirical NTK Gram of a genotype at initialization over `probe_size` probes.
///
/// # Safety
/// `genotype` must be NUL-terminated; `gram` must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn vntk_ntk_gram(
    genotype: *const c_char,
    seed: u64,
    probe_size: usize,
    gram: *mut *mut VntkGram,
) -> VntkStatus {
    guard(|| {
        let slot = out(gram, "gram")?;
        let (_, g) = resolve_genotype(text(genotype, "genotype")?).ffi()?;
        let inner = scorer(seed, probe_size).ffi()?.ntk_gram(&g).ffi()?;
        *slot = Box::into_raw(Box::new(VntkGram { inner }));
        Ok(())
    })
}

/// Builds a Gram from `n * n` row-major values; they must be symmetric.
///
/// # Safety
/// `data` must point to `n * n` doubles; `gram` must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn vntk_gram_from_data(n: usize, data: *const f64, gram: *mut *mut VntkGram) -> VntkStatus {
    guard(|| {
        let slot = out(gram, "gram")?;
        if data.is_null() {
            return Err(null("data"));
        }
        let values = std::slice::from_raw_parts(data, n * n).to_vec();
        let inner = GramMatrix::new(n, values, GramKind::Custom).ffi()?;
        *slot = Box::into_raw(Box::new(VntkGram { inner }));
        Ok(())
    })
}

/// # Safety
/// `gram` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn vntk_gram_free(gram: *mut VntkGram) {
    if !gram.is_null() {
        drop(Box::from_raw(gram));
    }
}

/// # Safety
/// `gram` must be a live handle and `dim` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn vntk_gram_dim(gram: *const VntkGram, dim: *mut usize) -> VntkStatus {
    guard(|| {
        let g = gram.as_ref().ok_or_else(|| null("gram"))?;
        *out(dim, "dim")? = g.inner.dim();
        Ok(())
    })
}

/// Copies the row-major entries into `buf`, which must hold `dim * dim` doubles.
///
/// # Safety
/// `gram` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vntk_gram_copy(gram: *const VntkGram, buf: *mut f64, len: usize) -> VntkStatus {
    guard(|| {
        let g = gram.as_ref().ok_or_else(|| null("gram"))?;
        let data = g.inner.data();
        if buf.is_null() {
            return Err(null("buffer"));
        }
        if len < data.len() {
            return Err((
                VntkStatus::BufferTooSmall,
                format!("buffer of {len} doubles cannot hold {}", data.len()),
            ));
        }
        ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        Ok(())
    })
}

/// Entrywise product of two Grams of equal size.
///
/// # Safety
/// `a` and `b` must be live handles; `product` must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn vntk_gram_hadamard(
    a: *const VntkGram,
    b: *const VntkGram,
    product: *mut *mut VntkGram,
) -> VntkStatus {
    guard(|| {
        let slot = out(product, "product")?;
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        let b = b.as_ref().ok_or_else(|| null("b"))?;
        let inner = a.inner.hadamard(&b.inner).ffi()?;
        *slot = Box::into_raw(Box::new(VntkGram { inner }));
        Ok(())
    })
}

/// Summarizes a Gram with `fnorm`, `mean`, `ncn` or `vintk` (signed mean of an already-formed product).
///
/// # Safety
/// `gram` must be a live handle; `metric` NUL-terminated; `value` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn vntk_gram_score(gram: *const VntkGram, metric: *const c_char, value: *mut f64) -> VntkStatus {
    guard(|| {
        let g = &gram.as_ref().ok_or_else(|| null("gram"))?.inner;
        let slot = out(value, "value")?;
        let s = match text(metric, "metric")?.parse::<Metric>().ffi()? {
            Metric::Fnorm => fnorm_score(g),
            Metric::Mean => mean_score(g),
            Metric::Ncn => ncn_score(g),
            Metric::Vintk => vintk_score(g),
            Metric::Relu => {
                return Err((
                    VntkStatus::InvalidArgument,
                    "relu is defined on inputs, not on a Gram; use vntk_score_genotype".into(),
                ))
            }
        }
        .ffi()?;
        *slot = s.value;
        Ok(())
    })
}

/// Kendall tau-b and its two-sided p-value for two rankings of length `n`.
///
/// # Safety
/// `x` and `y` must each point to `n` doubles; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn vntk_kendall_tau(
    x: *const f64,
    y: *const f64,
    n: usize,
    tau: *mut f64,
    p_value: *mut f64,
) -> VntkStatus {
    guard(|| {
        if x.is_null() || y.is_null() {
            return Err(null("ranking"));
        }
        let k = kendall_tau(std::slice::from_raw_parts(x, n), std::slice::from_raw_parts(y, n)).ffi()?;
        *out(tau, "tau")? = k.tau;
        *out(p_value, "p_value")? = k.p_value;
        Ok(())
    })
}

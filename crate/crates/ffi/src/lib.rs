//! C ABI over `embdebias`.
//!
//! Every fallible entry point returns an [`EdStatus`]; on failure the message
//! is kept in a thread-local slot readable through [`ed_last_error`].
//! Matrices cross the boundary as row-major `double` buffers. Objects are
//! opaque handles released with the matching `*_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use embdebias::bias::{bias_correlation, fit_lda_direction, BiasDirection};
use embdebias::data::embeddings::{load_embeddings, EmbeddingFormat, EmbeddingTable};
use embdebias::debias::{apply_debias, projector_from_subspace, DebiasOperator};
use embdebias::evaluation::roc_auc;
use embdebias::kernel::{fit_rff, transform_rff, GammaSpec, KernelMap};
use embdebias::linalg::Matrix;
use embdebias::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    DimensionMismatch = 5,
    NonFinite = 6,
    DegenerateMeans = 7,
    SingularScatter = 8,
    RankDeficient = 9,
    InvalidGamma = 10,
    SingleClass = 11,
    Other = 98,
    Panic = 99,
}

impl From<&Error> for EdStatus {
    fn from(e: &Error) -> Self {
        match e.root() {
            Error::Io { .. } => EdStatus::Io,
            Error::Parse { .. } | Error::Format(_) | Error::Json(_) | Error::Csv(_) => EdStatus::Parse,
            Error::Validation { .. } | Error::Config(_) | Error::InsufficientSamples { .. } | Error::ZeroVector => {
                EdStatus::InvalidArgument
            }
            Error::DimensionMismatch { .. } => EdStatus::DimensionMismatch,
            Error::NonFinite { .. } => EdStatus::NonFinite,
            Error::DegenerateMeans { .. } => EdStatus::DegenerateMeans,
            Error::SingularScatter => EdStatus::SingularScatter,
            Error::RankDeficient { .. } => EdStatus::RankDeficient,
            Error::InvalidGamma(_) => EdStatus::InvalidGamma,
            Error::SingleClass => EdStatus::SingleClass,
            _ => EdStatus::Other,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(EdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(EdStatus::from(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(EdStatus::InvalidArgument, msg.into())
}

fn null(name: &str) -> Failure {
    Failure(EdStatus::NullPointer, format!("`{name}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EdStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            EdStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn row_major(p: *const f64, rows: usize, cols: usize, name: &str) -> Result<Matrix, Failure> {
    let len = rows.checked_mul(cols).ok_or_else(|| invalid("buffer size overflows"))?;
    Ok(Matrix::from_row_slice(rows, cols, slice(p, len, name)?))
}

fn write_row_major(m: &Matrix, out: &mut [f64]) {
    let c = m.ncols();
    for i in 0..m.nrows() {
        for j in 0..c {
            out[i * c + j] = m[(i, j)];
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ed_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Unit LDA direction separating the rows of `xa` (`na`×`dim`) from those of
/// `xb` (`nb`×`dim`). Writes `dim` values to `out`.
#[no_mangle]
pub unsafe extern "C" fn ed_lda_fit(
    xa: *const f64,
    na: usize,
    xb: *const f64,
    nb: usize,
    dim: usize,
    shrinkage: f64,
    out: *mut f64,
) -> EdStatus {
    guard(|| {
        let a = row_major(xa, na, dim, "xa")?;
        let b = row_major(xb, nb, dim, "xb")?;
        let out = slice_mut(out, dim, "out")?;
        let w = fit_lda_direction(&a, &b, shrinkage)?;
        out.copy_from_slice(&w.vector);
        Ok(())
    })
}

/// Cosine between a bias direction `w` and a coefficient vector `v`.
#[no_mangle]
pub unsafe extern "C" fn ed_bias_correlation(w: *const f64, v: *const f64, dim: usize, out: *mut f64) -> EdStatus {
    guard(|| {
        let w = BiasDirection::from_vector(slice(w, dim, "w")?.to_vec())?;
        let v = slice(v, dim, "v")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = bias_correlation(&w, v)?;
        Ok(())
    })
}

/// ROC AUC of `scores` against `labels` (non-zero = positive).
#[no_mangle]
pub unsafe extern "C" fn ed_roc_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> EdStatus {
    guard(|| {
        let s = slice(scores, n, "scores")?;
        let l: Vec<bool> = slice(labels, n, "labels")?.iter().map(|&x| x != 0).collect();
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = roc_auc(s, &l)?;
        Ok(())
    })
}

/// Opaque projection operator.
pub struct EdOperator(DebiasOperator);

/// Operator removing the span of `k` directions stored row-major in
/// `directions` (`k`×`dim`).
#[no_mangle]
pub unsafe extern "C" fn ed_operator_from_directions(
    directions: *const f64,
    k: usize,
    dim: usize,
    rel_tol: f64,
    out: *mut *mut EdOperator,
) -> EdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = k.checked_mul(dim).ok_or_else(|| invalid("buffer size overflows"))?;
        let flat = slice(directions, len, "directions")?;
        let dirs = flat
            .chunks(dim.max(1))
            .map(|c| BiasDirection::from_vector(c.to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        let op = projector_from_subspace(&dirs, rel_tol)?;
        *out = Box::into_raw(Box::new(EdOperator(op)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ed_operator_dim(op: *const EdOperator) -> usize {
    op.as_ref().map_or(0, |o| o.0.dim())
}

#[no_mangle]
pub unsafe extern "C" fn ed_operator_rank(op: *const EdOperator) -> usize {
    op.as_ref().map_or(0, |o| o.0.rank())
}

/// Projects the `n` rows of `x` (`n`×dim) in place.
#[no_mangle]
pub unsafe extern "C" fn ed_operator_apply(op: *const EdOperator, x: *mut f64, n: usize) -> EdStatus {
    guard(|| {
        let op = &handle(op, "op")?.0;
        let d = op.dim();
        let len = n.checked_mul(d).ok_or_else(|| invalid("buffer size overflows"))?;
        let buf = slice_mut(x, len, "x")?;
        let m = Matrix::from_row_slice(n, d, buf);
        write_row_major(&apply_debias(op, &m)?, buf);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ed_operator_free(op: *mut EdOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Opaque random Fourier feature map.
pub struct EdKernelMap(KernelMap);

/// Samples a kernel map from `input_dim` to `output_dim` features
/// (`0` gives `4·input_dim`). A `gamma` ≤ 0 selects the median heuristic,
/// which needs `sample` (`n_sample`×`input_dim`).
#[no_mangle]
pub unsafe extern "C" fn ed_kernel_map_new(
    input_dim: usize,
    output_dim: usize,
    gamma: f64,
    seed: u64,
    sample: *const f64,
    n_sample: usize,
    out: *mut *mut EdKernelMap,
) -> EdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = if n_sample > 0 {
            Some(row_major(sample, n_sample, input_dim, "sample")?)
        } else {
            None
        };
        let spec = if gamma > 0.0 {
            GammaSpec::Fixed(gamma)
        } else {
            GammaSpec::default()
        };
        let dprime = (output_dim > 0).then_some(output_dim);
        let map = fit_rff(input_dim, dprime, spec, seed, s.as_ref())?;
        *out = Box::into_raw(Box::new(EdKernelMap(map)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ed_kernel_map_input_dim(map: *const EdKernelMap) -> usize {
    map.as_ref().map_or(0, |m| m.0.input_dim())
}

#[no_mangle]
pub unsafe extern "C" fn ed_kernel_map_output_dim(map: *const EdKernelMap) -> usize {
    map.as_ref().map_or(0, |m| m.0.output_dim())
}

#[no_mangle]
pub unsafe extern "C" fn ed_kernel_map_gamma(map: *const EdKernelMap) -> f64 {
    map.as_ref().map_or(f64::NAN, |m| m.0.gamma())
}

/// Maps `n` rows of `x` (`n`×input_dim) into `out` (`n`×output_dim).
#[no_mangle]
pub unsafe extern "C" fn ed_kernel_map_transform(
    map: *const EdKernelMap,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> EdStatus {
    guard(|| {
        let map = &handle(map, "map")?.0;
        let m = row_major(x, n, map.input_dim(), "x")?;
        let len = n.checked_mul(map.output_dim()).ok_or_else(|| invalid("buffer size overflows"))?;
        let out = slice_mut(out, len, "out")?;
        write_row_major(&transform_rff(map, &m)?, out);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ed_kernel_map_free(map: *mut EdKernelMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Opaque embedding table.
pub struct EdEmbeddings {
    table: EmbeddingTable,
    ids: Vec<CString>,
}

/// Loads an embedding file. `format`: 0 infers from the extension, 1 binary,
/// 2 CSV.
#[no_mangle]
pub unsafe extern "C" fn ed_embeddings_load(
    path: *const c_char,
    format: u32,
    out: *mut *mut EdEmbeddings,
) -> EdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| invalid("path is not valid UTF-8"))?;
        let fmt = match format {
            0 => EmbeddingFormat::from_path(path.as_ref()),
            1 => EmbeddingFormat::Binary,
            2 => EmbeddingFormat::Csv,
            f => return Err(invalid(format!("unknown format code {f}"))),
        };
        let table = load_embeddings(path, fmt)?;
        let ids = table
            .rows()
            .iter()
            .map(|r| CString::new(r.clip_id.as_str()).map_err(|_| invalid("clip id contains NUL")))
            .collect::<Result<_, _>>()?;
        *out = Box::into_raw(Box::new(EdEmbeddings { table, ids }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ed_embeddings_rows(t: *const EdEmbeddings) -> usize {
    t.as_ref().map_or(0, |t| t.table.len())
}

#[no_mangle]
pub unsafe extern "C" fn ed_embeddings_dim(t: *const EdEmbeddings) -> usize {
    t.as_ref().map_or(0, |t| t.table.dim())
}

/// Clip id of row `i`, or null when out of range. Owned by the table.
#[no_mangle]
pub unsafe extern "C" fn ed_embeddings_clip_id(t: *const EdEmbeddings, i: usize) -> *const c_char {
    t.as_ref()
        .and_then(|t| t.ids.get(i))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Frame index of row `i`, or `u32::MAX` when out of range.
#[no_mangle]
pub unsafe extern "C" fn ed_embeddings_frame(t: *const EdEmbeddings, i: usize) -> u32 {
    t.as_ref()
        .and_then(|t| t.table.rows().get(i))
        .map_or(u32::MAX, |r| r.frame_index)
}

/// Copies all vectors row-major into `out`, which must hold rows×dim values.
#[no_mangle]
pub unsafe extern "C" fn ed_embeddings_copy(t: *const EdEmbeddings, out: *mut f64, len: usize) -> EdStatus {
    guard(|| {
        let t = &handle(t, "table")?.table;
        let need = t.len() * t.dim();
        if len < need {
            return Err(Failure(
                EdStatus::DimensionMismatch,
                format!("output holds {len} values, need {need}"),
            ));
        }
        let out = slice_mut(out, need, "out")?;
        for (chunk, row) in out.chunks_mut(t.dim().max(1)).zip(t.rows()) {
            chunk.copy_from_slice(&row.vector);
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ed_embeddings_free(t: *mut EdEmbeddings) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

//! C ABI over the descriptor pipeline and trained checkpoints.
//!
//! Every fallible call returns a [`DgStatus`]; on failure a message is kept
//! per thread and can be read with [`dg_last_error_message`]. Objects are
//! opaque and owned by the caller once returned, who releases them with the
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use deepgraph::checkpoint::Checkpoint;
use deepgraph::commands::{load_stats, RunDir};
use deepgraph::descriptor::{compute_hks, fit_stats, histogram_descriptor, DescriptorStats, DiffusionSteps, HksMatrix, PixelStats};
use deepgraph::error::Error;
use deepgraph::graph::Graph;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    Format = 5,
    Provenance = 6,
    Panic = 7,
}

pub struct DgGraph(Graph);

pub struct DgHks(HksMatrix);

/// Descriptor statistics: HKS moments, bin count, and pixel moments when
/// loaded from a run directory.
pub struct DgStats {
    hks: DescriptorStats,
    n_bins: usize,
    pixel: Option<PixelStats>,
}

pub struct DgModel(Checkpoint);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> DgStatus {
    match e {
        Error::Io(_) => DgStatus::Io,
        Error::Format { .. } | Error::Parse { .. } => DgStatus::Format,
        Error::Provenance(_) => DgStatus::Provenance,
        e if e.is_numerical() => DgStatus::Numerical,
        _ => DgStatus::InvalidArgument,
    }
}

fn fail(status: DgStatus, msg: impl Into<String>) -> DgStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), DgStatus>) -> DgStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DgStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(DgStatus::Panic, "internal panic"),
    }
}

fn check<T>(r: deepgraph::error::Result<T>) -> Result<T, DgStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), DgStatus> {
    if p.is_null() {
        Err(fail(DgStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, DgStatus> {
    non_null(p, "path")?;
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| fail(DgStatus::InvalidArgument, "path is not UTF-8"))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], DgStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn dg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds an undirected simple graph on `n_nodes` nodes from `n_edges`
/// pairs `(src[i], dst[i])`.
///
/// # Safety
/// `src` and `dst` must point to `n_edges` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dg_graph_from_edges(
    n_nodes: usize,
    src: *const usize,
    dst: *const usize,
    n_edges: usize,
    out: *mut *mut DgGraph,
) -> DgStatus {
    guard(|| {
        non_null(out, "out")?;
        let src = slice_arg(src, n_edges, "src")?;
        let dst = slice_arg(dst, n_edges, "dst")?;
        let g = check(Graph::from_edges(n_nodes, src.iter().copied().zip(dst.iter().copied())))?;
        put(out, DgGraph(g));
        Ok(())
    })
}

/// # Safety
/// `g` must be null or come from this library and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn dg_graph_free(g: *mut DgGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live graph; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dg_graph_size(g: *const DgGraph, n_nodes: *mut usize, n_edges: *mut usize) -> DgStatus {
    guard(|| {
        non_null(g, "graph")?;
        non_null(n_nodes, "n_nodes")?;
        non_null(n_edges, "n_edges")?;
        *n_nodes = (*g).0.node_count();
        *n_edges = (*g).0.edge_count();
        Ok(())
    })
}

/// Induced subgraph on the nodes within `k` hops of `center`.
///
/// # Safety
/// `g` must be a live graph and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dg_graph_ego_net(g: *const DgGraph, center: usize, k: usize, out: *mut *mut DgGraph) -> DgStatus {
    guard(|| {
        non_null(g, "graph")?;
        non_null(out, "out")?;
        let ego = check((*g).0.k_hop_ego_net(center, k))?;
        put(out, DgGraph(ego));
        Ok(())
    })
}

/// Heat kernel signature at `n_steps` log-spaced times from `t_first` to
/// `t_last`. `max_eigenpairs` of 0 uses the full spectrum.
///
/// # Safety
/// `g` must be a live graph and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dg_hks_compute(
    g: *const DgGraph,
    t_first: f64,
    t_last: f64,
    n_steps: usize,
    max_eigenpairs: usize,
    out: *mut *mut DgHks,
) -> DgStatus {
    guard(|| {
        non_null(g, "graph")?;
        non_null(out, "out")?;
        let steps = check(DiffusionSteps::new(t_first, t_last, n_steps))?;
        let max = (max_eigenpairs > 0).then_some(max_eigenpairs);
        let h = check(compute_hks(&(*g).0, &steps, max))?;
        put(out, DgHks(h));
        Ok(())
    })
}

/// Copies the node-by-step matrix row-major into `buf`, which must hold
/// `rows * cols` values (see [`dg_hks_shape`]).
///
/// # Safety
/// `h` must be live and `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn dg_hks_copy(h: *const DgHks, buf: *mut f64, len: usize) -> DgStatus {
    guard(|| {
        non_null(h, "hks")?;
        let data = (*h).0.as_slice();
        if len != data.len() {
            return Err(fail(DgStatus::InvalidArgument, format!("buffer holds {len} values, need {}", data.len())));
        }
        non_null(buf, "buf")?;
        ptr::copy_nonoverlapping(data.as_ptr(), buf, len);
        Ok(())
    })
}

/// # Safety
/// `h` must be live; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dg_hks_shape(h: *const DgHks, rows: *mut usize, cols: *mut usize) -> DgStatus {
    guard(|| {
        non_null(h, "hks")?;
        non_null(rows, "rows")?;
        non_null(cols, "cols")?;
        *rows = (*h).0.rows();
        *cols = (*h).0.cols();
        Ok(())
    })
}

/// # Safety
/// `h` must be null or come from this library and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn dg_hks_free(h: *mut DgHks) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Fits per-step statistics on `count` training signatures. The result
/// has no pixel statistics, so descriptors built from it are raw.
///
/// # Safety
/// `hks` must point to `count` live signatures; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dg_stats_fit(hks: *const *const DgHks, count: usize, n_bins: usize, out: *mut *mut DgStats) -> DgStatus {
    guard(|| {
        non_null(out, "out")?;
        let hs = slice_arg(hks, count, "hks")?;
        let mut refs = Vec::with_capacity(count);
        for &h in hs {
            non_null(h, "hks entry")?;
            refs.push(&(*h).0);
        }
        if n_bins == 0 {
            return Err(fail(DgStatus::InvalidArgument, "n_bins must be positive"));
        }
        let stats = check(fit_stats(refs))?;
        put(out, DgStats { hks: stats, n_bins, pixel: None });
        Ok(())
    })
}

/// Loads the statistics written by `describe` into the run directory
/// `dir`, checking that they belong to its training split.
///
/// # Safety
/// `dir` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dg_stats_load(dir: *const c_char, out: *mut *mut DgStats) -> DgStatus {
    guard(|| {
        non_null(out, "out")?;
        let dir = path_arg(dir)?;
        let (file, _) = check(load_stats(&RunDir::new(dir)))?;
        let hks = check(file.descriptor_stats())?;
        put(out, DgStats { hks, n_bins: file.descriptor.n_bins, pixel: Some(file.pixel_stats()) });
        Ok(())
    })
}

/// Bin and step counts of the descriptors these statistics produce.
///
/// # Safety
/// `s` must be live; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dg_stats_shape(s: *const DgStats, n_bins: *mut usize, n_steps: *mut usize) -> DgStatus {
    guard(|| {
        non_null(s, "stats")?;
        non_null(n_bins, "n_bins")?;
        non_null(n_steps, "n_steps")?;
        *n_bins = (*s).n_bins;
        *n_steps = (*s).hks.len();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or come from this library and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn dg_stats_free(s: *mut DgStats) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Writes the `n_bins * n_steps` descriptor of `h` row-major (bins by
/// steps) into `buf`. With `normalize` nonzero the pixel statistics are
/// applied, which requires statistics from [`dg_stats_load`].
///
/// # Safety
/// `h` and `s` must be live; `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn dg_descriptor_compute(
    h: *const DgHks,
    s: *const DgStats,
    normalize: i32,
    buf: *mut f64,
    len: usize,
) -> DgStatus {
    guard(|| {
        non_null(h, "hks")?;
        non_null(s, "stats")?;
        let s = &*s;
        let d = check(histogram_descriptor(&(*h).0, &s.hks, s.n_bins))?;
        let values = if normalize != 0 {
            let pixel = s.pixel.as_ref().ok_or_else(|| {
                fail(DgStatus::InvalidArgument, "these statistics carry no pixel moments; load them from a run directory")
            })?;
            check(pixel.normalize(&d))?
        } else {
            d.into_vec()
        };
        if len != values.len() {
            return Err(fail(DgStatus::InvalidArgument, format!("buffer holds {len} values, need {}", values.len())));
        }
        non_null(buf, "buf")?;
        ptr::copy_nonoverlapping(values.as_ptr(), buf, len);
        Ok(())
    })
}

/// Loads a checkpoint written by `train`.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dg_model_load(path: *const c_char, out: *mut *mut DgModel) -> DgStatus {
    guard(|| {
        non_null(out, "out")?;
        let ck = check(Checkpoint::load(path_arg(path)?))?;
        put(out, DgModel(ck));
        Ok(())
    })
}

/// Length of one input row.
///
/// # Safety
/// `m` must be live and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn dg_model_input_len(m: *const DgModel, len: *mut usize) -> DgStatus {
    guard(|| {
        non_null(m, "model")?;
        non_null(len, "len")?;
        *len = (*m).0.input_len();
        Ok(())
    })
}

/// Predicts `n_rows` scaled labels from row-major inputs of
/// `n_rows * input_len` values.
///
/// # Safety
/// `m` must be live, `inputs` must hold `n_rows * input_len` values and
/// `out` must have room for `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn dg_model_predict(m: *const DgModel, inputs: *const f64, n_rows: usize, out: *mut f64) -> DgStatus {
    guard(|| {
        non_null(m, "model")?;
        let width = (*m).0.input_len();
        let x = slice_arg(inputs, n_rows * width, "inputs")?;
        let rows: Vec<&[f64]> = x.chunks(width.max(1)).take(n_rows).collect();
        let pred = check((*m).0.predict_many(&rows))?;
        let out = slice_arg(out as *const f64, n_rows, "out")?.as_ptr() as *mut f64;
        ptr::copy_nonoverlapping(pred.as_ptr(), out, n_rows);
        Ok(())
    })
}

/// # Safety
/// `m` must be null or come from this library and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn dg_model_free(m: *mut DgModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

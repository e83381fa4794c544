//! C ABI for treeweave.
//!
//! Two opaque handles: `TwGraph` (a contracted physical graph) and
//! `TwTrace` (the round records of a scenario batch). Every fallible call
//! returns a `TwStatus`; on failure a message is kept per thread and can be
//! read with `tw_last_error_message`. Handles are freed with their
//! `*_free` function; passing NULL to a free function is a no-op.
//!
//! The header is generated by cbindgen into `include/treeweave.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use treeweave::churn::{run_batch, Adversary, ScenarioConfig};
use treeweave::pairing::{contract_using, Pairing, RootLinks};
use treeweave::report::{write_trace_csv, Phase, RoundTrace};
use treeweave::rng::rng_from_seed;
use treeweave::spectral::lambda2;
use treeweave::{Error, PhysicalGraph, VirtualTree};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwStatus {
    Ok = 0,
    NullArgument = 1,
    /// Invalid argument value (non power-of-two size, bad fraction, ...).
    Domain = 2,
    /// Input too large for an exhaustive routine.
    Capacity = 3,
    /// Eigensolver ran out of iterations.
    Solver = 4,
    /// A churn scenario could not continue.
    Scenario = 5,
    /// Index past the end, or an output buffer that is too small.
    OutOfRange = 6,
    Io = 7,
    /// Internal bug; the handle involved should be considered poisoned.
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwAdversary {
    HighestH = 0,
    Random = 1,
    LowestH = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwRootLinks {
    PrimaryOnly = 0,
    Shared = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwPhase {
    Join = 0,
    Leave = 1,
    BalanceMix = 2,
    Mix = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwScenarioConfig {
    pub initial_leaves: u32,
    pub total_rounds: u32,
    pub churn_fraction: f64,
    pub cycle_length: u32,
    pub mix_rounds_per_balance_round: u32,
    pub seed: u64,
    pub runs: u32,
    pub adversary: TwAdversary,
    pub root_links: TwRootLinks,
    pub tolerance: f64,
    /// Worker threads; 0 means one.
    pub jobs: u32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwRoundRecord {
    pub run: u32,
    pub round: u32,
    pub phase: TwPhase,
    pub population: u32,
    pub lambda2: f64,
    pub swaps: u32,
    pub disconnected: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TwExpansion {
    pub numerator: u64,
    pub denominator: u64,
    pub boundary_size: u32,
    /// Number of vertices in the minimizing set.
    pub witness_len: u32,
}

/// Opaque contracted graph.
pub struct TwGraph {
    graph: PhysicalGraph,
}

/// Opaque batch of round records.
pub struct TwTrace {
    records: Vec<RoundTrace>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: TwStatus, msg: impl Into<String>) -> TwStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> TwStatus {
    let status = match e {
        Error::Domain(_) => TwStatus::Domain,
        Error::Capacity { .. } => TwStatus::Capacity,
        Error::Solver { .. } => TwStatus::Solver,
        Error::Scenario(_) => TwStatus::Scenario,
    };
    fail(status, e.to_string())
}

// Runs `f`, turning panics into TwStatus::Panic. Clears the last error on
// success.
fn guard(f: impl FnOnce() -> TwStatus) -> TwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(TwStatus::Ok) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TwStatus::Ok
        }
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(TwStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(TwStatus::NullArgument, concat!("`", stringify!($p), "` is NULL"));
        })+
    };
}

impl From<TwRootLinks> for RootLinks {
    fn from(l: TwRootLinks) -> Self {
        match l {
            TwRootLinks::PrimaryOnly => RootLinks::PrimaryOnly,
            TwRootLinks::Shared => RootLinks::Shared,
        }
    }
}

impl From<RootLinks> for TwRootLinks {
    fn from(l: RootLinks) -> Self {
        match l {
            RootLinks::PrimaryOnly => TwRootLinks::PrimaryOnly,
            RootLinks::Shared => TwRootLinks::Shared,
        }
    }
}

impl From<TwAdversary> for Adversary {
    fn from(a: TwAdversary) -> Self {
        match a {
            TwAdversary::HighestH => Adversary::HighestH,
            TwAdversary::Random => Adversary::Random,
            TwAdversary::LowestH => Adversary::LowestH,
        }
    }
}

impl From<Adversary> for TwAdversary {
    fn from(a: Adversary) -> Self {
        match a {
            Adversary::HighestH => TwAdversary::HighestH,
            Adversary::Random => TwAdversary::Random,
            Adversary::LowestH => TwAdversary::LowestH,
        }
    }
}

fn phase(p: Phase) -> TwPhase {
    match p {
        Phase::Join => TwPhase::Join,
        Phase::Leave => TwPhase::Leave,
        Phase::BalanceMix => TwPhase::BalanceMix,
        Phase::Mix => TwPhase::Mix,
    }
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len` bytes) and returns the full message
/// length plus one. Returns 0 when there is no pending error. `buf` may be
/// NULL to query the length.
///
/// # Safety
/// `buf` must be NULL or valid for `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn tw_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            // SAFETY: caller provides `len` writable bytes at `buf`.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fills `out` with the default scenario (512 leaves, 100 rounds, no
/// churn, cycle 7, seed 1, one run).
///
/// # Safety
/// `out` must be NULL or point to writable memory for one config.
#[no_mangle]
pub unsafe extern "C" fn tw_scenario_config_default(out: *mut TwScenarioConfig) -> TwStatus {
    non_null!(out);
    let d = ScenarioConfig::default();
    let c = TwScenarioConfig {
        initial_leaves: d.initial_leaves as u32,
        total_rounds: d.total_rounds as u32,
        churn_fraction: d.churn_fraction,
        cycle_length: d.cycle_length as u32,
        mix_rounds_per_balance_round: d.mix_rounds_per_balance_round as u32,
        seed: d.seed,
        runs: d.runs as u32,
        adversary: d.adversary.into(),
        root_links: d.root_links.into(),
        tolerance: d.tolerance,
        jobs: 1,
    };
    // SAFETY: checked non-null; caller guarantees validity.
    unsafe { out.write(c) };
    TwStatus::Ok
}

fn build_graph(leaves: u32, links: TwRootLinks, random_seed: Option<u64>) -> Result<TwGraph, Error> {
    let tree = VirtualTree::build_complete(leaves as usize)?;
    let pairing = match random_seed {
        Some(seed) => Pairing::random(&tree, &mut rng_from_seed(seed)),
        None => Pairing::canonical(&tree),
    };
    Ok(TwGraph {
        graph: contract_using(&tree, &pairing, links.into())?,
    })
}

unsafe fn emit_graph(built: Result<TwGraph, Error>, out: *mut *mut TwGraph) -> TwStatus {
    match built {
        Ok(g) => {
            // SAFETY: caller checked `out`.
            unsafe { out.write(Box::into_raw(Box::new(g))) };
            TwStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Contracts a complete tree of `leaves` leaves under a uniform random
/// pairing drawn from `seed`. Vertex labels are the leaves' node ids.
///
/// # Safety
/// `out` must be NULL or valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn tw_graph_random(leaves: u32, seed: u64, links: TwRootLinks, out: *mut *mut TwGraph) -> TwStatus {
    non_null!(out);
    // SAFETY: `out` checked above.
    guard(|| unsafe { emit_graph(build_graph(leaves, links, Some(seed)), out) })
}

/// Contracts a complete tree under the canonical (in-order) pairing.
///
/// # Safety
/// `out` must be NULL or valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn tw_graph_canonical(leaves: u32, links: TwRootLinks, out: *mut *mut TwGraph) -> TwStatus {
    non_null!(out);
    // SAFETY: `out` checked above.
    guard(|| unsafe { emit_graph(build_graph(leaves, links, None), out) })
}

/// # Safety
/// `graph` must be NULL or a handle from `tw_graph_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tw_graph_free(graph: *mut TwGraph) {
    if !graph.is_null() {
        // SAFETY: handle was created by Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(graph) });
    }
}

/// # Safety
/// `graph` must be a live handle; `vertices` and `edges` must each be NULL
/// or writable.
#[no_mangle]
pub unsafe extern "C" fn tw_graph_size(graph: *const TwGraph, vertices: *mut usize, edges: *mut usize) -> TwStatus {
    non_null!(graph);
    // SAFETY: live handle per contract.
    let g = unsafe { &(*graph).graph };
    if !vertices.is_null() {
        // SAFETY: non-null, writable per contract.
        unsafe { vertices.write(g.num_vertices()) };
    }
    if !edges.is_null() {
        // SAFETY: as above.
        unsafe { edges.write(g.num_edges()) };
    }
    TwStatus::Ok
}

/// Writes edges as label pairs `(u, v)`, `u < v`, into `pairs` (2 entries
/// per edge). Fails with `OutOfRange` if `cap` (in edges) is too small;
/// `written` always receives the number of edges.
///
/// # Safety
/// `graph` must be a live handle, `pairs` valid for `2 * cap` writes,
/// `written` writable.
#[no_mangle]
pub unsafe extern "C" fn tw_graph_edges(
    graph: *const TwGraph,
    pairs: *mut u32,
    cap: usize,
    written: *mut usize,
) -> TwStatus {
    non_null!(graph, written);
    // SAFETY: live handle per contract.
    let g = unsafe { &(*graph).graph };
    let edges = g.edges();
    // SAFETY: writable per contract.
    unsafe { written.write(edges.len()) };
    if edges.len() > cap {
        return fail(
            TwStatus::OutOfRange,
            format!("edge buffer holds {cap} edges, graph has {}", edges.len()),
        );
    }
    if edges.is_empty() {
        return TwStatus::Ok;
    }
    non_null!(pairs);
    for (i, (a, b)) in edges.into_iter().enumerate() {
        let (x, y) = (g.label(a), g.label(b));
        // SAFETY: i < cap, and the buffer holds 2 * cap entries.
        unsafe {
            pairs.add(2 * i).write(x.min(y));
            pairs.add(2 * i + 1).write(x.max(y));
        }
    }
    TwStatus::Ok
}

/// Second-smallest Laplacian eigenvalue. A disconnected graph yields 0
/// with `disconnected` set.
///
/// # Safety
/// `graph` must be a live handle; `out` writable; `disconnected` NULL or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tw_graph_lambda2(
    graph: *const TwGraph,
    tolerance: f64,
    out: *mut f64,
    disconnected: *mut bool,
) -> TwStatus {
    non_null!(graph, out);
    guard(|| {
        // SAFETY: live handle per contract.
        let g = unsafe { &(*graph).graph };
        match lambda2(g, tolerance) {
            Ok(r) => {
                // SAFETY: writable per contract.
                unsafe {
                    out.write(r.lambda2);
                    if !disconnected.is_null() {
                        disconnected.write(r.disconnected);
                    }
                }
                TwStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Exact node expansion by enumeration (graphs of at most `max_vertices`
/// vertices, hard limit 30). The minimizing set's labels go to `witness`
/// when it is non-NULL and `witness_cap` is large enough; `witness_len`
/// in `out` is always set.
///
/// # Safety
/// `graph` must be a live handle, `out` writable, `witness` NULL or valid
/// for `witness_cap` writes.
#[no_mangle]
pub unsafe extern "C" fn tw_graph_exact_expansion(
    graph: *const TwGraph,
    max_vertices: u32,
    out: *mut TwExpansion,
    witness: *mut u32,
    witness_cap: usize,
) -> TwStatus {
    non_null!(graph, out);
    guard(|| {
        // SAFETY: live handle per contract.
        let g = unsafe { &(*graph).graph };
        let h = match g.exact_node_expansion(max_vertices as usize) {
            Ok(h) => h,
            Err(e) => return from_error(e),
        };
        let summary = TwExpansion {
            numerator: *h.value.numer(),
            denominator: *h.value.denom(),
            boundary_size: h.boundary_size as u32,
            witness_len: h.witness.len() as u32,
        };
        // SAFETY: writable per contract.
        unsafe { out.write(summary) };
        if witness.is_null() {
            return TwStatus::Ok;
        }
        if h.witness.len() > witness_cap {
            return fail(
                TwStatus::OutOfRange,
                format!("witness buffer holds {witness_cap}, need {}", h.witness.len()),
            );
        }
        for (i, &v) in h.witness.iter().enumerate() {
            // SAFETY: i < witness_cap.
            unsafe { witness.add(i).write(g.label(v)) };
        }
        TwStatus::Ok
    })
}

fn scenario(c: &TwScenarioConfig) -> ScenarioConfig {
    ScenarioConfig {
        initial_leaves: c.initial_leaves as usize,
        total_rounds: c.total_rounds as usize,
        churn_fraction: c.churn_fraction,
        cycle_length: c.cycle_length as usize,
        mix_rounds_per_balance_round: c.mix_rounds_per_balance_round as usize,
        seed: c.seed,
        runs: c.runs as usize,
        adversary: c.adversary.into(),
        root_links: c.root_links.into(),
        tolerance: c.tolerance,
    }
}

/// Runs a scenario batch (`config->runs` runs, run `k` seeded from the
/// master seed) and returns its records ordered by run, then round.
///
/// # Safety
/// `config` must be readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tw_trace_run(config: *const TwScenarioConfig, out: *mut *mut TwTrace) -> TwStatus {
    non_null!(config, out);
    guard(|| {
        // SAFETY: readable per contract.
        let c = unsafe { *config };
        match run_batch(&scenario(&c), c.jobs.max(1) as usize) {
            Ok(records) => {
                // SAFETY: writable per contract.
                unsafe { out.write(Box::into_raw(Box::new(TwTrace { records }))) };
                TwStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `trace` must be NULL or a handle from `tw_trace_run` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tw_trace_free(trace: *mut TwTrace) {
    if !trace.is_null() {
        // SAFETY: handle was created by Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(trace) });
    }
}

/// # Safety
/// `trace` must be a live handle, `len` writable.
#[no_mangle]
pub unsafe extern "C" fn tw_trace_len(trace: *const TwTrace, len: *mut usize) -> TwStatus {
    non_null!(trace, len);
    // SAFETY: per contract.
    unsafe { len.write((*trace).records.len()) };
    TwStatus::Ok
}

/// # Safety
/// `trace` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tw_trace_get(trace: *const TwTrace, index: usize, out: *mut TwRoundRecord) -> TwStatus {
    non_null!(trace, out);
    // SAFETY: live handle per contract.
    let records = unsafe { &(*trace).records };
    let Some(t) = records.get(index) else {
        return fail(
            TwStatus::OutOfRange,
            format!("record {index} requested, trace has {}", records.len()),
        );
    };
    let rec = TwRoundRecord {
        run: t.run as u32,
        round: t.round as u32,
        phase: phase(t.phase),
        population: t.population as u32,
        lambda2: t.lambda2,
        swaps: t.swaps as u32,
        disconnected: t.disconnected,
    };
    // SAFETY: writable per contract.
    unsafe { out.write(rec) };
    TwStatus::Ok
}

/// Writes the trace as CSV (same format as the command-line tool).
///
/// # Safety
/// `trace` must be a live handle, `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn tw_trace_write_csv(trace: *const TwTrace, path: *const c_char) -> TwStatus {
    non_null!(trace, path);
    guard(|| {
        // SAFETY: NUL-terminated per contract.
        let Ok(path) = unsafe { CStr::from_ptr(path) }.to_str() else {
            return fail(TwStatus::Domain, "path is not valid UTF-8");
        };
        let file = match File::create(path) {
            Ok(f) => f,
            Err(e) => return fail(TwStatus::Io, format!("{path}: {e}")),
        };
        // SAFETY: live handle per contract.
        let records = unsafe { &(*trace).records };
        match write_trace_csv(BufWriter::new(file), records) {
            Ok(()) => TwStatus::Ok,
            Err(e) => fail(TwStatus::Io, e.to_string()),
        }
    })
}

//! C ABI over the causal-neco library.
//!
//! Objects cross the boundary as opaque handles (`NecoPanel`, `NecoGraph`,
//! `NecoModel`) created by `neco_*` constructors and released with the
//! matching `*_free`. Every fallible call returns a `NecoStatus`; the message
//! of the last failure on the calling thread is available from
//! `neco_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use causal_neco::backtest::{christoffersen_cc, dq_test, kupiec_uc, HitSeries, TestOutcome};
use causal_neco::copula::to_latent;
use causal_neco::discovery::{discover, CITestConfig};
use causal_neco::engines::{varcovar_var, NecoForecaster};
use causal_neco::graph::CausalGraph;
use causal_neco::panel::{parse_panel_csv, PanelMode, ReturnPanel};
use causal_neco::sem::{fit_sem, necof, CovarianceMode, ModelEnsemble};
use causal_neco::NecoError;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NecoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    NumericalError = 4,
    FitError = 5,
    IoError = 6,
    Panic = 7,
}

/// Outcome of a backtest statistic.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NecoTestResult {
    pub statistic: f64,
    pub pvalue: f64,
    pub accept: bool,
    pub degenerate: bool,
}

impl From<TestOutcome> for NecoTestResult {
    fn from(t: TestOutcome) -> Self {
        Self {
            statistic: t.statistic,
            pvalue: t.pvalue,
            accept: t.accept,
            degenerate: t.degenerate,
        }
    }
}

/// Return panel handle.
pub struct NecoPanel(ReturnPanel);

/// Causal graph handle.
pub struct NecoGraph(CausalGraph);

/// Fitted structural model ensemble handle.
pub struct NecoModel(ModelEnsemble);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &NecoError) -> NecoStatus {
    match e {
        NecoError::InvalidConfig(_)
        | NecoError::InvalidInit(_)
        | NecoError::DomainError(_)
        | NecoError::WindowError(_)
        | NecoError::CalibrationError { .. }
        | NecoError::LengthMismatch { .. } => NecoStatus::InvalidArgument,
        NecoError::NumericalError(_) => NecoStatus::NumericalError,
        NecoError::FitError(_) => NecoStatus::FitError,
        NecoError::Io(_) => NecoStatus::IoError,
        _ => NecoStatus::DataError,
    }
}

struct Failure(NecoStatus, String);

impl From<NecoError> for Failure {
    fn from(e: NecoError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(NecoStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(NecoStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NecoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NecoStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            NecoStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_values(values: &[f64], out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < values.len() {
        return Err(invalid(format!("output buffer holds {len} values, {} needed", values.len())));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

unsafe fn hits_from(hits: *const u8, n: usize, alpha: f64) -> Result<HitSeries, Failure> {
    if hits.is_null() {
        return Err(null("hits"));
    }
    let h = std::slice::from_raw_parts(hits, n).iter().map(|&b| b != 0).collect();
    Ok(HitSeries::from_hits(h, alpha)?)
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn neco_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn neco_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from a `neco_*` function returning `char *` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn neco_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Reads a panel CSV (`date,<label>,...`). With `prices` set the cells are
/// prices and are converted to log-returns.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn neco_panel_from_csv(
    path: *const c_char,
    prices: bool,
    out: *mut *mut NecoPanel,
) -> NecoStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| invalid("path is not UTF-8"))?;
        let mode = if prices { PanelMode::Prices } else { PanelMode::LogReturns };
        write_out(out, NecoPanel(parse_panel_csv(path, mode)?))
    })
}

/// Builds a panel from a row-major `n_obs × n_instruments` return matrix
/// with labels X1..Xp and synthetic daily dates.
///
/// # Safety
/// `data` must point to `n_obs * n_instruments` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn neco_panel_from_matrix(
    data: *const f64,
    n_obs: usize,
    n_instruments: usize,
    out: *mut *mut NecoPanel,
) -> NecoStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let len = n_obs.checked_mul(n_instruments).ok_or_else(|| invalid("dimensions overflow"))?;
        let values = std::slice::from_raw_parts(data, len);
        let m = DMatrix::from_row_slice(n_obs, n_instruments, values);
        let labels = (1..=n_instruments).map(|i| format!("X{i}")).collect();
        write_out(out, NecoPanel(ReturnPanel::with_synthetic_dates(labels, m)?))
    })
}

/// # Safety
/// `panel` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn neco_panel_n_obs(panel: *const NecoPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.0.n_obs())
}

/// # Safety
/// `panel` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn neco_panel_n_instruments(panel: *const NecoPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.0.n_instruments())
}

/// # Safety
/// `panel` must come from a panel constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn neco_panel_free(panel: *mut NecoPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// PC-stable discovery on the copula scores of `panel`.
///
/// # Safety
/// `panel` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn neco_discover(
    panel: *const NecoPanel,
    alpha_ci: f64,
    out: *mut *mut NecoGraph,
) -> NecoStatus {
    guard(|| {
        let panel = deref(panel, "panel")?;
        let cfg = CITestConfig {
            alpha_ci,
            ..CITestConfig::default()
        };
        cfg.validate()?;
        let (latent, _) = to_latent(&panel.0)?;
        let g = discover(latent.values(), latent.instruments().to_vec(), &cfg)?;
        write_out(out, NecoGraph(g))
    })
}

/// Parses a graph from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn neco_graph_from_json(json: *const c_char, out: *mut *mut NecoGraph) -> NecoStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|_| invalid("json is not UTF-8"))?;
        write_out(out, NecoGraph(CausalGraph::from_json(text)?))
    })
}

/// # Safety
/// `graph` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn neco_graph_n_edges(graph: *const NecoGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n_edges())
}

/// JSON form of the graph; free with `neco_string_free`. NULL on failure.
///
/// # Safety
/// `graph` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn neco_graph_to_json(graph: *const NecoGraph) -> *mut c_char {
    let Some(g) = graph.as_ref() else {
        set_last_error("graph is null");
        return ptr::null_mut();
    };
    match g.0.to_json() {
        Ok(s) => to_c_string(s),
        Err(e) => {
            set_last_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `graph` must come from a graph constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn neco_graph_free(graph: *mut NecoGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Fits the structural model with `lags` own lags on the copula scores of
/// `panel` given `graph`.
///
/// # Safety
/// `panel` and `graph` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn neco_fit(
    panel: *const NecoPanel,
    graph: *const NecoGraph,
    lags: usize,
    out: *mut *mut NecoModel,
) -> NecoStatus {
    guard(|| {
        let panel = deref(panel, "panel")?;
        let graph = deref(graph, "graph")?;
        let (latent, _) = to_latent(&panel.0)?;
        write_out(out, NecoModel(fit_sem(&latent, &graph.0, lags)?))
    })
}

/// Number of DAGs in the fitted ensemble.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn neco_model_n_members(model: *const NecoModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.len())
}

/// Market NECOF of the primary model; per-node values go to `per_node`
/// when it is non-NULL and holds `len >= p` doubles.
///
/// # Safety
/// `model` must be a live handle; `market` must be writable.
#[no_mangle]
pub unsafe extern "C" fn neco_model_necof(
    model: *const NecoModel,
    market: *mut f64,
    per_node: *mut f64,
    len: usize,
) -> NecoStatus {
    guard(|| {
        let model = deref(model, "model")?;
        if market.is_null() {
            return Err(null("market"));
        }
        let n = necof(model.0.primary());
        *market = n.market;
        if !per_node.is_null() {
            write_values(&n.per_node, per_node, len)?;
        }
        Ok(())
    })
}

/// JSON form of the primary model; free with `neco_string_free`.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn neco_model_to_json(model: *const NecoModel) -> *mut c_char {
    let Some(m) = model.as_ref() else {
        set_last_error("model is null");
        return ptr::null_mut();
    };
    match m.0.primary().to_json() {
        Ok(s) => to_c_string(s),
        Err(e) => {
            set_last_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `model` must come from `neco_fit` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn neco_model_free(model: *mut NecoModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// One-step-ahead Causal-NECO VaR after the last row of `panel`, using a
/// model fitted on the same panel. Writes one value per instrument.
///
/// # Safety
/// `panel` and `model` must be live handles; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn neco_forecast_var(
    panel: *const NecoPanel,
    model: *const NecoModel,
    alpha: f64,
    out: *mut f64,
    len: usize,
) -> NecoStatus {
    guard(|| {
        let panel = deref(panel, "panel")?;
        let model = deref(model, "model")?;
        let (latent, marginals) = to_latent(&panel.0)?;
        if latent.n_instruments() != model.0.primary().p() {
            return Err(invalid("panel and model have different instrument counts"));
        }
        let lags = model.0.lags();
        let n = latent.n_obs();
        if lags > n {
            return Err(invalid("panel is shorter than the model lag order"));
        }
        let history = latent.values().rows(n - lags, lags).into_owned();
        let f = NecoForecaster::new(&model.0, marginals, alpha, CovarianceMode::Estimated)?.forecast(&history)?;
        write_values(&f.values, out, len)
    })
}

/// Variance-covariance VaR over the whole panel.
///
/// # Safety
/// `panel` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn neco_varcovar_var(
    panel: *const NecoPanel,
    alpha: f64,
    out: *mut f64,
    len: usize,
) -> NecoStatus {
    guard(|| {
        let panel = deref(panel, "panel")?;
        write_values(&varcovar_var(&panel.0, alpha)?.values, out, len)
    })
}

/// Kupiec unconditional coverage test on a 0/1 hit series.
///
/// # Safety
/// `hits` must point to `n` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn neco_kupiec(
    hits: *const u8,
    n: usize,
    alpha: f64,
    out: *mut NecoTestResult,
) -> NecoStatus {
    guard(|| {
        let h = hits_from(hits, n, alpha)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = kupiec_uc(&h).into();
        Ok(())
    })
}

/// Christoffersen conditional coverage test on a 0/1 hit series.
///
/// # Safety
/// `hits` must point to `n` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn neco_christoffersen(
    hits: *const u8,
    n: usize,
    alpha: f64,
    out: *mut NecoTestResult,
) -> NecoStatus {
    guard(|| {
        let h = hits_from(hits, n, alpha)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = christoffersen_cc(&h).into();
        Ok(())
    })
}

/// Dynamic quantile test with `n_lags` lagged hits and the VaR level.
///
/// # Safety
/// `hits` and `var` must point to `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn neco_dq(
    hits: *const u8,
    var: *const f64,
    n: usize,
    alpha: f64,
    n_lags: usize,
    out: *mut NecoTestResult,
) -> NecoStatus {
    guard(|| {
        let h = hits_from(hits, n, alpha)?;
        if var.is_null() {
            return Err(null("var"));
        }
        let var = std::slice::from_raw_parts(var, n);
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = dq_test(&h, var, n_lags)?.into();
        Ok(())
    })
}

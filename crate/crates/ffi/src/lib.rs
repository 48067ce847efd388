//! C ABI for the cohesia analyzer.
//!
//! Every fallible function returns a [`CohesiaStatus`]; on failure a
//! human-readable message is available from [`cohesia_last_error`] on the
//! same thread until the next call. Reports are opaque handles owned by the
//! caller and released with [`cohesia_report_free`]; strings returned through
//! out-parameters are released with [`cohesia_string_free`].

use std::{
    cell::RefCell,
    ffi::{c_char, CStr, CString},
    panic::{catch_unwind, AssertUnwindSafe},
    path::PathBuf,
    ptr,
};

use cohesia::{
    chiaa_report::render_report,
    config::ExtractorMode,
    corpus_io::{parse_json_document, parse_plain_document, LoadOptions},
    semantics::{RemoteProvider, SemanticProvider, SurrogateProvider},
    stats, CohesionReport, Config, Error, ProviderChoice, ReportFormat, ThresholdScope,
};
use serde::Deserialize;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CohesiaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidOptions = 3,
    ParseError = 4,
    ProviderError = 5,
    AnalysisError = 6,
    StatsError = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CohesiaFormat {
    Json = 0,
    Markdown = 1,
}

/// Document-level indices of a report.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CohesiaMetrics {
    pub eci: f64,
    pub epi: f64,
    pub cci: f64,
    pub ici: f64,
    pub section_count: usize,
    pub finding_count: usize,
    pub warning_count: usize,
}

/// Opaque analysis result.
pub struct CohesiaReport {
    report: CohesionReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(CohesiaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Corpus(_) => CohesiaStatus::ParseError,
            Error::Semantics(_) => CohesiaStatus::ProviderError,
            Error::Config(_) => CohesiaStatus::InvalidOptions,
            _ => CohesiaStatus::AnalysisError,
        };
        Failure(status, e.to_string())
    }
}

/// Run `f`, record its error message and turn panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CohesiaStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CohesiaStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CohesiaStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or points to a NUL-terminated string valid for `'a`.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(CohesiaStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CohesiaStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

fn null(name: &str) -> Failure {
    Failure(CohesiaStatus::NullArgument, format!("{name} is null"))
}

/// Options accepted as JSON; every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Options {
    seed: Option<u64>,
    threshold_scope: Option<String>,
    filters: Option<bool>,
    clean: Option<bool>,
    /// Sidecar base URL; selects the remote provider.
    endpoint: Option<String>,
    /// Path of a newline-separated key-entity list.
    entities_file: Option<PathBuf>,
}

impl Options {
    unsafe fn parse(p: *const c_char) -> Result<Self, Failure> {
        if p.is_null() {
            return Ok(Self::default());
        }
        let text = str_arg(p, "options_json")?;
        serde_json::from_str(text)
            .map_err(|e| Failure(CohesiaStatus::InvalidOptions, format!("options: {e}")))
    }

    fn config(self) -> Result<Config, Failure> {
        let mut c = Config::default();
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(scope) = self.threshold_scope {
            c.threshold_scope = scope.parse::<ThresholdScope>()?;
        }
        c.filters = self.filters.unwrap_or(c.filters);
        c.clean = self.clean.unwrap_or(c.clean);
        if let Some(url) = self.endpoint {
            c.provider = ProviderChoice::Remote(url);
        }
        if let Some(path) = self.entities_file {
            c.extractor = ExtractorMode::ExternalList(path);
        }
        Ok(c)
    }
}

fn run(doc: &cohesia::Document, config: &Config) -> Result<Box<CohesiaReport>, Failure> {
    let provider: Box<dyn SemanticProvider> = match &config.provider {
        ProviderChoice::Surrogate => Box::new(SurrogateProvider::new()),
        ProviderChoice::Remote(url) => Box::new(RemoteProvider::connect(url).map_err(Error::from)?),
    };
    let analysis = cohesia::analyze(doc, config, provider.as_ref())?;
    Ok(Box::new(CohesiaReport { report: analysis.report }))
}

/// Analyze a JSON document (`{"id": ..., "sections": [{"heading", "text"}]}`).
///
/// `options_json` may be null. On success `*out` receives a new report.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohesia_analyze_json(
    document_json: *const c_char,
    options_json: *const c_char,
    out: *mut *mut CohesiaReport,
) -> CohesiaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = str_arg(document_json, "document_json")?;
        let config = Options::parse(options_json)?.config()?;
        let options = LoadOptions { clean: config.clean, ..LoadOptions::default() };
        let doc = parse_json_document(text, &options).map_err(Error::from)?;
        *out = Box::into_raw(run(&doc, &config)?);
        Ok(())
    })
}

/// Analyze plain text whose sections are separated by `===` lines.
///
/// # Safety
/// As for [`cohesia_analyze_json`].
#[no_mangle]
pub unsafe extern "C" fn cohesia_analyze_text(
    doc_id: *const c_char,
    text: *const c_char,
    options_json: *const c_char,
    out: *mut *mut CohesiaReport,
) -> CohesiaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let id = str_arg(doc_id, "doc_id")?;
        let text = str_arg(text, "text")?;
        let config = Options::parse(options_json)?.config()?;
        let options = LoadOptions { clean: config.clean, ..LoadOptions::default() };
        let doc = parse_plain_document(id, text, &options).map_err(Error::from)?;
        *out = Box::into_raw(run(&doc, &config)?);
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohesia_report_metrics(
    report: *const CohesiaReport,
    out: *mut CohesiaMetrics,
) -> CohesiaStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.report;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = CohesiaMetrics {
            eci: r.document.eci,
            epi: r.document.epi,
            cci: r.document.cci,
            ici: r.document.ici,
            section_count: r.sections.len(),
            finding_count: r.findings.len(),
            warning_count: r.warnings.len(),
        };
        Ok(())
    })
}

/// Render the report; `*out` receives a string to free with
/// [`cohesia_string_free`].
///
/// # Safety
/// `report` must be null or a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohesia_report_render(
    report: *const CohesiaReport,
    format: CohesiaFormat,
    out: *mut *mut c_char,
) -> CohesiaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let r = &report.as_ref().ok_or_else(|| null("report"))?.report;
        let format = match format {
            CohesiaFormat::Json => ReportFormat::Json,
            CohesiaFormat::Markdown => ReportFormat::Markdown,
        };
        let text = CString::new(render_report(r, format))
            .map_err(|e| Failure(CohesiaStatus::AnalysisError, e.to_string()))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cohesia_report_free(report: *mut CohesiaReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cohesia_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Pearson chi-square test (1 dof, no continuity correction) on the 2x2
/// table `{a, b, c, d}` in row-major order.
///
/// # Safety
/// `table` must point to 4 readable doubles; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohesia_chi_square_2x2(
    table: *const f64,
    statistic: *mut f64,
    p_value: *mut f64,
) -> CohesiaStatus {
    guard(|| {
        if table.is_null() {
            return Err(null("table"));
        }
        let statistic = statistic.as_mut().ok_or_else(|| null("statistic"))?;
        let p_value = p_value.as_mut().ok_or_else(|| null("p_value"))?;
        let t = std::slice::from_raw_parts(table, 4);
        let r = stats::chi_square_independence([[t[0], t[1]], [t[2], t[3]]])
            .map_err(|e| Failure(CohesiaStatus::StatsError, e.to_string()))?;
        *statistic = r.statistic;
        *p_value = r.p_value;
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn cohesia_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cohesia_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

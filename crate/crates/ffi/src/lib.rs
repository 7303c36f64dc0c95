//! C ABI over the exitlens library.
//!
//! Every fallible function returns an [`ExlStatus`]. On failure a message is
//! kept per thread and can be read with [`exl_last_error`]. Strings handed
//! out by the library are owned by the caller and released with
//! [`exl_string_free`]; models are released with [`exl_gbdt_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use exitlens::features::CompanyProfile;
use exitlens::gbdt::{fit, GbdtConfig, GbdtModel};
use exitlens::llm::{parse_response, ParseStatus};
use exitlens::metrics::{bertscore, classification_report, TokenEmbeddings};
use exitlens::prompt::{compile_record, serialize_chat, PromptSettings, PromptVariant, RenderMode};
use exitlens::tokens::DefaultCounter;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Parse = 4,
    Model = 5,
    Internal = 6,
}

/// Opaque boosted-tree model.
pub struct ExlModel {
    inner: GbdtModel,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExlReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1_positive: f64,
    pub f1_macro: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExlBertScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExlParseStatus {
    Parsed = 0,
    FallbackParsed = 1,
    Unparseable = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ExlStatus, String);

type Outcome = Result<(), Failure>;

fn fail<T>(status: ExlStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Outcome) -> ExlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ExlStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ExlStatus::Internal
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        fail(ExlStatus::NullArgument, format!("{name} is null"))
    } else {
        Ok(())
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(ExlStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, n))
}

fn out_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .or_else(|_| fail(ExlStatus::Internal, "output contains a nul byte"))
}

fn rows(x: &[f64], n_rows: usize, n_features: usize) -> Vec<Vec<f64>> {
    (0..n_rows)
        .map(|i| x[i * n_features..(i + 1) * n_features].to_vec())
        .collect()
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn exl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn exl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn exl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Fits a model on a row-major `n_rows x n_features` matrix. `config_json`
/// may be null for defaults; missing keys take their defaults.
///
/// # Safety
/// `x` must hold `n_rows * n_features` values, `y` `n_rows` labels and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exl_gbdt_fit(
    x: *const f64,
    n_rows: usize,
    n_features: usize,
    y: *const u8,
    config_json: *const c_char,
    out: *mut *mut ExlModel,
) -> ExlStatus {
    guard(|| {
        non_null(out, "out")?;
        let total = n_rows
            .checked_mul(n_features)
            .map_or_else(|| fail(ExlStatus::InvalidArgument, "matrix size overflows"), Ok)?;
        let x = slice(x, total, "x")?;
        let y = slice(y, n_rows, "y")?;
        let config = if config_json.is_null() {
            GbdtConfig::default()
        } else {
            let text = str_arg(config_json, "config_json")?;
            let mut v = serde_json::to_value(GbdtConfig::default()).expect("config serializes");
            let patch: serde_json::Value = serde_json::from_str(text)
                .or_else(|e| fail(ExlStatus::Parse, format!("config_json: {e}")))?;
            match (v.as_object_mut(), patch) {
                (Some(base), serde_json::Value::Object(p)) => base.extend(p),
                _ => return fail(ExlStatus::Parse, "config_json must be an object"),
            }
            serde_json::from_value(v).or_else(|e| fail(ExlStatus::Parse, format!("config_json: {e}")))?
        };
        let model = fit(&rows(x, n_rows, n_features), y, &config)
            .or_else(|e| fail(ExlStatus::Model, e.to_string()))?;
        *out = Box::into_raw(Box::new(ExlModel { inner: model }));
        Ok(())
    })
}

/// Loads a model from its JSON form.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn exl_gbdt_from_json(json: *const c_char, out: *mut *mut ExlModel) -> ExlStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = str_arg(json, "json")?;
        let inner = GbdtModel::from_json(text).or_else(|e| fail(ExlStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(ExlModel { inner }));
        Ok(())
    })
}

/// Serializes a model; free the result with [`exl_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn exl_gbdt_to_json(model: *const ExlModel, out: *mut *mut c_char) -> ExlStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        *out = out_string((*model).inner.to_json())?;
        Ok(())
    })
}

/// Number of features the model expects.
///
/// # Safety
/// `model` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn exl_gbdt_n_features(model: *const ExlModel) -> usize {
    if model.is_null() {
        0
    } else {
        (*model).inner.n_features
    }
}

/// Writes one positive-class probability per row into `out`.
///
/// # Safety
/// `x` must hold `n_rows * n_features` values and `out` `n_rows` slots.
#[no_mangle]
pub unsafe extern "C" fn exl_gbdt_predict_proba(
    model: *const ExlModel,
    x: *const f64,
    n_rows: usize,
    n_features: usize,
    out: *mut f64,
) -> ExlStatus {
    guard(|| {
        non_null(model, "model")?;
        let m = &(*model).inner;
        if n_features != m.n_features {
            return fail(
                ExlStatus::InvalidArgument,
                format!("model expects {} features, got {n_features}", m.n_features),
            );
        }
        let total = n_rows
            .checked_mul(n_features)
            .map_or_else(|| fail(ExlStatus::InvalidArgument, "matrix size overflows"), Ok)?;
        let x = slice(x, total, "x")?;
        if n_rows > 0 {
            non_null(out, "out")?;
        }
        for (i, row) in rows(x, n_rows, n_features).iter().enumerate() {
            let p = m.predict_proba(row).or_else(|e| fail(ExlStatus::Model, e.to_string()))?;
            *out.add(i) = p;
        }
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn exl_gbdt_free(model: *mut ExlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Binary classification report over `n` aligned 0/1 predictions and labels.
///
/// # Safety
/// `preds` and `labels` must hold `n` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exl_classification_report(
    preds: *const u8,
    labels: *const u8,
    n: usize,
    out: *mut ExlReport,
) -> ExlStatus {
    guard(|| {
        non_null(out, "out")?;
        let r = classification_report(slice(preds, n, "preds")?, slice(labels, n, "labels")?)
            .or_else(|e| fail(ExlStatus::InvalidArgument, e.to_string()))?;
        *out = ExlReport {
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f1_positive: r.f1_positive,
            f1_macro: r.f1_macro,
            tp: r.confusion.tp,
            fp: r.confusion.fp,
            tn: r.confusion.tn,
            fn_: r.confusion.fn_,
        };
        Ok(())
    })
}

fn embeddings(v: &[f64], n: usize, dim: usize) -> Result<TokenEmbeddings, Failure> {
    TokenEmbeddings::new((0..n).map(|i| i.to_string()).collect(), rows(v, n, dim))
        .or_else(|e| fail(ExlStatus::InvalidArgument, e.to_string()))
}

/// Unweighted BERTScore between row-major token embedding matrices.
///
/// # Safety
/// `candidate` must hold `n_candidate * dim` values, `reference`
/// `n_reference * dim`, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exl_bertscore(
    candidate: *const f64,
    n_candidate: usize,
    reference: *const f64,
    n_reference: usize,
    dim: usize,
    out: *mut ExlBertScore,
) -> ExlStatus {
    guard(|| {
        non_null(out, "out")?;
        let size = |n: usize| n.checked_mul(dim).map_or_else(|| fail(ExlStatus::InvalidArgument, "size overflows"), Ok);
        let c = embeddings(slice(candidate, size(n_candidate)?, "candidate")?, n_candidate, dim)?;
        let r = embeddings(slice(reference, size(n_reference)?, "reference")?, n_reference, dim)?;
        let s = bertscore(&c, &r).or_else(|e| fail(ExlStatus::InvalidArgument, e.to_string()))?;
        *out = ExlBertScore {
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
        };
        Ok(())
    })
}

/// Renders a profile (JSON, as in `profiles.jsonl`) into chat text with the
/// default templates and options. `with_target` adds the assistant turn.
/// Free the result with [`exl_string_free`].
///
/// # Safety
/// String arguments must be nul-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn exl_render_prompt(
    profile_json: *const c_char,
    variant: *const c_char,
    with_target: bool,
    max_tokens: usize,
    out: *mut *mut c_char,
) -> ExlStatus {
    guard(|| {
        non_null(out, "out")?;
        let profile: CompanyProfile = serde_json::from_str(str_arg(profile_json, "profile_json")?)
            .or_else(|e| fail(ExlStatus::Parse, format!("profile_json: {e}")))?;
        let variant: PromptVariant = str_arg(variant, "variant")?
            .parse()
            .or_else(|e: exitlens::prompt::PromptError| fail(ExlStatus::InvalidArgument, e.to_string()))?;
        let settings = PromptSettings {
            variant,
            mode: if with_target { RenderMode::Sft } else { RenderMode::Inference },
            max_tokens,
            ..PromptSettings::default()
        };
        let rec = compile_record(&profile, &[], &settings, &DefaultCounter)
            .or_else(|e| fail(ExlStatus::InvalidArgument, e.to_string()))?;
        let text = serialize_chat(&rec.chat.messages).or_else(|e| fail(ExlStatus::Internal, e.to_string()))?;
        *out = out_string(text)?;
        Ok(())
    })
}

/// Parses a model completion. `out_label` receives 1, 0 or -1 when no label
/// was found. `out_justification` may be null; otherwise it receives a new
/// string or null when there is no justification.
///
/// # Safety
/// `text` must be nul-terminated; non-null out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn exl_parse_response(
    text: *const c_char,
    out_label: *mut i32,
    out_status: *mut ExlParseStatus,
    out_justification: *mut *mut c_char,
) -> ExlStatus {
    guard(|| {
        non_null(out_label, "out_label")?;
        non_null(out_status, "out_status")?;
        let p = parse_response(str_arg(text, "text")?);
        *out_label = p.label.map_or(-1, i32::from);
        *out_status = match p.parse_status {
            ParseStatus::Parsed => ExlParseStatus::Parsed,
            ParseStatus::FallbackParsed => ExlParseStatus::FallbackParsed,
            ParseStatus::Unparseable => ExlParseStatus::Unparseable,
        };
        if !out_justification.is_null() {
            *out_justification = match p.justification {
                Some(j) => out_string(j)?,
                None => ptr::null_mut(),
            };
        }
        Ok(())
    })
}

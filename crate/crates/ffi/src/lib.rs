//! C ABI for the guideqa engine.
//!
//! Handles are opaque: an engine owns the knowledge base, the trained
//! model and an in-memory feedback store; a response owns the strings its
//! accessors hand out. Every fallible call returns a [`GqStatus`] and
//! leaves a message retrievable with [`gq_last_error_message`] on the
//! calling thread. Panics never cross the boundary.
//!
//! An engine may be shared between threads for `gq_ask` and
//! `gq_feedback`; `gq_engine_set_threshold` and `gq_engine_free` need
//! exclusive access.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use guideqa::classify::{self, IntentModel, ModelFileError, TrainError};
use guideqa::dialogue::{self, DialogueError, FeedbackError, FeedbackStore, DEFAULT_THRESHOLD};
use guideqa::gen::{self, GenError};
use guideqa::kb::{self, KbError, KnowledgeBase};
use guideqa::{Response, ResponseKind};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    Validation = 6,
    Train = 7,
    EmptyQuestion = 8,
    UnknownFeedbackId = 9,
    AlreadyVoted = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GqResponseKind {
    Answered = 0,
    Idk = 1,
}

/// Opaque engine handle.
pub struct GqEngine {
    kb: KnowledgeBase,
    model: IntentModel,
    threshold: f64,
    feedback: FeedbackStore,
}

/// Opaque response handle.
pub struct GqResponse {
    response: Response,
    answer: CString,
    feedback_id: CString,
    intent: Option<CString>,
    suggestions: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(GqStatus, String);

impl Failure {
    fn new(status: GqStatus, message: impl ToString) -> Self {
        Failure(status, message.to_string())
    }
}

impl From<KbError> for Failure {
    fn from(e: KbError) -> Self {
        let status = match e {
            KbError::Io { .. } => GqStatus::Io,
            KbError::Parse { .. } => GqStatus::Parse,
            KbError::Validation { .. } => GqStatus::Validation,
        };
        Failure::new(status, e)
    }
}

impl From<GenError> for Failure {
    fn from(e: GenError) -> Self {
        let status = match e {
            GenError::Io { .. } => GqStatus::Io,
            GenError::Parse { .. } | GenError::TemplateSyntax { .. } => GqStatus::Parse,
            GenError::EmptyCorpus => GqStatus::Train,
        };
        Failure::new(status, e)
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        Failure::new(GqStatus::Train, e)
    }
}

impl From<ModelFileError> for Failure {
    fn from(e: ModelFileError) -> Self {
        let status = match e {
            ModelFileError::Io { .. } => GqStatus::Io,
            ModelFileError::Format(_) => GqStatus::Parse,
        };
        Failure::new(status, e)
    }
}

impl From<DialogueError> for Failure {
    fn from(e: DialogueError) -> Self {
        let status = match e {
            DialogueError::EmptyQuestion => GqStatus::EmptyQuestion,
            DialogueError::InvalidExtra { .. } => GqStatus::Validation,
            DialogueError::Gen(_) | DialogueError::Train(_) => GqStatus::Train,
        };
        Failure::new(status, e)
    }
}

impl From<FeedbackError> for Failure {
    fn from(e: FeedbackError) -> Self {
        let status = match e {
            FeedbackError::UnknownFeedbackId(_) => GqStatus::UnknownFeedbackId,
            FeedbackError::AlreadyVoted(_) => GqStatus::AlreadyVoted,
            FeedbackError::Io(_) => GqStatus::Io,
        };
        Failure::new(status, e)
    }
}

fn set_last_error(message: Option<String>) {
    let c = message.map(|m| CString::new(m.replace('\0', " ")).expect("nul bytes removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(None);
            GqStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            log::debug!("ffi call failed with {status:?}: {message}");
            set_last_error(Some(message));
            status
        }
        Err(_) => {
            set_last_error(Some("internal panic".into()));
            GqStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(
            GqStatus::NullPointer,
            format!("{what} is null"),
        ));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(GqStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn out_arg<T>(out: *mut *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::new(
            GqStatus::NullPointer,
            "output pointer is null",
        ))
    } else {
        Ok(())
    }
}

unsafe fn engine_ref<'a>(engine: *const GqEngine) -> Result<&'a GqEngine, Failure> {
    engine
        .as_ref()
        .ok_or_else(|| Failure::new(GqStatus::NullPointer, "engine is null"))
}

fn c_string(s: &str) -> CString {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed")
}

fn publish(engine: GqEngine, out: *mut *mut GqEngine) {
    unsafe { *out = Box::into_raw(Box::new(engine)) };
}

/// Builds an engine by generating the training corpus from a knowledge
/// file and a template file and training a model on it.
///
/// # Safety
/// `kb_path` and `templates_path` must be NUL-terminated strings; `out`
/// must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gq_engine_new(
    kb_path: *const c_char,
    templates_path: *const c_char,
    out: *mut *mut GqEngine,
) -> GqStatus {
    guard(|| {
        out_arg(out)?;
        let kb = kb::load_guide(PathBuf::from(str_arg(kb_path, "kb_path")?))?;
        let templates =
            gen::parse_templates(PathBuf::from(str_arg(templates_path, "templates_path")?))?;
        let corpus = gen::generate_dataset(&templates, &kb)?;
        let model = classify::train(&corpus.examples, classify::DEFAULT_ALPHA)?;
        publish(
            GqEngine {
                kb,
                model,
                threshold: DEFAULT_THRESHOLD,
                feedback: FeedbackStore::in_memory(),
            },
            out,
        );
        Ok(())
    })
}

/// Builds an engine from a knowledge file and a saved model file.
///
/// # Safety
/// Same contract as [`gq_engine_new`].
#[no_mangle]
pub unsafe extern "C" fn gq_engine_load(
    kb_path: *const c_char,
    model_path: *const c_char,
    out: *mut *mut GqEngine,
) -> GqStatus {
    guard(|| {
        out_arg(out)?;
        let kb = kb::load_guide(PathBuf::from(str_arg(kb_path, "kb_path")?))?;
        let model = IntentModel::load(PathBuf::from(str_arg(model_path, "model_path")?), None)?;
        publish(
            GqEngine {
                kb,
                model,
                threshold: DEFAULT_THRESHOLD,
                feedback: FeedbackStore::in_memory(),
            },
            out,
        );
        Ok(())
    })
}

/// Writes the engine's model to `path`.
///
/// # Safety
/// `engine` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gq_engine_save_model(
    engine: *const GqEngine,
    path: *const c_char,
) -> GqStatus {
    guard(|| {
        let engine = engine_ref(engine)?;
        engine.model.save(PathBuf::from(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Sets the confidence gate; must be finite and non-negative.
///
/// # Safety
/// `engine` must come from this library and not be in use elsewhere.
#[no_mangle]
pub unsafe extern "C" fn gq_engine_set_threshold(
    engine: *mut GqEngine,
    threshold: f64,
) -> GqStatus {
    guard(|| {
        let engine = engine
            .as_mut()
            .ok_or_else(|| Failure::new(GqStatus::NullPointer, "engine is null"))?;
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(Failure::new(
                GqStatus::InvalidArgument,
                format!("threshold must be finite and >= 0, got {threshold}"),
            ));
        }
        engine.threshold = threshold;
        Ok(())
    })
}

/// # Safety
/// `engine` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn gq_engine_free(engine: *mut GqEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Answers one question. The response must be released with
/// [`gq_response_free`].
///
/// # Safety
/// `engine` must come from this library; `question` must be
/// NUL-terminated; `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gq_ask(
    engine: *const GqEngine,
    question: *const c_char,
    out: *mut *mut GqResponse,
) -> GqStatus {
    guard(|| {
        out_arg(out)?;
        let engine = engine_ref(engine)?;
        let question = str_arg(question, "question")?;
        let exchange = dialogue::respond(&engine.model, &engine.kb, question, engine.threshold)?;
        engine
            .feedback
            .issue(exchange.feedback)
            .map_err(|e| Failure::new(GqStatus::Io, e))?;
        let r = exchange.response;
        let handle = GqResponse {
            answer: c_string(&r.answer_text),
            feedback_id: c_string(&r.feedback_id),
            intent: r.intent.map(|i| c_string(i.as_str())),
            suggestions: r.suggestions.iter().map(|s| c_string(s)).collect(),
            response: r,
        };
        *out = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

/// Records a yes/no vote for a feedback id issued by this engine.
///
/// # Safety
/// `engine` must come from this library; `feedback_id` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gq_feedback(
    engine: *const GqEngine,
    feedback_id: *const c_char,
    helpful: bool,
) -> GqStatus {
    guard(|| {
        let engine = engine_ref(engine)?;
        let id = str_arg(feedback_id, "feedback_id")?;
        engine.feedback.record_feedback(id, helpful)?;
        Ok(())
    })
}

/// # Safety
/// `response` must come from [`gq_ask`].
#[no_mangle]
pub unsafe extern "C" fn gq_response_kind(response: *const GqResponse) -> GqResponseKind {
    match response.as_ref().map(|r| r.response.kind) {
        Some(ResponseKind::Answered) => GqResponseKind::Answered,
        _ => GqResponseKind::Idk,
    }
}

/// Top-intent confidence, or NaN for a null handle.
///
/// # Safety
/// `response` must come from [`gq_ask`] or be null.
#[no_mangle]
pub unsafe extern "C" fn gq_response_confidence(response: *const GqResponse) -> f64 {
    response
        .as_ref()
        .map_or(f64::NAN, |r| r.response.confidence)
}

/// Answer text, borrowed from the response.
///
/// # Safety
/// `response` must come from [`gq_ask`] or be null.
#[no_mangle]
pub unsafe extern "C" fn gq_response_answer(response: *const GqResponse) -> *const c_char {
    response.as_ref().map_or(ptr::null(), |r| r.answer.as_ptr())
}

/// # Safety
/// `response` must come from [`gq_ask`] or be null.
#[no_mangle]
pub unsafe extern "C" fn gq_response_feedback_id(response: *const GqResponse) -> *const c_char {
    response
        .as_ref()
        .map_or(ptr::null(), |r| r.feedback_id.as_ptr())
}

/// Intent name of an answered response; null for IDK.
///
/// # Safety
/// `response` must come from [`gq_ask`] or be null.
#[no_mangle]
pub unsafe extern "C" fn gq_response_intent(response: *const GqResponse) -> *const c_char {
    response
        .as_ref()
        .and_then(|r| r.intent.as_ref())
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// # Safety
/// `response` must come from [`gq_ask`] or be null.
#[no_mangle]
pub unsafe extern "C" fn gq_response_suggestion_count(response: *const GqResponse) -> usize {
    response.as_ref().map_or(0, |r| r.suggestions.len())
}

/// Suggestion `index`, or null when out of range.
///
/// # Safety
/// `response` must come from [`gq_ask`] or be null.
#[no_mangle]
pub unsafe extern "C" fn gq_response_suggestion(
    response: *const GqResponse,
    index: usize,
) -> *const c_char {
    response
        .as_ref()
        .and_then(|r| r.suggestions.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// The whole response as JSON; release with [`gq_string_free`].
///
/// # Safety
/// `response` must come from [`gq_ask`] or be null.
#[no_mangle]
pub unsafe extern "C" fn gq_response_to_json(response: *const GqResponse) -> *mut c_char {
    match response.as_ref() {
        Some(r) => {
            let json = serde_json::to_string(&r.response).expect("response serializes");
            c_string(&json).into_raw()
        }
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `response` must come from [`gq_ask`] or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn gq_response_free(response: *mut GqResponse) {
    if !response.is_null() {
        drop(Box::from_raw(response));
    }
}

/// # Safety
/// `s` must come from this library's owned-string returns or be null.
#[no_mangle]
pub unsafe extern "C" fn gq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or null after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn gq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn gq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

//! C ABI over `debatetree`.
//!
//! Every fallible call returns a [`TodStatus`]. On failure a message is
//! kept per thread and read with [`tod_last_error`]. Strings returned
//! through `char **` out-parameters are owned by the caller and released
//! with [`tod_string_free`]; trees with [`tod_tree_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use debatetree::corpus::Dataset;
use debatetree::gateway::{render_prompt, Bindings, ExpansionVerdict, TemplateId};
use debatetree::mock::MockScript;
use debatetree::moderator::should_expand;
use debatetree::pipeline::{self, write_artifacts, PipelineError, Providers, RunConfig, Variant};
use debatetree::transcript::Transcript;
use debatetree::tree::DebateTree;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TodStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    NotFound = 5,
    Io = 6,
    Config = 7,
    Provider = 8,
    Internal = 9,
    Panic = 10,
}

/// Result of [`tod_dataset_validate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TodDatasetCounts {
    pub rows: usize,
    pub invalid_rows: usize,
    pub cited_method: usize,
    pub cited_task: usize,
    pub not_cited_method: usize,
    pub not_cited_task: usize,
}

/// Opaque handle to a parsed tree document.
pub struct TodTree {
    tree: DebateTree,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(TodStatus, String);

impl Failure {
    fn new(status: TodStatus, message: impl Into<String>) -> Self {
        Self(status, message.into())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::Provider(_) => TodStatus::Provider,
            PipelineError::Config(_) | PipelineError::Input(_) => TodStatus::Config,
            _ => TodStatus::Internal,
        };
        Self(status, e.to_string())
    }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TodStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TodStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TodStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(TodStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(TodStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn opt_str<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        read_str(p, name).map(Some)
    }
}

fn out_ptr<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(TodStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn tree_ref<'a>(p: *const TodTree) -> Result<&'a TodTree, Failure> {
    // SAFETY: non-null handles come from tod_tree_from_json.
    unsafe { p.as_ref() }.ok_or_else(|| Failure::new(TodStatus::NullArgument, "tree is null"))
}

unsafe fn give_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure::new(TodStatus::Internal, "result contains a NUL byte"))?;
    *out = c.into_raw();
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next call on the same thread.
#[no_mangle]
pub extern "C" fn tod_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn tod_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn tod_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tod_tree_from_json(json: *const c_char, out: *mut *mut TodTree) -> TodStatus {
    guard(|| {
        out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let text = read_str(json, "json")?;
        let tree = DebateTree::from_json(text).map_err(|e| Failure::new(TodStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(TodTree { tree }));
        Ok(())
    })
}

/// # Safety
/// `tree` must be NULL or a handle from [`tod_tree_from_json`], freed once.
#[no_mangle]
pub unsafe extern "C" fn tod_tree_free(tree: *mut TodTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// # Safety
/// `tree` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tod_tree_node_count(tree: *const TodTree, out: *mut usize) -> TodStatus {
    guard(|| {
        out_ptr(out, "out")?;
        *out = tree_ref(tree)?.tree.len();
        Ok(())
    })
}

/// # Safety
/// `tree` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tod_tree_max_depth(tree: *const TodTree, out: *mut usize) -> TodStatus {
    guard(|| {
        out_ptr(out, "out")?;
        *out = tree_ref(tree)?.tree.max_depth();
        Ok(())
    })
}

/// Indented text of the whole tree, or of one node when `node_id` is not
/// NULL.
///
/// # Safety
/// `tree` must be a live handle; `node_id` NULL or NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tod_tree_render(
    tree: *const TodTree,
    node_id: *const c_char,
    out: *mut *mut c_char,
) -> TodStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let node = opt_str(node_id, "node_id")?;
        let text = tree_ref(tree)?
            .tree
            .render(node)
            .map_err(|e| Failure::new(TodStatus::NotFound, e.to_string()))?;
        give_string(out, text)
    })
}

/// # Safety
/// `tree` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tod_tree_to_json(tree: *const TodTree, out: *mut *mut c_char) -> TodStatus {
    guard(|| {
        out_ptr(out, "out")?;
        give_string(out, tree_ref(tree)?.tree.to_json())
    })
}

/// The expansion gate.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tod_should_expand(
    progression_of_arguments: bool,
    meaningful_questions: bool,
    clear_winner: bool,
    depth: usize,
    max_depth: usize,
    out: *mut bool,
) -> TodStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let v = ExpansionVerdict {
            explanation: String::new(),
            progression_of_arguments,
            meaningful_questions,
            clear_winner,
            degraded: false,
        };
        *out = should_expand(&v, depth, max_depth);
        Ok(())
    })
}

/// Checks a dataset file. Returns `Ok` even when rows are invalid; see
/// `invalid_rows`.
///
/// # Safety
/// `path` must be NUL-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tod_dataset_validate(path: *const c_char, out: *mut TodDatasetCounts) -> TodStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let path = read_str(path, "path")?;
        let r = Dataset::validate_file(path).map_err(|e| Failure::new(TodStatus::Io, e.to_string()))?;
        *out = TodDatasetCounts {
            rows: r.rows,
            invalid_rows: r.errors.len(),
            cited_method: r.counts.cited_method,
            cited_task: r.counts.cited_task,
            not_cited_method: r.counts.not_cited_method,
            not_cited_task: r.counts.not_cited_task,
        };
        Ok(())
    })
}

/// Runs one variant on a dataset row with a mock script and default
/// settings. Artifacts go under `out_dir/row-<row>/<variant>/` when
/// `out_dir` is not NULL; the summary is returned through `out_summary`.
///
/// # Safety
/// String arguments must be NUL-terminated (`out_dir` may be NULL);
/// `out_summary` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tod_run_mock(
    dataset_path: *const c_char,
    row: usize,
    variant: *const c_char,
    mock_script_path: *const c_char,
    out_dir: *const c_char,
    out_summary: *mut *mut c_char,
) -> TodStatus {
    guard(|| {
        out_ptr(out_summary, "out_summary")?;
        let dataset = read_str(dataset_path, "dataset_path")?;
        let variant: Variant = read_str(variant, "variant")?
            .parse()
            .map_err(|e: String| Failure::new(TodStatus::InvalidArgument, e))?;
        let script_path = read_str(mock_script_path, "mock_script_path")?;
        let out_dir = opt_str(out_dir, "out_dir")?;
        let ds = Dataset::load(dataset).map_err(|e| Failure::new(TodStatus::Io, e.to_string()))?;
        let pair = ds
            .row(row)
            .map_err(|e| Failure::new(TodStatus::InvalidArgument, e.to_string()))?;
        let script = MockScript::load(Path::new(script_path)).map_err(|e| Failure::new(TodStatus::Config, e))?;
        let config = RunConfig::default().with_variant(variant);
        let (providers, _) = Providers::mock(&config, &script);
        let artifacts = pipeline::run(pair, &config, &providers, &Transcript::new())?;
        if let Some(dir) = out_dir {
            write_artifacts(Path::new(dir), &format!("row-{row}"), &artifacts)
                .map_err(|e| Failure::new(TodStatus::Io, e.to_string()))?;
        }
        give_string(out_summary, artifacts.summary)
    })
}

/// Renders one of the eight debate templates. `bindings_json` is a JSON
/// object of string values.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tod_render_prompt(
    template_id: *const c_char,
    bindings_json: *const c_char,
    out: *mut *mut c_char,
) -> TodStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let id = TemplateId::parse_debate(read_str(template_id, "template_id")?)
            .map_err(|e| Failure::new(TodStatus::NotFound, e.to_string()))?;
        let bindings: Bindings = serde_json::from_str(read_str(bindings_json, "bindings_json")?)
            .map_err(|e| Failure::new(TodStatus::Parse, format!("bindings: {e}")))?;
        let text = render_prompt(id, &bindings).map_err(|e| Failure::new(TodStatus::InvalidArgument, e.to_string()))?;
        give_string(out, text)
    })
}

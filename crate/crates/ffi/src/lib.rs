//! C ABI for the simulator, so other languages can run experiments and read
//! back metrics without shelling out to the CLI.
//!
//! Conventions:
//! - A run is an opaque handle created by [`fedsim_run_toml`] and released
//!   with [`fedsim_run_free`].
//! - Functions return a [`FedsimStatus`] code; on any non-OK status,
//!   [`fedsim_last_error_message`] returns a human-readable description for
//!   the current thread.
//! - Strings returned as `char*` are owned by the caller and must be
//!   released with [`fedsim_string_free`]. [`fedsim_version`] is the one
//!   exception: it returns a static string.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use fedsim_core::cli;
use fedsim_core::engine::{self, ExperimentConfig, ExperimentResult};
use fedsim_core::error::Error;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FedsimStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The config document failed to parse or validate.
    ConfigError = 3,
    /// A file could not be read or written.
    IoError = 4,
    /// The simulation itself failed.
    RuntimeError = 5,
    /// A round or metric index was out of range.
    OutOfRange = 6,
}

/// Per-round metric selector for [`fedsim_run_metric`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FedsimMetric {
    TestLoss = 0,
    TestAccuracy = 1,
    VerifiedCount = 2,
    VerifiedHonest = 3,
    VerifiedMalicious = 4,
    MeanHonestUtility = 5,
    ServerExpenditure = 6,
}

/// Opaque handle to a finished run.
pub struct FedsimRun {
    config: ExperimentConfig,
    result: ExperimentResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = Some(CString::new(sanitized).expect("no interior nul"));
    });
}

fn status_for(error: &Error) -> FedsimStatus {
    match error {
        Error::Config(_) => FedsimStatus::ConfigError,
        Error::Io { .. } => FedsimStatus::IoError,
        _ => FedsimStatus::RuntimeError,
    }
}

/// Library version as a static NUL-terminated string; do not free.
#[no_mangle]
pub extern "C" fn fedsim_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Parse a TOML config and run the experiment to completion. On success
/// writes a new handle into `out_run`.
///
/// # Safety
/// `config_toml` must point to a NUL-terminated string and `out_run` to a
/// writable pointer slot; both must be non-null.
#[no_mangle]
pub unsafe extern "C" fn fedsim_run_toml(
    config_toml: *const c_char,
    out_run: *mut *mut FedsimRun,
) -> FedsimStatus {
    if config_toml.is_null() || out_run.is_null() {
        set_last_error("null argument".to_string());
        return FedsimStatus::NullArgument;
    }
    let text = match CStr::from_ptr(config_toml).to_str() {
        Ok(text) => text,
        Err(_) => {
            set_last_error("config text is not valid UTF-8".to_string());
            return FedsimStatus::InvalidUtf8;
        }
    };
    let config = match cli::parse_config(text) {
        Ok(config) => config,
        Err(err) => {
            set_last_error(err.to_string());
            return status_for(&err);
        }
    };
    match engine::run_experiment(&config) {
        Ok(result) => {
            let run = Box::new(FedsimRun { config, result });
            *out_run = Box::into_raw(run);
            FedsimStatus::Ok
        }
        Err(err) => {
            set_last_error(err.to_string());
            status_for(&err)
        }
    }
}

/// Release a run handle. A null pointer is a no-op.
///
/// # Safety
/// `run` must be a pointer returned by [`fedsim_run_toml`] that has not
/// already been freed.
#[no_mangle]
pub unsafe extern "C" fn fedsim_run_free(run: *mut FedsimRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of completed rounds, or 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle from [`fedsim_run_toml`].
#[no_mangle]
pub unsafe extern "C" fn fedsim_run_rounds(run: *const FedsimRun) -> usize {
    match run.as_ref() {
        Some(run) => run.result.records.len(),
        None => 0,
    }
}

/// Read one per-round metric into `out_value`.
///
/// # Safety
/// `run` must be a live handle and `out_value` a writable f64 slot.
#[no_mangle]
pub unsafe extern "C" fn fedsim_run_metric(
    run: *const FedsimRun,
    round: usize,
    metric: FedsimMetric,
    out_value: *mut f64,
) -> FedsimStatus {
    let Some(run) = run.as_ref() else {
        set_last_error("null run handle".to_string());
        return FedsimStatus::NullArgument;
    };
    if out_value.is_null() {
        set_last_error("null output pointer".to_string());
        return FedsimStatus::NullArgument;
    }
    let Some(record) = run.result.records.get(round) else {
        set_last_error(format!(
            "round {round} out of range ({} rounds)",
            run.result.records.len()
        ));
        return FedsimStatus::OutOfRange;
    };
    let value = match metric {
        FedsimMetric::TestLoss => record.test_loss,
        FedsimMetric::TestAccuracy => record.test_accuracy,
        FedsimMetric::VerifiedCount => record.n_verified() as f64,
        FedsimMetric::VerifiedHonest => record.n_verified_honest as f64,
        FedsimMetric::VerifiedMalicious => record.n_verified_malicious as f64,
        FedsimMetric::MeanHonestUtility => record.mean_honest_utility,
        FedsimMetric::ServerExpenditure => record.server_expenditure,
    };
    *out_value = value;
    FedsimStatus::Ok
}

fn string_out(text: String, out: *mut *mut c_char) -> FedsimStatus {
    let sanitized = text.replace('\0', " ");
    match CString::new(sanitized) {
        Ok(text) => {
            unsafe { *out = text.into_raw() };
            FedsimStatus::Ok
        }
        Err(_) => {
            set_last_error("string contained interior NUL".to_string());
            FedsimStatus::RuntimeError
        }
    }
}

/// Summary of the run (final metrics, pass rates, rationality checks) as a
/// JSON string; free with [`fedsim_string_free`].
///
/// # Safety
/// `run` must be a live handle and `out_json` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn fedsim_run_summary_json(
    run: *const FedsimRun,
    out_json: *mut *mut c_char,
) -> FedsimStatus {
    let Some(run) = run.as_ref() else {
        set_last_error("null run handle".to_string());
        return FedsimStatus::NullArgument;
    };
    if out_json.is_null() {
        set_last_error("null output pointer".to_string());
        return FedsimStatus::NullArgument;
    }
    let summary = match cli::summarize(&run.config, &run.result) {
        Ok(summary) => summary,
        Err(err) => {
            set_last_error(err.to_string());
            return status_for(&err);
        }
    };
    match serde_json::to_string_pretty(&summary) {
        Ok(text) => string_out(text, out_json),
        Err(err) => {
            set_last_error(err.to_string());
            FedsimStatus::RuntimeError
        }
    }
}

/// The per-round metrics table as CSV text (same schema as `metrics.csv`);
/// free with [`fedsim_string_free`].
///
/// # Safety
/// `run` must be a live handle and `out_csv` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn fedsim_run_metrics_csv(
    run: *const FedsimRun,
    out_csv: *mut *mut c_char,
) -> FedsimStatus {
    let Some(run) = run.as_ref() else {
        set_last_error("null run handle".to_string());
        return FedsimStatus::NullArgument;
    };
    if out_csv.is_null() {
        set_last_error("null output pointer".to_string());
        return FedsimStatus::NullArgument;
    }
    let mut bytes = Vec::new();
    cli::write_metrics_csv(&run.result.records, &mut bytes).expect("vec write");
    string_out(String::from_utf8(bytes).expect("csv is utf-8"), out_csv)
}

/// The per-(round, client) ledger as CSV text (same schema as `ledger.csv`);
/// empty body (header only) for FedAvg/Krum runs. Free with
/// [`fedsim_string_free`].
///
/// # Safety
/// `run` must be a live handle and `out_csv` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn fedsim_run_ledger_csv(
    run: *const FedsimRun,
    out_csv: *mut *mut c_char,
) -> FedsimStatus {
    let Some(run) = run.as_ref() else {
        set_last_error("null run handle".to_string());
        return FedsimStatus::NullArgument;
    };
    if out_csv.is_null() {
        set_last_error("null output pointer".to_string());
        return FedsimStatus::NullArgument;
    }
    let mut bytes = Vec::new();
    match run.result.ledger.as_ref() {
        Some(ledger) => ledger.write_csv(&mut bytes).expect("vec write"),
        None => fedsim_core::mechanism::Ledger::new(0)
            .write_csv(&mut bytes)
            .expect("vec write"),
    }
    string_out(String::from_utf8(bytes).expect("csv is utf-8"), out_csv)
}

/// Description of the most recent error on this thread, or null if none;
/// free with [`fedsim_string_free`].
#[no_mangle]
pub extern "C" fn fedsim_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(message) => message.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Release a string returned by this library. A null pointer is a no-op.
///
/// # Safety
/// `s` must be a pointer returned by one of this library's string-producing
/// functions, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fedsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DESK_TOML: &str = r#"
        n_clients = 6
        rounds = 2
        local_epochs = 1
        batch_size = 16
        validation_size = 40

        [dataset]
        kind = "synthetic"
        n_classes = 4
        train_per_class = 30
        test_per_class = 25
        n_features = 6
        separation = 6.0
    "#;

    fn run_desk() -> *mut FedsimRun {
        let config = CString::new(DESK_TOML).unwrap();
        let mut run: *mut FedsimRun = ptr::null_mut();
        let status = unsafe { fedsim_run_toml(config.as_ptr(), &mut run) };
        assert_eq!(status, FedsimStatus::Ok);
        assert!(!run.is_null());
        run
    }

    fn take_string(ptr: *mut c_char) -> String {
        assert!(!ptr.is_null());
        let text = unsafe { CStr::from_ptr(ptr) }.to_str().unwrap().to_string();
        unsafe { fedsim_string_free(ptr) };
        text
    }

    #[test]
    fn version_is_non_empty() {
        let version = unsafe { CStr::from_ptr(fedsim_version()) };
        assert!(!version.to_str().unwrap().is_empty());
    }

    #[test]
    fn run_and_read_metrics() {
        let run = run_desk();
        assert_eq!(unsafe { fedsim_run_rounds(run) }, 2);

        let mut accuracy = f64::NAN;
        let status =
            unsafe { fedsim_run_metric(run, 1, FedsimMetric::TestAccuracy, &mut accuracy) };
        assert_eq!(status, FedsimStatus::Ok);
        assert!((0.0..=1.0).contains(&accuracy));

        let mut expenditure = f64::NAN;
        let status = unsafe {
            fedsim_run_metric(run, 1, FedsimMetric::ServerExpenditure, &mut expenditure)
        };
        assert_eq!(status, FedsimStatus::Ok);
        assert!(expenditure >= 0.0);

        unsafe { fedsim_run_free(run) };
    }

    #[test]
    fn out_of_range_round_is_reported() {
        let run = run_desk();
        let mut value = 0.0;
        let status = unsafe { fedsim_run_metric(run, 99, FedsimMetric::TestLoss, &mut value) };
        assert_eq!(status, FedsimStatus::OutOfRange);
        let message = take_string(fedsim_last_error_message());
        assert!(message.contains("99"), "{message}");
        unsafe { fedsim_run_free(run) };
    }

    #[test]
    fn csv_and_summary_strings() {
        let run = run_desk();

        let mut csv: *mut c_char = ptr::null_mut();
        assert_eq!(
            unsafe { fedsim_run_metrics_csv(run, &mut csv) },
            FedsimStatus::Ok
        );
        let csv = take_string(csv);
        assert_eq!(csv.lines().count(), 1 + 2);
        assert!(csv.starts_with("round,test_loss,test_accuracy"));

        let mut ledger: *mut c_char = ptr::null_mut();
        assert_eq!(
            unsafe { fedsim_run_ledger_csv(run, &mut ledger) },
            FedsimStatus::Ok
        );
        let ledger = take_string(ledger);
        assert_eq!(ledger.lines().count(), 1 + 2 * 6);

        let mut json: *mut c_char = ptr::null_mut();
        assert_eq!(
            unsafe { fedsim_run_summary_json(run, &mut json) },
            FedsimStatus::Ok
        );
        let json = take_string(json);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["strategy"], "mechanism");

        unsafe { fedsim_run_free(run) };
    }

    #[test]
    fn null_and_invalid_arguments() {
        let mut run: *mut FedsimRun = ptr::null_mut();
        assert_eq!(
            unsafe { fedsim_run_toml(ptr::null(), &mut run) },
            FedsimStatus::NullArgument
        );

        let bad = CString::new("rounds = \"many\"").unwrap();
        assert_eq!(
            unsafe { fedsim_run_toml(bad.as_ptr(), &mut run) },
            FedsimStatus::ConfigError
        );
        let message = take_string(fedsim_last_error_message());
        assert!(!message.is_empty());

        let missing_files = CString::new("[dataset]\nkind = \"idx\"\ntrain_images = \"/nope\"")
            .unwrap();
        assert_eq!(
            unsafe { fedsim_run_toml(missing_files.as_ptr(), &mut run) },
            FedsimStatus::IoError
        );

        unsafe { fedsim_run_free(ptr::null_mut()) };
        unsafe { fedsim_string_free(ptr::null_mut()) };
    }

    #[test]
    fn generated_header_exists_and_declares_the_api() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("include")
            .join("fedsim.h");
        let text = std::fs::read_to_string(header).expect("header generated by build.rs");
        for symbol in [
            "fedsim_run_toml",
            "fedsim_run_free",
            "fedsim_run_rounds",
            "fedsim_run_metric",
            "fedsim_run_summary_json",
            "fedsim_run_metrics_csv",
            "fedsim_run_ledger_csv",
            "fedsim_last_error_message",
            "fedsim_string_free",
            "fedsim_version",
            "FedsimStatus",
            "FedsimMetric",
            "FedsimRun",
        ] {
            assert!(text.contains(symbol), "header missing {symbol}");
        }
    }
}

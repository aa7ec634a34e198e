//! Number formatting for emitted CSV/JSON artifacts.

/// Format with 17 significant digits so parsing the text recovers the exact
/// `f64` and repeated runs produce byte-identical files.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

//! Output formatting shared by the library and the command line.

/// Shortest-round-trip is not stable across formatters, so floats are
/// always printed with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    format!("{v:.16e}")
}

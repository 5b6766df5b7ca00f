//! Float formatting shared by every CSV writer.

/// Rounds to 12 significant digits, then prints the shortest string that
/// round-trips the rounded value.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("scientific float parses");
    if rounded == 0.0 {
        return "0".to_string();
    }
    format!("{rounded}")
}

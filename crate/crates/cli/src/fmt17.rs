//! Number formatting shared by every output path: 17 significant
//! digits, which round-trips any binary64 value exactly, so outputs can
//! be compared byte-for-byte across implementations.

/// A finite f64 at 17 significant digits in exponent form; this is a
/// valid JSON number.
pub fn f64_17(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON rendering of a possibly infinite reading: finite values as
/// numbers, infinities as the strings "inf" / "-inf".
pub fn json_extended(x: f64) -> String {
    if x == f64::INFINITY {
        "\"inf\"".to_string()
    } else if x == f64::NEG_INFINITY {
        "\"-inf\"".to_string()
    } else {
        f64_17(x)
    }
}

//! Real-number formatting shared by every CSV writer.

/// Rounds `x` to six significant digits.
pub fn round_sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// Formats a real with at most six significant digits and no trailing zeros.
///
/// `fmt_real(x).parse::<f64>()` equals `round_sig6(x)` exactly.
pub fn fmt_real(x: f64) -> String {
    let r = round_sig6(x);
    if r == 0.0 {
        "0".to_owned()
    } else {
        format!("{r}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_to_six_digits() {
        assert_eq!(fmt_real(0.15000000000000002), "0.15");
        assert_eq!(fmt_real(1.0 / 3.0), "0.333333");
        assert_eq!(fmt_real(123456789.0), "123457000");
        assert_eq!(fmt_real(-0.0), "0");
        assert_eq!(fmt_real(10.0), "10");
    }

    #[test]
    fn parse_matches_rounding() {
        for x in [0.1234567, 98.76543, 1e-7 * 3.3, 0.30000000000000004, 7.0] {
            assert_eq!(fmt_real(x).parse::<f64>().unwrap(), round_sig6(x));
        }
    }
}

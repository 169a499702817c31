//! Fixed six-significant-digit formatting used by every text output.

/// Formats like C's `%.6g`: six significant digits, trailing zeros trimmed,
/// scientific notation outside `[1e-4, 1e6)`.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // exponent after rounding to six digits, so 999999.7 counts as 1e6
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let e: i32 = exp.parse().expect("exponent");
    if !(-4..6).contains(&e) {
        let sign = if e < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mant), e.abs())
    } else {
        let decimals = (5 - e).max(0) as usize;
        trim(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn matches_printf_g() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(2.7320508), "2.73205");
        assert_eq!(sig6(0.8), "0.8");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(999999.7), "1e+06");
        assert_eq!(sig6(1234567.0), "1.23457e+06");
        assert_eq!(sig6(0.0000123456), "1.23456e-05");
        assert_eq!(sig6(0.000123456), "0.000123456");
        assert_eq!(sig6(-42.5), "-42.5");
        assert_eq!(sig6(3.999), "3.999");
    }
}

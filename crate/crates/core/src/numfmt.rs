//! Decimal formatting helpers shared by the text file formats.

/// Rounds `x` to six significant digits.
pub fn round_sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    // Going through the `e` formatter gives correctly rounded decimal digits.
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// `%g`-style rendering with six significant digits: plain decimal for
/// exponents in [-4, 6), scientific otherwise, trailing zeros removed.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("e-format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, round_sig6(x)))
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_like_printf_g() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(12.0), "12");
        assert_eq!(sig6(2.3333333333), "2.33333");
        assert_eq!(sig6(-0.5), "-0.5");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.000012345678), "1.23457e-5");
        assert_eq!(sig6(0.00012345678), "0.000123457");
        assert_eq!(sig6(1e-8), "1e-8");
    }

    proptest::proptest! {
        #[test]
        fn rendering_rounded_values_is_stable(x in -1e9f64..1e9) {
            let r = round_sig6(x);
            let text = sig6(r);
            let back: f64 = text.parse().unwrap();
            proptest::prop_assert_eq!(back, r);
            proptest::prop_assert_eq!(sig6(back), text);
        }
    }
}

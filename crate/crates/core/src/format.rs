//! Number formatting shared by the CSV writers.

/// Formats like C's `%.12g`: 12 significant digits, trailing zeros dropped,
/// exponent notation outside `[1e−4, 1e12)`.
pub fn g12(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::g12;

    #[test]
    fn matches_printf_g() {
        assert_eq!(g12(0.0), "0");
        assert_eq!(g12(1.0), "1");
        assert_eq!(g12(-2.5), "-2.5");
        assert_eq!(g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(g12(std::f64::consts::FRAC_1_SQRT_2), "0.707106781187");
        assert_eq!(g12(123456.789), "123456.789");
        assert_eq!(g12(1.5e-7), "1.5e-07");
        assert_eq!(g12(2.0e13), "2e+13");
        assert_eq!(g12(0.0001), "0.0001");
        assert_eq!(g12(9.08e-5), "9.08e-05");
        assert_eq!(g12(999999999999.7), "1e+12");
    }
}

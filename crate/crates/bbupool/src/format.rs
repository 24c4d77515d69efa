/// `x` to `digits` significant digits, trailing zeros dropped, switching to
/// exponent form for very large or small magnitudes.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{:.*e}", digits - 1, x);
        let (mantissa, e) = s.split_once('e').unwrap_or((&s, "0"));
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{e}")
    }
}

/// Six significant digits, the precision of every printed report.
pub fn g6(x: f64) -> String {
    sig(x, 6)
}

/// `0.99` -> `p99`, `0.999` -> `p99.9`.
pub fn percentile_label(zeta: f64) -> String {
    format!("p{}", sig(zeta * 100.0, 6))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(g6(4.704523), "4.70452");
        assert_eq!(g6(0.87166), "0.87166");
        assert_eq!(g6(20.0), "20");
        assert_eq!(g6(123456789.0), "1.23457e8");
        assert_eq!(g6(4.7743e-11), "4.7743e-11");
        assert_eq!(g6(0.0), "0");
        assert_eq!(g6(-0.0), "0");
        assert_eq!(g6(-0.5), "-0.5");
    }

    #[test]
    fn labels() {
        assert_eq!(percentile_label(0.99), "p99");
        assert_eq!(percentile_label(0.999), "p99.9");
        assert_eq!(percentile_label(0.5), "p50");
    }
}

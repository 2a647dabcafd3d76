//! Deterministic text rendering of numbers and class vectors.

/// Formats `x` with `digits` significant digits, `%g` style: trailing
/// zeros are stripped and scientific notation is used only for very large
/// or very small magnitudes.
pub fn sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // Round once in scientific form so the exponent reflects the rounding.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        let m = strip_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    strip_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Probabilities are printed with 12 significant digits.
pub fn prob(x: f64) -> String {
    sig(x, 12)
}

/// Distances are printed with 9 significant digits.
pub fn dist(x: f64) -> String {
    sig(x, 9)
}

/// Renders a class vector as `[k1,k2,...]`.
pub fn class_vector(k: &[u32]) -> String {
    let parts: Vec<String> = k.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(","))
}

/// Parses `[k1,k2,...]` or a bare `k1,k2,...` list.
pub fn parse_class_vector(s: &str) -> Option<Vec<u32>> {
    let s = s.trim().trim_start_matches('[').trim_end_matches(']');
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(|p| p.trim().parse().ok()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(prob(0.28125), "0.28125");
        assert_eq!(prob(1.0), "1");
        assert_eq!(prob(1.0 / 3.0), "0.333333333333");
        assert_eq!(prob(0.015625), "0.015625");
        assert_eq!(dist(0.430_663_126_4), "0.430663126");
        assert_eq!(prob(2.5e-7), "2.5e-7");
        assert_eq!(sig(123456.0, 3), "1.23e5");
        assert_eq!(sig(-0.5, 3), "-0.5");
        assert_eq!(sig(0.999_999_999_999_9, 12), "1");
    }

    #[test]
    fn class_vector_text() {
        assert_eq!(class_vector(&[2, 3, 1, 2]), "[2,3,1,2]");
        assert_eq!(parse_class_vector("[2,3,1,2]"), Some(vec![2, 3, 1, 2]));
        assert_eq!(parse_class_vector("2, 3"), Some(vec![2, 3]));
        assert_eq!(parse_class_vector("2,x"), None);
    }
}

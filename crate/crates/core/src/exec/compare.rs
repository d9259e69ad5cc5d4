//! Canonical scalar rendering and result comparison.
//!
//! Scalars render to strings (integers without a decimal point, reals with 6
//! significant digits, NULL as a sentinel ordered first) so that the
//! order-insensitive fix can sort each column under a total order.

use super::{ExecResult, Scalar};

/// Canonical sort/compare key: `None` is the NULL sentinel and orders before
/// every rendered value.
pub fn canonical_scalar(s: &Scalar) -> Option<String> {
    match s {
        Scalar::Null => None,
        Scalar::Int(i) => Some(i.to_string()),
        Scalar::Real(f) => Some(format_g6(*f)),
        Scalar::Text(t) => Some(t.clone()),
        Scalar::Blob(b) => {
            let hex: String = b.iter().map(|byte| format!("{byte:02x}")).collect();
            Some(format!("blob:{hex}"))
        }
    }
}

/// `%.6g`-style rendering: 6 significant digits, trailing zeros stripped,
/// scientific notation outside [1e-4, 1e6). An integral real thus renders
/// like the corresponding integer ("56", not "56.0").
pub fn format_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.5e}", x); // mantissa.ddddd e exponent
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), 6);

    let body = if exp < -4 || exp >= 6 {
        let trimmed = digits.trim_end_matches('0');
        let trimmed = if trimmed.is_empty() { "0" } else { trimmed };
        if trimmed.len() == 1 {
            format!("{trimmed}e{exp}")
        } else {
            format!("{}.{}e{exp}", &trimmed[..1], &trimmed[1..])
        }
    } else if exp >= 0 {
        let point = exp as usize + 1;
        let int_part = &digits[..point];
        let frac = digits[point..].trim_end_matches('0');
        if frac.is_empty() {
            int_part.to_string()
        } else {
            format!("{int_part}.{frac}")
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        let frac = format!("{zeros}{digits}");
        let frac = frac.trim_end_matches('0');
        format!("0.{frac}")
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

/// Compares two results. Order-sensitive comparison matches column lists
/// row by row; otherwise each column is sorted independently by its
/// canonical rendering first. Column and row counts must match either way.
pub fn compare_results(gold: &ExecResult, pred: &ExecResult, order_sensitive: bool) -> bool {
    if gold.columns.len() != pred.columns.len() || gold.row_count != pred.row_count {
        return false;
    }
    for (g_col, p_col) in gold.columns.iter().zip(&pred.columns) {
        let mut g: Vec<Option<String>> = g_col.iter().map(canonical_scalar).collect();
        let mut p: Vec<Option<String>> = p_col.iter().map(canonical_scalar).collect();
        if !order_sensitive {
            g.sort();
            p.sort();
        }
        if g != p {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(vals: Vec<Scalar>) -> ExecResult {
        let row_count = vals.len();
        ExecResult { columns: vec![vals], row_count }
    }

    #[test]
    fn g6_rendering() {
        assert_eq!(format_g6(56.0), "56");
        assert_eq!(format_g6(2.5), "2.5");
        assert_eq!(format_g6(0.1 + 0.2), "0.3");
        assert_eq!(format_g6(-3.0), "-3");
        assert_eq!(format_g6(1234567.0), "1.23457e6");
        assert_eq!(format_g6(0.00001), "1e-5");
        assert_eq!(format_g6(-0.0), "0");
        assert_eq!(format_g6(123456.0), "123456");
        assert_eq!(format_g6(999999.5), "1e6");
    }

    #[test]
    fn integral_real_matches_integer() {
        assert_eq!(canonical_scalar(&Scalar::Real(10.0)), canonical_scalar(&Scalar::Int(10)));
    }

    #[test]
    fn identical_results_compare_equal() {
        let a = col(vec![Scalar::Int(1), Scalar::Int(2)]);
        assert!(compare_results(&a, &a.clone(), true));
        assert!(compare_results(&a, &a.clone(), false));
    }

    #[test]
    fn row_order_only_matters_when_sensitive() {
        let a = col(vec![Scalar::Int(1), Scalar::Int(2)]);
        let b = col(vec![Scalar::Int(2), Scalar::Int(1)]);
        assert!(compare_results(&a, &b, false));
        assert!(!compare_results(&a, &b, true));
    }

    #[test]
    fn per_column_sort_ignores_row_pairing() {
        // Rows (1, 'x'), (2, 'y') vs (1, 'y'), (2, 'x'): each column sorts
        // equal even though the row pairing differs. Documented semantics of
        // the order-insensitive fix.
        let a = ExecResult {
            columns: vec![
                vec![Scalar::Int(1), Scalar::Int(2)],
                vec![Scalar::Text("x".into()), Scalar::Text("y".into())],
            ],
            row_count: 2,
        };
        let b = ExecResult {
            columns: vec![
                vec![Scalar::Int(1), Scalar::Int(2)],
                vec![Scalar::Text("y".into()), Scalar::Text("x".into())],
            ],
            row_count: 2,
        };
        assert!(compare_results(&a, &b, false));
        assert!(!compare_results(&a, &b, true));
    }

    #[test]
    fn null_sorts_first_and_only_equals_null() {
        let a = col(vec![Scalar::Null, Scalar::Text(String::new())]);
        let b = col(vec![Scalar::Text(String::new()), Scalar::Null]);
        assert!(compare_results(&a, &b, false));
        let c = col(vec![Scalar::Text(String::new()), Scalar::Text(String::new())]);
        assert!(!compare_results(&a, &c, false));
    }

    #[test]
    fn shape_mismatch_is_unequal() {
        let a = col(vec![Scalar::Int(1)]);
        let b = col(vec![Scalar::Int(1), Scalar::Int(1)]);
        assert!(!compare_results(&a, &b, false));
        let two_cols = ExecResult {
            columns: vec![vec![Scalar::Int(1)], vec![Scalar::Int(1)]],
            row_count: 1,
        };
        assert!(!compare_results(&a, &two_cols, false));
    }
}

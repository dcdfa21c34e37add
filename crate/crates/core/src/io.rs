//! JSON matrix files, CSV tables and float formatting.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HypoError, Result};
use crate::operator::{validate, ComplexMatrix};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Complex([f64; 2]),
    Real(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixFile {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<Entry>,
}

/// Parses a row-major JSON matrix; entries are `[re, im]` pairs or bare reals.
pub fn parse_matrix(text: &str) -> Result<ComplexMatrix> {
    let file: MatrixFile = serde_json::from_str(text)?;
    if file.entries.len() != file.n_rows * file.n_cols {
        return Err(HypoError::Dimension(format!(
            "{} entries given for a {}x{} matrix",
            file.entries.len(),
            file.n_rows,
            file.n_cols
        )));
    }
    let values: Vec<Complex64> = file
        .entries
        .iter()
        .map(|e| match e {
            Entry::Complex([re, im]) => Complex64::new(*re, *im),
            Entry::Real(re) => Complex64::new(*re, 0.0),
        })
        .collect();
    let m = ComplexMatrix::from_row_slice(file.n_rows, file.n_cols, &values);
    validate(&m)?;
    Ok(m)
}

/// JSON value of a matrix with `[re, im]` entries.
pub fn matrix_value(m: &ComplexMatrix) -> serde_json::Value {
    let mut entries = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            entries.push(Entry::Complex([z.re, z.im]));
        }
    }
    serde_json::to_value(MatrixFile { n_rows: m.nrows(), n_cols: m.ncols(), entries })
        .expect("matrix file serializes")
}

pub fn matrix_to_json(m: &ComplexMatrix) -> String {
    serde_json::to_string(&matrix_value(m)).expect("json value serializes")
}

/// Formats a float with 17 significant digits, dropping trailing zeros.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exponent) = sci.split_once('e').expect("scientific format has an exponent");
    let exponent: i32 = exponent.parse().expect("exponent is an integer");
    let negative = mantissa.starts_with('-');
    let mut digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    while digits.len() > 1 && digits.ends_with('0') {
        digits.pop();
    }
    let sign = if negative { "-" } else { "" };
    let body = if (-5..17).contains(&exponent) {
        if exponent >= 0 {
            let int_len = exponent as usize + 1;
            if digits.len() <= int_len {
                format!("{digits}{}", "0".repeat(int_len - digits.len()))
            } else {
                format!("{}.{}", &digits[..int_len], &digits[int_len..])
            }
        } else {
            format!("0.{}{digits}", "0".repeat((-exponent - 1) as usize))
        }
    } else if digits.len() == 1 {
        format!("{digits}e{exponent}")
    } else {
        format!("{}.{}e{exponent}", &digits[..1], &digits[1..])
    };
    format!("{sign}{body}")
}

/// CSV text with a header row and `\n` line endings.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

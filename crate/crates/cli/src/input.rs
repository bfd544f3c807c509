//! Reading generating functions from flags and files.

use std::path::Path;

use pgf_clt::{DiscretePmf, PgfPoly};
use serde_json::Value;

use crate::error::CliError;

fn decimals(v: &Value, what: &str) -> Result<Vec<f64>, CliError> {
    pgf_clt::decimal::vec::deserialize(v).map_err(|e| CliError::precondition(format!("{what}: {e}")))
}

fn poly(c: Vec<f64>, normalize: bool, what: &str) -> Result<PgfPoly, CliError> {
    let r = if normalize { PgfPoly::normalize(&c) } else { PgfPoly::new(&c) };
    r.map_err(|e| CliError::precondition(format!("{what}: {e}")))
}

/// One generating polynomial: an array of coefficients (numbers or decimal
/// strings), `{"coeffs": [...]}`, or a pmf `{"probs": [...], "span": k}`.
fn one(v: &Value, normalize: bool, what: &str) -> Result<PgfPoly, CliError> {
    match v {
        Value::Array(_) => poly(decimals(v, what)?, normalize, what),
        Value::Object(m) if m.contains_key("coeffs") => poly(decimals(&m["coeffs"], &format!("{what}.coeffs"))?, normalize, what),
        Value::Object(m) if m.contains_key("probs") => {
            let pmf: DiscretePmf = serde_json::from_value(v.clone()).map_err(|e| CliError::precondition(format!("{what}: {e}")))?;
            Ok(PgfPoly::from_pmf(&pmf))
        }
        Value::Object(_) => Err(CliError::precondition(format!("{what}: missing field `coeffs` (or `probs`)"))),
        _ => Err(CliError::precondition(format!("{what}: expected an array of coefficients or an object with `coeffs`"))),
    }
}

fn is_batch(v: &Value) -> bool {
    match v {
        Value::Array(items) => items.first().is_some_and(|x| x.is_array() || x.is_object()),
        _ => false,
    }
}

pub fn parse_json(text: &str, what: &str) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::precondition(format!("{what}: malformed JSON: {e}")))
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::precondition(format!("--input {}: {e}", path.display())))
}

/// Polynomials from `--coeffs` or `--input`; a file holding an array of
/// polynomials yields a batch.
pub fn polys(coeffs: Option<&str>, input: Option<&Path>, normalize: bool) -> Result<Vec<PgfPoly>, CliError> {
    let (text, what) = match (coeffs, input) {
        (Some(c), None) => (c.to_string(), "--coeffs".to_string()),
        (None, Some(p)) => (read_file(p)?, format!("--input {}", p.display())),
        (Some(_), Some(_)) => return Err(CliError::precondition("give either --coeffs or --input, not both")),
        (None, None) => return Err(CliError::precondition("missing --coeffs or --input")),
    };
    let v = parse_json(&text, &what)?;
    if is_batch(&v) {
        let items = v.as_array().expect("checked");
        if items.is_empty() {
            return Err(CliError::precondition(format!("{what}: empty batch")));
        }
        items.iter().enumerate().map(|(i, x)| one(x, normalize, &format!("{what}[{i}]"))).collect()
    } else {
        Ok(vec![one(&v, normalize, &what)?])
    }
}

/// Comma-separated unsigned integers, e.g. `1,2,0`.
pub fn direction(s: &str) -> Result<Vec<u32>, String> {
    s.split(',').map(|t| t.trim().parse::<u32>().map_err(|e| format!("`{t}`: {e}"))).collect()
}

//! Reading and validating the replicate data document.

use ndarray::{Array1, Array2};
use serde_json::{Map, Value};

use eivglm::eiv::ReplicateDataset;

use crate::{CliError, FamilyArg};

pub const SCHEMA_VERSION: u64 = 1;

const KEYS: [&str; 5] = ["schema_version", "y", "replicates", "m", "omega_u_diag"];

/// A validated input document.
#[derive(Debug, Clone)]
pub struct InputData {
    pub data: ReplicateDataset<f64>,
    pub trials: Option<Vec<u32>>,
    pub omega_u_diag: Option<Array1<f64>>,
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("invalid data at `{path}`: {msg}"))
}

fn number(v: &Value, path: &str) -> Result<f64, CliError> {
    v.as_f64().ok_or_else(|| invalid(path, "expected a number"))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, CliError> {
    v.as_array().ok_or_else(|| invalid(path, "expected an array"))
}

fn numbers(v: &Value, path: &str) -> Result<Vec<f64>, CliError> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(k, e)| number(e, &format!("{path}[{k}]")))
        .collect()
}

pub fn read(path: &std::path::Path) -> Result<InputData, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let doc: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{} is not valid JSON: {e}", path.display())))?;
    parse(&doc)
}

pub fn parse(doc: &Value) -> Result<InputData, CliError> {
    let obj: &Map<String, Value> = doc.as_object().ok_or_else(|| invalid("$", "expected an object"))?;
    if let Some(k) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(invalid(k, "unknown key"));
    }
    if let Some(v) = obj.get("schema_version") {
        if v.as_u64() != Some(SCHEMA_VERSION) {
            return Err(invalid("schema_version", format!("unsupported version {v}, expected {SCHEMA_VERSION}")));
        }
    }

    let y = numbers(obj.get("y").ok_or_else(|| invalid("y", "missing"))?, "y")?;
    let reps = array(obj.get("replicates").ok_or_else(|| invalid("replicates", "missing"))?, "replicates")?;
    if reps.len() != y.len() {
        return Err(invalid("replicates", format!("{} blocks for {} responses", reps.len(), y.len())));
    }
    if y.is_empty() {
        return Err(invalid("y", "no observations"));
    }

    let mut p = None;
    let mut blocks = Vec::with_capacity(reps.len());
    for (i, block) in reps.iter().enumerate() {
        let rows = array(block, &format!("replicates[{i}]"))?;
        if rows.is_empty() {
            return Err(invalid(&format!("replicates[{i}]"), "no replicate rows"));
        }
        let mut flat = Vec::new();
        for (j, row) in rows.iter().enumerate() {
            let at = format!("replicates[{i}][{j}]");
            let vals = numbers(row, &at)?;
            let width = *p.get_or_insert(vals.len());
            if vals.len() != width || width == 0 {
                return Err(invalid(&at, format!("row has {} entries, expected {width}", vals.len())));
            }
            flat.extend(vals);
        }
        let width = p.unwrap_or(0);
        blocks.push(Array2::from_shape_vec((rows.len(), width), flat).expect("rectangular block"));
    }
    let p = p.unwrap_or(0);

    let trials = match obj.get("m") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let vals = array(v, "m")?;
            if vals.len() != y.len() {
                return Err(invalid("m", format!("length {} differs from y ({})", vals.len(), y.len())));
            }
            let m = vals
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    e.as_u64()
                        .filter(|&t| t >= 1 && t <= u64::from(u32::MAX))
                        .map(|t| t as u32)
                        .ok_or_else(|| invalid(&format!("m[{i}]"), "expected a positive integer"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(m)
        }
    };

    let omega_u_diag = match obj.get("omega_u_diag") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let o = numbers(v, "omega_u_diag")?;
            if o.len() != p {
                return Err(invalid("omega_u_diag", format!("length {} differs from p = {p}", o.len())));
            }
            if let Some(j) = o.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(invalid(&format!("omega_u_diag[{j}]"), "must be positive"));
            }
            Some(Array1::from(o))
        }
    };

    let data = ReplicateDataset::new(Array1::from(y), blocks).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(InputData {
        data,
        trials,
        omega_u_diag,
    })
}

/// Checks the response against the family's support.
pub fn check_response(input: &InputData, family: FamilyArg) -> Result<(), CliError> {
    let y = input.data.y();
    match family {
        FamilyArg::Gaussian => Ok(()),
        FamilyArg::Binomial => match y.iter().position(|&v| v != 0.0 && v != 1.0) {
            Some(i) => Err(invalid(&format!("y[{i}]"), format!("binomial response {} is not 0 or 1", y[i]))),
            None => Ok(()),
        },
        FamilyArg::Negbin => {
            let m = input
                .trials
                .as_ref()
                .ok_or_else(|| invalid("m", "trial counts are required for the negbin family"))?;
            match y
                .iter()
                .zip(m)
                .position(|(&v, &t)| !(v >= 0.0 && v.fract() == 0.0 && v <= f64::from(t)))
            {
                Some(i) => Err(invalid(
                    &format!("y[{i}]"),
                    format!("count {} must be an integer in 0..={}", y[i], m[i]),
                )),
                None => Ok(()),
            }
        }
    }
}

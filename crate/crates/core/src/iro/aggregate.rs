use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

use super::{Aggregation, CoefficientTrace};

/// Summarizes one coordinate's values. `values` is reordered.
pub fn aggregate_values<T: Scalar>(values: &mut [T], method: Aggregation) -> Result<T> {
    let k = values.len();
    if k == 0 {
        return Err(Error::domain("cannot aggregate an empty trace"));
    }
    method.validate()?;
    let mean = |v: &[T]| v.iter().copied().sum::<T>() / T::of_usize(v.len());
    Ok(match method {
        Aggregation::Mean => mean(values),
        Aggregation::Median => {
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite coefficients"));
            if k % 2 == 1 {
                values[k / 2]
            } else {
                (values[k / 2 - 1] + values[k / 2]) * T::of(0.5)
            }
        }
        Aggregation::Trimmed { alpha } => {
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite coefficients"));
            let g = (alpha * k as f64).floor() as usize;
            mean(&values[g..k - g])
        }
    })
}

/// Coordinatewise aggregate of the retained coefficient vectors.
pub fn aggregate_coefficients<T: Scalar>(trace: &CoefficientTrace<T>, method: Aggregation) -> Result<Array1<T>> {
    let retained = &trace.retained;
    if retained.is_empty() {
        return Err(Error::domain("cannot aggregate an empty trace"));
    }
    let p = retained[0].beta.len();
    let mut column = vec![T::zero(); retained.len()];
    let mut out = Array1::zeros(p);
    for j in 0..p {
        for (c, e) in column.iter_mut().zip(retained) {
            *c = e.beta[j];
        }
        out[j] = aggregate_values(&mut column, method)?;
    }
    Ok(out)
}

/// Split-half potential scale reduction per coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitChainDiagnostic {
    pub rhat: Vec<f64>,
    /// Coefficients with no within-half variation, reported as 1.
    pub flagged: Vec<usize>,
}

/// Splits the retained trace into two halves (dropping the middle draw when
/// the length is odd) and computes `sqrt(V̂ / W)` per coefficient, where
/// `W` is the mean within-half variance and
/// `V̂ = (m−1)/m·W + B/m` with `B` the between-half variance times `m`.
pub fn split_chain_diagnostic<T: Scalar>(trace: &CoefficientTrace<T>) -> Result<SplitChainDiagnostic> {
    let k = trace.retained.len();
    if k < 4 {
        return Err(Error::domain(format!(
            "split-chain diagnostic needs at least 4 retained iterations, got {k}"
        )));
    }
    let m = k / 2;
    let p = trace.retained[0].beta.len();
    let mf = m as f64;
    let mut rhat = Vec::with_capacity(p);
    let mut flagged = Vec::new();
    for j in 0..p {
        let first: Vec<f64> = trace.retained[..m].iter().map(|e| e.beta[j].to_f64_lossy()).collect();
        let second: Vec<f64> = trace.retained[k - m..].iter().map(|e| e.beta[j].to_f64_lossy()).collect();
        let (m1, v1) = mean_var(&first);
        let (m2, v2) = mean_var(&second);
        let w = 0.5 * (v1 + v2);
        if w <= 0.0 {
            rhat.push(1.0);
            flagged.push(j);
            continue;
        }
        let grand = 0.5 * (m1 + m2);
        let b = mf * ((m1 - grand).powi(2) + (m2 - grand).powi(2));
        let v = (mf - 1.0) / mf * w + b / mf;
        rhat.push((v / w).sqrt());
    }
    Ok(SplitChainDiagnostic { rhat, flagged })
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

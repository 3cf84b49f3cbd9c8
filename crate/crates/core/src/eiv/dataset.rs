use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Responses plus, for every observation, an `r_i × p` block of contaminated
/// replicate rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateDataset<T> {
    y: Array1<T>,
    blocks: Vec<Array2<T>>,
    p: usize,
}

impl<T: Scalar> ReplicateDataset<T> {
    pub fn new(y: Array1<T>, blocks: Vec<Array2<T>>) -> Result<Self> {
        Error::check_len("replicate blocks", y.len(), blocks.len())?;
        if blocks.is_empty() {
            return Err(Error::domain("dataset has no observations"));
        }
        let p = blocks[0].ncols();
        if p == 0 {
            return Err(Error::domain("replicate blocks have zero width"));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.ncols() != p {
                return Err(Error::domain(format!(
                    "replicate block {i} has width {}, expected {p}",
                    b.ncols()
                )));
            }
            if b.nrows() == 0 {
                return Err(Error::domain(format!("observation {i} has no replicates")));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("replicate block {i} has non-finite entries")));
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("response has non-finite entries"));
        }
        Ok(Self { y, blocks, p })
    }

    /// Builds a dataset whose replicates are exact copies of `x`'s rows.
    pub fn from_exact(y: Array1<T>, x: &Array2<T>, replicates: usize) -> Result<Self> {
        let blocks = x
            .rows()
            .into_iter()
            .map(|row| {
                let mut b = Array2::zeros((replicates, row.len()));
                for mut r in b.rows_mut() {
                    r.assign(&row);
                }
                b
            })
            .collect();
        Self::new(y, blocks)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn y(&self) -> &Array1<T> {
        &self.y
    }

    pub fn block(&self, i: usize) -> ArrayView2<'_, T> {
        self.blocks[i].view()
    }

    pub fn blocks(&self) -> &[Array2<T>] {
        &self.blocks
    }

    pub fn replicate_counts(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    /// Running mean of the replicate rows; exact when all rows are equal.
    pub fn replicate_mean(&self, i: usize) -> Array1<T> {
        let block = &self.blocks[i];
        let mut m = block.row(0).to_owned();
        for (k, row) in block.rows().into_iter().enumerate().skip(1) {
            let w = T::one() / T::of_usize(k + 1);
            m.zip_mut_with(&row, |a, &b| *a += (b - *a) * w);
        }
        m
    }

    /// `n × p` matrix of replicate averages.
    pub fn wbar(&self) -> Array2<T> {
        let mut out = Array2::zeros((self.n(), self.p));
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            row.assign(&self.replicate_mean(i));
        }
        out
    }

    /// Copy with the column means of `w̄` subtracted from every replicate,
    /// together with those means.
    pub fn centered(&self) -> (Self, Array1<T>) {
        let means = self.wbar().mean_axis(Axis(0)).expect("n >= 1");
        let blocks = self.blocks.iter().map(|b| b - &means).collect();
        (
            Self {
                y: self.y.clone(),
                blocks,
                p: self.p,
            },
            means,
        )
    }

    pub fn with_response(&self, y: Array1<T>) -> Result<Self> {
        Self::new(y, self.blocks.clone())
    }
}

/// Diagonal covariate and noise precisions, with optional per-observation
/// noise precisions for heterogeneous contamination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionPair<T> {
    pub omega_x_diag: Array1<T>,
    pub omega_u_diag: Array1<T>,
    #[serde(default = "Option::default", skip_serializing_if = "Option::is_none")]
    pub omega_u_overrides: Option<Vec<Array1<T>>>,
}

fn check_positive<T: Scalar>(what: &str, v: &Array1<T>) -> Result<()> {
    match v.iter().position(|x| !(x.is_finite() && *x > T::zero())) {
        Some(j) => Err(Error::domain(format!("{what}[{j}] = {} must be positive", v[j]))),
        None => Ok(()),
    }
}

impl<T: Scalar> PrecisionPair<T> {
    pub fn new(omega_x_diag: Array1<T>, omega_u_diag: Array1<T>) -> Result<Self> {
        Error::check_len("noise precision", omega_x_diag.len(), omega_u_diag.len())?;
        check_positive("omega_x", &omega_x_diag)?;
        check_positive("omega_u", &omega_u_diag)?;
        Ok(Self {
            omega_x_diag,
            omega_u_diag,
            omega_u_overrides: None,
        })
    }

    pub fn with_overrides(mut self, overrides: Vec<Array1<T>>) -> Result<Self> {
        for (i, o) in overrides.iter().enumerate() {
            Error::check_len("per-observation noise precision", self.p(), o.len())?;
            check_positive(&format!("omega_u override {i}"), o)?;
        }
        self.omega_u_overrides = Some(overrides);
        Ok(self)
    }

    pub fn p(&self) -> usize {
        self.omega_x_diag.len()
    }

    pub fn omega_u_for(&self, i: usize) -> &Array1<T> {
        match &self.omega_u_overrides {
            Some(o) => &o[i],
            None => &self.omega_u_diag,
        }
    }

    /// `Λ⁻¹ = Ω_x + r·Ω_u` (pooled noise precision).
    pub fn combined_diag(&self, r: usize) -> Array1<T> {
        &self.omega_x_diag + &(&self.omega_u_diag * T::of_usize(r))
    }

    /// `Λ = (Ω_x + r·Ω_u)⁻¹`, entrywise.
    pub fn lambda_for(&self, r: usize) -> Array1<T> {
        self.combined_diag(r).mapv(|d| T::one() / d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_ragged_blocks() {
        let y = array![1.0, 2.0];
        let blocks = vec![Array2::zeros((2, 3)), Array2::zeros((2, 2))];
        assert!(ReplicateDataset::new(y, blocks).is_err());
    }

    #[test]
    fn replicate_mean_is_row_average() {
        let y = array![0.0];
        let blocks = vec![array![[1.0, 2.0], [3.0, 6.0], [5.0, 1.0]]];
        let d = ReplicateDataset::new(y, blocks).unwrap();
        assert_eq!(d.replicate_mean(0), array![3.0, 3.0]);
        assert_eq!(d.wbar().row(0), array![3.0, 3.0]);
    }

    #[test]
    fn exact_replicates_average_to_truth() {
        let x = array![[0.3f64, -1.2], [2.0, 0.1]];
        let d = ReplicateDataset::from_exact(array![1.0, 0.0], &x, 3).unwrap();
        assert!(d.wbar().iter().zip(x.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
        assert_eq!(d.replicate_counts(), vec![3, 3]);
    }

    #[test]
    fn centering_zeroes_column_means() {
        let y = array![0.0f64, 1.0];
        let blocks = vec![array![[1.0, 2.0], [3.0, 4.0]], array![[5.0, 0.0]]];
        let (c, means) = ReplicateDataset::new(y, blocks).unwrap().centered();
        assert_eq!(means, array![3.5, 1.5]);
        let m = c.wbar().mean_axis(Axis(0)).unwrap();
        assert!(m.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn lambda_uses_replicate_count() {
        let prec = PrecisionPair::new(array![1.0, 2.0], array![0.5, 4.0]).unwrap();
        assert_eq!(prec.lambda_for(2), array![0.5, 0.1]);
        assert!(PrecisionPair::new(array![1.0], array![0.0]).is_err());
    }
}

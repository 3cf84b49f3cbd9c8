use std::sync::OnceLock;

use ndarray::{Array1, Array2, ShapeBuilder};

use crate::Scalar;

/// Column-centered, unit-variance copy of a design matrix, stored
/// column-major so coordinate updates read contiguous columns.
///
/// Constant columns keep scale 0 and are excluded from fitting.
#[derive(Debug, Clone)]
pub struct Standardized<T> {
    pub(crate) x: Array2<T>,
    pub means: Array1<T>,
    pub scales: Array1<T>,
    /// Gram columns `X_sᵀ x_j / n`, filled on first use.
    gram: Vec<OnceLock<Vec<T>>>,
}

impl<T: Scalar> Standardized<T> {
    pub fn new(x: &Array2<T>) -> Self {
        let (n, p) = x.dim();
        let nf = T::of_usize(n.max(1));
        let mut xs = Array2::<T>::zeros((n, p).f());
        let mut means = Array1::zeros(p);
        let mut scales = Array1::zeros(p);
        for j in 0..p {
            let col = x.column(j);
            let mean = col.sum() / nf;
            let ss = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>();
            let sd = (ss / nf).sqrt();
            means[j] = mean;
            // relative test so a column of identical large values counts as constant
            let tiny = T::epsilon() * T::of(16.0) * (mean.abs() + T::one());
            if sd > tiny {
                scales[j] = sd;
                let mut out = xs.column_mut(j);
                for (o, &v) in out.iter_mut().zip(col.iter()) {
                    *o = (v - mean) / sd;
                }
            }
        }
        Self {
            x: xs,
            means,
            scales,
            gram: (0..p).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.x
    }

    #[inline]
    pub(crate) fn col(&self, j: usize) -> &[T] {
        self.x
            .column(j)
            .to_slice()
            .expect("column-major storage gives contiguous columns")
    }

    pub(crate) fn gram_col(&self, j: usize) -> &[T] {
        self.gram[j].get_or_init(|| {
            let nf = T::of_usize(self.nrows().max(1));
            let cj = self.col(j);
            (0..self.ncols())
                .map(|k| self.col(k).iter().zip(cj).map(|(&a, &b)| a * b).sum::<T>() / nf)
                .collect()
        })
    }

    #[inline]
    pub(crate) fn active(&self, j: usize) -> bool {
        self.scales[j] > T::zero()
    }

    /// Maps standardized coefficients back to the original scale.
    pub fn to_original(&self, beta_std: &Array1<T>) -> Array1<T> {
        beta_std
            .iter()
            .zip(self.scales.iter())
            .map(|(&b, &s)| if s > T::zero() { b / s } else { T::zero() })
            .collect()
    }

    /// Maps original-scale coefficients onto the standardized design.
    pub fn to_standardized(&self, beta: &Array1<T>) -> Array1<T> {
        beta.iter().zip(self.scales.iter()).map(|(&b, &s)| b * s).collect()
    }

    /// Intercept on the original scale given a standardized-scale intercept.
    pub fn intercept_to_original(&self, b0_std: T, beta: &Array1<T>) -> T {
        b0_std - self.means.dot(beta)
    }
}

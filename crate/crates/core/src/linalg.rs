//! Diagonal-plus-rank-1 precision matrices.
//!
//! Every imputation full conditional in this crate is a Gaussian whose
//! precision has the form `M = Diag(d) + s·v·vᵀ` and whose canonical mean
//! parameter is some vector `h`, i.e. the law is `N(M⁻¹h, M⁻¹)`. Both the
//! solve and the draw can be done without forming `M`.

use ndarray::{Array1, Array2, ArrayView1};

use crate::rng::RngStream;
use crate::{Error, Result, Scalar};

/// Smallest admissible diagonal entry.
pub const DIAG_FLOOR: f64 = 1e-12;

/// `M = Diag(diag) + scale · direction · directionᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagRank1Precision<T> {
    diag: Array1<T>,
    scale: T,
    direction: Array1<T>,
}

impl<T: Scalar> DiagRank1Precision<T> {
    pub fn new(diag: Array1<T>, scale: T, direction: Array1<T>) -> Result<Self> {
        Error::check_len("rank-1 direction", diag.len(), direction.len())?;
        if let Some((j, d)) = diag
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d >= T::of(DIAG_FLOOR)))
        {
            return Err(Error::domain(format!(
                "diagonal entry {j} = {d} is not a finite value >= {DIAG_FLOOR}"
            )));
        }
        if !(scale.is_finite() && scale >= T::zero()) {
            return Err(Error::domain(format!("rank-1 scale {scale} must be finite and >= 0")));
        }
        if direction.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("rank-1 direction has non-finite entries"));
        }
        Ok(Self {
            diag,
            scale,
            direction,
        })
    }

    /// Pure diagonal precision.
    pub fn diagonal(diag: Array1<T>) -> Result<Self> {
        let p = diag.len();
        Self::new(diag, T::zero(), Array1::zeros(p))
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &Array1<T> {
        &self.diag
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn direction(&self) -> &Array1<T> {
        &self.direction
    }

    pub fn to_dense(&self) -> Array2<T> {
        let p = self.dim();
        let mut m = Array2::zeros((p, p));
        for i in 0..p {
            for j in 0..p {
                m[[i, j]] = self.scale * self.direction[i] * self.direction[j];
            }
            m[[i, i]] += self.diag[i];
        }
        m
    }

    /// `M⁻¹h` in O(p) via Sherman-Morrison.
    pub fn solve(&self, h: ArrayView1<T>) -> Result<Array1<T>> {
        Error::check_len("right-hand side", self.dim(), h.len())?;
        let dinv_h: Array1<T> = h
            .iter()
            .zip(self.diag.iter())
            .map(|(&hj, &dj)| hj / dj)
            .collect();
        if self.scale == T::zero() {
            return Ok(dinv_h);
        }
        let mut v_dinv_h = T::zero();
        let mut v_dinv_v = T::zero();
        for ((&vj, &dj), &xj) in self.direction.iter().zip(self.diag.iter()).zip(dinv_h.iter()) {
            v_dinv_h += vj * xj;
            v_dinv_v += vj * vj / dj;
        }
        let coef = self.scale * v_dinv_h / (T::one() + self.scale * v_dinv_v);
        Ok(dinv_h
            .iter()
            .zip(self.direction.iter().zip(self.diag.iter()))
            .map(|(&x, (&vj, &dj))| x - coef * vj / dj)
            .collect())
    }

    /// Dense `M⁻¹`, formed column by column from [`solve`](Self::solve).
    pub fn covariance_dense(&self) -> Array2<T> {
        let p = self.dim();
        let mut cov = Array2::zeros((p, p));
        let mut e = Array1::zeros(p);
        for j in 0..p {
            e[j] = T::one();
            let col = self.solve(e.view()).expect("dimensions agree");
            cov.column_mut(j).assign(&col);
            e[j] = T::zero();
        }
        cov
    }

    /// One draw from `N(M⁻¹h, M⁻¹)` in O(p).
    ///
    /// Writes `M = D^{1/2}(I + s·ũũᵀ)D^{1/2}` with `ũ = D^{-1/2}v`; the
    /// symmetric inverse square root of the middle factor is `I + c·ũũᵀ` with
    /// `c = -s / (t(1+t))`, `t = sqrt(1 + s·ũᵀũ)`.
    pub fn sample(&self, h: ArrayView1<T>, rng: &mut RngStream) -> Result<Array1<T>> {
        let mean = self.solve(h)?;
        let p = self.dim();
        let inv_sqrt_d: Array1<T> = self.diag.mapv(|d| T::one() / d.sqrt());
        let eps: Array1<T> = Array1::from_shape_fn(p, |_| T::of(rng.std_normal()));
        if self.scale == T::zero() {
            return Ok(mean + &(eps * &inv_sqrt_d));
        }
        let u_tilde = &self.direction * &inv_sqrt_d;
        let q = u_tilde.dot(&u_tilde);
        let t = (T::one() + self.scale * q).sqrt();
        let c = -self.scale / (t * (T::one() + t));
        let proj = c * u_tilde.dot(&eps);
        let z = eps + &(u_tilde * proj);
        Ok(mean + &(z * &inv_sqrt_d))
    }

    /// One draw from `N(M⁻¹h, M⁻¹)` through a rank-1 update of the Cholesky
    /// factor `D^{1/2}` followed by a triangular solve, O(p²).
    pub fn sample_via_cholesky(&self, h: ArrayView1<T>, rng: &mut RngStream) -> Result<Array1<T>> {
        let mean = self.solve(h)?;
        let p = self.dim();
        let mut l = Array2::<T>::zeros((p, p));
        for j in 0..p {
            l[[j, j]] = self.diag[j].sqrt();
        }
        let mut x: Array1<T> = self.direction.mapv(|v| v * self.scale.sqrt());
        cholesky_rank1_update(&mut l, &mut x);
        let eps: Array1<T> = Array1::from_shape_fn(p, |_| T::of(rng.std_normal()));
        // Solve Lᵀ z = eps by back substitution, so Cov(z) = (L Lᵀ)⁻¹.
        let mut z = Array1::<T>::zeros(p);
        for i in (0..p).rev() {
            let mut acc = eps[i];
            for k in i + 1..p {
                acc -= l[[k, i]] * z[k];
            }
            z[i] = acc / l[[i, i]];
        }
        Ok(mean + &z)
    }
}

/// In-place update of a lower-triangular Cholesky factor: on return
/// `L Lᵀ ← L Lᵀ + x xᵀ`. `x` is consumed as workspace.
pub fn cholesky_rank1_update<T: Scalar>(l: &mut Array2<T>, x: &mut Array1<T>) {
    let p = x.len();
    for k in 0..p {
        let lkk = l[[k, k]];
        let r = (lkk * lkk + x[k] * x[k]).sqrt();
        let c = r / lkk;
        let s = x[k] / lkk;
        l[[k, k]] = r;
        for i in k + 1..p {
            l[[i, k]] = (l[[i, k]] + s * x[i]) / c;
            x[i] = c * x[i] - s * l[[i, k]];
        }
    }
}

/// `M⁻¹h` for a diagonal-plus-rank-1 precision.
pub fn solve_diag_rank1<T: Scalar>(m: &DiagRank1Precision<T>, h: ArrayView1<T>) -> Result<Array1<T>> {
    m.solve(h)
}

/// One draw from `N(M⁻¹h, M⁻¹)`.
pub fn sample_gaussian_diag_rank1<T: Scalar>(
    m: &DiagRank1Precision<T>,
    h: ArrayView1<T>,
    rng: &mut RngStream,
) -> Result<Array1<T>> {
    m.sample(h, rng)
}

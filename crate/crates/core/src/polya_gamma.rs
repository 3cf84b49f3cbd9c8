//! Pólya-Gamma random variables.
//!
//! `PG(b, c)` is the law of `(1/2π²) Σ_k g_k / ((k - 1/2)² + c²/(4π²))` with
//! `g_k ~ Ga(b, 1)` i.i.d. Integer shapes are sampled exactly as a sum of `b`
//! independent `PG(1, c)` draws, each obtained with Devroye's alternating
//! series accept/reject scheme for `J*(1, c/2) = 4·PG(1, c)`. Other shapes fall
//! back to the truncated series with [`FALLBACK_SERIES_TERMS`] terms; that path
//! is biased low by roughly `b / (2π² · terms)` in the mean and is best-effort
//! only. Cost of the exact path is linear in `b`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand_distr::{Distribution, Gamma};

use crate::rng::RngStream;
use crate::{Error, Result, Scalar};

/// Number of series terms used for non-integer shapes.
pub const FALLBACK_SERIES_TERMS: usize = 200;

/// Truncation point of the Devroye envelope.
const TRUNC: f64 = 0.64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgParams<T> {
    pub b: T,
    pub c: T,
}

impl<T: Scalar> PgParams<T> {
    pub fn new(b: T, c: T) -> Result<Self> {
        let p = Self { b, c };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b > T::zero()) {
            return Err(Error::domain(format!("Pólya-Gamma shape b = {} must be > 0", self.b)));
        }
        if !self.c.is_finite() {
            return Err(Error::domain("Pólya-Gamma tilt c must be finite"));
        }
        Ok(())
    }

    fn integer_shape(&self) -> Option<u64> {
        let b = self.b.to_f64_lossy();
        (b >= 1.0 && b.fract() == 0.0 && b <= u64::MAX as f64).then_some(b as u64)
    }
}

/// `E[PG(b, c)] = b/(2c) · tanh(c/2)`, with the limit `b/4` at `c = 0`.
pub fn pg_mean<T: Scalar>(params: PgParams<T>) -> T {
    let b = params.b.to_f64_lossy();
    let c = params.c.to_f64_lossy().abs();
    let m = if c < 1e-6 {
        // tanh(x)/x = 1 - x²/3 + O(x⁴) with x = c/2
        b / 4.0 * (1.0 - c * c / 12.0)
    } else {
        b / (2.0 * c) * (c / 2.0).tanh()
    };
    T::of(m)
}

/// One draw from `PG(b, c)`.
pub fn sample_pg<T: Scalar>(params: PgParams<T>, rng: &mut RngStream) -> Result<T> {
    params.validate()?;
    let c = params.c.to_f64_lossy();
    let z = match params.integer_shape() {
        Some(b) => (0..b).map(|_| sample_pg1(c, rng)).sum::<f64>(),
        None => series_draw(params.b.to_f64_lossy(), c, FALLBACK_SERIES_TERMS, rng),
    };
    Ok(T::of(z))
}

/// One draw from the series representation truncated after `terms` terms.
pub fn sample_pg_series<T: Scalar>(params: PgParams<T>, terms: usize, rng: &mut RngStream) -> Result<T> {
    params.validate()?;
    if terms == 0 {
        return Err(Error::domain("series sampler needs at least one term"));
    }
    Ok(T::of(series_draw(
        params.b.to_f64_lossy(),
        params.c.to_f64_lossy(),
        terms,
        rng,
    )))
}

fn series_draw(b: f64, c: f64, terms: usize, rng: &mut RngStream) -> f64 {
    let c2 = c * c / (4.0 * PI * PI);
    let mut acc = 0.0;
    if b == 1.0 {
        for k in 1..=terms {
            let kh = k as f64 - 0.5;
            acc += rng.exp1() / (kh * kh + c2);
        }
    } else {
        let gamma = Gamma::new(b, 1.0).expect("shape validated positive");
        for k in 1..=terms {
            let kh = k as f64 - 0.5;
            acc += gamma.sample(rng) / (kh * kh + c2);
        }
    }
    acc / (2.0 * PI * PI)
}

/// Standard normal log-CDF.
fn ln_phi(x: f64) -> f64 {
    if x < -37.0 {
        // Mills ratio asymptotics
        -0.5 * x * x - (-x).ln() - 0.5 * (2.0 * PI).ln()
    } else {
        (0.5 * libm::erfc(-x * FRAC_1_SQRT_2)).ln()
    }
}

/// n-th coefficient of the alternating series for the `J*(1, 0)` density,
/// piecewise around the truncation point.
fn series_coef(n: u32, x: f64) -> f64 {
    let k = (n as f64 + 0.5) * PI;
    if x > TRUNC {
        k * (-0.5 * k * k * x).exp()
    } else if x > 0.0 {
        let nh = n as f64 + 0.5;
        (-1.5 * ((0.5 * PI).ln() + x.ln()) + k.ln() - 2.0 * nh * nh / x).exp()
    } else {
        0.0
    }
}

/// Probability of proposing from the exponential tail, `p / (p + q)`.
fn mass_texpon(z: f64) -> f64 {
    let t = TRUNC;
    let fz = 0.125 * PI * PI + 0.5 * z * z;
    let b = (t * z - 1.0) / t.sqrt();
    let a = -(t * z + 1.0) / t.sqrt();
    let x0 = fz.ln() + fz * t;
    let xb = x0 - z + ln_phi(b);
    let xa = x0 + z + ln_phi(a);
    let q_over_p = 4.0 / PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + q_over_p)
}

/// Inverse-Gaussian with mean `1/z`, shape 1, truncated to `(0, TRUNC)`.
fn truncated_inv_gauss(z: f64, rng: &mut RngStream) -> f64 {
    let t = TRUNC;
    if z < 1.0 / t {
        // mean beyond truncation: propose from the z = 0 law, thin by exp(-z²x/2)
        loop {
            let x = loop {
                let e1 = rng.exp1();
                let e2 = rng.exp1();
                if e1 * e1 <= 2.0 * e2 / t {
                    let d = 1.0 + e1 * t;
                    break t / (d * d);
                }
            };
            if rng.uniform() <= (-0.5 * z * z * x).exp() {
                return x;
            }
        }
    } else {
        let mu = 1.0 / z;
        loop {
            let y = rng.std_normal();
            let y = y * y;
            let mu_y = mu * y;
            let mut x = mu + 0.5 * mu * mu_y - 0.5 * mu * (4.0 * mu_y + mu_y * mu_y).sqrt();
            if rng.uniform() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x < t {
                return x;
            }
        }
    }
}

/// Exact `PG(1, c)` draw.
fn sample_pg1(c: f64, rng: &mut RngStream) -> f64 {
    let z = 0.5 * c.abs();
    let fz = 0.125 * PI * PI + 0.5 * z * z;
    let p_tail = mass_texpon(z);
    loop {
        let x = if rng.uniform() < p_tail {
            TRUNC + rng.exp1() / fz
        } else {
            truncated_inv_gauss(z, rng)
        };
        let mut s = series_coef(0, x);
        let y = rng.uniform() * s;
        let mut n = 0u32;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return 0.25 * x;
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_formula_values() {
        assert_eq!(pg_mean(PgParams { b: 1.0, c: 0.0 }), 0.25);
        assert_eq!(pg_mean(PgParams { b: 2.0, c: 0.0 }), 0.5);
        let m = pg_mean(PgParams { b: 1.0f64, c: 2.0 });
        assert!((m - 0.25 * 1f64.tanh()).abs() < 1e-15);
        // continuity at zero
        let near = pg_mean(PgParams { b: 1.0f64, c: 1e-7 });
        assert!((near - 0.25).abs() < 1e-12);
        let just_above = pg_mean(PgParams { b: 1.0f64, c: 1.001e-6 });
        let just_below = pg_mean(PgParams { b: 1.0, c: 0.999e-6 });
        assert!((just_above - just_below).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_shape() {
        let mut rng = RngStream::new(1, 0);
        assert!(sample_pg(PgParams { b: 0.0, c: 1.0 }, &mut rng).is_err());
        assert!(sample_pg(PgParams { b: -2.0, c: 1.0 }, &mut rng).is_err());
        assert!(PgParams::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn single_term_series_is_scaled_gamma() {
        // c = 0, one term: g1 / (2π² · 1/4)
        let mut a = RngStream::new(4, 4);
        let mut b = RngStream::new(4, 4);
        let z: f64 = sample_pg_series(PgParams { b: 1.0, c: 0.0 }, 1, &mut a).unwrap();
        let g = b.exp1();
        assert!((z - g / (2.0 * PI * PI * 0.25)).abs() < 1e-14);
    }

    #[test]
    fn draws_positive_and_symmetric_in_c() {
        let mut a = RngStream::new(8, 0);
        let mut b = RngStream::new(8, 0);
        for _ in 0..1000 {
            let x: f64 = sample_pg(PgParams { b: 1.0, c: 3.0 }, &mut a).unwrap();
            let y: f64 = sample_pg(PgParams { b: 1.0, c: -3.0 }, &mut b).unwrap();
            assert!(x > 0.0);
            assert_eq!(x, y);
        }
    }

    #[test]
    fn non_integer_shape_uses_series() {
        let mut rng = RngStream::new(13, 0);
        let n = 20_000;
        let mean: f64 = (0..n)
            .map(|_| sample_pg(PgParams { b: 0.5, c: 1.0 }, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        let target = pg_mean(PgParams { b: 0.5, c: 1.0 });
        assert!((mean - target).abs() < 0.01, "{mean} vs {target}");
    }

    #[test]
    fn ln_phi_branches_agree() {
        let a = ln_phi(-36.999);
        let b = ln_phi(-37.001);
        assert!((a - b).abs() < 0.1);
        assert!((ln_phi(0.0) - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn extreme_tilt_is_finite() {
        let mut rng = RngStream::new(21, 0);
        for &c in &[50.0, 200.0, 1000.0] {
            let x: f64 = sample_pg(PgParams { b: 1.0, c }, &mut rng).unwrap();
            assert!(x.is_finite() && x > 0.0);
        }
    }
}

#![allow(dead_code)]

use ndarray::{Array1, Array2};

/// Gauss-Jordan inverse with partial pivoting; small dense oracle.
pub fn dense_inverse(a: &Array2<f64>) -> Array2<f64> {
    let p = a.nrows();
    let mut m = a.clone();
    let mut inv = Array2::<f64>::eye(p);
    for c in 0..p {
        let piv = (c..p)
            .max_by(|&i, &j| m[[i, c]].abs().partial_cmp(&m[[j, c]].abs()).unwrap())
            .unwrap();
        for k in 0..p {
            m.swap([c, k], [piv, k]);
            inv.swap([c, k], [piv, k]);
        }
        let d = m[[c, c]];
        for k in 0..p {
            m[[c, k]] /= d;
            inv[[c, k]] /= d;
        }
        for i in 0..p {
            if i != c {
                let f = m[[i, c]];
                if f != 0.0 {
                    for k in 0..p {
                        m[[i, k]] -= f * m[[c, k]];
                        inv[[i, k]] -= f * inv[[c, k]];
                    }
                }
            }
        }
    }
    inv
}

pub fn dense_precision(diag: &Array1<f64>, scale: f64, v: &Array1<f64>) -> Array2<f64> {
    let p = diag.len();
    Array2::from_shape_fn((p, p), |(a, b)| {
        let d = if a == b { diag[a] } else { 0.0 };
        d + scale * v[a] * v[b]
    })
}

/// Largest standardized deviation of the sample mean and covariance of
/// `draws` (rows) from a Gaussian with the given moments.
pub fn moment_z_scores(draws: &Array2<f64>, mean: &Array1<f64>, cov: &Array2<f64>) -> (f64, f64) {
    let n = draws.nrows() as f64;
    let p = draws.ncols();
    let m = draws.mean_axis(ndarray::Axis(0)).unwrap();
    let mut zmean: f64 = 0.0;
    for j in 0..p {
        zmean = zmean.max((m[j] - mean[j]).abs() / (cov[[j, j]] / n).sqrt());
    }
    let mut zcov: f64 = 0.0;
    for a in 0..p {
        for b in 0..p {
            let s = draws
                .rows()
                .into_iter()
                .map(|r| (r[a] - m[a]) * (r[b] - m[b]))
                .sum::<f64>()
                / (n - 1.0);
            let se = ((cov[[a, a]] * cov[[b, b]] + cov[[a, b]].powi(2)) / n).sqrt();
            zcov = zcov.max((s - cov[[a, b]]).abs() / se);
        }
    }
    (zmean, zcov)
}

pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// KS distance between a sample and a CDF tabulated on an increasing grid
/// (linear interpolation between grid points).
pub fn ks_against_grid(sample: &mut [f64], grid: &[f64], cdf: &[f64]) -> f64 {
    sample.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = sample.len() as f64;
    let eval = |x: f64| -> f64 {
        if x <= grid[0] {
            return 0.0;
        }
        if x >= grid[grid.len() - 1] {
            return 1.0;
        }
        let k = grid.partition_point(|&g| g <= x);
        let (g0, g1) = (grid[k - 1], grid[k]);
        let t = (x - g0) / (g1 - g0);
        cdf[k - 1] + t * (cdf[k] - cdf[k - 1])
    };
    let mut d: f64 = 0.0;
    for (k, &x) in sample.iter().enumerate() {
        let f = eval(x);
        d = d.max((f - k as f64 / n).abs()).max(((k + 1) as f64 / n - f).abs());
    }
    d
}

/// Exact posterior CDF of a scalar covariate with Gaussian prior
/// `N(mean, var)` and one Bernoulli-logit observation `y` at slope `beta`,
/// by trapezoidal integration on a fine grid.
pub fn binomial_posterior_cdf(mean: f64, var: f64, beta: f64, y: f64) -> (Vec<f64>, Vec<f64>) {
    let sd = var.sqrt();
    let k = 40_001;
    let lo = mean - 10.0 * sd;
    let hi = mean + 10.0 * sd;
    let grid: Vec<f64> = (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect();
    let dens: Vec<f64> = grid
        .iter()
        .map(|&x| {
            let eta = beta * x;
            let loglik = y * eta - (1.0 + eta.exp()).ln();
            (-(x - mean).powi(2) / (2.0 * var) + loglik).exp()
        })
        .collect();
    let mut cdf = vec![0.0; k];
    for i in 1..k {
        cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (grid[i] - grid[i - 1]);
    }
    let total = cdf[k - 1];
    for c in cdf.iter_mut() {
        *c /= total;
    }
    (grid, cdf)
}

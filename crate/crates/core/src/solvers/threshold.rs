use crate::Scalar;

use super::{PenaltyKind, PenaltySpec};

/// `sign(z) · max(|z| − λ, 0)`.
#[inline]
pub fn soft_threshold<T: Scalar>(z: T, lambda: T) -> T {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        T::zero()
    }
}

/// Minimizer of `½(z − β)² + MCP(β; λ, γ)` for `γ > 1`.
#[inline]
pub fn firm_threshold<T: Scalar>(z: T, lambda: T, mcp_gamma: T) -> T {
    if z.abs() <= mcp_gamma * lambda {
        soft_threshold(z, lambda) / (T::one() - T::one() / mcp_gamma)
    } else {
        z
    }
}

/// MCP value `λ|β| − β²/(2γ)` on `|β| ≤ γλ`, constant `γλ²/2` beyond.
#[inline]
pub fn mcp_penalty<T: Scalar>(beta: T, lambda: T, mcp_gamma: T) -> T {
    let a = beta.abs();
    if a <= mcp_gamma * lambda {
        lambda * a - a * a / (T::of(2.0) * mcp_gamma)
    } else {
        T::of(0.5) * mcp_gamma * lambda * lambda
    }
}

pub fn penalty_value<T: Scalar>(beta: T, lambda: T, kind: PenaltyKind, mcp_gamma: T) -> T {
    match kind {
        PenaltyKind::Mcp => mcp_penalty(beta, lambda, mcp_gamma),
        PenaltyKind::Lasso | PenaltyKind::ScaledLasso => lambda * beta.abs(),
    }
}

/// Exact minimizer of `(v/2)β² − zβ + P(β)` for curvature `v > 0`.
///
/// For MCP with `v ≤ 1/γ` the problem is nonconvex on `|β| ≤ γλ`; the
/// minimizer is then one of `0`, `±γλ`, or the unpenalized `z/v`.
pub fn univariate_penalized<T: Scalar>(z: T, v: T, penalty: &PenaltySpec<T>) -> T {
    let lambda = penalty.lambda;
    match penalty.kind {
        PenaltyKind::Lasso | PenaltyKind::ScaledLasso => soft_threshold(z, lambda) / v,
        PenaltyKind::Mcp => {
            let g = penalty.mcp_gamma;
            let inv_g = T::one() / g;
            if v > inv_g {
                if z.abs() <= v * g * lambda {
                    soft_threshold(z, lambda) / (v - inv_g)
                } else {
                    z / v
                }
            } else {
                let f = |b: T| T::of(0.5) * v * b * b - z * b + mcp_penalty(b, lambda, g);
                let edge = z.signum() * g * lambda;
                let mut best = T::zero();
                let mut best_f = T::zero();
                let mut consider = |b: T| {
                    let fb = f(b);
                    if fb < best_f {
                        best = b;
                        best_f = fb;
                    }
                };
                consider(edge);
                let free = z / v;
                if free.abs() >= g * lambda {
                    consider(free);
                }
                best
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_values() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
    }

    #[test]
    fn firm_threshold_values() {
        assert_eq!(firm_threshold(0.5, 1.0, 3.0), 0.0);
        assert!((firm_threshold(2.0f64, 1.0, 3.0) - 1.5).abs() < 1e-15);
        assert_eq!(firm_threshold(5.0, 1.0, 3.0), 5.0);
    }

    #[test]
    fn firm_threshold_is_continuous_at_knot() {
        let (l, g) = (0.7f64, 2.5);
        let a = firm_threshold(g * l - 1e-12, l, g);
        let b = firm_threshold(g * l + 1e-12, l, g);
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn unit_curvature_matches_firm_threshold() {
        let pen = PenaltySpec::mcp(0.8f64, 3.0);
        for &z in &[-4.0, -2.0, -0.5, 0.0, 0.9, 1.7, 2.5, 6.0] {
            assert!((univariate_penalized(z, 1.0, &pen) - firm_threshold(z, 0.8, 3.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn low_curvature_mcp_by_grid() {
        // v = 0.25 < 1/γ: brute-force the nonconvex univariate problem
        let pen = PenaltySpec::mcp(0.5, 3.0);
        for &z in &[-1.0, -0.3, 0.1, 0.45, 0.6, 1.2] {
            let v = 0.25;
            let got = univariate_penalized(z, v, &pen);
            let obj = |b: f64| 0.5 * v * b * b - z * b + mcp_penalty(b, 0.5, 3.0);
            let mut best = (0.0, obj(0.0));
            let mut b = -10.0;
            while b <= 10.0 {
                let o = obj(b);
                if o < best.1 {
                    best = (b, o);
                }
                b += 1e-4;
            }
            assert!(obj(got) <= best.1 + 1e-8, "z={z}: got {got} ({}), grid {:?}", obj(got), best);
        }
    }
}

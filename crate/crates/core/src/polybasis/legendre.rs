//! Univariate Legendre polynomials and Gauss-Legendre rules on `[-1, 1]`.

/// `P_0(t) ..= P_max(t)` by the three-term recurrence
/// `(k+1) P_{k+1} = (2k+1) t P_k - k P_{k-1}`.
pub fn values(max_deg: usize, t: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(max_deg + 1);
    p.push(1.0);
    if max_deg >= 1 {
        p.push(t);
    }
    for k in 1..max_deg {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * t * p[k] - kf * p[k - 1]) / (kf + 1.0);
        p.push(next);
    }
    p
}

/// Values and first derivatives, using `P'_{k+1} = P'_{k-1} + (2k+1) P_k`.
pub fn values_and_derivatives(max_deg: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let p = values(max_deg, t);
    let mut dp = vec![0.0; max_deg + 1];
    if max_deg >= 1 {
        dp[1] = 1.0;
    }
    for k in 1..max_deg {
        dp[k + 1] = dp[k - 1] + (2.0 * k as f64 + 1.0) * p[k];
    }
    (p, dp)
}

/// Monomial coefficients of `P_k`, `coeffs[k][j]` multiplying `t^j`.
pub fn monomial_coefficients(max_deg: usize) -> Vec<Vec<f64>> {
    let mut c: Vec<Vec<f64>> = Vec::with_capacity(max_deg + 1);
    c.push(vec![1.0]);
    if max_deg >= 1 {
        c.push(vec![0.0, 1.0]);
    }
    for k in 1..max_deg {
        let kf = k as f64;
        let mut next = vec![0.0; k + 2];
        for (j, &v) in c[k].iter().enumerate() {
            next[j + 1] += (2.0 * kf + 1.0) * v / (kf + 1.0);
        }
        for (j, &v) in c[k - 1].iter().enumerate() {
            next[j] -= kf * v / (kf + 1.0);
        }
        c.push(next);
    }
    c
}

/// Nodes and weights of the `order`-point Gauss-Legendre rule on `[-1, 1]`,
/// nodes ascending. Roots are polished by Newton's method from the
/// Chebyshev-like initial guesses.
pub fn gauss_rule(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = values_and_derivatives(n, t);
            dp = d[n];
            let dt = p[n] / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = values_and_derivatives(n, t);
        dp = if d[n] != 0.0 { d[n] } else { dp };
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        nodes[i] = -t;
        nodes[n - 1 - i] = t;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_one_and_zero() {
        assert_eq!(values(4, 1.0), vec![1.0, 1.0, 1.0, 1.0, 1.0]);
        let v = values(2, 0.0);
        assert_eq!(v, vec![1.0, 0.0, -0.5]);
    }

    #[test]
    fn derivative_of_p2_is_3t() {
        let (_, d) = values_and_derivatives(3, 0.0);
        assert_eq!(d[2], 0.0);
        let (_, d) = values_and_derivatives(3, 0.4);
        assert!((d[2] - 1.2).abs() < 1e-14);
        // P3' = (15 t^2 - 3) / 2
        assert!((d[3] - (15.0 * 0.16 - 3.0) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn coefficients_reproduce_values() {
        let c = monomial_coefficients(8);
        for &t in &[-0.9, -0.2, 0.35, 1.0] {
            let v = values(8, t);
            for k in 0..=8 {
                let s: f64 = c[k].iter().enumerate().map(|(j, a)| a * t.powi(j as i32)).sum();
                assert!((s - v[k]).abs() < 1e-12, "k={k} t={t}");
            }
        }
    }

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        for order in 1..20 {
            let (x, w) = gauss_rule(order);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..(2 * order) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "order {order} deg {deg}: {q} vs {exact}");
            }
        }
    }
}

//! Quadrature rules.

use std::f64::consts::PI;

/// Gauss–Hermite nodes and weights for `∫ f(x) e^{-x²} dx` (Newton iteration
/// on the orthonormal Hermite recurrence).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `∫_a^b f` with an `n`-point Gauss–Legendre rule.
pub fn legendre_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// True when the spacing of `x` is uniform to relative precision `rel`.
pub fn is_uniform(x: &[f64], rel: f64) -> bool {
    if x.len() < 3 {
        return true;
    }
    let h = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    x.windows(2).all(|p| ((p[1] - p[0]) - h).abs() <= rel * h.abs())
}

/// Composite Simpson on a uniform grid; with an odd number of intervals the
/// last panel uses the four-point cubic rule.
pub fn simpson_uniform(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    assert_eq!(n, y.len());
    if n < 3 {
        return trapezoid(x, y);
    }
    let h = (x[n - 1] - x[0]) / (n - 1) as f64;
    let intervals = n - 1;
    let even = intervals - intervals % 2;
    let mut s = y[0] + y[even];
    for i in 1..even {
        s += if i % 2 == 1 { 4.0 * y[i] } else { 2.0 * y[i] };
    }
    let mut total = s * h / 3.0;
    if even < intervals {
        let k = n - 1;
        total += if n >= 4 {
            h / 24.0 * (y[k - 3] - 5.0 * y[k - 2] + 19.0 * y[k - 1] + 9.0 * y[k])
        } else {
            0.5 * h * (y[k - 1] + y[k])
        };
    }
    total
}

/// Composite trapezoid rule on an arbitrary grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1])).sum()
}

/// Running trapezoid integral `∫_{x[0]}^{x[i]} y`.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
        out.push(acc);
    }
    out
}

/// Integral over a grid: Simpson when uniform, trapezoid otherwise.
pub fn integrate_sampled(x: &[f64], y: &[f64]) -> f64 {
    if is_uniform(x, 1e-9) {
        simpson_uniform(x, y)
    } else {
        trapezoid(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_integrates_gaussian_moments() {
        let (x, w) = gauss_hermite(60);
        let m0: f64 = w.iter().sum();
        assert!((m0 - PI.sqrt()).abs() < 1e-13);
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-13);
        let m10: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        // (9!!/2^5) √π
        assert!((m10 / (945.0 / 32.0 * PI.sqrt()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let v = legendre_integral(|t| t.powi(6) - t, 0.0, 2.0, 8);
        assert!((v - (128.0 / 7.0 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn simpson_handles_odd_interval_counts() {
        for n in [11usize, 12] {
            let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            let y: Vec<f64> = x.iter().map(|t| t * t * t).collect();
            assert!((simpson_uniform(&x, &y) - 0.25).abs() < 1e-12, "n = {n}");
        }
    }
}

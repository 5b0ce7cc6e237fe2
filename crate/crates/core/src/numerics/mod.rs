//! Numerical building blocks shared by the model modules.

pub mod fd;
pub mod ode;
pub mod poly;
pub mod quad;
pub mod smooth;

/// Solve a tridiagonal system (Thomas algorithm). `lower[0]` and
/// `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Solve a pentadiagonal system without pivoting. `rows[i][j]` multiplies
/// `x[i + j - 2]`; entries falling outside the matrix are ignored. Returns
/// `None` on a vanishing pivot.
pub fn solve_pentadiagonal(rows: &[[f64; 5]], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rows.len();
    let mut a = rows.to_vec();
    let mut b = rhs.to_vec();
    for k in 0..n {
        let pivot = a[k][2];
        if !(pivot.abs() > 1e-300) {
            return None;
        }
        for r in k + 1..(k + 3).min(n) {
            let f = a[r][2 + k - r] / pivot;
            for c in 0..3 {
                if k + c < n {
                    a[r][2 + k + c - r] -= f * a[k][2 + c];
                }
            }
            b[r] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let tail: f64 = (1..3).filter(|c| k + c < n).map(|c| a[k][2 + c] * x[k + c]).sum();
        x[k] = (b[k] - tail) / a[k][2];
    }
    Some(x)
}

/// Least-squares slope of `ln y` against `ln x`; a decay `y ∝ x^{-p}` yields `-p`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Index `i` with `x[i] <= t <= x[i+1]` for sorted `x` (clamped to the ends).
pub fn bracket(x: &[f64], t: f64) -> usize {
    match x.partition_point(|&v| v <= t) {
        0 => 0,
        k if k >= x.len() => x.len() - 2,
        k => k - 1,
    }
}

/// Piecewise-linear interpolation on a sorted grid.
pub fn lerp_at(x: &[f64], y: &[f64], t: f64) -> f64 {
    let i = bracket(x, t);
    let w = (t - x[i]) / (x[i + 1] - x[i]);
    y[i] + w * (y[i + 1] - y[i])
}

/// Cubic Hermite interpolation from values and slopes on a sorted grid.
pub fn hermite_at(x: &[f64], y: &[f64], dy: &[f64], t: f64) -> (f64, f64) {
    let i = bracket(x, t);
    let h = x[i + 1] - x[i];
    let s = (t - x[i]) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let value = h00 * y[i] + h10 * h * dy[i] + h01 * y[i + 1] + h11 * h * dy[i + 1];
    let d00 = (6.0 * s2 - 6.0 * s) / h;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = (-6.0 * s2 + 6.0 * s) / h;
    let d11 = 3.0 * s2 - 2.0 * s;
    let slope = d00 * y[i] + d10 * dy[i] + d01 * y[i + 1] + d11 * dy[i + 1];
    (value, slope)
}

/// Root of a continuous function bracketed by `[a, b]` (bisection with a
/// secant acceleration, Illinois variant).
pub fn find_root(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, xtol: f64) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
        let fc = f(c);
        if fc == 0.0 || (b - a).abs() < xtol {
            return Some(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() < xtol {
            return Some(0.5 * (a + b));
        }
    }
    Some(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    #[test]
    fn pentadiagonal_matches_a_direct_product() {
        let n = 7;
        let rows: Vec<[f64; 5]> = (0..n).map(|i| [0.3, -1.0 + 0.1 * i as f64, 5.0, 0.7, -0.2]).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| (0..5).filter(|&j| i + j >= 2 && i + j - 2 < n).map(|j| rows[i][j] * x[i + j - 2]).sum())
            .collect();
        let got = super::solve_pentadiagonal(&rows, &rhs).unwrap();
        for (a, b) in got.iter().zip(&x) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    use super::*;

    #[test]
    fn tridiagonal_solve_recovers_known_vector() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let x = [1.0, 2.0, 3.0, 4.0];
        let rhs = [0.0, 0.0, 0.0, 5.0];
        let sol = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        for (a, b) in sol.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let x = [100.0, 200.0, 400.0, 800.0];
        let y: Vec<f64> = x.iter().map(|t: &f64| 3.0 * t.powf(-2.0)).collect();
        assert!((loglog_slope(&x, &y) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn root_of_cosine() {
        let r = find_root(f64::cos, 1.0, 2.0, 1e-14).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn hermite_interpolation_is_exact_for_cubics() {
        let x = [0.0, 0.7, 1.5];
        let f = |t: f64| t * t * t - t;
        let df = |t: f64| 3.0 * t * t - 1.0;
        let y: Vec<f64> = x.iter().map(|&t| f(t)).collect();
        let dy: Vec<f64> = x.iter().map(|&t| df(t)).collect();
        let (v, s) = hermite_at(&x, &y, &dy, 1.1);
        assert!((v - f(1.1)).abs() < 1e-13);
        assert!((s - df(1.1)).abs() < 1e-12);
    }
}

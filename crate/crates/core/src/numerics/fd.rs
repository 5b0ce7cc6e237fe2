//! Finite-difference weights on nonuniform grids and five-point derivative
//! evaluation with reflected ghost nodes at the ends.

/// How values are continued past a grid endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndRule {
    /// Odd reflection about the endpoint (used at poles, where the value is 0).
    Odd,
    /// Even reflection about the endpoint (symmetry / Neumann ends).
    Even,
    /// No ghost nodes: the stencil is shifted inward.
    OneSided,
}

/// Fornberg's algorithm: weights `w[m][j]` such that
/// `f^(m)(x0) ≈ Σ_j w[m][j] f(nodes[j])` for `m = 0..=max_order`.
pub fn fornberg_weights(x0: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// First and second derivatives of `y(x)` at every node with five-point stencils.
///
/// Near the ends the stencil borrows reflected ghost nodes according to
/// `left`/`right`; with [`EndRule::OneSided`] it is shifted inward instead.
pub fn derivatives(x: &[f64], y: &[f64], left: EndRule, right: EndRule) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    assert_eq!(n, y.len());
    assert!(n >= 5, "five-point stencils need at least 5 nodes");
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let mut xs = [0.0; 5];
    let mut ys = [0.0; 5];
    for i in 0..n {
        let shift = |k: isize| -> isize {
            let lo = if left == EndRule::OneSided { 0 } else { isize::MIN };
            let hi = if right == EndRule::OneSided { n as isize - 5 } else { isize::MAX };
            k.clamp(lo, hi)
        };
        let start = shift(i as isize - 2);
        for (slot, k) in (start..start + 5).enumerate() {
            let (xv, yv) = sample(x, y, k, left, right);
            xs[slot] = xv;
            ys[slot] = yv;
        }
        let w = fornberg_weights(x[i], &xs, 2);
        d1[i] = w[1].iter().zip(&ys).map(|(a, b)| a * b).sum();
        d2[i] = w[2].iter().zip(&ys).map(|(a, b)| a * b).sum();
    }
    (d1, d2)
}

fn sample(x: &[f64], y: &[f64], k: isize, left: EndRule, right: EndRule) -> (f64, f64) {
    let n = x.len() as isize;
    if k < 0 {
        let j = (-k) as usize;
        let sign = if left == EndRule::Odd { -1.0 } else { 1.0 };
        (2.0 * x[0] - x[j], sign * y[j])
    } else if k >= n {
        let j = (2 * (n - 1) - k) as usize;
        let sign = if right == EndRule::Odd { -1.0 } else { 1.0 };
        (2.0 * x[(n - 1) as usize] - x[j], sign * y[j])
    } else {
        (x[k as usize], y[k as usize])
    }
}

/// Derivatives of order 1 and 2 at `x[at]` from a one-sided stencil of
/// `width` nodes starting at the nearest end.
pub fn one_sided(x: &[f64], y: &[f64], at_left: bool, width: usize) -> (f64, f64) {
    let n = x.len();
    let (nodes, vals): (Vec<f64>, Vec<f64>) = if at_left {
        (x[..width].to_vec(), y[..width].to_vec())
    } else {
        (x[n - width..].to_vec(), y[n - width..].to_vec())
    };
    let x0 = if at_left { x[0] } else { x[n - 1] };
    let w = fornberg_weights(x0, &nodes, 2);
    let d1 = w[1].iter().zip(&vals).map(|(a, b)| a * b).sum();
    let d2 = w[2].iter().zip(&vals).map(|(a, b)| a * b).sum();
    (d1, d2)
}

/// Three-point second-derivative weights `(left, centre, right)` at an
/// interior node of a nonuniform grid.
pub fn second_derivative_3pt(h_left: f64, h_right: f64) -> (f64, f64, f64) {
    let s = h_left + h_right;
    (2.0 / (h_left * s), -2.0 / (h_left * h_right), 2.0 / (h_right * s))
}

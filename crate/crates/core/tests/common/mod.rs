//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the solver's own quadrature or linear algebra.

#![allow(dead_code, clippy::too_many_arguments, clippy::needless_range_loop)]

/// Adaptive Simpson rule on `[a, b]`; the per-interval tolerance stops
/// halving at `1e-18` so weak endpoint singularities terminate.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        let tol = (0.5 * tol).max(1e-18);
        rec(f, a, m, fa, flm, fm, left, tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `Δx ∫_{-1}^{1} K(|m - x| Δx) (1 - |x|) dx` by adaptive Simpson, split at
/// the hat's kink and the kernel's kink.
pub fn line_tensor_entry(kernel: &dyn Fn(f64) -> f64, dx: f64, m: f64) -> f64 {
    let g = |x: f64| kernel(((m - x) * dx).abs()) * (1.0 - x.abs());
    let mut cuts = vec![-1.0, 0.0, 1.0];
    if m > -1.0 && m < 1.0 && m != 0.0 {
        cuts.push(m);
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.windows(2)
        .map(|w| simpson(&g, w[0], w[1], 1e-15))
        .sum::<f64>()
        * dx
}

/// `∫_{s0}^{s1} (c + d s) ln(a² + s²) ds` in closed form.
fn log_line_moment(a: f64, c: f64, d: f64, s0: f64, s1: f64) -> f64 {
    let p0 = |s: f64| {
        let r2 = a * a + s * s;
        let l = if r2 > 0.0 { r2.ln() } else { 0.0 };
        let atan = if a != 0.0 {
            2.0 * a * (s / a).atan()
        } else {
            0.0
        };
        s * l - 2.0 * s + atan
    };
    let p1 = |s: f64| {
        let r2 = a * a + s * s;
        let l = if r2 > 0.0 { r2.ln() } else { 0.0 };
        0.5 * (r2 * l - s * s)
    };
    c * (p0(s1) - p0(s0)) + d * (p1(s1) - p1(s0))
}

/// Entry `(m, n)` of the 2D tensor of `-ln(r) / (2π ν²)` with bilinear hat
/// weights: inner integral in closed form, outer by adaptive Simpson.
pub fn log2d_tensor_entry(dx: f64, nu: f64, m: f64, n: f64) -> f64 {
    let inner = |x: f64| {
        let a = m - x;
        // y in [-1, 0]: weight 1 + y; y in [0, 1]: weight 1 - y; s = n - y.
        // (1 + y) = (1 + n) - s, (1 - y) = (1 - n) + s.
        let lower = log_line_moment(a, 1.0 + n, -1.0, n, n + 1.0);
        let upper = log_line_moment(a, 1.0 - n, 1.0, n - 1.0, n);
        let log_dx2 = (dx * dx).ln();
        (1.0 - x.abs()) * (lower + upper + log_dx2)
    };
    let mut cuts = vec![-1.0, 0.0, 1.0];
    if m > -1.0 && m < 1.0 && m != 0.0 {
        cuts.push(m);
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let integral: f64 = cuts
        .windows(2)
        .map(|w| simpson(&inner, w[0], w[1], 1e-15))
        .sum();
    -dx * dx * integral / (4.0 * std::f64::consts::PI * nu * nu)
}

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

//! Small linear solvers for the implicit step.

use crate::num::Real;

/// Tridiagonal matrix: `lower[j]` multiplies `x[j-1]`, `upper[j]` multiplies
/// `x[j+1]`. `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal<R: Real = f64> {
    pub lower: Vec<R>,
    pub diag: Vec<R>,
    pub upper: Vec<R>,
}

impl<R: Real> Tridiagonal<R> {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul(&self, x: &[R]) -> Vec<R> {
        let n = self.len();
        (0..n)
            .map(|j| {
                let mut y = self.diag[j] * x[j];
                if j > 0 {
                    y = y + self.lower[j] * x[j - 1];
                }
                if j + 1 < n {
                    y = y + self.upper[j] * x[j + 1];
                }
                y
            })
            .collect()
    }

    /// Positive diagonal, nonpositive off-diagonals and strict diagonal
    /// dominance by columns.
    pub fn is_column_m_matrix(&self) -> bool {
        let n = self.len();
        (0..n).all(|j| {
            let above = if j > 0 { self.upper[j - 1] } else { R::zero() };
            let below = if j + 1 < n {
                self.lower[j + 1]
            } else {
                R::zero()
            };
            self.diag[j] > R::zero()
                && above <= R::zero()
                && below <= R::zero()
                && self.diag[j] + above + below > R::zero()
        })
    }

    /// Thomas algorithm without pivoting; stable for diagonally dominant
    /// matrices (by rows or columns).
    pub fn solve(&self, rhs: &[R]) -> Vec<R> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        if n == 0 {
            return Vec::new();
        }
        let mut c = vec![R::zero(); n];
        let mut d = vec![R::zero(); n];
        let mut denom = self.diag[0];
        c[0] = if n > 1 {
            self.upper[0] / denom
        } else {
            R::zero()
        };
        d[0] = rhs[0] / denom;
        for j in 1..n {
            denom = self.diag[j] - self.lower[j] * c[j - 1];
            if j + 1 < n {
                c[j] = self.upper[j] / denom;
            }
            d[j] = (rhs[j] - self.lower[j] * d[j - 1]) / denom;
        }
        let mut x = d;
        for j in (0..n - 1).rev() {
            x[j] = x[j] - c[j] * x[j + 1];
        }
        x
    }
}

/// `‖A x - b‖∞ / ‖b‖∞` (absolute when `b = 0`).
pub fn relative_residual<R: Real>(ax: &[R], b: &[R]) -> R {
    let num = ax
        .iter()
        .zip(b)
        .fold(R::zero(), |m, (&p, &q)| m.max((p - q).abs()));
    let den = b.iter().fold(R::zero(), |m, &q| m.max(q.abs()));
    if den > R::zero() {
        num / den
    } else {
        num
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome<R: Real = f64> {
    pub iterations: usize,
    /// Final `‖r‖₂ / ‖b‖₂`.
    pub residual: R,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients for an SPD operator.
///
/// `x` holds the initial guess on entry and the solution on exit.
pub fn pcg<R: Real>(
    apply: impl Fn(&[R], &mut [R]),
    diag: &[R],
    b: &[R],
    x: &mut [R],
    rel_tol: R,
    max_iter: usize,
) -> CgOutcome<R> {
    let n = b.len();
    let dot = |a: &[R], b: &[R]| a.iter().zip(b).map(|(&p, &q)| p * q).sum::<R>();
    let bnorm = dot(b, b).sqrt();
    if bnorm == R::zero() {
        x.iter_mut().for_each(|v| *v = R::zero());
        return CgOutcome {
            iterations: 0,
            residual: R::zero(),
            converged: true,
        };
    }
    let mut ax = vec![R::zero(); n];
    apply(x, &mut ax);
    let mut r: Vec<R> = b.iter().zip(&ax).map(|(&p, &q)| p - q).collect();
    let mut z: Vec<R> = r.iter().zip(diag).map(|(&p, &d)| p / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![R::zero(); n];
    let mut residual = dot(&r, &r).sqrt() / bnorm;
    let mut iterations = 0;
    while residual > rel_tol && iterations < max_iter {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] = x[k] + alpha * p[k];
            r[k] = r[k] - alpha * ap[k];
        }
        iterations += 1;
        residual = dot(&r, &r).sqrt() / bnorm;
        if residual <= rel_tol {
            break;
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    // The recursive residual drifts from the true one; report the latter.
    apply(x, &mut ax);
    let true_res = b
        .iter()
        .zip(&ax)
        .map(|(&p, &q)| (p - q) * (p - q))
        .sum::<R>()
        .sqrt()
        / bnorm;
    CgOutcome {
        iterations,
        residual: true_res,
        converged: true_res <= rel_tol.max(residual),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_known_solution() {
        let a = Tridiagonal {
            lower: vec![0.0, -1.0, -1.0, -1.0],
            diag: vec![4.0, 4.0, 4.0, 4.0],
            upper: vec![-1.0, -1.0, -1.0, 0.0],
        };
        let x: Vec<f64> = vec![1.0, -2.0, 3.0, 0.5];
        let b = a.mul(&x);
        let y = a.solve(&b);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-14);
        }
        assert!(a.is_column_m_matrix());
    }

    #[test]
    fn column_dominance_is_checked_by_columns() {
        // Row 0 is not dominant (1 < 3) but every column is.
        let a = Tridiagonal {
            lower: vec![0.0, -0.1],
            diag: vec![1.0, 5.0],
            upper: vec![-3.0, 0.0],
        };
        assert!(a.is_column_m_matrix());
        let b = Tridiagonal {
            lower: vec![0.0, -2.0],
            diag: vec![1.0, 5.0],
            upper: vec![-0.1, 0.0],
        };
        assert!(!b.is_column_m_matrix());
    }

    #[test]
    fn single_unknown() {
        let a = Tridiagonal {
            lower: vec![0.0],
            diag: vec![2.0],
            upper: vec![0.0],
        };
        assert_eq!(a.solve(&[3.0]), vec![1.5]);
    }

    #[test]
    fn pcg_solves_spd_system() {
        let a = Tridiagonal {
            lower: vec![0.0, -1.0, -1.0, -1.0, -1.0],
            diag: vec![3.0, 2.5, 2.0, 2.5, 3.0],
            upper: vec![-1.0, -1.0, -1.0, -1.0, 0.0],
        };
        let b: Vec<f64> = vec![1.0, 0.0, 2.0, -1.0, 0.5];
        let mut x = vec![0.0; 5];
        let out = pcg(
            |v, out| out.copy_from_slice(&a.mul(v)),
            &a.diag,
            &b,
            &mut x,
            1e-14,
            50,
        );
        assert!(out.converged, "{out:?}");
        let direct = a.solve(&b);
        for (p, q) in x.iter().zip(&direct) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn pcg_zero_rhs() {
        let mut x = vec![1.0, 2.0];
        let out = pcg(
            |v, o: &mut [f64]| o.copy_from_slice(v),
            &[1.0, 1.0],
            &[0.0, 0.0],
            &mut x,
            1e-12,
            10,
        );
        assert_eq!(out.iterations, 0);
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn residual_norm() {
        assert_eq!(relative_residual(&[1.0, 2.0], &[1.0, 4.0]), 0.5);
        assert_eq!(relative_residual(&[1e-3], &[0.0]), 1e-3);
    }
}

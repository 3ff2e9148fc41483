//! One-dimensional quadrature rules used to build convolution tensors.

use crate::error::{PnpbError, Result};
use crate::num::Real;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<R: Real = f64> {
    pub nodes: Vec<R>,
    pub weights: Vec<R>,
}

impl<R: Real> GaussLegendre<R> {
    /// `n`-point rule; nodes found by Newton iteration on `P_n` in f64.
    pub fn new(n: usize) -> Self {
        assert!(n > 0);
        let mut nodes = vec![0.0_f64; n];
        let mut weights = vec![0.0_f64; n];
        let nf = n as f64;
        for k in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[k] = -x;
            nodes[n - 1 - k] = x;
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        Self {
            nodes: nodes.into_iter().map(R::lit).collect(),
            weights: weights.into_iter().map(R::lit).collect(),
        }
    }

    pub fn integrate(&self, a: R, b: R, mut f: impl FnMut(R) -> R) -> R {
        let half = (b - a) * R::lit(0.5);
        let mid = (a + b) * R::lit(0.5);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<R>()
            * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<R: Real>(a: R, b: R, f: &mut impl FnMut(R) -> R) -> (R, R) {
    let half = (b - a) * R::lit(0.5);
    let mid = (a + b) * R::lit(0.5);
    let fc = f(mid);
    let mut kron = fc * R::lit(WGK[7]);
    let mut gauss = fc * R::lit(WG[3]);
    for k in 0..7 {
        let dx = half * R::lit(XGK[k]);
        let s = f(mid - dx) + f(mid + dx);
        kron = kron + R::lit(WGK[k]) * s;
        if k % 2 == 1 {
            gauss = gauss + R::lit(WG[k / 2]) * s;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Globally adaptive Gauss-Kronrod (7/15) integration: the interval with the
/// largest error estimate is bisected until the summed estimate meets the
/// tolerance.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_intervals: 4000,
        }
    }
}

struct Piece<R> {
    a: R,
    b: R,
    val: R,
    err: R,
}

impl Adaptive {
    pub fn new(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    /// Integrates over `[a, b]` split at `breaks` (points outside are ignored).
    pub fn integrate<R: Real>(
        &self,
        a: R,
        b: R,
        breaks: &[R],
        mut f: impl FnMut(R) -> R,
    ) -> Result<R> {
        let mut pts = vec![a];
        let mut inner: Vec<R> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
        inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
        pts.extend(inner);
        pts.push(b);
        let mut pieces: Vec<Piece<R>> = pts
            .windows(2)
            .map(|w| {
                let (val, err) = gk15(w[0], w[1], &mut f);
                Piece {
                    a: w[0],
                    b: w[1],
                    val,
                    err,
                }
            })
            .collect();
        loop {
            let total: R = pieces.iter().map(|p| p.val).sum();
            let err: R = pieces.iter().map(|p| p.err).sum();
            let tol = R::lit(self.abs_tol).max(R::lit(self.rel_tol) * total.abs());
            if err <= tol {
                return Ok(total);
            }
            let (worst, _) = pieces
                .iter()
                .enumerate()
                .filter(|(_, p)| p.b - p.a > R::epsilon() * (p.a.abs() + p.b.abs()))
                .fold((usize::MAX, R::neg_infinity()), |best, (k, p)| {
                    if p.err > best.1 {
                        (k, p.err)
                    } else {
                        best
                    }
                });
            if worst == usize::MAX || pieces.len() >= self.max_intervals {
                // Nothing left to split: the estimate is as good as it gets.
                if worst == usize::MAX {
                    return Ok(total);
                }
                let p = &pieces[worst];
                return Err(PnpbError::QuadratureNonConvergence {
                    a: p.a.to_f64_lossy(),
                    b: p.b.to_f64_lossy(),
                    estimate: err.to_f64_lossy(),
                });
            }
            let p = pieces.swap_remove(worst);
            let m = (p.a + p.b) * R::lit(0.5);
            for (lo, hi) in [(p.a, m), (m, p.b)] {
                let (val, err) = gk15(lo, hi, &mut f);
                pieces.push(Piece {
                    a: lo,
                    b: hi,
                    val,
                    err,
                });
            }
        }
    }
}

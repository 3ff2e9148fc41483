//! Green's functions of the correlated field operator and their
//! hat-weighted convolution tensors.
//!
//! For a grid spacing `h` the tensor entry at offset `m` is
//!
//! ```text
//! T_m = h^d ∫_{[-1,1]^d} K(h (m - x)) ê(x) dx,   ê(x) = Π_a (1 - |x_a|)
//! ```
//!
//! so that `φ_j = Σ_p ρ_p T_{j-p}` is the potential of the piecewise
//! (bi)linear interpolant of the cell averages.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{PnpbError, Result};
use crate::model::Grid;
use crate::num::Real;
use crate::quadrature::{Adaptive, GaussLegendre};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// Fundamental solution of `-Δ`.
    LaplacePsi,
    /// Fundamental solution of `I - λ²Δ`.
    ScreenedW,
    /// Fundamental solution of `ν²(λ²Δ - I)Δ`, i.e. `(Ψ - λ²W) / ν²`.
    FourPbikK,
    /// Decaying 1D kernel `λ/(2ν²) exp(-|x|/λ)`.
    ScreenedPicard1d,
    /// `-(1/(2πν²)) ln r` in the plane.
    Log2d,
    /// `K ≡ c`; only useful for testing.
    Constant(f64),
}

impl KernelFamily {
    /// Kernel used by the 1D and 2D experiments.
    pub fn default_for_dim(dim: usize) -> Self {
        if dim == 2 {
            KernelFamily::Log2d
        } else {
            KernelFamily::ScreenedPicard1d
        }
    }

    fn code(&self) -> Option<u64> {
        match self {
            KernelFamily::LaplacePsi => Some(0),
            KernelFamily::ScreenedW => Some(1),
            KernelFamily::FourPbikK => Some(2),
            KernelFamily::ScreenedPicard1d => Some(3),
            KernelFamily::Log2d => Some(4),
            KernelFamily::Constant(_) => None,
        }
    }

    fn from_code(code: u64) -> Option<Self> {
        Some(match code {
            0 => KernelFamily::LaplacePsi,
            1 => KernelFamily::ScreenedW,
            2 => KernelFamily::FourPbikK,
            3 => KernelFamily::ScreenedPicard1d,
            4 => KernelFamily::Log2d,
            _ => return None,
        })
    }

    fn needs_lambda(&self) -> bool {
        matches!(
            self,
            KernelFamily::ScreenedW | KernelFamily::FourPbikK | KernelFamily::ScreenedPicard1d
        )
    }

    fn needs_nu(&self) -> bool {
        matches!(
            self,
            KernelFamily::FourPbikK | KernelFamily::ScreenedPicard1d | KernelFamily::Log2d
        )
    }

    fn singular_at_zero(&self, dim: usize) -> bool {
        match self {
            KernelFamily::LaplacePsi | KernelFamily::ScreenedW => dim >= 2,
            KernelFamily::Log2d => true,
            _ => false,
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::LaplacePsi => write!(f, "laplace-psi"),
            KernelFamily::ScreenedW => write!(f, "screened-w"),
            KernelFamily::FourPbikK => write!(f, "fourpbik-k"),
            KernelFamily::ScreenedPicard1d => write!(f, "screened-1d-picard"),
            KernelFamily::Log2d => write!(f, "log-2d"),
            KernelFamily::Constant(c) => write!(f, "constant:{c}"),
        }
    }
}

impl FromStr for KernelFamily {
    type Err = PnpbError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "laplace-psi" => KernelFamily::LaplacePsi,
            "screened-w" => KernelFamily::ScreenedW,
            "fourpbik-k" => KernelFamily::FourPbikK,
            "screened-1d-picard" => KernelFamily::ScreenedPicard1d,
            "log-2d" => KernelFamily::Log2d,
            other => match other.strip_prefix("constant:") {
                Some(c) => KernelFamily::Constant(c.trim().parse().map_err(|_| {
                    PnpbError::InvalidParameter(format!("bad constant kernel value {c:?}"))
                })?),
                None => {
                    return Err(PnpbError::InvalidParameter(format!(
                        "unknown kernel {other:?}"
                    )))
                }
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec<R: Real = f64> {
    pub family: KernelFamily,
    pub dim: usize,
    pub lambda: R,
    pub nu: R,
}

impl<R: Real> KernelSpec<R> {
    pub fn new(family: KernelFamily, dim: usize, lambda: R, nu: R) -> Result<Self> {
        let spec = Self {
            family,
            dim,
            lambda,
            nu,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(PnpbError::UnsupportedKernel(format!(
                "dimension {}",
                self.dim
            )));
        }
        match (self.family, self.dim) {
            (KernelFamily::ScreenedPicard1d, d) if d != 1 => {
                return Err(PnpbError::UnsupportedKernel(format!(
                    "{} in {d}-d",
                    self.family
                )))
            }
            (KernelFamily::Log2d, d) if d != 2 => {
                return Err(PnpbError::UnsupportedKernel(format!(
                    "{} in {d}-d",
                    self.family
                )))
            }
            _ => {}
        }
        if self.family.needs_lambda() && !(self.lambda > R::zero()) {
            return Err(PnpbError::InvalidParameter(format!(
                "kernel {} needs lambda > 0, got {}",
                self.family, self.lambda
            )));
        }
        if self.family.needs_nu() && !(self.nu > R::zero()) {
            return Err(PnpbError::InvalidParameter(format!(
                "kernel {} needs nu > 0, got {}",
                self.family, self.nu
            )));
        }
        Ok(())
    }

    /// Kernel value at distance `r`.
    pub fn eval(&self, r: R) -> Result<R> {
        eval_kernel(self, r)
    }
}

/// Closed-form value of the kernel at distance `r >= 0`.
pub fn eval_kernel<R: Real>(spec: &KernelSpec<R>, r: R) -> Result<R> {
    if r < R::zero() || r.is_nan() {
        return Err(PnpbError::InvalidParameter(format!(
            "negative distance {r}"
        )));
    }
    if r == R::zero() && spec.family.singular_at_zero(spec.dim) {
        return Err(PnpbError::SingularAtZero);
    }
    let pi = R::PI();
    let two = R::lit(2.0);
    let four = R::lit(4.0);
    let (lambda, nu) = (spec.lambda, spec.nu);
    let nu2 = nu * nu;
    Ok(match (spec.family, spec.dim) {
        (KernelFamily::Constant(c), _) => R::lit(c),
        (KernelFamily::LaplacePsi, 1) => -r / two,
        (KernelFamily::LaplacePsi, 2) => -r.ln() / (two * pi),
        (KernelFamily::LaplacePsi, _) => R::one() / (four * pi * r),
        (KernelFamily::ScreenedW, 1) => (-r / lambda).exp() / (two * lambda),
        (KernelFamily::ScreenedW, 2) => bessel_k0(r / lambda) / (two * pi * lambda * lambda),
        (KernelFamily::ScreenedW, _) => (-r / lambda).exp() / (four * pi * lambda * lambda * r),
        (KernelFamily::FourPbikK, 1) => -(r + lambda * (-r / lambda).exp()) / (two * nu2),
        (KernelFamily::FourPbikK, 2) => -log_plus_k0(r, lambda) / (two * pi * nu2),
        (KernelFamily::FourPbikK, _) => {
            let x = r / lambda;
            // (1 - e^{-x}) / r, with its removable singularity at r = 0
            let ratio = if x < R::lit(1e-8) {
                (R::one() - x / two) / lambda
            } else {
                -(-x).exp_m1() / r
            };
            ratio / (four * pi * nu2)
        }
        (KernelFamily::ScreenedPicard1d, _) => lambda / (two * nu2) * (-r / lambda).exp(),
        (KernelFamily::Log2d, _) => -r.ln() / (two * pi * nu2),
    })
}

/// Modified Bessel function of the second kind, order zero.
pub fn bessel_k0<R: Real>(x: R) -> R {
    let xf = x.to_f64_lossy();
    R::lit(if xf <= 2.0 {
        let (log_coeff, rest) = k0_series(xf);
        -(0.5 * xf).ln() * log_coeff + rest
    } else {
        k0_integral(xf)
    })
}

/// Splits `K0(x) = -ln(x/2) I0(x) + rest(x)` for `x <= 2`; returns `(I0, rest)`.
fn k0_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut i0 = 1.0;
    let mut rest = -EULER_GAMMA;
    for k in 1..60 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        rest += term * (harmonic - EULER_GAMMA);
        if term < 1e-18 * i0 {
            break;
        }
    }
    (i0, rest)
}

/// `K0(x) = ∫_0^∞ exp(-x cosh t) dt`; the trapezoid rule converges
/// geometrically for this integrand.
fn k0_integral(x: f64) -> f64 {
    let h = 0.05;
    let mut sum = 0.5 * (-x).exp();
    let mut k = 1;
    loop {
        let v = (-x * (k as f64 * h).cosh()).exp();
        sum += v;
        if v < 1e-18 * sum {
            break;
        }
        k += 1;
    }
    sum * h
}

/// `ln r + K0(r/λ)`, which stays bounded as `r -> 0`.
fn log_plus_k0<R: Real>(r: R, lambda: R) -> R {
    let (rf, lf) = (r.to_f64_lossy(), lambda.to_f64_lossy());
    let x = rf / lf;
    R::lit(if x <= 2.0 {
        let (i0, rest) = k0_series(x);
        // ln r - ln(x/2) I0 = ln(2λ) - ln(x/2) (I0 - 1)
        let log_half = if x > 0.0 { (0.5 * x).ln() } else { 0.0 };
        (2.0 * lf).ln() - log_half * (i0 - 1.0) + rest
    } else {
        rf.ln() + k0_integral(x)
    })
}

/// Precomputed convolution tensor for offsets `-2N..=2N` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable<R: Real = f64> {
    pub spec: KernelSpec<R>,
    dim: usize,
    n: usize,
    dx: R,
    /// Row-major, x fastest; `(4N + 1)^dim` entries.
    values: Vec<R>,
}

impl<R: Real> KernelTable<R> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Grid parameter `N`; offsets run over `-2N..=2N`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> R {
        self.dx
    }

    /// Entries per axis, `4N + 1`.
    pub fn width(&self) -> usize {
        4 * self.n + 1
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn get(&self, m: isize) -> R {
        debug_assert_eq!(self.dim, 1);
        self.values[(m + 2 * self.n as isize) as usize]
    }

    pub fn get2(&self, m: isize, n: isize) -> R {
        debug_assert_eq!(self.dim, 2);
        let off = 2 * self.n as isize;
        self.values[((n + off) as usize) * self.width() + (m + off) as usize]
    }

    /// Offset value for a flat offset vector; `offset.len() == dim`.
    pub fn at(&self, offset: [isize; 2]) -> R {
        match self.dim {
            1 => self.get(offset[0]),
            _ => self.get2(offset[0], offset[1]),
        }
    }

    /// 2D table acting on y-independent densities exactly like `line` does
    /// in 1D: `T_{m,n} = line_m δ_{n,0}`.
    pub fn from_1d_line(line: &KernelTable<R>) -> Result<Self> {
        if line.dim != 1 {
            return Err(PnpbError::DimensionMismatch(
                "line extension needs a 1D table".into(),
            ));
        }
        let w = line.width();
        let mut values = vec![R::zero(); w * w];
        let row = 2 * line.n;
        values[row * w..(row + 1) * w].copy_from_slice(&line.values);
        Ok(Self {
            spec: line.spec,
            dim: 2,
            n: line.n,
            dx: line.dx,
            values,
        })
    }

    pub fn is_even(&self) -> bool {
        let n = 2 * self.n as isize;
        match self.dim {
            1 => (0..=n).all(|m| self.get(m) == self.get(-m)),
            _ => (0..=n).all(|m| {
                (0..=n).all(|k| {
                    let v = self.get2(m, k);
                    v == self.get2(-m, k) && v == self.get2(m, -k) && v == self.get2(-m, -k)
                })
            }),
        }
    }

    /// Stable file name for the cache entry of this table.
    pub fn cache_file_name(spec: &KernelSpec<R>, grid: &Grid<R>) -> String {
        format!(
            "{}-d{}-l{:e}-nu{:e}-n{}-dx{:e}.ktab",
            spec.family,
            spec.dim,
            spec.lambda.to_f64_lossy(),
            spec.nu.to_f64_lossy(),
            grid.n(),
            grid.dx().to_f64_lossy()
        )
    }

    /// Binary layout, little-endian: family code (u64), dim (u64),
    /// λ (f64), ν (f64), N (u64), dx (f64), then the entries as f64.
    pub fn write_cache(&self, mut w: impl Write) -> Result<()> {
        let code = self.spec.family.code().ok_or_else(|| {
            PnpbError::Cache(format!("{} tables are not cacheable", self.spec.family))
        })?;
        let io = |e: std::io::Error| PnpbError::Cache(e.to_string());
        w.write_all(&code.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.dim as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&self.spec.lambda.to_f64_lossy().to_le_bytes())
            .map_err(io)?;
        w.write_all(&self.spec.nu.to_f64_lossy().to_le_bytes())
            .map_err(io)?;
        w.write_all(&(self.n as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&self.dx.to_f64_lossy().to_le_bytes())
            .map_err(io)?;
        for v in &self.values {
            w.write_all(&v.to_f64_lossy().to_le_bytes()).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_cache(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| PnpbError::Cache(e.to_string()))?;
        if bytes.len() < 48 || bytes.len() % 8 != 0 {
            return Err(PnpbError::Cache(format!(
                "truncated table ({} bytes)",
                bytes.len()
            )));
        }
        let word = |k: usize| -> [u8; 8] { bytes[8 * k..8 * k + 8].try_into().unwrap() };
        let family = KernelFamily::from_code(u64::from_le_bytes(word(0)))
            .ok_or_else(|| PnpbError::Cache("unknown kernel family code".into()))?;
        let dim = u64::from_le_bytes(word(1)) as usize;
        let lambda = f64::from_le_bytes(word(2));
        let nu = f64::from_le_bytes(word(3));
        let n = u64::from_le_bytes(word(4)) as usize;
        let dx = f64::from_le_bytes(word(5));
        if !(1..=2).contains(&dim) {
            return Err(PnpbError::Cache(format!("bad dimension {dim}")));
        }
        let count = (4 * n + 1).pow(dim as u32);
        if bytes.len() != 48 + 8 * count {
            return Err(PnpbError::Cache(format!(
                "expected {count} entries, found {}",
                bytes.len() / 8 - 6
            )));
        }
        let values = (0..count)
            .map(|k| R::lit(f64::from_le_bytes(word(6 + k))))
            .collect();
        Ok(Self {
            spec: KernelSpec {
                family,
                dim,
                lambda: R::lit(lambda),
                nu: R::lit(nu),
            },
            dim,
            n,
            dx: R::lit(dx),
            values,
        })
    }

    /// Whether a cached table was built for exactly this spec and grid.
    pub fn matches(&self, spec: &KernelSpec<R>, grid: &Grid<R>) -> bool {
        self.spec == *spec && self.dim == grid.dim() && self.n == grid.n() && self.dx == grid.dx()
    }
}

/// Loads the table from `dir` if a matching cache entry exists, otherwise
/// builds it and writes the entry.
pub fn load_or_build<R: Real>(
    dir: &Path,
    spec: &KernelSpec<R>,
    grid: &Grid<R>,
) -> Result<KernelTable<R>> {
    let path: PathBuf = dir.join(KernelTable::cache_file_name(spec, grid));
    if let Ok(f) = std::fs::File::open(&path) {
        if let Ok(t) = KernelTable::read_cache(std::io::BufReader::new(f)) {
            if t.matches(spec, grid) {
                return Ok(t);
            }
        }
    }
    let table = build_tensor(spec, grid)?;
    if spec.family.code().is_some() {
        std::fs::create_dir_all(dir).map_err(|e| PnpbError::Cache(e.to_string()))?;
        // Written under a private name and renamed, so concurrent readers
        // never see a partial file.
        let tmp = path.with_extension(format!(
            "tmp{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        let f = std::fs::File::create(&tmp).map_err(|e| PnpbError::Cache(e.to_string()))?;
        let mut w = std::io::BufWriter::new(f);
        table.write_cache(&mut w)?;
        w.into_inner()
            .map_err(|e| PnpbError::Cache(e.to_string()))?
            .sync_all()
            .map_err(|e| PnpbError::Cache(e.to_string()))?;
        std::fs::rename(&tmp, &path).map_err(|e| PnpbError::Cache(e.to_string()))?;
    }
    Ok(table)
}

/// Tabulates `T_m` for every offset reachable on `grid`.
pub fn build_tensor<R: Real>(spec: &KernelSpec<R>, grid: &Grid<R>) -> Result<KernelTable<R>> {
    spec.check()?;
    if spec.dim != grid.dim() {
        return Err(PnpbError::DimensionMismatch(format!(
            "{}-d kernel on a {}-d grid",
            spec.dim,
            grid.dim()
        )));
    }
    let n = grid.n();
    let reach = 2 * n;
    let width = 2 * reach + 1;
    let dx = grid.dx();
    let mut values = vec![R::zero(); width.pow(spec.dim as u32)];
    match spec.dim {
        1 => {
            let quad = Adaptive::new(1e-14);
            for m in 0..=reach {
                let v = tensor_entry_1d(spec, dx, m as f64, &quad)?;
                values[reach + m] = v;
                values[reach - m] = v;
            }
        }
        _ => {
            let gauss = GaussLegendre::<f64>::new(16);
            for m in 0..=reach {
                for k in 0..=m {
                    let v = tensor_entry_2d(spec, dx, m as f64, k as f64, &gauss)?;
                    for (a, b) in [(m, k), (k, m)] {
                        for (sa, sb) in [(1isize, 1isize), (-1, 1), (1, -1), (-1, -1)] {
                            let ia = (reach as isize + sa * a as isize) as usize;
                            let ib = (reach as isize + sb * b as isize) as usize;
                            values[ib * width + ia] = v;
                        }
                    }
                }
            }
        }
    }
    Ok(KernelTable {
        spec: *spec,
        dim: spec.dim,
        n,
        dx,
        values,
    })
}

fn kernel_f64<R: Real>(spec: &KernelSpec<R>) -> KernelSpec<f64> {
    KernelSpec {
        family: spec.family,
        dim: spec.dim,
        lambda: spec.lambda.to_f64_lossy(),
        nu: spec.nu.to_f64_lossy(),
    }
}

fn tensor_entry_1d<R: Real>(spec: &KernelSpec<R>, dx: R, m: f64, quad: &Adaptive) -> Result<R> {
    let s = kernel_f64(spec);
    let h = dx.to_f64_lossy();
    let mut err = None;
    let v = quad.integrate(-1.0, 1.0, &[0.0, m], |x: f64| {
        match eval_kernel(&s, ((m - x) * h).abs()) {
            Ok(k) => k * (1.0 - x.abs()),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(R::lit(h * v))
}

fn tensor_entry_2d<R: Real>(
    spec: &KernelSpec<R>,
    dx: R,
    m: f64,
    k: f64,
    gauss: &GaussLegendre<f64>,
) -> Result<R> {
    let s = kernel_f64(spec);
    let h = dx.to_f64_lossy();
    let near = m <= 1.0 && k <= 1.0;
    let log_family = matches!(s.family, KernelFamily::Log2d | KernelFamily::LaplacePsi);
    let quadrants = [(-1.0, 0.0), (0.0, 1.0)];
    let value = if near && log_family {
        // -(1/(2πν²)) [ln h + ½ ∫∫ ln(X² + Y²) ê ê], since ∫∫ ê ê = 1
        let scale = match s.family {
            KernelFamily::Log2d => 1.0 / (2.0 * std::f64::consts::PI * s.nu * s.nu),
            _ => 1.0 / (2.0 * std::f64::consts::PI),
        };
        -scale * h * h * (h.ln() + 0.5 * log_hat_integral(m, k))
    } else if near {
        let quad = Adaptive::new(1e-13);
        let mut err = None;
        let mut total = 0.0;
        for &(xa, xb) in &quadrants {
            for &(ya, yb) in &quadrants {
                total += quad.integrate(xa, xb, &[m], |x: f64| {
                    quad.integrate(ya, yb, &[k], |y: f64| {
                        let r = h * ((m - x).hypot(k - y));
                        match eval_kernel(&s, r) {
                            Ok(v) => v * (1.0 - y.abs()),
                            Err(e) => {
                                err.get_or_insert(e);
                                0.0
                            }
                        }
                    })
                    .unwrap_or_else(|e| {
                        err.get_or_insert(e);
                        0.0
                    }) * (1.0 - x.abs())
                })?;
            }
        }
        if let Some(e) = err {
            return Err(e);
        }
        h * h * total
    } else {
        let mut total = 0.0;
        let mut err = None;
        for &(xa, xb) in &quadrants {
            for &(ya, yb) in &quadrants {
                total += gauss.integrate(xa, xb, |x| {
                    gauss.integrate(ya, yb, |y| {
                        let r = h * ((m - x).hypot(k - y));
                        eval_kernel(&s, r).unwrap_or_else(|e| {
                            err.get_or_insert(e);
                            0.0
                        }) * (1.0 - y.abs())
                    }) * (1.0 - x.abs())
                });
            }
        }
        if let Some(e) = err {
            return Err(e);
        }
        h * h * total
    };
    Ok(R::lit(value))
}

/// `∫∫_{[-1,1]²} ln((m-x)² + (k-y)²) (1-|x|)(1-|y|) dx dy` for integer
/// offsets, in closed form.
pub(crate) fn log_hat_integral(m: f64, k: f64) -> f64 {
    // per quadrant the hat is linear: 1 - |x| = α + βx
    let pieces = [(-1.0, 0.0, 1.0, 1.0), (0.0, 1.0, 1.0, -1.0)];
    let mut total = 0.0;
    for &(xa, xb, ax, bx) in &pieces {
        for &(ya, yb, ay, by) in &pieces {
            // X = m - x, hat = (α + βm) - βX
            let (a, b) = (ax + bx * m, -bx);
            let (c, d) = (ay + by * k, -by);
            let xr = (m - xb, m - xa);
            let yr = (k - yb, k - ya);
            total += a * c * log_moment(0, 0, xr, yr)
                + a * d * log_moment(0, 1, xr, yr)
                + b * c * log_moment(1, 0, xr, yr)
                + b * d * log_moment(1, 1, xr, yr);
        }
    }
    total
}

/// `∫∫ X^p Y^q ln(X² + Y²)` over a rectangle that does not straddle an axis.
fn log_moment(p: i32, q: i32, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) -> f64 {
    let mut sign = 1.0;
    let (x0, x1) = if x1 <= 0.0 {
        if p == 1 {
            sign = -sign;
        }
        (-x1, -x0)
    } else {
        (x0, x1)
    };
    let (y0, y1) = if y1 <= 0.0 {
        if q == 1 {
            sign = -sign;
        }
        (-y1, -y0)
    } else {
        (y0, y1)
    };
    debug_assert!(x0 >= 0.0 && y0 >= 0.0);
    let f = |x: f64, y: f64| log_moment_antiderivative(p, q, x, y);
    sign * (f(x1, y1) - f(x0, y1) - f(x1, y0) + f(x0, y0))
}

/// Mixed antiderivative of `X^p Y^q ln(X² + Y²)` on the closed first quadrant.
fn log_moment_antiderivative(p: i32, q: i32, x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    let l = if r2 > 0.0 { r2.ln() } else { 0.0 };
    let at_xy = x.atan2(y); // atan(x/y)
    let at_yx = y.atan2(x); // atan(y/x)
    match (p, q) {
        (0, 0) => (x * x + y * y) * at_xy - x * y + x * (2.0 * x * at_yx + y * l - 2.0 * y),
        (0, 1) => {
            x.powi(3) * l / 6.0 + x * y * y * l / 2.0 - 7.0 * x * y * y / 6.0
                + 2.0 * y.powi(3) * at_xy / 3.0
        }
        (1, 0) => {
            2.0 * x.powi(3) * at_yx / 3.0 - 7.0 * x * x * y / 6.0 - y.powi(3) / 9.0
                + y * (3.0 * x * x + y * y) * l / 6.0
        }
        _ => {
            x.powi(4) * l / 8.0 - 3.0 * x * x * y * y / 8.0 - y.powi(4) / 16.0
                + y * y * (2.0 * x * x + y * y) * l / 8.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: KernelFamily, dim: usize, lambda: f64, nu: f64) -> KernelSpec<f64> {
        KernelSpec::new(family, dim, lambda, nu).unwrap()
    }

    #[test]
    fn picard_kernel_at_origin() {
        let k = spec(KernelFamily::ScreenedPicard1d, 1, 1.0, 1.0);
        assert!((k.eval(0.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_kernel_vanishes_at_unit_distance() {
        for nu in [0.3, 1.0, 4.0] {
            let k = spec(KernelFamily::Log2d, 2, 0.0, nu);
            assert_eq!(k.eval(1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn fourpbik_3d_removable_singularity() {
        let k = spec(KernelFamily::FourPbikK, 3, 1.0, 1.0);
        let target = 1.0 / (4.0 * std::f64::consts::PI);
        assert!((k.eval(0.0).unwrap() - target).abs() < 1e-15);
        assert!((k.eval(1e-12).unwrap() - target).abs() < 1e-12);
        assert!((k.eval(1e-5).unwrap() - target * (1.0 - 0.5e-5)).abs() < 1e-11);
        let r = 0.3_f64;
        assert!(
            (k.eval(r).unwrap() - (1.0 - (-r).exp()) / (4.0 * std::f64::consts::PI * r)).abs()
                < 1e-15
        );
    }

    #[test]
    fn singular_families_reject_origin() {
        for (f, d) in [
            (KernelFamily::LaplacePsi, 2),
            (KernelFamily::LaplacePsi, 3),
            (KernelFamily::ScreenedW, 2),
            (KernelFamily::ScreenedW, 3),
            (KernelFamily::Log2d, 2),
        ] {
            assert_eq!(
                spec(f, d, 1.0, 1.0).eval(0.0),
                Err(PnpbError::SingularAtZero)
            );
        }
        assert!(spec(KernelFamily::LaplacePsi, 1, 1.0, 1.0)
            .eval(0.0)
            .is_ok());
        assert!(spec(KernelFamily::FourPbikK, 2, 1.0, 1.0).eval(0.0).is_ok());
    }

    #[test]
    fn spec_invariants() {
        assert!(KernelSpec::new(KernelFamily::ScreenedW, 1, 0.0, 1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::FourPbikK, 1, 1.0, 0.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Log2d, 1, 1.0, 1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::ScreenedPicard1d, 2, 1.0, 1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::LaplacePsi, 4, 1.0, 1.0).is_err());
    }

    #[test]
    fn bessel_k0_reference_values() {
        // scipy.special.k0
        let refs = [
            (1e-6, 13.93144207362641),
            (0.1, 2.4270690247020164),
            (0.5, 0.9244190712276656),
            (1.0, 0.42102443824070823),
            (1.999, 0.11403383058923296),
            (2.0, 0.1138938727495334),
            (2.001, 0.11375409873668464),
            (5.0, 0.0036910983340425942),
            (20.0, 5.741237815336524e-10),
        ];
        for (x, want) in refs {
            let got: f64 = bessel_k0(x);
            assert!(
                ((got - want) / want).abs() < 1e-13,
                "K0({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn fourpbik_2d_is_continuous_through_series_switch() {
        let k = spec(KernelFamily::FourPbikK, 2, 0.5, 1.0);
        let lo = k.eval(0.999_999_9).unwrap();
        let hi = k.eval(1.000_000_1).unwrap();
        assert!((lo - hi).abs() < 1e-7);
        let direct = -(0.7_f64.ln() + bessel_k0(1.4)) / (2.0 * std::f64::consts::PI);
        assert!((k.eval(0.7).unwrap() - direct).abs() < 1e-14);
        let limit = -((1.0_f64).ln() - EULER_GAMMA) / (2.0 * std::f64::consts::PI);
        assert!((k.eval(0.0).unwrap() - limit).abs() < 1e-15);
    }

    #[test]
    fn fourpbik_is_psi_minus_screened() {
        let (lambda, nu) = (0.7, 1.3);
        for d in 1..=3 {
            let k = spec(KernelFamily::FourPbikK, d, lambda, nu);
            let psi = spec(KernelFamily::LaplacePsi, d, lambda, nu);
            let w = spec(KernelFamily::ScreenedW, d, lambda, nu);
            for r in [0.05, 0.4, 1.7] {
                let want =
                    (psi.eval(r).unwrap() - lambda * lambda * w.eval(r).unwrap()) / (nu * nu);
                assert!(
                    (k.eval(r).unwrap() - want).abs() < 1e-12,
                    "d = {d}, r = {r}"
                );
            }
        }
    }

    #[test]
    fn constant_kernel_tensor() {
        let g = Grid::<f64>::line(8);
        let t = build_tensor(&spec(KernelFamily::Constant(2.5), 1, 0.0, 1.0), &g).unwrap();
        assert!(t.values().iter().all(|&v| (v - 2.5 * g.dx()).abs() < 1e-14));
        let g2 = Grid::<f64>::square(2);
        let t2 = build_tensor(&spec(KernelFamily::Constant(2.5), 2, 0.0, 1.0), &g2).unwrap();
        assert!(t2
            .values()
            .iter()
            .all(|&v| (v - 2.5 * g2.cell_volume()).abs() < 1e-13));
    }

    #[test]
    fn tensors_are_even() {
        let g = Grid::<f64>::line(10);
        assert!(
            build_tensor(&spec(KernelFamily::ScreenedPicard1d, 1, 0.3, 1.0), &g)
                .unwrap()
                .is_even()
        );
        let g2 = Grid::<f64>::square(3);
        assert!(build_tensor(&spec(KernelFamily::Log2d, 2, 0.0, 1.0), &g2)
            .unwrap()
            .is_even());
    }

    #[test]
    fn log_antiderivatives_match_quadrature() {
        let quad = Adaptive::new(1e-13);
        for (p, q) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            for (xr, yr) in [
                ((0.5, 2.0), (1.0, 1.5)),
                ((-2.0, -0.5), (1.0, 3.0)),
                ((0.0, 1.0), (-1.0, 0.0)),
            ] {
                let exact = log_moment(p, q, xr, yr);
                let num = quad
                    .integrate(xr.0, xr.1, &[0.0], |x: f64| {
                        quad.integrate(yr.0, yr.1, &[0.0], |y: f64| {
                            let r2 = x * x + y * y;
                            if r2 > 0.0 {
                                x.powi(p) * y.powi(q) * r2.ln()
                            } else {
                                0.0
                            }
                        })
                        .unwrap()
                    })
                    .unwrap();
                assert!(
                    (exact - num).abs() < 1e-10,
                    "p={p} q={q} {xr:?} {yr:?}: {exact} vs {num}"
                );
            }
        }
    }

    #[test]
    fn cache_round_trip_and_rejects_garbage() {
        let g = Grid::<f64>::line(5);
        let s = spec(KernelFamily::ScreenedPicard1d, 1, 1.0, 1.0);
        let t = build_tensor(&s, &g).unwrap();
        let mut buf = Vec::new();
        t.write_cache(&mut buf).unwrap();
        assert_eq!(buf.len(), 48 + 8 * 21);
        assert_eq!(&buf[0..8], &3u64.to_le_bytes());
        let back = KernelTable::<f64>::read_cache(&buf[..]).unwrap();
        assert_eq!(back, t);
        assert!(back.matches(&s, &g));
        assert!(KernelTable::<f64>::read_cache(&buf[..40]).is_err());
        let c = build_tensor(&spec(KernelFamily::Constant(1.0), 1, 0.0, 1.0), &g).unwrap();
        assert!(c.write_cache(Vec::new()).is_err());
    }

    #[test]
    fn family_names_round_trip() {
        for f in [
            KernelFamily::LaplacePsi,
            KernelFamily::ScreenedW,
            KernelFamily::FourPbikK,
            KernelFamily::ScreenedPicard1d,
            KernelFamily::Log2d,
            KernelFamily::Constant(0.25),
        ] {
            assert_eq!(f.to_string().parse::<KernelFamily>().unwrap(), f);
        }
        assert!("cauchy".parse::<KernelFamily>().is_err());
    }

    #[test]
    fn line_extension_is_row_embedded() {
        let g = Grid::<f64>::line(3);
        let t = build_tensor(&spec(KernelFamily::ScreenedPicard1d, 1, 1.0, 1.0), &g).unwrap();
        let t2 = KernelTable::from_1d_line(&t).unwrap();
        assert_eq!(t2.get2(4, 0), t.get(4));
        assert_eq!(t2.get2(-2, 0), t.get(-2));
        assert_eq!(t2.get2(1, 1), 0.0);
    }
}

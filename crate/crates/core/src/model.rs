//! Parameter, mesh and state types of the dimensionless model.

use crate::error::{PnpbError, Result};
use crate::kernel::KernelFamily;
use crate::num::Real;

/// Per-species constants. The last species is water and carries no charge.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesSet<R: Real = f64> {
    pub valence: Vec<i32>,
    pub volume: Vec<R>,
    pub diffusivity: Vec<R>,
    pub bulk: Vec<R>,
}

impl<R: Real> SpeciesSet<R> {
    pub fn new(
        valence: Vec<i32>,
        volume: Vec<R>,
        diffusivity: Vec<R>,
        bulk: Vec<R>,
    ) -> Result<Self> {
        let s = Self {
            valence,
            volume,
            diffusivity,
            bulk,
        };
        s.check()?;
        Ok(s)
    }

    /// Total number of species, water included (`K + 1`).
    pub fn len(&self) -> usize {
        self.valence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valence.is_empty()
    }

    /// Number of charged species `K`.
    pub fn count_charged(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn z(&self, i: usize) -> R {
        R::lit(self.valence[i] as f64)
    }

    /// Arithmetic mean of the species volumes.
    pub fn mean_volume(&self) -> R {
        self.volume.iter().copied().sum::<R>() / R::lit(self.len() as f64)
    }

    pub fn check(&self) -> Result<()> {
        let n = self.valence.len();
        if n < 2 {
            return Err(PnpbError::DimensionMismatch(format!(
                "need at least one charged species plus water, got {n} species"
            )));
        }
        for (name, len) in [
            ("volume", self.volume.len()),
            ("diffusivity", self.diffusivity.len()),
            ("bulk", self.bulk.len()),
        ] {
            if len != n {
                return Err(PnpbError::DimensionMismatch(format!(
                    "{name} has {len} entries, valence has {n}"
                )));
            }
        }
        if self.valence[n - 1] != 0 {
            return Err(PnpbError::InvalidParameter(
                "last species is water and must have valence 0".into(),
            ));
        }
        for (name, xs) in [
            ("volume", &self.volume),
            ("diffusivity", &self.diffusivity),
            ("bulk", &self.bulk),
        ] {
            if let Some((i, x)) = xs
                .iter()
                .enumerate()
                .find(|(_, x)| !(**x > R::zero() && x.is_finite()))
            {
                return Err(PnpbError::InvalidParameter(format!(
                    "{name}[{}] = {x} must be positive",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Treatment of `ln Gamma` when the void fraction is not positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaGuard {
    /// Fail with `VoidCollapse`.
    #[default]
    Strict,
    /// Clamp `Gamma` to [`GAMMA_FLOOR`] inside the logarithm and record an event.
    Permissive,
}

pub const GAMMA_FLOOR: f64 = 1e-14;

/// Static external potential `V_0`, sampled at the cell nodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ExternalField<R: Real = f64> {
    #[default]
    None,
    /// `V_0 = sum_a slope[a] * x_a`; missing axes have zero slope.
    Linear(Vec<R>),
    /// One value per cell, in the grid's cell order.
    Tabulated(Vec<R>),
}

impl<R: Real> ExternalField<R> {
    pub fn evaluate(&self, grid: &Grid<R>) -> Result<Vec<R>> {
        let n = grid.cell_count();
        match self {
            ExternalField::None => Ok(vec![R::zero(); n]),
            ExternalField::Linear(slopes) => {
                if slopes.len() > grid.dim() {
                    return Err(PnpbError::DimensionMismatch(format!(
                        "linear field has {} slopes on a {}-d grid",
                        slopes.len(),
                        grid.dim()
                    )));
                }
                Ok((0..n)
                    .map(|c| {
                        let x = grid.cell_coords(c);
                        slopes.iter().zip(x.iter()).map(|(&a, &xa)| a * xa).sum()
                    })
                    .collect())
            }
            ExternalField::Tabulated(values) => {
                if values.len() != n {
                    return Err(PnpbError::DimensionMismatch(format!(
                        "tabulated field has {} values, grid has {n} cells",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}

/// Dimensionless model knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<R: Real = f64> {
    /// Steric strength.
    pub eta: R,
    /// Scaled correlation length.
    pub lambda: R,
    /// Scaled Debye length.
    pub nu: R,
    /// Reference volume; `None` means the mean species volume.
    pub v0: Option<R>,
    pub kernel: KernelFamily,
    pub external_field: ExternalField<R>,
    pub gamma_guard: GammaGuard,
}

impl<R: Real> ModelParams<R> {
    pub fn new(eta: R, lambda: R, nu: R, kernel: KernelFamily) -> Self {
        Self {
            eta,
            lambda,
            nu,
            v0: None,
            kernel,
            external_field: ExternalField::None,
            gamma_guard: GammaGuard::Strict,
        }
    }

    pub fn with_v0(mut self, v0: R) -> Self {
        self.v0 = Some(v0);
        self
    }

    pub fn with_external_field(mut self, field: ExternalField<R>) -> Self {
        self.external_field = field;
        self
    }

    pub fn with_gamma_guard(mut self, guard: GammaGuard) -> Self {
        self.gamma_guard = guard;
        self
    }

    pub fn resolved_v0(&self, species: &SpeciesSet<R>) -> R {
        self.v0.unwrap_or_else(|| species.mean_volume())
    }

    /// `Gamma^B = 1 - eta * sum_i v_i C_i^B`.
    pub fn gamma_bulk(&self, species: &SpeciesSet<R>) -> R {
        R::one() - self.eta * dot(&species.volume, &species.bulk)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.eta >= R::zero()) || !self.eta.is_finite() {
            return Err(PnpbError::InvalidParameter(format!(
                "eta = {} must be >= 0",
                self.eta
            )));
        }
        if !(self.lambda >= R::zero()) || !self.lambda.is_finite() {
            return Err(PnpbError::InvalidParameter(format!(
                "lambda = {} must be >= 0",
                self.lambda
            )));
        }
        if !(self.nu > R::zero()) || !self.nu.is_finite() {
            return Err(PnpbError::InvalidParameter(format!(
                "nu = {} must be > 0",
                self.nu
            )));
        }
        if let Some(v0) = self.v0 {
            if !(v0 > R::zero()) {
                return Err(PnpbError::InvalidParameter(format!(
                    "v0 = {v0} must be > 0"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Uniform cell-centred mesh on `[-L, L]^dim` with `2N + 1` nodes per axis.
///
/// Node `x_j = -L + (j + N) dx`, `j = -N..=N`, is the centre of its cell;
/// the two outermost cells per axis are half cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<R: Real = f64> {
    dim: usize,
    n: usize,
    half_extent: R,
}

impl<R: Real> Grid<R> {
    pub fn new(dim: usize, n: usize, half_extent: R) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(PnpbError::InvalidParameter(format!(
                "dim = {dim}, expected 1 or 2"
            )));
        }
        if n == 0 {
            return Err(PnpbError::InvalidParameter("N must be at least 1".into()));
        }
        if !(half_extent > R::zero()) || !half_extent.is_finite() {
            return Err(PnpbError::InvalidParameter(format!(
                "half extent L = {half_extent} must be positive"
            )));
        }
        Ok(Self {
            dim,
            n,
            half_extent,
        })
    }

    pub fn line(n: usize) -> Self {
        Self::new(1, n, R::one()).expect("valid grid")
    }

    pub fn square(n: usize) -> Self {
        Self::new(2, n, R::one()).expect("valid grid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_extent(&self) -> R {
        self.half_extent
    }

    pub fn dx(&self) -> R {
        self.half_extent / R::lit(self.n as f64)
    }

    /// `2N + 1`.
    pub fn cells_per_axis(&self) -> usize {
        2 * self.n + 1
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis().pow(self.dim as u32)
    }

    /// `dx^dim`, the uniform weight used for masses and energies.
    pub fn cell_volume(&self) -> R {
        self.dx().powi(self.dim as i32)
    }

    /// `|Omega|` measured with uniform cell weights, `dx^dim * cell_count`.
    pub fn uniform_measure(&self) -> R {
        self.cell_volume() * R::lit(self.cell_count() as f64)
    }

    /// Coordinate of node index `k` in `0..2N+1` along any axis.
    pub fn node(&self, k: usize) -> R {
        -self.half_extent + R::lit(k as f64) * self.dx()
    }

    /// Splits a flat cell index into per-axis indices; x varies fastest.
    pub fn unravel(&self, cell: usize) -> [usize; 2] {
        let m = self.cells_per_axis();
        [cell % m, cell / m]
    }

    pub fn ravel(&self, ix: usize, iy: usize) -> usize {
        iy * self.cells_per_axis() + ix
    }

    /// Node coordinates of a cell; only the first `dim` entries are meaningful.
    pub fn cell_coords(&self, cell: usize) -> [R; 2] {
        let [ix, iy] = self.unravel(cell);
        match self.dim {
            1 => [self.node(cell), R::zero()],
            _ => [self.node(ix), self.node(iy)],
        }
    }

    /// Cell index of the point mirrored through the origin along x.
    pub fn mirror_x(&self, cell: usize) -> usize {
        let m = self.cells_per_axis();
        let [ix, iy] = self.unravel(cell);
        match self.dim {
            1 => m - 1 - cell,
            _ => self.ravel(m - 1 - ix, iy),
        }
    }

    /// Geometric cell measure: boundary cells count half per axis.
    pub fn geometric_weight(&self, cell: usize) -> R {
        let m = self.cells_per_axis();
        let half = |k: usize| {
            if k == 0 || k == m - 1 {
                R::lit(0.5)
            } else {
                R::one()
            }
        };
        let [ix, iy] = self.unravel(cell);
        match self.dim {
            1 => half(cell) * self.dx(),
            _ => half(ix) * half(iy) * self.cell_volume(),
        }
    }
}

/// How cell averages are weighted when integrating over the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassWeighting {
    /// `dx^dim` for every cell; the exact invariant of the update.
    #[default]
    Uniform,
    /// True cell measure, half cells on the boundary.
    Geometric,
}

/// Cell-average concentrations of all species at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State<R: Real = f64> {
    /// `concentrations[i][cell]`.
    pub concentrations: Vec<Vec<R>>,
    pub time: R,
}

impl<R: Real> State<R> {
    pub fn new(concentrations: Vec<Vec<R>>) -> Self {
        Self {
            concentrations,
            time: R::zero(),
        }
    }

    /// Every species constant in space.
    pub fn uniform(grid: &Grid<R>, values: &[R]) -> Self {
        Self::new(values.iter().map(|&v| vec![v; grid.cell_count()]).collect())
    }

    /// Samples `profile(species, [x, y])` at the cell nodes.
    pub fn from_fn(grid: &Grid<R>, species: usize, profile: impl Fn(usize, [R; 2]) -> R) -> Self {
        Self::new(
            (0..species)
                .map(|i| {
                    (0..grid.cell_count())
                        .map(|c| profile(i, grid.cell_coords(c)))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn species_count(&self) -> usize {
        self.concentrations.len()
    }

    pub fn masses(&self, grid: &Grid<R>) -> Vec<R> {
        self.masses_weighted(grid, MassWeighting::Uniform)
    }

    pub fn masses_weighted(&self, grid: &Grid<R>, weighting: MassWeighting) -> Vec<R> {
        self.concentrations
            .iter()
            .map(|c| match weighting {
                MassWeighting::Uniform => grid.cell_volume() * c.iter().copied().sum::<R>(),
                MassWeighting::Geometric => c
                    .iter()
                    .enumerate()
                    .map(|(cell, &v)| grid.geometric_weight(cell) * v)
                    .sum(),
            })
            .collect()
    }

    /// Void fraction `1 - eta sum_i v_i C_i` per cell.
    pub fn gamma(&self, eta: R, volume: &[R]) -> Vec<R> {
        let cells = self.concentrations.first().map_or(0, Vec::len);
        (0..cells)
            .map(|c| {
                R::one()
                    - eta
                        * self
                            .concentrations
                            .iter()
                            .zip(volume)
                            .map(|(ci, &v)| v * ci[c])
                            .sum::<R>()
            })
            .collect()
    }

    pub fn min_concentration(&self) -> R {
        self.concentrations
            .iter()
            .flatten()
            .fold(R::infinity(), |m, &x| m.min(x))
    }

    pub fn check_shape(&self, grid: &Grid<R>, species: usize) -> Result<()> {
        if self.concentrations.len() != species {
            return Err(PnpbError::DimensionMismatch(format!(
                "state has {} species, model has {species}",
                self.concentrations.len()
            )));
        }
        for (i, c) in self.concentrations.iter().enumerate() {
            if c.len() != grid.cell_count() {
                return Err(PnpbError::DimensionMismatch(format!(
                    "species {} has {} cells, grid has {}",
                    i + 1,
                    c.len(),
                    grid.cell_count()
                )));
            }
            if let Some(cell) = c.iter().position(|x| !x.is_finite()) {
                return Err(PnpbError::InvalidParameter(format!(
                    "species {} is not finite at cell {cell}",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// A noteworthy but non-fatal condition observed on a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    VoidCollapse {
        cell: usize,
        gamma: f64,
    },
    NegativeConcentration {
        species: usize,
        cell: usize,
        value: f64,
    },
    /// `C_i >= 1 / (eta v_i)` somewhere.
    Saturation {
        species: usize,
        cell: usize,
        value: f64,
    },
    /// A chemical potential was requested where `C_i <= 0`.
    NonpositiveConcentration {
        species: usize,
        cell: usize,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::VoidCollapse { .. } => "VoidCollapse",
            Event::NegativeConcentration { .. } => "NegativeConcentration",
            Event::Saturation { .. } => "Saturation",
            Event::NonpositiveConcentration { .. } => "NonpositiveConcentration",
        }
    }
}

/// Flags every cell violating `0 <= C_i < 1 / (eta v_i)`.
///
/// The upper bound only applies for `eta > 0`. Nothing is modified.
pub fn saturation_events<R: Real>(state: &State<R>, eta: R, volume: &[R]) -> Vec<Event> {
    let mut events = Vec::new();
    for (i, c) in state.concentrations.iter().enumerate() {
        let cap = if eta > R::zero() {
            R::one() / (eta * volume[i])
        } else {
            R::infinity()
        };
        for (cell, &x) in c.iter().enumerate() {
            if x < R::zero() {
                events.push(Event::NegativeConcentration {
                    species: i,
                    cell,
                    value: x.to_f64_lossy(),
                });
            } else if x >= cap {
                events.push(Event::Saturation {
                    species: i,
                    cell,
                    value: x.to_f64_lossy(),
                });
            }
        }
    }
    events
}

use crate::convolve::Convolver;
use crate::error::{PnpbError, Result};
use crate::kernel::{build_tensor, KernelSpec, KernelTable};
use crate::model::{dot, Grid, ModelParams, SpeciesSet, State};
use crate::num::Real;

/// Checks a configuration without building its kernel: parameter ranges,
/// `Γ^B > 0`, the shape of `state` and `1 - η Σ_i v_i m_i > 0`.
pub fn validate<R: Real>(
    grid: &Grid<R>,
    species: &SpeciesSet<R>,
    params: &ModelParams<R>,
    state: &State<R>,
) -> Result<()> {
    KernelSpec::new(params.kernel, grid.dim(), params.lambda, params.nu)?;
    check_model(grid, species, params, state)
}

/// Everything in [`validate`] except the kernel, which a [`System`] already
/// holds as a table.
fn check_model<R: Real>(
    grid: &Grid<R>,
    species: &SpeciesSet<R>,
    params: &ModelParams<R>,
    state: &State<R>,
) -> Result<()> {
    params.check()?;
    species.check()?;
    let gamma_bulk = params.gamma_bulk(species);
    if !(gamma_bulk > R::zero()) {
        return Err(PnpbError::NonPositiveBulkVoid(gamma_bulk.to_f64_lossy()));
    }
    params.external_field.evaluate(grid)?;
    state.check_shape(grid, species.len())?;
    let masses = state.masses(grid);
    let total = R::one() - params.eta * dot(&species.volume, &masses);
    if !(total > R::zero()) {
        return Err(PnpbError::NonPositiveTotalVoid(total.to_f64_lossy()));
    }
    Ok(())
}

/// A validated model on a fixed grid, with its precomputed kernel.
#[derive(Debug, Clone)]
pub struct System<R: Real = f64> {
    grid: Grid<R>,
    species: SpeciesSet<R>,
    params: ModelParams<R>,
    v0: R,
    gamma_bulk: R,
    external: Vec<R>,
    convolver: Convolver<R>,
}

impl<R: Real> System<R> {
    /// Checks the parameters and builds the convolution tensor of
    /// `params.kernel` on `grid`.
    pub fn new(grid: Grid<R>, species: SpeciesSet<R>, params: ModelParams<R>) -> Result<Self> {
        let spec = KernelSpec::new(params.kernel, grid.dim(), params.lambda, params.nu)?;
        params.check()?;
        species.check()?;
        let table = build_tensor(&spec, &grid)?;
        Self::with_table(grid, species, params, table)
    }

    /// Uses a prebuilt (or cached) kernel table.
    pub fn with_table(
        grid: Grid<R>,
        species: SpeciesSet<R>,
        params: ModelParams<R>,
        table: KernelTable<R>,
    ) -> Result<Self> {
        params.check()?;
        species.check()?;
        if table.dim() != grid.dim() || table.n() != grid.n() || table.dx() != grid.dx() {
            return Err(PnpbError::DimensionMismatch(
                "kernel table was built for a different grid".into(),
            ));
        }
        let gamma_bulk = params.gamma_bulk(&species);
        if !(gamma_bulk > R::zero()) {
            return Err(PnpbError::NonPositiveBulkVoid(gamma_bulk.to_f64_lossy()));
        }
        let v0 = params.resolved_v0(&species);
        let external = params.external_field.evaluate(&grid)?;
        Ok(Self {
            grid,
            species,
            params,
            v0,
            gamma_bulk,
            external,
            convolver: Convolver::new(table),
        })
    }

    /// Accepts `state` iff its shape matches and the total void
    /// `1 - η Σ_i v_i m_i` is positive.
    pub fn validate(&self, state: &State<R>) -> Result<()> {
        check_model(&self.grid, &self.species, &self.params, state)
    }

    pub fn grid(&self) -> &Grid<R> {
        &self.grid
    }

    pub fn species(&self) -> &SpeciesSet<R> {
        &self.species
    }

    pub fn params(&self) -> &ModelParams<R> {
        &self.params
    }

    pub fn v0(&self) -> R {
        self.v0
    }

    pub fn gamma_bulk(&self) -> R {
        self.gamma_bulk
    }

    /// `V_0` at every cell node.
    pub fn external(&self) -> &[R] {
        &self.external
    }

    pub fn convolver(&self) -> &Convolver<R> {
        &self.convolver
    }

    pub fn table(&self) -> &KernelTable<R> {
        self.convolver.table()
    }
}

//! Named experiment configurations: the 1D parameter sweeps on `[-1, 1]`
//! and the 2D Gaussian-initial-data runs on `[-1, 1]^2`.

use crate::error::{PnpbError, Result};
use crate::kernel::{KernelFamily, KernelTable};
use crate::model::{ExternalField, GammaGuard, Grid, ModelParams, SpeciesSet, State};
use crate::num::Real;
use crate::system::{validate, System};

/// `amplitude * exp(-width * |r - center|^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian<R: Real = f64> {
    pub amplitude: R,
    pub center: [R; 2],
    pub width: R,
}

impl<R: Real> Gaussian<R> {
    pub fn eval(&self, p: [R; 2], dim: usize) -> R {
        let mut r2 = (p[0] - self.center[0]).powi(2);
        if dim > 1 {
            r2 = r2 + (p[1] - self.center[1]).powi(2);
        }
        self.amplitude * (-self.width * r2).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition<R: Real = f64> {
    /// One constant per species.
    Uniform(Vec<R>),
    /// One Gaussian per species.
    Gaussians(Vec<Gaussian<R>>),
}

impl<R: Real> InitialCondition<R> {
    pub fn species_count(&self) -> usize {
        match self {
            InitialCondition::Uniform(v) => v.len(),
            InitialCondition::Gaussians(g) => g.len(),
        }
    }

    pub fn sample(&self, grid: &Grid<R>) -> State<R> {
        match self {
            InitialCondition::Uniform(v) => State::uniform(grid, v),
            InitialCondition::Gaussians(g) => {
                State::from_fn(grid, g.len(), |i, p| g[i].eval(p, grid.dim()))
            }
        }
    }
}

/// Everything needed to run one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<R: Real = f64> {
    /// Short label of the sweep point, e.g. `eta=3`.
    pub label: String,
    pub dim: usize,
    pub n: usize,
    pub half_extent: R,
    pub params: ModelParams<R>,
    pub valence: Vec<i32>,
    pub volume: Vec<R>,
    pub diffusivity: Vec<R>,
    /// `None` means the domain average of the initial data.
    pub bulk: Option<Vec<R>>,
    pub initial: InitialCondition<R>,
    pub dt: R,
    pub t_end: R,
}

impl<R: Real> Scenario<R> {
    pub fn grid(&self) -> Result<Grid<R>> {
        Grid::new(self.dim, self.n, self.half_extent)
    }

    pub fn initial_state(&self) -> Result<State<R>> {
        Ok(self.initial.sample(&self.grid()?))
    }

    /// Bulk concentrations, defaulting to the uniform-weight average of the
    /// initial data.
    pub fn resolved_bulk(&self) -> Result<Vec<R>> {
        if let Some(b) = &self.bulk {
            return Ok(b.clone());
        }
        let grid = self.grid()?;
        let state = self.initial.sample(&grid);
        let measure = grid.uniform_measure();
        Ok(state
            .masses(&grid)
            .into_iter()
            .map(|m| m / measure)
            .collect())
    }

    pub fn species(&self) -> Result<SpeciesSet<R>> {
        SpeciesSet::new(
            self.valence.clone(),
            self.volume.clone(),
            self.diffusivity.clone(),
            self.resolved_bulk()?,
        )
    }

    /// Validates everything [`Scenario::build`] would, without building the
    /// kernel tensor.
    pub fn validate(&self) -> Result<()> {
        let (grid, species, state) = self.parts()?;
        if !(self.dt > R::zero()) || !(self.t_end > R::zero()) || !self.t_end.is_finite() {
            return Err(PnpbError::InvalidParameter(format!(
                "dt = {} and t_end = {} must be positive",
                self.dt, self.t_end
            )));
        }
        validate(&grid, &species, &self.params, &state)
    }

    /// Builds the system and initial state and validates them.
    pub fn build(&self) -> Result<(System<R>, State<R>)> {
        self.validate()?;
        let (grid, species, state) = self.parts()?;
        let system = System::new(grid, species, self.params.clone())?;
        Ok((system, state))
    }

    /// Like [`Scenario::build`] with a prebuilt kernel table.
    pub fn build_with_table(&self, table: KernelTable<R>) -> Result<(System<R>, State<R>)> {
        self.validate()?;
        let (grid, species, state) = self.parts()?;
        let system = System::with_table(grid, species, self.params.clone(), table)?;
        Ok((system, state))
    }

    fn parts(&self) -> Result<(Grid<R>, SpeciesSet<R>, State<R>)> {
        let grid = self.grid()?;
        let species = self.species()?;
        if self.initial.species_count() != species.len() {
            return Err(PnpbError::DimensionMismatch(format!(
                "initial data has {} species, model has {}",
                self.initial.species_count(),
                species.len()
            )));
        }
        let state = self.initial.sample(&grid);
        Ok((grid, species, state))
    }
}

/// A named family of scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset<R: Real = f64> {
    pub name: &'static str,
    pub description: &'static str,
    pub points: Vec<Scenario<R>>,
}

pub const PRESET_NAMES: [&str; 8] = [
    "test1-eta",
    "test2-gamma",
    "test3-nu",
    "test4-lambda",
    "test5-z1",
    "test6-v1",
    "test-2d",
    "test-2d-eta",
];

/// Alternative names accepted by [`preset`].
pub const PRESET_ALIASES: [(&str, &str); 2] = [("test4-z", "test5-z1"), ("test3-v", "test6-v1")];

/// The 1D base configuration: `N = 100`, `dt = 0.005`, `t_end = 1`,
/// `z = (1, -1, 0)`, `v = 0.01`, `C = C^B = 0.5`, `V_0 = 10 x`, `λ = ν = 1`.
pub fn base_1d<R: Real>(eta: R) -> Scenario<R> {
    Scenario {
        label: String::new(),
        dim: 1,
        n: 100,
        half_extent: R::one(),
        params: ModelParams::new(eta, R::one(), R::one(), KernelFamily::ScreenedPicard1d)
            .with_external_field(ExternalField::Linear(vec![R::lit(10.0)])),
        valence: vec![1, -1, 0],
        volume: vec![R::lit(0.01); 3],
        diffusivity: vec![R::one(); 3],
        bulk: Some(vec![R::lit(0.5); 3]),
        initial: InitialCondition::Uniform(vec![R::lit(0.5); 3]),
        dt: R::lit(0.005),
        t_end: R::one(),
    }
}

/// The 2D base configuration: `N = 25` (`dx = 0.04`), `dt = 0.001`,
/// `t_end = 3`, `V_0 = 10 x`, Gaussian initial data of amplitude
/// `40/π` and width 10 centred at `(0.2, 0.2)`, `(-0.2, -0.2)`, `(0, 0)`.
pub fn base_2d<R: Real>(eta: R) -> Scenario<R> {
    let amp = R::lit(40.0) / R::PI();
    let g = |cx: f64, cy: f64| Gaussian {
        amplitude: amp,
        center: [R::lit(cx), R::lit(cy)],
        width: R::lit(10.0),
    };
    Scenario {
        label: String::new(),
        dim: 2,
        n: 25,
        half_extent: R::one(),
        params: ModelParams::new(eta, R::one(), R::one(), KernelFamily::Log2d)
            .with_external_field(ExternalField::Linear(vec![R::lit(10.0), R::zero()])),
        valence: vec![1, -1, 0],
        volume: vec![R::lit(0.01); 3],
        diffusivity: vec![R::one(); 3],
        bulk: None,
        initial: InitialCondition::Gaussians(vec![g(0.2, 0.2), g(-0.2, -0.2), g(0.0, 0.0)]),
        dt: R::lit(0.001),
        t_end: R::lit(3.0),
    }
}

fn labelled<R: Real>(mut s: Scenario<R>, label: String) -> Scenario<R> {
    s.label = label;
    s
}

fn fmt<R: Real>(x: R) -> String {
    format!("{}", x.to_f64_lossy())
}

/// Resolves a preset (or alias) by name.
pub fn preset<R: Real>(name: &str) -> Result<Preset<R>> {
    let name = PRESET_ALIASES
        .iter()
        .find(|(alias, _)| *alias == name)
        .map_or(name, |(_, target)| *target);
    let lit = |xs: &[f64]| xs.iter().map(|&x| R::lit(x)).collect::<Vec<R>>();
    let (name, description, points): (&'static str, &'static str, Vec<Scenario<R>>) = match name {
        "test1-eta" => (
            "test1-eta",
            "1D steric strength sweep",
            lit(&[0.0, 1.0, 3.0, 5.0])
                .into_iter()
                .map(|eta| labelled(base_1d(eta), format!("eta={}", fmt(eta))))
                .collect(),
        ),
        "test2-gamma" => (
            "test2-gamma",
            "1D void positivity threshold, permissive guard",
            lit(&[8.0, 8.1, 8.21])
                .into_iter()
                .map(|eta| {
                    let mut s = base_1d(eta);
                    s.params.gamma_guard = GammaGuard::Permissive;
                    labelled(s, format!("eta={}", fmt(eta)))
                })
                .collect(),
        ),
        "test3-nu" => (
            "test3-nu",
            "1D Debye length sweep at eta = 1",
            lit(&[1.0 / 3.0, 1.0, 3.0])
                .into_iter()
                .map(|nu| {
                    let mut s = base_1d(R::one());
                    s.params.nu = nu;
                    labelled(s, format!("nu={}", fmt(nu)))
                })
                .collect(),
        ),
        "test4-lambda" => (
            "test4-lambda",
            "1D correlation length sweep at eta = 1",
            lit(&[0.1, 1.0, 10.0])
                .into_iter()
                .map(|lambda| {
                    let mut s = base_1d(R::one());
                    s.params.lambda = lambda;
                    labelled(s, format!("lambda={}", fmt(lambda)))
                })
                .collect(),
        ),
        "test5-z1" => (
            "test5-z1",
            "1D cation valence sweep, with the eta = 0 comparison",
            lit(&[2.0, 0.0])
                .into_iter()
                .flat_map(|eta| {
                    [1, 2, 4].into_iter().map(move |z1| {
                        let mut s = base_1d(eta);
                        s.valence[0] = z1;
                        labelled(s, format!("z1={z1},eta={}", fmt(eta)))
                    })
                })
                .collect(),
        ),
        "test6-v1" => (
            "test6-v1",
            "1D cation volume sweep, with the eta = 0 comparison",
            lit(&[1.0, 0.0])
                .into_iter()
                .flat_map(|eta| {
                    lit(&[0.01, 0.03, 0.05]).into_iter().map(move |v1| {
                        let mut s = base_1d(eta);
                        s.volume[0] = v1;
                        labelled(s, format!("v1={},eta={}", fmt(v1), fmt(eta)))
                    })
                })
                .collect(),
        ),
        "test-2d" => (
            "test-2d",
            "2D Gaussian initial data at eta = 3",
            vec![labelled(base_2d(R::lit(3.0)), "eta=3".into())],
        ),
        "test-2d-eta" => (
            "test-2d-eta",
            "2D steric strength sweep",
            lit(&[0.0, 1.0, 3.0])
                .into_iter()
                .map(|eta| labelled(base_2d(eta), format!("eta={}", fmt(eta))))
                .collect(),
        ),
        other => {
            return Err(PnpbError::InvalidParameter(format!(
                "unknown preset `{other}`"
            )))
        }
    };
    Ok(Preset {
        name,
        description,
        points,
    })
}

//! Slotboom finite-volume scheme: harmonic-mean fluxes, zero boundary flux,
//! backward Euler in the concentrations with the drift frozen at `t^n`.

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{PnpbError, Result};
use crate::fields::{compute_fields, FieldSet};
use crate::linalg::{pcg, relative_residual, Tridiagonal};
use crate::model::{Event, State};
use crate::num::{logistic_complement, Real};
use crate::system::System;

/// Face on the `+` side of `cell` along `axis`. `cell = -1` is the lower
/// boundary face of the first cell along a 1D axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub cell: isize,
    pub axis: usize,
}

impl Face {
    pub fn right_of(cell: isize) -> Self {
        Self { cell, axis: 0 }
    }
}

/// Upwinding weights `(α, β)` of a face between cells `a` (lower) and `b`
/// (upper), so that the flux from `a` to `b` is `β C_a - α C_b`.
///
/// `α = (D/h) e^{f_b} / mean`, `β = (D/h) e^{f_a} / mean` with
/// `mean = (e^{f_a} + e^{f_b}) / 2`; only `e^{-|Δf|}` is ever formed.
#[inline]
pub fn face_weights<R: Real>(d_over_h: R, fa: R, fb: R) -> (R, R) {
    let two = R::lit(2.0);
    (
        d_over_h * two * logistic_complement(fa - fb),
        d_over_h * two * logistic_complement(fb - fa),
    )
}

/// Semi-discrete flux of species `i` through `face`; zero on the boundary.
pub fn face_flux<R: Real>(
    system: &System<R>,
    state: &State<R>,
    fields: &FieldSet<R>,
    i: usize,
    face: Face,
) -> R {
    let grid = system.grid();
    let m = grid.cells_per_axis() as isize;
    if face.cell < 0 || face.axis >= grid.dim() {
        return R::zero();
    }
    let a = face.cell as usize;
    let [ix, iy] = grid.unravel(a);
    let along = if face.axis == 0 { ix } else { iy } as isize;
    if along + 1 >= m || a >= grid.cell_count() {
        return R::zero();
    }
    let b = if face.axis == 0 {
        a + 1
    } else {
        a + m as usize
    };
    let (alpha, beta) = face_weights(
        system.species().diffusivity[i] / grid.dx(),
        fields.drift[i][a],
        fields.drift[i][b],
    );
    let c = &state.concentrations[i];
    beta * c[a] - alpha * c[b]
}

/// Outcome of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport<R: Real = f64> {
    pub state: State<R>,
    pub stats: StepStats<R>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepStats<R: Real = f64> {
    pub time: R,
    /// Relative max-norm residual of each species' linear system.
    pub residuals: Vec<R>,
    /// PCG iterations per species (zero for direct solves).
    pub iterations: Vec<usize>,
    pub min_concentration: R,
    pub min_gamma: R,
    pub events: Vec<Event>,
}

/// Residual tolerance for direct (1D) solves.
pub fn direct_tolerance<R: Real>() -> R {
    R::lit(1e-12).max(R::epsilon() * R::lit(100.0))
}

/// Residual tolerance for iterative (2D) solves.
pub fn iterative_tolerance<R: Real>() -> R {
    R::lit(1e-10).max(R::epsilon() * R::lit(1e4))
}

/// One backward Euler step of length `dt`.
pub fn step<R: Real>(system: &System<R>, state: &State<R>, dt: R) -> Result<StepReport<R>> {
    let fields = compute_fields(system, state)?;
    step_with_fields(system, state, &fields, dt)
}

/// As [`step`], reusing fields already computed for `state`.
pub fn step_with_fields<R: Real>(
    system: &System<R>,
    state: &State<R>,
    fields: &FieldSet<R>,
    dt: R,
) -> Result<StepReport<R>> {
    if !(dt > R::zero()) || !dt.is_finite() {
        return Err(PnpbError::InvalidParameter(format!(
            "dt = {dt} must be positive"
        )));
    }
    let species = system.species();
    let mut next = Vec::with_capacity(species.len());
    let mut residuals = Vec::with_capacity(species.len());
    let mut iterations = Vec::with_capacity(species.len());
    for i in 0..species.len() {
        let (c, res, its) = match system.grid().dim() {
            1 => solve_line(system, &state.concentrations[i], &fields.drift[i], i, dt)?,
            _ => solve_plane(system, &state.concentrations[i], &fields.drift[i], i, dt)?,
        };
        next.push(c);
        residuals.push(res);
        iterations.push(its);
    }
    let new_state = State {
        concentrations: next,
        time: state.time + dt,
    };
    let mut events = Vec::new();
    for (i, c) in new_state.concentrations.iter().enumerate() {
        for (cell, &v) in c.iter().enumerate() {
            if v < R::zero() {
                events.push(Event::NegativeConcentration {
                    species: i,
                    cell,
                    value: v.to_f64_lossy(),
                });
            }
        }
    }
    let gamma = new_state.gamma(system.params().eta, &species.volume);
    for (cell, &g) in gamma.iter().enumerate() {
        if g <= R::zero() {
            events.push(Event::VoidCollapse {
                cell,
                gamma: g.to_f64_lossy(),
            });
        }
    }
    let stats = StepStats {
        time: new_state.time,
        residuals,
        iterations,
        min_concentration: new_state.min_concentration(),
        min_gamma: gamma.iter().fold(R::infinity(), |m, &g| m.min(g)),
        events,
    };
    Ok(StepReport {
        state: new_state,
        stats,
    })
}

/// The tridiagonal system `A C^{n+1} = C^n` of one species on a line.
pub fn assemble_line<R: Real>(system: &System<R>, drift: &[R], i: usize, dt: R) -> Tridiagonal<R> {
    let n = drift.len();
    let dx = system.grid().dx();
    let r = dt / dx;
    let d_over_h = system.species().diffusivity[i] / dx;
    let mut a = Tridiagonal {
        lower: vec![R::zero(); n],
        diag: vec![R::one(); n],
        upper: vec![R::zero(); n],
    };
    for j in 0..n.saturating_sub(1) {
        let (alpha, beta) = face_weights(d_over_h, drift[j], drift[j + 1]);
        // Flux leaving j through j+1/2 is beta C_j - alpha C_{j+1}.
        a.diag[j] = a.diag[j] + r * beta;
        a.upper[j] = -r * alpha;
        a.diag[j + 1] = a.diag[j + 1] + r * alpha;
        a.lower[j + 1] = -r * beta;
    }
    a
}

/// Solves for the increment `δ = C^{n+1} - C^n` from `A δ = C^n - A C^n`,
/// so that a state with zero fluxes is reproduced bit for bit.
fn solve_line<R: Real>(
    system: &System<R>,
    c: &[R],
    drift: &[R],
    i: usize,
    dt: R,
) -> Result<(Vec<R>, R, usize)> {
    let a = assemble_line(system, drift, i, dt);
    assert!(
        a.is_column_m_matrix(),
        "implicit matrix of species {} lost column dominance",
        i + 1
    );
    let ac = a.mul(c);
    let rhs: Vec<R> = c.iter().zip(&ac).map(|(&x, &y)| x - y).collect();
    let delta = a.solve(&rhs);
    let x: Vec<R> = c.iter().zip(&delta).map(|(&p, &q)| p + q).collect();
    let res = relative_residual(&a.mul(&x), c);
    if !(res <= direct_tolerance()) {
        return Err(PnpbError::LinearSolveFailure {
            species: i,
            residual: res.to_f64_lossy(),
        });
    }
    Ok((x, res, 0))
}

/// Face list of a square grid: `(lower cell, upper cell)` along x, then y.
fn plane_faces(m: usize) -> Vec<(usize, usize)> {
    let mut faces = Vec::with_capacity(2 * m * (m - 1));
    for iy in 0..m {
        for ix in 0..m - 1 {
            let a = iy * m + ix;
            faces.push((a, a + 1));
        }
    }
    for iy in 0..m - 1 {
        for ix in 0..m {
            let a = iy * m + ix;
            faces.push((a, a + m));
        }
    }
    faces
}

/// 2D step. The system is solved for the shifted Slotboom variable
/// `ũ = C e^{f - max f}`, where it is symmetric positive definite, and the
/// new concentrations are rebuilt from the fluxes of `ũ` so that mass is
/// conserved to round-off whatever the iterative residual.
fn solve_plane<R: Real>(
    system: &System<R>,
    c: &[R],
    drift: &[R],
    i: usize,
    dt: R,
) -> Result<(Vec<R>, R, usize)> {
    let grid = system.grid();
    let m = grid.cells_per_axis();
    let n = c.len();
    let dx = grid.dx();
    let d = system.species().diffusivity[i];
    let shift = drift.iter().fold(R::neg_infinity(), |a, &b| a.max(b));
    let g: Vec<R> = drift.iter().map(|&f| f - shift).collect();
    let eg: Vec<R> = g.iter().map(|&x| x.exp()).collect();
    let coeff = dt * d / (dx * dx);
    let faces = plane_faces(m);
    let weights: Vec<R> = faces
        .iter()
        .map(|&(a, b)| coeff * R::lit(2.0) / (eg[a] + eg[b]))
        .collect();
    let inv_eg: Vec<R> = g.iter().map(|&x| (-x).exp()).collect();
    let mut diag = inv_eg.clone();
    for (&(a, b), &w) in faces.iter().zip(&weights) {
        diag[a] = diag[a] + w;
        diag[b] = diag[b] + w;
    }
    let laplacian = |u: &[R], out: &mut [R]| {
        out.iter_mut().for_each(|v| *v = R::zero());
        for (&(a, b), &w) in faces.iter().zip(&weights) {
            let q = w * (u[a] - u[b]);
            out[a] = out[a] + q;
            out[b] = out[b] - q;
        }
    };
    let apply = |u: &[R], out: &mut [R]| {
        laplacian(u, out);
        for k in 0..n {
            out[k] = out[k] + inv_eg[k] * u[k];
        }
    };
    let mut u: Vec<R> = c.iter().zip(&eg).map(|(&x, &e)| x * e).collect();
    let tol = iterative_tolerance::<R>();
    let outcome = pcg(apply, &diag, c, &mut u, tol * R::lit(1e-3), 20 * n);

    let mut div = vec![R::zero(); n];
    laplacian(&u, &mut div);
    let next: Vec<R> = c.iter().zip(&div).map(|(&x, &q)| x - q).collect();

    // Residual of the concentration-form system at the rebuilt state.
    let mut ax = next.clone();
    let r = dt / dx;
    let d_over_h = d / dx;
    for &(a, b) in &faces {
        let (alpha, beta) = face_weights(d_over_h, drift[a], drift[b]);
        let q = r * (beta * next[a] - alpha * next[b]);
        ax[a] = ax[a] + q;
        ax[b] = ax[b] - q;
    }
    let res = relative_residual(&ax, c);
    if !(res <= tol) {
        return Err(PnpbError::LinearSolveFailure {
            species: i,
            residual: res.to_f64_lossy(),
        });
    }
    Ok((next, res, outcome.iterations))
}

/// Result of a dynamic run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<R: Real = f64> {
    pub final_state: State<R>,
    pub steps: Vec<StepStats<R>>,
    /// One record per time level, the initial one included.
    pub trace: Vec<DiagnosticsRecord<R>>,
}

/// Number of steps to reach `t_end`; the last may be shorter than `dt`.
pub fn step_count<R: Real>(dt: R, t_end: R) -> usize {
    let ratio = (t_end / dt).to_f64_lossy();
    let whole = ratio.round();
    if (ratio - whole).abs() <= 1e-9 * ratio.max(1.0) {
        whole as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Advances `initial` to `t_end` from its own time.
pub fn run_dynamics<R: Real>(
    system: &System<R>,
    initial: &State<R>,
    dt: R,
    t_end: R,
) -> Result<Trajectory<R>> {
    run_dynamics_with(system, initial, dt, t_end, |_, _, _| Ok(()))
}

/// As [`run_dynamics`], calling `observer` at every time level (initial and
/// final included) with the state, its fields and its diagnostics.
pub fn run_dynamics_with<R: Real>(
    system: &System<R>,
    initial: &State<R>,
    dt: R,
    t_end: R,
    mut observer: impl FnMut(&State<R>, &FieldSet<R>, &DiagnosticsRecord<R>) -> Result<()>,
) -> Result<Trajectory<R>> {
    if !(dt > R::zero()) || !dt.is_finite() {
        return Err(PnpbError::InvalidParameter(format!(
            "dt = {dt} must be positive"
        )));
    }
    system.validate(initial)?;
    let t0 = initial.time;
    let span = t_end - t0;
    if span < R::zero() {
        return Err(PnpbError::InvalidParameter(format!(
            "t_end = {t_end} is before the initial time {t0}"
        )));
    }
    let count = step_count(dt, span);
    let mut state = initial.clone();
    let mut steps = Vec::with_capacity(count);
    let mut trace = Vec::with_capacity(count + 1);
    for k in 0..count {
        let fields = compute_fields(system, &state)?;
        let record = DiagnosticsRecord::capture(system, &state, &fields);
        observer(&state, &fields, &record)?;
        trace.push(record);
        let target = if k + 1 == count {
            t_end
        } else {
            t0 + dt * R::lit((k + 1) as f64)
        };
        let mut report = step_with_fields(system, &state, &fields, target - state.time)?;
        report.state.time = target;
        report.stats.time = target;
        state = report.state;
        steps.push(report.stats);
    }
    let fields = compute_fields(system, &state)?;
    let record = DiagnosticsRecord::capture(system, &state, &fields);
    observer(&state, &fields, &record)?;
    trace.push(record);
    Ok(Trajectory {
        final_state: state,
        steps,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;
    use crate::model::{ExternalField, Grid, ModelParams, SpeciesSet};

    fn system(grid: Grid<f64>, eta: f64, field: ExternalField<f64>) -> System<f64> {
        let species =
            SpeciesSet::new(vec![1, -1, 0], vec![0.01; 3], vec![1.0; 3], vec![0.5; 3]).unwrap();
        let kernel = if grid.dim() == 1 {
            KernelFamily::ScreenedPicard1d
        } else {
            KernelFamily::Log2d
        };
        let params = ModelParams::new(eta, 1.0, 1.0, kernel).with_external_field(field);
        System::new(grid, species, params).unwrap()
    }

    #[test]
    fn flux_spot_value() {
        let (a, b) = face_weights(1.0 / 0.1, 0.0, 3.0_f64.ln());
        let flux = b * 0.2 - a * 0.1;
        assert!((flux + 0.5).abs() < 1e-14, "{flux}");
    }

    #[test]
    fn flux_without_drift_is_fickian() {
        let (a, b) = face_weights(2.0, 0.0, 0.0);
        assert_eq!((a, b), (2.0, 2.0));
    }

    #[test]
    fn weights_survive_huge_drift() {
        let (a, b) = face_weights(1.0_f64, 800.0, -800.0);
        assert!(a.is_finite() && b.is_finite());
        assert_eq!(a, 0.0);
        assert_eq!(b, 2.0);
    }

    #[test]
    fn boundary_faces_carry_no_flux() {
        let s = system(Grid::line(5), 1.0, ExternalField::Linear(vec![10.0]));
        let st = State::from_fn(s.grid(), 3, |_, [x, _]| 0.5 + 0.2 * x);
        let f = compute_fields(&s, &st).unwrap();
        assert_eq!(face_flux(&s, &st, &f, 0, Face::right_of(-1)), 0.0);
        assert_eq!(face_flux(&s, &st, &f, 0, Face::right_of(10)), 0.0);
        assert!(face_flux(&s, &st, &f, 0, Face::right_of(4)) != 0.0);
    }

    #[test]
    fn uniform_neutral_state_is_fixed() {
        let s = system(Grid::line(10), 1.0, ExternalField::None);
        let st = State::uniform(s.grid(), &[0.5; 3]);
        let r = step(&s, &st, 0.01).unwrap();
        assert_eq!(r.state.concentrations, st.concentrations);
        assert!(r.stats.events.is_empty());
    }

    #[test]
    fn columns_of_the_matrix_sum_to_one() {
        let s = system(Grid::line(8), 3.0, ExternalField::Linear(vec![10.0]));
        let st = State::from_fn(s.grid(), 3, |i, [x, _]| 0.5 + 0.1 * (i as f64 + 1.0) * x);
        let f = compute_fields(&s, &st).unwrap();
        let a = assemble_line(&s, &f.drift[0], 0, 0.05);
        let n = a.len();
        for j in 0..n {
            let mut col = a.diag[j];
            if j > 0 {
                col += a.upper[j - 1];
            }
            if j + 1 < n {
                col += a.lower[j + 1];
            }
            assert!((col - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn two_d_step_conserves_mass() {
        let s = system(Grid::square(6), 1.0, ExternalField::Linear(vec![5.0, -3.0]));
        let st = State::from_fn(s.grid(), 3, |i, [x, y]| {
            0.5 + 0.2 * (i as f64 + 1.0) * x * y + 0.1 * y
        });
        let m0 = st.masses(s.grid());
        let r = step(&s, &st, 0.01).unwrap();
        let m1 = r.state.masses(s.grid());
        for (a, b) in m0.iter().zip(&m1) {
            assert!((a - b).abs() < 1e-13 * a);
        }
        assert!(r.stats.residuals.iter().all(|&x| x < 1e-10));
    }

    #[test]
    fn step_count_handles_partial_steps() {
        assert_eq!(step_count(0.005, 1.0), 200);
        assert_eq!(step_count(0.3, 1.0), 4);
        assert_eq!(step_count(0.1, 0.0), 0);
    }

    #[test]
    fn final_partial_step_lands_on_t_end() {
        let s = system(Grid::line(6), 1.0, ExternalField::Linear(vec![10.0]));
        let st = State::uniform(s.grid(), &[0.5; 3]);
        let t = run_dynamics(&s, &st, 0.03, 0.1).unwrap();
        assert_eq!(t.steps.len(), 4);
        assert_eq!(t.final_state.time, 0.1);
        assert_eq!(t.trace.len(), 5);
    }

    #[test]
    fn rejects_bad_dt() {
        let s = system(Grid::line(4), 1.0, ExternalField::None);
        let st = State::uniform(s.grid(), &[0.5; 3]);
        assert!(step(&s, &st, 0.0).is_err());
        assert!(run_dynamics(&s, &st, -1.0, 1.0).is_err());
    }
}

//! Steady states as fixed points of the mass-projected Boltzmann map.

use crate::diagnostics::discrete_energy;
use crate::error::{PnpbError, Result};
use crate::fields::{compute_fields_with_guard, FieldSet};
use crate::model::{GammaGuard, State};
use crate::num::Real;
use crate::system::System;

/// Iterates after which an energy increase is reported.
const WARMUP: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport<R: Real = f64> {
    pub converged: bool,
    pub iterations: usize,
    /// Last cellwise relative change between an iterate and its image.
    pub last_update: R,
    pub state: State<R>,
    pub fields: FieldSet<R>,
    pub energy: R,
    /// Energy of every iterate, the initial one first.
    pub energy_trace: Vec<R>,
    pub warnings: Vec<String>,
}

/// One application of the map: `C'_i = m_i w_i / (dx^d Σ_p w_{i,p})` with
/// `w_i = exp(-f_i)` evaluated at `state`.
pub fn fermi_map<R: Real>(system: &System<R>, state: &State<R>, masses: &[R]) -> Result<State<R>> {
    let fields = compute_fields_with_guard(system, state, GammaGuard::Strict)?;
    Ok(project(system, &fields, masses, state.time))
}

fn project<R: Real>(system: &System<R>, fields: &FieldSet<R>, masses: &[R], time: R) -> State<R> {
    let vol = system.grid().cell_volume();
    let concentrations = fields
        .drift
        .iter()
        .zip(masses)
        .map(|(f, &m)| {
            let lo = f.iter().fold(R::infinity(), |a, &b| a.min(b));
            let w: Vec<R> = f.iter().map(|&x| (lo - x).exp()).collect();
            let total: R = w.iter().copied().sum();
            let scale = m / (vol * total);
            w.into_iter().map(|x| x * scale).collect()
        })
        .collect();
    State {
        concentrations,
        time,
    }
}

/// `max_{i,j} |a - b| / a`, cell by cell. Since `ln a - ln b` is the
/// deviation of the chemical potential from its projected constant, this
/// bounds the spread of `μ` also in depleted cells.
fn relative_change<R: Real>(image: &State<R>, state: &State<R>) -> R {
    image
        .concentrations
        .iter()
        .zip(&state.concentrations)
        .flat_map(|(x, y)| x.iter().zip(y))
        .fold(R::zero(), |m, (&p, &q)| {
            let d = (p - q).abs();
            m.max(if p > R::zero() { d / p } else { d })
        })
}

/// Damped iteration `C ← (1-θ) C + θ fermi_map(C)` at the masses of `initial`.
pub fn solve_equilibrium<R: Real>(
    system: &System<R>,
    initial: &State<R>,
    damping: R,
    tol: R,
    max_iter: usize,
) -> Result<EquilibriumReport<R>> {
    if !(damping > R::zero() && damping <= R::one()) {
        return Err(PnpbError::InvalidParameter(format!(
            "damping = {damping} must lie in (0, 1]"
        )));
    }
    if !(tol > R::zero()) {
        return Err(PnpbError::InvalidParameter(format!(
            "tol = {tol} must be positive"
        )));
    }
    system.validate(initial)?;
    let masses = initial.masses(system.grid());
    let mut state = initial.clone();
    let mut energy_trace: Vec<R> = Vec::new();
    let mut warnings = Vec::new();
    let mut last_update = R::infinity();
    for k in 1..=max_iter {
        let fields = compute_fields_with_guard(system, &state, GammaGuard::Strict)?;
        let energy = discrete_energy(system, &state, &fields)?;
        if let Some(&prev) = energy_trace.last() {
            if k > WARMUP && energy > prev + R::lit(1e-12) * prev.abs().max(R::one()) {
                warnings.push(format!(
                    "free energy rose at iterate {}: {prev} -> {energy}",
                    k - 1
                ));
            }
        }
        energy_trace.push(energy);
        let image = project(system, &fields, &masses, state.time);
        last_update = relative_change(&image, &state);
        let next = if damping == R::one() {
            image
        } else {
            let keep = R::one() - damping;
            State {
                concentrations: state
                    .concentrations
                    .iter()
                    .zip(&image.concentrations)
                    .map(|(c, w)| {
                        c.iter()
                            .zip(w)
                            .map(|(&a, &b)| keep * a + damping * b)
                            .collect()
                    })
                    .collect(),
                time: state.time,
            }
        };
        state = next;
        if last_update < tol {
            let fields = compute_fields_with_guard(system, &state, GammaGuard::Strict)?;
            let energy = discrete_energy(system, &state, &fields)?;
            energy_trace.push(energy);
            return Ok(EquilibriumReport {
                converged: true,
                iterations: k,
                last_update,
                state,
                fields,
                energy,
                energy_trace,
                warnings,
            });
        }
    }
    Err(PnpbError::NoConvergence {
        iterations: max_iter,
        last_update: last_update.to_f64_lossy(),
    })
}

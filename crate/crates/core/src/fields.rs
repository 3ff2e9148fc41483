//! Derived cell fields of a state: charge, potential, void fraction,
//! steric potential, drift exponents and chemical potentials.

use crate::error::{PnpbError, Result};
use crate::model::{Event, GammaGuard, State, GAMMA_FLOOR};
use crate::num::Real;
use crate::system::System;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet<R: Real = f64> {
    /// Void fraction `Γ_j`, unclamped.
    pub gamma: Vec<R>,
    /// Steric potential `S_j = ln(Γ_j / Γ^B)`.
    pub steric: Vec<R>,
    /// Charge density `ρ_j = Σ_{m ≤ K} z_m C_{m,j}`.
    pub charge: Vec<R>,
    /// Correlated potential `φ = T * ρ`.
    pub phi: Vec<R>,
    /// Drift exponent `f_{i,j} = z_i (φ_j + V_0,j) - (v_i / v_0) S_j`.
    pub drift: Vec<Vec<R>>,
    /// Chemical potential `μ_{i,j} = ln(C_{i,j} / (C_i^B e^{-f_{i,j}}))`; NaN where `C <= 0`.
    pub chem: Vec<Vec<R>>,
    pub events: Vec<Event>,
}

impl<R: Real> FieldSet<R> {
    pub fn min_gamma(&self) -> R {
        self.gamma.iter().fold(R::infinity(), |m, &g| m.min(g))
    }
}

/// Evaluates all derived fields of `state`.
///
/// In strict mode a nonpositive `Γ_j` is an error; in permissive mode the
/// logarithm sees `max(Γ_j, 1e-14)` and a `VoidCollapse` event is recorded.
pub fn compute_fields<R: Real>(system: &System<R>, state: &State<R>) -> Result<FieldSet<R>> {
    compute_fields_with_guard(system, state, system.params().gamma_guard)
}

pub(crate) fn compute_fields_with_guard<R: Real>(
    system: &System<R>,
    state: &State<R>,
    guard: GammaGuard,
) -> Result<FieldSet<R>> {
    let grid = system.grid();
    let species = system.species();
    state.check_shape(grid, species.len())?;
    let cells = grid.cell_count();
    let eta = system.params().eta;
    let mut events = Vec::new();

    let mut charge = vec![R::zero(); cells];
    for i in 0..species.count_charged() {
        let z = species.z(i);
        if z != R::zero() {
            for (r, &c) in charge.iter_mut().zip(&state.concentrations[i]) {
                *r = *r + z * c;
            }
        }
    }
    let phi = system.convolver().apply(&charge)?;

    let gamma = state.gamma(eta, &species.volume);
    let gamma_bulk = system.gamma_bulk();
    let floor = R::lit(GAMMA_FLOOR);
    let mut steric = Vec::with_capacity(cells);
    for (cell, &g) in gamma.iter().enumerate() {
        if eta == R::zero() {
            steric.push(R::zero());
            continue;
        }
        if g <= R::zero() {
            match guard {
                GammaGuard::Strict => {
                    return Err(PnpbError::VoidCollapse {
                        cell,
                        gamma: g.to_f64_lossy(),
                    })
                }
                GammaGuard::Permissive => events.push(Event::VoidCollapse {
                    cell,
                    gamma: g.to_f64_lossy(),
                }),
            }
        }
        steric.push((g.max(floor) / gamma_bulk).ln());
    }

    let v0 = system.v0();
    let external = system.external();
    let mut drift = Vec::with_capacity(species.len());
    let mut chem = Vec::with_capacity(species.len());
    for i in 0..species.len() {
        let z = species.z(i);
        let ratio = species.volume[i] / v0;
        let f: Vec<R> = (0..cells)
            .map(|j| z * (phi[j] + external[j]) - ratio * steric[j])
            .collect();
        let bulk = species.bulk[i];
        let mu = state.concentrations[i]
            .iter()
            .zip(&f)
            .enumerate()
            .map(|(cell, (&c, &fj))| {
                if c > R::zero() {
                    (c / bulk).ln() + fj
                } else {
                    events.push(Event::NonpositiveConcentration { species: i, cell });
                    R::nan()
                }
            })
            .collect();
        drift.push(f);
        chem.push(mu);
    }

    Ok(FieldSet {
        gamma,
        steric,
        charge,
        phi,
        drift,
        chem,
        events,
    })
}

/// Slotboom variables `u_{i,j} = C_{i,j} / exp(-f_{i,j})`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotboomVars<R: Real = f64> {
    pub u: Vec<Vec<R>>,
}

pub fn slotboom<R: Real>(state: &State<R>, fields: &FieldSet<R>) -> SlotboomVars<R> {
    SlotboomVars {
        u: state
            .concentrations
            .iter()
            .zip(&fields.drift)
            .map(|(c, f)| c.iter().zip(f).map(|(&c, &f)| c * f.exp()).collect())
            .collect(),
    }
}

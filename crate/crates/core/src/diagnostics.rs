//! Discrete free energy, dissipation and steady-state residuals.

use crate::error::{PnpbError, Result};
use crate::fields::FieldSet;
use crate::model::{saturation_events, Event, State};
use crate::num::{logistic_complement, Real};
use crate::system::System;

/// Concentrations below this are ignored by [`steady_state_residual`].
pub const RESIDUAL_FLOOR: f64 = 1e-14;

/// `E_Δ = dx^d Σ_i Σ_j C (ln(C / (C^B e^{-g})) - 1) + dx^d/(v_0 η) Σ_j (S_j - Γ_j)`
/// with `g = z φ / 2 + z V_0 - (v/v_0) S`.
///
/// Cells with `C = 0` contribute nothing; the void term is dropped for
/// `η = 0`, where it is an infinite constant.
pub fn discrete_energy<R: Real>(
    system: &System<R>,
    state: &State<R>,
    fields: &FieldSet<R>,
) -> Result<R> {
    let grid = system.grid();
    let species = system.species();
    let half = R::lit(0.5);
    let v0 = system.v0();
    let external = system.external();
    let mut total = R::zero();
    for i in 0..species.len() {
        let z = species.z(i);
        let ratio = species.volume[i] / v0;
        let bulk = species.bulk[i];
        let mut sum = R::zero();
        for (cell, &c) in state.concentrations[i].iter().enumerate() {
            if c == R::zero() {
                continue;
            }
            if c < R::zero() {
                return Err(PnpbError::NonpositiveConcentration {
                    species: i,
                    cell,
                    value: c.to_f64_lossy(),
                });
            }
            let g = half * z * fields.phi[cell] + z * external[cell] - ratio * fields.steric[cell];
            sum = sum + c * ((c / bulk).ln() + g - R::one());
        }
        total = total + sum;
    }
    let eta = system.params().eta;
    if eta > R::zero() {
        let void: R = fields
            .steric
            .iter()
            .zip(&fields.gamma)
            .map(|(&s, &g)| s - g)
            .sum();
        total = total + void / (v0 * eta);
    }
    Ok(total * grid.cell_volume())
}

/// `D_Δ = Σ_faces (dx^d / h²) D_i e^{-f_face} (u_b - u_a)(ln u_b - ln u_a)`
/// with the harmonic-mean face factor; nonnegative term by term.
pub fn discrete_dissipation<R: Real>(
    system: &System<R>,
    state: &State<R>,
    fields: &FieldSet<R>,
) -> Result<R> {
    let grid = system.grid();
    let m = grid.cells_per_axis();
    let dx = grid.dx();
    let scale = grid.cell_volume() / (dx * dx);
    let two = R::lit(2.0);
    let mut total = R::zero();
    for (i, c) in state.concentrations.iter().enumerate() {
        if let Some(cell) = c.iter().position(|&x| !(x > R::zero())) {
            return Err(PnpbError::NonpositiveConcentration {
                species: i,
                cell,
                value: c[cell].to_f64_lossy(),
            });
        }
        let f = &fields.drift[i];
        let d = system.species().diffusivity[i];
        let mut face = |a: usize, b: usize| {
            // e^{-f_face} (u_b - u_a) = 2 (C_b σ_b - C_a σ_a), σ_b = e^{f_b}/(e^{f_a}+e^{f_b})
            let jump = two
                * (c[b] * logistic_complement(f[a] - f[b])
                    - c[a] * logistic_complement(f[b] - f[a]));
            let log_jump = (c[b] / c[a]).ln() + f[b] - f[a];
            total = total + scale * d * jump * log_jump;
        };
        match grid.dim() {
            1 => (0..m - 1).for_each(|j| face(j, j + 1)),
            _ => {
                for iy in 0..m {
                    for ix in 0..m {
                        let a = iy * m + ix;
                        if ix + 1 < m {
                            face(a, a + 1);
                        }
                        if iy + 1 < m {
                            face(a, a + m);
                        }
                    }
                }
            }
        }
    }
    Ok(total)
}

/// `max_j μ_{i,j} - min_j μ_{i,j}` per species over cells with `C ≥ 1e-14`.
pub fn steady_state_residual<R: Real>(state: &State<R>, fields: &FieldSet<R>) -> Vec<R> {
    let floor = R::lit(RESIDUAL_FLOOR);
    state
        .concentrations
        .iter()
        .zip(&fields.chem)
        .map(|(c, mu)| {
            let (lo, hi) = c
                .iter()
                .zip(mu)
                .filter(|(&x, m)| x >= floor && m.is_finite())
                .fold((R::infinity(), R::neg_infinity()), |(lo, hi), (_, &m)| {
                    (lo.min(m), hi.max(m))
                });
            if hi >= lo {
                hi - lo
            } else {
                R::zero()
            }
        })
        .collect()
}

/// One row of the diagnostics trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord<R: Real = f64> {
    pub time: R,
    /// NaN where the energy is undefined (negative concentrations).
    pub energy: R,
    /// NaN where some concentration is not positive.
    pub dissipation: R,
    pub masses: Vec<R>,
    pub min: Vec<R>,
    pub max: Vec<R>,
    pub min_gamma: R,
    pub mu_spread: Vec<R>,
    pub events: Vec<Event>,
}

impl<R: Real> DiagnosticsRecord<R> {
    pub fn capture(system: &System<R>, state: &State<R>, fields: &FieldSet<R>) -> Self {
        let extremes = |pick_max: bool| -> Vec<R> {
            state
                .concentrations
                .iter()
                .map(|c| {
                    c.iter().fold(
                        if pick_max {
                            R::neg_infinity()
                        } else {
                            R::infinity()
                        },
                        |a, &b| {
                            if pick_max {
                                a.max(b)
                            } else {
                                a.min(b)
                            }
                        },
                    )
                })
                .collect()
        };
        let mut events = fields.events.clone();
        events.extend(saturation_events(
            state,
            system.params().eta,
            &system.species().volume,
        ));
        Self {
            time: state.time,
            energy: discrete_energy(system, state, fields).unwrap_or_else(|_| R::nan()),
            dissipation: discrete_dissipation(system, state, fields).unwrap_or_else(|_| R::nan()),
            masses: state.masses(system.grid()),
            min: extremes(false),
            max: extremes(true),
            min_gamma: fields.min_gamma(),
            mu_spread: steady_state_residual(state, fields),
            events,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::compute_fields;
    use crate::kernel::KernelFamily;
    use crate::model::{ExternalField, Grid, ModelParams, SpeciesSet};

    fn system(eta: f64, field: ExternalField<f64>) -> System<f64> {
        let species =
            SpeciesSet::new(vec![1, -1, 0], vec![0.01; 3], vec![1.0; 3], vec![0.5; 3]).unwrap();
        let params = ModelParams::new(eta, 1.0, 1.0, KernelFamily::ScreenedPicard1d)
            .with_external_field(field);
        System::new(Grid::line(50), species, params).unwrap()
    }

    #[test]
    fn bulk_energy_without_sterics() {
        let s = system(0.0, ExternalField::None);
        let st = State::uniform(s.grid(), &[0.5; 3]);
        let f = compute_fields(&s, &st).unwrap();
        let e = discrete_energy(&s, &st, &f).unwrap();
        let expected = -s.grid().uniform_measure() * 1.5;
        assert!((e - expected).abs() < 1e-12, "{e} vs {expected}");
    }

    #[test]
    fn empty_cells_contribute_nothing() {
        let s = system(0.0, ExternalField::None);
        let mut st = State::uniform(s.grid(), &[0.5; 3]);
        let f = compute_fields(&s, &st).unwrap();
        let e0 = discrete_energy(&s, &st, &f).unwrap();
        st.concentrations[2][7] = 0.0;
        let f = compute_fields(&s, &st).unwrap();
        let e1 = discrete_energy(&s, &st, &f).unwrap();
        assert!((e0 - e1 - (-0.5) * s.grid().dx()).abs() < 1e-12);
        st.concentrations[2][7] = -1.0;
        assert!(discrete_energy(&s, &st, &f).is_err());
    }

    #[test]
    fn uniform_slotboom_has_no_dissipation() {
        let s = system(1.0, ExternalField::None);
        let st = State::uniform(s.grid(), &[0.5; 3]);
        let f = compute_fields(&s, &st).unwrap();
        assert_eq!(discrete_dissipation(&s, &st, &f).unwrap(), 0.0);
        assert!(steady_state_residual(&st, &f).iter().all(|&r| r == 0.0));
    }

    #[test]
    fn dissipation_rejects_empty_cells() {
        let s = system(1.0, ExternalField::None);
        let mut st = State::uniform(s.grid(), &[0.5; 3]);
        st.concentrations[1][3] = 0.0;
        let f = compute_fields(&s, &st).unwrap();
        assert!(matches!(
            discrete_dissipation(&s, &st, &f),
            Err(PnpbError::NonpositiveConcentration {
                species: 1,
                cell: 3,
                ..
            })
        ));
    }

    #[test]
    fn residual_skips_tiny_concentrations() {
        let s = system(0.0, ExternalField::None);
        let mut st = State::uniform(s.grid(), &[0.5; 3]);
        st.concentrations[2][5] = 1e-20;
        let f = compute_fields(&s, &st).unwrap();
        assert_eq!(steady_state_residual(&st, &f)[2], 0.0);
    }

    #[test]
    fn record_collects_masses_and_extremes() {
        let s = system(1.0, ExternalField::Linear(vec![10.0]));
        let st = State::from_fn(s.grid(), 3, |i, [x, _]| 0.5 + 0.1 * i as f64 * x);
        let f = compute_fields(&s, &st).unwrap();
        let r = DiagnosticsRecord::capture(&s, &st, &f);
        assert_eq!(r.masses.len(), 3);
        assert!((r.max[2] - 0.7).abs() < 1e-12 && (r.min[2] - 0.3).abs() < 1e-12);
        assert!(r.dissipation > 0.0 && r.energy.is_finite());
    }
}

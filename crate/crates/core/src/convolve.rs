//! Discrete convolution `φ_j = Σ_p ρ_p T_{j-p}` with a kernel table.
//!
//! The field lives in the whole space, so the fast path embeds the Toeplitz
//! operator in a zero-padded circulant of size at least `2n - 1` per axis;
//! there is no periodic wrap-around.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{PnpbError, Result};
use crate::kernel::KernelTable;
use crate::num::Real;

/// FFT-backed convolution with a fixed kernel table.
#[derive(Clone)]
pub struct Convolver<R: Real = f64> {
    table: KernelTable<R>,
    /// Cells per axis of the grid the table belongs to.
    cells: usize,
    /// Padded transform length per axis.
    len: usize,
    spectrum: Vec<Complex<R>>,
    forward: Arc<dyn Fft<R>>,
    inverse: Arc<dyn Fft<R>>,
}

impl<R: Real> std::fmt::Debug for Convolver<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("dim", &self.table.dim())
            .field("cells", &self.cells)
            .field("len", &self.len)
            .finish()
    }
}

impl<R: Real> Convolver<R> {
    pub fn new(table: KernelTable<R>) -> Self {
        let cells = 2 * table.n() + 1;
        let len = (2 * cells - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let reach = 2 * table.n() as isize;
        let wrap = |m: isize| m.rem_euclid(len as isize) as usize;
        let mut spectrum = vec![Complex::new(R::zero(), R::zero()); len.pow(table.dim() as u32)];
        match table.dim() {
            1 => {
                for m in -reach..=reach {
                    spectrum[wrap(m)].re = table.get(m);
                }
            }
            _ => {
                for k in -reach..=reach {
                    for m in -reach..=reach {
                        spectrum[wrap(k) * len + wrap(m)].re = table.get2(m, k);
                    }
                }
            }
        }
        let mut conv = Self {
            table,
            cells,
            len,
            spectrum: Vec::new(),
            forward,
            inverse,
        };
        conv.transform(&mut spectrum, true);
        conv.spectrum = spectrum;
        conv
    }

    pub fn table(&self) -> &KernelTable<R> {
        &self.table
    }

    fn cell_count(&self) -> usize {
        self.cells.pow(self.table.dim() as u32)
    }

    fn transform(&self, buf: &mut [Complex<R>], forward: bool) {
        let fft = if forward {
            &self.forward
        } else {
            &self.inverse
        };
        match self.table.dim() {
            1 => fft.process(buf),
            _ => {
                let n = self.len;
                fft.process(buf); // all rows
                let mut col = vec![Complex::new(R::zero(), R::zero()); n];
                for x in 0..n {
                    for y in 0..n {
                        col[y] = buf[y * n + x];
                    }
                    fft.process(&mut col);
                    for y in 0..n {
                        buf[y * n + x] = col[y];
                    }
                }
            }
        }
    }

    fn check_len(&self, density: &[R]) -> Result<()> {
        if density.len() != self.cell_count() {
            return Err(PnpbError::DimensionMismatch(format!(
                "density has {} cells, kernel table expects {}",
                density.len(),
                self.cell_count()
            )));
        }
        Ok(())
    }

    /// Fast path.
    pub fn apply(&self, density: &[R]) -> Result<Vec<R>> {
        self.check_len(density)?;
        let (n, len, dim) = (self.cells, self.len, self.table.dim());
        let mut buf = vec![Complex::new(R::zero(), R::zero()); len.pow(dim as u32)];
        match dim {
            1 => {
                for (b, &r) in buf.iter_mut().zip(density) {
                    b.re = r;
                }
            }
            _ => {
                for y in 0..n {
                    for x in 0..n {
                        buf[y * len + x].re = density[y * n + x];
                    }
                }
            }
        }
        self.transform(&mut buf, true);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b = *b * *s;
        }
        self.transform(&mut buf, false);
        let scale = R::one() / R::lit(buf.len() as f64);
        Ok(match dim {
            1 => buf[..n].iter().map(|c| c.re * scale).collect(),
            _ => (0..n * n)
                .map(|c| buf[(c / n) * len + c % n].re * scale)
                .collect(),
        })
    }

    /// Direct `O(n²)` Toeplitz sum.
    pub fn apply_direct(&self, density: &[R]) -> Result<Vec<R>> {
        self.check_len(density)?;
        Ok(direct(&self.table, self.cells, density))
    }
}

fn direct<R: Real>(table: &KernelTable<R>, cells: usize, density: &[R]) -> Vec<R> {
    match table.dim() {
        1 => (0..cells)
            .map(|j| {
                density
                    .iter()
                    .enumerate()
                    .map(|(p, &r)| r * table.get(j as isize - p as isize))
                    .sum()
            })
            .collect(),
        _ => (0..cells * cells)
            .map(|c| {
                let (jx, jy) = ((c % cells) as isize, (c / cells) as isize);
                density
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| **r != R::zero())
                    .map(|(p, &r)| {
                        let (px, py) = ((p % cells) as isize, (p / cells) as isize);
                        r * table.get2(jx - px, jy - py)
                    })
                    .sum()
            })
            .collect(),
    }
}

/// Convolves with the FFT path; builds a one-off [`Convolver`].
pub fn convolve<R: Real>(table: &KernelTable<R>, density: &[R]) -> Result<Vec<R>> {
    Convolver::new(table.clone()).apply(density)
}

/// Convolves with the direct sum.
pub fn convolve_direct<R: Real>(table: &KernelTable<R>, density: &[R]) -> Result<Vec<R>> {
    let cells = 2 * table.n() + 1;
    if density.len() != cells.pow(table.dim() as u32) {
        return Err(PnpbError::DimensionMismatch(format!(
            "density has {} cells, kernel table expects {}",
            density.len(),
            cells.pow(table.dim() as u32)
        )));
    }
    Ok(direct(table, cells, density))
}

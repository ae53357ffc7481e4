//! Uniform periodic grid with staggered Fourier derivatives.
//!
//! Node placement (in units of the spacing): `p`, `σ_xx`, `σ_zz` at `(i, j)`;
//! `v_x`, `q_x` at `(i+½, j)`; `v_z`, `q_z` at `(i, j+½)`; `σ_xz` at
//! `(i+½, j+½)`. A forward derivative evaluates `∂f` half a cell ahead of
//! the input lattice (symbol `i k e^{+ikΔ/2}`), a backward derivative half a
//! cell behind (`i k e^{-ikΔ/2}`). The two are negative adjoints of each
//! other in [`SpectralGrid::inner_product`]; both carry the two-thirds
//! dealiasing mask and drop the Nyquist mode.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::par;
use crate::state::WaveState;

/// Edge value of the cosine taper.
pub const TAPER_MIN: f64 = 0.92;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stagger {
    Forward,
    Backward,
}

/// Real field on the grid, row-major with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    nx: usize,
    nz: usize,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(nx: usize, nz: usize) -> Self {
        Self {
            nx,
            nz,
            values: vec![0.0; nx * nz],
        }
    }

    pub fn from_fn(nx: usize, nz: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(nx * nz);
        for j in 0..nz {
            for i in 0..nx {
                values.push(f(i, j));
            }
        }
        Self { nx, nz, values }
    }

    pub fn from_vec(nx: usize, nz: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * nz {
            return Err(Error::ShapeMismatch {
                expected: (nx, nz),
                got: (values.len(), 1),
            });
        }
        Ok(Self { nx, nz, values })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.nz)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * self.nx + i] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        par::max_indexed(self.values.len(), |k| self.values[k].abs())
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }
}

/// Grid geometry plus the spectral tables shared by all derivative calls.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    pub nx: usize,
    pub nz: usize,
    pub dx: f64,
    pub dz: f64,
    /// Wavenumbers in FFT order; the Nyquist entry is zero.
    pub kx: Vec<f64>,
    pub kz: Vec<f64>,
    pub shift_x_fwd: Vec<Complex64>,
    pub shift_x_bwd: Vec<Complex64>,
    pub shift_z_fwd: Vec<Complex64>,
    pub shift_z_bwd: Vec<Complex64>,
    /// Per-axis two-thirds masks; the 2D mask is their product.
    pub mask_x: Vec<f64>,
    pub mask_z: Vec<f64>,
    /// Per-axis taper profiles; the 2D taper is their product.
    pub taper_x: Vec<f64>,
    pub taper_z: Vec<f64>,
    pub taper_width: usize,
    /// Masked derivative symbols `i k e^{±ikΔ/2}` per axis.
    pub(crate) sym_x_fwd: Vec<Complex64>,
    pub(crate) sym_x_bwd: Vec<Complex64>,
    pub(crate) sym_z_fwd: Vec<Complex64>,
    pub(crate) sym_z_bwd: Vec<Complex64>,
    pub(crate) fft: Fft2,
    /// Product of the axis profiles, empty without a taper.
    taper_2d: Vec<f64>,
}

fn wavenumbers(n: usize, d: f64) -> Vec<f64> {
    let len = n as f64 * d;
    (0..n)
        .map(|m| {
            if 2 * m == n {
                0.0
            } else if 2 * m < n {
                2.0 * PI * m as f64 / len
            } else {
                2.0 * PI * (m as f64 - n as f64) / len
            }
        })
        .collect()
}

/// Keeps signed mode indices with `|m| <= n/3`.
fn two_thirds_mask(n: usize) -> Vec<f64> {
    (0..n)
        .map(|m| {
            let signed = if 2 * m <= n { m } else { n - m };
            if 3 * signed <= n && 2 * m != n {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// `t(ξ) = ½(1 + cos(πξ/L))` mapped onto `[TAPER_MIN, 1]`, where `ξ` is the
/// depth into the boundary layer (`L` at the outermost node).
fn taper_profile(n: usize, width: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let from_edge = i.min(n - 1 - i);
            if from_edge >= width {
                1.0
            } else {
                let xi = (width - from_edge) as f64;
                let t = 0.5 * (1.0 + (PI * xi / width as f64).cos());
                TAPER_MIN + (1.0 - TAPER_MIN) * t
            }
        })
        .collect()
}

impl SpectralGrid {
    pub fn new(nx: usize, nz: usize, dx: f64, dz: f64, taper_width: usize) -> Result<Self> {
        for (name, n) in [("nx", nx), ("nz", nz)] {
            if n < 16 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!("{name} = {n} must be even and >= 16")));
            }
        }
        if !(dx > 0.0 && dz > 0.0 && dx.is_finite() && dz.is_finite()) {
            return Err(Error::InvalidGrid("spacings must be positive".into()));
        }
        if 2 * taper_width >= nx.min(nz) {
            return Err(Error::InvalidGrid(format!(
                "taper width {taper_width} leaves no interior"
            )));
        }
        let kx = wavenumbers(nx, dx);
        let kz = wavenumbers(nz, dz);
        let shift = |k: &[f64], d: f64, sign: f64| -> Vec<Complex64> {
            k.iter()
                .map(|&k| Complex64::from_polar(1.0, sign * k * d / 2.0))
                .collect()
        };
        let shift_x_fwd = shift(&kx, dx, 1.0);
        let shift_x_bwd = shift(&kx, dx, -1.0);
        let shift_z_fwd = shift(&kz, dz, 1.0);
        let shift_z_bwd = shift(&kz, dz, -1.0);
        let mask_x = two_thirds_mask(nx);
        let mask_z = two_thirds_mask(nz);
        let symbol = |k: &[f64], s: &[Complex64], m: &[f64]| -> Vec<Complex64> {
            k.iter()
                .zip(s)
                .zip(m)
                .map(|((&k, &s), &m)| Complex64::new(0.0, k) * s * m)
                .collect()
        };
        Ok(Self {
            sym_x_fwd: symbol(&kx, &shift_x_fwd, &mask_x),
            sym_x_bwd: symbol(&kx, &shift_x_bwd, &mask_x),
            sym_z_fwd: symbol(&kz, &shift_z_fwd, &mask_z),
            sym_z_bwd: symbol(&kz, &shift_z_bwd, &mask_z),
            taper_2d: if taper_width == 0 {
                Vec::new()
            } else {
                let (tx, tz) = (taper_profile(nx, taper_width), taper_profile(nz, taper_width));
                (0..nx * nz).map(|k| tx[k % nx] * tz[k / nx]).collect()
            },
            taper_x: taper_profile(nx, taper_width),
            taper_z: taper_profile(nz, taper_width),
            fft: Fft2::new(nx, nz),
            nx,
            nz,
            dx,
            dz,
            kx,
            kz,
            shift_x_fwd,
            shift_x_bwd,
            shift_z_fwd,
            shift_z_bwd,
            mask_x,
            mask_z,
            taper_width,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.nx as f64 * self.dx, self.nz as f64 * self.dz)
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dz
    }

    /// 2D dealias mask at spectral index `(ix, iz)`.
    pub fn dealias_mask(&self, ix: usize, iz: usize) -> f64 {
        self.mask_x[ix] * self.mask_z[iz]
    }

    /// 2D taper at node `(i, j)`.
    pub fn taper(&self, i: usize, j: usize) -> f64 {
        self.taper_x[i] * self.taper_z[j]
    }

    /// Largest retained wavenumber magnitude along each axis.
    pub fn max_retained_wavenumber(&self) -> (f64, f64) {
        let kmax = |k: &[f64], m: &[f64]| {
            k.iter()
                .zip(m)
                .filter(|(_, &m)| m > 0.0)
                .map(|(k, _)| k.abs())
                .fold(0.0, f64::max)
        };
        (kmax(&self.kx, &self.mask_x), kmax(&self.kz, &self.mask_z))
    }

    pub(crate) fn symbol(&self, axis: Axis, stagger: Stagger) -> &[Complex64] {
        match (axis, stagger) {
            (Axis::X, Stagger::Forward) => &self.sym_x_fwd,
            (Axis::X, Stagger::Backward) => &self.sym_x_bwd,
            (Axis::Z, Stagger::Forward) => &self.sym_z_fwd,
            (Axis::Z, Stagger::Backward) => &self.sym_z_bwd,
        }
    }

    fn check_shape(&self, f: &ScalarField) -> Result<()> {
        if f.dims() != (self.nx, self.nz) {
            return Err(Error::ShapeMismatch {
                expected: (self.nx, self.nz),
                got: f.dims(),
            });
        }
        Ok(())
    }

    /// Staggered spectral derivative of a single field.
    pub fn derivative(&self, f: &ScalarField, axis: Axis, stagger: Stagger) -> Result<ScalarField> {
        self.check_shape(f)?;
        if !f.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut work = buf.clone();
        self.fft.forward(&mut buf, &mut work);
        let sym = self.symbol(axis, stagger);
        let (mx, mz, nz) = (&self.mask_x, &self.mask_z, self.nz);
        par::for_each_chunk_mut(&mut buf, par::CHUNK, |ci, chunk| {
            let base = ci * par::CHUNK;
            for (k, v) in chunk.iter_mut().enumerate() {
                let (ix, iz) = ((base + k) / nz, (base + k) % nz);
                let s = match axis {
                    Axis::X => sym[ix] * mz[iz],
                    Axis::Z => sym[iz] * mx[ix],
                };
                *v *= s;
            }
        });
        self.fft.inverse(&mut buf, &mut work);
        let values = buf.iter().map(|c| c.re).collect();
        Ok(ScalarField {
            nx: self.nx,
            nz: self.nz,
            values,
        })
    }

    /// Discrete inner product `Σ f g Δx Δz`.
    pub fn inner_product(&self, f: &ScalarField, g: &ScalarField) -> Result<f64> {
        self.check_shape(f)?;
        self.check_shape(g)?;
        let s = par::sum_indexed(self.len(), |k| f.values[k] * g.values[k]);
        Ok(s * self.cell_area())
    }

    /// Multiplies every field of `state` pointwise by the taper.
    pub fn apply_taper(&self, state: &mut WaveState) {
        if self.taper_width == 0 {
            return;
        }
        for field in state.fields_mut() {
            par::update_indexed(&mut field.values, |k, v| *v *= self.taper_2d[k]);
        }
    }

    /// Whether node `(i, j)` lies outside the taper layer.
    pub fn in_interior(&self, i: usize, j: usize) -> bool {
        let w = self.taper_width;
        i >= w && i < self.nx - w && j >= w && j < self.nz - w
    }
}

//! 2D complex FFTs on row-major (x fastest) grids.
//!
//! The forward transform leaves the spectrum transposed: index
//! `ix * nz + iz`, kz fastest. Derivative symbols are applied in that layout
//! and the inverse transform returns to x-fastest physical layout. The
//! inverse is normalized by `1 / (nx nz)`.
//!
//! Real fields are transformed two at a time by packing them as the real and
//! imaginary parts of one complex field ([`pack`], [`split_packed`]).

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::par;

/// Rows handed to one task in the batched 1D transforms.
pub(crate) const ROWS_PER_TASK: usize = 16;

#[derive(Clone)]
pub struct Fft2 {
    nx: usize,
    nz: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_z: Arc<dyn Fft<f64>>,
    inv_z: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("nx", &self.nx)
            .field("nz", &self.nz)
            .finish()
    }
}

fn batched(fft: &dyn Fft<f64>, data: &mut [Complex64], n: usize) {
    par::for_each_chunk_mut(data, n * ROWS_PER_TASK, |_, chunk| fft.process(chunk));
}

/// `dst[c * rows + r] = src[r * cols + c]` for a `rows × cols` source.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    par::for_each_chunk_mut(dst, rows * ROWS_PER_TASK, |task, chunk| {
        let c0 = task * ROWS_PER_TASK;
        for (dc, out_row) in chunk.chunks_mut(rows).enumerate() {
            let c = c0 + dc;
            for (r, o) in out_row.iter_mut().enumerate() {
                *o = src[r * cols + c];
            }
        }
    });
}

impl Fft2 {
    pub fn new(nx: usize, nz: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            nz,
            fwd_x: planner.plan_fft_forward(nx),
            inv_x: planner.plan_fft_inverse(nx),
            fwd_z: planner.plan_fft_forward(nz),
            inv_z: planner.plan_fft_inverse(nz),
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical (x fastest) to spectral (kz fastest). `work` is scratch of the same length.
    pub fn forward(&self, buf: &mut Vec<Complex64>, work: &mut Vec<Complex64>) {
        batched(self.fwd_x.as_ref(), buf, self.nx);
        transpose(buf, work, self.nz, self.nx);
        batched(self.fwd_z.as_ref(), work, self.nz);
        std::mem::swap(buf, work);
    }

    /// Spectral (kz fastest) back to physical (x fastest), normalized.
    pub fn inverse(&self, buf: &mut Vec<Complex64>, work: &mut Vec<Complex64>) {
        batched(self.inv_z.as_ref(), buf, self.nz);
        transpose(buf, work, self.nx, self.nz);
        batched(self.inv_x.as_ref(), work, self.nx);
        let scale = 1.0 / (self.nx * self.nz) as f64;
        par::for_each_chunk_mut(work, par::CHUNK, |_, c| {
            for v in c {
                *v *= scale;
            }
        });
        std::mem::swap(buf, work);
    }
}

/// Packs two real fields as `a + i b`.
pub fn pack(a: &[f64], b: &[f64], out: &mut [Complex64]) {
    par::for_each_chunk_mut(out, par::CHUNK, |ci, chunk| {
        let base = ci * par::CHUNK;
        for (k, o) in chunk.iter_mut().enumerate() {
            *o = Complex64::new(a[base + k], b[base + k]);
        }
    });
}

/// Separates the spectrum of a packed pair into the spectra of its parts.
///
/// With `H = F + iG` and `F`, `G` Hermitian: `F(k) = (H(k) + H*(-k)) / 2`,
/// `G(k) = (H(k) - H*(-k)) / 2i`. Spectral layout, kz fastest.
pub fn split_packed(
    h: &[Complex64],
    nx: usize,
    nz: usize,
    fa: &mut [Complex64],
    fb: &mut [Complex64],
) {
    let neg = |i: usize, n: usize| if i == 0 { 0 } else { n - i };
    let pass = |out: &mut [Complex64], combine: fn(Complex64, Complex64) -> Complex64| {
        par::for_each_chunk_mut(out, nz * ROWS_PER_TASK, |task, chunk| {
            for (r, row) in chunk.chunks_mut(nz).enumerate() {
                let ix = task * ROWS_PER_TASK + r;
                let h_row = &h[ix * nz..(ix + 1) * nz];
                let m_row = &h[neg(ix, nx) * nz..(neg(ix, nx) + 1) * nz];
                for (iz, o) in row.iter_mut().enumerate() {
                    *o = combine(h_row[iz], m_row[neg(iz, nz)].conj());
                }
            }
        });
    };
    pass(fa, |hk, hm| (hk + hm) * 0.5);
    // (hk - hm) / 2i
    pass(fb, |hk, hm| {
        let d = (hk - hm) * 0.5;
        Complex64::new(d.im, -d.re)
    });
}

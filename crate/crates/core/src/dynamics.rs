//! Generators of the split flow: the conservative wave operator `T` and the
//! exact Darcy drag flow `e^{tV}`.
//!
//! `T` is the lossless, source-free Biot system:
//!
//! ```text
//! ∂t p   = -M (α:ε(v) + ∇·q)
//! ∂t σ   = C:ε(v) - α ∂t p
//! ∂t v   = Δ⁻¹ [ m (∇·σ) + ρ_f ∇p ]
//! ∂t q   = Δ⁻¹ [ -ρ_f (∇·σ) - ρ ∇p ]
//! ```
//!
//! with `Δ = ρ m - ρ_f²` per axis. Centre-to-face derivatives are forward
//! staggered, face-to-centre derivatives backward.
//!
//! `V` keeps only the drag terms. Per axis and node it is the 2×2 system
//! `v' = (ρ_f d/Δ) q`, `q' = -(ρ d/Δ) q`, whose solution is
//! `q(t) = q₀ e^{-λt}`, `v(t) = v₀ + (ρ_f/ρ) q₀ (1 - e^{-λt})` with
//! `λ = ρ d / Δ`. The mixture momentum `ρ v + ρ_f q` is invariant and the
//! kinetic energy decays at rate `d q²`.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::SpectralGrid;
use crate::material::PoroelasticMaterial;
use crate::fft::ROWS_PER_TASK;
use crate::par;
use crate::state::{StateRate, WaveState};

/// Per-node decay rates and velocity coupling of the drag flow.
#[derive(Debug, Clone)]
pub struct DragFlowTables {
    pub decay_x: Vec<f64>,
    pub decay_z: Vec<f64>,
    pub coupling_x: Vec<f64>,
    pub coupling_z: Vec<f64>,
}

impl DragFlowTables {
    pub fn new(mat: &PoroelasticMaterial) -> Self {
        let decay = |b: &crate::material::InertialBlock| -> Vec<f64> {
            (0..b.rho.len())
                .map(|k| b.rho[k] * b.drag[k] / b.delta[k])
                .collect()
        };
        let coupling = |b: &crate::material::InertialBlock| -> Vec<f64> {
            (0..b.rho.len()).map(|k| b.rho_f[k] / b.rho[k]).collect()
        };
        Self {
            decay_x: decay(&mat.x_face),
            decay_z: decay(&mat.z_face),
            coupling_x: coupling(&mat.x_face),
            coupling_z: coupling(&mat.z_face),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.decay_x.iter().chain(&self.decay_z).all(|&l| l == 0.0)
    }

    /// Advances `state` by the exact drag flow over `dt`.
    pub fn apply(&self, state: &mut WaveState, dt: f64) {
        if self.is_identity() {
            return;
        }
        relax(&mut state.vx, &mut state.qx, &self.decay_x, &self.coupling_x, dt);
        relax(&mut state.vz, &mut state.qz, &self.decay_z, &self.coupling_z, dt);
    }
}

fn relax(
    v: &mut crate::grid::ScalarField,
    q: &mut crate::grid::ScalarField,
    decay: &[f64],
    coupling: &[f64],
    dt: f64,
) {
    let q0 = &q.values;
    par::update_indexed(&mut v.values, |k, v| {
        // 1 - e^{-λt}
        let transfer = -(-decay[k] * dt).exp_m1();
        *v += coupling[k] * q0[k] * transfer;
    });
    par::update_indexed(&mut q.values, |k, q| *q *= (-decay[k] * dt).exp());
}

/// Exact drag flow over `dt`, returning a new state.
pub fn dissipative_flow(state: &WaveState, mat: &PoroelasticMaterial, dt: f64) -> WaveState {
    let mut out = state.clone();
    DragFlowTables::new(mat).apply(&mut out, dt);
    out
}

/// Evaluates the conservative right-hand side with reusable FFT buffers.
///
/// The eight input fields are transformed as four packed complex pairs and
/// the eight derivative combinations the system needs come back as four
/// more, so one evaluation costs eight 2D FFTs.
#[derive(Debug, Clone)]
pub struct ReversibleOperator {
    packed: [Vec<Complex64>; 4],
    spectra: [Vec<Complex64>; 8],
    work: Vec<Complex64>,
}

impl ReversibleOperator {
    pub fn new(grid: &SpectralGrid) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self {
            packed: std::array::from_fn(|_| z.clone()),
            spectra: std::array::from_fn(|_| z.clone()),
            work: z,
        }
    }

    pub fn apply(
        &mut self,
        state: &WaveState,
        mat: &PoroelasticMaterial,
        grid: &SpectralGrid,
        out: &mut StateRate,
    ) -> Result<()> {
        if state.dims() != (grid.nx, grid.nz) || out.dims() != state.dims() {
            return Err(Error::ShapeMismatch {
                expected: (grid.nx, grid.nz),
                got: state.dims(),
            });
        }
        if !state.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        let (nx, nz) = (grid.nx, grid.nz);

        let pairs = [
            (&state.vx, &state.vz),
            (&state.qx, &state.qz),
            (&state.p, &state.sxz),
            (&state.sxx, &state.szz),
        ];
        for (slot, (a, b)) in pairs.into_iter().enumerate() {
            let buf = &mut self.packed[slot];
            crate::fft::pack(&a.values, &b.values, buf);
            grid.fft.forward(buf, &mut self.work);
            let [s0, s1] = &mut self.spectra[2 * slot..2 * slot + 2] else {
                unreachable!()
            };
            crate::fft::split_packed(buf, nx, nz, s0, s1);
        }

        let [vx, vz, qx, qz, p, sxz, sxx, szz] = &self.spectra;
        let (ax, bx, az, bz) = (&grid.sym_x_fwd, &grid.sym_x_bwd, &grid.sym_z_fwd, &grid.sym_z_bwd);
        let (mx, mz) = (&grid.mask_x, &grid.mask_z);
        let i = Complex64::new(0.0, 1.0);
        let [o0, o1, o2, o3] = &mut self.packed;
        let outs: [&mut Vec<Complex64>; 4] = [o0, o1, o2, o3];
        for (slot, buf) in outs.into_iter().enumerate() {
            par::for_each_chunk_mut(buf, nz * ROWS_PER_TASK, |task, chunk| {
                for (r, row) in chunk.chunks_mut(nz).enumerate() {
                    let ix = task * ROWS_PER_TASK + r;
                    let base = ix * nz;
                    let (axi, bxi, mxi) = (ax[ix], bx[ix], mx[ix]);
                    let range = base..base + nz;
                    match slot {
                        // ε_xx, ε_zz at cells
                        0 => {
                            let (vx, vz) = (&vx[range.clone()], &vz[range.clone()]);
                            for (iz, o) in row.iter_mut().enumerate() {
                                let gx = bxi * mz[iz];
                                let gz = bz[iz] * mxi;
                                *o = gx * vx[iz] + i * (gz * vz[iz]);
                            }
                        }
                        // engineering shear strain at corners, ∇·q at cells
                        1 => {
                            let (vx, vz, qx, qz) = (&vx[range.clone()], &vz[range.clone()], &qx[range.clone()], &qz[range.clone()]);
                            for (iz, o) in row.iter_mut().enumerate() {
                                let (fx, gx) = (axi * mz[iz], bxi * mz[iz]);
                                let (fz, gz) = (az[iz] * mxi, bz[iz] * mxi);
                                *o = (fz * vx[iz] + fx * vz[iz]) + i * (gx * qx[iz] + gz * qz[iz]);
                            }
                        }
                        // ∇·σ on x-faces and z-faces
                        2 => {
                            let (sxx, sxz, szz) = (&sxx[range.clone()], &sxz[range.clone()], &szz[range.clone()]);
                            for (iz, o) in row.iter_mut().enumerate() {
                                let (fx, gx) = (axi * mz[iz], bxi * mz[iz]);
                                let (fz, gz) = (az[iz] * mxi, bz[iz] * mxi);
                                *o = (fx * sxx[iz] + gz * sxz[iz]) + i * (gx * sxz[iz] + fz * szz[iz]);
                            }
                        }
                        // ∇p on x-faces and z-faces
                        _ => {
                            let p = &p[range.clone()];
                            for (iz, o) in row.iter_mut().enumerate() {
                                let fx = axi * mz[iz];
                                let fz = az[iz] * mxi;
                                *o = fx * p[iz] + i * (fz * p[iz]);
                            }
                        }
                    }
                }
            });
        }
        for buf in &mut self.packed {
            grid.fft.inverse(buf, &mut self.work);
        }

        let [strain, shear_div, div_sigma, grad_p] = &self.packed;
        let cc = &mat.center;
        let (xf, zf) = (&mat.x_face, &mat.z_face);
        par::fill_indexed(&mut out.p.values, |k| {
            let (exx, ezz) = (strain[k].re, strain[k].im);
            -cc.modulus[k] * (cc.alpha1[k] * exx + cc.alpha3[k] * ezz + shear_div[k].im)
        });
        let pdot = &out.p.values;
        par::fill_indexed(&mut out.sxx.values, |k| {
            let (exx, ezz) = (strain[k].re, strain[k].im);
            cc.c11[k] * exx + cc.c13[k] * ezz - cc.alpha1[k] * pdot[k]
        });
        par::fill_indexed(&mut out.szz.values, |k| {
            let (exx, ezz) = (strain[k].re, strain[k].im);
            cc.c13[k] * exx + cc.c33[k] * ezz - cc.alpha3[k] * pdot[k]
        });
        par::fill_indexed(&mut out.sxz.values, |k| mat.corner_c55[k] * shear_div[k].re);
        par::fill_indexed(&mut out.vx.values, |k| {
            (xf.m[k] * div_sigma[k].re + xf.rho_f[k] * grad_p[k].re) / xf.delta[k]
        });
        par::fill_indexed(&mut out.qx.values, |k| {
            -(xf.rho_f[k] * div_sigma[k].re + xf.rho[k] * grad_p[k].re) / xf.delta[k]
        });
        par::fill_indexed(&mut out.vz.values, |k| {
            (zf.m[k] * div_sigma[k].im + zf.rho_f[k] * grad_p[k].im) / zf.delta[k]
        });
        par::fill_indexed(&mut out.qz.values, |k| {
            -(zf.rho_f[k] * div_sigma[k].im + zf.rho[k] * grad_p[k].im) / zf.delta[k]
        });
        Ok(())
    }
}

/// One-off evaluation of the conservative right-hand side.
pub fn reversible_rhs(
    state: &WaveState,
    mat: &PoroelasticMaterial,
    grid: &SpectralGrid,
    out: &mut StateRate,
) -> Result<()> {
    ReversibleOperator::new(grid).apply(state, mat, grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, ScalarField, Stagger};
    use crate::material::{build_material, tests::unit_params, Layer, MaterialParams};
    use crate::state::{energy, energy_inner};
    use proptest::prelude::*;

    fn setup(params: &[MaterialParams], n: usize) -> (PoroelasticMaterial, SpectralGrid) {
        let h = n / params.len();
        let layers: Vec<Layer> = params
            .iter()
            .enumerate()
            .map(|(k, &p)| Layer {
                z_begin: k * h,
                z_end: if k + 1 == params.len() { n } else { (k + 1) * h },
                params: p,
            })
            .collect();
        let mat = build_material(&layers, n, n).unwrap();
        let grid = SpectralGrid::new(n, n, 0.3, 0.4, 0).unwrap();
        (mat, grid)
    }

    fn smooth_state(n: usize, seed: u64) -> WaveState {
        let mut s = seed | 1;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let mut st = WaveState::zeros(n, n);
        for f in st.fields_mut() {
            let modes: Vec<(f64, f64, f64, f64)> =
                (0..4).map(|_| ((next() * 5.0).round(), (next() * 5.0).round(), next(), 3.0 * next())).collect();
            *f = ScalarField::from_fn(n, n, |i, j| {
                modes
                    .iter()
                    .map(|&(a, b, c, ph)| c * (2.0 * std::f64::consts::PI * (a * i as f64 + b * j as f64) / n as f64 + ph).sin())
                    .sum()
            });
        }
        st
    }

    fn rhs(state: &WaveState, mat: &PoroelasticMaterial, grid: &SpectralGrid) -> WaveState {
        let mut out = WaveState::zeros(grid.nx, grid.nz);
        reversible_rhs(state, mat, grid, &mut out).unwrap();
        out
    }

    /// Assembles T from single-field derivative calls.
    fn rhs_oracle(s: &WaveState, mat: &PoroelasticMaterial, g: &SpectralGrid) -> WaveState {
        use Axis::*;
        use Stagger::*;
        let d = |f: &ScalarField, a, st| g.derivative(f, a, st).unwrap();
        let exx = d(&s.vx, X, Backward);
        let ezz = d(&s.vz, Z, Backward);
        let gam = d(&s.vx, Z, Forward);
        let gam2 = d(&s.vz, X, Forward);
        let dq = d(&s.qx, X, Backward);
        let dq2 = d(&s.qz, Z, Backward);
        let dsx = d(&s.sxx, X, Forward);
        let dsx2 = d(&s.sxz, Z, Backward);
        let dsz = d(&s.sxz, X, Backward);
        let dsz2 = d(&s.szz, Z, Forward);
        let gpx = d(&s.p, X, Forward);
        let gpz = d(&s.p, Z, Forward);
        let mut out = WaveState::zeros(g.nx, g.nz);
        for k in 0..g.len() {
            let c = &mat.center;
            let tr = c.alpha1[k] * exx.values[k] + c.alpha3[k] * ezz.values[k];
            let pdot = -c.modulus[k] * (tr + dq.values[k] + dq2.values[k]);
            out.p.values[k] = pdot;
            out.sxx.values[k] = c.c11[k] * exx.values[k] + c.c13[k] * ezz.values[k] - c.alpha1[k] * pdot;
            out.szz.values[k] = c.c13[k] * exx.values[k] + c.c33[k] * ezz.values[k] - c.alpha3[k] * pdot;
            out.sxz.values[k] = mat.corner_c55[k] * (gam.values[k] + gam2.values[k]);
            let (x, z) = (&mat.x_face, &mat.z_face);
            let dsxk = dsx.values[k] + dsx2.values[k];
            let dszk = dsz.values[k] + dsz2.values[k];
            out.vx.values[k] = (x.m[k] * dsxk + x.rho_f[k] * gpx.values[k]) / x.delta[k];
            out.qx.values[k] = -(x.rho_f[k] * dsxk + x.rho[k] * gpx.values[k]) / x.delta[k];
            out.vz.values[k] = (z.m[k] * dszk + z.rho_f[k] * gpz.values[k]) / z.delta[k];
            out.qz.values[k] = -(z.rho_f[k] * dszk + z.rho[k] * gpz.values[k]) / z.delta[k];
        }
        out
    }

    fn lossy() -> MaterialParams {
        let mut p = unit_params();
        p.eta = 0.7;
        p.k3 = 0.5;
        p.t3 = 1.6;
        p
    }

    #[test]
    fn zero_and_uniform_states_have_zero_rate() {
        let (mat, grid) = setup(&[unit_params()], 16);
        let z = rhs(&WaveState::zeros(16, 16), &mat, &grid);
        assert_eq!(z.max_abs(), 0.0);
        let mut u = WaveState::zeros(16, 16);
        for (k, f) in u.fields_mut().into_iter().enumerate() {
            f.fill(k as f64 + 1.0);
        }
        assert!(rhs(&u, &mat, &grid).max_abs() < 1e-12);
    }

    #[test]
    fn packed_path_matches_single_field_derivatives() {
        let mut stiff = unit_params();
        stiff.c11 = 5.0;
        stiff.rho = 3.0;
        let (mat, grid) = setup(&[unit_params(), stiff], 32);
        let s = smooth_state(32, 99);
        let fast = rhs(&s, &mat, &grid);
        let slow = rhs_oracle(&s, &mat, &grid);
        let scale = slow.max_abs();
        for (a, b) in fast.fields().iter().zip(slow.fields()) {
            for (u, v) in a.values.iter().zip(&b.values) {
                assert!((u - v).abs() <= 1e-12 * scale, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn non_finite_state_rejected() {
        let (mat, grid) = setup(&[unit_params()], 16);
        let mut s = WaveState::zeros(16, 16);
        s.qz.set(1, 1, f64::INFINITY);
        let mut out = s.clone();
        assert!(matches!(reversible_rhs(&s, &mat, &grid, &mut out), Err(Error::NonFiniteInput)));
    }

    #[test]
    fn skew_adjoint_in_energy_form_homogeneous() {
        let (mat, grid) = setup(&[unit_params()], 32);
        for seed in 1..6 {
            let a = smooth_state(32, seed);
            let b = smooth_state(32, seed + 100);
            let ta = rhs(&a, &mat, &grid);
            let tb = rhs(&b, &mat, &grid);
            let l = energy_inner(&ta, &b, &mat, &grid);
            let r = energy_inner(&a, &tb, &mat, &grid);
            assert!((l + r).abs() <= 1e-10 * l.abs().max(r.abs()), "{l} {r}");
        }
    }

    #[test]
    fn drag_flow_is_identity_without_viscosity() {
        let (mat, _) = setup(&[unit_params()], 16);
        let s = smooth_state(16, 4);
        assert_eq!(dissipative_flow(&s, &mat, 0.3), s);
    }

    #[test]
    fn drag_flow_long_time_limit() {
        let (mat, _) = setup(&[lossy()], 16);
        let s = smooth_state(16, 8);
        let out = dissipative_flow(&s, &mat, 1e6);
        let c = mat.x_face.rho_f[0] / mat.x_face.rho[0];
        for k in 0..256 {
            assert_eq!(out.qx.values[k], 0.0);
            let expect = s.vx.values[k] + c * s.qx.values[k];
            assert!((out.vx.values[k] - expect).abs() < 1e-14);
        }
        assert_eq!(out.p, s.p);
        assert_eq!(out.sxz, s.sxz);
    }

    /// Brute-force oracle: 10⁴ classical RK4 sub-steps of the 2×2 drag ODE.
    fn drag_ode_oracle(v0: f64, q0: f64, rho: f64, rho_f: f64, m: f64, d: f64, t: f64) -> (f64, f64) {
        let delta = rho * m - rho_f * rho_f;
        let f = |_v: f64, q: f64| (rho_f * d * q / delta, -rho * d * q / delta);
        let n = 10_000;
        let h = t / n as f64;
        let (mut v, mut q) = (v0, q0);
        for _ in 0..n {
            let k1 = f(v, q);
            let k2 = f(v + 0.5 * h * k1.0, q + 0.5 * h * k1.1);
            let k3 = f(v + 0.5 * h * k2.0, q + 0.5 * h * k2.1);
            let k4 = f(v + h * k3.0, q + h * k3.1);
            v += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            q += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (v, q)
    }

    #[test]
    fn drag_flow_matches_ode_oracle_single_cell() {
        // λ = ρ d / Δ = 1 with ρ = 2, ρ_f = 1, m = 2 (Δ = 3), d = 1.5
        let mut p = unit_params();
        p.eta = 1.5;
        let (mat, _) = setup(&[p], 16);
        let tables = DragFlowTables::new(&mat);
        assert!((tables.decay_x[0] - 1.0).abs() < 1e-15);
        let mut s = WaveState::zeros(16, 16);
        s.vx.fill(0.3);
        s.qx.fill(-1.1);
        tables.apply(&mut s, 0.5);
        let (v, q) = drag_ode_oracle(0.3, -1.1, 2.0, 1.0, 2.0, 1.5, 0.5);
        assert!((s.vx.values[0] - v).abs() <= 1e-10 * v.abs());
        assert!((s.qx.values[0] - q).abs() <= 1e-10 * q.abs());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn drag_flow_semigroup_momentum_and_contraction(
            seed in any::<u64>(), eta in 0.0..5.0f64, t1 in 0.0..2.0f64, t2 in 0.0..2.0f64
        ) {
            let mut p = lossy();
            p.eta = eta;
            let (mat, grid) = setup(&[p], 16);
            let s = smooth_state(16, seed);
            let once = dissipative_flow(&s, &mat, t1 + t2);
            let twice = dissipative_flow(&dissipative_flow(&s, &mat, t1), &mat, t2);
            let scale = s.max_abs();
            for (a, b) in once.fields().iter().zip(twice.fields()) {
                for (u, v) in a.values.iter().zip(&b.values) {
                    prop_assert!((u - v).abs() <= 1e-12 * scale);
                }
            }
            let xf = &mat.x_face;
            for k in 0..256 {
                let before = xf.rho[k] * s.vx.values[k] + xf.rho_f[k] * s.qx.values[k];
                let after = xf.rho[k] * once.vx.values[k] + xf.rho_f[k] * once.qx.values[k];
                prop_assert!((before - after).abs() <= 1e-12 * (xf.rho[k] * s.vx.values[k].abs() + xf.rho_f[k] * s.qx.values[k].abs()));
            }
            prop_assert!(energy(&once, &mat, &grid) <= energy(&s, &mat, &grid) * (1.0 + 1e-14));
        }
    }
}

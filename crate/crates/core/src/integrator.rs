//! Operator splitting of the drag flow and the reversible flow, with RK4 for
//! the reversible part.
//!
//! Strang step: half kick, drag `dt/2`, RK4 `dt`, drag `dt/2`, half kick.
//! Lie step: full kick, drag `dt`, RK4 `dt`. The boundary taper is applied
//! once at the end of each step.

use serde::{Deserialize, Serialize};

use crate::dynamics::{DragFlowTables, ReversibleOperator};
use crate::error::{Error, Result};
use crate::excitation::{half_kick, PlacedSource};
use crate::grid::SpectralGrid;
use crate::material::PoroelasticMaterial;
use crate::state::{WaveState, FIELD_NAMES};

pub const DEFAULT_GUARD_FACTOR: f64 = 1e6;
pub const DEFAULT_GUARD_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Lie,
    #[default]
    Strang,
}

/// `cfl · min(Δx, Δz) / (π · v_max)`.
pub fn stable_dt(grid: &SpectralGrid, mat: &PoroelasticMaterial, cfl: f64) -> f64 {
    cfl * grid.dx.min(grid.dz) / (std::f64::consts::PI * mat.max_wave_speed())
}

/// Courant number implied by a step `dt`.
pub fn courant_number(grid: &SpectralGrid, mat: &PoroelasticMaterial, dt: f64) -> f64 {
    dt.abs() * std::f64::consts::PI * mat.max_wave_speed() / grid.dx.min(grid.dz)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPlan {
    pub dt: f64,
    pub scheme: Scheme,
    pub cfl: f64,
    pub n_steps: usize,
    pub taper_enabled: bool,
    pub guard_factor: f64,
    pub guard_window: usize,
}

impl StepPlan {
    /// Plan with `dt = stable_dt(grid, mat, cfl)`.
    pub fn from_cfl(
        grid: &SpectralGrid,
        mat: &PoroelasticMaterial,
        cfl: f64,
        scheme: Scheme,
        n_steps: usize,
    ) -> Result<Self> {
        if !(cfl > 0.0 && cfl.is_finite()) {
            return Err(Error::InvalidPlan(format!("cfl must be positive, got {cfl}")));
        }
        if cfl > 1.0 {
            log::warn!("cfl {cfl} exceeds 1; the run may be unstable");
        }
        Self::with_dt(grid, mat, stable_dt(grid, mat, cfl), scheme, n_steps)
    }

    /// Plan with an explicit step.
    pub fn with_dt(
        grid: &SpectralGrid,
        mat: &PoroelasticMaterial,
        dt: f64,
        scheme: Scheme,
        n_steps: usize,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidPlan(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            dt,
            scheme,
            cfl: courant_number(grid, mat, dt),
            n_steps,
            taper_enabled: grid.taper_width > 0,
            guard_factor: DEFAULT_GUARD_FACTOR,
            guard_window: DEFAULT_GUARD_WINDOW,
        })
    }

    /// The same plan stepping backwards in time. Only meaningful without
    /// drag, taper and sources; used by the reversibility check.
    pub fn time_reversed(&self) -> Self {
        Self {
            dt: -self.dt,
            ..*self
        }
    }
}

/// Trips when a field grows past `factor` times its early maximum.
///
/// Each field's reference is its largest magnitude over the first `window`
/// observed steps, extended for fields that are still identically zero.
#[derive(Debug, Clone)]
pub struct DivergenceGuard {
    factor: f64,
    window: usize,
    seen: usize,
    reference: [f64; 8],
}

impl DivergenceGuard {
    pub fn new(factor: f64, window: usize) -> Self {
        Self {
            factor,
            window,
            seen: 0,
            reference: [0.0; 8],
        }
    }

    pub fn observe(&mut self, state: &WaveState, step: usize) -> Result<()> {
        let in_window = self.seen < self.window;
        self.seen += 1;
        for (k, f) in state.fields().iter().enumerate() {
            let m = f.max_abs();
            if !m.is_finite() || !f.is_finite() {
                log::error!("non-finite {} at step {step}", FIELD_NAMES[k]);
                return Err(Error::InstabilityDetected { step });
            }
            if in_window || self.reference[k] == 0.0 {
                self.reference[k] = self.reference[k].max(m);
            } else if m > self.factor * self.reference[k] {
                log::error!(
                    "{} reached {m:.3e}, reference {:.3e}, at step {step}",
                    FIELD_NAMES[k],
                    self.reference[k]
                );
                return Err(Error::InstabilityDetected { step });
            }
        }
        Ok(())
    }
}

/// Advances a [`WaveState`] through a [`StepPlan`].
pub struct Propagator<'a> {
    mat: &'a PoroelasticMaterial,
    grid: &'a SpectralGrid,
    plan: StepPlan,
    drag: DragFlowTables,
    op: ReversibleOperator,
    sources: Vec<PlacedSource>,
    acc: WaveState,
    stage: WaveState,
    rate: WaveState,
    guard: DivergenceGuard,
    steps_taken: usize,
}

impl<'a> Propagator<'a> {
    pub fn new(
        mat: &'a PoroelasticMaterial,
        grid: &'a SpectralGrid,
        plan: StepPlan,
        sources: Vec<PlacedSource>,
    ) -> Result<Self> {
        if mat.dims() != (grid.nx, grid.nz) {
            return Err(Error::ShapeMismatch {
                expected: (grid.nx, grid.nz),
                got: mat.dims(),
            });
        }
        if !(plan.dt != 0.0 && plan.dt.is_finite()) {
            return Err(Error::InvalidPlan(format!("bad dt {}", plan.dt)));
        }
        // keep the reference window open until the wavelets have peaked
        let ramp = sources
            .iter()
            .map(|s| s.spec.wavelet.delay() + 1.0 / s.spec.wavelet.peak_frequency())
            .fold(0.0, f64::max);
        let window = plan.guard_window.max((ramp / plan.dt.abs()).ceil() as usize);
        let (nx, nz) = (grid.nx, grid.nz);
        Ok(Self {
            mat,
            grid,
            plan,
            drag: DragFlowTables::new(mat),
            op: ReversibleOperator::new(grid),
            sources,
            acc: WaveState::zeros(nx, nz),
            stage: WaveState::zeros(nx, nz),
            rate: WaveState::zeros(nx, nz),
            guard: DivergenceGuard::new(plan.guard_factor, window),
            steps_taken: 0,
        })
    }

    pub fn plan(&self) -> &StepPlan {
        &self.plan
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// One step of the plan's scheme from time `t`, then taper and guard.
    pub fn step(&mut self, state: &mut WaveState, t: f64) -> Result<()> {
        let step = self.steps_taken + 1;
        let dt = self.plan.dt;
        let res = match self.plan.scheme {
            Scheme::Strang => self.strang_step(state, t, dt),
            Scheme::Lie => self.lie_step(state, t, dt),
        };
        match res {
            Err(Error::NonFiniteInput) => return Err(Error::InstabilityDetected { step }),
            other => other?,
        }
        if self.plan.taper_enabled {
            self.grid.apply_taper(state);
        }
        self.guard.observe(state, step)?;
        self.steps_taken = step;
        Ok(())
    }

    /// Advances `n` steps from `t0`, calling `observe(step, time, state)` after each.
    pub fn run(
        &mut self,
        state: &mut WaveState,
        t0: f64,
        n: usize,
        mut observe: impl FnMut(usize, f64, &WaveState) -> Result<()>,
    ) -> Result<()> {
        for k in 0..n {
            let t = t0 + k as f64 * self.plan.dt;
            self.step(state, t)?;
            observe(self.steps_taken, t0 + (k + 1) as f64 * self.plan.dt, state)?;
        }
        Ok(())
    }

    fn kick(&self, state: &mut WaveState, t: f64, weight: f64) {
        for src in &self.sources {
            half_kick(state, src, t, weight, self.mat, self.grid);
        }
    }

    /// Symmetric split step without taper or guard.
    pub fn strang_step(&mut self, state: &mut WaveState, t: f64, dt: f64) -> Result<()> {
        self.kick(state, t, 0.5 * dt);
        self.drag.apply(state, 0.5 * dt);
        self.reversible_rk4(state, dt)?;
        self.drag.apply(state, 0.5 * dt);
        self.kick(state, t + dt, 0.5 * dt);
        Ok(())
    }

    /// First-order split step without taper or guard.
    pub fn lie_step(&mut self, state: &mut WaveState, t: f64, dt: f64) -> Result<()> {
        self.kick(state, t, dt);
        self.drag.apply(state, dt);
        self.reversible_rk4(state, dt)
    }

    /// Classical RK4 for `dΨ/dt = T Ψ` over `dt`.
    pub fn reversible_rk4(&mut self, state: &mut WaveState, dt: f64) -> Result<()> {
        let (mat, grid) = (self.mat, self.grid);
        self.acc.assign(state);
        self.op.apply(state, mat, grid, &mut self.rate)?;
        self.acc.axpy(dt / 6.0, &self.rate)?;
        self.stage.assign_axpy(state, 0.5 * dt, &self.rate);
        self.op.apply(&self.stage, mat, grid, &mut self.rate)?;
        self.acc.axpy(dt / 3.0, &self.rate)?;
        self.stage.assign_axpy(state, 0.5 * dt, &self.rate);
        self.op.apply(&self.stage, mat, grid, &mut self.rate)?;
        self.acc.axpy(dt / 3.0, &self.rate)?;
        self.stage.assign_axpy(state, dt, &self.rate);
        self.op.apply(&self.stage, mat, grid, &mut self.rate)?;
        self.acc.axpy(dt / 6.0, &self.rate)?;
        state.assign(&self.acc);
        Ok(())
    }
}

/// Smooth state built from Fourier modes `|m| ≤ max_mode`, deterministic in `seed`.
pub fn smooth_state(nx: usize, nz: usize, max_mode: usize, amplitudes: [f64; 8], seed: u64) -> WaveState {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut s = WaveState::zeros(nx, nz);
    let tau = 2.0 * std::f64::consts::PI;
    for (f, amp) in s.fields_mut().into_iter().zip(amplitudes) {
        let m = max_mode as i64;
        for mx in -m..=m {
            for mz in 0..=m {
                let c: f64 = rng.random_range(-1.0..1.0);
                let ph: f64 = rng.random_range(0.0..tau);
                for j in 0..nz {
                    for i in 0..nx {
                        let arg = tau * (mx as f64 * i as f64 / nx as f64 + mz as f64 * j as f64 / nz as f64) + ph;
                        f.values[j * nx + i] += amp * c * arg.cos();
                    }
                }
            }
        }
    }
    s
}

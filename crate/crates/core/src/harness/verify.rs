//! Property checks run against a configuration.
//!
//! Randomized inputs come from a ChaCha8 stream seeded with [`VERIFY_SEED`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{DragFlowTables, ReversibleOperator};
use crate::error::{Error, Result};
use crate::grid::{Axis, ScalarField, SpectralGrid, Stagger};
use crate::harness::config::RunConfig;
use crate::harness::run::Simulation;
use crate::integrator::{smooth_state, Propagator, Scheme, StepPlan};
use crate::material::{build_material, Layer, MaterialParams, PoroelasticMaterial};
use crate::state::{energy, energy_inner, WaveState};

pub const VERIFY_SEED: u64 = 20_240_917;

/// Random derivative pairs per axis in the adjointness check.
pub const ADJOINT_PAIRS: usize = 100;
/// Random states for the drag-flow audit.
pub const DRAG_SAMPLES: usize = 1000;

pub const ADJOINT_TOL: f64 = 1e-12;
pub const SKEW_TOL: f64 = 1e-10;
pub const DRIFT_TOL: f64 = 1e-8;
pub const STEP_GROWTH_TOL: f64 = 1e-10;
/// Rounding allowance when comparing two energy sums of a drag update.
pub const DRAG_ROUNDING_TOL: f64 = 1e-13;
pub const REVERSAL_TOL: f64 = 1e-9;
pub const STRANG_SLOPE: (f64, f64) = (1.8, 2.2);
pub const LIE_SLOPE: (f64, f64) = (0.8, 1.2);
/// Reference step is the coarse step divided by this.
pub const REFERENCE_REFINEMENT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyKind {
    Adjointness,
    Energy,
    Contractivity,
    Convergence,
    StrangSymmetry,
}

impl VerifyKind {
    pub const ALL: [VerifyKind; 5] = [
        VerifyKind::Adjointness,
        VerifyKind::Energy,
        VerifyKind::Contractivity,
        VerifyKind::Convergence,
        VerifyKind::StrangSymmetry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VerifyKind::Adjointness => "adjointness",
            VerifyKind::Energy => "energy",
            VerifyKind::Contractivity => "contractivity",
            VerifyKind::Convergence => "convergence",
            VerifyKind::StrangSymmetry => "strang_symmetry",
        }
    }
}

impl FromStr for VerifyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown verification kind {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    Within(f64, f64),
}

impl Bound {
    pub fn holds(self, v: f64) -> bool {
        match self {
            Bound::AtMost(t) => v <= t,
            Bound::Within(lo, hi) => (lo..=hi).contains(&v),
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::AtMost(t) => write!(f, "<= {t:.1e}"),
            Bound::Within(lo, hi) => write!(f, "in [{lo}, {hi}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: Bound,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, bound: Bound) -> Self {
        Self {
            name: name.into(),
            measured,
            bound,
        }
    }

    pub fn passed(&self) -> bool {
        self.bound.holds(self.measured)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {:.6e} ({})", self.name, self.measured, self.bound)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub kind: VerifyKind,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verify {}", self.kind.name())?;
        for n in &self.notes {
            writeln!(f, "  {n}")?;
        }
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

pub fn verify(kind: VerifyKind, cfg: &RunConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    match kind {
        VerifyKind::Adjointness => adjointness(cfg),
        VerifyKind::Energy => energy_audit(cfg),
        VerifyKind::Contractivity => contractivity(cfg),
        VerifyKind::Convergence => convergence(cfg),
        VerifyKind::StrangSymmetry => strang_symmetry(cfg),
    }
}

fn noise(rng: &mut ChaCha8Rng, nx: usize, nz: usize, scale: f64) -> ScalarField {
    let values = (0..nx * nz).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    ScalarField::from_vec(nx, nz, values).expect("sized")
}

/// Per-field magnitudes giving comparable energy density in every field.
pub fn balanced_amplitudes(p: &MaterialParams) -> [f64; 8] {
    let v = 1.0 / p.rho.sqrt();
    let q = (p.phi / p.rho_f).sqrt();
    let s = p.c11.sqrt();
    [v, v, q, q, p.biot_modulus.sqrt(), s, s, p.c55.sqrt()]
}

fn random_state(rng: &mut ChaCha8Rng, nx: usize, nz: usize, amps: [f64; 8]) -> WaveState {
    let mut s = WaveState::zeros(nx, nz);
    for (f, a) in s.fields_mut().into_iter().zip(amps) {
        *f = noise(rng, nx, nz, a);
    }
    s
}

/// Highest Fourier mode of the smooth test states: wavelengths of at least
/// 32 cells.
fn smooth_modes(grid: &SpectralGrid) -> usize {
    (grid.nx.min(grid.nz) / 32).max(1)
}

fn energy_norm(s: &WaveState, mat: &PoroelasticMaterial, grid: &SpectralGrid) -> f64 {
    energy_inner(s, s, mat, grid).sqrt()
}

/// `|⟨Ta, b⟩ + ⟨a, Tb⟩|` over the Cauchy–Schwarz bound of the two terms.
fn skew_defect(
    mat: &PoroelasticMaterial,
    grid: &SpectralGrid,
    rng: &mut ChaCha8Rng,
    amps: [f64; 8],
    trials: usize,
) -> Result<f64> {
    let (nx, nz) = (grid.nx, grid.nz);
    let mut op = ReversibleOperator::new(grid);
    let mut ta = WaveState::zeros(nx, nz);
    let mut tb = WaveState::zeros(nx, nz);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let a = random_state(rng, nx, nz, amps);
        let b = random_state(rng, nx, nz, amps);
        op.apply(&a, mat, grid, &mut ta)?;
        op.apply(&b, mat, grid, &mut tb)?;
        let lhs = energy_inner(&ta, &b, mat, grid) + energy_inner(&a, &tb, mat, grid);
        let scale = energy_norm(&ta, mat, grid) * energy_norm(&b, mat, grid)
            + energy_norm(&a, mat, grid) * energy_norm(&tb, mat, grid);
        worst = worst.max(lhs.abs() / scale);
    }
    Ok(worst)
}

fn adjointness(cfg: &RunConfig) -> Result<VerifyReport> {
    let g = &cfg.grid;
    let grid = SpectralGrid::new(g.nx, g.nz, g.dx, g.dz, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED);
    let mut checks = Vec::new();
    for axis in [Axis::X, Axis::Z] {
        let mut worst: f64 = 0.0;
        for _ in 0..ADJOINT_PAIRS {
            let f = noise(&mut rng, g.nx, g.nz, 1.0);
            let h = noise(&mut rng, g.nx, g.nz, 1.0);
            let df = grid.derivative(&f, axis, Stagger::Forward)?;
            let dh = grid.derivative(&h, axis, Stagger::Backward)?;
            let lhs = grid.inner_product(&df, &h)?;
            let rhs = -grid.inner_product(&f, &dh)?;
            let scale = grid.inner_product(&df, &df)?.sqrt() * grid.inner_product(&h, &h)?.sqrt();
            worst = worst.max((lhs - rhs).abs() / scale);
        }
        let name = match axis {
            Axis::X => "derivative pair x",
            Axis::Z => "derivative pair z",
        };
        checks.push(Check::new(name, worst, Bound::AtMost(ADJOINT_TOL)));
    }

    let first = &cfg.layers.iter().min_by_key(|l| l.z_begin).expect("validated").params;
    let amps = balanced_amplitudes(first);
    let homogeneous = build_material(
        &[Layer {
            z_begin: 0,
            z_end: g.nz,
            params: *first,
        }],
        g.nx,
        g.nz,
    )?;
    checks.push(Check::new(
        "T skew-adjoint, homogeneous",
        skew_defect(&homogeneous, &grid, &mut rng, amps, 10)?,
        Bound::AtMost(SKEW_TOL),
    ));
    if cfg.layers.len() > 1 {
        let layered = build_material(&cfg.layers, g.nx, g.nz)?;
        checks.push(Check::new(
            "T skew-adjoint, configured medium",
            skew_defect(&layered, &grid, &mut rng, amps, 10)?,
            Bound::AtMost(SKEW_TOL),
        ));
    }
    Ok(VerifyReport {
        kind: VerifyKind::Adjointness,
        checks,
        notes: vec![format!(
            "{ADJOINT_PAIRS} random pairs per axis, residual scaled by |D f| |g|, seed {VERIFY_SEED}"
        )],
    })
}

/// A copy of `cfg` with the taper off and, optionally, the viscosity zeroed.
fn audit_config(cfg: &RunConfig, lossless: bool) -> RunConfig {
    let mut c = cfg.clone();
    c.grid.taper_width = 0;
    c.receivers.clear();
    c.output = Default::default();
    if lossless {
        for l in &mut c.layers {
            l.params.eta = 0.0;
        }
    }
    c
}

/// Energy after every step. Starts from a smooth state when the config has
/// no sources; returns the series and the index of the first step after
/// every wavelet has ended.
fn energy_series(sim: &Simulation) -> Result<(Vec<f64>, usize)> {
    let (nx, nz) = (sim.grid.nx, sim.grid.nz);
    let mut state = if sim.sources.is_empty() {
        let p = sim.mat.params_at(0, 0);
        smooth_state(nx, nz, smooth_modes(&sim.grid), balanced_amplitudes(p), VERIFY_SEED)
    } else {
        WaveState::zeros(nx, nz)
    };
    let quiet_after = sim
        .sources
        .iter()
        .map(|s| s.spec.wavelet.end_time())
        .fold(0.0, f64::max);
    let mut series = vec![energy(&state, &sim.mat, &sim.grid)];
    let mut prop = sim.propagator()?;
    prop.run(&mut state, 0.0, sim.plan.n_steps, |_, _, s| {
        series.push(energy(s, &sim.mat, &sim.grid));
        Ok(())
    })?;
    let first_quiet = (quiet_after / sim.plan.dt).ceil() as usize;
    Ok((series, first_quiet))
}

fn energy_audit(cfg: &RunConfig) -> Result<VerifyReport> {
    let sim = Simulation::new(&audit_config(cfg, true))?;
    let (series, start) = energy_series(&sim)?;
    if start + 1 >= series.len() {
        return Err(Error::Config(format!(
            "n_steps must exceed the source window ({start} steps)"
        )));
    }
    let e0 = series[start];
    let drift = series[start..]
        .iter()
        .map(|e| ((e - e0) / e0).abs())
        .fold(0.0, f64::max);
    Ok(VerifyReport {
        kind: VerifyKind::Energy,
        checks: vec![Check::new("relative energy drift", drift, Bound::AtMost(DRIFT_TOL))],
        notes: vec![format!(
            "viscosity and taper off; {} steps measured from step {start}, dt = {:.6e} s",
            series.len() - 1 - start,
            sim.plan.dt
        )],
    })
}

fn contractivity(cfg: &RunConfig) -> Result<VerifyReport> {
    let sim = Simulation::new(&audit_config(cfg, false))?;
    let (series, start) = energy_series(&sim)?;
    let growth = series[start.min(series.len() - 1)..]
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .fold(f64::NEG_INFINITY, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED);
    let mat = if sim.mat.is_lossless() {
        sim.mat.with_viscosity(1e-3)?
    } else {
        sim.mat.clone()
    };
    let drag = DragFlowTables::new(&mat);
    let amps = balanced_amplitudes(mat.params_at(0, 0));
    let (nx, nz) = (sim.grid.nx, sim.grid.nz);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..DRAG_SAMPLES {
        let mut s = random_state(&mut rng, nx, nz, amps);
        let dt = 10f64.powf(rng.random_range(-8.0..0.0));
        let e0 = energy(&s, &mat, &sim.grid);
        drag.apply(&mut s, dt);
        worst = worst.max((energy(&s, &mat, &sim.grid) - e0) / e0);
    }
    Ok(VerifyReport {
        kind: VerifyKind::Contractivity,
        checks: vec![
            Check::new("max per-step energy growth", growth, Bound::AtMost(STEP_GROWTH_TOL)),
            Check::new("drag flow energy growth", worst, Bound::AtMost(DRAG_ROUNDING_TOL)),
        ],
        notes: vec![format!(
            "taper off; steps audited from {start}; {DRAG_SAMPLES} random drag samples, dt log-uniform in [1e-8, 1] s"
        )],
    })
}

/// Evolves `s0` without sources or taper to `n · dt` with `scheme`.
fn evolve(
    mat: &PoroelasticMaterial,
    grid: &SpectralGrid,
    s0: &WaveState,
    dt: f64,
    n: usize,
    scheme: Scheme,
) -> Result<WaveState> {
    let mut plan = StepPlan::with_dt(grid, mat, dt.abs(), scheme, n)?;
    if dt < 0.0 {
        plan = plan.time_reversed();
    }
    plan.taper_enabled = false;
    let mut prop = Propagator::new(mat, grid, plan, Vec::new())?;
    let mut s = s0.clone();
    let t0 = if dt < 0.0 { n as f64 * -dt } else { 0.0 };
    prop.run(&mut s, t0, n, |_, _, _| Ok(()))?;
    Ok(s)
}

/// Least-squares slope of `log err` against `log dt`.
pub fn fitted_slope(dts: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = dts.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn convergence(cfg: &RunConfig) -> Result<VerifyReport> {
    let sim = Simulation::new(&audit_config(cfg, false))?;
    let (grid, mat) = (&sim.grid, &sim.mat);
    let s0 = smooth_state(grid.nx, grid.nz, smooth_modes(grid), balanced_amplitudes(mat.params_at(0, 0)), VERIFY_SEED);
    let n = sim.plan.n_steps;
    let dt = sim.plan.dt;
    let r = REFERENCE_REFINEMENT;
    let reference = evolve(mat, grid, &s0, dt / r as f64, n * r, Scheme::Strang)?;
    let ref_norm = energy_norm(&reference, mat, grid);
    let dts = [dt, dt / 2.0, dt / 4.0];
    let mut checks = Vec::new();
    let mut notes = vec![format!(
        "T = {:.6e} s, coarse dt = {dt:.6e} s, reference Strang at dt/{r}",
        n as f64 * dt
    )];
    for (scheme, bound) in [(Scheme::Strang, STRANG_SLOPE), (Scheme::Lie, LIE_SLOPE)] {
        let mut errs = Vec::new();
        for (k, &h) in dts.iter().enumerate() {
            let s = evolve(mat, grid, &s0, h, n << k, scheme)?;
            let mut d = s;
            d.axpy(-1.0, &reference)?;
            errs.push(energy_norm(&d, mat, grid) / ref_norm);
        }
        let listed: Vec<String> = errs.iter().map(|e| format!("{e:.3e}")).collect();
        notes.push(format!("{scheme:?} errors: {}", listed.join(", ")));
        checks.push(Check::new(
            format!("{scheme:?} convergence slope"),
            fitted_slope(&dts, &errs),
            Bound::Within(bound.0, bound.1),
        ));
    }
    Ok(VerifyReport {
        kind: VerifyKind::Convergence,
        checks,
        notes,
    })
}

fn strang_symmetry(cfg: &RunConfig) -> Result<VerifyReport> {
    let sim = Simulation::new(&audit_config(cfg, true))?;
    let (grid, mat) = (&sim.grid, &sim.mat);
    let s0 = smooth_state(grid.nx, grid.nz, smooth_modes(grid), balanced_amplitudes(mat.params_at(0, 0)), VERIFY_SEED);
    let n = sim.plan.n_steps;
    let fwd = evolve(mat, grid, &s0, sim.plan.dt, n, Scheme::Strang)?;
    let back = evolve(mat, grid, &fwd, -sim.plan.dt, n, Scheme::Strang)?;
    let mut d = back;
    d.axpy(-1.0, &s0)?;
    let rel = energy_norm(&d, mat, grid) / energy_norm(&s0, mat, grid);
    Ok(VerifyReport {
        kind: VerifyKind::StrangSymmetry,
        checks: vec![Check::new("forward-backward defect", rel, Bound::AtMost(REVERSAL_TOL))],
        notes: vec![format!(
            "{n} steps each way, viscosity and taper off, smooth modes |m| <= {}",
            smooth_modes(grid)
        )],
    })
}

//! The simulation driver.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::Result;
use crate::excitation::{record, PlacedReceiver, PlacedSource, TraceSet};
use crate::grid::SpectralGrid;
use crate::harness::config::RunConfig;
use crate::integrator::{Propagator, StepPlan};
use crate::material::{build_material, PoroelasticMaterial};
use crate::state::{energy, write_snapshot, WaveState, FIELD_NAMES};

/// A validated configuration with its grid, material and step plan built.
pub struct Simulation {
    pub config: RunConfig,
    pub grid: SpectralGrid,
    pub mat: PoroelasticMaterial,
    pub plan: StepPlan,
    pub sources: Vec<PlacedSource>,
    pub receivers: Vec<PlacedReceiver>,
}

impl Simulation {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let g = &config.grid;
        let grid = SpectralGrid::new(g.nx, g.nz, g.dx, g.dz, g.taper_width)?;
        let mat = build_material(&config.layers, g.nx, g.nz)?;
        let t = &config.time;
        let mut plan = match (t.cfl, t.dt) {
            (Some(cfl), _) => StepPlan::from_cfl(&grid, &mat, cfl, t.scheme, t.n_steps)?,
            (None, Some(dt)) => StepPlan::with_dt(&grid, &mat, dt, t.scheme, t.n_steps)?,
            (None, None) => unreachable!("validated"),
        };
        if let Some(f) = t.guard_factor {
            plan.guard_factor = f;
        }
        if let Some(w) = t.guard_window {
            plan.guard_window = w;
        }
        let sources = config
            .sources
            .iter()
            .map(|s| PlacedSource::new(*s, &grid))
            .collect::<Result<_>>()?;
        let receivers = config
            .receivers
            .iter()
            .map(|r| PlacedReceiver::new(r.clone(), &grid))
            .collect::<Result<_>>()?;
        Ok(Self {
            config: config.clone(),
            grid,
            mat,
            plan,
            sources,
            receivers,
        })
    }

    pub fn propagator(&self) -> Result<Propagator<'_>> {
        Propagator::new(&self.mat, &self.grid, self.plan, self.sources.clone())
    }

    pub fn source_description(&self) -> String {
        if self.sources.is_empty() {
            return "none".to_string();
        }
        let parts: Vec<String> = self.sources.iter().map(|s| s.spec.describe()).collect();
        parts.join(" + ")
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub traces: TraceSet,
    /// `(step, time, energy)`; step 0 is the initial state.
    pub energy: Vec<(usize, f64, f64)>,
    pub dt: f64,
    pub cfl: f64,
    pub max_wave_speed: f64,
    pub snapshots: Vec<PathBuf>,
    pub final_state: WaveState,
    pub log: String,
}

/// Runs the time loop from rest, writing whatever outputs the config names.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let sim = Simulation::new(config)?;
    run_simulation(&sim)
}

pub fn run_simulation(sim: &Simulation) -> Result<RunOutput> {
    let cfg = &sim.config;
    let out = &cfg.output;
    let (nx, nz) = (sim.grid.nx, sim.grid.nz);
    let v_max = sim.mat.max_wave_speed();
    let mut log = String::new();
    let _ = writeln!(log, "grid={nx}x{nz} dx={} dz={} taper_width={}", sim.grid.dx, sim.grid.dz, sim.grid.taper_width);
    let _ = writeln!(log, "scheme={:?} n_steps={}", sim.plan.scheme, sim.plan.n_steps);
    let _ = writeln!(log, "dt={:.16e}", sim.plan.dt);
    let _ = writeln!(log, "cfl={:.6}", sim.plan.cfl);
    let _ = writeln!(log, "max_wave_speed={:.16e}", v_max);
    let _ = writeln!(log, "source={}", sim.source_description());
    log::info!("dt = {:.6e} s, cfl = {:.3}, v_max = {:.1} m/s", sim.plan.dt, sim.plan.cfl, v_max);

    let fields: Vec<&str> = if out.snapshot_fields.is_empty() {
        FIELD_NAMES.to_vec()
    } else {
        out.snapshot_fields.iter().map(String::as_str).collect()
    };
    let mut traces = TraceSet::new(sim.plan.dt, sim.receivers.clone(), sim.source_description());
    let mut state = WaveState::zeros(nx, nz);
    let mut series = vec![(0, 0.0, energy(&state, &sim.mat, &sim.grid))];
    let mut snapshots = Vec::new();
    let mut prop = sim.propagator()?;

    let _ = writeln!(log, "step time energy");
    let _ = writeln!(log, "0 0 {:.16e}", series[0].2);
    let result = prop.run(&mut state, 0.0, sim.plan.n_steps, |step, t, s| {
        record(s, &mut traces);
        if out.energy_stride > 0 && step % out.energy_stride == 0 {
            let e = energy(s, &sim.mat, &sim.grid);
            series.push((step, t, e));
            let _ = writeln!(log, "{step} {t:.16e} {e:.16e}");
        }
        if out.snapshot_stride > 0 && step % out.snapshot_stride == 0 {
            let dir = out.snapshot_dir.as_deref().expect("validated");
            for name in &fields {
                let f = s.field(name).expect("validated");
                snapshots.push(write_snapshot(dir, name, f, step, t, &sim.grid)?);
            }
        }
        Ok(())
    });
    if let Err(e) = &result {
        let _ = writeln!(log, "error: {e}");
    }
    if let Some(path) = &out.log_path {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, &log)?;
    }
    result?;
    if let Some(path) = &out.trace_path {
        traces.write_csv(path, &[])?;
    }
    Ok(RunOutput {
        traces,
        energy: series,
        dt: sim.plan.dt,
        cfl: sim.plan.cfl,
        max_wave_speed: v_max,
        snapshots,
        final_state: state,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excitation::Wavelet;
    use crate::harness::config::tests::SAMPLE;
    use crate::state::read_snapshot;

    fn sample() -> RunConfig {
        RunConfig::from_toml_str(SAMPLE).unwrap()
    }

    #[test]
    fn zero_amplitude_source_gives_zero_traces() {
        let mut cfg = sample();
        cfg.sources[0].wavelet = Wavelet::Ricker { f0: 0.08, t0: 15.0, amp: 0.0 };
        let out = run(&cfg).unwrap();
        assert_eq!(out.traces.n_steps(), 20);
        assert!(out.traces.samples.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn writes_traces_snapshots_and_log() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = sample();
        cfg.output.trace_path = Some(dir.path().join("t/traces.csv"));
        cfg.output.snapshot_dir = Some(dir.path().join("snaps"));
        cfg.output.snapshot_stride = 10;
        cfg.output.snapshot_fields = vec!["p".into(), "vz".into()];
        cfg.output.log_path = Some(dir.path().join("run.log"));
        let out = run(&cfg).unwrap();
        assert_eq!(out.snapshots.len(), 4);
        let (meta, f) = read_snapshot(&dir.path().join("snaps/p_000020.bin")).unwrap();
        assert_eq!(meta.step, 20);
        assert_eq!(f.values, out.final_state.p.values);
        let log = std::fs::read_to_string(dir.path().join("run.log")).unwrap();
        assert!(log.contains("max_wave_speed="));
        assert_eq!(log.lines().filter(|l| l.starts_with("20 ")).count(), 1);
        let traces = std::fs::read(dir.path().join("t/traces.csv")).unwrap();
        // whole-pipeline determinism
        let again = run(&cfg).unwrap();
        assert_eq!(std::fs::read(dir.path().join("t/traces.csv")).unwrap(), traces);
        assert_eq!(again.final_state, out.final_state);
    }
}

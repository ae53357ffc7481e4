//! Cross-component source/receiver reciprocity, `G_zx(b, a) = G_xz(a, b)`.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::excitation::{snap_to, Channel, SourceKind, TraceSet};
use crate::harness::config::RunConfig;
use crate::harness::metrics::relative_l2;
use crate::harness::run::{run_simulation, Simulation};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct ReciprocityReport {
    pub dt: f64,
    /// `vz` at `r_b` from an x force at `r_a`.
    pub g_zx: Vec<f64>,
    /// `vx` at `r_a` from a z force at `r_b`.
    pub g_xz: Vec<f64>,
    pub window: [f64; 2],
    pub window_samples: Range<usize>,
    /// Normalized by leg 1.
    pub misfit: f64,
    /// Normalized by leg 2.
    pub misfit_swapped: f64,
    pub traces: TraceSet,
}

impl ReciprocityReport {
    pub fn summary(&self) -> String {
        format!(
            "window=[{:.6e}, {:.6e}] s ({} samples) misfit={:.6e} misfit_swapped={:.6e}",
            self.window[0],
            self.window[1],
            self.window_samples.len(),
            self.misfit,
            self.misfit_swapped
        )
    }
}

fn mismatch(msg: impl Into<String>) -> Error {
    Error::ConfigMismatch(msg.into())
}

/// Physical position of the node `(i, j)` on a lattice offset by `off` cells.
fn node_position(cfg: &RunConfig, (i, j): (usize, usize), off: (f64, f64)) -> (f64, f64) {
    ((i as f64 + off.0) * cfg.grid.dx, (j as f64 + off.1) * cfg.grid.dz)
}

/// Checks the two legs form the allowed swap; returns the `r_a` (x-face)
/// and `r_b` (z-face) nodes.
fn check_legs(leg1: &RunConfig, leg2: &RunConfig) -> Result<((usize, usize), (usize, usize))> {
    if leg1.grid != leg2.grid {
        return Err(mismatch("grids differ"));
    }
    if leg1.time != leg2.time {
        return Err(mismatch("time blocks differ"));
    }
    if leg1.layers != leg2.layers {
        return Err(mismatch("media differ"));
    }
    for (n, l) in [(1, leg1), (2, leg2)] {
        if l.sources.len() != 1 || l.receivers.len() != 1 {
            return Err(mismatch(format!("leg {n} needs exactly one source and one receiver")));
        }
    }
    let (s1, s2) = (&leg1.sources[0], &leg2.sources[0]);
    if s1.wavelet != s2.wavelet {
        return Err(mismatch("wavelets differ"));
    }
    let (SourceKind::BodyForce { fx, fz: 0.0 }, SourceKind::BodyForce { fx: 0.0, fz }) = (s1.kind, s2.kind) else {
        return Err(mismatch("leg 1 needs an x force and leg 2 a z force"));
    };
    if fx != fz {
        return Err(mismatch(format!("force magnitudes differ: {fx} vs {fz}")));
    }
    let (r1, r2) = (&leg1.receivers[0], &leg2.receivers[0]);
    if r1.channel != Channel::Vz || r2.channel != Channel::Vx {
        return Err(mismatch("leg 1 must record vz and leg 2 vx"));
    }
    let g = &leg1.grid;
    let snap = |x, z, off| snap_to(x, z, (g.dx, g.dz), (g.nx, g.nz), off);
    let a_src = snap(s1.x, s1.z, Channel::Vx.offset())?;
    let a_rec = snap(r2.x, r2.z, Channel::Vx.offset())?;
    let b_src = snap(s2.x, s2.z, Channel::Vz.offset())?;
    let b_rec = snap(r1.x, r1.z, Channel::Vz.offset())?;
    if a_src != a_rec {
        return Err(mismatch(format!("r_a differs between legs: {a_src:?} vs {a_rec:?}")));
    }
    if b_src != b_rec {
        return Err(mismatch(format!("r_b differs between legs: {b_src:?} vs {b_rec:?}")));
    }
    Ok((a_src, b_src))
}

/// End of the window before any energy from the taper edges or the
/// periodic images can reach `r_b` from `r_a`.
///
/// Uses the shortest path mirrored in an inner taper edge or wrapped
/// through the period, at the bounding speed, minus the wavelet's lead time.
pub fn reflection_free_end(cfg: &RunConfig, a: (f64, f64), b: (f64, f64), v_max: f64) -> f64 {
    let g = &cfg.grid;
    let (lx, lz) = (g.nx as f64 * g.dx, g.nz as f64 * g.dz);
    let w = g.taper_width as f64;
    let mut images = vec![
        (b.0 + lx, b.1),
        (b.0 - lx, b.1),
        (b.0, b.1 + lz),
        (b.0, b.1 - lz),
    ];
    if g.taper_width > 0 {
        // first tapered nodes on each side
        let (x_lo, x_hi) = ((w - 1.0) * g.dx, (g.nx as f64 - w) * g.dx);
        let (z_lo, z_hi) = ((w - 1.0) * g.dz, (g.nz as f64 - w) * g.dz);
        images.extend([
            (2.0 * x_lo - b.0, b.1),
            (2.0 * x_hi - b.0, b.1),
            (b.0, 2.0 * z_lo - b.1),
            (b.0, 2.0 * z_hi - b.1),
        ]);
    }
    let d = images
        .iter()
        .map(|p| ((p.0 - a.0).powi(2) + (p.1 - a.1).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min);
    let wavelet = cfg.sources.first().map(|s| s.wavelet);
    let lead = wavelet.map_or(0.0, |w| w.delay() - 1.5 / w.peak_frequency());
    lead + d / v_max
}

/// Runs both legs (concurrently) and compares their traces.
pub fn reciprocity_test(
    leg1: &RunConfig,
    leg2: &RunConfig,
    window: Option<[f64; 2]>,
) -> Result<ReciprocityReport> {
    let (a, b) = check_legs(leg1, leg2)?;
    let sim1 = Simulation::new(leg1)?;
    let sim2 = Simulation::new(leg2)?;
    let (o1, o2) = par::join(|| run_simulation(&sim1), || run_simulation(&sim2));
    let (o1, o2) = (o1?, o2?);
    let dt = o1.dt;
    let window = window.unwrap_or_else(|| {
        let pa = node_position(leg1, a, Channel::Vx.offset());
        let pb = node_position(leg1, b, Channel::Vz.offset());
        [0.0, reflection_free_end(leg1, pa, pb, o1.max_wave_speed)]
    });
    let n = o1.traces.n_steps();
    let window_samples = (0..n)
        .position(|k| o1.traces.time(k) >= window[0])
        .unwrap_or(n)
        ..(0..n).take_while(|&k| o1.traces.time(k) <= window[1]).count();
    if window_samples.is_empty() {
        log::warn!("reciprocity window [{}, {}] holds no samples", window[0], window[1]);
    }
    let g_zx = o1.traces.samples[0].clone();
    let g_xz = o2.traces.samples[0].clone();
    let misfit = relative_l2(&g_zx, &g_xz, window_samples.clone())?;
    let misfit_swapped = relative_l2(&g_xz, &g_zx, window_samples.clone())?;
    let mut receivers = o1.traces.receivers.clone();
    receivers.extend(o2.traces.receivers.iter().cloned());
    let traces = TraceSet {
        dt,
        receivers,
        source: format!("leg1: {}; leg2: {}", o1.traces.source, o2.traces.source),
        samples: vec![g_zx.clone(), g_xz.clone()],
    };
    Ok(ReciprocityReport {
        dt,
        g_zx,
        g_xz,
        window,
        window_samples,
        misfit,
        misfit_swapped,
        traces,
    })
}

/// Reciprocity test from a config's `[reciprocity]` block; writes both
/// traces to `output.trace_path` when set.
pub fn run_reciprocity(cfg: &RunConfig) -> Result<ReciprocityReport> {
    cfg.validate()?;
    let (leg1, leg2) = cfg.reciprocity_legs()?;
    let window = cfg.reciprocity.as_ref().and_then(|r| r.window);
    let report = reciprocity_test(&leg1, &leg2, window)?;
    if let Some(path) = &cfg.output.trace_path {
        report.traces.write_csv(
            path,
            &[
                ("window_start", format!("{:.16e}", report.window[0])),
                ("window_end", format!("{:.16e}", report.window[1])),
                ("misfit", format!("{:.16e}", report.misfit)),
                ("misfit_swapped", format!("{:.16e}", report.misfit_swapped)),
            ],
        )?;
    }
    Ok(report)
}

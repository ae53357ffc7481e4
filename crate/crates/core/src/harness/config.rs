//! TOML run configuration.
//!
//! ```toml
//! [grid]
//! nx = 128
//! nz = 128
//! dx = 2.0
//! dz = 2.0
//! taper_width = 20
//!
//! [time]
//! scheme = "strang"
//! cfl = 0.4            # or: dt = 1e-4
//! n_steps = 1500
//!
//! [[layers]]
//! z_begin = 0
//! z_end = 128
//! c11 = 12e9
//! # ... every MaterialParams field
//!
//! [[sources]]
//! kind = "moment_tensor"
//! mxx = 1.0
//! mzz = 1.0
//! mxz = 0.0
//! x = 128.0
//! z = 128.0
//! [sources.wavelet]
//! type = "ricker"
//! f0 = 40.0
//! t0 = 0.03
//! amp = 1.0
//!
//! [[receivers]]
//! channel = "p"
//! x = 200.0
//! z = 128.0
//! label = "r0"
//!
//! [output]
//! trace_path = "out/traces.csv"
//! snapshot_stride = 100
//! snapshot_dir = "out/snapshots"
//! log_path = "out/run.log"
//! ```
//!
//! Relative output paths resolve against the current directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::{snap_to, Channel, ReceiverSpec, SourceKind, SourceSpec, Wavelet};
use crate::integrator::Scheme;
use crate::material::{Layer, MaterialParams};
use crate::state::FIELD_NAMES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub nz: usize,
    pub dx: f64,
    pub dz: f64,
    pub taper_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub scheme: Scheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub n_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard_window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<PathBuf>,
    /// Steps between snapshots; 0 disables them.
    #[serde(default)]
    pub snapshot_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_dir: Option<PathBuf>,
    /// Fields to snapshot; all eight when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot_fields: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_path: Option<PathBuf>,
    /// Steps between energy log entries; 0 disables the series.
    #[serde(default = "one")]
    pub energy_stride: usize,
}

fn one() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            trace_path: None,
            snapshot_stride: 0,
            snapshot_dir: None,
            snapshot_fields: Vec::new(),
            log_path: None,
            energy_stride: 1,
        }
    }
}

/// Source/receiver swap for the cross-component reciprocity test.
///
/// Leg 1 applies an x force at `r_a` and records `vz` at `r_b`; leg 2
/// applies a z force at `r_b` and records `vx` at `r_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReciprocityConfig {
    pub r_a: [f64; 2],
    pub r_b: [f64; 2],
    pub force: f64,
    pub wavelet: Wavelet,
    /// `[start, end]` in seconds; defaults to the reflection-free window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub layers: Vec<Layer>,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub receivers: Vec<ReceiverSpec>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reciprocity: Option<ReciprocityConfig>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    /// Parses and validates.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| bad(e.to_string()))
    }

    /// Largest fast-P speed bound over the layers, from the raw parameters.
    fn speed_bounds(&self) -> (f64, f64) {
        let mut vmax: f64 = 0.0;
        let mut vmin = f64::INFINITY;
        for l in &self.layers {
            let p = &l.params;
            let m_min = p.inertial_coupling().0.min(p.inertial_coupling().1);
            let a = p.alpha1.abs().max(p.alpha3.abs());
            let rho_eff = (p.rho - p.rho_f * p.rho_f / m_min).min(p.rho);
            vmax = vmax.max(((p.c11.max(p.c33) + a * a * p.biot_modulus) / rho_eff).sqrt());
            vmin = vmin.min((p.c55 / p.rho).sqrt());
        }
        (vmin, vmax)
    }

    /// Schema checks that need no field allocation.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        for (name, n) in [("nx", g.nx), ("nz", g.nz)] {
            if n < 16 || n % 2 != 0 {
                return Err(bad(format!("grid.{name} must be even and >= 16, got {n}")));
            }
        }
        if !(g.dx > 0.0 && g.dx.is_finite() && g.dz > 0.0 && g.dz.is_finite()) {
            return Err(bad("grid spacings must be positive"));
        }
        if 2 * g.taper_width >= g.nx.min(g.nz) {
            return Err(bad("taper_width leaves no interior"));
        }

        let t = &self.time;
        match (t.cfl, t.dt) {
            (Some(c), None) if c > 0.0 && c <= 1.0 => {}
            (Some(c), None) => return Err(bad(format!("time.cfl must lie in (0, 1], got {c}"))),
            (None, Some(dt)) if dt > 0.0 && dt.is_finite() => {}
            (None, Some(dt)) => return Err(bad(format!("time.dt must be positive, got {dt}"))),
            _ => return Err(bad("give exactly one of time.cfl and time.dt")),
        }
        if t.n_steps == 0 {
            return Err(bad("time.n_steps must be positive"));
        }
        if let Some(f) = t.guard_factor {
            if f.is_nan() || f <= 1.0 {
                return Err(bad("time.guard_factor must exceed 1"));
            }
        }

        if self.layers.is_empty() {
            return Err(bad("at least one layer is required"));
        }
        let mut spans: Vec<(usize, usize)> = self.layers.iter().map(|l| (l.z_begin, l.z_end)).collect();
        spans.sort_unstable();
        let mut z = 0;
        for (b, e) in spans {
            if b != z || e <= b {
                return Err(bad(format!("layers must tile rows 0..{} without gaps or overlap", g.nz)));
            }
            z = e;
        }
        if z != g.nz {
            return Err(bad(format!("layers end at row {z}, grid has {}", g.nz)));
        }
        for (k, l) in self.layers.iter().enumerate() {
            l.params.validate(k)?;
        }

        let dims = (g.nx, g.nz);
        let spacing = (g.dx, g.dz);
        let (vmin, _) = self.speed_bounds();
        let f_max = vmin / (3.0 * g.dx.max(g.dz));
        for s in &self.sources {
            snap_to(s.x, s.z, spacing, dims, (0.0, 0.0))?;
            check_wavelet(&s.wavelet, f_max)?;
        }
        for r in &self.receivers {
            let (i, j) = snap_to(r.x, r.z, spacing, dims, r.channel.offset())?;
            let w = g.taper_width;
            if i < w || i >= g.nx - w || j < w || j >= g.nz - w {
                return Err(bad(format!("receiver {} lies in the taper layer", r.label)));
            }
        }
        let mut labels: Vec<&str> = self.receivers.iter().map(|r| r.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(bad("receiver labels must be unique"));
        }
        for f in &self.output.snapshot_fields {
            if !FIELD_NAMES.contains(&f.as_str()) {
                return Err(bad(format!("unknown snapshot field {f}")));
            }
        }
        if self.output.snapshot_stride > 0 && self.output.snapshot_dir.is_none() {
            return Err(bad("snapshot_stride needs output.snapshot_dir"));
        }
        if let Some(r) = &self.reciprocity {
            check_wavelet(&r.wavelet, f_max)?;
            for (name, [x, z], off) in [("r_a", r.r_a, (0.5, 0.0)), ("r_b", r.r_b, (0.0, 0.5))] {
                let (i, j) = snap_to(x, z, spacing, dims, off)?;
                let w = g.taper_width;
                if i < w || i >= g.nx - w || j < w || j >= g.nz - w {
                    return Err(bad(format!("reciprocity.{name} lies in the taper layer")));
                }
            }
            if let Some([a, b]) = r.window {
                if !(a >= 0.0 && b > a) {
                    return Err(bad("reciprocity.window must satisfy 0 <= start < end"));
                }
            }
        }
        Ok(())
    }

    /// The two legs described by the `[reciprocity]` block.
    pub fn reciprocity_legs(&self) -> Result<(RunConfig, RunConfig)> {
        let r = self
            .reciprocity
            .as_ref()
            .ok_or_else(|| bad("missing [reciprocity] block"))?;
        let leg = |force: SourceKind, at: [f64; 2], channel: Channel, rec: [f64; 2], label: &str| {
            let mut c = self.clone();
            c.reciprocity = None;
            c.sources = vec![SourceSpec {
                kind: force,
                x: at[0],
                z: at[1],
                wavelet: r.wavelet,
            }];
            c.receivers = vec![ReceiverSpec {
                channel,
                x: rec[0],
                z: rec[1],
                label: label.to_string(),
            }];
            c.output.trace_path = None;
            c.output.snapshot_stride = 0;
            c.output.log_path = None;
            c
        };
        Ok((
            leg(SourceKind::BodyForce { fx: r.force, fz: 0.0 }, r.r_a, Channel::Vz, r.r_b, "g_zx"),
            leg(SourceKind::BodyForce { fx: 0.0, fz: r.force }, r.r_b, Channel::Vx, r.r_a, "g_xz"),
        ))
    }

    /// Material parameters of the layer covering row `j`.
    pub fn layer_at(&self, j: usize) -> Option<&MaterialParams> {
        self.layers
            .iter()
            .find(|l| l.z_begin <= j && j < l.z_end)
            .map(|l| &l.params)
    }
}

fn check_wavelet(w: &Wavelet, f_max: f64) -> Result<()> {
    let Wavelet::Ricker { f0, t0, amp } = *w;
    if !(f0 > 0.0 && f0.is_finite() && t0.is_finite() && amp.is_finite()) {
        return Err(bad(format!("bad wavelet parameters f0={f0}, t0={t0}, amp={amp}")));
    }
    if f0 > f_max {
        log::warn!("f0 = {f0} Hz exceeds the dealiased limit {f_max:.3e} Hz");
    }
    if t0 < 1.0 / f0 {
        log::warn!("t0 = {t0} s is shorter than 1/f0; the wavelet starts abruptly");
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
[grid]
nx = 32
nz = 32
dx = 1.0
dz = 1.0
taper_width = 4

[time]
scheme = "strang"
cfl = 0.4
n_steps = 20

[[layers]]
z_begin = 0
z_end = 16
c11 = 3.0
c13 = 1.0
c33 = 3.0
c55 = 1.0
alpha1 = 0.5
alpha3 = 0.5
biot_modulus = 2.0
rho = 2.0
rho_f = 1.0
phi = 0.5
t1 = 1.0
t3 = 1.0
k1 = 1.0
k3 = 1.0
eta = 0.1

[[layers]]
z_begin = 16
z_end = 32
c11 = 4.0
c13 = 1.0
c33 = 3.5
c55 = 1.2
alpha1 = 0.5
alpha3 = 0.4
biot_modulus = 2.0
rho = 2.2
rho_f = 1.0
phi = 0.4
t1 = 1.5
t3 = 2.0
k1 = 1.0
k3 = 0.5
eta = 0.1

[[sources]]
kind = "moment_tensor"
mxx = 1.0
mzz = 1.0
mxz = 0.0
x = 16.0
z = 12.0
[sources.wavelet]
type = "ricker"
f0 = 0.08
t0 = 15.0
amp = 1.0

[[receivers]]
channel = "p"
x = 20.0
z = 12.0
label = "p0"

[[receivers]]
channel = "vz"
x = 12.0
z = 20.0
label = "vz0"

[reciprocity]
r_a = [12.0, 12.0]
r_b = [20.0, 20.0]
force = 1.0
[reciprocity.wavelet]
type = "ricker"
f0 = 0.08
t0 = 15.0
amp = 1.0
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.layers.len(), 2);
        assert_eq!(cfg.sources[0].kind, SourceKind::MomentTensor { mxx: 1.0, mzz: 1.0, mxz: 0.0 });
        assert_eq!(cfg.receivers[1].channel, Channel::Vz);
        assert_eq!(cfg.output.energy_stride, 1);
        let text = cfg.to_toml_string().unwrap();
        let again = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(text, again.to_toml_string().unwrap());
    }

    fn edited(from: &str, to: &str) -> Result<RunConfig> {
        assert!(SAMPLE.contains(from));
        RunConfig::from_toml_str(&SAMPLE.replacen(from, to, 1))
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(edited("cfl = 0.4", "cfl = 1.5").is_err());
        assert!(edited("cfl = 0.4", "").is_err());
        assert!(edited("cfl = 0.4", "cfl = 0.4\ndt = 0.1").is_err());
        assert!(edited("z_end = 16", "z_end = 15").is_err());
        assert!(edited("nx = 32", "nx = 31").is_err());
        assert!(edited("x = 20.0", "x = 31.0").is_err());
        assert!(edited("x = 16.0", "x = -3.0").is_err());
        assert!(edited("phi = 0.5", "phi = 1.5").is_err());
        assert!(edited("label = \"vz0\"", "label = \"p0\"").is_err());
        assert!(edited("n_steps = 20", "n_steps = 20\nbogus = 1").is_err());
        assert!(edited("r_b = [20.0, 20.0]", "r_b = [30.0, 20.0]").is_err());
        assert!(edited("cfl = 0.4", "dt = 0.05").is_ok());
    }

    #[test]
    fn reciprocity_legs_swap_source_and_receiver() {
        let cfg = RunConfig::from_toml_str(SAMPLE).unwrap();
        let (a, b) = cfg.reciprocity_legs().unwrap();
        assert_eq!(a.sources[0].kind, SourceKind::BodyForce { fx: 1.0, fz: 0.0 });
        assert_eq!((a.sources[0].x, a.receivers[0].x), (12.0, 20.0));
        assert_eq!(b.sources[0].kind, SourceKind::BodyForce { fx: 0.0, fz: 1.0 });
        assert_eq!((b.sources[0].x, b.receivers[0].x), (20.0, 12.0));
        assert_eq!(a.layers, b.layers);
    }
}

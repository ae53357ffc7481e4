//! Point sources, half-kick injection and receiver traces.
//!
//! A source is a delta at one node scaled by `1/(ΔxΔz)`, snapped to the
//! lattice of the field it drives. Each kick adds `dt_half * w(t)` times the
//! source's channel vector:
//!
//! * moment tensor: `σ_ab += M_ab` (σ_xz on its corner node),
//! * body force: `v_i += m_i f_i / Δ_i`, `q_i -= ρ_f f_i / Δ_i`,
//! * volumetric rate `s`: `p += M s`, `σ_aa -= α_a M s`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpectralGrid;
use crate::material::PoroelasticMaterial;
use crate::state::WaveState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    MomentTensor { mxx: f64, mzz: f64, mxz: f64 },
    BodyForce { fx: f64, fz: f64 },
    Volumetric { amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Wavelet {
    Ricker { f0: f64, t0: f64, amp: f64 },
}

impl Wavelet {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Wavelet::Ricker { f0, t0, amp } => amp * ricker(t, f0, t0),
        }
    }

    pub fn peak_frequency(&self) -> f64 {
        match *self {
            Wavelet::Ricker { f0, .. } => f0,
        }
    }

    pub fn delay(&self) -> f64 {
        match *self {
            Wavelet::Ricker { t0, .. } => t0,
        }
    }

    /// Time after which the wavelet is negligible (`t0 + 6/f0`).
    pub fn end_time(&self) -> f64 {
        match *self {
            Wavelet::Ricker { f0, t0, .. } => t0 + 6.0 / f0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Wavelet::Ricker { f0, t0, amp } => Wavelet::Ricker {
                f0,
                t0,
                amp: amp * factor,
            },
        }
    }
}

/// Unit-peak Ricker wavelet `(1 - 2a) e^{-a}`, `a = (π f0 (t - t0))²`.
pub fn ricker(t: f64, f0: f64, t0: f64) -> f64 {
    let a = (std::f64::consts::PI * f0 * (t - t0)).powi(2);
    (1.0 - 2.0 * a) * (-a).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    #[serde(flatten)]
    pub kind: SourceKind,
    pub x: f64,
    pub z: f64,
    pub wavelet: Wavelet,
}

impl SourceSpec {
    pub fn describe(&self) -> String {
        let kind = match self.kind {
            SourceKind::MomentTensor { mxx, mzz, mxz } => {
                format!("moment_tensor(mxx={mxx},mzz={mzz},mxz={mxz})")
            }
            SourceKind::BodyForce { fx, fz } => format!("body_force(fx={fx},fz={fz})"),
            SourceKind::Volumetric { amplitude } => format!("volumetric(amplitude={amplitude})"),
        };
        let Wavelet::Ricker { f0, t0, amp } = self.wavelet;
        format!("{kind}@({},{}) ricker(f0={f0},t0={t0},amp={amp})", self.x, self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Vx,
    Vz,
    Qx,
    Qz,
    P,
}

impl Channel {
    /// Offset of the channel's lattice in cells.
    pub fn offset(self) -> (f64, f64) {
        match self {
            Channel::Vx | Channel::Qx => (0.5, 0.0),
            Channel::Vz | Channel::Qz => (0.0, 0.5),
            Channel::P => (0.0, 0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Vx => "vx",
            Channel::Vz => "vz",
            Channel::Qx => "qx",
            Channel::Qz => "qz",
            Channel::P => "p",
        }
    }

    fn sample(self, state: &WaveState, i: usize, j: usize) -> f64 {
        let f = match self {
            Channel::Vx => &state.vx,
            Channel::Vz => &state.vz,
            Channel::Qx => &state.qx,
            Channel::Qz => &state.qz,
            Channel::P => &state.p,
        };
        f.get(i, j)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverSpec {
    pub channel: Channel,
    pub x: f64,
    pub z: f64,
    pub label: String,
}

/// Nearest node of a lattice offset by `offset` cells.
pub fn snap(grid: &SpectralGrid, x: f64, z: f64, offset: (f64, f64)) -> Result<(usize, usize)> {
    snap_to(x, z, (grid.dx, grid.dz), (grid.nx, grid.nz), offset)
}

/// [`snap`] from raw grid dimensions.
pub fn snap_to(
    x: f64,
    z: f64,
    (dx, dz): (f64, f64),
    (nx, nz): (usize, usize),
    offset: (f64, f64),
) -> Result<(usize, usize)> {
    let (lx, lz) = (nx as f64 * dx, nz as f64 * dz);
    if !(x >= 0.0 && x < lx && z >= 0.0 && z < lz) {
        return Err(Error::PositionOutsideGrid { x, z });
    }
    let i = ((x / dx - offset.0).round() as i64).rem_euclid(nx as i64) as usize;
    let j = ((z / dz - offset.1).round() as i64).rem_euclid(nz as i64) as usize;
    Ok((i, j))
}

/// A source resolved to grid nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedSource {
    pub spec: SourceSpec,
    pub cell: (usize, usize),
    pub corner: (usize, usize),
    pub x_face: (usize, usize),
    pub z_face: (usize, usize),
}

impl PlacedSource {
    pub fn new(spec: SourceSpec, grid: &SpectralGrid) -> Result<Self> {
        Ok(Self {
            cell: snap(grid, spec.x, spec.z, (0.0, 0.0))?,
            corner: snap(grid, spec.x, spec.z, (0.5, 0.5))?,
            x_face: snap(grid, spec.x, spec.z, (0.5, 0.0))?,
            z_face: snap(grid, spec.x, spec.z, (0.0, 0.5))?,
            spec,
        })
    }

    /// Nodes this source writes to.
    pub fn nodes(&self) -> Vec<(usize, usize)> {
        match self.spec.kind {
            SourceKind::MomentTensor { mxz, .. } if mxz != 0.0 => vec![self.cell, self.corner],
            SourceKind::MomentTensor { .. } | SourceKind::Volumetric { .. } => vec![self.cell],
            SourceKind::BodyForce { fx, fz } => {
                let mut v = Vec::new();
                if fx != 0.0 {
                    v.push(self.x_face);
                }
                if fz != 0.0 {
                    v.push(self.z_face);
                }
                v
            }
        }
    }
}

/// Adds one impulse `dt_half * w(t)` of `src` to `state`.
pub fn half_kick(
    state: &mut WaveState,
    src: &PlacedSource,
    t: f64,
    dt_half: f64,
    mat: &PoroelasticMaterial,
    grid: &SpectralGrid,
) {
    let w = src.spec.wavelet.eval(t);
    if w == 0.0 {
        return;
    }
    let scale = dt_half * w / grid.cell_area();
    let nx = grid.nx;
    match src.spec.kind {
        SourceKind::MomentTensor { mxx, mzz, mxz } => {
            let (i, j) = src.cell;
            state.sxx.values[j * nx + i] += scale * mxx;
            state.szz.values[j * nx + i] += scale * mzz;
            if mxz != 0.0 {
                let (i, j) = src.corner;
                state.sxz.values[j * nx + i] += scale * mxz;
            }
        }
        SourceKind::BodyForce { fx, fz } => {
            if fx != 0.0 {
                let (i, j) = src.x_face;
                let k = j * nx + i;
                let b = &mat.x_face;
                state.vx.values[k] += scale * b.m[k] * fx / b.delta[k];
                state.qx.values[k] -= scale * b.rho_f[k] * fx / b.delta[k];
            }
            if fz != 0.0 {
                let (i, j) = src.z_face;
                let k = j * nx + i;
                let b = &mat.z_face;
                state.vz.values[k] += scale * b.m[k] * fz / b.delta[k];
                state.qz.values[k] -= scale * b.rho_f[k] * fz / b.delta[k];
            }
        }
        SourceKind::Volumetric { amplitude } => {
            let (i, j) = src.cell;
            let k = j * nx + i;
            let c = &mat.center;
            let rate = scale * amplitude * c.modulus[k];
            state.p.values[k] += rate;
            state.sxx.values[k] -= c.alpha1[k] * rate;
            state.szz.values[k] -= c.alpha3[k] * rate;
        }
    }
}

/// A receiver resolved to its channel's node.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedReceiver {
    pub spec: ReceiverSpec,
    pub node: (usize, usize),
}

impl PlacedReceiver {
    pub fn new(spec: ReceiverSpec, grid: &SpectralGrid) -> Result<Self> {
        let node = snap(grid, spec.x, spec.z, spec.channel.offset())?;
        Ok(Self { spec, node })
    }

    pub fn sample(&self, state: &WaveState) -> f64 {
        self.spec.channel.sample(state, self.node.0, self.node.1)
    }
}

/// Receiver recordings of one run, one sample per completed step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub dt: f64,
    pub receivers: Vec<PlacedReceiver>,
    pub source: String,
    pub samples: Vec<Vec<f64>>,
}

impl TraceSet {
    pub fn new(dt: f64, receivers: Vec<PlacedReceiver>, source: String) -> Self {
        let samples = vec![Vec::new(); receivers.len()];
        Self {
            dt,
            receivers,
            source,
            samples,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Sample time of entry `n` (the state after step `n + 1`).
    pub fn time(&self, n: usize) -> f64 {
        (n + 1) as f64 * self.dt
    }

    pub fn trace(&self, label: &str) -> Option<&[f64]> {
        self.receivers
            .iter()
            .position(|r| r.spec.label == label)
            .map(|k| self.samples[k].as_slice())
    }

    /// CSV with `key=value` header lines followed by `time,ch1,ch2,...` rows.
    pub fn to_csv(&self, extra: &[(&str, String)]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dt={:.16e}", self.dt);
        let _ = writeln!(s, "n_steps={}", self.n_steps());
        let _ = writeln!(s, "source={}", self.source);
        let _ = writeln!(s, "receivers={}", self.receivers.len());
        for (k, r) in self.receivers.iter().enumerate() {
            let _ = writeln!(
                s,
                "receiver.{k}={};{};{:.16e};{:.16e};{};{}",
                r.spec.label,
                r.spec.channel.name(),
                r.spec.x,
                r.spec.z,
                r.node.0,
                r.node.1
            );
        }
        for (k, v) in extra {
            let _ = writeln!(s, "{k}={v}");
        }
        let labels: Vec<&str> = self.receivers.iter().map(|r| r.spec.label.as_str()).collect();
        let _ = writeln!(s, "columns=time,{}", labels.join(","));
        for n in 0..self.n_steps() {
            let _ = write!(s, "{:.16e}", self.time(n));
            for tr in &self.samples {
                let _ = write!(s, ",{:.16e}", tr[n]);
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path, extra: &[(&str, String)]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_csv(extra))?;
        Ok(())
    }
}

/// Parsed trace file: header map, column names, and columns (time first).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl TraceFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut header = Vec::new();
        let mut columns = Vec::new();
        let mut data: Vec<Vec<f64>> = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            if let Some((k, v)) = line.split_once('=') {
                if k == "columns" {
                    columns = v.split(',').map(str::to_string).collect();
                    data = vec![Vec::new(); columns.len()];
                }
                header.push((k.to_string(), v.to_string()));
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("bad number in row: {e}")))?;
            if row.len() != columns.len() {
                return Err(bad(format!("row has {} values, expected {}", row.len(), columns.len())));
            }
            for (c, v) in data.iter_mut().zip(row) {
                c.push(v);
            }
        }
        Ok(Self {
            header,
            columns,
            data,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, path)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|k| self.data[k].as_slice())
    }
}

/// Appends one sample per receiver from the post-step `state`.
pub fn record(state: &WaveState, traces: &mut TraceSet) {
    for (r, tr) in traces.receivers.iter().zip(traces.samples.iter_mut()) {
        tr.push(r.sample(state));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{build_material, tests::unit_params, Layer};

    fn setup() -> (PoroelasticMaterial, SpectralGrid) {
        let mat = build_material(&[Layer { z_begin: 0, z_end: 16, params: unit_params() }], 16, 16).unwrap();
        (mat, SpectralGrid::new(16, 16, 2.0, 2.0, 0).unwrap())
    }

    fn ricker_src(kind: SourceKind) -> SourceSpec {
        SourceSpec {
            kind,
            x: 10.0,
            z: 12.0,
            wavelet: Wavelet::Ricker { f0: 5.0, t0: 0.25, amp: 2.0 },
        }
    }

    fn changed(a: &WaveState, b: &WaveState) -> Vec<&'static str> {
        crate::state::FIELD_NAMES
            .iter()
            .zip(a.fields().iter().zip(b.fields()))
            .filter(|(_, (x, y))| x.values != y.values)
            .map(|(n, _)| *n)
            .collect()
    }

    #[test]
    fn ricker_values() {
        assert_eq!(ricker(0.3, 10.0, 0.3), 1.0);
        assert!(ricker(100.0, 10.0, 0.3).abs() < 1e-300);
        assert!(ricker(-100.0, 10.0, 0.3).abs() < 1e-300);
        let w = Wavelet::Ricker { f0: 10.0, t0: 0.3, amp: 2.5 };
        assert_eq!(w.eval(0.3), 2.5);
    }

    #[test]
    fn ricker_has_zero_mean() {
        // composite Simpson over (t0 - 6/f0, t0 + 6/f0)
        let (f0, t0, amp) = (7.0, 0.4, 3.0);
        let (a, b) = (t0 - 6.0 / f0, t0 + 6.0 / f0);
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut s = amp * (ricker(a, f0, t0) + ricker(b, f0, t0));
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * amp * ricker(a + k as f64 * h, f0, t0);
        }
        let integral = s * h / 3.0;
        assert!(integral.abs() <= 1e-6 * amp / f0);
    }

    #[test]
    fn zero_wavelet_leaves_state_unchanged() {
        let (mat, grid) = setup();
        let src = PlacedSource::new(ricker_src(SourceKind::Volumetric { amplitude: 1.0 }), &grid).unwrap();
        let mut s = WaveState::zeros(16, 16);
        // far outside the wavelet support
        half_kick(&mut s, &src, 1e4, 0.5, &mat, &grid);
        assert_eq!(s.max_abs(), 0.0);
    }

    #[test]
    fn monopole_kicks_normal_stresses_equally() {
        let (mat, grid) = setup();
        let src = PlacedSource::new(
            ricker_src(SourceKind::MomentTensor { mxx: 1.0, mzz: 1.0, mxz: 0.0 }),
            &grid,
        )
        .unwrap();
        let mut s = WaveState::zeros(16, 16);
        half_kick(&mut s, &src, 0.25, 0.1, &mat, &grid);
        let (i, j) = src.cell;
        assert_eq!((i, j), (5, 6));
        assert_eq!(s.sxx.get(i, j), s.szz.get(i, j));
        assert_eq!(s.sxx.get(i, j), 0.1 * 2.0 / 4.0);
        assert_eq!(changed(&s, &WaveState::zeros(16, 16)), vec!["sxx", "szz"]);
    }

    #[test]
    fn kick_channel_purity() {
        let (mat, grid) = setup();
        let zero = WaveState::zeros(16, 16);
        let cases = [
            (SourceKind::MomentTensor { mxx: 1.0, mzz: -0.5, mxz: 0.5 }, vec!["sxx", "szz", "sxz"]),
            (SourceKind::Volumetric { amplitude: 1.0 }, vec!["p", "sxx", "szz"]),
            (SourceKind::BodyForce { fx: 1.0, fz: 2.0 }, vec!["vx", "vz", "qx", "qz"]),
        ];
        for (kind, expect) in cases {
            let src = PlacedSource::new(ricker_src(kind), &grid).unwrap();
            let mut s = zero.clone();
            half_kick(&mut s, &src, 0.25, 0.1, &mat, &grid);
            assert_eq!(changed(&s, &zero), expect);
        }
    }

    #[test]
    fn body_force_without_fluid_coupling() {
        let (mut mat, grid) = setup();
        // decoupled limit: ρ_f = 0 keeps m, so Δ = ρ m
        for b in [&mut mat.x_face, &mut mat.z_face] {
            b.rho_f.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..b.delta.len() {
                b.delta[k] = b.rho[k] * b.m[k];
            }
        }
        let src = PlacedSource::new(ricker_src(SourceKind::BodyForce { fx: 3.0, fz: 0.0 }), &grid).unwrap();
        let mut s = WaveState::zeros(16, 16);
        half_kick(&mut s, &src, 0.25, 0.1, &mat, &grid);
        let (i, j) = src.x_face;
        let expect = 0.1 * 3.0 * 2.0 / 4.0 / 2.0;
        assert!((s.vx.get(i, j) - expect).abs() < 1e-15);
        assert_eq!(s.qx.max_abs(), 0.0);
    }

    #[test]
    fn out_of_grid_position_rejected() {
        let (_, grid) = setup();
        let mut spec = ricker_src(SourceKind::Volumetric { amplitude: 1.0 });
        spec.x = -1.0;
        assert!(matches!(PlacedSource::new(spec, &grid), Err(Error::PositionOutsideGrid { .. })));
        spec.x = 32.0;
        assert!(PlacedSource::new(spec, &grid).is_err());
    }

    #[test]
    fn recording_conventions() {
        let (mat, grid) = setup();
        let rx = |label: &str, channel| {
            PlacedReceiver::new(ReceiverSpec { channel, x: 10.0, z: 12.0, label: label.into() }, &grid).unwrap()
        };
        let mut traces = TraceSet::new(0.1, vec![rx("a", Channel::Vx), rx("b", Channel::Vx), rx("c", Channel::P)], "none".into());
        let mut s = WaveState::zeros(16, 16);
        record(&s, &mut traces);
        let src = PlacedSource::new(
            ricker_src(SourceKind::MomentTensor { mxx: 1.0, mzz: 1.0, mxz: 0.0 }),
            &grid,
        )
        .unwrap();
        half_kick(&mut s, &src, 0.25, 0.1, &mat, &grid);
        s.p.set(5, 6, 4.0);
        record(&s, &mut traces);
        assert_eq!(traces.trace("a").unwrap(), &[0.0, 0.0]);
        assert_eq!(traces.trace("a"), traces.trace("b"));
        assert_eq!(traces.trace("c").unwrap(), &[0.0, 4.0]);
        assert_eq!(traces.n_steps(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let (_, grid) = setup();
        let r = PlacedReceiver::new(ReceiverSpec { channel: Channel::Qz, x: 4.0, z: 4.0, label: "r0".into() }, &grid).unwrap();
        let mut t = TraceSet::new(1e-3, vec![r], "test".into());
        t.samples[0] = vec![0.1, -2.0 / 3.0, 1e-300];
        let text = t.to_csv(&[("misfit", "0".into())]);
        let parsed = TraceFile::parse(&text, Path::new("x.csv")).unwrap();
        assert_eq!(parsed.column("r0").unwrap(), t.samples[0].as_slice());
        assert_eq!(parsed.column("time").unwrap()[2], 3e-3);
        assert_eq!(parsed.get("n_steps"), Some("3"));
        assert_eq!(parsed.get("misfit"), Some("0"));
        assert!(text.contains("-6.6666666666666663e-1"));
    }
}

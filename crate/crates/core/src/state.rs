//! The eight-field state vector and the discrete poroelastic energy.
//!
//! With coefficients taken on each field's own staggered node, the energy is
//!
//! ```text
//! E = ½ Σ ΔxΔz [ ρ v_x² + 2ρ_f v_x q_x + m₁ q_x²          (x-faces)
//!              + ρ v_z² + 2ρ_f v_z q_z + m₃ q_z²          (z-faces)
//!              + (σ+αp)ᵀ S (σ+αp) + p²/M                  (cells, normal part)
//!              + σ_xz² / c55 ]                            (corners)
//! ```
//!
//! `S(σ+αp)` is the strain recovered from total stress and pore pressure, so
//! the potential term is `½ ε:C:ε + p²/2M`. Differentiating along the
//! conservative flow gives `σ:ε(v) - p ∇·q` for the potential part and
//! `v·∇·σ - q·∇p - qᵀDq` for the kinetic part; the cross terms cancel by the
//! forward/backward adjoint pairing, leaving `dE/dt = -Σ qᵀDq ≤ 0`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{ScalarField, SpectralGrid};
use crate::material::PoroelasticMaterial;
use crate::par;

pub const FIELD_NAMES: [&str; 8] = ["vx", "vz", "qx", "qz", "p", "sxx", "szz", "sxz"];

/// Staggered offsets (in cells) of each field's lattice, same order as [`FIELD_NAMES`].
pub const FIELD_OFFSETS: [(f64, f64); 8] = [
    (0.5, 0.0),
    (0.0, 0.5),
    (0.5, 0.0),
    (0.0, 0.5),
    (0.0, 0.0),
    (0.0, 0.0),
    (0.0, 0.0),
    (0.5, 0.5),
];

#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub vx: ScalarField,
    pub vz: ScalarField,
    pub qx: ScalarField,
    pub qz: ScalarField,
    pub p: ScalarField,
    pub sxx: ScalarField,
    pub szz: ScalarField,
    pub sxz: ScalarField,
}

/// Time derivative of a [`WaveState`]; same slots, per-second units.
pub type StateRate = WaveState;

impl WaveState {
    pub fn zeros(nx: usize, nz: usize) -> Self {
        let z = ScalarField::zeros(nx, nz);
        Self {
            vx: z.clone(),
            vz: z.clone(),
            qx: z.clone(),
            qz: z.clone(),
            p: z.clone(),
            sxx: z.clone(),
            szz: z.clone(),
            sxz: z,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.vx.dims()
    }

    pub fn fields(&self) -> [&ScalarField; 8] {
        [
            &self.vx, &self.vz, &self.qx, &self.qz, &self.p, &self.sxx, &self.szz, &self.sxz,
        ]
    }

    pub fn fields_mut(&mut self) -> [&mut ScalarField; 8] {
        [
            &mut self.vx,
            &mut self.vz,
            &mut self.qx,
            &mut self.qz,
            &mut self.p,
            &mut self.sxx,
            &mut self.szz,
            &mut self.sxz,
        ]
    }

    pub fn field(&self, name: &str) -> Option<&ScalarField> {
        FIELD_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|k| self.fields()[k])
    }

    pub fn is_finite(&self) -> bool {
        self.fields().iter().all(|f| f.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.fields().iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }

    /// Plain Euclidean norm over all eight fields (no physical weighting).
    pub fn l2_norm(&self) -> f64 {
        self.fields()
            .iter()
            .map(|f| par::sum_indexed(f.values.len(), |k| f.values[k] * f.values[k]))
            .sum::<f64>()
            .sqrt()
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &WaveState) -> Result<()> {
        if self.dims() != x.dims() {
            return Err(Error::ShapeMismatch {
                expected: self.dims(),
                got: x.dims(),
            });
        }
        for (y, x) in self.fields_mut().into_iter().zip(x.fields()) {
            par::update_indexed(&mut y.values, |k, v| *v += a * x.values[k]);
        }
        Ok(())
    }

    /// `self = y + a x`, reusing the existing storage.
    pub fn assign_axpy(&mut self, y: &WaveState, a: f64, x: &WaveState) {
        for ((o, y), x) in self.fields_mut().into_iter().zip(y.fields()).zip(x.fields()) {
            par::update_indexed(&mut o.values, |k, v| *v = y.values[k] + a * x.values[k]);
        }
    }

    /// Copies `other` into `self` without reallocating.
    pub fn assign(&mut self, other: &WaveState) {
        for (o, x) in self.fields_mut().into_iter().zip(other.fields()) {
            o.values.copy_from_slice(&x.values);
        }
    }

    pub fn scale(&mut self, a: f64) {
        for f in self.fields_mut() {
            par::update_indexed(&mut f.values, |_, v| *v *= a);
        }
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &WaveState) -> f64 {
        self.fields()
            .iter()
            .zip(other.fields())
            .map(|(a, b)| {
                par::sum_indexed(a.values.len(), |k| {
                    let d = a.values[k] - b.values[k];
                    d * d
                })
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Returns `y + a x`.
pub fn state_axpy(a: f64, x: &WaveState, y: &WaveState) -> Result<WaveState> {
    let mut out = y.clone();
    out.axpy(a, x)?;
    Ok(out)
}

/// Polarized energy form `Σ aᵀ W b ΔxΔz`, so that `E(Ψ) = ½ energy_inner(Ψ, Ψ)`.
pub fn energy_inner(
    a: &WaveState,
    b: &WaveState,
    mat: &PoroelasticMaterial,
    grid: &SpectralGrid,
) -> f64 {
    let n = grid.len();
    let xf = &mat.x_face;
    let zf = &mat.z_face;
    let cc = &mat.center;
    let kinetic = par::sum_indexed(n, |k| {
        let (av, aq, bv, bq) = (a.vx.values[k], a.qx.values[k], b.vx.values[k], b.qx.values[k]);
        let x = xf.rho[k] * av * bv + xf.rho_f[k] * (av * bq + aq * bv) + xf.m[k] * aq * bq;
        let (av, aq, bv, bq) = (a.vz.values[k], a.qz.values[k], b.vz.values[k], b.qz.values[k]);
        let z = zf.rho[k] * av * bv + zf.rho_f[k] * (av * bq + aq * bv) + zf.m[k] * aq * bq;
        x + z
    });
    let potential = par::sum_indexed(n, |k| {
        let ap = a.p.values[k];
        let bp = b.p.values[k];
        let ax = a.sxx.values[k] + cc.alpha1[k] * ap;
        let az = a.szz.values[k] + cc.alpha3[k] * ap;
        let bx = b.sxx.values[k] + cc.alpha1[k] * bp;
        let bz = b.szz.values[k] + cc.alpha3[k] * bp;
        let normal = cc.s11[k] * ax * bx + cc.s13[k] * (ax * bz + az * bx) + cc.s33[k] * az * bz;
        let shear = a.sxz.values[k] * b.sxz.values[k] / mat.corner_c55[k];
        normal + ap * bp / cc.modulus[k] + shear
    });
    (kinetic + potential) * grid.cell_area()
}

/// Discrete energy per unit thickness [J/m].
pub fn energy(state: &WaveState, mat: &PoroelasticMaterial, grid: &SpectralGrid) -> f64 {
    0.5 * energy_inner(state, state, mat, grid)
}

/// Metadata written next to each snapshot binary.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMeta {
    pub field: String,
    pub time: f64,
    pub step: usize,
    pub nx: usize,
    pub nz: usize,
    pub dx: f64,
    pub dz: f64,
    pub x_offset: f64,
    pub z_offset: f64,
}

/// Writes `<dir>/<field>_<step>.bin` (little-endian f64, x fastest) and a
/// `.txt` sidecar of `key=value` lines. Returns the binary path.
pub fn write_snapshot(
    dir: &Path,
    name: &str,
    field: &ScalarField,
    step: usize,
    time: f64,
    grid: &SpectralGrid,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let stem = format!("{name}_{step:06}");
    let bin = dir.join(format!("{stem}.bin"));
    let mut bytes = Vec::with_capacity(field.values.len() * 8);
    for v in &field.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin, bytes)?;
    let (xo, zo) = FIELD_NAMES
        .iter()
        .position(|&n| n == name)
        .map(|k| FIELD_OFFSETS[k])
        .unwrap_or((0.0, 0.0));
    let mut side = String::new();
    let _ = writeln!(side, "field={name}");
    let _ = writeln!(side, "time={time:.16e}");
    let _ = writeln!(side, "step={step}");
    let _ = writeln!(side, "nx={}", grid.nx);
    let _ = writeln!(side, "nz={}", grid.nz);
    let _ = writeln!(side, "dx={:.16e}", grid.dx);
    let _ = writeln!(side, "dz={:.16e}", grid.dz);
    let _ = writeln!(side, "x_offset={xo}");
    let _ = writeln!(side, "z_offset={zo}");
    let _ = writeln!(side, "layout=row_major_x_fastest");
    let _ = writeln!(side, "dtype=f64le");
    fs::write(dir.join(format!("{stem}.txt")), side)?;
    Ok(bin)
}

/// Reads a snapshot written by [`write_snapshot`] given the binary path.
pub fn read_snapshot(bin: &Path) -> Result<(SnapshotMeta, ScalarField)> {
    let side_path = bin.with_extension("txt");
    let text = fs::read_to_string(&side_path)?;
    let bad = |reason: String| Error::Format {
        path: side_path.clone(),
        reason,
    };
    let mut kv = std::collections::HashMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("not a key=value line: {line}")))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| kv.get(k).ok_or_else(|| bad(format!("missing key {k}")));
    let num = |k: &str| -> Result<f64> {
        get(k)?.parse::<f64>().map_err(|e| bad(format!("{k}: {e}")))
    };
    let int = |k: &str| -> Result<usize> {
        get(k)?.parse::<usize>().map_err(|e| bad(format!("{k}: {e}")))
    };
    let meta = SnapshotMeta {
        field: get("field")?.clone(),
        time: num("time")?,
        step: int("step")?,
        nx: int("nx")?,
        nz: int("nz")?,
        dx: num("dx")?,
        dz: num("dz")?,
        x_offset: num("x_offset")?,
        z_offset: num("z_offset")?,
    };
    let bytes = fs::read(bin)?;
    if bytes.len() != meta.nx * meta.nz * 8 {
        return Err(Error::Format {
            path: bin.to_path_buf(),
            reason: format!("{} bytes for a {}x{} field", bytes.len(), meta.nx, meta.nz),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let field = ScalarField::from_vec(meta.nx, meta.nz, values)?;
    Ok((meta, field))
}

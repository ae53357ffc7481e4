//! Constitutive and inertial coefficients of the 2D VTI Biot model.
//!
//! Coefficients live on the cell (stress/pressure) nodes. The dynamics also
//! needs them on the staggered nodes: the x-face `(i+½, j)` where `v_x` and
//! `q_x` live, the z-face `(i, j+½)` for `v_z` and `q_z`, and the corner
//! `(i+½, j+½)` for `σ_xz`. Those are arithmetic means of the adjacent cells
//! (periodic wrap at the last row/column). The energy functional reads the
//! same staggered coefficients, which is what makes the assembled
//! conservative operator exactly skew-adjoint in the discrete energy norm.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Raw parameters of one homogeneous block (drained 2D VTI Voigt stiffness).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub c11: f64,
    pub c13: f64,
    pub c33: f64,
    pub c55: f64,
    pub alpha1: f64,
    pub alpha3: f64,
    /// Biot modulus `M` [Pa].
    pub biot_modulus: f64,
    /// Bulk density [kg/m³].
    pub rho: f64,
    /// Fluid density [kg/m³].
    pub rho_f: f64,
    pub phi: f64,
    /// Tortuosities along x and z.
    pub t1: f64,
    pub t3: f64,
    /// Permeabilities along x and z [m²].
    pub k1: f64,
    pub k3: f64,
    /// Fluid viscosity [Pa·s].
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaterialError {
    #[error("inertial determinant rho*m - rho_f^2 = {value} is not positive at cell ({i}, {j})")]
    NonPositiveDelta { i: usize, j: usize, value: f64 },
    #[error("stiffness block of layer {layer} is not invertible")]
    SingularStiffness { layer: usize },
    #[error("layers do not tile [0, {nz}): {reason}")]
    BadLayerGeometry { nz: usize, reason: String },
    #[error("layer {layer}: {reason}")]
    InvalidParams { layer: usize, reason: String },
    #[error("cell array has {got} entries, expected {expected}")]
    CellCount { expected: usize, got: usize },
}

impl MaterialParams {
    /// Inertial coupling `m_i = T_i ρ_f / φ` for x and z.
    pub fn inertial_coupling(&self) -> (f64, f64) {
        (
            self.t1 * self.rho_f / self.phi,
            self.t3 * self.rho_f / self.phi,
        )
    }

    /// Drag coefficients `d_i = η / k_i`.
    pub fn drag(&self) -> (f64, f64) {
        (self.eta / self.k1, self.eta / self.k3)
    }

    /// Largest eigenvalue of the Christoffel matrix over all in-plane
    /// directions.
    ///
    /// With `t = cos 2θ` the eigenvalue is `P + Q t + sqrt(A t² + 2 R S t + C)`;
    /// its maximum on `[-1, 1]` sits at an end point or at a root of the
    /// quadratic the stationarity condition squares to.
    fn christoffel_max(&self) -> f64 {
        let p = (self.c11 + 2.0 * self.c55 + self.c33) / 4.0;
        let q = (self.c11 - self.c33) / 4.0;
        let r = (self.c11 - self.c33) / 4.0;
        let s = (self.c11 + self.c33 - 2.0 * self.c55) / 4.0;
        let b = (self.c13 + self.c55) / 2.0;
        let a = s * s - b * b;
        let c = r * r + b * b;
        let eig = |t: f64| p + q * t + (a * t * t + 2.0 * r * s * t + c).max(0.0).sqrt();
        let mut candidates = vec![-1.0, 1.0];
        let (qa, qb, qc) = (a * a - q * q * a, 2.0 * r * s * (a - q * q), r * r * s * s - q * q * c);
        if qa != 0.0 {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                candidates.push((-qb + disc.sqrt()) / (2.0 * qa));
                candidates.push((-qb - disc.sqrt()) / (2.0 * qa));
            }
        } else if qb != 0.0 {
            candidates.push(-qc / qb);
        }
        candidates
            .into_iter()
            .filter(|t| t.is_finite())
            .map(|t| eig(t.clamp(-1.0, 1.0)))
            .fold(0.0, f64::max)
    }

    /// Bound on every lossless plane-wave phase speed in this medium.
    ///
    /// The stiffness splits into the solid Christoffel part and a rank-one
    /// pore-pressure part; their largest ratios to the mass matrix add. The
    /// solid part is bounded with the smallest Schur density `ρ - ρ_f²/m_i`,
    /// the pressure part exactly as `M max_i (m_i α_i² - 2 ρ_f α_i + ρ) / Δ_i`.
    pub fn plane_wave_speed_bound(&self) -> f64 {
        let (m1, m3) = self.inertial_coupling();
        let schur = (self.rho - self.rho_f * self.rho_f / m1).min(self.rho - self.rho_f * self.rho_f / m3);
        let pressure = |m: f64, a: f64| (m * a * a - 2.0 * self.rho_f * a + self.rho) / (self.rho * m - self.rho_f * self.rho_f);
        let fluid = self.biot_modulus * pressure(m1, self.alpha1).max(pressure(m3, self.alpha3));
        (self.christoffel_max() / schur + fluid).sqrt()
    }

    /// Checks the parameter invariants; `layer` only labels the error.
    pub fn validate(&self, layer: usize) -> Result<(), MaterialError> {
        let bad = |reason: &str| {
            Err(MaterialError::InvalidParams {
                layer,
                reason: reason.to_string(),
            })
        };
        let all = [
            self.c11,
            self.c13,
            self.c33,
            self.c55,
            self.alpha1,
            self.alpha3,
            self.biot_modulus,
            self.rho,
            self.rho_f,
            self.phi,
            self.t1,
            self.t3,
            self.k1,
            self.k3,
            self.eta,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter");
        }
        if self.c11 <= 0.0 || self.c33 <= 0.0 || self.c55 <= 0.0 {
            return Err(MaterialError::SingularStiffness { layer });
        }
        if self.c11 * self.c33 - self.c13 * self.c13 <= 0.0 {
            return Err(MaterialError::SingularStiffness { layer });
        }
        if self.biot_modulus <= 0.0 {
            return bad("Biot modulus must be positive");
        }
        if self.rho <= 0.0 || self.rho_f <= 0.0 {
            return bad("densities must be positive");
        }
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return bad("porosity must lie in (0, 1)");
        }
        if self.t1 < 1.0 || self.t3 < 1.0 {
            return bad("tortuosity must be >= 1");
        }
        if self.k1 <= 0.0 || self.k3 <= 0.0 {
            return bad("permeability must be positive");
        }
        if self.eta < 0.0 {
            return bad("viscosity must be non-negative");
        }
        for (name, a) in [("alpha1", self.alpha1), ("alpha3", self.alpha3)] {
            if !(0.0..=1.0).contains(&a) {
                log::warn!("layer {layer}: {name} = {a} outside [0, 1]");
            }
        }
        Ok(())
    }
}

/// In-plane compliance, the inverse of `[[c11, c13, 0], [c13, c33, 0], [0, 0, c55]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compliance {
    pub s11: f64,
    pub s13: f64,
    pub s33: f64,
    pub s55: f64,
}

impl Compliance {
    pub fn from_stiffness(c11: f64, c13: f64, c33: f64, c55: f64) -> Option<Self> {
        let det = c11 * c33 - c13 * c13;
        if !(det > 0.0 && c55 > 0.0 && c11 > 0.0) {
            return None;
        }
        Some(Self {
            s11: c33 / det,
            s13: -c13 / det,
            s33: c11 / det,
            s55: 1.0 / c55,
        })
    }
}

/// A horizontal band of rows `[z_begin, z_end)` with uniform parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub z_begin: usize,
    pub z_end: usize,
    #[serde(flatten)]
    pub params: MaterialParams,
}

/// Kinetic (mass) block and drag on one family of staggered nodes.
#[derive(Debug, Clone, Default)]
pub struct InertialBlock {
    pub rho: Vec<f64>,
    pub rho_f: Vec<f64>,
    pub m: Vec<f64>,
    pub drag: Vec<f64>,
    /// `rho * m - rho_f²`.
    pub delta: Vec<f64>,
}

/// Coefficients on the cell nodes used by the stress/pressure rates.
#[derive(Debug, Clone, Default)]
pub struct CellCoefficients {
    pub c11: Vec<f64>,
    pub c13: Vec<f64>,
    pub c33: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub alpha3: Vec<f64>,
    pub modulus: Vec<f64>,
    pub s11: Vec<f64>,
    pub s13: Vec<f64>,
    pub s33: Vec<f64>,
}

/// Heterogeneous material on an `nx × nz` grid (row-major, x fastest).
#[derive(Debug, Clone)]
pub struct PoroelasticMaterial {
    nx: usize,
    nz: usize,
    cells: Vec<MaterialParams>,
    pub m1: Vec<f64>,
    pub m3: Vec<f64>,
    pub d1: Vec<f64>,
    pub d3: Vec<f64>,
    pub delta1: Vec<f64>,
    pub delta3: Vec<f64>,
    pub center: CellCoefficients,
    pub x_face: InertialBlock,
    pub z_face: InertialBlock,
    pub corner_c55: Vec<f64>,
}

/// Rasterizes horizontal layers onto the grid and derives all coefficients.
pub fn build_material(
    layers: &[Layer],
    nx: usize,
    nz: usize,
) -> Result<PoroelasticMaterial, MaterialError> {
    let mut sorted: Vec<(usize, &Layer)> = layers.iter().enumerate().collect();
    sorted.sort_by_key(|(_, l)| l.z_begin);
    let geometry = |reason: String| MaterialError::BadLayerGeometry { nz, reason };
    let mut expected = 0;
    for (idx, l) in &sorted {
        if l.z_begin != expected {
            return Err(geometry(format!(
                "layer {idx} starts at {} but previous band ended at {expected}",
                l.z_begin
            )));
        }
        if l.z_end <= l.z_begin {
            return Err(geometry(format!("layer {idx} is empty")));
        }
        expected = l.z_end;
    }
    if expected != nz || sorted.is_empty() {
        return Err(geometry(format!("bands end at {expected}")));
    }
    for (idx, l) in layers.iter().enumerate() {
        l.params.validate(idx)?;
    }

    let mut cells = Vec::with_capacity(nx * nz);
    let mut layer_of = Vec::with_capacity(nx * nz);
    for (idx, l) in &sorted {
        for _ in l.z_begin..l.z_end {
            for _ in 0..nx {
                cells.push(l.params);
                layer_of.push(*idx);
            }
        }
    }
    PoroelasticMaterial::assemble(nx, nz, cells, &layer_of)
}

fn wrap(i: usize, n: usize) -> usize {
    if i + 1 == n {
        0
    } else {
        i + 1
    }
}

impl PoroelasticMaterial {
    /// Builds from an arbitrary per-cell raster.
    pub fn from_cells(
        nx: usize,
        nz: usize,
        cells: Vec<MaterialParams>,
    ) -> Result<Self, MaterialError> {
        if cells.len() != nx * nz {
            return Err(MaterialError::CellCount {
                expected: nx * nz,
                got: cells.len(),
            });
        }
        for (k, c) in cells.iter().enumerate() {
            c.validate(k)?;
        }
        let labels: Vec<usize> = (0..nx * nz).collect();
        Self::assemble(nx, nz, cells, &labels)
    }

    fn assemble(
        nx: usize,
        nz: usize,
        cells: Vec<MaterialParams>,
        label: &[usize],
    ) -> Result<Self, MaterialError> {
        let n = nx * nz;
        let mut mat = PoroelasticMaterial {
            nx,
            nz,
            m1: vec![0.0; n],
            m3: vec![0.0; n],
            d1: vec![0.0; n],
            d3: vec![0.0; n],
            delta1: vec![0.0; n],
            delta3: vec![0.0; n],
            center: CellCoefficients::default(),
            x_face: InertialBlock::default(),
            z_face: InertialBlock::default(),
            corner_c55: vec![0.0; n],
            cells,
        };

        for j in 0..nz {
            for i in 0..nx {
                let k = j * nx + i;
                let c = &mat.cells[k];
                let (m1, m3) = c.inertial_coupling();
                let (d1, d3) = c.drag();
                let delta1 = c.rho * m1 - c.rho_f * c.rho_f;
                let delta3 = c.rho * m3 - c.rho_f * c.rho_f;
                for delta in [delta1, delta3] {
                    if delta <= 0.0 {
                        return Err(MaterialError::NonPositiveDelta { i, j, value: delta });
                    }
                }
                mat.m1[k] = m1;
                mat.m3[k] = m3;
                mat.d1[k] = d1;
                mat.d3[k] = d3;
                mat.delta1[k] = delta1;
                mat.delta3[k] = delta3;
            }
        }

        let cc = &mut mat.center;
        for (k, c) in mat.cells.iter().enumerate() {
            let s = Compliance::from_stiffness(c.c11, c.c13, c.c33, c.c55)
                .ok_or(MaterialError::SingularStiffness { layer: label[k] })?;
            cc.c11.push(c.c11);
            cc.c13.push(c.c13);
            cc.c33.push(c.c33);
            cc.alpha1.push(c.alpha1);
            cc.alpha3.push(c.alpha3);
            cc.modulus.push(c.biot_modulus);
            cc.s11.push(s.s11);
            cc.s13.push(s.s13);
            cc.s33.push(s.s33);
        }

        mat.x_face = mat.face_block(|i, j| (wrap(i, nx), j), |k| (mat.m1[k], mat.d1[k]));
        mat.z_face = mat.face_block(|i, j| (i, wrap(j, nz)), |k| (mat.m3[k], mat.d3[k]));
        mat.check_face_deltas()?;

        for j in 0..nz {
            for i in 0..nx {
                let (ip, jp) = (wrap(i, nx), wrap(j, nz));
                let c55 = 0.25
                    * (mat.cells[j * nx + i].c55
                        + mat.cells[j * nx + ip].c55
                        + mat.cells[jp * nx + i].c55
                        + mat.cells[jp * nx + ip].c55);
                mat.corner_c55[j * nx + i] = c55;
            }
        }
        Ok(mat)
    }

    /// Averages the mass block over cell `(i, j)` and its `neighbour`.
    fn face_block<N, S>(&self, neighbour: N, select: S) -> InertialBlock
    where
        N: Fn(usize, usize) -> (usize, usize),
        S: Fn(usize) -> (f64, f64),
    {
        let n = self.nx * self.nz;
        let mut b = InertialBlock {
            rho: Vec::with_capacity(n),
            rho_f: Vec::with_capacity(n),
            m: Vec::with_capacity(n),
            drag: Vec::with_capacity(n),
            delta: Vec::with_capacity(n),
        };
        for j in 0..self.nz {
            for i in 0..self.nx {
                let (ib, jb) = neighbour(i, j);
                let ka = j * self.nx + i;
                let kb = jb * self.nx + ib;
                let (ca, cb) = (&self.cells[ka], &self.cells[kb]);
                let (ma, da) = select(ka);
                let (mb, db) = select(kb);
                let rho = 0.5 * (ca.rho + cb.rho);
                let rho_f = 0.5 * (ca.rho_f + cb.rho_f);
                let m = 0.5 * (ma + mb);
                b.rho.push(rho);
                b.rho_f.push(rho_f);
                b.m.push(m);
                b.drag.push(0.5 * (da + db));
                b.delta.push(rho * m - rho_f * rho_f);
            }
        }
        b
    }

    // Averaged mass blocks stay positive definite (convex combination), but
    // rounding could still produce a non-positive determinant for inputs that
    // sit on the boundary.
    fn check_face_deltas(&self) -> Result<(), MaterialError> {
        for block in [&self.x_face, &self.z_face] {
            if let Some(k) = block.delta.iter().position(|&d| d <= 0.0) {
                return Err(MaterialError::NonPositiveDelta {
                    i: k % self.nx,
                    j: k / self.nx,
                    value: block.delta[k],
                });
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.nz)
    }

    /// Raw parameters of cell `(i, j)`.
    pub fn params_at(&self, i: usize, j: usize) -> &MaterialParams {
        &self.cells[j * self.nx + i]
    }

    pub fn cells(&self) -> &[MaterialParams] {
        &self.cells
    }

    /// Compliance of cell `(i, j)`.
    pub fn compliance_at(&self, i: usize, j: usize) -> Compliance {
        let k = j * self.nx + i;
        Compliance {
            s11: self.center.s11[k],
            s13: self.center.s13[k],
            s33: self.center.s33[k],
            s55: 1.0 / self.cells[k].c55,
        }
    }

    /// Whether every cell has zero viscosity.
    pub fn is_lossless(&self) -> bool {
        self.cells.iter().all(|c| c.eta == 0.0)
    }

    /// Upper bound on the fastest phase speed, used for the Courant limit.
    ///
    /// The larger of two estimates. The first is the undrained-stiffened
    /// modulus `max(c11, c33) + α_max² M` (maximised over cells) over the
    /// smallest of `ρ - ρ_f²/m_min` and `ρ`. It misses the fluid's own
    /// compressional mode when `α` is small, so the second is a plane-wave
    /// bound per cell, see [`MaterialParams::plane_wave_speed_bound`].
    pub fn max_wave_speed(&self) -> f64 {
        let mut modulus = 0.0_f64;
        let mut density = f64::INFINITY;
        let mut plane_wave = 0.0_f64;
        let mut prev = None;
        for c in &self.cells {
            let alpha = c.alpha1.max(c.alpha3);
            modulus = modulus.max(c.c11.max(c.c33) + alpha * alpha * c.biot_modulus);
            let (m1, m3) = c.inertial_coupling();
            let effective = c.rho - c.rho_f * c.rho_f / m1.min(m3);
            density = density.min(effective.min(c.rho));
            if prev != Some(c) {
                plane_wave = plane_wave.max(c.plane_wave_speed_bound());
                prev = Some(c);
            }
        }
        (modulus / density).sqrt().max(plane_wave)
    }

    /// Smallest shear speed `sqrt(c55 / (ρ - ρ_f²/m))` over cells.
    pub fn min_shear_speed(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| {
                let (m1, m3) = c.inertial_coupling();
                (c.c55 / (c.rho - c.rho_f * c.rho_f / m1.max(m3))).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Copy with every cell's viscosity replaced.
    pub fn with_viscosity(&self, eta: f64) -> Result<Self, MaterialError> {
        let cells = self
            .cells
            .iter()
            .map(|c| MaterialParams { eta, ..*c })
            .collect();
        Self::from_cells(self.nx, self.nz, cells)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn unit_params() -> MaterialParams {
        MaterialParams {
            c11: 3.0,
            c13: 1.0,
            c33: 3.0,
            c55: 1.0,
            alpha1: 0.5,
            alpha3: 0.5,
            biot_modulus: 2.0,
            rho: 2.0,
            rho_f: 1.0,
            phi: 0.5,
            t1: 1.0,
            t3: 1.0,
            k1: 1.0,
            k3: 1.0,
            eta: 0.0,
        }
    }

    fn single(params: MaterialParams, nx: usize, nz: usize) -> Result<PoroelasticMaterial, MaterialError> {
        build_material(&[Layer { z_begin: 0, z_end: nz, params }], nx, nz)
    }

    #[test]
    fn inertial_coupling_and_delta() {
        let mat = single(unit_params(), 4, 4).unwrap();
        assert_eq!(mat.m1[0], 2.0);
        assert_eq!(mat.delta1[0], 3.0);
        assert_eq!(mat.x_face.delta[5], 3.0);
    }

    #[test]
    fn lossless_has_zero_drag() {
        let mat = single(unit_params(), 4, 4).unwrap();
        assert!(mat.d1.iter().chain(&mat.d3).all(|&d| d == 0.0));
        assert!(mat.is_lossless());
    }

    #[test]
    fn isotropic_compliance_matches_hand_inverse() {
        // inverse of [[3,1],[1,3]] is [[3,-1],[-1,3]]/8
        let s = Compliance::from_stiffness(3.0, 1.0, 3.0, 1.0).unwrap();
        assert!((s.s11 - 0.375).abs() < 1e-15);
        assert!((s.s13 + 0.125).abs() < 1e-15);
        assert!((s.s33 - 0.375).abs() < 1e-15);
        assert_eq!(s.s55, 1.0);
    }

    #[test]
    fn compliance_inverts_stiffness() {
        let c = [(12e9, 4e9, 10e9, 3.5e9), (20e9, 6.5e9, 17e9, 6e9), (3.0, 1.0, 3.0, 1.0)];
        for (c11, c13, c33, c55) in c {
            let s = Compliance::from_stiffness(c11, c13, c33, c55).unwrap();
            let p = [
                c11 * s.s11 + c13 * s.s13,
                c11 * s.s13 + c13 * s.s33,
                c13 * s.s11 + c33 * s.s13,
                c13 * s.s13 + c33 * s.s33,
                c55 * s.s55,
            ];
            let id = [1.0, 0.0, 0.0, 1.0, 1.0];
            for (a, b) in p.iter().zip(id) {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn delta_reconstruction_identity() {
        let mut p = unit_params();
        p.t3 = 1.7;
        p.rho_f = 0.8;
        let mat = single(p, 8, 8).unwrap();
        for k in 0..64 {
            assert_eq!(p.rho * mat.m1[k] - p.rho_f * p.rho_f, mat.delta1[k]);
            assert_eq!(p.rho * mat.m3[k] - p.rho_f * p.rho_f, mat.delta3[k]);
        }
    }

    #[test]
    fn non_positive_delta_rejected() {
        let mut p = unit_params();
        p.rho = 0.5;
        assert!(matches!(
            single(p, 4, 4),
            Err(MaterialError::NonPositiveDelta { .. })
        ));
    }

    #[test]
    fn singular_stiffness_rejected() {
        let mut p = unit_params();
        p.c13 = 3.0;
        assert_eq!(single(p, 4, 4).unwrap_err(), MaterialError::SingularStiffness { layer: 0 });
    }

    #[test]
    fn layers_must_tile() {
        let p = unit_params();
        let gap = [
            Layer { z_begin: 0, z_end: 2, params: p },
            Layer { z_begin: 3, z_end: 4, params: p },
        ];
        assert!(matches!(build_material(&gap, 4, 4), Err(MaterialError::BadLayerGeometry { .. })));
        let short = [Layer { z_begin: 0, z_end: 3, params: p }];
        assert!(matches!(build_material(&short, 4, 4), Err(MaterialError::BadLayerGeometry { .. })));
        assert!(matches!(build_material(&[], 4, 4), Err(MaterialError::BadLayerGeometry { .. })));
    }

    #[test]
    fn layers_may_be_listed_out_of_order() {
        let mut q = unit_params();
        q.rho = 3.0;
        let layers = [
            Layer { z_begin: 2, z_end: 4, params: q },
            Layer { z_begin: 0, z_end: 2, params: unit_params() },
        ];
        let mat = build_material(&layers, 4, 4).unwrap();
        assert_eq!(mat.params_at(0, 0).rho, 2.0);
        assert_eq!(mat.params_at(0, 3).rho, 3.0);
        // z-face of row 1 straddles the interface
        assert_eq!(mat.z_face.rho[4], 2.5);
        assert_eq!(mat.x_face.rho[4], 2.0);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = unit_params();
        p.phi = 1.0;
        assert!(matches!(single(p, 4, 4), Err(MaterialError::InvalidParams { .. })));
        let mut p = unit_params();
        p.t1 = 0.9;
        assert!(matches!(single(p, 4, 4), Err(MaterialError::InvalidParams { .. })));
        let mut p = unit_params();
        p.eta = -1.0;
        assert!(matches!(single(p, 4, 4), Err(MaterialError::InvalidParams { .. })));
    }

    #[test]
    fn max_wave_speed_examples() {
        // α = 0, ρ_f → 0 reduces to sqrt(c/ρ) once the decoupled fluid mode
        // is slow too (M → 0)
        let mut p = unit_params();
        p.c11 = 4.0;
        p.c33 = 4.0;
        p.c13 = 0.0;
        p.alpha1 = 0.0;
        p.alpha3 = 0.0;
        p.rho = 1.0;
        p.rho_f = 1e-280;
        p.biot_modulus = 1e-300;
        let mat = single(p, 4, 4).unwrap();
        assert!((mat.max_wave_speed() - 2.0).abs() < 1e-12);

        // α = 1, M = 1, c_max = 3, effective density 1
        let mut p = unit_params();
        p.alpha1 = 1.0;
        p.alpha3 = 1.0;
        p.biot_modulus = 1.0;
        p.rho = 1.5;
        p.rho_f = 1.0;
        p.phi = 0.5;
        // m = 2, ρ - ρ_f²/m = 1
        let mat = single(p, 4, 4).unwrap();
        assert!((mat.max_wave_speed() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn christoffel_max_matches_dense_sampling() {
        let cases = [(12.0, 4.0, 10.0, 3.5), (3.0, 1.0, 3.0, 1.0), (4.0, 3.5, 9.0, 0.3), (20.0, 6.0, 17.0, 6.0), (5.0, -1.5, 5.0, 2.0)];
        for (c11, c13, c33, c55) in cases {
            let p = MaterialParams { c11, c13, c33, c55, ..unit_params() };
            let sampled = (0..=20_000)
                .map(|k| {
                    let (s, c) = (k as f64 * std::f64::consts::PI / 20_000.0).sin_cos();
                    let (a, d, b) = (c11 * c * c + c55 * s * s, c55 * c * c + c33 * s * s, (c13 + c55) * c * s);
                    0.5 * (a + d) + (0.25 * (a - d).powi(2) + b * b).sqrt()
                })
                .fold(0.0, f64::max);
            let exact = p.christoffel_max();
            assert!(exact >= sampled * (1.0 - 1e-14), "{exact} < {sampled}");
            assert!(exact <= sampled * (1.0 + 1e-7), "{exact} > {sampled}");
        }
    }

    #[test]
    fn build_is_deterministic() {
        let a = single(unit_params(), 8, 8).unwrap();
        let b = single(unit_params(), 8, 8).unwrap();
        assert_eq!(a.x_face.delta, b.x_face.delta);
        assert_eq!(a.corner_c55, b.corner_c55);
    }
}

//! Flexural finite-element model of the annular stator.
//!
//! The ring is unwrapped onto its mean circumference `L = 2πR` and meshed with
//! two-node Hermite (Euler–Bernoulli) elements carrying transverse deflection
//! `w` and slope `∂w/∂x` per node. The last element closes back onto node 0,
//! so the free ring keeps exactly one rigid mode (uniform axial translation).
//! Each nodal-diameter family `n ≥ 1` shows up as a degenerate cos/sin pair.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::materials::{IsotropicMaterial, PiezoMaterial};

/// Cross-section and drive layout of the stator ring. Lengths in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatorGeometry {
    pub mean_radius: f64,
    pub section_width: f64,
    pub section_thickness: f64,
    pub tooth_height: f64,
    pub tooth_count: usize,
    pub drive_nodal_diameters: usize,
    /// Distance from the ring neutral axis to the mid-plane of the piezo layer.
    pub piezo_offset: f64,
}

impl Default for StatorGeometry {
    fn default() -> Self {
        Self::usr30()
    }
}

impl StatorGeometry {
    /// USR30-sized ring (30 mm class motor).
    pub fn usr30() -> Self {
        Self {
            mean_radius: 0.0125,
            section_width: 0.005,
            section_thickness: 0.0025,
            tooth_height: 0.001,
            tooth_count: 0,
            drive_nodal_diameters: 4,
            piezo_offset: 0.0015,
        }
    }

    /// USR60-sized ring.
    pub fn usr60() -> Self {
        Self {
            mean_radius: 0.0275,
            section_width: 0.008,
            section_thickness: 0.004,
            tooth_height: 0.002,
            tooth_count: 0,
            drive_nodal_diameters: 4,
            piezo_offset: 0.0023,
        }
    }

    /// Offset of the tooth-tip contact surface from the neutral axis.
    pub fn contact_offset(&self) -> f64 {
        self.section_thickness / 2.0 + self.tooth_height
    }

    pub fn area(&self) -> f64 {
        self.section_width * self.section_thickness
    }

    pub fn second_moment(&self) -> f64 {
        self.section_width * self.section_thickness.powi(3) / 12.0
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mean_radius", self.mean_radius),
            ("section_width", self.section_width),
            ("section_thickness", self.section_thickness),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be > 0 (got {v})")));
            }
        }
        if !(self.tooth_height >= 0.0) {
            return Err(invalid("tooth_height", "must be >= 0"));
        }
        if !(self.piezo_offset >= 0.0) {
            return Err(invalid("piezo_offset", "must be >= 0"));
        }
        if self.drive_nodal_diameters < 1 {
            return Err(invalid("drive_nodal_diameters", "must be >= 1"));
        }
        Ok(())
    }
}

/// Analytic flexural frequency (Hz) of nodal diameter `n` on the unwrapped
/// periodic Euler–Bernoulli ring.
pub fn analytic_frequency(geom: &StatorGeometry, mat: &IsotropicMaterial, n: usize) -> f64 {
    let k = n as f64 / geom.mean_radius;
    let ei = mat.youngs_modulus * geom.second_moment();
    let rho_a = mat.density * geom.area();
    k * k * (ei / rho_a).sqrt() / TAU
}

/// Uniform periodic mesh on the unwrapped circumference.
#[derive(Debug, Clone, PartialEq)]
pub struct RingMesh {
    pub element_count: usize,
    pub radius: f64,
}

impl RingMesh {
    pub fn circumference(&self) -> f64 {
        TAU * self.radius
    }

    pub fn element_length(&self) -> f64 {
        self.circumference() / self.element_count as f64
    }

    pub fn node_count(&self) -> usize {
        self.element_count
    }

    pub fn dof_count(&self) -> usize {
        2 * self.element_count
    }

    pub fn node_angle(&self, k: usize) -> f64 {
        TAU * k as f64 / self.element_count as f64
    }

    /// Nodes joined by element `e`; the last element wraps to node 0.
    pub fn element_nodes(&self, e: usize) -> (usize, usize) {
        (e, (e + 1) % self.element_count)
    }

    fn locate(&self, theta: f64) -> (usize, f64) {
        let u = theta.rem_euclid(TAU) / TAU * self.element_count as f64;
        let e = (u.floor() as usize).min(self.element_count - 1);
        (e, u - e as f64)
    }

    /// Hermite interpolation of a DOF vector at angle `theta`. Returns
    /// `(w, ∂w/∂θ, ∂²w/∂θ²)`.
    pub fn interpolate(&self, dofs: &[f64], theta: f64) -> (f64, f64, f64) {
        let (e, xi) = self.locate(theta);
        let (a, b) = self.element_nodes(e);
        let l = self.element_length();
        let (w1, s1, w2, s2) = (dofs[2 * a], dofs[2 * a + 1], dofs[2 * b], dofs[2 * b + 1]);
        let xi2 = xi * xi;
        let xi3 = xi2 * xi;
        let w = (1.0 - 3.0 * xi2 + 2.0 * xi3) * w1
            + l * (xi - 2.0 * xi2 + xi3) * s1
            + (3.0 * xi2 - 2.0 * xi3) * w2
            + l * (-xi2 + xi3) * s2;
        let dx = (-6.0 * xi + 6.0 * xi2) / l * w1
            + (1.0 - 4.0 * xi + 3.0 * xi2) * s1
            + (6.0 * xi - 6.0 * xi2) / l * w2
            + (-2.0 * xi + 3.0 * xi2) * s2;
        let dxx = (-6.0 + 12.0 * xi) / (l * l) * w1
            + (-4.0 + 6.0 * xi) / l * s1
            + (6.0 - 12.0 * xi) / (l * l) * w2
            + (-2.0 + 6.0 * xi) / l * s2;
        (w, dx * self.radius, dxx * self.radius * self.radius)
    }
}

/// Minimum element count that resolves nodal diameter `n`.
pub fn min_elements(n: usize) -> usize {
    8 * n
}

pub fn build_ring_mesh(geom: &StatorGeometry, n_elements: usize) -> Result<RingMesh> {
    geom.validate()?;
    let required = min_elements(geom.drive_nodal_diameters);
    if n_elements < required {
        return Err(Error::MeshTooCoarse {
            given: n_elements,
            required,
            n: geom.drive_nodal_diameters,
        });
    }
    Ok(RingMesh {
        element_count: n_elements,
        radius: geom.mean_radius,
    })
}

/// Global stiffness and consistent mass, DOF order `[w0, w0', w1, w1', ...]`.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub stiffness: DMatrix<f64>,
    pub mass: DMatrix<f64>,
}

pub fn beam_element_stiffness(ei: f64, l: f64) -> [[f64; 4]; 4] {
    let c = ei / (l * l * l);
    let l2 = l * l;
    [
        [12.0 * c, 6.0 * l * c, -12.0 * c, 6.0 * l * c],
        [6.0 * l * c, 4.0 * l2 * c, -6.0 * l * c, 2.0 * l2 * c],
        [-12.0 * c, -6.0 * l * c, 12.0 * c, -6.0 * l * c],
        [6.0 * l * c, 2.0 * l2 * c, -6.0 * l * c, 4.0 * l2 * c],
    ]
}

pub fn beam_element_mass(rho_a: f64, l: f64) -> [[f64; 4]; 4] {
    let c = rho_a * l / 420.0;
    let l2 = l * l;
    [
        [156.0 * c, 22.0 * l * c, 54.0 * c, -13.0 * l * c],
        [22.0 * l * c, 4.0 * l2 * c, 13.0 * l * c, -3.0 * l2 * c],
        [54.0 * c, 13.0 * l * c, 156.0 * c, -22.0 * l * c],
        [-13.0 * l * c, -3.0 * l2 * c, -22.0 * l * c, 4.0 * l2 * c],
    ]
}

pub fn assemble_system(
    mesh: &RingMesh,
    mat: &IsotropicMaterial,
    geom: &StatorGeometry,
) -> SystemMatrices {
    let ndof = mesh.dof_count();
    let l = mesh.element_length();
    let ke = beam_element_stiffness(mat.youngs_modulus * geom.second_moment(), l);
    let me = beam_element_mass(mat.density * geom.area(), l);
    let mut k = DMatrix::zeros(ndof, ndof);
    let mut m = DMatrix::zeros(ndof, ndof);
    for e in 0..mesh.element_count {
        let (a, b) = mesh.element_nodes(e);
        let map = [2 * a, 2 * a + 1, 2 * b, 2 * b + 1];
        for i in 0..4 {
            for j in 0..4 {
                k[(map[i], map[j])] += ke[i][j];
                m[(map[i], map[j])] += me[i][j];
            }
        }
    }
    SystemMatrices {
        stiffness: k,
        mass: m,
    }
}

/// Lowest generalized eigenpairs, mass-normalized.
#[derive(Debug, Clone)]
pub struct ModeSet {
    /// Natural frequencies in Hz, ascending.
    pub frequencies: Vec<f64>,
    /// One mass-normalized shape per column.
    pub shapes: DMatrix<f64>,
    /// Dominant nodal-diameter count of each shape.
    pub wavenumbers: Vec<usize>,
    /// Backward error `‖Kφ − ω²Mφ‖ / ((‖K‖ + ω²‖M‖)·‖φ‖)` per mode.
    pub residuals: Vec<f64>,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn omega(&self, i: usize) -> f64 {
        TAU * self.frequencies[i]
    }
}

/// Dominant spatial harmonic of the deflection components.
pub fn dominant_wavenumber(dofs: &[f64]) -> usize {
    let nodes = dofs.len() / 2;
    let mut best = (0, -1.0);
    for h in 0..=nodes / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for k in 0..nodes {
            let arg = TAU * (h * k) as f64 / nodes as f64;
            re += dofs[2 * k] * arg.cos();
            im += dofs[2 * k] * arg.sin();
        }
        let mag = re.hypot(im);
        if mag > best.1 * (1.0 + 1e-9) {
            best = (h, mag);
        }
    }
    best.0
}

/// Solves `K φ = ω² M φ` for the `k` lowest modes via Cholesky reduction to a
/// standard symmetric problem.
pub fn solve_eigen(sys: &SystemMatrices, k: usize) -> Result<ModeSet> {
    let ndof = sys.stiffness.nrows();
    if k == 0 || k > ndof {
        return Err(invalid("k", format!("must be in 1..={ndof} (got {k})")));
    }
    let chol = sys.mass.clone().cholesky().ok_or_else(|| Error::EigenSolve {
        reason: "mass matrix not positive definite".into(),
        max_residual: f64::NAN,
    })?;
    let l = chol.l();
    // A = L⁻¹ K L⁻ᵀ
    let linv_k = l
        .solve_lower_triangular(&sys.stiffness)
        .expect("cholesky factor is nonsingular");
    let a = l
        .solve_lower_triangular(&linv_k.transpose())
        .expect("cholesky factor is nonsingular");
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(a, 1e-15, 10_000).ok_or_else(|| Error::EigenSolve {
        reason: "QR iteration did not converge".into(),
        max_residual: f64::NAN,
    })?;

    let mut order: Vec<usize> = (0..ndof).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let lt = l.transpose();
    let (knorm, mnorm) = (sys.stiffness.norm(), sys.mass.norm());
    let mut shapes = DMatrix::zeros(ndof, k);
    let mut frequencies = Vec::with_capacity(k);
    let mut wavenumbers = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        let y = eig.eigenvectors.column(idx).into_owned();
        let phi = lt
            .solve_upper_triangular(&y)
            .expect("cholesky factor is nonsingular");
        let lambda = eig.eigenvalues[idx].max(0.0);
        let kphi = &sys.stiffness * &phi;
        let r = &kphi - &sys.mass * &phi * lambda;
        let denom = (knorm + lambda * mnorm) * phi.norm();
        residuals.push(r.norm() / denom);
        frequencies.push(lambda.sqrt() / TAU);
        wavenumbers.push(dominant_wavenumber(phi.as_slice()));
        shapes.set_column(col, &phi);
    }
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    if !(max_residual < 1e-8) {
        return Err(Error::EigenSolve {
            reason: "eigen residual above tolerance".into(),
            max_residual,
        });
    }
    Ok(ModeSet {
        frequencies,
        shapes,
        wavenumbers,
        residuals,
    })
}

/// The degenerate cos/sin shape pair of one nodal-diameter family.
#[derive(Debug, Clone)]
pub struct ModePair {
    pub n: usize,
    /// Natural angular frequency of the pair (mean of both), rad/s.
    pub omega: f64,
    /// Relative frequency split between the two members.
    pub split: f64,
    pub cos_shape: DVector<f64>,
    pub sin_shape: DVector<f64>,
}

impl ModePair {
    pub fn frequency_hz(&self) -> f64 {
        self.omega / TAU
    }

    /// Peak deflection of the mass-normalized cos shape over the nodes.
    pub fn shape_peak(&self) -> f64 {
        self.cos_shape
            .iter()
            .step_by(2)
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

fn harmonic_coefficients(dofs: &[f64], n: usize) -> (f64, f64) {
    let nodes = dofs.len() / 2;
    let (mut c, mut s) = (0.0, 0.0);
    for k in 0..nodes {
        let arg = TAU * (n * k) as f64 / nodes as f64;
        c += dofs[2 * k] * arg.cos();
        s += dofs[2 * k] * arg.sin();
    }
    (c, s)
}

/// Picks the pair labelled `n` and rotates it within its eigenspace so the
/// first shape is ∝ cos(nθ) and the second ∝ sin(nθ).
pub fn select_mode_pair(modes: &ModeSet, n: usize) -> Result<ModePair> {
    if n == 0 {
        return Err(invalid(
            "n",
            "n = 0 is the axial translation mode, not a traveling-wave pair",
        ));
    }
    let idx: Vec<usize> = (0..modes.len())
        .filter(|&i| modes.wavenumbers[i] == n)
        .take(2)
        .collect();
    if idx.len() < 2 {
        return Err(Error::ModeNotResolved { n });
    }
    let v1 = modes.shapes.column(idx[0]).into_owned();
    let v2 = modes.shapes.column(idx[1]).into_owned();
    let (_, s1) = harmonic_coefficients(v1.as_slice(), n);
    let (_, s2) = harmonic_coefficients(v2.as_slice(), n);
    let norm = s1.hypot(s2);
    // Rotation is orthogonal, so M-normalization is preserved.
    let mut cos_shape = (&v1 * s2 - &v2 * s1) / norm;
    let mut sin_shape = (&v1 * s1 + &v2 * s2) / norm;
    if harmonic_coefficients(cos_shape.as_slice(), n).0 < 0.0 {
        cos_shape = -cos_shape;
    }
    if harmonic_coefficients(sin_shape.as_slice(), n).1 < 0.0 {
        sin_shape = -sin_shape;
    }
    let (w1, w2) = (modes.omega(idx[0]), modes.omega(idx[1]));
    Ok(ModePair {
        n,
        omega: 0.5 * (w1 + w2),
        split: (w2 - w1).abs() / (0.5 * (w1 + w2)),
        cos_shape,
        sin_shape,
    })
}

/// One electrode sector `[start, end)` in radians with polarity ±1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub start: f64,
    pub end: f64,
    pub polarity: i8,
}

/// Disjoint set of energized sectors for one drive channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodePattern {
    sectors: Vec<Sector>,
}

impl ElectrodePattern {
    pub fn new(sectors: Vec<Sector>) -> Result<Self> {
        for s in &sectors {
            let width = s.end - s.start;
            if !(width > 0.0 && width <= TAU) {
                return Err(invalid("sector", format!("width must be in (0, 2π], got {width}")));
            }
            if s.polarity != 1 && s.polarity != -1 {
                return Err(invalid("sector", "polarity must be +1 or -1"));
            }
        }
        for (i, a) in sectors.iter().enumerate() {
            for b in &sectors[i + 1..] {
                if arcs_overlap(a, b) {
                    return Err(Error::OverlappingSectors(format!(
                        "[{:.4}, {:.4}) and [{:.4}, {:.4})",
                        a.start, a.end, b.start, b.end
                    )));
                }
            }
        }
        Ok(Self { sectors })
    }

    /// 2n alternating sectors of width π/n, centred on the crests of cos(nθ).
    pub fn alternating(n: usize) -> Self {
        let width = PI / n as f64;
        let sectors = (0..2 * n)
            .map(|k| {
                let centre = k as f64 * width;
                Sector {
                    start: centre - width / 2.0,
                    end: centre + width / 2.0,
                    polarity: if k % 2 == 0 { 1 } else { -1 },
                }
            })
            .collect();
        Self { sectors }
    }

    pub fn rotated(&self, angle: f64) -> Self {
        Self {
            sectors: self
                .sectors
                .iter()
                .map(|s| Sector {
                    start: s.start + angle,
                    end: s.end + angle,
                    polarity: s.polarity,
                })
                .collect(),
        }
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }
}

fn arcs_overlap(a: &Sector, b: &Sector) -> bool {
    const EPS: f64 = 1e-12;
    let a0 = a.start.rem_euclid(TAU);
    let b0 = b.start.rem_euclid(TAU);
    let (la, lb) = (a.end - a.start, b.end - b.start);
    // Distance from a's start forward to b's start and vice versa.
    let d_ab = (b0 - a0).rem_euclid(TAU);
    let d_ba = (a0 - b0).rem_euclid(TAU);
    d_ab < la - EPS || d_ba < lb - EPS
}

/// Generalized forces of both drive channels on a mode pair, per volt of
/// amplitude already applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalDrive {
    pub a_on_cos: f64,
    pub a_on_sin: f64,
    pub b_on_cos: f64,
    pub b_on_sin: f64,
}

impl ModalDrive {
    /// Channel A force on its target (cos) mode.
    pub fn f_a(&self) -> f64 {
        self.a_on_cos
    }

    /// Channel B force on its target (sin) mode.
    pub fn f_b(&self) -> f64 {
        self.b_on_sin
    }

    /// Largest off-target to on-target ratio over both channels.
    pub fn cross_coupling(&self) -> f64 {
        let ra = self.a_on_sin.abs() / self.a_on_cos.abs();
        let rb = self.b_on_cos.abs() / self.b_on_sin.abs();
        if ra.is_nan() || rb.is_nan() {
            return 0.0;
        }
        ra.max(rb)
    }
}

/// Generalized force of a piezo electrode pattern on one mass-normalized
/// shape. The layer acts as a bending moment `−e31·V·z̄_p·b` over each
/// energized sector, whose virtual work reduces to slope jumps at the sector
/// edges.
pub fn pattern_modal_force(
    mesh: &RingMesh,
    shape: &[f64],
    geom: &StatorGeometry,
    piezo: &PiezoMaterial,
    pattern: &ElectrodePattern,
    voltage: f64,
) -> f64 {
    let moment = -piezo.e31() * voltage * geom.piezo_offset * geom.section_width;
    let r = mesh.radius;
    pattern
        .sectors()
        .iter()
        .map(|s| {
            let slope_end = mesh.interpolate(shape, s.end).1 / r;
            let slope_start = mesh.interpolate(shape, s.start).1 / r;
            s.polarity as f64 * moment * (slope_end - slope_start)
        })
        .sum()
}

/// Modal forces of the two drive channels. Channel B uses `pattern_a`
/// rotated by a quarter wavelength, π/(2n).
pub fn piezo_modal_force(
    mesh: &RingMesh,
    pair: &ModePair,
    geom: &StatorGeometry,
    piezo: &PiezoMaterial,
    pattern_a: &ElectrodePattern,
    voltage: f64,
) -> ModalDrive {
    let pattern_b = pattern_a.rotated(PI / (2.0 * pair.n as f64));
    let f = |shape: &DVector<f64>, p: &ElectrodePattern| {
        pattern_modal_force(mesh, shape.as_slice(), geom, piezo, p, voltage)
    };
    ModalDrive {
        a_on_cos: f(&pair.cos_shape, pattern_a),
        a_on_sin: f(&pair.sin_shape, pattern_a),
        b_on_cos: f(&pair.cos_shape, &pattern_b),
        b_on_sin: f(&pair.sin_shape, &pattern_b),
    }
}

/// Assembled and solved stator: mesh, matrices, modes.
#[derive(Debug, Clone)]
pub struct StatorModel {
    pub geometry: StatorGeometry,
    pub material: IsotropicMaterial,
    pub mesh: RingMesh,
    pub system: SystemMatrices,
    pub modes: ModeSet,
}

impl StatorModel {
    pub fn build(
        geometry: &StatorGeometry,
        material: &IsotropicMaterial,
        n_elements: usize,
        mode_count: usize,
    ) -> Result<Self> {
        let mesh = build_ring_mesh(geometry, n_elements)?;
        let system = assemble_system(&mesh, material, geometry);
        let modes = solve_eigen(&system, mode_count.min(mesh.dof_count()))?;
        Ok(Self {
            geometry: geometry.clone(),
            material: material.clone(),
            mesh,
            system,
            modes,
        })
    }

    pub fn mode_pair(&self, n: usize) -> Result<ModePair> {
        select_mode_pair(&self.modes, n)
    }

    pub fn drive_pair(&self) -> Result<ModePair> {
        self.mode_pair(self.geometry.drive_nodal_diameters)
    }
}

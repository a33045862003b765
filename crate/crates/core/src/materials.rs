//! Constitutive data for the stator stack and admissibility checks.
//!
//! Tensor quantities use Voigt ordering (11, 22, 33, 23, 13, 12). All values
//! are SI; permittivity is stored relative to vacuum.

use nalgebra::{Matrix3, Matrix3x6, Matrix6, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Linear elastic isotropic material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropicMaterial {
    pub name: String,
    /// kg/m³
    pub density: f64,
    pub poisson_ratio: f64,
    /// Pa
    pub youngs_modulus: f64,
}

impl IsotropicMaterial {
    pub fn new(name: &str, density: f64, poisson_ratio: f64, youngs_modulus: f64) -> Result<Self> {
        let m = Self {
            name: name.to_string(),
            density,
            poisson_ratio,
            youngs_modulus,
        };
        let violations = m.validate();
        if let Some(first) = violations.into_iter().next() {
            return Err(invalid("material", format!("{}: {first}", m.name)));
        }
        Ok(m)
    }

    /// Lists violated invariants; empty means admissible.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.density > 0.0) {
            out.push(format!("density must be > 0 (got {})", self.density));
        }
        if !(self.youngs_modulus > 0.0) {
            out.push(format!(
                "youngs_modulus must be > 0 (got {})",
                self.youngs_modulus
            ));
        }
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            out.push(format!(
                "poisson_ratio must lie in (0, 0.5) (got {})",
                self.poisson_ratio
            ));
        }
        out
    }
}

/// Transversely isotropic piezoceramic described by its full matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PiezoMaterial {
    pub name: String,
    /// kg/m³
    pub density: f64,
    /// Stiffness at constant field, Pa.
    pub elasticity: Matrix6<f64>,
    /// Piezoelectric stress constants e, C/m².
    pub coupling: Matrix3x6<f64>,
    /// Relative permittivity at constant strain.
    pub relative_permittivity: Matrix3<f64>,
}

impl PiezoMaterial {
    /// Builds a piezo material from an upper-triangular elasticity table,
    /// mirroring it across the diagonal.
    pub fn from_upper_triangle(
        name: &str,
        density: f64,
        upper: [[f64; 6]; 6],
        coupling: [[f64; 6]; 3],
        permittivity: [[f64; 3]; 3],
    ) -> Self {
        let mut c = Matrix6::zeros();
        for i in 0..6 {
            for j in i..6 {
                c[(i, j)] = upper[i][j];
                c[(j, i)] = upper[i][j];
            }
        }
        Self {
            name: name.to_string(),
            density,
            elasticity: c,
            coupling: Matrix3x6::from_fn(|i, j| coupling[i][j]),
            relative_permittivity: Matrix3::from_fn(|i, j| permittivity[i][j]),
        }
    }

    /// Transverse piezoelectric constant e31 (C/m²).
    pub fn e31(&self) -> f64 {
        self.coupling[(2, 0)]
    }
}

/// A single violated invariant reported by [`validate_piezo`].
#[derive(Debug, Clone, PartialEq)]
pub enum PiezoViolation {
    NonPositiveDensity(f64),
    ElasticityAsymmetric { row: usize, col: usize, delta: f64 },
    ElasticityNotPositiveDefinite { min_eigenvalue: f64 },
    PermittivityOffDiagonal { row: usize, col: usize, value: f64 },
    PermittivityNonPositive { index: usize, value: f64 },
    CouplingPattern { row: usize, col: usize, value: f64 },
    CouplingShearMismatch { e15: f64, e24: f64 },
    CouplingTransverseMismatch { e31: f64, e32: f64 },
}

impl std::fmt::Display for PiezoViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use PiezoViolation::*;
        match self {
            NonPositiveDensity(d) => write!(f, "density not positive ({d})"),
            ElasticityAsymmetric { row, col, delta } => write!(
                f,
                "elasticity not symmetric at ({}, {}): delta {delta:e}",
                row + 1,
                col + 1
            ),
            ElasticityNotPositiveDefinite { min_eigenvalue } => write!(
                f,
                "elasticity not positive definite (min eigenvalue {min_eigenvalue:e})"
            ),
            PermittivityOffDiagonal { row, col, value } => write!(
                f,
                "relative permittivity not diagonal at ({}, {}): {value}",
                row + 1,
                col + 1
            ),
            PermittivityNonPositive { index, value } => write!(
                f,
                "relative permittivity diagonal entry {} not positive: {value}",
                index + 1
            ),
            CouplingPattern { row, col, value } => write!(
                f,
                "coupling sparsity pattern violated at ({}, {}): {value}",
                row + 1,
                col + 1
            ),
            CouplingShearMismatch { e15, e24 } => {
                write!(f, "coupling sparsity pattern violated: e15 ({e15}) != e24 ({e24})")
            }
            CouplingTransverseMismatch { e31, e32 } => {
                write!(f, "coupling sparsity pattern violated: e31 ({e31}) != e32 ({e32})")
            }
        }
    }
}

// Nonzero slots of a transversely isotropic (6mm) coupling matrix, 0-based.
const COUPLING_NONZERO: [(usize, usize); 5] = [(0, 4), (1, 3), (2, 0), (2, 1), (2, 2)];

/// Checks the admissibility invariants of a piezoelectric material. An empty
/// report means the material is valid.
pub fn validate_piezo(m: &PiezoMaterial) -> Vec<PiezoViolation> {
    let mut out = Vec::new();
    if !(m.density > 0.0) {
        out.push(PiezoViolation::NonPositiveDensity(m.density));
    }

    let c = &m.elasticity;
    for i in 0..6 {
        for j in (i + 1)..6 {
            let delta = c[(i, j)] - c[(j, i)];
            if delta != 0.0 {
                out.push(PiezoViolation::ElasticityAsymmetric {
                    row: i,
                    col: j,
                    delta,
                });
            }
        }
    }
    let sym = (c + c.transpose()) * 0.5;
    let min_eig = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(min_eig > 0.0) {
        out.push(PiezoViolation::ElasticityNotPositiveDefinite {
            min_eigenvalue: min_eig,
        });
    }

    let eps = &m.relative_permittivity;
    for i in 0..3 {
        for j in 0..3 {
            if i != j && eps[(i, j)] != 0.0 {
                out.push(PiezoViolation::PermittivityOffDiagonal {
                    row: i,
                    col: j,
                    value: eps[(i, j)],
                });
            }
        }
        if !(eps[(i, i)] > 0.0) {
            out.push(PiezoViolation::PermittivityNonPositive {
                index: i,
                value: eps[(i, i)],
            });
        }
    }

    let e = &m.coupling;
    for i in 0..3 {
        for j in 0..6 {
            if !COUPLING_NONZERO.contains(&(i, j)) && e[(i, j)] != 0.0 {
                out.push(PiezoViolation::CouplingPattern {
                    row: i,
                    col: j,
                    value: e[(i, j)],
                });
            }
        }
    }
    if e[(0, 4)] != e[(1, 3)] {
        out.push(PiezoViolation::CouplingShearMismatch {
            e15: e[(0, 4)],
            e24: e[(1, 3)],
        });
    }
    if e[(2, 0)] != e[(2, 1)] {
        out.push(PiezoViolation::CouplingTransverseMismatch {
            e31: e[(2, 0)],
            e32: e[(2, 1)],
        });
    }
    out
}

/// Any catalog entry.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Material {
    Isotropic(IsotropicMaterial),
    Piezo(PiezoMaterial),
}

impl Material {
    pub fn name(&self) -> &str {
        match self {
            Material::Isotropic(m) => &m.name,
            Material::Piezo(m) => &m.name,
        }
    }

    pub fn density(&self) -> f64 {
        match self {
            Material::Isotropic(m) => m.density,
            Material::Piezo(m) => m.density,
        }
    }

    pub fn as_isotropic(&self) -> Option<&IsotropicMaterial> {
        match self {
            Material::Isotropic(m) => Some(m),
            Material::Piezo(_) => None,
        }
    }

    pub fn as_piezo(&self) -> Option<&PiezoMaterial> {
        match self {
            Material::Piezo(m) => Some(m),
            Material::Isotropic(_) => None,
        }
    }

    /// Human-readable invariant violations; empty when admissible.
    pub fn violations(&self) -> Vec<String> {
        match self {
            Material::Isotropic(m) => m.validate(),
            Material::Piezo(m) => validate_piezo(m).iter().map(|v| v.to_string()).collect(),
        }
    }
}

pub fn pzt_5h() -> PiezoMaterial {
    PiezoMaterial::from_upper_triangle(
        "PZT-5H",
        7500.0,
        [
            [1.27205e11, 8.02122e10, 8.46702e10, 0.0, 0.0, 0.0],
            [0.0, 1.27205e11, 8.46702e10, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.17436e11, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 2.29885e10, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 2.29885e10, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 2.34742e10],
        ],
        [
            [0.0, 0.0, 0.0, 0.0, 17.0345, 0.0],
            [0.0, 0.0, 0.0, 17.0345, 0.0, 0.0],
            [-6.62281, -6.62281, 23.2403, 0.0, 0.0, 0.0],
        ],
        [[1704.4, 0.0, 0.0], [0.0, 1704.4, 0.0], [0.0, 0.0, 1433.6]],
    )
}

fn iso(name: &str, density: f64, nu: f64, e_gpa: f64) -> Material {
    Material::Isotropic(IsotropicMaterial {
        name: name.to_string(),
        density,
        poisson_ratio: nu,
        youngs_modulus: e_gpa * 1e9,
    })
}

/// Named materials available without a material file.
#[derive(Debug, Clone)]
pub struct MaterialLibrary {
    entries: Vec<Material>,
}

impl MaterialLibrary {
    pub fn builtin() -> Self {
        Self {
            entries: vec![
                iso("Ultem 1000", 1270.0, 0.3, 3.2),
                iso("Epoxy", 3500.0, 0.33, 0.7),
                Material::Piezo(pzt_5h()),
                iso("Copper", 8960.0, 0.35, 110.0),
                iso("Aluminum", 2700.0, 0.33, 70.0),
            ],
        }
    }

    /// Case-insensitive lookup.
    pub fn lookup(&self, name: &str) -> Result<&Material> {
        self.entries
            .iter()
            .find(|m| m.name().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Material> {
        self.entries.iter()
    }

    pub fn insert(&mut self, m: Material) {
        self.entries.retain(|e| !e.name().eq_ignore_ascii_case(m.name()));
        self.entries.push(m);
    }
}

/// On-disk material description. Isotropic entries carry `poisson_ratio` and
/// `youngs_modulus`; piezo entries carry the three matrices, row-major.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialFile {
    pub name: String,
    pub density: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poisson_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub youngs_modulus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elasticity: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_permittivity: Option<Vec<f64>>,
}

impl MaterialFile {
    pub fn into_material(self) -> Result<Material> {
        match (
            self.poisson_ratio,
            self.youngs_modulus,
            self.elasticity,
            self.coupling,
            self.relative_permittivity,
        ) {
            (Some(nu), Some(e), None, None, None) => Ok(Material::Isotropic(
                IsotropicMaterial::new(&self.name, self.density, nu, e)?,
            )),
            (None, None, Some(c), Some(cp), Some(eps)) => {
                let check = |v: &[f64], len: usize, what: &'static str| {
                    if v.len() != len {
                        Err(invalid(what, format!("expected {len} numbers, got {}", v.len())))
                    } else {
                        Ok(())
                    }
                };
                check(&c, 36, "elasticity")?;
                check(&cp, 18, "coupling")?;
                check(&eps, 9, "relative_permittivity")?;
                Ok(Material::Piezo(PiezoMaterial {
                    name: self.name,
                    density: self.density,
                    elasticity: Matrix6::from_row_slice(&c),
                    coupling: Matrix3x6::from_row_slice(&cp),
                    relative_permittivity: Matrix3::from_row_slice(&eps),
                }))
            }
            _ => Err(invalid(
                "material",
                format!(
                    "{}: give either poisson_ratio+youngs_modulus or elasticity+coupling+relative_permittivity",
                    self.name
                ),
            )),
        }
    }

    pub fn from_material(m: &Material) -> Self {
        match m {
            Material::Isotropic(i) => Self {
                name: i.name.clone(),
                density: i.density,
                poisson_ratio: Some(i.poisson_ratio),
                youngs_modulus: Some(i.youngs_modulus),
                ..Default::default()
            },
            Material::Piezo(p) => Self {
                name: p.name.clone(),
                density: p.density,
                elasticity: Some(p.elasticity.transpose().iter().cloned().collect()),
                coupling: Some(p.coupling.transpose().iter().cloned().collect()),
                relative_permittivity: Some(
                    p.relative_permittivity.transpose().iter().cloned().collect(),
                ),
                ..Default::default()
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_values() {
        let lib = MaterialLibrary::builtin();
        let pzt = lib.lookup("PZT-5H").unwrap().as_piezo().unwrap().clone();
        assert_eq!(pzt.density, 7500.0);
        assert_eq!(pzt.coupling[(2, 2)], 23.2403);
        assert_eq!(pzt.elasticity[(2, 2)], 1.17436e11);
        assert_eq!(pzt.elasticity[(1, 0)], 8.02122e10);
        assert_eq!(pzt.e31(), -6.62281);
        assert_eq!(pzt.relative_permittivity[(2, 2)], 1433.6);

        let cu = lib.lookup("copper").unwrap().as_isotropic().unwrap();
        assert_eq!(cu.youngs_modulus, 110e9);
        assert_eq!(cu.density, 8960.0);
        assert!(lib.lookup("PZT-5H").unwrap().as_isotropic().is_none());
        assert!(matches!(lib.lookup("Unobtainium"), Err(Error::UnknownMaterial(_))));
    }

    #[test]
    fn catalog_is_admissible() {
        for m in MaterialLibrary::builtin().iter() {
            assert!(m.violations().is_empty(), "{}: {:?}", m.name(), m.violations());
        }
        let eig = SymmetricEigen::new(pzt_5h().elasticity).eigenvalues;
        assert!(eig.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn negated_c11_is_not_positive_definite() {
        let mut m = pzt_5h();
        m.elasticity[(0, 0)] = -m.elasticity[(0, 0)];
        let report = validate_piezo(&m);
        assert_eq!(report.len(), 1);
        assert!(report[0].to_string().contains("elasticity not positive definite"));
    }

    #[test]
    fn shear_coupling_mismatch_is_reported() {
        let mut m = pzt_5h();
        m.coupling[(0, 4)] = 17.0;
        let report = validate_piezo(&m);
        assert_eq!(report.len(), 1);
        assert!(report[0].to_string().contains("sparsity pattern"));
    }

    #[test]
    fn stray_coupling_and_asymmetry_are_reported() {
        let mut m = pzt_5h();
        m.coupling[(0, 0)] = 1.0;
        m.elasticity[(0, 1)] += 1.0;
        m.relative_permittivity[(0, 1)] = 3.0;
        let report = validate_piezo(&m);
        assert!(report.iter().any(|v| matches!(v, PiezoViolation::CouplingPattern { row: 0, col: 0, .. })));
        assert!(report.iter().any(|v| matches!(v, PiezoViolation::ElasticityAsymmetric { .. })));
        assert!(report.iter().any(|v| matches!(v, PiezoViolation::PermittivityOffDiagonal { .. })));
    }

    #[test]
    fn isotropic_bounds() {
        assert!(IsotropicMaterial::new("x", 1000.0, 0.5, 1e9).is_err());
        assert!(IsotropicMaterial::new("x", 0.0, 0.3, 1e9).is_err());
        assert!(IsotropicMaterial::new("x", 1000.0, 0.3, -1.0).is_err());
        assert!(IsotropicMaterial::new("x", 1000.0, 0.3, 1e9).is_ok());
    }

    #[test]
    fn material_file_roundtrip() {
        for m in MaterialLibrary::builtin().iter() {
            let file = MaterialFile::from_material(m);
            let json = serde_json::to_string(&file).unwrap();
            let back: MaterialFile = serde_json::from_str(&json).unwrap();
            assert_eq!(&back.into_material().unwrap(), m);
        }
        let bad = MaterialFile {
            name: "half".into(),
            density: 1.0,
            poisson_ratio: Some(0.3),
            ..Default::default()
        };
        assert!(bad.into_material().is_err());
    }
}

//! JSON run configuration. Every section is optional and falls back to the
//! USR30-like defaults.

use serde::{Deserialize, Serialize};

use crate::contact::ContactConfig;
use crate::dynamics::{AnalysisConfig, MotorSetup, RotorConfig, SimulationConfig};
use crate::error::{invalid, Error, Result};
use crate::materials::{Material, MaterialFile, MaterialLibrary};
use crate::stator_fem::StatorGeometry;
use crate::sweep::{preset, Preset, SweepParam, SweepSpec};
use crate::wave_drive::DriveConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// A preset geometry name (`usr30`, `usr60`) or an inline description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeometrySpec {
    Named(String),
    Inline(StatorGeometry),
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec::Named("usr30".into())
    }
}

impl GeometrySpec {
    pub fn resolve(&self) -> Result<StatorGeometry> {
        match self {
            GeometrySpec::Inline(g) => Ok(g.clone()),
            GeometrySpec::Named(n) => match n.to_ascii_lowercase().as_str() {
                "usr30" => Ok(StatorGeometry::usr30()),
                "usr60" => Ok(StatorGeometry::usr60()),
                _ => Err(invalid("geometry", format!("unknown geometry {n:?}; expected usr30 or usr60"))),
            },
        }
    }
}

/// A library material name or an inline material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaterialSpec {
    Named(String),
    Inline(MaterialFile),
}

impl MaterialSpec {
    pub fn resolve(&self, lib: &MaterialLibrary) -> Result<Material> {
        match self {
            MaterialSpec::Named(n) => lib.lookup(n).cloned(),
            MaterialSpec::Inline(f) => f.clone().into_material(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub n_elements: usize,
    pub modes: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            n_elements: 64,
            modes: 12,
        }
    }
}

/// Either a named preset or an explicit grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepConfig {
    Preset { preset: String },
    Explicit { parameter: SweepParam, values: Vec<f64> },
}

impl SweepConfig {
    pub fn resolve(&self) -> Result<Preset> {
        match self {
            SweepConfig::Preset { preset: name } => preset(name),
            SweepConfig::Explicit { parameter, values } => Ok(Preset {
                name: "explicit",
                spec: SweepSpec::new(*parameter, values.clone())?,
                geometry: None,
                stator_material: None,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub geometry: GeometrySpec,
    pub stator_material: MaterialSpec,
    pub piezo_material: MaterialSpec,
    pub mesh: MeshConfig,
    pub drive: DriveConfig,
    pub contact: ContactConfig,
    pub rotor: RotorConfig,
    pub simulation: SimulationConfig,
    pub analysis: AnalysisConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            geometry: GeometrySpec::default(),
            stator_material: MaterialSpec::Named("Copper".into()),
            piezo_material: MaterialSpec::Named("PZT-5H".into()),
            mesh: MeshConfig::default(),
            drive: DriveConfig::default(),
            contact: ContactConfig::default(),
            rotor: RotorConfig::default(),
            simulation: SimulationConfig::default(),
            analysis: AnalysisConfig::default(),
            sweep: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            row: e.line(),
            col: e.column(),
            reason: e.to_string(),
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", cfg.schema_version),
            ));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Resolves names and checks every precondition of a run.
    pub fn resolve(&self) -> Result<MotorSetup> {
        let lib = MaterialLibrary::builtin();
        let stator_material = match self.stator_material.resolve(&lib)? {
            Material::Isotropic(m) => m,
            Material::Piezo(p) => {
                return Err(invalid("stator_material", format!("{} is piezoelectric, expected isotropic", p.name)))
            }
        };
        let piezo = match self.piezo_material.resolve(&lib)? {
            Material::Piezo(p) => p,
            Material::Isotropic(m) => {
                return Err(invalid("piezo_material", format!("{} is not piezoelectric", m.name)))
            }
        };
        let setup = MotorSetup {
            geometry: self.geometry.resolve()?,
            stator_material,
            piezo,
            n_elements: self.mesh.n_elements,
            mode_count: self.mesh.modes,
            drive: self.drive.clone(),
            contact: self.contact.clone(),
            rotor: self.rotor.clone(),
            simulation: self.simulation.clone(),
            analysis: self.analysis.clone(),
        };
        setup.validate()?;
        if let Some(s) = &self.sweep {
            s.resolve()?;
        }
        Ok(setup)
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TerrainClass {
    Concrete,
    Grass,
    Gravel,
    PebbleSidewalk,
}

impl TerrainClass {
    pub const ALL: [TerrainClass; 4] = [
        TerrainClass::Concrete,
        TerrainClass::Grass,
        TerrainClass::Gravel,
        TerrainClass::PebbleSidewalk,
    ];

    /// Default `(friction, roughness [m], compliance)` row for the class.
    pub fn defaults(self) -> (f64, f64, f64) {
        match self {
            TerrainClass::Concrete => (0.85, 0.002, 0.05),
            TerrainClass::Grass => (0.65, 0.008, 0.40),
            TerrainClass::Gravel => (0.45, 0.020, 0.30),
            TerrainClass::PebbleSidewalk => (0.55, 0.012, 0.15),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TerrainClass::Concrete => "concrete",
            TerrainClass::Grass => "grass",
            TerrainClass::Gravel => "gravel",
            TerrainClass::PebbleSidewalk => "pebble_sidewalk",
        }
    }

    pub(crate) fn index(self) -> u64 {
        match self {
            TerrainClass::Concrete => 0,
            TerrainClass::Grass => 1,
            TerrainClass::Gravel => 2,
            TerrainClass::PebbleSidewalk => 3,
        }
    }
}

impl fmt::Display for TerrainClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TerrainClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "concrete" => Ok(TerrainClass::Concrete),
            "grass" => Ok(TerrainClass::Grass),
            "gravel" => Ok(TerrainClass::Gravel),
            "pebble_sidewalk" | "pebblesidewalk" | "pebble" => Ok(TerrainClass::PebbleSidewalk),
            other => Err(Error::invalid(format!("unknown terrain class `{other}`"))),
        }
    }
}

/// Parameterized terrain patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerrainSpec {
    pub terrain_class: TerrainClass,
    /// Coulomb friction coefficient, in (0, 1].
    pub friction_coeff: f64,
    /// Height standard deviation in meters.
    pub roughness: f64,
    /// Ground compliance, in [0, 1].
    pub compliance: f64,
    pub visual_seed: u64,
}

impl TerrainSpec {
    pub fn new(
        terrain_class: TerrainClass,
        friction_coeff: f64,
        roughness: f64,
        compliance: f64,
        visual_seed: u64,
    ) -> Result<Self> {
        let spec = TerrainSpec {
            terrain_class,
            friction_coeff,
            roughness,
            compliance,
            visual_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.friction_coeff > 0.0 && self.friction_coeff <= 1.0) {
            return Err(Error::invalid(format!(
                "friction_coeff {} outside (0, 1]",
                self.friction_coeff
            )));
        }
        if !(self.roughness >= 0.0 && self.roughness.is_finite()) {
            return Err(Error::invalid(format!(
                "roughness {} must be >= 0",
                self.roughness
            )));
        }
        if !(0.0..=1.0).contains(&self.compliance) {
            return Err(Error::invalid(format!(
                "compliance {} outside [0, 1]",
                self.compliance
            )));
        }
        Ok(())
    }

    /// Terrain surface height at ground coordinates `(along, lateral)` in meters.
    pub fn height_at(&self, along: f64, lateral: f64) -> f64 {
        if self.roughness == 0.0 {
            return 0.0;
        }
        self.roughness
            * crate::noise::unit_noise(self.visual_seed, along / HEIGHT_CELL, lateral / HEIGHT_CELL)
    }
}

/// Lattice spacing of the height field, meters.
pub(crate) const HEIGHT_CELL: f64 = 0.25;

pub fn make_terrain(class: TerrainClass, seed: u64) -> TerrainSpec {
    let (friction_coeff, roughness, compliance) = class.defaults();
    TerrainSpec {
        terrain_class: class,
        friction_coeff,
        roughness,
        compliance,
        visual_seed: seed,
    }
}

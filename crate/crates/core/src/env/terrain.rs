//! Synthetic seafloor profiles.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerrainKind {
    Flat,
    Sine,
    Ramp,
    Fractal,
}

impl FromStr for TerrainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(TerrainKind::Flat),
            "sine" => Ok(TerrainKind::Sine),
            "ramp" => Ok(TerrainKind::Ramp),
            "fractal" => Ok(TerrainKind::Fractal),
            other => Err(Error::config(
                "terrain.kind",
                format!("unknown terrain kind `{other}` (expected flat, sine, ramp or fractal)"),
            )),
        }
    }
}

impl fmt::Display for TerrainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TerrainKind::Flat => "flat",
            TerrainKind::Sine => "sine",
            TerrainKind::Ramp => "ramp",
            TerrainKind::Fractal => "fractal",
        };
        f.write_str(s)
    }
}

/// Terrain parameters. Depths are positive down, in metres.
///
/// `offset` is the mean seafloor depth for every kind. Fields irrelevant to the chosen
/// kind are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerrainConfig {
    pub kind: TerrainKind,
    pub offset: f64,
    pub amplitude: f64,
    pub wavelength: f64,
    pub slope: f64,
    /// Per-level amplitude decay of the fractal, in (0, 1).
    pub roughness: f64,
    /// Number of midpoint-displacement refinement levels.
    pub levels: u32,
    /// Along-track extent covered by the fractal samples (m).
    pub length: f64,
    pub seed: u64,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        Self {
            kind: TerrainKind::Sine,
            offset: 20.0,
            amplitude: 2.0,
            wavelength: 50.0,
            slope: 0.0,
            roughness: 0.55,
            levels: 8,
            length: 200.0,
            seed: 0,
        }
    }
}

impl TerrainConfig {
    pub fn flat(depth: f64) -> Self {
        Self {
            kind: TerrainKind::Flat,
            offset: depth,
            ..Self::default()
        }
    }

    pub fn sine(offset: f64, amplitude: f64, wavelength: f64) -> Self {
        Self {
            kind: TerrainKind::Sine,
            offset,
            amplitude,
            wavelength,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.offset.is_finite() {
            return Err(Error::config("terrain.offset", "must be finite"));
        }
        match self.kind {
            TerrainKind::Flat => {}
            TerrainKind::Sine => {
                if !(self.wavelength > 0.0) {
                    return Err(Error::config("terrain.wavelength", "must be > 0"));
                }
                if !self.amplitude.is_finite() {
                    return Err(Error::config("terrain.amplitude", "must be finite"));
                }
            }
            TerrainKind::Ramp => {
                if !self.slope.is_finite() {
                    return Err(Error::config("terrain.slope", "must be finite"));
                }
            }
            TerrainKind::Fractal => {
                if !(self.roughness > 0.0 && self.roughness < 1.0) {
                    return Err(Error::config("terrain.roughness", "must lie in (0, 1)"));
                }
                if !(1..=20).contains(&self.levels) {
                    return Err(Error::config("terrain.levels", "must lie in 1..=20"));
                }
                if !(self.length > 0.0) {
                    return Err(Error::config("terrain.length", "must be > 0"));
                }
                if !self.amplitude.is_finite() {
                    return Err(Error::config("terrain.amplitude", "must be finite"));
                }
            }
        }
        Ok(())
    }
}

/// An evaluable depth profile `depth(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainProfile {
    config: TerrainConfig,
    /// Fractal samples on a uniform grid over `[0, length]`.
    samples: Vec<f64>,
}

/// Builds a profile. `seed` overrides `config.seed` for the fractal kind.
pub fn terrain_generate(config: &TerrainConfig, seed: u64) -> Result<TerrainProfile> {
    config.validate()?;
    let mut config = config.clone();
    config.seed = seed;
    let samples = match config.kind {
        TerrainKind::Fractal => midpoint_displacement(&config),
        _ => Vec::new(),
    };
    Ok(TerrainProfile { config, samples })
}

fn midpoint_displacement(cfg: &TerrainConfig) -> Vec<f64> {
    let n = 1usize << cfg.levels;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut h = vec![0.0; n + 1];
    let mut step = n;
    let mut scale = cfg.amplitude;
    while step > 1 {
        let half = step / 2;
        let mut i = half;
        while i < n {
            let mid = 0.5 * (h[i - half] + h[i + half]);
            h[i] = mid + scale * rng.random_range(-1.0..=1.0);
            i += step;
        }
        step = half;
        scale *= cfg.roughness;
    }
    h.into_iter().map(|v| v + cfg.offset).collect()
}

impl TerrainProfile {
    pub fn config(&self) -> &TerrainConfig {
        &self.config
    }

    pub fn kind(&self) -> TerrainKind {
        self.config.kind
    }

    /// Seafloor depth at along-track position `x`.
    pub fn depth(&self, x: f64) -> f64 {
        let c = &self.config;
        match c.kind {
            TerrainKind::Flat => c.offset,
            TerrainKind::Sine => {
                c.offset + c.amplitude * (2.0 * std::f64::consts::PI * x / c.wavelength).sin()
            }
            TerrainKind::Ramp => c.offset + c.slope * x,
            TerrainKind::Fractal => {
                let n = self.samples.len() - 1;
                let pos = (x / c.length).clamp(0.0, 1.0) * n as f64;
                let i = (pos.floor() as usize).min(n - 1);
                let frac = pos - i as f64;
                self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
            }
        }
    }
}

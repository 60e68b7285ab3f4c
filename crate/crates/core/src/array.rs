//! Linear array geometry, parametric element patterns and steering vectors.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::CVector;

/// Direction measured from broadside, stored in radians.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub const fn from_radians(rad: f64) -> Self {
        Angle(rad)
    }

    pub fn from_degrees(deg: f64) -> Self {
        Angle(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// True for directions in `[-90°, 90°]`.
    pub fn in_visible_region(self) -> bool {
        self.0.abs() <= FRAC_PI_2 + 1e-12
    }
}

/// Unit used for the argument of `amp * cos(scale * theta)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternAngleUnit {
    #[default]
    Radians,
    Degrees,
}

/// Sign of the propagation phase term. `ExpMinusJ` gives entries
/// `g_n(θ) exp(-j ω τ_n(θ))`; `ExpPlusJ` is its complex conjugate. Every
/// response level, gain and real-valued INR is identical under both; only
/// complex parameters come out conjugated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConvention {
    #[default]
    ExpMinusJ,
    ExpPlusJ,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementSpec {
    /// Position along the array axis, metres.
    pub position_x: f64,
    pub pattern_amp: f64,
    pub pattern_scale: f64,
}

impl ElementSpec {
    pub fn isotropic(position_x: f64) -> Self {
        Self {
            position_x,
            pattern_amp: 1.0,
            pattern_scale: 0.0,
        }
    }

    fn gain(&self, theta: Angle, unit: PatternAngleUnit) -> f64 {
        let arg = match unit {
            PatternAngleUnit::Radians => theta.radians(),
            PatternAngleUnit::Degrees => theta.degrees(),
        };
        self.pattern_amp * (self.pattern_scale * arg).cos()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayModel {
    elements: Vec<ElementSpec>,
    omega: f64,
    wave_speed: f64,
    pattern_angle_unit: PatternAngleUnit,
    phase_convention: PhaseConvention,
}

pub const DEFAULT_WAVE_SPEED: f64 = 3e8;

const TAPERED11_JSON: &str = include_str!("../assets/tapered11.json");

/// Names accepted by [`ArrayModel::bundled`].
pub const BUNDLED_ARRAYS: &[&str] = &["tapered11"];

impl ArrayModel {
    pub fn new(elements: Vec<ElementSpec>, omega: f64, wave_speed: f64) -> Result<Self> {
        let model = Self {
            elements,
            omega,
            wave_speed,
            pattern_angle_unit: PatternAngleUnit::Radians,
            phase_convention: PhaseConvention::ExpMinusJ,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_pattern_angle_unit(mut self, unit: PatternAngleUnit) -> Self {
        self.pattern_angle_unit = unit;
        self
    }

    pub fn with_phase_convention(mut self, convention: PhaseConvention) -> Self {
        self.phase_convention = convention;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.elements.len() < 2 {
            return Err(Error::InvalidArray(format!(
                "need at least 2 elements, got {}",
                self.elements.len()
            )));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidArray(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if !(self.wave_speed.is_finite() && self.wave_speed > 0.0) {
            return Err(Error::InvalidArray(format!(
                "wave speed must be positive, got {}",
                self.wave_speed
            )));
        }
        for (n, e) in self.elements.iter().enumerate() {
            if !e.position_x.is_finite() || !e.pattern_scale.is_finite() {
                return Err(Error::InvalidArray(format!("element {} has non-finite fields", n + 1)));
            }
            if !(e.pattern_amp.is_finite() && e.pattern_amp > 0.0) {
                return Err(Error::InvalidArray(format!(
                    "element {} amplitude must be positive, got {}",
                    n + 1,
                    e.pattern_amp
                )));
            }
        }
        Ok(())
    }

    /// The 11-element nonuniform array with nonisotropic elements shipped
    /// with the crate (λ = 1 m).
    pub fn tapered11() -> Self {
        Self::from_json(TAPERED11_JSON).expect("bundled tapered11 asset is valid")
    }

    pub fn bundled(name: &str) -> Option<Self> {
        match name {
            "tapered11" => Some(Self::tapered11()),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[ElementSpec] {
        &self.elements
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn wave_speed(&self) -> f64 {
        self.wave_speed
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.wave_speed / self.omega
    }

    pub fn pattern_angle_unit(&self) -> PatternAngleUnit {
        self.pattern_angle_unit
    }

    pub fn phase_convention(&self) -> PhaseConvention {
        self.phase_convention
    }

    pub fn element_gain(&self, n: usize, theta: Angle) -> f64 {
        self.elements[n].gain(theta, self.pattern_angle_unit)
    }

    /// `a(θ)`: entry n is `g_n(θ) exp(∓j ω x_n sin θ / c)`, phase referenced
    /// to `x = 0`.
    pub fn steering_vector(&self, theta: Angle) -> CVector {
        let sign = match self.phase_convention {
            PhaseConvention::ExpMinusJ => -1.0,
            PhaseConvention::ExpPlusJ => 1.0,
        };
        let k = self.omega / self.wave_speed;
        let s = theta.radians().sin();
        let entries = self
            .elements
            .iter()
            .map(|e| {
                let g = e.gain(theta, self.pattern_angle_unit);
                Complex64::from_polar(g, sign * k * e.position_x * s)
            })
            .collect();
        CVector::new(entries).expect("steering vector entries are finite")
    }

    pub fn from_config(config: &ArrayConfig) -> Result<Self> {
        let values = [config.omega_rad_s, config.wave_speed_m_s];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArray("non-finite frequency or wave speed".into()));
        }
        let elements = config
            .elements
            .iter()
            .map(|e| ElementSpec {
                position_x: e.x_m,
                pattern_amp: e.amp,
                pattern_scale: e.scale,
            })
            .collect();
        let model = Self {
            elements,
            omega: config.omega_rad_s,
            wave_speed: config.wave_speed_m_s,
            pattern_angle_unit: config.pattern_angle_unit,
            phase_convention: config.phase_convention,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_config(&self) -> ArrayConfig {
        ArrayConfig {
            omega_rad_s: self.omega,
            wave_speed_m_s: self.wave_speed,
            pattern_angle_unit: self.pattern_angle_unit,
            phase_convention: self.phase_convention,
            elements: self
                .elements
                .iter()
                .map(|e| ElementConfig {
                    x_m: e.position_x,
                    amp: e.pattern_amp,
                    scale: e.pattern_scale,
                })
                .collect(),
        }
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let config: ArrayConfig = serde_json::from_str(src).map_err(|e| Error::InvalidArray(e.to_string()))?;
        Self::from_config(&config)
    }
}

/// Isotropic uniform linear array with element n at `(n - 1) * spacing`.
pub fn make_ula(n: usize, spacing: f64, omega: f64) -> Result<ArrayModel> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidArray(format!("spacing must be positive, got {spacing}")));
    }
    let elements = (0..n).map(|i| ElementSpec::isotropic(i as f64 * spacing)).collect();
    ArrayModel::new(elements, omega, DEFAULT_WAVE_SPEED)
}

/// On-disk array description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub omega_rad_s: f64,
    #[serde(default = "default_wave_speed")]
    pub wave_speed_m_s: f64,
    #[serde(default)]
    pub pattern_angle_unit: PatternAngleUnit,
    #[serde(default)]
    pub phase_convention: PhaseConvention,
    pub elements: Vec<ElementConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementConfig {
    pub x_m: f64,
    #[serde(default = "default_amp")]
    pub amp: f64,
    #[serde(default)]
    pub scale: f64,
}

fn default_wave_speed() -> f64 {
    DEFAULT_WAVE_SPEED
}

fn default_amp() -> f64 {
    1.0
}

pub fn load_array_config(path: impl AsRef<Path>) -> Result<ArrayModel> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path).map_err(|e| Error::InvalidArray(format!("{}: {e}", path.display())))?;
    ArrayModel::from_json(&src)
}

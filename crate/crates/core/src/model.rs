//! Physical parameters, gate specifications and unit conventions.
//!
//! Energies are carried in meV and times in ps. Internally every formula is
//! written with ħ = k_B = 1; [`UnitSystem`] holds the single conversion
//! constant that turns an energy into an angular frequency.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// ħ in meV·ps.
pub const HBAR_MEV_PS: f64 = 0.658_211_956_9;

/// k_B in meV/K.
pub const KB_MEV_PER_K: f64 = 0.086_173_332_62;

/// Fraction of the Rabi angular frequency above which the loop speed is
/// flagged as non-adiabatic.
pub const ADIABATIC_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub hbar_mev_ps: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self { hbar_mev_ps: HBAR_MEV_PS }
    }
}

impl UnitSystem {
    /// Energy (meV) to angular frequency (rad/ps).
    pub fn to_angular_frequency(&self, energy_mev: f64) -> f64 {
        energy_mev / self.hbar_mev_ps
    }

    /// Angular frequency (rad/ps) to energy (meV).
    pub fn to_energy(&self, omega_rad_ps: f64) -> f64 {
        omega_rad_ps * self.hbar_mev_ps
    }

    /// Time in ps to the natural time unit ħ/meV.
    pub fn ps_to_natural(&self, t_ps: f64) -> f64 {
        t_ps / self.hbar_mev_ps
    }

    pub fn natural_to_ps(&self, t_nat: f64) -> f64 {
        t_nat * self.hbar_mev_ps
    }
}

/// `e / ħ` with the fixed ħ of [`HBAR_MEV_PS`].
pub fn to_angular_frequency(energy_mev: f64) -> f64 {
    UnitSystem::default().to_angular_frequency(energy_mev)
}

pub fn kelvin_to_mev(t_kelvin: f64) -> f64 {
    t_kelvin * KB_MEV_PER_K
}

/// Laser and system energies together with the adiabatic speed cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Energy ε of the degenerate levels, meV.
    pub epsilon: f64,
    /// Rabi norm Ω, meV.
    pub omega: f64,
    /// Maximal angular speed on the parameter sphere, rad/ps.
    pub v_max: f64,
    /// Bath temperature as an energy (k_B = 1), meV.
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Warning {
    /// `v_max` exceeds a tenth of the Rabi angular frequency.
    Adiabaticity { v_max: String, limit: String },
    /// Bright and dark energies are so close that the rotating-frame
    /// description loses its gap.
    SmallGap,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::Adiabaticity { v_max, limit } => write!(
                f,
                "v_max = {v_max} rad/ps exceeds the adiabatic limit {limit} rad/ps"
            ),
            Warning::SmallGap => write!(f, "bright/dark gap is vanishingly small"),
        }
    }
}

impl PhysicalParams {
    /// `v_max = Ω/divisor` read as the angular speed equal to the Rabi
    /// angular frequency Ω/ħ divided by `divisor`.
    pub fn with_rabi_fraction(epsilon: f64, omega: f64, divisor: f64, temperature: f64) -> Self {
        Self {
            epsilon,
            omega,
            v_max: to_angular_frequency(omega) / divisor,
            temperature,
        }
    }

    /// Ω = 10 meV, ε = 1 eV, v_max = Ω/50, T = 0.01 meV.
    pub fn reference() -> Self {
        Self::with_rabi_fraction(1000.0, 10.0, 50.0, 0.01)
    }

    /// Rabi angular frequency Ω/ħ in rad/ps.
    pub fn omega_rad_ps(&self) -> f64 {
        to_angular_frequency(self.omega)
    }

    /// Bright energies `(λ+, λ-) = [ε ± √(ε² + 4Ω²)] / 2`.
    pub fn bright_energies(&self) -> (f64, f64) {
        bright_energies(self.epsilon, self.omega)
    }

    /// Hard errors for non-physical input, warnings for soft violations.
    pub fn validate(&self) -> Result<Vec<Warning>> {
        let finite = [self.epsilon, self.omega, self.v_max, self.temperature]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite physical parameter".into()));
        }
        if self.omega <= 0.0 {
            return Err(Error::InvalidParameter(format!("omega must be > 0, got {}", self.omega)));
        }
        if self.v_max <= 0.0 {
            return Err(Error::InvalidParameter(format!("v_max must be > 0, got {}", self.v_max)));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.temperature < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        let mut warnings = Vec::new();
        let limit = ADIABATIC_FRACTION * self.omega_rad_ps();
        if self.v_max > limit {
            warnings.push(Warning::Adiabaticity {
                v_max: format!("{:.6}", self.v_max),
                limit: format!("{:.6}", limit),
            });
        }
        let (lp, _) = self.bright_energies();
        if (lp - self.epsilon).abs() < 1e-12 * self.epsilon {
            warnings.push(Warning::SmallGap);
        }
        Ok(warnings)
    }
}

pub fn bright_energies(epsilon: f64, omega: f64) -> (f64, f64) {
    let root = (epsilon * epsilon + 4.0 * omega * omega).sqrt();
    let plus = 0.5 * (epsilon + root);
    // (ε - root)/2 written without cancellation.
    let minus = -2.0 * omega * omega / (epsilon + root);
    (plus, minus)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateLabel {
    Not,
    Hadamard,
    Custom,
}

impl fmt::Display for GateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateLabel::Not => "NOT",
            GateLabel::Hadamard => "HADAMARD",
            GateLabel::Custom => "CUSTOM",
        })
    }
}

impl std::str::FromStr for GateLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NOT" => Ok(GateLabel::Not),
            "HADAMARD" => Ok(GateLabel::Hadamard),
            "CUSTOM" => Ok(GateLabel::Custom),
            other => Err(Error::InvalidParameter(format!("unknown gate label {other:?}"))),
        }
    }
}

/// A logical gate identified by the solid angle its loop must enclose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub solid_angle: f64,
    pub label: GateLabel,
}

impl GateSpec {
    pub fn not() -> Self {
        Self { solid_angle: PI / 2.0, label: GateLabel::Not }
    }

    pub fn hadamard() -> Self {
        Self { solid_angle: PI / 4.0, label: GateLabel::Hadamard }
    }

    pub fn custom(solid_angle: f64) -> Result<Self> {
        let gate = Self { solid_angle, label: GateLabel::Custom };
        gate.validate()?;
        Ok(gate)
    }

    pub fn from_label(label: GateLabel, solid_angle: Option<f64>) -> Result<Self> {
        match label {
            GateLabel::Not => Ok(Self::not()),
            GateLabel::Hadamard => Ok(Self::hadamard()),
            GateLabel::Custom => {
                let a = solid_angle.ok_or_else(|| {
                    Error::InvalidParameter("CUSTOM gate needs a solid angle".into())
                })?;
                Self::custom(a)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.solid_angle;
        if !(a > 0.0 && a < 4.0 * PI) {
            return Err(Error::InvalidParameter(format!("solid angle {a} outside (0, 4π)")));
        }
        let expected = match self.label {
            GateLabel::Not => Some(PI / 2.0),
            GateLabel::Hadamard => Some(PI / 4.0),
            GateLabel::Custom => None,
        };
        if let Some(e) = expected {
            if (a - e).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "{} gate requires solid angle {e}, got {a}",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

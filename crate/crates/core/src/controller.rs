//! Pseudo-impedance softness rendering: the motor command grows linearly with fingertip
//! penetration, `u = theta_eq + 0.01 k s`.
//!
//! Penetration is in virtual scene units and commands are servo degrees.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const SOFTNESS_GAIN: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftnessParams<T> {
    pub k: T,
    /// Motor position at the moment the clutch engaged.
    pub theta_eq: T,
}

impl<T: Real> SoftnessParams<T> {
    pub fn new(k: T, theta_eq: T) -> Result<Self> {
        if !(k >= T::zero()) || !k.is_finite() || !theta_eq.is_finite() {
            return Err(Error::domain(format!("softness k must be finite and >= 0, got {k}")));
        }
        Ok(Self { k, theta_eq })
    }

    pub fn gain(&self) -> T {
        T::lit(SOFTNESS_GAIN)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenetrationMode {
    /// Negative penetration is an error.
    #[default]
    Strict,
    /// Negative penetration is treated as no contact.
    Clamp,
}

pub fn motor_command<T: Real>(params: &SoftnessParams<T>, s: T) -> Result<T> {
    motor_command_with(params, s, PenetrationMode::Strict)
}

pub fn motor_command_with<T: Real>(params: &SoftnessParams<T>, s: T, mode: PenetrationMode) -> Result<T> {
    if !s.is_finite() {
        return Err(Error::domain("penetration must be finite"));
    }
    let s = match mode {
        PenetrationMode::Strict if s < T::zero() => {
            return Err(Error::domain(format!("negative penetration {s}")));
        }
        PenetrationMode::Strict => s,
        PenetrationMode::Clamp => s.max(T::zero()),
    };
    Ok(params.theta_eq + params.gain() * params.k * s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SoftnessLabel {
    A,
    B,
    C,
}

impl SoftnessLabel {
    pub const ALL: [SoftnessLabel; 3] = [SoftnessLabel::A, SoftnessLabel::B, SoftnessLabel::C];
}

impl fmt::Display for SoftnessLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for SoftnessLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(SoftnessLabel::A),
            "B" => Ok(SoftnessLabel::B),
            "C" => Ok(SoftnessLabel::C),
            other => Err(Error::usage(format!("unknown softness level {other:?} (A, B, C)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftnessLevel<T> {
    pub label: SoftnessLabel,
    pub k: T,
}

/// The three rendered objects, rigid (A) to soft (C).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftnessLevels<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> Default for SoftnessLevels<T> {
    fn default() -> Self {
        Self { a: T::lit(300.0), b: T::lit(150.0), c: T::lit(50.0) }
    }
}

impl<T: Real> SoftnessLevels<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > self.b && self.b > self.c && self.c >= T::zero()) {
            return Err(Error::domain(format!(
                "softness levels must satisfy k_A > k_B > k_C >= 0 (got {}, {}, {})",
                self.a, self.b, self.c
            )));
        }
        Ok(())
    }

    pub fn level(&self, label: SoftnessLabel) -> SoftnessLevel<T> {
        let k = match label {
            SoftnessLabel::A => self.a,
            SoftnessLabel::B => self.b,
            SoftnessLabel::C => self.c,
        };
        SoftnessLevel { label, k }
    }
}

pub fn render_profile<T: Real>(level: &SoftnessLevel<T>, theta_eq: T, s: &[T]) -> Result<Vec<T>> {
    if s.is_empty() {
        return Err(Error::usage("empty penetration trajectory"));
    }
    let params = SoftnessParams::new(level.k, theta_eq)?;
    s.iter().map(|&v| motor_command(&params, v)).collect()
}

/// Mechanical travel of the servo.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServoRange<T> {
    pub min: T,
    pub max: T,
}

impl<T: Real> Default for ServoRange<T> {
    fn default() -> Self {
        Self { min: T::zero(), max: T::lit(180.0) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServoCommand<T> {
    pub angle: T,
    pub saturated: bool,
}

impl<T: Real> ServoRange<T> {
    pub fn apply(&self, u: T) -> ServoCommand<T> {
        let angle = u.max(self.min).min(self.max);
        ServoCommand { angle, saturated: angle != u }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_examples() {
        let p = SoftnessParams::new(200.0f64, 40.0).unwrap();
        assert_eq!(motor_command(&p, 0.0).unwrap(), 40.0);
        assert!((motor_command(&p, 5.0).unwrap() - 50.0).abs() < 1e-12);
        let zero = SoftnessParams::new(0.0, 40.0).unwrap();
        assert_eq!(motor_command(&zero, 123.0).unwrap(), 40.0);
        assert!(motor_command(&p, -1.0).is_err());
        assert_eq!(motor_command_with(&p, -1.0, PenetrationMode::Clamp).unwrap(), 40.0);
    }

    #[test]
    fn level_ordering() {
        let levels = SoftnessLevels::<f64>::default();
        levels.validate().unwrap();
        let cmd = |l| render_profile(&levels.level(l), 10.0, &[2.0]).unwrap()[0];
        assert!(cmd(SoftnessLabel::A) > cmd(SoftnessLabel::B));
        assert!(cmd(SoftnessLabel::B) > cmd(SoftnessLabel::C));
        assert!(SoftnessLevels { a: 1.0, b: 2.0, c: 0.0 }.validate().is_err());
    }

    #[test]
    fn constant_trajectory() {
        let l = SoftnessLevel { label: SoftnessLabel::B, k: 150.0f32 };
        let out = render_profile(&l, 5.0, &[3.0; 4]).unwrap();
        assert!(out.windows(2).all(|w| w[0] == w[1]));
        assert!(render_profile(&l, 5.0, &[]).is_err());
    }

    #[test]
    fn servo_saturation() {
        let r = ServoRange::<f64>::default();
        assert_eq!(r.apply(200.0), ServoCommand { angle: 180.0, saturated: true });
        assert_eq!(r.apply(90.0), ServoCommand { angle: 90.0, saturated: false });
    }
}

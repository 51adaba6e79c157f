//! Shared JSON configuration for models and softness levels. Missing sections fall back to
//! the defaults of each model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::{ServoRange, SoftnessLevels};
use crate::error::{Error, Result};
use crate::sim::Scene;
use crate::transmission::{BevelMap, BrakeModel, ClutchModel, PulleyRadii};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub clutch: ClutchModel,
    pub brake: BrakeModel,
    pub bevel: BevelMap<f64>,
    pub pulleys: PulleyRadii<f64>,
    pub softness: SoftnessLevels<f64>,
    pub servo: ServoRange<f64>,
    pub scene: Scene,
    /// Recalibrate the clutch overhead to this mean latency (ms) after loading.
    pub clutch_target_latency_ms: Option<f64>,
    /// Recalibrate the brake overhead to this mean latency (ms) after loading.
    pub brake_target_latency_ms: Option<f64>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: Config = serde_json::from_str(text).map_err(|e| Error::data(format!("config: {e}")))?;
        if let Some(t) = cfg.clutch_target_latency_ms {
            cfg.clutch = cfg.clutch.calibrate_latency(t)?;
        }
        if let Some(t) = cfg.brake_target_latency_ms {
            cfg.brake = cfg.brake.calibrate_latency(t)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.clutch.validate()?;
        self.brake.validate()?;
        self.softness.validate()?;
        if !(self.servo.min < self.servo.max) {
            return Err(Error::data("servo range must be ordered"));
        }
        if !(self.bevel.hub_per_shaft > 0.0) || !(self.bevel.hub_limit > 0.0) {
            return Err(Error::data("bevel ratio and hub limit must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg = Config::from_json(r#"{"softness": {"a": 400, "b": 200, "c": 20}}"#).unwrap();
        assert_eq!(cfg.softness.a, 400.0);
        assert_eq!(cfg.clutch, ClutchModel::default());
    }

    #[test]
    fn rejects_bad_config() {
        assert!(Config::from_json(r#"{"softness": {"a": 1, "b": 2, "c": 3}}"#).is_err());
        assert!(Config::from_json(r#"{"unknown": 1}"#).is_err());
        assert!(Config::from_json("not json").is_err());
    }

    #[test]
    fn json_round_trip() {
        let cfg = Config::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(Config::from_json(&text).unwrap(), cfg);
    }
}

//! Tunable thresholds for avatar, checkout and observation behavior.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub eye_height: f64,
    pub hand_drop: f64,
    /// Lateral and forward offset of each hand at spawn, camera frame.
    pub hand_spread: f64,
    pub hand_forward: f64,
    pub grasp_radius: f64,
    pub fingertip_offset: f64,
    pub reach: f64,
    pub wall_skin: f64,
    pub body_radius: f64,
    pub pitch_limit_deg: f64,

    pub scan_max_distance: f64,
    pub scan_max_angle_deg: f64,
    pub touch_distance: f64,

    pub legible_name_distance: f64,
    pub legible_angle_deg: f64,
    pub legible_expiration_distance: f64,

    pub fov_y_deg: f64,
    pub image_width: u32,
    pub image_height: u32,

    /// Simulated seconds per mutating command.
    pub tick_dt: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            eye_height: 1.6,
            hand_drop: 0.5,
            hand_spread: 0.2,
            hand_forward: 0.3,
            grasp_radius: 0.15,
            fingertip_offset: 0.09,
            reach: 1.2,
            wall_skin: 0.01,
            body_radius: 0.2,
            pitch_limit_deg: 89.0,
            scan_max_distance: 0.3,
            scan_max_angle_deg: 30.0,
            touch_distance: 0.02,
            legible_name_distance: 2.0,
            legible_angle_deg: 25.0,
            legible_expiration_distance: 0.6,
            fov_y_deg: 60.0,
            image_width: 640,
            image_height: 480,
            tick_dt: 0.05,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl SimConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<SimConfig, ConfigError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_fills_defaults() {
        let c: SimConfig = serde_json::from_str(r#"{"grasp_radius": 0.2}"#).unwrap();
        assert_eq!(c.grasp_radius, 0.2);
        assert_eq!(c.reach, 1.2);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<SimConfig>(r#"{"grasp": 0.2}"#).is_err());
    }

    #[test]
    fn hash_tracks_values() {
        let a = SimConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.reach = 1.1;
        assert_ne!(a.hash(), b.hash());
    }
}

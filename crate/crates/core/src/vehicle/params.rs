use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;
use crate::kv::KeyValues;

/// Physical constants of the simulated car. All values are SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Vehicle mass (kg).
    pub mass: f64,
    /// Center of gravity to front axle (m).
    pub lf: f64,
    /// Center of gravity to rear axle (m).
    pub lr: f64,
    /// Tire rolling radius (m).
    pub wheel_radius: f64,
    /// Front cornering stiffness per tire (N/rad).
    pub c_alpha_f: f64,
    /// Rear cornering stiffness per tire (N/rad).
    pub c_alpha_r: f64,
    /// Rolling-resistance coefficient.
    pub rolling_coeff: f64,
    /// Maximum front-wheel steering angle (rad).
    pub max_steer: f64,
    /// Maximum steering rate of the steering actuator (rad/s).
    pub max_steer_rate: f64,
    /// Yaw moment of inertia (kg m^2).
    pub yaw_inertia: f64,
    pub drag_coeff: f64,
    /// Air density (kg/m^3).
    pub air_density: f64,
    /// Frontal area (m^2).
    pub frontal_area: f64,
    /// Peak motor power (W).
    pub max_power: f64,
    /// Motor torque coefficient at the wheel (N m).
    pub torque_coeff: f64,
    /// Full-brake force (N).
    pub brake_coeff: f64,
    /// Tire-road friction coefficient.
    pub mu_max: f64,
    /// Gravitational acceleration (m/s^2).
    pub gravity: f64,
}

/// Config-file keys, in canonical order. The order also fixes the parameter hash.
pub const PARAM_KEYS: [&str; 18] = [
    "mass",
    "lf",
    "lr",
    "wheel_radius",
    "c_alpha_f",
    "c_alpha_r",
    "f_r",
    "delta_max",
    "delta_rate_max",
    "i_z",
    "c_d",
    "rho_a",
    "a_f",
    "p_max",
    "k_m",
    "k_b",
    "mu_max",
    "g",
];

impl Default for VehicleParams {
    /// The all-electric mid-size sedan profile.
    fn default() -> Self {
        VehicleParams {
            mass: 1860.0,
            lf: 1.17,
            lr: 1.77,
            wheel_radius: 0.31,
            c_alpha_f: 54_500.0,
            c_alpha_r: 54_500.0,
            rolling_coeff: 0.015,
            max_steer: 35f64.to_radians(),
            max_steer_rate: 0.7,
            yaw_inertia: 4000.0,
            drag_coeff: 0.3,
            air_density: 1.2258,
            frontal_area: 2.05,
            max_power: 125_000.0,
            torque_coeff: 1550.0,
            brake_coeff: 16_422.0,
            mu_max: 1.15,
            gravity: 9.81,
        }
    }
}

impl VehicleParams {
    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    /// Speed at which full-torque traction reaches the power limit (m/s).
    pub fn v_base(&self) -> f64 {
        self.max_power * self.wheel_radius / self.torque_coeff
    }

    /// Largest resultant tire force the road can transmit, `mu_max * m * g` (N).
    pub fn friction_limit(&self) -> f64 {
        self.mu_max * self.mass * self.gravity
    }

    /// Total vertical tire load (N).
    pub fn normal_load(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn with_mu_max(mut self, mu_max: f64) -> Self {
        self.mu_max = mu_max;
        self
    }

    fn values(&self) -> [f64; 18] {
        [
            self.mass,
            self.lf,
            self.lr,
            self.wheel_radius,
            self.c_alpha_f,
            self.c_alpha_r,
            self.rolling_coeff,
            self.max_steer,
            self.max_steer_rate,
            self.yaw_inertia,
            self.drag_coeff,
            self.air_density,
            self.frontal_area,
            self.max_power,
            self.torque_coeff,
            self.brake_coeff,
            self.mu_max,
            self.gravity,
        ]
    }

    fn slot(&mut self, idx: usize) -> &mut f64 {
        match idx {
            0 => &mut self.mass,
            1 => &mut self.lf,
            2 => &mut self.lr,
            3 => &mut self.wheel_radius,
            4 => &mut self.c_alpha_f,
            5 => &mut self.c_alpha_r,
            6 => &mut self.rolling_coeff,
            7 => &mut self.max_steer,
            8 => &mut self.max_steer_rate,
            9 => &mut self.yaw_inertia,
            10 => &mut self.drag_coeff,
            11 => &mut self.air_density,
            12 => &mut self.frontal_area,
            13 => &mut self.max_power,
            14 => &mut self.torque_coeff,
            15 => &mut self.brake_coeff,
            16 => &mut self.mu_max,
            17 => &mut self.gravity,
            _ => unreachable!("parameter index out of range"),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (key, value) in PARAM_KEYS.iter().zip(self.values()) {
            if !value.is_finite() || value <= 0.0 {
                return Err(ConfigError::InvalidValue {
                    key: key.to_string(),
                    message: format!("must be finite and positive, got {value}"),
                });
            }
        }
        if self.max_steer >= std::f64::consts::FRAC_PI_2 {
            return Err(ConfigError::InvalidValue {
                key: "delta_max".into(),
                message: "must be below pi/2".into(),
            });
        }
        Ok(())
    }

    /// Applies the keys present in `kv` on top of `self`. Unknown keys are rejected.
    pub fn apply(mut self, kv: &KeyValues) -> Result<Self, ConfigError> {
        kv.ensure_known(&PARAM_KEYS)?;
        for (idx, key) in PARAM_KEYS.iter().enumerate() {
            if let Some(v) = kv.f64(key)? {
                *self.slot(idx) = v;
            }
        }
        self.validate()?;
        Ok(self)
    }

    /// Loads a vehicle file; keys it omits keep their default values.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::default().apply(&KeyValues::read(path)?)
    }

    /// Renders the parameters in the config-file format.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (key, value) in PARAM_KEYS.iter().zip(self.values()) {
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    /// SHA-256 over the little-endian bytes of every parameter in canonical order.
    pub fn hash(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for v in self.values() {
            hasher.update(v.to_le_bytes());
        }
        hasher.finalize().into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_constants() {
        let p = VehicleParams::default();
        p.validate().unwrap();
        assert!((p.v_base() - 25.0).abs() < 1e-12);
        assert!((p.torque_coeff / p.wheel_radius - 5000.0).abs() < 1e-9);
        assert!((p.wheelbase() - 2.94).abs() < 1e-12);
    }

    #[test]
    fn config_round_trip() {
        let p = VehicleParams::default().with_mu_max(1.0);
        let kv = KeyValues::parse(&p.to_config_string()).unwrap();
        let q = VehicleParams::default().apply(&kv).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.hash(), q.hash());
    }

    #[test]
    fn rejects_unknown_and_non_positive() {
        let kv = KeyValues::parse("mass = 1000\nwings = 2").unwrap();
        assert!(matches!(
            VehicleParams::default().apply(&kv),
            Err(ConfigError::UnknownKey(_))
        ));
        let kv = KeyValues::parse("mass = -1").unwrap();
        assert!(VehicleParams::default().apply(&kv).is_err());
    }

    #[test]
    fn hash_tracks_friction_coefficient() {
        let a = VehicleParams::default();
        assert_ne!(a.hash(), a.with_mu_max(1.0).hash());
    }
}

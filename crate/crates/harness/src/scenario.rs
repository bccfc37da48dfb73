//! Scenario files: one TOML document fully determines a run.
//!
//! Lengths are in metres, masses in kg, forces in N, times in s. Keys with
//! a `_deg` suffix are angles in degrees and keys with a `_hz` suffix are
//! frequencies in Hz; every other angle is in radians.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use vfm_core::{
    ContactParams, ControlError, ControllerParams, ErmParams, GoalState, ModelError,
    ObjectGeometry, ObjectState, PlantParams, SimConfig, SimError,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("override `{key}`: {reason}")]
    Override { key: String, reason: String },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Disk,
    Rectangle,
    PointMass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub shape: ShapeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    pub mass: f64,
    #[serde(default)]
    pub thickness: f64,
    /// Overrides the uniform-plate inertia (kg·m²).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<f64>,
    /// Largest usable rotation radius for this object (m).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErmSpec {
    pub eccentric_mass: f64,
    pub link_length: f64,
}

fn standard_gravity() -> f64 {
    ContactParams::<f64>::STANDARD_GRAVITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSpec {
    pub mu_static: f64,
    pub mu_kinetic: f64,
    pub grip_preload: f64,
    pub finger_radius: f64,
    #[serde(default = "standard_gravity")]
    pub gravity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSpec {
    pub eps_r: f64,
    pub eps_psi_deg: f64,
    pub r_c: f64,
    pub rotate_stop_band_deg: f64,
    pub rotate_stall_time: f64,
    pub theta_kick_deg: f64,
    pub kick_duration: f64,
    pub rotate_hz: f64,
    pub translate_hz: f64,
    pub duty_fraction: f64,
    pub duty_period: f64,
    pub settle_time: f64,
    pub psi_filter_gain: f64,
    pub phase_budget: f64,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        let p = ControllerParams::<f64>::default();
        Self {
            eps_r: p.eps_r,
            eps_psi_deg: p.eps_psi.to_degrees(),
            r_c: p.r_c,
            rotate_stop_band_deg: p.rotate_stop_band.to_degrees(),
            rotate_stall_time: p.rotate_stall_time,
            theta_kick_deg: p.theta_kick.to_degrees(),
            kick_duration: p.kick_duration,
            rotate_hz: p.omega_rotate / std::f64::consts::TAU,
            translate_hz: p.omega_translate / std::f64::consts::TAU,
            duty_fraction: p.duty_fraction,
            duty_period: p.duty_period,
            settle_time: p.settle_time,
            psi_filter_gain: p.psi_filter_gain,
            phase_budget: p.phase_budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSpec {
    pub dt: f64,
    pub sensor_pos_noise_std: f64,
    pub sensor_ang_noise_std_deg: f64,
    pub perturbation_torque_std: f64,
    pub seed: u64,
    pub r_origin_epsilon: f64,
    pub max_sim_time: f64,
}

impl Default for SimSpec {
    fn default() -> Self {
        let s = SimConfig::<f64>::default();
        Self {
            dt: s.dt,
            sensor_pos_noise_std: s.sensor_pos_noise_std,
            sensor_ang_noise_std_deg: s.sensor_ang_noise_std.to_degrees(),
            perturbation_torque_std: s.perturbation_torque_std,
            seed: s.rng_seed,
            r_origin_epsilon: s.r_origin_epsilon,
            max_sim_time: s.max_sim_time,
        }
    }
}

/// Resting start pose in polar form.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    pub r: f64,
    pub phi_deg: f64,
    pub psi_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub r: f64,
    pub phi_deg: f64,
    pub psi_deg: f64,
}

/// Explicit goals, or a uniform sampling region when `list` is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoalsSpec {
    pub count: usize,
    pub r_min: f64,
    /// Defaults to 0.8 of the footprint bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub list: Vec<GoalSpec>,
}

impl Default for GoalsSpec {
    fn default() -> Self {
        Self {
            count: 1,
            r_min: 0.01,
            r_max: None,
            seed: 1,
            list: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub object: ObjectSpec,
    pub erm: ErmSpec,
    pub contact: ContactSpec,
    #[serde(default)]
    pub controller: ControllerSpec,
    #[serde(default)]
    pub sim: SimSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub goals: GoalsSpec,
}

/// One `--set key=value` applied on top of the file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Override {
    pub key: String,
    pub value: String,
    /// Value in the file before the override, if the key was present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub previous: Option<String>,
}

impl fmt::Display for Override {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.previous {
            Some(p) => write!(f, "{} = {} (file: {})", self.key, self.value, p),
            None => write!(f, "{} = {} (not in file)", self.key, self.value),
        }
    }
}

/// Scenario in core types.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub plant: PlantParams<f64>,
    pub controller: ControllerParams<f64>,
    pub sim: SimConfig<f64>,
    pub initial: ObjectState<f64>,
    /// Largest goal radius that is inside the footprint in every direction (m).
    pub footprint_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub scenario: Scenario,
    pub resolved: Resolved,
    pub overrides: Vec<Override>,
}

impl Scenario {
    pub fn from_toml(text: &str, path: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are all representable in TOML")
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let o = &self.object;
        let need = |v: Option<f64>, field: &str| {
            v.ok_or_else(|| invalid(field, format!("required for shape {:?}", o.shape)))
        };
        let mut object = match o.shape {
            ShapeKind::Disk => {
                ObjectGeometry::disk(need(o.radius, "object.radius")?, o.mass, o.thickness)
            }
            ShapeKind::Rectangle => ObjectGeometry::rectangle(
                need(o.width, "object.width")?,
                need(o.height, "object.height")?,
                o.mass,
                o.thickness,
            ),
            ShapeKind::PointMass => {
                ObjectGeometry::point_mass(o.mass, need(o.inertia, "object.inertia")?)
            }
        }
        .map_err(model_error)?;
        if let (Some(i), false) = (o.inertia, o.shape == ShapeKind::PointMass) {
            object = object.with_inertia(i).map_err(model_error)?;
        }

        let c = &self.controller;
        let controller = ControllerParams {
            eps_r: c.eps_r,
            eps_psi: c.eps_psi_deg.to_radians(),
            r_c: c.r_c,
            rotate_stop_band: c.rotate_stop_band_deg.to_radians(),
            rotate_stall_time: c.rotate_stall_time,
            theta_kick: c.theta_kick_deg.to_radians(),
            kick_duration: c.kick_duration,
            omega_rotate: c.rotate_hz * std::f64::consts::TAU,
            omega_translate: c.translate_hz * std::f64::consts::TAU,
            duty_fraction: c.duty_fraction,
            duty_period: c.duty_period,
            settle_time: c.settle_time,
            psi_filter_gain: c.psi_filter_gain,
            phase_budget: c.phase_budget,
            r_origin_epsilon: self.sim.r_origin_epsilon,
        };
        controller.validate().map_err(control_error)?;

        let erm = ErmParams::new(
            self.erm.eccentric_mass,
            self.erm.link_length,
            controller.omega_translate,
        )
        .map_err(model_error)?;
        let mut contact = ContactParams::new(
            self.contact.mu_static,
            self.contact.mu_kinetic,
            self.contact.grip_preload,
            self.contact.finger_radius,
        )
        .map_err(model_error)?;
        contact.gravity = self.contact.gravity;
        contact.validate().map_err(model_error)?;

        let s = &self.sim;
        let sim = SimConfig {
            dt: s.dt,
            sensor_pos_noise_std: s.sensor_pos_noise_std,
            sensor_ang_noise_std: s.sensor_ang_noise_std_deg.to_radians(),
            perturbation_torque_std: s.perturbation_torque_std,
            rng_seed: s.seed,
            r_origin_epsilon: s.r_origin_epsilon,
            max_sim_time: s.max_sim_time,
        };
        sim.validate().map_err(sim_error)?;

        let footprint_bound = match o.max_rc {
            Some(m) if m > 0.0 => m.min(object.inscribed_radius()),
            Some(_) => return Err(invalid("object.max_rc", "must be > 0")),
            None => object.inscribed_radius(),
        };
        if !(controller.r_c < footprint_bound) {
            return Err(invalid(
                "controller.r_c",
                format!(
                    "{} m does not fit inside the footprint bound {} m",
                    controller.r_c, footprint_bound
                ),
            ));
        }
        let i = &self.initial;
        if !(i.r >= 0.0 && i.r <= footprint_bound) {
            return Err(invalid(
                "initial.r",
                format!("must be in [0, {footprint_bound}] m"),
            ));
        }
        for (k, g) in self.goals.list.iter().enumerate() {
            if !(g.r >= 0.0 && g.r <= footprint_bound) {
                return Err(invalid(
                    &format!("goals.list[{k}].r"),
                    format!(
                        "{} m is outside the footprint bound {} m",
                        g.r, footprint_bound
                    ),
                ));
            }
        }
        let (r_min, r_max) = self.sampling_range(footprint_bound);
        if !(r_min >= 0.0 && r_min <= r_max && r_max <= footprint_bound) {
            return Err(invalid(
                "goals.r_max",
                format!(
                    "sampling range [{r_min}, {r_max}] m must lie within [0, {footprint_bound}] m"
                ),
            ));
        }

        Ok(Resolved {
            plant: PlantParams {
                object,
                erm,
                contact,
            },
            controller,
            sim,
            initial: ObjectState::from_polar(i.r, i.phi_deg.to_radians(), i.psi_deg.to_radians()),
            footprint_bound,
        })
    }

    pub fn sampling_range(&self, footprint_bound: f64) -> (f64, f64) {
        (
            self.goals.r_min,
            self.goals.r_max.unwrap_or(0.8 * footprint_bound),
        )
    }

    /// Explicit goals in file order.
    pub fn listed_goals(&self) -> Result<Vec<GoalState<f64>>, ConfigError> {
        self.goals
            .list
            .iter()
            .enumerate()
            .map(|(k, g)| {
                GoalState::new(g.r, g.phi_deg.to_radians(), g.psi_deg.to_radians())
                    .map_err(|e| invalid(&format!("goals.list[{k}]"), e.to_string()))
            })
            .collect()
    }

    /// `n` goals drawn uniformly in `r ∈ [r_min, r_max]`, `φ, ψ ∈ (−π, π]`.
    pub fn sample_goals(&self, footprint_bound: f64, n: usize, seed: u64) -> Vec<GoalState<f64>> {
        let (lo, hi) = self.sampling_range(footprint_bound);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let r = if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    lo
                };
                // (−π, π] as the mirror of [−π, π)
                let phi = -rng.random_range(-PI..PI);
                let psi = -rng.random_range(-PI..PI);
                GoalState::new(r, phi, psi).expect("sampled goals are finite and non-negative")
            })
            .collect()
    }
}

fn model_error(e: ModelError) -> ConfigError {
    match e {
        ModelError::InvalidParameter { field, reason } => invalid(field, reason),
        other => invalid("object", other.to_string()),
    }
}

/// Maps core field names onto scenario keys.
fn scenario_key(field: &str) -> String {
    match field {
        "controller.eps_psi" => "controller.eps_psi_deg".into(),
        "controller.rotate_stop_band" => "controller.rotate_stop_band_deg".into(),
        "controller.theta_kick" => "controller.theta_kick_deg".into(),
        "controller.omega_rotate" => "controller.rotate_hz".into(),
        "controller.omega_translate" => "controller.translate_hz".into(),
        "controller.r_origin_epsilon" => "sim.r_origin_epsilon".into(),
        "sim.sensor_ang_noise_std" => "sim.sensor_ang_noise_std_deg".into(),
        other => other.into(),
    }
}

fn control_error(e: ControlError) -> ConfigError {
    match e {
        ControlError::InvalidParameter { field, reason } => invalid(&scenario_key(field), reason),
        other => invalid("controller", other.to_string()),
    }
}

fn sim_error(e: SimError) -> ConfigError {
    match e {
        SimError::InvalidConfig { field, reason } => invalid(&scenario_key(field), reason),
        other => invalid("sim", other.to_string()),
    }
}

/// Parses an override value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<Override, ConfigError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::Override {
        key: spec.to_string(),
        reason: "expected <dotted.key>=<value>".into(),
    })?;
    let key = key.trim();
    let raw = raw.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override {
            key: key.to_string(),
            reason: "empty path segment".into(),
        });
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| ConfigError::Override {
            key: key.to_string(),
            reason: format!("`{part}` is not a table"),
        })?;
    }
    let mut value = parse_value(raw);
    let last = parts[parts.len() - 1];
    let previous = node.get(last).cloned();
    // integers written where the file holds floats stay floats
    if let (Some(toml::Value::Float(_)), toml::Value::Integer(i)) = (&previous, &value) {
        value = toml::Value::Float(*i as f64);
    }
    node.insert(last.to_string(), value.clone());
    Ok(Override {
        key: key.to_string(),
        value: value.to_string(),
        previous: previous.map(|p| p.to_string()),
    })
}

/// Parses `text`, applies `sets` in order and validates the result.
pub fn load_str(text: &str, path: &str, sets: &[String]) -> Result<Loaded, ConfigError> {
    // parse the file as written first so diagnostics point at its lines
    let mut scenario = Scenario::from_toml(text, path)?;
    let mut overrides = Vec::new();
    if !sets.is_empty() {
        let mut table: toml::Table =
            text.parse()
                .map_err(|e: toml::de::Error| ConfigError::Parse {
                    path: path.to_string(),
                    message: e.to_string(),
                })?;
        for s in sets {
            overrides.push(apply_override(&mut table, s)?);
        }
        scenario = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Override {
                key: overrides
                    .iter()
                    .map(|o| o.key.as_str())
                    .collect::<Vec<_>>()
                    .join(", "),
                reason: e.to_string(),
            })?;
    }
    let resolved = scenario.resolve()?;
    Ok(Loaded {
        scenario,
        resolved,
        overrides,
    })
}

pub fn load(path: &Path, sets: &[String]) -> Result<Loaded, ConfigError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: shown.clone(),
        source,
    })?;
    load_str(&text, &shown, sets)
}

//! Declarative scenario description.
//!
//! [`ScenarioConfig`] is the single serde-friendly structure a front end
//! needs to describe a run: team geometry, physical parameters, controller
//! gains, optimizer setup, reference trajectory, and timing. Every field has
//! a default matching the standard four-carrier benchmark scenario, so an
//! empty document is a valid, runnable configuration.
//!
//! Validation is split in two: [`ScenarioConfig::validate`] checks everything
//! that can be checked declaratively (signs, ranges, cross-field
//! consistency); deeper geometric checks (collinear attachments, singular
//! allocation) happen when the simulator builds its runtime state.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::trajectory::Segment;
use crate::{Mat3, Vec3};

/// A gain that is either one scalar for all axes or a per-axis triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Uniform(f64),
    PerAxis([f64; 3]),
}

impl AxisValue {
    pub fn to_vec3(self) -> Vec3 {
        match self {
            AxisValue::Uniform(v) => Vec3::repeat(v),
            AxisValue::PerAxis([x, y, z]) => Vec3::new(x, y, z),
        }
    }
}

/// Load inertia: isotropic scalar or diagonal triple (kg m^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InertiaValue {
    Isotropic(f64),
    Diagonal([f64; 3]),
}

impl InertiaValue {
    pub fn to_matrix(self) -> Mat3 {
        match self {
            InertiaValue::Isotropic(j) => Mat3::identity() * j,
            InertiaValue::Diagonal([x, y, z]) => Mat3::from_diagonal(&Vec3::new(x, y, z)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadConfig {
    /// Mass in kg.
    pub mass: f64,
    /// Rotational inertia in kg m^2.
    pub inertia: InertiaValue,
    /// Linear/angular viscous damping coefficient (N s/m and N m s).
    pub damping: f64,
    /// Initial position of the center of mass, m.
    pub initial_position: [f64; 3],
    /// Initial attitude as roll-pitch-yaw, rad.
    pub initial_rpy: [f64; 3],
}

impl Default for LoadConfig {
    fn default() -> Self {
        LoadConfig {
            mass: 1.0,
            inertia: InertiaValue::Isotropic(0.01),
            damping: 0.7,
            initial_position: [0.0, 0.0, 1.0],
            initial_rpy: [0.0, 0.0, 0.0],
        }
    }
}

/// How carrier translational dynamics respond to position/velocity targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarrierModelKind {
    /// Point mass with a stiff PD position loop (the physical default).
    PointMassPd,
    /// Targets are adopted exactly each step; useful for isolating the
    /// control stack from carrier dynamics in tests.
    Kinematic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarrierConfig {
    /// Team size n >= 3.
    pub count: usize,
    pub model: CarrierModelKind,
    /// Mass of each carrier, kg.
    pub mass: f64,
    /// PD position gain, N/m.
    pub position_gain: f64,
    /// PD velocity gain, N s/m.
    pub velocity_gain: f64,
    /// Load-frame attachment points, one per carrier. Omitted: a regular
    /// n-gon of radius `attachment_radius` in the load's x-y plane.
    pub attachments: Option<Vec<[f64; 3]>>,
    /// Radius of the default attachment polygon, m.
    pub attachment_radius: f64,
}

impl Default for CarrierConfig {
    fn default() -> Self {
        CarrierConfig {
            count: 4,
            model: CarrierModelKind::PointMassPd,
            mass: 0.01,
            position_gain: 1000.0,
            velocity_gain: 1.5,
            attachments: None,
            attachment_radius: 0.25,
        }
    }
}

impl CarrierConfig {
    /// Attachment points actually in effect (explicit list or default
    /// polygon).
    pub fn attachment_points(&self) -> Vec<Vec3> {
        match &self.attachments {
            Some(list) => list.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect(),
            None => (0..self.count)
                .map(|i| {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / self.count as f64;
                    Vec3::new(
                        self.attachment_radius * a.cos(),
                        self.attachment_radius * a.sin(),
                        0.0,
                    )
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CableConfig {
    /// Unstretched length, m.
    pub length: f64,
    /// Elastic stiffness, N/m.
    pub stiffness: f64,
    /// Stretch-rate damping, N s/m.
    pub damping: f64,
    /// Desired tensions below this are treated as slack-cable errors, N.
    pub tension_floor: f64,
}

impl Default for CableConfig {
    fn default() -> Self {
        CableConfig {
            length: 0.8,
            stiffness: 500.0,
            damping: 0.1,
            tension_floor: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub position: AxisValue,
    pub velocity: AxisValue,
    pub integral_position: AxisValue,
    pub attitude: AxisValue,
    pub angular_rate: AxisValue,
    pub integral_attitude: AxisValue,
    /// Per-axis clamp on the position-error integral, m s.
    pub integral_limit_position: f64,
    /// Per-axis clamp on the attitude-error integral, s.
    pub integral_limit_attitude: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            position: AxisValue::Uniform(5.0),
            velocity: AxisValue::Uniform(2.0),
            integral_position: AxisValue::Uniform(0.9),
            attitude: AxisValue::Uniform(0.5),
            angular_rate: AxisValue::Uniform(0.06),
            integral_attitude: AxisValue::Uniform(0.1),
            integral_limit_position: 2.0,
            integral_limit_attitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// When false the sinusoid keeps its initial parameters for the whole
    /// run (the non-optimized baseline).
    pub enabled: bool,
    /// Minimum carrier speed, m/s.
    pub epsilon: f64,
    /// Initial sinusoid frequency, rad/s.
    pub frequency: f64,
    /// Initial sinusoid amplitude, N.
    pub amplitude: f64,
    /// Search box for the frequency, rad/s.
    pub frequency_bounds: [f64; 2],
    /// Search box for the amplitude, N.
    pub amplitude_bounds: [f64; 2],
    /// Objective weight on the internal-force deviation.
    pub weight_position: f64,
    /// Objective weight on the internal-force-rate deviation.
    pub weight_velocity: f64,
    /// Grid samples per axis for the global stage of the search.
    pub grid_resolution: usize,
    /// Phase offsets, one per nullspace direction; omitted: even spread over
    /// [-pi, pi).
    pub phases: Option<Vec<f64>>,
    /// Indices of nullspace directions the sinusoid drives; omitted: all.
    pub active: Option<Vec<usize>>,
    /// Margin samples across one sinusoid period (0: check only the decision
    /// instant). Sampling the whole period keeps accepted parameters feasible
    /// between optimizer invocations, not just at them.
    pub lookahead_samples: usize,
    /// Abort after this many infeasible (fallback) optimizer steps; omitted:
    /// never abort.
    pub fallback_budget: Option<u64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            enabled: true,
            epsilon: 0.2,
            frequency: 1.5,
            amplitude: 0.5,
            frequency_bounds: [0.1, 8.0],
            amplitude_bounds: [0.0, 3.0],
            weight_position: 0.1,
            weight_velocity: 0.1,
            grid_resolution: 41,
            phases: None,
            active: None,
            lookahead_samples: 24,
            fallback_budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub segments: Vec<Segment>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            segments: vec![
                Segment::Hold { duration: 5.0 },
                Segment::MoveTo {
                    target: Vec3::new(1.5, 0.0, 1.0),
                    duration: 10.0,
                },
                Segment::Hold { duration: 10.0 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    /// Physics substep, s. Must divide `control_dt` evenly.
    pub physics_dt: f64,
    /// Control tick, s.
    pub control_dt: f64,
    /// Time between optimizer invocations, s (rounded up to whole control
    /// ticks).
    pub optimizer_period: f64,
    /// Total simulated time, s.
    pub duration: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            physics_dt: 1e-3,
            control_dt: 5e-3,
            optimizer_period: 5e-2,
            duration: 25.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    pub load: LoadConfig,
    pub carriers: CarrierConfig,
    pub cables: CableConfig,
    pub controller: ControllerConfig,
    pub optimizer: OptimizerConfig,
    pub trajectory: TrajectoryConfig,
    pub timing: TimingConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            gravity: 9.81,
            load: LoadConfig::default(),
            carriers: CarrierConfig::default(),
            cables: CableConfig::default(),
            controller: ControllerConfig::default(),
            optimizer: OptimizerConfig::default(),
            trajectory: TrajectoryConfig::default(),
            timing: TimingConfig::default(),
        }
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), CoreError> {
    if cond {
        Ok(())
    } else {
        Err(CoreError::InvalidConfig(msg.into()))
    }
}

impl ScenarioConfig {
    /// Nullspace dimension implied by the team size.
    pub fn nullity(&self) -> usize {
        3 * self.carriers.count - 6
    }

    /// Declarative validation; every violated precondition is named.
    pub fn validate(&self) -> Result<(), CoreError> {
        let c = &self.carriers;
        ensure(
            c.count >= 3,
            format!("carriers.count must be >= 3, got {}", c.count),
        )?;
        if let Some(list) = &c.attachments {
            ensure(
                list.len() == c.count,
                format!(
                    "carriers.attachments has {} entries for {} carriers",
                    list.len(),
                    c.count
                ),
            )?;
        } else {
            ensure(
                c.attachment_radius > 0.0,
                "carriers.attachment_radius must be positive",
            )?;
        }
        ensure(c.mass > 0.0, "carriers.mass must be positive")?;
        ensure(
            c.position_gain > 0.0 && c.velocity_gain > 0.0,
            "carriers.position_gain and velocity_gain must be positive",
        )?;

        ensure(self.gravity > 0.0, "gravity must be positive")?;
        ensure(self.load.mass > 0.0, "load.mass must be positive")?;
        ensure(
            self.load.damping >= 0.0,
            "load.damping must be non-negative",
        )?;

        let cab = &self.cables;
        ensure(cab.length > 0.0, "cables.length must be positive")?;
        ensure(cab.stiffness > 0.0, "cables.stiffness must be positive")?;
        ensure(cab.damping >= 0.0, "cables.damping must be non-negative")?;
        ensure(
            cab.tension_floor > 0.0,
            "cables.tension_floor must be positive",
        )?;

        ensure(
            self.controller.integral_limit_position > 0.0
                && self.controller.integral_limit_attitude > 0.0,
            "controller integral limits must be positive",
        )?;

        let t = &self.timing;
        ensure(
            t.physics_dt > 0.0 && t.physics_dt <= 0.01,
            format!(
                "timing.physics_dt must lie in (0, 0.01] s, got {}",
                t.physics_dt
            ),
        )?;
        ensure(t.control_dt > 0.0, "timing.control_dt must be positive")?;
        let ratio = t.control_dt / t.physics_dt;
        ensure(
            (ratio - ratio.round()).abs() < 1e-9 && ratio.round() >= 1.0,
            format!(
                "timing.control_dt ({}) must be a whole multiple of timing.physics_dt ({})",
                t.control_dt, t.physics_dt
            ),
        )?;
        ensure(
            t.optimizer_period >= t.control_dt,
            "timing.optimizer_period must be at least one control tick",
        )?;
        ensure(t.duration > 0.0, "timing.duration must be positive")?;

        let o = &self.optimizer;
        ensure(o.epsilon >= 0.0, "optimizer.epsilon must be non-negative")?;
        crate::optimizer::SinusoidBounds::new(
            o.frequency_bounds[0],
            o.frequency_bounds[1],
            o.amplitude_bounds[0],
            o.amplitude_bounds[1],
        )?
        .contains(o.frequency, o.amplitude)
        .then_some(())
        .ok_or_else(|| {
            CoreError::InvalidConfig(format!(
                "optimizer initial point (frequency {}, amplitude {}) outside its bounds",
                o.frequency, o.amplitude
            ))
        })?;
        ensure(
            o.weight_position >= 0.0 && o.weight_velocity >= 0.0,
            "optimizer weights must be non-negative",
        )?;
        ensure(
            o.grid_resolution >= 2,
            "optimizer.grid_resolution must be at least 2",
        )?;
        ensure(
            o.lookahead_samples <= 1024,
            "optimizer.lookahead_samples above 1024 is wasteful",
        )?;
        let k = self.nullity();
        if let Some(phases) = &o.phases {
            ensure(
                phases.len() == k,
                format!(
                    "optimizer.phases has {} entries; {} carriers need {}",
                    phases.len(),
                    c.count,
                    k
                ),
            )?;
        }
        if let Some(active) = &o.active {
            ensure(!active.is_empty(), "optimizer.active must not be empty")?;
            ensure(
                active.iter().all(|i| *i < k),
                format!("optimizer.active indices must be < {k}"),
            )?;
        }

        ensure(
            !self.trajectory.segments.is_empty(),
            "trajectory.segments must not be empty",
        )?;
        ensure(
            self.trajectory.segments.iter().all(|s| s.duration() > 0.0),
            "trajectory segment durations must be positive",
        )?;
        Ok(())
    }

    pub fn initial_position(&self) -> Vec3 {
        let p = self.load.initial_position;
        Vec3::new(p[0], p[1], p[2])
    }

    /// Physics substeps per control tick (validated to be integral).
    pub fn substeps(&self) -> usize {
        (self.timing.control_dt / self.timing.physics_dt).round() as usize
    }

    /// Per-direction activity mask derived from `optimizer.active`.
    pub fn active_mask(&self) -> Vec<bool> {
        let k = self.nullity();
        match &self.optimizer.active {
            None => vec![true; k],
            Some(idx) => {
                let mut mask = vec![false; k];
                for &i in idx {
                    if i < k {
                        mask[i] = true;
                    }
                }
                mask
            }
        }
    }
}

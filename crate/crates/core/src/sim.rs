//! Closed-loop simulation of the full transport stack.
//!
//! Physics: the load is a rigid body pulled by elastic, unilateral cables
//! (spring-damper along the line, zero force when slack); each carrier is a
//! point mass with a stiff PD position loop chasing the targets emitted by
//! the control stack (or, in `kinematic` mode, adopting them exactly).
//!
//! Time structure per control tick (default 5 ms):
//! 1. sample the reference and compute the desired wrench,
//! 2. rebuild the allocation frame (grasp map, pseudoinverse, nullspace and
//!    rates),
//! 3. on optimizer ticks, re-tune the internal-force sinusoid under the
//!    non-stopping constraints,
//! 4. allocate cable forces and turn them into carrier position/velocity
//!    targets,
//! 5. record a trace row,
//! 6. advance physics through `control_dt / physics_dt` RK4 substeps with
//!    cable coupling forces frozen per substep.
//!
//! Any module error mid-run aborts the simulation; the trace up to the
//! failure is preserved in the returned [`SimRun`].

use nalgebra::DVector;

use crate::allocation::{
    allocate_forces, carrier_block, grasp_matrix, nullspace_basis, right_pseudoinverse,
    AllocationTracker,
};
use crate::error::CoreError;
use crate::feasibility::{
    desired_carrier_targets, external_force_rate, internal_force_rate, projector,
};
use crate::model::{cable_direction, CarrierState, LoadState, SystemGeometry};
use crate::optimizer::{
    optimize, step_schedule, uniform_phases, ConstraintSnapshot, InternalForceParams,
    OptimizerWeights, SinusoidBounds,
};
use crate::scenario::{CarrierModelKind, ScenarioConfig};
use crate::so3::{exp_so3, orthonormalized, Rotation};
use crate::trajectory::TrajectorySpec;
use crate::wrench::{ControllerGains, IntegralLimits, Wrench, WrenchController};
use crate::{Vec3, Vec6};

/// Physical cable parameters (identical for all cables).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CableParams {
    /// Unstretched length, m.
    pub rest_length: f64,
    /// Elastic stiffness, N/m.
    pub stiffness: f64,
    /// Stretch-rate damping, N s/m.
    pub damping: f64,
}

/// Forces exchanged through one cable at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CableForce {
    pub on_load: Vec3,
    pub on_carrier: Vec3,
    pub tension: f64,
    pub length: f64,
}

/// Elastic unilateral cable: `T = max(0, K (l - l0) + B ldot)` along the
/// attachment-to-carrier direction. A slack cable transmits nothing.
pub fn cable_force(
    carrier: &CarrierState,
    load: &LoadState,
    geom: &SystemGeometry,
    i: usize,
    params: &CableParams,
) -> Result<CableForce, CoreError> {
    let (q, length) = cable_direction(&carrier.position, load, geom, i)?;
    let stretch = length - params.rest_length;
    let rate = (carrier.velocity - load.attachment_velocity_world(geom, i)?).dot(&q);
    let tension = (params.stiffness * stretch + params.damping * rate).max(0.0);
    let pull = tension * q;
    Ok(CableForce {
        on_load: pull,
        on_carrier: -pull,
        tension,
        length,
    })
}

/// Advances the load one RK4 step under fixed world-frame forces applied at
/// the attachment points, plus gravity and viscous damping on both velocities.
///
/// Attitude is propagated through an incremental rotation vector `phi` with
/// `R = R0 Exp(phi)`; its rate uses the inverse differential of the
/// exponential truncated at second order, exact to O(|phi|^4) — far below
/// integration error for the step sizes accepted here (`dt <= 0.01 s`).
pub fn load_step(
    load: &LoadState,
    attachment_forces: &[Vec3],
    geom: &SystemGeometry,
    damping: f64,
    dt: f64,
) -> LoadState {
    debug_assert!(dt > 0.0 && dt <= 0.01, "load step outside (0, 0.01] s");
    debug_assert_eq!(attachment_forces.len(), geom.n());
    let m = geom.load_mass();
    let j = *geom.load_inertia();
    let j_inv = *geom.load_inertia_inv();
    let weight = geom.weight();
    let r0 = *load.attitude.matrix();

    // State: (p, v, phi, omega).
    let deriv = |state: &[Vec3; 4]| -> [Vec3; 4] {
        let [_, v, phi, w] = state;
        let force: Vec3 = attachment_forces.iter().sum::<Vec3>() + weight - damping * v;
        let r = r0 * exp_so3(phi);
        let mut torque = -w.cross(&(j * w)) - damping * w;
        for (b, f) in geom.attachments().iter().zip(attachment_forces) {
            torque += b.cross(&(r.transpose() * f));
        }
        let dphi = w + 0.5 * phi.cross(w) + phi.cross(&phi.cross(w)) / 12.0;
        [*v, force / m, dphi, j_inv * torque]
    };

    let add = |a: &[Vec3; 4], b: &[Vec3; 4], s: f64| -> [Vec3; 4] {
        [
            a[0] + s * b[0],
            a[1] + s * b[1],
            a[2] + s * b[2],
            a[3] + s * b[3],
        ]
    };

    let y0 = [
        load.position,
        load.velocity,
        Vec3::zeros(),
        load.angular_velocity,
    ];
    let k1 = deriv(&y0);
    let k2 = deriv(&add(&y0, &k1, 0.5 * dt));
    let k3 = deriv(&add(&y0, &k2, 0.5 * dt));
    let k4 = deriv(&add(&y0, &k3, dt));
    let mut y = y0;
    for i in 0..4 {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }

    LoadState {
        position: y[0],
        velocity: y[1],
        attitude: orthonormalized(r0 * exp_so3(&y[2])),
        angular_velocity: y[3],
    }
}

/// Carrier translational dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CarrierDynamics {
    Kinematic,
    PointMassPd {
        mass: f64,
        position_gain: f64,
        velocity_gain: f64,
    },
}

/// Advances one carrier by `dt` toward frozen position/velocity targets with
/// a frozen external (cable) force. The carrier's own weight is assumed
/// compensated by its lift and does not appear.
pub fn carrier_step(
    carrier: &CarrierState,
    target_position: &Vec3,
    target_velocity: &Vec3,
    external_force: &Vec3,
    dynamics: &CarrierDynamics,
    dt: f64,
) -> CarrierState {
    match *dynamics {
        CarrierDynamics::Kinematic => CarrierState {
            position: *target_position,
            velocity: *target_velocity,
        },
        CarrierDynamics::PointMassPd {
            mass,
            position_gain,
            velocity_gain,
        } => {
            let acc = |p: &Vec3, v: &Vec3| -> Vec3 {
                (position_gain * (target_position - p)
                    + velocity_gain * (target_velocity - v)
                    + external_force)
                    / mass
            };
            let (p0, v0) = (carrier.position, carrier.velocity);
            let a1 = acc(&p0, &v0);
            let p2 = p0 + 0.5 * dt * v0;
            let v2 = v0 + 0.5 * dt * a1;
            let a2 = acc(&p2, &v2);
            let p3 = p0 + 0.5 * dt * v2;
            let v3 = v0 + 0.5 * dt * a2;
            let a3 = acc(&p3, &v3);
            let p4 = p0 + dt * v3;
            let v4 = v0 + dt * a3;
            let a4 = acc(&p4, &v4);
            CarrierState {
                position: p0 + dt / 6.0 * (v0 + 2.0 * v2 + 2.0 * v3 + v4),
                velocity: v0 + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
            }
        }
    }
}

/// Position/velocity commands actually sent to the carriers.
///
/// These differ from the planner targets in one respect: the commanded cable
/// length tracks the *desired tension* through the elastic stretch (and PD
/// sag), so the realized cable force follows the allocated force to first
/// order instead of staying pinned at the static tension.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandedTargets {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
}

/// Per-carrier values recorded each control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierTraceSample {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Realized speed, m/s.
    pub speed: f64,
    /// Speed of the commanded velocity target, m/s.
    pub desired_speed: f64,
    /// Realized cable tension, N.
    pub tension: f64,
    /// Commanded cable tension, N.
    pub desired_tension: f64,
    /// Non-stopping margin of the velocity target, m/s.
    pub margin: f64,
}

/// One control tick's worth of observable state, recorded before the physics
/// advance for that tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub position_error: Vec3,
    pub attitude_error: Vec3,
    pub load_position: Vec3,
    pub load_rpy: Vec3,
    pub load_velocity: Vec3,
    pub load_angular_velocity: Vec3,
    pub desired_position: Vec3,
    pub desired_velocity: Vec3,
    pub wrench: Vec6,
    /// Internal-force sinusoid parameters in effect this tick.
    pub frequency: f64,
    pub amplitude: f64,
    pub carriers: Vec<CarrierTraceSample>,
}

/// Tick-sampled record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub control_dt: f64,
    pub rows: Vec<TraceRow>,
}

impl SimTrace {
    pub fn n(&self) -> usize {
        self.rows.first().map_or(0, |r| r.carriers.len())
    }
}

/// Counters accumulated over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub optimizer_invocations: u64,
    /// Optimizer steps that found no feasible parameters and returned the
    /// least-infeasible point.
    pub fallback_count: u64,
}

/// Everything a run produces. `failure` is `None` for a clean run; otherwise
/// it holds the error that aborted the run and `trace` ends at the failure.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub trace: SimTrace,
    pub stats: RunStats,
    pub failure: Option<CoreError>,
    pub final_load: LoadState,
    pub final_carriers: Vec<CarrierState>,
}

impl SimRun {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

/// Validates the configuration, builds consistent initial conditions, and
/// runs the closed loop for the configured duration.
///
/// `Err` is returned only for configuration-level problems (nothing has run
/// yet). Runtime failures — slack desired tension, singular allocation,
/// exhausted fallback budget — land in [`SimRun::failure`] together with the
/// partial trace.
pub fn run_closed_loop(config: &ScenarioConfig) -> Result<SimRun, CoreError> {
    config.validate()?;
    let setup = SimSetup::build(config)?;
    Ok(setup.run())
}

struct SimSetup {
    geom: SystemGeometry,
    cable: CableParams,
    /// Metres of commanded-length correction per newton of desired tension:
    /// elastic stretch plus, for dynamic carriers, the PD sag.
    compliance: f64,
    carrier_dynamics: CarrierDynamics,
    controller: WrenchController,
    trajectory: TrajectorySpec,
    params: InternalForceParams,
    weights: OptimizerWeights,
    epsilon: f64,
    tension_floor: f64,
    grid_resolution: usize,
    lookahead: usize,
    optimizer_enabled: bool,
    optimizer_every: usize,
    fallback_budget: Option<u64>,
    physics_dt: f64,
    control_dt: f64,
    ticks: usize,
    substeps: usize,
    load0: LoadState,
    carriers0: Vec<CarrierState>,
    load_damping: f64,
}

impl SimSetup {
    fn build(config: &ScenarioConfig) -> Result<Self, CoreError> {
        let n = config.carriers.count;
        let rest_length = config.cables.length;
        let base_geom = SystemGeometry::new(
            config.carriers.attachment_points(),
            vec![rest_length; n],
            config.load.mass,
            config.load.inertia.to_matrix(),
            vec![config.carriers.mass; n],
            config.gravity,
        )?;

        let [roll, pitch, yaw] = config.load.initial_rpy;
        let attitude0 = Rotation::from_rpy(roll, pitch, yaw);
        let load0 = LoadState::at_rest(config.initial_position(), attitude0);

        let grasp = grasp_matrix(&attitude0, &base_geom);
        let pinv = right_pseudoinverse(&grasp)?;
        let nullspace = nullspace_basis(&grasp, None)?;
        let k = nullspace.ncols();

        let opt = &config.optimizer;
        let bounds = SinusoidBounds::new(
            opt.frequency_bounds[0],
            opt.frequency_bounds[1],
            opt.amplitude_bounds[0],
            opt.amplitude_bounds[1],
        )?;
        let phases = opt.phases.clone().unwrap_or_else(|| uniform_phases(k));
        let mut params = InternalForceParams::new(opt.frequency, opt.amplitude, phases, bounds)?
            .with_active(config.active_mask())?;
        let weights = OptimizerWeights::new(opt.weight_position, opt.weight_velocity)?;

        let w_static = Vec6::new(0.0, 0.0, config.load.mass * config.gravity, 0.0, 0.0, 0.0);
        let tension_floor = config.cables.tension_floor;

        let static_allocation =
            |params: &InternalForceParams| -> Result<(Vec<f64>, Vec<Vec3>), CoreError> {
                let (lambda, _) = params.evaluate(0.0);
                let forces = &pinv * w_static + &nullspace * &lambda;
                let mut tensions = Vec::with_capacity(n);
                let mut directions = Vec::with_capacity(n);
                for i in 0..n {
                    let f = carrier_block(&forces, i);
                    let tension = f.norm();
                    if tension < tension_floor {
                        return Err(CoreError::InvalidConfig(format!(
                            "initial internal forces leave cable {i} near slack \
                         ({tension:.4} N < {tension_floor} N floor)"
                        )));
                    }
                    tensions.push(tension);
                    directions.push(f / tension);
                }
                Ok((tensions, directions))
            };

        // Mirror the tick-0 optimization during setup so the initial carrier
        // placement is consistent with the first commanded targets. At t = 0
        // the load is at rest: no external force rate, no basis rate.
        if opt.enabled {
            let (tensions, directions) = static_allocation(&params)?;
            let projectors = directions
                .iter()
                .map(projector)
                .collect::<Result<Vec<_>, _>>()?;
            let snapshot = ConstraintSnapshot {
                time: 0.0,
                epsilon: opt.epsilon,
                base_velocities: vec![Vec3::zeros(); n],
                lengths: vec![rest_length; n],
                tensions,
                projectors,
                external_rate: DVector::zeros(3 * n),
                nullspace: nullspace.clone(),
                nullspace_rate: nalgebra::DMatrix::zeros(3 * n, k),
            };
            let outcome = optimize(
                &params,
                &snapshot,
                &weights,
                opt.grid_resolution,
                opt.lookahead_samples,
            );
            params.xi = outcome.xi;
            params.amplitude = outcome.amplitude;
        }

        let (tensions, directions) = static_allocation(&params)?;

        // Planner cable lengths include the static elastic stretch (and the
        // PD sag for dynamic carriers): targets built with these lengths put
        // the physical system at a true force equilibrium.
        let pd_sag = match config.carriers.model {
            CarrierModelKind::PointMassPd => 1.0 / config.carriers.position_gain,
            CarrierModelKind::Kinematic => 0.0,
        };
        let planner_lengths: Vec<f64> = tensions
            .iter()
            .map(|t| rest_length + t / config.cables.stiffness + t * pd_sag)
            .collect();
        let geom = base_geom.with_cable_lengths(planner_lengths)?;

        // Carriers start at the stretched-cable equilibrium, moving with the
        // internal-force orbit the first tick will command (at t = 0 the
        // external force rate vanishes, so only the sinusoid moves them). The
        // radial velocity term keeps the elastic stretch in step with the
        // changing desired tension.
        let (_, lambda_rate0) = params.evaluate(0.0);
        let internal_rate0 = &nullspace * &lambda_rate0;
        let mut carriers0 = Vec::with_capacity(n);
        for i in 0..n {
            let stretched = rest_length + tensions[i] / config.cables.stiffness;
            let position = load0.attachment_world(&geom, i)? + stretched * directions[i];
            let rate = carrier_block(&internal_rate0, i);
            let q_rate = (projector(&directions[i])? * rate) / tensions[i];
            let tension_rate = directions[i].dot(&rate);
            let velocity =
                stretched * q_rate + tension_rate / config.cables.stiffness * directions[i];
            carriers0.push(CarrierState { position, velocity });
        }

        let carrier_dynamics = match config.carriers.model {
            CarrierModelKind::Kinematic => CarrierDynamics::Kinematic,
            CarrierModelKind::PointMassPd => CarrierDynamics::PointMassPd {
                mass: config.carriers.mass,
                position_gain: config.carriers.position_gain,
                velocity_gain: config.carriers.velocity_gain,
            },
        };

        let ctrl = &config.controller;
        let gains = ControllerGains {
            position: ctrl.position.to_vec3(),
            velocity: ctrl.velocity.to_vec3(),
            integral_position: ctrl.integral_position.to_vec3(),
            attitude: ctrl.attitude.to_vec3(),
            angular_rate: ctrl.angular_rate.to_vec3(),
            integral_attitude: ctrl.integral_attitude.to_vec3(),
        };
        let controller = WrenchController::new(
            gains,
            IntegralLimits {
                position: ctrl.integral_limit_position,
                attitude: ctrl.integral_limit_attitude,
            },
        )?;

        let trajectory = TrajectorySpec::new(
            config.initial_position(),
            attitude0,
            config.trajectory.segments.clone(),
        )?;

        let timing = &config.timing;
        Ok(SimSetup {
            geom,
            cable: CableParams {
                rest_length,
                stiffness: config.cables.stiffness,
                damping: config.cables.damping,
            },
            compliance: 1.0 / config.cables.stiffness + pd_sag,
            carrier_dynamics,
            controller,
            trajectory,
            params,
            weights,
            epsilon: opt.epsilon,
            tension_floor,
            grid_resolution: opt.grid_resolution,
            lookahead: opt.lookahead_samples,
            optimizer_enabled: opt.enabled,
            optimizer_every: step_schedule(timing.optimizer_period, timing.control_dt),
            fallback_budget: opt.fallback_budget,
            physics_dt: timing.physics_dt,
            control_dt: timing.control_dt,
            ticks: (timing.duration / timing.control_dt).round() as usize,
            substeps: config.substeps(),
            load0,
            carriers0,
            load_damping: config.load.damping,
        })
    }

    fn run(mut self) -> SimRun {
        let mut trace = SimTrace {
            control_dt: self.control_dt,
            rows: Vec::with_capacity(self.ticks + 1),
        };
        let mut stats = RunStats::default();
        let mut load = self.load0;
        let mut carriers = self.carriers0.clone();
        let mut tracker = AllocationTracker::new();
        let mut previous_wrench: Option<Vec6> = None;
        let mut failure = None;

        for tick in 0..=self.ticks {
            let t = tick as f64 * self.control_dt;
            let targets = match self.control_tick(
                tick,
                t,
                &load,
                &carriers,
                &mut tracker,
                &mut previous_wrench,
                &mut stats,
                &mut trace,
            ) {
                Ok(targets) => targets,
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            };
            if tick == self.ticks {
                break;
            }
            if let Err(e) = self.advance_physics(&mut load, &mut carriers, &targets) {
                failure = Some(e);
                break;
            }
        }

        SimRun {
            trace,
            stats,
            failure,
            final_load: load,
            final_carriers: carriers,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn control_tick(
        &mut self,
        tick: usize,
        t: f64,
        load: &LoadState,
        carriers: &[CarrierState],
        tracker: &mut AllocationTracker,
        previous_wrench: &mut Option<Vec6>,
        stats: &mut RunStats,
        trace: &mut SimTrace,
    ) -> Result<CommandedTargets, CoreError> {
        let n = self.geom.n();
        let desired = self.trajectory.sample(t);
        let errors = self
            .controller
            .compute_errors(load, &desired, self.control_dt);
        let wrench: Wrench = self.controller.wrench(&errors, load, &self.geom);
        let w = wrench.to_vector();
        // Backward-difference wrench rate; zero on the first tick.
        let w_rate = match previous_wrench.replace(w) {
            Some(prev) => (w - prev) / self.control_dt,
            None => Vec6::zeros(),
        };

        let frame = tracker.frame(
            &load.attitude,
            &load.angular_velocity,
            &self.geom,
            t,
            self.control_dt,
        )?;

        if self.optimizer_enabled && tick.is_multiple_of(self.optimizer_every) {
            let (lambda_prev, _) = self.params.evaluate(t);
            let forces_prev = allocate_forces(&frame, &w, &lambda_prev)?;
            let mut tensions = Vec::with_capacity(n);
            let mut projectors = Vec::with_capacity(n);
            let mut base_velocities = Vec::with_capacity(n);
            for i in 0..n {
                let f = carrier_block(&forces_prev, i);
                let tension = f.norm();
                if tension < self.tension_floor {
                    return Err(CoreError::TensionBelowFloor {
                        carrier: i,
                        tension,
                        floor: self.tension_floor,
                    });
                }
                projectors.push(projector(&(f / tension))?);
                tensions.push(tension);
                base_velocities.push(load.attachment_velocity_world(&self.geom, i)?);
            }
            let snapshot = ConstraintSnapshot {
                time: t,
                epsilon: self.epsilon,
                base_velocities,
                lengths: self.geom.cable_lengths().to_vec(),
                tensions,
                projectors,
                external_rate: external_force_rate(&frame, &w, &w_rate),
                nullspace: frame.nullspace.clone(),
                nullspace_rate: frame.nullspace_rate.clone(),
            };
            let outcome = optimize(
                &self.params,
                &snapshot,
                &self.weights,
                self.grid_resolution,
                self.lookahead,
            );
            self.params.xi = outcome.xi;
            self.params.amplitude = outcome.amplitude;
            stats.optimizer_invocations += 1;
            if outcome.fallback {
                stats.fallback_count += 1;
                if let Some(budget) = self.fallback_budget {
                    if stats.fallback_count > budget {
                        return Err(CoreError::FallbackBudgetExceeded {
                            count: stats.fallback_count,
                            budget,
                        });
                    }
                }
            }
        }

        let (lambda, lambda_rate) = self.params.evaluate(t);
        let forces = allocate_forces(&frame, &w, &lambda)?;
        let force_rates = external_force_rate(&frame, &w, &w_rate)
            + internal_force_rate(&frame, &lambda, &lambda_rate);
        let targets =
            desired_carrier_targets(&forces, &force_rates, load, &self.geom, self.tension_floor)?;

        let mut carrier_samples = Vec::with_capacity(n);
        for (i, carrier) in carriers.iter().enumerate() {
            let realized = cable_force(carrier, load, &self.geom, i, &self.cable)?;
            carrier_samples.push(CarrierTraceSample {
                position: carrier.position,
                velocity: carrier.velocity,
                speed: carrier.velocity.norm(),
                desired_speed: targets.velocities[i].norm(),
                tension: realized.tension,
                desired_tension: targets.tensions[i],
                margin: targets.velocities[i].norm() - self.epsilon,
            });
        }
        let (roll, pitch, yaw) = load.attitude.to_rpy();
        trace.rows.push(TraceRow {
            time: t,
            position_error: errors.position,
            attitude_error: errors.attitude,
            load_position: load.position,
            load_rpy: Vec3::new(roll, pitch, yaw),
            load_velocity: load.velocity,
            load_angular_velocity: load.angular_velocity,
            desired_position: desired.position,
            desired_velocity: desired.velocity,
            wrench: w,
            frequency: self.params.xi,
            amplitude: self.params.amplitude,
            carriers: carrier_samples,
        });

        // Commanded positions carry the desired tension through the cable
        // compliance so the realized force tracks the allocation to first
        // order; the matching radial velocity keeps the stretch rate
        // consistent with the tension rate.
        let mut positions = Vec::with_capacity(n);
        let mut velocities = Vec::with_capacity(n);
        for i in 0..n {
            let q = targets.directions[i];
            let tension_rate = q.dot(&carrier_block(&force_rates, i));
            let length = self.cable.rest_length + self.compliance * targets.tensions[i];
            let attach = load.attachment_world(&self.geom, i)?;
            let attach_velocity = load.attachment_velocity_world(&self.geom, i)?;
            positions.push(attach + length * q);
            velocities.push(
                attach_velocity
                    + length * targets.direction_rates[i]
                    + self.compliance * tension_rate * q,
            );
        }
        Ok(CommandedTargets {
            positions,
            velocities,
        })
    }

    fn advance_physics(
        &self,
        load: &mut LoadState,
        carriers: &mut [CarrierState],
        targets: &CommandedTargets,
    ) -> Result<(), CoreError> {
        let n = self.geom.n();
        for _ in 0..self.substeps {
            // Coupling forces frozen across the substep: both sides integrate
            // against the same cable pull.
            let mut on_load = Vec::with_capacity(n);
            let mut on_carrier = Vec::with_capacity(n);
            for (i, carrier) in carriers.iter().enumerate() {
                let cf = cable_force(carrier, load, &self.geom, i, &self.cable)?;
                on_load.push(cf.on_load);
                on_carrier.push(cf.on_carrier);
            }
            let next_load = load_step(
                load,
                &on_load,
                &self.geom,
                self.load_damping,
                self.physics_dt,
            );
            for i in 0..n {
                carriers[i] = carrier_step(
                    &carriers[i],
                    &targets.positions[i],
                    &targets.velocities[i],
                    &on_carrier[i],
                    &self.carrier_dynamics,
                    self.physics_dt,
                );
            }
            *load = next_load;
        }
        Ok(())
    }
}

//! Online tuning of the sinusoidal internal forces.
//!
//! Internal (nullspace) forces are parametrized as one shared sinusoid across
//! the k nullspace directions,
//!
//! ```text
//! lambda_j(t) = A cos(xi t + phi_j),
//! ```
//!
//! with fixed phase offsets `phi_j`. Every optimizer period the pair
//! `x = (xi, A)` is re-chosen to minimize deviation from the previous
//! parameters (in parameter space and in the induced force/force-rate
//! signals) subject to every carrier's non-stopping margin staying
//! non-negative:
//!
//! ```text
//! min  (xi - xi')^2 + (A - A')^2
//!      + w_pos ||lambda(x) - lambda(x')||^2 + w_vel ||lambdadot(x) - lambdadot(x')||^2
//! s.t. ||v_i(x)|| >= epsilon  for every carrier i
//! ```
//!
//! The search is deterministic: if the previous parameters are still feasible
//! they are kept unchanged; otherwise a dense grid over the bounds finds the
//! best feasible cell, refined by a Nelder-Mead polish that treats
//! infeasibility as an infinite objective. If no grid point is feasible the
//! least-infeasible point is returned and flagged as a fallback.

use nalgebra::{DMatrix, DVector};

use crate::error::CoreError;
use crate::{Mat3, Vec3};

/// Box bounds for the sinusoid parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidBounds {
    pub xi_min: f64,
    pub xi_max: f64,
    pub amplitude_min: f64,
    pub amplitude_max: f64,
}

impl SinusoidBounds {
    pub fn new(
        xi_min: f64,
        xi_max: f64,
        amplitude_min: f64,
        amplitude_max: f64,
    ) -> Result<Self, CoreError> {
        if !(xi_min > 0.0 && xi_max >= xi_min) {
            return Err(CoreError::InvalidConfig(format!(
                "frequency bounds must satisfy 0 < min <= max, got [{xi_min}, {xi_max}]"
            )));
        }
        if !(amplitude_min >= 0.0 && amplitude_max >= amplitude_min) {
            return Err(CoreError::InvalidConfig(format!(
                "amplitude bounds must satisfy 0 <= min <= max, got [{amplitude_min}, {amplitude_max}]"
            )));
        }
        Ok(SinusoidBounds {
            xi_min,
            xi_max,
            amplitude_min,
            amplitude_max,
        })
    }

    pub fn contains(&self, xi: f64, amplitude: f64) -> bool {
        (self.xi_min..=self.xi_max).contains(&xi)
            && (self.amplitude_min..=self.amplitude_max).contains(&amplitude)
    }
}

/// Current sinusoid parameters plus the fixed phase/activity pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalForceParams {
    pub xi: f64,
    pub amplitude: f64,
    /// Phase offset per nullspace direction, radians.
    pub phases: Vec<f64>,
    /// Directions excluded here contribute zero internal force.
    pub active: Vec<bool>,
    pub bounds: SinusoidBounds,
}

/// Default phase pattern: k offsets evenly spread over [-pi, pi).
pub fn uniform_phases(k: usize) -> Vec<f64> {
    (0..k)
        .map(|j| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * j as f64 / k as f64)
        .collect()
}

impl InternalForceParams {
    pub fn new(
        xi: f64,
        amplitude: f64,
        phases: Vec<f64>,
        bounds: SinusoidBounds,
    ) -> Result<Self, CoreError> {
        if !bounds.contains(xi, amplitude) {
            return Err(CoreError::InvalidConfig(format!(
                "initial sinusoid (xi = {xi}, A = {amplitude}) lies outside the bounds"
            )));
        }
        let active = vec![true; phases.len()];
        Ok(InternalForceParams {
            xi,
            amplitude,
            phases,
            active,
            bounds,
        })
    }

    /// Restricts the sinusoid to a subset of nullspace directions.
    pub fn with_active(mut self, active: Vec<bool>) -> Result<Self, CoreError> {
        if active.len() != self.phases.len() {
            return Err(CoreError::InvalidConfig(format!(
                "activity mask has {} entries for {} phases",
                active.len(),
                self.phases.len()
            )));
        }
        self.active = active;
        Ok(self)
    }

    pub fn nullity(&self) -> usize {
        self.phases.len()
    }

    /// `lambda(t)` and `dlambda/dt(t)` for the stored parameters.
    pub fn evaluate(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        evaluate_sinusoid(self.xi, self.amplitude, &self.phases, &self.active, t)
    }
}

/// `lambda_j = A cos(xi t + phi_j)`, `dlambda_j = -A xi sin(xi t + phi_j)`,
/// zero for inactive directions.
pub fn evaluate_sinusoid(
    xi: f64,
    amplitude: f64,
    phases: &[f64],
    active: &[bool],
    t: f64,
) -> (DVector<f64>, DVector<f64>) {
    let k = phases.len();
    let mut lambda = DVector::zeros(k);
    let mut rate = DVector::zeros(k);
    for j in 0..k {
        if active[j] {
            let arg = xi * t + phases[j];
            lambda[j] = amplitude * arg.cos();
            rate[j] = -amplitude * xi * arg.sin();
        }
    }
    (lambda, rate)
}

/// Smoothness weights for the two signal-deviation terms of the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerWeights {
    pub position: f64,
    pub velocity: f64,
}

impl OptimizerWeights {
    pub fn new(position: f64, velocity: f64) -> Result<Self, CoreError> {
        if position < 0.0 || velocity < 0.0 {
            return Err(CoreError::InvalidConfig(
                "objective weights must be non-negative".into(),
            ));
        }
        Ok(OptimizerWeights { position, velocity })
    }
}

/// Everything the margin evaluation needs, frozen at the decision instant.
///
/// `external_rate` is the stacked external force rate `e`; the internal rate
/// is reconstructed per candidate from the nullspace matrices and the
/// sinusoid. Tensions and projectors come from the force allocation at the
/// previous parameters and are held fixed during the search.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSnapshot {
    pub time: f64,
    pub epsilon: f64,
    pub base_velocities: Vec<Vec3>,
    pub lengths: Vec<f64>,
    pub tensions: Vec<f64>,
    pub projectors: Vec<Mat3>,
    pub external_rate: DVector<f64>,
    pub nullspace: DMatrix<f64>,
    pub nullspace_rate: DMatrix<f64>,
}

impl ConstraintSnapshot {
    pub fn n(&self) -> usize {
        self.base_velocities.len()
    }
}

/// Non-stopping margin of every carrier for candidate parameters, at the
/// snapshot instant.
pub fn constraint_margins(
    xi: f64,
    amplitude: f64,
    phases: &[f64],
    active: &[bool],
    snapshot: &ConstraintSnapshot,
) -> Vec<f64> {
    margins_at(xi, amplitude, phases, active, snapshot, snapshot.time)
}

/// Margins with the sinusoid evaluated at an explicit time while the frozen
/// snapshot quantities stay put; `t = snapshot.time` is the nominal check,
/// later times implement the look-ahead sweep.
fn margins_at(
    xi: f64,
    amplitude: f64,
    phases: &[f64],
    active: &[bool],
    snapshot: &ConstraintSnapshot,
    t: f64,
) -> Vec<f64> {
    let (lambda, lambda_rate) = evaluate_sinusoid(xi, amplitude, phases, active, t);
    let internal = &snapshot.nullspace * lambda_rate + &snapshot.nullspace_rate * lambda;
    (0..snapshot.n())
        .map(|i| {
            let rows =
                internal.fixed_rows::<3>(3 * i) + snapshot.external_rate.fixed_rows::<3>(3 * i);
            let scale = snapshot.lengths[i] / snapshot.tensions[i];
            let v = snapshot.base_velocities[i] + scale * (snapshot.projectors[i] * rows);
            v.norm() - snapshot.epsilon
        })
        .collect()
}

/// Parameter-continuity objective; zero exactly at the previous parameters.
pub fn objective(
    xi: f64,
    amplitude: f64,
    previous: (f64, f64),
    phases: &[f64],
    active: &[bool],
    weights: &OptimizerWeights,
    t: f64,
) -> f64 {
    let (l_new, ld_new) = evaluate_sinusoid(xi, amplitude, phases, active, t);
    let (l_prev, ld_prev) = evaluate_sinusoid(previous.0, previous.1, phases, active, t);
    (xi - previous.0).powi(2)
        + (amplitude - previous.1).powi(2)
        + weights.position * (l_new - l_prev).norm_squared()
        + weights.velocity * (ld_new - ld_prev).norm_squared()
}

/// Result of one optimization step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationOutcome {
    pub xi: f64,
    pub amplitude: f64,
    /// All margins non-negative at the returned parameters.
    pub feasible: bool,
    /// Smallest margin across carriers at the returned parameters.
    pub worst_margin: f64,
    /// Objective value at the returned parameters (zero for an unchanged
    /// feasible warm start).
    pub objective: f64,
    /// Margin/objective evaluations spent.
    pub evaluations: usize,
    /// True when no feasible candidate existed and the least-infeasible
    /// parameters were returned instead.
    pub fallback: bool,
}

/// How many margin samples to take across one sinusoid period; 0 checks only
/// the decision instant.
pub type LookaheadSamples = usize;

fn worst_margin(
    xi: f64,
    amplitude: f64,
    params: &InternalForceParams,
    snapshot: &ConstraintSnapshot,
    lookahead: LookaheadSamples,
) -> f64 {
    let at = |t: f64| -> f64 {
        margins_at(xi, amplitude, &params.phases, &params.active, snapshot, t)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    };
    if lookahead == 0 {
        return at(snapshot.time);
    }
    let period = 2.0 * std::f64::consts::PI / xi;
    (0..lookahead)
        .map(|j| at(snapshot.time + period * j as f64 / lookahead as f64))
        .fold(f64::INFINITY, f64::min)
}

/// One optimization step; see the module docs for the search strategy.
///
/// `grid_resolution` is the number of samples per axis of the initial grid
/// (at least 2).
pub fn optimize(
    params: &InternalForceParams,
    snapshot: &ConstraintSnapshot,
    weights: &OptimizerWeights,
    grid_resolution: usize,
    lookahead: LookaheadSamples,
) -> OptimizationOutcome {
    debug_assert!(grid_resolution >= 2);
    let previous = (params.xi, params.amplitude);
    let bounds = params.bounds;
    let mut evaluations = 1usize;

    // Warm start: unchanged parameters are free (objective zero), so any
    // still-feasible previous point is optimal.
    let margin_prev = worst_margin(params.xi, params.amplitude, params, snapshot, lookahead);
    if margin_prev >= 0.0 {
        return OptimizationOutcome {
            xi: params.xi,
            amplitude: params.amplitude,
            feasible: true,
            worst_margin: margin_prev,
            objective: 0.0,
            evaluations,
            fallback: false,
        };
    }

    let score = |xi: f64, amplitude: f64| -> f64 {
        objective(
            xi,
            amplitude,
            previous,
            &params.phases,
            &params.active,
            weights,
            snapshot.time,
        )
    };

    let lerp = |lo: f64, hi: f64, i: usize| -> f64 {
        lo + (hi - lo) * i as f64 / (grid_resolution - 1) as f64
    };

    // Dense scan. Ties keep the first hit (row-major in xi, then amplitude),
    // which makes the search order part of the contract.
    let mut best_feasible: Option<(f64, (f64, f64), f64)> = None; // (J, x, margin)
    let mut least_bad = (f64::NEG_INFINITY, (params.xi, params.amplitude));
    for i in 0..grid_resolution {
        let xi = lerp(bounds.xi_min, bounds.xi_max, i);
        for j in 0..grid_resolution {
            let amplitude = lerp(bounds.amplitude_min, bounds.amplitude_max, j);
            let margin = worst_margin(xi, amplitude, params, snapshot, lookahead);
            evaluations += 1;
            if margin >= 0.0 {
                let obj = score(xi, amplitude);
                if best_feasible
                    .as_ref()
                    .is_none_or(|(best, _, _)| obj < *best)
                {
                    best_feasible = Some((obj, (xi, amplitude), margin));
                }
            } else if margin > least_bad.0 {
                least_bad = (margin, (xi, amplitude));
            }
        }
    }

    let Some((grid_obj, grid_point, grid_margin)) = best_feasible else {
        let (margin, (xi, amplitude)) = least_bad;
        return OptimizationOutcome {
            xi,
            amplitude,
            feasible: false,
            worst_margin: margin,
            objective: score(xi, amplitude),
            evaluations,
            fallback: true,
        };
    };

    // Local polish around the winning cell. Infeasible or out-of-bounds
    // points score infinity, so the best vertex can only improve on the grid
    // winner while staying feasible.
    let penalized = |x: [f64; 2], evals: &mut usize| -> f64 {
        *evals += 1;
        if !bounds.contains(x[0], x[1]) {
            return f64::INFINITY;
        }
        if worst_margin(x[0], x[1], params, snapshot, lookahead) < 0.0 {
            return f64::INFINITY;
        }
        score(x[0], x[1])
    };
    let cell = [
        (bounds.xi_max - bounds.xi_min) / (grid_resolution - 1) as f64,
        (bounds.amplitude_max - bounds.amplitude_min) / (grid_resolution - 1) as f64,
    ];
    let (polished, polished_obj) = nelder_mead(
        [grid_point.0, grid_point.1],
        cell,
        penalized,
        &mut evaluations,
    );

    let (point, obj) = if polished_obj < grid_obj {
        (polished, polished_obj)
    } else {
        ([grid_point.0, grid_point.1], grid_obj)
    };
    let margin = if point == [grid_point.0, grid_point.1] {
        grid_margin
    } else {
        worst_margin(point[0], point[1], params, snapshot, lookahead)
    };
    OptimizationOutcome {
        xi: point[0],
        amplitude: point[1],
        feasible: true,
        worst_margin: margin,
        objective: obj,
        evaluations,
        fallback: false,
    }
}

/// Standard Nelder-Mead in 2-D (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2), bounded iteration count, deterministic tie handling.
fn nelder_mead<F: FnMut([f64; 2], &mut usize) -> f64>(
    start: [f64; 2],
    scale: [f64; 2],
    mut f: F,
    evaluations: &mut usize,
) -> ([f64; 2], f64) {
    const MAX_ITER: usize = 80;
    let mut simplex = [
        start,
        [start[0] + 0.5 * scale[0].max(1e-6), start[1]],
        [start[0], start[1] + 0.5 * scale[1].max(1e-6)],
    ];
    let mut values = simplex.map(|p| f(p, evaluations));

    for _ in 0..MAX_ITER {
        // Order ascending by value; stable order for ties.
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
        simplex = idx.map(|i| simplex[i]);
        values = idx.map(|i| values[i]);

        let spread = (values[2] - values[0]).abs();
        let size = (0..2)
            .map(|d| (simplex[1][d] - simplex[0][d]).abs() + (simplex[2][d] - simplex[0][d]).abs())
            .fold(0.0f64, f64::max);
        if values[0].is_finite() && (spread < 1e-14 || size < 1e-10) {
            break;
        }

        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let reflect = [
            centroid[0] + (centroid[0] - simplex[2][0]),
            centroid[1] + (centroid[1] - simplex[2][1]),
        ];
        let f_reflect = f(reflect, evaluations);

        if f_reflect < values[0] {
            let expand = [
                centroid[0] + 2.0 * (centroid[0] - simplex[2][0]),
                centroid[1] + 2.0 * (centroid[1] - simplex[2][1]),
            ];
            let f_expand = f(expand, evaluations);
            if f_expand < f_reflect {
                simplex[2] = expand;
                values[2] = f_expand;
            } else {
                simplex[2] = reflect;
                values[2] = f_reflect;
            }
        } else if f_reflect < values[1] {
            simplex[2] = reflect;
            values[2] = f_reflect;
        } else {
            let contract = [
                centroid[0] + 0.5 * (simplex[2][0] - centroid[0]),
                centroid[1] + 0.5 * (simplex[2][1] - centroid[1]),
            ];
            let f_contract = f(contract, evaluations);
            if f_contract < values[2].min(f_reflect) {
                simplex[2] = contract;
                values[2] = f_contract;
            } else {
                for v in 1..3 {
                    simplex[v] = [
                        0.5 * (simplex[v][0] + simplex[0][0]),
                        0.5 * (simplex[v][1] + simplex[0][1]),
                    ];
                    values[v] = f(simplex[v], evaluations);
                }
            }
        }
    }

    let mut best = 0;
    for v in 1..3 {
        if values[v] < values[best] {
            best = v;
        }
    }
    (simplex[best], values[best])
}

/// Number of control ticks between optimizer invocations: the optimizer
/// period rounded up to a whole number of control periods (exact multiples
/// stay exact).
pub fn step_schedule(optimizer_period: f64, control_period: f64) -> usize {
    let ratio = optimizer_period / control_period;
    let rounded = ratio.round();
    let ticks = if (ratio - rounded).abs() < 1e-6 {
        rounded
    } else {
        ratio.ceil()
    };
    (ticks as usize).max(1)
}

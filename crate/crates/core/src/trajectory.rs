//! Reference trajectory generation for the load.
//!
//! A trajectory is a sequence of segments: either hold the current pose or
//! glide to a new position with a minimum-jerk (quintic) profile that starts
//! and ends at rest. Attitude references are held constant; the stack tracks
//! position maneuvers with a level load.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::so3::Rotation;
use crate::Vec3;

/// One piece of a piecewise reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Segment {
    /// Stay at the current waypoint for `duration` seconds.
    Hold { duration: f64 },
    /// Move to `target` over `duration` seconds with zero boundary velocity
    /// and acceleration.
    MoveTo { target: Vec3, duration: f64 },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match self {
            Segment::Hold { duration } | Segment::MoveTo { duration, .. } => *duration,
        }
    }
}

/// Reference sample handed to the controller each tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredLoadSample {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub attitude: Rotation,
    /// Desired angular velocity, expressed in the world frame.
    pub angular_velocity: Vec3,
}

/// Validated piecewise trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    initial_position: Vec3,
    attitude: Rotation,
    segments: Vec<Segment>,
}

/// Quintic blend `s(tau) = 10 tau^3 - 15 tau^4 + 6 tau^5` and its first two
/// derivatives with respect to `tau`; `s` rises monotonically from 0 to 1
/// with zero velocity and acceleration at both ends, and peaks at
/// `ds/dtau = 1.875` mid-stroke.
fn quintic(tau: f64) -> (f64, f64, f64) {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    (
        t3 * (10.0 - 15.0 * tau + 6.0 * t2),
        30.0 * t2 * (1.0 - tau) * (1.0 - tau),
        60.0 * tau * (1.0 - 3.0 * tau + 2.0 * t2),
    )
}

impl TrajectorySpec {
    /// Rejects empty segment lists and non-positive durations.
    pub fn new(
        initial_position: Vec3,
        attitude: Rotation,
        segments: Vec<Segment>,
    ) -> Result<Self, CoreError> {
        if segments.is_empty() {
            return Err(CoreError::EmptyTrajectory);
        }
        if let Some(bad) = segments
            .iter()
            .find(|s| s.duration() <= 0.0 || s.duration().is_nan())
        {
            return Err(CoreError::InvalidConfig(format!(
                "segment durations must be positive, got {}",
                bad.duration()
            )));
        }
        Ok(TrajectorySpec {
            initial_position,
            attitude,
            segments,
        })
    }

    pub fn initial_position(&self) -> Vec3 {
        self.initial_position
    }

    pub fn attitude(&self) -> Rotation {
        self.attitude
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    /// Start time and duration of segment `k`.
    pub fn segment_window(&self, k: usize) -> Option<(f64, f64)> {
        let mut start = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            if i == k {
                return Some((start, seg.duration()));
            }
            start += seg.duration();
        }
        None
    }

    /// Reference at time `t`. Times past the end clamp to the final waypoint
    /// at rest; negative times clamp to the start.
    pub fn sample(&self, t: f64) -> DesiredLoadSample {
        let t = t.max(0.0);
        let mut anchor = self.initial_position;
        let mut start = 0.0;
        for seg in &self.segments {
            let dur = seg.duration();
            if t < start + dur {
                return match seg {
                    Segment::Hold { .. } => self.at_rest(anchor),
                    Segment::MoveTo { target, .. } => {
                        let tau = (t - start) / dur;
                        let (s, ds, dds) = quintic(tau);
                        let span = target - anchor;
                        DesiredLoadSample {
                            position: anchor + span * s,
                            velocity: span * (ds / dur),
                            acceleration: span * (dds / (dur * dur)),
                            attitude: self.attitude,
                            angular_velocity: Vec3::zeros(),
                        }
                    }
                };
            }
            if let Segment::MoveTo { target, .. } = seg {
                anchor = *target;
            }
            start += dur;
        }
        self.at_rest(anchor)
    }

    fn at_rest(&self, position: Vec3) -> DesiredLoadSample {
        DesiredLoadSample {
            position,
            velocity: Vec3::zeros(),
            acceleration: Vec3::zeros(),
            attitude: self.attitude,
            angular_velocity: Vec3::zeros(),
        }
    }
}

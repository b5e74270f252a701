//! Pedestrian dead-reckoning motion model.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `(-pi, pi]`. Angles already in range are returned
/// untouched (bit-for-bit).
pub fn wrap(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let r = angle.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Heading in radians, `(-pi, pi]`.
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap(theta),
        }
    }
}

/// One step-counter/compass sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeadReckoningInput {
    pub timestamp: f64,
    /// Cumulative step count.
    pub step_count: u64,
    /// Absolute heading, radians.
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    /// Step length `s`, meters per step.
    pub step_length_m: f64,
    /// Std of the multiplicative noise on the step displacement.
    pub sigma_d: f64,
    /// Std of the multiplicative noise on the heading change.
    pub sigma_theta: f64,
    /// Use one distance-noise draw for both axes (step too long/short) instead
    /// of independent x and y draws.
    pub shared_distance_noise: bool,
    /// Additive heading noise per step taken, radians; over `n` steps the
    /// std is `sigma_theta_additive * sqrt(n)`. Zero reproduces the pure
    /// multiplicative model, in which a straight walk accrues no heading noise
    /// and a drifting compass cannot be followed.
    pub sigma_theta_additive: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            step_length_m: 0.7,
            sigma_d: 0.4,
            sigma_theta: 0.01,
            shared_distance_noise: true,
            sigma_theta_additive: 0.01,
        }
    }
}

impl MotionConfig {
    /// Default step length with every noise term off.
    pub fn noiseless() -> Self {
        Self {
            sigma_d: 0.0,
            sigma_theta: 0.0,
            sigma_theta_additive: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_length_m > 0.0 && self.step_length_m.is_finite()) {
            return Err(Error::config(format!(
                "step_length_m must be > 0, got {}",
                self.step_length_m
            )));
        }
        for (name, v) in [
            ("sigma_d", self.sigma_d),
            ("sigma_theta", self.sigma_theta),
            ("sigma_theta_additive", self.sigma_theta_additive),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Advances `pose` by the step and heading change between two samples.
///
/// Position moves along the heading held *before* this update; the heading
/// change is applied afterwards. Both noise terms are multiplicative, so no
/// steps means no displacement and, without steps, no turn means no heading
/// change.
pub fn propagate<R: Rng + ?Sized>(
    pose: &Pose,
    prev: &DeadReckoningInput,
    cur: &DeadReckoningInput,
    cfg: &MotionConfig,
    rng: &mut R,
) -> Result<Pose> {
    if cur.step_count < prev.step_count {
        return Err(Error::malformed(format!(
            "step count decreased from {} to {} at t={}",
            prev.step_count, cur.step_count, cur.timestamp
        )));
    }
    let steps = (cur.step_count - prev.step_count) as f64;
    let turn = wrap(cur.heading - prev.heading);

    let z_x: f64 = rng.sample(StandardNormal);
    let z_y: f64 = if cfg.shared_distance_noise {
        z_x
    } else {
        rng.sample(StandardNormal)
    };
    let z_theta: f64 = rng.sample(StandardNormal);
    let z_add: f64 = rng.sample(StandardNormal);

    let dist = cfg.step_length_m * steps;
    let (sin, cos) = pose.theta.sin_cos();
    Ok(Pose {
        x: pose.x + dist * cos * (1.0 + cfg.sigma_d * z_x),
        y: pose.y + dist * sin * (1.0 + cfg.sigma_d * z_y),
        theta: wrap(
            pose.theta
                + turn * (1.0 + cfg.sigma_theta * z_theta)
                + cfg.sigma_theta_additive * steps.sqrt() * z_add,
        ),
    })
}

use crate::sim::{Maneuver, Vec2};

/// Lateral movement beyond this magnitude is a lane change.
pub const LATERAL_THRESHOLD: f64 = 0.01;
/// Forward movement above this is acceleration; `[0, ACCEL_THRESHOLD]` decelerates.
pub const ACCEL_THRESHOLD: f64 = 0.02;

/// Maps a movement vector (x to the right, y forward) to one maneuver.
/// Lateral thresholds take precedence; any vector not matched by the
/// forward-motion ranges (negative or NaN forward component) brakes.
pub fn map_action_to_maneuver(v: Vec2) -> Maneuver {
    if v.x < -LATERAL_THRESHOLD {
        Maneuver::LeftLaneChange
    } else if v.x > LATERAL_THRESHOLD {
        Maneuver::RightLaneChange
    } else if v.y > ACCEL_THRESHOLD {
        Maneuver::Accelerate
    } else if v.y >= 0.0 {
        Maneuver::Decelerate
    } else {
        Maneuver::Brake
    }
}

/// Representative movement vector of a maneuver, used to keep the movement
/// history of pattern-driven vehicles meaningful for the actor.
pub fn nominal_movement(m: Maneuver) -> Vec2 {
    match m {
        Maneuver::Accelerate => Vec2::new(0.0, 0.06),
        Maneuver::Decelerate => Vec2::new(0.0, 0.01),
        Maneuver::Brake => Vec2::new(0.0, -0.01),
        Maneuver::LeftLaneChange => Vec2::new(-0.05, 0.05),
        Maneuver::RightLaneChange => Vec2::new(0.05, 0.05),
    }
}

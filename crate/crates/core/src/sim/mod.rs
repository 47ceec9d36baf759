//! Lane-based 2D traffic simulation: roads, kinematics, collision and boundary checks.

pub mod geometry;
pub mod road;
pub mod vehicle;
pub mod world;

pub use geometry::{Obb, Vec2};
pub use road::{build_road, BlockKind, BlockSpec, Frenet, Projection, RoadNetwork};
pub use vehicle::{step_ego, step_vehicle, EgoCommand, Maneuver, Side, VehicleParams, VehicleState};
pub use world::{detect_collisions, is_within_boundary, min_neighbor_distance, WorldState, EGO_ID};

//! Dual-layer driving planner.
//!
//! Rule-based bottom-layer planners (IDM, lattice, sampling) produce
//! trajectories; an upper-layer reasoner reads a text rendering of the scene
//! and can only lower the speed cap those planners obey.

pub mod corpus;
pub mod encoder;
pub mod frame;
pub mod metrics;
pub mod geom;
pub mod planners;
pub mod reasoner;
pub mod scenario;
pub mod sim;

pub use frame::{AgentSnapshot, EgoSnapshot, Frame};
pub use geom::{CartesianPose, FrenetPose, OrientedBox, ReferencePath};
pub use planners::{Planner, PlannerKind, Trajectory};
pub use scenario::{AgentKind, Scenario};

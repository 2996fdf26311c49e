//! Counter-diabatic driving of one-dimensional Hamiltonians, classical and
//! quantum. Everything is generic over the scalar [`Real`]; the aliases below
//! fix it to `f64` (and `f32` where single precision is useful).

pub mod classical;
pub mod error;
pub mod generators;
pub mod model;
pub mod numerics;
pub mod quantum;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type PhasePoint64 = model::PhasePoint<f64>;
pub type ParamValue64 = model::ParamValue<f64>;
pub type System64 = model::SystemModel<f64>;
pub type System32 = model::SystemModel<f32>;
pub type Schedule64 = model::Schedule<f64>;
pub type Schedule32 = model::Schedule<f32>;
pub type Trajectory64 = classical::TrajectoryRecord<f64>;
pub type Ensemble64 = classical::EnsembleRecord<f64>;
pub type Grid64 = quantum::GridSpec<f64>;
pub type GridTrajectory64 = quantum::GridTrajectory<f64>;
pub type BasisTrajectory64 = quantum::BasisTrajectory<f64>;

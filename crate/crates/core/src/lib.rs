//! Simulator and analysis toolkit for a nondegenerate Josephson parametric
//! oscillator: two resonator modes pumped near the sum of their
//! frequencies, with Kerr nonlinearity, vacuum noise and coherent injection.
//!
//! The physics types are generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar type for the common cases.

pub mod analysis;
pub mod dynamics;
pub mod experiments;
pub mod model;
pub mod scalar;

pub use scalar::Real;

pub type TwoModeSystem64 = model::TwoModeSystem<f64>;
pub type TwoModeSystem32 = model::TwoModeSystem<f32>;
pub type PumpDrive64 = model::PumpDrive<f64>;
pub type PumpDrive32 = model::PumpDrive<f32>;
pub type FieldState64 = model::FieldState<f64>;
pub type FieldState32 = model::FieldState<f32>;
pub type InjectionTone64 = model::InjectionTone<f64>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type Trajectory32 = dynamics::Trajectory<f32>;
pub type IntegratorConfig64 = dynamics::IntegratorConfig<f64>;
pub type SpectralDensity64 = analysis::SpectralDensity<f64>;

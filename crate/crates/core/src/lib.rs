//! Simulation laboratory for thermal-noise stochastic calculus: exact
//! Ornstein-Uhlenbeck current sampling, the circuit-energy equation under
//! both Ito and Stratonovich rules (including the pinned-restart solution
//! families of the latter), evaluation-point stochastic integrals, backward
//! solution pairs for the Langevin velocity, and a reproducible Monte Carlo
//! engine that checks equilibrium limits against closed forms.
//!
//! All numerics are generic over the scalar type through [`real::Real`];
//! concrete `f64` aliases for the common types live at the crate root.

pub mod bsde;
pub mod circuit;
pub mod error;
pub mod mc;
pub mod randpath;
pub mod real;
pub mod stochint;

pub use error::CoreError;
pub use real::Real;

/// `f64` aliases for the core domain types.
pub type TimeGrid64 = randpath::TimeGrid<f64>;
pub type WienerPath64 = randpath::WienerPath<f64>;
pub type CircuitParams64 = randpath::CircuitParams<f64>;
pub type EnergyPath64 = circuit::EnergyPath<f64>;
pub type RestartSchedule64 = circuit::RestartSchedule<f64>;
pub type StoppingLog64 = circuit::StoppingLog<f64>;
pub type ParticleParams64 = bsde::ParticleParams<f64>;
pub type PsiSpec64 = bsde::PsiSpec<f64>;
pub type BsdePair64 = bsde::BsdePair<f64>;
pub type AlphaRule64 = stochint::AlphaRule<f64>;
pub type EnsembleStats64 = mc::EnsembleStats<f64>;
pub type Experiment64 = mc::Experiment<f64>;
pub type Observable64 = mc::Observable<f64>;
pub type EnsembleReport64 = mc::EnsembleReport<f64>;
pub type ScheduleSpec64 = mc::ScheduleSpec<f64>;
pub type DurationSpec64 = mc::DurationSpec<f64>;
pub type InitialEnergy64 = mc::InitialEnergy<f64>;
pub type CoreError64 = error::CoreError<f64>;

//! Dynamic structure factor of a mean-field Fermi superfluid across the
//! BCS-BEC crossover and its imprint on the decoherence of an impurity qubit.
//!
//! The numerical core is generic over the scalar type through [`num::Real`];
//! the aliases below fix it to `f64`, which is what the tolerances are tuned for.

pub mod dsf;
pub mod eos;
pub mod error;
pub mod impurity;
pub mod num;
pub mod quad;
pub mod qubit;
pub mod roots;
pub mod susceptibility;

pub use error::{Error, Result};
pub use eos::GasUnits;

pub type CrossoverPoint = eos::CrossoverPoint<f64>;
pub type EosSolver = eos::EosSolver<f64>;
pub type EosSettings = eos::EosSettings<f64>;

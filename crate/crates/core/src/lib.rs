//! Multistable steady states of an optomechanical cavity filled with
//! Λ-type atoms under EIT conditions.
//!
//! Units: every rate and frequency is in units of the atomic decay `gamma1`, ħ = 1.

pub mod cli;
pub mod dd;
pub mod dynamics;
pub mod error;
pub mod params;
pub mod stability;
pub mod steady_state;
pub mod susceptibility;
pub mod thresholds;

pub use error::{ConfigError, ParamError, SolveError, StabilityError};
pub use params::SystemParams;
pub use steady_state::{find_steady_states, BranchSolution, Stability, SteadyStates};

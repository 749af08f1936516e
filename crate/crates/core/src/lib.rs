pub mod analytics;
pub mod delay;
pub mod error;
pub mod experiments;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod verify;
pub mod wiener;

pub use analytics::{Binding, Estimate, FrequencyConstraint, MomentMethod, ThresholdSolution};
pub use delay::DelayModel;
pub use error::{Error, Result};
pub use sim::{CycleRecord, PolicySpec, SimOptions, SimulationResult};

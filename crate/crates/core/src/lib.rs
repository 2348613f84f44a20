//! Matrix-analytic engine for a multi-state unit with internal wear, external
//! shocks, preventive maintenance and a Bernoulli vacation policy for the
//! repairperson, modelled as a marked Markovian arrival process.

pub mod economics;
pub mod matkit;
pub mod measures;
pub mod mmap;
pub mod model;
pub mod phdist;
pub mod scalar;
#[cfg(feature = "testkit")]
pub mod testkit;

pub use economics::{cost_vector, BreakEven, EconError, EconomicParameters};
pub use matkit::{expm, expm_integral, kron, solve_normalized, MatError, Matrix};
pub use measures::{EventKind, EventRates, Horizon, MacroDistribution, MeasureError};
pub use mmap::{EventLabel, MarkedProcess, MmapError};
pub use model::{MacroState, ModelConfig, ModelError, StateLayout, SystemModel, TimeMode};
pub use phdist::{ContinuousPh, DiscretePh, PhError};
pub use scalar::Scalar;

pub type Mat = Matrix<f64>;
pub type Mat32 = Matrix<f32>;
pub type Model = SystemModel<f64>;
pub type Model32 = SystemModel<f32>;
pub type Process = MarkedProcess<f64>;
pub type Process32 = MarkedProcess<f32>;

//! Vacation-policy optimization: an order-3 Coxian vacation plus stay
//! probabilities, searched with NSGA-II for the trade-off between long-run
//! profit rate and availability.

mod ga;
mod policy;
mod select;

use thiserror::Error;

pub use ga::{encode, pareto_front, Bounds, GaConfig};
pub use policy::{evaluate, instantiate, ParetoPoint, PolicyParams};
pub use select::{
    dominates, ideal_point, nondominated, normalize, select_closest, select_max_availability, select_max_profit,
};

#[derive(Debug, Error)]
pub enum OptError {
    #[error("invalid policy: {0}")]
    InvalidParams(String),
    #[error("invalid search settings: {0}")]
    InvalidConfig(String),
    #[error("policies are defined on a continuous-time template")]
    DiscreteTemplate,
    #[error("empty front")]
    EmptyFront,
    #[error("no feasible candidate found after resampling")]
    NoFeasibleCandidate,
    #[error(transparent)]
    Model(#[from] mmap_rel::ModelError),
    #[error(transparent)]
    Mmap(#[from] mmap_rel::MmapError),
    #[error(transparent)]
    Measure(#[from] mmap_rel::MeasureError),
    #[error(transparent)]
    Econ(#[from] mmap_rel::EconError),
    #[error("cannot read bounds: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed bounds JSON: {0}")]
    Json(#[from] serde_json::Error),
}

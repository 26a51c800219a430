//! Closed-form TD(lambda) fixed points for POMDPs, the lambda-discrepancy
//! between them, and memory learning that drives the discrepancy to zero.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root pin the common `f64` instantiations.

pub mod extended;
pub mod linalg;
pub mod memory;
pub mod model;
pub mod optimizer;
pub mod parser;
pub mod sampler;
pub mod scalar;
pub mod solver;

pub use extended::DoubleDouble;
pub use linalg::{LinalgError, Lu};
pub use memory::{augment, lift_policy, MemoryFn, MemoryRecord};
pub use model::{
    policy_tensors, validate, Check, CheckResult, ModelError, Policy, PolicyTensors, Pomdp,
    Tolerances, ValidationReport,
};
pub use optimizer::{
    expected_return, finite_difference_check, improve_memory, ld_gradient,
    optimize_with_value_improvement, policy_gradient_improve, policy_search, return_gradient,
    FdCheck, GradientReport, ImprovementRun, OptimConfig, OptimError, RunSummary,
};
pub use parser::{parse_pomdp, to_cassandra, Origin, ParseError, PomdpSource};
pub use sampler::{estimate_ld, estimate_q_lambda, simulate, SamplerError, Trajectory};
pub use scalar::Scalar;
pub use solver::{
    effective_mdp, lambda_discrepancy, q_lambda, stationary_weights, v_lambda, DiscrepancySpec,
    EffectiveMdp, NormKind, QTable, SolverError, StationaryWeights, VTable,
};

pub type Pomdp64 = Pomdp<f64>;
pub type Policy64 = Policy<f64>;
pub type MemoryFn64 = MemoryFn<f64>;
pub type QTable64 = QTable<f64>;
pub type PomdpSource64 = PomdpSource<f64>;
pub type Pomdp32 = Pomdp<f32>;
pub type Policy32 = Policy<f32>;

//! Collateral allocation under ISDA-CSA terms.
//!
//! The pipeline is explore → prove → explain: [`explorer::hybrid_optimize`]
//! anneals integer lot vectors and fires micro HO-QAOA jumps on coupled
//! sub-problems, [`certifier::certify`] proves optimality by
//! branch-and-bound, and [`governance::emit_bundle`] writes the audit
//! artifacts.
//!
//! Money is exact (integer cents); the numeric kernels are generic over
//! [`Scalar`] with `f64` and `f32` aliases below.

pub mod baselines;
pub mod canonical;
pub mod certifier;
pub mod data_model;
pub mod error;
pub mod explorer;
pub mod fixtures;
pub mod governance;
pub mod hubo;
pub mod instance_gen;
pub mod money;
pub mod objective;
pub mod problem;
pub mod qaoa_sim;
pub mod requirement;
pub mod scalar;

pub use data_model::{parse_case, serialize_case, CaseInput, SolverLimits};
pub use error::{Error, Result};
pub use money::{Fraction, Money};
pub use problem::Problem;
pub use requirement::Allocation;
pub use scalar::Scalar;

pub type HuboF64 = hubo::Hubo<f64>;
pub type HuboF32 = hubo::Hubo<f32>;
pub type StateVectorF64 = qaoa_sim::StateVector<f64>;
pub type StateVectorF32 = qaoa_sim::StateVector<f32>;
pub type AnglesF64 = qaoa_sim::Angles<f64>;
pub type AnglesF32 = qaoa_sim::Angles<f32>;

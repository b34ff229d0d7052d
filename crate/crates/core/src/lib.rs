//! Gradient-bounded dual dynamic programming for finite-horizon stochastic
//! DPs on integer boxes, with a policy validation harness and finite-sample
//! profit bounds.
//!
//! The value function at each epoch is over-approximated by the pointwise
//! minimum of affine planes ([`cuts::CutStack`]). Training
//! ([`trainer::train`]) alternates sampled greedy rollouts with backward cut
//! generation; [`validator::validate`] evaluates the induced policy and
//! [`bounds`] turns the validation profits into lower bounds.

pub mod bounds;
pub mod cuts;
pub mod error;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod trainer;
pub mod validator;

pub use cuts::{CutStack, Hyperplane, PlaneSet};
pub use error::{Error, Result};
pub use model::{DPInstance, PriceVector, StateVector};
pub use oracle::{solve_exact, ExactValueTable};
pub use trainer::{train, SamplePath, TrainConfig, TrainingTrace};
pub use validator::{validate, ValidationSummary};

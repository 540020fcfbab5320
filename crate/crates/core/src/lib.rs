//! Online covering linear programs with multiple expert predictions.
//!
//! Rows `a^t·x >= 1` of a covering LP `min c·x` arrive one at a time and
//! the solution may only grow. Several experts each propose a feasible,
//! monotone solution on every step; [`algo::OnlineAlgorithm`] combines them
//! through an entropy-regularized step program solved by Frank-Wolfe.
//!
//! Also included: instance generators ([`instance`]), expert strategies
//! ([`experts`]), a dense simplex solver with the benchmark programs
//! ([`lp`]), baseline algorithms ([`baselines`]) and the verification
//! harness ([`harness`]).

pub mod algo;
pub mod baselines;
pub mod error;
pub mod experts;
pub mod harness;
pub mod instance;
pub mod lp;
pub mod preprocess;

pub use error::{Error, Result};

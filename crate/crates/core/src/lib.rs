//! Sufficiency of subalgebras and channels for families of finite-dimensional
//! quantum states.

pub mod algebra;
pub mod channel;
pub mod classical;
pub mod divergence;
pub mod error;
pub mod expfam;
pub mod factorization;
pub mod gaussian;
pub mod numerics;
pub mod operator;
pub mod random;
pub mod schema;
pub mod sufficiency;

pub use algebra::StarSubalgebra;
pub use channel::QuantumChannel;
pub use classical::{FiniteExperiment, Statistic};
pub use error::{Error, Result};
pub use operator::{DensityMatrix, HermitianOperator};
pub use sufficiency::{StatisticalExperiment, SufficiencyConfig, SufficiencyVerdict};

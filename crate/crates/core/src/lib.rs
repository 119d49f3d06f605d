//! Minimum-mutual-information channels under distortion, truth-function and
//! semantic-information constraints.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function over immutable values; file formats, the command line and
//! image ingestion live in the `ratetruth` companion crate.
//!
//! Module map:
//!
//! - [`prob`]: grids, distributions, channels, classical and semantic Bayes.
//! - [`measures`]: entropies, mutual information, KL and the semantic
//!   information (G) family.
//! - [`truth`]: parametric truth functions, the truth/distortion transform
//!   and truth-function learning.
//! - [`solver`]: the MMI alternating-minimization engine and the R(D),
//!   R(Θ) and R(G) rate functions.
//! - [`maxent`]: maximum-entropy channels and the Boltzmann identities.
//! - [`scenarios`]: the two worked examples and the reproduction runner.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod error;
pub mod math;
pub mod maxent;
pub mod measures;
pub mod prob;
pub mod scenarios;
pub mod solver;
pub mod truth;

pub use error::{Error, Result};
pub use measures::{Bits, SemanticMIReport};
pub use prob::{Channel, Distribution, Grid, JointDistribution, LabelSet};
pub use solver::{ConstraintKernel, ConstraintSource, SolverOptions, SolverResult, Variant};
pub use truth::{DistortionMatrix, SemanticChannel, TruthSpec};

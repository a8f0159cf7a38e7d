//! Longest-common-substring statistics for random sequences in random
//! environments (random Bernoulli subshifts).
//!
//! * [`base_env`] samples the environment process.
//! * [`measures`] evaluates and samples the fiber measures it drives.
//! * [`matching`] computes `M_n(x, y)` exactly.
//! * [`entropy`] gives the Rényi entropy `H₂` and the decay rate `h₀`,
//!   in closed form and by estimation.
//! * [`harness`] runs the quenched and annealed growth experiments for
//!   `M_n / log n`.
//! * [`config`] reads the JSON experiment description.

pub mod base_env;
pub mod config;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod matching;
pub mod measures;
pub mod rng;

/// Environment and fiber symbols are small unsigned integers.
pub type Symbol = u32;

pub use base_env::{sample_environment, shift_environment, BaseProcess, Environment};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use matching::{lcs_bruteforce, lcs_exact, match_curve, MatchCurve, MatchResult};
pub use measures::RandomBernoulliSystem;

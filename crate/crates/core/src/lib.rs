//! Exact computation of the weak-mean pseudometric
//!
//! ```text
//! F̄(x, y) = limsup_n  min_{σ ∈ S_n} (1/n) Σ_{k=1..n} d(T^k x, T^{σ(k)} y)
//! ```
//!
//! and its relatives (Besicovitch statistic, permutation-maximized mean,
//! threshold exceedance counts, observable pseudometrics) for a small
//! menagerie of topological dynamical systems: circle rotations, the
//! doubling and tent maps, full shifts, Sturmian subshifts and products.
//!
//! All state and all statistics are exact rationals. The inner
//! optimization over permutations is solved exactly ([`matching`]), orbit
//! statistics are assembled on finite `n`-schedules ([`orbitstats`]), and
//! the equicontinuity/sensitivity definitions are turned into finite-scale
//! probes with witnesses ([`classify`]).

pub mod classify;
pub mod error;
pub mod matching;
pub mod orbitstats;
pub mod rational;
pub mod spaces;
pub mod systems;

pub use error::{Error, Result};
pub use rational::Rational;

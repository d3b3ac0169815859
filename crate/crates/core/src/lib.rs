//! Exact solvers, elimination-based learners and complexity calculators for
//! two-player zero-sum episodic Markov games.
//!
//! * [`game`]: tabular games, matrix-game LP, Nash value iteration, best
//!   responses, exact evaluation and sampling.
//! * [`hypothesis`]: finite and linear value families, policy, model and
//!   test-function families, and the policies a hypothesis induces.
//! * [`onemg`]: optimistic Nash elimination against an arbitrary opponent.
//! * [`linear`]: the least-squares variant with elliptical confidence sets.
//! * [`aome`]: model elimination with alternate optimism and witnessed misfit.
//! * [`aove`]: value elimination over policy/value pairs.
//! * [`complexity`]: brute-force Eluder-type dimensions and assumption checks.
//! * [`harness`]: generators, seeded sweeps, statistics and report output.

pub mod aome;
pub mod aove;
pub mod complexity;
pub mod error;
pub mod exec;
pub mod fileio;
pub mod game;
pub mod harness;
pub mod hypothesis;
pub mod linear;
pub mod onemg;
pub mod rng;

pub use error::{Error, Result};
pub use exec::Execution;
